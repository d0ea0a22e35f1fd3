use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;
use textlab_core::classroom::{AnalysisId, Classroom, ClassroomError, ProjectId, Settings};
use textlab_core::corpus::{ingest_csv, ingest_json, Corpus, Document, SplitSpec};
use textlab_core::textclf::{run_pipeline, Algorithm, EvaluationReport, PipelineParams, SearchTerm, DEFAULT_ALPHA};

use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Store directory, used with --analysis or --project.
    #[arg(long, env = "TEXTLAB_DATA_DIR")]
    pub data_dir: Option<PathBuf>,

    /// Evaluate on an existing analysis' pool, split and alpha.
    #[arg(long, conflicts_with_all = ["project", "corpus"], requires = "data_dir")]
    pub analysis: Option<u64>,

    /// Evaluate on every document of a project, split with --seed.
    #[arg(long, conflicts_with = "corpus", requires = "data_dir")]
    pub project: Option<u64>,

    /// Corpus file (CSV or JSON by extension), optionally `FILE=CATEGORY`
    /// when the file has no category column. Repeatable.
    #[arg(long, value_name = "FILE[=CATEGORY]")]
    pub corpus: Vec<String>,

    /// Search terms: a JSON array of {"pattern","reason"} objects, or one
    /// term per line as `pattern reason...`.
    #[arg(long)]
    pub terms: PathBuf,

    #[arg(long, default_value = "nb", value_parser = parse_algorithm)]
    pub algorithm: Algorithm,

    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,

    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

/// Train and test documents with their category list.
pub struct Dataset {
    pub categories: Vec<String>,
    pub alpha: f64,
    pub train: Vec<Document>,
    pub test: Vec<Document>,
}

fn split(categories: Vec<String>, docs: Vec<Document>, fraction: f64, seed: u64, alpha: f64) -> Result<Dataset, Failure> {
    if categories.len() < 2 {
        return Err(ClassroomError::TooFewCategories(categories.len()).into());
    }
    let spec = SplitSpec::stratified(&docs, fraction, seed)?;
    let (train, test) = docs.into_iter().partition(|d| spec.is_train(d.id));
    Ok(Dataset {
        categories,
        alpha,
        train,
        test,
    })
}

pub fn read_corpus_file(spec: &str) -> Result<Corpus, Failure> {
    let (path, category) = match spec.rsplit_once('=') {
        Some((p, c)) if !c.is_empty() && !Path::new(spec).exists() => (p, Some(c)),
        _ => (spec, None),
    };
    let bytes = std::fs::read(path).map_err(|e| Failure::config(format!("cannot read {path}: {e}")))?;
    let is_json = Path::new(path)
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let mut corpus = if is_json {
        ingest_json(&bytes, category)?
    } else {
        ingest_csv(&bytes, category)?
    };
    corpus.name = Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(corpus)
}

pub fn load_dataset(args: &EvalArgs) -> Result<Dataset, Failure> {
    if let Some(id) = args.analysis {
        let classroom = open_store(args)?;
        let d = classroom.analysis_dataset(AnalysisId(id))?;
        return Ok(Dataset {
            categories: d.categories,
            alpha: d.alpha,
            train: d.train,
            test: d.test,
        });
    }
    if let Some(id) = args.project {
        let classroom = open_store(args)?;
        let (categories, docs) = classroom.project_documents(ProjectId(id))?;
        return split(categories, docs, args.train_fraction, args.seed, args.alpha);
    }
    if args.corpus.is_empty() {
        return Err(Failure::config("give --analysis, --project, or at least one --corpus"));
    }
    let mut docs = Vec::new();
    let mut next = 0;
    for spec in &args.corpus {
        let mut corpus = read_corpus_file(spec)?;
        next = corpus.renumber(next);
        docs.extend(corpus.documents);
    }
    let categories: BTreeSet<String> = docs.iter().map(|d| d.category.clone()).collect();
    split(categories.into_iter().collect(), docs, args.train_fraction, args.seed, args.alpha)
}

fn open_store(args: &EvalArgs) -> Result<Classroom, Failure> {
    let dir = args.data_dir.as_deref().expect("clap requires data_dir");
    Ok(Classroom::open_read_only(dir, Settings::default())?)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonTerm {
    Object {
        pattern: String,
        #[serde(default)]
        reason: String,
    },
    Pair(String, String),
    Bare(String),
}

/// Parses a terms file into `(pattern, reason)` pairs.
pub fn parse_terms(text: &str) -> Result<Vec<(String, String)>, Failure> {
    if text.trim_start().starts_with('[') {
        let terms: Vec<JsonTerm> =
            serde_json::from_str(text).map_err(|e| Failure::config(format!("terms file is not valid JSON: {e}")))?;
        return Ok(terms
            .into_iter()
            .map(|t| match t {
                JsonTerm::Object { pattern, reason } | JsonTerm::Pair(pattern, reason) => (pattern, reason),
                JsonTerm::Bare(pattern) => (pattern, String::new()),
            })
            .collect());
    }
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|line| match line.split_once(|c: char| c.is_whitespace()) {
            Some((p, r)) => (p.to_string(), r.trim().to_string()),
            None => (line.to_string(), String::new()),
        })
        .collect())
}

pub fn read_terms(path: &Path) -> Result<Vec<(String, String)>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let terms = parse_terms(&text)?;
    if terms.is_empty() {
        return Err(ClassroomError::NoTerms.into());
    }
    Ok(terms)
}

pub fn evaluate(args: &EvalArgs) -> Result<EvaluationReport, Failure> {
    let terms = read_terms(&args.terms)?
        .into_iter()
        .map(|(p, r)| SearchTerm::new(&p, r))
        .collect::<Result<Vec<_>, _>>()?;
    let data = load_dataset(args)?;
    let params = PipelineParams {
        algorithm: args.algorithm,
        alpha: data.alpha,
        ..PipelineParams::default()
    };
    let train: Vec<&Document> = data.train.iter().collect();
    let test: Vec<&Document> = data.test.iter().collect();
    Ok(run_pipeline(&train, &test, &data.categories, &terms, &params)?)
}

fn accuracy_cell(acc: Option<f64>) -> String {
    acc.map_or_else(|| "-".to_string(), |a| format!("{a:.4}"))
}

pub const COLUMNS: [&str; 5] = ["word", "predicted", "accuracy", "targeted", "score"];

fn cells(report: &EvaluationReport) -> Vec<[String; 5]> {
    report
        .rows
        .iter()
        .map(|r| {
            [
                r.word.clone(),
                r.predicted_category.clone(),
                accuracy_cell(r.accuracy),
                r.targeted.to_string(),
                r.score.to_string(),
            ]
        })
        .collect()
}

pub fn render(report: &EvaluationReport, format: Format, out: &mut impl Write) -> Result<(), Failure> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, report)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            let row_err = |e: csv::Error| Failure::config(e);
            w.write_record(COLUMNS).map_err(row_err)?;
            for row in cells(report) {
                w.write_record(&row).map_err(row_err)?;
            }
            w.flush()?;
        }
        Format::Table => {
            let rows = cells(report);
            let mut widths = COLUMNS.map(str::len);
            for row in &rows {
                for (w, cell) in widths.iter_mut().zip(row) {
                    *w = (*w).max(cell.chars().count());
                }
            }
            let line = |cells: [&str; 5]| {
                cells
                    .iter()
                    .zip(widths)
                    .enumerate()
                    .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            writeln!(out, "{}", line(COLUMNS))?;
            for row in &rows {
                writeln!(out, "{}", line([&row[0], &row[1], &row[2], &row[3], &row[4]]))?;
            }
            let m = &report.metrics;
            writeln!(out)?;
            writeln!(
                out,
                "documents: {} scored, {} without feature words",
                report.test_documents - report.excluded_test_documents,
                report.excluded_test_documents
            )?;
            writeln!(
                out,
                "accuracy: {}  macro F1: {}",
                accuracy_cell(m.accuracy),
                accuracy_cell(m.macro_f1)
            )?;
            writeln!(out, "total score: {}", report.total_score)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terms_from_lines_and_json() {
        let lines = parse_terms("billionaire* wealth talk\n\nsoul\n#hashtag\tsocial").unwrap();
        assert_eq!(
            lines,
            [
                ("billionaire*".to_string(), "wealth talk".to_string()),
                ("soul".to_string(), String::new()),
                ("#hashtag".to_string(), "social".to_string()),
            ]
        );
        let json = parse_terms(r#"[{"pattern":"a*","reason":"r"},["b","s"],"c"]"#).unwrap();
        assert_eq!(json.len(), 3);
        assert_eq!(json[1], ("b".to_string(), "s".to_string()));
        assert!(parse_terms("[oops").is_err());
    }
}
