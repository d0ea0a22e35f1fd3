use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{
    expand_terms, predict_logreg, predict_nb, train_logreg, train_nb, ClfError, ConfusionMatrix,
    LogRegModel, LogRegParams, Metrics, NaiveBayesModel, SearchTerm, TermExpansion, DEFAULT_ALPHA,
};
use crate::corpus::Document;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Nb,
    Logreg,
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nb" => Ok(Algorithm::Nb),
            "logreg" => Ok(Algorithm::Logreg),
            other => Err(format!("unknown algorithm `{other}` (expected nb or logreg)")),
        }
    }
}

/// One matched vocabulary word and how well it separates the test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermReport {
    pub word: String,
    pub matched_by: String,
    pub predicted_category: String,
    /// `None` when the word occurs in no test document.
    pub accuracy: Option<f64>,
    pub correct: u64,
    /// Test documents containing the word.
    pub targeted: u64,
    pub score: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSummary {
    pub pattern: String,
    pub reason: String,
    pub words: Vec<String>,
    pub score: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub algorithm: Algorithm,
    pub categories: Vec<String>,
    pub rows: Vec<TermReport>,
    pub terms: Vec<TermSummary>,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub test_documents: u64,
    /// Test documents without any feature word, left out of the confusion matrix.
    pub excluded_test_documents: u64,
    pub total_score: u64,
}

/// Chance-corrected coverage: `targeted * max(0, accuracy - 1/k) / (1 - 1/k)`,
/// rounded to the nearest integer.
pub fn score_term(accuracy: f64, targeted: u64, k: usize) -> u64 {
    if targeted == 0 || k < 2 {
        return 0;
    }
    let chance = 1.0 / k as f64;
    let gain = (accuracy - chance).max(0.0) / (1.0 - chance);
    (targeted as f64 * gain).round() as u64
}

/// [`score_term`] in exact integer arithmetic for `accuracy = correct / targeted`.
pub fn score_counts(correct: u64, targeted: u64, k: usize) -> u64 {
    if targeted == 0 || k < 2 {
        return 0;
    }
    let k = k as u64;
    let excess = (k * correct).saturating_sub(targeted);
    (2 * excess + (k - 1)) / (2 * (k - 1))
}

fn category_index(categories: &[String], name: &str) -> Result<usize, ClfError> {
    categories
        .iter()
        .position(|c| c == name)
        .ok_or_else(|| ClfError::UnknownCategory(name.to_string()))
}

fn assemble(
    algorithm: Algorithm,
    categories: &[String],
    terms: &[SearchTerm],
    expansion: &TermExpansion,
    word_category: impl Fn(&str) -> usize,
    predict: impl Fn(&[String]) -> usize,
    test_docs: &[&Document],
) -> Result<EvaluationReport, ClfError> {
    let features = expansion.feature_words();
    let k = categories.len();
    let gold: Vec<usize> = test_docs
        .iter()
        .map(|d| category_index(categories, &d.category))
        .collect::<Result<_, _>>()?;

    let mut rows: Vec<TermReport> = features
        .iter()
        .map(|word| {
            let predicted = word_category(word);
            let mut targeted = 0;
            let mut correct = 0;
            for (doc, &g) in test_docs.iter().zip(&gold) {
                if doc.contains(word) {
                    targeted += 1;
                    if g == predicted {
                        correct += 1;
                    }
                }
            }
            TermReport {
                word: word.clone(),
                matched_by: expansion.first_pattern(word).unwrap_or_default().to_string(),
                predicted_category: categories[predicted].clone(),
                accuracy: (targeted > 0).then(|| correct as f64 / targeted as f64),
                correct,
                targeted,
                score: score_counts(correct, targeted, k),
            }
        })
        .collect();
    rows.sort_by(|a, b| b.score.cmp(&a.score).then_with(|| a.word.cmp(&b.word)));

    let mut confusion = ConfusionMatrix::new(categories.to_vec());
    let mut excluded = 0;
    for (doc, &g) in test_docs.iter().zip(&gold) {
        if doc.tokens.iter().any(|t| features.contains(t)) {
            confusion.record(g, predict(&doc.tokens));
        } else {
            excluded += 1;
        }
    }
    let metrics = Metrics::from_confusion(&confusion);

    let summaries: Vec<TermSummary> = expansion
        .matches
        .iter()
        .map(|(pattern, words)| TermSummary {
            pattern: pattern.clone(),
            reason: terms
                .iter()
                .find(|t| t.pattern.trim().to_lowercase() == *pattern)
                .map(|t| t.reason.clone())
                .unwrap_or_default(),
            words: words.iter().cloned().collect(),
            score: rows.iter().filter(|r| r.matched_by == *pattern).map(|r| r.score).sum(),
        })
        .collect();

    Ok(EvaluationReport {
        algorithm,
        categories: categories.to_vec(),
        total_score: rows.iter().map(|r| r.score).sum(),
        rows,
        terms: summaries,
        confusion,
        metrics,
        test_documents: test_docs.len() as u64,
        excluded_test_documents: excluded,
    })
}

/// Scores every matched word of `expansion` against `test_docs`: each word
/// predicts its likeliest category under `model`, documents are classified by
/// posterior argmax.
pub fn evaluate_terms(
    model: &NaiveBayesModel,
    terms: &[SearchTerm],
    expansion: &TermExpansion,
    test_docs: &[&Document],
) -> Result<EvaluationReport, ClfError> {
    if model.feature_words() != Some(&expansion.feature_words()) {
        return Err(ClfError::ModelFeatureMismatch);
    }
    assemble(
        Algorithm::Nb,
        model.categories(),
        terms,
        expansion,
        |w| model.likeliest_category(w),
        |tokens| predict_nb(model, tokens).argmax(),
        test_docs,
    )
}

/// As [`evaluate_terms`], with each word predicting the category holding its
/// largest weight.
pub fn evaluate_terms_logreg(
    model: &LogRegModel,
    terms: &[SearchTerm],
    expansion: &TermExpansion,
    test_docs: &[&Document],
) -> Result<EvaluationReport, ClfError> {
    let features = expansion.feature_words();
    if !model.feature_words.iter().eq(features.iter()) {
        return Err(ClfError::ModelFeatureMismatch);
    }
    assemble(
        Algorithm::Logreg,
        &model.categories,
        terms,
        expansion,
        |w| model.heaviest_category(w).unwrap_or(0),
        |tokens| predict_logreg(model, tokens).argmax(),
        test_docs,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub logreg: LogRegParams,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            algorithm: Algorithm::Nb,
            alpha: DEFAULT_ALPHA,
            logreg: LogRegParams::default(),
        }
    }
}

/// Expands `terms` over the training vocabulary, fits the chosen classifier
/// on `train_docs` with those words as features, and evaluates on `test_docs`.
pub fn run_pipeline(
    train_docs: &[&Document],
    test_docs: &[&Document],
    categories: &[String],
    terms: &[SearchTerm],
    params: &PipelineParams,
) -> Result<EvaluationReport, ClfError> {
    if train_docs.is_empty() {
        return Err(ClfError::EmptyTrainingSet);
    }
    let vocabulary: BTreeSet<String> = train_docs
        .iter()
        .flat_map(|d| d.tokens.iter().cloned())
        .collect();
    let expansion = expand_terms(terms, &vocabulary)?;
    let features = expansion.feature_words();
    if features.is_empty() {
        return Err(ClfError::NoFeaturesMatched);
    }
    match params.algorithm {
        Algorithm::Nb => {
            let model = train_nb(train_docs.iter().copied(), categories, Some(&features), params.alpha)?;
            evaluate_terms(&model, terms, &expansion, test_docs)
        }
        Algorithm::Logreg => {
            let model = train_logreg(train_docs.iter().copied(), categories, &features, params.logreg)?;
            evaluate_terms_logreg(&model, terms, &expansion, test_docs)
        }
    }
}
