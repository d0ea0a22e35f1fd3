use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{argmax, softmax, ClfError, Distribution};
use crate::corpus::Document;

pub const DEFAULT_ALPHA: f64 = 1.0;
const MODEL_VERSION: u32 = 1;

/// Multinomial Naive Bayes with additive smoothing.
///
/// Holds raw integer counts only; probabilities are derived on demand, so a
/// model built incrementally with [`update_nb`] is bit-for-bit the same value
/// as one built in a single pass with [`train_nb`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct NaiveBayesModel {
    categories: Vec<String>,
    word_counts: BTreeMap<String, Vec<u64>>,
    category_token_totals: Vec<u64>,
    category_doc_counts: Vec<u64>,
    alpha: f64,
    feature_words: Option<BTreeSet<String>>,
}

impl NaiveBayesModel {
    /// A model with no observations. When `feature_words` is `None` every
    /// token is a feature.
    pub fn empty(
        categories: &[String],
        alpha: f64,
        feature_words: Option<BTreeSet<String>>,
    ) -> Result<Self, ClfError> {
        if categories.is_empty() {
            return Err(ClfError::InvalidModel("no categories".into()));
        }
        let distinct: BTreeSet<&String> = categories.iter().collect();
        if distinct.len() != categories.len() {
            return Err(ClfError::InvalidModel("duplicate category".into()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ClfError::InvalidModel(format!("smoothing must be positive, got {alpha}")));
        }
        Ok(NaiveBayesModel {
            categories: categories.to_vec(),
            word_counts: BTreeMap::new(),
            category_token_totals: vec![0; categories.len()],
            category_doc_counts: vec![0; categories.len()],
            alpha,
            feature_words,
        })
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn feature_words(&self) -> Option<&BTreeSet<String>> {
        self.feature_words.as_ref()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.word_counts.len()
    }

    pub fn word_counts(&self) -> &BTreeMap<String, Vec<u64>> {
        &self.word_counts
    }

    pub fn count(&self, word: &str, category: usize) -> u64 {
        self.word_counts.get(word).map_or(0, |c| c[category])
    }

    pub fn category_token_totals(&self) -> &[u64] {
        &self.category_token_totals
    }

    pub fn category_doc_counts(&self) -> &[u64] {
        &self.category_doc_counts
    }

    pub fn total_docs(&self) -> u64 {
        self.category_doc_counts.iter().sum()
    }

    pub fn category_index(&self, category: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == category)
    }

    fn is_feature(&self, word: &str) -> bool {
        self.feature_words.as_ref().is_none_or(|f| f.contains(word))
    }

    /// Adds one document's tokens to the counts in place.
    pub fn observe(&mut self, tokens: &[String], category: &str) -> Result<(), ClfError> {
        let c = self
            .category_index(category)
            .ok_or_else(|| ClfError::UnknownCategory(category.to_string()))?;
        let k = self.categories.len();
        for token in tokens {
            if !self.is_feature(token) {
                continue;
            }
            match self.word_counts.get_mut(token.as_str()) {
                Some(counts) => counts[c] += 1,
                None => {
                    let mut counts = vec![0; k];
                    counts[c] = 1;
                    self.word_counts.insert(token.clone(), counts);
                }
            }
            self.category_token_totals[c] += 1;
        }
        self.category_doc_counts[c] += 1;
        Ok(())
    }

    /// `ln P(word | category)` with additive smoothing.
    pub fn log_likelihood(&self, word: &str, category: usize) -> f64 {
        let v = self.vocabulary_size() as f64;
        let num = self.count(word, category) as f64 + self.alpha;
        let den = self.category_token_totals[category] as f64 + self.alpha * v;
        (num / den).ln()
    }

    /// Category with the highest `P(word | c)`, ignoring priors. Ties go to
    /// the earlier category.
    pub fn likeliest_category(&self, word: &str) -> usize {
        let scores: Vec<f64> = (0..self.categories.len())
            .map(|c| self.log_likelihood(word, c))
            .collect();
        argmax(&scores)
    }

    fn log_priors(&self) -> Vec<f64> {
        let total = self.total_docs() as f64;
        self.category_doc_counts
            .iter()
            .map(|&n| (n as f64 / total).ln())
            .collect()
    }
}

/// Counts tokens of `docs`, restricted to `feature_words` when given.
pub fn train_nb<'a, I>(
    docs: I,
    categories: &[String],
    feature_words: Option<&BTreeSet<String>>,
    alpha: f64,
) -> Result<NaiveBayesModel, ClfError>
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut model = NaiveBayesModel::empty(categories, alpha, feature_words.cloned())?;
    for doc in docs {
        model.observe(&doc.tokens, &doc.category)?;
    }
    if model.total_docs() == 0 {
        return Err(ClfError::EmptyTrainingSet);
    }
    if feature_words.is_some() && model.vocabulary_size() == 0 {
        return Err(ClfError::NoFeaturesMatched);
    }
    Ok(model)
}

/// Returns a copy of `model` that has also seen `tokens` labeled `category`.
pub fn update_nb(model: &NaiveBayesModel, tokens: &[String], category: &str) -> Result<NaiveBayesModel, ClfError> {
    let mut next = model.clone();
    next.observe(tokens, category)?;
    Ok(next)
}

/// Posterior over categories. Tokens outside the feature set, or never seen
/// in training when every token is a feature, do not contribute. A model
/// without any documents yields the uniform distribution.
pub fn predict_nb(model: &NaiveBayesModel, tokens: &[String]) -> Distribution {
    if model.total_docs() == 0 {
        return Distribution::uniform(&model.categories);
    }
    let mut logits = model.log_priors();
    if model.vocabulary_size() > 0 {
        for token in tokens {
            let scoreable = match &model.feature_words {
                Some(features) => features.contains(token.as_str()),
                None => model.word_counts.contains_key(token.as_str()),
            };
            if !scoreable {
                continue;
            }
            for (c, logit) in logits.iter_mut().enumerate() {
                *logit += model.log_likelihood(token, c);
            }
        }
    }
    Distribution {
        categories: model.categories.clone(),
        probabilities: softmax(&logits),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordStat {
    pub word: String,
    pub total_count: u64,
    pub counts: Vec<u64>,
    /// Smoothed share of the word's occurrences per category.
    pub predictiveness: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WordSort {
    /// Most frequent first.
    #[default]
    Count,
    /// Most one-sided first, by the largest per-category predictiveness.
    Predictiveness,
}

pub fn word_stats(model: &NaiveBayesModel, sort: WordSort) -> Vec<WordStat> {
    let alpha = model.alpha;
    let mut rows: Vec<WordStat> = model
        .word_counts
        .iter()
        .map(|(word, counts)| {
            let denom: f64 = counts.iter().map(|&n| n as f64 + alpha).sum();
            WordStat {
                word: word.clone(),
                total_count: counts.iter().sum(),
                counts: counts.clone(),
                predictiveness: counts.iter().map(|&n| (n as f64 + alpha) / denom).collect(),
            }
        })
        .collect();
    match sort {
        WordSort::Count => rows.sort_by(|a, b| {
            b.total_count
                .cmp(&a.total_count)
                .then_with(|| a.word.cmp(&b.word))
        }),
        WordSort::Predictiveness => {
            let peak = |r: &WordStat| r.predictiveness.iter().copied().fold(0.0, f64::max);
            rows.sort_by(|a, b| {
                peak(b)
                    .partial_cmp(&peak(a))
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| b.total_count.cmp(&a.total_count))
                    .then_with(|| a.word.cmp(&b.word))
            })
        }
    }
    rows
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelRecord {
    version: u32,
    categories: Vec<String>,
    alpha: f64,
    vocabulary_size: usize,
    word_counts: BTreeMap<String, Vec<u64>>,
    category_token_totals: Vec<u64>,
    category_doc_counts: Vec<u64>,
    #[serde(default)]
    feature_words: Option<BTreeSet<String>>,
}

impl From<NaiveBayesModel> for ModelRecord {
    fn from(m: NaiveBayesModel) -> Self {
        ModelRecord {
            version: MODEL_VERSION,
            vocabulary_size: m.vocabulary_size(),
            categories: m.categories,
            alpha: m.alpha,
            word_counts: m.word_counts,
            category_token_totals: m.category_token_totals,
            category_doc_counts: m.category_doc_counts,
            feature_words: m.feature_words,
        }
    }
}

impl TryFrom<ModelRecord> for NaiveBayesModel {
    type Error = ClfError;

    fn try_from(r: ModelRecord) -> Result<Self, ClfError> {
        if r.version != MODEL_VERSION {
            return Err(ClfError::InvalidModel(format!("unsupported model version {}", r.version)));
        }
        let mut model = NaiveBayesModel::empty(&r.categories, r.alpha, r.feature_words)?;
        let k = r.categories.len();
        if r.category_token_totals.len() != k || r.category_doc_counts.len() != k {
            return Err(ClfError::InvalidModel("count vectors do not match categories".into()));
        }
        let mut totals = vec![0u64; k];
        for (word, counts) in &r.word_counts {
            if counts.len() != k {
                return Err(ClfError::InvalidModel(format!("bad count vector for `{word}`")));
            }
            for (t, c) in totals.iter_mut().zip(counts) {
                *t += c;
            }
        }
        if totals != r.category_token_totals || r.vocabulary_size != r.word_counts.len() {
            return Err(ClfError::InvalidModel("totals disagree with word counts".into()));
        }
        model.word_counts = r.word_counts;
        model.category_token_totals = r.category_token_totals;
        model.category_doc_counts = r.category_doc_counts;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DocId;

    fn cats(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn toy() -> Vec<Document> {
        vec![
            Document::new(DocId(0), "red red blue", "A"),
            Document::new(DocId(1), "blue blue green", "B"),
        ]
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn toy_counts() {
        let m = train_nb(&toy(), &cats(&["A", "B"]), None, 1.0).unwrap();
        assert_eq!(m.word_counts()["red"], vec![2, 0]);
        assert_eq!(m.word_counts()["blue"], vec![1, 2]);
        assert_eq!(m.vocabulary_size(), 3);
        assert_eq!(m.category_token_totals(), &[3, 3]);
        assert_eq!(m.category_doc_counts(), &[1, 1]);
    }

    #[test]
    fn toy_posterior() {
        let m = train_nb(&toy(), &cats(&["A", "B"]), None, 1.0).unwrap();
        let d = predict_nb(&m, &toks("red"));
        assert!((d.probabilities[0] - 0.75).abs() < 1e-12);
        assert!((d.probabilities[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn no_scoreable_tokens_gives_prior() {
        let docs = vec![
            Document::new(DocId(0), "a", "A"),
            Document::new(DocId(1), "b", "A"),
            Document::new(DocId(2), "c", "B"),
        ];
        let m = train_nb(&docs, &cats(&["A", "B"]), None, 1.0).unwrap();
        for tokens in [vec![], toks("never seen")] {
            let d = predict_nb(&m, &tokens);
            assert!((d.probabilities[0] - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_category_is_certain() {
        let docs = vec![Document::new(DocId(0), "hello", "Only")];
        let m = train_nb(&docs, &cats(&["Only"]), None, 1.0).unwrap();
        assert_eq!(predict_nb(&m, &toks("hello world")).probabilities, vec![1.0]);
    }

    #[test]
    fn empty_model_is_uniform() {
        let m = NaiveBayesModel::empty(&cats(&["A", "B", "C"]), 1.0, None).unwrap();
        let d = predict_nb(&m, &toks("x"));
        assert!(d.probabilities.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn training_errors() {
        let none: Vec<Document> = vec![];
        assert_eq!(train_nb(&none, &cats(&["A"]), None, 1.0), Err(ClfError::EmptyTrainingSet));
        let zzz: BTreeSet<String> = ["zzz".to_string()].into();
        assert_eq!(
            train_nb(&toy(), &cats(&["A", "B"]), Some(&zzz), 1.0),
            Err(ClfError::NoFeaturesMatched)
        );
        assert_eq!(
            train_nb(&toy(), &cats(&["A"]), None, 1.0),
            Err(ClfError::UnknownCategory("B".into()))
        );
        assert!(NaiveBayesModel::empty(&cats(&["A"]), 0.0, None).is_err());
    }

    #[test]
    fn feature_restriction() {
        let features: BTreeSet<String> = ["red".to_string(), "green".to_string()].into();
        let m = train_nb(&toy(), &cats(&["A", "B"]), Some(&features), 1.0).unwrap();
        assert_eq!(m.vocabulary_size(), 2);
        assert_eq!(m.category_token_totals(), &[2, 1]);
        assert!(!m.word_counts().contains_key("blue"));
    }

    #[test]
    fn update_matches_batch() {
        let c = cats(&["A", "B"]);
        let docs = toy();
        let empty = NaiveBayesModel::empty(&c, 1.0, None).unwrap();
        let folded = docs
            .iter()
            .try_fold(empty, |m, d| update_nb(&m, &d.tokens, &d.category))
            .unwrap();
        assert_eq!(folded, train_nb(&docs, &c, None, 1.0).unwrap());
    }

    #[test]
    fn update_with_no_tokens_only_counts_the_document() {
        let m = train_nb(&toy(), &cats(&["A", "B"]), None, 1.0).unwrap();
        let next = update_nb(&m, &[], "B").unwrap();
        assert_eq!(next.word_counts(), m.word_counts());
        assert_eq!(next.category_token_totals(), m.category_token_totals());
        assert_eq!(next.category_doc_counts(), &[1, 2]);
        assert_eq!(update_nb(&m, &[], "Z"), Err(ClfError::UnknownCategory("Z".into())));
    }

    #[test]
    fn predictiveness_smoothing() {
        let docs = vec![
            Document::new(DocId(0), "we we we we", "A"),
            Document::new(DocId(1), "other", "B"),
        ];
        let m = train_nb(&docs, &cats(&["A", "B"]), None, 1.0).unwrap();
        let rows = word_stats(&m, WordSort::Count);
        assert_eq!(rows[0].word, "we");
        assert_eq!(rows[0].total_count, 4);
        assert!((rows[0].predictiveness[0] - 5.0 / 6.0).abs() < 1e-12);
        assert!((rows[0].predictiveness[1] - 1.0 / 6.0).abs() < 1e-12);
        assert!(rows.iter().all(|r| r.word != "unseen"));
    }

    #[test]
    fn balanced_word_is_uniform() {
        let docs = vec![
            Document::new(DocId(0), "both", "A"),
            Document::new(DocId(1), "both", "B"),
            Document::new(DocId(2), "both", "C"),
        ];
        let m = train_nb(&docs, &cats(&["A", "B", "C"]), None, 1.0).unwrap();
        let row = &word_stats(&m, WordSort::Predictiveness)[0];
        assert!(row.predictiveness.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn predictiveness_sort_puts_one_sided_words_first() {
        let docs = vec![
            Document::new(DocId(0), "the the the rare", "A"),
            Document::new(DocId(1), "the the the", "B"),
        ];
        let m = train_nb(&docs, &cats(&["A", "B"]), None, 1.0).unwrap();
        let by_count: Vec<_> = word_stats(&m, WordSort::Count).into_iter().map(|r| r.word).collect();
        let by_pred: Vec<_> = word_stats(&m, WordSort::Predictiveness).into_iter().map(|r| r.word).collect();
        assert_eq!(by_count, ["the", "rare"]);
        assert_eq!(by_pred, ["rare", "the"]);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = train_nb(&toy(), &cats(&["A", "B"]), None, 1.0).unwrap();
        let json = serde_json::to_value(&m).unwrap();
        assert_eq!(json["version"], 1);
        assert_eq!(json["vocabulary_size"], 3);
        let back: NaiveBayesModel = serde_json::from_value(json.clone()).unwrap();
        assert_eq!(back, m);

        let mut bad = json.clone();
        bad["category_token_totals"] = serde_json::json!([3, 4]);
        assert!(serde_json::from_value::<NaiveBayesModel>(bad).is_err());
        let mut bad = json;
        bad["version"] = serde_json::json!(9);
        assert!(serde_json::from_value::<NaiveBayesModel>(bad).is_err());
    }
}
