//! Text classifiers over bag-of-words features: wildcard feature terms,
//! multinomial Naive Bayes, softmax logistic regression, and evaluation.

mod evaluate;
mod logreg;
mod metrics;
mod naive_bayes;
mod terms;

use serde::{Deserialize, Serialize};

pub use evaluate::{
    evaluate_terms, evaluate_terms_logreg, run_pipeline, score_counts, score_term, Algorithm,
    EvaluationReport, PipelineParams, TermReport, TermSummary,
};
pub use logreg::{
    objective, objective_gradient, predict_logreg, train_logreg, train_logreg_traced, Design,
    LogRegModel, LogRegParams, Parameters,
};
pub use metrics::{confusion_and_metrics, CategoryMetrics, ConfusionMatrix, Metrics};
pub use naive_bayes::{
    predict_nb, train_nb, update_nb, word_stats, NaiveBayesModel, WordSort, WordStat, DEFAULT_ALPHA,
};
pub use terms::{expand_terms, wildcard_match, SearchTerm, TermExpansion};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ClfError {
    #[error("invalid search pattern `{0}`: it must contain at least one character besides `*`")]
    InvalidPattern(String),
    #[error("no training documents")]
    EmptyTrainingSet,
    #[error("none of the feature words occur in the training documents")]
    NoFeaturesMatched,
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("the search terms do not match the model's feature set")]
    ModelFeatureMismatch,
    #[error("training loss became non-finite at epoch {epoch}")]
    DivergenceDetected { epoch: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// A probability for every category, in the model's category order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub categories: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl Distribution {
    pub fn uniform(categories: &[String]) -> Self {
        let p = 1.0 / categories.len() as f64;
        Distribution {
            categories: categories.to_vec(),
            probabilities: vec![p; categories.len()],
        }
    }

    /// Index of the most probable category; ties go to the earliest category.
    pub fn argmax(&self) -> usize {
        argmax(&self.probabilities)
    }

    pub fn best(&self) -> &str {
        &self.categories[self.argmax()]
    }

    pub fn get(&self, category: &str) -> Option<f64> {
        self.categories
            .iter()
            .position(|c| c == category)
            .map(|i| self.probabilities[i])
    }
}

/// First index holding the maximum value.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Normalizes log-weights into probabilities via log-sum-exp.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        let p = 1.0 / logits.len() as f64;
        return vec![p; logits.len()];
    }
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
