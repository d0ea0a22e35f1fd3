use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{softmax, ClfError, Distribution};
use crate::corpus::Document;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub epochs: usize,
    /// Recorded with the model. Full-batch descent from zero weights draws no
    /// randomness, so the seed does not change the result.
    pub seed: u64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            learning_rate: 0.1,
            l2_lambda: 0.01,
            epochs: 500,
            seed: 0,
        }
    }
}

/// Sparse bag-of-words count vectors with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub num_features: usize,
    pub num_classes: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub labels: Vec<usize>,
}

impl Design {
    pub fn new(num_features: usize, num_classes: usize) -> Self {
        Design {
            num_features,
            num_classes,
            rows: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<(usize, f64)>, label: usize) {
        self.rows.push(row);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn count_vector(index: &BTreeMap<&str, usize>, tokens: &[String]) -> Vec<(usize, f64)> {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for token in tokens {
        if let Some(&j) = index.get(token.as_str()) {
            *counts.entry(j).or_default() += 1.0;
        }
    }
    counts.into_iter().collect()
}

/// Weight matrix (category × feature) and per-category bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Parameters {
    pub fn zeros(num_classes: usize, num_features: usize) -> Self {
        Parameters {
            weights: vec![vec![0.0; num_features]; num_classes],
            bias: vec![0.0; num_classes],
        }
    }

    fn logits(&self, row: &[(usize, f64)]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + row.iter().map(|&(j, x)| w[j] * x).sum::<f64>())
            .collect()
    }

    fn is_finite(&self) -> bool {
        self.bias.iter().chain(self.weights.iter().flatten()).all(|v| v.is_finite())
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean cross-entropy plus `lambda / 2 * ||W||²` (bias unpenalized).
pub fn objective(design: &Design, params: &Parameters, lambda: f64) -> f64 {
    let n = design.len() as f64;
    let data: f64 = design
        .rows
        .iter()
        .zip(&design.labels)
        .map(|(row, &y)| {
            let z = params.logits(row);
            log_sum_exp(&z) - z[y]
        })
        .sum();
    let penalty: f64 = params.weights.iter().flatten().map(|w| w * w).sum();
    data / n + 0.5 * lambda * penalty
}

/// Analytic gradient of [`objective`].
pub fn objective_gradient(design: &Design, params: &Parameters, lambda: f64) -> Parameters {
    let n = design.len() as f64;
    let mut grad = Parameters::zeros(design.num_classes, design.num_features);
    for (row, &y) in design.rows.iter().zip(&design.labels) {
        let probs = softmax(&params.logits(row));
        for (c, p) in probs.into_iter().enumerate() {
            let residual = (p - if c == y { 1.0 } else { 0.0 }) / n;
            grad.bias[c] += residual;
            for &(j, x) in row {
                grad.weights[c][j] += residual * x;
            }
        }
    }
    for (g_row, w_row) in grad.weights.iter_mut().zip(&params.weights) {
        for (g, w) in g_row.iter_mut().zip(w_row) {
            *g += lambda * w;
        }
    }
    grad
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub categories: Vec<String>,
    pub feature_words: Vec<String>,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub params: LogRegParams,
}

impl LogRegModel {
    fn feature_index(&self) -> BTreeMap<&str, usize> {
        self.feature_words
            .iter()
            .enumerate()
            .map(|(j, w)| (w.as_str(), j))
            .collect()
    }

    /// Category whose weight for `word` is largest; ties go to the earlier
    /// category. `None` when `word` is not a feature.
    pub fn heaviest_category(&self, word: &str) -> Option<usize> {
        let j = self.feature_words.iter().position(|w| w == word)?;
        let column: Vec<f64> = self.weights.iter().map(|row| row[j]).collect();
        Some(super::argmax(&column))
    }
}

fn build_design<'a, I>(
    docs: I,
    categories: &[String],
    index: &BTreeMap<&str, usize>,
) -> Result<Design, ClfError>
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut design = Design::new(index.len(), categories.len());
    for doc in docs {
        let label = categories
            .iter()
            .position(|c| *c == doc.category)
            .ok_or_else(|| ClfError::UnknownCategory(doc.category.clone()))?;
        design.push(count_vector(index, &doc.tokens), label);
    }
    Ok(design)
}

/// Fits softmax regression by full-batch gradient descent from zero
/// weights, returning the model and the objective before each epoch plus the
/// final one.
pub fn train_logreg_traced<'a, I>(
    docs: I,
    categories: &[String],
    feature_words: &BTreeSet<String>,
    params: LogRegParams,
) -> Result<(LogRegModel, Vec<f64>), ClfError>
where
    I: IntoIterator<Item = &'a Document>,
{
    let feature_list: Vec<String> = feature_words.iter().cloned().collect();
    let index: BTreeMap<&str, usize> = feature_list
        .iter()
        .enumerate()
        .map(|(j, w)| (w.as_str(), j))
        .collect();
    let design = build_design(docs, categories, &index)?;
    if design.is_empty() {
        return Err(ClfError::EmptyTrainingSet);
    }
    if feature_list.is_empty() || design.rows.iter().all(|r| r.is_empty()) {
        return Err(ClfError::NoFeaturesMatched);
    }

    let mut theta = Parameters::zeros(categories.len(), feature_list.len());
    let mut trace = Vec::with_capacity(params.epochs + 1);
    for epoch in 0..params.epochs {
        let loss = objective(&design, &theta, params.l2_lambda);
        if !loss.is_finite() {
            return Err(ClfError::DivergenceDetected { epoch });
        }
        trace.push(loss);
        let grad = objective_gradient(&design, &theta, params.l2_lambda);
        for (w_row, g_row) in theta.weights.iter_mut().zip(&grad.weights) {
            for (w, g) in w_row.iter_mut().zip(g_row) {
                *w -= params.learning_rate * g;
            }
        }
        for (b, g) in theta.bias.iter_mut().zip(&grad.bias) {
            *b -= params.learning_rate * g;
        }
        if !theta.is_finite() {
            return Err(ClfError::DivergenceDetected { epoch });
        }
    }
    let last = objective(&design, &theta, params.l2_lambda);
    if !last.is_finite() {
        return Err(ClfError::DivergenceDetected { epoch: params.epochs });
    }
    trace.push(last);

    let model = LogRegModel {
        categories: categories.to_vec(),
        feature_words: feature_list,
        weights: theta.weights,
        bias: theta.bias,
        params,
    };
    Ok((model, trace))
}

pub fn train_logreg<'a, I>(
    docs: I,
    categories: &[String],
    feature_words: &BTreeSet<String>,
    params: LogRegParams,
) -> Result<LogRegModel, ClfError>
where
    I: IntoIterator<Item = &'a Document>,
{
    train_logreg_traced(docs, categories, feature_words, params).map(|(m, _)| m)
}

pub fn predict_logreg(model: &LogRegModel, tokens: &[String]) -> Distribution {
    let row = count_vector(&model.feature_index(), tokens);
    let logits: Vec<f64> = model
        .weights
        .iter()
        .zip(&model.bias)
        .map(|(w, b)| b + row.iter().map(|&(j, x)| w[j] * x).sum::<f64>())
        .collect();
    Distribution {
        categories: model.categories.clone(),
        probabilities: softmax(&logits),
    }
}
