use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::ClfError;

/// Rows are gold categories, columns are predicted categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub categories: Vec<String>,
    pub cells: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(categories: Vec<String>) -> Self {
        let k = categories.len();
        ConfusionMatrix {
            categories,
            cells: vec![vec![0; k]; k],
        }
    }

    pub fn record(&mut self, gold: usize, predicted: usize) {
        self.cells[gold][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.cells.len()).map(|i| self.cells[i][i]).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.cells[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.cells.iter().map(|row| row[c]).sum()
    }

    fn ratio(num: u64, den: u64) -> Option<Ratio<u64>> {
        (den > 0).then(|| Ratio::new(num, den))
    }

    pub fn precision(&self, c: usize) -> Option<Ratio<u64>> {
        Self::ratio(self.cells[c][c], self.col_sum(c))
    }

    pub fn recall(&self, c: usize) -> Option<Ratio<u64>> {
        Self::ratio(self.cells[c][c], self.row_sum(c))
    }

    /// Harmonic mean of precision and recall; undefined when either is, or
    /// when both are zero.
    pub fn f1(&self, c: usize) -> Option<Ratio<u64>> {
        self.precision(c)?;
        self.recall(c)?;
        let tp = self.cells[c][c];
        // 2pr/(p+r) simplifies to 2tp / (row + col) when tp > 0.
        (tp > 0).then(|| Ratio::new(2 * tp, self.row_sum(c) + self.col_sum(c)))
    }

    pub fn accuracy(&self) -> Option<Ratio<u64>> {
        Self::ratio(self.trace(), self.total())
    }
}

fn to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub category: String,
    /// `None` when nothing was predicted as this category.
    pub precision: Option<f64>,
    /// `None` when no gold document has this category.
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_category: Vec<CategoryMetrics>,
    /// Mean of the defined per-category F1 values.
    pub macro_f1: Option<f64>,
    pub accuracy: Option<f64>,
}

impl Metrics {
    pub fn from_confusion(m: &ConfusionMatrix) -> Self {
        let per_category: Vec<CategoryMetrics> = m
            .categories
            .iter()
            .enumerate()
            .map(|(c, name)| CategoryMetrics {
                category: name.clone(),
                precision: m.precision(c).map(to_f64),
                recall: m.recall(c).map(to_f64),
                f1: m.f1(c).map(to_f64),
                support: m.row_sum(c),
            })
            .collect();
        let defined: Vec<f64> = per_category.iter().filter_map(|c| c.f1).collect();
        let macro_f1 = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        Metrics {
            per_category,
            macro_f1,
            accuracy: m.accuracy().map(to_f64),
        }
    }
}

pub fn confusion_and_metrics(
    pairs: &[(String, String)],
    categories: &[String],
) -> Result<(ConfusionMatrix, Metrics), ClfError> {
    let index = |name: &str| {
        categories
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| ClfError::UnknownCategory(name.to_string()))
    };
    let mut matrix = ConfusionMatrix::new(categories.to_vec());
    for (gold, predicted) in pairs {
        matrix.record(index(gold)?, index(predicted)?);
    }
    let metrics = Metrics::from_confusion(&matrix);
    Ok((matrix, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cats() -> Vec<String> {
        vec!["A".into(), "B".into()]
    }

    fn pairs(spec: &[(&str, &str, usize)]) -> Vec<(String, String)> {
        spec.iter()
            .flat_map(|(g, p, n)| std::iter::repeat_n((g.to_string(), p.to_string()), *n))
            .collect()
    }

    #[test]
    fn hand_computed_two_by_two() {
        let (m, metrics) =
            confusion_and_metrics(&pairs(&[("A", "A", 8), ("A", "B", 2), ("B", "A", 3), ("B", "B", 7)]), &cats())
                .unwrap();
        assert_eq!(m.cells, vec![vec![8, 2], vec![3, 7]]);
        assert_eq!(m.precision(0), Some(Ratio::new(8, 11)));
        assert_eq!(m.recall(0), Some(Ratio::new(4, 5)));
        assert_eq!(m.f1(0), Some(Ratio::new(16, 21)));
        let f1 = metrics.per_category[0].f1.unwrap();
        assert!((f1 - 0.7619).abs() < 1e-4);
        assert_eq!(metrics.accuracy, Some(0.75));
    }

    #[test]
    fn perfect_predictions() {
        let (m, metrics) = confusion_and_metrics(&pairs(&[("A", "A", 4), ("B", "B", 6)]), &cats()).unwrap();
        assert_eq!(m.cells, vec![vec![4, 0], vec![0, 6]]);
        assert!(metrics
            .per_category
            .iter()
            .all(|c| c.precision == Some(1.0) && c.recall == Some(1.0) && c.f1 == Some(1.0)));
        assert_eq!(metrics.macro_f1, Some(1.0));
        assert_eq!(metrics.accuracy, Some(1.0));
    }

    #[test]
    fn never_predicted_category_has_undefined_precision() {
        let (_, metrics) = confusion_and_metrics(&pairs(&[("A", "A", 3), ("B", "A", 2)]), &cats()).unwrap();
        let b = &metrics.per_category[1];
        assert_eq!(b.precision, None);
        assert_eq!(b.recall, Some(0.0));
        assert_eq!(b.f1, None);
        assert_eq!(metrics.macro_f1, metrics.per_category[0].f1);
    }

    #[test]
    fn unknown_category() {
        assert_eq!(
            confusion_and_metrics(&pairs(&[("A", "Z", 1)]), &cats()),
            Err(ClfError::UnknownCategory("Z".into()))
        );
    }

    #[test]
    fn empty_input_leaves_everything_undefined() {
        let (m, metrics) = confusion_and_metrics(&[], &cats()).unwrap();
        assert_eq!(m.total(), 0);
        assert_eq!(metrics.accuracy, None);
        assert_eq!(metrics.macro_f1, None);
    }
}
