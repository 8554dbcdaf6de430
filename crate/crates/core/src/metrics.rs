//! Accuracy measures over a named set of observed cells: MAE, constrained
//! MAE, 0-1 loss, and pooled precision/recall on the "recommendable" class
//! (ratings at or above a threshold, 4 on the five-star scale).

use crate::error::{Error, Result};
use crate::ratings::{IndexSet, ObservedRatings};

/// Anything that can report an integer rating for a cell.
pub trait RatingLookup {
    fn rating(&self, user: usize, item: usize) -> Option<i32>;
}

impl RatingLookup for ndarray::Array2<i32> {
    fn rating(&self, user: usize, item: usize) -> Option<i32> {
        self.get((user, item)).copied()
    }
}

impl RatingLookup for ObservedRatings {
    fn rating(&self, user: usize, item: usize) -> Option<i32> {
        self.get(user, item).map(i32::from)
    }
}

impl<T: RatingLookup + ?Sized> RatingLookup for &T {
    fn rating(&self, user: usize, item: usize) -> Option<i32> {
        (**self).rating(user, item)
    }
}

/// Index set with the name it is reported under ("omega", "omega80", ...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalSet {
    pub label: String,
    pub sigma: IndexSet,
}

impl EvalSet {
    pub fn new(label: impl Into<String>, sigma: IndexSet) -> Self {
        Self {
            label: label.into(),
            sigma,
        }
    }

    /// All observed cells of `ratings`.
    pub fn from_ratings(label: impl Into<String>, ratings: &ObservedRatings) -> Self {
        Self::new(label, ratings.index_set())
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }
}

/// `mm(a, c)`: true and predicted rating on opposite sides of `threshold`.
pub fn mismatch(actual: i32, predicted: i32, threshold: i32) -> bool {
    (actual >= threshold) != (predicted >= threshold)
}

fn pairs(
    truth: &ObservedRatings,
    predicted: &impl RatingLookup,
    sigma: &EvalSet,
) -> Result<Vec<(i32, i32)>> {
    sigma
        .sigma
        .iter()
        .map(|(u, i)| {
            let a = truth.get(u, i).ok_or(Error::MissingCell {
                user: u,
                item: i,
                what: "observed rating",
            })?;
            let c = predicted.rating(u, i).ok_or(Error::MissingCell {
                user: u,
                item: i,
                what: "prediction",
            })?;
            Ok((i32::from(a), c))
        })
        .collect()
}

fn nonempty(sigma: &EvalSet) -> Result<()> {
    if sigma.is_empty() {
        Err(Error::EmptySet("evaluation set"))
    } else {
        Ok(())
    }
}

fn mean_abs(pairs: impl Iterator<Item = (i32, i32)>) -> Option<f64> {
    let (sum, count) = pairs.fold((0u64, 0usize), |(s, n), (a, c)| {
        (s + u64::from(a.abs_diff(c)), n + 1)
    });
    (count > 0).then(|| sum as f64 / count as f64)
}

pub fn mae(truth: &ObservedRatings, predicted: &impl RatingLookup, sigma: &EvalSet) -> Result<f64> {
    nonempty(sigma)?;
    let pairs = pairs(truth, predicted, sigma)?;
    Ok(mean_abs(pairs.into_iter()).expect("non-empty"))
}

pub fn zero_one_loss(
    truth: &ObservedRatings,
    predicted: &impl RatingLookup,
    sigma: &EvalSet,
    threshold: i32,
) -> Result<f64> {
    nonempty(sigma)?;
    let pairs = pairs(truth, predicted, sigma)?;
    let misses = pairs
        .iter()
        .filter(|&&(a, c)| mismatch(a, c, threshold))
        .count();
    Ok(misses as f64 / pairs.len() as f64)
}

/// MAE restricted to cells where either rating is recommendable; `None`
/// when no such cell exists.
pub fn cmae(
    truth: &ObservedRatings,
    predicted: &impl RatingLookup,
    sigma: &EvalSet,
    threshold: i32,
) -> Result<Option<f64>> {
    let pairs = pairs(truth, predicted, sigma)?;
    Ok(mean_abs(
        pairs
            .into_iter()
            .filter(|&(a, c)| a >= threshold || c >= threshold),
    ))
}

/// Pooled precision and recall in percent. Precision is `None` when nothing
/// is predicted recommendable, recall when nothing is actually recommendable.
pub fn precision_recall(
    truth: &ObservedRatings,
    predicted: &impl RatingLookup,
    sigma: &EvalSet,
    threshold: i32,
) -> Result<(Option<f64>, Option<f64>)> {
    let pairs = pairs(truth, predicted, sigma)?;
    Ok(precision_recall_of(&pairs, threshold))
}

fn precision_recall_of(pairs: &[(i32, i32)], threshold: i32) -> (Option<f64>, Option<f64>) {
    let (mut hits, mut relevant, mut recommended) = (0usize, 0usize, 0usize);
    for &(a, c) in pairs {
        let s = a >= threshold;
        let r = c >= threshold;
        relevant += usize::from(s);
        recommended += usize::from(r);
        hits += usize::from(s && r);
    }
    let pct = |num: usize, den: usize| (den > 0).then(|| 100.0 * num as f64 / den as f64);
    (pct(hits, recommended), pct(hits, relevant))
}

/// One evaluation snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub set_label: String,
    pub threshold: i32,
    pub mae: f64,
    pub cmae: Option<f64>,
    pub zero_one: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

impl MetricReport {
    pub const CSV_HEADER: [&'static str; 8] = [
        "set_label",
        "k",
        "iterations",
        "mae",
        "cmae",
        "zero_one",
        "precision",
        "recall",
    ];

    /// Fields in [`Self::CSV_HEADER`] order; absent values become empty
    /// fields.
    pub fn csv_fields(&self, k: usize, iterations: usize) -> Vec<String> {
        vec![
            self.set_label.clone(),
            k.to_string(),
            iterations.to_string(),
            self.mae.to_string(),
            optional(self.cmae),
            self.zero_one.to_string(),
            optional(self.precision),
            optional(self.recall),
        ]
    }
}

fn optional(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// All measures over `sigma` in one pass.
pub fn evaluate(
    truth: &ObservedRatings,
    predicted: &impl RatingLookup,
    sigma: &EvalSet,
    threshold: i32,
) -> Result<MetricReport> {
    nonempty(sigma)?;
    let pairs = pairs(truth, predicted, sigma)?;
    let n = pairs.len() as f64;
    let misses = pairs
        .iter()
        .filter(|&&(a, c)| mismatch(a, c, threshold))
        .count();
    let (precision, recall) = precision_recall_of(&pairs, threshold);
    Ok(MetricReport {
        set_label: sigma.label.clone(),
        threshold,
        mae: mean_abs(pairs.iter().copied()).expect("non-empty"),
        cmae: mean_abs(
            pairs
                .iter()
                .copied()
                .filter(|&(a, c)| a >= threshold || c >= threshold),
        ),
        zero_one: misses as f64 / n,
        precision,
        recall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratings::RatingScale;
    use ndarray::{array, Array2};

    fn fixture(cells: &[(usize, usize, i64)]) -> (ObservedRatings, EvalSet) {
        let a = ObservedRatings::new(3, 3, RatingScale::FIVE_STAR, cells.iter().copied()).unwrap();
        let s = EvalSet::from_ratings("omega", &a);
        (a, s)
    }

    #[test]
    fn mae_examples() {
        let (a, s) = fixture(&[(0, 0, 5), (1, 2, 1)]);
        let same = a.to_dense().mapv(|x| x as i32);
        assert_eq!(mae(&a, &same, &s).unwrap(), 0.0);
        let mut c = same.clone();
        c[[0, 0]] = 4;
        c[[1, 2]] = 4;
        assert_eq!(mae(&a, &c, &s).unwrap(), 2.0);
        let empty = EvalSet::new("none", IndexSet::new(3, 3, []).unwrap());
        assert!(matches!(mae(&a, &c, &empty), Err(Error::EmptySet(_))));
    }

    #[test]
    fn zero_one_examples() {
        assert!(mismatch(5, 2, 4));
        assert!(!mismatch(4, 4, 4));
        assert!(mismatch(3, 4, 4));
        assert!(!mismatch(1, 3, 4));
        let (a, s) = fixture(&[(0, 0, 5), (2, 2, 4)]);
        let c = array![[2, 0, 0], [0, 0, 0], [0, 0, 4]];
        assert_eq!(zero_one_loss(&a, &c, &s, 4).unwrap(), 0.5);
        assert_eq!(zero_one_loss(&a, &a, &s, 4).unwrap(), 0.0);
    }

    #[test]
    fn cmae_examples() {
        let (a, s) = fixture(&[(0, 0, 3), (0, 1, 2)]);
        let c = array![[1, 3, 0], [0, 0, 0], [0, 0, 0]];
        assert_eq!(cmae(&a, &c, &s, 4).unwrap(), None);
        let (a, s) = fixture(&[(1, 1, 5)]);
        let c = Array2::from_elem((3, 3), 3);
        assert_eq!(cmae(&a, &c, &s, 4).unwrap(), Some(2.0));
    }

    #[test]
    fn precision_recall_examples() {
        let (a, s) = fixture(&[(0, 0, 5), (0, 1, 4), (1, 0, 2)]);
        assert_eq!(
            precision_recall(&a, &a, &s, 4).unwrap(),
            (Some(100.0), Some(100.0))
        );
        let low = Array2::from_elem((3, 3), 1);
        assert_eq!(precision_recall(&a, &low, &s, 4).unwrap(), (None, Some(0.0)));
        let (neg, s2) = fixture(&[(0, 0, 1)]);
        assert_eq!(precision_recall(&neg, &low, &s2, 4).unwrap(), (None, None));
    }

    #[test]
    fn missing_prediction_is_an_error() {
        struct Nothing;
        impl RatingLookup for Nothing {
            fn rating(&self, _: usize, _: usize) -> Option<i32> {
                None
            }
        }
        let (a, s) = fixture(&[(0, 0, 5)]);
        assert!(matches!(mae(&a, &Nothing, &s), Err(Error::MissingCell { .. })));
        let other = EvalSet::new("x", IndexSet::new(3, 3, [(1, 1)]).unwrap());
        assert!(matches!(mae(&a, &a, &other), Err(Error::MissingCell { .. })));
    }

    #[test]
    fn report_csv_fields() {
        let (a, s) = fixture(&[(0, 0, 1)]);
        let low = Array2::from_elem((3, 3), 1);
        let r = evaluate(&a, &low, &s, 4).unwrap();
        assert_eq!(
            r.csv_fields(6, 120),
            vec!["omega", "6", "120", "0", "", "0", "", ""]
        );
    }
}
