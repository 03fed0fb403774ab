//! Distance computation, full neighbor ranking, and plain / weighted
//! K-nearest-neighbor classification.
//!
//! Rankings are full argsorts: the valuation recursions need the complete
//! ordering anyway, and desk-scale data makes a spatial index pointless.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::report::fmt_f64;

/// Distance metric for neighbor ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::invalid(format!("unknown metric {other:?}"))),
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid(
            "cosine distance is undefined for zero-norm vectors",
        ));
    }
    Ok(1.0 - dot / (na.sqrt() * nb.sqrt()))
}

/// Full ranking of the training set by ascending distance to one query.
///
/// `order` is a permutation of `0..N`; ties in distance break by ascending
/// training id so the ranking is a deterministic function of the dataset.
#[derive(Debug, Clone)]
pub struct NeighborRanking {
    pub query_id: usize,
    pub order: Vec<usize>,
    pub distances: Vec<f64>,
}

impl NeighborRanking {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Debug CSV export: `query_id,rank,train_id,distance`.
    pub fn write_csv<W: Write>(&self, mut w: W, header: bool) -> Result<()> {
        if header {
            writeln!(w, "query_id,rank,train_id,distance")?;
        }
        for (rank, (&id, &d)) in self.order.iter().zip(&self.distances).enumerate() {
            writeln!(w, "{},{},{},{}", self.query_id, rank, id, fmt_f64(d))?;
        }
        Ok(())
    }
}

/// Ranks every training point by ascending distance to `query`.
pub fn rank_neighbors(train: &Dataset, query: &[f64], metric: Metric) -> Result<NeighborRanking> {
    if query.len() != train.dim() {
        return Err(Error::invalid(format!(
            "query has {} features, training set has {}",
            query.len(),
            train.dim()
        )));
    }
    let n = train.len();
    let mut keyed: Vec<(f64, u32)> = Vec::with_capacity(n);
    match metric {
        Metric::Euclidean => {
            for s in train.samples() {
                keyed.push((euclidean(query, &s.features), s.id as u32));
            }
        }
        Metric::Cosine => {
            for s in train.samples() {
                let d = cosine_distance(query, &s.features).map_err(|_| {
                    Error::invalid(format!(
                        "cosine distance is undefined for zero-norm vectors (query or train id {})",
                        s.id
                    ))
                })?;
                keyed.push((d, s.id as u32));
            }
        }
    }
    keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut order = Vec::with_capacity(n);
    let mut distances = Vec::with_capacity(n);
    for (d, id) in keyed {
        order.push(id as usize);
        distances.push(d);
    }
    Ok(NeighborRanking {
        query_id: 0,
        order,
        distances,
    })
}

/// Per-category vote fractions. Scores are nonnegative and sum to one unless
/// the degenerate flag is set.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores {
    pub scores: Vec<f64>,
    pub degenerate: bool,
}

impl ClassScores {
    /// Shannon entropy in nats; zero-probability terms contribute nothing.
    pub fn entropy(&self) -> f64 {
        self.scores
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum()
    }

    /// Gap between the two largest scores.
    pub fn margin(&self) -> f64 {
        let mut top = 0.0f64;
        let mut second = 0.0f64;
        for &p in &self.scores {
            if p > top {
                second = top;
                top = p;
            } else if p > second {
                second = p;
            }
        }
        top - second
    }

    pub fn top_score(&self) -> f64 {
        self.scores.iter().copied().fold(0.0, f64::max)
    }
}

/// Smallest category index among the maxima.
fn argmax_label(scores: &[f64]) -> usize {
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = c;
        }
    }
    best
}

/// Plain K-nearest-neighbor vote. Uses `min(K, N)` neighbors; scores are the
/// vote fractions and the prediction breaks ties toward the smallest
/// category index.
pub fn knn_predict(
    train: &Dataset,
    k: usize,
    query: &[f64],
    metric: Metric,
) -> Result<(usize, ClassScores)> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let ranking = rank_neighbors(train, query, metric)?;
    let take = k.min(train.len());
    let mut scores = vec![0.0; train.num_classes()];
    for &id in &ranking.order[..take] {
        scores[train.label(id)] += 1.0;
    }
    for s in scores.iter_mut() {
        *s /= take as f64;
    }
    let label = argmax_label(&scores);
    Ok((
        label,
        ClassScores {
            scores,
            degenerate: false,
        },
    ))
}

/// Weighted K-nearest-neighbor prediction result.
#[derive(Debug, Clone)]
pub struct WeightedPrediction {
    pub label: usize,
    pub scores: ClassScores,
    /// Set when every effective neighbor weight was zero and the vote fell
    /// back to the unweighted rule.
    pub unweighted_fallback: bool,
}

/// Weighted vote over the K nearest neighbors. Weights clip at zero so
/// negative valuations cannot invert votes; when all K effective weights are
/// zero the vote falls back to the unweighted rule and flags it.
pub fn weighted_knn_predict(
    train: &Dataset,
    weights: &[f64],
    k: usize,
    query: &[f64],
    metric: Metric,
) -> Result<WeightedPrediction> {
    if weights.len() != train.len() {
        return Err(Error::invalid(format!(
            "got {} weights for {} training samples",
            weights.len(),
            train.len()
        )));
    }
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let ranking = rank_neighbors(train, query, metric)?;
    let take = k.min(train.len());
    let mut scores = vec![0.0; train.num_classes()];
    let mut total = 0.0;
    for &id in &ranking.order[..take] {
        let w = weights[id].max(0.0);
        scores[train.label(id)] += w;
        total += w;
    }
    if total == 0.0 {
        let mut scores = vec![0.0; train.num_classes()];
        for &id in &ranking.order[..take] {
            scores[train.label(id)] += 1.0;
        }
        for s in scores.iter_mut() {
            *s /= take as f64;
        }
        let label = argmax_label(&scores);
        return Ok(WeightedPrediction {
            label,
            scores: ClassScores {
                scores,
                degenerate: false,
            },
            unweighted_fallback: true,
        });
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
    let label = argmax_label(&scores);
    Ok(WeightedPrediction {
        label,
        scores: ClassScores {
            scores,
            degenerate: false,
        },
        unweighted_fallback: false,
    })
}

/// Fraction of evaluation samples classified correctly by (weighted) KNN.
///
/// Parallel over evaluation points; the reduction is an integer count, so the
/// result is independent of execution order and thread count.
pub fn accuracy(
    train: &Dataset,
    eval_set: &Dataset,
    k: usize,
    metric: Metric,
    weights: Option<&[f64]>,
) -> Result<f64> {
    if eval_set.is_empty() {
        return Err(Error::invalid("evaluation set is empty"));
    }
    if eval_set.dim() != train.dim() {
        return Err(Error::invalid("train and eval dimensionality differ"));
    }
    let correct: usize = eval_set
        .samples()
        .par_iter()
        .map(|s| {
            let predicted = match weights {
                Some(w) => weighted_knn_predict(train, w, k, &s.features, metric).map(|p| p.label),
                None => knn_predict(train, k, &s.features, metric).map(|(l, _)| l),
            };
            predicted.map(|l| usize::from(l == s.label))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(correct as f64 / eval_set.len() as f64)
}

/// How raw valuations become weighted-KNN weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// Clip negative valuations to zero, use the rest linearly.
    #[default]
    ClippedLinear,
    /// Min-max normalize valuations to [0, 1].
    MinMax,
}

/// Turns a valuation vector into nonnegative KNN weights.
pub fn valuation_weights(values: &[f64], scheme: WeightScheme) -> Vec<f64> {
    match scheme {
        WeightScheme::ClippedLinear => values.iter().map(|&v| v.max(0.0)).collect(),
        WeightScheme::MinMax => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                values.iter().map(|&v| (v - lo) / (hi - lo)).collect()
            } else {
                vec![1.0; values.len()]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_blobs, Dataset};

    fn line_dataset(points: &[(f64, usize)]) -> Dataset {
        let rows = points.iter().map(|(x, _)| vec![*x]).collect();
        let labels = points.iter().map(|(_, l)| *l).collect();
        let classes = points.iter().map(|(_, l)| *l).max().unwrap() + 1;
        Dataset::new(rows, labels, classes.max(2)).unwrap()
    }

    #[test]
    fn ranking_orders_by_distance() {
        let ds = line_dataset(&[(0.0, 0), (1.0, 0), (2.0, 0)]);
        let r = rank_neighbors(&ds, &[0.9], Metric::Euclidean).unwrap();
        assert_eq!(r.order, vec![1, 0, 2]);
        assert!((r.distances[0] - 0.1).abs() < 1e-12);
        assert!((r.distances[1] - 0.9).abs() < 1e-12);
        assert!((r.distances[2] - 1.1).abs() < 1e-12);
    }

    #[test]
    fn ranking_breaks_ties_by_id() {
        let ds = line_dataset(&[(1.0, 0), (-1.0, 0), (1.0, 1)]);
        let r = rank_neighbors(&ds, &[0.0], Metric::Euclidean).unwrap();
        assert_eq!(r.order, vec![0, 1, 2]);
    }

    #[test]
    fn ranking_puts_identical_point_first() {
        let ds = line_dataset(&[(5.0, 0), (2.0, 1), (9.0, 0)]);
        let r = rank_neighbors(&ds, &[2.0], Metric::Euclidean).unwrap();
        assert_eq!(r.order[0], 1);
        assert_eq!(r.distances[0], 0.0);
    }

    #[test]
    fn ranking_rejects_dim_mismatch_and_zero_norm_cosine() {
        let ds = line_dataset(&[(1.0, 0), (2.0, 1)]);
        assert!(rank_neighbors(&ds, &[1.0, 2.0], Metric::Euclidean).is_err());
        let zero = Dataset::new(vec![vec![0.0], vec![1.0]], vec![0, 1], 2).unwrap();
        assert!(rank_neighbors(&zero, &[1.0], Metric::Cosine).is_err());
        assert!(rank_neighbors(&ds, &[0.0], Metric::Cosine).is_err());
    }

    #[test]
    fn knn_predict_k1_returns_nearest_label() {
        let ds = line_dataset(&[(0.0, 1), (3.0, 0)]);
        let (label, scores) = knn_predict(&ds, 1, &[0.4], Metric::Euclidean).unwrap();
        assert_eq!(label, 1);
        assert_eq!(scores.scores, vec![0.0, 1.0]);
    }

    #[test]
    fn knn_predict_counts_votes() {
        let ds = line_dataset(&[(0.0, 0), (1.0, 0), (2.0, 1), (10.0, 1)]);
        let (label, scores) = knn_predict(&ds, 3, &[0.0], Metric::Euclidean).unwrap();
        assert_eq!(label, 0);
        assert!((scores.scores[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((scores.scores[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn knn_predict_caps_k_at_n() {
        let ds = line_dataset(&[(0.0, 0), (1.0, 0), (2.0, 1), (3.0, 1)]);
        let (_, scores) = knn_predict(&ds, 10, &[0.0], Metric::Euclidean).unwrap();
        assert_eq!(scores.scores, vec![0.5, 0.5]);
    }

    #[test]
    fn knn_predict_ties_break_to_smallest_category() {
        let ds = line_dataset(&[(0.0, 1), (1.0, 0)]);
        let (label, _) = knn_predict(&ds, 2, &[0.5], Metric::Euclidean).unwrap();
        assert_eq!(label, 0);
    }

    #[test]
    fn weighted_uniform_equals_plain() {
        let ds = synth_blobs(40, 2, 2, 3.0, 1.0, 8).unwrap();
        let weights = vec![2.5; 40];
        for q in [[0.1, -0.3], [2.9, 0.4], [1.5, 0.0]] {
            let (pl, ps) = knn_predict(&ds, 5, &q, Metric::Euclidean).unwrap();
            let w = weighted_knn_predict(&ds, &weights, 5, &q, Metric::Euclidean).unwrap();
            assert_eq!(pl, w.label);
            assert!(!w.unweighted_fallback);
            for (a, b) in ps.scores.iter().zip(&w.scores.scores) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weighted_vote_arithmetic() {
        let ds = line_dataset(&[(0.0, 0), (1.0, 1), (50.0, 1)]);
        let w = weighted_knn_predict(&ds, &[3.0, 1.0, 0.0], 2, &[0.2], Metric::Euclidean).unwrap();
        assert_eq!(w.label, 0);
        assert!((w.scores.scores[0] - 0.75).abs() < 1e-15);
        assert!((w.scores.scores[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn weighted_all_zero_falls_back() {
        let ds = line_dataset(&[(0.0, 0), (1.0, 1), (50.0, 1)]);
        let w =
            weighted_knn_predict(&ds, &[-1.0, 0.0, 5.0], 2, &[0.2], Metric::Euclidean).unwrap();
        assert!(w.unweighted_fallback);
        assert_eq!(w.scores.scores, vec![0.5, 0.5]);
        assert_eq!(w.label, 0);
    }

    #[test]
    fn accuracy_on_training_points_with_k1_is_one() {
        let ds = synth_blobs(30, 2, 3, 5.0, 0.3, 12).unwrap();
        let acc = accuracy(&ds, &ds, 1, Metric::Euclidean, None).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn accuracy_single_wrong_point_is_zero() {
        let train = line_dataset(&[(0.0, 0), (1.0, 0)]);
        let eval = Dataset::new(vec![vec![0.5]], vec![1], 2).unwrap();
        let acc = accuracy(&train, &eval, 1, Metric::Euclidean, None).unwrap();
        assert_eq!(acc, 0.0);
    }

    #[test]
    fn cosine_ranks_by_angle_not_magnitude() {
        let ds = Dataset::new(
            vec![vec![10.0, 0.0], vec![0.1, 0.1], vec![0.0, 5.0]],
            vec![0, 1, 0],
            2,
        )
        .unwrap();
        let r = rank_neighbors(&ds, &[1.0, 1.0], Metric::Cosine).unwrap();
        // The diagonal point is parallel to the query despite its tiny norm.
        assert_eq!(r.order[0], 1);
        assert!(r.distances[0].abs() < 1e-12);
        assert_eq!(r.order[1], 0, "axis points tie on angle, lower id first");
        assert_eq!(r.order[2], 2);
        assert!((r.distances[1] - r.distances[2]).abs() < 1e-12);
    }

    #[test]
    fn min_max_weights_rescale() {
        let w = valuation_weights(&[-1.0, 0.0, 3.0], WeightScheme::MinMax);
        assert_eq!(w, vec![0.0, 0.25, 1.0]);
        let w = valuation_weights(&[2.0, 2.0], WeightScheme::MinMax);
        assert_eq!(w, vec![1.0, 1.0]);
        let w = valuation_weights(&[-1.0, 0.5], WeightScheme::ClippedLinear);
        assert_eq!(w, vec![0.0, 0.5]);
    }
}
