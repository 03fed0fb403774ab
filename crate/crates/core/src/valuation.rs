//! Data valuation: exact Shapley values by subset enumeration, the
//! KNN-Shapley recursion, its calibrated variant, and aggregation over a
//! validation set.
//!
//! A single-validation valuation costs one full neighbor sort plus one linear
//! recursion pass. The exact enumerator is exponential and capped; it exists
//! as the ground-truth oracle for the recursive routes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::knn::{rank_neighbors, Metric, NeighborRanking};

/// Largest training-set size accepted by the exact enumerator (2^N subsets).
pub const EXACT_SHAPLEY_CAP: usize = 16;

/// Default neighborhood size.
pub const DEFAULT_K: usize = 10;

/// Valuation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    KnnShapley,
    CknnShapley,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::KnnShapley => "knn_shapley",
            Method::CknnShapley => "cknn_shapley",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Method::Exact),
            "knn" | "knn_shapley" => Ok(Method::KnnShapley),
            "cknn" | "cknn_shapley" => Ok(Method::CknnShapley),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

/// Divisor convention for the KNN utility when a subset is smaller than K.
///
/// The utility divides the match count by K regardless of subset size; that
/// convention is the one the recursive route reproduces exactly, which the
/// oracle equivalence suite pins down. Dividing by the subset size instead is
/// available for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UtilityRule {
    #[default]
    DivideByK,
    DivideBySubsetSize,
}

/// Parameters shared by the valuation methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValuationParams {
    pub k: usize,
    /// Calibration tail size; `None` resolves to `max(N - 2K, 0)`.
    pub t: Option<usize>,
    pub metric: Metric,
}

impl Default for ValuationParams {
    fn default() -> Self {
        ValuationParams {
            k: DEFAULT_K,
            t: None,
            metric: Metric::Euclidean,
        }
    }
}

impl ValuationParams {
    pub fn new(k: usize) -> Self {
        ValuationParams {
            k,
            ..Default::default()
        }
    }

    pub fn with_t(mut self, t: usize) -> Self {
        self.t = Some(t);
        self
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    /// Effective tail size for a training set of `n` samples. When `n <= 2K`
    /// the default tail vanishes and the calibrated method degenerates to the
    /// plain recursion.
    pub fn resolved_t(&self, n: usize) -> usize {
        self.t.unwrap_or_else(|| n.saturating_sub(2 * self.k))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        let t = self.resolved_t(n);
        if n == 0 || t > n - 1 {
            return Err(Error::invalid(format!(
                "t = {t} out of range for n = {n} (need 0 <= t <= n-1)"
            )));
        }
        Ok(())
    }
}

/// How a valuation vector was aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Aggregation {
    /// One validation point.
    Single,
    /// Element-wise sum over a validation set.
    Summed { validation_size: usize },
}

/// Per-training-sample values with the method and parameters that produced
/// them. `values[i]` belongs to training id `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationVector {
    pub method: Method,
    pub k: usize,
    pub t: Option<usize>,
    pub metric: Metric,
    pub aggregation: Aggregation,
    pub mean_normalized: bool,
    pub values: Vec<f64>,
}

impl ValuationVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Divides every value by the validation-set size. Changes no sign and
    /// no ordering; useful for cross-dataset comparability.
    pub fn mean_normalized(mut self) -> Self {
        if let Aggregation::Summed { validation_size } = self.aggregation {
            let inv = validation_size as f64;
            for v in &mut self.values {
                *v /= inv;
            }
            self.mean_normalized = true;
        }
        self
    }

    pub fn assert_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("valuation vector contains non-finite values".into()))
        }
    }
}

/// Match flags of the training labels against `y_v`, in rank order.
fn match_flags(ranking: &NeighborRanking, labels: &[usize], y_v: usize) -> Vec<bool> {
    ranking.order.iter().map(|&id| labels[id] == y_v).collect()
}

/// KNN predictive-confidence utility relative to the query label, counting
/// matches among the ranked members of `subset_flags` (flags in rank order,
/// `None` entries excluded from the subset).
fn utility_from_flags(flags_in_rank_order: &[Option<bool>], k: usize, rule: UtilityRule) -> f64 {
    let mut seen = 0usize;
    let mut matches = 0usize;
    for flag in flags_in_rank_order.iter().flatten() {
        seen += 1;
        if *flag {
            matches += 1;
        }
        if seen == k {
            break;
        }
    }
    if seen == 0 {
        return 0.0;
    }
    let divisor = match rule {
        UtilityRule::DivideByK => k,
        UtilityRule::DivideBySubsetSize => seen.min(k),
    };
    matches as f64 / divisor as f64
}

/// Utility of a training subset for one validation sample: the fraction of
/// the query's nearest neighbors inside the subset that share its label.
/// The empty subset has utility zero.
pub fn utility_knn(subset: &[usize], train: &Dataset, z_v: &Sample, k: usize) -> Result<f64> {
    utility_knn_with_rule(subset, train, z_v, k, UtilityRule::default())
}

pub fn utility_knn_with_rule(
    subset: &[usize],
    train: &Dataset,
    z_v: &Sample,
    k: usize,
    rule: UtilityRule,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    let mut member = vec![false; train.len()];
    for &id in subset {
        if id >= train.len() {
            return Err(Error::invalid(format!("subset id {id} out of range")));
        }
        member[id] = true;
    }
    if subset.is_empty() {
        return Ok(0.0);
    }
    let ranking = rank_neighbors(train, &z_v.features, Metric::Euclidean)?;
    let flags: Vec<Option<bool>> = ranking
        .order
        .iter()
        .map(|&id| member[id].then(|| train.label(id) == z_v.label))
        .collect();
    Ok(utility_from_flags(&flags, k, rule))
}

/// Exact Shapley values by enumerating all `2^N` subsets.
pub fn exact_shapley(train: &Dataset, z_v: &Sample, k: usize) -> Result<ValuationVector> {
    exact_shapley_with_rule(train, z_v, k, UtilityRule::default(), Metric::Euclidean)
}

/// Exact Shapley values under an explicit utility rule and metric.
///
/// For each training sample the marginal utility contribution is averaged
/// over all subsets of the remaining samples, weighted by the reciprocal
/// binomial coefficient of the subset size.
pub fn exact_shapley_with_rule(
    train: &Dataset,
    z_v: &Sample,
    k: usize,
    rule: UtilityRule,
    metric: Metric,
) -> Result<ValuationVector> {
    let n = train.len();
    if n > EXACT_SHAPLEY_CAP {
        return Err(Error::invalid(format!(
            "exact enumeration supports at most {EXACT_SHAPLEY_CAP} samples, got {n}"
        )));
    }
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    let ranking = rank_neighbors(train, &z_v.features, metric)?;
    let labels = train.labels();
    let flags = match_flags(&ranking, &labels, z_v.label);

    // Utility of every subset, indexed by bitmask over training ids.
    let total = 1usize << n;
    let mut utilities = vec![0.0f64; total];
    for (mask, out) in utilities.iter_mut().enumerate().skip(1) {
        let mut seen = 0usize;
        let mut matches = 0usize;
        for (rank, &id) in ranking.order.iter().enumerate() {
            if mask & (1 << id) == 0 {
                continue;
            }
            seen += 1;
            if flags[rank] {
                matches += 1;
            }
            if seen == k {
                break;
            }
        }
        let divisor = match rule {
            UtilityRule::DivideByK => k,
            UtilityRule::DivideBySubsetSize => seen.min(k),
        };
        *out = matches as f64 / divisor as f64;
    }

    // binom[s] = C(N-1, s)
    let mut binom = vec![1.0f64; n];
    for s in 1..n {
        binom[s] = binom[s - 1] * (n - s) as f64 / s as f64;
    }

    let mut values = vec![0.0f64; n];
    for (i, value) in values.iter_mut().enumerate() {
        let bit = 1usize << i;
        let mut acc = 0.0;
        for mask in 0..total {
            if mask & bit != 0 {
                continue;
            }
            let size = mask.count_ones() as usize;
            acc += (utilities[mask | bit] - utilities[mask]) / binom[size];
        }
        *value = acc / n as f64;
    }
    Ok(ValuationVector {
        method: Method::Exact,
        k,
        t: None,
        metric,
        aggregation: Aggregation::Single,
        mean_normalized: false,
        values,
    })
}

/// Shared recursion over ranked match flags. The `tail` farthest ranks get
/// exactly zero; the recursion starts at rank `n - tail` with base
/// `1[match] / (n - tail)` and steps toward the nearest rank with increment
/// `(1[match_i] - 1[match_{i+1}]) / max(K, i)`.
fn recursion_over_ranks(flags: &[bool], k: usize, tail: usize) -> Vec<f64> {
    let n = flags.len();
    let mut values = vec![0.0f64; n];
    debug_assert!(tail < n);
    let base_rank = n - tail - 1;
    let live = (n - tail) as f64;
    values[base_rank] = if flags[base_rank] { 1.0 / live } else { 0.0 };
    for r in (0..base_rank).rev() {
        let step = (i32::from(flags[r]) - i32::from(flags[r + 1])) as f64
            / k.max(r + 1) as f64;
        values[r] = values[r + 1] + step;
    }
    values
}

fn scatter_to_ids(ranking: &NeighborRanking, by_rank: Vec<f64>) -> Vec<f64> {
    let mut out = vec![0.0f64; by_rank.len()];
    for (rank, &id) in ranking.order.iter().enumerate() {
        out[id] = by_rank[rank];
    }
    out
}

/// KNN-Shapley values for one validation point, from a full neighbor ranking.
pub fn knn_shapley(
    ranking: &NeighborRanking,
    labels: &[usize],
    y_v: usize,
    k: usize,
) -> Result<ValuationVector> {
    if ranking.len() != labels.len() || ranking.is_empty() {
        return Err(Error::invalid(
            "ranking must cover every training sample at least once",
        ));
    }
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    let flags = match_flags(ranking, labels, y_v);
    let by_rank = recursion_over_ranks(&flags, k, 0);
    Ok(ValuationVector {
        method: Method::KnnShapley,
        k,
        t: None,
        metric: Metric::Euclidean,
        aggregation: Aggregation::Single,
        mean_normalized: false,
        values: scatter_to_ids(ranking, by_rank),
    })
}

/// Calibrated KNN-Shapley values for one validation point: the `t` farthest
/// samples get exactly zero and the recursion restarts at rank `N - t`.
/// `t = 0` reproduces [`knn_shapley`] bit for bit.
pub fn cknn_shapley(
    ranking: &NeighborRanking,
    labels: &[usize],
    y_v: usize,
    k: usize,
    t: usize,
) -> Result<ValuationVector> {
    let n = ranking.len();
    if n != labels.len() || n == 0 {
        return Err(Error::invalid(
            "ranking must cover every training sample at least once",
        ));
    }
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if t > n - 1 {
        return Err(Error::invalid(format!(
            "t = {t} out of range for n = {n} (need 0 <= t <= n-1)"
        )));
    }
    let flags = match_flags(ranking, labels, y_v);
    let by_rank = recursion_over_ranks(&flags, k, t);
    Ok(ValuationVector {
        method: Method::CknnShapley,
        k,
        t: Some(t),
        metric: Metric::Euclidean,
        aggregation: Aggregation::Single,
        mean_normalized: false,
        values: scatter_to_ids(ranking, by_rank),
    })
}

/// Single-validation valuation dispatch.
pub fn value_single(
    train: &Dataset,
    z_v: &Sample,
    method: Method,
    params: &ValuationParams,
) -> Result<ValuationVector> {
    params.validate(train.len())?;
    match method {
        Method::Exact => {
            let mut v =
                exact_shapley_with_rule(train, z_v, params.k, UtilityRule::default(), params.metric)?;
            v.metric = params.metric;
            Ok(v)
        }
        Method::KnnShapley => {
            let ranking = rank_neighbors(train, &z_v.features, params.metric)?;
            let mut v = knn_shapley(&ranking, &train.labels(), z_v.label, params.k)?;
            v.metric = params.metric;
            Ok(v)
        }
        Method::CknnShapley => {
            let t = params.resolved_t(train.len());
            let ranking = rank_neighbors(train, &z_v.features, params.metric)?;
            let mut v = cknn_shapley(&ranking, &train.labels(), z_v.label, params.k, t)?;
            v.metric = params.metric;
            Ok(v)
        }
    }
}

/// Element-wise sum of single-validation valuations over a validation set.
///
/// Per-validation work fans out to the thread pool, but summation always runs
/// in validation order over the collected vectors, so repeated runs agree bit
/// for bit regardless of thread count.
pub fn aggregate_over_validation(
    train: &Dataset,
    val: &Dataset,
    method: Method,
    params: &ValuationParams,
) -> Result<ValuationVector> {
    if val.is_empty() {
        return Err(Error::invalid("validation set is empty"));
    }
    if val.dim() != train.dim() {
        return Err(Error::invalid("train and validation dimensionality differ"));
    }
    params.validate(train.len())?;
    let singles: Vec<ValuationVector> = val
        .samples()
        .par_iter()
        .map(|z_v| value_single(train, z_v, method, params))
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![0.0f64; train.len()];
    for single in &singles {
        for (acc, v) in values.iter_mut().zip(&single.values) {
            *acc += v;
        }
    }
    let t = match method {
        Method::CknnShapley => Some(params.resolved_t(train.len())),
        _ => None,
    };
    Ok(ValuationVector {
        method,
        k: params.k,
        t,
        metric: params.metric,
        aggregation: Aggregation::Summed {
            validation_size: val.len(),
        },
        mean_normalized: false,
        values,
    })
}
