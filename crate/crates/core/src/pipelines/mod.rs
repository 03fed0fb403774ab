//! Scenario building blocks: valuation-driven sample removal, mislabel
//! analysis, online stream valuation, and active learning.

pub mod active;
pub mod online;
pub mod regressor;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FlipMask};
use crate::error::{Error, Result};

/// Whether value comparisons against zero are strict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strictness {
    /// Remove values `< 0`. The calibrated method assigns exact zeros to the
    /// far tail, which strict removal keeps.
    #[default]
    Strict,
    /// Remove values `<= 0`.
    Inclusive,
}

/// Rule for deleting training samples by valuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RemovalPolicy {
    NegativeValues { strictness: Strictness },
    /// Remove the `floor(q * N)` samples with the smallest (value, id).
    BottomFraction { q: f64 },
}

impl Default for RemovalPolicy {
    fn default() -> Self {
        RemovalPolicy::NegativeValues {
            strictness: Strictness::Strict,
        }
    }
}

impl RemovalPolicy {
    pub fn validate(&self) -> Result<()> {
        if let RemovalPolicy::BottomFraction { q } = self {
            if !(*q > 0.0 && *q < 1.0) {
                return Err(Error::invalid("bottom-fraction q must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

/// Result of applying a removal policy: the surviving dataset plus id
/// traceability in both directions.
#[derive(Debug, Clone)]
pub struct RemovalOutcome {
    pub dataset: Dataset,
    /// Original ids removed, ascending.
    pub removed: Vec<usize>,
    /// Original id per surviving sample, in the survivors' id order.
    pub kept: Vec<usize>,
}

/// Removes training samples according to the policy. Survivors keep their
/// relative order and map back to original ids through `kept`.
pub fn apply_removal(
    train: &Dataset,
    values: &[f64],
    policy: RemovalPolicy,
) -> Result<RemovalOutcome> {
    if values.len() != train.len() {
        return Err(Error::invalid(format!(
            "got {} values for {} training samples",
            values.len(),
            train.len()
        )));
    }
    policy.validate()?;
    let n = train.len();
    let removed: Vec<usize> = match policy {
        RemovalPolicy::NegativeValues { strictness } => (0..n)
            .filter(|&id| match strictness {
                Strictness::Strict => values[id] < 0.0,
                Strictness::Inclusive => values[id] <= 0.0,
            })
            .collect(),
        RemovalPolicy::BottomFraction { q } => {
            let count = (q * n as f64).floor() as usize;
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
            let mut chosen: Vec<usize> = order.into_iter().take(count).collect();
            chosen.sort_unstable();
            chosen
        }
    };
    if removed.len() == n {
        return Err(Error::invalid("removal policy would empty the training set"));
    }
    let removed_set: Vec<bool> = {
        let mut mask = vec![false; n];
        for &id in &removed {
            mask[id] = true;
        }
        mask
    };
    let kept: Vec<usize> = (0..n).filter(|&id| !removed_set[id]).collect();
    Ok(RemovalOutcome {
        dataset: train.subset(&kept)?,
        removed,
        kept,
    })
}

/// Partition of samples by valuation sign and flip status.
///
/// The three sets are disjoint; flagged means the value is nonpositive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MislabelAnalysis {
    /// Nonpositive value, label untouched.
    pub clean_flagged: Vec<usize>,
    /// Nonpositive value, label flipped: correctly detected corruption.
    pub flipped_flagged: Vec<usize>,
    /// Positive value, label flipped: corruption the valuation missed.
    pub flipped_missed: Vec<usize>,
    /// `|flipped_flagged| / (|clean_flagged| + |flipped_flagged|)`.
    pub precision: Option<f64>,
    /// `|flipped_flagged| / (|flipped_flagged| + |flipped_missed|)`.
    pub recall: Option<f64>,
}

/// Classifies every sample by (value <= 0, flipped) and derives detection
/// precision and recall of the flipped set.
pub fn mislabel_analysis(values: &[f64], mask: &FlipMask) -> Result<MislabelAnalysis> {
    if values.len() != mask.len() {
        return Err(Error::invalid(format!(
            "got {} values for {} flip entries",
            values.len(),
            mask.len()
        )));
    }
    let mut clean_flagged = Vec::new();
    let mut flipped_flagged = Vec::new();
    let mut flipped_missed = Vec::new();
    for (id, &v) in values.iter().enumerate() {
        let nonpositive = v <= 0.0;
        match (nonpositive, mask.is_flipped(id)) {
            (true, false) => clean_flagged.push(id),
            (true, true) => flipped_flagged.push(id),
            (false, true) => flipped_missed.push(id),
            (false, false) => {}
        }
    }
    let precision = {
        let denom = clean_flagged.len() + flipped_flagged.len();
        (denom > 0).then(|| flipped_flagged.len() as f64 / denom as f64)
    };
    let recall = {
        let denom = flipped_flagged.len() + flipped_missed.len();
        (denom > 0).then(|| flipped_flagged.len() as f64 / denom as f64)
    };
    Ok(MislabelAnalysis {
        clean_flagged,
        flipped_flagged,
        flipped_missed,
        precision,
        recall,
    })
}
