//! Value-inflation diagnostics: equal-size binning by ascending valuation,
//! bin-removal performance curves, and the threshold / misidentification
//! metrics derived from them.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::knn::{accuracy, Metric};
use crate::report::fmt_f64;

/// Default number of bins for the misidentification metrics.
pub const DEFAULT_BINS: usize = 100;

/// Equal-size segmentation of the training set by ascending valuation.
#[derive(Debug, Clone, PartialEq)]
pub struct BinSegmentation {
    pub num_bins: usize,
    /// Bin index (0-based) per training id.
    pub assignment: Vec<usize>,
    /// Training ids per bin, in ascending (value, id) order.
    pub bins: Vec<Vec<usize>>,
    /// Representative valuation per bin: the bin maximum (right edge), so
    /// `value <= bin_values[j]` selects exactly bins `0..=j`.
    pub bin_values: Vec<f64>,
}

/// Sorts ascending by (value, id) and packs into `num_bins` bins whose sizes
/// differ by at most one; the first `N mod B` bins take the extra sample.
pub fn segment_bins(values: &[f64], num_bins: usize) -> Result<BinSegmentation> {
    let n = values.len();
    if num_bins == 0 {
        return Err(Error::invalid("number of bins must be positive"));
    }
    if num_bins > n {
        return Err(Error::invalid(format!(
            "cannot split {n} samples into {num_bins} bins"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));

    let small = n / num_bins;
    let extras = n % num_bins;
    let mut assignment = vec![0usize; n];
    let mut bins = Vec::with_capacity(num_bins);
    let mut bin_values = Vec::with_capacity(num_bins);
    let mut cursor = 0usize;
    for bin in 0..num_bins {
        let size = small + usize::from(bin < extras);
        let members = order[cursor..cursor + size].to_vec();
        cursor += size;
        for &id in &members {
            assignment[id] = bin;
        }
        let right_edge = members
            .iter()
            .map(|&id| values[id])
            .fold(f64::NEG_INFINITY, f64::max);
        bins.push(members);
        bin_values.push(right_edge);
    }
    Ok(BinSegmentation {
        num_bins,
        assignment,
        bins,
        bin_values,
    })
}

/// Baseline accuracy plus accuracy with each bin removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalCurve {
    /// Accuracy with the full training set.
    pub baseline: f64,
    /// `per_bin[j]` is the accuracy with bin `j+1`'s samples removed.
    pub per_bin: Vec<f64>,
}

/// Evaluates the classifier once per bin with that bin's samples removed.
/// The bins are independent, so they fan out to the thread pool and gather in
/// index order.
pub fn bin_removal_curve(
    train: &Dataset,
    eval_set: &Dataset,
    seg: &BinSegmentation,
    k: usize,
    metric: Metric,
) -> Result<RemovalCurve> {
    if seg.assignment.len() != train.len() {
        return Err(Error::invalid("segmentation does not match the training set"));
    }
    let baseline = accuracy(train, eval_set, k, metric, None)?;
    let per_bin: Vec<f64> = (0..seg.num_bins)
        .into_par_iter()
        .map(|bin| {
            let keep: Vec<usize> = (0..train.len())
                .filter(|&id| seg.assignment[id] != bin)
                .collect();
            if keep.is_empty() {
                return Err(Error::invalid(format!(
                    "removing bin {} empties the training set",
                    bin + 1
                )));
            }
            accuracy(&train.subset(&keep)?, eval_set, k, metric, None)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RemovalCurve { baseline, per_bin })
}

/// CSV export of a removal curve: `bin,p,nu` with the baseline as bin 0.
pub fn write_curve_csv<W: Write>(w: &mut W, curve: &RemovalCurve, seg: &BinSegmentation) -> Result<()> {
    writeln!(w, "bin,p,nu")?;
    writeln!(w, "0,{},", fmt_f64(curve.baseline))?;
    for (j, (p, nu)) in curve.per_bin.iter().zip(&seg.bin_values).enumerate() {
        writeln!(w, "{},{},{}", j + 1, fmt_f64(*p), fmt_f64(*nu))?;
    }
    Ok(())
}

/// Outcome classification for the inflation metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InflationStatus {
    Ok,
    /// The removal curve never dips below baseline on two consecutive bins.
    NoDetrimentalBoundary,
    /// Every bin's right edge is positive; the valuation never crosses zero.
    NoZeroCrossing,
}

/// Threshold and misidentification metrics. Bin indices are 1-based as in the
/// curve export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflationReport {
    pub status: InflationStatus,
    /// First bin from which removal hurts on two consecutive bins.
    pub j_star: Option<usize>,
    /// Last bin whose right edge is nonpositive, clamped to `j_star`
    /// (a zero crossing past the boundary means nothing was misidentified).
    pub i_star: Option<usize>,
    /// Threshold valuation separating detrimental from beneficial bins.
    pub threshold: Option<f64>,
    /// Misidentification ratio `(j* - i*) / j*`.
    pub ratio: Option<f64>,
}

/// Derives the threshold and misidentification ratio from a removal curve.
///
/// `j*` is the smallest bin index (1-based, up to B-1) whose own and next
/// bin's removal accuracies both fall below baseline. `i*` is the largest bin
/// whose right-edge valuation is nonpositive. The ratio `(j* - i*) / j*`
/// measures how much of the detrimental region carries positive values.
pub fn inflation_metrics(curve: &RemovalCurve, seg: &BinSegmentation) -> Result<InflationReport> {
    let b = curve.per_bin.len();
    if b != seg.num_bins {
        return Err(Error::invalid("curve and segmentation bin counts differ"));
    }
    if b < 2 {
        return Err(Error::invalid("inflation metrics require at least 2 bins"));
    }
    let p0 = curve.baseline;
    let j_star = (1..b).find(|&j| curve.per_bin[j - 1] < p0 && curve.per_bin[j] < p0);
    // Right edges are nondecreasing, so the last nonpositive edge is a count.
    let zero_cross = seg
        .bin_values
        .iter()
        .rposition(|&v| v <= 0.0)
        .map(|idx| idx + 1);

    match j_star {
        None => Ok(InflationReport {
            status: InflationStatus::NoDetrimentalBoundary,
            j_star: None,
            i_star: zero_cross,
            threshold: None,
            ratio: None,
        }),
        Some(j) => {
            let threshold = Some(seg.bin_values[j - 1]);
            match zero_cross {
                None => Ok(InflationReport {
                    status: InflationStatus::NoZeroCrossing,
                    j_star: Some(j),
                    i_star: Some(0),
                    threshold,
                    ratio: Some(1.0),
                }),
                Some(raw_i) => {
                    let i = raw_i.min(j);
                    Ok(InflationReport {
                        status: InflationStatus::Ok,
                        j_star: Some(j),
                        i_star: Some(i),
                        threshold,
                        ratio: Some((j - i) as f64 / j as f64),
                    })
                }
            }
        }
    }
}
