//! Online stream valuation: batches arrive one at a time, survivors of the
//! previous batch join the new arrivals, detrimental samples get removed by
//! valuation, and accuracy is tracked on a fixed validation set.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::knn::accuracy;
use crate::pipelines::{apply_removal, RemovalPolicy};
use crate::valuation::{aggregate_over_validation, Method, ValuationParams};

/// Per-batch bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    /// 1-based batch number.
    pub batch: usize,
    pub arrivals: usize,
    pub candidates: usize,
    pub removed: usize,
    pub survivors: usize,
    /// Validation accuracy of the surviving training set.
    pub accuracy: f64,
}

/// When a sample entered the stream and when (if ever) it was removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLifecycle {
    /// 1-based batch in which the sample arrived.
    pub admitted: usize,
    /// 1-based batch in which it was removed, if any. Removed samples never
    /// reappear in later candidate sets.
    pub removed: Option<usize>,
}

/// Full report of a stream run. Sample indices are global: shard ids offset
/// by the total size of earlier shards.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OnlineRunReport {
    pub batches: Vec<BatchRecord>,
    pub lifecycle: Vec<SampleLifecycle>,
    /// Per-sample `(batch, value)` pairs for every batch the sample was a
    /// candidate in.
    pub trajectories: Vec<Vec<(usize, f64)>>,
}

impl OnlineRunReport {
    pub fn final_accuracy(&self) -> f64 {
        self.batches.last().map(|b| b.accuracy).unwrap_or(0.0)
    }
}

/// Runs the valuation-and-removal stream over ordered shards.
///
/// Each batch forms the candidate set from the previous survivors plus the
/// new shard, values it against the validation set, removes samples per the
/// policy, and records accuracy of the survivors.
pub fn online_run(
    shards: &[Dataset],
    val: &Dataset,
    method: Method,
    params: &ValuationParams,
    policy: RemovalPolicy,
) -> Result<OnlineRunReport> {
    if shards.is_empty() {
        return Err(Error::invalid("need at least one batch"));
    }
    let dim = shards[0].dim();
    let classes = shards[0].num_classes();
    for shard in shards {
        if shard.dim() != dim || shard.num_classes() != classes {
            return Err(Error::invalid("shards must share dimensionality and label space"));
        }
    }
    if val.dim() != dim {
        return Err(Error::invalid("validation set dimensionality differs from shards"));
    }

    // Master copy of every sample with a stable global id.
    let mut master_rows: Vec<Vec<f64>> = Vec::new();
    let mut master_labels: Vec<usize> = Vec::new();
    let mut admitted_batch: Vec<usize> = Vec::new();
    let mut shard_ranges = Vec::with_capacity(shards.len());
    for (b, shard) in shards.iter().enumerate() {
        let start = master_rows.len();
        for s in shard.samples() {
            master_rows.push(s.features.clone());
            master_labels.push(s.label);
            admitted_batch.push(b + 1);
        }
        shard_ranges.push(start..master_rows.len());
    }
    let master = Dataset::new(master_rows, master_labels, classes)?;

    let mut lifecycle: Vec<SampleLifecycle> = admitted_batch
        .iter()
        .map(|&admitted| SampleLifecycle {
            admitted,
            removed: None,
        })
        .collect();
    let mut trajectories: Vec<Vec<(usize, f64)>> = vec![Vec::new(); master.len()];
    let mut survivors: Vec<usize> = Vec::new();
    let mut batches = Vec::with_capacity(shards.len());

    for (b, range) in shard_ranges.iter().enumerate() {
        let batch_no = b + 1;
        let arrivals = range.len();
        let mut candidates = survivors.clone();
        candidates.extend(range.clone());
        let candidate_ds = master.subset(&candidates)?;
        let values = aggregate_over_validation(&candidate_ds, val, method, params)?;
        values.assert_finite()?;
        for (local, &global) in candidates.iter().enumerate() {
            trajectories[global].push((batch_no, values.values[local]));
        }
        let outcome = apply_removal(&candidate_ds, &values.values, policy).map_err(|e| {
            Error::invalid(format!("batch {batch_no}: {e}"))
        })?;
        for &local in &outcome.removed {
            lifecycle[candidates[local]].removed = Some(batch_no);
        }
        let next: Vec<usize> = outcome.kept.iter().map(|&local| candidates[local]).collect();
        let acc = accuracy(&outcome.dataset, val, params.k, params.metric, None)?;
        batches.push(BatchRecord {
            batch: batch_no,
            arrivals,
            candidates: candidates.len(),
            removed: outcome.removed.len(),
            survivors: next.len(),
            accuracy: acc,
        });
        survivors = next;
    }

    Ok(OnlineRunReport {
        batches,
        lifecycle,
        trajectories,
    })
}

/// Accuracy per batch when every arrival is kept: the no-removal baseline.
pub fn online_baseline(shards: &[Dataset], val: &Dataset, k: usize, metric: crate::knn::Metric) -> Result<Vec<f64>> {
    if shards.is_empty() {
        return Err(Error::invalid("need at least one batch"));
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let classes = shards[0].num_classes();
    let mut out = Vec::with_capacity(shards.len());
    for shard in shards {
        for s in shard.samples() {
            rows.push(s.features.clone());
            labels.push(s.label);
        }
        let ds = Dataset::new(rows.clone(), labels.clone(), classes)?;
        out.push(accuracy(&ds, val, k, metric, None)?);
    }
    Ok(out)
}

/// Splits a dataset into `count` contiguous shards whose sizes differ by at
/// most one; earlier shards take the remainder.
pub fn shard_dataset(ds: &Dataset, count: usize) -> Result<Vec<Dataset>> {
    if count == 0 || count > ds.len() {
        return Err(Error::invalid(format!(
            "cannot shard {} samples into {count} batches",
            ds.len()
        )));
    }
    let small = ds.len() / count;
    let extras = ds.len() % count;
    let mut shards = Vec::with_capacity(count);
    let mut cursor = 0;
    for b in 0..count {
        let size = small + usize::from(b < extras);
        let ids: Vec<usize> = (cursor..cursor + size).collect();
        cursor += size;
        shards.push(ds.subset(&ids)?);
    }
    Ok(shards)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{flip_labels, synth_blobs};
    use crate::knn::Metric;

    #[test]
    fn single_batch_equals_removal_plus_accuracy() {
        let train = synth_blobs(40, 2, 2, 4.0, 1.0, 3).unwrap();
        let val = synth_blobs(10, 2, 2, 4.0, 1.0, 4).unwrap();
        let params = ValuationParams::new(5);
        let report = online_run(
            std::slice::from_ref(&train),
            &val,
            Method::KnnShapley,
            &params,
            RemovalPolicy::default(),
        )
        .unwrap();
        assert_eq!(report.batches.len(), 1);

        let values =
            aggregate_over_validation(&train, &val, Method::KnnShapley, &params).unwrap();
        let outcome = apply_removal(&train, &values.values, RemovalPolicy::default()).unwrap();
        let acc = accuracy(&outcome.dataset, &val, 5, Metric::Euclidean, None).unwrap();
        assert_eq!(report.batches[0].removed, outcome.removed.len());
        assert_eq!(report.batches[0].accuracy, acc);
    }

    #[test]
    fn removed_samples_never_reappear() {
        let base = synth_blobs(120, 2, 2, 3.0, 1.2, 9).unwrap();
        let (noisy, _) = flip_labels(&base, 0.3, 10).unwrap();
        let val = synth_blobs(30, 2, 2, 3.0, 1.2, 11).unwrap();
        let shards = shard_dataset(&noisy, 6).unwrap();
        let report = online_run(
            &shards,
            &val,
            Method::CknnShapley,
            &ValuationParams::new(5),
            RemovalPolicy::default(),
        )
        .unwrap();

        for (id, lc) in report.lifecycle.iter().enumerate() {
            if let Some(removed_at) = lc.removed {
                assert!(removed_at >= lc.admitted);
                for (batch, _) in &report.trajectories[id] {
                    assert!(*batch <= removed_at, "sample {id} valued after removal");
                }
            }
        }
        // Survivor recurrence: survivors(b) = candidates(b) - removed(b) and
        // candidates(b) = survivors(b-1) + arrivals(b).
        let mut prev = 0;
        for rec in &report.batches {
            assert_eq!(rec.candidates, prev + rec.arrivals);
            assert_eq!(rec.survivors, rec.candidates - rec.removed);
            prev = rec.survivors;
        }
        let total: usize = shards.iter().map(|s| s.len()).sum();
        assert_eq!(report.lifecycle.len(), total);
    }

    #[test]
    fn shard_sizes_differ_by_at_most_one() {
        let ds = synth_blobs(103, 2, 2, 4.0, 1.0, 5).unwrap();
        let shards = shard_dataset(&ds, 10).unwrap();
        let sizes: Vec<usize> = shards.iter().map(|s| s.len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 103);
        assert_eq!(sizes[0], 11);
        assert_eq!(sizes[9], 10);
    }
}
