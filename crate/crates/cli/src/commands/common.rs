//! Dataset loading shared by the valuation-facing commands.

use std::path::Path;

use shapcal_core::dataset::{load_csv_group, Dataset};

use crate::CliError;

pub struct LoadedData {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Option<Dataset>,
}

/// Loads train/val(/test) CSVs with a shared label mapping, then applies the
/// optional balanced subsample (train only) and z-score normalization
/// (training statistics, applied to every set).
#[allow(clippy::too_many_arguments)]
pub fn load_data(
    train: &Path,
    val: &Path,
    test: Option<&Path>,
    label: &str,
    has_header: bool,
    balance: bool,
    normalize: bool,
    seed: u64,
) -> Result<LoadedData, CliError> {
    let mut paths = vec![train, val];
    if let Some(test) = test {
        paths.push(test);
    }
    let mut datasets = load_csv_group(&paths, label, has_header)?;
    let test_ds = if test.is_some() { datasets.pop() } else { None };
    let val_ds = datasets.pop().expect("val dataset present");
    let mut train_ds = datasets.pop().expect("train dataset present");

    if balance {
        train_ds = train_ds.balanced_subsample(seed)?;
    }
    if normalize {
        let (mean, std) = train_ds.zscore_stats();
        train_ds = train_ds.apply_zscore(&mean, &std)?;
        let val_ds = val_ds.apply_zscore(&mean, &std)?;
        let test_ds = test_ds.map(|t| t.apply_zscore(&mean, &std)).transpose()?;
        return Ok(LoadedData {
            train: train_ds,
            val: val_ds,
            test: test_ds,
        });
    }
    Ok(LoadedData {
        train: train_ds,
        val: val_ds,
        test: test_ds,
    })
}

/// Summary statistics reported for a valuation vector.
#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct ValueSummary {
    pub n_train: usize,
    pub n_val: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub nonpositive: usize,
}

impl ValueSummary {
    pub fn from_values(values: &[f64], n_val: usize) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let nonpositive = values.iter().filter(|&&v| v <= 0.0).count();
        ValueSummary {
            n_train: values.len(),
            n_val,
            min,
            max,
            mean,
            nonpositive,
        }
    }
}
