//! `shapcal value`: valuation vector computation and export.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use shapcal_core::knn::{rank_neighbors, Metric};
use shapcal_core::report::write_valuation_csv;
use shapcal_core::valuation::{aggregate_over_validation, Method, ValuationParams, EXACT_SHAPLEY_CAP};

use crate::commands::common::{load_data, ValueSummary};
use crate::output::{ensure_out_dir, out_path, write_bytes, Report};
use crate::{resolve_seed, CliError, ValueArgs};

/// Fully resolved configuration, embedded into the report and sufficient to
/// replay the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueConfig {
    pub train: String,
    pub val: String,
    pub label: String,
    pub has_header: bool,
    pub method: String,
    pub k: usize,
    /// Resolved calibration tail (only present for the calibrated method).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    pub metric: String,
    pub normalize: bool,
    pub mean_normalize: bool,
    pub balance: bool,
    pub dump_rankings: bool,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct ValuePayload {
    summary: ValueSummary,
    valuation: shapcal_core::ValuationVector,
}

pub fn run(args: ValueArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed)?;
    let config = ValueConfig {
        train: args.train.display().to_string(),
        val: args.val.display().to_string(),
        label: args.label,
        has_header: !args.no_header,
        method: args.method,
        k: args.k,
        t: args.t,
        metric: args.metric,
        normalize: args.normalize,
        mean_normalize: args.mean_normalize,
        balance: args.balance,
        dump_rankings: args.dump_rankings,
        seed,
    };
    execute(&config, &args.out_dir)?;
    Ok(())
}

/// Runs the valuation described by `config`, writing `values.json`,
/// `values.csv`, and optionally `rankings.csv` into `out_dir`.
pub fn execute(config: &ValueConfig, out_dir: &Path) -> Result<Vec<u8>, CliError> {
    let method = Method::from_str(&config.method)?;
    let metric = Metric::from_str(&config.metric)?;
    let data = load_data(
        Path::new(&config.train),
        Path::new(&config.val),
        None,
        &config.label,
        config.has_header,
        config.balance,
        config.normalize,
        config.seed,
    )?;
    if method == Method::Exact && data.train.len() > EXACT_SHAPLEY_CAP {
        return Err(CliError::usage(format!(
            "exact enumeration supports at most {EXACT_SHAPLEY_CAP} training samples, got {}",
            data.train.len()
        )));
    }
    let mut params = ValuationParams::new(config.k).with_metric(metric);
    params.t = config.t;
    let mut values = aggregate_over_validation(&data.train, &data.val, method, &params)?;
    if config.mean_normalize {
        values = values.mean_normalized();
    }
    values.assert_finite()?;

    // Freeze the resolved tail into the replayable config.
    let resolved = ValueConfig {
        t: values.t,
        ..config.clone()
    };
    let summary = ValueSummary::from_values(&values.values, data.val.len());
    println!(
        "method {} k {} t {:?}: {} train values | min {:.6} max {:.6} mean {:.6} | {} nonpositive",
        values.method.name(),
        values.k,
        values.t,
        summary.n_train,
        summary.min,
        summary.max,
        summary.mean,
        summary.nonpositive
    );

    ensure_out_dir(out_dir)?;
    let mut csv = Vec::new();
    write_valuation_csv(&mut csv, &values)?;
    write_bytes(&out_path(out_dir, "values.csv"), &csv)?;

    if config.dump_rankings {
        let mut rankings = Vec::new();
        {
            use std::io::Write;
            writeln!(rankings, "query_id,rank,train_id,distance")
                .map_err(|e| CliError::data(e.to_string()))?;
        }
        for (query_id, sample) in data.val.samples().iter().enumerate() {
            let mut ranking = rank_neighbors(&data.train, &sample.features, metric)?;
            ranking.query_id = query_id;
            ranking.write_csv(&mut rankings, false)?;
        }
        write_bytes(&out_path(out_dir, "rankings.csv"), &rankings)?;
    }

    let report = Report::new(
        "value",
        resolved,
        ValuePayload {
            summary,
            valuation: values,
        },
    );
    let bytes = report.to_json_bytes()?;
    write_bytes(&out_path(out_dir, "values.json"), &bytes)?;
    Ok(bytes)
}
