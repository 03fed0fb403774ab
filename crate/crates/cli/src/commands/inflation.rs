//! `shapcal inflation`: removal curve plus threshold and misidentification
//! metrics.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use shapcal_core::inflation::{
    bin_removal_curve, inflation_metrics, segment_bins, write_curve_csv, InflationReport,
    RemovalCurve,
};
use shapcal_core::knn::Metric;
use shapcal_core::valuation::{aggregate_over_validation, Method, ValuationParams, EXACT_SHAPLEY_CAP};

use crate::commands::common::{load_data, ValueSummary};
use crate::output::{ensure_out_dir, out_path, write_bytes, Report};
use crate::{resolve_seed, CliError, InflationArgs};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InflationConfig {
    pub train: String,
    pub val: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<String>,
    pub label: String,
    pub has_header: bool,
    pub method: String,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    pub metric: String,
    pub bins: usize,
    /// Which set the removal accuracies are measured on.
    pub eval_on: String,
    pub normalize: bool,
    pub balance: bool,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct InflationPayload {
    summary: ValueSummary,
    result: InflationReport,
    curve: RemovalCurve,
}

pub fn run(args: InflationArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed)?;
    if args.eval_on_test && args.test.is_none() {
        return Err(CliError::usage("--eval-on-test requires --test"));
    }
    let config = InflationConfig {
        train: args.train.display().to_string(),
        val: args.val.display().to_string(),
        test: args.test.map(|p| p.display().to_string()),
        label: args.label,
        has_header: !args.no_header,
        method: args.method,
        k: args.k,
        t: args.t,
        metric: args.metric,
        bins: args.bins,
        eval_on: if args.eval_on_test { "test" } else { "validation" }.to_string(),
        normalize: args.normalize,
        balance: args.balance,
        seed,
    };
    execute(&config, &args.out_dir)?;
    Ok(())
}

pub fn execute(config: &InflationConfig, out_dir: &Path) -> Result<Vec<u8>, CliError> {
    let method = Method::from_str(&config.method)?;
    let metric = Metric::from_str(&config.metric)?;
    let data = load_data(
        Path::new(&config.train),
        Path::new(&config.val),
        config.test.as_deref().map(Path::new),
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
    let values = aggregate_over_validation(&data.train, &data.val, method, &params)?;
    values.assert_finite()?;

    let seg = segment_bins(&values.values, config.bins)?;
    let eval_set = match config.eval_on.as_str() {
        "test" => data
            .test
            .as_ref()
            .ok_or_else(|| CliError::usage("eval_on = test requires a test file"))?,
        "validation" => &data.val,
        other => return Err(CliError::usage(format!("unknown eval_on {other:?}"))),
    };
    let curve = bin_removal_curve(&data.train, eval_set, &seg, config.k, metric)?;
    let result = inflation_metrics(&curve, &seg)?;

    match result.status {
        shapcal_core::InflationStatus::Ok | shapcal_core::InflationStatus::NoZeroCrossing => {
            println!(
                "status {:?}: j* = {:?}, i* = {:?}, t = {:?}, r = {:?}",
                result.status, result.j_star, result.i_star, result.threshold, result.ratio
            );
        }
        shapcal_core::InflationStatus::NoDetrimentalBoundary => {
            println!("status NoDetrimentalBoundary: no bin removal hurts on two consecutive bins");
        }
    }

    let resolved = InflationConfig {
        t: values.t,
        ..config.clone()
    };
    ensure_out_dir(out_dir)?;
    let mut curve_csv = Vec::new();
    write_curve_csv(&mut curve_csv, &curve, &seg)?;
    write_bytes(&out_path(out_dir, "curve.csv"), &curve_csv)?;

    let summary = ValueSummary::from_values(&values.values, data.val.len());
    let report = Report::new(
        "inflation",
        resolved,
        InflationPayload {
            summary,
            result,
            curve,
        },
    );
    let bytes = report.to_json_bytes()?;
    write_bytes(&out_path(out_dir, "inflation.json"), &bytes)?;
    Ok(bytes)
}
