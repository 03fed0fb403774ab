//! `shapcal scenario`: the mislabel, online, and active-learning pipelines.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use shapcal_core::dataset::{flip_labels, split, synth_blobs, Dataset, FlipMask};
use shapcal_core::pipelines::active::{active_learning_run, ActiveConfig, RoundRecord};
use shapcal_core::pipelines::online::{online_baseline, online_run, shard_dataset, BatchRecord};
use shapcal_core::pipelines::{apply_removal, mislabel_analysis};
use shapcal_core::report::fmt_f64;
use shapcal_core::rng::{sample_indices, stream};
use shapcal_core::valuation::aggregate_over_validation;
use shapcal_core::{accuracy, load_csv_group};

use crate::config::{
    load_scenario_config, DatasetSpec, ResolvedScenario, Scenario, ScenarioOverrides,
};
use crate::output::{ensure_out_dir, out_path, write_bytes, Report};
use crate::{CliError, ScenarioArgs};
use shapcal_core::pipelines::Strictness;

pub fn run(args: ScenarioArgs) -> Result<(), CliError> {
    let scenario = match args.kind.as_str() {
        "mislabel" => Scenario::Mislabel,
        "online" => Scenario::Online,
        "active" => Scenario::Active,
        other => {
            return Err(CliError::usage(format!(
                "unknown scenario {other:?} (expected mislabel, online, or active)"
            )))
        }
    };
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", args.config.display())))?;
    let overrides = ScenarioOverrides {
        seed: args.seed,
        method: args.method,
        k: args.k,
        t: args.t,
        metric: args.metric,
        policy: args.policy,
        q: args.q,
        strictness: match (args.strict, args.inclusive) {
            (true, _) => Some(Strictness::Strict),
            (_, true) => Some(Strictness::Inclusive),
            _ => None,
        },
    };
    let resolved = load_scenario_config(&text, scenario, &overrides)?;
    execute(&resolved, &args.out_dir)?;
    Ok(())
}

struct ScenarioData {
    train: Dataset,
    val: Dataset,
    test: Option<Dataset>,
    mask: Option<FlipMask>,
}

fn build_data(
    cfg: &ResolvedScenario,
    default_split: (f64, f64, f64),
    need_test: bool,
) -> Result<ScenarioData, CliError> {
    let (mut train, mut val, mut test) = match &cfg.dataset {
        DatasetSpec::Synthetic {
            n,
            dim,
            classes,
            separation,
            noise_std,
        } => {
            let base = synth_blobs(*n, *dim, *classes, *separation, *noise_std, cfg.seed)?;
            let fractions = cfg
                .split
                .map(|s| (s.train, s.val, s.test))
                .unwrap_or(default_split);
            let (train, val, test) = split(&base, fractions, cfg.seed)?;
            let train =
                train.ok_or_else(|| CliError::usage("split leaves no training data"))?;
            let val = val.ok_or_else(|| CliError::usage("split leaves no validation data"))?;
            (train, val, test)
        }
        DatasetSpec::Csv {
            train,
            val,
            test,
            label,
            has_header,
        } => {
            let mut paths = vec![Path::new(train.as_str()), Path::new(val.as_str())];
            if let Some(test) = test {
                paths.push(Path::new(test.as_str()));
            }
            let mut sets = load_csv_group(&paths, label, *has_header)?;
            let test_ds = if test.is_some() { sets.pop() } else { None };
            let val_ds = sets.pop().expect("val present");
            let train_ds = sets.pop().expect("train present");
            (train_ds, val_ds, test_ds)
        }
    };
    if need_test && test.is_none() {
        return Err(CliError::usage(
            "this scenario needs a test set: give a nonzero test split fraction or a test file",
        ));
    }
    let mask = match cfg.flip_ratio {
        Some(ratio) => {
            let (flipped, mask) = flip_labels(&train, ratio, cfg.seed)?;
            train = flipped;
            Some(mask)
        }
        None => None,
    };
    if cfg.normalize {
        let (mean, std) = train.zscore_stats();
        train = train.apply_zscore(&mean, &std)?;
        val = val.apply_zscore(&mean, &std)?;
        test = test.map(|t| t.apply_zscore(&mean, &std)).transpose()?;
    }
    Ok(ScenarioData {
        train,
        val,
        test,
        mask,
    })
}

pub fn execute(cfg: &ResolvedScenario, out_dir: &Path) -> Result<Vec<u8>, CliError> {
    match cfg.scenario.as_str() {
        "mislabel" => run_mislabel(cfg, out_dir),
        "online" => run_online(cfg, out_dir),
        "active" => run_active(cfg, out_dir),
        other => Err(CliError::usage(format!("unknown scenario {other:?}"))),
    }
}

#[derive(Debug, Serialize)]
struct MislabelResult {
    flip_count: usize,
    clean_flagged: usize,
    flipped_flagged: usize,
    flipped_missed: usize,
    precision: Option<f64>,
    recall: Option<f64>,
    accuracy_full: f64,
    accuracy_after_removal: f64,
    removed: usize,
}

#[derive(Debug, Serialize)]
struct MislabelPayload {
    result: MislabelResult,
}

fn run_mislabel(cfg: &ResolvedScenario, out_dir: &Path) -> Result<Vec<u8>, CliError> {
    let data = build_data(cfg, (0.9, 0.1, 0.0), false)?;
    let mask = data
        .mask
        .as_ref()
        .expect("mislabel scenario always sets flip_ratio");
    let params = cfg.params()?;
    let values =
        aggregate_over_validation(&data.train, &data.val, cfg.method()?, &params)?;
    values.assert_finite()?;
    let analysis = mislabel_analysis(&values.values, mask)?;
    let policy = cfg.policy.to_policy()?;
    let outcome = apply_removal(&data.train, &values.values, policy)?;
    let accuracy_full = accuracy(&data.train, &data.val, cfg.k, params.metric, None)?;
    let accuracy_after =
        accuracy(&outcome.dataset, &data.val, cfg.k, params.metric, None)?;

    println!(
        "flips {} | flagged clean {} / flipped {} / missed {} | precision {:?} recall {:?}",
        mask.flip_count(),
        analysis.clean_flagged.len(),
        analysis.flipped_flagged.len(),
        analysis.flipped_missed.len(),
        analysis.precision,
        analysis.recall
    );
    println!("accuracy {accuracy_full:.4} -> {accuracy_after:.4} after removing {}", outcome.removed.len());

    ensure_out_dir(out_dir)?;
    let mut csv = Vec::new();
    writeln!(csv, "train_id,value,flipped,original_label,set")
        .map_err(|e| CliError::data(e.to_string()))?;
    for (id, &v) in values.values.iter().enumerate() {
        let flipped = mask.is_flipped(id);
        let set = match (v <= 0.0, flipped) {
            (true, false) => "clean_flagged",
            (true, true) => "flipped_flagged",
            (false, true) => "flipped_missed",
            (false, false) => "clean_ok",
        };
        let original = mask
            .original_label(id)
            .map(|l| l.to_string())
            .unwrap_or_default();
        writeln!(csv, "{},{},{},{},{}", id, fmt_f64(v), flipped, original, set)
            .map_err(|e| CliError::data(e.to_string()))?;
    }
    write_bytes(&out_path(out_dir, "mislabel_samples.csv"), &csv)?;

    let report = Report::new(
        "scenario",
        cfg.clone(),
        MislabelPayload {
            result: MislabelResult {
                flip_count: mask.flip_count(),
                clean_flagged: analysis.clean_flagged.len(),
                flipped_flagged: analysis.flipped_flagged.len(),
                flipped_missed: analysis.flipped_missed.len(),
                precision: analysis.precision,
                recall: analysis.recall,
                accuracy_full,
                accuracy_after_removal: accuracy_after,
                removed: outcome.removed.len(),
            },
        },
    );
    let bytes = report.to_json_bytes()?;
    write_bytes(&out_path(out_dir, "mislabel.json"), &bytes)?;
    Ok(bytes)
}

#[derive(Debug, Serialize)]
struct OnlineResult {
    batches: Vec<BatchRecord>,
    baseline: Vec<f64>,
    final_accuracy: f64,
}

#[derive(Debug, Serialize)]
struct OnlinePayload {
    result: OnlineResult,
}

fn run_online(cfg: &ResolvedScenario, out_dir: &Path) -> Result<Vec<u8>, CliError> {
    let data = build_data(cfg, (0.9, 0.1, 0.0), false)?;
    let batches = cfg.batches.unwrap_or(10);
    let shards = shard_dataset(&data.train, batches)?;
    let params = cfg.params()?;
    let report = online_run(
        &shards,
        &data.val,
        cfg.method()?,
        &params,
        cfg.policy.to_policy()?,
    )?;
    let baseline = online_baseline(&shards, &data.val, cfg.k, params.metric)?;

    for (rec, base) in report.batches.iter().zip(&baseline) {
        println!(
            "batch {:2}: arrivals {:4} candidates {:4} removed {:4} survivors {:4} | accuracy {:.4} (baseline {:.4})",
            rec.batch, rec.arrivals, rec.candidates, rec.removed, rec.survivors, rec.accuracy, base
        );
    }

    ensure_out_dir(out_dir)?;
    let mut series = Vec::new();
    writeln!(series, "batch,arrivals,candidates,removed,survivors,accuracy,baseline_accuracy")
        .map_err(|e| CliError::data(e.to_string()))?;
    for (rec, base) in report.batches.iter().zip(&baseline) {
        writeln!(
            series,
            "{},{},{},{},{},{},{}",
            rec.batch,
            rec.arrivals,
            rec.candidates,
            rec.removed,
            rec.survivors,
            fmt_f64(rec.accuracy),
            fmt_f64(*base)
        )
        .map_err(|e| CliError::data(e.to_string()))?;
    }
    write_bytes(&out_path(out_dir, "online.csv"), &series)?;

    let mut lifecycle = Vec::new();
    writeln!(lifecycle, "train_id,admitted_batch,removed_batch")
        .map_err(|e| CliError::data(e.to_string()))?;
    for (id, lc) in report.lifecycle.iter().enumerate() {
        let removed = lc.removed.map(|b| b.to_string()).unwrap_or_default();
        writeln!(lifecycle, "{},{},{}", id, lc.admitted, removed)
            .map_err(|e| CliError::data(e.to_string()))?;
    }
    write_bytes(&out_path(out_dir, "online_lifecycle.csv"), &lifecycle)?;

    let mut traj = Vec::new();
    writeln!(traj, "batch,train_id,value").map_err(|e| CliError::data(e.to_string()))?;
    for (id, entries) in report.trajectories.iter().enumerate() {
        for (batch, value) in entries {
            writeln!(traj, "{},{},{}", batch, id, fmt_f64(*value))
                .map_err(|e| CliError::data(e.to_string()))?;
        }
    }
    write_bytes(&out_path(out_dir, "online_values.csv"), &traj)?;

    let final_accuracy = report.final_accuracy();
    let report = Report::new(
        "scenario",
        cfg.clone(),
        OnlinePayload {
            result: OnlineResult {
                batches: report.batches,
                baseline,
                final_accuracy,
            },
        },
    );
    let bytes = report.to_json_bytes()?;
    write_bytes(&out_path(out_dir, "online.json"), &bytes)?;
    Ok(bytes)
}

#[derive(Debug, Serialize)]
struct ActiveResult {
    strategy: String,
    rounds: Vec<RoundRecord>,
    final_accuracy: f64,
}

#[derive(Debug, Serialize)]
struct ActivePayload {
    result: ActiveResult,
}

fn run_active(cfg: &ResolvedScenario, out_dir: &Path) -> Result<Vec<u8>, CliError> {
    let data = build_data(cfg, (0.7, 0.1, 0.2), true)?;
    let test = data.test.as_ref().expect("checked by build_data");
    let initial_count = cfg.initial_labeled.expect("validated");
    if initial_count >= data.train.len() {
        return Err(CliError::usage(format!(
            "initial_labeled = {initial_count} must be below the pool size {}",
            data.train.len()
        )));
    }
    let initial = sample_indices(cfg.seed, stream::ACTIVE, data.train.len(), initial_count);

    let strategy = cfg.strategy()?;
    let active_config = ActiveConfig {
        rounds: cfg.rounds.expect("validated"),
        batch_size: cfg.batch_size.expect("validated"),
        method: cfg.method()?,
        params: cfg.params()?,
        regressor: cfg
            .regressor
            .clone()
            .unwrap_or_default()
            .to_config(cfg.seed),
        seed: cfg.seed,
    };
    let report = active_learning_run(&data.train, &initial, &data.val, test, strategy, &active_config)?;

    for round in &report.rounds {
        println!(
            "round {:2}: labeled {:4} (+{:3}) | test accuracy {:.4}",
            round.round,
            round.labeled,
            round.acquired.len(),
            round.test_accuracy
        );
    }

    ensure_out_dir(out_dir)?;
    let mut series = Vec::new();
    writeln!(series, "round,labeled,acquired,test_accuracy")
        .map_err(|e| CliError::data(e.to_string()))?;
    for round in &report.rounds {
        writeln!(
            series,
            "{},{},{},{}",
            round.round,
            round.labeled,
            round.acquired.len(),
            fmt_f64(round.test_accuracy)
        )
        .map_err(|e| CliError::data(e.to_string()))?;
    }
    write_bytes(&out_path(out_dir, "active.csv"), &series)?;

    let final_accuracy = report.final_accuracy();
    let report = Report::new(
        "scenario",
        cfg.clone(),
        ActivePayload {
            result: ActiveResult {
                strategy: strategy.name().to_string(),
                rounds: report.rounds,
                final_accuracy,
            },
        },
    );
    let bytes = report.to_json_bytes()?;
    write_bytes(&out_path(out_dir, "active.json"), &bytes)?;
    Ok(bytes)
}
