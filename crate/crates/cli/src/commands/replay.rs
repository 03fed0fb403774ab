//! `shapcal replay`: re-executes a run from the configuration embedded in
//! its report and verifies the regenerated report is byte-identical.

use serde_json::Value;

use crate::commands::{inflation, scenario, value};
use crate::config::ResolvedScenario;
use crate::{CliError, ReplayArgs};

pub fn run(args: ReplayArgs) -> Result<(), CliError> {
    let original = std::fs::read(&args.report)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", args.report.display())))?;
    let doc: Value = serde_json::from_slice(&original)
        .map_err(|e| CliError::data(format!("report is not valid JSON: {e}")))?;
    let command = doc
        .get("command")
        .and_then(|c| c.as_str())
        .ok_or_else(|| CliError::data("report has no command field"))?;
    let config = doc
        .get("config")
        .cloned()
        .ok_or_else(|| CliError::data("report has no config field"))?;

    let regenerated = match command {
        "value" => {
            let config: value::ValueConfig = serde_json::from_value(config)
                .map_err(|e| CliError::data(format!("bad value config: {e}")))?;
            value::execute(&config, &args.out_dir)?
        }
        "inflation" => {
            let config: inflation::InflationConfig = serde_json::from_value(config)
                .map_err(|e| CliError::data(format!("bad inflation config: {e}")))?;
            inflation::execute(&config, &args.out_dir)?
        }
        "scenario" => {
            let config: ResolvedScenario = serde_json::from_value(config)
                .map_err(|e| CliError::data(format!("bad scenario config: {e}")))?;
            scenario::execute(&config, &args.out_dir)?
        }
        other => {
            return Err(CliError::data(format!(
                "cannot replay reports from command {other:?}"
            )))
        }
    };

    if regenerated == original {
        println!("replay reproduced {} byte for byte", args.report.display());
        Ok(())
    } else {
        Err(CliError::numeric(format!(
            "replay of {} produced a different report",
            args.report.display()
        )))
    }
}
