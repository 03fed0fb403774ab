//! Scenario configuration: JSON schema, exhaustive validation, and the
//! resolved form embedded into reports.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use shapcal_core::knn::Metric;
use shapcal_core::pipelines::regressor::RegressorConfig;
use shapcal_core::pipelines::{RemovalPolicy, Strictness};
use shapcal_core::valuation::{Method, ValuationParams, DEFAULT_K};
use shapcal_core::Strategy;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Mislabel,
    Online,
    Active,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Mislabel => "mislabel",
            Scenario::Online => "online",
            Scenario::Active => "active",
        }
    }
}

/// Where the scenario's data comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic {
        n: usize,
        dim: usize,
        classes: usize,
        separation: f64,
        noise_std: f64,
    },
    Csv {
        train: String,
        val: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        test: Option<String>,
        label: String,
        #[serde(default = "default_true")]
        has_header: bool,
    },
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    #[serde(default)]
    pub test: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strictness: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

impl Default for PolicySpec {
    fn default() -> Self {
        PolicySpec {
            kind: "negative".to_string(),
            strictness: Some("strict".to_string()),
            q: None,
        }
    }
}

impl PolicySpec {
    pub fn to_policy(&self) -> Result<RemovalPolicy, CliError> {
        let strictness = match self.strictness.as_deref() {
            None | Some("strict") => Strictness::Strict,
            Some("inclusive") => Strictness::Inclusive,
            Some(other) => {
                return Err(CliError::usage(format!("unknown strictness {other:?}")))
            }
        };
        match self.kind.as_str() {
            "negative" => Ok(RemovalPolicy::NegativeValues { strictness }),
            "bottom" => {
                let q = self.q.ok_or_else(|| {
                    CliError::usage("bottom-fraction policy requires q".to_string())
                })?;
                Ok(RemovalPolicy::BottomFraction { q })
            }
            other => Err(CliError::usage(format!("unknown policy kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressorSpec {
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
}

fn default_hidden() -> usize {
    64
}
fn default_lr() -> f64 {
    1e-2
}
fn default_epochs() -> usize {
    500
}

impl Default for RegressorSpec {
    fn default() -> Self {
        RegressorSpec {
            hidden: default_hidden(),
            learning_rate: default_lr(),
            epochs: default_epochs(),
        }
    }
}

impl RegressorSpec {
    pub fn to_config(&self, seed: u64) -> RegressorConfig {
        RegressorConfig {
            hidden: self.hidden,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            seed,
        }
    }
}

/// The raw file as written by the user; optional fields resolve to defaults.
#[derive(Debug, Clone, Deserialize)]
pub struct ScenarioFile {
    pub seed: u64,
    pub dataset: DatasetSpec,
    pub split: Option<SplitSpec>,
    pub method: Option<String>,
    pub k: Option<usize>,
    pub t: Option<usize>,
    pub metric: Option<String>,
    pub policy: Option<PolicySpec>,
    pub normalize: Option<bool>,
    pub flip_ratio: Option<f64>,
    pub batches: Option<usize>,
    pub initial_labeled: Option<usize>,
    pub rounds: Option<usize>,
    pub batch_size: Option<usize>,
    pub strategy: Option<String>,
    pub regressor: Option<RegressorSpec>,
}

/// Fully resolved configuration embedded verbatim into scenario reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedScenario {
    pub scenario: String,
    pub seed: u64,
    pub dataset: DatasetSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
    pub method: String,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    pub metric: String,
    pub policy: PolicySpec,
    pub normalize: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batches: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_labeled: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regressor: Option<RegressorSpec>,
}

impl ResolvedScenario {
    pub fn method(&self) -> Result<Method, CliError> {
        Method::from_str(&self.method).map_err(CliError::from)
    }

    pub fn metric(&self) -> Result<Metric, CliError> {
        Metric::from_str(&self.metric).map_err(CliError::from)
    }

    pub fn params(&self) -> Result<ValuationParams, CliError> {
        let mut params = ValuationParams::new(self.k).with_metric(self.metric()?);
        params.t = self.t;
        Ok(params)
    }

    pub fn strategy(&self) -> Result<Strategy, CliError> {
        let name = self.strategy.as_deref().unwrap_or("shapley_pred");
        Strategy::from_str(name).map_err(CliError::from)
    }
}

/// Optional command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct ScenarioOverrides {
    pub seed: Option<u64>,
    pub method: Option<String>,
    pub k: Option<usize>,
    pub t: Option<usize>,
    pub metric: Option<String>,
    pub policy: Option<String>,
    pub q: Option<f64>,
    pub strictness: Option<Strictness>,
}

// ---------------------------------------------------------------------------
// Exhaustive validation
// ---------------------------------------------------------------------------

struct Checker<'a> {
    errors: Vec<String>,
    obj: &'a serde_json::Map<String, Value>,
    context: &'static str,
}

impl<'a> Checker<'a> {
    fn new(obj: &'a serde_json::Map<String, Value>, context: &'static str) -> Self {
        Checker {
            errors: Vec::new(),
            obj,
            context,
        }
    }

    fn err(&mut self, message: String) {
        let ctx = if self.context.is_empty() {
            String::new()
        } else {
            format!("{}.", self.context)
        };
        self.errors.push(format!("{ctx}{message}"));
    }

    fn known_keys(&mut self, allowed: &[&str]) {
        for key in self.obj.keys() {
            if !allowed.contains(&key.as_str()) {
                self.err(format!("{key}: unknown field"));
            }
        }
    }

    fn require(&mut self, key: &str) -> Option<&'a Value> {
        match self.obj.get(key) {
            Some(v) => Some(v),
            None => {
                self.err(format!("{key}: required field is missing"));
                None
            }
        }
    }

    fn uint(&mut self, key: &str, min: u64) {
        if let Some(v) = self.obj.get(key) {
            match v.as_u64() {
                Some(u) if u >= min => {}
                Some(u) => self.err(format!("{key}: must be at least {min}, got {u}")),
                None => self.err(format!("{key}: must be a nonnegative integer")),
            }
        }
    }

    fn number_in(&mut self, key: &str, lo: f64, hi: f64, lo_strict: bool) {
        if let Some(v) = self.obj.get(key) {
            match v.as_f64() {
                Some(x) => {
                    let above = if lo_strict { x > lo } else { x >= lo };
                    if !(above && x <= hi) {
                        self.err(format!(
                            "{key}: must lie in {}{lo}, {hi}], got {x}",
                            if lo_strict { "(" } else { "[" }
                        ));
                    }
                }
                None => self.err(format!("{key}: must be a number")),
            }
        }
    }

    fn string_in(&mut self, key: &str, allowed: &[&str]) {
        if let Some(v) = self.obj.get(key) {
            match v.as_str() {
                Some(s) if allowed.contains(&s) => {}
                Some(s) => self.err(format!("{key}: must be one of {allowed:?}, got {s:?}")),
                None => self.err(format!("{key}: must be a string")),
            }
        }
    }

    fn string(&mut self, key: &str) {
        if let Some(v) = self.obj.get(key) {
            if !v.is_string() {
                self.err(format!("{key}: must be a string"));
            }
        }
    }

    fn boolean(&mut self, key: &str) {
        if let Some(v) = self.obj.get(key) {
            if !v.is_boolean() {
                self.err(format!("{key}: must be a boolean"));
            }
        }
    }
}

const COMMON_KEYS: [&str; 9] = [
    "seed", "dataset", "split", "method", "k", "t", "metric", "policy", "normalize",
];

fn scenario_keys(scenario: Scenario) -> Vec<&'static str> {
    let mut keys: Vec<&'static str> = COMMON_KEYS.to_vec();
    match scenario {
        Scenario::Mislabel => keys.push("flip_ratio"),
        Scenario::Online => {
            keys.push("flip_ratio");
            keys.push("batches");
        }
        Scenario::Active => {
            keys.extend(["initial_labeled", "rounds", "batch_size", "strategy", "regressor"]);
        }
    }
    keys
}

/// Validates the raw JSON against the scenario schema, reporting every
/// violation rather than stopping at the first.
pub fn validate_scenario_json(value: &Value, scenario: Scenario) -> Vec<String> {
    let Some(obj) = value.as_object() else {
        return vec!["config root must be a JSON object".to_string()];
    };
    let mut top = Checker::new(obj, "");
    top.known_keys(&scenario_keys(scenario));
    if top.require("seed").is_some() {
        top.uint("seed", 0);
    }
    top.uint("k", 1);
    top.uint("t", 0);
    top.string_in("method", &["exact", "knn", "cknn", "knn_shapley", "cknn_shapley"]);
    top.string_in("metric", &["euclidean", "cosine"]);
    top.boolean("normalize");

    match scenario {
        Scenario::Mislabel => {
            if top.require("flip_ratio").is_some() {
                top.number_in("flip_ratio", 0.0, 1.0, false);
            }
        }
        Scenario::Online => {
            top.number_in("flip_ratio", 0.0, 1.0, false);
            top.uint("batches", 1);
        }
        Scenario::Active => {
            if top.require("initial_labeled").is_some() {
                top.uint("initial_labeled", 1);
            }
            if top.require("rounds").is_some() {
                top.uint("rounds", 1);
            }
            if top.require("batch_size").is_some() {
                top.uint("batch_size", 1);
            }
            top.string_in(
                "strategy",
                &["shapley_pred", "random", "entropy", "margin", "uncertainty"],
            );
        }
    }

    let mut errors = top.errors;

    match obj.get("dataset") {
        None => errors.push("dataset: required field is missing".to_string()),
        Some(Value::Object(ds)) => {
            let mut c = Checker::new(ds, "dataset");
            match ds.get("kind").and_then(|k| k.as_str()) {
                Some("synthetic") => {
                    c.known_keys(&["kind", "n", "dim", "classes", "separation", "noise_std"]);
                    for key in ["n", "dim", "classes", "separation", "noise_std"] {
                        c.require(key);
                    }
                    c.uint("n", 2);
                    c.uint("dim", 1);
                    c.uint("classes", 2);
                    c.number_in("separation", 0.0, f64::INFINITY, true);
                    c.number_in("noise_std", 0.0, f64::INFINITY, false);
                }
                Some("csv") => {
                    c.known_keys(&["kind", "train", "val", "test", "label", "has_header"]);
                    for key in ["train", "val", "label"] {
                        if c.require(key).is_some() {
                            c.string(key);
                        }
                    }
                    c.string("test");
                    c.boolean("has_header");
                }
                Some(other) => c.err(format!("kind: must be \"synthetic\" or \"csv\", got {other:?}")),
                None => c.err("kind: required field is missing".to_string()),
            }
            errors.extend(c.errors);
        }
        Some(_) => errors.push("dataset: must be an object".to_string()),
    }

    if let Some(split) = obj.get("split") {
        match split.as_object() {
            Some(sp) => {
                let mut c = Checker::new(sp, "split");
                c.known_keys(&["train", "val", "test"]);
                for key in ["train", "val"] {
                    if c.require(key).is_some() {
                        c.number_in(key, 0.0, 1.0, false);
                    }
                }
                c.number_in("test", 0.0, 1.0, false);
                let total: f64 = ["train", "val", "test"]
                    .iter()
                    .filter_map(|k| sp.get(*k).and_then(|v| v.as_f64()))
                    .sum();
                if sp.get("train").and_then(|v| v.as_f64()).is_some()
                    && sp.get("val").and_then(|v| v.as_f64()).is_some()
                    && (total - 1.0).abs() > 1e-9
                {
                    c.err(format!("fractions must sum to 1, got {total}"));
                }
                errors.extend(c.errors);
            }
            None => errors.push("split: must be an object".to_string()),
        }
        if matches!(obj.get("dataset"), Some(Value::Object(ds)) if ds.get("kind").and_then(|k| k.as_str()) == Some("csv"))
        {
            errors.push("split: applies only to synthetic datasets".to_string());
        }
    }

    if let Some(policy) = obj.get("policy") {
        match policy.as_object() {
            Some(p) => {
                let mut c = Checker::new(p, "policy");
                c.known_keys(&["kind", "strictness", "q"]);
                c.string_in("kind", &["negative", "bottom"]);
                c.string_in("strictness", &["strict", "inclusive"]);
                match p.get("kind").and_then(|k| k.as_str()) {
                    Some("bottom") => {
                        if c.require("q").is_some() {
                            c.number_in("q", 0.0, 1.0, true);
                            if p.get("q").and_then(|v| v.as_f64()) == Some(1.0) {
                                c.err("q: must be strictly below 1".to_string());
                            }
                        }
                    }
                    Some("negative") => {
                        if p.contains_key("q") {
                            c.err("q: only valid for the bottom policy".to_string());
                        }
                    }
                    _ => {
                        if c.require("kind").is_some() {}
                    }
                }
                errors.extend(c.errors);
            }
            None => errors.push("policy: must be an object".to_string()),
        }
    }

    if let Some(reg) = obj.get("regressor") {
        match reg.as_object() {
            Some(r) => {
                let mut c = Checker::new(r, "regressor");
                c.known_keys(&["hidden", "learning_rate", "epochs"]);
                c.uint("hidden", 1);
                c.uint("epochs", 0);
                c.number_in("learning_rate", 0.0, f64::INFINITY, true);
                errors.extend(c.errors);
            }
            None => errors.push("regressor: must be an object".to_string()),
        }
    }

    errors
}

/// Parses, validates, resolves defaults, and applies overrides.
pub fn load_scenario_config(
    text: &str,
    scenario: Scenario,
    overrides: &ScenarioOverrides,
) -> Result<ResolvedScenario, CliError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| CliError::data(format!("config is not valid JSON: {e}")))?;
    let violations = validate_scenario_json(&value, scenario);
    if !violations.is_empty() {
        return Err(CliError::data(format!(
            "config schema violations:\n  - {}",
            violations.join("\n  - ")
        )));
    }
    let file: ScenarioFile = serde_json::from_value(value)
        .map_err(|e| CliError::data(format!("config deserialization failed: {e}")))?;

    let mut policy = file.policy.unwrap_or_default();
    if let Some(kind) = &overrides.policy {
        policy = PolicySpec {
            kind: kind.clone(),
            strictness: policy.strictness,
            q: policy.q,
        };
    }
    if let Some(q) = overrides.q {
        if !(q > 0.0 && q < 1.0) {
            return Err(CliError::usage(format!("--q must lie in (0, 1), got {q}")));
        }
        policy.q = Some(q);
    }
    if let Some(s) = overrides.strictness {
        policy.strictness = Some(
            match s {
                Strictness::Strict => "strict",
                Strictness::Inclusive => "inclusive",
            }
            .to_string(),
        );
    }

    let resolved = ResolvedScenario {
        scenario: scenario.name().to_string(),
        seed: overrides.seed.unwrap_or(file.seed),
        dataset: file.dataset,
        split: file.split,
        method: overrides
            .method
            .clone()
            .or(file.method)
            .unwrap_or_else(|| "cknn".to_string()),
        k: overrides.k.or(file.k).unwrap_or(DEFAULT_K),
        t: overrides.t.or(file.t),
        metric: overrides
            .metric
            .clone()
            .or(file.metric)
            .unwrap_or_else(|| "euclidean".to_string()),
        policy,
        normalize: file.normalize.unwrap_or(false),
        flip_ratio: file.flip_ratio,
        batches: file.batches,
        initial_labeled: file.initial_labeled,
        rounds: file.rounds,
        batch_size: file.batch_size,
        strategy: file.strategy,
        regressor: file.regressor,
    };
    // Reject override values the schema would have caught in the file.
    resolved.method()?;
    resolved.metric()?;
    resolved.policy.to_policy()?;
    if resolved.k == 0 {
        return Err(CliError::usage("--k must be positive".to_string()));
    }
    Ok(resolved)
}
