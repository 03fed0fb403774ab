//! Active learning: each round values the labeled pool, scores the unlabeled
//! pool with an acquisition strategy, annotates the top-scoring batch, and
//! tracks test accuracy of the growing labeled set.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::knn::{accuracy, knn_predict};
use crate::pipelines::regressor::{train_value_regressor, RegressorConfig};
use crate::rng::{seeded, stream};
use crate::valuation::{aggregate_over_validation, Method, ValuationParams};

/// Acquisition strategy scoring the unlabeled pool; higher scores are
/// annotated first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Regressor fit on (labeled features -> values); score is the predicted
    /// value of the unlabeled sample.
    ShapleyPred,
    /// Seeded uniform score per unlabeled id per round.
    Random,
    /// Shannon entropy of the KNN vote fractions.
    Entropy,
    /// Negative gap between the top two vote fractions.
    Margin,
    /// Fraction of the K nearest labeled neighbors disagreeing with the
    /// plurality neighbor label.
    Uncertainty,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::ShapleyPred => "shapley_pred",
            Strategy::Random => "random",
            Strategy::Entropy => "entropy",
            Strategy::Margin => "margin",
            Strategy::Uncertainty => "uncertainty",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shapley_pred" => Ok(Strategy::ShapleyPred),
            "random" => Ok(Strategy::Random),
            "entropy" => Ok(Strategy::Entropy),
            "margin" => Ok(Strategy::Margin),
            "uncertainty" => Ok(Strategy::Uncertainty),
            other => Err(Error::invalid(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Run-level configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveConfig {
    pub rounds: usize,
    pub batch_size: usize,
    pub method: Method,
    pub params: ValuationParams,
    pub regressor: RegressorConfig,
    pub seed: u64,
}

/// One acquisition round. Round 0 is the initial labeled pool before any
/// acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub labeled: usize,
    /// Pool ids annotated this round, in acquisition order.
    pub acquired: Vec<usize>,
    pub test_accuracy: f64,
    /// Final training loss of the value regressor, for the strategy that
    /// fits one.
    pub regressor_final_loss: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActiveRunReport {
    pub strategy: Strategy,
    pub rounds: Vec<RoundRecord>,
}

impl ActiveRunReport {
    pub fn final_accuracy(&self) -> f64 {
        self.rounds.last().map(|r| r.test_accuracy).unwrap_or(0.0)
    }
}

/// Selects the `batch_size` highest-scoring ids, breaking score ties toward
/// the smaller id.
fn top_by_score(scored: &mut [(usize, f64)], batch_size: usize) -> Vec<usize> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.iter().take(batch_size).map(|&(id, _)| id).collect()
}

/// Runs the acquisition loop. `pool` holds ground-truth labels that act as
/// the simulated annotator: a sample's label is only consulted once the
/// sample has been acquired into the labeled set.
pub fn active_learning_run(
    pool: &Dataset,
    initial_labeled: &[usize],
    val: &Dataset,
    test: &Dataset,
    strategy: Strategy,
    config: &ActiveConfig,
) -> Result<ActiveRunReport> {
    if initial_labeled.is_empty() {
        return Err(Error::invalid("initial labeled set is empty"));
    }
    let mut labeled: Vec<usize> = initial_labeled.to_vec();
    labeled.sort_unstable();
    labeled.dedup();
    if labeled.len() != initial_labeled.len() {
        return Err(Error::invalid("initial labeled ids contain duplicates"));
    }
    if labeled.iter().any(|&id| id >= pool.len()) {
        return Err(Error::invalid("initial labeled id out of range"));
    }
    let mut is_labeled = vec![false; pool.len()];
    for &id in &labeled {
        is_labeled[id] = true;
    }
    let unlabeled_count = pool.len() - labeled.len();
    if config.rounds * config.batch_size > unlabeled_count {
        return Err(Error::invalid(format!(
            "{} rounds of {} exceed the {} unlabeled samples",
            config.rounds, config.batch_size, unlabeled_count
        )));
    }

    let mut rounds = Vec::with_capacity(config.rounds + 1);
    let labeled_ds = pool.subset(&labeled)?;
    rounds.push(RoundRecord {
        round: 0,
        labeled: labeled.len(),
        acquired: Vec::new(),
        test_accuracy: accuracy(&labeled_ds, test, config.params.k, config.params.metric, None)?,
        regressor_final_loss: None,
    });

    for round in 1..=config.rounds {
        let labeled_ds = pool.subset(&labeled)?;
        let unlabeled: Vec<usize> = (0..pool.len()).filter(|&id| !is_labeled[id]).collect();

        let mut regressor_final_loss = None;
        let mut scored: Vec<(usize, f64)> = match strategy {
            Strategy::ShapleyPred => {
                let values = aggregate_over_validation(
                    &labeled_ds,
                    val,
                    config.method,
                    &config.params,
                )?;
                values.assert_finite()?;
                let rows: Vec<Vec<f64>> = labeled_ds
                    .samples()
                    .iter()
                    .map(|s| s.features.clone())
                    .collect();
                let reg_config = RegressorConfig {
                    seed: config
                        .regressor
                        .seed
                        .wrapping_add(config.seed)
                        .wrapping_add(round as u64),
                    ..config.regressor
                };
                let reg = train_value_regressor(&rows, &values.values, &reg_config)?;
                regressor_final_loss = reg.loss_curve.last().copied();
                unlabeled
                    .iter()
                    .map(|&id| reg.predict(pool.features(id)).map(|score| (id, score)))
                    .collect::<Result<Vec<_>>>()?
            }
            Strategy::Random => {
                let mut rng = seeded(config.seed.wrapping_add(round as u64), stream::ACTIVE);
                unlabeled.iter().map(|&id| (id, rng.gen::<f64>())).collect()
            }
            Strategy::Entropy => unlabeled
                .iter()
                .map(|&id| {
                    knn_predict(&labeled_ds, config.params.k, pool.features(id), config.params.metric)
                        .map(|(_, scores)| (id, scores.entropy()))
                })
                .collect::<Result<Vec<_>>>()?,
            Strategy::Margin => unlabeled
                .iter()
                .map(|&id| {
                    knn_predict(&labeled_ds, config.params.k, pool.features(id), config.params.metric)
                        .map(|(_, scores)| (id, -scores.margin()))
                })
                .collect::<Result<Vec<_>>>()?,
            Strategy::Uncertainty => unlabeled
                .iter()
                .map(|&id| {
                    knn_predict(&labeled_ds, config.params.k, pool.features(id), config.params.metric)
                        .map(|(_, scores)| (id, 1.0 - scores.top_score()))
                })
                .collect::<Result<Vec<_>>>()?,
        };

        let acquired = top_by_score(&mut scored, config.batch_size);
        for &id in &acquired {
            is_labeled[id] = true;
            labeled.push(id);
        }
        labeled.sort_unstable();
        let labeled_ds = pool.subset(&labeled)?;
        rounds.push(RoundRecord {
            round,
            labeled: labeled.len(),
            acquired,
            test_accuracy: accuracy(&labeled_ds, test, config.params.k, config.params.metric, None)?,
            regressor_final_loss,
        });
    }

    Ok(ActiveRunReport { strategy, rounds })
}
