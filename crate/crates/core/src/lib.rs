//! Data valuation for K-nearest-neighbor learning.
//!
//! The crate computes per-sample Shapley values with a KNN surrogate: an
//! exact exponential enumerator for desk-scale ground truth, the `O(N log N)`
//! KNN-Shapley recursion, and a calibrated variant that zeroes the farthest
//! samples so that zero becomes a meaningful threshold between detrimental
//! and beneficial samples. On top of the valuations sit inflation
//! diagnostics (bin removal curves, threshold and misidentification ratio)
//! and the application pipelines: detrimental-sample removal, mislabel
//! detection, online stream valuation, and active learning.

pub mod dataset;
pub mod error;
pub mod inflation;
pub mod knn;
pub mod pipelines;
pub mod report;
pub mod rng;
pub mod valuation;

pub use dataset::{flip_labels, load_csv, load_csv_group, split, synth_blobs, Dataset, FlipMask, Sample};
pub use error::{Error, Result};
pub use inflation::{
    bin_removal_curve, inflation_metrics, segment_bins, BinSegmentation, InflationReport,
    InflationStatus, RemovalCurve,
};
pub use knn::{
    accuracy, knn_predict, rank_neighbors, weighted_knn_predict, ClassScores, Metric,
    NeighborRanking, WeightScheme,
};
pub use pipelines::active::{active_learning_run, ActiveConfig, ActiveRunReport, Strategy};
pub use pipelines::online::{online_baseline, online_run, shard_dataset, OnlineRunReport};
pub use pipelines::regressor::{
    predict_values, train_value_regressor, RegressorConfig, ValueRegressor,
};
pub use pipelines::{apply_removal, mislabel_analysis, MislabelAnalysis, RemovalPolicy, Strictness};
pub use valuation::{
    aggregate_over_validation, cknn_shapley, exact_shapley, knn_shapley, utility_knn, Aggregation,
    Method, UtilityRule, ValuationParams, ValuationVector, DEFAULT_K, EXACT_SHAPLEY_CAP,
};
