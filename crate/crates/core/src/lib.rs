//! Panel-data stock price forecasting: ICA-driven variable selection,
//! stepwise OLS with a full diagnostic battery, a Specht general regression
//! neural network, a Levenberg–Marquardt trained 7-14-1 perceptron and an
//! MSE/MAPE/R² comparison harness.
//!
//! Every routine is a pure function of its inputs (and an explicit seed where
//! randomness is involved), so results are reproducible bit-for-bit.

// `!(x > 0.0)` style guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod grnn;
pub mod ica;
pub mod linreg;
pub mod metrics;
pub mod mlp;
mod serde_nan;

pub use data::{
    chronological_split, lag_align, load_panel, standardize, synth_generate, synth_linear_truth,
    Observation, Panel, ScalerParams, SupervisedRow, SupervisedSet, SynthConfig, SynthTruth,
    VariableCatalog, PAPER_SEVEN,
};
pub use error::{Error, Result};
pub use grnn::{grnn_build, grnn_predict, spread_search, GrnnModel, SpreadSearch, PAPER_SPREAD};
pub use ica::{
    amari_index, fastica, run_ica, select_variables, whiten, IcaConfig, IcaResult, VariableSubset,
    Whitened,
};
pub use linreg::{
    durbin_watson, ols_fit, predict, stepwise_fit, AnovaTable, RegressionFit, StepwiseAudit,
    PassKind, RegressionTables, StepwiseConfig, StepwiseResult,
};
pub use metrics::{compare, evaluate, ComparisonReport, MetricsReport};
pub use mlp::{
    forward, jacobian, lm_direction, lm_step, mlp_init, train_lm, train_lm_set, LeastSquaresModel,
    LinearModel, LmConfig, EpochRecord, LmStep, MlpModel, TrainHistory, PAPER_LAYERS,
};
