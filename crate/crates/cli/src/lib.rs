//! Command-line pipeline: variable selection, stepwise regression, kernel
//! GRNN, LM-trained perceptron and the comparison report.

pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{DataConfig, FeatureSource, GrnnConfig, PipelineConfig};
pub use error::CliError;
pub use pipeline::{emit_error_curve, Comparison, Dataset, ModelMetrics, Pipeline, SelectionReport};
