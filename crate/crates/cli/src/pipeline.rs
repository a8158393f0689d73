//! The select → fit → train → compare pipeline and its artifact files.
//!
//! Each step can run alone: it reads whatever earlier steps left in the
//! output directory and recomputes anything missing. [`Pipeline::run`]
//! recomputes everything from the configured data source.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use stockcast_core::{
    chronological_split, compare, evaluate, grnn_build, lag_align, load_panel, mlp_init, predict, run_ica,
    select_variables, spread_search, stepwise_fit, synth_generate, train_lm_set, ComparisonReport,
    GrnnModel, MetricsReport, MlpModel, Panel, RegressionTables, ScalerParams, SpreadSearch,
    StepwiseAudit, StepwiseResult, SupervisedSet, TrainHistory, VariableCatalog, VariableSubset,
    PAPER_LAYERS,
};

use crate::config::{FeatureSource, PipelineConfig};
use crate::error::CliError;

pub const PANEL_FILE: &str = "panel.csv";
pub const SELECTION_FILE: &str = "selected_variables.json";
pub const LINREG_FILE: &str = "linreg_fit.json";
pub const GRNN_FILE: &str = "grnn_model.json";
pub const MLP_FILE: &str = "mlp_model.json";
pub const MLP_HISTORY_FILE: &str = "mlp_history.csv";
pub const COMPARISON_JSON: &str = "comparison.json";
pub const COMPARISON_TXT: &str = "comparison.txt";

pub const LINEAR_LABEL: &str = "linear-regression";
pub const GRNN_LABEL: &str = "kernel-grnn";
pub const MLP_LABEL: &str = "mlp-lm";
pub const UNTRAINED_LABEL: &str = "mlp-untrained";

/// Every model label the comparison step looks for, in file order.
pub const MODEL_LABELS: [&str; 4] = [GRNN_LABEL, LINEAR_LABEL, MLP_LABEL, UNTRAINED_LABEL];

pub fn metrics_file(label: &str) -> String {
    format!("metrics_{}.json", label.replace('-', "_"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub source: String,
    pub selected_names: Vec<String>,
    pub scores: Vec<f64>,
    /// Only for ICA selection.
    pub converged: Option<bool>,
    pub n_components: Option<usize>,
    pub n_iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub model: String,
    pub train: MetricsReport,
    pub test: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinregArtifact {
    pub offered: Vec<String>,
    pub retained: Vec<String>,
    pub tables: RegressionTables,
    pub audit: StepwiseAudit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrnnArtifact {
    pub spread_search: Option<SpreadSearch>,
    pub model: GrnnModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpArtifact {
    pub feature_names: Vec<String>,
    /// Applied to features before the network sees them.
    pub scaler: ScalerParams,
    pub initial_mse: f64,
    pub final_mse: f64,
    pub epochs: usize,
    pub converged: bool,
    pub model: MlpModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub test: ComparisonReport,
    pub train: ComparisonReport,
}

impl Comparison {
    pub fn render(&self) -> String {
        format!(
            "{}\n{}",
            self.test.render_table("Test set (out of sample)"),
            self.train.render_table("Training set (in sample)")
        )
    }
}

/// Writes the per-epoch training curve as `epoch,mse,lambda,accepted`.
pub fn emit_error_curve(history: &TrainHistory, path: &Path) -> Result<(), CliError> {
    if history.epochs.is_empty() {
        return Err(stockcast_core::Error::EmptyInput("training history has no epochs".into()).into());
    }
    write_text(path, &history.to_csv())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(stockcast_core::Error::from)?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| stockcast_core::Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text).map_err(stockcast_core::Error::from)?)
}

/// The train/test split of the lag-aligned panel over the selected variables.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: SupervisedSet,
    pub test: SupervisedSet,
}

pub struct Pipeline {
    config: PipelineConfig,
    catalog: VariableCatalog,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, CliError> {
        config.validate()?;
        fs::create_dir_all(&config.output_dir)
            .map_err(|source| CliError::Write { path: config.output_dir.clone(), source })?;
        Ok(Self { config, catalog: VariableCatalog::default() })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    /// Generates the configured synthetic panel and writes it.
    pub fn synth(&self) -> Result<Panel, CliError> {
        let panel = synth_generate(&self.config.synth(), &self.catalog)?;
        info!("synthetic panel: {} observations", panel.len());
        panel.write_csv(&self.path(PANEL_FILE))?;
        Ok(panel)
    }

    /// The configured input file; otherwise a panel left by `synth`;
    /// otherwise a fresh synthetic panel.
    fn existing_panel(&self) -> Result<Panel, CliError> {
        if let Some(input) = &self.config.data.input {
            return Ok(load_panel(input, &self.catalog)?);
        }
        let cached = self.path(PANEL_FILE);
        if cached.exists() {
            return Ok(load_panel(&cached, &self.catalog)?);
        }
        self.synth()
    }

    fn fresh_panel(&self) -> Result<Panel, CliError> {
        match &self.config.data.input {
            Some(input) => {
                let panel = load_panel(input, &self.catalog)?;
                if panel.dropped_rows() > 0 {
                    warn!("{}: dropped {} malformed rows", input.display(), panel.dropped_rows());
                }
                Ok(panel)
            }
            None => self.synth(),
        }
    }

    fn selection_from(&self, panel: &Panel) -> Result<SelectionReport, CliError> {
        let report = match &self.config.features {
            FeatureSource::PaperSeven {} => {
                let subset = VariableSubset::paper_seven();
                SelectionReport {
                    source: "paper-seven".into(),
                    selected_names: subset.selected_names,
                    scores: subset.scores,
                    converged: None,
                    n_components: None,
                    n_iterations: None,
                }
            }
            FeatureSource::Explicit { names } => SelectionReport {
                source: "explicit".into(),
                selected_names: names.clone(),
                scores: vec![1.0; names.len()],
                converged: None,
                n_components: None,
                n_iterations: None,
            },
            FeatureSource::Ica {} => {
                let data = panel.value_matrix();
                let result = run_ica(&data, &self.config.ica, self.config.seed)?;
                if !result.converged {
                    warn!("ICA did not converge within {} iterations", self.config.ica.max_iter);
                }
                let subset = select_variables(&result, panel.variables(), self.config.ica.k_min, self.config.ica.k_max)?;
                SelectionReport {
                    source: "ica".into(),
                    selected_names: subset.selected_names,
                    scores: subset.scores,
                    converged: Some(result.converged),
                    n_components: Some(result.n_components()),
                    n_iterations: Some(result.n_iterations),
                }
            }
        };
        info!("selected variables: {}", report.selected_names.join(", "));
        write_json(&self.path(SELECTION_FILE), &report)?;
        Ok(report)
    }

    pub fn select(&self) -> Result<SelectionReport, CliError> {
        let panel = self.existing_panel()?;
        self.selection_from(&panel)
    }

    fn dataset_from(&self, panel: &Panel, selection: &SelectionReport) -> Result<Dataset, CliError> {
        let set = lag_align(panel, &selection.selected_names)?;
        let (train, test) = chronological_split(&set, self.config.test_fraction)?;
        info!("{} training rows, {} test rows", train.len(), test.len());
        Ok(Dataset { train, test })
    }

    /// Split built from earlier artifacts where they exist.
    pub fn dataset(&self) -> Result<Dataset, CliError> {
        let panel = self.existing_panel()?;
        let cached = self.path(SELECTION_FILE);
        let selection = if cached.exists() { read_json(&cached)? } else { self.selection_from(&panel)? };
        self.dataset_from(&panel, &selection)
    }

    fn record_metrics(&self, label: &str, train: MetricsReport, test: MetricsReport) -> Result<ModelMetrics, CliError> {
        let metrics = ModelMetrics { model: label.to_string(), train, test };
        write_json(&self.path(&metrics_file(label)), &metrics)?;
        Ok(metrics)
    }

    pub fn fit_linreg(&self, data: &Dataset) -> Result<ModelMetrics, CliError> {
        let names = &data.train.feature_names;
        let StepwiseResult { fit, audit } = stepwise_fit(
            &data.train.feature_matrix(),
            data.train.targets().as_slice(),
            names,
            &self.config.stepwise,
        )?;
        let columns: Vec<usize> = fit
            .feature_names
            .iter()
            .map(|n| names.iter().position(|m| m == n).expect("retained names come from the input"))
            .collect();
        let train_pred = predict(&fit, &data.train.feature_matrix().select_columns(&columns))?;
        let test_pred = predict(&fit, &data.test.feature_matrix().select_columns(&columns))?;
        info!("stepwise kept {} of {} variables", fit.feature_names.len(), names.len());
        write_json(
            &self.path(LINREG_FILE),
            &LinregArtifact { offered: names.clone(), retained: fit.feature_names.clone(), tables: fit.tables(), audit },
        )?;
        self.record_metrics(
            LINEAR_LABEL,
            evaluate(&train_pred, data.train.targets().as_slice(), LINEAR_LABEL)?,
            evaluate(&test_pred, data.test.targets().as_slice(), LINEAR_LABEL)?,
        )
    }

    pub fn fit_grnn(&self, data: &Dataset) -> Result<ModelMetrics, CliError> {
        let grnn = &self.config.grnn;
        let search = match &grnn.grid {
            Some(grid) => {
                let (inner, validation) = chronological_split(&data.train, grnn.validation_fraction)?;
                Some(spread_search(&inner, &validation, grid)?)
            }
            None => None,
        };
        let spread = search.as_ref().map_or(grnn.spread, |s| s.best_spread);
        info!("GRNN spread {spread}");
        let model = grnn_build(&data.train, spread)?;
        let train_pred = model.predict_set(&data.train)?;
        let test_pred = model.predict_set(&data.test)?;
        write_json(&self.path(GRNN_FILE), &GrnnArtifact { spread_search: search, model })?;
        self.record_metrics(
            GRNN_LABEL,
            evaluate(&train_pred, data.train.targets().as_slice(), GRNN_LABEL)?,
            evaluate(&test_pred, data.test.targets().as_slice(), GRNN_LABEL)?,
        )
    }

    /// Trains the network and also scores its untrained initialisation.
    pub fn train_mlp(&self, data: &Dataset) -> Result<(ModelMetrics, ModelMetrics), CliError> {
        let scaler = ScalerParams::fit(&data.train)?;
        let train = scaler.apply(&data.train)?;
        let test = scaler.apply(&data.test)?;
        let mut layers = PAPER_LAYERS;
        layers[0] = train.n_features();
        let lm = self.config.lm();
        let initial = mlp_init(&layers, lm.seed)?;
        let (trained, history) = train_lm_set(&initial, &train, &lm)?;
        info!(
            "LM: {} epochs, training MSE {:.4} -> {:.4}",
            history.epochs.len(),
            history.initial_mse,
            history.final_mse()
        );
        if history.epochs.is_empty() {
            warn!("training stopped before the first epoch; no error curve written");
        } else {
            emit_error_curve(&history, &self.path(MLP_HISTORY_FILE))?;
        }
        write_json(
            &self.path(MLP_FILE),
            &MlpArtifact {
                feature_names: train.feature_names.clone(),
                scaler,
                initial_mse: history.initial_mse,
                final_mse: history.final_mse(),
                epochs: history.epochs.len(),
                converged: history.converged,
                model: trained.clone(),
            },
        )?;
        let y_train = train.targets();
        let y_test = test.targets();
        let trained_metrics = self.record_metrics(
            MLP_LABEL,
            evaluate(&trained.predict_set(&train)?, y_train.as_slice(), MLP_LABEL)?,
            evaluate(&trained.predict_set(&test)?, y_test.as_slice(), MLP_LABEL)?,
        )?;
        let untrained_metrics = self.record_metrics(
            UNTRAINED_LABEL,
            evaluate(&initial.predict_set(&train)?, y_train.as_slice(), UNTRAINED_LABEL)?,
            evaluate(&initial.predict_set(&test)?, y_test.as_slice(), UNTRAINED_LABEL)?,
        )?;
        Ok((trained_metrics, untrained_metrics))
    }

    fn comparison_of(&self, metrics: &[ModelMetrics]) -> Result<Comparison, CliError> {
        let pick = |f: fn(&ModelMetrics) -> &MetricsReport| metrics.iter().map(f).cloned().collect::<Vec<_>>();
        let comparison = Comparison { test: compare(&pick(|m| &m.test))?, train: compare(&pick(|m| &m.train))? };
        write_json(&self.path(COMPARISON_JSON), &comparison)?;
        write_text(&self.path(COMPARISON_TXT), &comparison.render())?;
        Ok(comparison)
    }

    /// Compares every model whose metrics file is present.
    pub fn compare(&self) -> Result<Comparison, CliError> {
        let mut metrics = Vec::new();
        for label in MODEL_LABELS {
            let path = self.path(&metrics_file(label));
            if path.exists() {
                metrics.push(read_json::<ModelMetrics>(&path)?);
            }
        }
        if metrics.len() < 2 {
            return Err(CliError::MissingArtifact(self.path(&metrics_file(GRNN_LABEL))));
        }
        self.comparison_of(&metrics)
    }

    /// Every step from the configured data source, ignoring earlier artifacts.
    pub fn run(&self) -> Result<Comparison, CliError> {
        let panel = self.fresh_panel()?;
        let selection = self.selection_from(&panel)?;
        let data = self.dataset_from(&panel, &selection)?;
        let linear = self.fit_linreg(&data)?;
        let grnn = self.fit_grnn(&data)?;
        let (mlp, untrained) = self.train_mlp(&data)?;
        self.comparison_of(&[grnn, linear, mlp, untrained])
    }
}
