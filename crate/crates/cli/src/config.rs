//! Pipeline configuration, read from a TOML file.
//!
//! Every key is optional; defaults reproduce the reference setup (spread
//! 0.8326, 37 LM epochs, 5% / 3.5% / 10% stepwise thresholds, 20% test
//! split, the seven reference variables and a synthetic 100 × 84 panel).
//!
//! ```toml
//! seed = 7
//! output_dir = "out"
//! test_fraction = 0.2
//!
//! [data]
//! input = "panel.csv"            # omit to generate a synthetic panel
//!
//! [data.synth]                   # used only without `input`
//! n_companies = 100
//! n_months = 84
//! noise_scale = 1.0
//! nonlinear = true
//!
//! [features]
//! source = "paper-seven"         # or "ica", or "explicit" with `names = [...]`
//!
//! [ica]
//! max_components = 10
//! k_min = 3
//! k_max = 7
//!
//! [stepwise]
//! p_drop = 0.05
//!
//! [grnn]
//! spread = 0.8326
//! grid = [0.1, 0.5, 1.0]         # optional: pick the spread on a validation split
//!
//! [lm]
//! max_epochs = 37
//! ```
//!
//! The top-level `seed` replaces the `seed` of `[data.synth]` and `[lm]`, and
//! also seeds ICA.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stockcast_core::{IcaConfig, LmConfig, StepwiseConfig, SynthConfig, PAPER_SPREAD};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub test_fraction: f64,
    pub data: DataConfig,
    pub features: FeatureSource,
    pub ica: IcaConfig,
    pub stepwise: StepwiseConfig,
    pub grnn: GrnnConfig,
    pub lm: LmConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            test_fraction: 0.2,
            data: DataConfig::default(),
            features: FeatureSource::PaperSeven {},
            ica: IcaConfig::default(),
            stepwise: StepwiseConfig::default(),
            grnn: GrnnConfig::default(),
            lm: LmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub input: Option<PathBuf>,
    pub synth: Option<SynthConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FeatureSource {
    Ica {},
    PaperSeven {},
    Explicit { names: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrnnConfig {
    pub spread: f64,
    /// When set, the spread with the lowest validation MSE is used instead.
    pub grid: Option<Vec<f64>>,
    /// Share of the training rows held out for the spread search.
    pub validation_fraction: f64,
}

impl Default for GrnnConfig {
    fn default() -> Self {
        Self { spread: PAPER_SPREAD, grid: None, validation_fraction: 0.2 }
    }
}

impl PipelineConfig {
    /// Parses a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            config.resolve_relative(base);
        }
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    fn resolve_relative(&mut self, base: &Path) {
        if let Some(input) = &self.data.input {
            if input.is_relative() {
                self.data.input = Some(base.join(input));
            }
        }
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.data.input.is_some() && self.data.synth.is_some() {
            return bad("set either data.input or data.synth, not both".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction must be in (0, 1), got {}", self.test_fraction));
        }
        if let FeatureSource::Explicit { names } = &self.features {
            if names.is_empty() {
                return bad("features.names must list at least one variable".into());
            }
        }
        let g = &self.grnn;
        if !(g.spread > 0.0 && g.spread.is_finite()) {
            return bad(format!("grnn.spread must be positive, got {}", g.spread));
        }
        if let Some(grid) = &g.grid {
            if grid.is_empty() || grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return bad("grnn.grid must hold positive spreads".into());
            }
        }
        if !(g.validation_fraction > 0.0 && g.validation_fraction < 1.0) {
            return bad(format!("grnn.validation_fraction must be in (0, 1), got {}", g.validation_fraction));
        }
        if self.ica.k_min > self.ica.k_max || self.ica.k_max == 0 {
            return bad("ica.k_min must not exceed ica.k_max".into());
        }
        self.stepwise.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.lm.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(synth) = &self.data.synth {
            synth.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Synthetic panel settings with the pipeline seed applied.
    pub fn synth(&self) -> SynthConfig {
        SynthConfig { seed: self.seed, ..self.data.synth.clone().unwrap_or_default() }
    }

    pub fn lm(&self) -> LmConfig {
        LmConfig { seed: self.seed, ..self.lm }
    }
}
