//! Specht general regression neural network.
//!
//! The pattern layer stores every standardized training exemplar; the
//! summation layer forms the kernel-weighted target sum and the plain weight
//! sum; the output layer divides them:
//!
//! ```text
//! ŷ(x) = Σᵢ yᵢ·exp(−Dᵢ²/2σ²) / Σᵢ exp(−Dᵢ²/2σ²)
//! ```
//!
//! with `Dᵢ` the Euclidean distance from the standardized query to exemplar
//! `i`. Building is one pass over the data; there is no iterative training.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ScalerParams, SupervisedSet};
use crate::error::{Error, Result};

/// Spread used by the original study.
pub const PAPER_SPREAD: f64 = 0.8326;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrnnModel {
    pub feature_names: Vec<String>,
    /// Standardized exemplars, one row per training sample.
    pub exemplars: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub spread: f64,
    pub scaler: ScalerParams,
}

impl GrnnModel {
    pub fn n_features(&self) -> usize {
        self.scaler.n_features()
    }

    pub fn with_spread(&self, spread: f64) -> Result<Self> {
        check_spread(spread)?;
        Ok(Self { spread, ..self.clone() })
    }

    /// Prediction for a standardized query.
    fn predict_scaled(&self, z: &[f64]) -> f64 {
        let d2: Vec<f64> = self
            .exemplars
            .iter()
            .map(|e| e.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        let d2_min = d2.iter().copied().fold(f64::INFINITY, f64::min);
        let inv = 1.0 / (2.0 * self.spread * self.spread);
        let (mut numer, mut denom) = (0.0, 0.0);
        for (d, y) in d2.iter().zip(&self.targets) {
            // Shifted by the nearest exemplar, so the largest weight is exactly 1.
            let w = (-(d - d2_min) * inv).exp();
            numer += w * y;
            denom += w;
        }
        let (lo, hi) = self
            .targets
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| (lo.min(y), hi.max(y)));
        (numer / denom).clamp(lo, hi)
    }

    /// Predicts every row of `set` (raw feature units), in parallel over rows.
    pub fn predict_set(&self, set: &SupervisedSet) -> Result<Vec<f64>> {
        if set.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), actual: set.n_features() });
        }
        Ok(set
            .rows
            .par_iter()
            .map(|r| self.predict_scaled(&self.scaler.transform(&r.features)))
            .collect())
    }
}

fn check_spread(spread: f64) -> Result<()> {
    if spread > 0.0 && spread.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("spread must be finite and positive, got {spread}")))
    }
}

/// Stores the standardized training exemplars and raw targets.
///
/// Zero-variance features (including every feature of a one-row set) keep unit
/// scale instead of failing, so a single exemplar is a valid model.
pub fn grnn_build(train: &SupervisedSet, spread: f64) -> Result<GrnnModel> {
    check_spread(spread)?;
    if train.is_empty() {
        return Err(Error::EmptyInput("GRNN needs at least one exemplar".into()));
    }
    if train.rows.iter().any(|r| !r.target.is_finite() || r.features.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidConfig("non-finite value in GRNN training data".into()));
    }
    let scaler = ScalerParams::fit_lenient(train)?;
    Ok(GrnnModel {
        feature_names: train.feature_names.clone(),
        exemplars: train.rows.iter().map(|r| scaler.transform(&r.features)).collect(),
        targets: train.rows.iter().map(|r| r.target).collect(),
        spread,
        scaler,
    })
}

/// Kernel-weighted average of the stored targets for a raw feature vector.
pub fn grnn_predict(model: &GrnnModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.n_features() {
        return Err(Error::DimensionMismatch { expected: model.n_features(), actual: x.len() });
    }
    Ok(model.predict_scaled(&model.scaler.transform(x)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadSearch {
    pub best_spread: f64,
    /// `(spread, validation MSE)` in grid order.
    pub validation_mse: Vec<(f64, f64)>,
}

/// Picks the grid spread with the lowest validation MSE; ties go to the
/// smaller spread.
pub fn spread_search(train: &SupervisedSet, val: &SupervisedSet, grid: &[f64]) -> Result<SpreadSearch> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("spread grid is empty".into()));
    }
    if val.is_empty() {
        return Err(Error::EmptyInput("validation set is empty".into()));
    }
    for &s in grid {
        check_spread(s)?;
    }
    let base = grnn_build(train, grid[0])?;
    let mut validation_mse = Vec::with_capacity(grid.len());
    for &spread in grid {
        let preds = base.with_spread(spread)?.predict_set(val)?;
        let mse = preds.iter().zip(&val.rows).map(|(p, r)| (p - r.target).powi(2)).sum::<f64>()
            / val.len() as f64;
        validation_mse.push((spread, mse));
    }
    let (best_spread, _) = validation_mse
        .iter()
        .copied()
        .reduce(|best, cand| {
            if cand.1 < best.1 || (cand.1 == best.1 && cand.0 < best.0) { cand } else { best }
        })
        .expect("grid is non-empty");
    Ok(SpreadSearch { best_spread, validation_mse })
}
