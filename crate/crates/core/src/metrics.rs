//! MSE, MAPE and out-of-sample R², and side-by-side model comparison.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model_name: String,
    pub mse: f64,
    /// Percent.
    pub mape: f64,
    /// `1 − SSres/SStot`; negative for models worse than the mean.
    pub r_squared: f64,
    pub n: usize,
    pub n_excluded_zero_actuals: usize,
}

/// Scores `predictions` against `actuals`.
///
/// MAPE skips rows whose actual value is exactly zero and counts them.
pub fn evaluate(predictions: &[f64], actuals: &[f64], label: &str) -> Result<MetricsReport> {
    if predictions.len() != actuals.len() {
        return Err(Error::DimensionMismatch { expected: actuals.len(), actual: predictions.len() });
    }
    let n = actuals.len();
    if n < 2 {
        return Err(Error::EmptyInput("metrics need at least two observations".into()));
    }
    if predictions.iter().chain(actuals).any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!("non-finite prediction or actual for `{label}`")));
    }
    let ss_res: f64 = predictions.iter().zip(actuals).map(|(p, a)| (a - p).powi(2)).sum();
    let mse = ss_res / n as f64;

    let (mut ape_sum, mut excluded) = (0.0, 0);
    for (p, a) in predictions.iter().zip(actuals) {
        if *a == 0.0 {
            excluded += 1;
        } else {
            ape_sum += ((a - p) / a).abs();
        }
    }
    if excluded == n {
        return Err(Error::AllZeroActuals);
    }
    let mape = 100.0 * ape_sum / (n - excluded) as f64;

    let mean = actuals.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = actuals.iter().map(|a| (a - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ConstantResponse);
    }
    Ok(MetricsReport {
        model_name: label.to_string(),
        mse,
        mape,
        r_squared: 1.0 - ss_res / ss_tot,
        n,
        n_excluded_zero_actuals: excluded,
    })
}

/// Difference `a − b` of every metric between two models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub a: String,
    pub b: String,
    pub mse: f64,
    pub mape: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<MetricsReport>,
    /// Labels by ascending MSE, ties alphabetical.
    pub ranking: Vec<String>,
    /// One entry per pair, in ranking order.
    pub deltas: Vec<MetricDelta>,
}

/// Ranks models by MSE and tabulates pairwise differences.
pub fn compare(reports: &[MetricsReport]) -> Result<ComparisonReport> {
    if reports.len() < 2 {
        return Err(Error::EmptyInput("comparison needs at least two models".into()));
    }
    let mut seen = HashSet::new();
    for r in reports {
        if !seen.insert(r.model_name.as_str()) {
            return Err(Error::DuplicateLabel(r.model_name.clone()));
        }
    }
    let mut ranked: Vec<&MetricsReport> = reports.iter().collect();
    ranked.sort_by(|a, b| a.mse.total_cmp(&b.mse).then_with(|| a.model_name.cmp(&b.model_name)));

    let mut deltas = Vec::new();
    for (i, a) in ranked.iter().enumerate() {
        for b in &ranked[i + 1..] {
            deltas.push(MetricDelta {
                a: a.model_name.clone(),
                b: b.model_name.clone(),
                mse: a.mse - b.mse,
                mape: a.mape - b.mape,
                r_squared: a.r_squared - b.r_squared,
            });
        }
    }
    Ok(ComparisonReport {
        rows: reports.to_vec(),
        ranking: ranked.iter().map(|r| r.model_name.clone()).collect(),
        deltas,
    })
}

impl ComparisonReport {
    pub fn row(&self, label: &str) -> Option<&MetricsReport> {
        self.rows.iter().find(|r| r.model_name == label)
    }

    /// Aligned text table with columns R², MAPE, MSE, one row per model in
    /// ranking order.
    pub fn render_table(&self, title: &str) -> String {
        let width = self.ranking.iter().map(String::len).max().unwrap_or(0).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{title}");
        let _ = writeln!(out, "{:<width$}  {:>10}  {:>10}  {:>12}", "model", "R^2", "MAPE", "MSE");
        for label in &self.ranking {
            let r = self.row(label).expect("ranking labels come from rows");
            let _ = writeln!(
                out,
                "{:<width$}  {:>10.4}  {:>10.4}  {:>12.4}",
                r.model_name, r.r_squared, r.mape, r.mse
            );
        }
        out
    }
}
