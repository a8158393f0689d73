//! Ordinary least squares with the classic diagnostic battery (model summary,
//! ANOVA, coefficient table) and backward stepwise elimination with adaptive
//! p-value thresholds.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};
use crate::serde_nan;

/// Name reported for the intercept in coefficient tables.
pub const INTERCEPT: &str = "(Constant)";

/// Columns whose scaled QR pivot falls below this are treated as collinear.
const COLLINEARITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub regression_ss: f64,
    pub residual_ss: f64,
    pub total_ss: f64,
    pub df_regression: usize,
    pub df_residual: usize,
    pub df_total: usize,
    #[serde(with = "serde_nan::scalar")]
    pub regression_ms: f64,
    #[serde(with = "serde_nan::scalar")]
    pub residual_ms: f64,
    #[serde(with = "serde_nan::scalar")]
    pub f_statistic: f64,
    #[serde(with = "serde_nan::scalar")]
    pub f_p_value: f64,
}

/// A fitted OLS model with intercept.
///
/// `coefficients`, `std_errors`, `t_values` and `p_values` have the intercept
/// at index 0 followed by one entry per feature; `standardized_betas` has one
/// entry per feature. Inferential statistics are NaN when the fit has no
/// residual degrees of freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub feature_names: Vec<String>,
    pub n_samples: usize,
    pub coefficients: Vec<f64>,
    #[serde(with = "serde_nan::vec")]
    pub std_errors: Vec<f64>,
    #[serde(with = "serde_nan::vec")]
    pub t_values: Vec<f64>,
    #[serde(with = "serde_nan::vec")]
    pub p_values: Vec<f64>,
    pub standardized_betas: Vec<f64>,
    pub r: f64,
    pub r_squared: f64,
    #[serde(with = "serde_nan::scalar")]
    pub adj_r_squared: f64,
    #[serde(with = "serde_nan::scalar")]
    pub std_error_estimate: f64,
    /// `None` when the residuals vanish (exact fit).
    pub durbin_watson: Option<f64>,
    pub anova: AnovaTable,
    pub residuals: Vec<f64>,
}

impl RegressionFit {
    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    /// Feature coefficients, without the intercept.
    pub fn slopes(&self) -> &[f64] {
        &self.coefficients[1..]
    }

    /// Feature p-values, without the intercept.
    pub fn feature_p_values(&self) -> &[f64] {
        &self.p_values[1..]
    }

    /// Model summary / ANOVA / coefficients layout for reporting.
    pub fn tables(&self) -> RegressionTables {
        let mut coefficients = Vec::with_capacity(self.coefficients.len());
        for i in 0..self.coefficients.len() {
            coefficients.push(CoefficientRow {
                name: if i == 0 { INTERCEPT.to_string() } else { self.feature_names[i - 1].clone() },
                b: self.coefficients[i],
                std_error: self.std_errors[i],
                beta: (i > 0).then(|| self.standardized_betas[i - 1]),
                t: self.t_values[i],
                sig: self.p_values[i],
            });
        }
        RegressionTables {
            model_summary: ModelSummary {
                r: self.r,
                r_square: self.r_squared,
                adjusted_r_square: self.adj_r_squared,
                std_error_of_estimate: self.std_error_estimate,
                durbin_watson: self.durbin_watson,
                n_samples: self.n_samples,
            },
            anova: self.anova.clone(),
            coefficients,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub r: f64,
    pub r_square: f64,
    #[serde(with = "serde_nan::scalar")]
    pub adjusted_r_square: f64,
    #[serde(with = "serde_nan::scalar")]
    pub std_error_of_estimate: f64,
    pub durbin_watson: Option<f64>,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub name: String,
    pub b: f64,
    #[serde(with = "serde_nan::scalar")]
    pub std_error: f64,
    pub beta: Option<f64>,
    #[serde(with = "serde_nan::scalar")]
    pub t: f64,
    #[serde(with = "serde_nan::scalar")]
    pub sig: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTables {
    pub model_summary: ModelSummary,
    pub anova: AnovaTable,
    pub coefficients: Vec<CoefficientRow>,
}

fn check_shape(x: &DMatrix<f64>, y: &[f64], names: &[String]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), actual: y.len() });
    }
    if x.ncols() != names.len() {
        return Err(Error::DimensionMismatch { expected: x.ncols(), actual: names.len() });
    }
    if x.nrows() < x.ncols() + 1 {
        return Err(Error::EmptyInput(format!(
            "{} samples cannot determine {} coefficients",
            x.nrows(),
            x.ncols() + 1
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("non-finite value in regression input".into()));
    }
    Ok(())
}

fn two_sided_t_p(t: f64, df: usize) -> f64 {
    if !t.is_finite() || df == 0 {
        return if t.is_infinite() { 0.0 } else { f64::NAN };
    }
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

fn f_upper_p(f: f64, df1: usize, df2: usize) -> f64 {
    if df1 == 0 || df2 == 0 || f.is_nan() {
        return f64::NAN;
    }
    if f.is_infinite() {
        return 0.0;
    }
    let dist = FisherSnedecor::new(df1 as f64, df2 as f64).expect("positive degrees of freedom");
    dist.sf(f.max(0.0)).clamp(0.0, 1.0)
}

fn sample_sd(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Least-squares fit of `y` on `x` plus an intercept column.
///
/// Solved by Householder QR on the column-normalised design so that mixed
/// units do not hurt conditioning. A column whose normalised pivot drops below
/// 1e-10 is reported as collinear with the columns before it.
pub fn ols_fit(x: &DMatrix<f64>, y: &[f64], feature_names: &[String]) -> Result<RegressionFit> {
    check_shape(x, y, feature_names)?;
    let (n, k) = (x.nrows(), x.ncols());
    let p = k + 1;

    let mut design = DMatrix::from_element(n, p, 1.0);
    design.view_mut((0, 1), (n, k)).copy_from(x);
    let norms: Vec<f64> = design.column_iter().map(|c| c.norm()).collect();
    for (j, &norm) in norms.iter().enumerate() {
        if norm > 0.0 {
            design.column_mut(j).unscale_mut(norm);
        }
    }
    let column_name = |j: usize| {
        if j == 0 { INTERCEPT.to_string() } else { feature_names[j - 1].clone() }
    };

    let qr = design.clone().qr();
    let r = qr.r();
    let collinear: Vec<String> = (0..p)
        .filter(|&j| norms[j] == 0.0 || r[(j, j)].abs() < COLLINEARITY_TOL)
        .map(column_name)
        .collect();
    if !collinear.is_empty() {
        return Err(Error::SingularDesign { columns: collinear });
    }

    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let scaled = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularDesign { columns: vec![] })?;
    let coefficients: Vec<f64> = scaled.iter().zip(&norms).map(|(b, s)| b / s).collect();

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::SingularDesign { columns: vec![] })?;
    // (XᵀX)⁻¹ diagonal in original units.
    let xtx_inv_diag: Vec<f64> =
        (0..p).map(|j| r_inv.row(j).norm_squared() / (norms[j] * norms[j])).collect();

    let mut fitted = vec![coefficients[0]; n];
    for (i, f) in fitted.iter_mut().enumerate() {
        for j in 0..k {
            *f += coefficients[j + 1] * x[(i, j)];
        }
    }
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, f)| a - f).collect();

    let y_mean = y.iter().sum::<f64>() / n as f64;
    let total_ss: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    if total_ss == 0.0 {
        return Err(Error::ConstantResponse);
    }
    let residual_ss: f64 = residuals.iter().map(|e| e * e).sum();
    let regression_ss: f64 = fitted.iter().map(|f| (f - y_mean).powi(2)).sum();

    let df_residual = n - p;
    let (df_regression, df_total) = (k, n - 1);
    let residual_ms = if df_residual > 0 { residual_ss / df_residual as f64 } else { f64::NAN };
    let regression_ms = if k > 0 { regression_ss / k as f64 } else { f64::NAN };
    let f_statistic = regression_ms / residual_ms;

    let std_errors: Vec<f64> = xtx_inv_diag.iter().map(|d| (residual_ms * d).sqrt()).collect();
    let t_values: Vec<f64> = coefficients.iter().zip(&std_errors).map(|(b, se)| b / se).collect();
    let p_values: Vec<f64> = t_values.iter().map(|&t| two_sided_t_p(t, df_residual)).collect();

    let y_sd = sample_sd(y.iter().copied());
    let standardized_betas =
        (0..k).map(|j| coefficients[j + 1] * sample_sd(x.column(j).iter().copied()) / y_sd).collect();

    let r_squared = (1.0 - residual_ss / total_ss).clamp(0.0, 1.0);
    let adj_r_squared = if df_residual > 0 {
        1.0 - (1.0 - r_squared) * (n - 1) as f64 / df_residual as f64
    } else {
        f64::NAN
    };
    let sum_y_sq: f64 = y.iter().map(|v| v * v).sum();
    let durbin_watson = if residual_ss <= f64::EPSILON * f64::EPSILON * sum_y_sq {
        None
    } else {
        Some(durbin_watson(&residuals)?)
    };

    Ok(RegressionFit {
        feature_names: feature_names.to_vec(),
        n_samples: n,
        coefficients,
        std_errors,
        t_values,
        p_values,
        standardized_betas,
        r: r_squared.sqrt(),
        r_squared,
        adj_r_squared,
        std_error_estimate: residual_ms.sqrt(),
        durbin_watson,
        anova: AnovaTable {
            regression_ss,
            residual_ss,
            total_ss,
            df_regression,
            df_residual,
            df_total,
            regression_ms,
            residual_ms,
            f_statistic,
            f_p_value: f_upper_p(f_statistic, df_regression, df_residual),
        },
        residuals,
    })
}

/// `intercept + x · slopes` for every row of `x`.
pub fn predict(fit: &RegressionFit, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if x.ncols() != fit.feature_names.len() {
        return Err(Error::DimensionMismatch { expected: fit.feature_names.len(), actual: x.ncols() });
    }
    Ok(x.row_iter()
        .map(|row| fit.intercept() + row.iter().zip(fit.slopes()).map(|(v, b)| v * b).sum::<f64>())
        .collect())
}

/// `Σ(e_t − e_{t−1})² / Σe_t²`, always in `[0, 4]`.
pub fn durbin_watson(residuals: &[f64]) -> Result<f64> {
    if residuals.len() < 2 {
        return Err(Error::EmptyInput("Durbin-Watson needs at least two residuals".into()));
    }
    let denom: f64 = residuals.iter().map(|e| e * e).sum();
    if denom == 0.0 {
        return Err(Error::ZeroResiduals);
    }
    let numer: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok((numer / denom).clamp(0.0, 4.0))
}

/// Thresholds for backward elimination.
///
/// Variables with p above `p_drop` leave the model. If more than
/// `max_vars_before_tighten` survive, elimination reruns at `p_drop_tight`;
/// if `min_vars_before_loosen` or fewer survive it reruns at `p_drop_loose`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepwiseConfig {
    pub p_drop: f64,
    pub p_drop_tight: f64,
    pub p_drop_loose: f64,
    pub max_vars_before_tighten: usize,
    pub min_vars_before_loosen: usize,
}

impl Default for StepwiseConfig {
    fn default() -> Self {
        Self {
            p_drop: 0.05,
            p_drop_tight: 0.035,
            p_drop_loose: 0.10,
            max_vars_before_tighten: 8,
            min_vars_before_loosen: 2,
        }
    }
}

impl StepwiseConfig {
    pub fn validate(&self) -> Result<()> {
        let ordered = 0.0 < self.p_drop_tight
            && self.p_drop_tight < self.p_drop
            && self.p_drop < self.p_drop_loose
            && self.p_drop_loose < 1.0;
        if !ordered {
            return Err(Error::InvalidConfig(
                "stepwise thresholds must satisfy 0 < tight < drop < loose < 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassKind {
    Initial,
    Tightened,
    Loosened,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    pub name: String,
    #[serde(with = "serde_nan::scalar")]
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepwisePass {
    pub kind: PassKind,
    pub threshold: f64,
    pub eliminated: Vec<Elimination>,
    pub survivors: Vec<String>,
}

/// Record of every elimination pass, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepwiseAudit {
    pub passes: Vec<StepwisePass>,
    pub active_threshold: f64,
}

impl StepwiseAudit {
    pub fn count(&self, kind: PassKind) -> usize {
        self.passes.iter().filter(|p| p.kind == kind).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepwiseResult {
    pub fit: RegressionFit,
    pub audit: StepwiseAudit,
}

/// Index of the variable to eliminate: the highest p-value above `threshold`,
/// the later column on ties. NaN p-values count as certain elimination.
pub fn elimination_candidate(p_values: &[f64], threshold: f64) -> Option<usize> {
    let key = |p: f64| if p.is_nan() { f64::INFINITY } else { p };
    let mut best: Option<usize> = None;
    for (i, &p) in p_values.iter().enumerate() {
        if key(p) > threshold && best.is_none_or(|b| key(p) >= key(p_values[b])) {
            best = Some(i);
        }
    }
    best
}

fn select_columns(x: &DMatrix<f64>, columns: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), columns.len(), |i, j| x[(i, columns[j])])
}

fn elimination_pass(
    x: &DMatrix<f64>,
    y: &[f64],
    names: &[String],
    kind: PassKind,
    threshold: f64,
) -> Result<StepwisePass> {
    let mut active: Vec<usize> = (0..names.len()).collect();
    let mut eliminated = Vec::new();
    while !active.is_empty() {
        let active_names: Vec<String> = active.iter().map(|&c| names[c].clone()).collect();
        let fit = ols_fit(&select_columns(x, &active), y, &active_names)?;
        match elimination_candidate(fit.feature_p_values(), threshold) {
            Some(i) => {
                eliminated.push(Elimination {
                    name: active_names[i].clone(),
                    p_value: fit.feature_p_values()[i],
                });
                active.remove(i);
            }
            None => break,
        }
    }
    Ok(StepwisePass {
        kind,
        threshold,
        eliminated,
        survivors: active.iter().map(|&c| names[c].clone()).collect(),
    })
}

/// Backward elimination: every variable enters, then the least significant
/// one above the active threshold is removed and the model refit, one at a
/// time. The survivor count of the initial pass may trigger one rerun at the
/// tightened or loosened threshold. The intercept is never eliminated.
pub fn stepwise_fit(
    x: &DMatrix<f64>,
    y: &[f64],
    feature_names: &[String],
    config: &StepwiseConfig,
) -> Result<StepwiseResult> {
    config.validate()?;
    check_shape(x, y, feature_names)?;

    let initial = elimination_pass(x, y, feature_names, PassKind::Initial, config.p_drop)?;
    let survivors = initial.survivors.len();
    let mut passes = vec![initial];
    if survivors > config.max_vars_before_tighten {
        passes.push(elimination_pass(x, y, feature_names, PassKind::Tightened, config.p_drop_tight)?);
    } else if survivors <= config.min_vars_before_loosen {
        passes.push(elimination_pass(x, y, feature_names, PassKind::Loosened, config.p_drop_loose)?);
    }
    let last = passes.last().expect("at least one pass");
    if last.survivors.is_empty() {
        return Err(Error::EmptyModel);
    }
    let columns: Vec<usize> = last
        .survivors
        .iter()
        .map(|s| feature_names.iter().position(|n| n == s).expect("survivor is an input name"))
        .collect();
    let fit = ols_fit(&select_columns(x, &columns), y, &last.survivors)?;
    let active_threshold = last.threshold;
    Ok(StepwiseResult { fit, audit: StepwiseAudit { passes, active_threshold } })
}
