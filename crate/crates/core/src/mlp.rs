//! Feed-forward network with one logistic hidden layer and a linear output,
//! trained by full-batch Levenberg–Marquardt.
//!
//! Parameters are flattened as `[W_hidden (row-major), b_hidden, w_out, b_out]`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::SupervisedSet;
use crate::error::{Error, Result};

/// Topology used by the original study: 7 inputs, 14 hidden units, 1 output.
pub const PAPER_LAYERS: [usize; 3] = [7, 14, 1];

/// Floor for the Marquardt scaling diagonal, so parameters with no gradient
/// signal (saturated units) still get damped.
const DIAG_FLOOR: f64 = 1e-12;

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// A model whose prediction is differentiable in a flat parameter vector.
pub trait LeastSquaresModel: Clone {
    fn n_inputs(&self) -> usize;
    fn n_params(&self) -> usize;
    fn params(&self) -> DVector<f64>;
    fn set_params(&mut self, params: &DVector<f64>);
    /// Prediction for one input row (length already checked).
    fn eval(&self, x: &[f64]) -> f64;
    /// `∂ŷ/∂θ` for one input row, written into `out`.
    fn gradient_row(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    /// hidden × inputs.
    pub hidden_weights: DMatrix<f64>,
    pub hidden_biases: DVector<f64>,
    pub output_weights: DVector<f64>,
    pub output_bias: f64,
}

impl MlpModel {
    pub fn n_hidden(&self) -> usize {
        self.layer_sizes[1]
    }

    pub fn hidden_activations(&self, x: &[f64]) -> DVector<f64> {
        let input = DVector::from_column_slice(x);
        (&self.hidden_weights * input + &self.hidden_biases).map(sigmoid)
    }

    pub fn predict_set(&self, set: &SupervisedSet) -> Result<Vec<f64>> {
        set.rows.iter().map(|r| forward(self, &r.features)).collect()
    }
}

impl LeastSquaresModel for MlpModel {
    fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    fn n_params(&self) -> usize {
        let (d, h) = (self.layer_sizes[0], self.layer_sizes[1]);
        d * h + h + h + 1
    }

    fn params(&self) -> DVector<f64> {
        let (d, h) = (self.layer_sizes[0], self.layer_sizes[1]);
        let mut p = DVector::zeros(self.n_params());
        for i in 0..h {
            for j in 0..d {
                p[i * d + j] = self.hidden_weights[(i, j)];
            }
            p[d * h + i] = self.hidden_biases[i];
            p[d * h + h + i] = self.output_weights[i];
        }
        p[d * h + 2 * h] = self.output_bias;
        p
    }

    fn set_params(&mut self, p: &DVector<f64>) {
        let (d, h) = (self.layer_sizes[0], self.layer_sizes[1]);
        for i in 0..h {
            for j in 0..d {
                self.hidden_weights[(i, j)] = p[i * d + j];
            }
            self.hidden_biases[i] = p[d * h + i];
            self.output_weights[i] = p[d * h + h + i];
        }
        self.output_bias = p[d * h + 2 * h];
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.output_weights.dot(&self.hidden_activations(x)) + self.output_bias
    }

    fn gradient_row(&self, x: &[f64], out: &mut [f64]) {
        let (d, h) = (self.layer_sizes[0], self.layer_sizes[1]);
        let act = self.hidden_activations(x);
        for i in 0..h {
            let delta = self.output_weights[i] * act[i] * (1.0 - act[i]);
            for j in 0..d {
                out[i * d + j] = delta * x[j];
            }
            out[d * h + i] = delta;
            out[d * h + h + i] = act[i];
        }
        out[d * h + 2 * h] = 1.0;
    }
}

/// `ŷ = w·x + b`: the degenerate "identity network", whose residuals are
/// linear in the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LeastSquaresModel for LinearModel {
    fn n_inputs(&self) -> usize {
        self.weights.len()
    }

    fn n_params(&self) -> usize {
        self.weights.len() + 1
    }

    fn params(&self) -> DVector<f64> {
        DVector::from_iterator(self.n_params(), self.weights.iter().copied().chain([self.bias]))
    }

    fn set_params(&mut self, p: &DVector<f64>) {
        let k = self.weights.len();
        self.weights.copy_from_slice(&p.as_slice()[..k]);
        self.bias = p[k];
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    fn gradient_row(&self, x: &[f64], out: &mut [f64]) {
        let k = self.weights.len();
        out[..k].copy_from_slice(x);
        out[k] = 1.0;
    }
}

/// Uniform initialisation in `±1/√fan_in` per layer, deterministic per seed.
pub fn mlp_init(layer_sizes: &[usize], seed: u64) -> Result<MlpModel> {
    if layer_sizes.len() != 3 || layer_sizes.contains(&0) {
        return Err(Error::InvalidConfig(format!(
            "layer sizes must be three positive counts, got {layer_sizes:?}"
        )));
    }
    if layer_sizes[2] != 1 {
        return Err(Error::InvalidConfig("the output layer must have exactly one unit".into()));
    }
    let (d, h) = (layer_sizes[0], layer_sizes[1]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden_bound = 1.0 / (d as f64).sqrt();
    let output_bound = 1.0 / (h as f64).sqrt();
    let hidden_weights = DMatrix::from_fn(h, d, |_, _| rng.random_range(-hidden_bound..=hidden_bound));
    let hidden_biases = DVector::from_fn(h, |_, _| rng.random_range(-hidden_bound..=hidden_bound));
    let output_weights = DVector::from_fn(h, |_, _| rng.random_range(-output_bound..=output_bound));
    let output_bias = rng.random_range(-output_bound..=output_bound);
    Ok(MlpModel {
        layer_sizes: layer_sizes.to_vec(),
        hidden_weights,
        hidden_biases,
        output_weights,
        output_bias,
    })
}

/// `w_out · sigmoid(W_h x + b_h) + b_out`.
pub fn forward(model: &MlpModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.n_inputs() {
        return Err(Error::DimensionMismatch { expected: model.n_inputs(), actual: x.len() });
    }
    Ok(model.eval(x))
}

/// samples × parameters matrix of `∂ŷ(x_s)/∂θ_p`, by backpropagation.
pub fn jacobian<M: LeastSquaresModel>(model: &M, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != model.n_inputs() {
        return Err(Error::DimensionMismatch { expected: model.n_inputs(), actual: x.ncols() });
    }
    let p = model.n_params();
    let mut jac = DMatrix::zeros(x.nrows(), p);
    let mut row_buf = vec![0.0; p];
    let mut input = vec![0.0; x.ncols()];
    for s in 0..x.nrows() {
        for (j, v) in input.iter_mut().enumerate() {
            *v = x[(s, j)];
        }
        model.gradient_row(&input, &mut row_buf);
        for (c, v) in row_buf.iter().enumerate() {
            jac[(s, c)] = *v;
        }
    }
    Ok(jac)
}

fn residuals<M: LeastSquaresModel>(model: &M, x: &DMatrix<f64>, y: &[f64]) -> DVector<f64> {
    let mut input = vec![0.0; x.ncols()];
    DVector::from_fn(x.nrows(), |s, _| {
        for (j, v) in input.iter_mut().enumerate() {
            *v = x[(s, j)];
        }
        y[s] - model.eval(&input)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub max_epochs: usize,
    pub grad_tol: f64,
    /// Seeds the weight initialisation.
    pub seed: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self { lambda_init: 1e-3, lambda_up: 10.0, lambda_down: 10.0, max_epochs: 37, grad_tol: 1e-8, seed: 0 }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_init > 0.0) || !(self.lambda_up > 1.0) || !(self.lambda_down > 1.0) {
            return Err(Error::InvalidConfig("LM needs lambda_init > 0 and factors > 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be at least 1".into()));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::InvalidConfig("grad_tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// Solves `(JᵀJ + λ·diag(JᵀJ))·δ = Jᵀr`. `λ = 0` is the Gauss–Newton step.
pub fn lm_direction(jac: &DMatrix<f64>, r: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let mut a = jac.tr_mul(jac);
    let g = jac.tr_mul(r);
    for i in 0..a.nrows() {
        a[(i, i)] += lambda * a[(i, i)].max(DIAG_FLOOR);
    }
    let solved = match a.clone().cholesky() {
        Some(chol) => Some(chol.solve(&g)),
        None => a.lu().solve(&g),
    };
    solved
        .filter(|d| d.iter().all(|v| v.is_finite()))
        .ok_or(Error::SolveFailed { lambda })
}

/// Outcome of one damped step.
#[derive(Debug, Clone, PartialEq)]
pub struct LmStep<M> {
    /// Updated model if accepted, otherwise the input model.
    pub model: M,
    /// Sum of squared errors after the accept/reject decision.
    pub sse: f64,
    pub lambda: f64,
    pub accepted: bool,
    pub delta: DVector<f64>,
}

fn step_from<M: LeastSquaresModel>(
    model: &M,
    jac: &DMatrix<f64>,
    r: &DVector<f64>,
    x: &DMatrix<f64>,
    y: &[f64],
    lambda: f64,
    config: &LmConfig,
) -> Result<LmStep<M>> {
    let sse = r.norm_squared();
    let delta = lm_direction(jac, r, lambda)?;
    let mut candidate = model.clone();
    candidate.set_params(&(model.params() + &delta));
    let candidate_sse = residuals(&candidate, x, y).norm_squared();
    Ok(if candidate_sse < sse {
        LmStep { model: candidate, sse: candidate_sse, lambda: lambda / config.lambda_down, accepted: true, delta }
    } else {
        LmStep { model: model.clone(), sse, lambda: lambda * config.lambda_up, accepted: false, delta }
    })
}

/// One Levenberg–Marquardt step with Marquardt's diagonal scaling.
///
/// A step that lowers the SSE is accepted and λ shrinks by `lambda_down`;
/// otherwise the model is kept and λ grows by `lambda_up`.
pub fn lm_step<M: LeastSquaresModel>(
    model: &M,
    x: &DMatrix<f64>,
    y: &[f64],
    lambda: f64,
    config: &LmConfig,
) -> Result<LmStep<M>> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("lambda must be non-negative, got {lambda}")));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), actual: y.len() });
    }
    let jac = jacobian(model, x)?;
    let r = residuals(model, x, y);
    step_from(model, &jac, &r, x, y, lambda, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mse: f64,
    pub lambda: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub initial_mse: f64,
    pub epochs: Vec<EpochRecord>,
    /// Training stopped because the gradient norm fell below `grad_tol`.
    pub converged: bool,
}

impl TrainHistory {
    pub fn final_mse(&self) -> f64 {
        self.epochs.last().map_or(self.initial_mse, |e| e.mse)
    }

    /// `epoch,mse,lambda,accepted` with one row per epoch.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mse,lambda,accepted\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{},{}\n", e.epoch, e.mse, e.lambda, e.accepted));
        }
        out
    }
}

/// Repeats [`lm_step`] for up to `max_epochs`, stopping early once
/// `‖Jᵀr‖ < grad_tol`. A failed linear solve counts as a rejected epoch.
pub fn train_lm<M: LeastSquaresModel>(
    model: &M,
    x: &DMatrix<f64>,
    y: &[f64],
    config: &LmConfig,
) -> Result<(M, TrainHistory)> {
    config.validate()?;
    if x.nrows() == 0 {
        return Err(Error::EmptyInput("LM training set is empty".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), actual: y.len() });
    }
    if x.ncols() != model.n_inputs() {
        return Err(Error::DimensionMismatch { expected: model.n_inputs(), actual: x.ncols() });
    }
    let n = x.nrows() as f64;
    let mut current = model.clone();
    let mut lambda = config.lambda_init;
    let initial_mse = residuals(&current, x, y).norm_squared() / n;
    let mut epochs = Vec::with_capacity(config.max_epochs);
    let mut converged = false;
    let mut sse = initial_mse * n;

    for epoch in 1..=config.max_epochs {
        let jac = jacobian(&current, x)?;
        let r = residuals(&current, x, y);
        if jac.tr_mul(&r).norm() < config.grad_tol {
            converged = true;
            break;
        }
        let accepted = match step_from(&current, &jac, &r, x, y, lambda, config) {
            Ok(step) => {
                current = step.model;
                sse = step.sse;
                lambda = step.lambda;
                step.accepted
            }
            Err(Error::SolveFailed { .. }) => {
                lambda *= config.lambda_up;
                false
            }
            Err(other) => return Err(other),
        };
        epochs.push(EpochRecord { epoch, mse: sse / n, lambda, accepted });
        if !lambda.is_finite() {
            break;
        }
    }
    Ok((current, TrainHistory { initial_mse, epochs, converged }))
}

/// [`train_lm`] on a supervised set, taking features as given.
pub fn train_lm_set(model: &MlpModel, train: &SupervisedSet, config: &LmConfig) -> Result<(MlpModel, TrainHistory)> {
    if train.is_empty() {
        return Err(Error::EmptyInput("LM training set is empty".into()));
    }
    let y: Vec<f64> = train.rows.iter().map(|r| r.target).collect();
    train_lm(model, &train.feature_matrix(), &y, config)
}
