//! Independent component analysis for variable screening.
//!
//! Data are whitened through the eigendecomposition of their covariance, then
//! a deflationary fixed-point iteration with a `tanh` contrast extracts one
//! maximally non-Gaussian direction at a time. Variables are ranked by their
//! largest absolute loading in the composed (rotation · whitening) unmixing.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::PAPER_SEVEN;
use crate::error::{Error, Result};

/// Relative eigenvalue floor below which the covariance is rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Centering and whitening matrices; `whitening · dewhitening = I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteningTransform {
    pub means: Vec<f64>,
    /// features × features, maps centered data to unit covariance.
    pub whitening: DMatrix<f64>,
    pub dewhitening: DMatrix<f64>,
}

impl WhiteningTransform {
    pub fn apply(&self, data: &DMatrix<f64>) -> DMatrix<f64> {
        let mut centered = data.clone();
        for (j, mut col) in centered.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.means[j]);
        }
        centered * self.whitening.transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Whitened {
    /// samples × features with identity (population) covariance.
    pub data: DMatrix<f64>,
    pub transform: WhiteningTransform,
}

impl Whitened {
    /// Keeps the `m` leading principal directions (largest variance first),
    /// discarding the rest. `m` must not exceed the feature count.
    pub fn leading(&self, m: usize) -> Whitened {
        let d = self.data.ncols();
        assert!(m <= d, "cannot keep {m} of {d} whitened directions");
        let transform = WhiteningTransform {
            means: self.transform.means.clone(),
            whitening: self.transform.whitening.rows(0, m).into_owned(),
            dewhitening: self.transform.dewhitening.columns(0, m).into_owned(),
        };
        Whitened { data: self.data.columns(0, m).into_owned(), transform }
    }
}

/// Population covariance (1/n) of the columns of `data`.
pub fn covariance(data: &DMatrix<f64>) -> DMatrix<f64> {
    let n = data.nrows() as f64;
    let mut centered = data.clone();
    for mut col in centered.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    centered.tr_mul(&centered) / n
}

/// Zero-mean, identity-covariance transform of a samples × features matrix.
pub fn whiten(data: &DMatrix<f64>) -> Result<Whitened> {
    let (n, d) = data.shape();
    if d == 0 || n <= d {
        return Err(Error::EmptyInput(format!("whitening needs more samples than features ({n} × {d})")));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("non-finite value in ICA input".into()));
    }
    let cov = covariance(data);
    let scale = cov.diagonal().max().max(f64::MIN_POSITIVE);
    let constant: Vec<usize> = (0..d).filter(|&j| cov[(j, j)] <= RANK_TOL * scale).collect();
    if !constant.is_empty() {
        return Err(Error::RankDeficient { columns: constant });
    }

    let eigen = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let top = eigen.eigenvalues[order[0]];
    let null: Vec<usize> = order.iter().copied().filter(|&i| eigen.eigenvalues[i] <= RANK_TOL * top).collect();
    if !null.is_empty() {
        let columns: Vec<usize> = (0..d)
            .filter(|&j| null.iter().any(|&i| eigen.eigenvectors[(j, i)].abs() > 0.1))
            .collect();
        return Err(Error::RankDeficient { columns });
    }

    let mut whitening = DMatrix::zeros(d, d);
    let mut dewhitening = DMatrix::zeros(d, d);
    for (row, &i) in order.iter().enumerate() {
        let vector = eigen.eigenvectors.column(i);
        let root = eigen.eigenvalues[i].sqrt();
        // Fix the eigenvector sign so the largest entry is positive.
        let pivot = vector.iamax();
        let sign = vector[pivot].signum();
        for j in 0..d {
            whitening[(row, j)] = sign * vector[j] / root;
            dewhitening[(j, row)] = sign * vector[j] * root;
        }
    }
    let means = data.column_iter().map(|c| c.mean()).collect();
    let transform = WhiteningTransform { means, whitening, dewhitening };
    Ok(Whitened { data: transform.apply(data), transform })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcaResult {
    /// Orthonormal rows in whitened space (components × whitened dimensions).
    pub rotation: DMatrix<f64>,
    /// `rotation · whitening`: maps centered raw data to components.
    pub unmixing: DMatrix<f64>,
    /// `dewhitening · rotationᵀ` (features × components).
    pub mixing_estimate: DMatrix<f64>,
    /// samples × components.
    pub components: DMatrix<f64>,
    pub whitening: WhiteningTransform,
    /// Largest per-component iteration count.
    pub n_iterations: usize,
    pub component_iterations: Vec<usize>,
    pub converged: bool,
}

impl IcaResult {
    pub fn n_components(&self) -> usize {
        self.rotation.nrows()
    }
}

fn orthogonalize(w: &mut DVector<f64>, previous: &[DVector<f64>]) {
    // Two Gram–Schmidt sweeps keep rows orthogonal to machine precision.
    for _ in 0..2 {
        for p in previous {
            let proj = w.dot(p);
            w.axpy(-proj, p, 1.0);
        }
    }
}

/// Deflationary fixed-point ICA with the `tanh` (log-cosh) contrast.
///
/// Each component starts from a seeded Gaussian vector and iterates
/// `w ← E[z·g(wᵀz)] − E[g′(wᵀz)]·w`, followed by Gram–Schmidt against earlier
/// components and renormalisation, until `1 − |⟨w_new, w_old⟩| < tol`.
/// Non-convergence is reported through [`IcaResult::converged`], not an error.
pub fn fastica(
    whitened: &Whitened,
    n_components: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<IcaResult> {
    let z = &whitened.data;
    let (n, d) = z.shape();
    if n_components == 0 || n_components > d {
        return Err(Error::InvalidConfig(format!(
            "n_components must be in 1..={d}, got {n_components}"
        )));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidConfig("tol must be positive and max_iter at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<DVector<f64>> = Vec::with_capacity(n_components);
    let mut iterations = Vec::with_capacity(n_components);
    let mut converged = true;

    for _ in 0..n_components {
        let mut w = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        orthogonalize(&mut w, &rows);
        w.normalize_mut();
        let mut done = false;
        let mut iter = 0;
        while iter < max_iter {
            iter += 1;
            let projected = z * &w;
            let g = projected.map(f64::tanh);
            let g_prime_mean = g.iter().map(|v| 1.0 - v * v).sum::<f64>() / n as f64;
            let mut next = z.tr_mul(&g) / n as f64 - &w * g_prime_mean;
            orthogonalize(&mut next, &rows);
            let norm = next.norm();
            if norm == 0.0 || !norm.is_finite() {
                break;
            }
            next /= norm;
            let change = 1.0 - next.dot(&w).abs();
            w = next;
            if change < tol {
                done = true;
                break;
            }
        }
        converged &= done;
        iterations.push(iter);
        rows.push(w);
    }

    let rotation = DMatrix::from_fn(n_components, d, |i, j| rows[i][j]);
    let unmixing = &rotation * &whitened.transform.whitening;
    let mixing_estimate = &whitened.transform.dewhitening * rotation.transpose();
    let components = z * rotation.transpose();
    Ok(IcaResult {
        rotation,
        unmixing,
        mixing_estimate,
        components,
        whitening: whitened.transform.clone(),
        n_iterations: iterations.iter().copied().max().unwrap_or(0),
        component_iterations: iterations,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcaConfig {
    /// Defaults to `min(features, samples − 1, max_components)`.
    pub n_components: Option<usize>,
    pub max_components: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub k_min: usize,
    pub k_max: usize,
}

impl Default for IcaConfig {
    fn default() -> Self {
        Self { n_components: None, max_components: 10, tol: 1e-6, max_iter: 500, k_min: 3, k_max: 7 }
    }
}

/// Whitens `data`, keeps the leading principal directions (one per requested
/// component) and runs [`fastica`] in that subspace.
pub fn run_ica(data: &DMatrix<f64>, config: &IcaConfig, seed: u64) -> Result<IcaResult> {
    let whitened = whiten(data)?;
    let (n, d) = data.shape();
    let m = config.n_components.unwrap_or_else(|| d.min(n - 1).min(config.max_components));
    if m == 0 || m > d {
        return Err(Error::InvalidConfig(format!("n_components must be in 1..={d}, got {m}")));
    }
    fastica(&whitened.leading(m), m, seed, config.tol, config.max_iter)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSubset {
    pub selected_names: Vec<String>,
    /// Loading score of each selected name, non-increasing.
    pub scores: Vec<f64>,
}

impl VariableSubset {
    /// The seven variables retained by the original study, without running
    /// ICA. Every score is 1.
    pub fn paper_seven() -> Self {
        Self {
            selected_names: PAPER_SEVEN.iter().map(|s| s.to_string()).collect(),
            scores: vec![1.0; PAPER_SEVEN.len()],
        }
    }
}

/// Ranks variables by their largest absolute loading across components and
/// keeps the top `clamp(components, k_min, k_max)`. Equal scores keep input
/// order.
pub fn select_variables(
    result: &IcaResult,
    feature_names: &[String],
    k_min: usize,
    k_max: usize,
) -> Result<VariableSubset> {
    let d = result.unmixing.ncols();
    if feature_names.len() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: feature_names.len() });
    }
    if k_min > d || k_min > k_max || k_max == 0 {
        return Err(Error::InvalidConfig(format!(
            "cannot select between {k_min} and {k_max} of {d} variables"
        )));
    }
    let scores: Vec<f64> = (0..d)
        .map(|j| result.unmixing.column(j).iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let k = result.n_components().clamp(k_min, k_max).min(d);
    order.truncate(k);
    Ok(VariableSubset {
        selected_names: order.iter().map(|&j| feature_names[j].clone()).collect(),
        scores: order.iter().map(|&j| scores[j]).collect(),
    })
}

/// Amari distance of a square gain matrix `P = W_est · A_true` from a scaled
/// permutation, normalised to `[0, 1]`; 0 means perfect separation.
pub fn amari_index(p: &DMatrix<f64>) -> f64 {
    let m = p.nrows();
    assert_eq!(m, p.ncols(), "Amari index needs a square gain matrix");
    if m < 2 {
        return 0.0;
    }
    let a = p.map(f64::abs);
    let rows: f64 = a.row_iter().map(|r| r.sum() / r.max() - 1.0).sum();
    let cols: f64 = a.column_iter().map(|c| c.sum() / c.max() - 1.0).sum();
    (rows + cols) / (2.0 * m as f64 * (m as f64 - 1.0))
}
