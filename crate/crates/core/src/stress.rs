//! Closed-form stress distributions for a library whose external weights are jointly Gaussian.
//!
//! The normalized weights `ŵ_i = w_i / w_μ,i` follow `N(1, Σ)`, so for the per-term mean stress
//! vector `P̂` (entries `w_μ,i f_i`) the stress is `P̂ · ŵ` with mean `Σ P̂_i` and variance
//! `P̂ᵀ Σ P̂`.
//!
//! `Σ = D R D` where `D = diag(d)` holds the normalized standard deviations (`d_i < 1`) and the
//! correlation `R = L̃ L̃ᵀ` comes from lower-triangular rows normalized to unit length. The
//! variance is evaluated in factored form as `|L̃ᵀ (d ⊙ P̂)|²`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::energy::{eval_library, TermEval, N_TERMS};
use crate::error::{Error, Result};
use crate::kinematics::{invariants, DeformationState, InvariantSet};

pub type Matrix = [[f64; N_TERMS]; N_TERMS];

pub fn identity_matrix() -> Matrix {
    let mut m = [[0.0; N_TERMS]; N_TERMS];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CovarianceMode {
    #[serde(rename = "det")]
    Deterministic,
    #[serde(rename = "indep")]
    IndependentDiag,
    #[serde(rename = "corr")]
    CorrelatedFull,
}

impl CovarianceMode {
    pub fn tag(self) -> &'static str {
        match self {
            CovarianceMode::Deterministic => "det",
            CovarianceMode::IndependentDiag => "indep",
            CovarianceMode::CorrelatedFull => "corr",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "det" | "deterministic" => Some(CovarianceMode::Deterministic),
            "indep" | "independent" => Some(CovarianceMode::IndependentDiag),
            "corr" | "correlated" => Some(CovarianceMode::CorrelatedFull),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceParam {
    pub mode: CovarianceMode,
    /// Normalized standard deviations, each in `[0, 1)`.
    pub d: [f64; N_TERMS],
    /// Raw lower-triangular rows; only read in `CorrelatedFull` mode. Entries above the diagonal
    /// are ignored.
    pub chol_rows: Matrix,
}

impl CovarianceParam {
    pub fn deterministic() -> Self {
        Self {
            mode: CovarianceMode::Deterministic,
            d: [0.0; N_TERMS],
            chol_rows: identity_matrix(),
        }
    }

    pub fn independent(d: [f64; N_TERMS]) -> Self {
        Self {
            mode: CovarianceMode::IndependentDiag,
            d,
            chol_rows: identity_matrix(),
        }
    }

    pub fn correlated(d: [f64; N_TERMS], chol_rows: Matrix) -> Self {
        Self {
            mode: CovarianceMode::CorrelatedFull,
            d,
            chol_rows,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == CovarianceMode::Deterministic {
            return Ok(());
        }
        for (i, &d) in self.d.iter().enumerate() {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::Constraint(format!(
                    "normalized standard deviation d[{i}] = {d} outside [0, 1)"
                )));
            }
        }
        if self.mode == CovarianceMode::CorrelatedFull
            && self.chol_rows.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(Error::Constraint("non-finite Cholesky row entry".into()));
        }
        Ok(())
    }

    /// Lower-triangular factor of the correlation matrix with unit-length rows.
    ///
    /// A row that is entirely zero is replaced by the matching unit vector.
    pub fn normalized_rows(&self) -> Matrix {
        let mut out = [[0.0; N_TERMS]; N_TERMS];
        for k in 0..N_TERMS {
            let row = &self.chol_rows[k][..=k];
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for j in 0..=k {
                    out[k][j] = row[j] / norm;
                }
            } else {
                out[k][k] = 1.0;
            }
        }
        out
    }

    /// Correlation matrix `R` (unit diagonal). Identity outside `CorrelatedFull` mode.
    pub fn correlation(&self) -> Matrix {
        if self.mode != CovarianceMode::CorrelatedFull {
            return identity_matrix();
        }
        let l = self.normalized_rows();
        let mut r = [[0.0; N_TERMS]; N_TERMS];
        for i in 0..N_TERMS {
            for j in 0..=i {
                let v: f64 = (0..=j).map(|k| l[i][k] * l[j][k]).sum();
                r[i][j] = v;
                r[j][i] = v;
            }
            r[i][i] = 1.0;
        }
        r
    }

    pub fn sigma_diagonal(&self, i: usize) -> f64 {
        match self.mode {
            CovarianceMode::Deterministic => 0.0,
            _ => self.d[i] * self.d[i],
        }
    }
}

pub fn realize_sigma(cov: &CovarianceParam) -> Matrix {
    let mut sigma = [[0.0; N_TERMS]; N_TERMS];
    match cov.mode {
        CovarianceMode::Deterministic => {}
        CovarianceMode::IndependentDiag => {
            for i in 0..N_TERMS {
                sigma[i][i] = cov.d[i] * cov.d[i];
            }
        }
        CovarianceMode::CorrelatedFull => {
            let r = cov.correlation();
            for i in 0..N_TERMS {
                for j in 0..N_TERMS {
                    sigma[i][j] = cov.d[i] * r[i][j] * cov.d[j];
                }
            }
        }
    }
    sigma
}

/// `pᵀ Σ p` for a dense covariance.
pub fn quadratic_form(p: &[f64], sigma: &[Vec<f64>]) -> f64 {
    p.iter()
        .enumerate()
        .map(|(i, pi)| pi * sigma[i].iter().zip(p).map(|(s, pj)| s * pj).sum::<f64>())
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    /// Mean external weights (kPa).
    pub w_mu: [f64; N_TERMS],
    /// Internal weights.
    pub w_star: [f64; N_TERMS],
    pub covariance: CovarianceParam,
}

impl GaussianModel {
    pub fn validate(&self) -> Result<()> {
        for i in 0..N_TERMS {
            if !(self.w_mu[i] >= 0.0) || !self.w_mu[i].is_finite() {
                return Err(Error::Constraint(format!(
                    "w_mu[{i}] = {} must be non-negative",
                    self.w_mu[i]
                )));
            }
            if !(self.w_star[i] >= 0.0) || !self.w_star[i].is_finite() {
                return Err(Error::Constraint(format!(
                    "w_star[{i}] = {} must be non-negative",
                    self.w_star[i]
                )));
            }
        }
        self.covariance.validate()
    }

    pub fn mode(&self) -> CovarianceMode {
        self.covariance.mode
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StressDistribution {
    pub mu11: f64,
    pub mu22: f64,
    pub var11: f64,
    pub var22: f64,
}

impl StressDistribution {
    pub fn std11(&self) -> f64 {
        self.var11.sqrt()
    }

    pub fn std22(&self) -> f64 {
        self.var22.sqrt()
    }
}

/// Variance `|L̃ᵀ (d ⊙ p)|²` of the stress with per-term mean contributions `p`.
///
/// Returns the variance together with `v = L̃ᵀ b` and `u = L̃ v`, which the objective reuses for
/// its gradients. `rows` is ignored unless the mode is `CorrelatedFull`.
pub(crate) fn factored_variance(
    mode: CovarianceMode,
    d: &[f64; N_TERMS],
    rows: &Matrix,
    p: &[f64; N_TERMS],
) -> (f64, [f64; N_TERMS], [f64; N_TERMS]) {
    let mut b = [0.0; N_TERMS];
    for i in 0..N_TERMS {
        b[i] = d[i] * p[i];
    }
    match mode {
        CovarianceMode::Deterministic => (0.0, [0.0; N_TERMS], [0.0; N_TERMS]),
        CovarianceMode::IndependentDiag => {
            let var = b.iter().map(|x| x * x).sum();
            (var, b, b)
        }
        CovarianceMode::CorrelatedFull => {
            let mut v = [0.0; N_TERMS];
            for (k, bk) in b.iter().enumerate() {
                if *bk != 0.0 {
                    for j in 0..=k {
                        v[j] += rows[k][j] * bk;
                    }
                }
            }
            let mut u = [0.0; N_TERMS];
            for k in 0..N_TERMS {
                u[k] = (0..=k).map(|j| rows[k][j] * v[j]).sum();
            }
            (v.iter().map(|x| x * x).sum(), v, u)
        }
    }
}

/// Per-term mean stress vectors `P̂11`, `P̂22`.
pub fn mean_contributions(
    model: &GaussianModel,
    evals: &[TermEval; N_TERMS],
) -> ([f64; N_TERMS], [f64; N_TERMS]) {
    let mut p11 = [0.0; N_TERMS];
    let mut p22 = [0.0; N_TERMS];
    for i in 0..N_TERMS {
        p11[i] = model.w_mu[i] * evals[i].f;
        p22[i] = model.w_mu[i] * evals[i].g;
    }
    (p11, p22)
}

pub fn predict_from_invariants(
    model: &GaussianModel,
    inv: &InvariantSet,
) -> Result<StressDistribution> {
    let evals = eval_library(inv, &model.w_star)?;
    let (p11, p22) = mean_contributions(model, &evals);
    let rows = match model.mode() {
        CovarianceMode::CorrelatedFull => model.covariance.normalized_rows(),
        _ => identity_matrix(),
    };
    let d = &model.covariance.d;
    Ok(StressDistribution {
        mu11: p11.iter().sum(),
        mu22: p22.iter().sum(),
        var11: factored_variance(model.mode(), d, &rows, &p11).0,
        var22: factored_variance(model.mode(), d, &rows, &p22).0,
    })
}

pub fn predict(model: &GaussianModel, state: &DeformationState) -> Result<StressDistribution> {
    predict_from_invariants(model, &invariants(state))
}

/// Draws `n` weight vectors `w = w_μ ⊙ (1 + D L̃ z)` with `z` standard normal.
pub fn sample_weights(model: &GaussianModel, n: usize, seed: u64) -> Vec<[f64; N_TERMS]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_weights_with(model, n, &mut rng)
}

pub(crate) fn sample_weights_with(
    model: &GaussianModel,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<[f64; N_TERMS]> {
    let cov = &model.covariance;
    if cov.mode == CovarianceMode::Deterministic {
        return vec![model.w_mu; n];
    }
    let rows = match cov.mode {
        CovarianceMode::CorrelatedFull => cov.normalized_rows(),
        _ => identity_matrix(),
    };
    (0..n)
        .map(|_| {
            let z: [f64; N_TERMS] = std::array::from_fn(|_| StandardNormal.sample(&mut *rng));
            std::array::from_fn(|i| {
                let lz: f64 = (0..=i).map(|j| rows[i][j] * z[j]).sum();
                model.w_mu[i] * (1.0 + cov.d[i] * lz)
            })
        })
        .collect()
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Probability that the external weight of term `i` is negative: `Φ(−1/√Σ_ii)`.
pub fn prob_negative_weight(model: &GaussianModel, i: usize) -> f64 {
    let s = model.covariance.sigma_diagonal(i);
    if s <= 0.0 {
        return 0.0;
    }
    standard_normal_cdf(-1.0 / s.sqrt())
}
