//! The orthotropic strain-energy library: eight isotropic terms in `I1`, `I2` and six fiber terms
//! in `I4w` and the two offset-fiber invariants.
//!
//! Each term is evaluated at unit external weight. Its stress contributions `f = ∂ψ̂/∂λ1` and
//! `g = ∂ψ̂/∂λ2` come from the chain rule over the incompressibility-reduced invariant
//! derivatives, so the pressure term is already included.
//!
//! Exponential activations use the `(exp(b·y) − 1)/b` normalization with the internal weight
//! `b = w*`, which has the finite limit `y` as `b → 0`. The linear-exponential rows subtract the
//! linear part so their slope vanishes in the undeformed fiber.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{invariants, DeformationState, InvariantSet, Orientation};

pub const N_TERMS: usize = 14;

/// Largest exponent accepted before a term is reported as overflowing.
pub const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Invariant {
    I1,
    I2,
    I4w,
    /// Both offset fibers, with shared weights and a ½ prefactor on each.
    I4s,
}

impl Invariant {
    /// Value of the invariant in the undeformed state.
    pub fn reference(self) -> f64 {
        match self {
            Invariant::I1 | Invariant::I2 => 3.0,
            Invariant::I4w | Invariant::I4s => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Power {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Exponential,
    LinearExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TermSpec {
    /// 1-based position in the library.
    pub index: usize,
    pub invariant: Invariant,
    pub power: Power,
    pub activation: Activation,
}

const fn term(index: usize, invariant: Invariant, power: Power, activation: Activation) -> TermSpec {
    TermSpec {
        index,
        invariant,
        power,
        activation,
    }
}

use Activation::*;
use Invariant::*;
use Power::*;

pub const LIBRARY: [TermSpec; N_TERMS] = [
    term(1, I1, One, Identity),
    term(2, I1, One, Exponential),
    term(3, I1, Two, Identity),
    term(4, I1, Two, Exponential),
    term(5, I2, One, Identity),
    term(6, I2, One, Exponential),
    term(7, I2, Two, Identity),
    term(8, I2, Two, Exponential),
    term(9, I4w, One, LinearExponential),
    term(10, I4w, Two, Identity),
    term(11, I4w, Two, Exponential),
    term(12, I4s, One, LinearExponential),
    term(13, I4s, Two, Identity),
    term(14, I4s, Two, Exponential),
];

const NAMES: [&str; N_TERMS] = [
    "I1",
    "I1_exp",
    "I1_sq",
    "I1_sq_exp",
    "I2",
    "I2_exp",
    "I2_sq",
    "I2_sq_exp",
    "I4w_linexp",
    "I4w_sq",
    "I4w_sq_exp",
    "I4s_linexp",
    "I4s_sq",
    "I4s_sq_exp",
];

impl TermSpec {
    /// Stable serialized name, e.g. `"I1_exp"` or `"I4w_sq_exp"`.
    pub fn name(&self) -> &'static str {
        NAMES[self.index - 1]
    }

    pub fn from_name(name: &str) -> Option<TermSpec> {
        NAMES.iter().position(|n| *n == name).map(|i| LIBRARY[i])
    }

    /// Identity terms only see the product `w·w*`, so their internal weight is not trained.
    pub fn has_internal_weight(&self) -> bool {
        self.activation != Identity
    }
}

/// One term evaluated at unit external weight.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TermEval {
    pub psi: f64,
    pub f: f64,
    pub g: f64,
    pub dpsi_di1: f64,
    pub dpsi_di2: f64,
    pub df_dwstar: f64,
    pub dg_dwstar: f64,
}

/// Energy of a single-invariant term, its slope in the invariant, and the sensitivity of that
/// slope to the internal weight.
#[derive(Debug, Clone, Copy)]
struct Kernel {
    psi: f64,
    slope: f64,
    slope_dw: f64,
}

fn kernel(spec: &TermSpec, invariant: f64, wstar: f64) -> Result<Kernel> {
    let x = invariant - spec.invariant.reference();
    let (y, dy) = match spec.power {
        One => (x, 1.0),
        Two => (x * x, 2.0 * x),
    };
    let b = wstar;
    let arg = b * y;
    if spec.activation != Identity && arg > MAX_EXPONENT {
        return Err(Error::Overflow {
            term: spec.name(),
            argument: arg,
        });
    }
    let k = match spec.activation {
        Identity => Kernel {
            psi: b * y,
            slope: b * dy,
            slope_dw: dy,
        },
        Exponential => {
            let e = arg.exp();
            let psi = if b < 1e-8 {
                y * (1.0 + 0.5 * arg)
            } else {
                arg.exp_m1() / b
            };
            Kernel {
                psi,
                slope: e * dy,
                slope_dw: y * e * dy,
            }
        }
        LinearExponential => {
            let e = arg.exp();
            let psi = if arg.abs() < 1e-5 {
                0.5 * b * y * y * (1.0 + arg / 3.0)
            } else {
                (arg.exp_m1() - arg) / b
            };
            Kernel {
                psi,
                slope: arg.exp_m1() * dy,
                slope_dw: y * e * dy,
            }
        }
    };
    Ok(k)
}

/// Energy and slope of one term as a function of a single invariant value.
///
/// For the offset-fiber terms this is the energy of one fiber family without the ½ prefactor.
pub fn scalar_energy(spec: &TermSpec, invariant: f64, wstar: f64) -> Result<(f64, f64)> {
    check_wstar(spec, wstar)?;
    let k = kernel(spec, invariant, wstar)?;
    Ok((k.psi, k.slope))
}

fn check_wstar(spec: &TermSpec, wstar: f64) -> Result<()> {
    if !(wstar >= 0.0) || !wstar.is_finite() {
        return Err(Error::Constraint(format!(
            "internal weight of term {} must be non-negative and finite, got {wstar}",
            spec.name()
        )));
    }
    Ok(())
}

pub fn eval_term(spec: &TermSpec, inv: &InvariantSet, wstar: f64) -> Result<TermEval> {
    check_wstar(spec, wstar)?;

    let mut out = TermEval::default();
    let mut accumulate = |value: f64, d: [f64; 2], weight: f64| -> Result<Kernel> {
        let k = kernel(spec, value, wstar)?;
        out.psi += weight * k.psi;
        out.f += weight * k.slope * d[0];
        out.g += weight * k.slope * d[1];
        out.df_dwstar += weight * k.slope_dw * d[0];
        out.dg_dwstar += weight * k.slope_dw * d[1];
        Ok(k)
    };

    match spec.invariant {
        I1 => {
            let k = accumulate(inv.i1, inv.d_i1, 1.0)?;
            out.dpsi_di1 = k.slope;
        }
        I2 => {
            let k = accumulate(inv.i2, inv.d_i2, 1.0)?;
            out.dpsi_di2 = k.slope;
        }
        I4w => {
            accumulate(inv.i4w, inv.d_i4w, 1.0)?;
        }
        I4s => {
            accumulate(inv.i4s_i, inv.d_i4s_i, 0.5)?;
            accumulate(inv.i4s_ii, inv.d_i4s_ii, 0.5)?;
        }
    }
    Ok(out)
}

pub fn eval_library(inv: &InvariantSet, wstar: &[f64; N_TERMS]) -> Result<[TermEval; N_TERMS]> {
    let mut out = [TermEval::default(); N_TERMS];
    for (i, spec) in LIBRARY.iter().enumerate() {
        out[i] = eval_term(spec, inv, wstar[i])?;
    }
    Ok(out)
}

// 5-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];
const QUADRATURE_PANELS: usize = 32;

/// Integral of the term's equibiaxial `P11` contribution (unit external weight, 0/90 mount) over
/// `λ ∈ [1, lambda_max]`, together with its derivative in the internal weight.
pub fn term_stress_integral_with_slope(
    spec: &TermSpec,
    wstar: f64,
    lambda_max: f64,
) -> Result<(f64, f64)> {
    if !(lambda_max > 1.0) || !lambda_max.is_finite() {
        return Err(Error::Domain(format!(
            "stress integral needs lambda_max > 1, got {lambda_max}"
        )));
    }
    check_wstar(spec, wstar)?;

    let h = (lambda_max - 1.0) / QUADRATURE_PANELS as f64;
    let mut total = 0.0;
    let mut slope = 0.0;
    for p in 0..QUADRATURE_PANELS {
        let mid = 1.0 + (p as f64 + 0.5) * h;
        for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let lambda = mid + 0.5 * h * node;
            let state = DeformationState::new(lambda, lambda, Orientation::Aligned0_90)?;
            let e = eval_term(spec, &invariants(&state), wstar)?;
            total += weight * e.f;
            slope += weight * e.df_dwstar;
        }
    }
    Ok((0.5 * h * total, 0.5 * h * slope))
}

pub fn term_stress_integral(spec: &TermSpec, wstar: f64, lambda_max: f64) -> Result<f64> {
    term_stress_integral_with_slope(spec, wstar, lambda_max).map(|(s, _)| s)
}
