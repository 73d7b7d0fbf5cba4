//! Gaussian negative log likelihood, the extra-NLL diagnostic, the `L0.5` sparsity penalty, and
//! analytic gradients of their sum.
//!
//! The NLL is reported per observation (nats/point). Observations that share a curve and the exact
//! same stretch state are pooled into one [`Observation`] holding their count, mean and sum of
//! squared deviations; the pooled likelihood is algebraically identical to the per-point sum.

use std::collections::{BTreeMap, HashMap};

use crate::data::{BiaxialDataset, Curve, Direction, Split};
use crate::energy::{eval_library, term_stress_integral_with_slope, LIBRARY, N_TERMS};
use crate::error::{Error, Result};
use crate::kinematics::{invariants, InvariantSet};
use crate::stress::{factored_variance, identity_matrix, CovarianceMode, GaussianModel, Matrix};

/// Lower bound on the predictive variance (kPa²).
pub const VARIANCE_FLOOR: f64 = 1e-6;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Stress observations at one stretch state of one curve.
#[derive(Debug, Clone)]
pub struct Observation {
    /// Index into [`ObservationSet::curve_ids`].
    pub curve: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub inv: InvariantSet,
    pub direction: Direction,
    pub count: f64,
    pub mean: f64,
    /// Sum of squared deviations from `mean`.
    pub sq_dev: f64,
}

#[derive(Debug, Clone)]
pub struct ObservationSet {
    pub observations: Vec<Observation>,
    pub curve_ids: Vec<String>,
}

impl ObservationSet {
    pub fn from_dataset(data: &BiaxialDataset, split: Split) -> Result<Self> {
        Self::from_curves(data.curves_in(split))
    }

    pub fn from_curves<'a>(curves: impl IntoIterator<Item = &'a Curve>) -> Result<Self> {
        let mut observations = Vec::new();
        let mut curve_ids = Vec::new();
        for curve in curves {
            let ci = curve_ids.len();
            curve_ids.push(curve.id.clone());
            let mut slots: HashMap<(u64, u64), usize> = HashMap::new();
            let mut groups: Vec<(f64, f64, Vec<f64>)> = Vec::new();
            for p in &curve.points {
                let k = *slots
                    .entry((p.lambda1.to_bits(), p.lambda2.to_bits()))
                    .or_insert_with(|| {
                        groups.push((p.lambda1, p.lambda2, Vec::new()));
                        groups.len() - 1
                    });
                groups[k].2.push(p.stress);
            }
            for (l1, l2, values) in groups {
                let state = crate::kinematics::DeformationState::new(l1, l2, curve.orientation)?;
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let sq_dev = values.iter().map(|v| (v - mean) * (v - mean)).sum();
                observations.push(Observation {
                    curve: ci,
                    lambda1: l1,
                    lambda2: l2,
                    inv: invariants(&state),
                    direction: curve.direction,
                    count: n,
                    mean,
                    sq_dev,
                });
            }
        }
        Ok(Self {
            observations,
            curve_ids,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn n_total(&self) -> f64 {
        self.observations.iter().map(|o| o.count).sum()
    }

    /// Copy with every stress divided by `scale`.
    pub fn scaled(&self, scale: f64) -> Self {
        let mut out = self.clone();
        for o in &mut out.observations {
            o.mean /= scale;
            o.sq_dev /= scale * scale;
        }
        out
    }

    /// Root mean square of all stresses.
    pub fn stress_rms(&self) -> f64 {
        let n = self.n_total();
        let ss: f64 = self
            .observations
            .iter()
            .map(|o| o.sq_dev + o.count * o.mean * o.mean)
            .sum();
        (ss / n).sqrt()
    }

    pub fn max_stretch(&self) -> f64 {
        self.observations
            .iter()
            .map(|o| o.lambda1.max(o.lambda2))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub nll: f64,
    pub reg: f64,
    pub total: f64,
    pub per_curve_nll: BTreeMap<String, f64>,
}

/// Gradient of a loss with respect to the model parameters. `chol_rows` refers to the raw
/// (unnormalized) rows; entries above the diagonal are always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w_mu: [f64; N_TERMS],
    pub w_star: [f64; N_TERMS],
    pub d: [f64; N_TERMS],
    pub chol_rows: Matrix,
}

impl Default for Gradient {
    fn default() -> Self {
        Self {
            w_mu: [0.0; N_TERMS],
            w_star: [0.0; N_TERMS],
            d: [0.0; N_TERMS],
            chol_rows: [[0.0; N_TERMS]; N_TERMS],
        }
    }
}

impl Gradient {
    fn scale(&mut self, s: f64) {
        let all = self
            .w_mu
            .iter_mut()
            .chain(self.w_star.iter_mut())
            .chain(self.d.iter_mut())
            .chain(self.chol_rows.iter_mut().flatten());
        for v in all {
            *v *= s;
        }
    }

    pub fn norm(&self) -> f64 {
        self.w_mu
            .iter()
            .chain(&self.w_star)
            .chain(&self.d)
            .chain(self.chol_rows.iter().flatten())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.w_mu
            .iter()
            .chain(&self.w_star)
            .chain(&self.d)
            .chain(self.chol_rows.iter().flatten())
            .all(|v| v.is_finite())
    }
}

/// Per-observation NLL contribution for a predicted mean and (unfloored) variance.
pub fn gaussian_nll(count: f64, mean: f64, sq_dev: f64, mu: f64, var: f64) -> f64 {
    let s2 = var.max(VARIANCE_FLOOR);
    let r = mean - mu;
    count * (HALF_LN_2PI + 0.5 * s2.ln()) + (sq_dev + count * r * r) / (2.0 * s2)
}

struct Evaluator<'a> {
    model: &'a GaussianModel,
    rows: Matrix,
}

impl<'a> Evaluator<'a> {
    fn new(model: &'a GaussianModel) -> Self {
        let rows = match model.mode() {
            CovarianceMode::CorrelatedFull => model.covariance.normalized_rows(),
            _ => identity_matrix(),
        };
        Self { model, rows }
    }

    /// Summed NLL of one pooled observation; accumulates its gradient into `grad` (with respect
    /// to normalized rows) when given. Returns the NLL and whether the floor was active.
    fn observation(&self, ob: &Observation, grad: Option<&mut Gradient>) -> Result<(f64, bool)> {
        let m = self.model;
        let evals = eval_library(&ob.inv, &m.w_star)?;
        let mut p = [0.0; N_TERMS];
        let mut unit = [0.0; N_TERMS];
        let mut unit_dw = [0.0; N_TERMS];
        for i in 0..N_TERMS {
            (unit[i], unit_dw[i]) = match ob.direction {
                Direction::Dir1 => (evals[i].f, evals[i].df_dwstar),
                Direction::Dir2 => (evals[i].g, evals[i].dg_dwstar),
            };
            p[i] = m.w_mu[i] * unit[i];
        }
        let mu: f64 = p.iter().sum();
        let d = &m.covariance.d;
        let (var, v, u) = factored_variance(m.mode(), d, &self.rows, &p);
        let floored = var < VARIANCE_FLOOR;
        let nll = gaussian_nll(ob.count, ob.mean, ob.sq_dev, mu, var);

        if let Some(g) = grad {
            let s2 = var.max(VARIANCE_FLOOR);
            let r = ob.mean - mu;
            let d_mu = -ob.count * r / s2;
            let d_var = if floored {
                0.0
            } else {
                ob.count / (2.0 * s2) - (ob.sq_dev + ob.count * r * r) / (2.0 * s2 * s2)
            };
            for i in 0..N_TERMS {
                let dp = d_mu + d_var * 2.0 * d[i] * u[i];
                g.w_mu[i] += dp * unit[i];
                g.w_star[i] += dp * m.w_mu[i] * unit_dw[i];
                g.d[i] += d_var * 2.0 * p[i] * u[i];
            }
            if m.mode() == CovarianceMode::CorrelatedFull && d_var != 0.0 {
                for k in 0..N_TERMS {
                    let bk = d[k] * p[k];
                    if bk != 0.0 {
                        for j in 0..=k {
                            g.chol_rows[k][j] += d_var * 2.0 * bk * v[j];
                        }
                    }
                }
            }
        }
        Ok((nll, floored))
    }

    /// Converts a gradient with respect to the normalized rows into one with respect to the raw
    /// rows.
    fn raw_row_gradient(&self, g: &mut Gradient) {
        if self.model.mode() != CovarianceMode::CorrelatedFull {
            g.chol_rows = [[0.0; N_TERMS]; N_TERMS];
            return;
        }
        let raw = &self.model.covariance.chol_rows;
        for k in 0..N_TERMS {
            let norm = raw[k][..=k].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                g.chol_rows[k] = [0.0; N_TERMS];
                continue;
            }
            let dot: f64 = (0..=k).map(|j| g.chol_rows[k][j] * self.rows[k][j]).sum();
            for j in 0..=k {
                g.chol_rows[k][j] = (g.chol_rows[k][j] - dot * self.rows[k][j]) / norm;
            }
        }
    }
}

fn check_model(model: &GaussianModel) -> Result<()> {
    model.validate()
}

/// Per-observation NLL over a pooled set, together with per-curve means and the number of
/// observations whose variance hit the floor.
pub fn nll_of_set(model: &GaussianModel, set: &ObservationSet) -> Result<(f64, Vec<f64>, f64)> {
    if set.is_empty() {
        return Err(Error::Domain("empty split: no observations to evaluate".into()));
    }
    check_model(model)?;
    let ev = Evaluator::new(model);
    let mut per_curve = vec![(0.0, 0.0); set.curve_ids.len()];
    let mut floored = 0.0;
    for ob in &set.observations {
        let (nll, fl) = ev.observation(ob, None)?;
        per_curve[ob.curve].0 += nll;
        per_curve[ob.curve].1 += ob.count;
        if fl {
            floored += ob.count;
        }
    }
    let total: f64 = per_curve.iter().map(|c| c.0).sum();
    let n: f64 = per_curve.iter().map(|c| c.1).sum();
    Ok((
        total / n,
        per_curve.iter().map(|(s, c)| s / c).collect(),
        floored,
    ))
}

pub fn nll(model: &GaussianModel, data: &BiaxialDataset, split: Split) -> Result<f64> {
    let set = ObservationSet::from_dataset(data, split)?;
    nll_of_set(model, &set).map(|r| r.0)
}

/// Fraction of the split's observations whose predicted variance sits at the floor.
pub fn floor_fraction(model: &GaussianModel, data: &BiaxialDataset, split: Split) -> Result<f64> {
    let set = ObservationSet::from_dataset(data, split)?;
    let (_, _, floored) = nll_of_set(model, &set)?;
    Ok(floored / set.n_total())
}

/// Stretch bound used by the penalty integral: the largest stretch in the training split, or in
/// the whole dataset when the training split is empty.
pub fn penalty_lambda_max(data: &BiaxialDataset) -> f64 {
    let train = data.max_stretch(Split::Train);
    if train.is_finite() {
        train
    } else {
        data.max_stretch(Split::All)
    }
}

pub fn evaluate(
    model: &GaussianModel,
    data: &BiaxialDataset,
    split: Split,
    alpha: f64,
) -> Result<LossBreakdown> {
    let set = ObservationSet::from_dataset(data, split)?;
    let (nll, per_curve, _) = nll_of_set(model, &set)?;
    let reg = l_half_penalty(model, alpha, penalty_lambda_max(data))?;
    Ok(LossBreakdown {
        nll,
        reg,
        total: nll + reg,
        per_curve_nll: set.curve_ids.iter().cloned().zip(per_curve).collect(),
    })
}

/// `α Σ_i (w_μ,i · S_i(w*_i))^½` where `S_i` is the term's stress integral over `[1, lambda_max]`.
pub fn l_half_penalty(model: &GaussianModel, alpha: f64, lambda_max: f64) -> Result<f64> {
    penalty_with_gradient(model, alpha, lambda_max, None)
}

fn penalty_with_gradient(
    model: &GaussianModel,
    alpha: f64,
    lambda_max: f64,
    mut grad: Option<&mut Gradient>,
) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!("alpha must be non-negative, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (i, spec) in LIBRARY.iter().enumerate() {
        let w = model.w_mu[i];
        if w <= 0.0 {
            continue;
        }
        let (s, ds) = term_stress_integral_with_slope(spec, model.w_star[i], lambda_max)?;
        let x = w * s;
        if x <= 0.0 {
            continue;
        }
        let root = x.sqrt();
        total += root;
        if let Some(g) = grad.as_deref_mut() {
            g.w_mu[i] += alpha * s / (2.0 * root);
            g.w_star[i] += alpha * w * ds / (2.0 * root);
        }
    }
    Ok(alpha * total)
}

/// Mean NLL over `observations` plus the penalty, and its gradient.
pub fn loss_and_gradient<'o>(
    model: &GaussianModel,
    observations: impl IntoIterator<Item = &'o Observation>,
    alpha: f64,
    lambda_max: f64,
) -> Result<(f64, f64, Gradient)> {
    let ev = Evaluator::new(model);
    let mut grad = Gradient::default();
    let mut sum = 0.0;
    let mut n = 0.0;
    for ob in observations {
        sum += ev.observation(ob, Some(&mut grad))?.0;
        n += ob.count;
    }
    if n == 0.0 {
        return Err(Error::Domain("empty batch".into()));
    }
    ev.raw_row_gradient(&mut grad);
    grad.scale(1.0 / n);
    let reg = penalty_with_gradient(model, alpha, lambda_max, Some(&mut grad))?;
    Ok((sum / n, reg, grad))
}

/// Total loss on a split and its analytic gradient.
pub fn gradients(
    model: &GaussianModel,
    data: &BiaxialDataset,
    split: Split,
    alpha: f64,
) -> Result<(f64, Gradient)> {
    check_model(model)?;
    let set = ObservationSet::from_dataset(data, split)?;
    if set.is_empty() {
        return Err(Error::Domain("empty split: no observations to evaluate".into()));
    }
    let (nll, reg, g) =
        loss_and_gradient(model, &set.observations, alpha, penalty_lambda_max(data))?;
    Ok((nll + reg, g))
}

/// Number of scalar parameters addressed by [`parameter_mut`]: `w_mu`, `w_star`, `d` and the
/// lower triangle of `chol_rows`.
pub const N_PARAMETERS: usize = 3 * N_TERMS + N_TERMS * (N_TERMS + 1) / 2;

pub(crate) fn lower_index(k: usize) -> (usize, usize) {
    let mut row = 0;
    while (row + 1) * (row + 2) / 2 <= k {
        row += 1;
    }
    (row, k - row * (row + 1) / 2)
}

/// Mutable access to parameter `k` in a fixed flat ordering.
pub fn parameter_mut(model: &mut GaussianModel, k: usize) -> &mut f64 {
    match k / N_TERMS {
        0 => &mut model.w_mu[k],
        1 => &mut model.w_star[k - N_TERMS],
        2 => &mut model.covariance.d[k - 2 * N_TERMS],
        _ => {
            let (r, c) = lower_index(k - 3 * N_TERMS);
            &mut model.covariance.chol_rows[r][c]
        }
    }
}

/// The gradient entry matching [`parameter_mut`]'s ordering.
pub fn gradient_entry(g: &Gradient, k: usize) -> f64 {
    match k / N_TERMS {
        0 => g.w_mu[k],
        1 => g.w_star[k - N_TERMS],
        2 => g.d[k - 2 * N_TERMS],
        _ => {
            let (r, c) = lower_index(k - 3 * N_TERMS);
            g.chol_rows[r][c]
        }
    }
}

/// Largest deviation between the analytic gradient of the total loss and central differences
/// with step `h·max(1, |x|)`, relative to the largest analytic entry.
pub fn gradient_check(
    model: &GaussianModel,
    set: &ObservationSet,
    alpha: f64,
    lambda_max: f64,
    h: f64,
) -> Result<f64> {
    let (_, _, g) = loss_and_gradient(model, &set.observations, alpha, lambda_max)?;
    let scale = (0..N_PARAMETERS)
        .map(|k| gradient_entry(&g, k).abs())
        .fold(0.0, f64::max)
        .max(1e-12);
    let total = |m: &GaussianModel| -> Result<f64> {
        let (a, b, _) = loss_and_gradient(m, &set.observations, alpha, lambda_max)?;
        Ok(a + b)
    };
    let mut worst: f64 = 0.0;
    for k in 0..N_PARAMETERS {
        let mut m = model.clone();
        let x = *parameter_mut(&mut m, k);
        let step = h * x.abs().max(1.0);
        *parameter_mut(&mut m, k) = x + step;
        let up = total(&m)?;
        *parameter_mut(&mut m, k) = x - step;
        let down = total(&m)?;
        let fd = (up - down) / (2.0 * step);
        worst = worst.max((gradient_entry(&g, k) - fd).abs() / scale);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtraNll {
    /// `model_nll − ideal_nll`.
    pub extra: f64,
    pub model_nll: f64,
    /// NLL when the predictive distribution at every stretch point equals the empirical one.
    pub ideal_nll: f64,
    /// Stretch points seen in only one sample; their empirical variance is floored.
    pub single_sample_points: usize,
}

pub fn extra_nll(model: &GaussianModel, data: &BiaxialDataset, curve_id: &str) -> Result<ExtraNll> {
    let curve = data
        .curve(curve_id)
        .ok_or_else(|| Error::Data(format!("no curve `{curve_id}`")))?;
    let set = ObservationSet::from_curves([curve])?;
    let (model_nll, _, _) = nll_of_set(model, &set)?;

    let mut total = 0.0;
    let mut n = 0.0;
    let mut single = 0;
    for g in curve.point_groups() {
        if g.values.len() < 2 {
            single += 1;
        }
        let m = g.mean();
        let v = g.variance();
        let ss: f64 = g.values.iter().map(|x| (x - m) * (x - m)).sum();
        total += gaussian_nll(g.values.len() as f64, m, ss, m, v);
        n += g.values.len() as f64;
    }
    if single > 0 {
        log::warn!("curve {curve_id}: {single} stretch points with a single sample");
    }
    let ideal_nll = total / n;
    Ok(ExtraNll {
        extra: model_nll - ideal_nll,
        model_nll,
        ideal_nll,
        single_sample_points: single,
    })
}
