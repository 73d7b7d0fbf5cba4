//! ADAM training with projection, the two-phase regularization schedule, α sweeps and the
//! selection rule.
//!
//! Training runs on stresses divided by the root mean square of the training stresses; the mean
//! weights are rescaled to kPa when a result is produced. The normalized standard deviations are
//! trained through a logistic map whose argument is clamped so that `Σ_ii ≤ 1 − 1e-9` holds after
//! every step.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BiaxialDataset, Split};
use crate::energy::{term_stress_integral, LIBRARY, N_TERMS};
use crate::error::{Error, Result};
use crate::objective::{
    gradient_entry, loss_and_gradient, lower_index, nll_of_set, parameter_mut, penalty_lambda_max,
    ObservationSet, N_PARAMETERS,
};
use crate::stress::{identity_matrix, CovarianceMode, CovarianceParam, GaussianModel};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;
const LOGIT_MIN: f64 = -40.0;
const LOGIT_MAX: f64 = 20.0;
const INITIAL_D: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs_pretrain: usize,
    pub epochs_regularized: usize,
    /// Scalar stress observations per gradient step.
    pub batch_size: usize,
    pub alpha: f64,
    pub mode: CovarianceMode,
    pub seed: u64,
    /// Relative stress-contribution threshold below which a mean weight is snapped to zero.
    pub zero_threshold: f64,
    /// Terms allowed to be non-zero. All terms by default.
    pub term_mask: [bool; N_TERMS],
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            epochs_pretrain: 2000,
            epochs_regularized: 2000,
            batch_size: 1000,
            alpha: 0.0,
            mode: CovarianceMode::CorrelatedFull,
            seed: 0,
            zero_threshold: 1e-4,
            term_mask: [true; N_TERMS],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Domain(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs_pretrain + self.epochs_regularized == 0 {
            return Err(Error::Domain("at least one training epoch is required".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Domain("batch size must be positive".into()));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Domain(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        if !(self.zero_threshold >= 0.0) {
            return Err(Error::Domain("zero threshold must be non-negative".into()));
        }
        if !self.term_mask.iter().any(|m| *m) {
            return Err(Error::Domain("term mask excludes every term".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Pretrain,
    Regularized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: Phase,
    /// Mean batch NLL over the epoch, in kPa units.
    pub train_loss: f64,
    pub penalty: f64,
}

/// Passed to a training hook after every optimizer step.
#[derive(Debug, Clone)]
pub struct StepInfo<'a> {
    pub alpha: f64,
    pub epoch: usize,
    pub phase: Phase,
    pub step: usize,
    /// Current model in kPa units.
    pub model: &'a GaussianModel,
    /// Set on the last step of each epoch.
    pub epoch_record: Option<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: GaussianModel,
    pub alpha: f64,
    pub train_nll: f64,
    /// `None` when the dataset has no development curves.
    pub dev_nll: Option<f64>,
    pub n_active_terms: usize,
    pub history: Vec<EpochRecord>,
}

impl FitResult {
    /// NLL used for selection: dev when available, train otherwise.
    pub fn selection_nll(&self) -> f64 {
        self.dev_nll.unwrap_or(self.train_nll)
    }

    pub fn selection_row(&self) -> SelectionRow {
        SelectionRow {
            alpha: self.alpha,
            n_active_terms: self.n_active_terms,
            dev_nll: self.selection_nll(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionRow {
    pub alpha: f64,
    pub n_active_terms: usize,
    pub dev_nll: f64,
}

/// Tolerance above the minimum dev NLL within which sparser models are preferred.
pub const SELECTION_TOLERANCE: f64 = 0.1;

/// Index of the selected row: fewest terms among rows within [`SELECTION_TOLERANCE`] of the best
/// dev NLL, ties broken by dev NLL and then by α.
pub fn select_index(rows: &[SelectionRow]) -> Option<usize> {
    let best = rows.iter().map(|r| r.dev_nll).fold(f64::INFINITY, f64::min);
    rows.iter()
        .enumerate()
        .filter(|(_, r)| r.dev_nll <= best + SELECTION_TOLERANCE)
        .min_by(|(_, a), (_, b)| {
            a.n_active_terms
                .cmp(&b.n_active_terms)
                .then(a.dev_nll.total_cmp(&b.dev_nll))
                .then(a.alpha.total_cmp(&b.alpha))
        })
        .map(|(i, _)| i)
}

pub fn select(results: &[FitResult]) -> Option<&FitResult> {
    let rows: Vec<_> = results.iter().map(FitResult::selection_row).collect();
    select_index(&rows).map(|i| &results[i])
}

pub type Hook<'h> = &'h (dyn Fn(&StepInfo) + Sync);

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

#[derive(Debug, Clone)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, x: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        for k in 0..x.len() {
            self.m[k] = BETA1 * self.m[k] + (1.0 - BETA1) * g[k];
            self.v[k] = BETA2 * self.v[k] + (1.0 - BETA2) * g[k] * g[k];
            x[k] -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + EPSILON);
        }
    }
}

/// Optimizer state: the flat parameter vector in [`parameter_mut`] order with the `d` slots
/// holding logits, plus the RNG that drives batching.
#[derive(Debug, Clone)]
struct State {
    x: Vec<f64>,
    trainable: Vec<bool>,
    adam: Adam,
    rng: ChaCha8Rng,
    mode: CovarianceMode,
    epoch: usize,
}

const D_SLOT: usize = 2 * N_TERMS;

impl State {
    fn init(config: &TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut m = GaussianModel {
            w_mu: [0.0; N_TERMS],
            w_star: [1.0; N_TERMS],
            covariance: CovarianceParam::correlated([0.0; N_TERMS], identity_matrix()),
        };
        for (i, spec) in LIBRARY.iter().enumerate() {
            let w: f64 = rng.random();
            let s: f64 = rng.random();
            if config.term_mask[i] {
                m.w_mu[i] = w;
                if spec.has_internal_weight() {
                    m.w_star[i] = s;
                }
            }
        }
        let logit = (INITIAL_D / (1.0 - INITIAL_D)).ln();
        m.covariance.d = [logit; N_TERMS];

        let mut x = vec![0.0; N_PARAMETERS];
        for (k, slot) in x.iter_mut().enumerate() {
            *slot = *parameter_mut(&mut m, k);
        }
        let trainable = (0..N_PARAMETERS).map(|k| slot_trainable(k, config)).collect();
        Self {
            x,
            trainable,
            adam: Adam::new(N_PARAMETERS),
            rng,
            mode: config.mode,
            epoch: 0,
        }
    }

    /// Model in normalized stress units.
    fn model(&self) -> GaussianModel {
        let mut m = GaussianModel {
            w_mu: [0.0; N_TERMS],
            w_star: [0.0; N_TERMS],
            covariance: CovarianceParam::correlated([0.0; N_TERMS], [[0.0; N_TERMS]; N_TERMS]),
        };
        for k in 0..N_PARAMETERS {
            *parameter_mut(&mut m, k) = self.x[k];
        }
        for d in m.covariance.d.iter_mut() {
            *d = sigmoid(*d);
        }
        m.covariance = match self.mode {
            CovarianceMode::Deterministic => CovarianceParam::deterministic(),
            CovarianceMode::IndependentDiag => CovarianceParam::independent(m.covariance.d),
            CovarianceMode::CorrelatedFull => m.covariance,
        };
        m
    }

    fn project(&mut self) {
        for k in 0..D_SLOT {
            self.x[k] = self.x[k].max(0.0);
        }
        for k in D_SLOT..D_SLOT + N_TERMS {
            self.x[k] = self.x[k].clamp(LOGIT_MIN, LOGIT_MAX);
        }
    }
}

fn slot_trainable(k: usize, config: &TrainConfig) -> bool {
    let mask = &config.term_mask;
    match k / N_TERMS {
        0 => mask[k],
        1 => mask[k - N_TERMS] && LIBRARY[k - N_TERMS].has_internal_weight(),
        2 => mask[k - D_SLOT] && config.mode != CovarianceMode::Deterministic,
        _ => {
            let (r, c) = lower_index(k - 3 * N_TERMS);
            config.mode == CovarianceMode::CorrelatedFull && mask[r] && mask[c]
        }
    }
}

fn to_kpa(mut m: GaussianModel, scale: f64) -> GaussianModel {
    for w in m.w_mu.iter_mut() {
        *w *= scale;
    }
    m
}

struct Problem<'a> {
    train: ObservationSet,
    scale: f64,
    lambda_max: f64,
    data: &'a BiaxialDataset,
}

impl<'a> Problem<'a> {
    fn new(data: &'a BiaxialDataset) -> Result<Self> {
        let raw = ObservationSet::from_dataset(data, Split::Train)?;
        if raw.is_empty() {
            return Err(Error::Data("training split has no observations".into()));
        }
        let mut scale = raw.stress_rms();
        if !(scale > 0.0 && scale.is_finite()) {
            scale = 1.0;
        }
        Ok(Self {
            train: raw.scaled(scale),
            scale,
            lambda_max: penalty_lambda_max(data),
            data,
        })
    }

    fn batches(&self, rng: &mut ChaCha8Rng, batch_size: usize) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.train.observations.len()).collect();
        order.shuffle(rng);
        let mut out = Vec::new();
        let mut current = Vec::new();
        let mut count = 0.0;
        for i in order {
            current.push(i);
            count += self.train.observations[i].count;
            if count >= batch_size as f64 {
                out.push(std::mem::take(&mut current));
                count = 0.0;
            }
        }
        if !current.is_empty() {
            out.push(current);
        }
        out
    }

    fn run_phase(
        &self,
        state: &mut State,
        config: &TrainConfig,
        phase: Phase,
        alpha: f64,
        epochs: usize,
        history: &mut Vec<EpochRecord>,
        hook: Option<Hook>,
    ) -> Result<()> {
        let ln_scale = self.scale.ln();
        let mut grad = vec![0.0; N_PARAMETERS];
        for _ in 0..epochs {
            let epoch = state.epoch;
            let batches = self.batches(&mut state.rng, config.batch_size);
            let n_batches = batches.len();
            let (mut loss_sum, mut pen_sum) = (0.0, 0.0);
            for (step, batch) in batches.into_iter().enumerate() {
                let model = state.model();
                let diverged = || Error::Diverged {
                    epoch,
                    snapshot: Box::new(to_kpa(state.model(), self.scale)),
                };
                let obs = batch.iter().map(|&i| &self.train.observations[i]);
                let (nll, pen, g) = match loss_and_gradient(&model, obs, alpha, self.lambda_max) {
                    Ok(r) => r,
                    Err(Error::Overflow { .. }) => return Err(diverged()),
                    Err(e) => return Err(e),
                };
                if !(nll.is_finite() && pen.is_finite() && g.is_finite()) {
                    return Err(diverged());
                }
                loss_sum += nll + ln_scale;
                pen_sum += pen;
                for k in 0..N_PARAMETERS {
                    grad[k] = if state.trainable[k] {
                        gradient_entry(&g, k)
                    } else {
                        0.0
                    };
                }
                for i in 0..N_TERMS {
                    let d = model.covariance.d[i];
                    grad[D_SLOT + i] *= d * (1.0 - d);
                }
                if phase == Phase::Regularized && alpha > 0.0 {
                    for i in 0..N_TERMS {
                        if state.x[i] == 0.0 {
                            grad[i] = 0.0;
                            state.adam.m[i] = 0.0;
                            state.adam.v[i] = 0.0;
                        }
                    }
                }
                state.adam.step(&mut state.x, &grad, config.learning_rate);
                state.project();

                let record = (step + 1 == n_batches).then(|| EpochRecord {
                    epoch,
                    phase,
                    train_loss: loss_sum / n_batches as f64,
                    penalty: pen_sum / n_batches as f64,
                });
                if let Some(h) = hook {
                    let m = to_kpa(state.model(), self.scale);
                    h(&StepInfo {
                        alpha,
                        epoch,
                        phase,
                        step,
                        model: &m,
                        epoch_record: record,
                    });
                }
                if let Some(r) = record {
                    history.push(r);
                }
            }
            state.epoch += 1;
        }
        Ok(())
    }

    fn finish(
        &self,
        state: &State,
        config: &TrainConfig,
        alpha: f64,
        history: Vec<EpochRecord>,
    ) -> Result<FitResult> {
        let mut model = to_kpa(state.model(), self.scale);
        let n_active_terms = snap_small_terms(&mut model, config.zero_threshold, self.lambda_max)?;
        let train = ObservationSet::from_dataset(self.data, Split::Train)?;
        let train_nll = nll_of_set(&model, &train)?.0;
        let dev = ObservationSet::from_dataset(self.data, Split::Dev)?;
        let dev_nll = if dev.is_empty() {
            None
        } else {
            Some(nll_of_set(&model, &dev)?.0)
        };
        Ok(FitResult {
            model,
            alpha,
            train_nll,
            dev_nll,
            n_active_terms,
            history,
        })
    }
}

/// Zeroes every mean weight whose stress contribution `w_μ·S(w*)` is at most `threshold` times
/// the largest one, and returns the number of surviving terms.
pub fn snap_small_terms(model: &mut GaussianModel, threshold: f64, lambda_max: f64) -> Result<usize> {
    let lambda_max = if lambda_max > 1.0 { lambda_max } else { 1.1 };
    let mut contrib = [0.0; N_TERMS];
    for (i, spec) in LIBRARY.iter().enumerate() {
        if model.w_mu[i] > 0.0 {
            contrib[i] = model.w_mu[i] * term_stress_integral(spec, model.w_star[i], lambda_max)?;
        }
    }
    let max = contrib.iter().cloned().fold(0.0, f64::max);
    for i in 0..N_TERMS {
        if contrib[i] <= threshold * max {
            model.w_mu[i] = 0.0;
        }
    }
    Ok(count_active(model))
}

pub fn count_active(model: &GaussianModel) -> usize {
    model.w_mu.iter().filter(|w| **w > 0.0).count()
}

pub fn fit(config: &TrainConfig, data: &BiaxialDataset) -> Result<FitResult> {
    fit_with_hook(config, data, None)
}

pub fn fit_with_hook(
    config: &TrainConfig,
    data: &BiaxialDataset,
    hook: Option<Hook>,
) -> Result<FitResult> {
    let mut results = sweep_with_hook(&[config.alpha], config, data, hook)?;
    Ok(results.remove(0))
}

pub fn sweep(alphas: &[f64], base: &TrainConfig, data: &BiaxialDataset) -> Result<Vec<FitResult>> {
    sweep_with_hook(alphas, base, data, None)
}

/// Pretrains once with α = 0, then continues one branch per α (in parallel) from the shared
/// pretrained state.
pub fn sweep_with_hook(
    alphas: &[f64],
    base: &TrainConfig,
    data: &BiaxialDataset,
    hook: Option<Hook>,
) -> Result<Vec<FitResult>> {
    if alphas.is_empty() {
        return Err(Error::Domain("no alpha values to sweep".into()));
    }
    for &alpha in alphas {
        TrainConfig {
            alpha,
            ..base.clone()
        }
        .validate()?;
    }
    let problem = Problem::new(data)?;
    let mut state = State::init(base);
    let mut history = Vec::new();
    problem.run_phase(
        &mut state,
        base,
        Phase::Pretrain,
        0.0,
        base.epochs_pretrain,
        &mut history,
        hook,
    )?;
    alphas
        .par_iter()
        .map(|&alpha| {
            let mut branch = state.clone();
            let mut hist = history.clone();
            problem.run_phase(
                &mut branch,
                base,
                Phase::Regularized,
                alpha,
                base.epochs_regularized,
                &mut hist,
                hook,
            )?;
            problem.finish(&branch, base, alpha, hist)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(alpha: f64, n: usize, dev: f64) -> SelectionRow {
        SelectionRow {
            alpha,
            n_active_terms: n,
            dev_nll: dev,
        }
    }

    #[test]
    fn selection_on_published_rows() {
        let independent = [
            row(0.0, 12, 4.427),
            row(0.01, 9, 4.426),
            row(0.03, 6, 4.428),
            row(0.1, 5, 4.452),
            row(0.3, 6, 4.503),
            row(1.0, 3, 4.577),
        ];
        assert_eq!(select_index(&independent), Some(3));
        let correlated = [
            row(0.0, 10, 4.306),
            row(0.01, 8, 4.305),
            row(0.03, 8, 4.313),
            row(0.1, 4, 4.340),
            row(0.3, 4, 4.343),
            row(1.0, 3, 4.630),
        ];
        assert_eq!(select_index(&correlated), Some(3));
        assert_eq!(select_index(&[row(0.5, 7, 1.0)]), Some(0));
        assert_eq!(select_index(&[]), None);
    }

    #[test]
    fn selection_ties_prefer_smaller_alpha() {
        let rows = [row(0.3, 4, 2.0), row(0.1, 4, 2.0)];
        assert_eq!(select_index(&rows), Some(1));
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut adam = Adam::new(2);
        let mut x = vec![1.0, -1.0];
        adam.step(&mut x, &[3.0, -0.5], 0.01);
        assert!((x[0] - 0.99).abs() < 1e-9 && (x[1] + 0.99).abs() < 1e-9);
    }

    #[test]
    fn init_respects_masks() {
        let mut config = TrainConfig {
            mode: CovarianceMode::IndependentDiag,
            ..TrainConfig::default()
        };
        config.term_mask[2] = false;
        let s = State::init(&config);
        let m = s.model();
        assert_eq!(m.w_mu[2], 0.0);
        assert_eq!(m.w_star[0], 1.0);
        assert!((m.covariance.d[5] - INITIAL_D).abs() < 1e-12);
        assert!(!s.trainable[2] && s.trainable[3]);
        assert!(!s.trainable[N_TERMS]); // identity-term internal weight
        assert!(s.trainable[N_TERMS + 1]);
        assert!(s.trainable[D_SLOT + 1]);
        assert!(!s.trainable[3 * N_TERMS]); // rows only train in correlated mode
    }

    #[test]
    fn snapping_uses_relative_contribution() {
        let mut m = GaussianModel {
            w_mu: [0.0; N_TERMS],
            w_star: [1.0; N_TERMS],
            covariance: CovarianceParam::deterministic(),
        };
        m.w_mu[0] = 10.0;
        m.w_mu[2] = 1e-9;
        m.w_mu[4] = 1.0;
        assert_eq!(snap_small_terms(&mut m, 1e-4, 1.3).unwrap(), 2);
        assert_eq!(m.w_mu[2], 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            term_mask: [false; N_TERMS],
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
