use gauss_cann::data::{paper_split, standard_protocols, synthesize, BiaxialDataset, Split};
use gauss_cann::energy::N_TERMS;
use gauss_cann::stress::{predict, CovarianceMode, CovarianceParam, GaussianModel};
use gauss_cann::trainer::{fit, sweep, FitResult, Phase, TrainConfig};

fn generator(covariance: CovarianceParam) -> GaussianModel {
    let mut w_mu = [0.0; N_TERMS];
    let mut w_star = [1.0; N_TERMS];
    for (i, w, b) in [(0, 20.0, 1.0), (6, 300.0, 1.0), (10, 40.0, 5.0), (13, 20.0, 3.0)] {
        w_mu[i] = w;
        w_star[i] = b;
    }
    GaussianModel {
        w_mu,
        w_star,
        covariance,
    }
}

fn noiseless_data() -> (GaussianModel, BiaxialDataset) {
    let g = generator(CovarianceParam::deterministic());
    let data = paper_split(&synthesize(&g, &standard_protocols(1.2), 1, 25, 0).unwrap()).unwrap();
    (g, data)
}

fn noisy_data() -> BiaxialDataset {
    let mut d = [0.0; N_TERMS];
    d[0] = 0.2;
    d[6] = 0.3;
    d[10] = 0.25;
    let g = generator(CovarianceParam::independent(d));
    paper_split(&synthesize(&g, &standard_protocols(1.2), 3, 10, 9).unwrap()).unwrap()
}

fn short(mode: CovarianceMode, alpha: f64) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.01,
        epochs_pretrain: 150,
        epochs_regularized: 100,
        alpha,
        mode,
        seed: 3,
        ..TrainConfig::default()
    }
}

fn same(a: &FitResult, b: &FitResult) -> bool {
    let bits = |m: &GaussianModel| {
        let mut v: Vec<u64> = m.w_mu.iter().chain(&m.w_star).chain(&m.covariance.d).map(|x| x.to_bits()).collect();
        v.extend(m.covariance.chol_rows.iter().flatten().map(|x| x.to_bits()));
        v
    };
    bits(&a.model) == bits(&b.model) && a.train_nll.to_bits() == b.train_nll.to_bits()
}

#[test]
fn noiseless_deterministic_fit_recovers_mean_stress() {
    let (g, data) = noiseless_data();
    let config = TrainConfig {
        epochs_pretrain: 6000,
        epochs_regularized: 0,
        ..short(CovarianceMode::Deterministic, 0.0)
    };
    let r = fit(&config, &data).unwrap();
    let (mut err, mut norm) = (0.0, 0.0);
    for c in data.curves_in(Split::Train) {
        for p in &c.points {
            let s = c.state(p).unwrap();
            let (a, b) = (predict(&r.model, &s).unwrap(), predict(&g, &s).unwrap());
            err += (a.mu11 - b.mu11).powi(2) + (a.mu22 - b.mu22).powi(2);
            norm += b.mu11.powi(2) + b.mu22.powi(2);
        }
    }
    let rel = (err / norm).sqrt();
    assert!(rel < 0.01, "relative RMS error {rel}");

    // pretraining loss decreases block by block
    let pre: Vec<f64> = r
        .history
        .iter()
        .filter(|e| e.phase == Phase::Pretrain)
        .map(|e| e.train_loss)
        .collect();
    let blocks: Vec<f64> = pre.chunks(100).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    for w in blocks.windows(2) {
        assert!(w[1] <= w[0], "block means {blocks:?}");
    }
}

// Near zero the NLL gradient grows like 1/w² while the penalty slope grows like 1/√w, so the
// last active term settles at a small interior value instead of reaching zero.
#[test]
fn strong_regularization_leaves_at_most_one_term() {
    let data = noisy_data();
    let mut config = short(CovarianceMode::IndependentDiag, 0.0);
    config.epochs_regularized = 300;
    let r = sweep(&[0.0, 10.0, 100.0], &config, &data).unwrap();
    assert!(r[0].n_active_terms > 1);
    assert!(r[1].n_active_terms <= 1);
    assert!(r[2].n_active_terms <= 1);
    let total = |f: &FitResult| f.model.w_mu.iter().sum::<f64>();
    assert!(total(&r[2]) < total(&r[1]));
}

#[test]
fn training_is_deterministic_and_sweeps_branch_from_one_pretraining() {
    let data = noisy_data();
    let config = short(CovarianceMode::CorrelatedFull, 0.05);
    let a = fit(&config, &data).unwrap();
    let b = fit(&config, &data).unwrap();
    assert!(same(&a, &b));

    let swept = sweep(&[0.0, 0.05, 1.0], &config, &data).unwrap();
    assert_eq!(swept.len(), 3);
    assert!(same(&swept[1], &a));
    assert_eq!(swept.iter().map(|r| r.alpha).collect::<Vec<_>>(), vec![0.0, 0.05, 1.0]);
    assert!(swept[2].n_active_terms <= swept[0].n_active_terms);
}
