//! Samples weight vectors from a correlated model and compares the empirical stress variance with
//! the closed form.

use gauss_cann::energy::{eval_library, N_TERMS};
use gauss_cann::kinematics::{invariants, DeformationState, Orientation};
use gauss_cann::stress::{
    identity_matrix, predict, prob_negative_weight, sample_weights, CovarianceParam, GaussianModel,
};

fn main() -> gauss_cann::Result<()> {
    let mut w_mu = [0.0; N_TERMS];
    let mut d = [0.0; N_TERMS];
    for (i, w, sd) in [(1, 4.0, 0.6), (6, 30.0, 0.3), (9, 8.0, 0.9), (12, 2.0, 0.5)] {
        w_mu[i] = w;
        d[i] = sd;
    }
    let mut rows = identity_matrix();
    rows[6][1] = 0.5;
    rows[12][9] = -1.2;
    let model = GaussianModel {
        w_mu,
        w_star: [3.0; N_TERMS],
        covariance: CovarianceParam::correlated(d, rows),
    };
    let state = DeformationState::new(1.12, 1.04, Orientation::Aligned0_90)?;
    let evals = eval_library(&invariants(&state), &model.w_star)?;

    let n = 200_000;
    let draws = sample_weights(&model, n, 7);
    let p11: Vec<f64> = draws
        .iter()
        .map(|w| (0..N_TERMS).map(|i| w[i] * evals[i].f).sum())
        .collect();
    let mean = p11.iter().sum::<f64>() / n as f64;
    let var = p11.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let negative = draws.iter().filter(|w| w[9] < 0.0).count() as f64 / n as f64;

    let exact = predict(&model, &state)?;
    println!("mean P11: sampled {mean:.5}, closed form {:.5}", exact.mu11);
    println!("var  P11: sampled {var:.5}, closed form {:.5}", exact.var11);
    println!(
        "p(w < 0) for I4w_linexp: sampled {negative:.4}, closed form {:.4}",
        prob_negative_weight(&model, 9)
    );
    Ok(())
}
