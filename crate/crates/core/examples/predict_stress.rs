//! Closed-form stress bands of a correlated three-term model along the strip-w and equibiaxial
//! loading paths.

use gauss_cann::data::Experiment;
use gauss_cann::energy::N_TERMS;
use gauss_cann::stress::{identity_matrix, predict, CovarianceParam, GaussianModel};

fn main() -> gauss_cann::Result<()> {
    let mut w_mu = [0.0; N_TERMS];
    let mut w_star = [1.0; N_TERMS];
    let mut d = [0.0; N_TERMS];
    // I1, I4w_sq_exp, I4s_sq_exp
    for (i, w, b, sd) in [(0, 15.0, 1.0, 0.3), (10, 25.0, 8.0, 0.5), (13, 20.0, 6.0, 0.4)] {
        w_mu[i] = w;
        w_star[i] = b;
        d[i] = sd;
    }
    let mut rows = identity_matrix();
    rows[13][10] = -0.8;
    let model = GaussianModel {
        w_mu,
        w_star,
        covariance: CovarianceParam::correlated(d, rows),
    };

    for experiment in [Experiment::StripW, Experiment::Equibiax] {
        println!("{experiment}");
        println!("  {:>6} {:>10} {:>9} {:>10} {:>9}", "inc", "mu11", "std11", "mu22", "std22");
        for k in 0..=5 {
            let inc = 0.04 * k as f64;
            let p = predict(&model, &experiment.state_at(inc)?)?;
            println!(
                "  {inc:>6.2} {:>10.3} {:>9.3} {:>10.3} {:>9.3}",
                p.mu11,
                p.std11(),
                p.mu22,
                p.std22()
            );
        }
    }
    Ok(())
}
