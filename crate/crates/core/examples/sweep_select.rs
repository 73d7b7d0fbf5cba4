//! Sweeps the sparsity strength for independent and correlated models on five virtual samples
//! from a correlated generator, and applies the selection rule.

use gauss_cann::data::{paper_split, standard_protocols, synthesize};
use gauss_cann::energy::N_TERMS;
use gauss_cann::objective::extra_nll;
use gauss_cann::stress::{identity_matrix, CovarianceMode, CovarianceParam, GaussianModel};
use gauss_cann::trainer::{select, sweep, TrainConfig};

fn main() -> gauss_cann::Result<()> {
    let mut w_mu = [0.0; N_TERMS];
    let mut w_star = [1.0; N_TERMS];
    let mut d = [0.0; N_TERMS];
    for (i, w, b, sd) in [(0, 30.0, 1.0, 0.4), (6, 300.0, 1.0, 0.35), (10, 40.0, 5.0, 0.3), (13, 20.0, 3.0, 0.5)] {
        w_mu[i] = w;
        w_star[i] = b;
        d[i] = sd;
    }
    let mut rows = identity_matrix();
    rows[6][0] = -1.2;
    rows[10][6] = 0.5;
    rows[13][6] = -1.6;
    rows[13][0] = 0.8;
    let generator = GaussianModel {
        w_mu,
        w_star,
        covariance: CovarianceParam::correlated(d, rows),
    };
    let data = paper_split(&synthesize(&generator, &standard_protocols(1.2), 5, 100, 100)?)?;
    let alphas = [0.0, 0.01, 0.03, 0.1, 0.3, 1.0];

    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    for mode in [CovarianceMode::IndependentDiag, CovarianceMode::CorrelatedFull] {
        let config = TrainConfig {
            mode,
            epochs_pretrain: epochs,
            epochs_regularized: epochs,
            ..TrainConfig::default()
        };
        let results = sweep(&alphas, &config, &data)?;
        let chosen = select(&results).expect("non-empty sweep");
        println!("{}", mode.tag());
        for r in &results {
            let mark = if std::ptr::eq(r, chosen) { "  <- selected" } else { "" };
            println!(
                "  alpha {:<5} terms {:>2}  train {:.3}  dev {:.3}{mark}",
                r.alpha,
                r.n_active_terms,
                r.train_nll,
                r.dev_nll.unwrap_or(f64::NAN)
            );
        }
        let e = extra_nll(&chosen.model, &data, "strip-s:2")?;
        println!("  strip-s s-stress extra NLL {:.3}", e.extra);
    }
    Ok(())
}
