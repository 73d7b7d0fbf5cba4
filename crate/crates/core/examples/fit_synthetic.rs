//! Generates data from a known four-term independent model and refits it with the term
//! structure fixed, comparing recovered parameters with the generator.

use gauss_cann::data::{paper_split, standard_protocols, synthesize, Split};
use gauss_cann::energy::{LIBRARY, N_TERMS};
use gauss_cann::objective::nll;
use gauss_cann::stress::{CovarianceMode, CovarianceParam, GaussianModel};
use gauss_cann::trainer::{fit, TrainConfig};

fn main() -> gauss_cann::Result<()> {
    let active = [0, 6, 10, 13];
    let mut w_mu = [0.0; N_TERMS];
    let mut w_star = [1.0; N_TERMS];
    let mut d = [0.0; N_TERMS];
    for (&i, (w, b, sd)) in active
        .iter()
        .zip([(20.0, 1.0, 0.1), (300.0, 1.0, 0.2), (40.0, 5.0, 0.3), (20.0, 3.0, 0.25)])
    {
        w_mu[i] = w;
        w_star[i] = b;
        d[i] = sd;
    }
    let generator = GaussianModel {
        w_mu,
        w_star,
        covariance: CovarianceParam::independent(d),
    };
    let data = paper_split(&synthesize(&generator, &standard_protocols(1.2), 500, 20, 1)?)?;

    let mut term_mask = [false; N_TERMS];
    for i in active {
        term_mask[i] = true;
    }
    let config = TrainConfig {
        learning_rate: 0.01,
        epochs_pretrain: 300,
        epochs_regularized: 300,
        mode: CovarianceMode::IndependentDiag,
        seed: 3,
        term_mask,
        ..TrainConfig::default()
    };
    let result = fit(&config, &data)?;

    println!(
        "dev NLL: fitted {:.4}, generator {:.4}",
        result.dev_nll.unwrap_or(f64::NAN),
        nll(&generator, &data, Split::Dev)?
    );
    println!("{:<11} {:>9} {:>9} {:>7} {:>7}", "term", "w_mu", "true", "d", "true");
    for i in active {
        println!(
            "{:<11} {:>9.3} {:>9.3} {:>7.4} {:>7.4}",
            LIBRARY[i].name(),
            result.model.w_mu[i],
            generator.w_mu[i],
            result.model.covariance.d[i],
            generator.covariance.d[i]
        );
    }
    Ok(())
}
