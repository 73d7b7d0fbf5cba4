//! Unit-weight stress contributions of all fourteen library terms at one stretch state, and the
//! stress integrals that feed the sparsity penalty.

use gauss_cann::energy::{eval_library, term_stress_integral, LIBRARY, N_TERMS};
use gauss_cann::kinematics::{invariants, DeformationState, Orientation};

fn main() -> gauss_cann::Result<()> {
    let state = DeformationState::new(1.1, 1.05, Orientation::Offset45)?;
    let wstar = [2.0; N_TERMS];
    let evals = eval_library(&invariants(&state), &wstar)?;
    println!("state l1=1.10 l2=1.05 (pm45), internal weight 2");
    println!("{:>2} {:<11} {:>10} {:>10} {:>10} {:>12}", "#", "term", "psi", "f (kPa)", "g (kPa)", "S(1.2)");
    for (spec, e) in LIBRARY.iter().zip(&evals) {
        let s = term_stress_integral(spec, 2.0, 1.2)?;
        println!(
            "{:>2} {:<11} {:>10.5} {:>10.5} {:>10.5} {:>12.6}",
            spec.index,
            spec.name(),
            e.psi,
            e.f,
            e.g,
            s
        );
    }
    Ok(())
}
