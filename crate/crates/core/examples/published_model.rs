//! The published correlated four-term model: its summary, the stress distribution at a few
//! states, and optionally its model file.
//!
//! Usage: `cargo run --example published_model -- [model.json]`

use gauss_cann::document::{published_correlated_model, summary, ModelDocument, Provenance};
use gauss_cann::kinematics::{DeformationState, Orientation};
use gauss_cann::stress::predict;

fn main() -> gauss_cann::Result<()> {
    let model = published_correlated_model()?;
    print!("{}", summary(&model));
    for (l1, l2, o) in [
        (1.1, 1.0, Orientation::Aligned0_90),
        (1.0, 1.1, Orientation::Aligned0_90),
        (1.1, 1.1, Orientation::Offset45),
    ] {
        let p = predict(&model, &DeformationState::new(l1, l2, o)?)?;
        println!(
            "l1={l1} l2={l2} {}: P11 {:.3} ± {:.3} kPa, P22 {:.3} ± {:.3} kPa",
            o.tag(),
            p.mu11,
            p.std11(),
            p.mu22,
            p.std22()
        );
    }
    if let Some(path) = std::env::args().nth(1) {
        ModelDocument::from_model(&model, Provenance::default()).save(&path)?;
        println!("saved {path}");
    }
    Ok(())
}
