//! Invariants of incompressible biaxial extension in both mounts, with a finite-difference check
//! of their stretch derivatives.

use gauss_cann::kinematics::{invariant_derivatives_check, invariants, DeformationState, Orientation};

fn main() -> gauss_cann::Result<()> {
    println!("{:<6} {:>5} {:>5} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9}", "mount", "l1", "l2", "I1", "I2", "I4w", "I4sI", "I4sII", "fd err");
    for orientation in [Orientation::Aligned0_90, Orientation::Offset45] {
        for (l1, l2) in [(1.0, 1.0), (2.0, 1.0), (1.1, 1.05), (1.15, 1.15)] {
            let state = DeformationState::new(l1, l2, orientation)?;
            let inv = invariants(&state);
            let err = invariant_derivatives_check(&state, 1e-6);
            println!(
                "{:<6} {l1:>5.2} {l2:>5.2} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {err:>9.2e}",
                orientation.tag(),
                inv.i1,
                inv.i2,
                inv.i4w,
                inv.i4s_i,
                inv.i4s_ii
            );
        }
    }
    Ok(())
}
