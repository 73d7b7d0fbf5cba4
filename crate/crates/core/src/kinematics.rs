//! Kinematics of incompressible, shear-free biaxial extension.
//!
//! The deformation gradient is `F = diag(λ1, λ2, 1/(λ1 λ2))`, so `C = FᵀF` is diagonal and every
//! invariant is a closed-form polynomial in the two in-plane stretches. Fiber directions lie in
//! the loading plane; the mounting orientation decides where the warp fiber points.
//!
//! All derivatives are taken with respect to `(λ1, λ2)` after eliminating `λ3`, which makes
//! `∂ψ̂/∂λ1` the first Piola stress `P11` with the incompressibility pressure already folded in.

use std::f64::consts::FRAC_PI_3;
use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the specimen is mounted relative to the two loading axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    /// Warp fiber along loading axis 1.
    #[serde(rename = "0-90")]
    Aligned0_90,
    /// Warp fiber at +45° between the loading axes.
    #[serde(rename = "pm45")]
    Offset45,
}

impl Orientation {
    pub fn tag(self) -> &'static str {
        match self {
            Orientation::Aligned0_90 => "0-90",
            Orientation::Offset45 => "pm45",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag.trim() {
            "0-90" | "0/90" => Some(Orientation::Aligned0_90),
            "pm45" | "-45/+45" | "+-45" => Some(Orientation::Offset45),
            _ => None,
        }
    }

    /// In-plane angle of the warp fiber, measured from loading axis 1.
    fn warp_angle(self) -> f64 {
        match self {
            Orientation::Aligned0_90 => 0.0,
            Orientation::Offset45 => FRAC_PI_4,
        }
    }
}

/// A biaxial stretch state. The out-of-plane stretch is implied by incompressibility and never
/// stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformationState {
    lambda1: f64,
    lambda2: f64,
    orientation: Orientation,
}

impl DeformationState {
    pub fn new(lambda1: f64, lambda2: f64, orientation: Orientation) -> Result<Self> {
        if !(lambda1.is_finite() && lambda1 > 0.0) || !(lambda2.is_finite() && lambda2 > 0.0) {
            return Err(Error::Domain(format!(
                "stretches must be positive and finite, got λ1 = {lambda1}, λ2 = {lambda2}"
            )));
        }
        Ok(Self {
            lambda1,
            lambda2,
            orientation,
        })
    }

    pub fn identity(orientation: Orientation) -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            orientation,
        }
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn lambda3(&self) -> f64 {
        1.0 / (self.lambda1 * self.lambda2)
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Diagonal of the right Cauchy-Green tensor.
    pub fn cauchy_green(&self) -> [f64; 3] {
        let l3 = self.lambda3();
        [
            self.lambda1 * self.lambda1,
            self.lambda2 * self.lambda2,
            l3 * l3,
        ]
    }
}

/// Warp direction `w` and the two offset fibers `sI`, `sII` at ±60° from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberFrame {
    pub w: [f64; 3],
    pub s_i: [f64; 3],
    pub s_ii: [f64; 3],
}

impl FiberFrame {
    pub fn for_orientation(orientation: Orientation) -> Self {
        let theta = orientation.warp_angle();
        let planar = |a: f64| [a.cos(), a.sin(), 0.0];
        Self {
            w: planar(theta),
            s_i: planar(theta + FRAC_PI_3),
            s_ii: planar(theta - FRAC_PI_3),
        }
    }
}

/// Invariants of `C` and their partial derivatives with respect to `(λ1, λ2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantSet {
    pub i1: f64,
    pub i2: f64,
    pub i4w: f64,
    pub i4s_i: f64,
    pub i4s_ii: f64,
    pub d_i1: [f64; 2],
    pub d_i2: [f64; 2],
    pub d_i4w: [f64; 2],
    pub d_i4s_i: [f64; 2],
    pub d_i4s_ii: [f64; 2],
}

impl InvariantSet {
    /// The five invariant values in a fixed order: I1, I2, I4w, I4sI, I4sII.
    pub fn values(&self) -> [f64; 5] {
        [self.i1, self.i2, self.i4w, self.i4s_i, self.i4s_ii]
    }

    /// The ten partial derivatives, in the same order as [`InvariantSet::values`], each as
    /// `(∂/∂λ1, ∂/∂λ2)`.
    pub fn derivatives(&self) -> [[f64; 2]; 5] {
        [self.d_i1, self.d_i2, self.d_i4w, self.d_i4s_i, self.d_i4s_ii]
    }
}

// Written as λ2² + cos²θ (λ1² − λ2²) so that every fiber sees exactly λ² under equibiaxial stretch.
fn fiber_invariant(v: &[f64; 3], l1: f64, l2: f64) -> (f64, [f64; 2]) {
    let c2 = v[0] * v[0];
    let s2 = 1.0 - c2;
    (l2 * l2 + c2 * (l1 * l1 - l2 * l2), [2.0 * c2 * l1, 2.0 * s2 * l2])
}

pub fn invariants(state: &DeformationState) -> InvariantSet {
    let (l1, l2) = (state.lambda1, state.lambda2);
    let frame = FiberFrame::for_orientation(state.orientation);

    let [c11, c22, c33] = state.cauchy_green();
    let i1 = c11 + c22 + c33;
    let i2 = 0.5 * (i1 * i1 - (c11 * c11 + c22 * c22 + c33 * c33));

    // I1 = λ1² + λ2² + λ1⁻²λ2⁻², I2 = λ1²λ2² + λ1⁻² + λ2⁻²
    let d_i1 = [
        2.0 * l1 - 2.0 * c33 / l1,
        2.0 * l2 - 2.0 * c33 / l2,
    ];
    let d_i2 = [
        2.0 * l1 * c22 - 2.0 / (c11 * l1),
        2.0 * l2 * c11 - 2.0 / (c22 * l2),
    ];

    let (i4w, d_i4w) = fiber_invariant(&frame.w, l1, l2);
    let (i4s_i, d_i4s_i) = fiber_invariant(&frame.s_i, l1, l2);
    let (i4s_ii, d_i4s_ii) = fiber_invariant(&frame.s_ii, l1, l2);

    InvariantSet {
        i1,
        i2,
        i4w,
        i4s_i,
        i4s_ii,
        d_i1,
        d_i2,
        d_i4w,
        d_i4s_i,
        d_i4s_ii,
    }
}

/// Relative error between `analytic` and `approx`, measured against `max(|analytic|, floor)`.
///
/// The floor keeps derivatives that vanish analytically (e.g. every invariant slope at the
/// identity) from turning finite-difference rounding noise into huge relative errors.
pub fn relative_error(analytic: f64, approx: f64, floor: f64) -> f64 {
    (analytic - approx).abs() / analytic.abs().max(floor)
}

/// Largest relative error between the analytic invariant derivatives and central differences
/// with step `h`. Errors are scaled by `max(|analytic|, 1)` since the invariants are O(1).
pub fn invariant_derivatives_check(state: &DeformationState, h: f64) -> f64 {
    let analytic = invariants(state).derivatives();
    let at = |l1: f64, l2: f64| {
        let s = DeformationState {
            lambda1: l1,
            lambda2: l2,
            orientation: state.orientation,
        };
        invariants(&s).values()
    };
    let (l1, l2) = (state.lambda1, state.lambda2);
    let (p1, m1) = (at(l1 + h, l2), at(l1 - h, l2));
    let (p2, m2) = (at(l1, l2 + h), at(l1, l2 - h));

    let mut worst = 0.0f64;
    for k in 0..5 {
        let fd1 = (p1[k] - m1[k]) / (2.0 * h);
        let fd2 = (p2[k] - m2[k]) / (2.0 * h);
        worst = worst
            .max(relative_error(analytic[k][0], fd1, 1.0))
            .max(relative_error(analytic[k][1], fd2, 1.0));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn state(l1: f64, l2: f64, o: Orientation) -> DeformationState {
        DeformationState::new(l1, l2, o).unwrap()
    }

    // Independent route: build the full 3x3 C and contract it with the fiber vectors.
    fn oracle(l1: f64, l2: f64, o: Orientation) -> [f64; 5] {
        let f = [[l1, 0.0, 0.0], [0.0, l2, 0.0], [0.0, 0.0, 1.0 / (l1 * l2)]];
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    c[i][j] += f[k][i] * f[k][j];
                }
            }
        }
        let tr = c[0][0] + c[1][1] + c[2][2];
        let cc: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| c[i][j] * c[i][j])
            .sum();
        let quad = |v: [f64; 3]| -> f64 {
            (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| v[i] * c[i][j] * v[j])
                .sum()
        };
        let fr = FiberFrame::for_orientation(o);
        [tr, 0.5 * (tr * tr - cc), quad(fr.w), quad(fr.s_i), quad(fr.s_ii)]
    }

    #[test]
    fn identity_invariants() {
        for o in [Orientation::Aligned0_90, Orientation::Offset45] {
            let inv = invariants(&DeformationState::identity(o));
            for (v, want) in inv.values().iter().zip([3.0, 3.0, 1.0, 1.0, 1.0]) {
                assert_abs_diff_eq!(*v, want, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn uniaxial_values_match_matrix_oracle() {
        let inv = invariants(&state(2.0, 1.0, Orientation::Aligned0_90));
        let want = oracle(2.0, 1.0, Orientation::Aligned0_90);
        for (got, w) in inv.values().iter().zip(want) {
            assert_abs_diff_eq!(*got, w, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(inv.i1, 5.25, epsilon = 1e-14);
        assert_abs_diff_eq!(inv.i2, 5.25, epsilon = 1e-14);
        assert_abs_diff_eq!(inv.i4w, 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(inv.i4s_i, 1.75, epsilon = 1e-12);
        assert_abs_diff_eq!(inv.i4s_ii, 1.75, epsilon = 1e-12);

        let off = invariants(&state(2.0, 1.0, Orientation::Offset45));
        assert_abs_diff_eq!(off.i4w, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(off.i4w, oracle(2.0, 1.0, Orientation::Offset45)[2], epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_positive_stretch() {
        assert!(matches!(
            DeformationState::new(0.0, 1.0, Orientation::Aligned0_90),
            Err(Error::Domain(_))
        ));
        assert!(DeformationState::new(1.0, -2.0, Orientation::Offset45).is_err());
        assert!(DeformationState::new(f64::NAN, 1.0, Orientation::Offset45).is_err());
    }

    #[test]
    fn fiber_frame_geometry() {
        for o in [Orientation::Aligned0_90, Orientation::Offset45] {
            let fr = FiberFrame::for_orientation(o);
            for v in [fr.w, fr.s_i, fr.s_ii] {
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                assert_abs_diff_eq!(n, 1.0, epsilon = 1e-12);
                assert_eq!(v[2], 0.0);
            }
            let signed = |a: [f64; 3], b: [f64; 3]| (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]);
            assert_abs_diff_eq!(signed(fr.w, fr.s_i), 60f64.to_radians(), epsilon = 1e-12);
            assert_abs_diff_eq!(signed(fr.w, fr.s_ii), -60f64.to_radians(), epsilon = 1e-12);
        }
    }

    #[test]
    fn derivative_check_examples() {
        let cases = [
            (1.3, 0.9, Orientation::Aligned0_90),
            (1.0, 1.0, Orientation::Offset45),
            (1.5, 1.5, Orientation::Offset45),
        ];
        for (l1, l2, o) in cases {
            assert!(invariant_derivatives_check(&state(l1, l2, o), 1e-6) < 1e-6);
        }
    }

    #[test]
    fn offset_equibiaxial_fibers_coincide() {
        let inv = invariants(&state(1.37, 1.37, Orientation::Offset45));
        assert_eq!(inv.i4s_i, inv.i4s_ii);
    }
}
