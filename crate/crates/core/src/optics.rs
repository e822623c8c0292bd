//! SU(2) polarization-mode rotations and their wave-plate realization.
//!
//! The canonical rotation is
//!
//! ```text
//! u(theta, phi) = [  cos θ            e^{iφ} sin θ ]
//!                 [ -e^{-iφ} sin θ    cos θ        ]
//! ```
//!
//! acting on mode operators as `(b1, b2)^T = u (a1, a2)^T`. A coaxial stack of
//! two quarter-wave plates and one half-wave plate (Q-Q-H) realizes `u` up to a
//! global phase for the three setting families used by the measurement plan.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

const UNITARY_TOL: f64 = 1e-12;
const FAMILY_TOL: f64 = 1e-12;

/// 2×2 unitary acting on the mode pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Su2Element {
    m: Matrix2<C64>,
}

impl Su2Element {
    /// Checks unitarity to 1e-12.
    pub fn new(m: Matrix2<C64>) -> Result<Self> {
        let err = unitarity_error(&m);
        if err > UNITARY_TOL {
            return Err(Error::NotUnitary(err));
        }
        Ok(Self { m })
    }

    pub fn identity() -> Self {
        Self { m: Matrix2::identity() }
    }

    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.m
    }

    pub fn determinant(&self) -> C64 {
        self.m.determinant()
    }

    pub fn adjoint(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    /// `max |m† m - I|`.
    pub fn unitarity_error(&self) -> f64 {
        unitarity_error(&self.m)
    }

    /// Distance to `other` modulo a global phase: `max |self - λ other|`
    /// with `λ` the unit phase aligning the two in the Frobenius sense.
    pub fn projective_distance(&self, other: &Su2Element) -> f64 {
        let overlap: C64 = other.m.iter().zip(self.m.iter()).map(|(b, a)| b.conj() * a).sum();
        let lambda = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        (self.m - other.m * lambda).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl std::ops::Mul for Su2Element {
    type Output = Su2Element;

    fn mul(self, rhs: Su2Element) -> Su2Element {
        Su2Element { m: self.m * rhs.m }
    }
}

fn unitarity_error(m: &Matrix2<C64>) -> f64 {
    (m.adjoint() * m - Matrix2::identity())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// The canonical rotation `u(theta, phi)`; determinant 1.
pub fn su2(theta: f64, phi: f64) -> Su2Element {
    let (s, co) = theta.sin_cos();
    let e = C64::from_polar(1.0, phi);
    Su2Element {
        m: Matrix2::new(c(co, 0.0), e * s, -e.conj() * s, c(co, 0.0)),
    }
}

/// Half-wave plate rotated by `phi`: `i [cos 2φ, sin 2φ; sin 2φ, -cos 2φ]`.
pub fn half_wave(phi: f64) -> Su2Element {
    let (s2, c2) = (2.0 * phi).sin_cos();
    let i = c(0.0, 1.0);
    Su2Element {
        m: Matrix2::new(i * c2, i * s2, i * s2, -i * c2),
    }
}

/// Quarter-wave plate rotated by `phi`:
/// `(i/√2) [cos 2φ - i, sin 2φ; sin 2φ, -cos 2φ - i]`.
pub fn quarter_wave(phi: f64) -> Su2Element {
    let (s2, c2) = (2.0 * phi).sin_cos();
    let k = c(0.0, FRAC_1_SQRT_2);
    Su2Element {
        m: Matrix2::new(k * c(c2, -1.0), k * s2, k * s2, k * c(-c2, -1.0)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlateKind {
    Quarter,
    Half,
}

/// A single plate; the angle is reduced into `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavePlateSetting {
    pub kind: PlateKind,
    pub angle: f64,
}

impl WavePlateSetting {
    pub fn new(kind: PlateKind, angle: f64) -> Self {
        Self {
            kind,
            angle: angle.rem_euclid(PI),
        }
    }

    pub fn matrix(&self) -> Su2Element {
        match self.kind {
            PlateKind::Quarter => quarter_wave(self.angle),
            PlateKind::Half => half_wave(self.angle),
        }
    }
}

/// Rotation angles (radians) of the Q-Q-H stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GadgetSetting {
    pub q1: f64,
    pub q2: f64,
    pub h: f64,
}

impl GadgetSetting {
    /// The three plates in stack order, angles reduced into `[0, π)`.
    pub fn plates(&self) -> [WavePlateSetting; 3] {
        [
            WavePlateSetting::new(PlateKind::Quarter, self.q1),
            WavePlateSetting::new(PlateKind::Quarter, self.q2),
            WavePlateSetting::new(PlateKind::Half, self.h),
        ]
    }
}

fn same_angle(a: f64, b: f64) -> bool {
    (a - b).abs() < FAMILY_TOL
}

/// Plate angles realizing `u(theta, phi)` for the supported families:
/// `phi = 0`, `phi = π/2` (any `theta`) and the single point `(π/4, π/4)`.
pub fn gadget_for(theta: f64, phi: f64) -> Result<GadgetSetting> {
    if !theta.is_finite() || !phi.is_finite() {
        return Err(Error::NonFinite("gadget angle"));
    }
    if same_angle(phi, 0.0) {
        Ok(GadgetSetting {
            q1: FRAC_PI_4,
            q2: FRAC_PI_4,
            h: -FRAC_PI_4 + theta / 2.0,
        })
    } else if same_angle(phi, FRAC_PI_2) {
        Ok(GadgetSetting {
            q1: FRAC_PI_2,
            q2: theta + FRAC_PI_2,
            h: theta / 2.0,
        })
    } else if same_angle(phi, FRAC_PI_4) && same_angle(theta, FRAC_PI_4) {
        let half_atan = 2f64.sqrt().atan() / 2.0;
        Ok(GadgetSetting {
            q1: FRAC_PI_4 + half_atan,
            q2: 5.0 * PI / 12.0 + half_atan,
            h: PI / 12.0,
        })
    } else {
        Err(Error::UnsupportedGadget { theta, phi })
    }
}

/// `Q_{q1} · Q_{q2} · H_{h}` as a matrix product in the written order.
///
/// The half-wave plate's matrix is rightmost, so it is the first plate the
/// mode operators pass through. The reversed product does not reproduce
/// `u(theta, 0)`; see `written_order_is_the_working_order` below.
pub fn compose_gadget(g: &GadgetSetting) -> Su2Element {
    quarter_wave(g.q1) * quarter_wave(g.q2) * half_wave(g.h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &Su2Element, b: &Matrix2<C64>, tol: f64) -> bool {
        (a.matrix() - b).iter().all(|z| z.norm() < tol)
    }

    #[test]
    fn su2_examples() {
        assert!(close(&su2(0.0, 1.234), &Matrix2::identity(), 1e-15));
        let swap = Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0));
        assert!(close(&su2(FRAC_PI_2, 0.0), &swap, 1e-15));
        let r = FRAC_1_SQRT_2;
        let want = Matrix2::new(c(r, 0.0), c(0.0, r), c(0.0, r), c(r, 0.0));
        assert!(close(&su2(FRAC_PI_4, FRAC_PI_2), &want, 1e-15));
    }

    #[test]
    fn plate_examples() {
        let i = c(0.0, 1.0);
        let h0 = Matrix2::new(i, c(0.0, 0.0), c(0.0, 0.0), -i);
        assert!(close(&half_wave(0.0), &h0, 1e-15));
        let h45 = Matrix2::new(c(0.0, 0.0), i, i, c(0.0, 0.0));
        assert!(close(&half_wave(FRAC_PI_4), &h45, 1e-15));
        let k = c(0.0, FRAC_1_SQRT_2);
        let q0 = Matrix2::new(k * c(1.0, -1.0), c(0.0, 0.0), c(0.0, 0.0), k * c(-1.0, -1.0));
        assert!(close(&quarter_wave(0.0), &q0, 1e-15));
    }

    #[test]
    fn gadget_family_angles() {
        let g = gadget_for(0.6, 0.0).unwrap();
        assert_eq!(
            g,
            GadgetSetting {
                q1: FRAC_PI_4,
                q2: FRAC_PI_4,
                h: -FRAC_PI_4 + 0.3
            }
        );
        let g = gadget_for(1.1, FRAC_PI_2).unwrap();
        assert_eq!(
            g,
            GadgetSetting {
                q1: FRAC_PI_2,
                q2: 1.1 + FRAC_PI_2,
                h: 0.55
            }
        );
        let g = gadget_for(FRAC_PI_4, FRAC_PI_4).unwrap();
        let a = 2f64.sqrt().atan() / 2.0;
        assert!((g.q1 - (FRAC_PI_4 + a)).abs() < 1e-15);
        assert!((g.q2 - (5.0 * PI / 12.0 + a)).abs() < 1e-15);
        assert!((g.h - PI / 12.0).abs() < 1e-15);
        assert!(matches!(gadget_for(0.3, 0.1), Err(Error::UnsupportedGadget { .. })));
        assert!(matches!(
            gadget_for(0.3, FRAC_PI_4),
            Err(Error::UnsupportedGadget { .. })
        ));
    }

    #[test]
    fn gadget_matches_rotation() {
        for (t, p) in [(0.3, 0.0), (1.1, FRAC_PI_2), (FRAC_PI_4, FRAC_PI_4)] {
            let g = compose_gadget(&gadget_for(t, p).unwrap());
            assert!(g.projective_distance(&su2(t, p)) < 1e-10, "({t},{p})");
        }
        // the mixed setting is the explicit (1/√2)(1, e^{iπ/4}; -e^{-iπ/4}, 1)
        let w = C64::from_polar(1.0, FRAC_PI_4);
        let explicit =
            Su2Element::new(Matrix2::new(c(1.0, 0.0), w, -w.conj(), c(1.0, 0.0)) * c(FRAC_1_SQRT_2, 0.0)).unwrap();
        let g = compose_gadget(&gadget_for(FRAC_PI_4, FRAC_PI_4).unwrap());
        assert!(g.projective_distance(&explicit) < 1e-10);
    }

    #[test]
    fn written_order_is_the_working_order() {
        let g = gadget_for(0.3, 0.0).unwrap();
        let reversed = half_wave(g.h) * quarter_wave(g.q2) * quarter_wave(g.q1);
        assert!(reversed.projective_distance(&su2(0.3, 0.0)) > 0.1);
        assert!(compose_gadget(&g).projective_distance(&su2(0.3, 0.0)) < 1e-12);
    }

    #[test]
    fn non_unitary_rejected() {
        let m = Matrix2::new(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        assert!(matches!(Su2Element::new(m), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn plate_settings_reduce_angle() {
        let p = WavePlateSetting::new(PlateKind::Half, -FRAC_PI_4);
        assert!((p.angle - 3.0 * FRAC_PI_4).abs() < 1e-15);
        assert!(p.matrix().projective_distance(&half_wave(-FRAC_PI_4)) < 1e-15);
        let plates = gadget_for(0.2, 0.0).unwrap().plates();
        assert!(plates.iter().all(|p| (0.0..PI).contains(&p.angle)));
    }

    proptest! {
        #[test]
        fn plates_are_unitary(phi in -10.0f64..10.0) {
            prop_assert!(quarter_wave(phi).unitarity_error() < 1e-14);
            prop_assert!(half_wave(phi).unitarity_error() < 1e-14);
        }

        #[test]
        fn half_wave_squares_to_minus_identity(phi in -10.0f64..10.0) {
            let h = half_wave(phi);
            prop_assert!(close(&(h * h), &(-Matrix2::<C64>::identity()), 1e-14));
        }

        #[test]
        fn two_quarters_make_a_half(phi in -10.0f64..10.0) {
            let q = quarter_wave(phi);
            prop_assert!((q * q).projective_distance(&half_wave(phi)) < 1e-14);
        }

        #[test]
        fn plates_are_pi_periodic(phi in -5.0f64..5.0) {
            prop_assert!(close(&half_wave(phi + PI), half_wave(phi).matrix(), 1e-14));
            prop_assert!(close(&quarter_wave(phi + PI), quarter_wave(phi).matrix(), 1e-14));
        }

        #[test]
        fn su2_is_special_unitary(theta in -7.0f64..7.0, phi in -7.0f64..7.0) {
            let u = su2(theta, phi);
            prop_assert!(u.unitarity_error() < 1e-12);
            prop_assert!((u.determinant() - c(1.0, 0.0)).norm() < 1e-12);
        }

        #[test]
        fn real_rotations_compose(t1 in -3.0f64..3.0, t2 in -3.0f64..3.0) {
            prop_assert!(close(&(su2(t1, 0.0) * su2(t2, 0.0)), su2(t1 + t2, 0.0).matrix(), 1e-12));
        }
    }
}
