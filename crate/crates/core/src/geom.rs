//! Planar rigid-body poses and the circular-trajectory fitness.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// A planar pose (or displacement) in body-length units.
///
/// `yaw` is kept in `(-pi, pi]` by every constructor and operation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    Ok(wrap(a))
}

/// Unchecked variant of [`wrap_angle`] for values already known to be finite.
#[inline]
pub(crate) fn wrap(a: f64) -> f64 {
    let r = PI - (PI - a).rem_euclid(TAU);
    // rem_euclid can return exactly TAU after rounding
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 {
        x: 0.0,
        y: 0.0,
        yaw: 0.0,
    };

    pub fn new(x: f64, y: f64, yaw: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::NonFinite("pose"));
        }
        Ok(Pose2 {
            x,
            y,
            yaw: wrap_angle(yaw)?,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.yaw.is_finite()
    }

    /// `self ∘ other`: applies `other` expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.yaw.sin_cos();
        Pose2 {
            x: self.x + c * other.x - s * other.y,
            y: self.y + s * other.x + c * other.y,
            yaw: wrap(self.yaw + other.yaw),
        }
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.yaw.sin_cos();
        Pose2 {
            x: -c * self.x - s * self.y,
            y: s * self.x - c * self.y,
            yaw: wrap(-self.yaw),
        }
    }

    /// Displacement from `self` to `other`, expressed in the frame of `self`.
    pub fn between(&self, other: &Pose2) -> Pose2 {
        self.inverse().compose(other)
    }

    pub fn norm_xy(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Checked composition.
pub fn se2_compose(a: &Pose2, b: &Pose2) -> Result<Pose2> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("pose"));
    }
    Ok(a.compose(b))
}

/// Angular distance between the final heading and the heading an ideal
/// circular arc from the origin (initial heading +x) would have at the same
/// endpoint. Always `<= 0`.
pub fn circular_fitness(d: &Pose2) -> f64 {
    if d.x == 0.0 && d.y == 0.0 {
        return -wrap(d.yaw).abs();
    }
    let ideal = 2.0 * d.y.atan2(d.x);
    -wrap(d.yaw - ideal).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_angle(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI).unwrap(), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-3.5 * PI).unwrap(), 0.5 * PI, epsilon = 1e-12);
        assert_eq!(wrap_angle(PI).unwrap(), PI);
        assert_eq!(wrap_angle(-PI).unwrap(), PI);
        assert!(wrap_angle(f64::NAN).is_err());
        assert!(wrap_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn compose_examples() {
        let p = Pose2::new(0.3, -1.2, 2.0).unwrap();
        assert_eq!(Pose2::IDENTITY.compose(&p), p);

        let a = Pose2::new(0.0, 0.0, PI / 2.0).unwrap();
        let b = Pose2::new(1.0, 0.0, 0.0).unwrap();
        let r = se2_compose(&a, &b).unwrap();
        assert_abs_diff_eq!(r.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.y, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.yaw, PI / 2.0, epsilon = 1e-15);

        let id = p.compose(&p.inverse());
        assert_abs_diff_eq!(id.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(id.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(id.yaw, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn circular_fitness_examples() {
        assert_eq!(circular_fitness(&Pose2::new(1.0, 0.0, 0.0).unwrap()), 0.0);
        assert_abs_diff_eq!(
            circular_fitness(&Pose2::new(0.0, 1.0, PI / 2.0).unwrap()),
            -PI / 2.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            circular_fitness(&Pose2::new(0.5, 0.5, PI / 2.0).unwrap()),
            0.0,
            epsilon = 1e-12
        );
        // degenerate: stationary, not rotating
        assert_eq!(circular_fitness(&Pose2::IDENTITY), 0.0);
        assert_abs_diff_eq!(
            circular_fitness(&Pose2::new(0.0, 0.0, 0.4).unwrap()),
            -0.4,
            epsilon = 1e-15
        );
    }

    fn pose() -> impl Strategy<Value = Pose2> {
        (-5.0..5.0f64, -5.0..5.0f64, -PI..PI).prop_map(|(x, y, t)| Pose2::new(x, y, t).unwrap())
    }

    fn angle_diff(a: f64, b: f64) -> f64 {
        wrap(a - b).abs()
    }

    proptest! {
        #[test]
        fn compose_is_associative(a in pose(), b in pose(), c in pose()) {
            let l = a.compose(&b).compose(&c);
            let r = a.compose(&b.compose(&c));
            prop_assert!((l.x - r.x).abs() < 1e-12);
            prop_assert!((l.y - r.y).abs() < 1e-12);
            prop_assert!(angle_diff(l.yaw, r.yaw) < 1e-12);
        }

        #[test]
        fn wrap_stays_in_range(a in -1e6..1e6f64) {
            let w = wrap_angle(a).unwrap();
            prop_assert!(w > -PI && w <= PI);
            let k = ((a - w) / TAU).round();
            prop_assert!((a - w - k * TAU).abs() < 1e-6);
        }

        #[test]
        fn circular_fitness_nonpositive_and_scale_invariant(d in pose(), lambda in 0.01..50.0f64) {
            let f = circular_fitness(&d);
            prop_assert!(f <= 0.0);
            let scaled = Pose2 { x: d.x * lambda, y: d.y * lambda, yaw: d.yaw };
            prop_assert!((circular_fitness(&scaled) - f).abs() < 1e-9);
        }

        #[test]
        fn circular_fitness_zero_on_ideal_arc(x in -3.0..3.0f64, y in -3.0..3.0f64) {
            prop_assume!(x.hypot(y) > 1e-6);
            let d = Pose2::new(x, y, 2.0 * y.atan2(x)).unwrap();
            prop_assert!(circular_fitness(&d).abs() < 1e-12);
        }
    }
}
