//! Exterior conformal maps `T` from the fluid domain onto `{|w| > 1}` and the
//! scaled family `T_eps(z) = T(z / eps)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::{from_complex, to_complex, Vec2};

/// Biholomorphism from the exterior of a body onto the exterior of the unit disk,
/// normalized at infinity as `T(z) = beta z + beta_tilde + O(1/z)`.
///
/// Implementors must supply the first two derivatives analytically; the kernel
/// and contour code never differentiate numerically.
pub trait ConformalMap: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn forward(&self, z: Complex64) -> Complex64;
    fn derivative(&self, z: Complex64) -> Complex64;
    fn second_derivative(&self, z: Complex64) -> Complex64;
    /// `T^-1` on `|w| >= 1`.
    fn inverse(&self, w: Complex64) -> Complex64;
    fn beta(&self) -> f64;
    fn beta_tilde(&self) -> Complex64;

    /// True only for the identity map, which unlocks closed-form potentials.
    fn is_unit_disk(&self) -> bool {
        false
    }
}

/// `T(z) = z`: the unit disk.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DiskMap;

pub fn unit_disk_map() -> DiskMap {
    DiskMap
}

impl ConformalMap for DiskMap {
    fn name(&self) -> String {
        "disk".to_owned()
    }
    fn forward(&self, z: Complex64) -> Complex64 {
        z
    }
    fn derivative(&self, _z: Complex64) -> Complex64 {
        Complex64::new(1.0, 0.0)
    }
    fn second_derivative(&self, _z: Complex64) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    fn inverse(&self, w: Complex64) -> Complex64 {
        w
    }
    fn beta(&self) -> f64 {
        1.0
    }
    fn beta_tilde(&self) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    fn is_unit_disk(&self) -> bool {
        true
    }
}

/// Map whose inverse is `w -> w + a/w`. The body is the ellipse with
/// semi-axes `1 + a` and `1 - a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JoukowskiMap {
    a: f64,
}

impl JoukowskiMap {
    pub fn new(a: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a) {
            return Err(Error::InvalidParameter {
                name: "a",
                reason: format!("joukowski parameter must lie in [0, 1), got {a}"),
            });
        }
        Ok(Self { a })
    }

    pub fn a(&self) -> f64 {
        self.a
    }
}

pub fn joukowski_family_map(a: f64) -> Result<JoukowskiMap> {
    JoukowskiMap::new(a)
}

impl ConformalMap for JoukowskiMap {
    fn name(&self) -> String {
        format!("joukowski(a={})", self.a)
    }

    fn forward(&self, z: Complex64) -> Complex64 {
        // roots of w^2 - z w + a = 0; their product is a < 1, so exactly one
        // has modulus >= 1 outside the body
        let s = (z * z - 4.0 * self.a).sqrt();
        let plus = 0.5 * (z + s);
        let minus = 0.5 * (z - s);
        if plus.norm_sqr() >= minus.norm_sqr() {
            plus
        } else {
            minus
        }
    }

    fn derivative(&self, z: Complex64) -> Complex64 {
        let w = self.forward(z);
        let w2 = w * w;
        w2 / (w2 - self.a)
    }

    fn second_derivative(&self, z: Complex64) -> Complex64 {
        let w = self.forward(z);
        let d = w * w - self.a;
        -2.0 * self.a * w * w * w / (d * d * d)
    }

    fn inverse(&self, w: Complex64) -> Complex64 {
        w + self.a / w
    }

    fn beta(&self) -> f64 {
        1.0
    }

    fn beta_tilde(&self) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }

    fn is_unit_disk(&self) -> bool {
        self.a == 0.0
    }
}

/// A body of shape `map` rescaled by `epsilon` about the origin.
#[derive(Debug, Clone)]
pub struct BodyGeometry {
    map: Arc<dyn ConformalMap>,
    epsilon: f64,
}

/// Points with `|T_eps(z)| < 1 - BODY_SLACK` are considered inside the body.
const BODY_SLACK: f64 = 1e-12;

impl BodyGeometry {
    pub fn new(map: Arc<dyn ConformalMap>, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must be positive and finite, got {epsilon}"),
            });
        }
        Ok(Self { map, epsilon })
    }

    pub fn disk(epsilon: f64) -> Result<Self> {
        Self::new(Arc::new(DiskMap), epsilon)
    }

    pub fn joukowski(a: f64, epsilon: f64) -> Result<Self> {
        Self::new(Arc::new(JoukowskiMap::new(a)?), epsilon)
    }

    pub fn map(&self) -> &Arc<dyn ConformalMap> {
        &self.map
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Same shape at another scale.
    pub fn rescaled(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.map.clone(), epsilon)
    }

    pub fn is_disk(&self) -> bool {
        self.map.is_unit_disk()
    }

    /// `T_eps(z) = T(z / eps)`.
    #[inline]
    pub fn forward(&self, z: Complex64) -> Complex64 {
        self.map.forward(z / self.epsilon)
    }

    #[inline]
    pub fn derivative(&self, z: Complex64) -> Complex64 {
        self.map.derivative(z / self.epsilon) / self.epsilon
    }

    #[inline]
    pub fn second_derivative(&self, z: Complex64) -> Complex64 {
        self.map.second_derivative(z / self.epsilon) / (self.epsilon * self.epsilon)
    }

    /// `T_eps^-1(w) = eps T^-1(w)`.
    #[inline]
    pub fn inverse(&self, w: Complex64) -> Complex64 {
        self.epsilon * self.map.inverse(w)
    }

    pub fn is_outside(&self, x: Vec2) -> bool {
        self.forward(to_complex(x)).norm() >= 1.0 - BODY_SLACK
    }

    pub fn ensure_outside(&self, x: Vec2) -> Result<()> {
        if self.is_outside(x) {
            Ok(())
        } else {
            Err(Error::InsideBody(x))
        }
    }

    /// Boundary point at parameter `t` in `[0, 1)`, counter-clockwise.
    pub fn boundary_point(&self, t: f64) -> Vec2 {
        from_complex(self.inverse(Complex64::from_polar(1.0, 2.0 * PI * t)))
    }
}

/// Coefficients `c_1..c_count` of `f(w) = sum_k c_k / w^k` by the trapezoid
/// rule on `|w| = radius`, certified against a second, larger radius.
///
/// `c_k = (1 / 2 pi i) \oint f(w) w^(k-1) dw`.
pub fn laurent_coefficients<F>(f: F, radius: f64, count: usize) -> Result<Vec<Complex64>>
where
    F: Fn(Complex64) -> Complex64,
{
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidParameter {
            name: "radius",
            reason: format!("must be positive, got {radius}"),
        });
    }
    if count == 0 {
        return Err(Error::InvalidParameter {
            name: "count",
            reason: "at least one coefficient is required".to_owned(),
        });
    }
    const NODES: usize = 256;
    const AGREEMENT: f64 = 1e-8;

    let sample = |rho: f64| -> Result<Vec<Complex64>> {
        let values: Vec<(Complex64, Complex64)> = (0..NODES)
            .map(|n| {
                let w = Complex64::from_polar(rho, 2.0 * PI * n as f64 / NODES as f64);
                (w, f(w))
            })
            .collect();
        if values
            .iter()
            .any(|(_, v)| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::NonFinite("laurent_coefficients"));
        }
        Ok((1..=count)
            .map(|k| {
                let sum: Complex64 = values.iter().map(|(w, v)| v * w.powu(k as u32)).sum();
                sum / NODES as f64
            })
            .collect())
    };

    let first = sample(radius)?;
    let second = sample(radius * 1.5)?;
    let worst = first
        .iter()
        .zip(&second)
        .map(|(a, b)| (a - b).norm() / (1.0 + a.norm()))
        .fold(0.0, f64::max);
    if worst > AGREEMENT {
        return Err(Error::NotConverged {
            what: "laurent coefficients",
            residual: worst,
            tolerance: AGREEMENT,
        });
    }
    Ok(first)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn disk_is_identity() {
        let m = unit_disk_map();
        assert_eq!(m.forward(c(2.0, 0.0)), c(2.0, 0.0));
        assert_eq!(m.beta(), 1.0);
        assert_eq!(m.beta_tilde(), c(0.0, 0.0));
        let z = c(0.3, 1.1);
        assert_eq!(m.inverse(m.forward(z)), z);
    }

    #[test]
    fn joukowski_zero_is_identity() {
        let m = joukowski_family_map(0.0).unwrap();
        for z in [c(2.0, 0.0), c(-1.5, 0.7), c(0.1, -3.0)] {
            assert!((m.forward(z) - z).norm() < 1e-15);
        }
    }

    #[test]
    fn joukowski_half_values() {
        let m = joukowski_family_map(0.5).unwrap();
        assert!((m.inverse(c(2.0, 0.0)) - c(2.25, 0.0)).norm() < 1e-15);
        // the other root of w^2 - 2.25 w + 0.5 is 0.25, inside the unit disk
        assert!((m.forward(c(2.25, 0.0)) - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn joukowski_rejects_degenerate() {
        assert!(joukowski_family_map(1.0).is_err());
        assert!(joukowski_family_map(1.5).is_err());
        assert!(joukowski_family_map(-0.1).is_err());
    }

    #[test]
    fn joukowski_derivatives_match_differences() {
        let m = joukowski_family_map(0.6).unwrap();
        let z = c(1.3, 1.7);
        let h = 1e-5;
        let d_fd = (m.forward(z + h) - m.forward(z - h)) / (2.0 * h);
        assert!((d_fd - m.derivative(z)).norm() < 1e-9);
        let dd_fd = (m.derivative(z + h) - m.derivative(z - h)) / (2.0 * h);
        assert!((dd_fd - m.second_derivative(z)).norm() < 1e-9);
    }

    #[test]
    fn boundary_has_unit_image() {
        let g = BodyGeometry::joukowski(0.7, 0.3).unwrap();
        for k in 0..64 {
            let x = g.boundary_point(k as f64 / 64.0);
            let w = g.forward(to_complex(x));
            assert!((w.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inside_points_detected() {
        let g = BodyGeometry::joukowski(0.5, 1.0).unwrap();
        assert!(!g.is_outside(Vec2::new(0.0, 0.0)));
        assert!(!g.is_outside(Vec2::new(1.2, 0.0)));
        assert!(g.is_outside(Vec2::new(1.6, 0.0)));
        assert!(matches!(
            g.ensure_outside(Vec2::new(0.1, 0.1)),
            Err(Error::InsideBody(_))
        ));
    }

    #[test]
    fn laurent_of_inverse_power() {
        let c1 = laurent_coefficients(|w| 1.0 / w, 2.0, 3).unwrap();
        assert!((c1[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(c1[1].norm() < 1e-14 && c1[2].norm() < 1e-14);

        let c2 = laurent_coefficients(|w| 3.0 / (w * w), 5.0, 3).unwrap();
        assert!((c2[1] - c(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn laurent_of_disk_harmonic_field() {
        // H1 - i H2 = 1 / (2 pi i z) for the unit disk
        let coeffs = laurent_coefficients(|z| 1.0 / (2.0 * PI * c(0.0, 1.0) * z), 2.0, 2).unwrap();
        assert!((coeffs[0] - 1.0 / (2.0 * PI * c(0.0, 1.0))).norm() < 1e-14);
    }

    #[test]
    fn laurent_flags_growing_function() {
        // pole at w = 2 sits between the two sampling circles
        assert!(laurent_coefficients(|w| 1.0 / (w - 2.0), 1.5, 2).is_err());
    }

    #[test]
    fn laurent_rejects_bad_arguments() {
        assert!(laurent_coefficients(|w| w, 2.0, 0).is_err());
        assert!(laurent_coefficients(|w| w, -1.0, 1).is_err());
    }
}
