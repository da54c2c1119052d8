//! Kirchhoff potentials `Phi_1, Phi_2, Phi_3` and the added-mass matrices.
//!
//! `Phi_i` is harmonic outside the body, decays at infinity and satisfies
//! `d Phi_i / dn = K_i` on the boundary with `(K_1, K_2, K_3) = (n_1, n_2, x⊥ · n)`.
//! Away from the disk each potential is the real part of a Laurent series
//! `W_i(w) = sum_k c_k w^-k` in the mapped variable `w = T_eps(z)`; the Neumann
//! data is imposed through the equivalent Dirichlet data of the conjugate
//! stream function (`Im z`, `-Re z`, `-|z|^2 / 2` on the boundary).

use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::conformal::BodyGeometry;
use crate::error::{Error, Result};
use crate::{from_complex, perp, to_complex, Vec2};

/// Boundary-condition residual accepted by the Laurent solve.
pub const NEUMANN_TOLERANCE: f64 = 1e-8;
/// Two-resolution agreement required of the added-mass quadrature.
pub const ADDED_MASS_TOLERANCE: f64 = 1e-6;

const INITIAL_ORDER: usize = 32;
const MAX_ORDER: usize = 2048;
const RESIDUAL_NODES: usize = 256;

#[derive(Debug, Clone)]
enum Representation {
    /// `W_{1,2} = -eps^2 / z` (times `1, i`), `Phi_3 = 0`.
    Disk,
    Laurent([Vec<Complex64>; 3]),
}

/// The three Kirchhoff potentials of one body geometry.
#[derive(Debug, Clone)]
pub struct KirchhoffPotentials {
    geom: BodyGeometry,
    repr: Representation,
}

impl KirchhoffPotentials {
    /// Closed forms for the disk, Laurent solve otherwise.
    pub fn new(geom: &BodyGeometry) -> Result<Self> {
        if geom.is_disk() {
            Ok(Self {
                geom: geom.clone(),
                repr: Representation::Disk,
            })
        } else {
            Self::laurent(geom)
        }
    }

    /// Laurent-series Neumann solve, whatever the shape.
    pub fn laurent(geom: &BodyGeometry) -> Result<Self> {
        let mut order = INITIAL_ORDER;
        loop {
            let coeffs = [0, 1, 2].map(|i| stream_data_coefficients(geom, i, order));
            let candidate = Self {
                geom: geom.clone(),
                repr: Representation::Laurent(coeffs),
            };
            let residual = (1..=3)
                .map(|i| candidate.neumann_residual(i, RESIDUAL_NODES))
                .fold(0.0, f64::max);
            if residual < NEUMANN_TOLERANCE {
                return Ok(candidate);
            }
            if order >= MAX_ORDER || !residual.is_finite() {
                return Err(Error::NotConverged {
                    what: "kirchhoff laurent solve",
                    residual,
                    tolerance: NEUMANN_TOLERANCE,
                });
            }
            order *= 2;
        }
    }

    pub fn geometry(&self) -> &BodyGeometry {
        &self.geom
    }

    /// `(Phi_i(x), grad Phi_i(x))` for `i` in `1..=3`.
    pub fn evaluate(&self, i: usize, x: Vec2) -> Result<(f64, Vec2)> {
        check_index(i)?;
        self.geom.ensure_outside(x)?;
        Ok(self.evaluate_unchecked(i, x))
    }

    pub fn gradient(&self, i: usize, x: Vec2) -> Result<Vec2> {
        self.evaluate(i, x).map(|(_, g)| g)
    }

    /// All three gradients at once; callers have already checked `x`.
    pub(crate) fn gradients_unchecked(&self, x: Vec2) -> [Vec2; 3] {
        [1, 2, 3].map(|i| self.evaluate_unchecked(i, x).1)
    }

    fn evaluate_unchecked(&self, i: usize, x: Vec2) -> (f64, Vec2) {
        let z = to_complex(x);
        match &self.repr {
            Representation::Disk => {
                if i == 3 {
                    return (0.0, Vec2::zeros());
                }
                let eps2 = self.geom.epsilon().powi(2);
                let unit = if i == 1 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 1.0)
                };
                // W = -eps^2 u / z with u = 1 or i; Phi = Re W
                let w = -eps2 * unit / z;
                let dw = eps2 * unit / (z * z);
                (w.re, Vec2::new(dw.re, -dw.im))
            }
            Representation::Laurent(all) => {
                let c = &all[i - 1];
                let w = self.geom.forward(z);
                let inv = w.inv();
                let mut value = Complex64::new(0.0, 0.0);
                let mut dvalue = Complex64::new(0.0, 0.0);
                // Horner in 1/w for sum c_k w^-k and sum -k c_k w^-(k+1)
                for (k, ck) in c.iter().enumerate().rev() {
                    value = (value + ck) * inv;
                    dvalue = (dvalue - (k + 1) as f64 * ck) * inv;
                }
                let dz = dvalue * inv * self.geom.derivative(z);
                (value.re, Vec2::new(dz.re, -dz.im))
            }
        }
    }

    /// Max over `nodes` boundary points of `|d Phi_i / dn - K_i|`. The nodes are
    /// offset by half a spacing from those used in the solve.
    pub fn neumann_residual(&self, i: usize, nodes: usize) -> f64 {
        (0..nodes)
            .map(|k| {
                let t = (k as f64 + 0.5) / nodes as f64;
                let (x, normal) = boundary_frame(&self.geom, t);
                let (_, grad) = self.evaluate_unchecked(i, x);
                (grad.dot(&normal) - boundary_datum(i, x, normal)).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn check_index(i: usize) -> Result<()> {
    if (1..=3).contains(&i) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "i",
            reason: format!("kirchhoff index must be 1, 2 or 3, got {i}"),
        })
    }
}

/// Boundary point and unit normal (pointing into the body) at parameter `t`.
pub fn boundary_frame(geom: &BodyGeometry, t: f64) -> (Vec2, Vec2) {
    let w = Complex64::from_polar(1.0, 2.0 * PI * t);
    let z = geom.inverse(w);
    let tangent = Complex64::new(0.0, 1.0) * w / geom.derivative(z);
    let tau = from_complex(tangent / tangent.norm());
    (from_complex(z), perp(tau))
}

/// `K_i` at boundary point `x` with normal `n`.
pub fn boundary_datum(i: usize, x: Vec2, n: Vec2) -> f64 {
    match i {
        1 => n.x,
        2 => n.y,
        _ => perp(x).dot(&n),
    }
}

/// Laurent coefficients of `W_i` from the stream-function boundary values.
fn stream_data_coefficients(geom: &BodyGeometry, index: usize, order: usize) -> Vec<Complex64> {
    let nodes = 4 * order;
    let samples: Vec<(f64, f64)> = (0..nodes)
        .map(|n| {
            let theta = 2.0 * PI * n as f64 / nodes as f64;
            let z = geom.inverse(Complex64::from_polar(1.0, theta));
            let g = match index {
                0 => z.im,
                1 => -z.re,
                _ => -0.5 * z.norm_sqr(),
            };
            (theta, g)
        })
        .collect();
    (1..=order)
        .map(|k| {
            let ghat: Complex64 = samples
                .iter()
                .map(|&(theta, g)| g * Complex64::from_polar(1.0, k as f64 * theta))
                .sum::<Complex64>()
                / nodes as f64;
            Complex64::new(0.0, 2.0) * ghat
        })
        .collect()
}

/// `m2` (fluid), `m1 = diag(m, m, J_eps)` (solid) and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct AddedMass {
    pub m1: Matrix3<f64>,
    pub m2: Matrix3<f64>,
    pub total: Matrix3<f64>,
}

impl AddedMass {
    pub fn is_positive_definite(&self) -> bool {
        self.total.cholesky().is_some()
    }

    pub fn from_parts(m1: Matrix3<f64>, m2: Matrix3<f64>) -> Self {
        Self {
            m1,
            m2,
            total: m1 + m2,
        }
    }
}

/// Mapped-plane truncation radius for the exterior quadrature.
pub const QUADRATURE_RADIUS: f64 = 50.0;

/// Added-mass matrices of the body `geom` for a solid of mass `m` and
/// rescaled inertia `J_eps = eps^2 J0`.
pub fn added_mass(geom: &BodyGeometry, m: f64, j0: f64) -> Result<AddedMass> {
    for (name, v) in [("m", m), ("J0", j0)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("must be positive, got {v}"),
            });
        }
    }
    let potentials = KirchhoffPotentials::new(geom)?;
    let m2 = added_mass_fluid(&potentials)?;
    let eps = geom.epsilon();
    let m1 = Matrix3::from_diagonal(&nalgebra::Vector3::new(m, m, eps * eps * j0));
    Ok(AddedMass::from_parts(m1, m2))
}

/// `[ \int grad Phi_a . grad Phi_b ]` by exterior quadrature, certified by
/// a two-resolution comparison.
pub fn added_mass_fluid(potentials: &KirchhoffPotentials) -> Result<Matrix3<f64>> {
    let coarse = exterior_quadrature(potentials, 32, 64);
    let fine = exterior_quadrature(potentials, 64, 128);
    let scale = fine.abs().max().max(potentials.geom.epsilon().powi(2));
    let gap = (fine - coarse).abs().max() / scale;
    if gap > ADDED_MASS_TOLERANCE || !gap.is_finite() {
        return Err(Error::NotConverged {
            what: "added mass quadrature",
            residual: gap,
            tolerance: ADDED_MASS_TOLERANCE,
        });
    }
    Ok(fine)
}

/// Polar grid `w = rho e^{i theta}`, `1 <= rho <= R`, Gauss-Legendre in
/// `s = 1/rho` and trapezoid in `theta`, plus the `rho^-4` tail beyond `R`.
fn exterior_quadrature(
    potentials: &KirchhoffPotentials,
    radial_nodes: usize,
    angular_nodes: usize,
) -> Matrix3<f64> {
    let geom = &potentials.geom;
    let rule = GaussLegendre::new(radial_nodes).expect("at least two radial nodes");
    let (s_lo, s_hi) = (1.0 / QUADRATURE_RADIUS, 1.0);
    let half = 0.5 * (s_hi - s_lo);
    let mid = 0.5 * (s_hi + s_lo);
    let dtheta = 2.0 * PI / angular_nodes as f64;

    // integrand in mapped coordinates: grad Phi_a . grad Phi_b |dz/dw|^2
    let integrand = |w: Complex64| -> [f64; 6] {
        let z = geom.inverse(w);
        let jac = geom.derivative(z).norm_sqr().recip();
        let g = potentials.gradients_unchecked(from_complex(z));
        [
            g[0].dot(&g[0]) * jac,
            g[0].dot(&g[1]) * jac,
            g[0].dot(&g[2]) * jac,
            g[1].dot(&g[1]) * jac,
            g[1].dot(&g[2]) * jac,
            g[2].dot(&g[2]) * jac,
        ]
    };

    // one entry per angular node, reduced in index order
    let per_angle: Vec<[f64; 6]> = (0..angular_nodes)
        .into_par_iter()
        .map(|k| {
            let theta = k as f64 * dtheta;
            let mut acc = [0.0; 6];
            for &(x, weight) in rule.as_node_weight_pairs() {
                let s = mid + half * x;
                let f = integrand(Complex64::from_polar(1.0 / s, theta));
                // rho d rho = ds / s^3
                let factor = weight * half / (s * s * s);
                for (a, v) in acc.iter_mut().zip(f) {
                    *a += factor * v;
                }
            }
            let tail = integrand(Complex64::from_polar(QUADRATURE_RADIUS, theta));
            let tail_factor = 0.5 * QUADRATURE_RADIUS * QUADRATURE_RADIUS;
            for (a, v) in acc.iter_mut().zip(tail) {
                *a += tail_factor * v;
            }
            acc
        })
        .collect();

    let mut sum = [0.0; 6];
    for row in &per_angle {
        for (s, v) in sum.iter_mut().zip(row) {
            *s += v;
        }
    }
    let e = sum.map(|v| v * dtheta);
    Matrix3::new(e[0], e[1], e[2], e[1], e[3], e[4], e[2], e[4], e[5])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_closed_forms() {
        let geom = BodyGeometry::disk(1.0).unwrap();
        let k = KirchhoffPotentials::new(&geom).unwrap();
        let (phi1, _) = k.evaluate(1, Vec2::new(2.0, 0.0)).unwrap();
        assert!((phi1 + 0.5).abs() < 1e-15);
        for x in [Vec2::new(1.5, 0.2), Vec2::new(-3.0, 4.0)] {
            let (phi3, g3) = k.evaluate(3, x).unwrap();
            assert_eq!(phi3, 0.0);
            assert_eq!(g3, Vec2::zeros());
        }
    }

    #[test]
    fn disk_potentials_equal_twice_pi_rotated_harmonic_field() {
        let geom = BodyGeometry::disk(1.0).unwrap();
        let k = KirchhoffPotentials::new(&geom).unwrap();
        let x = Vec2::new(1.3, -0.8);
        let h = perp(x) / (2.0 * PI * x.norm_squared());
        let rotated = 2.0 * PI * perp(h);
        assert!((k.evaluate(1, x).unwrap().0 - rotated.x).abs() < 1e-15);
        assert!((k.evaluate(2, x).unwrap().0 - rotated.y).abs() < 1e-15);
    }

    #[test]
    fn laurent_solve_reproduces_disk_closed_form() {
        for eps in [1.0, 0.3] {
            let geom = BodyGeometry::disk(eps).unwrap();
            let closed = KirchhoffPotentials::new(&geom).unwrap();
            let series = KirchhoffPotentials::laurent(&geom).unwrap();
            for x in [Vec2::new(1.1, 0.4), Vec2::new(-0.2, 2.5)] {
                for i in 1..=3 {
                    let (a, ga) = closed.evaluate(i, x).unwrap();
                    let (b, gb) = series.evaluate(i, x).unwrap();
                    assert!((a - b).abs() < 1e-14, "i={i} eps={eps}");
                    assert!((ga - gb).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn neumann_residual_small_for_joukowski() {
        for a in [0.3, 0.5, 0.7] {
            let geom = BodyGeometry::joukowski(a, 1.0).unwrap();
            let k = KirchhoffPotentials::new(&geom).unwrap();
            for i in 1..=3 {
                assert!(k.neumann_residual(i, 256) < NEUMANN_TOLERANCE);
            }
        }
    }

    #[test]
    fn index_and_domain_checked() {
        let geom = BodyGeometry::disk(1.0).unwrap();
        let k = KirchhoffPotentials::new(&geom).unwrap();
        assert!(k.evaluate(0, Vec2::new(2.0, 0.0)).is_err());
        assert!(k.evaluate(4, Vec2::new(2.0, 0.0)).is_err());
        assert!(matches!(
            k.evaluate(1, Vec2::new(0.5, 0.0)),
            Err(Error::InsideBody(_))
        ));
    }

    #[test]
    fn unit_disk_added_mass() {
        let geom = BodyGeometry::disk(1.0).unwrap();
        let am = added_mass(&geom, 1.0, 1.0).unwrap();
        let expected = Matrix3::from_diagonal(&nalgebra::Vector3::new(PI, PI, 0.0));
        assert!((am.m2 - expected).abs().max() < 1e-6);
        assert_eq!(am.m2, am.m2.transpose());
        assert!(am.is_positive_definite());
    }

    #[test]
    fn added_mass_rejects_nonpositive_inputs() {
        let geom = BodyGeometry::disk(1.0).unwrap();
        assert!(added_mass(&geom, 0.0, 1.0).is_err());
        assert!(added_mass(&geom, 1.0, -1.0).is_err());
    }
}
