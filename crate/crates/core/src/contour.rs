//! Trapezoid-rule contour integration on the body boundary, Blasius' lemma in
//! its complex and real forms, and the residue coefficients of the harmonic
//! field that enter the small-body force.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::conformal::{BodyGeometry, ConformalMap};
use crate::error::{Error, Result};
use crate::kernels::harmonic_conjugate;
use crate::{from_complex, perp, to_complex, Vec2};

pub const DEFAULT_NODES: usize = 512;
/// Node-doubling agreement demanded of certified contour values.
pub const DOUBLING_TOLERANCE: f64 = 1e-8;
/// Relative normal component tolerated in a "tangent" field.
pub const TANGENCY_TOLERANCE: f64 = 1e-8;

/// The boundary `T_eps^-1(e^{2 pi i t})`, `t` in `[0, 1)`, sampled at
/// `node_count` uniform trapezoid nodes.
#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    geom: BodyGeometry,
    node_count: usize,
}

/// One trapezoid node: position, `dz/dt` and the inward unit normal.
#[derive(Debug, Clone, Copy)]
pub struct CurveNode {
    pub z: Complex64,
    pub dz: Complex64,
    pub normal: Vec2,
}

impl CurveNode {
    pub fn position(&self) -> Vec2 {
        from_complex(self.z)
    }

    /// `|dz/dt|`, so that `ds = speed dt`.
    pub fn speed(&self) -> f64 {
        self.dz.norm()
    }
}

impl BoundaryCurve {
    pub fn new(geom: BodyGeometry, node_count: usize) -> Result<Self> {
        if node_count < 3 {
            return Err(Error::InvalidParameter {
                name: "node_count",
                reason: format!("need at least 3 nodes, got {node_count}"),
            });
        }
        Ok(Self { geom, node_count })
    }

    pub fn geometry(&self) -> &BodyGeometry {
        &self.geom
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn with_nodes(&self, node_count: usize) -> Result<Self> {
        Self::new(self.geom.clone(), node_count)
    }

    pub fn parameterization(&self, t: f64) -> Vec2 {
        self.geom.boundary_point(t)
    }

    pub fn node(&self, t: f64) -> CurveNode {
        let w = Complex64::from_polar(1.0, 2.0 * PI * t);
        let z = self.geom.inverse(w);
        let dz = Complex64::new(0.0, 2.0 * PI) * w / self.geom.derivative(z);
        let tau = from_complex(dz / dz.norm());
        CurveNode {
            z,
            dz,
            normal: perp(tau),
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = CurveNode> + '_ {
        (0..self.node_count).map(move |k| self.node(k as f64 / self.node_count as f64))
    }

    /// Weight of each node in the trapezoid rule over `t` in `[0, 1)`.
    pub fn weight(&self) -> f64 {
        1.0 / self.node_count as f64
    }

    /// `(1/2) \oint (x1 dx2 - x2 dx1)`.
    pub fn signed_area(&self) -> f64 {
        let sum: f64 = self.nodes().map(|n| (n.z.conj() * n.dz).im).sum();
        0.5 * sum * self.weight()
    }

    /// Real quadrature `\oint phi(x) ds`.
    pub fn line_integral<F: Fn(&CurveNode) -> f64>(&self, phi: F) -> f64 {
        self.nodes().map(|n| phi(&n) * n.speed()).sum::<f64>() * self.weight()
    }
}

/// `\oint f(z) dz` by the uniform trapezoid rule.
pub fn contour_integral<F>(curve: &BoundaryCurve, f: F) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64,
{
    let mut sum = Complex64::new(0.0, 0.0);
    for node in curve.nodes() {
        let v = f(node.z);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite("contour integrand"));
        }
        sum += v * node.dz;
    }
    Ok(sum * curve.weight())
}

/// Circulation `\oint u . tau ds = Re \oint (u1 - i u2) dz` of a velocity
/// field around the curve.
pub fn circulation(curve: &BoundaryCurve, u: &dyn Fn(Vec2) -> Vec2) -> Result<f64> {
    let mut sum = 0.0;
    for node in curve.nodes() {
        let v = u(node.position());
        if !(v.x.is_finite() && v.y.is_finite()) {
            return Err(Error::NonFinite("circulation integrand"));
        }
        sum += (Complex64::new(v.x, -v.y) * node.dz).re;
    }
    Ok(sum * curve.weight())
}

/// Force and torque of the pairing of two tangent fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForceTorque {
    pub force: Vec2,
    pub torque: f64,
}

fn tangency_defect(curve: &BoundaryCurve, f: &dyn Fn(Vec2) -> Vec2) -> f64 {
    let mut scale: f64 = 1.0;
    let mut worst: f64 = 0.0;
    for node in curve.nodes() {
        let v = f(node.position());
        scale = scale.max(v.norm());
        worst = worst.max(v.dot(&node.normal).abs());
    }
    worst / scale
}

/// Blasius: `(\oint (f.g) n ds, \oint (f.g)(x⊥.n) ds)` from the complex form
/// `i (\oint (f1 - i f2)(g1 - i g2) dz)^*` and `Re \oint z (f1 - i f2)(g1 - i g2) dz`.
pub fn blasius_force(
    curve: &BoundaryCurve,
    f: &dyn Fn(Vec2) -> Vec2,
    g: &dyn Fn(Vec2) -> Vec2,
) -> Result<ForceTorque> {
    for field in [f, g] {
        let defect = tangency_defect(curve, field);
        if defect > TANGENCY_TOLERANCE {
            return Err(Error::NotTangent(defect));
        }
    }
    Ok(blasius_complex_unchecked(curve, f, g))
}

pub(crate) fn blasius_complex_unchecked(
    curve: &BoundaryCurve,
    f: &dyn Fn(Vec2) -> Vec2,
    g: &dyn Fn(Vec2) -> Vec2,
) -> ForceTorque {
    let mut plain = Complex64::new(0.0, 0.0);
    let mut moment = Complex64::new(0.0, 0.0);
    for node in curve.nodes() {
        let x = node.position();
        let (fv, gv) = (f(x), g(x));
        let product = Complex64::new(fv.x, -fv.y) * Complex64::new(gv.x, -gv.y) * node.dz;
        plain += product;
        moment += node.z * product;
    }
    let w = curve.weight();
    let force = Complex64::new(0.0, 1.0) * (plain * w).conj();
    ForceTorque {
        force: from_complex(force),
        torque: (moment * w).re,
    }
}

/// The real-quadrature side of Blasius' lemma, `\oint (f.g) n ds` and
/// `\oint (f.g)(x⊥.n) ds`. No tangency requirement.
pub fn blasius_real(
    curve: &BoundaryCurve,
    f: &dyn Fn(Vec2) -> Vec2,
    g: &dyn Fn(Vec2) -> Vec2,
) -> ForceTorque {
    let mut force = Vec2::zeros();
    let mut torque = 0.0;
    for node in curve.nodes() {
        let x = node.position();
        let weight = f(x).dot(&g(x)) * node.speed();
        force += weight * node.normal;
        torque += weight * perp(x).dot(&node.normal);
    }
    ForceTorque {
        force: force * curve.weight(),
        torque: torque * curve.weight(),
    }
}

/// Smooth field tangent to the boundary: `∇⊥psi` with
/// `psi = (|w|^2 - 1) Re P(w)`, `w = T_eps(x)`, `P(w) = sum_k c_k w^k`.
#[derive(Debug, Clone)]
pub struct TangentField {
    geom: BodyGeometry,
    coeffs: Vec<Complex64>,
}

impl TangentField {
    pub fn new(geom: BodyGeometry, coeffs: Vec<Complex64>) -> Self {
        Self { geom, coeffs }
    }

    pub fn value(&self, x: Vec2) -> Vec2 {
        let z = to_complex(x);
        let w = self.geom.forward(z);
        let (mut p, mut dp) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for c in self.coeffs.iter().rev() {
            dp = dp * w + p;
            p = p * w + c;
        }
        let s = w.norm_sqr() - 1.0;
        // psi_1 - i psi_2 = 2 T' d(psi)/dw
        let g = 2.0 * self.geom.derivative(z) * (w.conj() * p.re + 0.5 * s * dp);
        Vec2::new(g.im, g.re)
    }
}

fn unit_geometry(map: &Arc<dyn ConformalMap>) -> Result<BodyGeometry> {
    BodyGeometry::new(map.clone(), 1.0)
}

/// `xi = (\oint zbar (H1 - i H2) dz)^*` and `zeta = \oint (H1 - i H2) z dz`
/// on the unit-scale boundary.
pub fn xi_zeta(map: &Arc<dyn ConformalMap>) -> Result<(Vec2, Vec2)> {
    let geom = unit_geometry(map)?;
    let compute = |nodes: usize| -> Result<(Complex64, Complex64)> {
        let curve = BoundaryCurve::new(geom.clone(), nodes)?;
        let xi = contour_integral(&curve, |z| z.conj() * harmonic_conjugate(&geom, z))?.conj();
        let zeta = contour_integral(&curve, |z| harmonic_conjugate(&geom, z) * z)?;
        Ok((xi, zeta))
    };
    let (xi, zeta) = compute(DEFAULT_NODES)?;
    let (xi2, zeta2) = compute(2 * DEFAULT_NODES)?;
    let gap = (xi - xi2).norm().max((zeta - zeta2).norm());
    if gap > DOUBLING_TOLERANCE {
        return Err(Error::NotConverged {
            what: "xi/zeta contour integrals",
            residual: gap,
            tolerance: DOUBLING_TOLERANCE,
        });
    }
    Ok((from_complex(xi2), from_complex(zeta2)))
}

/// `|Im \oint zbar (H1 - i H2) z dz|`, which vanishes for every body.
pub fn verify_vanishing_identity(map: &Arc<dyn ConformalMap>) -> f64 {
    let Ok(geom) = unit_geometry(map) else {
        return f64::NAN;
    };
    let Ok(curve) = BoundaryCurve::new(geom.clone(), 2 * DEFAULT_NODES) else {
        return f64::NAN;
    };
    contour_integral(&curve, |z| z.norm_sqr() * harmonic_conjugate(&geom, z))
        .map(|v| v.im.abs())
        .unwrap_or(f64::NAN)
}

/// Far-field behaviour of `H^1` at `|x|` in `{10, 100, 1000}`.
#[derive(Debug, Clone, Serialize)]
pub struct FarFieldReport {
    pub radii: Vec<f64>,
    /// `max_theta |x⊥ . H(x) - 1/(2 pi)|`.
    pub circulation_defect: Vec<f64>,
    /// `circulation_defect * |x|`, bounded.
    pub circulation_product: Vec<f64>,
    /// `max_theta |H⊥ - (x⊥ . ∇) H|`.
    pub rotation_defect: Vec<f64>,
    /// `rotation_defect * |x|^2`, bounded.
    pub rotation_product: Vec<f64>,
}

impl FarFieldReport {
    /// Products bounded and non-increasing from one decade to the next.
    pub fn is_decaying(&self) -> bool {
        let non_increasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] * 1.01 + 1e-13);
        non_increasing(&self.circulation_product) && non_increasing(&self.rotation_product)
    }
}

/// `H` and its Jacobian rows `(∂_1 H, ∂_2 H)` at `z`.
pub(crate) fn harmonic_jacobian(geom: &BodyGeometry, z: Complex64) -> (Vec2, Vec2, Vec2) {
    let t = geom.forward(z);
    let d1 = geom.derivative(z);
    let d2 = geom.second_derivative(z);
    let h = harmonic_conjugate(geom, z);
    let dh = Complex64::new(0.0, -1.0) / (2.0 * PI) * (d2 * t - d1 * d1) / (t * t);
    let value = Vec2::new(h.re, -h.im);
    let d_first = Vec2::new(dh.re, -dh.im);
    let d_second = Vec2::new(-dh.im, -dh.re);
    (value, d_first, d_second)
}

pub fn laurent_far_field_checks(map: &Arc<dyn ConformalMap>) -> FarFieldReport {
    const ANGLES: usize = 16;
    let geom = BodyGeometry::new(map.clone(), 1.0).expect("unit scale is valid");
    let radii = vec![10.0, 100.0, 1000.0];
    let mut report = FarFieldReport {
        radii: radii.clone(),
        circulation_defect: Vec::new(),
        circulation_product: Vec::new(),
        rotation_defect: Vec::new(),
        rotation_product: Vec::new(),
    };
    for &rho in &radii {
        let mut circ: f64 = 0.0;
        let mut rot: f64 = 0.0;
        for k in 0..ANGLES {
            let theta = 2.0 * PI * (k as f64 + 0.25) / ANGLES as f64;
            let x = from_complex(Complex64::from_polar(rho, theta));
            let (h, d1h, d2h) = harmonic_jacobian(&geom, to_complex(x));
            let xp = perp(x);
            circ = circ.max((xp.dot(&h) - 1.0 / (2.0 * PI)).abs());
            let directional = xp.x * d1h + xp.y * d2h;
            rot = rot.max((perp(h) - directional).norm());
        }
        report.circulation_defect.push(circ);
        report.circulation_product.push(circ * rho);
        report.rotation_defect.push(rot);
        report.rotation_product.push(rot * rho * rho);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::{DiskMap, JoukowskiMap};

    fn disk_curve(nodes: usize) -> BoundaryCurve {
        BoundaryCurve::new(BodyGeometry::disk(1.0).unwrap(), nodes).unwrap()
    }

    #[test]
    fn residues_on_unit_circle() {
        let c = disk_curve(DEFAULT_NODES);
        let two_pi_i = Complex64::new(0.0, 2.0 * PI);
        assert!((contour_integral(&c, |z| z.inv()).unwrap() - two_pi_i).norm() < 1e-12);
        assert!(
            contour_integral(&c, |_| Complex64::new(1.0, 0.0))
                .unwrap()
                .norm()
                < 1e-12
        );
        assert!(contour_integral(&c, |z| (z * z).inv()).unwrap().norm() < 1e-12);
    }

    #[test]
    fn non_finite_integrand_reported() {
        let c = disk_curve(16);
        assert!(contour_integral(&c, |_| Complex64::new(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn curves_are_positively_oriented_and_closed() {
        for geom in [
            BodyGeometry::disk(1.0).unwrap(),
            BodyGeometry::joukowski(0.5, 0.3).unwrap(),
        ] {
            let c = BoundaryCurve::new(geom, 256).unwrap();
            assert!(c.signed_area() > 0.0);
            assert!((c.parameterization(0.0) - c.parameterization(1.0)).norm() < 1e-14);
        }
        let ellipse = BoundaryCurve::new(BodyGeometry::joukowski(0.5, 1.0).unwrap(), 256).unwrap();
        assert!((ellipse.signed_area() - PI * 1.5 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn harmonic_field_on_circle_has_no_blasius_force() {
        let c = disk_curve(DEFAULT_NODES);
        let h = |x: Vec2| perp(x) / (2.0 * PI * x.norm_squared());
        let ft = blasius_force(&c, &h, &h).unwrap();
        assert!(ft.force.norm() < 1e-14);
        assert!(ft.torque.abs() < 1e-14);
    }

    #[test]
    fn blasius_rejects_normal_fields() {
        let c = disk_curve(64);
        let radial = |x: Vec2| x;
        let tangential = |x: Vec2| perp(x);
        assert!(matches!(
            blasius_force(&c, &radial, &tangential),
            Err(Error::NotTangent(_))
        ));
    }

    #[test]
    fn blasius_is_linear_in_first_argument() {
        let c = BoundaryCurve::new(BodyGeometry::joukowski(0.3, 1.0).unwrap(), 128).unwrap();
        let geom = c.geometry().clone();
        // tangent: rotate the unit normal, scale by a smooth weight
        let f = move |x: Vec2| {
            let w = geom.forward(to_complex(x));
            let tangent = Complex64::new(0.0, 1.0) * w / geom.derivative(to_complex(x));
            from_complex(tangent) * (1.0 + 0.3 * x.x)
        };
        let f2 = |x: Vec2| 2.0 * f(x);
        let one = blasius_force(&c, &f, &f).unwrap();
        let two = blasius_force(&c, &f2, &f).unwrap();
        assert_eq!(two.force, 2.0 * one.force);
        assert_eq!(two.torque, 2.0 * one.torque);
    }

    #[test]
    fn tangent_field_is_tangent_and_a_skew_gradient() {
        let geom = BodyGeometry::joukowski(0.4, 0.7).unwrap();
        let coeffs = vec![
            Complex64::new(0.3, -0.2),
            Complex64::new(1.0, 0.5),
            Complex64::new(-0.4, 0.1),
        ];
        let field = TangentField::new(geom.clone(), coeffs.clone());
        let curve = BoundaryCurve::new(geom.clone(), 64).unwrap();
        assert!(tangency_defect(&curve, &|x| field.value(x)) < 1e-13);
        let psi = |x: Vec2| {
            let w = geom.forward(to_complex(x));
            let p: Complex64 = coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * w.powi(k as i32))
                .sum();
            (w.norm_sqr() - 1.0) * p.re
        };
        let x = Vec2::new(1.3, -0.9);
        let h = 1e-6;
        let d1 = (psi(x + Vec2::new(h, 0.0)) - psi(x - Vec2::new(h, 0.0))) / (2.0 * h);
        let d2 = (psi(x + Vec2::new(0.0, h)) - psi(x - Vec2::new(0.0, h))) / (2.0 * h);
        assert!((field.value(x) - Vec2::new(-d2, d1)).norm() < 1e-7);
    }

    #[test]
    fn disk_xi_zeta_vanish() {
        let map: Arc<dyn ConformalMap> = Arc::new(DiskMap);
        let (xi, zeta) = xi_zeta(&map).unwrap();
        assert!(xi.norm() < 1e-12 && zeta.norm() < 1e-12);
        assert!(verify_vanishing_identity(&map) < 1e-12);
    }

    #[test]
    fn joukowski_vanishing_identity() {
        for a in [0.3, 0.7] {
            let map: Arc<dyn ConformalMap> = Arc::new(JoukowskiMap::new(a).unwrap());
            assert!(verify_vanishing_identity(&map) < 1e-10);
        }
    }

    #[test]
    fn disk_far_field_is_exact() {
        let map: Arc<dyn ConformalMap> = Arc::new(DiskMap);
        let report = laurent_far_field_checks(&map);
        assert!(report.circulation_defect.iter().all(|&d| d < 1e-15));
        assert!(report.rotation_defect.iter().all(|&d| d < 1e-15));
    }

    #[test]
    fn joukowski_far_field_decays() {
        let map: Arc<dyn ConformalMap> = Arc::new(JoukowskiMap::new(0.5).unwrap());
        let report = laurent_far_field_checks(&map);
        assert!(report.circulation_defect[1] * 10.0 <= report.circulation_defect[0]);
        assert!(report.is_decaying());
    }

    #[test]
    fn harmonic_jacobian_matches_differences() {
        let geom = BodyGeometry::joukowski(0.6, 1.0).unwrap();
        let z = Complex64::new(1.4, 1.1);
        let (_, d1, d2) = harmonic_jacobian(&geom, z);
        let h = 1e-6;
        let hval = |z: Complex64| harmonic_jacobian(&geom, z).0;
        let fd1 = (hval(z + h) - hval(z - h)) / (2.0 * h);
        let dz = Complex64::new(0.0, h);
        let fd2 = (hval(z + dz) - hval(z - dz)) / (2.0 * h);
        assert!((fd1 - d1).norm() < 1e-8);
        assert!((fd2 - d2).norm() < 1e-8);
    }
}
