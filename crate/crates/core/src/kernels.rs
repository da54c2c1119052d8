//! Velocity from vorticity: plane and exterior Biot-Savart laws, Green's
//! functions of the exterior domain, the harmonic circulation field and the
//! full velocity decomposition of the fluid around the body.
//!
//! Velocities are assembled in the complex form `u1 - i u2`, which is
//! holomorphic wherever the field is irrotational and divergence free.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conformal::BodyGeometry;
use crate::error::{Error, Result};
use crate::potentials::KirchhoffPotentials;
use crate::{from_conjugate_velocity, perp, to_complex, Vec2};

/// Distance below which a core-free blob is considered hit.
pub const SINGULARITY_RADIUS: f64 = 1e-14;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Atomic carrier of circulation. `core = 0` is a point vortex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VortexBlob {
    pub position: Vec2,
    pub strength: f64,
    #[serde(default)]
    pub core: f64,
}

impl VortexBlob {
    pub fn new(position: Vec2, strength: f64, core: f64) -> Result<Self> {
        if !(core.is_finite() && core >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "core",
                reason: format!("must be nonnegative, got {core}"),
            });
        }
        if !(strength.is_finite() && position.x.is_finite() && position.y.is_finite()) {
            return Err(Error::NonFinite("vortex blob"));
        }
        Ok(Self {
            position,
            strength,
            core,
        })
    }

    pub fn point(position: Vec2, strength: f64) -> Self {
        Self {
            position,
            strength,
            core: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VorticityField {
    pub blobs: Vec<VortexBlob>,
}

impl VorticityField {
    pub fn new(blobs: Vec<VortexBlob>) -> Self {
        Self { blobs }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.blobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blobs.is_empty()
    }

    /// `alpha`, the total circulation carried by the blobs.
    pub fn total_strength(&self) -> f64 {
        self.blobs.iter().map(|b| b.strength).sum()
    }

    /// Largest blob distance to the origin (0 for an empty field).
    pub fn support_radius(&self) -> f64 {
        self.blobs
            .iter()
            .map(|b| b.position.norm())
            .fold(0.0, f64::max)
    }

    /// `sum_j gamma_j x_j`.
    pub fn vorticity_moment(&self) -> Vec2 {
        self.blobs
            .iter()
            .fold(Vec2::zeros(), |acc, b| acc + b.strength * b.position)
    }
}

/// `dx⊥ / (2 pi max(|dx|^2, core^2))`.
#[inline]
pub fn plane_kernel(dx: Vec2, core: f64) -> Vec2 {
    let r2 = dx.norm_squared().max(core * core);
    if r2 == 0.0 {
        return Vec2::zeros();
    }
    perp(dx) / (2.0 * PI * r2)
}

/// `H(x) = x⊥ / (2 pi |x|^2)`.
#[inline]
pub fn plane_h(x: Vec2) -> Vec2 {
    perp(x) / (2.0 * PI * x.norm_squared())
}

/// `G(x) = ln|x| / (2 pi)`, the plane Green's function; with a core the
/// potential of the cut-off kernel, so that `∇⊥G_core = plane_kernel`.
#[inline]
pub fn plane_green(dx: Vec2, core: f64) -> f64 {
    let r2 = dx.norm_squared();
    let c2 = core * core;
    if r2 >= c2 {
        r2.ln() / (4.0 * PI)
    } else {
        (r2 / c2 - 1.0) / (4.0 * PI) + c2.ln() / (4.0 * PI)
    }
}

fn check_singular(x: Vec2, blob: &VortexBlob) -> Result<()> {
    if blob.core == 0.0 && (x - blob.position).norm() < SINGULARITY_RADIUS {
        Err(Error::Singular(x))
    } else {
        Ok(())
    }
}

/// Plane Biot-Savart sum `sum_j gamma_j (x - x_j)⊥ / (2 pi max(|x - x_j|^2, core_j^2))`.
pub fn biot_savart_plane(field: &VorticityField, x: Vec2) -> Result<Vec2> {
    let mut u = Vec2::zeros();
    for blob in &field.blobs {
        check_singular(x, blob)?;
        u += blob.strength * plane_kernel(x - blob.position, blob.core);
    }
    Ok(u)
}

fn ensure_pair_outside(geom: &BodyGeometry, x: Vec2, y: Vec2) -> Result<()> {
    geom.ensure_outside(x)?;
    geom.ensure_outside(y)
}

#[inline]
fn reflect(w: Complex64) -> Complex64 {
    w / w.norm_sqr()
}

/// Dirichlet Green's function of the exterior of the scaled body.
pub fn green_dirichlet(geom: &BodyGeometry, x: Vec2, y: Vec2) -> Result<f64> {
    ensure_pair_outside(geom, x, y)?;
    if (x - y).norm() < SINGULARITY_RADIUS {
        return Err(Error::Singular(x));
    }
    let tx = geom.forward(to_complex(x));
    let ty = geom.forward(to_complex(y));
    Ok(((tx - ty).norm() / ((tx - reflect(ty)).norm() * ty.norm())).ln() / (2.0 * PI))
}

/// Hydrodynamic Green's function `G + Psi_H(x) + Psi_H(y)`.
pub fn green_hydrodynamic(geom: &BodyGeometry, x: Vec2, y: Vec2) -> Result<f64> {
    ensure_pair_outside(geom, x, y)?;
    if (x - y).norm() < SINGULARITY_RADIUS {
        return Err(Error::Singular(x));
    }
    let tx = geom.forward(to_complex(x));
    let ty = geom.forward(to_complex(y));
    Ok(((tx - ty).norm() * tx.norm() / (tx - reflect(ty)).norm()).ln() / (2.0 * PI))
}

/// Regular part of the hydrodynamic Green's function on the diagonal,
/// `lim_{y -> x} [G_H(x, y) - ln|x - y| / (2 pi)]`.
pub fn hydrodynamic_robin(geom: &BodyGeometry, x: Vec2) -> Result<f64> {
    geom.ensure_outside(x)?;
    let z = to_complex(x);
    let t = geom.forward(z);
    let t2 = t.norm_sqr();
    Ok((geom.derivative(z).norm() * t2 / (t2 - 1.0)).ln() / (2.0 * PI))
}

/// The harmonic field `H^eps` and its stream function `Psi_{H^eps} = ln|T_eps| / (2 pi)`.
pub fn harmonic_field(geom: &BodyGeometry, x: Vec2) -> Result<(Vec2, f64)> {
    geom.ensure_outside(x)?;
    Ok(harmonic_field_unchecked(geom, x))
}

pub(crate) fn harmonic_conjugate(geom: &BodyGeometry, z: Complex64) -> Complex64 {
    // H1 - i H2 = -i T'(z) / (2 pi T(z))
    -I * geom.derivative(z) / (2.0 * PI * geom.forward(z))
}

fn harmonic_field_unchecked(geom: &BodyGeometry, x: Vec2) -> (Vec2, f64) {
    let z = to_complex(x);
    let t = geom.forward(z);
    let h = -I * geom.derivative(z) / (2.0 * PI * t);
    (from_conjugate_velocity(h), t.norm().ln() / (2.0 * PI))
}

/// `u1 - i u2` induced at `z` by one blob through the exterior Dirichlet kernel.
/// The direct term is cut off at mapped radius `core |T_eps'(y)|`.
fn exterior_blob_conjugate(geom: &BodyGeometry, z: Complex64, blob: &VortexBlob) -> Complex64 {
    let y = to_complex(blob.position);
    let w = geom.forward(z);
    let a = geom.forward(y);
    let d = w - a;
    let mapped_core = blob.core * geom.derivative(y).norm();
    let r2 = d.norm_sqr().max(mapped_core * mapped_core);
    let direct = if r2 == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        d.conj() / r2
    };
    let image = (w - reflect(a)).inv();
    -I * blob.strength * geom.derivative(z) / (2.0 * PI) * (direct - image)
}

/// Velocity a blob induces at its own position once the plane singular part
/// `gamma H(x - y)` is removed: the image contribution plus the curvature
/// correction `T''/(2 T')` of the map.
fn exterior_self_conjugate(geom: &BodyGeometry, blob: &VortexBlob) -> Complex64 {
    let y = to_complex(blob.position);
    let a = geom.forward(y);
    let d1 = geom.derivative(y);
    let d2 = geom.second_derivative(y);
    -I * blob.strength / (2.0 * PI) * (d2 / (2.0 * d1) - d1 / (a - reflect(a)))
}

/// `K^eps[omega](x) = sum_j gamma_j ∇⊥_x G^eps(x, x_j)`.
pub fn biot_savart_exterior(geom: &BodyGeometry, field: &VorticityField, x: Vec2) -> Result<Vec2> {
    geom.ensure_outside(x)?;
    for blob in &field.blobs {
        geom.ensure_outside(blob.position)?;
        check_singular(x, blob)?;
    }
    Ok(from_conjugate_velocity(exterior_conjugate(
        geom,
        field,
        to_complex(x),
        None,
    )))
}

fn exterior_conjugate(
    geom: &BodyGeometry,
    field: &VorticityField,
    z: Complex64,
    skip: Option<usize>,
) -> Complex64 {
    field
        .blobs
        .iter()
        .enumerate()
        .map(|(j, blob)| {
            if Some(j) == skip {
                exterior_self_conjugate(geom, blob)
            } else {
                exterior_blob_conjugate(geom, z, blob)
            }
        })
        .sum()
}

/// Fluid velocity `K^eps[omega] + (gamma + alpha) H^eps + l1 ∇Phi_1 + l2 ∇Phi_2 + r ∇Phi_3`
/// for body velocity `(ell, r)` and circulation `gamma` around the body.
pub fn velocity_total(
    potentials: &KirchhoffPotentials,
    field: &VorticityField,
    ell: Vec2,
    r: f64,
    gamma: f64,
    x: Vec2,
) -> Result<Vec2> {
    let geom = potentials.geometry();
    geom.ensure_outside(x)?;
    for blob in &field.blobs {
        geom.ensure_outside(blob.position)?;
        check_singular(x, blob)?;
    }
    Ok(velocity_unchecked(
        potentials, field, ell, r, gamma, x, None,
    ))
}

/// Velocity carrying blob `j`: the total field with blob `j`'s own plane
/// singular term removed (its image system is kept).
pub fn velocity_at_blob(
    potentials: &KirchhoffPotentials,
    field: &VorticityField,
    ell: Vec2,
    r: f64,
    gamma: f64,
    j: usize,
) -> Result<Vec2> {
    let geom = potentials.geometry();
    let x = field.blobs[j].position;
    for (k, blob) in field.blobs.iter().enumerate() {
        geom.ensure_outside(blob.position)?;
        if k != j {
            check_singular(x, blob)?;
        }
    }
    Ok(velocity_unchecked(
        potentials,
        field,
        ell,
        r,
        gamma,
        x,
        Some(j),
    ))
}

pub(crate) fn velocity_unchecked(
    potentials: &KirchhoffPotentials,
    field: &VorticityField,
    ell: Vec2,
    r: f64,
    gamma: f64,
    x: Vec2,
    skip: Option<usize>,
) -> Vec2 {
    let geom = potentials.geometry();
    let z = to_complex(x);
    let alpha = field.total_strength();
    let mut w = exterior_conjugate(geom, field, z, skip);
    w += (gamma + alpha) * harmonic_conjugate(geom, z);
    let grads = potentials.gradients_unchecked(x);
    from_conjugate_velocity(w) + ell.x * grads[0] + ell.y * grads[1] + r * grads[2]
}
