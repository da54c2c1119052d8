//! Planar interaction between a rigid body and an ideal fluid with point vortices.
//!
//! The crate covers the exterior potential theory of a body described by a
//! conformal map onto the exterior of the unit disk, the decomposition of the
//! pressure force acting on a body of size `epsilon`, and a simulator for the
//! small-body limit system: a massive point carrying circulation `gamma`,
//! driven by a Kutta-Joukowski type lift, coupled to vortex blobs advected by
//! the plane Biot-Savart law.
//!
//! Conventions used throughout:
//!
//! * `x⊥ = (-x2, x1)` (see [`perp`]).
//! * The plane is identified with `C` through `(x1, x2) = x1 + i x2`.
//! * `n` on the body boundary points into the body (outward for the fluid),
//!   the boundary is traversed counter-clockwise.

pub mod conformal;
pub mod contour;
pub mod error;
pub mod finite_eps;
pub mod kernels;
pub mod limit_dynamics;
pub mod ode;
pub mod potentials;

pub use conformal::{BodyGeometry, ConformalMap, DiskMap, JoukowskiMap};
pub use error::{Error, Result};
pub use kernels::{VortexBlob, VorticityField};

use num_complex::Complex64;

pub type Vec2 = nalgebra::Vector2<f64>;

/// Rotation by +90 degrees: `(x1, x2) -> (-x2, x1)`.
#[inline]
pub fn perp(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

#[inline]
pub fn to_complex(v: Vec2) -> Complex64 {
    Complex64::new(v.x, v.y)
}

#[inline]
pub fn from_complex(z: Complex64) -> Vec2 {
    Vec2::new(z.re, z.im)
}

/// A velocity field `u` is encoded by the holomorphic-friendly combination
/// `u1 - i u2`; this converts it back.
#[inline]
pub(crate) fn from_conjugate_velocity(w: Complex64) -> Vec2 {
    Vec2::new(w.re, -w.im)
}
