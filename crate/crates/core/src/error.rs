use thiserror::Error;

use crate::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point ({}, {}) lies inside the body", .0.x, .0.y)]
    InsideBody(Vec2),

    #[error("evaluation at ({}, {}) coincides with a point vortex", .0.x, .0.y)]
    Singular(Vec2),

    #[error("collision: {0}")]
    Collision(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("{what} did not converge: residual {residual:.3e} exceeds {tolerance:.1e}")]
    NotConverged {
        what: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("field not tangent to the curve: max normal component {0:.3e}")]
    NotTangent(f64),

    #[error("unsupported geometry: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
