//! Fixed-step classical Runge-Kutta integration on flat state vectors.

use crate::error::{Error, Result};

pub trait OdeSystem {
    fn dimension(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()>;
}

/// Scratch space reused across steps.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dimension: usize) -> Self {
        Self {
            k1: vec![0.0; dimension],
            k2: vec![0.0; dimension],
            k3: vec![0.0; dimension],
            k4: vec![0.0; dimension],
            tmp: vec![0.0; dimension],
        }
    }

    /// Slope at the start of the last step.
    pub fn last_slope(&self) -> &[f64] {
        &self.k1
    }

    /// Advances `y` from `t` to `t + dt` in place.
    pub fn step<S: OdeSystem>(&mut self, system: &S, t: f64, dt: f64, y: &mut [f64]) -> Result<()> {
        let n = y.len();
        if self.k1.len() != n {
            *self = Self::new(n);
        }
        system.rhs(t, y, &mut self.k1)?;
        axpy(&mut self.tmp, y, 0.5 * dt, &self.k1);
        system.rhs(t + 0.5 * dt, &self.tmp, &mut self.k2)?;
        axpy(&mut self.tmp, y, 0.5 * dt, &self.k2);
        system.rhs(t + 0.5 * dt, &self.tmp, &mut self.k3)?;
        axpy(&mut self.tmp, y, dt, &self.k3);
        system.rhs(t + dt, &self.tmp, &mut self.k4)?;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("runge-kutta step"));
        }
        Ok(())
    }
}

/// `out = y + a k`.
fn axpy(out: &mut [f64], y: &[f64], a: f64, k: &[f64]) {
    for ((o, yi), ki) in out.iter_mut().zip(y).zip(k) {
        *o = yi + a * ki;
    }
}

/// Number of fixed steps of size close to `dt` covering `[0, horizon]`.
/// Returns the step count and the adjusted step size.
pub fn step_plan(dt: f64, horizon: f64) -> Result<(usize, f64)> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "T",
            reason: format!("must be nonnegative, got {horizon}"),
        });
    }
    let steps = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    if steps == 0 {
        return Ok((0, dt));
    }
    Ok((steps, horizon / steps as f64))
}
