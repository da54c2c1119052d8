//! The small-body limit: a massive point vortex at `h` with momentum `xi`
//! moving through a field of vortex blobs. Blobs are carried by the plane
//! Biot-Savart field of the other blobs plus the point vortex; the point mass
//! feels the lift `gamma (h' - u(h))⊥`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finite_eps::{support_radius_monitor, SupportReport, SupportSample};
use crate::kernels::{
    biot_savart_plane, plane_green, plane_kernel, VortexBlob, VorticityField, SINGULARITY_RADIUS,
};
use crate::ode::{step_plan, OdeSystem, Rk4};
use crate::{perp, Vec2};

/// Blob to point-mass distance below which the run halts (when cores are 0).
pub const COLLISION_FLOOR: f64 = 1e-12;
/// Time step of the centered difference in the bracket check.
pub const BRACKET_STEP: f64 = 1e-4;
const PARALLEL_THRESHOLD: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitState {
    pub h: Vec2,
    pub xi: Vec2,
    pub field: VorticityField,
    #[serde(default)]
    pub t: f64,
}

impl LimitState {
    pub fn new(h: Vec2, xi: Vec2, field: VorticityField) -> Self {
        Self {
            h,
            xi,
            field,
            t: 0.0,
        }
    }

    fn dimension(&self) -> usize {
        4 + 2 * self.field.len()
    }

    fn pack(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.dimension());
        y.extend_from_slice(&[self.h.x, self.h.y, self.xi.x, self.xi.y]);
        for b in &self.field.blobs {
            y.extend_from_slice(&[b.position.x, b.position.y]);
        }
        y
    }

    fn unpack(&mut self, y: &[f64]) {
        self.h = Vec2::new(y[0], y[1]);
        self.xi = Vec2::new(y[2], y[3]);
        for (j, b) in self.field.blobs.iter_mut().enumerate() {
            b.position = Vec2::new(y[4 + 2 * j], y[5 + 2 * j]);
        }
    }

    /// `sum gamma_j x_j / sum gamma_j`, `None` when the total strength vanishes.
    pub fn center_of_vorticity(&self) -> Option<Vec2> {
        let total = self.field.total_strength();
        (total != 0.0).then(|| self.field.vorticity_moment() / total)
    }

    /// Time-reversed state: `xi -> -xi`, every blob strength negated.
    /// Pair with [`LimitParams::reversed`].
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        out.xi = -self.xi;
        for b in &mut out.field.blobs {
            b.strength = -b.strength;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitParams {
    pub m: f64,
    pub gamma: f64,
    #[serde(default)]
    pub core: f64,
    pub dt: f64,
    #[serde(default)]
    pub integrator: Integrator,
}

impl LimitParams {
    pub fn new(m: f64, gamma: f64, core: f64, dt: f64) -> Result<Self> {
        let p = Self {
            m,
            gamma,
            core,
            dt,
            integrator: Integrator::Rk4,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: format!("must be positive, got {}", self.m),
            });
        }
        if !self.gamma.is_finite() {
            return Err(Error::NonFinite("gamma"));
        }
        if !(self.core.is_finite() && self.core >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "core",
                reason: format!("must be nonnegative, got {}", self.core),
            });
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {}", self.dt),
            });
        }
        Ok(())
    }

    pub fn reversed(&self) -> Self {
        Self {
            gamma: -self.gamma,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitDerivative {
    pub h: Vec2,
    pub xi: Vec2,
    pub blobs: Vec<Vec2>,
}

impl LimitDerivative {
    pub fn max_blob_speed(&self) -> f64 {
        self.blobs.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Plane Biot-Savart velocity of the blobs alone.
pub fn u_tilde(field: &VorticityField, x: Vec2) -> Result<Vec2> {
    biot_savart_plane(field, x)
}

/// Core shared by a pair of blobs; symmetric so the pair interaction derives
/// from a single potential.
fn pair_core(params: &LimitParams, a: &VortexBlob, b: &VortexBlob) -> f64 {
    params.core.max(a.core).max(b.core)
}

fn mass_guard(params: &LimitParams, blob: &VortexBlob) -> f64 {
    params.core.max(blob.core).max(COLLISION_FLOOR)
}

fn check_configuration(state: &LimitState, params: &LimitParams) -> Result<()> {
    let blobs = &state.field.blobs;
    for (j, b) in blobs.iter().enumerate() {
        let d = (b.position - state.h).norm();
        if d.is_nan() || d < mass_guard(params, b) {
            return Err(Error::Collision(format!(
                "blob {j} at distance {d:e} from the point mass at t = {}",
                state.t
            )));
        }
        for (k, c) in blobs.iter().enumerate().skip(j + 1) {
            if pair_core(params, b, c) == 0.0
                && (b.position - c.position).norm() < SINGULARITY_RADIUS
            {
                return Err(Error::Collision(format!(
                    "blobs {j} and {k} coincide at t = {}",
                    state.t
                )));
            }
        }
    }
    Ok(())
}

fn blob_velocity(state: &LimitState, params: &LimitParams, j: usize) -> Vec2 {
    let blobs = &state.field.blobs;
    let xj = blobs[j].position;
    let mut u = Vec2::zeros();
    for (k, b) in blobs.iter().enumerate() {
        if k != j {
            u += b.strength * plane_kernel(xj - b.position, pair_core(params, &blobs[j], b));
        }
    }
    u + params.gamma * plane_kernel(xj - state.h, 0.0)
}

/// Time derivative of `(h, xi, x_1..x_N)`.
pub fn limit_rhs(state: &LimitState, params: &LimitParams) -> Result<LimitDerivative> {
    params.validate()?;
    check_configuration(state, params)?;
    let u_h = u_tilde(&state.field, state.h)?;
    let v = state.xi / params.m;
    let n = state.field.len();
    let blobs = if n >= PARALLEL_THRESHOLD {
        (0..n)
            .into_par_iter()
            .map(|j| blob_velocity(state, params, j))
            .collect()
    } else {
        (0..n).map(|j| blob_velocity(state, params, j)).collect()
    };
    Ok(LimitDerivative {
        h: v,
        xi: params.gamma * perp(v - u_h),
        blobs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianReport {
    pub value: f64,
    pub kinetic: f64,
    pub blob_interaction: f64,
    pub blob_mass_coupling: f64,
}

/// `2H = m|xi/m|^2 - sum_{j != k} G(x_j - x_k) g_j g_k - 2 gamma sum_j G(x_j - h) g_j`.
pub fn hamiltonian(state: &LimitState, params: &LimitParams) -> Result<HamiltonianReport> {
    params.validate()?;
    let blobs = &state.field.blobs;
    let kinetic = state.xi.norm_squared() / (2.0 * params.m);
    let mut pairs = 0.0;
    let mut coupling = 0.0;
    for (j, b) in blobs.iter().enumerate() {
        for c in blobs.iter().skip(j + 1) {
            let core = pair_core(params, b, c);
            let dx = b.position - c.position;
            if core == 0.0 && dx.norm() < SINGULARITY_RADIUS {
                return Err(Error::Collision(format!(
                    "blob {j} coincides with another blob"
                )));
            }
            pairs += plane_green(dx, core) * b.strength * c.strength;
        }
        let dh = b.position - state.h;
        if dh.norm() < COLLISION_FLOOR {
            return Err(Error::Collision(format!("blob {j} sits on the point mass")));
        }
        coupling += plane_green(dh, 0.0) * b.strength;
    }
    let blob_interaction = -pairs;
    let blob_mass_coupling = -params.gamma * coupling;
    Ok(HamiltonianReport {
        value: kinetic + blob_interaction + blob_mass_coupling,
        kinetic,
        blob_interaction,
        blob_mass_coupling,
    })
}

struct LimitSystem<'a> {
    template: &'a LimitState,
    params: &'a LimitParams,
}

impl OdeSystem for LimitSystem<'_> {
    fn dimension(&self) -> usize {
        self.template.dimension()
    }

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        let mut state = self.template.clone();
        state.unpack(y);
        state.t = t;
        let d = limit_rhs(&state, self.params)?;
        dydt[..4].copy_from_slice(&[d.h.x, d.h.y, d.xi.x, d.xi.y]);
        for (j, v) in d.blobs.iter().enumerate() {
            dydt[4 + 2 * j] = v.x;
            dydt[5 + 2 * j] = v.y;
        }
        Ok(())
    }
}

fn advance(state: &mut LimitState, params: &LimitParams, dt: f64, rk: &mut Rk4) -> Result<()> {
    let mut y = state.pack();
    let system = LimitSystem {
        template: state,
        params,
    };
    rk.step(&system, state.t, dt, &mut y)?;
    state.unpack(&y);
    state.t += dt;
    Ok(())
}

/// One RK4 step of size `params.dt`.
pub fn step(state: &LimitState, params: &LimitParams) -> Result<LimitState> {
    params.validate()?;
    let mut next = state.clone();
    let mut rk = Rk4::new(state.dimension());
    advance(&mut next, params, params.dt, &mut rk)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobRecord {
    pub x: [f64; 2],
    pub strength: f64,
}

/// One output line of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub h: [f64; 2],
    pub xi: [f64; 2],
    #[serde(rename = "H")]
    pub hamiltonian: f64,
    pub support_radius: f64,
    pub center_of_vorticity: Option<[f64; 2]>,
    pub blobs: Vec<BlobRecord>,
}

impl TrajectoryRecord {
    fn from_state(state: &LimitState, hamiltonian: f64) -> Self {
        Self {
            t: state.t,
            h: state.h.into(),
            xi: state.xi.into(),
            hamiltonian,
            support_radius: state.field.support_radius(),
            center_of_vorticity: state.center_of_vorticity().map(Into::into),
            blobs: state
                .field
                .blobs
                .iter()
                .map(|b| BlobRecord {
                    x: b.position.into(),
                    strength: b.strength,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LimitTrajectory {
    pub records: Vec<TrajectoryRecord>,
    pub final_state: LimitState,
    /// `max_t |H(t) - H(0)| / max(1, |H(0)|)` over every step.
    pub hamiltonian_drift: f64,
    pub support: SupportReport,
    pub steps: usize,
    pub dt: f64,
}

/// Integrates over `[0, horizon]`, recording every `output_stride` steps and
/// at the final time.
pub fn run(
    initial: &LimitState,
    params: &LimitParams,
    horizon: f64,
    output_stride: usize,
) -> Result<LimitTrajectory> {
    params.validate()?;
    let (steps, dt) = step_plan(params.dt, horizon)?;
    let stride = output_stride.max(1);
    let mut state = initial.clone();
    let h0 = hamiltonian(&state, params)?.value;
    let mut records = vec![TrajectoryRecord::from_state(&state, h0)];
    let mut drift: f64 = 0.0;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut rk = Rk4::new(state.dimension());
    let t0 = state.t;
    for n in 0..steps {
        let radius = state.field.support_radius();
        let t_start = state.t;
        advance(&mut state, params, dt, &mut rk)?;
        state.t = t0 + (n + 1) as f64 * dt;
        samples.push(SupportSample {
            t: t_start,
            radius,
            max_speed: blob_speed_from_slope(rk.last_slope()),
        });
        let h = hamiltonian(&state, params)?.value;
        drift = drift.max((h - h0).abs() / h0.abs().max(1.0));
        if (n + 1) % stride == 0 || n + 1 == steps {
            records.push(TrajectoryRecord::from_state(&state, h));
        }
    }
    samples.push(SupportSample {
        t: state.t,
        radius: state.field.support_radius(),
        max_speed: limit_rhs(&state, params)?.max_blob_speed(),
    });
    Ok(LimitTrajectory {
        records,
        final_state: state,
        hamiltonian_drift: drift,
        support: support_radius_monitor(&samples),
        steps,
        dt,
    })
}

fn blob_speed_from_slope(slope: &[f64]) -> f64 {
    slope[4..]
        .chunks_exact(2)
        .map(|v| v[0].hypot(v[1]))
        .fold(0.0, f64::max)
}

/// Functionals of `(w, h, xi)` whose evolution is checked against the bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    H1,
    H2,
    XiSquared,
    /// `∫ w x_1`, i.e. `sum_j g_j x_{j,1}` for blobs.
    VorticityMomentX,
    Hamiltonian,
}

impl Functional {
    pub const ALL: [Functional; 5] = [
        Functional::H1,
        Functional::H2,
        Functional::XiSquared,
        Functional::VorticityMomentX,
        Functional::Hamiltonian,
    ];

    pub fn evaluate(&self, state: &LimitState, params: &LimitParams) -> Result<f64> {
        Ok(match self {
            Functional::H1 => state.h.x,
            Functional::H2 => state.h.y,
            Functional::XiSquared => state.xi.norm_squared(),
            Functional::VorticityMomentX => state.field.vorticity_moment().x,
            Functional::Hamiltonian => hamiltonian(state, params)?.value,
        })
    }
}

/// `∇G_core(x)`.
fn green_gradient(dx: Vec2, core: f64) -> Vec2 {
    dx / (2.0 * PI * dx.norm_squared().max(core * core))
}

struct Variations {
    f_h: Vec2,
    f_xi: Vec2,
    /// `∇(δF/δw)` at each blob.
    f_w: Vec<Vec2>,
}

/// `∇(δH/δw)` at blob `j`, without the atomic self term.
fn hamiltonian_field_gradient(state: &LimitState, params: &LimitParams, j: usize) -> Vec2 {
    let blobs = &state.field.blobs;
    let xj = blobs[j].position;
    let mut g = -params.gamma * green_gradient(xj - state.h, 0.0);
    for (k, b) in blobs.iter().enumerate() {
        if k != j {
            g -= b.strength * green_gradient(xj - b.position, pair_core(params, &blobs[j], b));
        }
    }
    g
}

/// `∂H/∂h = gamma sum_j g_j ∇G(x_j - h)`.
fn hamiltonian_h_gradient(state: &LimitState, params: &LimitParams) -> Vec2 {
    state.field.blobs.iter().fold(Vec2::zeros(), |acc, b| {
        acc + b.strength * green_gradient(b.position - state.h, 0.0)
    }) * params.gamma
}

/// `{F, H} = gamma F_xi·(H_xi)⊥ - (F_xi·H_h - F_h·H_xi) + sum_j g_j ∇F_w(x_j)·(-∇⊥H_w(x_j))`.
pub fn poisson_bracket(state: &LimitState, params: &LimitParams, f: Functional) -> Result<f64> {
    params.validate()?;
    check_configuration(state, params)?;
    let n = state.field.len();
    let h_xi = state.xi / params.m;
    let h_h = hamiltonian_h_gradient(state, params);
    let h_w: Vec<Vec2> = (0..n)
        .map(|j| hamiltonian_field_gradient(state, params, j))
        .collect();
    let zero = Variations {
        f_h: Vec2::zeros(),
        f_xi: Vec2::zeros(),
        f_w: vec![Vec2::zeros(); n],
    };
    let var = match f {
        Functional::H1 => Variations {
            f_h: Vec2::new(1.0, 0.0),
            ..zero
        },
        Functional::H2 => Variations {
            f_h: Vec2::new(0.0, 1.0),
            ..zero
        },
        Functional::XiSquared => Variations {
            f_xi: 2.0 * state.xi,
            ..zero
        },
        Functional::VorticityMomentX => Variations {
            f_w: vec![Vec2::new(1.0, 0.0); n],
            ..zero
        },
        Functional::Hamiltonian => Variations {
            f_h: h_h,
            f_xi: h_xi,
            f_w: h_w.clone(),
        },
    };
    let mut value =
        params.gamma * var.f_xi.dot(&perp(h_xi)) - (var.f_xi.dot(&h_h) - var.f_h.dot(&h_xi));
    for (j, b) in state.field.blobs.iter().enumerate() {
        value += b.strength * var.f_w[j].dot(&(-perp(h_w[j])));
    }
    if !value.is_finite() {
        return Err(Error::NonFinite("poisson bracket"));
    }
    Ok(value)
}

/// `(d/dt F` by a centered difference along the flow, `{F, H})`.
pub fn poisson_bracket_check(
    state: &LimitState,
    params: &LimitParams,
    f: Functional,
) -> Result<(f64, f64)> {
    let s = BRACKET_STEP;
    let mut rk = Rk4::new(state.dimension());
    let mut forward = state.clone();
    advance(&mut forward, params, s, &mut rk)?;
    let mut backward = state.clone();
    advance(&mut backward, params, -s, &mut rk)?;
    let lhs = (f.evaluate(&forward, params)? - f.evaluate(&backward, params)?) / (2.0 * s);
    if !lhs.is_finite() {
        return Err(Error::NonFinite("bracket finite difference"));
    }
    Ok((lhs, poisson_bracket(state, params, f)?))
}

/// Largest position gap between two states with the same blob layout.
pub fn position_distance(a: &LimitState, b: &LimitState) -> f64 {
    a.field
        .blobs
        .iter()
        .zip(&b.field.blobs)
        .map(|(p, q)| (p.position - q.position).norm())
        .fold((a.h - b.h).norm(), f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReversalReport {
    /// Distance between the initial positions and the end of the round trip.
    pub return_error: f64,
    /// Richardson estimate of the forward integration error at `horizon`.
    pub forward_error: f64,
}

/// Integrates forward, reverses `(xi, g_j, gamma)` and integrates back.
pub fn reversal_check(
    initial: &LimitState,
    params: &LimitParams,
    horizon: f64,
) -> Result<ReversalReport> {
    let forward = run(initial, params, horizon, usize::MAX)?.final_state;
    let fine_params = LimitParams {
        dt: params.dt / 2.0,
        ..*params
    };
    let fine = run(initial, &fine_params, horizon, usize::MAX)?.final_state;
    let back = run(&forward.reversed(), &params.reversed(), horizon, usize::MAX)?.final_state;
    Ok(ReversalReport {
        return_error: position_distance(&back, initial),
        forward_error: position_distance(&forward, &fine) * 16.0 / 15.0,
    })
}

/// `psi(t, x) = cos(t) (1 - |x - c|^2 / R^2)^3` inside the ball, 0 outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpTest {
    pub center: Vec2,
    pub radius: f64,
}

impl BumpTest {
    fn spatial(&self, x: Vec2) -> (f64, Vec2) {
        let d = x - self.center;
        let s = 1.0 - d.norm_squared() / (self.radius * self.radius);
        if s <= 0.0 {
            return (0.0, Vec2::zeros());
        }
        (s * s * s, -6.0 * s * s * d / (self.radius * self.radius))
    }

    pub fn value(&self, t: f64, x: Vec2) -> f64 {
        t.cos() * self.spatial(x).0
    }

    /// `psi_t + ∇psi · v`.
    fn transport(&self, t: f64, x: Vec2, v: Vec2) -> f64 {
        let (phi, grad) = self.spatial(x);
        -t.sin() * phi + t.cos() * grad.dot(&v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeakFormReport {
    /// `sum g_j psi(T, x_j(T)) - sum g_j psi(0, x_j(0)) - ∫ sum g_j (psi_t + ∇psi·v_j) dt`.
    pub residual: f64,
    /// `∫ sum |g_j (psi_t + ∇psi·v_j)| dt`, for relative comparisons.
    pub scale: f64,
}

/// Discrete weak form of the transport equation along an RK4 trajectory,
/// time integral by the trapezoid rule.
pub fn weak_form_residual(
    initial: &LimitState,
    params: &LimitParams,
    horizon: f64,
    test: BumpTest,
) -> Result<WeakFormReport> {
    params.validate()?;
    let (steps, dt) = step_plan(params.dt, horizon)?;
    let integrand = |state: &LimitState| -> Result<(f64, f64)> {
        let d = limit_rhs(state, params)?;
        let mut sum = 0.0;
        let mut abs = 0.0;
        for (b, v) in state.field.blobs.iter().zip(&d.blobs) {
            let term = b.strength * test.transport(state.t, b.position, *v);
            sum += term;
            abs += term.abs();
        }
        Ok((sum, abs))
    };
    let pairing = |state: &LimitState| -> f64 {
        state
            .field
            .blobs
            .iter()
            .map(|b| b.strength * test.value(state.t, b.position))
            .sum()
    };
    let mut state = initial.clone();
    let start = pairing(&state);
    let mut rk = Rk4::new(state.dimension());
    let (mut prev, mut prev_abs) = integrand(&state)?;
    let mut integral = 0.0;
    let mut scale = 0.0;
    for _ in 0..steps {
        advance(&mut state, params, dt, &mut rk)?;
        let (next, next_abs) = integrand(&state)?;
        integral += 0.5 * dt * (prev + next);
        scale += 0.5 * dt * (prev_abs + next_abs);
        prev = next;
        prev_abs = next_abs;
    }
    Ok(WeakFormReport {
        residual: pairing(&state) - start - integral,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(m: f64, gamma: f64) -> LimitParams {
        LimitParams::new(m, gamma, 0.0, 1e-3).unwrap()
    }

    fn blob(x: f64, y: f64, g: f64) -> VortexBlob {
        VortexBlob::point(Vec2::new(x, y), g)
    }

    #[test]
    fn u_tilde_values() {
        assert_eq!(
            u_tilde(&VorticityField::empty(), Vec2::new(1.0, 2.0)).unwrap(),
            Vec2::zeros()
        );
        let f = VorticityField::new(vec![blob(0.0, 0.0, 2.0 * PI)]);
        assert!((u_tilde(&f, Vec2::new(1.0, 0.0)).unwrap() - Vec2::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn rhs_hand_evaluation() {
        let state = LimitState::new(
            Vec2::zeros(),
            Vec2::zeros(),
            VorticityField::new(vec![blob(1.0, 0.0, 2.0 * PI)]),
        );
        let d = limit_rhs(&state, &params(1.0, 1.0)).unwrap();
        // u(h) = 2 pi H(h - x_1) = (0, -1), xi' = gamma (0 - u(h))⊥ = (0, 1)⊥
        assert!((d.xi - Vec2::new(-1.0, 0.0)).norm() < 1e-15);
        // blob carried by the point vortex alone: gamma H((1, 0)) = (0, 1/(2 pi))
        assert!((d.blobs[0] - Vec2::new(0.0, 1.0 / (2.0 * PI))).norm() < 1e-15);
    }

    #[test]
    fn empty_field_lift_only() {
        let state = LimitState::new(Vec2::zeros(), Vec2::new(2.0, 0.0), VorticityField::empty());
        let d = limit_rhs(&state, &params(2.0, 3.0)).unwrap();
        assert_eq!(d.h, Vec2::new(1.0, 0.0));
        assert_eq!(d.xi, Vec2::new(0.0, 3.0));
    }

    #[test]
    fn no_circulation_means_straight_line() {
        let state = LimitState::new(
            Vec2::zeros(),
            Vec2::new(1.0, 0.5),
            VorticityField::new(vec![blob(1.0, 1.0, 1.0), blob(-1.0, 2.0, -2.0)]),
        );
        let d = limit_rhs(&state, &params(1.0, 0.0)).unwrap();
        assert_eq!(d.xi, Vec2::zeros());
    }

    #[test]
    fn collisions_halt() {
        let state = LimitState::new(
            Vec2::zeros(),
            Vec2::zeros(),
            VorticityField::new(vec![blob(0.0, 0.0, 1.0)]),
        );
        assert!(matches!(
            limit_rhs(&state, &params(1.0, 1.0)),
            Err(Error::Collision(_))
        ));
        let state = LimitState::new(
            Vec2::zeros(),
            Vec2::zeros(),
            VorticityField::new(vec![blob(1.0, 0.0, 1.0), blob(1.0, 0.0, 1.0)]),
        );
        assert!(matches!(
            limit_rhs(&state, &params(1.0, 1.0)),
            Err(Error::Collision(_))
        ));
        let cored = LimitParams::new(1.0, 1.0, 0.5, 1e-3).unwrap();
        let near = LimitState::new(
            Vec2::zeros(),
            Vec2::zeros(),
            VorticityField::new(vec![blob(0.3, 0.0, 1.0)]),
        );
        assert!(limit_rhs(&near, &cored).is_err());
    }

    #[test]
    fn hamiltonian_examples() {
        let p = params(2.0, 1.5);
        let s = LimitState::new(Vec2::zeros(), Vec2::new(2.0, 0.0), VorticityField::empty());
        assert!((hamiltonian(&s, &p).unwrap().value - 1.0).abs() < 1e-15);

        let (g, d) = (0.7, 3.0);
        let s = LimitState::new(
            Vec2::new(1.0, 1.0),
            Vec2::zeros(),
            VorticityField::new(vec![blob(1.0, 1.0 + d, g)]),
        );
        let expected = -1.5 * g * d.ln() / (2.0 * PI);
        assert!((hamiltonian(&s, &p).unwrap().value - expected).abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_pair_scaling() {
        let p = params(1.0, 0.0);
        let blobs = [
            blob(1.0, 0.0, 1.0),
            blob(0.0, 2.0, -0.5),
            blob(-1.0, -1.0, 2.0),
        ];
        let s1 = LimitState::new(
            Vec2::zeros(),
            Vec2::zeros(),
            VorticityField::new(blobs.to_vec()),
        );
        let doubled = blobs
            .iter()
            .map(|b| blob(2.0 * b.position.x, 2.0 * b.position.y, b.strength));
        let s2 = LimitState::new(
            Vec2::zeros(),
            Vec2::zeros(),
            VorticityField::new(doubled.collect()),
        );
        let mut pair_sum = 0.0;
        for (j, a) in blobs.iter().enumerate() {
            for (k, b) in blobs.iter().enumerate() {
                if j != k {
                    pair_sum += a.strength * b.strength;
                }
            }
        }
        let change = hamiltonian(&s2, &p).unwrap().blob_interaction
            - hamiltonian(&s1, &p).unwrap().blob_interaction;
        assert!((change + 2f64.ln() / (2.0 * PI) * pair_sum / 2.0).abs() < 1e-14);
    }

    #[test]
    fn circle_orbit() {
        let p = params(1.0, 2.0 * PI);
        let s = LimitState::new(Vec2::zeros(), Vec2::new(1.0, 0.0), VorticityField::empty());
        let traj = run(&s, &p, 10.0, 1000).unwrap();
        // m h'' = gamma h'⊥: center (0, 1/(2 pi)), period 1
        assert!(traj.final_state.h.norm() < 1e-6);
        let quarter = run(&s, &p, 0.25, 1).unwrap().final_state.h;
        let r = 1.0 / (2.0 * PI);
        assert!((quarter - Vec2::new(r, r)).norm() < 1e-9);
    }

    #[test]
    fn co_rotating_pair() {
        let p = params(1.0, 0.0);
        let s = LimitState::new(
            Vec2::new(50.0, 50.0),
            Vec2::zeros(),
            VorticityField::new(vec![blob(1.0, 0.0, 2.0 * PI), blob(-1.0, 0.0, 2.0 * PI)]),
        );
        let d = limit_rhs(&s, &p).unwrap();
        assert!((d.blobs[0] - Vec2::new(0.0, 0.5)).norm() < 1e-15);
        let t = 1.0;
        let end = run(&s, &p, t, 1).unwrap().final_state;
        let x = end.field.blobs[0].position;
        assert!((x - Vec2::new((0.5 * t).cos(), (0.5 * t).sin())).norm() < 1e-10);
    }

    #[test]
    fn bracket_of_hamiltonian_vanishes() {
        let s = LimitState::new(
            Vec2::new(0.1, -0.2),
            Vec2::new(0.3, 0.4),
            VorticityField::new(vec![
                blob(1.0, 0.0, 1.0),
                blob(-0.5, 1.0, -0.7),
                blob(0.0, -1.5, 0.4),
            ]),
        );
        let p = params(1.3, 0.8);
        assert!(
            poisson_bracket(&s, &p, Functional::Hamiltonian)
                .unwrap()
                .abs()
                < 1e-14
        );
        let h1 = poisson_bracket(&s, &p, Functional::H1).unwrap();
        assert!((h1 - 0.3 / 1.3).abs() < 1e-15);
        for f in Functional::ALL {
            let (lhs, rhs) = poisson_bracket_check(&s, &p, f).unwrap();
            assert!((lhs - rhs).abs() < 1e-6, "{f:?}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn reversal_returns_home() {
        let s = LimitState::new(
            Vec2::zeros(),
            Vec2::new(0.5, 0.0),
            VorticityField::new(vec![blob(1.5, 0.0, 1.0), blob(-1.0, 1.0, -0.5)]),
        );
        let p = LimitParams::new(1.0, 1.0, 0.0, 1e-2).unwrap();
        let report = reversal_check(&s, &p, 1.0).unwrap();
        assert!(report.return_error < 10.0 * report.forward_error.max(1e-13));
    }

    #[test]
    fn weak_form_vanishes() {
        let s = LimitState::new(
            Vec2::zeros(),
            Vec2::new(0.5, 0.0),
            VorticityField::new(vec![blob(1.0, 0.0, 1.0), blob(-0.5, 1.0, -0.5)]),
        );
        let p = LimitParams::new(1.0, 1.0, 0.0, 1e-3).unwrap();
        let test = BumpTest {
            center: Vec2::new(0.5, 0.5),
            radius: 2.0,
        };
        let r = weak_form_residual(&s, &p, 1.0, test).unwrap();
        assert!(r.residual.abs() < 1e-5 * r.scale.max(1.0), "{r:?}");
    }
}
