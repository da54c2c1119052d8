//! Body of size `eps`: the pressure force split into added-mass, vorticity
//! and boundary terms, its small-body asymptotics, and the coupled motion of
//! a disk and vortex blobs written in the body frame.

use nalgebra::{Cholesky, Matrix2, Matrix3, Vector3, U3};
use serde::{Deserialize, Serialize};

use crate::conformal::BodyGeometry;
use crate::contour::{blasius_force, circulation, xi_zeta, BoundaryCurve, DEFAULT_NODES};
use crate::error::{Error, Result};
use crate::kernels::{
    biot_savart_plane, green_hydrodynamic, harmonic_conjugate, harmonic_field, hydrodynamic_robin,
    velocity_at_blob, velocity_unchecked, VorticityField, SINGULARITY_RADIUS,
};
use crate::limit_dynamics::{run as run_limit, BlobRecord, LimitParams, LimitState};
use crate::ode::{step_plan, OdeSystem, Rk4};
use crate::potentials::{added_mass, AddedMass, KirchhoffPotentials};
use crate::{from_conjugate_velocity, perp, to_complex, Vec2};

/// Solid velocities, orientation, lab position and body-frame blobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsState {
    pub ell: Vec2,
    pub r: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default = "Vec2::zeros")]
    pub h: Vec2,
    pub field: VorticityField,
    #[serde(default)]
    pub t: f64,
}

/// `Q(theta)`, rotation by `theta`.
pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

impl EpsState {
    pub fn new(ell: Vec2, r: f64, field: VorticityField) -> Self {
        Self {
            ell,
            r,
            theta: 0.0,
            h: Vec2::zeros(),
            field,
            t: 0.0,
        }
    }

    /// `X = (l1, l2, r)`.
    pub fn solid_velocity(&self) -> Vector3<f64> {
        Vector3::new(self.ell.x, self.ell.y, self.r)
    }

    pub fn lab_position(&self, x: Vec2) -> Vec2 {
        rotation(self.theta) * x + self.h
    }

    /// `h' = Q(theta) l`.
    pub fn lab_velocity(&self) -> Vec2 {
        rotation(self.theta) * self.ell
    }

    fn dimension(&self) -> usize {
        6 + 2 * self.field.len()
    }

    fn pack(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.dimension());
        y.extend_from_slice(&[
            self.ell.x, self.ell.y, self.r, self.theta, self.h.x, self.h.y,
        ]);
        for b in &self.field.blobs {
            y.extend_from_slice(&[b.position.x, b.position.y]);
        }
        y
    }

    fn unpack(&mut self, y: &[f64]) {
        self.ell = Vec2::new(y[0], y[1]);
        self.r = y[2];
        self.theta = y[3];
        self.h = Vec2::new(y[4], y[5]);
        for (j, b) in self.field.blobs.iter_mut().enumerate() {
            b.position = Vec2::new(y[6 + 2 * j], y[7 + 2 * j]);
        }
    }
}

fn check_blobs(geom: &BodyGeometry, field: &VorticityField) -> Result<()> {
    for b in &field.blobs {
        geom.ensure_outside(b.position)?;
    }
    Ok(())
}

/// Boundary pressure potential
/// `Q = |v~|^2/2 + gamma (v~ - U).H + gamma^2 |H|^2 / 2 - U.v~`,
/// `U = l + r x⊥`, `v~ = v - gamma H`.
pub fn pressure_potential<'a>(
    state: &'a EpsState,
    potentials: &'a KirchhoffPotentials,
    gamma: f64,
) -> impl Fn(Vec2) -> Result<f64> + 'a {
    move |x: Vec2| {
        let geom = potentials.geometry();
        check_blobs(geom, &state.field)?;
        let (hf, _) = harmonic_field(geom, x)?;
        let v = velocity_unchecked(potentials, &state.field, state.ell, state.r, gamma, x, None);
        if !(v.x.is_finite() && v.y.is_finite()) {
            return Err(Error::Singular(x));
        }
        let vt = v - gamma * hf;
        let u = state.ell + state.r * perp(x);
        Ok(0.5 * vt.norm_squared()
            + gamma * (vt - u).dot(&hf)
            + 0.5 * gamma * gamma * hf.norm_squared()
            - u.dot(&vt))
    }
}

/// `-F = M2 X' + B + C`, `C = C_a + C_b + C_c + C_d`, each a vector over
/// `i = 1, 2, 3` (force components then torque).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceBreakdown {
    #[serde(rename = "B")]
    pub b: Vector3<f64>,
    #[serde(rename = "C_a")]
    pub c_a: Vector3<f64>,
    #[serde(rename = "C_b")]
    pub c_b: Vector3<f64>,
    #[serde(rename = "C_c")]
    pub c_c: Vector3<f64>,
    #[serde(rename = "C_d")]
    pub c_d: Vector3<f64>,
    /// First two components of `-(B + C)`: the pressure force with the
    /// added-mass reaction moved to the solid's inertia.
    pub total_force: Vec2,
    /// Third component of `-(B + C)`.
    pub total_torque: f64,
    /// `|C_b - C_b(Blasius)|`; `None` when `v~ - U` fails the tangency test.
    pub blasius_residual: Option<f64>,
}

impl ForceBreakdown {
    pub fn c(&self) -> Vector3<f64> {
        self.c_a + self.c_b + self.c_c + self.c_d
    }

    /// `B + C`.
    pub fn b_plus_c(&self) -> Vector3<f64> {
        self.b + self.c()
    }
}

/// Boundary terms by trapezoid quadrature at `DEFAULT_NODES` nodes and the
/// vorticity term summed over blobs.
pub fn force_terms(
    state: &EpsState,
    potentials: &KirchhoffPotentials,
    gamma: f64,
) -> Result<ForceBreakdown> {
    force_terms_inner(state, potentials, gamma, true)
}

fn force_terms_inner(
    state: &EpsState,
    potentials: &KirchhoffPotentials,
    gamma: f64,
    cross_check: bool,
) -> Result<ForceBreakdown> {
    let geom = potentials.geometry();
    check_blobs(geom, &state.field)?;
    let curve = BoundaryCurve::new(geom.clone(), DEFAULT_NODES)?;
    let (ell, r) = (state.ell, state.r);
    let rigid = |x: Vec2| ell + r * perp(x);
    let h_at = |x: Vec2| from_conjugate_velocity(harmonic_conjugate(geom, to_complex(x)));
    let v_tilde = |x: Vec2| {
        velocity_unchecked(potentials, &state.field, ell, r, gamma, x, None) - gamma * h_at(x)
    };

    let mut sums = [Vector3::zeros(); 4];
    for node in curve.nodes() {
        let x = node.position();
        let n = node.normal;
        let k = Vector3::new(n.x, n.y, perp(x).dot(&n)) * node.speed();
        let hf = h_at(x);
        let vt = v_tilde(x);
        let u = rigid(x);
        sums[0] += 0.5 * vt.norm_squared() * k;
        sums[1] += gamma * (vt - u).dot(&hf) * k;
        sums[2] += 0.5 * gamma * gamma * hf.norm_squared() * k;
        sums[3] -= u.dot(&vt) * k;
    }
    let w = curve.weight();
    let [c_a, c_b, c_c, c_d] = sums.map(|s| s * w);
    if !(c_a
        .iter()
        .chain(c_b.iter())
        .chain(c_d.iter())
        .all(|v| v.is_finite()))
    {
        return Err(Error::NonFinite("boundary force terms"));
    }

    let mut b = Vector3::zeros();
    for (j, blob) in state.field.blobs.iter().enumerate() {
        let xj = blob.position;
        for (k, other) in state.field.blobs.iter().enumerate() {
            if k != j && other.core == 0.0 && (other.position - xj).norm() < SINGULARITY_RADIUS {
                return Err(Error::Collision(format!("blobs {j} and {k} coincide")));
            }
        }
        let vj = velocity_unchecked(potentials, &state.field, ell, r, gamma, xj, Some(j));
        let lever = perp(vj - rigid(xj));
        let grads = potentials.gradients_unchecked(xj);
        for i in 0..3 {
            b[i] += blob.strength * lever.dot(&grads[i]);
        }
    }

    let blasius_residual = if cross_check {
        let f = |x: Vec2| v_tilde(x) - rigid(x);
        match blasius_force(&curve, &f, &h_at) {
            Ok(ft) => {
                let complex = gamma * Vector3::new(ft.force.x, ft.force.y, ft.torque);
                Some((complex - c_b).amax())
            }
            Err(Error::NotTangent(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    let total = -(b + c_a + c_b + c_c + c_d);
    Ok(ForceBreakdown {
        b,
        c_a,
        c_b,
        c_c,
        c_d,
        total_force: Vec2::new(total[0], total[1]),
        total_torque: total[2],
        blasius_residual,
    })
}

/// Small-body prediction of `C_b` and the distance of the computed terms to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitForceComparison {
    /// `(gamma (K(0) - l)⊥ + eps r gamma xi, gamma eps zeta.(K(0) - l))`.
    pub predicted: Vector3<f64>,
    /// `|C_b - predicted|` over the two force components.
    pub c_b_error: f64,
    /// `|(B + C) - predicted|` over the two force components.
    pub force_residual: f64,
    /// `|(B + C)_3 - predicted_3| / eps`.
    pub torque_residual: f64,
}

pub fn limit_force_comparison(
    state: &EpsState,
    potentials: &KirchhoffPotentials,
    gamma: f64,
    forces: &ForceBreakdown,
) -> Result<LimitForceComparison> {
    let geom = potentials.geometry();
    let eps = geom.epsilon();
    let (xi, zeta) = xi_zeta(geom.map())?;
    let k0 = biot_savart_plane(&state.field, Vec2::zeros())?;
    let rel = k0 - state.ell;
    let force = gamma * perp(rel) + eps * state.r * gamma * xi;
    let predicted = Vector3::new(force.x, force.y, gamma * eps * zeta.dot(&rel));
    let total = forces.b_plus_c();
    let planar = |v: Vector3<f64>| Vec2::new(v[0], v[1]);
    Ok(LimitForceComparison {
        predicted,
        c_b_error: (planar(forces.c_b) - force).norm(),
        force_residual: (planar(total) - force).norm(),
        torque_residual: (total[2] - predicted[2]).abs() / eps,
    })
}

/// Mass, inertia and circulation of the coupled problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsParams {
    pub m: f64,
    #[serde(rename = "J0")]
    pub j0: f64,
    pub gamma: f64,
    pub dt: f64,
}

impl EpsParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m", self.m), ("J0", self.j0), ("dt", self.dt)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        if !self.gamma.is_finite() {
            return Err(Error::NonFinite("gamma"));
        }
        Ok(())
    }
}

/// Everything fixed along a coupled run of the disk.
#[derive(Debug, Clone)]
pub struct CoupledModel {
    potentials: KirchhoffPotentials,
    mass: AddedMass,
    factor: Cholesky<f64, U3>,
    params: EpsParams,
}

impl CoupledModel {
    pub fn new(geom: &BodyGeometry, params: EpsParams) -> Result<Self> {
        params.validate()?;
        if !geom.is_disk() {
            return Err(Error::Unsupported(format!(
                "coupled integration needs the disk, got {}",
                geom.map().name()
            )));
        }
        let potentials = KirchhoffPotentials::new(geom)?;
        let mass = added_mass(geom, params.m, params.j0)?;
        let factor = mass
            .total
            .cholesky()
            .ok_or(Error::NonFinite("inertia matrix is not positive definite"))?;
        Ok(Self {
            potentials,
            mass,
            factor,
            params,
        })
    }

    pub fn potentials(&self) -> &KirchhoffPotentials {
        &self.potentials
    }

    pub fn mass(&self) -> &AddedMass {
        &self.mass
    }

    pub fn params(&self) -> &EpsParams {
        &self.params
    }

    pub fn geometry(&self) -> &BodyGeometry {
        self.potentials.geometry()
    }
}

/// Time derivative of the solid part `(l, r, theta, h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolidDerivative {
    pub ell: Vec2,
    pub r: f64,
    pub theta: f64,
    pub h: Vec2,
}

/// Solves `(M1 + M2) X' = -(B + C) + (-m r l⊥, 0)`.
pub fn solid_rhs(state: &EpsState, model: &CoupledModel) -> Result<SolidDerivative> {
    let forces = force_terms_inner(state, &model.potentials, model.params.gamma, false)?;
    Ok(solid_from_forces(state, model, &forces))
}

fn solid_from_forces(
    state: &EpsState,
    model: &CoupledModel,
    forces: &ForceBreakdown,
) -> SolidDerivative {
    let gyro = -model.params.m * state.r * perp(state.ell);
    let rhs = -forces.b_plus_c() + Vector3::new(gyro.x, gyro.y, 0.0);
    let accel = model.factor.solve(&rhs);
    SolidDerivative {
        ell: Vec2::new(accel[0], accel[1]),
        r: accel[2],
        theta: state.r,
        h: state.lab_velocity(),
    }
}

/// Body-frame blob velocities `v_{-j}(x_j) - l - r x_j⊥`.
pub fn blob_rhs_body_frame(
    state: &EpsState,
    potentials: &KirchhoffPotentials,
    gamma: f64,
) -> Result<Vec<Vec2>> {
    (0..state.field.len())
        .map(|j| {
            let x = state.field.blobs[j].position;
            let v = velocity_at_blob(potentials, &state.field, state.ell, state.r, gamma, j)?;
            Ok(v - state.ell - state.r * perp(x))
        })
        .collect()
}

/// Discrete conserved energy, split by term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub value: f64,
    /// `X^T M X / 2`.
    pub kinetic: f64,
    /// `-sum_{j<k} G_H(x_j, x_k) g_j g_k`.
    pub blob_interaction: f64,
    /// `-sum_j g_j^2 R_H(x_j) / 2`.
    pub self_energy: f64,
    /// `-gamma sum_j g_j Psi_H(x_j)`.
    pub circulation_coupling: f64,
}

pub fn energy(state: &EpsState, model: &CoupledModel) -> Result<EnergyReport> {
    let geom = model.geometry();
    let x = state.solid_velocity();
    let kinetic = 0.5 * x.dot(&(model.mass.total * x));
    let blobs = &state.field.blobs;
    let mut pairs = 0.0;
    let mut self_energy = 0.0;
    let mut coupling = 0.0;
    for (j, a) in blobs.iter().enumerate() {
        for b in blobs.iter().skip(j + 1) {
            if (a.position - b.position).norm() < SINGULARITY_RADIUS {
                return Err(Error::Collision(format!(
                    "blob {j} coincides with another blob"
                )));
            }
            pairs += green_hydrodynamic(geom, a.position, b.position)? * a.strength * b.strength;
        }
        self_energy += a.strength * a.strength * hydrodynamic_robin(geom, a.position)?;
        coupling += a.strength * harmonic_field(geom, a.position)?.1;
    }
    let blob_interaction = -pairs;
    let self_energy = -0.5 * self_energy;
    let circulation_coupling = -model.params.gamma * coupling;
    Ok(EnergyReport {
        value: kinetic + blob_interaction + self_energy + circulation_coupling,
        kinetic,
        blob_interaction,
        self_energy,
        circulation_coupling,
    })
}

struct CoupledSystem<'a> {
    template: &'a EpsState,
    model: &'a CoupledModel,
}

impl OdeSystem for CoupledSystem<'_> {
    fn dimension(&self) -> usize {
        self.template.dimension()
    }

    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        let mut state = self.template.clone();
        state.unpack(y);
        state.t = t;
        let solid = solid_rhs(&state, self.model)?;
        let blobs = blob_rhs_body_frame(&state, &self.model.potentials, self.model.params.gamma)?;
        dydt[..6].copy_from_slice(&[
            solid.ell.x,
            solid.ell.y,
            solid.r,
            solid.theta,
            solid.h.x,
            solid.h.y,
        ]);
        for (j, v) in blobs.iter().enumerate() {
            dydt[6 + 2 * j] = v.x;
            dydt[7 + 2 * j] = v.y;
        }
        Ok(())
    }
}

/// One output line of a coupled run; blobs are reported in the lab frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsRecord {
    pub t: f64,
    pub h: [f64; 2],
    /// `m h'`.
    pub xi: [f64; 2],
    #[serde(rename = "H")]
    pub energy: f64,
    pub support_radius: f64,
    pub ell: [f64; 2],
    pub r: f64,
    pub theta: f64,
    pub blobs: Vec<BlobRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub forces: Option<ForceBreakdown>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoupledOptions {
    pub output_stride: usize,
    pub record_forces: bool,
}

impl Default for CoupledOptions {
    fn default() -> Self {
        Self {
            output_stride: 1,
            record_forces: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoupledTrajectory {
    pub records: Vec<EpsRecord>,
    /// `(t, h)` after every step, starting at the initial time.
    pub path: Vec<(f64, Vec2)>,
    pub final_state: EpsState,
    /// `max_t |E(t) - E(0)| / max(1, |E(0)|)` over every step.
    pub energy_drift: f64,
    /// `max_t |circulation(t) - gamma|` around the body.
    pub circulation_error: f64,
    /// `sup_t |eps r(t)|`.
    pub max_eps_r: f64,
    pub support: SupportReport,
    pub steps: usize,
    pub dt: f64,
}

fn record(
    state: &EpsState,
    model: &CoupledModel,
    energy: f64,
    forces: Option<ForceBreakdown>,
) -> EpsRecord {
    let xi = model.params.m * state.lab_velocity();
    EpsRecord {
        t: state.t,
        h: state.h.into(),
        xi: xi.into(),
        energy,
        support_radius: state.field.support_radius(),
        ell: state.ell.into(),
        r: state.r,
        theta: state.theta,
        blobs: state
            .field
            .blobs
            .iter()
            .map(|b| BlobRecord {
                x: state.lab_position(b.position).into(),
                strength: b.strength,
            })
            .collect(),
        forces,
    }
}

fn boundary_circulation(state: &EpsState, model: &CoupledModel) -> Result<f64> {
    let curve = BoundaryCurve::new(model.geometry().clone(), DEFAULT_NODES)?;
    let v = |x: Vec2| {
        velocity_unchecked(
            &model.potentials,
            &state.field,
            state.ell,
            state.r,
            model.params.gamma,
            x,
            None,
        )
    };
    circulation(&curve, &v)
}

/// RK4 on `(l, r, theta, h, x_1..x_N)` over `[0, horizon]`.
pub fn run_coupled(
    initial: &EpsState,
    model: &CoupledModel,
    horizon: f64,
    options: CoupledOptions,
) -> Result<CoupledTrajectory> {
    let (steps, dt) = step_plan(model.params.dt, horizon)?;
    let stride = options.output_stride.max(1);
    let eps = model.geometry().epsilon();
    let gamma = model.params.gamma;
    let mut state = initial.clone();
    check_blobs(model.geometry(), &state.field)?;
    let forces_now = |s: &EpsState| -> Result<Option<ForceBreakdown>> {
        if options.record_forces {
            force_terms(s, &model.potentials, gamma).map(Some)
        } else {
            Ok(None)
        }
    };
    let e0 = energy(&state, model)?.value;
    let mut records = vec![record(&state, model, e0, forces_now(&state)?)];
    let mut path = vec![(state.t, state.h)];
    let mut drift: f64 = 0.0;
    let mut circulation_error = (boundary_circulation(&state, model)? - gamma).abs();
    let mut max_eps_r = (eps * state.r).abs();
    let mut samples = Vec::with_capacity(steps + 1);
    let mut rk = Rk4::new(state.dimension());
    let t0 = state.t;
    for n in 0..steps {
        let mut y = state.pack();
        let radius = state.field.support_radius();
        let t_start = state.t;
        {
            let system = CoupledSystem {
                template: &state,
                model,
            };
            rk.step(&system, t_start, dt, &mut y)?;
        }
        state.unpack(&y);
        state.t = t0 + (n + 1) as f64 * dt;
        samples.push(SupportSample {
            t: t_start,
            radius,
            max_speed: rk.last_slope()[6..]
                .chunks_exact(2)
                .map(|v| v[0].hypot(v[1]))
                .fold(0.0, f64::max),
        });
        check_blobs(model.geometry(), &state.field)?;
        let e = energy(&state, model)?.value;
        drift = drift.max((e - e0).abs() / e0.abs().max(1.0));
        circulation_error =
            circulation_error.max((boundary_circulation(&state, model)? - gamma).abs());
        max_eps_r = max_eps_r.max((eps * state.r).abs());
        path.push((state.t, state.h));
        if (n + 1) % stride == 0 || n + 1 == steps {
            records.push(record(&state, model, e, forces_now(&state)?));
        }
    }
    samples.push(SupportSample {
        t: state.t,
        radius: state.field.support_radius(),
        max_speed: blob_rhs_body_frame(&state, &model.potentials, gamma)?
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max),
    });
    Ok(CoupledTrajectory {
        records,
        path,
        final_state: state,
        energy_drift: drift,
        circulation_error,
        max_eps_r,
        support: support_radius_monitor(&samples),
        steps,
        dt,
    })
}

/// Initial data shared by every `eps` of a convergence study. Blob positions
/// are given in the lab frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedData {
    pub ell0: Vec2,
    pub r0: f64,
    pub h0: Vec2,
    pub field: VorticityField,
    pub m: f64,
    #[serde(rename = "J0")]
    pub j0: f64,
    pub gamma: f64,
    pub dt: f64,
}

impl MatchedData {
    /// Finite-size initial state: `theta = 0`, blobs shifted to the body frame.
    pub fn eps_state(&self) -> EpsState {
        let mut field = self.field.clone();
        for b in &mut field.blobs {
            b.position -= self.h0;
        }
        EpsState {
            ell: self.ell0,
            r: self.r0,
            theta: 0.0,
            h: self.h0,
            field,
            t: 0.0,
        }
    }

    /// Limit initial state with `xi = m l0`.
    pub fn limit_state(&self) -> LimitState {
        LimitState::new(self.h0, self.m * self.ell0, self.field.clone())
    }

    pub fn eps_params(&self) -> EpsParams {
        EpsParams {
            m: self.m,
            j0: self.j0,
            gamma: self.gamma,
            dt: self.dt,
        }
    }

    pub fn limit_params(&self) -> Result<LimitParams> {
        LimitParams::new(self.m, self.gamma, 0.0, self.dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    /// `sup_t |h_eps(t) - h(t)|`.
    pub sup_error: f64,
    pub final_error: f64,
    pub energy_drift: f64,
    /// `sup_t |eps r_eps(t)|`.
    pub max_eps_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// `sup_error` strictly decreasing with `eps` (rows sorted by decreasing
    /// `eps`); `None` for fewer than two rows.
    pub monotone: Option<bool>,
}

/// Runs the disk at each `eps` and the limit system from matched data, and
/// compares the centers.
pub fn convergence_study(
    data: &MatchedData,
    epsilons: &[f64],
    horizon: f64,
) -> Result<ConvergenceReport> {
    if epsilons.is_empty() {
        return Err(Error::InvalidParameter {
            name: "epsilon_list",
            reason: "empty".into(),
        });
    }
    let limit = run_limit(&data.limit_state(), &data.limit_params()?, horizon, 1)?;
    let reference: Vec<Vec2> = limit.records.iter().map(|r| Vec2::from(r.h)).collect();
    let mut eps_sorted = epsilons.to_vec();
    eps_sorted.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::with_capacity(eps_sorted.len());
    for &eps in &eps_sorted {
        let geom = BodyGeometry::disk(eps)?;
        let model = CoupledModel::new(&geom, data.eps_params())?;
        let traj = run_coupled(
            &data.eps_state(),
            &model,
            horizon,
            CoupledOptions {
                output_stride: usize::MAX,
                record_forces: false,
            },
        )?;
        if traj.path.len() != reference.len() {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: "finite and limit runs disagree on the step count".into(),
            });
        }
        let errors: Vec<f64> = traj
            .path
            .iter()
            .zip(&reference)
            .map(|((_, h), href)| (h - href).norm())
            .collect();
        rows.push(ConvergenceRow {
            epsilon: eps,
            sup_error: errors.iter().copied().fold(0.0, f64::max),
            final_error: *errors.last().unwrap_or(&0.0),
            energy_drift: traj.energy_drift,
            max_eps_r: traj.max_eps_r,
        });
    }
    let monotone =
        (rows.len() > 1).then(|| rows.windows(2).all(|w| w[1].sup_error < w[0].sup_error));
    Ok(ConvergenceReport { rows, monotone })
}

/// Added-mass matrix `M2` of `geom` with a unit solid, for scaling checks.
pub fn fluid_added_mass(geom: &BodyGeometry) -> Result<Matrix3<f64>> {
    Ok(added_mass(geom, 1.0, 1.0)?.m2)
}

/// One sample of the support radius and the largest blob speed at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportSample {
    pub t: f64,
    pub radius: f64,
    pub max_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    /// `min_n (rho(0) + ∫_0^{t_n} speed - rho(t_n))`, never above 0.
    pub min_margin: f64,
    /// `10 dt max speed`, the discretization slack.
    pub slack: f64,
    pub max_speed: f64,
    pub passed: bool,
}

/// Checks `rho(t) <= rho(0) + ∫_0^t max speed` along sampled times, the
/// integral by the trapezoid rule.
pub fn support_radius_monitor(samples: &[SupportSample]) -> SupportReport {
    let Some(first) = samples.first() else {
        return SupportReport {
            min_margin: 0.0,
            slack: 0.0,
            max_speed: 0.0,
            passed: true,
        };
    };
    let mut integral = 0.0;
    let mut min_margin: f64 = 0.0;
    let mut max_speed = first.max_speed;
    let mut max_dt: f64 = 0.0;
    for w in samples.windows(2) {
        let dt = w[1].t - w[0].t;
        max_dt = max_dt.max(dt.abs());
        integral += 0.5 * dt * (w[0].max_speed + w[1].max_speed);
        max_speed = max_speed.max(w[1].max_speed);
        min_margin = min_margin.min(first.radius + integral - w[1].radius);
    }
    let slack = 10.0 * max_dt * max_speed;
    SupportReport {
        min_margin,
        slack,
        max_speed,
        passed: min_margin >= -slack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::VortexBlob;
    use std::f64::consts::PI;

    fn disk(eps: f64) -> KirchhoffPotentials {
        KirchhoffPotentials::new(&BodyGeometry::disk(eps).unwrap()).unwrap()
    }

    fn one_blob(x: f64, y: f64, g: f64) -> VorticityField {
        VorticityField::new(vec![VortexBlob::point(Vec2::new(x, y), g)])
    }

    #[test]
    fn pressure_potential_examples() {
        let p = disk(0.3);
        let still = EpsState::new(Vec2::zeros(), 0.0, VorticityField::empty());
        let boundary = p.geometry().boundary_point(0.17);
        assert_eq!(pressure_potential(&still, &p, 0.0)(boundary).unwrap(), 0.0);
        let q = pressure_potential(&still, &p, 1.0)(boundary).unwrap();
        assert!((q - 1.0 / (8.0 * PI * PI * 0.09)).abs() < 1e-12);

        let moving = EpsState::new(Vec2::new(0.3, -0.2), 0.4, one_blob(1.0, 0.5, 0.7));
        let q1 = pressure_potential(&moving, &p, 0.5)(boundary).unwrap();
        // a far vortex pair: O(1/|x|^2) influence
        let mut far = moving.clone();
        far.field
            .blobs
            .push(VortexBlob::point(Vec2::new(1e6, 0.0), 1.0));
        far.field
            .blobs
            .push(VortexBlob::point(Vec2::new(1e6, 1.0), -1.0));
        let q2 = pressure_potential(&far, &p, 0.5)(boundary).unwrap();
        assert!((q1 - q2).abs() < 1e-9);
        // a single far vortex carries a uniform O(1/|x|) stream
        let mut single = moving.clone();
        single
            .field
            .blobs
            .push(VortexBlob::point(Vec2::new(1e6, 0.0), 1.0));
        let q3 = pressure_potential(&single, &p, 0.5)(boundary).unwrap();
        assert!((q1 - q3).abs() * 1e6 < 1.0);
    }

    #[test]
    fn c_c_vanishes_and_blasius_agrees() {
        let p = disk(0.2);
        let s = EpsState::new(Vec2::new(0.3, -0.1), 0.5, one_blob(1.0, 0.3, 2.0));
        let f = force_terms(&s, &p, 1.3).unwrap();
        assert!(f.c_c.amax() < 1e-10);
        assert!(f.blasius_residual.unwrap() < 1e-10);
    }

    #[test]
    fn dalembert_steady_disk() {
        let p = disk(0.5);
        let s = EpsState::new(Vec2::new(1.0, 0.4), 0.0, VorticityField::empty());
        let f = force_terms(&s, &p, 0.0).unwrap();
        assert!(f.b.amax() == 0.0);
        assert!(f.c_b.amax() < 1e-14 && f.c_c.amax() < 1e-14);
        assert!(f.b_plus_c().amax() < 1e-12);
    }

    #[test]
    fn c_b_approaches_lift() {
        let mut residuals = Vec::new();
        for eps in [0.2, 0.1, 0.05] {
            let p = disk(eps);
            let s = EpsState::new(Vec2::zeros(), 0.0, one_blob(1.0, 0.0, 2.0 * PI));
            let f = force_terms(&s, &p, 1.0).unwrap();
            let cmp = limit_force_comparison(&s, &p, 1.0, &f).unwrap();
            assert!((cmp.predicted - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
            // for the disk C_b is the lift exactly, by residues
            assert!(cmp.c_b_error < 1e-13);
            residuals.push(cmp.force_residual);
        }
        assert!(
            residuals[1] < residuals[0] && residuals[2] < residuals[1],
            "{residuals:?}"
        );
    }

    #[test]
    fn blob_rigid_term_is_additive() {
        let p = disk(0.2);
        let a = EpsState::new(Vec2::new(0.1, 0.2), 0.0, one_blob(1.0, 0.5, 1.0));
        let mut b = a.clone();
        b.r = 0.7;
        let va = blob_rhs_body_frame(&a, &p, 0.3).unwrap()[0];
        let vb = blob_rhs_body_frame(&b, &p, 0.3).unwrap()[0];
        let x = a.field.blobs[0].position;
        // the disk has no rotation potential, so only the rigid term changes
        assert!((vb - va + 0.7 * perp(x)).norm() < 1e-15);
    }

    #[test]
    fn blob_orbits_still_disk() {
        let eps = 0.5;
        let p = disk(eps);
        let (d, g) = (2.0, 1.0);
        let s = EpsState::new(Vec2::zeros(), 0.0, one_blob(d, 0.0, g));
        let v = blob_rhs_body_frame(&s, &p, 0.0).unwrap()[0];
        // image -g at eps^2/d plus +g at the center (circulation held at 0)
        let image = eps * eps / d;
        let expected = g / (2.0 * PI) * (1.0 / d - 1.0 / (d - image));
        assert!((v - Vec2::new(0.0, expected)).norm() < 1e-14);
    }

    #[test]
    fn far_blob_is_slow() {
        let eps = 0.01;
        let p = disk(eps);
        let s = EpsState::new(Vec2::zeros(), 0.0, one_blob(1e3 * eps, 0.0, 1.0));
        let v = blob_rhs_body_frame(&s, &p, 0.0).unwrap()[0];
        assert!(v.norm() < 1e-4);
    }

    #[test]
    fn non_disk_coupled_rejected() {
        let geom = BodyGeometry::joukowski(0.5, 0.1).unwrap();
        let params = EpsParams {
            m: 1.0,
            j0: 1.0,
            gamma: 1.0,
            dt: 1e-3,
        };
        assert!(matches!(
            CoupledModel::new(&geom, params),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn straight_line_without_circulation() {
        let geom = BodyGeometry::disk(0.2).unwrap();
        let params = EpsParams {
            m: 1.0,
            j0: 1.0,
            gamma: 0.0,
            dt: 1e-2,
        };
        let model = CoupledModel::new(&geom, params).unwrap();
        let s = EpsState::new(Vec2::new(1.0, 0.5), 0.3, VorticityField::empty());
        let traj = run_coupled(&s, &model, 1.0, CoupledOptions::default()).unwrap();
        // the lab velocity Q(theta) l is constant while l turns in the body frame
        let end = &traj.final_state;
        assert!((end.lab_velocity() - s.ell).norm() < 1e-10);
        assert!((end.theta - 0.3).abs() < 1e-14);
        assert!((end.h - s.ell).norm() < 1e-10);
    }

    #[test]
    fn support_monitor_static_field() {
        let samples: Vec<_> = (0..5)
            .map(|k| SupportSample {
                t: k as f64,
                radius: 2.0,
                max_speed: 0.0,
            })
            .collect();
        let r = support_radius_monitor(&samples);
        assert!(r.passed && r.min_margin == 0.0);
    }
}
