//! Scenario runner behind the `smallbody` binary.

pub mod config;
pub mod output;
pub mod verify;

use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use smallbody::finite_eps::{
    convergence_study, force_terms, limit_force_comparison, run_coupled, ConvergenceReport,
    CoupledModel, CoupledOptions, CoupledTrajectory, ForceBreakdown, LimitForceComparison,
    SupportReport,
};
use smallbody::limit_dynamics::{run as run_limit, LimitTrajectory};
use smallbody::potentials::KirchhoffPotentials;
use smallbody::Error;

use crate::config::{ScenarioConfig, Shape};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Verification(String),
    Runtime(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Verification(_) => EXIT_VERIFICATION,
            CliError::Runtime(_) | CliError::Io(_) => EXIT_RUNTIME,
        }
    }

    /// Machine-readable description of a halted run.
    pub fn diagnostic(&self) -> serde_json::Value {
        let (kind, detail) = match self {
            CliError::Config(_) => ("config", None),
            CliError::Verification(_) => ("verification", None),
            CliError::Io(_) => ("io", None),
            CliError::Runtime(e) => (
                "runtime",
                Some(match e {
                    Error::InvalidParameter { .. } => "invalid_parameter",
                    Error::InsideBody(_) => "inside_body",
                    Error::Singular(_) => "singular",
                    Error::Collision(_) => "collision",
                    Error::NonFinite(_) => "non_finite",
                    Error::NotConverged { .. } => "not_converged",
                    Error::NotTangent(_) => "not_tangent",
                    Error::Unsupported(_) => "unsupported",
                }),
            ),
        };
        serde_json::json!({
            "status": "halted",
            "kind": kind,
            "cause": detail,
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Runtime(e) => write!(f, "run halted: {e}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

fn setup<T>(r: smallbody::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Config(e.to_string()))
}

fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

pub enum Simulation {
    Limit(LimitTrajectory),
    Coupled(CoupledTrajectory),
}

impl Simulation {
    pub fn support(&self) -> &SupportReport {
        match self {
            Simulation::Limit(t) => &t.support,
            Simulation::Coupled(t) => &t.support,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub mode: &'static str,
    pub shape: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub steps: usize,
    pub dt: f64,
    pub t_final: f64,
    pub h_final: [f64; 2],
    pub xi_final: [f64; 2],
    /// Hamiltonian drift (limit) or energy drift (coupled), relative.
    pub drift: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circulation_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_eps_r: Option<f64>,
    pub support: SupportReport,
    pub records: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Limit system without `epsilon`, coupled disk run with it.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Simulation, CliError> {
    match cfg.epsilon {
        None => {
            let params = setup(cfg.limit_params())?;
            run_limit(&cfg.limit_state(), &params, cfg.horizon, cfg.output_stride)
                .map(Simulation::Limit)
                .map_err(CliError::Runtime)
        }
        Some(eps) => {
            if cfg.shape != Shape::Disk {
                return Err(CliError::Config(format!(
                    "finite-size runs support the disk only, got {}",
                    cfg.shape
                )));
            }
            let data = cfg.matched_data();
            let geom = setup(cfg.shape.geometry(eps))?;
            let model = setup(CoupledModel::new(&geom, data.eps_params()))?;
            let options = CoupledOptions {
                output_stride: cfg.output_stride,
                record_forces: cfg.record_forces,
            };
            run_coupled(&data.eps_state(), &model, cfg.horizon, options)
                .map(Simulation::Coupled)
                .map_err(CliError::Runtime)
        }
    }
}

/// Runs the scenario and writes the records to the configured output.
pub fn simulate(cfg: &ScenarioConfig) -> Result<SimulationSummary, CliError> {
    let sim = run_scenario(cfg)?;
    let output = cfg.output.as_ref().map(|o| o.path.clone());
    let summary = match &sim {
        Simulation::Limit(t) => {
            if let Some(o) = &cfg.output {
                output::write_limit(&o.path, o.format, &t.records).map_err(io(&o.path))?;
            }
            let last = t.records.last().expect("initial record");
            SimulationSummary {
                mode: "limit",
                shape: "point".into(),
                epsilon: None,
                steps: t.steps,
                dt: t.dt,
                t_final: last.t,
                h_final: last.h,
                xi_final: last.xi,
                drift: t.hamiltonian_drift,
                circulation_error: None,
                max_eps_r: None,
                support: t.support,
                records: t.records.len(),
                output,
            }
        }
        Simulation::Coupled(t) => {
            if let Some(o) = &cfg.output {
                output::write_coupled(&o.path, o.format, &t.records).map_err(io(&o.path))?;
            }
            let last = t.records.last().expect("initial record");
            SimulationSummary {
                mode: "coupled",
                shape: cfg.shape.to_string(),
                epsilon: cfg.epsilon,
                steps: t.steps,
                dt: t.dt,
                t_final: last.t,
                h_final: last.h,
                xi_final: last.xi,
                drift: t.energy_drift,
                circulation_error: Some(t.circulation_error),
                max_eps_r: Some(t.max_eps_r),
                support: t.support,
                records: t.records.len(),
                output,
            }
        }
    };
    Ok(summary)
}

/// Disk runs at every epsilon against the limit system. With an output path
/// the report goes to `<path>.json` and the table to `<path>.csv`.
pub fn convergence(cfg: &ScenarioConfig) -> Result<ConvergenceReport, CliError> {
    if cfg.shape != Shape::Disk {
        return Err(CliError::Config(format!(
            "convergence studies support the disk only, got {}",
            cfg.shape
        )));
    }
    let epsilons = match &cfg.epsilon_list {
        Some(list) => list.clone(),
        None => cfg.epsilon.into_iter().collect(),
    };
    if epsilons.is_empty() {
        return Err(CliError::Config(
            "missing field `epsilon_list` (or `epsilon`)".into(),
        ));
    }
    let data = cfg.matched_data();
    setup(data.limit_params())?;
    setup(data.eps_params().validate())?;
    let report = convergence_study(&data, &epsilons, cfg.horizon).map_err(CliError::Runtime)?;
    if let Some(o) = &cfg.output {
        let json = o.path.with_extension("json");
        output::write_json(&json, &report).map_err(io(&json))?;
        let table = o.path.with_extension("csv");
        output::write_convergence_table(&table, &report).map_err(io(&table))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ForcesReport {
    pub shape: String,
    pub epsilon: f64,
    pub gamma: f64,
    pub ell: [f64; 2],
    pub r: f64,
    pub forces: ForceBreakdown,
    pub small_body: LimitForceComparison,
}

/// Force decomposition at the initial state of the scenario.
pub fn forces(cfg: &ScenarioConfig) -> Result<ForcesReport, CliError> {
    let eps = cfg
        .epsilon
        .ok_or_else(|| CliError::Config("missing field `epsilon` (required by forces)".into()))?;
    let geom = setup(cfg.shape.geometry(eps))?;
    let potentials = setup(KirchhoffPotentials::new(&geom))?;
    let state = cfg.matched_data().eps_state();
    let breakdown = force_terms(&state, &potentials, cfg.gamma).map_err(CliError::Runtime)?;
    let small_body = limit_force_comparison(&state, &potentials, cfg.gamma, &breakdown)
        .map_err(CliError::Runtime)?;
    Ok(ForcesReport {
        shape: cfg.shape.to_string(),
        epsilon: eps,
        gamma: cfg.gamma,
        ell: cfg.ell0,
        r: cfg.r0,
        forces: breakdown,
        small_body,
    })
}
