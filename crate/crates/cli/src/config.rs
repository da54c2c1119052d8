//! Scenario files: TOML with the fields below, validated before any run.
//!
//! ```toml
//! shape = { kind = "disk" }          # or { kind = "joukowski", a = 0.5 }
//! epsilon = 0.1                      # omit for the limit system
//! m = 1.0
//! J0 = 1.0
//! gamma = 1.0
//! ell0 = [0.5, 0.0]
//! r0 = 0.0
//! dt = 1e-3
//! T = 1.0
//!
//! [[blobs]]
//! position = [2.0, 0.0]
//! strength = 1.0
//!
//! [output]
//! path = "out.jsonl"
//! format = "jsonl"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use smallbody::finite_eps::MatchedData;
use smallbody::limit_dynamics::{LimitParams, LimitState};
use smallbody::{BodyGeometry, Vec2, VortexBlob, VorticityField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    #[default]
    Disk,
    Joukowski {
        a: f64,
    },
}

impl Shape {
    pub fn geometry(&self, epsilon: f64) -> smallbody::Result<BodyGeometry> {
        match *self {
            Shape::Disk => BodyGeometry::disk(epsilon),
            Shape::Joukowski { a } => BodyGeometry::joukowski(a, epsilon),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Disk => write!(f, "disk"),
            Shape::Joukowski { a } => write!(f, "joukowski(a={a})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobConfig {
    pub position: [f64; 2],
    pub strength: f64,
    #[serde(default)]
    pub core: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_stride() -> usize {
    1
}

fn is_default_stride(v: &usize) -> bool {
    *v == 1
}

fn is_false(v: &bool) -> bool {
    !*v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_list: Option<Vec<f64>>,
    pub m: f64,
    #[serde(rename = "J0", default, skip_serializing_if = "Option::is_none")]
    pub j0: Option<f64>,
    pub gamma: f64,
    #[serde(default)]
    pub ell0: [f64; 2],
    #[serde(default)]
    pub r0: f64,
    #[serde(default)]
    pub h0: [f64; 2],
    /// Regularization radius of the plane kernel in the limit system.
    #[serde(default)]
    pub core: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_stride", skip_serializing_if = "is_default_stride")]
    pub output_stride: usize,
    /// Attach a force breakdown to every coupled-run record.
    #[serde(default, skip_serializing_if = "is_false")]
    pub record_forces: bool,
    #[serde(default)]
    pub blobs: Vec<BlobConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError(format!("invalid field `{field}`: {reason}"))
}

fn finite(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite, got {v}")))
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(
            field,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

impl ScenarioConfig {
    /// Parses and validates. Syntax errors carry the line and column.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    /// Every epsilon mentioned by the file.
    pub fn epsilons(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.epsilon.into_iter().collect();
        if let Some(list) = &self.epsilon_list {
            all.extend(list);
        }
        all
    }

    pub fn is_finite_size(&self) -> bool {
        !self.epsilons().is_empty()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Shape::Joukowski { a } = self.shape {
            if !(a.is_finite() && a > 0.0 && a < 1.0) {
                return Err(invalid("shape.a", format!("must lie in (0, 1), got {a}")));
            }
        }
        if let Some(e) = self.epsilon {
            positive("epsilon", e)?;
        }
        if let Some(list) = &self.epsilon_list {
            if list.is_empty() {
                return Err(invalid("epsilon_list", "empty"));
            }
            for &e in list {
                positive("epsilon_list", e)?;
            }
        }
        positive("m", self.m)?;
        finite("gamma", self.gamma)?;
        finite("r0", self.r0)?;
        finite("core", self.core)?;
        if self.core < 0.0 {
            return Err(invalid("core", "must be nonnegative"));
        }
        for (i, name) in ["ell0", "h0"].iter().enumerate() {
            let v = if i == 0 { self.ell0 } else { self.h0 };
            finite(name, v[0])?;
            finite(name, v[1])?;
        }
        positive("dt", self.dt)?;
        positive("T", self.horizon)?;
        if self.dt >= self.horizon {
            return Err(invalid(
                "dt",
                format!("must be smaller than T = {}, got {}", self.horizon, self.dt),
            ));
        }
        if self.output_stride == 0 {
            return Err(invalid("output_stride", "must be at least 1"));
        }
        match (self.j0, self.is_finite_size()) {
            (Some(j0), _) => positive("J0", j0)?,
            (None, true) => {
                return Err(ConfigError(
                    "missing field `J0` (required with epsilon or epsilon_list)".into(),
                ))
            }
            (None, false) => {}
        }
        for (i, b) in self.blobs.iter().enumerate() {
            let field = format!("blobs[{i}]");
            finite(&field, b.position[0])?;
            finite(&field, b.position[1])?;
            finite(&field, b.strength)?;
            if !(b.core.is_finite() && b.core >= 0.0) {
                return Err(invalid(&format!("{field}.core"), "must be nonnegative"));
            }
        }
        let largest = self.epsilons().into_iter().fold(0.0, f64::max);
        if largest > 0.0 {
            let geom = self
                .shape
                .geometry(largest)
                .map_err(|e| invalid("shape", e))?;
            let h0 = Vec2::from(self.h0);
            for (i, b) in self.blobs.iter().enumerate() {
                if !geom.is_outside(Vec2::from(b.position) - h0) {
                    return Err(invalid(
                        &format!("blobs[{i}]"),
                        format!("lies inside the body of size epsilon = {largest}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Blobs in the lab frame.
    pub fn field(&self) -> VorticityField {
        VorticityField::new(
            self.blobs
                .iter()
                .map(|b| VortexBlob {
                    position: Vec2::from(b.position),
                    strength: b.strength,
                    core: b.core,
                })
                .collect(),
        )
    }

    /// Limit initial state with `xi = m l0`.
    pub fn limit_state(&self) -> LimitState {
        LimitState::new(
            Vec2::from(self.h0),
            self.m * Vec2::from(self.ell0),
            self.field(),
        )
    }

    pub fn limit_params(&self) -> smallbody::Result<LimitParams> {
        LimitParams::new(self.m, self.gamma, self.core, self.dt)
    }

    /// Shared initial data of the finite-size runs.
    pub fn matched_data(&self) -> MatchedData {
        MatchedData {
            ell0: Vec2::from(self.ell0),
            r0: self.r0,
            h0: Vec2::from(self.h0),
            field: self.field(),
            m: self.m,
            j0: self.j0.unwrap_or(1.0),
            gamma: self.gamma,
            dt: self.dt,
        }
    }
}
