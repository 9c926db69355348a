//! Scenario files: TOML documents, dotted-path overrides and validation.
//!
//! Agent ids are 1-based in files and 0-based everywhere else.

use std::path::Path;

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::algebra::GainSet;
use crate::error::{Error, Result};
use crate::etc::ThresholdFunction;
use crate::graph::Digraph;
use crate::pace::PaceProfile;
use crate::sim::{certify, AnalysisConfig, Scenario};
use crate::trajectory::{BezierTrajectory, TrajectorySet};
use crate::vehicle::{Disturbance, PfConfig, VehicleState};

/// The bundled five-agent scenario.
pub const BUNDLED: &str = include_str!("../scenarios/bundled.toml");

/// Samples used when checking pairwise separation of the virtual targets.
const SEPARATION_SAMPLES: usize = 2001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub sim: SimSection,
    pub graph: GraphSection,
    pub gains: GainSet,
    pub threshold: ThresholdFunction,
    pub gamma_dot_d: PaceProfile,
    #[serde(default)]
    pub vehicle: VehicleSection,
    pub trajectories: TrajectorySection,
    pub agents: Vec<AgentSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub disturbances: Vec<DisturbanceSection>,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    /// Step size (s).
    pub dt: f64,
    /// Horizon (s).
    pub t_end: f64,
    /// Reserved; every run is deterministic.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    /// `[i, j]`: agent `j` transmits to agent `i`.
    pub edges: Vec<[usize; 2]>,
}

/// Fleet-wide vehicle defaults; unset fields fall back to [`PfConfig::default`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

impl VehicleSection {
    fn over(&self, base: PfConfig) -> PfConfig {
        PfConfig {
            k_p: self.k_p.unwrap_or(base.k_p),
            v_min: self.v_min.unwrap_or(base.v_min),
            v_max: self.v_max.unwrap_or(base.v_max),
            rho: self.rho.unwrap_or(base.rho),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    /// Nominal arrival time (s).
    pub t_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub id: usize,
    /// Bezier control points (m).
    pub control_points: Vec<[f64; 3]>,
    /// Vehicle position minus the initial virtual target (m).
    #[serde(default)]
    pub initial_offset: [f64; 3],
    #[serde(default)]
    pub gamma0: f64,
    #[serde(default = "one")]
    pub gamma_dot0: f64,
    /// Per-agent overrides of the `[vehicle]` defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vehicle: Option<VehicleSection>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSection {
    pub agent: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Additive velocity (m/s).
    pub velocity: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Lyapunov weight, `(n-1) x (n-1)` rows; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<Vec<f64>>>,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default)]
    pub kappa2: f64,
    #[serde(default = "default_safety")]
    pub safety_distance: f64,
    #[serde(default = "default_eps")]
    pub coordination_eps: f64,
}

fn default_safety() -> f64 {
    10.0
}

fn default_eps() -> f64 {
    0.1
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            xi: None,
            beta: 1.0,
            kappa2: 0.0,
            safety_distance: default_safety(),
            coordination_eps: default_eps(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Dotted field path, e.g. `threshold.c1`.
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: {}: {}", self.path, self.message)
    }
}

struct Diags(Vec<Diagnostic>);

impl Diags {
    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        });
    }

    fn check(&mut self, path: &str, r: Result<()>) {
        if let Err(e) = r {
            let msg = match e {
                Error::InvalidParameter(m) => m,
                other => other.to_string(),
            };
            self.error(path, msg);
        }
    }

    fn has_errors(&self) -> bool {
        self.0.iter().any(|d| d.severity == Severity::Error)
    }
}

impl ScenarioFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn bundled() -> Self {
        Self::from_toml_str(BUNDLED).expect("bundled scenario parses")
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Applies `key=value`, where `key` is a dotted path such as `gains.a`
    /// or `agents.2.gamma0` (array positions are 0-based) and `value` is a
    /// TOML literal. Bare words are taken as strings.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("override `{assignment}` is not of the form key=value")))?;
        let key = key.trim();
        let raw = raw.trim();
        let mut value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
            Ok(mut t) => t.remove("v").expect("key present"),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        let mut doc = toml::Value::try_from(&*self).map_err(|e| Error::Parse(e.to_string()))?;
        let mut slot = &mut doc;
        for seg in key.split('.') {
            let missing = || Error::Parse(format!("override key `{key}`: no field `{seg}`"));
            slot = match slot {
                toml::Value::Table(t) => {
                    if !t.contains_key(seg) {
                        // optional fields are skipped when serialized
                        t.insert(seg.to_string(), toml::Value::Table(toml::Table::new()));
                    }
                    t.get_mut(seg).ok_or_else(missing)?
                }
                toml::Value::Array(a) => {
                    let i: usize = seg.parse().map_err(|_| missing())?;
                    a.get_mut(i).ok_or_else(missing)?
                }
                _ => return Err(missing()),
            };
        }
        if let (toml::Value::Float(_), toml::Value::Integer(i)) = (&*slot, &value) {
            value = toml::Value::Float(*i as f64);
        }
        *slot = value;
        *self = doc
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(format!("override `{assignment}`: {e}")))?;
        Ok(())
    }

    /// Per-agent vehicle configurations, in id order.
    fn vehicle_configs(&self) -> Vec<PfConfig> {
        let base = self.vehicle.over(PfConfig::default());
        self.agents_by_id()
            .iter()
            .map(|a| a.vehicle.map_or(base, |v| v.over(base)))
            .collect()
    }

    fn agents_by_id(&self) -> Vec<&AgentSection> {
        let mut v: Vec<&AgentSection> = self.agents.iter().collect();
        v.sort_by_key(|a| a.id);
        v
    }

    /// Errors and warnings; a file with no errors converts into a [`Scenario`].
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut d = Diags(Vec::new());
        let n = self.agents.len();

        let mut ids: Vec<usize> = self.agents.iter().map(|a| a.id).collect();
        ids.sort_unstable();
        if n < 2 {
            d.error("agents", format!("at least 2 agents are required, got {n}"));
        } else if ids != (1..=n).collect::<Vec<_>>() {
            d.error("agents", format!("agent ids must be 1..{n} without gaps or repeats"));
        }
        for (k, e) in self.graph.edges.iter().enumerate() {
            if e.iter().any(|&id| id == 0 || id > n) {
                d.error(format!("graph.edges.{k}"), format!("edge {e:?} references an unknown agent"));
            } else if e[0] == e[1] {
                d.error(format!("graph.edges.{k}"), format!("self-loop on agent {}", e[0]));
            }
        }
        let graph = if d.has_errors() {
            None
        } else {
            match Digraph::from_one_based(n, &self.graph.edges) {
                Ok(g) => Some(g),
                Err(e) => {
                    d.error("graph.edges", e.to_string());
                    None
                }
            }
        };
        if let Some(g) = &graph {
            if !g.has_spanning_tree() {
                d.error(
                    "graph.edges",
                    "no directed spanning tree (Assumption 3): some agent never receives \
                     information from any common root",
                );
            }
        }

        d.check("gains", self.gains.validate());
        d.check("threshold", self.threshold.validate());
        d.check("gamma_dot_d", self.gamma_dot_d.validate());
        if !(self.sim.dt > 0.0 && self.sim.dt.is_finite()) {
            d.error("sim.dt", "step size must be positive");
        }
        if !(self.sim.t_end > 0.0 && self.sim.t_end.is_finite()) {
            d.error("sim.t_end", "horizon must be positive");
        }
        let t_f = self.trajectories.t_f;
        if !(t_f > 0.0 && t_f.is_finite()) {
            d.error("trajectories.t_f", "arrival time must be positive");
        }

        let configs = self.vehicle_configs();
        for (a, cfg) in self.agents_by_id().iter().zip(&configs) {
            let base = format!("agents.{}", a.id);
            d.check(&format!("{base}.vehicle"), cfg.validate());
            if a.control_points.len() < 2 {
                d.error(format!("{base}.control_points"), "at least 2 control points are required");
            } else if a.control_points.iter().flatten().any(|x| !x.is_finite()) {
                d.error(format!("{base}.control_points"), "control points must be finite");
            }
            if !(0.0..=t_f).contains(&a.gamma0) {
                d.error(format!("{base}.gamma0"), format!("must lie in [0, {t_f}]"));
            }
            if !a.gamma_dot0.is_finite() {
                d.error(format!("{base}.gamma_dot0"), "must be finite");
            }
            if a.initial_offset.iter().any(|x| !x.is_finite()) {
                d.error(format!("{base}.initial_offset"), "must be finite");
            }
        }

        let mut per_agent: Vec<VehicleState> = (0..n).map(|_| VehicleState::new(Vector3::zeros())).collect();
        for (k, w) in self.disturbances.iter().enumerate() {
            let path = format!("disturbances.{k}");
            if w.agent == 0 || w.agent > n {
                d.error(&path, format!("unknown agent {}", w.agent));
                continue;
            }
            if !(w.t_start <= w.t_end) || w.velocity.iter().any(|x| !x.is_finite()) {
                d.error(&path, "window must satisfy t_start <= t_end with a finite velocity");
                continue;
            }
            let slot = &mut per_agent[w.agent - 1];
            match slot.clone().inject_disturbance(w.agent, w.disturbance()) {
                Ok(v) => *slot = v,
                Err(e) => d.error(&path, e.to_string()),
            }
        }

        if let Some(xi) = &self.analysis.xi {
            if xi.len() + 1 != n || xi.iter().any(|r| r.len() + 1 != n) {
                d.error("analysis.xi", format!("must be {0}x{0}", n.saturating_sub(1)));
            }
        }
        if !(self.analysis.beta > 0.0) {
            d.error("analysis.beta", "must be positive");
        }
        if !(self.analysis.kappa2 >= 0.0) {
            d.error("analysis.kappa2", "must be nonnegative");
        }
        if !(self.analysis.coordination_eps > 0.0) {
            d.error("analysis.coordination_eps", "must be positive");
        }

        if d.has_errors() {
            return d.0;
        }
        let scn = match self.build() {
            Ok(s) => s,
            Err(e) => {
                d.error("trajectories", e.to_string());
                return d.0;
            }
        };

        let v_min = configs.iter().map(|c| c.v_min).fold(f64::INFINITY, f64::min);
        let v_max = configs.iter().map(|c| c.v_max).fold(0.0, f64::max);
        if self.gains.eta <= v_max - v_min {
            d.warn(
                "gains.eta",
                format!(
                    "eta = {} does not exceed v_max - v_min = {} (v_min taken over agents as a minimum)",
                    self.gains.eta,
                    v_max - v_min
                ),
            );
        }
        match certify(&scn) {
            Ok(cert) => {
                if self.sim.dt > cert.inter_event_bound / 10.0 {
                    d.warn(
                        "sim.dt",
                        format!(
                            "dt = {} exceeds a tenth of the inter-event lower bound {:.6e} s",
                            self.sim.dt, cert.inter_event_bound
                        ),
                    );
                }
            }
            Err(e) => d.error("analysis", e.to_string()),
        }
        if let Some((dist, s, i, j)) = scn.trajectories.min_separation(SEPARATION_SAMPLES) {
            if dist < self.analysis.safety_distance {
                d.warn(
                    "trajectories",
                    format!(
                        "virtual targets of agents {} and {} come within {dist:.3} m at gamma = {s:.3} \
                         (safety distance {} m)",
                        i + 1,
                        j + 1,
                        self.analysis.safety_distance
                    ),
                );
            }
        }
        d.0
    }

    fn build(&self) -> Result<Scenario> {
        let n = self.agents.len();
        let agents = self.agents_by_id();
        let trajectories = TrajectorySet::new(
            agents
                .iter()
                .map(|a| BezierTrajectory::from_arrays(&a.control_points, self.trajectories.t_f))
                .collect::<Result<_>>()?,
        )?;
        let xi = self
            .analysis
            .xi
            .as_ref()
            .map(|rows| DMatrix::from_row_iterator(n - 1, n - 1, rows.iter().flatten().copied()));
        Ok(Scenario {
            name: self.name.clone(),
            graph: Digraph::from_one_based(n, &self.graph.edges)?,
            trajectories,
            gains: self.gains,
            threshold: self.threshold,
            pace: self.gamma_dot_d.clone(),
            gamma0: agents.iter().map(|a| a.gamma0).collect(),
            gamma_dot0: agents.iter().map(|a| a.gamma_dot0).collect(),
            vehicles: self.vehicle_configs(),
            initial_offsets: agents.iter().map(|a| Vector3::from(a.initial_offset)).collect(),
            disturbances: self
                .disturbances
                .iter()
                .map(|w| (w.agent - 1, w.disturbance()))
                .collect(),
            dt: self.sim.dt,
            t_end: self.sim.t_end,
            analysis: AnalysisConfig {
                xi,
                beta: self.analysis.beta,
                kappa2: self.analysis.kappa2,
                safety_distance: self.analysis.safety_distance,
                coordination_eps: self.analysis.coordination_eps,
            },
        })
    }

    /// Validates and converts; warnings do not block.
    pub fn into_scenario(&self) -> Result<Scenario> {
        let errors: Vec<Diagnostic> = self
            .validate()
            .into_iter()
            .filter(|d| d.severity == Severity::Error)
            .collect();
        if !errors.is_empty() {
            return Err(Error::Validation(errors));
        }
        self.build()
    }
}

impl DisturbanceSection {
    fn disturbance(&self) -> Disturbance {
        Disturbance {
            t_start: self.t_start,
            t_end: self.t_end,
            velocity: self.velocity,
        }
    }
}

/// Loads, validates and converts a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    ScenarioFile::load(path)?.into_scenario()
}
