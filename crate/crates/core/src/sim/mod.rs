//! Fixed-step simulation of the closed loop.
//!
//! Each step at `t = k dt` runs, in order:
//!
//! 1. propagate every estimator and replica to `t`,
//! 2. let each agent compare its own estimation error with `h(t)` and fire
//!    (ascending agent index; at `t = 0` every agent broadcasts once),
//! 3. compute the coupling term and the coordination acceleration from the
//!    post-event snapshot,
//! 4. commit the coordination states (semi-implicit Euler, clamped),
//! 5. step the vehicles from the snapshot taken at `t`.
//!
//! All agent updates read the snapshot and are committed together, so the
//! order of per-agent computation never matters.

pub mod analysis;

use nalgebra::{DMatrix, Vector3};

use crate::algebra::{build_q, GainSet};
use crate::coordination::{
    alpha_bar, coordination_accel, coordination_error, step_coordination, CoordinationState,
};
use crate::error::{Error, Result};
use crate::etc::{check_trigger, EventNetwork, EventRecord, ThresholdFunction};
use crate::graph::Digraph;
use crate::pace::PaceProfile;
use crate::trajectory::TrajectorySet;
use crate::vehicle::{pf_error, pf_step, Disturbance, PfConfig, VehicleState};

pub use analysis::{
    certify, coordination_achieved_time, fit_decay_rate, iss_envelope_check, summarize,
    zeno_report, Certificate, FloorPolicy, IssReport, Summary, ZenoReport,
};

/// Knobs for the analytic evaluations; none of them affect the dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    /// Lyapunov weight `Xi`; identity when `None`.
    pub xi: Option<DMatrix<f64>>,
    pub beta: f64,
    /// Policy value standing in for `kappa_2`.
    pub kappa2: f64,
    pub safety_distance: f64,
    pub coordination_eps: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            xi: None,
            beta: 1.0,
            kappa2: 0.0,
            safety_distance: 10.0,
            coordination_eps: 0.1,
        }
    }
}

/// A validated, ready-to-run scenario. Agent indices are 0-based.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub graph: Digraph,
    pub trajectories: TrajectorySet,
    pub gains: GainSet,
    pub threshold: ThresholdFunction,
    pub pace: PaceProfile,
    pub gamma0: Vec<f64>,
    pub gamma_dot0: Vec<f64>,
    pub vehicles: Vec<PfConfig>,
    /// Offset of each vehicle from its initial virtual target.
    pub initial_offsets: Vec<Vector3<f64>>,
    pub disturbances: Vec<(usize, Disturbance)>,
    pub dt: f64,
    pub t_end: f64,
    pub analysis: AnalysisConfig,
}

impl Scenario {
    pub fn agents(&self) -> usize {
        self.graph.node_count()
    }

    /// Number of steps after `t = 0`, `floor(t_end / dt)`.
    pub fn step_count(&self) -> usize {
        // guard against 21.1 / 1e-3 = 21099.999...
        let ratio = self.t_end / self.dt;
        let r = ratio.round();
        if (ratio - r).abs() <= 1e-9 * r.max(1.0) {
            r as usize
        } else {
            ratio.floor() as usize
        }
    }

    /// Checks the structural invariants the engine relies on.
    pub fn check(&self) -> Result<()> {
        let n = self.agents();
        for (what, len) in [
            ("trajectories", self.trajectories.len()),
            ("gamma0", self.gamma0.len()),
            ("gamma_dot0", self.gamma_dot0.len()),
            ("vehicles", self.vehicles.len()),
            ("initial_offsets", self.initial_offsets.len()),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch(format!(
                    "{what} has {len} entries for {n} agents"
                )));
            }
        }
        if !self.graph.has_spanning_tree() {
            return Err(Error::InvalidParameter(
                "no directed spanning tree (Assumption 3)".into(),
            ));
        }
        self.gains.validate()?;
        self.threshold.validate()?;
        self.pace.validate()?;
        for v in &self.vehicles {
            v.validate()?;
        }
        if !(self.dt > 0.0 && self.dt.is_finite() && self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter("dt and t_end must be positive".into()));
        }
        let t_f = self.trajectories.t_f();
        for &g in &self.gamma0 {
            if !(0.0..=t_f).contains(&g) {
                return Err(Error::OutsideDomain { s: g, t_f });
            }
        }
        Ok(())
    }

    pub fn initial_positions(&self) -> Result<Vec<Vector3<f64>>> {
        (0..self.agents())
            .map(|i| Ok(self.trajectories.get(i).position(self.gamma0[i])? + self.initial_offsets[i]))
            .collect()
    }
}

/// Per-step samples stored column-wise; per-agent quantities are flattened
/// row-major (`step * n + agent`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    pub agents: usize,
    pub t: Vec<f64>,
    pub gamma: Vec<f64>,
    pub gamma_dot: Vec<f64>,
    pub alpha: Vec<f64>,
    pub accel: Vec<f64>,
    pub position: Vec<[f64; 3]>,
    pub e_pf_norm: Vec<f64>,
    pub xi_norm: Vec<f64>,
    /// `max_{i<j} |gamma_i - gamma_j|`
    pub max_gamma_spread: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn at(&self, step: usize, agent: usize) -> usize {
        step * self.agents + agent
    }

    pub fn gamma_row(&self, step: usize) -> &[f64] {
        &self.gamma[step * self.agents..(step + 1) * self.agents]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub series: TimeSeries,
    pub events: Vec<EventRecord>,
    /// Interpolated arrival time per agent.
    pub arrivals: Vec<Option<f64>>,
    pub dt: f64,
}

impl RunResult {
    pub fn event_times(&self, agent: usize) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.agent == agent + 1)
            .map(|e| e.t)
            .collect()
    }

    pub fn max_e_pf(&self, agent: usize) -> f64 {
        (0..self.series.len())
            .map(|k| self.series.e_pf_norm[self.series.at(k, agent)])
            .fold(0.0, f64::max)
    }
}

/// A run that stopped early; `partial` holds everything up to the failure.
#[derive(Debug)]
pub struct RunAborted {
    pub partial: RunResult,
    pub cause: Error,
}

impl std::fmt::Display for RunAborted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run aborted: {}", self.cause)
    }
}

impl std::error::Error for RunAborted {}

struct Engine<'a> {
    scn: &'a Scenario,
    coord: Vec<CoordinationState>,
    vehicles: Vec<VehicleState>,
    net: EventNetwork,
    out: RunResult,
}

pub fn run(scn: &Scenario) -> std::result::Result<RunResult, Box<RunAborted>> {
    let empty = RunResult {
        series: TimeSeries {
            agents: scn.agents(),
            ..TimeSeries::default()
        },
        events: Vec::new(),
        arrivals: vec![None; scn.agents()],
        dt: scn.dt,
    };
    let mut engine = match Engine::new(scn, empty.clone()) {
        Ok(e) => e,
        Err(cause) => {
            return Err(Box::new(RunAborted {
                partial: empty,
                cause,
            }))
        }
    };
    match engine.run() {
        Ok(()) => Ok(engine.finish()),
        Err(cause) => Err(Box::new(RunAborted {
            partial: engine.finish(),
            cause,
        })),
    }
}

impl<'a> Engine<'a> {
    fn new(scn: &'a Scenario, out: RunResult) -> Result<Self> {
        scn.check()?;
        let n = scn.agents();
        let coord = (0..n)
            .map(|i| CoordinationState::new(scn.gamma0[i], scn.gamma_dot0[i]))
            .collect();
        let mut vehicles: Vec<VehicleState> = scn
            .initial_positions()?
            .into_iter()
            .map(VehicleState::new)
            .collect();
        for &(agent, d) in &scn.disturbances {
            let slot = vehicles
                .get_mut(agent)
                .ok_or(Error::NodeOutOfRange { index: agent, n })?;
            *slot = slot.clone().inject_disturbance(agent + 1, d)?;
        }
        Ok(Self {
            scn,
            coord,
            vehicles,
            net: EventNetwork::new(&scn.graph, scn.gains.b),
            out,
        })
    }

    fn finish(self) -> RunResult {
        let mut out = self.out;
        out.events = self.net.into_log();
        out
    }

    fn run(&mut self) -> Result<()> {
        let scn = self.scn;
        let n = scn.agents();
        let q = build_q(n)?;
        let t_f = scn.trajectories.t_f();
        let steps = scn.step_count();
        let mut alpha = vec![0.0; n];
        let mut accel = vec![0.0; n];
        let mut e_pf = vec![0.0; n];

        for k in 0..=steps {
            let t = k as f64 * scn.dt;

            // events
            for j in 0..n {
                let c = self.coord[j];
                if k == 0 {
                    self.net.fire(j, t, c.gamma, c.gamma_dot)?;
                    continue;
                }
                let e = self.net.own_error(j, &scn.pace, c.gamma, t)?;
                if check_trigger(e, t, &scn.threshold) {
                    self.net.fire(j, t, c.gamma, c.gamma_dot)?;
                }
            }

            // control from the post-event snapshot
            let pace_now = scn.pace.value_at(t);
            for i in 0..n {
                let c = self.coord[i];
                let traj = scn.trajectories.get(i);
                let err = pf_error(&self.vehicles[i].p, traj, c.gamma)?;
                e_pf[i] = err.norm();
                let target_vel = traj.virtual_target_velocity(c.gamma, c.gamma_dot)?;
                alpha[i] = alpha_bar(&target_vel, &err, scn.gains.k_pf, scn.gains.eta);
                accel[i] = if c.done {
                    0.0
                } else {
                    let est = self.net.neighbor_estimates(i, &scn.pace, t)?;
                    coordination_accel(c.gamma, c.gamma_dot, &est, pace_now, &scn.gains, alpha[i])
                };
                if !(accel[i].is_finite() && alpha[i].is_finite() && e_pf[i].is_finite()) {
                    return Err(Error::NonFinite { agent: i + 1, t });
                }
            }
            self.record(t, &q, pace_now, &alpha, &accel, &e_pf)?;

            for (i, &norm) in e_pf.iter().enumerate() {
                let rho = scn.vehicles[i].rho;
                if norm > rho {
                    return Err(Error::ContractViolation {
                        agent: i + 1,
                        t,
                        norm,
                        rho,
                    });
                }
            }

            if k == steps || self.coord.iter().all(|c| c.done) {
                break;
            }

            // commit
            let snapshot = self.coord.clone();
            for i in 0..n {
                let outcome = step_coordination(snapshot[i], accel[i], scn.dt, t_f)?;
                if let Some(frac) = outcome.arrival_fraction {
                    self.out.arrivals[i] = Some(t + frac * scn.dt);
                }
                self.coord[i] = outcome.state;
            }
            for (i, &c) in snapshot.iter().enumerate() {
                // an arrived virtual target no longer moves
                let rate = if c.done { 0.0 } else { c.gamma_dot };
                let next = pf_step(
                    &self.vehicles[i],
                    scn.trajectories.get(i),
                    c.gamma,
                    rate,
                    &scn.vehicles[i],
                    t,
                    scn.dt,
                )?;
                if next.p.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite { agent: i + 1, t });
                }
                self.vehicles[i] = next;
            }
        }
        Ok(())
    }

    fn record(
        &mut self,
        t: f64,
        q: &crate::algebra::QMatrix,
        pace_now: f64,
        alpha: &[f64],
        accel: &[f64],
        e_pf: &[f64],
    ) -> Result<()> {
        let s = &mut self.out.series;
        let gamma: Vec<f64> = self.coord.iter().map(|c| c.gamma).collect();
        let gamma_dot: Vec<f64> = self.coord.iter().map(|c| c.gamma_dot).collect();
        let xi = coordination_error(q, &gamma, &gamma_dot, pace_now)?;
        let hi = gamma.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = gamma.iter().copied().fold(f64::INFINITY, f64::min);
        s.t.push(t);
        s.gamma.extend_from_slice(&gamma);
        s.gamma_dot.extend_from_slice(&gamma_dot);
        s.alpha.extend_from_slice(alpha);
        s.accel.extend_from_slice(accel);
        s.position
            .extend(self.vehicles.iter().map(|v| [v.p.x, v.p.y, v.p.z]));
        s.e_pf_norm.extend_from_slice(e_pf);
        s.xi_norm.push(xi.norm);
        s.max_gamma_spread.push(hi - lo);
        Ok(())
    }
}
