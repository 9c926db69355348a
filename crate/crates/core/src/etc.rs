//! Event-triggered communication.
//!
//! Every agent `j` is described to the rest of the fleet only through the data
//! of its last event: `(t_k, gamma_j(t_k), gamma_dot_j(t_k))`. Between events
//! everybody, `j` included, predicts `gamma_j` with the same estimator
//!
//! ```text
//! d2/dt2 gamma_hat = -b (d/dt gamma_hat - gamma_dot_d(t))
//! ```
//!
//! which is evaluated in closed form so the sender's self-estimate and all
//! receiver replicas agree bit for bit. The sender fires a new event as soon
//! as `|gamma_hat_j - gamma_j| > h(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::pace::PaceProfile;

/// `h(t) = c1 + c2 exp(-c3 t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdFunction {
    pub c1: f64,
    #[serde(default)]
    pub c2: f64,
    #[serde(default)]
    pub c3: f64,
}

impl ThresholdFunction {
    pub fn new(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        let thr = Self { c1, c2, c3 };
        thr.validate()?;
        Ok(thr)
    }

    pub fn constant(c1: f64) -> Result<Self> {
        Self::new(c1, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1.is_finite() && self.c1 > 0.0) {
            return Err(Error::InvalidParameter(
                "threshold floor must be positive".into(),
            ));
        }
        if !(self.c2.is_finite() && self.c2 >= 0.0) {
            return Err(Error::InvalidParameter(
                "threshold surplus c2 must be nonnegative".into(),
            ));
        }
        if !(self.c3.is_finite() && self.c3 >= 0.0) {
            return Err(Error::InvalidParameter(
                "threshold decay rate c3 must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.c1 + self.c2 * (-self.c3 * t).exp()
    }
}

/// Reset data of the last event of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorState {
    /// `gamma_j(t_k)`
    pub gamma: f64,
    /// `gamma_dot_j(t_k)`
    pub gamma_dot: f64,
    pub t_k: f64,
    /// Index of the event that produced this state.
    pub k: u64,
}

/// Closed-form solution over an interval of constant desired pace.
fn closed_form(gamma: f64, gamma_dot: f64, pace: f64, tau: f64, b: f64) -> (f64, f64) {
    let excess = gamma_dot - pace;
    let decay = (-b * tau).exp();
    let gone = -(-b * tau).exp_m1();
    (gamma + pace * tau + excess * gone / b, pace + excess * decay)
}

impl EstimatorState {
    /// `(gamma_hat(t), gamma_hat_dot(t))`, composing the closed form across
    /// every pace breakpoint in `(t_k, t]`.
    pub fn propagate(&self, pace: &PaceProfile, t: f64, b: f64) -> Result<(f64, f64)> {
        if t < self.t_k {
            return Err(Error::EstimatorBackwards { t, t_k: self.t_k });
        }
        let (mut g, mut gd, mut s) = (self.gamma, self.gamma_dot, self.t_k);
        for bt in pace.breaks_in(self.t_k, t) {
            (g, gd) = closed_form(g, gd, pace.value_at(s), bt - s, b);
            s = bt;
        }
        if t > s {
            (g, gd) = closed_form(g, gd, pace.value_at(s), t - s, b);
        }
        Ok((g, gd))
    }

    /// `e_j(t) = gamma_hat_j(t) - gamma_j(t)`. Only agent `j` knows `gamma_j`.
    pub fn estimation_error(
        &self,
        pace: &PaceProfile,
        gamma_true: f64,
        t: f64,
        b: f64,
    ) -> Result<f64> {
        Ok(self.propagate(pace, t, b)?.0 - gamma_true)
    }
}

/// `|e_j| - h(t) > 0`, strictly.
pub fn check_trigger(e: f64, t: f64, thr: &ThresholdFunction) -> bool {
    e.abs() - thr.eval(t) > 0.0
}

/// One broadcast. `agent` is the 1-based id used in external files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub agent: usize,
    pub k: u64,
    pub gamma: f64,
    pub gamma_dot: f64,
}

/// The estimator bank of a whole fleet plus the event log.
///
/// Each agent keeps its self-monitoring estimator and one replica per
/// neighbor it listens to. Delivery is instantaneous.
#[derive(Debug, Clone)]
pub struct EventNetwork {
    b: f64,
    own: Vec<Option<EstimatorState>>,
    /// `replicas[i]` holds `(j, replica of j)` for every `j` in `N_i`.
    replicas: Vec<Vec<(usize, Option<EstimatorState>)>>,
    /// `listeners[j]` lists `(i, slot in replicas[i])` for every `i` with `j` in `N_i`.
    listeners: Vec<Vec<(usize, usize)>>,
    log: Vec<EventRecord>,
}

impl EventNetwork {
    pub fn new(graph: &Digraph, b: f64) -> Self {
        let n = graph.node_count();
        let mut replicas = vec![Vec::new(); n];
        let mut listeners = vec![Vec::new(); n];
        for (i, slot) in replicas.iter_mut().enumerate() {
            for j in graph.neighborhood(i).expect("node in range") {
                listeners[j].push((i, slot.len()));
                slot.push((j, None));
            }
        }
        Self {
            b,
            own: vec![None; n],
            replicas,
            listeners,
            log: Vec::new(),
        }
    }

    pub fn agents(&self) -> usize {
        self.own.len()
    }

    pub fn gain(&self) -> f64 {
        self.b
    }

    /// Broadcast `(gamma, gamma_dot)` of agent `j` at time `t`, resetting its
    /// own estimator and every replica held by its listeners.
    pub fn fire(&mut self, j: usize, t: f64, gamma: f64, gamma_dot: f64) -> Result<EventRecord> {
        let k = match self.own[j] {
            Some(prev) if t <= prev.t_k => {
                return Err(Error::NonMonotonicEvent {
                    agent: j + 1,
                    t,
                    prev: prev.t_k,
                })
            }
            Some(prev) => prev.k + 1,
            None => 0,
        };
        let state = EstimatorState {
            gamma,
            gamma_dot,
            t_k: t,
            k,
        };
        self.own[j] = Some(state);
        for &(i, slot) in &self.listeners[j] {
            self.replicas[i][slot].1 = Some(state);
        }
        let rec = EventRecord {
            t,
            agent: j + 1,
            k,
            gamma,
            gamma_dot,
        };
        self.log.push(rec);
        Ok(rec)
    }

    pub fn own_state(&self, j: usize) -> Option<&EstimatorState> {
        self.own[j].as_ref()
    }

    /// Replica of `j` held by `i`, if `j` is in `N_i` and has fired.
    pub fn replica(&self, i: usize, j: usize) -> Option<&EstimatorState> {
        self.replicas[i]
            .iter()
            .find(|(s, _)| *s == j)
            .and_then(|(_, r)| r.as_ref())
    }

    fn uninitialized(j: usize) -> Error {
        Error::InvalidParameter(format!("agent {} has not broadcast yet", j + 1))
    }

    /// Agent `j`'s own estimation error at `t`.
    pub fn own_error(&self, j: usize, pace: &PaceProfile, gamma_true: f64, t: f64) -> Result<f64> {
        self.own[j]
            .ok_or_else(|| Self::uninitialized(j))?
            .estimation_error(pace, gamma_true, t, self.b)
    }

    /// `gamma_hat_j(t)` for every `j` in `N_i`, in neighborhood order.
    pub fn neighbor_estimates(&self, i: usize, pace: &PaceProfile, t: f64) -> Result<Vec<f64>> {
        self.replicas[i]
            .iter()
            .map(|&(j, r)| {
                r.ok_or_else(|| Self::uninitialized(j))?
                    .propagate(pace, t, self.b)
                    .map(|(g, _)| g)
            })
            .collect()
    }

    pub fn log(&self) -> &[EventRecord] {
        &self.log
    }

    pub fn into_log(self) -> Vec<EventRecord> {
        self.log
    }

    pub fn event_count(&self, j: usize) -> u64 {
        self.own[j].map_or(0, |s| s.k + 1)
    }
}
