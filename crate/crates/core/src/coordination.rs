//! Per-agent coordination controller
//!
//! ```text
//! gamma_ddot_i = -b (gamma_dot_i - gamma_dot_d) - a sum_{j in N_i} (gamma_i - gamma_hat_j) + alpha_bar_i
//! ```

use nalgebra::{DVector, Vector3};

use crate::algebra::{GainSet, QMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinationState {
    pub gamma: f64,
    pub gamma_dot: f64,
    /// Set once `gamma` reaches `t_f`; the state is frozen afterwards.
    pub done: bool,
}

impl CoordinationState {
    pub fn new(gamma: f64, gamma_dot: f64) -> Self {
        Self {
            gamma,
            gamma_dot,
            done: false,
        }
    }
}

/// Coupling that moves the virtual target toward the vehicle:
/// `k_PF (p_d_dot . e_PF) / (||p_d_dot|| + eta)`.
pub fn alpha_bar(p_d_dot: &Vector3<f64>, e_pf: &Vector3<f64>, k_pf: f64, eta: f64) -> f64 {
    k_pf * p_d_dot.dot(e_pf) / (p_d_dot.norm() + eta)
}

pub fn coordination_accel(
    gamma: f64,
    gamma_dot: f64,
    neighbor_estimates: &[f64],
    gamma_dot_d: f64,
    gains: &GainSet,
    alpha: f64,
) -> f64 {
    let disagreement: f64 = neighbor_estimates.iter().map(|g| gamma - g).sum();
    -gains.b * (gamma_dot - gamma_dot_d) - gains.a * disagreement + alpha
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: CoordinationState,
    /// Fraction of the step at which `gamma` crossed `t_f`, when it arrived
    /// during this step.
    pub arrival_fraction: Option<f64>,
}

/// Semi-implicit Euler step followed by clamping to `[0, t_f]`.
pub fn step_coordination(
    state: CoordinationState,
    accel: f64,
    dt: f64,
    t_f: f64,
) -> Result<StepOutcome> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if state.done {
        return Ok(StepOutcome {
            state,
            arrival_fraction: None,
        });
    }
    if !accel.is_finite() {
        return Err(Error::InvalidParameter(
            "non-finite coordination acceleration".into(),
        ));
    }
    let gamma_dot = state.gamma_dot + dt * accel;
    let raw = state.gamma + dt * gamma_dot;
    if raw >= t_f {
        let fraction = if raw > state.gamma {
            ((t_f - state.gamma) / (raw - state.gamma)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        return Ok(StepOutcome {
            state: CoordinationState {
                gamma: t_f,
                gamma_dot,
                done: true,
            },
            arrival_fraction: Some(fraction),
        });
    }
    Ok(StepOutcome {
        state: CoordinationState {
            gamma: raw.max(0.0),
            gamma_dot,
            done: false,
        },
        arrival_fraction: None,
    })
}

/// `xi_TC = (Q gamma, gamma_dot - gamma_dot_d 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinationErrorState {
    pub xi1: DVector<f64>,
    pub xi2: DVector<f64>,
    pub norm: f64,
}

pub fn coordination_error(
    q: &QMatrix,
    gamma: &[f64],
    gamma_dot: &[f64],
    gamma_dot_d: f64,
) -> Result<CoordinationErrorState> {
    let n = q.agents();
    if gamma.len() != n || gamma_dot.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "Q is built for {n} agents, got {} positions and {} rates",
            gamma.len(),
            gamma_dot.len()
        )));
    }
    let xi1 = q.matrix() * DVector::from_column_slice(gamma);
    let xi2 = DVector::from_iterator(n, gamma_dot.iter().map(|v| v - gamma_dot_d));
    let norm = (xi1.norm_squared() + xi2.norm_squared()).sqrt();
    Ok(CoordinationErrorState { xi1, xi2, norm })
}
