//! Kinematic vehicle with a proportional path-following law.
//!
//! The coordination layer only needs the path-following error to stay bounded
//! by `rho`; this first-order model is the simplest vehicle that does so.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::BezierTrajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfConfig {
    /// Tracking gain (1/s).
    pub k_p: f64,
    /// Speed limits (m/s).
    pub v_min: f64,
    pub v_max: f64,
    /// Path-following error bound (m).
    pub rho: f64,
}

impl Default for PfConfig {
    fn default() -> Self {
        Self {
            k_p: 1.0,
            v_min: 0.0,
            v_max: 25.0,
            rho: 5.0,
        }
    }
}

impl PfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_p > 0.0 && self.k_p.is_finite()) {
            return Err(Error::InvalidParameter("k_p must be positive".into()));
        }
        if !(self.v_min >= 0.0 && self.v_max > self.v_min && self.v_max.is_finite()) {
            return Err(Error::InvalidParameter(
                "speed limits must satisfy 0 <= v_min < v_max".into(),
            ));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter("rho must be positive".into()));
        }
        Ok(())
    }
}

/// Additive velocity applied on `[t_start, t_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub t_start: f64,
    pub t_end: f64,
    pub velocity: [f64; 3],
}

impl Disturbance {
    fn active(&self, t: f64) -> bool {
        self.t_start <= t && t < self.t_end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub p: Vector3<f64>,
    disturbances: Vec<Disturbance>,
}

impl VehicleState {
    pub fn new(p: Vector3<f64>) -> Self {
        Self {
            p,
            disturbances: Vec::new(),
        }
    }

    pub fn disturbances(&self) -> &[Disturbance] {
        &self.disturbances
    }

    pub fn disturbance_at(&self, t: f64) -> Vector3<f64> {
        self.disturbances
            .iter()
            .filter(|d| d.active(t))
            .map(|d| Vector3::from(d.velocity))
            .sum()
    }

    /// Adds a disturbance window; an empty window leaves the state unchanged.
    /// `agent` is only used for error reporting.
    pub fn inject_disturbance(mut self, agent: usize, d: Disturbance) -> Result<Self> {
        if !(d.t_start.is_finite() && d.t_end.is_finite() && d.t_start <= d.t_end) {
            return Err(Error::InvalidParameter(format!(
                "disturbance window [{}, {}) is not ordered",
                d.t_start, d.t_end
            )));
        }
        if d.t_start == d.t_end {
            return Ok(self);
        }
        if self
            .disturbances
            .iter()
            .any(|o| d.t_start < o.t_end && o.t_start < d.t_end)
        {
            return Err(Error::OverlappingDisturbance(agent));
        }
        self.disturbances.push(d);
        Ok(self)
    }
}

/// `e_PF = p - p_d(gamma)`.
pub fn pf_error(p: &Vector3<f64>, traj: &BezierTrajectory, gamma: f64) -> Result<Vector3<f64>> {
    Ok(p - traj.position(gamma)?)
}

/// Scales `v` so its norm lies in `[v_min, v_max]`; zero stays zero.
pub fn saturate(v: Vector3<f64>, v_min: f64, v_max: f64) -> Vector3<f64> {
    let speed = v.norm();
    if speed == 0.0 {
        return v;
    }
    let target = speed.clamp(v_min, v_max);
    if target == speed {
        v
    } else {
        v * (target / speed)
    }
}

/// Commanded velocity: virtual target feedforward, proportional correction and
/// any active disturbance, saturated in speed.
pub fn commanded_velocity(
    v: &VehicleState,
    traj: &BezierTrajectory,
    gamma: f64,
    gamma_dot: f64,
    cfg: &PfConfig,
    t: f64,
) -> Result<Vector3<f64>> {
    let e = pf_error(&v.p, traj, gamma)?;
    let raw = traj.virtual_target_velocity(gamma, gamma_dot)? - e * cfg.k_p + v.disturbance_at(t);
    Ok(saturate(raw, cfg.v_min, cfg.v_max))
}

/// Explicit Euler step of the vehicle position.
pub fn pf_step(
    v: &VehicleState,
    traj: &BezierTrajectory,
    gamma: f64,
    gamma_dot: f64,
    cfg: &PfConfig,
    t: f64,
    dt: f64,
) -> Result<VehicleState> {
    let vel = commanded_velocity(v, traj, gamma, gamma_dot, cfg, t)?;
    Ok(VehicleState {
        p: v.p + vel * dt,
        disturbances: v.disturbances.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coordination::alpha_bar;

    fn line() -> BezierTrajectory {
        BezierTrajectory::from_arrays(&[[0.0, 0.0, 0.0], [0.0, 150.0, 0.0]], 21.10).unwrap()
    }

    #[test]
    fn pf_error_examples() {
        let tr = line();
        assert_eq!(pf_error(&tr.position(4.0).unwrap(), &tr, 4.0).unwrap(), Vector3::zeros());
        assert_eq!(
            pf_error(&Vector3::new(0.0, 1.0, 0.0), &tr, 0.0).unwrap(),
            Vector3::new(0.0, 1.0, 0.0)
        );
    }

    #[test]
    fn on_target_moves_with_target() {
        let tr = line();
        let cfg = PfConfig::default();
        let v = VehicleState::new(tr.position(2.0).unwrap());
        let next = pf_step(&v, &tr, 2.0, 1.0, &cfg, 0.0, 0.01).unwrap();
        let expected = v.p + tr.velocity(2.0).unwrap() * 0.01;
        assert!((next.p - expected).norm() < 1e-14);
    }

    #[test]
    fn opposing_error_reduces_speed() {
        let tr = line();
        let cfg = PfConfig::default();
        let v = VehicleState::new(tr.position(2.0).unwrap() + Vector3::new(0.0, 2.0, 0.0));
        let vel = commanded_velocity(&v, &tr, 2.0, 1.0, &cfg, 0.0).unwrap();
        assert!((vel.y - (150.0 / 21.10 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn saturation_is_exact() {
        let v = Vector3::new(30.0, 40.0, 0.0);
        assert_eq!(saturate(v, 0.0, 25.0).norm(), 25.0);
        let slow = saturate(Vector3::new(0.0, 3.0, 4.0), 14.0, 25.0);
        assert!((slow.norm() - 14.0).abs() < 1e-14);
        assert!((slow.normalize() - Vector3::new(0.0, 0.6, 0.8)).norm() < 1e-15);
        assert_eq!(saturate(Vector3::zeros(), 14.0, 25.0), Vector3::zeros());
    }

    #[test]
    fn initial_offset_decays_monotonically() {
        // single agent on a straight line, 3 m behind its virtual target, gamma_dot = 1
        let tr = line();
        let cfg = PfConfig::default();
        let mut v = VehicleState::new(tr.position(0.0).unwrap());
        let dt = 1e-3;
        let mut gamma: f64 = 3.0 * 21.10 / 150.0;
        let mut prev = pf_error(&v.p, &tr, gamma).unwrap().norm();
        assert!((prev - 3.0).abs() < 1e-12);
        for k in 0..10_000 {
            v = pf_step(&v, &tr, gamma, 1.0, &cfg, k as f64 * dt, dt).unwrap();
            gamma = (gamma + dt).min(tr.t_f());
            let e = pf_error(&v.p, &tr, gamma).unwrap().norm();
            assert!(e <= prev + 1e-12);
            prev = e;
        }
        // exp(-k_p t) at t = 10 s
        assert!(prev < 0.1);
        assert!((prev - 3.0 * (1.0f64 - 1e-3).powi(10_000)).abs() < 1e-9);
    }

    #[test]
    fn disturbance_windows() {
        let d = Disturbance {
            t_start: 1.0,
            t_end: 2.0,
            velocity: [0.0, -3.0, 0.0],
        };
        let v = VehicleState::new(Vector3::zeros());
        let same = v.clone().inject_disturbance(1, Disturbance { t_end: 1.0, ..d }).unwrap();
        assert_eq!(same, v);
        let v = v.inject_disturbance(1, d).unwrap();
        assert_eq!(v.disturbance_at(1.5), Vector3::new(0.0, -3.0, 0.0));
        assert_eq!(v.disturbance_at(2.0), Vector3::zeros());
        let overlap = Disturbance {
            t_start: 1.5,
            t_end: 3.0,
            ..d
        };
        assert!(matches!(
            v.clone().inject_disturbance(1, overlap),
            Err(Error::OverlappingDisturbance(1))
        ));
        let after = Disturbance {
            t_start: 2.0,
            t_end: 3.0,
            ..d
        };
        assert!(v.inject_disturbance(1, after).is_ok());
    }

    #[test]
    fn offsets_along_path_give_signed_alpha() {
        let tr = line();
        let pd = tr.velocity(0.0).unwrap();
        let ahead = Vector3::new(0.0, 2.0, 0.0);
        let behind = Vector3::new(0.0, -2.0, 0.0);
        assert!(alpha_bar(&pd, &ahead, 1.5, 12.0) > 0.0);
        assert!(alpha_bar(&pd, &behind, 1.5, 12.0) < 0.0);
    }
}
