//! Desired trajectories as Bezier curves over virtual time `[0, t_f]`.

use nalgebra::Vector3;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BezierTrajectory {
    control_points: Vec<Vector3<f64>>,
    t_f: f64,
}

fn de_casteljau(points: &[Vector3<f64>], u: f64) -> Vector3<f64> {
    let mut work = points.to_vec();
    let len = work.len();
    for level in 1..len {
        for k in 0..len - level {
            work[k] = work[k] * (1.0 - u) + work[k + 1] * u;
        }
    }
    work[0]
}

impl BezierTrajectory {
    pub fn new(control_points: Vec<Vector3<f64>>, t_f: f64) -> Result<Self> {
        if control_points.len() < 2 {
            return Err(Error::InvalidParameter(
                "a trajectory needs at least 2 control points".into(),
            ));
        }
        if !(t_f.is_finite() && t_f > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t_f must be positive, got {t_f}"
            )));
        }
        if control_points.iter().any(|p| p.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidParameter(
                "control points must be finite".into(),
            ));
        }
        Ok(Self { control_points, t_f })
    }

    pub fn from_arrays(points: &[[f64; 3]], t_f: f64) -> Result<Self> {
        Self::new(points.iter().map(|p| Vector3::from(*p)).collect(), t_f)
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    pub fn degree(&self) -> usize {
        self.control_points.len() - 1
    }

    pub fn control_points(&self) -> &[Vector3<f64>] {
        &self.control_points
    }

    fn check(&self, s: f64) -> Result<f64> {
        if !(0.0..=self.t_f).contains(&s) {
            return Err(Error::OutsideDomain { s, t_f: self.t_f });
        }
        Ok(s / self.t_f)
    }

    /// Desired position at virtual time `s`.
    pub fn position(&self, s: f64) -> Result<Vector3<f64>> {
        let u = self.check(s)?;
        // exact endpoints regardless of rounding inside the recursion
        if s == 0.0 {
            return Ok(self.control_points[0]);
        }
        if s == self.t_f {
            return Ok(*self.control_points.last().unwrap());
        }
        Ok(de_casteljau(&self.control_points, u))
    }

    /// Derivative with respect to virtual time (m per unit virtual time).
    pub fn velocity(&self, s: f64) -> Result<Vector3<f64>> {
        let u = self.check(s)?;
        let d = self.degree() as f64;
        let hodograph: Vec<Vector3<f64>> = self
            .control_points
            .windows(2)
            .map(|w| (w[1] - w[0]) * d)
            .collect();
        Ok(de_casteljau(&hodograph, u) / self.t_f)
    }

    /// `dp/dgamma * gamma_dot`, in m/s.
    pub fn virtual_target_velocity(&self, gamma: f64, gamma_dot: f64) -> Result<Vector3<f64>> {
        Ok(self.velocity(gamma)? * gamma_dot)
    }
}

/// One trajectory per agent, all sharing the arrival time `t_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    trajectories: Vec<BezierTrajectory>,
    t_f: f64,
}

impl TrajectorySet {
    pub fn new(trajectories: Vec<BezierTrajectory>) -> Result<Self> {
        let t_f = trajectories
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty trajectory set".into()))?
            .t_f;
        if trajectories.iter().any(|tr| tr.t_f != t_f) {
            return Err(Error::InvalidParameter(
                "all trajectories must share the same t_f".into(),
            ));
        }
        Ok(Self { trajectories, t_f })
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn get(&self, i: usize) -> &BezierTrajectory {
        &self.trajectories[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &BezierTrajectory> {
        self.trajectories.iter()
    }

    /// Smallest pairwise distance between desired positions sampled at
    /// matching virtual times, as `(distance, s, i, j)`.
    pub fn min_separation(&self, samples: usize) -> Option<(f64, f64, usize, usize)> {
        let samples = samples.max(2);
        let mut best: Option<(f64, f64, usize, usize)> = None;
        for k in 0..samples {
            let s = self.t_f * k as f64 / (samples - 1) as f64;
            let pts: Vec<_> = self
                .trajectories
                .iter()
                .map(|tr| tr.position(s).expect("sample inside domain"))
                .collect();
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    let d = (pts[i] - pts[j]).norm();
                    if best.is_none_or(|b| d < b.0) {
                        best = Some((d, s, i, j));
                    }
                }
            }
        }
        best
    }

    /// Minimum and maximum of `||dp/dgamma||` over each trajectory.
    pub fn speed_range(&self, samples: usize) -> (f64, f64) {
        let samples = samples.max(2);
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for tr in &self.trajectories {
            for k in 0..samples {
                let s = self.t_f * k as f64 / (samples - 1) as f64;
                let v = tr.velocity(s).expect("sample inside domain").norm();
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> BezierTrajectory {
        BezierTrajectory::from_arrays(&[[0.0, 0.0, 0.0], [0.0, 150.0, 0.0]], 21.10).unwrap()
    }

    #[test]
    fn endpoints_and_midpoint() {
        let tr = BezierTrajectory::from_arrays(
            &[[0.1, 0.2, 0.3], [5.0, 7.0, 1.0], [9.7, 3.3, 2.2]],
            21.10,
        )
        .unwrap();
        assert_eq!(tr.position(0.0).unwrap(), Vector3::new(0.1, 0.2, 0.3));
        assert_eq!(tr.position(21.10).unwrap(), Vector3::new(9.7, 3.3, 2.2));
        let mid = line().position(21.10 / 2.0).unwrap();
        assert!((mid - Vector3::new(0.0, 75.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn straight_line_velocity() {
        let v = line().velocity(3.0).unwrap();
        assert!((v - Vector3::new(0.0, 150.0 / 21.10, 0.0)).norm() < 1e-12);
        assert!((v.y - 7.109).abs() < 1e-3);
        let vt = line().virtual_target_velocity(3.0, 1.4).unwrap();
        assert!((vt - v * 1.4).norm() < 1e-12);
        assert_eq!(line().virtual_target_velocity(3.0, 0.0).unwrap(), Vector3::zeros());
    }

    #[test]
    fn quadratic_start_velocity_matches_finite_difference() {
        let tr = BezierTrajectory::from_arrays(
            &[[0.0, 0.0, 0.0], [4.0, 10.0, -2.0], [8.0, 0.0, 6.0]],
            10.0,
        )
        .unwrap();
        let v0 = tr.velocity(0.0).unwrap();
        // (d / t_f) (P1 - P0) with d = 2
        assert!((v0 - Vector3::new(4.0, 10.0, -2.0) * 0.2).norm() < 1e-14);
        let h = 1e-6;
        let fd = (tr.position(h).unwrap() - tr.position(0.0).unwrap()) / h;
        assert!((fd - v0).norm() < 1e-4);
    }

    #[test]
    fn degenerate_curve_has_zero_velocity() {
        let tr = BezierTrajectory::from_arrays(&[[1.0, 2.0, 3.0]; 4], 5.0).unwrap();
        assert_eq!(tr.velocity(2.5).unwrap(), Vector3::zeros());
    }

    #[test]
    fn domain_violations() {
        assert!(matches!(line().position(-1e-9), Err(Error::OutsideDomain { .. })));
        assert!(matches!(line().velocity(21.2), Err(Error::OutsideDomain { .. })));
        assert!(BezierTrajectory::from_arrays(&[[0.0; 3]], 1.0).is_err());
        assert!(BezierTrajectory::from_arrays(&[[0.0; 3]; 2], 0.0).is_err());
    }

    #[test]
    fn set_requires_common_arrival() {
        let other = BezierTrajectory::from_arrays(&[[0.0; 3], [1.0; 3]], 20.0).unwrap();
        assert!(TrajectorySet::new(vec![line(), other]).is_err());
        let set = TrajectorySet::new(vec![line(), line()]).unwrap();
        assert_eq!(set.min_separation(10).unwrap().0, 0.0);
    }
}
