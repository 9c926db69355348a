//! Consensus algebra behind the coordination guarantees: the projection `Q`
//! onto the disagreement subspace, the reduced Laplacian `Q L Q^T`, its
//! Lyapunov certificate and the constants derived from it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LaplacianMatrix;
use crate::linalg;

/// `(n-1) x n` matrix with `Q 1 = 0` and `Q Q^T = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct QMatrix(DMatrix<f64>);

impl QMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Number of agents `n`.
    pub fn agents(&self) -> usize {
        self.0.ncols()
    }
}

/// Recursive construction
/// `Q_k = [[sqrt((k-1)/k), -1/sqrt(k(k-1)) 1^T], [0, Q_{k-1}]]`, `Q_2 = [1/sqrt2, -1/sqrt2]`.
pub fn build_q(n: usize) -> Result<QMatrix> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "Q needs at least 2 agents, got {n}"
        )));
    }
    let mut q = DMatrix::from_row_slice(1, 2, &[1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt()]);
    for k in 3..=n {
        let kf = k as f64;
        let mut next = DMatrix::zeros(k - 1, k);
        next[(0, 0)] = ((kf - 1.0) / kf).sqrt();
        let off = -1.0 / (kf * (kf - 1.0)).sqrt();
        for j in 1..k {
            next[(0, j)] = off;
        }
        next.view_mut((1, 1), (k - 2, k - 1)).copy_from(&q);
        q = next;
    }
    Ok(QMatrix(q))
}

/// `L_bar = Q L Q^T`.
pub fn reduced_laplacian(l: &LaplacianMatrix, q: &QMatrix) -> Result<DMatrix<f64>> {
    if l.dim() != q.agents() {
        return Err(Error::DimensionMismatch(format!(
            "Laplacian is {0}x{0} but Q has {1} columns",
            l.dim(),
            q.agents()
        )));
    }
    Ok(q.matrix() * l.matrix() * q.matrix().transpose())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSet {
    /// Coordination gain.
    pub a: f64,
    /// Damping gain.
    pub b: f64,
    /// Path-following coupling gain.
    pub k_pf: f64,
    /// Regularizer in the coupling denominator.
    pub eta: f64,
}

impl GainSet {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("k_pf", self.k_pf), ("eta", self.eta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "gain {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Solution `Psi` of `L_bar^T Psi + Psi L_bar = Xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovCertificate {
    pub xi: DMatrix<f64>,
    pub psi: DMatrix<f64>,
    /// Frobenius norm of `-L_bar^T Psi - Psi L_bar + Xi`.
    pub residual_norm: f64,
    pub psi_min: f64,
    pub psi_max: f64,
    pub xi_min: f64,
}

/// Solves the Lyapunov equation through the Kronecker form
/// `(I (x) L_bar^T + L_bar^T (x) I) vec(Psi) = vec(Xi)`.
pub fn solve_lyapunov(lbar: &DMatrix<f64>, xi: &DMatrix<f64>) -> Result<LyapunovCertificate> {
    let m = lbar.nrows();
    if !lbar.is_square() || xi.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "L_bar is {}x{}, Xi is {}x{}",
            lbar.nrows(),
            lbar.ncols(),
            xi.nrows(),
            xi.ncols()
        )));
    }
    if !linalg::is_symmetric(xi, 1e-12 * xi.amax().max(1.0)) {
        return Err(Error::NotPositiveDefinite("Xi"));
    }
    let (xi_min, _) = linalg::symmetric_extremes(xi);
    if xi_min <= 0.0 {
        return Err(Error::NotPositiveDefinite("Xi"));
    }

    let eig = linalg::spectrum(lbar)?;
    let min_re = eig.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if min_re <= 1e-9 * lbar.norm().max(1.0) {
        return Err(Error::NotHurwitz { min_re });
    }

    let lt = lbar.transpose();
    let eye = DMatrix::<f64>::identity(m, m);
    let k = eye.kronecker(&lt) + lt.kronecker(&eye);
    let rhs = DVector::from_column_slice(xi.as_slice());
    let sol = k.lu().solve(&rhs).ok_or(Error::Singular)?;
    let psi = DMatrix::from_column_slice(m, m, sol.as_slice());
    let psi = (&psi + psi.transpose()) * 0.5;

    let residual = -(&lt * &psi) - &psi * lbar + xi;
    let residual_norm = residual.norm();
    let (psi_min, psi_max) = linalg::symmetric_extremes(&psi);
    if psi_min <= 0.0 {
        return Err(Error::NotPositiveDefinite("Psi"));
    }
    Ok(LyapunovCertificate {
        xi: xi.clone(),
        psi,
        residual_norm,
        psi_min,
        psi_max,
        xi_min,
    })
}

/// `lambda_TC = (a/b) lambda_min(Xi) / (3 lambda_max(Psi))`.
pub fn convergence_rate(gains: &GainSet, cert: &LyapunovCertificate) -> f64 {
    gains.a / gains.b * cert.xi_min / (3.0 * cert.psi_max)
}

/// `[[b I_{n-1}, Q], [0, I_n]]`, the map from `xi_TC` to `(chi, xi_2)`.
pub fn state_transform(b: f64, q: &QMatrix) -> DMatrix<f64> {
    let n = q.agents();
    let dim = 2 * n - 1;
    let mut s = DMatrix::zeros(dim, dim);
    s.view_mut((0, 0), (n - 1, n - 1))
        .copy_from(&(DMatrix::<f64>::identity(n - 1, n - 1) * b));
    s.view_mut((0, n - 1), (n - 1, n)).copy_from(q.matrix());
    s.view_mut((n - 1, n - 1), (n, n))
        .copy_from(&DMatrix::<f64>::identity(n, n));
    s
}

/// `kappa_1 = ||S^-1|| sqrt(max(c2, beta/2) / min(c1, beta/2)) ||S||` with
/// `c1 = lambda_min(Psi)` and `c2 = lambda_max(Psi)`.
pub fn kappa1(b: f64, beta: f64, cert: &LyapunovCertificate, n: usize) -> Result<f64> {
    if !(beta > 0.0) || !(b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa1 needs b > 0 and beta > 0, got b = {b}, beta = {beta}"
        )));
    }
    if cert.psi.nrows() + 1 != n {
        return Err(Error::DimensionMismatch(format!(
            "certificate is for {} agents, asked for {n}",
            cert.psi.nrows() + 1
        )));
    }
    let s = state_transform(b, &build_q(n)?);
    let norm_s = linalg::spectral_norm(&s);
    let norm_s_inv = 1.0 / linalg::min_singular_value(&s);
    let ratio = cert.psi_max.max(beta / 2.0) / cert.psi_min.min(beta / 2.0);
    Ok(norm_s_inv * ratio.sqrt() * norm_s)
}

/// Inputs to the bound on the estimation-error driving term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UBarInputs {
    pub a: f64,
    pub k_pf: f64,
    pub n: usize,
    pub kappa1: f64,
    /// Stand-in for `kappa_2`, whose definition is not computable; 0 by default.
    pub kappa2: f64,
    /// `||xi_TC(0)||`.
    pub xi0_norm: f64,
    /// Threshold floor `c1`.
    pub c1: f64,
    /// Threshold surplus `c2`.
    pub c2: f64,
    /// Path-following error bound `rho`.
    pub rho: f64,
    /// Bound on `|d/dt gamma_dot_d|`.
    pub gamma_ddot_d_max: f64,
}

/// `u_bar = a n kappa1 ||xi0|| + a n kappa2 (a n sqrt(n)(c1+c2) + k_PF rho + gdd_max)
///          + a n sqrt(n)(c1+c2) + k_PF rho`.
pub fn u_bar(p: &UBarInputs) -> f64 {
    let n = p.n as f64;
    let an = p.a * n;
    let thr = an * n.sqrt() * (p.c1 + p.c2);
    let pf = p.k_pf * p.rho;
    an * p.kappa1 * p.xi0_norm + an * p.kappa2 * (thr + pf + p.gamma_ddot_d_max) + thr + pf
}

/// Spectral norm of the estimation-error system matrix `[[0, 1], [0, -b]]`.
pub fn error_system_norm(b: f64) -> f64 {
    (1.0 + b * b).sqrt()
}

/// Lower bound `(1/||A||) ln(1 + c1 ||A|| / (||B|| u_bar))` on the time between
/// two events of the same agent; `||B|| = 1`.
pub fn min_inter_event_interval(b: f64, c1: f64, u_bar: f64) -> f64 {
    let a_norm = error_system_norm(b);
    (c1 * a_norm / u_bar).ln_1p() / a_norm
}
