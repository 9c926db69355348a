//! Small dense linear algebra: eigenvalues, norms, symmetric extremes.
//!
//! Everything here targets matrices of at most [`MAX_DENSE`] rows.

use nalgebra::{Complex, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub const MAX_DENSE: usize = 64;

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 10_000;
/// Effective relative perturbation assumed for the Schur decomposition when
/// deciding whether nearby computed eigenvalues belong to one defective cluster.
const CLUSTER_REL_EPS: f64 = 1e-13;

fn check_dense(m: &DMatrix<f64>) -> Result<usize> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if n > MAX_DENSE {
        return Err(Error::MatrixTooLarge(n));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteMatrix);
    }
    Ok(n)
}

/// All eigenvalues of `m` with algebraic multiplicity, sorted by real part and
/// then imaginary part.
///
/// Directed Laplacians are frequently defective, and a Jordan block of size
/// `k` scatters its computed eigenvalues over a circle of radius about
/// `eps^(1/k)`. Such clusters are detected with a size-dependent radius and
/// replaced by their mean, which is accurate to
/// roughly machine precision because it equals the trace of the restriction to
/// the invariant subspace.
pub fn spectrum(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = check_dense(m)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or(Error::EigenNonConvergence)?;
    let raw: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    if raw.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::EigenNonConvergence);
    }
    let scale = m.norm().max(1.0);
    let mut eig = merge_clusters(&raw, scale);
    eig.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(eig)
}

/// Greedy ball clustering: starting from the first unassigned eigenvalue, take
/// the largest `k` whose `k` nearest unassigned eigenvalues all lie within
/// `radius(k)` of their mean. Pairwise linkage is not enough here because the
/// points of a split Jordan block of size 3 or more are farther apart than
/// the radius allowed for a pair.
fn merge_clusters(raw: &[Complex<f64>], scale: f64) -> Vec<Complex<f64>> {
    let radius = |k: usize| scale * CLUSTER_REL_EPS.powf(1.0 / k as f64);
    let mut left: Vec<Complex<f64>> = raw.to_vec();
    let mut out = Vec::with_capacity(raw.len());
    while let Some(&seed) = left.first() {
        let mut order: Vec<usize> = (0..left.len()).collect();
        order.sort_by(|&a, &b| (left[a] - seed).norm().total_cmp(&(left[b] - seed).norm()));
        let mut best = (1, seed);
        for k in 2..=order.len() {
            let mean = order[..k].iter().map(|&i| left[i]).sum::<Complex<f64>>() / k as f64;
            if order[..k].iter().all(|&i| (left[i] - mean).norm() <= radius(k)) {
                best = (k, mean);
            }
        }
        out.extend(std::iter::repeat_n(best.1, best.0));
        let mut taken = order[..best.0].to_vec();
        taken.sort_unstable_by(|a, b| b.cmp(a));
        for i in taken {
            left.remove(i);
        }
    }
    out
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Smallest singular value.
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    m.singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `(lambda_min, lambda_max)` of a symmetric matrix.
pub fn symmetric_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= tol
}

/// Greedy nearest-pair matching of two eigenvalue multisets. Returns the
/// largest matched distance, or `None` when the sizes differ.
pub fn match_multisets(a: &[Complex<f64>], b: &[Complex<f64>]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let mut pool: Vec<Complex<f64>> = b.to_vec();
    let mut worst: f64 = 0.0;
    for x in a {
        let (idx, d) = pool
            .iter()
            .enumerate()
            .map(|(i, y)| (i, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))?;
        worst = worst.max(d);
        pool.swap_remove(idx);
    }
    Some(worst)
}
