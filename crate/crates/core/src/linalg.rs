//! Dense linear algebra helpers on top of faer.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

/// faer's SIMD kernels can return with the upper vector state dirty, after
/// which every legacy-encoded SSE instruction (all scalar float code in a
/// baseline build) pays a transition penalty of roughly 20x.
#[inline]
fn clear_upper() {
    #[cfg(target_arch = "x86_64")]
    {
        #[target_feature(enable = "avx")]
        unsafe fn zeroupper() {
            std::arch::x86_64::_mm256_zeroupper();
        }
        if std::is_x86_feature_detected!("avx") {
            // SAFETY: the feature was detected at runtime.
            unsafe { zeroupper() }
        }
    }
}

/// Sign and log-magnitude of a determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub sign: f64,
    pub log_abs: f64,
}

fn perm_sign(fwd: &[usize]) -> f64 {
    let mut seen = vec![false; fwd.len()];
    let mut sign = 1.0;
    for start in 0..fwd.len() {
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = fwd[i];
            len += 1;
        }
        if len > 0 && len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// Determinant via partially pivoted LU, kept in log form so that large
/// matrices do not overflow.
pub fn log_det(m: MatRef<'_, f64>) -> LogDet {
    let lu = m.partial_piv_lu();
    clear_upper();
    let mut sign = perm_sign(lu.P().arrays().0);
    let mut log_abs = 0.0;
    let u = lu.U();
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        if d == 0.0 {
            return LogDet { sign: 0.0, log_abs: f64::NEG_INFINITY };
        }
        if d < 0.0 {
            sign = -sign;
        }
        log_abs += d.abs().ln();
    }
    LogDet { sign, log_abs }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn mat_vec(m: MatRef<'_, f64>, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    for (j, &vj) in v.iter().enumerate().take(m.ncols()) {
        if vj == 0.0 {
            continue;
        }
        let col = m.col(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += col[i] * vj;
        }
    }
    out
}

/// Eigenpair nearest `shift` by inverse iteration. Returns the Rayleigh
/// quotient, the normalized vector and the relative residual.
pub fn inverse_iteration(
    m: MatRef<'_, f64>,
    shift: f64,
    start: Option<&[f64]>,
    iterations: usize,
) -> Result<(f64, Vec<f64>, f64)> {
    let n = m.nrows();
    let shifted = |mu: f64| {
        let mut a = m.to_owned();
        for i in 0..n {
            a[(i, i)] -= mu;
        }
        let lu = a.partial_piv_lu();
        clear_upper();
        lu
    };
    let mut lu = shifted(shift);
    if (0..n).any(|i| lu.U()[(i, i)] == 0.0) {
        // exactly singular shift: move it off the eigenvalue
        lu = shifted(shift + 1e-12 * shift.abs().max(1.0));
    }
    let mut v: Vec<f64> = match start {
        Some(s) => s.to_vec(),
        None => (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 101) as f64 / 101.0).collect(),
    };
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    for _ in 0..iterations.max(1) {
        let rhs = Mat::from_fn(n, 1, |i, _| v[i]);
        let w = lu.solve(&rhs);
        clear_upper();
        let w: Vec<f64> = (0..n).map(|i| w[(i, 0)]).collect();
        let nrm = norm(&w);
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(Error::Numerical("inverse iteration diverged".into()));
        }
        v = w.into_iter().map(|x| x / nrm).collect();
    }
    let mv = mat_vec(m, &v);
    let lambda = dot(&v, &mv);
    let resid: Vec<f64> = mv.iter().zip(&v).map(|(a, b)| a - lambda * b).collect();
    let r = norm(&resid) / lambda.abs().max(1e-300);
    Ok((lambda, v, r))
}

/// All eigenvalues of a general real matrix as `(re, im)` pairs.
pub fn eigenvalues(m: MatRef<'_, f64>) -> Result<Vec<(f64, f64)>> {
    let ev = m.eigenvalues();
    clear_upper();
    let ev = ev.map_err(|e| Error::Numerical(format!("eigenvalue solver failed: {e:?}")))?;
    Ok(ev.into_iter().map(|z| (z.re, z.im)).collect())
}

/// Eigenpairs of a symmetric matrix, eigenvalues descending; the vectors are
/// the columns of the returned matrix.
pub fn symmetric_eigen(m: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let e = m.self_adjoint_eigen(Side::Lower);
    clear_upper();
    let e = e.map_err(|e| Error::Numerical(format!("symmetric eigen solver failed: {e:?}")))?;
    let n = m.nrows();
    let s = e.S().column_vector();
    let u = e.U();
    let values = (0..n).rev().map(|i| s[i]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
    Ok((values, vectors))
}
