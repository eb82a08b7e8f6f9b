//! Cyclic Jacobi eigenvalue iteration for small symmetric matrices.
//!
//! Kept separate from the solver path (which factors through nalgebra) so
//! that verification never shares numerical code with the solve.

use crate::matrix::SymmetricMatrix;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix, ascending.
pub fn eigenvalues(m: &SymmetricMatrix) -> Vec<f64> {
    let n = m.size();
    let mut a: Vec<f64> = m.as_slice().to_vec();
    let scale = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0 {
        return Vec::new();
    }
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

pub fn min_eigenvalue(m: &SymmetricMatrix) -> f64 {
    eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}
