//! Quadratic constraints anchored at single samples.
//!
//! For a sample `(x_k, f_k)` and constant `L` the matrix acts on `[x; y; 1]`:
//!
//! ```text
//!     [ -L² I      0      L² x_k              ]
//! Q = [  0         I     -f_k                 ]
//!     [ L² x_kᵀ  -f_kᵀ   -L² x_kᵀx_k + f_kᵀf_k ]
//! ```
//!
//! so that `[x; y; 1]ᵀ Q [x; y; 1] = ‖y - f_k‖² - L²‖x - x_k‖²`.

use conic_solve::SymmetricMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, LipsetError, Result};
use crate::types::{dot, SamplePair};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QcMatrix {
    n: usize,
    q: SymmetricMatrix,
}

impl QcMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &SymmetricMatrix {
        &self.q
    }
}

pub(crate) fn check_lipschitz(l: f64) -> Result<()> {
    if l > 0.0 && l.is_finite() {
        Ok(())
    } else {
        Err(LipsetError::NonPositiveLipschitz(l))
    }
}

/// Exact constraint `‖y - f_k‖² ≤ L²‖x - x_k‖²`.
pub fn build_qc_matrix(sample: &SamplePair, l: f64) -> Result<QcMatrix> {
    check_lipschitz(l)?;
    Ok(assemble(sample, l * l, 0.0))
}

/// Quadratic relaxation of the noisy slice bound
/// `‖y - f_k‖ ≤ L‖x - z_k‖ + (L + 1) w`, squared with `(a + b)² ≤ 2a² + 2b²`:
/// `‖y - f_k‖² ≤ 2L²‖x - z_k‖² + 2(L + 1)² w²`. Falls back to the exact
/// constraint when `w = 0`.
pub fn build_noisy_qc_matrix(sample: &SamplePair, l: f64, noise_radius: f64) -> Result<QcMatrix> {
    check_lipschitz(l)?;
    if !(noise_radius >= 0.0 && noise_radius.is_finite()) {
        return Err(LipsetError::InvalidInput(format!("noise radius {noise_radius}")));
    }
    if noise_radius == 0.0 {
        return Ok(assemble(sample, l * l, 0.0));
    }
    let slack = 2.0 * (l + 1.0).powi(2) * noise_radius * noise_radius;
    Ok(assemble(sample, 2.0 * l * l, slack))
}

fn assemble(sample: &SamplePair, l2: f64, slack: f64) -> QcMatrix {
    let n = sample.dim();
    let xk = sample.x.as_slice();
    let fk = sample.fx.as_slice();
    let mut q = SymmetricMatrix::zeros(2 * n + 1);
    let one = 2 * n;
    for i in 0..n {
        q.set(i, i, -l2);
        q.set(n + i, n + i, 1.0);
        q.set(i, one, l2 * xk[i]);
        q.set(n + i, one, -fk[i]);
    }
    q.set(one, one, -l2 * dot(xk, xk) + dot(fk, fk) - slack);
    QcMatrix { n, q }
}

/// `[x; y; 1]ᵀ Q [x; y; 1]`; nonpositive inside the constraint set.
pub fn qc_eval(q: &QcMatrix, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(q.n, x.len())?;
    check_dim(q.n, y.len())?;
    let v: Vec<f64> = x.iter().chain(y).copied().chain(std::iter::once(1.0)).collect();
    let m = &q.q;
    let size = v.len();
    let mut acc = 0.0;
    for i in 0..size {
        let mut row = 0.0;
        for j in 0..size {
            row += m.get(i, j) * v[j];
        }
        acc += v[i] * row;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(x: Vec<f64>, fx: Vec<f64>) -> SamplePair {
        SamplePair::new(x, fx, 0).unwrap()
    }

    #[test]
    fn origin_sample_is_diagonal() {
        let q = build_qc_matrix(&sample(vec![0.0], vec![0.0]), 1.0).unwrap();
        assert_eq!(q.matrix().as_slice(), &[-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn scalar_sample_with_l_two() {
        let q = build_qc_matrix(&sample(vec![1.0], vec![2.0]), 2.0).unwrap();
        assert_eq!(q.matrix().as_slice(), &[-4.0, 0.0, 4.0, 0.0, 1.0, -2.0, 4.0, -2.0, 0.0]);
    }

    #[test]
    fn planar_sample_blocks() {
        let q = build_qc_matrix(&sample(vec![1.0, 0.0], vec![0.0, 1.0]), 1.0).unwrap();
        let m = q.matrix();
        assert_eq!(m.get(4, 4), 0.0);
        assert_eq!((m.get(0, 4), m.get(1, 4)), (1.0, 0.0));
        assert_eq!((m.get(2, 4), m.get(3, 4)), (0.0, -1.0));
        assert!(m.is_symmetric(1e-12));
    }

    #[test]
    fn evaluation_signs() {
        let q = build_qc_matrix(&sample(vec![0.0], vec![0.0]), 1.0).unwrap();
        assert_eq!(qc_eval(&q, &[1.0], &[0.0]).unwrap(), -1.0);
        assert_eq!(qc_eval(&q, &[1.0], &[1.0]).unwrap(), 0.0);
        assert_eq!(qc_eval(&q, &[0.0], &[1.0]).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = sample(vec![0.0], vec![0.0]);
        assert!(build_qc_matrix(&s, 0.0).is_err());
        assert!(build_qc_matrix(&s, f64::NAN).is_err());
        let q = build_qc_matrix(&s, 1.0).unwrap();
        assert!(qc_eval(&q, &[0.0, 1.0], &[0.0]).is_err());
    }

    #[test]
    fn noisy_constraint_contains_noisy_slice_ball() {
        let s = sample(vec![0.0], vec![0.0]);
        let q = build_noisy_qc_matrix(&s, 1.0, 0.1).unwrap();
        // slice radius at x = 1 is 1 * (1 + 0.1) + 0.1 = 1.2
        assert!(qc_eval(&q, &[1.0], &[1.2]).unwrap() <= 0.0);
        assert_eq!(build_noisy_qc_matrix(&s, 1.0, 0.0).unwrap(), build_qc_matrix(&s, 1.0).unwrap());
    }
}
