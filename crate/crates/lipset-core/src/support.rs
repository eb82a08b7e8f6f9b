//! Exact maximization of a linear functional over an intersection of balls.
//!
//! The maximizer of `aᵀy` over `∩ B(c_k, r_k)` is determined by at most
//! `n + 1` active balls. We keep such a basis, scan the remaining balls, and
//! whenever the current point leaves a ball, recompute the optimum over the
//! basis plus that ball by enumerating all small subsets. Each subset yields
//! the maximizer over the intersection of its spheres; the best one feasible
//! for the whole subset problem is the new optimum.

use nalgebra::{DMatrix, DVector};

use crate::error::{LipsetError, Result};
use crate::types::{dist, dot};

#[derive(Clone, Debug)]
pub(crate) struct Ball<'a> {
    pub center: &'a [f64],
    pub radius: f64,
}

pub(crate) struct SupportPoint {
    pub value: f64,
    pub point: Vec<f64>,
}

const MAX_PASSES: usize = 64;

/// Maximizes `dirᵀ y` over the intersection. `balls` must be nonempty.
pub(crate) fn support(balls: &[Ball<'_>], dir: &[f64]) -> Result<SupportPoint> {
    let n = dir.len();
    let dnorm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if balls.is_empty() || !(dnorm > 0.0) {
        return Err(LipsetError::InvalidInput("support needs balls and a nonzero direction".into()));
    }
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&i, &j| balls[i].radius.total_cmp(&balls[j].radius).then(i.cmp(&j)));

    let first = &balls[order[0]];
    let spread = balls.iter().map(|b| dist(b.center, first.center)).fold(0.0, f64::max);
    let scale = first.radius + spread;
    let tols: Vec<f64> = balls.iter().map(|b| 1e-10 * b.radius + 1e-13 * scale).collect();
    let violates = |y: &[f64], k: usize| dist(y, balls[k].center) > balls[k].radius + tols[k];

    let mut basis = vec![order[0]];
    let mut y: Vec<f64> = first.center.iter().zip(dir).map(|(c, d)| c + first.radius * d / dnorm).collect();

    for _ in 0..MAX_PASSES {
        let mut changed = false;
        for &k in &order {
            if !violates(&y, k) {
                continue;
            }
            let mut pool = basis.clone();
            pool.push(k);
            let (best_set, best_point) = best_candidate(balls, &pool, dir, n, &violates).ok_or_else(|| {
                LipsetError::InconsistentData(format!(
                    "slice balls {:?} have an empty intersection",
                    pool.iter().map(|&i| i).collect::<Vec<_>>()
                ))
            })?;
            basis = best_set;
            y = best_point;
            changed = true;
        }
        if !changed {
            return Ok(SupportPoint { value: dot(dir, &y), point: y });
        }
    }
    Err(LipsetError::Solver("support iteration did not settle".into()))
}

fn best_candidate(
    balls: &[Ball<'_>],
    pool: &[usize],
    dir: &[f64],
    n: usize,
    violates: &dyn Fn(&[f64], usize) -> bool,
) -> Option<(Vec<usize>, Vec<f64>)> {
    let max_size = (n + 1).min(pool.len());
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    for mask in 1u32..(1u32 << pool.len()) {
        if mask.count_ones() as usize > max_size {
            continue;
        }
        let subset: Vec<usize> = (0..pool.len()).filter(|i| mask & (1 << i) != 0).map(|i| pool[i]).collect();
        let Some(y) = sphere_candidate(balls, &subset, dir) else {
            continue;
        };
        if pool.iter().any(|&j| violates(&y, j)) {
            continue;
        }
        let v = dot(dir, &y);
        if best.as_ref().map_or(true, |(bv, _, _)| v > *bv) {
            best = Some((v, subset, y));
        }
    }
    best.map(|(_, s, y)| (s, y))
}

/// Maximizer of `dirᵀ y` over the common sphere of `subset` (or a point of
/// the common affine set when the spheres meet in a single point).
fn sphere_candidate(balls: &[Ball<'_>], subset: &[usize], dir: &[f64]) -> Option<Vec<f64>> {
    let n = dir.len();
    let b1 = &balls[subset[0]];
    let c1 = b1.center;
    let r1 = b1.radius;
    let m = subset.len() - 1;
    let mut w0 = DVector::<f64>::zeros(n);
    let mut pdir = DVector::from_column_slice(dir);
    if m > 0 {
        // rows u_j = c_j - c_1, u_jᵀ w = (‖u_j‖² + r_1² - r_j²) / 2
        let mut u = DMatrix::<f64>::zeros(m, n);
        let mut beta = DVector::<f64>::zeros(m);
        for (row, &j) in subset[1..].iter().enumerate() {
            let bj = &balls[j];
            let mut norm2 = 0.0;
            for i in 0..n {
                let d = bj.center[i] - c1[i];
                u[(row, i)] = d;
                norm2 += d * d;
            }
            beta[row] = 0.5 * (norm2 + r1 * r1 - bj.radius * bj.radius);
        }
        let gram = &u * u.transpose();
        let scale = (0..m).map(|i| gram[(i, i)]).fold(0.0, f64::max);
        if !(scale > 0.0) {
            return None;
        }
        let chol = nalgebra::Cholesky::new(gram.clone())?;
        let l = chol.l();
        let min_pivot = (0..m).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot < 1e-14 * scale {
            return None;
        }
        w0 = u.transpose() * chol.solve(&beta);
        let ua = &u * &pdir;
        pdir -= u.transpose() * chol.solve(&ua);
    }
    let rho2 = r1 * r1 - w0.norm_squared();
    let rho = if rho2 >= 0.0 {
        rho2.sqrt()
    } else if w0.norm() - r1 <= 1e-10 * r1 + 1e-300 {
        0.0
    } else {
        return None;
    };
    let pn = pdir.norm();
    let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut y: Vec<f64> = (0..n).map(|i| c1[i] + w0[i]).collect();
    if pn > 1e-13 * dn {
        for i in 0..n {
            y[i] += rho * pdir[i] / pn;
        }
    }
    y.iter().all(|v| v.is_finite()).then_some(y)
}
