//! Slices of an envelope at a fixed query state: intersections of balls.

use serde::{Deserialize, Serialize};

use crate::envelope::LipschitzEnvelope;
use crate::error::{check_dim, LipsetError, Result};
use crate::par::Execution;
use crate::support::{support, Ball};
use crate::types::{dist, SamplePair, StateVector};

/// Tolerance on distances for slice membership.
pub const SLICE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceBall {
    pub center: StateVector,
    pub radius: f64,
    pub source_index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceSet {
    pub query: StateVector,
    pub balls: Vec<SliceBall>,
}

/// Ball of possible images at `query` implied by one sample. With noise
/// radius `w` the radius is `L (‖query - x_k‖ + w) + w`.
pub fn slice_ball(sample: &SamplePair, query: &[f64], l: f64, noise_radius: f64) -> Result<SliceBall> {
    check_dim(sample.dim(), query.len())?;
    let d = dist(query, &sample.x);
    let radius = if noise_radius > 0.0 { l * (d + noise_radius) + noise_radius } else { l * d };
    Ok(SliceBall { center: sample.fx.clone(), radius, source_index: sample.index })
}

pub fn slice(env: &LipschitzEnvelope, query: &[f64]) -> Result<SliceSet> {
    slice_with(env, query, Execution::Sequential)
}

pub fn slice_with(env: &LipschitzEnvelope, query: &[f64], exec: Execution) -> Result<SliceSet> {
    check_dim(env.dimension(), query.len())?;
    if env.is_empty() {
        return Err(LipsetError::UnboundedSlice);
    }
    let q = StateVector::new(query.to_vec())?;
    let l = env.lipschitz_constant();
    let w = env.noise_radius();
    let balls = exec.map(env.samples(), |s| slice_ball(s, query, l, w));
    Ok(SliceSet { query: q, balls: balls.into_iter().collect::<Result<_>>()? })
}

impl SliceSet {
    pub fn dim(&self) -> usize {
        self.query.dim()
    }

    /// The `k` balls of smallest radius (ties by position), in that order.
    pub fn smallest(&self, k: usize) -> SliceSet {
        let mut idx: Vec<usize> = (0..self.balls.len()).collect();
        idx.sort_by(|&i, &j| self.balls[i].radius.total_cmp(&self.balls[j].radius).then(i.cmp(&j)));
        idx.truncate(k);
        SliceSet { query: self.query.clone(), balls: idx.into_iter().map(|i| self.balls[i].clone()).collect() }
    }

    pub fn smallest_ball(&self) -> Option<&SliceBall> {
        self.balls.iter().min_by(|a, b| a.radius.total_cmp(&b.radius))
    }

    fn support_balls(&self) -> Vec<Ball<'_>> {
        self.balls.iter().map(|b| Ball { center: &b.center, radius: b.radius }).collect()
    }

    /// `max dirᵀy` over the slice together with the maximizer.
    pub fn support(&self, dir: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.dim(), dir.len())?;
        if self.balls.is_empty() {
            return Err(LipsetError::UnboundedSlice);
        }
        let s = support(&self.support_balls(), dir)?;
        Ok((s.value, s.point))
    }
}

pub fn slice_member(s: &SliceSet, y: &[f64]) -> Result<bool> {
    check_dim(s.dim(), y.len())?;
    Ok(s.balls.iter().all(|b| dist(y, &b.center) <= b.radius + SLICE_TOL))
}

/// Exact range of coordinate `axis` over the slice.
pub fn coordinate_interval(s: &SliceSet, axis: usize) -> Result<(f64, f64)> {
    let n = s.dim();
    if axis >= n {
        return Err(LipsetError::InvalidInput(format!("axis {axis} out of range for dimension {n}")));
    }
    let mut e = vec![0.0; n];
    e[axis] = 1.0;
    let (hi, _) = s.support(&e)?;
    e[axis] = -1.0;
    let (neg_lo, _) = s.support(&e)?;
    Ok((-neg_lo, hi))
}

/// All coordinate intervals of the slice.
pub fn bounding_box(s: &SliceSet) -> Result<Vec<(f64, f64)>> {
    (0..s.dim()).map(|i| coordinate_interval(s, i)).collect()
}

pub fn diameter_bound(s: &SliceSet) -> f64 {
    diameter_bound_with(s, Execution::Sequential)
}

/// Minimum of every single-ball diameter and every valid two-ball lens
/// bound `2 sqrt(r1² - a²)`, `a = (c² + r1² - r2²) / (2c)`. The lens bound
/// is used only when both centers lie on their own side of the radical
/// plane (`0 ≤ a ≤ c`); otherwise a cap larger than a hemisphere can occur.
pub fn diameter_bound_with(s: &SliceSet, exec: Execution) -> f64 {
    let balls = &s.balls;
    let single = balls.iter().map(|b| 2.0 * b.radius).fold(f64::INFINITY, f64::min);
    let pairs = exec.min_range(balls.len(), |i| {
        let bi = &balls[i];
        let mut best = f64::INFINITY;
        for bj in &balls[i + 1..] {
            if let Some(v) = lens_bound(&bi.center, bi.radius, &bj.center, bj.radius) {
                best = best.min(v);
            }
        }
        best
    });
    single.min(pairs)
}

fn lens_bound(c1: &[f64], r1: f64, c2: &[f64], r2: f64) -> Option<f64> {
    let c = dist(c1, c2);
    if !(c > 0.0) {
        return None;
    }
    let a = (c * c + r1 * r1 - r2 * r2) / (2.0 * c);
    let tol = 1e-12 * (c + r1 + r2);
    if a < -tol || c - a < -tol {
        return None;
    }
    let h2 = r1 * r1 - a * a;
    if h2 < -tol * (r1 + a.abs()) {
        // the balls do not meet; leave emptiness to the interval solver
        return None;
    }
    Some(2.0 * h2.max(0.0).sqrt())
}
