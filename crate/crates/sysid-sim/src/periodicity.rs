use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub detected_period: Option<usize>,
    pub converged_to: Option<Vec<f64>>,
    pub convergence_tol: f64,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Looks at the second half of the trajectory. Reports convergence when the
/// whole tail stays within `tol` of its last state, and otherwise the
/// smallest `p` with `‖x_k - x_{k+p}‖ ≤ tol` throughout the tail.
pub fn detect_periodicity(trajectory: &[Vec<f64>], tol: f64) -> TrajectoryMeta {
    let len = trajectory.len();
    let mut meta = TrajectoryMeta { detected_period: None, converged_to: None, convergence_tol: tol };
    if len < 2 {
        return meta;
    }
    let start = len / 2;
    let tail = &trajectory[start..];
    let last = &trajectory[len - 1];
    if tail.iter().all(|x| dist(x, last) <= tol) {
        meta.converged_to = Some(last.clone());
        meta.detected_period = Some(1);
        return meta;
    }
    for p in 1..=tail.len() / 2 {
        if (0..tail.len() - p).all(|k| dist(&tail[k], &tail[k + p]) <= tol) {
            meta.detected_period = Some(p);
            break;
        }
    }
    meta
}
