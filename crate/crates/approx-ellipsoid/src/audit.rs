use lipset_core::{slice_member, Execution, LipsetError, Result, SliceSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::ellipsoid::{contains_point, Ellipsoid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub samples: usize,
    /// proposals that landed in every ball of the slice
    pub accepted: usize,
    pub violations: usize,
    /// no proposal landed in the slice
    pub degenerate: bool,
    /// `Σ_i (range_i / 2)²` over accepted points divided by `trace(R)`
    pub tightness: Option<f64>,
    pub witness: Option<Vec<f64>>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Uniform point in the ball `B(center, r)`.
pub fn sample_ball(rng: &mut ChaCha8Rng, center: &[f64], r: f64) -> Vec<f64> {
    let n = center.len();
    let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let u: f64 = Uniform::new(0.0, 1.0).sample(rng);
    let scale = r * u.powf(1.0 / n as f64) / norm;
    center.iter().zip(g).map(|(c, v)| c + v * scale).collect()
}

pub fn containment_audit(e: &Ellipsoid, s: &SliceSet, samples: usize) -> Result<AuditReport> {
    containment_audit_with(e, s, samples, 0, Execution::default())
}

/// Rejection-samples the slice from its smallest ball and checks every
/// accepted point against the ellipsoid.
pub fn containment_audit_with(
    e: &Ellipsoid,
    s: &SliceSet,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<AuditReport> {
    if samples == 0 {
        return Err(LipsetError::InvalidInput("audit needs at least one sample".into()));
    }
    let Some(b0) = s.smallest_ball() else {
        return Err(LipsetError::UnboundedSlice);
    };
    if e.dim() != s.dim() {
        return Err(LipsetError::DimensionMismatch { expected: s.dim(), got: e.dim() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..samples).map(|_| sample_ball(&mut rng, &b0.center, b0.radius)).collect();
    // balls ordered by radius reject most proposals early
    let ordered = s.smallest(s.balls.len());
    let verdicts = exec.map(&points, |y| -> Result<(bool, bool)> {
        if !slice_member(&ordered, y)? {
            return Ok((false, false));
        }
        Ok((true, contains_point(e, y)?))
    });
    let mut report =
        AuditReport { samples, accepted: 0, violations: 0, degenerate: false, tightness: None, witness: None };
    let n = s.dim();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for (y, v) in points.iter().zip(verdicts) {
        let (member, inside) = v?;
        if !member {
            continue;
        }
        report.accepted += 1;
        for i in 0..n {
            lo[i] = lo[i].min(y[i]);
            hi[i] = hi[i].max(y[i]);
        }
        if !inside {
            report.violations += 1;
            report.witness.get_or_insert_with(|| y.clone());
        }
    }
    report.degenerate = report.accepted == 0;
    if !report.degenerate && e.trace() > 0.0 {
        let hull: f64 = lo.iter().zip(&hi).map(|(a, b)| ((b - a) / 2.0).powi(2)).sum();
        report.tightness = Some(hull / e.trace());
    }
    Ok(report)
}
