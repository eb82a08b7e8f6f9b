//! One PASS/FAIL line per acceptance criterion, each at its stated tolerance
//! and runtime budget. Exits non-zero when any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use approx_ellipsoid::{containment_audit_with, outer_ellipsoid_with, OuterOptions};
use invariant_synth::{
    recheck_certificate, synthesize_with, verify_by_simulation, BisectionConfig, EnvelopeCheckOptions,
    InvarianceOptions,
};
use lipset_cli::commands::{interior_starts, invariance_options, START_FRACTION};
use lipset_cli::{Preset, Resolved, RunConfig};
use lipset_core::{
    bounding_box, build_qc_matrix, diameter_bound, qc_eval, sample, slice, slice_member, Execution, LipschitzEnvelope,
    SamplePair, SliceBall, SliceSet, StateVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sysid_sim::pendulum::{EQUILIBRIUM, QUERY_POINTS};
use sysid_sim::{
    damping_residual, residual_dataset, simulate, simulate_many, AssumedModel, DynamicalSystem, LinearMap,
    PendulumParams, RandomLipschitzMap, TrajectoryDataset,
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn pairs(t: &[Vec<f64>], offset: usize) -> Vec<SamplePair> {
    t.windows(2).enumerate().map(|(k, w)| sample(&w[0], &w[1], offset + k).unwrap()).collect()
}

fn containment_soundness() -> Outcome {
    let mut violations = 0usize;
    let mut checked = 0usize;
    for i in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
        let n = 1 + (i % 3) as usize;
        let l = rng.gen_range(0.3..2.0);
        let f = RandomLipschitzMap::new(n, l, i);
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let t = simulate(&f, &x0, 1000).unwrap();
        let env = LipschitzEnvelope::from_samples(l, n, 0.0, pairs(&t, 0)).unwrap();
        let fresh: Vec<Vec<f64>> = (0..200).map(|_| (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let probes: Vec<(Vec<f64>, Vec<f64>)> = t
            .windows(2)
            .map(|w| (w[0].clone(), w[1].clone()))
            .chain(fresh.into_iter().map(|x| {
                let y = f.step(&x);
                (x, y)
            }))
            .collect();
        let bad = Execution::Parallel.map(&probes, |(x, y)| !env.contains(x, y).unwrap());
        checked += probes.len();
        violations += bad.into_iter().filter(|b| *b).count();
    }
    outcome(violations == 0, format!("{violations} violations in {checked} checks over 100 systems (required 0)"))
}

fn qc_ball_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut sign_mismatch = 0;
    for k in 0..10_000 {
        let n = 1 + k % 3;
        let mut v = |s: f64| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-s..s)).collect() };
        let (xk, fk, q, y) = (v(3.0), v(3.0), v(3.0), v(3.0));
        let l = 0.1 + 2.0 * (k as f64 / 10_000.0);
        let m = build_qc_matrix(&sample(&xk, &fk, k).unwrap(), l).unwrap();
        let qc = qc_eval(&m, &q, &y).unwrap();
        let ball = dist(&y, &fk).powi(2) - (l * dist(&q, &xk)).powi(2);
        worst = worst.max((qc - ball).abs());
        let inside_ball = dist(&y, &fk) <= l * dist(&q, &xk);
        if (qc <= 0.0) != inside_ball && ball.abs() > 1e-10 {
            sign_mismatch += 1;
        }
    }
    outcome(
        worst <= 1e-10 && sign_mismatch == 0,
        format!("max |QC - ball form| = {worst:.2e} (<= 1e-10), {sign_mismatch} sign disagreements over 10^4 triples"),
    )
}

fn pendulum_dataset(noise: f64, seed: u64) -> (PendulumParams, TrajectoryDataset) {
    let cfg = Resolved::new(RunConfig::preset(Preset::Pendulum), None, None).unwrap();
    let p = PendulumParams::default();
    let sys = cfg.system.build();
    let trajs = simulate_many(sys.as_ref(), &cfg.initial_conditions, cfg.steps, Execution::Parallel).unwrap();
    (p, residual_dataset(&trajs, AssumedModel::PendulumUndamped { params: p }, noise, seed).unwrap())
}

fn monotone_shrinkage() -> Outcome {
    let (p, ds) = pendulum_dataset(0.0, 0);
    let ladder = [100usize, 200, 500, 1000, 2000, 4000];
    let mut widths = vec![vec![[0.0f64; 2]; ladder.len()]; QUERY_POINTS.len()];
    let mut outside = 0;
    for (li, &n) in ladder.iter().enumerate() {
        let (env, _) = ds.truncated(n).unwrap().envelope(p.residual_lipschitz(), None).unwrap();
        for (qi, q) in QUERY_POINTS.iter().enumerate() {
            let s = slice(&env, q).unwrap();
            let iv = bounding_box(&s).unwrap();
            let d = damping_residual(&p, *q);
            for a in 0..2 {
                widths[qi][li][a] = iv[a].1 - iv[a].0;
                if !(iv[a].0 <= d[a] && d[a] <= iv[a].1) {
                    outside += 1;
                }
            }
        }
    }
    let mut increases = 0;
    for w in &widths {
        for pair in w.windows(2) {
            for a in 0..2 {
                if pair[1][a] > pair[0][a] * (1.0 + 1e-8) {
                    increases += 1;
                }
            }
        }
    }
    let decrease: Vec<f64> = widths
        .iter()
        .map(|w| {
            let last = w.len() - 1;
            (0..2).map(|a| 100.0 * (w[0][a] - w[last][a]) / w[0][a]).sum::<f64>() / 2.0
        })
        .collect();
    let mut order: Vec<usize> = (0..QUERY_POINTS.len()).collect();
    order.sort_by(|&i, &j| dist(&QUERY_POINTS[i], &EQUILIBRIUM).total_cmp(&dist(&QUERY_POINTS[j], &EQUILIBRIUM)));
    let near_min = order[..2].iter().map(|&i| decrease[i]).fold(f64::INFINITY, f64::min);
    let far_max = order[2..].iter().map(|&i| decrease[i]).fold(f64::NEG_INFINITY, f64::max);
    let pct: Vec<String> = decrease.iter().map(|d| format!("{d:.1}")).collect();
    outcome(
        increases == 0 && outside == 0 && near_min > far_max,
        format!(
            "{increases} width increases (rel tol 1e-8), {outside} truths outside; mean decrease N=100->4000 per query [{}]%, nearest-two min {near_min:.1}% > far max {far_max:.1}%",
            pct.join(", ")
        ),
    )
}

fn desk_scale_diameter() -> Outcome {
    let (l, eps) = (0.5, 1e-3);
    let f = LinearMap::scaled_identity(1, 0.5);
    let mut x = vec![1.0];
    let mut samples = Vec::new();
    loop {
        let y = f.step(&x);
        samples.push(sample(&x, &y, samples.len()).unwrap());
        if x[0].abs() <= eps {
            break;
        }
        x = y;
    }
    let env = LipschitzEnvelope::from_samples(l, 1, 0.0, samples).unwrap();
    let worst = (0..100)
        .map(|i| {
            let q = -eps + 2.0 * eps * i as f64 / 99.0;
            diameter_bound(&slice(&env, &[q]).unwrap())
        })
        .fold(0.0f64, f64::max);
    outcome(worst <= 4.0 * l * eps, format!("max diameter bound {worst:.4e} <= 4 L eps = {:.1e} over 100 queries", 4.0 * l * eps))
}

fn ball_slice(balls: Vec<(Vec<f64>, f64)>) -> SliceSet {
    let n = balls[0].0.len();
    SliceSet {
        query: StateVector::new(vec![0.0; n]).unwrap(),
        balls: balls
            .into_iter()
            .enumerate()
            .map(|(i, (c, r))| SliceBall { center: StateVector::new(c).unwrap(), radius: r, source_index: i })
            .collect(),
    }
}

fn ellipsoid_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = OuterOptions::default();
    let (mut center_err, mut trace_err) = (0.0f64, 0.0f64);
    for k in 0..30 {
        let n = 1 + k % 3;
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let r = rng.gen_range(0.01..3.0);
        let fit = outer_ellipsoid_with(&ball_slice(vec![(c.clone(), r)]), &opts).unwrap();
        center_err = center_err.max(dist(fit.ellipsoid.center.as_slice(), &c));
        trace_err = trace_err.max((fit.ellipsoid.trace() - n as f64 * r * r).abs() / (n as f64 * r * r));
    }
    let mut violations = 0;
    let mut audited = 0;
    for k in 0..50 {
        let n = 1 + k % 3;
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let count = rng.gen_range(2..=20);
        let balls = (0..count)
            .map(|_| {
                let c: Vec<f64> = p.iter().map(|v| v + rng.gen_range(-1.0..1.0)).collect();
                let r = dist(&c, &p) + rng.gen_range(0.05..1.0);
                (c, r)
            })
            .collect();
        let s = ball_slice(balls);
        let fit = outer_ellipsoid_with(&s, &opts).unwrap();
        let audit = containment_audit_with(&fit.ellipsoid, &s, 10_000, 100 + k as u64, Execution::Parallel).unwrap();
        violations += fit.audit.violations + audit.violations;
        audited += 1;
    }
    outcome(
        center_err <= 1e-7 && trace_err <= 1e-6 && violations == 0,
        format!(
            "single ball: center err {center_err:.2e} (<= 1e-7), trace rel err {trace_err:.2e} (<= 1e-6); {violations} audit violations over {audited} multi-ball slices x 2 audits of 10^4 samples"
        ),
    )
}

fn invariant_pipeline() -> Outcome {
    // (a) contraction
    let f = LinearMap::scaled_identity(1, 0.5);
    let trajs = simulate_many(&f, &[vec![1.0], vec![-1.0]], 40, Execution::Parallel).unwrap();
    let env_a = LipschitzEnvelope::from_samples(0.5, 1, 0.0, [pairs(&trajs[0], 0), pairs(&trajs[1], 40)].concat()).unwrap();
    let cfg_a = Resolved::new(RunConfig::preset(Preset::Contraction), None, None).unwrap();
    let opts_a = invariance_options(&cfg_a).unwrap();
    let syn_a = synthesize_with(&env_a, &opts_a, &BisectionConfig::default(), &EnvelopeCheckOptions::default());
    let a_ok = match &syn_a {
        Ok(s) => {
            let starts = interior_starts(&s.set, 100, 0.99);
            let step = |x: &[f64]| f.step(x);
            verify_by_simulation(&s.set, &step, &starts, 10_000, Execution::Parallel).passed
        }
        Err(_) => false,
    };

    // (b) pendulum, n_I = 2 over [0, 2pi] x [-2.5, 2.5]
    let cfg = Resolved::new(RunConfig::preset(Preset::Pendulum), None, None).unwrap();
    let (p, ds) = pendulum_dataset(0.0, 0);
    let (env, _) = ds.envelope(p.residual_lipschitz(), None).unwrap();
    let opts: InvarianceOptions = invariance_options(&cfg).unwrap();
    let b_detail;
    let b_ok = match synthesize_with(&env, &opts, &BisectionConfig::default(), &EnvelopeCheckOptions::default()) {
        Ok(s) => {
            let recheck = recheck_certificate(&env, &opts, &s, 1e-8).unwrap();
            let radius = (0..64)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / 64.0;
                    dist(&s.set.boundary_point(&[t.cos(), t.sin()]), &EQUILIBRIUM)
                })
                .fold(f64::INFINITY, f64::min);
            let sys = cfg.system.build();
            let step = |x: &[f64]| sys.step(x);
            let starts = interior_starts(&s.set, 6, START_FRACTION);
            let sim = verify_by_simulation(&s.set, &step, &starts, 10_000, Execution::Parallel);
            b_detail = format!(
                "rho {:.6}, envelope check {:?}, independent min slack {:.2e} (>= -1e-8), inner radius {radius:.3}, 6 starts x 10^4 steps inside: {}",
                s.rho, s.envelope_check.verdict, recheck.min_slack_eigenvalue, sim.passed
            );
            s.envelope_check.passed()
                && recheck.status.is_feasible()
                && recheck.min_slack_eigenvalue >= -1e-8
                && radius > 0.1
                && sim.passed
        }
        Err(e) => {
            b_detail = format!("synthesis failed: {e}");
            false
        }
    };
    outcome(a_ok && b_ok, format!("(a) contraction certified and 10^2 starts x 10^4 steps inside: {a_ok}; (b) {b_detail}"))
}

fn period_two_termination() -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    for n in [1usize, 2] {
        let f = LinearMap::scaled_identity(n, -1.0);
        let x0: Vec<f64> = (0..n).map(|i| 1.0 - 0.3 * i as f64).collect();
        let t = simulate(&f, &x0, 20).unwrap();
        let all = pairs(&t, 0);
        let tol = 1e-9;
        let mut env = LipschitzEnvelope::new(1.0, n).unwrap();
        let mut flagged_after_period = true;
        for (k, s) in all.iter().enumerate() {
            let redundant = env.is_redundant(s, tol);
            if k >= 2 && !redundant {
                flagged_after_period = false;
            }
            if !redundant {
                env.push(s.clone()).unwrap();
            }
        }
        let full = LipschitzEnvelope::from_samples(1.0, n, 0.0, all).unwrap();
        let grid: Vec<f64> = (0..21).map(|i| -2.0 + 0.2 * i as f64).collect();
        let mut differ = 0;
        for &a in &grid {
            for &b in &grid {
                let (x, y) = if n == 1 { (vec![a], vec![b]) } else { (vec![a, b], vec![b, a]) };
                if env.contains(&x, &y).unwrap() != full.contains(&x, &y).unwrap() {
                    differ += 1;
                }
            }
        }
        ok &= flagged_after_period && differ == 0 && env.len() == 2;
        details.push(format!("n={n}: stored {}, later samples all redundant: {flagged_after_period}, probe disagreements {differ}", env.len()));
    }
    outcome(ok, details.join("; "))
}

fn noise_robustness() -> Outcome {
    let w = 1e-5;
    let (p, ds) = pendulum_dataset(w, 42);
    let (env, _) = ds.envelope(p.residual_lipschitz(), None).unwrap();
    let mut violations = 0;
    for q in QUERY_POINTS {
        let s = slice(&env, &q).unwrap();
        let d = damping_residual(&p, q);
        let iv = bounding_box(&s).unwrap();
        let in_box = (0..2).all(|a| iv[a].0 <= d[a] && d[a] <= iv[a].1);
        if !slice_member(&s, &d).unwrap() || !in_box {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("{violations} of 6 query points with the true residual outside the inflated slice (noise radius {w:e}, envelope radius {:.3e})", env.noise_radius()),
    )
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        ("containment soundness", Duration::from_secs(60), containment_soundness),
        ("QC / ball equivalence", Duration::from_secs(60), qc_ball_equivalence),
        ("monotone shrinkage on the pendulum", Duration::from_secs(300), monotone_shrinkage),
        ("diameter bound at desk scale", Duration::from_secs(60), desk_scale_diameter),
        ("outer ellipsoid sanity", Duration::from_secs(120), ellipsoid_sanity),
        ("invariant set pipeline", Duration::from_secs(600), invariant_pipeline),
        ("period-2 termination", Duration::from_secs(60), period_two_termination),
        ("noise robustness", Duration::from_secs(60), noise_robustness),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let pass = o.passed && elapsed <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{}] {name}: {} ({:.1}s, budget {}s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
