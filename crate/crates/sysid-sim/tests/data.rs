use lipset_core::{Execution, SamplePair};
use proptest::prelude::*;
use sysid_sim::pendulum::{EQUILIBRIUM, INITIAL_CONDITIONS, STEPS_PER_TRAJECTORY};
use sysid_sim::*;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn pendulum_runs(steps: usize) -> (PendulumParams, Vec<Vec<Vec<f64>>>) {
    let p = PendulumParams::default();
    let sys = Pendulum { params: p, with_damping: true };
    let starts: Vec<Vec<f64>> = INITIAL_CONDITIONS.iter().map(|v| v.to_vec()).collect();
    (p, simulate_many(&sys, &starts, steps, Execution::Parallel).unwrap())
}

#[test]
fn closed_loop_pendulum_converges_to_equilibrium() {
    let (_, runs) = pendulum_runs(STEPS_PER_TRAJECTORY);
    for t in &runs {
        assert_eq!(t.len(), STEPS_PER_TRAJECTORY + 1);
        let meta = detect_periodicity(t, 1e-3);
        assert_eq!(meta.detected_period, Some(1));
        assert!(dist(meta.converged_to.as_ref().unwrap(), &EQUILIBRIUM) < 1e-3);
    }
}

#[test]
fn pendulum_residuals_match_closed_form_damping() {
    let (p, runs) = pendulum_runs(500);
    let ds = residual_dataset(&runs, AssumedModel::PendulumUndamped { params: p }, 0.0, 0).unwrap();
    assert_eq!(ds.residual_pairs.len(), 4 * 500);
    for s in &ds.residual_pairs {
        let d = damping_residual(&p, [s.x[0], s.x[1]]);
        assert!(dist(&s.fx, &d) <= 1e-12 * (1.0 + s.x[1].abs()), "{:?} vs {d:?}", s.fx);
    }
}

#[test]
fn residual_envelope_respects_its_lipschitz_constant() {
    let (p, runs) = pendulum_runs(300);
    let ds = residual_dataset(&runs, AssumedModel::PendulumUndamped { params: p }, 0.0, 0).unwrap();
    let (env, stats) = ds.envelope(p.residual_lipschitz(), None).unwrap();
    assert_eq!(stats.stored, stats.offered);
    assert!(env.lipschitz_violation(Execution::Parallel).is_none());
    let (tight, _) = ds.envelope(0.5 * p.residual_lipschitz(), None).unwrap();
    assert!(tight.lipschitz_violation(Execution::Parallel).is_some());
    // the true residual lies in every slice
    for q in sysid_sim::pendulum::QUERY_POINTS {
        assert!(env.contains(&q, &damping_residual(&p, q)).unwrap());
    }
}

#[test]
fn noisy_measurements_stay_within_the_noise_ball() {
    let (p, runs) = pendulum_runs(200);
    let w = 1e-3;
    let ds = residual_dataset(&runs, AssumedModel::PendulumUndamped { params: p }, w, 7).unwrap();
    for (truth, measured) in runs.iter().zip(&ds.trajectories) {
        for (x, z) in truth.iter().zip(measured) {
            assert!(dist(x, z) <= w * (1.0 + 1e-12));
        }
    }
    let lf = ds.assumed_model.lipschitz_bound(2).unwrap();
    assert!((ds.envelope_noise_radius() - (1.0 + lf) * w).abs() < 1e-15);
    let (env, _) = ds.envelope(p.residual_lipschitz(), None).unwrap();
    assert!(env.lipschitz_violation(Execution::Sequential).is_none());
    for t in &runs {
        for x in t.iter().step_by(37) {
            assert!(env.contains(x, &damping_residual(&p, [x[0], x[1]])).unwrap());
        }
    }
}

#[test]
fn datasets_are_deterministic_in_the_seed() {
    let (p, runs) = pendulum_runs(50);
    let model = AssumedModel::PendulumUndamped { params: p };
    let a = residual_dataset(&runs, model.clone(), 1e-2, 11).unwrap();
    let b = residual_dataset(&runs, model.clone(), 1e-2, 11).unwrap();
    let c = residual_dataset(&runs, model, 1e-2, 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    let (_, again) = pendulum_runs(50);
    assert_eq!(runs, again);
}

#[test]
fn dataset_json_round_trip() {
    let (p, runs) = pendulum_runs(20);
    let ds = residual_dataset(&runs, AssumedModel::PendulumUndamped { params: p }, 1e-3, 3).unwrap();
    let json = ds.to_json().unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["assumed_model"]["kind"], "pendulum_undamped");
    assert_eq!(v["residual_pairs"][0].as_array().unwrap().len(), 2);
    assert_eq!(TrajectoryDataset::from_json(&json).unwrap(), ds);
}

#[test]
fn truncation_keeps_the_prefix() {
    let (p, runs) = pendulum_runs(100);
    let ds = residual_dataset(&runs, AssumedModel::PendulumUndamped { params: p }, 0.0, 0).unwrap();
    let short = ds.truncated(10).unwrap();
    assert_eq!(short.residual_pairs.len(), 4 * 10);
    assert!(short.trajectories.iter().all(|t| t.len() == 11));
    let first: Vec<&SamplePair> = ds.residual_pairs.iter().take(10).collect();
    for (a, b) in short.residual_pairs.iter().zip(first) {
        assert_eq!((&a.x, &a.fx), (&b.x, &b.fx));
    }
}

#[test]
fn csv_has_the_documented_header() {
    let t = vec![vec![0.1, -2.0], vec![1.0 / 3.0, 4.0]];
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &t).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,x1,x2"));
    let row: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "1");
    let mantissa = row[1].split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17);
    assert!(read_trajectory_csv("a,b\n1,2\n".as_bytes()).is_err());
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let f = RandomLipschitzMap::new(3, 0.9, 5);
    let starts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 0.1, -0.2, 0.3]).collect();
    let a = simulate_many(&f, &starts, 50, Execution::Sequential).unwrap();
    let b = simulate_many(&f, &starts, 50, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn csv_round_trip_is_bit_exact(rows in prop::collection::vec(prop::collection::vec(-1e300f64..1e300, 3), 1..20)) {
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &rows).unwrap();
        let back = read_trajectory_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in back.iter().zip(&rows) {
            for (x, y) in a.iter().zip(b) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn random_maps_respect_their_lipschitz_constant(
        seed in 0u64..1000,
        l in 0.1f64..3.0,
        x in prop::collection::vec(-5.0f64..5.0, 3),
        y in prop::collection::vec(-5.0f64..5.0, 3),
    ) {
        let f = RandomLipschitzMap::new(3, l, seed);
        let gap = dist(&f.step(&x), &f.step(&y));
        prop_assert!(gap <= l * dist(&x, &y) * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn residuals_plus_model_reproduce_the_next_state(a in -0.9f64..0.9, x0 in -3.0f64..3.0) {
        let f = LinearMap { a: vec![vec![a]] };
        let t = simulate(&f, &[x0], 10).unwrap();
        let ds = residual_dataset(&[t.clone()], AssumedModel::Identity, 0.0, 0).unwrap();
        for (k, s) in ds.residual_pairs.iter().enumerate() {
            prop_assert!((s.x[0] + s.fx[0] - t[k + 1][0]).abs() <= 1e-15 * (1.0 + x0.abs()));
        }
    }
}
