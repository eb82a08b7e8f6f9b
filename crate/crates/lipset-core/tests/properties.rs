use lipset_core::{
    build_qc_matrix, coordinate_interval, diameter_bound, qc_eval, sample, slice, slice_member, LipschitzEnvelope,
    SamplePair, SliceBall, SliceSet, StateVector,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `f_i(x) = L/√n · sin(√n·mean(x) + φ_i)`. The Jacobian is `v 1ᵀ` with
/// `‖v‖ ≤ L/√n`, so its spectral norm is at most `L`.
fn lipschitz_map(l: f64, n: usize, phase: &[f64]) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
    move |x: &[f64]| {
        let s: f64 = x.iter().sum::<f64>() / n as f64;
        (0..n).map(|i| l / (n as f64).sqrt() * (s * (n as f64).sqrt() + phase[i]).sin()).collect()
    }
}

fn trajectory_envelope(l: f64, n: usize, seed: u64, len: usize) -> (LipschitzEnvelope, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let mut env = LipschitzEnvelope::new(l, n).unwrap();
    {
        let f = lipschitz_map(l, n, &phase);
        for k in 0..len {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let fx = f(&x);
            env.push(SamplePair::new(x, fx, k).unwrap()).unwrap();
        }
    }
    (env, phase)
}

fn ball(c: Vec<f64>, r: f64) -> SliceBall {
    SliceBall { center: StateVector::new(c).unwrap(), radius: r, source_index: 0 }
}

/// Independent oracle for planar ball intersections: the maximum of a
/// coordinate is attained at a disc extreme point or at a pairwise circle
/// intersection point.
fn planar_max(balls: &[(Vec<f64>, f64)], axis: usize, sign: f64) -> Option<f64> {
    let mut cands: Vec<[f64; 2]> = Vec::new();
    for (c, r) in balls {
        let mut p = [c[0], c[1]];
        p[axis] += sign * r;
        cands.push(p);
    }
    for i in 0..balls.len() {
        for j in i + 1..balls.len() {
            let (c1, r1) = (&balls[i].0, balls[i].1);
            let (c2, r2) = (&balls[j].0, balls[j].1);
            let d = dist(c1, c2);
            if d == 0.0 || d > r1 + r2 || d < (r1 - r2).abs() {
                continue;
            }
            let a = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
            let h = (r1 * r1 - a * a).max(0.0).sqrt();
            let ex = [(c2[0] - c1[0]) / d, (c2[1] - c1[1]) / d];
            let m = [c1[0] + a * ex[0], c1[1] + a * ex[1]];
            cands.push([m[0] - h * ex[1], m[1] + h * ex[0]]);
            cands.push([m[0] + h * ex[1], m[1] - h * ex[0]]);
        }
    }
    cands
        .into_iter()
        .filter(|p| balls.iter().all(|(c, r)| dist(p, c) <= r * (1.0 + 1e-9) + 1e-12))
        .map(|p| sign * p[axis])
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn true_graph_points_are_always_contained(seed in 0u64..10_000, n in 1usize..4, l in 0.1f64..3.0) {
        let (env, phase) = trajectory_envelope(l, n, seed, 40);
        let f = lipschitz_map(l, n, &phase);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        for _ in 0..50 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            prop_assert!(env.contains(&x, &f(&x)).unwrap());
            let s = slice(&env, &x).unwrap();
            prop_assert!(slice_member(&s, &f(&x)).unwrap());
        }
    }

    #[test]
    fn qc_sign_agrees_with_ball_test(
        x in prop::collection::vec(-5.0f64..5.0, 2),
        fx in prop::collection::vec(-5.0f64..5.0, 2),
        q in prop::collection::vec(-5.0f64..5.0, 2),
        y in prop::collection::vec(-5.0f64..5.0, 2),
        l in 0.05f64..4.0,
    ) {
        let s = SamplePair::new(x.clone(), fx.clone(), 0).unwrap();
        let qc = build_qc_matrix(&s, l).unwrap();
        let val = qc_eval(&qc, &q, &y).unwrap();
        let direct = dist(&y, &fx).powi(2) - l * l * dist(&q, &x).powi(2);
        prop_assert!((val - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
    }

    #[test]
    fn refinement_only_shrinks(seed in 0u64..10_000, n in 1usize..3) {
        let (env, _) = trajectory_envelope(1.0, n, seed, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
        let query: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut prev: Option<Vec<(f64, f64)>> = None;
        for k in 1..=env.len() {
            let e = env.truncated(k);
            for _ in 0..20 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                if e.contains(&x, &y).unwrap() {
                    prop_assert!(env.truncated(k - 1).contains(&x, &y).unwrap());
                }
            }
            let s = slice(&e, &query).unwrap();
            let iv: Vec<(f64, f64)> = (0..n).map(|a| coordinate_interval(&s, a).unwrap()).collect();
            if let Some(p) = &prev {
                for (now, before) in iv.iter().zip(p) {
                    prop_assert!(now.1 - now.0 <= before.1 - before.0 + 1e-9);
                }
            }
            prev = Some(iv);
        }
    }

    #[test]
    fn slice_membership_matches_envelope(seed in 0u64..10_000, n in 1usize..4) {
        let (env, _) = trajectory_envelope(0.8, n, seed, 15);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 99);
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = slice(&env, &x).unwrap();
            // skip probes within 1e-9 of a ball boundary
            let margin = s.balls.iter().map(|b| (dist(&y, &b.center) - b.radius).abs()).fold(f64::INFINITY, f64::min);
            if margin < 1e-9 {
                continue;
            }
            prop_assert_eq!(slice_member(&s, &y).unwrap(), env.contains(&x, &y).unwrap());
        }
    }

    #[test]
    fn refinement_order_does_not_matter(seed in 0u64..10_000, rot in 0usize..12) {
        let (env, _) = trajectory_envelope(1.2, 2, seed, 12);
        let mut samples = env.samples().to_vec();
        samples.rotate_left(rot);
        samples.reverse();
        let other = LipschitzEnvelope::from_samples(1.2, 2, 0.0, samples).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 3);
        for _ in 0..100 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.5..1.5)).collect();
            prop_assert_eq!(env.contains(&x, &y).unwrap(), other.contains(&x, &y).unwrap());
        }
    }

    #[test]
    fn planar_intervals_match_oracle(
        centers in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..8),
        radii in prop::collection::vec(0.8f64..3.0, 8),
    ) {
        let balls: Vec<(Vec<f64>, f64)> = centers.iter().zip(&radii).map(|((a, b), r)| (vec![*a, *b], *r)).collect();
        // common point at the origin is guaranteed when every radius exceeds the center norm
        prop_assume!(balls.iter().all(|(c, r)| dist(c, &[0.0, 0.0]) < *r));
        let s = SliceSet {
            query: StateVector::new(vec![0.0, 0.0]).unwrap(),
            balls: balls.iter().map(|(c, r)| ball(c.clone(), *r)).collect(),
        };
        for axis in 0..2 {
            let (lo, hi) = coordinate_interval(&s, axis).unwrap();
            let ohi = planar_max(&balls, axis, 1.0).unwrap();
            let olo = -planar_max(&balls, axis, -1.0).unwrap();
            prop_assert!((hi - ohi).abs() <= 1e-8 * (1.0 + ohi.abs()), "hi {} vs {}", hi, ohi);
            prop_assert!((lo - olo).abs() <= 1e-8 * (1.0 + olo.abs()), "lo {} vs {}", lo, olo);
        }
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn diameter_bound_dominates_sampled_diameter(
        n in 1usize..4,
        seed in 0u64..10_000,
        count in 1usize..6,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let balls: Vec<SliceBall> = (0..count)
            .map(|_| {
                let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
                let r = dist(&c, &vec![0.0; n]) + rng.gen_range(0.05..1.5);
                ball(c, r)
            })
            .collect();
        let s = SliceSet { query: StateVector::new(vec![0.0; n]).unwrap(), balls };
        let bound = diameter_bound(&s);
        let small = s.smallest_ball().unwrap().clone();
        let mut members: Vec<Vec<f64>> = Vec::new();
        for _ in 0..10_000 {
            let p: Vec<f64> = small.center.iter().map(|c| c + rng.gen_range(-small.radius..small.radius)).collect();
            if slice_member(&s, &p).unwrap() {
                members.push(p);
            }
        }
        let mut observed: f64 = 0.0;
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                observed = observed.max(dist(&members[i], &members[j]));
            }
        }
        prop_assert!(bound + 1e-12 >= observed, "bound {} < observed {}", bound, observed);
    }
}

#[test]
fn contraction_diameter_is_order_epsilon() {
    let eps = 1e-3;
    let l = 0.5;
    let mut env = LipschitzEnvelope::new(l, 1).unwrap();
    let mut x = 1.0f64;
    let mut k = 0;
    // stop once a sample has been taken inside the ε-ball
    loop {
        env.push(sample(&[x], &[0.5 * x], k).unwrap()).unwrap();
        if x.abs() < eps {
            break;
        }
        x *= 0.5;
        k += 1;
    }
    for i in 0..100 {
        let q = -eps + 2.0 * eps * (i as f64 + 0.5) / 100.0;
        let d = diameter_bound(&slice(&env, &[q]).unwrap());
        assert!(d <= 4.0 * l * eps, "query {q}: {d}");
    }
}

#[test]
fn zero_radius_ball_gives_point_interval() {
    let env = LipschitzEnvelope::from_samples(
        2.0,
        2,
        0.0,
        [sample(&[0.0, 0.0], &[1.0, -1.0], 0).unwrap(), sample(&[1.0, 0.0], &[1.5, -1.0], 1).unwrap()],
    )
    .unwrap();
    let s = slice(&env, &[0.0, 0.0]).unwrap();
    assert_eq!(coordinate_interval(&s, 0).unwrap(), (1.0, 1.0));
    assert_eq!(coordinate_interval(&s, 1).unwrap(), (-1.0, -1.0));
}
