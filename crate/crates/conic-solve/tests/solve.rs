use conic_solve::{
    solve, verify, Definiteness, LinearMatrixProblem, LmiConstraint, ProblemBuilder, Sense, SolveStatus,
    SymmetricMatrix,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// `X ⪰ 0` (2×2) with `trace X = 1` as two scalar inequalities.
fn unit_trace_problem() -> LinearMatrixProblem {
    let mut b = ProblemBuilder::new();
    let x = b.matrix("X", 2, Definiteness::Semidefinite);
    let mut ge = LmiConstraint::new("trace >= 1", Sense::PositiveSemidefinite, 1);
    ge.constant = SymmetricMatrix::scaled_identity(1, -1.0);
    let mut le = LmiConstraint::new("trace <= 1", Sense::NegativeSemidefinite, 1);
    le.constant = SymmetricMatrix::scaled_identity(1, -1.0);
    for i in 0..2 {
        ge.add_term(x.index(i, i), SymmetricMatrix::identity(1));
        le.add_term(x.index(i, i), SymmetricMatrix::identity(1));
    }
    b.add_constraint(ge);
    b.add_constraint(le);
    b.build()
}

/// minimize t subject to t I - A ⪰ 0
fn max_eig_problem(a: &SymmetricMatrix) -> LinearMatrixProblem {
    let n = a.size();
    let mut b = ProblemBuilder::new();
    let t = b.scalar();
    let mut c = LmiConstraint::new("tI - A", Sense::PositiveSemidefinite, n);
    c.constant = a.clone();
    c.constant.scale(-1.0);
    c.add_term(t, SymmetricMatrix::identity(n));
    b.add_constraint(c);
    b.minimize_term(t, 1.0);
    b.build()
}

#[test]
fn unit_trace_psd_is_feasible() {
    let p = unit_trace_problem();
    let r = solve(&p, 1e-8).unwrap();
    assert!(r.status.is_feasible(), "{r:?}");
    let x = p.matrix_variables[0].value(&r.values);
    assert!((x.trace() - 1.0).abs() <= 2e-8);
    assert!(verify(&p, &r.values, 1e-8).max_violation <= 1e-8);
}

#[test]
fn negative_trace_psd_is_infeasible() {
    let mut b = ProblemBuilder::new();
    let x = b.matrix("X", 2, Definiteness::Semidefinite);
    let mut le = LmiConstraint::new("trace <= -1", Sense::NegativeSemidefinite, 1);
    le.constant = SymmetricMatrix::identity(1);
    for i in 0..2 {
        le.add_term(x.index(i, i), SymmetricMatrix::identity(1));
    }
    b.add_constraint(le);
    let r = solve(&b.build(), 1e-8).unwrap();
    assert_eq!(r.status, SolveStatus::Infeasible);
}

#[test]
fn largest_eigenvalue_of_diagonal() {
    let a = SymmetricMatrix::from_row_major(2, vec![1.0, 0.0, 0.0, 3.0]).unwrap();
    let r = solve(&max_eig_problem(&a), 1e-8).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.values[0] - 3.0).abs() < 1e-7, "{r:?}");
}

#[test]
fn verification_detects_perturbation() {
    let a = SymmetricMatrix::from_row_major(2, vec![1.0, 0.0, 0.0, 3.0]).unwrap();
    let p = max_eig_problem(&a);
    let r = solve(&p, 1e-8).unwrap();
    assert!(verify(&p, &r.values, 1e-8).max_violation <= 1e-8);
    let mut bad = r.values.clone();
    bad[0] -= 0.1;
    let v = verify(&p, &bad, 1e-8);
    assert_eq!(v.status, SolveStatus::Infeasible);
    assert!(v.max_violation > 1e-8);
}

#[test]
fn interior_point_passes_with_zero_tolerance() {
    let a = SymmetricMatrix::from_row_major(2, vec![1.0, 0.0, 0.0, 3.0]).unwrap();
    let p = max_eig_problem(&a);
    let v = verify(&p, &[4.0], 0.0);
    assert_eq!(v.status, SolveStatus::Feasible);
    assert_eq!(v.max_violation, 0.0);
}

#[test]
fn solves_are_deterministic_and_dumps_round_trip() {
    let p = unit_trace_problem();
    let json = p.to_json().unwrap();
    let q = LinearMatrixProblem::from_json(&json).unwrap();
    assert_eq!(p, q);
    let r1 = solve(&p, 1e-8).unwrap();
    let r2 = solve(&q, 1e-8).unwrap();
    assert_eq!(r1, r2);
}

#[test]
fn malformed_dump_is_rejected() {
    let p = unit_trace_problem();
    let json = p.to_json().unwrap().replace("\"num_vars\": 3", "\"num_vars\": 1");
    assert!(LinearMatrixProblem::from_json(&json).is_err());
}

fn sym_from(vals: &[f64], n: usize) -> SymmetricMatrix {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            m[(i, j)] = vals[k];
            m[(j, i)] = vals[k];
            k += 1;
        }
    }
    SymmetricMatrix::from_dmatrix(&m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn max_eigenvalue_matches_dense_eigensolver(n in 1usize..5, vals in prop::collection::vec(-5.0f64..5.0, 10)) {
        let a = sym_from(&vals, n);
        let r = solve(&max_eig_problem(&a), 1e-8).unwrap();
        prop_assert_eq!(r.status, SolveStatus::Optimal);
        let truth = a.to_dmatrix().symmetric_eigenvalues().max();
        prop_assert!((r.values[0] - truth).abs() <= 1e-6 * (1.0 + truth.abs()), "{} vs {}", r.values[0], truth);
    }

    #[test]
    fn accepted_solutions_always_verify(
        n in 1usize..4,
        coeffs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 10), 3),
        interior in prop::collection::vec(-2.0f64..2.0, 3),
        margin in 0.01f64..1.0,
    ) {
        // F(z) = S + Σ (z_i - z*_i) F_i with S = margin I, so z* is interior
        let mut c = LmiConstraint::new("random", Sense::PositiveSemidefinite, n);
        let mut constant = SymmetricMatrix::scaled_identity(n, margin);
        let mut b = ProblemBuilder::new();
        for (i, vals) in coeffs.iter().enumerate() {
            let v = b.scalar();
            let f = sym_from(vals, n);
            constant.axpy(-interior[i], &f);
            c.add_term(v, f);
        }
        c.constant = constant;
        b.add_constraint(c);
        let p = b.build();
        let r = solve(&p, 1e-8).unwrap();
        prop_assert!(r.status.is_feasible(), "{:?}", r);
        prop_assert!(verify(&p, &r.values, 1e-8).max_violation <= 1e-8);
    }
}
