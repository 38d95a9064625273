mod common;

use common::{brute_force, random_lp, Brute};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rksvm::lp::{solve_lp, solve_lp_with, LpProblem, LpStatus, Sense, SimplexOptions, VarBounds};

fn check_against_oracle(lp: &LpProblem, opts: SimplexOptions) {
    let got = solve_lp_with(lp, opts).expect("solver error");
    let want = brute_force(lp);
    assert_eq!(got.status, want.status(), "status mismatch on {lp:?}");
    if let Brute::Optimal(v) = want {
        assert!(
            (got.objective_value - v).abs() <= 1e-6 * (1.0 + v.abs()),
            "objective {} vs {v} on {lp:?}",
            got.objective_value
        );
        assert!(lp.max_violation(&got.variable_values) <= 1e-7);
        assert!((lp.objective_at(&got.variable_values) - got.objective_value).abs() <= 1e-9 * (1.0 + v.abs()));
    }
}

#[test]
fn random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut seen = [0usize; 3];
    for _ in 0..300 {
        let lp = random_lp(&mut rng);
        seen[brute_force(&lp).status() as usize] += 1;
        check_against_oracle(&lp, SimplexOptions::default());
    }
    // the generator must exercise every outcome
    assert!(seen.iter().all(|&c| c > 10), "{seen:?}");
}

#[test]
fn bland_from_the_start_agrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let opts = SimplexOptions {
        bland_after: 0,
        refactor_every: Some(3),
        ..SimplexOptions::default()
    };
    for _ in 0..150 {
        check_against_oracle(&random_lp(&mut rng), opts);
    }
}

// Beale's example cycles under Dantzig pricing with naive tie-breaking.
#[test]
fn beale_cycling_example() {
    let mut lp = LpProblem::new(vec![-0.75, 150.0, -0.02, 6.0]);
    lp.add_row(vec![0.25, -60.0, -0.04, 9.0], Sense::Le, 0.0);
    lp.add_row(vec![0.5, -90.0, -0.02, 3.0], Sense::Le, 0.0);
    lp.add_row(vec![0.0, 0.0, 1.0, 0.0], Sense::Le, 1.0);
    let s = solve_lp(&lp).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert!((s.objective_value + 0.05).abs() < 1e-9);
}

#[test]
fn free_and_boxed_variables() {
    // min x - y  s.t.  x + y = 1, x free, y in [-2, 0.25]
    let mut lp = LpProblem::new(vec![1.0, -1.0]);
    lp.bounds = vec![
        VarBounds::FREE,
        VarBounds {
            lower: Some(-2.0),
            upper: Some(0.25),
        },
    ];
    lp.add_row(vec![1.0, 1.0], Sense::Eq, 1.0);
    let s = solve_lp(&lp).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert!((s.objective_value - 0.5).abs() < 1e-12);
    assert!((s.variable_values[0] - 0.75).abs() < 1e-12);
}

#[test]
fn redundant_equalities() {
    let mut lp = LpProblem::new(vec![1.0, 2.0, 3.0]);
    lp.add_row(vec![1.0, 1.0, 1.0], Sense::Eq, 3.0);
    lp.add_row(vec![2.0, 2.0, 2.0], Sense::Eq, 6.0);
    lp.add_row(vec![1.0, -1.0, 0.0], Sense::Eq, 0.0);
    let s = solve_lp(&lp).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert!((s.objective_value - 4.5).abs() < 1e-9);
}

#[test]
fn inconsistent_bounds_are_infeasible() {
    let mut lp = LpProblem::new(vec![1.0]);
    lp.bounds[0] = VarBounds {
        lower: Some(2.0),
        upper: Some(1.0),
    };
    let got = solve_lp(&lp).map(|s| s.status);
    assert!(matches!(got, Ok(LpStatus::Infeasible) | Err(_)));
}
