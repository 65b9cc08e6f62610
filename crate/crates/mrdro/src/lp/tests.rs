use super::*;

fn lp(num_vars: usize) -> LpProblem {
    LpProblem::new(num_vars)
}

#[test]
fn single_variable_at_its_row_bound() {
    let mut p = lp(1);
    p.set_objective(0, -1.0);
    p.add_constraint(&[(0, 1.0)], Sense::Le, 1.0);
    let s = solve_lp(&p).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.primal[0] - 1.0).abs() < 1e-9);
    assert!((s.objective_value + 1.0).abs() < 1e-9);
}

#[test]
fn contradictory_row_and_bound_is_infeasible() {
    let mut p = lp(1);
    p.set_objective(0, 1.0);
    p.add_constraint(&[(0, 1.0)], Sense::Le, -1.0);
    let s = solve_lp(&p).unwrap();
    assert_eq!(s.status, Status::Infeasible);
    assert!(s.primal.is_empty());
}

#[test]
fn shared_budget_tie_breaks_to_first_variable() {
    // minimize -x - y s.t. x + y <= 1: every point on the segment is
    // optimal; the solver lands on the lexicographically greatest vertex.
    let mut p = lp(2);
    p.set_objective(0, -1.0);
    p.set_objective(1, -1.0);
    p.add_constraint(&[(0, 1.0), (1, 1.0)], Sense::Le, 1.0);
    let s = solve_lp(&p).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.objective_value + 1.0).abs() < 1e-9);
    assert!((s.primal[0] - 1.0).abs() < 1e-9);
    assert!(s.primal[1].abs() < 1e-9);
}

#[test]
fn equality_rows_use_artificials() {
    let mut p = lp(2);
    p.set_objective(0, 1.0);
    p.set_bounds(1, 0.0, 3.0);
    p.add_constraint(&[(0, 1.0), (1, 1.0)], Sense::Eq, 5.0);
    let s = solve_lp(&p).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.primal[0] - 2.0).abs() < 1e-9);
    assert!((s.primal[1] - 3.0).abs() < 1e-9);
}

#[test]
fn free_variable_reaches_negative_optimum() {
    let mut p = lp(1);
    p.set_objective(0, 1.0);
    p.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
    p.add_constraint(&[(0, 1.0)], Sense::Ge, -7.0);
    let s = solve_lp(&p).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.primal[0] + 7.0).abs() < 1e-9);
}

#[test]
fn pure_bound_problem_without_rows() {
    let mut p = lp(1);
    p.set_objective(0, -1.0);
    p.set_bounds(0, 0.0, 2.0);
    let s = solve_lp(&p).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.primal[0] - 2.0).abs() < 1e-9);
}

#[test]
fn missing_upper_bound_is_unbounded() {
    let mut p = lp(1);
    p.set_objective(0, -1.0);
    let s = solve_lp(&p).unwrap();
    assert_eq!(s.status, Status::Unbounded);
}

#[test]
fn fixed_variable_conflicts_with_row() {
    let mut p = lp(1);
    p.set_objective(0, 1.0);
    p.set_bounds(0, 3.0, 3.0);
    p.add_constraint(&[(0, 1.0)], Sense::Le, 2.0);
    let s = solve_lp(&p).unwrap();
    assert_eq!(s.status, Status::Infeasible);
}

#[test]
fn negative_bound_interval() {
    let mut p = lp(1);
    p.set_objective(0, 1.0);
    p.set_bounds(0, -5.0, -2.0);
    let s = solve_lp(&p).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.primal[0] + 5.0).abs() < 1e-9);
}

#[test]
fn duplicate_entries_in_a_row_are_summed() {
    let mut p = lp(1);
    p.set_objective(0, -1.0);
    p.add_constraint(&[(0, 0.5), (0, 0.5)], Sense::Le, 2.0);
    let s = solve_lp(&p).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.primal[0] - 2.0).abs() < 1e-9);
}

#[test]
fn invalid_problems_are_rejected() {
    let mut p = lp(1);
    p.add_constraint(&[(3, 1.0)], Sense::Le, 1.0);
    assert!(matches!(solve_lp(&p), Err(LpError::Invalid(_))));

    let mut p = lp(1);
    p.set_objective(0, f64::NAN);
    assert!(matches!(solve_lp(&p), Err(LpError::Invalid(_))));

    let mut p = lp(1);
    p.set_bounds(0, 2.0, 1.0);
    assert!(matches!(solve_lp(&p), Err(LpError::Invalid(_))));
}

#[test]
fn identical_input_yields_identical_output() {
    let mut p = lp(3);
    for j in 0..3 {
        p.set_objective(j, -((j + 1) as f64));
    }
    p.add_constraint(&[(0, 2.0), (1, 1.0), (2, 3.0)], Sense::Le, 10.0);
    p.add_constraint(&[(0, 1.0), (1, 4.0)], Sense::Le, 8.0);
    let a = solve_lp(&p).unwrap();
    let b = solve_lp(&p).unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.objective_value.to_bits(), b.objective_value.to_bits());
    for (x, y) in a.primal.iter().zip(&b.primal) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn text_dump_lists_one_constraint_per_line() {
    let mut p = lp(2);
    p.set_objective(0, 5.0);
    p.set_objective(1, -3.0);
    p.set_bounds(1, f64::NEG_INFINITY, f64::INFINITY);
    p.add_constraint(&[(0, 1.0), (1, 2.0)], Sense::Le, 10.0);
    p.add_constraint(&[(0, -1.0)], Sense::Ge, -4.0);
    let text = p.to_text();
    assert!(text.starts_with("minimize 5 x0 - 3 x1\n"));
    assert!(text.contains("r0: 1 x0 + 2 x1 <= 10\n"));
    assert!(text.contains("r1: -1 x0 >= -4\n"));
    assert!(text.contains("x1 free"));
}

#[test]
fn larger_dense_instance_matches_known_optimum() {
    // max 5a + 4b + 3c subject to 2a+3b+c <= 5, 4a+b+2c <= 11,
    // 3a+4b+2c <= 8 has optimum 13 at (2, 0, 1).
    let mut p = lp(3);
    p.set_objective(0, -5.0);
    p.set_objective(1, -4.0);
    p.set_objective(2, -3.0);
    p.add_constraint(&[(0, 2.0), (1, 3.0), (2, 1.0)], Sense::Le, 5.0);
    p.add_constraint(&[(0, 4.0), (1, 1.0), (2, 2.0)], Sense::Le, 11.0);
    p.add_constraint(&[(0, 3.0), (1, 4.0), (2, 2.0)], Sense::Le, 8.0);
    let s = solve_lp(&p).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.objective_value + 13.0).abs() < 1e-8);
    assert!((s.primal[0] - 2.0).abs() < 1e-8);
    assert!(s.primal[1].abs() < 1e-8);
    assert!((s.primal[2] - 1.0).abs() < 1e-8);
}

#[test]
fn mixed_senses_and_ranges() {
    // min x + y s.t. x + y >= 2, x - y = 0.5, y <= 4.
    let mut p = lp(2);
    p.set_objective(0, 1.0);
    p.set_objective(1, 1.0);
    p.set_bounds(1, 0.0, 4.0);
    p.add_constraint(&[(0, 1.0), (1, 1.0)], Sense::Ge, 2.0);
    p.add_constraint(&[(0, 1.0), (1, -1.0)], Sense::Eq, 0.5);
    let s = solve_lp(&p).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.objective_value - 2.0).abs() < 1e-8);
    assert!((s.primal[0] - 1.25).abs() < 1e-8);
    assert!((s.primal[1] - 0.75).abs() < 1e-8);
}
