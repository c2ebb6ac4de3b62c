//! Acceptance battery: every contract criterion runs at its stated
//! tolerance and budget, one named check and one pass/fail line each
//! (visible with --nocapture; the test names mirror the criteria).

use l1pred::validate::{self, CheckResult, Tier};

fn assert_check(r: CheckResult, budget_seconds: f64) {
    println!("{}", r.line());
    assert!(r.passed, "{}", r.line());
    assert!(
        r.seconds < budget_seconds,
        "{} exceeded its {budget_seconds}s budget: {:.2}s",
        r.name,
        r.seconds
    );
}

#[test]
fn criterion_01_uniform_d3_exact_risk() {
    assert_check(validate::check_uniform_d3_exact(), 1.0);
}

#[test]
fn criterion_02_normal_closed_forms() {
    let d2 = validate::check_normal_d2_closed_form();
    let table = validate::check_normal_r1_hypergeometric();
    let total = d2.seconds + table.seconds;
    assert_check(d2, 5.0);
    assert_check(table, 5.0);
    assert!(total < 5.0, "criterion 2 exceeded 5s: {total:.2}s");
}

#[test]
fn criterion_03_optimal_expansion_window() {
    assert_check(validate::check_optimal_expansion_window(), 30.0);
}

#[test]
fn criterion_04_restricted_dominance() {
    assert_check(validate::check_restricted_dominance(), 300.0);
}

#[test]
fn criterion_05_risk_curve_crossing() {
    assert_check(validate::check_risk_curve_crossing(), 300.0);
}

#[test]
fn criterion_06_slight_expansion_dominance() {
    assert_check(validate::check_slight_expansion_dominance(), 120.0);
}

#[test]
fn criterion_07_oracle_equivalence() {
    let loss = validate::check_oracle_loss_routes(Tier::Full);
    let risk = validate::check_oracle_risk_routes();
    let total = loss.seconds + risk.seconds;
    assert_check(loss, 600.0);
    assert_check(risk, 600.0);
    assert!(total < 600.0, "criterion 7 exceeded 10min: {total:.2}s");
}

#[test]
fn criterion_08_invariance() {
    assert_check(validate::check_invariance_battery(), 120.0);
}

#[test]
fn criterion_09_uniform_target_optimality() {
    assert_check(validate::check_uniform_target_optimality(), 120.0);
}

#[test]
fn criterion_10_bayes_uniform_median() {
    assert_check(validate::check_bayes_uniform_median(), 60.0);
}

#[test]
fn criterion_11_special_function_suite() {
    assert_check(validate::check_special_function_identities(), 1.0);
}

#[test]
fn figure_shapes_hold() {
    // Figure 1's ratio bound is asserted inside criterion 9; Figure 2 and
    // Figure 3 shapes get their own checks.
    assert_check(validate::check_stable_optimal_expansion(), 60.0);
    assert_check(validate::check_figure3_ordering(), 120.0);
    assert_check(validate::check_central_scale_symmetry(), 30.0);
}
