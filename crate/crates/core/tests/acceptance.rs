//! One test per acceptance criterion; each prints a PASS/FAIL line plus details.

use pilotsim::scenario::builtin_747;
use pilotsim::verify::{run_check, CheckReport, VerifyOptions};
use std::io::Write;

fn check(name: &str) -> CheckReport {
    let report = run_check(name, &builtin_747(), &VerifyOptions::default()).expect("known check");
    // Straight to stderr so the summary line shows even when output is captured.
    let line = format!(
        "acceptance: {} {} ({:.1} s)\n",
        if report.passed() { "PASS" } else { "FAIL" },
        report.name,
        report.elapsed.as_secs_f64()
    );
    std::io::stderr().write_all(line.as_bytes()).ok();
    println!("{report}");
    report
}

fn assert_passed(report: &CheckReport) {
    let failed: Vec<_> = report
        .subchecks
        .iter()
        .filter(|s| !s.passed)
        .map(|s| format!("{}: {}", s.label, s.detail))
        .collect();
    assert!(report.passed(), "{} failed:\n  {}", report.name, failed.join("\n  "));
}

#[test]
fn eigenvalue_regression() {
    assert_passed(&check("eigenvalues"));
}

#[test]
fn solver_residuals() {
    assert_passed(&check("solvers"));
}

#[test]
fn design_identities() {
    assert_passed(&check("design-identities"));
}

#[test]
fn inner_loop_convergence() {
    assert_passed(&check("inner-convergence"));
}

#[test]
fn predictor_oracle() {
    assert_passed(&check("predictor"));
}

#[test]
fn transition_matrix_properties() {
    assert_passed(&check("transition-matrix"));
}

#[test]
fn boundedness_invariants() {
    assert_passed(&check("boundedness"));
}

#[test]
fn learning_rate_comparison() {
    assert_passed(&check("figures"));
}

#[test]
fn determinism() {
    assert_passed(&check("determinism"));
}

#[test]
fn delay_sweep_trend() {
    assert_passed(&check("sweep-trend"));
}
