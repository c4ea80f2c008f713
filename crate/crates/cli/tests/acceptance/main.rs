//! The acceptance battery, one test per criterion each printing its matrix
//! line, plus the pipeline contract checks.

use std::io::Write;

mod pipeline;

use kinrep_cli::suite::run_criterion;

fn criterion(id: usize) {
    let r = run_criterion(id, 0);
    // written to the process stdout directly so the line shows even when the test passes
    let _ = writeln!(std::io::stdout().lock(), "{}", r.line());
    assert!(r.pass, "{}", r.line());
}

#[test]
fn criterion_01_transport_exactness() {
    criterion(1);
}

#[test]
fn criterion_02_shock_dissipation() {
    criterion(2);
}

#[test]
fn criterion_03_scheme_inequalities() {
    criterion(3);
}

#[test]
fn criterion_04_pushforward_convergence() {
    criterion(4);
}

#[test]
fn criterion_05_weak_estimate() {
    criterion(5);
}

#[test]
fn criterion_06_basis_selection() {
    criterion(6);
}

#[test]
fn criterion_07_glued_example() {
    criterion(7);
}

#[test]
fn criterion_08_dissipation_cylinder() {
    criterion(8);
}

#[test]
fn criterion_09_atomicity() {
    criterion(9);
}

#[test]
fn criterion_10_conservation() {
    criterion(10);
}
