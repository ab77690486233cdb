//! Acceptance criteria 1-12. Prints one PASS/FAIL line per criterion.

use bfstab::validation::{run_criterion, CriterionResult, CRITERIA};

fn check(id: u8) {
    let r: CriterionResult = run_criterion(id);
    println!("{r}");
    assert!(r.passed, "criterion {id} failed: {}", r.detail);
}

#[test]
fn criterion_01_critical_depth() {
    check(1);
}

#[test]
fn criterion_02_coefficient_identity() {
    check(2);
}

#[test]
fn criterion_03_flat_spectrum() {
    check(3);
}

#[test]
fn criterion_04_sylvester_algebra() {
    check(4);
}

#[test]
fn criterion_05_stokes_residual_order() {
    check(5);
}

#[test]
fn criterion_06_coefficient_harmonics() {
    check(6);
}

#[test]
fn criterion_07_kato_structure() {
    check(7);
}

#[test]
fn criterion_08_entry_scaling() {
    check(8);
}

#[test]
fn criterion_09_instability_dichotomy() {
    check(9);
}

#[test]
fn criterion_10_maximal_growth() {
    check(10);
}

#[test]
fn criterion_11_decoupling_pipeline() {
    check(11);
}

#[test]
fn criterion_12_symmetry_suite() {
    check(12);
}

#[test]
fn criteria_table_is_complete() {
    let ids: Vec<u8> = CRITERIA.iter().map(|(i, _)| *i).collect();
    assert_eq!(ids, (1..=12).collect::<Vec<u8>>());
}
