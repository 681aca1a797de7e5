//! Harness behavior on degraded predictions: flipped comparison operators
//! produce mismatches, missing predictions count as syntax failures.

mod common;

use std::collections::HashMap;

use qpl_core::harness::{dir_backend_factory, evaluate, load_dataset, Cause};

use common::fixtures_dir;

#[test]
fn flipped_comparison_operators_mismatch() {
    let load = load_dataset(fixtures_dir().join("dataset.jsonl")).unwrap();
    let factory = dir_backend_factory(fixtures_dir().join("dbs"));

    // Flip the direction of every ordering comparison in the predictions.
    // The interpreter confirms the flips change results on the fixture
    // data (e.g. "opened after 2010" becomes "opened before 2010").
    let flipped: HashMap<String, String> = load
        .records
        .iter()
        .map(|r| {
            let mutated = r
                .gold_qpl
                .replace(" > ", " \u{0} ")
                .replace(" < ", " > ")
                .replace(" \u{0} ", " < ")
                .replace(" = '", " <> '");
            (r.id.clone(), mutated)
        })
        .collect();
    let flipped_count = load
        .records
        .iter()
        .filter(|r| flipped[&r.id] != r.gold_qpl)
        .count();
    assert!(flipped_count >= 5, "fixture has comparisons to flip");

    let report = evaluate(&load.records, &flipped, &factory, 2);
    let accuracy = report.overall.accuracy().unwrap();
    assert!(accuracy < 1.0, "flips must cost accuracy, got {accuracy}");

    let mismatches = report
        .outcomes
        .iter()
        .filter(|o| o.cause == Cause::Mismatch)
        .count();
    let other_failures = report
        .outcomes
        .iter()
        .filter(|o| !o.matched && o.cause != Cause::Mismatch)
        .count();
    assert!(
        mismatches > other_failures,
        "mismatch causes should dominate: {mismatches} vs {other_failures}"
    );
}

#[test]
fn missing_predictions_count_as_syntax_failures() {
    let load = load_dataset(fixtures_dir().join("dataset.jsonl")).unwrap();
    let factory = dir_backend_factory(fixtures_dir().join("dbs"));
    let one_missing: HashMap<String, String> = load
        .records
        .iter()
        .skip(1)
        .map(|r| (r.id.clone(), r.gold_qpl.clone()))
        .collect();
    let report = evaluate(&load.records, &one_missing, &factory, 1);
    assert_eq!(report.outcomes[0].cause, Cause::Syntax);
    assert!(!report.outcomes[0].matched);
    let n = load.records.len();
    assert_eq!(report.overall.accuracy(), Some((n - 1) as f64 / n as f64));
}
