//! The full property suite must come up green, and the injected-fault
//! fixture must turn the reconstruction row red.

use wisernet::verify::{run_suite, VerifyOptions};

#[test]
fn suite_passes_clean() {
    let report = run_suite(&VerifyOptions::default());
    for row in &report.rows {
        println!("{} {} - {}", if row.passed { "PASS" } else { "FAIL" }, row.name, row.detail);
    }
    assert!(report.all_passed(), "verify rows failed");
    assert!(report.max_grad_rel_err < 1e-4);
}

#[test]
fn injected_fault_turns_red() {
    let report = run_suite(&VerifyOptions { inject_dwt_fault: true });
    let row = report.rows.iter().find(|r| r.name == "wavelet_round_trip").unwrap();
    assert!(!row.passed);
    assert!(!report.all_passed());
}
