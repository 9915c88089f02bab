use wisernet::verify::{run_suite, VerifyOptions};

/// Run the property suite and print one pass/fail line per row.
/// Returns true when everything passed.
pub fn run(inject_dwt_fault: bool) -> bool {
    let report = run_suite(&VerifyOptions { inject_dwt_fault });
    for row in &report.rows {
        let status = if row.passed { "PASS" } else { "FAIL" };
        println!("{status}  {:<24} {}", row.name, row.detail);
    }
    println!("max gradient-check rel err: {:.3e}", report.max_grad_rel_err);
    let ok = report.all_passed();
    println!("verify: {}", if ok { "ALL PASS" } else { "FAILURES PRESENT" });
    ok
}
