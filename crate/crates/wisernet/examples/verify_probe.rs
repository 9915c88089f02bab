fn main() {
    let t0 = std::time::Instant::now();
    let report = wisernet::verify::run_suite(&wisernet::verify::VerifyOptions::default());
    for row in &report.rows {
        println!("{} {} - {}", if row.passed { "PASS" } else { "FAIL" }, row.name, row.detail);
    }
    println!("max grad rel err: {:.3e}", report.max_grad_rel_err);
    println!("elapsed: {:.1}s", t0.elapsed().as_secs_f64());
    std::process::exit(if report.all_passed() { 0 } else { 1 });
}
