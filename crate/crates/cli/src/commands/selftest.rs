use anyhow::Result;

pub fn run() -> Result<i32> {
    let results = sparse_pce::selftest::run_all();
    let mut failures = 0;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status}  {:<32} {}", r.name, r.detail);
        if !r.passed {
            failures += 1;
        }
    }
    if failures > 0 {
        eprintln!("{failures} of {} self-checks failed", results.len());
        Ok(1)
    } else {
        println!("all {} self-checks passed", results.len());
        Ok(0)
    }
}
