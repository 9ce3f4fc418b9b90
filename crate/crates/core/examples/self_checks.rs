// The built-in verification suites (`gapr verify`), run as a library.

use gapr::verify::{bnb, lasso, run_suite, table2, theorem2, theorem3, theorem4, theorem5};

pub fn run() -> anyhow::Result<()> {
    // Reduced sizes; `run_suite(name)` uses the full ones.
    let reports = [table2()?, theorem2(40, 1)?, theorem3(10, 10, 20, 1)?, theorem5(10, 1)?, theorem4(100_000, 1)?, bnb(20, 1)?, lasso(10, 1)?];
    for r in &reports {
        println!("{r}");
    }
    anyhow::ensure!(reports.iter().all(|r| r.passed()));
    anyhow::ensure!(run_suite("no-such-suite")?.is_none());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
