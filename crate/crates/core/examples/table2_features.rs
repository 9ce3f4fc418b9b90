// Feature matrix of the three-task example: each entry counts how many
// agents touch a subset under a plan.

use gapr::learning::build_features;
use gapr::verify::{example1, TABLE2};

pub fn run() -> anyhow::Result<()> {
    let (plans, subsets) = example1();
    let a = build_features(&plans, &subsets)?;
    print!("{}", a.to_csv());

    for (i, row) in TABLE2.iter().enumerate() {
        anyhow::ensure!(a.row(i) == row, "row {i} differs: {:?}", a.row(i));
    }
    // The pair columns alone.
    let pairs = a.select(&[3, 4, 5]);
    println!("pairs only: {:?}", pairs.to_rows());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
