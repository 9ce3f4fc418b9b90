// Monte-Carlo sampling: each sample minimizes a random linear cost over the
// assignment polytope and records the plan with its true objective.
// Output is identical for any worker count.

use std::io::BufReader;

use gapr::enumerate::plan_classes;
use gapr::model::equivalent;
use gapr::problems::{generate_jobprp, JobprpParams};
use gapr::sampler::{collect, Dataset};

pub fn run() -> anyhow::Result<()> {
    let inst = generate_jobprp(&JobprpParams::new(6, 2, 12.0, 5))?;
    let data = collect(&inst, 300, 4, 0)?;
    let serial = collect(&inst, 300, 1, 0)?;

    let mut bytes = Vec::new();
    data.write_jsonl(&mut bytes)?;
    let mut again = Vec::new();
    serial.write_jsonl(&mut again)?;
    anyhow::ensure!(bytes == again, "worker count changed the dataset");

    let back = Dataset::read_jsonl(BufReader::new(&bytes[..]))?;
    back.verify(&inst)?;

    let classes = plan_classes(&inst)?;
    let seen = classes
        .iter()
        .filter(|c| data.plans.iter().any(|p| equivalent(p, c).unwrap_or(false)))
        .count();
    println!(
        "{} samples, {} bytes, min objective {}, {seen}/{} plan classes seen",
        data.len(),
        bytes.len(),
        data.min_value(),
        classes.len()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
