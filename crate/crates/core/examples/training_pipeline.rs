// Sampling followed by greedy training on a 10-order picking instance,
// compared against the best sample and the enumerated optimum.

use gapr::enumerate::brute_optimum;
use gapr::problems::{generate_jobprp, JobprpParams, WarehouseLayout};
use gapr::trainer::{pipeline, PipelineSeeds, TrainConfig};

pub fn run() -> anyhow::Result<()> {
    let mut p = JobprpParams::new(10, 2, 12.0, 4);
    p.layout = WarehouseLayout::new(3, 4);
    let inst = generate_jobprp(&p)?;

    let seeds = PipelineSeeds { sample_seed: 1004, workers: 4 };
    let (data, report) = pipeline(&inst, 500, &TrainConfig::default(), seeds)?;
    print!("{}", report.iterations_csv());

    let opt = brute_optimum(&inst)?.value;
    let obj = report.plan_objective(&inst)?;
    println!(
        "returned {obj} ({}), min sample {}, optimum {opt}, stop {}",
        if report.fallback { "best sample" } else { "surrogate" },
        data.min_value(),
        report.stop_reason.as_str()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
