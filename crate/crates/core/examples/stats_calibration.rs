// How well the surrogate value predicts the true objective: bivariate fit
// over the samples, the conditional estimate and upper bound at the
// returned plan, a normality check and the least-squares residual bound.

use gapr::learning::build_features;
use gapr::problems::{generate_jobprp, JobprpParams, WarehouseLayout};
use gapr::stats::{chi2_normality, conditional_expectation, conditional_upper_bound, fit_bivariate, theorem5_check};
use gapr::surrogate::evaluate_L;
use gapr::trainer::{pipeline, PipelineSeeds, TrainConfig};

pub fn run() -> anyhow::Result<()> {
    let mut p = JobprpParams::new(9, 2, 12.0, 2);
    p.layout = WarehouseLayout::new(3, 4);
    let inst = generate_jobprp(&p)?;
    let (data, report) = pipeline(&inst, 400, &TrainConfig::default(), PipelineSeeds { sample_seed: 7, workers: 4 })?;
    let Some(model) = &report.best_model else {
        println!("no surrogate passed the R² gate; nothing to calibrate");
        return Ok(());
    };

    let l: Vec<f64> = data.plans.iter().map(|s| evaluate_L(s, model)).collect::<Result<_, _>>()?;
    let fit = fit_bivariate(&data.values, &l)?;
    let y_hat = evaluate_L(&report.best_plan, model)?;
    let expected = conditional_expectation(&fit, y_hat)?;
    let bound = conditional_upper_bound(&fit, y_hat, 0.05)?;
    println!("rho {:.3}; at L = {y_hat:.3}: E[f] = {expected:.2}, 95% bound {bound:.2}, actual {}", fit.rho, report.best_objective);

    let normal = chi2_normality(&data.values, None)?;
    println!("sample objectives: chi² {:.1} on {} dof, p = {:.3e}", normal.statistic, normal.dof, normal.p_value);

    let a = build_features(&data.plans, model.subsets())?;
    let check = theorem5_check(&a, &data.values)?;
    println!(
        "normalized residual {:.4} <= sqrt(lambda_max) {:.4}: {} (rank {})",
        check.residual, check.bound, check.holds, check.rank
    );
    anyhow::ensure!(check.holds);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
