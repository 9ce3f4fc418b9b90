// Lasso on g-count features: the BIC path over γ and the selected fit for a
// target planted on two pairs of tasks. With two agents the pair columns are
// linearly independent; mixing in triples would not be (each triple's count
// is an affine combination of its three pairs).

use gapr::bitset::TaskSubset;
use gapr::learning::{build_features, gamma_select_with, lasso_fit_with, lasso_path, SubsetCatalog};
use gapr::model::{g_count, GaprInstance};
use gapr::sampler::collect;

pub fn run() -> anyhow::Result<()> {
    let inst = GaprInstance::without_routing(vec![1.0; 6], 2, 4.0, false)?;
    let data = collect(&inst, 120, 2, 9)?;
    let planted = [TaskSubset::from_ids(6, [0, 1]), TaskSubset::from_ids(6, [2, 4])];
    let b: Vec<f64> = data
        .plans
        .iter()
        .map(|p| 3.0 * g_count(p, &planted[0]).unwrap() as f64 + 5.0 * g_count(p, &planted[1]).unwrap() as f64)
        .collect();

    let cat = SubsetCatalog::new(6);
    let h = cat.subsets(2)?;
    let a = build_features(&data.plans, &h)?;

    for pt in lasso_path(&a, &b, true)?.iter().step_by(7) {
        println!("gamma {:>10.4}  df {:>2}  rss {:>10.3}  bic {:>9.2}", pt.gamma, pt.df, pt.rss, pt.bic);
    }
    let gamma = gamma_select_with(&a, &b, true)?;
    let fit = lasso_fit_with(&a, &b, gamma, true)?;
    println!("selected gamma {gamma:.4}, R² {:.4}, {} sweeps", fit.r2, fit.sweeps);
    for j in fit.support() {
        println!("  {:<8} {:+.3}", h[j].label(), fit.beta[j]);
    }
    anyhow::ensure!(fit.r2 > 0.99 && fit.converged);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
