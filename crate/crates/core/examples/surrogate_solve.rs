// A set-indicator surrogate seeded with the blocks of the best plan: its
// binary program, its solution and the closed-form surrogate value.

use gapr::enumerate::brute_optimum;
use gapr::mip::Limits;
use gapr::model::{equivalent, f_obj};
use gapr::surrogate::{compile, evaluate_L, evaluate_L_by_mip, solve_surrogate, SetIndicatorModel};
use gapr::verify::busy_instance;

pub fn run() -> anyhow::Result<()> {
    let inst = busy_instance(5, 2, 21)?;
    let best = brute_optimum(&inst)?;
    let blocks = best.plan.subsets().iter().filter(|s| !s.is_empty()).cloned().collect();
    let model = SetIndicatorModel::unit(blocks)?;

    let prog = compile(&model, &inst)?;
    println!("surrogate: {} rows, {} columns", prog.rows(), prog.cols());
    let (plan, res) = solve_surrogate(&model, &inst, &Limits::default())?;
    println!(
        "solved {:?} in {} nodes: plan {:?}, L = {}, f = {}",
        res.status,
        res.nodes,
        plan.to_lists(),
        res.objective,
        f_obj(&plan, &inst)?.total
    );
    println!("enumerated optimum {:?}, f = {}", best.plan.to_lists(), best.value);

    anyhow::ensure!(equivalent(&plan, &best.plan)?);
    let closed = evaluate_L(&plan, &model)?;
    anyhow::ensure!((closed - evaluate_L_by_mip(&plan, &model, &inst)?).abs() < 1e-9);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
