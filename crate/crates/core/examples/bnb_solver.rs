// The embedded branch-and-bound solver on a small assignment program with
// knapsack rows, checked against enumeration.

use gapr::mip::{bnb_solve, BinaryProgram, Limits, MipStatus, Sense};
use gapr::verify::enumerate_program;

pub fn run() -> anyhow::Result<()> {
    // Four tasks, two agents; x[2i + j] assigns task i to agent j.
    let cost = [[4.0, 6.0], [5.0, 3.0], [7.0, 2.0], [3.0, 3.0]];
    let weight = [2.0, 3.0, 4.0, 1.0];
    let mut p = BinaryProgram::new(8);
    for (i, row) in cost.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            p.set_objective(2 * i + j, c);
        }
        p.add_constraint(vec![(2 * i, 1.0), (2 * i + 1, 1.0)], Sense::Eq, 1.0)?;
    }
    for j in 0..2 {
        let row = (0..4).map(|i| (2 * i + j, weight[i])).collect();
        p.add_constraint(row, Sense::Le, 5.0)?;
    }
    print!("{}", p.to_lp_string());

    let res = bnb_solve(&p, &Limits::default())?;
    let brute = enumerate_program(&p).expect("feasible");
    println!("status {:?}, objective {}, nodes {}, enumeration {brute}", res.status, res.objective, res.nodes);
    anyhow::ensure!(res.status == MipStatus::Optimal && (res.objective - brute).abs() < 1e-9);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
