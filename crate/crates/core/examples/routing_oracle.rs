// Route costs per task subset. Small node sets are solved exactly by
// Held-Karp; larger ones fall back to a 2-opt tour. Results are cached.

use gapr::bitset::TaskSubset;
use gapr::problems::{generate_jobprp, JobprpParams};

pub fn run() -> anyhow::Result<()> {
    let inst = generate_jobprp(&JobprpParams::new(8, 2, 24.0, 11))?;
    let oracle = inst.oracle();
    let n = inst.task_count();

    for ids in [vec![0], vec![0, 1], vec![0, 1, 2, 3], (0..n).collect::<Vec<_>>()] {
        let tasks = TaskSubset::from_ids(n, ids.iter().copied());
        let route = oracle.route_for_tasks(&tasks)?;
        println!(
            "tasks {:<18} nodes {:>2}  cost {:>6.1}  exact {}",
            tasks.label(),
            oracle.nodes_for_tasks(&tasks)?.len(),
            route.cost,
            route.exact
        );
    }
    // Adding tasks never shortens the tour.
    let small = oracle.route_for_tasks(&TaskSubset::from_ids(n, [0, 1]))?.cost;
    let large = oracle.route_for_tasks(&TaskSubset::from_ids(n, [0, 1, 2]))?.cost;
    anyhow::ensure!(large >= small - 1e-9);
    println!("cache holds {} routes", oracle.cached_entries());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
