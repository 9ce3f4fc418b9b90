// Generates one instance of each family, writes it in the on-disk format
// and reads it back.

use gapr::cli::{Family, InstanceFile};
use gapr::problems::{generate_cluvrp, generate_jobprp, CluvrpParams, JobprpParams};

pub fn run() -> anyhow::Result<()> {
    let jobprp = generate_jobprp(&JobprpParams::new(8, 2, 10.0, 3))?;
    let cluvrp = generate_cluvrp(&CluvrpParams::new(6, 24, 2, 60.0, 3))?;

    let dir = tempfile::tempdir()?;
    for (name, inst, family) in [("jobprp", &jobprp, Family::Jobprp), ("cluvrp", &cluvrp, Family::Cluvrp)] {
        let path = dir.path().join(format!("{name}.json"));
        InstanceFile::from_instance(inst, family, Some(3)).write(&path)?;
        let back = InstanceFile::read(&path)?.to_instance()?;
        anyhow::ensure!(back.digest() == inst.digest());
        println!(
            "{name}: {} tasks, {} agents, weights {:?}, digest {}",
            inst.task_count(),
            inst.agent_count(),
            inst.weights(),
            &inst.digest()[..12]
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
