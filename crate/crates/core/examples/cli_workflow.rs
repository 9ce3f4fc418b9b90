// The gen → sample → train → report chain through the library entry points
// the binary uses, in a scratch directory.

use gapr::cli::{cmd_gen, cmd_report, cmd_sample, cmd_train, Cli, Command, ReportArgs};
use clap::Parser;

pub fn run() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let path = |name: &str| dir.path().join(name).display().to_string();
    let parse = |args: &[&str]| Cli::try_parse_from(std::iter::once("gapr").chain(args.iter().copied()));

    let inst = path("inst.json");
    let data = path("data.jsonl");
    let runs = path("runs");
    let steps = [
        vec!["gen", "--family", "jobprp", "--orders", "8", "--agents", "2", "--capacity", "12", "--aisles", "3", "--blocks", "4", "--seed", "3", "--out", &inst],
        vec!["sample", "--instance", &inst, "--n", "200", "--workers", "2", "--seed", "1", "--out", &data],
    ];
    for args in &steps {
        match parse(args)?.command {
            Command::Gen(a) => drop(cmd_gen(&a)?),
            Command::Sample(a) => drop(cmd_sample(&a)?),
            _ => unreachable!(),
        }
    }
    let run_dir = format!("{runs}/default");
    if let Command::Train(a) = parse(&["train", "--instance", &inst, "--dataset", &data, "--out", &run_dir])?.command {
        cmd_train(&a)?;
    }
    let rows = cmd_report(&ReportArgs {
        runs: runs.into(),
        out: dir.path().join("report.csv"),
        brute_force: true,
        plots: None,
    })?;
    print!("{}", std::fs::read_to_string(dir.path().join("report.csv"))?);
    anyhow::ensure!(rows.len() == 1 && rows[0].obj_over_opt.is_some_and(|r| r >= 1.0 - 1e-9));
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
