//! Command implementations behind the `gapr` binary, plus the instance and
//! run-summary file formats.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | `verify` found a failing check |
//! | 2 | bad flags or unreadable input (unknown suite, empty run directory, ...) |
//! | 3 | `gen` parameters admit no feasible instance |
//! | 4 | `sample` failed |
//! | 5 | digest mismatch between chained artifacts |
//! | 6 | `train` failed |

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::enumerate::{brute_optimum, ENUMERATION_LIMIT};
use crate::mip::Limits;
use crate::model::{f_obj, AssignmentPlan, GaprInstance};
use crate::problems::{generate_cluvrp, generate_jobprp, CluvrpParams, Geometry, JobprpParams, RouteOracle, WarehouseLayout};
use crate::sampler::{collect_with, Dataset, SampleConfig, SampleTiming};
use crate::stats::{chi2_normality, conditional_expectation, fit_bivariate, MIN_NORMALITY_SAMPLES};
use crate::surrogate::{evaluate_L, ModelFile};
use crate::trainer::{train, SurrogateSolve, Timing, TrainConfig, TrainReport};
use crate::verify::{run_suite, SUITES};
use crate::Error;

pub const INSTANCE_FORMAT_VERSION: u32 = 1;
pub const SUMMARY_FORMAT_VERSION: u32 = 1;
pub const WORKERS_ENV: &str = "GAPR_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_SAMPLER: i32 = 4;
pub const EXIT_DIGEST: i32 = 5;
pub const EXIT_TRAIN: i32 = 6;

/// A failed command: the message for stderr and the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    fn usage(e: impl std::fmt::Display) -> Self {
        Self::new(EXIT_USAGE, e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Digest mismatches keep their own exit code wherever they surface.
fn classify(e: Error, code: i32) -> CliError {
    match e {
        Error::DigestMismatch { .. } => CliError::new(EXIT_DIGEST, e.to_string()),
        e => CliError::new(code, e.to_string()),
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "gapr", version, about = "Learned set-indicator surrogates for assignment problems with routing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Draw a dataset of sampled plans.
    Sample(SampleArgs),
    /// Train a surrogate on a dataset and solve it.
    Train(TrainArgs),
    /// Run the built-in self-checks.
    Verify(VerifyArgs),
    /// Tabulate finished training runs.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Jobprp,
    Cluvrp,
    Custom,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "jobprp")]
    pub family: Family,
    /// Orders (jobprp) or clusters (cluvrp).
    #[arg(long, alias = "orders", alias = "clusters")]
    pub tasks: usize,
    #[arg(long)]
    pub agents: usize,
    /// Per-agent capacity; omit for none.
    #[arg(long)]
    pub capacity: Option<f64>,
    /// Customers scattered over the clusters (cluvrp; default 4 per cluster).
    #[arg(long)]
    pub customers: Option<usize>,
    #[arg(long, default_value_t = 4)]
    pub aisles: usize,
    #[arg(long, default_value_t = 5)]
    pub blocks: usize,
    #[arg(long, default_value_t = 1)]
    pub min_items: usize,
    #[arg(long, default_value_t = 3)]
    pub max_items: usize,
    /// Require every agent to take at least one task.
    #[arg(long)]
    pub nonempty: bool,
    #[arg(long, default_value_t = crate::problems::routing::DEFAULT_HK_THRESHOLD)]
    pub hk_threshold: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub n: usize,
    /// Worker threads; defaults to $GAPR_WORKERS, then the core count.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-sample solver time limit in seconds.
    #[arg(long, default_value_t = 5.0)]
    pub time_limit: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub theta: f64,
    #[arg(long, default_value_t = 3)]
    pub pi_card: usize,
    #[arg(long, default_value_t = 5)]
    pub pi_limit: usize,
    #[arg(long, default_value_t = 0.5)]
    pub r_limit: f64,
    /// Time limit per surrogate solve, in seconds.
    #[arg(long, default_value_t = 20.0)]
    pub time_limit: f64,
    /// Wall-clock budget for the whole training loop, in seconds.
    #[arg(long)]
    pub budget: Option<f64>,
    /// Fit without an intercept.
    #[arg(long)]
    pub no_intercept: bool,
    /// Shuffle each cardinality's candidates with this seed.
    #[arg(long)]
    pub shuffle_seed: Option<u64>,
    /// Output directory for model.json, iterations.csv and summary.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// One of table2, prop1, theorem2, theorem3, corollary1, theorem5,
    /// theorem4, bnb, lasso, or all.
    #[arg(long, default_value = "all")]
    pub suite: String,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// A run directory, or a directory of run directories.
    #[arg(long)]
    pub runs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Fill the Opt column by enumeration where the instance is small enough.
    #[arg(long)]
    pub brute_force: bool,
    /// Directory for SVG plots.
    #[arg(long)]
    pub plots: Option<PathBuf>,
}

/// Dispatches a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let res = match cli.command {
        Command::Gen(a) => cmd_gen(&a).map(|_| EXIT_OK),
        Command::Sample(a) => cmd_sample(&a).map(|_| EXIT_OK),
        Command::Train(a) => cmd_train(&a).map(|_| EXIT_OK),
        Command::Verify(a) => cmd_verify(&a),
        Command::Report(a) => cmd_report(&a).map(|_| EXIT_OK),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub count: usize,
    /// `null` for unlimited capacity.
    pub capacity: Option<f64>,
    #[serde(default)]
    pub nonempty: bool,
}

/// Instance on disk. Loading rebuilds and re-validates the instance and, if
/// a digest is recorded, checks it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub format_version: u32,
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tasks: TaskSpec,
    pub agents: AgentSpec,
    pub geometry: Geometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment_cost: Option<Vec<Vec<f64>>>,
    pub hk_threshold: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
}

impl InstanceFile {
    pub fn from_instance(inst: &GaprInstance, family: Family, seed: Option<u64>) -> Self {
        let capacity = inst.capacity();
        Self {
            format_version: INSTANCE_FORMAT_VERSION,
            family,
            seed,
            tasks: TaskSpec { weights: inst.weights().to_vec() },
            agents: AgentSpec {
                count: inst.agent_count(),
                capacity: capacity.is_finite().then_some(capacity),
                nonempty: inst.nonempty_agents(),
            },
            geometry: inst.oracle().geometry().clone(),
            assignment_cost: inst.has_assignment_cost().then(|| inst.assignment_cost_rows()),
            hk_threshold: inst.oracle().hk_threshold(),
            digest: Some(inst.digest()),
        }
    }

    pub fn to_instance(&self) -> crate::Result<GaprInstance> {
        if self.format_version != INSTANCE_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported instance format {}", self.format_version)));
        }
        let oracle = Arc::new(RouteOracle::new(self.geometry.clone(), self.hk_threshold)?);
        let mut inst = GaprInstance::new(
            self.tasks.weights.clone(),
            self.agents.count,
            self.agents.capacity.unwrap_or(f64::INFINITY),
            self.agents.nonempty,
            oracle,
        )?;
        if let Some(rows) = &self.assignment_cost {
            inst = inst.with_assignment_cost(rows)?;
        }
        if let Some(d) = &self.digest {
            if *d != inst.digest() {
                return Err(Error::DigestMismatch { expected: d.clone(), found: inst.digest() });
            }
        }
        Ok(inst)
    }

    pub fn read(path: &Path) -> crate::Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    pub fn write(&self, path: &Path) -> crate::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

pub fn load_instance(path: &Path) -> CliResult<GaprInstance> {
    InstanceFile::read(path)
        .and_then(|f| f.to_instance())
        .map_err(|e| classify(e, EXIT_USAGE))
        .map_err(|e| CliError::new(e.code, format!("{}: {e}", path.display())))
}

pub fn timing_path(dataset: &Path) -> PathBuf {
    let mut name = dataset.as_os_str().to_owned();
    name.push(".timing.json");
    PathBuf::from(name)
}

/// Reads a dataset and, when present, its timing sidecar.
pub fn load_dataset(path: &Path) -> CliResult<Dataset> {
    let file = File::open(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let mut data =
        Dataset::read_jsonl(BufReader::new(file)).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    if let Ok(text) = fs::read_to_string(timing_path(path)) {
        data.timing = serde_json::from_str::<SampleTiming>(&text).map_err(CliError::usage)?;
    }
    Ok(data)
}

fn check_digest(expected: &str, found: &str, what: &str) -> CliResult<()> {
    if expected == found {
        Ok(())
    } else {
        Err(CliError::new(EXIT_DIGEST, format!("{what} was built for instance {found}, expected {expected}")))
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::usage(format!("{}: {e}", path.display()))
}

pub fn cmd_gen(a: &GenArgs) -> CliResult<InstanceFile> {
    if a.tasks == 0 || a.agents == 0 {
        return Err(CliError::usage("--tasks and --agents must be positive"));
    }
    if a.capacity.is_some_and(|q| !(q > 0.0)) {
        return Err(CliError::usage("--capacity must be positive"));
    }
    let capacity = a.capacity.unwrap_or(f64::INFINITY);
    let generated = match a.family {
        Family::Jobprp => {
            let mut p = JobprpParams::new(a.tasks, a.agents, capacity, a.seed);
            p.layout = WarehouseLayout::new(a.aisles, a.blocks);
            p.min_items = a.min_items;
            p.max_items = a.max_items;
            p.hk_threshold = a.hk_threshold;
            generate_jobprp(&p)
        }
        Family::Cluvrp => {
            let mut p = CluvrpParams::new(a.tasks, a.customers.unwrap_or(4 * a.tasks), a.agents, capacity, a.seed);
            p.hk_threshold = a.hk_threshold;
            generate_cluvrp(&p)
        }
        Family::Custom => return Err(CliError::usage("custom instances are written by hand, not generated")),
    };
    let mut inst = generated.map_err(|e| CliError::new(EXIT_INFEASIBLE, format!("infeasible parameters: {e}")))?;
    if a.nonempty {
        inst = GaprInstance::new(inst.weights().to_vec(), a.agents, inst.capacity(), true, inst.oracle().clone())
            .map_err(|e| CliError::new(EXIT_INFEASIBLE, format!("infeasible parameters: {e}")))?;
    }
    let file = InstanceFile::from_instance(&inst, a.family, Some(a.seed));
    file.write(&a.out).map_err(CliError::usage)?;
    println!("wrote {} ({} tasks, {} agents, digest {})", a.out.display(), inst.task_count(), inst.agent_count(), inst.digest());
    Ok(file)
}

/// Worker count: explicit flag, then the environment, then the core count.
pub fn default_workers(flag: Option<usize>) -> CliResult<usize> {
    if let Some(w) = flag {
        return Ok(w);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::usage(format!("{WORKERS_ENV}={v} is not a count"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn cmd_sample(a: &SampleArgs) -> CliResult<Dataset> {
    let inst = load_instance(&a.instance)?;
    let workers = default_workers(a.workers)?;
    if a.n == 0 || workers == 0 {
        return Err(CliError::usage("--n and --workers must be positive"));
    }
    let cfg = SampleConfig { time_limit_s: a.time_limit };
    let data = collect_with(&inst, a.n, workers, a.seed, &cfg).map_err(|e| CliError::new(EXIT_SAMPLER, e.to_string()))?;
    let out = File::create(&a.out).map_err(io_err(&a.out))?;
    let mut w = BufWriter::new(out);
    data.write_jsonl(&mut w).map_err(CliError::usage)?;
    w.flush().map_err(io_err(&a.out))?;
    let side = timing_path(&a.out);
    fs::write(&side, serde_json::to_string_pretty(&data.timing).map_err(CliError::usage)? + "\n").map_err(io_err(&side))?;
    println!(
        "wrote {} records to {} (min {}, {} hit the time limit)",
        data.len(),
        a.out.display(),
        data.min_value(),
        data.meta.limited_count
    );
    Ok(data)
}

/// Everything `report` needs from a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub format_version: u32,
    pub instance: PathBuf,
    pub dataset: PathBuf,
    pub instance_digest: String,
    pub tasks: usize,
    pub agents: usize,
    pub samples: usize,
    /// True objective of the returned plan.
    pub objective: f64,
    /// Best surrogate-plan objective; absent when no surrogate was solved.
    pub surrogate_objective: Option<f64>,
    pub fallback: bool,
    pub stop_reason: String,
    pub plan: Vec<Vec<usize>>,
    pub sample_min: f64,
    pub best_solve: Option<SurrogateSolve>,
    pub model_terms: usize,
    pub iteration_z: Vec<Option<f64>>,
    pub timing: Timing,
    pub config: TrainConfig,
}

impl RunSummary {
    pub fn read(path: &Path) -> CliResult<Self> {
        let file = File::open(path).map_err(io_err(path))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }
}

fn absolute(p: &Path) -> PathBuf {
    fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

pub fn train_config(a: &TrainArgs) -> TrainConfig {
    TrainConfig {
        theta: a.theta,
        pi_card: a.pi_card,
        pi_limit: a.pi_limit,
        r_limit: a.r_limit,
        intercept: !a.no_intercept,
        shuffle_seed: a.shuffle_seed,
        surrogate_limits: Limits::with_time(a.time_limit),
        time_budget_s: a.budget,
        ..TrainConfig::default()
    }
}

pub fn cmd_train(a: &TrainArgs) -> CliResult<(TrainReport, RunSummary)> {
    let inst = load_instance(&a.instance)?;
    let data = load_dataset(&a.dataset)?;
    check_digest(&inst.digest(), &data.meta.instance_digest, "dataset")?;
    let cfg = train_config(a);
    cfg.validate().map_err(CliError::usage)?;
    let report = train(&inst, &data, &cfg).map_err(|e| classify(e, EXIT_TRAIN))?;

    fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let model_path = a.out.join("model.json");
    if let Some(model) = &report.best_model {
        let mut file = ModelFile::from_model(model, &inst);
        file.metadata.insert("stop_reason".into(), report.stop_reason.as_str().into());
        file.metadata.insert("surrogate_objective".into(), report.best_objective.into());
        let out = File::create(&model_path).map_err(io_err(&model_path))?;
        file.write(BufWriter::new(out)).map_err(CliError::usage)?;
    } else if model_path.exists() {
        fs::remove_file(&model_path).map_err(io_err(&model_path))?;
    }
    let csv_path = a.out.join("iterations.csv");
    fs::write(&csv_path, report.iterations_csv()).map_err(io_err(&csv_path))?;

    let objective = report.plan_objective(&inst).map_err(|e| classify(e, EXIT_TRAIN))?;
    let best_solve = report
        .iterations
        .iter()
        .find(|it| it.z == Some(report.best_objective))
        .and_then(|it| it.surrogate.clone());
    let summary = RunSummary {
        format_version: SUMMARY_FORMAT_VERSION,
        instance: absolute(&a.instance),
        dataset: absolute(&a.dataset),
        instance_digest: inst.digest(),
        tasks: inst.task_count(),
        agents: inst.agent_count(),
        samples: data.len(),
        objective,
        surrogate_objective: report.best_objective.is_finite().then_some(report.best_objective),
        fallback: report.fallback,
        stop_reason: report.stop_reason.as_str().into(),
        plan: report.best_plan.to_lists(),
        sample_min: report.sample_min,
        best_solve,
        model_terms: report.best_model.as_ref().map_or(0, |m| m.len()),
        iteration_z: report.iterations.iter().map(|it| it.z).collect(),
        timing: report.timing.clone(),
        config: cfg,
    };
    let summary_path = a.out.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary).map_err(CliError::usage)? + "\n")
        .map_err(io_err(&summary_path))?;
    println!(
        "objective {objective} ({}), min sample {}, stop: {}, {} iterations",
        if report.fallback { "best sample" } else { "surrogate plan" },
        report.sample_min,
        report.stop_reason.as_str(),
        report.iterations.len()
    );
    Ok((report, summary))
}

/// Runs one suite or all of them, printing a line per check.
pub fn cmd_verify(a: &VerifyArgs) -> CliResult<i32> {
    let names: Vec<&str> = if a.suite == "all" { SUITES.to_vec() } else { vec![a.suite.as_str()] };
    let mut failed = 0;
    for name in names {
        let report = run_suite(name)
            .map_err(|e| CliError::new(EXIT_CHECK_FAILED, format!("{name}: {e}")))?
            .ok_or_else(|| CliError::usage(format!("unknown suite {name:?}; known: all, {}", SUITES.join(", "))))?;
        println!("{report}");
        failed += usize::from(!report.passed());
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub run: String,
    pub instance_digest: String,
    #[serde(rename = "I")]
    pub tasks: usize,
    #[serde(rename = "J")]
    pub agents: usize,
    #[serde(rename = "Obj")]
    pub obj: f64,
    #[serde(rename = "Nodes")]
    pub nodes: Option<usize>,
    #[serde(rename = "Rows")]
    pub rows: Option<usize>,
    #[serde(rename = "Cols")]
    pub cols: Option<usize>,
    #[serde(rename = "Gap")]
    pub gap: Option<f64>,
    #[serde(rename = "Time_MIP")]
    pub time_mip: Option<f64>,
    #[serde(rename = "Time_Total")]
    pub time_total: f64,
    #[serde(rename = "Min(sample)")]
    pub min_sample: f64,
    #[serde(rename = "Opt")]
    pub opt: Option<f64>,
    #[serde(rename = "Obj/Min(sample)")]
    pub obj_over_min_sample: f64,
    #[serde(rename = "Obj/Opt")]
    pub obj_over_opt: Option<f64>,
    pub fallback: bool,
    pub stop_reason: String,
    /// Correlation between sampled objectives and their surrogate values.
    pub rho: Option<f64>,
    /// Conditional expectation of the objective at the returned plan's surrogate value.
    pub expected_obj: Option<f64>,
    pub deviation: Option<f64>,
    pub normality_p: Option<f64>,
}

fn run_dirs(root: &Path) -> CliResult<Vec<PathBuf>> {
    if root.join("summary.json").is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(io_err(root))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("summary.json").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::usage(format!("no completed runs under {}", root.display())));
    }
    Ok(dirs)
}

/// Builds the report row for one run directory, refusing artifacts that
/// belong to different instances.
pub fn report_row(dir: &Path, brute_force: bool) -> CliResult<(ReportRow, Dataset)> {
    let s = RunSummary::read(&dir.join("summary.json"))?;
    let inst = load_instance(&s.instance)?;
    check_digest(&s.instance_digest, &inst.digest(), "instance")?;
    let data = load_dataset(&s.dataset)?;
    check_digest(&s.instance_digest, &data.meta.instance_digest, "dataset")?;
    let plan = AssignmentPlan::from_lists(inst.task_count(), &s.plan).map_err(CliError::usage)?;
    let objective = f_obj(&plan, &inst).map_err(CliError::usage)?.total;
    if (objective - s.objective).abs() > 1e-9 * objective.abs().max(1.0) {
        return Err(CliError::usage(format!("{}: recorded objective {} but plan costs {objective}", dir.display(), s.objective)));
    }

    let model_path = dir.join("model.json");
    let model = if model_path.is_file() {
        let file = ModelFile::read(BufReader::new(File::open(&model_path).map_err(io_err(&model_path))?))
            .map_err(CliError::usage)?;
        check_digest(&s.instance_digest, &file.instance_digest, "model")?;
        Some(file.to_model().map_err(CliError::usage)?)
    } else {
        None
    };
    let (mut rho, mut expected_obj, mut deviation) = (None, None, None);
    if let Some(model) = &model {
        let y: Vec<f64> = data.plans.iter().map(|p| evaluate_L(p, model)).collect::<crate::Result<_>>().map_err(CliError::usage)?;
        if let Ok(fit) = fit_bivariate(&data.values, &y) {
            let l = evaluate_L(&plan, model).map_err(CliError::usage)?;
            let e = conditional_expectation(&fit, l).map_err(CliError::usage)?;
            rho = Some(fit.rho);
            expected_obj = Some(e);
            deviation = Some(objective - e);
        }
    }
    let normality_p = (data.len() >= MIN_NORMALITY_SAMPLES)
        .then(|| chi2_normality(&data.values, None).ok().map(|r| r.p_value))
        .flatten();

    let enumerable = (inst.agent_count() as u64)
        .checked_pow(inst.task_count() as u32)
        .is_some_and(|n| n <= ENUMERATION_LIMIT);
    let opt = if brute_force && enumerable {
        Some(brute_optimum(&inst).map_err(CliError::usage)?.value)
    } else {
        None
    };
    let min_sample = data.min_value();
    let solve = s.best_solve.as_ref();
    let row = ReportRow {
        run: dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned()),
        instance_digest: s.instance_digest.clone(),
        tasks: s.tasks,
        agents: s.agents,
        obj: objective,
        nodes: solve.map(|x| x.nodes),
        rows: solve.map(|x| x.rows),
        cols: solve.map(|x| x.cols),
        gap: solve.map(|x| x.gap),
        time_mip: solve.map(|x| x.seconds),
        time_total: s.timing.total_seconds,
        min_sample,
        opt,
        obj_over_min_sample: objective / min_sample,
        obj_over_opt: opt.map(|o| objective / o),
        fallback: s.fallback,
        stop_reason: s.stop_reason.clone(),
        rho,
        expected_obj,
        deviation,
        normality_p,
    };
    Ok((row, data))
}

pub fn cmd_report(a: &ReportArgs) -> CliResult<Vec<ReportRow>> {
    let dirs = run_dirs(&a.runs)?;
    let mut rows = Vec::with_capacity(dirs.len());
    let mut w = csv::Writer::from_path(&a.out).map_err(CliError::usage)?;
    for dir in &dirs {
        let (row, data) = report_row(dir, a.brute_force)?;
        if let Some(plot_dir) = &a.plots {
            let summary = RunSummary::read(&dir.join("summary.json"))?;
            crate::plots::write_run_plots(plot_dir, &row, &data, &summary.iteration_z).map_err(CliError::usage)?;
        }
        w.serialize(&row).map_err(CliError::usage)?;
        rows.push(row);
    }
    w.flush().map_err(io_err(&a.out))?;
    println!("wrote {} rows to {}", rows.len(), a.out.display());
    Ok(rows)
}
