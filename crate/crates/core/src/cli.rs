//! `absf-sim` command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::deployment::{advance_step_with, generate_scenario, Scenario};
use crate::harness::{self, DropAnalysis, Scheme, CSV_FILES, SUMMARY_FILE};
use crate::propagation::{femto_pathloss, macro_pathloss, ShadowingField};
use crate::units::linear_to_db;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "absf-sim", version, about = "Macro/femto ABSF muting simulator")]
pub struct Cli {
    /// TOML config file; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override a config key, e.g. `--set muting.engine=least_norm`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Master seed.
    #[arg(long, global = true, env = "ABSF_SIM_SEED")]
    pub seed: Option<u64>,
    /// Number of Monte-Carlo runs.
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    /// Number of displacement steps after the initial drop.
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte-Carlo experiment and write CSVs plus a summary.
    Run(RunArgs),
    /// Victims, muted rates and coalitions of one drop.
    Inspect(DropArgs),
    /// Per-MUE SINR table of one drop as CSV.
    Sinr(DropArgs),
    /// Per-step muted-rate table of one run as CSV.
    Rates(RunIndexArgs),
    /// Coalitions of every step of one run.
    Coalitions(RunIndexArgs),
    /// Node positions of one drop in the scenario text format.
    Scenario(DropArgs),
    /// Path-loss table over distance as CSV.
    Pathloss(PathlossArgs),
    /// Parse and validate the configuration, then print it.
    Validate,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Output directory (created if absent).
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Comma-separated schemes: proposed, none, fixed:<rate>.
    #[arg(long, default_value = "proposed,fixed:0.1,fixed:0.2,fixed:0.3,none")]
    pub schemes: String,
    /// Worker threads; defaults to the number of processors.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Replace results already present in the output directory.
    #[arg(long)]
    pub overwrite: bool,
    /// Suppress the progress counter.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct DropArgs {
    #[arg(long, default_value_t = 0)]
    pub run: usize,
    #[arg(long, default_value_t = 0)]
    pub step: usize,
    /// Read the drop from a scenario file instead of generating it.
    #[arg(long, value_name = "PATH")]
    pub scenario: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunIndexArgs {
    #[arg(long, default_value_t = 0)]
    pub run: usize,
}

#[derive(Debug, Args)]
pub struct PathlossArgs {
    #[arg(long, default_value_t = 1.0)]
    pub from: f64,
    #[arg(long, default_value_t = 500.0)]
    pub to: f64,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
}

/// Record of one `run` invocation, written next to the results.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_path: Option<String>,
    pub output_dir: String,
    pub schemes: Vec<String>,
    pub seed: u64,
    pub timestamp_unix: u64,
    pub version: String,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Parse `args` (including the program name) and execute. Returns the exit
/// code; normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path, &cli.overrides),
        None => ScenarioConfig::from_toml_with_overrides("", &cli.overrides),
    }
    .map_err(|e| Failure::usage(e.to_string()))?;
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    if let Some(runs) = cli.runs {
        cfg.num_runs = runs;
    }
    if let Some(steps) = cli.steps {
        cfg.num_steps = steps;
    }
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(cfg)
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let cfg = load_config(cli)?;
    let text = match &cli.command {
        Command::Run(args) => return cmd_run(cli, &cfg, args, out, err),
        Command::Validate => cfg.to_toml_string(),
        Command::Pathloss(args) => pathloss_table(&cfg, args)?,
        Command::Scenario(args) => load_drop(&cfg, args)?.0.to_text(),
        Command::Inspect(args) => {
            let (scenario, shadowing) = load_drop(&cfg, args)?;
            inspect_report(&scenario, &shadowing)?
        }
        Command::Sinr(args) => {
            let (scenario, shadowing) = load_drop(&cfg, args)?;
            sinr_table(&scenario, &shadowing)?
        }
        Command::Rates(args) => rates_table(&cfg, args.run)?,
        Command::Coalitions(args) => coalition_dump(&cfg, args.run)?,
    };
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::runtime(format!("cannot write output: {e}")))
}

fn cmd_run(cli: &Cli, cfg: &ScenarioConfig, args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let schemes = Scheme::parse_list(&args.schemes).map_err(|e| Failure::usage(e.to_string()))?;
    prepare_output_dir(&args.out, args.overwrite)?;
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

    let total = cfg.num_runs;
    let done = AtomicUsize::new(0);
    let every = (total / 20).max(1);
    let quiet = args.quiet;
    let progress = |_run: usize| {
        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
        if !quiet && (n.is_multiple_of(every) || n == total) {
            eprintln!("runs {n}/{total}");
        }
    };
    let report = harness::run_experiment_with_progress(cfg, &schemes, workers, &progress)
        .map_err(|e| Failure::runtime(e.to_string()))?;
    report
        .write_to(&args.out)
        .map_err(|e| Failure::runtime(e.to_string()))?;

    let manifest = RunManifest {
        config_path: cli.config.as_ref().map(|p| p.display().to_string()),
        output_dir: args.out.display().to_string(),
        schemes: schemes.iter().map(|s| s.label.clone()).collect(),
        seed: cfg.rng_seed,
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let path = args.out.join(MANIFEST_FILE);
    fs::write(
        &path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))?;

    for f in &report.failures {
        let _ = writeln!(err, "run {} failed: {}", f.run, f.message);
    }
    let _ = writeln!(
        out,
        "{} of {} runs completed; results in {}",
        report.runs_completed,
        report.runs_requested,
        args.out.display()
    );
    if report.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::runtime(format!("{} runs failed", report.failures.len())))
    }
}

fn prepare_output_dir(dir: &Path, overwrite: bool) -> CmdResult {
    if dir.exists() && !dir.is_dir() {
        return Err(Failure::usage(format!("{} is not a directory", dir.display())));
    }
    let occupied: Vec<&str> = CSV_FILES
        .iter()
        .copied()
        .chain([SUMMARY_FILE, MANIFEST_FILE])
        .filter(|f| dir.join(f).exists())
        .collect();
    if !occupied.is_empty() && !overwrite {
        return Err(Failure::usage(format!(
            "{} already holds results ({}); pass --overwrite to replace them",
            dir.display(),
            occupied.join(", ")
        )));
    }
    fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))
}

fn load_drop(cfg: &ScenarioConfig, args: &DropArgs) -> Result<(Scenario, ShadowingField), Failure> {
    if let Some(path) = &args.scenario {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read scenario file {}: {e}", path.display())))?;
        let scenario =
            Scenario::from_text(&text, cfg).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        let shadowing = ShadowingField::for_scenario(&scenario);
        return Ok((scenario, shadowing));
    }
    if args.run >= cfg.num_runs {
        return Err(Failure::usage(format!(
            "run {} out of range (num_runs = {})",
            args.run, cfg.num_runs
        )));
    }
    if args.step > cfg.num_steps {
        return Err(Failure::usage(format!(
            "step {} out of range (num_steps = {})",
            args.step, cfg.num_steps
        )));
    }
    let context = |step: usize, e: String| Failure::runtime(format!("run {}, step {step}: {e}", args.run));
    let mut scenario = generate_scenario(cfg, args.run).map_err(|e| context(0, e.to_string()))?;
    let shadowing = ShadowingField::for_scenario(&scenario);
    for step in 1..=args.step {
        scenario = advance_step_with(&scenario, &shadowing).map_err(|e| context(step, e.to_string()))?;
    }
    Ok((scenario, shadowing))
}

fn analyze(scenario: &Scenario, shadowing: &ShadowingField) -> Result<DropAnalysis, Failure> {
    harness::analyze_drop(scenario, shadowing)
        .map_err(|e| Failure::runtime(format!("run {}, step {}: {e}", scenario.run_index, scenario.step_index)))
}

fn ids(list: impl IntoIterator<Item = String>) -> String {
    let v: Vec<String> = list.into_iter().collect();
    if v.is_empty() {
        "-".into()
    } else {
        v.join(",")
    }
}

/// Plain-text view of one drop: victims with their aggressors and rates,
/// per-HeNB rates and patterns, coalitions, SINR before and after muting.
pub fn inspect_report(scenario: &Scenario, shadowing: &ShadowingField) -> Result<String, String> {
    let a = analyze(scenario, shadowing).map_err(|f| f.message)?;
    let cfg = &scenario.config;
    let plan = harness::plan_for(&Scheme::proposed(), &a, cfg);
    let post = harness::post_muting_gamma(&a.report, &plan);
    let r = &a.report;
    let henb_id = |f: usize| r.henb_ids[f].to_string();

    let mut s = String::new();
    writeln!(s, "run {} step {}", scenario.run_index, scenario.step_index).unwrap();
    writeln!(
        s,
        "mues {}  henbs {}  victims {}  coalitions {}  threshold {} dB",
        r.num_mues(),
        r.num_henbs(),
        r.victims.len(),
        a.coalitions.len(),
        cfg.sinr_threshold
    )
    .unwrap();

    writeln!(s, "\n[victims]").unwrap();
    writeln!(s, "mue\tsinr_db\taggressors\talpha\tfeasible\tpost_sinr_db").unwrap();
    for q in &a.requirements {
        writeln!(
            s,
            "{}\t{:.3}\t{}\t{:.6}\t{}\t{:.3}",
            q.mue_id,
            r.gamma_db[q.mue],
            ids(a.aggressors.of(q.mue).iter().map(|&f| henb_id(f))),
            q.alpha,
            if q.feasible { "yes" } else { "no" },
            linear_to_db(post[q.mue])
        )
        .unwrap();
    }

    writeln!(s, "\n[henbs]").unwrap();
    writeln!(s, "henb\tvictims\talpha\tblanked\tpattern\tcoalition").unwrap();
    for f in (0..r.num_henbs()).filter(|&f| a.victim_sets.is_aggressor(f)) {
        let p = &plan.patterns[f];
        writeln!(
            s,
            "{}\t{}\t{:.6}\t{}/{}\t{}\t{}",
            henb_id(f),
            ids(a.victim_sets.per_henb[f].iter().map(|&m| r.mue_ids[m].to_string())),
            a.henb_rates[f],
            p.popcount(),
            p.len(),
            p,
            plan.coalition[f].map_or("-".into(), |c| c.to_string())
        )
        .unwrap();
    }

    writeln!(s, "\n[coalitions]").unwrap();
    for c in &a.coalitions {
        writeln!(
            s,
            "{}\thenbs {}\tvictims {}",
            c.id,
            ids(c.members.iter().map(|&f| henb_id(f))),
            ids(c.covered_victims.iter().map(|&m| r.mue_ids[m].to_string()))
        )
        .unwrap();
    }

    writeln!(s, "\n[sinr]").unwrap();
    writeln!(s, "mue\tpre_db\tpost_db").unwrap();
    for ((id, pre), g) in r.mue_ids.iter().zip(&r.gamma_db).zip(&post) {
        writeln!(s, "{id}\t{pre:.3}\t{:.3}", linear_to_db(*g)).unwrap();
    }
    for d in &a.diagnostics {
        writeln!(s, "note: {d}").unwrap();
    }
    Ok(s)
}

impl From<String> for Failure {
    fn from(message: String) -> Self {
        Failure::runtime(message)
    }
}

fn sinr_table(scenario: &Scenario, shadowing: &ShadowingField) -> Result<String, Failure> {
    let a = analyze(scenario, shadowing)?;
    let r = &a.report;
    let mut s = String::from("step,mue,sinr_db,victim,aggressors\n");
    for m in 0..r.num_mues() {
        writeln!(
            s,
            "{},{},{},{},{}",
            scenario.step_index,
            r.mue_ids[m],
            r.gamma_db[m],
            u8::from(r.is_victim(m)),
            a.aggressors.of(m).len()
        )
        .unwrap();
    }
    Ok(s)
}

fn each_step(cfg: &ScenarioConfig, run: usize, mut visit: impl FnMut(&Scenario, DropAnalysis)) -> CmdResult {
    let (mut scenario, shadowing) = load_drop(
        cfg,
        &DropArgs {
            run,
            step: 0,
            scenario: None,
        },
    )?;
    loop {
        let a = analyze(&scenario, &shadowing)?;
        visit(&scenario, a);
        if scenario.step_index == cfg.num_steps {
            return Ok(());
        }
        scenario = advance_step_with(&scenario, &shadowing)
            .map_err(|e| Failure::runtime(format!("run {run}, step {}: {e}", scenario.step_index + 1)))?;
    }
}

/// Per-step muted-rate table: mean rate over victims and a histogram of the
/// per-HeNB rates in subframe units (`blanked_0` .. `blanked_N`).
fn rates_table(cfg: &ScenarioConfig, run: usize) -> Result<String, Failure> {
    let n = cfg.frame.subframes;
    let mut s = String::from("step,victims,mean_alpha");
    for k in 0..=n {
        write!(s, ",blanked_{k}").unwrap();
    }
    s.push('\n');
    each_step(cfg, run, |scenario, a| {
        let plan = harness::plan_for(&Scheme::proposed(), &a, cfg);
        let mean = if a.requirements.is_empty() {
            0.0
        } else {
            a.requirements.iter().map(|q| q.alpha).sum::<f64>() / a.requirements.len() as f64
        };
        let mut hist = vec![0usize; n + 1];
        for p in &plan.patterns {
            hist[p.popcount()] += 1;
        }
        write!(s, "{},{},{}", scenario.step_index, a.requirements.len(), mean).unwrap();
        for h in hist {
            write!(s, ",{h}").unwrap();
        }
        s.push('\n');
    })?;
    Ok(s)
}

fn coalition_dump(cfg: &ScenarioConfig, run: usize) -> Result<String, Failure> {
    let mut s = String::new();
    each_step(cfg, run, |scenario, a| {
        let r = &a.report;
        writeln!(s, "step {}: {} coalitions", scenario.step_index, a.coalitions.len()).unwrap();
        for c in &a.coalitions {
            writeln!(
                s,
                "  coalition {} henbs {} victims {}",
                c.id,
                ids(c.members.iter().map(|&f| r.henb_ids[f].to_string())),
                ids(c.covered_victims.iter().map(|&m| r.mue_ids[m].to_string()))
            )
            .unwrap();
        }
    })?;
    Ok(s)
}

fn pathloss_table(cfg: &ScenarioConfig, args: &PathlossArgs) -> Result<String, Failure> {
    if !(args.from > 0.0 && args.to >= args.from) || args.points < 1 {
        return Err(Failure::usage("pathloss needs 0 < from <= to and points >= 1"));
    }
    let mut s = String::from("distance_m,macro_outdoor_db,macro_indoor_db,femto_db\n");
    for i in 0..args.points {
        let d = if args.points == 1 {
            args.from
        } else {
            args.from + (args.to - args.from) * i as f64 / (args.points - 1) as f64
        };
        let err = |e: crate::propagation::PropagationError| Failure::usage(e.to_string());
        writeln!(
            s,
            "{d},{},{},{}",
            macro_pathloss(d, false, cfg.outdoor_wall_loss).map_err(err)?,
            macro_pathloss(d, true, cfg.outdoor_wall_loss).map_err(err)?,
            femto_pathloss(d).map_err(err)?
        )
        .unwrap();
    }
    Ok(s)
}
