//! `ceg`: run, prove, benchmark and cross-check colored e-graph saturation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use colored_egraph::baseline::compare_run;
use colored_egraph::bench::{self, BenchConfig, BenchRecord, BenchReport, Case, Mode, Outcome};
use colored_egraph::colors::NodeMode;
use colored_egraph::memory::CountingAllocator;
use colored_egraph::random::Scenario;
use colored_egraph::saturate::{Prover, StopReason};
use colored_egraph::Pattern;

#[global_allocator]
static ALLOC: CountingAllocator = CountingAllocator;

const EXIT_IO: u8 = 3;
const EXIT_TIMEOUT: u8 = 4;
const EXIT_OOM: u8 = 5;
const EXIT_DIFF: u8 = 6;

#[derive(Parser)]
#[command(name = "ceg", version, about = "Colored e-graph saturation with case splitting")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Saturate one case and print its record as JSON
    Run(RunArgs),
    /// Saturate one case and print goal verdicts
    Prove(RunArgs),
    /// Sweep a directory of cases in every mode
    Bench(BenchArgs),
    /// Diff a colored run against separate e-graphs
    Compare(CompareArgs),
}

#[derive(Args, Clone)]
struct Caps {
    /// Iteration cap
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 4)]
    split_depth: usize,
    /// Time cap in seconds
    #[arg(long, default_value_t = 3600.0)]
    time_cap: f64,
    /// Memory cap in bytes, checked between iterations
    #[arg(long)]
    mem_cap: Option<usize>,
    #[arg(long, default_value_t = 1_000_000)]
    node_cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Caps {
    fn config(&self, mode: Mode) -> BenchConfig {
        BenchConfig {
            mode,
            iter_cap: self.iters,
            split_depth: self.split_depth,
            node_cap: self.node_cap,
            time_cap_secs: Some(self.time_cap),
            mem_cap_bytes: self.mem_cap,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "optimized")]
    mode: Mode,
    #[arg(long)]
    rules: PathBuf,
    #[arg(long)]
    terms: PathBuf,
    #[arg(long)]
    goals: Option<PathBuf>,
    #[command(flatten)]
    caps: Caps,
    /// Output directory for report.json and graph dumps
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base e-node count to use instead of this run's own
    #[arg(long)]
    base: Option<usize>,
    #[arg(long, default_value = "")]
    suite: String,
    #[arg(long, default_value = "")]
    name: String,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of `<suite>/<case>/` folders
    cases: PathBuf,
    #[command(flatten)]
    caps: Caps,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    /// Parallel cases
    #[arg(long)]
    jobs: Option<usize>,
    /// Run in this process instead of one child process per run
    #[arg(long)]
    in_process: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, default_value = "optimized")]
    mode: Mode,
    #[arg(long, required_unless_present = "random")]
    rules: Option<PathBuf>,
    #[arg(long, required_unless_present = "random")]
    terms: Option<PathBuf>,
    #[arg(long)]
    goals: Option<PathBuf>,
    /// Check this many random scenarios instead of a case
    #[arg(long)]
    random: Option<u64>,
    #[command(flatten)]
    caps: Caps,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Io(String),
    Other(String),
}

impl From<bench::LoadError> for Failure {
    fn from(e: bench::LoadError) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<colored_egraph::Error> for Failure {
    fn from(e: colored_egraph::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

fn write(dir: &Path, file: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(file), contents)?;
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize")
}

fn node_mode(mode: Mode) -> NodeMode {
    match mode {
        Mode::Monochrome => NodeMode::Monochrome,
        _ => NodeMode::Colored,
    }
}

fn load(rules: &Path, terms: &Path, goals: Option<&Path>, suite: &str, name: &str) -> Result<Case, Failure> {
    let name = if name.is_empty() {
        rules
            .parent()
            .and_then(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    } else {
        name.to_string()
    };
    Ok(Case::from_files(suite, &name, rules, terms, goals)?)
}

fn outcome_code(outcome: Outcome) -> u8 {
    match outcome {
        Outcome::Ok => 0,
        Outcome::Timeout => EXIT_TIMEOUT,
        Outcome::Oom => EXIT_OOM,
    }
}

fn cmd_run(a: RunArgs) -> Result<u8, Failure> {
    let case = load(&a.rules, &a.terms, a.goals.as_deref(), &a.suite, &a.name)?;
    let rec = bench::run_case(&case, &a.caps.config(a.mode), a.base)?;
    let text = json(&rec);
    println!("{text}");
    if let Some(out) = &a.out {
        write(out, "report.json", &text)?;
    }
    Ok(outcome_code(rec.outcome))
}

fn cmd_prove(a: RunArgs) -> Result<u8, Failure> {
    let case = load(&a.rules, &a.terms, a.goals.as_deref(), &a.suite, &a.name)?;
    let cfg = a.caps.config(a.mode);
    if a.mode == Mode::Separate {
        let mut p = colored_egraph::baseline::SeparateProver::new(case.rules.clone(), cfg.limits());
        for t in &case.terms {
            p.add_term(t)?;
        }
        for g in case.goals {
            p.add_goal(g)?;
        }
        let r = p.run()?;
        for g in &r.goals {
            println!("{}: {}", g.goal, if g.by_cases { "proved" } else { "not proved" });
        }
        if let Some(out) = &a.out {
            write(out, "report.json", &json(&r))?;
        }
        return Ok(outcome_code(Outcome::of(r.stop_reason)));
    }
    let mut p = Prover::new(node_mode(a.mode), case.rules.clone(), cfg.limits());
    for t in &case.terms {
        p.add_term(t)?;
    }
    for g in case.goals {
        p.add_goal(g)?;
    }
    let r = p.run()?;
    for g in &r.goals {
        println!("{}: {}", g.goal, if g.by_cases { "proved" } else { "not proved" });
        for (c, path, ok) in &g.leaves {
            println!("  {c} [{path}]: {ok}");
        }
    }
    if let Some(out) = &a.out {
        write(out, "report.json", &json(&r))?;
        write(out, "graph.json", &json(&p.graph().dump()))?;
    }
    Ok(outcome_code(Outcome::of(r.stop_reason)))
}

/// Runs one case in one mode in a child process, so caps and crashes stay
/// isolated.
fn run_child(case: &Case, cfg: &BenchConfig, base: Option<usize>) -> Result<BenchRecord, Failure> {
    let dir = case.dir.as_ref().expect("cases from a directory");
    let exe = std::env::current_exe()?;
    let mut cmd = Command::new(exe);
    cmd.arg("run")
        .arg("--mode")
        .arg(cfg.mode.to_string())
        .arg("--rules")
        .arg(dir.join("rules.txt"))
        .arg("--terms")
        .arg(dir.join("terms.txt"))
        .args(["--suite", &case.suite, "--name", &case.name])
        .args(["--iters", &cfg.iter_cap.to_string()])
        .args(["--split-depth", &cfg.split_depth.to_string()])
        .args(["--node-cap", &cfg.node_cap.to_string()])
        .args(["--seed", &cfg.seed.to_string()]);
    if dir.join("goals.txt").exists() {
        cmd.arg("--goals").arg(dir.join("goals.txt"));
    }
    if let Some(t) = cfg.time_cap_secs {
        cmd.args(["--time-cap", &t.to_string()]);
    }
    if let Some(m) = cfg.mem_cap_bytes {
        cmd.args(["--mem-cap", &m.to_string()]);
    }
    if let Some(b) = base {
        cmd.args(["--base", &b.to_string()]);
    }
    let started = std::time::Instant::now();
    let out = cmd.output()?;
    match serde_json::from_slice::<BenchRecord>(&out.stdout) {
        Ok(rec) => Ok(rec),
        Err(_) => {
            // the child died before reporting; count it as out of memory
            log::warn!(
                "{}/{} ({}) exited with {}: {}",
                case.suite,
                case.name,
                cfg.mode,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            );
            Ok(BenchRecord {
                schema_version: bench::SCHEMA_VERSION,
                suite: case.suite.clone(),
                case: case.name.clone(),
                mode: cfg.mode,
                base_enodes: None,
                total_enodes: 0,
                assumptions: 0,
                relative_overhead: None,
                overhead: None,
                wall_time_secs: started.elapsed().as_secs_f64(),
                time_cap_secs: cfg.time_cap_secs,
                outcome: Outcome::Oom,
                stop_reason: StopReason::MemoryCap,
                iterations: 0,
                goals: case.goals.len(),
                goals_proved: 0,
            })
        }
    }
}

fn cmd_bench(a: BenchArgs) -> Result<u8, Failure> {
    let cases = bench::load_suites(&a.cases)?;
    let run_one = |case: &Case| -> Result<Vec<BenchRecord>, Failure> {
        if a.in_process {
            return Ok(bench::run_all_modes(case, &a.caps.config(Mode::Optimized))?);
        }
        let mut out = vec![];
        let mut base = None;
        for mode in Mode::ALL {
            let rec = run_child(case, &a.caps.config(mode), base)?;
            if mode == Mode::Separate {
                base = rec.base_enodes;
            }
            log::info!("{}/{} {}: {:?} in {:.3}s", rec.suite, rec.case, mode, rec.outcome, rec.wall_time_secs);
            out.push(rec);
        }
        Ok(out)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Other(e.to_string()))?;
    let results: Vec<Result<Vec<BenchRecord>, Failure>> = pool.install(|| cases.par_iter().map(run_one).collect());
    let mut records = vec![];
    for r in results {
        records.extend(r?);
    }
    let report = BenchReport::new(records);
    write(&a.out, "report.json", &json(&report))?;
    write(&a.out, "summary.csv", &report.summary_csv())?;
    write(&a.out, "overhead.csv", &report.overhead_csv())?;
    print!("{}", report.summary_csv());
    Ok(0)
}

fn cmd_compare(a: CompareArgs) -> Result<u8, Failure> {
    if let Some(n) = a.random {
        let results: Vec<Result<(u64, colored_egraph::baseline::DiffReport), colored_egraph::Error>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let seed = a.caps.seed.wrapping_add(i);
                Scenario::generate(seed).check(node_mode(a.mode)).map(|(_, d)| (seed, d))
            })
            .collect();
        let mut failing = vec![];
        for r in results {
            let (seed, d) = r?;
            if !d.is_empty() {
                failing.push((seed, d));
            }
        }
        let text = json(&failing);
        if let Some(out) = &a.out {
            write(out, "diff.json", &text)?;
        }
        println!("{} scenarios, {} with differences", n, failing.len());
        if !failing.is_empty() {
            println!("{text}");
            return Ok(EXIT_DIFF);
        }
        return Ok(0);
    }
    let (rules, terms) = (a.rules.expect("required by clap"), a.terms.expect("required by clap"));
    let case = load(&rules, &terms, a.goals.as_deref(), "", "")?;
    let limits = a.caps.config(a.mode).limits();
    let mut p = Prover::new(node_mode(a.mode), case.rules.clone(), limits);
    for t in &case.terms {
        p.add_term(t)?;
    }
    for g in case.goals {
        p.add_goal(g)?;
    }
    p.run()?;
    let probes: Vec<Pattern> = case.rules.iter().map(|r| r.lhs.clone()).collect();
    let diff = compare_run(&p, &case.terms, &limits, &probes)?;
    let text = json(&diff);
    println!("{text}");
    if let Some(out) = &a.out {
        write(out, "diff.json", &text)?;
    }
    Ok(if diff.is_empty() { 0 } else { EXIT_DIFF })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Prove(a) => cmd_prove(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
