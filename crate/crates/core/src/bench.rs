//! Benchmark cases, per-run records, the relative e-node overhead metric and
//! the per-suite summary table.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::baseline::SeparateProver;
use crate::colors::NodeMode;
use crate::language::{parse_terms, Term};
use crate::saturate::{parse_goals, parse_rules, Goal, Limits, Prover, Rule, StopReason};

/// Bumped whenever a record, summary or overhead column changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One full e-graph per assumption.
    Separate,
    /// Colored e-graph that adds every e-node to black.
    Monochrome,
    /// Colored e-graph with colored e-nodes.
    Optimized,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Separate, Mode::Monochrome, Mode::Optimized];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Separate => "separate",
            Mode::Monochrome => "monochrome",
            Mode::Optimized => "optimized",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "separate" => Ok(Mode::Separate),
            "monochrome" => Ok(Mode::Monochrome),
            "optimized" => Ok(Mode::Optimized),
            other => Err(format!("unknown mode `{other}` (separate, monochrome, optimized)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: crate::Error },
}

/// One benchmark problem.
#[derive(Clone, Debug)]
pub struct Case {
    /// Directory the case was read from, if any.
    pub dir: Option<PathBuf>,
    pub suite: String,
    pub name: String,
    pub rules: Vec<Rule>,
    pub terms: Vec<Term>,
    pub goals: Vec<Goal>,
}

fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parsed<T>(path: &Path, r: Result<T, crate::Error>) -> Result<T, LoadError> {
    r.map_err(|source| LoadError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

impl Case {
    /// Reads `rules.txt`, `terms.txt` and an optional `goals.txt`.
    pub fn load(dir: &Path, suite: &str) -> Result<Case, LoadError> {
        let goals = dir.join("goals.txt");
        let mut case = Case::from_files(
            suite,
            &dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            &dir.join("rules.txt"),
            &dir.join("terms.txt"),
            goals.exists().then_some(goals.as_path()),
        )?;
        case.dir = Some(dir.to_path_buf());
        Ok(case)
    }

    pub fn from_files(
        suite: &str,
        name: &str,
        rules: &Path,
        terms: &Path,
        goals: Option<&Path>,
    ) -> Result<Case, LoadError> {
        let r = parsed(rules, parse_rules(&read(rules)?))?;
        let t = parsed(terms, parse_terms(&read(terms)?))?;
        let g = match goals {
            Some(p) => parsed(p, parse_goals(&read(p)?))?,
            None => vec![],
        };
        Ok(Case {
            dir: None,
            suite: suite.to_string(),
            name: name.to_string(),
            rules: r,
            terms: t,
            goals: g,
        })
    }
}

fn sorted_dirs(dir: &Path) -> Result<Vec<PathBuf>, LoadError> {
    let entries = fs::read_dir(dir).map_err(|source| LoadError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out: Vec<PathBuf> = entries.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_dir()).collect();
    out.sort();
    Ok(out)
}

/// Loads `<root>/<suite>/<case>/`. A directory that itself holds
/// `rules.txt` is read as a single suite.
pub fn load_suites(root: &Path) -> Result<Vec<Case>, LoadError> {
    let mut out = vec![];
    let name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let suites = if sorted_dirs(root)?.iter().any(|d| d.join("rules.txt").exists()) {
        vec![root.to_path_buf()]
    } else {
        sorted_dirs(root)?
    };
    for suite in suites {
        for case in sorted_dirs(&suite)? {
            if case.join("rules.txt").exists() {
                out.push(Case::load(&case, &name(&suite))?);
            }
        }
    }
    Ok(out)
}

/// Caps and switches for one run.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BenchConfig {
    pub mode: Mode,
    pub iter_cap: usize,
    pub split_depth: usize,
    pub node_cap: usize,
    pub time_cap_secs: Option<f64>,
    pub mem_cap_bytes: Option<usize>,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            mode: Mode::Optimized,
            iter_cap: 100,
            split_depth: 4,
            node_cap: 1_000_000,
            time_cap_secs: Some(3600.0),
            mem_cap_bytes: None,
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn limits(&self) -> Limits {
        Limits {
            iter_cap: self.iter_cap,
            node_cap: self.node_cap,
            split_depth: self.split_depth,
            time_cap: self.time_cap_secs.map(Duration::from_secs_f64),
            mem_cap: self.mem_cap_bytes,
            ..Limits::default()
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Ok,
    Timeout,
    Oom,
}

impl Outcome {
    pub fn of(stop: StopReason) -> Outcome {
        match stop {
            StopReason::TimeCap => Outcome::Timeout,
            StopReason::MemoryCap => Outcome::Oom,
            _ => Outcome::Ok,
        }
    }
}

/// `(total − base) / assumptions`, or `None` for a case without splits.
pub fn relative_overhead(total: usize, base: usize, assumptions: usize) -> Option<Ratio<i64>> {
    (assumptions > 0).then(|| Ratio::new(total as i64 - base as i64, assumptions as i64))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BenchRecord {
    pub schema_version: u32,
    pub suite: String,
    pub case: String,
    pub mode: Mode,
    pub base_enodes: Option<usize>,
    pub total_enodes: usize,
    pub assumptions: usize,
    /// Exact ratio as `n/d`.
    pub relative_overhead: Option<String>,
    pub overhead: Option<f64>,
    pub wall_time_secs: f64,
    pub time_cap_secs: Option<f64>,
    pub outcome: Outcome,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub goals: usize,
    pub goals_proved: usize,
}

impl BenchRecord {
    /// Fills in the overhead columns from the counts.
    pub fn finish(mut self) -> Self {
        let ratio = self.base_enodes.and_then(|b| relative_overhead(self.total_enodes, b, self.assumptions));
        self.relative_overhead = ratio.map(|r| format!("{}/{}", r.numer(), r.denom()));
        self.overhead = ratio.map(|r| *r.numer() as f64 / *r.denom() as f64);
        self
    }
}

/// Runs one case in one mode. `borrowed_base` replaces the base e-node
/// count, which is how the monochrome arm is measured.
pub fn run_case(case: &Case, config: &BenchConfig, borrowed_base: Option<usize>) -> Result<BenchRecord, crate::Error> {
    let limits = config.limits();
    let mut rec = BenchRecord {
        schema_version: SCHEMA_VERSION,
        suite: case.suite.clone(),
        case: case.name.clone(),
        mode: config.mode,
        base_enodes: None,
        total_enodes: 0,
        assumptions: 0,
        relative_overhead: None,
        overhead: None,
        wall_time_secs: 0.0,
        time_cap_secs: config.time_cap_secs,
        outcome: Outcome::Ok,
        stop_reason: StopReason::Saturated,
        iterations: 0,
        goals: case.goals.len(),
        goals_proved: 0,
    };
    match config.mode {
        Mode::Separate => {
            let mut p = SeparateProver::new(case.rules.clone(), limits);
            for t in &case.terms {
                p.add_term(t)?;
            }
            for g in &case.goals {
                p.add_goal(g.clone())?;
            }
            let r = p.run()?;
            rec.base_enodes = r.base_enodes;
            rec.total_enodes = r.total_enodes;
            rec.assumptions = r.assumptions;
            rec.wall_time_secs = r.wall_time_secs;
            rec.stop_reason = r.stop_reason;
            rec.iterations = r.iterations;
            rec.goals_proved = r.goals.iter().filter(|g| g.by_cases).count();
        }
        Mode::Monochrome | Mode::Optimized => {
            let mode = if config.mode == Mode::Optimized {
                NodeMode::Colored
            } else {
                NodeMode::Monochrome
            };
            let mut p = Prover::new(mode, case.rules.clone(), limits);
            for t in &case.terms {
                p.add_term(t)?;
            }
            for g in &case.goals {
                p.add_goal(g.clone())?;
            }
            let r = p.run()?;
            rec.base_enodes = r.base_enodes;
            rec.total_enodes = r.total_enodes;
            rec.assumptions = r.assumptions;
            rec.wall_time_secs = r.wall_time_secs;
            rec.stop_reason = r.stop_reason;
            rec.iterations = r.iterations;
            rec.goals_proved = r.goals.iter().filter(|g| g.by_cases).count();
        }
    }
    if config.mode == Mode::Monochrome {
        rec.base_enodes = borrowed_base;
    }
    rec.outcome = Outcome::of(rec.stop_reason);
    Ok(rec.finish())
}

/// All three modes of one case, in-process. Monochrome borrows the base of
/// the separate run.
pub fn run_all_modes(case: &Case, config: &BenchConfig) -> Result<Vec<BenchRecord>, crate::Error> {
    let mut out = vec![];
    let mut base = None;
    for mode in Mode::ALL {
        let cfg = BenchConfig { mode, ..config.clone() };
        let rec = run_case(case, &cfg, base)?;
        if mode == Mode::Separate {
            base = rec.base_enodes;
        }
        out.push(rec);
    }
    Ok(out)
}

/// One row of the run-time and exceptions table.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SummaryRow {
    pub schema_version: u32,
    pub mode: Mode,
    pub suite: String,
    pub runtime_secs: f64,
    pub ooms: usize,
    pub timeouts: usize,
    pub cases: usize,
}

/// Per (mode, suite) totals. A timeout counts its full time cap; runs that
/// ran out of memory count only in the oom column.
pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = vec![];
    let mut keys: Vec<(Mode, String)> = records.iter().map(|r| (r.mode, r.suite.clone())).collect();
    keys.sort();
    keys.dedup();
    for (mode, suite) in keys {
        let mut row = SummaryRow {
            schema_version: SCHEMA_VERSION,
            mode,
            suite: suite.clone(),
            runtime_secs: 0.0,
            ooms: 0,
            timeouts: 0,
            cases: 0,
        };
        for r in records.iter().filter(|r| r.suite == suite && r.mode == mode) {
            row.cases += 1;
            match r.outcome {
                Outcome::Ok => row.runtime_secs += r.wall_time_secs,
                Outcome::Timeout => {
                    row.timeouts += 1;
                    row.runtime_secs += r.time_cap_secs.unwrap_or(r.wall_time_secs);
                }
                Outcome::Oom => row.ooms += 1,
            }
        }
        rows.push(row);
    }
    rows
}

/// Per-case overheads of the three modes, for scatter plots. Cases where the
/// separate run applied no split are left out.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OverheadRow {
    pub schema_version: u32,
    pub suite: String,
    pub case: String,
    pub assumptions: usize,
    pub separate: Option<f64>,
    pub monochrome: Option<f64>,
    pub optimized: Option<f64>,
}

pub fn overhead_table(records: &[BenchRecord]) -> Vec<OverheadRow> {
    let mut keys: Vec<(String, String)> = records.iter().map(|r| (r.suite.clone(), r.case.clone())).collect();
    keys.sort();
    keys.dedup();
    let get = |s: &str, c: &str, m: Mode| records.iter().find(|r| r.suite == s && r.case == c && r.mode == m);
    keys.into_iter()
        .filter_map(|(s, c)| {
            let sep = get(&s, &c, Mode::Separate)?;
            if sep.assumptions == 0 {
                return None;
            }
            Some(OverheadRow {
                schema_version: SCHEMA_VERSION,
                assumptions: sep.assumptions,
                separate: sep.overhead,
                monochrome: get(&s, &c, Mode::Monochrome).and_then(|r| r.overhead),
                optimized: get(&s, &c, Mode::Optimized).and_then(|r| r.overhead),
                suite: s,
                case: c,
            })
        })
        .collect()
}

/// Serializes rows as CSV with a header line.
pub fn to_csv<T: Serialize>(rows: &[T], header_if_empty: &[&str]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(vec![]);
    if rows.is_empty() {
        w.write_record(header_if_empty)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub const SUMMARY_COLUMNS: [&str; 7] = ["schema_version", "mode", "suite", "runtime_secs", "ooms", "timeouts", "cases"];
pub const OVERHEAD_COLUMNS: [&str; 7] = [
    "schema_version",
    "suite",
    "case",
    "assumptions",
    "separate",
    "monochrome",
    "optimized",
];

/// Everything `bench` writes to `report.json`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BenchReport {
    pub schema_version: u32,
    pub records: Vec<BenchRecord>,
    pub summary: Vec<SummaryRow>,
    pub overhead: Vec<OverheadRow>,
}

impl BenchReport {
    pub fn new(records: Vec<BenchRecord>) -> Self {
        BenchReport {
            schema_version: SCHEMA_VERSION,
            summary: summarize(&records),
            overhead: overhead_table(&records),
            records,
        }
    }

    pub fn summary_csv(&self) -> String {
        to_csv(&self.summary, &SUMMARY_COLUMNS).expect("in-memory csv")
    }

    pub fn overhead_csv(&self) -> String {
        to_csv(&self.overhead, &OVERHEAD_COLUMNS).expect("in-memory csv")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overhead_arithmetic() {
        assert_eq!(relative_overhead(120, 100, 4), Some(Ratio::from_integer(5)));
        assert_eq!(relative_overhead(100, 100, 3), Some(Ratio::from_integer(0)));
        assert_eq!(relative_overhead(7, 4, 2), Some(Ratio::new(3, 2)));
        assert_eq!(relative_overhead(7, 4, 0), None);
    }

    #[test]
    fn mode_names() {
        for m in Mode::ALL {
            assert_eq!(m.to_string().parse::<Mode>().unwrap(), m);
        }
        assert!("clone".parse::<Mode>().is_err());
    }
}
