//! Equality saturation with conditional rules and automatic case splits.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use symbolic_expressions::Sexp;

use crate::colors::{ColorId, ColoredEGraph, NodeMode, Rel};
use crate::egraph::EGraph;
use crate::ematch::{ematch_black, ematch_colored, Match, Pattern};
use crate::language::{parse_all, ENode, Term};
use crate::memory;
use crate::ufind::Id;
use crate::Error;

pub const TRUE: &str = "true";
pub const FALSE: &str = "false";

/// A rewrite `lhs => rhs`, optionally guarded by `condition`, which must be
/// equal to `true` for the rewrite to fire.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Rule {
    pub name: String,
    pub lhs: Pattern,
    pub rhs: Pattern,
    pub condition: Option<Pattern>,
}

impl Rule {
    pub fn new(name: impl Into<String>, lhs: Pattern, rhs: Pattern, condition: Option<Pattern>) -> Result<Rule, Error> {
        let name = name.into();
        let bound = lhs.holes();
        let check = |p: &Pattern, what: &str| {
            for h in p.holes() {
                if !bound.contains(&h) {
                    return Err(Error::Rule {
                        rule: name.clone(),
                        reason: format!("?{h} in the {what} is not bound by the left-hand side"),
                    });
                }
            }
            Ok(())
        };
        check(&rhs, "right-hand side")?;
        if let Some(c) = &condition {
            check(c, "condition")?;
        }
        let mut sig = lhs.signature();
        sig.extend(rhs.signature());
        if let Some(c) = &condition {
            sig.extend(c.signature());
        }
        sig.sort();
        for w in sig.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 != w[1].1 {
                return Err(Error::Rule {
                    rule: name.clone(),
                    reason: format!("`{}` used with {} and {} arguments", w[0].0, w[0].1, w[1].1),
                });
            }
        }
        Ok(Rule {
            name,
            lhs,
            rhs,
            condition,
        })
    }

    pub fn is_conditional(&self) -> bool {
        self.condition.is_some()
    }

    fn from_sexp(sexp: &Sexp) -> Result<Rule, Error> {
        let bad = || Error::Parse(format!("expected `(rule name [cond |-] lhs => rhs)`, got {sexp}"));
        let Sexp::List(items) = sexp else { return Err(bad()) };
        let word = |s: &Sexp, w: &str| matches!(s, Sexp::String(x) if x == w);
        if items.len() < 5 || !word(&items[0], "rule") {
            return Err(bad());
        }
        let Sexp::String(name) = &items[1] else { return Err(bad()) };
        let rest = &items[2..];
        let (cond, lhs, rhs) = match rest.len() {
            3 if word(&rest[1], "=>") => (None, &rest[0], &rest[2]),
            5 if word(&rest[1], "|-") && word(&rest[3], "=>") => (Some(&rest[0]), &rest[2], &rest[4]),
            _ => return Err(bad()),
        };
        Rule::new(
            name.as_str(),
            Pattern::from_sexp(lhs)?,
            Pattern::from_sexp(rhs)?,
            cond.map(Pattern::from_sexp).transpose()?,
        )
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(rule {} ", self.name)?;
        if let Some(c) = &self.condition {
            write!(f, "{c} |- ")?;
        }
        write!(f, "{} => {})", self.lhs, self.rhs)
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut all = parse_rules(s)?;
        if all.len() != 1 {
            return Err(Error::Parse(format!("expected one rule, found {}", all.len())));
        }
        Ok(all.pop().unwrap())
    }
}

pub fn parse_rules(text: &str) -> Result<Vec<Rule>, Error> {
    parse_all(text)?.iter().map(Rule::from_sexp).collect()
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Goal {
    pub lhs: Term,
    pub rhs: Term,
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(goal {} = {})", self.lhs, self.rhs)
    }
}

pub fn parse_goals(text: &str) -> Result<Vec<Goal>, Error> {
    parse_all(text)?
        .iter()
        .map(|s| match s {
            Sexp::List(items) if items.len() == 4 && items[0].to_string() == "goal" && items[2].to_string() == "=" => {
                Ok(Goal {
                    lhs: Term::from_sexp(&items[1])?,
                    rhs: Term::from_sexp(&items[3])?,
                })
            }
            _ => Err(Error::Parse(format!("expected `(goal lhs = rhs)`, got {s}"))),
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct Limits {
    pub iter_cap: usize,
    pub node_cap: usize,
    pub time_cap: Option<Duration>,
    pub mem_cap: Option<usize>,
    pub split_depth: usize,
    /// Splits are skipped once they would exceed this many colors.
    pub max_colors: Option<usize>,
    pub mem_probe: fn() -> usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            iter_cap: 100,
            node_cap: 1_000_000,
            time_cap: None,
            mem_cap: None,
            split_depth: 4,
            max_colors: None,
            mem_probe: memory::allocated_bytes,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Saturated,
    IterationCap,
    NodeCap,
    TimeCap,
    MemoryCap,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StopReason::Saturated => "saturated",
            StopReason::IterationCap => "iteration-cap",
            StopReason::NodeCap => "node-cap",
            StopReason::TimeCap => "time-cap",
            StopReason::MemoryCap => "memory-cap",
        };
        f.write_str(s)
    }
}

/// Case split on `condition`: one branch per `(label, target)`, each
/// assuming `condition = target`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SplitSpec {
    pub condition: Id,
    pub branches: Vec<(String, Id)>,
}

/// The `true` and `false` classes of a graph.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Truth {
    pub t: Id,
    pub f: Id,
}

impl Truth {
    pub fn install(g: &mut EGraph) -> Truth {
        Truth {
            t: g.add(ENode::leaf(TRUE)).expect("nullary"),
            f: g.add(ENode::leaf(FALSE)).expect("nullary"),
        }
    }

    fn install_colored(g: &mut ColoredEGraph) -> Truth {
        Truth {
            t: g.add(ENode::leaf(TRUE)).expect("nullary"),
            f: g.add(ENode::leaf(FALSE)).expect("nullary"),
        }
    }

    pub fn split(&self, condition: Id) -> SplitSpec {
        SplitSpec {
            condition,
            branches: vec![(TRUE.to_string(), self.t), (FALSE.to_string(), self.f)],
        }
    }
}

/// Operations that shaped the colors, replayable on separate e-graphs.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum ScheduleEntry {
    Color {
        color: ColorId,
        parent: Option<ColorId>,
        label: String,
    },
    Assume {
        color: ColorId,
        lhs: String,
        rhs: String,
        #[serde(skip)]
        terms: (Term, Term),
    },
    Union {
        lhs: String,
        rhs: String,
        #[serde(skip)]
        terms: (Term, Term),
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct ColorReport {
    pub id: ColorId,
    pub parent: Option<ColorId>,
    pub label: String,
    pub colored_enodes: usize,
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct GoalVerdict {
    pub goal: String,
    pub black: bool,
    pub by_cases: bool,
    /// `(color, label path, verdict)` for every leaf color.
    pub leaves: Vec<(ColorId, String, bool)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub iterations: usize,
    pub black_enodes: usize,
    pub colors: Vec<ColorReport>,
    pub total_enodes: usize,
    /// Black e-nodes right before the first case split.
    pub base_enodes: Option<usize>,
    /// Number of colors, one per assumption set.
    pub assumptions: usize,
    pub rule_applications: Vec<(String, usize)>,
    pub goals: Vec<GoalVerdict>,
    pub wall_time_secs: f64,
    pub stop_reason: StopReason,
}

/// Instantiates `pat` under `rel`, adding e-nodes as needed.
pub fn instantiate(g: &mut ColoredEGraph, rel: Rel, pat: &Pattern, m: &Match) -> Result<Id, Error> {
    match pat {
        Pattern::Hole(v) => Ok(m.get(*v).expect("rule holes are validated")),
        Pattern::Apply(op, args) => {
            let children = args
                .iter()
                .map(|a| instantiate(g, rel, a, m))
                .collect::<Result<Vec<Id>, Error>>()?;
            g.add_in(rel, ENode::new(*op, children))
        }
    }
}

/// Looks `pat` up under `rel` without adding anything.
pub fn lookup_instance(g: &ColoredEGraph, rel: Rel, pat: &Pattern, m: &Match) -> Option<Id> {
    match pat {
        Pattern::Hole(v) => m.get(*v),
        Pattern::Apply(op, args) => {
            let children = args
                .iter()
                .map(|a| lookup_instance(g, rel, a, m))
                .collect::<Option<Vec<Id>>>()?;
            g.lookup_in(rel, &ENode::new(*op, children))
        }
    }
}

/// Minimal relations at or below `rel` in which `a = b`.
pub fn equal_rels(g: &ColoredEGraph, rel: Rel, a: Id, b: Id) -> Vec<Rel> {
    let mut out = vec![];
    let mut stack = vec![rel];
    while let Some(r) = stack.pop() {
        if g.find_in(r, a) == g.find_in(r, b) {
            out.push(r);
        } else {
            stack.extend(g.children_of(r).into_iter().rev().map(Some));
        }
    }
    out
}

/// Applies `rule` to `matches`, returning the number of unions that merged
/// something.
pub fn apply_matches(g: &mut ColoredEGraph, rule: &Rule, matches: &[Match], truth: Truth) -> Result<usize, Error> {
    let mut merged = 0;
    for m in matches {
        let fire_in = match &rule.condition {
            None => vec![m.color],
            Some(cond) => {
                let c = instantiate(g, m.color, cond, m)?;
                equal_rels(g, m.color, c, truth.t)
            }
        };
        for rel in fire_in {
            let id = instantiate(g, rel, &rule.rhs, m)?;
            let (_, did) = g.union_in(rel, id, m.root)?;
            merged += did as usize;
        }
    }
    Ok(merged)
}

/// Matches and applies one rule. The graph must be rebuilt.
pub fn apply_rule(g: &mut ColoredEGraph, rule: &Rule, truth: Truth) -> Result<usize, Error> {
    let matches = ematch_colored(g, &rule.lhs);
    apply_matches(g, rule, &matches, truth)
}

/// Checks `lhs = rhs` under `rel`. Missing terms count as not equal.
pub fn check_goal(g: &ColoredEGraph, rel: Rel, lhs: &Term, rhs: &Term) -> bool {
    match (g.lookup_term_in(rel, lhs), g.lookup_term_in(rel, rhs)) {
        (Some(a), Some(b)) => g.find_in(rel, a) == g.find_in(rel, b),
        _ => false,
    }
}

/// True when the goal holds under `rel`, or `rel` was split and the goal
/// holds by cases in every branch.
pub fn prove_by_cases(g: &ColoredEGraph, rel: Rel, lhs: &Term, rhs: &Term) -> bool {
    if check_goal(g, rel, lhs, rhs) {
        return true;
    }
    let kids = match rel {
        None => g.children_of(None),
        Some(c) => g.color(c).children().to_vec(),
    };
    !kids.is_empty() && kids.into_iter().all(|k| prove_by_cases(g, Some(k), lhs, rhs))
}

/// The saturation loop over a colored e-graph, with case splitting.
pub struct Prover {
    graph: ColoredEGraph,
    rules: Vec<Rule>,
    goals: Vec<Goal>,
    limits: Limits,
    truth: Truth,
    schedule: Vec<ScheduleEntry>,
    split_done: FxHashSet<(Rel, Id)>,
    rule_counts: Vec<usize>,
    base_enodes: Option<usize>,
    iterations: usize,
    elapsed: Duration,
    stop: Option<StopReason>,
    splitting: bool,
}

impl Prover {
    pub fn new(mode: NodeMode, rules: Vec<Rule>, limits: Limits) -> Self {
        let mut graph = ColoredEGraph::new(mode);
        let truth = Truth::install_colored(&mut graph);
        let n = rules.len();
        Prover {
            graph,
            rules,
            goals: vec![],
            limits,
            truth,
            schedule: vec![],
            split_done: FxHashSet::default(),
            rule_counts: vec![0; n],
            base_enodes: None,
            iterations: 0,
            elapsed: Duration::ZERO,
            stop: None,
            splitting: true,
        }
    }

    /// Disables automatic case splits.
    pub fn without_splits(mut self) -> Self {
        self.splitting = false;
        self
    }

    pub fn set_audit(&mut self, on: bool) {
        self.graph.set_audit(on);
    }

    pub fn graph(&self) -> &ColoredEGraph {
        &self.graph
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn goals(&self) -> &[Goal] {
        &self.goals
    }

    pub fn truth(&self) -> Truth {
        self.truth
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    pub fn schedule(&self) -> &[ScheduleEntry] {
        &self.schedule
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn base_enodes(&self) -> Option<usize> {
        self.base_enodes
    }

    pub fn add_term(&mut self, t: &Term) -> Result<Id, Error> {
        self.graph.add_term(t)
    }

    pub fn add_goal(&mut self, goal: Goal) -> Result<(), Error> {
        self.graph.add_term(&goal.lhs)?;
        self.graph.add_term(&goal.rhs)?;
        self.goals.push(goal);
        Ok(())
    }

    /// Black union of two terms, recorded for replay.
    pub fn union_terms(&mut self, lhs: &Term, rhs: &Term) -> Result<bool, Error> {
        let a = self.graph.add_term(lhs)?;
        let b = self.graph.add_term(rhs)?;
        let (_, did) = self.graph.union(a, b)?;
        self.schedule.push(ScheduleEntry::Union {
            lhs: lhs.to_string(),
            rhs: rhs.to_string(),
            terms: (lhs.clone(), rhs.clone()),
        });
        Ok(did)
    }

    pub fn create_color(&mut self, parent: Option<ColorId>, label: &str) -> Result<ColorId, Error> {
        let c = self.graph.create_color(parent, label)?;
        self.schedule.push(ScheduleEntry::Color {
            color: c,
            parent,
            label: label.to_string(),
        });
        Ok(c)
    }

    /// Assumes `lhs = rhs` in color `c`, recorded for replay.
    pub fn assume(&mut self, c: ColorId, lhs: &Term, rhs: &Term) -> Result<bool, Error> {
        self.graph.check_color(c)?;
        let a = self.graph.add_term_in(Some(c), lhs)?;
        let b = self.graph.add_term_in(Some(c), rhs)?;
        let (_, did) = self.graph.colored_union(c, a, b)?;
        self.schedule.push(ScheduleEntry::Assume {
            color: c,
            lhs: lhs.to_string(),
            rhs: rhs.to_string(),
            terms: (lhs.clone(), rhs.clone()),
        });
        Ok(did)
    }

    /// One iteration: match every rule, apply, rebuild. Returns whether
    /// anything changed.
    pub fn step(&mut self) -> Result<bool, Error> {
        self.graph.rebuild();
        self.graph.begin_iteration();
        let ids_before = self.graph.black().num_ids();
        let g = &self.graph;
        let matches: Vec<Vec<Match>> = self.rules.par_iter().map(|r| ematch_colored(g, &r.lhs)).collect();
        let mut merged = 0;
        for (i, rule) in self.rules.iter().enumerate() {
            let n = apply_matches(&mut self.graph, rule, &matches[i], self.truth)?;
            self.rule_counts[i] += n;
            merged += n;
        }
        merged += self.graph.rebuild();
        Ok(merged > 0 || self.graph.black().num_ids() != ids_before)
    }

    fn cap_hit(&self, start: Instant) -> Option<StopReason> {
        if self.iterations >= self.limits.iter_cap {
            return Some(StopReason::IterationCap);
        }
        if self.graph.total_nodes() > self.limits.node_cap {
            return Some(StopReason::NodeCap);
        }
        if let Some(t) = self.limits.time_cap {
            if self.elapsed + start.elapsed() > t {
                return Some(StopReason::TimeCap);
            }
        }
        if let Some(m) = self.limits.mem_cap {
            if (self.limits.mem_probe)() > m {
                return Some(StopReason::MemoryCap);
            }
        }
        None
    }

    /// Runs until saturation (splitting cases as needed) or a cap.
    pub fn run(&mut self) -> Result<RunReport, Error> {
        let start = Instant::now();
        self.graph.rebuild();
        let stop = loop {
            if let Some(reason) = self.cap_hit(start) {
                break reason;
            }
            self.iterations += 1;
            if self.step()? {
                continue;
            }
            let splits = if self.splitting { self.detect_splits() } else { vec![] };
            if splits.is_empty() {
                break StopReason::Saturated;
            }
            if self.base_enodes.is_none() {
                self.base_enodes = Some(self.graph.black_node_count());
            }
            for (rel, spec) in splits {
                self.apply_split(rel, &spec)?;
            }
            self.graph.rebuild();
        };
        self.elapsed += start.elapsed();
        self.stop = Some(stop);
        Ok(self.report())
    }

    /// First blocked condition at each leaf relation that may still split.
    pub fn detect_splits(&self) -> Vec<(Rel, SplitSpec)> {
        let g = &self.graph;
        let leaves: Vec<Rel> = if g.colors().is_empty() {
            vec![None]
        } else {
            g.leaves().into_iter().map(Some).collect()
        };
        let depth = |r: Rel| r.map(|c| g.color(c).depth()).unwrap_or(0);
        let mut budget = self
            .limits
            .max_colors
            .map(|m| m.saturating_sub(g.colors().len()) / 2)
            .unwrap_or(usize::MAX);
        let mut open: Vec<Rel> = leaves.into_iter().filter(|&l| depth(l) < self.limits.split_depth).collect();
        let mut out: Vec<(Rel, SplitSpec)> = vec![];
        if open.is_empty() || budget == 0 {
            return out;
        }
        'rules: for rule in self.rules.iter() {
            let Some(cond) = &rule.condition else { continue };
            for m in ematch_colored(g, &rule.lhs) {
                let Some(c) = lookup_instance(g, m.color, cond, &m) else { continue };
                let mut i = 0;
                while i < open.len() {
                    let leaf = open[i];
                    let within = match (m.color, leaf) {
                        (None, _) => true,
                        (Some(mc), Some(l)) => g.is_visible(mc, Some(l)),
                        (Some(_), None) => false,
                    };
                    let rep = g.find_in(leaf, c);
                    if within
                        && rep != g.find_in(leaf, self.truth.t)
                        && rep != g.find_in(leaf, self.truth.f)
                        && !self.split_done.contains(&(leaf, rep))
                    {
                        out.push((leaf, self.truth.split(rep)));
                        open.remove(i);
                        budget -= 1;
                        if open.is_empty() || budget == 0 {
                            break 'rules;
                        }
                    } else {
                        i += 1;
                    }
                }
            }
        }
        out
    }

    /// Creates one child color of `parent` per branch of `spec`.
    pub fn apply_split(&mut self, parent: Rel, spec: &SplitSpec) -> Result<Vec<ColorId>, Error> {
        let key = (parent, self.graph.find_in(parent, spec.condition));
        if !self.split_done.insert(key) {
            log::warn!("split on class {} under {:?} already applied", key.1, parent);
            return Ok(vec![]);
        }
        let cond = self
            .graph
            .extract(parent, spec.condition)
            .ok_or(Error::UnknownId(spec.condition))?;
        let mut out = vec![];
        for (label, target) in &spec.branches {
            let target_term = self.graph.extract(parent, *target).ok_or(Error::UnknownId(*target))?;
            let c = self.create_color(parent, &format!("{cond} = {label}"))?;
            self.assume(c, &cond, &target_term)?;
            out.push(c);
        }
        Ok(out)
    }

    /// `(a, b)` labels from black down to `c`.
    pub fn label_path(&self, c: ColorId) -> String {
        self.graph
            .chain(c)
            .iter()
            .map(|&a| self.graph.color(a).label().to_string())
            .collect::<Vec<_>>()
            .join(" / ")
    }

    pub fn verdicts(&self) -> Vec<GoalVerdict> {
        let g = &self.graph;
        self.goals
            .iter()
            .map(|goal| GoalVerdict {
                goal: goal.to_string(),
                black: check_goal(g, None, &goal.lhs, &goal.rhs),
                by_cases: prove_by_cases(g, None, &goal.lhs, &goal.rhs),
                leaves: g
                    .leaves()
                    .into_iter()
                    .map(|c| (c, self.label_path(c), check_goal(g, Some(c), &goal.lhs, &goal.rhs)))
                    .collect(),
            })
            .collect()
    }

    pub fn report(&self) -> RunReport {
        let g = &self.graph;
        RunReport {
            iterations: self.iterations,
            black_enodes: g.black_node_count(),
            colors: g
                .colors()
                .iter()
                .map(|c| ColorReport {
                    id: c.id(),
                    parent: c.parent(),
                    label: c.label().to_string(),
                    colored_enodes: c.colored_node_count(),
                })
                .collect(),
            total_enodes: g.total_nodes(),
            base_enodes: self.base_enodes,
            assumptions: g.colors().len(),
            rule_applications: self
                .rules
                .iter()
                .zip(&self.rule_counts)
                .map(|(r, &n)| (r.name.clone(), n))
                .collect(),
            goals: self.verdicts(),
            wall_time_secs: self.elapsed.as_secs_f64(),
            stop_reason: self.stop.unwrap_or(StopReason::IterationCap),
        }
    }
}

// ---- plain e-graphs ----------------------------------------------------------

fn instantiate_plain(g: &mut EGraph, pat: &Pattern, m: &Match) -> Result<Id, Error> {
    match pat {
        Pattern::Hole(v) => Ok(m.get(*v).expect("rule holes are validated")),
        Pattern::Apply(op, args) => {
            let children = args
                .iter()
                .map(|a| instantiate_plain(g, a, m))
                .collect::<Result<Vec<Id>, Error>>()?;
            g.add(ENode::new(*op, children))
        }
    }
}

fn lookup_plain(g: &EGraph, pat: &Pattern, m: &Match) -> Option<Id> {
    match pat {
        Pattern::Hole(v) => m.get(*v),
        Pattern::Apply(op, args) => {
            let children = args.iter().map(|a| lookup_plain(g, a, m)).collect::<Option<Vec<Id>>>()?;
            g.lookup(&ENode::new(*op, children))
        }
    }
}

/// One saturation iteration on a plain e-graph. `counts` gets per-rule
/// merge counts added.
pub fn step_plain(g: &mut EGraph, rules: &[Rule], truth: Truth, counts: &mut [usize]) -> Result<bool, Error> {
    g.rebuild();
    let ids_before = g.num_ids();
    let matches: Vec<Vec<Match>> = rules.iter().map(|r| ematch_black(g, &r.lhs)).collect();
    let mut merged = 0;
    for (i, rule) in rules.iter().enumerate() {
        for m in &matches[i] {
            if let Some(cond) = &rule.condition {
                let c = instantiate_plain(g, cond, m)?;
                if g.find(c) != g.find(truth.t) {
                    continue;
                }
            }
            let id = instantiate_plain(g, &rule.rhs, m)?;
            let (_, did) = g.union(id, m.root)?;
            counts[i] += did as usize;
            merged += did as usize;
        }
    }
    merged += g.rebuild();
    Ok(merged > 0 || g.num_ids() != ids_before)
}

/// Saturates a plain e-graph. Returns the iterations used and why it
/// stopped.
pub fn saturate_plain(
    g: &mut EGraph,
    rules: &[Rule],
    truth: Truth,
    limits: &Limits,
    counts: &mut [usize],
) -> Result<(usize, StopReason), Error> {
    let start = Instant::now();
    let mut iterations = 0;
    loop {
        if iterations >= limits.iter_cap {
            return Ok((iterations, StopReason::IterationCap));
        }
        if g.total_size() > limits.node_cap {
            return Ok((iterations, StopReason::NodeCap));
        }
        if limits.time_cap.is_some_and(|t| start.elapsed() > t) {
            return Ok((iterations, StopReason::TimeCap));
        }
        if limits.mem_cap.is_some_and(|m| (limits.mem_probe)() > m) {
            return Ok((iterations, StopReason::MemoryCap));
        }
        iterations += 1;
        if !step_plain(g, rules, truth, counts)? {
            return Ok((iterations, StopReason::Saturated));
        }
    }
}

/// First condition class blocking a conditional rule, in rule then match
/// order.
pub fn blocked_condition(g: &EGraph, rules: &[Rule], truth: Truth) -> Option<Id> {
    for rule in rules {
        let Some(cond) = &rule.condition else { continue };
        for m in ematch_black(g, &rule.lhs) {
            if let Some(c) = lookup_plain(g, cond, &m) {
                let c = g.find(c);
                if c != g.find(truth.t) && c != g.find(truth.f) {
                    return Some(c);
                }
            }
        }
    }
    None
}

/// Black verdict of a goal on a plain e-graph.
pub fn check_goal_plain(g: &EGraph, lhs: &Term, rhs: &Term) -> bool {
    match (g.lookup_term(lhs), g.lookup_term(rhs)) {
        (Some(a), Some(b)) => g.find(a) == g.find(b),
        _ => false,
    }
}
