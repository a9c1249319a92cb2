//! Separate e-graphs per assumption: the reference semantics for colors and
//! the comparator for benchmarks.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;

use crate::colors::{ColorId, ColoredEGraph, NodeMode, Rel};
use crate::egraph::EGraph;
use crate::ematch::{canonicalize_match_in, ematch_black, ematch_colored, Match, Pattern};
use crate::language::{Term, Symbol};
use crate::saturate::{
    blocked_condition, check_goal_plain, saturate_plain, Goal, GoalVerdict, Limits, Prover, Rule, ScheduleEntry,
    SplitSpec, StopReason, Truth,
};
use crate::ufind::Id;
use crate::Error;

/// Assumption path: branch labels from the root down.
pub type Path = Vec<String>;

#[derive(Clone, Debug)]
pub struct CloneNode {
    pub path: Path,
    pub parent: Option<usize>,
    pub graph: EGraph,
    pub saturated: bool,
}

/// The root e-graph (index 0) and every clone forked from it.
#[derive(Clone, Debug)]
pub struct CloneSet {
    nodes: Vec<CloneNode>,
    truth: Truth,
}

impl CloneSet {
    /// `root` must already contain `true` and `false`.
    pub fn new(root: EGraph, truth: Truth) -> Self {
        CloneSet {
            nodes: vec![CloneNode {
                path: vec![],
                parent: None,
                graph: root,
                saturated: false,
            }],
            truth,
        }
    }

    pub fn truth(&self) -> Truth {
        self.truth
    }

    pub fn root(&self) -> &EGraph {
        &self.nodes[0].graph
    }

    pub fn nodes(&self) -> &[CloneNode] {
        &self.nodes
    }

    pub fn node_mut(&mut self, i: usize) -> &mut CloneNode {
        &mut self.nodes[i]
    }

    /// Number of forked clones, the root excluded.
    pub fn num_clones(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn index_of(&self, path: &[String]) -> Option<usize> {
        self.nodes.iter().position(|n| n.path == path)
    }

    pub fn get(&self, path: &[String]) -> Option<&EGraph> {
        self.index_of(path).map(|i| &self.nodes[i].graph)
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&j| self.nodes[j].parent == Some(i)).collect()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.children(i).is_empty()).collect()
    }

    /// Clones whose path has exactly `depth` labels.
    pub fn clones_at_depth(&self, depth: usize) -> usize {
        self.nodes.iter().filter(|n| n.path.len() == depth && depth > 0).count()
    }

    /// Deep-copies the clone at `parent` once per branch of `spec` (whose
    /// ids refer to that clone) and applies the branch union.
    pub fn fork(&mut self, parent: &[String], spec: &SplitSpec) -> Result<Vec<Path>, Error> {
        let pi = self
            .index_of(parent)
            .ok_or_else(|| Error::Parse(format!("unknown clone path {parent:?}")))?;
        Ok(self
            .fork_at(pi, spec)?
            .into_iter()
            .map(|i| self.nodes[i].path.clone())
            .collect())
    }

    fn fork_at(&mut self, pi: usize, spec: &SplitSpec) -> Result<Vec<usize>, Error> {
        let mut out = vec![];
        let cond = extract_plain(&self.nodes[pi].graph, spec.condition);
        for (label, target) in &spec.branches {
            let mut graph = self.nodes[pi].graph.clone();
            graph.union(spec.condition, *target)?;
            graph.rebuild();
            let mut path = self.nodes[pi].path.clone();
            path.push(match &cond {
                Some(t) => format!("{t} = {label}"),
                None => label.clone(),
            });
            self.nodes.push(CloneNode {
                path,
                parent: Some(pi),
                graph,
                saturated: false,
            });
            out.push(self.nodes.len() - 1);
        }
        Ok(out)
    }

    /// Total e-nodes over the root and every clone.
    pub fn count_enodes(&self) -> usize {
        self.nodes.iter().map(|n| n.graph.total_size()).sum()
    }

    fn saturate(&mut self, i: usize, rules: &[Rule], limits: &Limits, counts: &mut [usize]) -> Result<StopReason, Error> {
        let truth = self.truth;
        let node = &mut self.nodes[i];
        let (_, stop) = saturate_plain(&mut node.graph, rules, truth, limits, counts)?;
        node.saturated = stop == StopReason::Saturated;
        Ok(stop)
    }

    /// Whether the goal holds at clone `i`, or by cases in all its children.
    pub fn prove_by_cases(&self, i: usize, goal: &Goal) -> bool {
        if check_goal_plain(&self.nodes[i].graph, &goal.lhs, &goal.rhs) {
            return true;
        }
        let kids = self.children(i);
        !kids.is_empty() && kids.into_iter().all(|k| self.prove_by_cases(k, goal))
    }

    /// Rebuilds the colors of a finished colored run as clones: the root gets
    /// the initial terms and black unions, each color a copy of its parent's
    /// clone plus its assumptions. Every graph is saturated.
    pub fn replay(prover: &Prover, terms: &[Term], limits: &Limits) -> Result<(CloneSet, FxHashMap<ColorId, usize>), Error> {
        let mut root = EGraph::new();
        let truth = Truth::install(&mut root);
        for t in terms {
            root.add_term(t)?;
        }
        for goal in prover.goals() {
            root.add_term(&goal.lhs)?;
            root.add_term(&goal.rhs)?;
        }
        let mut assumptions: FxHashMap<ColorId, Vec<(Term, Term)>> = FxHashMap::default();
        let mut colors: Vec<(ColorId, Option<ColorId>, String)> = vec![];
        for entry in prover.schedule() {
            match entry {
                ScheduleEntry::Union { terms: (l, r), .. } => {
                    let a = root.add_term(l)?;
                    let b = root.add_term(r)?;
                    root.union(a, b)?;
                }
                ScheduleEntry::Color { color, parent, label } => colors.push((*color, *parent, label.clone())),
                ScheduleEntry::Assume { color, terms, .. } => {
                    assumptions.entry(*color).or_default().push(terms.clone());
                }
            }
        }
        root.rebuild();
        let mut set = CloneSet::new(root, truth);
        let mut counts = vec![0; prover.rules().len()];
        set.saturate(0, prover.rules(), limits, &mut counts)?;
        let mut index: FxHashMap<ColorId, usize> = FxHashMap::default();
        for (color, parent, label) in colors {
            let pi = match parent {
                None => 0,
                Some(p) => index[&p],
            };
            let mut graph = set.nodes[pi].graph.clone();
            for (l, r) in assumptions.get(&color).into_iter().flatten() {
                let a = graph.add_term(l)?;
                let b = graph.add_term(r)?;
                graph.union(a, b)?;
            }
            graph.rebuild();
            let mut path = set.nodes[pi].path.clone();
            path.push(label);
            set.nodes.push(CloneNode {
                path,
                parent: Some(pi),
                graph,
                saturated: false,
            });
            let i = set.nodes.len() - 1;
            set.saturate(i, prover.rules(), limits, &mut counts)?;
            index.insert(color, i);
        }
        Ok((set, index))
    }
}

/// Result of the clone-based prover.
#[derive(Clone, Debug, Serialize)]
pub struct SeparateReport {
    pub iterations: usize,
    pub graphs: usize,
    pub clones_per_depth: Vec<usize>,
    pub total_enodes: usize,
    pub base_enodes: Option<usize>,
    pub assumptions: usize,
    pub goals: Vec<GoalVerdict>,
    pub wall_time_secs: f64,
    pub stop_reason: StopReason,
}

/// Case-splitting prover that forks whole e-graphs. Same split policy as
/// [`Prover`]: first blocked condition per leaf, breadth first, bounded by
/// the split depth.
pub struct SeparateProver {
    set: CloneSet,
    rules: Vec<Rule>,
    goals: Vec<Goal>,
    limits: Limits,
    counts: Vec<usize>,
    base_enodes: Option<usize>,
    stop: Option<StopReason>,
    elapsed: Duration,
}

impl SeparateProver {
    pub fn new(rules: Vec<Rule>, limits: Limits) -> Self {
        let mut root = EGraph::new();
        let truth = Truth::install(&mut root);
        let n = rules.len();
        SeparateProver {
            set: CloneSet::new(root, truth),
            rules,
            goals: vec![],
            limits,
            counts: vec![0; n],
            base_enodes: None,
            stop: None,
            elapsed: Duration::ZERO,
        }
    }

    pub fn clones(&self) -> &CloneSet {
        &self.set
    }

    pub fn add_term(&mut self, t: &Term) -> Result<Id, Error> {
        self.set.nodes[0].graph.add_term(t)
    }

    pub fn add_goal(&mut self, goal: Goal) -> Result<(), Error> {
        self.add_term(&goal.lhs)?;
        self.add_term(&goal.rhs)?;
        self.goals.push(goal);
        Ok(())
    }

    fn remaining(&self, start: Instant) -> Limits {
        let mut l = self.limits;
        if let Some(t) = l.time_cap {
            l.time_cap = Some(t.saturating_sub(start.elapsed()));
        }
        l.node_cap = l.node_cap.saturating_sub(self.set.count_enodes() - self.set.nodes[0].graph.total_size());
        l
    }

    pub fn run(&mut self) -> Result<SeparateReport, Error> {
        let start = Instant::now();
        let mut queue: VecDeque<usize> = VecDeque::new();
        let limits = self.remaining(start);
        let mut stop = self.set.saturate(0, &self.rules, &limits, &mut self.counts)?;
        if stop == StopReason::Saturated {
            queue.push_back(0);
        }
        while let Some(i) = queue.pop_front() {
            if self.set.nodes[i].path.len() >= self.limits.split_depth {
                continue;
            }
            let Some(cond) = blocked_condition(&self.set.nodes[i].graph, &self.rules, self.set.truth) else {
                continue;
            };
            if self.base_enodes.is_none() {
                self.base_enodes = Some(self.set.nodes[0].graph.total_size());
            }
            let spec = self.set.truth.split(cond);
            for child in self.set.fork_at(i, &spec)? {
                let limits = self.remaining(start);
                stop = self.set.saturate(child, &self.rules, &limits, &mut self.counts)?;
                if stop != StopReason::Saturated {
                    break;
                }
                if self.set.count_enodes() > self.limits.node_cap {
                    stop = StopReason::NodeCap;
                    break;
                }
                queue.push_back(child);
            }
            if stop != StopReason::Saturated {
                break;
            }
        }
        self.elapsed += start.elapsed();
        self.stop = Some(stop);
        Ok(self.report())
    }

    pub fn report(&self) -> SeparateReport {
        let max_depth = self.set.nodes.iter().map(|n| n.path.len()).max().unwrap_or(0);
        SeparateReport {
            iterations: self.counts.iter().sum(),
            graphs: self.set.nodes.len(),
            clones_per_depth: (1..=max_depth).map(|d| self.set.clones_at_depth(d)).collect(),
            total_enodes: self.set.count_enodes(),
            base_enodes: self.base_enodes,
            assumptions: self.set.num_clones(),
            goals: self
                .goals
                .iter()
                .map(|g| GoalVerdict {
                    goal: g.to_string(),
                    black: check_goal_plain(self.set.root(), &g.lhs, &g.rhs),
                    by_cases: self.set.prove_by_cases(0, g),
                    // clone index in place of a color id
                    leaves: self
                        .set
                        .leaves()
                        .into_iter()
                        .filter(|&i| i > 0)
                        .map(|i| {
                            let n = &self.set.nodes[i];
                            (ColorId::from(i), n.path.join(" / "), check_goal_plain(&n.graph, &g.lhs, &g.rhs))
                        })
                        .collect(),
                })
                .collect(),
            wall_time_secs: self.elapsed.as_secs_f64(),
            stop_reason: self.stop.unwrap_or(StopReason::IterationCap),
        }
    }
}

/// Smallest term of every class of a plain e-graph, keyed by root.
pub fn extract_all_plain(g: &EGraph) -> FxHashMap<Id, (usize, Term)> {
    let mut best: FxHashMap<Id, (usize, Term)> = FxHashMap::default();
    loop {
        let mut changed = false;
        for class in g.classes() {
            for n in &class.nodes {
                let mut size = 1;
                let mut args = Vec::with_capacity(n.children.len());
                let mut ok = true;
                for &ch in &n.children {
                    match best.get(&g.find(ch)) {
                        Some((s, t)) => {
                            size += s;
                            args.push(t.clone());
                        }
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if !ok {
                    continue;
                }
                let cand = (size, Term::new(n.op, args));
                if best.get(&class.id).is_none_or(|cur| cand < *cur) {
                    best.insert(class.id, cand);
                    changed = true;
                }
            }
        }
        if !changed {
            return best;
        }
    }
}

pub fn extract_plain(g: &EGraph, id: Id) -> Option<Term> {
    extract_all_plain(g).remove(&g.find(id)).map(|(_, t)| t)
}

/// One term per e-node: the node's operator over its children's smallest
/// terms.
fn node_terms(nodes: impl Iterator<Item = crate::language::ENode>, best: &FxHashMap<Id, (usize, Term)>, find: impl Fn(Id) -> Id) -> Vec<Term> {
    let mut out: Vec<Term> = nodes
        .filter_map(|n| {
            let args = n
                .children
                .iter()
                .map(|&c| best.get(&find(c)).map(|(_, t)| t.clone()))
                .collect::<Option<Vec<Term>>>()?;
            Some(Term::new(n.op, args))
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct DiffEntry {
    pub relation: String,
    pub kind: String,
    pub detail: String,
}

#[derive(Clone, Debug, Default, Serialize, PartialEq, Eq)]
pub struct DiffReport {
    /// Set when the comparison could not be made.
    pub refused: Option<String>,
    pub relations: usize,
    pub probe_terms: usize,
    pub probe_matches: usize,
    pub entries: Vec<DiffEntry>,
}

impl DiffReport {
    pub fn is_empty(&self) -> bool {
        self.refused.is_none() && self.entries.is_empty()
    }
}

/// Compares every relation of a finished colored run with its clone:
/// represented terms, the partition over them, and the canonical matches of
/// each probe pattern.
pub fn oracle_compare(
    prover: &Prover,
    set: &CloneSet,
    index: &FxHashMap<ColorId, usize>,
    probes: &[Pattern],
) -> DiffReport {
    let mut report = DiffReport::default();
    if prover.stop_reason() != Some(StopReason::Saturated) {
        report.refused = Some(format!("colored run stopped with {:?}", prover.stop_reason()));
        return report;
    }
    if let Some(n) = set.nodes.iter().find(|n| !n.saturated) {
        report.refused = Some(format!("clone {:?} is not saturated", n.path));
        return report;
    }
    let g = prover.graph();
    if index.len() != g.colors().len() {
        report.refused = Some("schedules differ in the number of colors".into());
        return report;
    }
    let strict = g.mode() == NodeMode::Colored;
    let probe_matches: Vec<Vec<Match>> = probes.iter().map(|p| ematch_colored(g, p)).collect();
    let mut rels: Vec<(Rel, usize)> = vec![(None, 0)];
    rels.extend(g.color_ids().map(|c| (Some(c), index[&c])));
    for (rel, ci) in rels {
        report.relations += 1;
        let name = match rel {
            None => "black".to_string(),
            Some(c) => format!("{c} ({})", prover.label_path(c)),
        };
        let clone = &set.nodes[ci].graph;
        compare_relation(g, rel, clone, strict, probes, &probe_matches, &name, &mut report);
    }
    report
}

/// A match as `(root, substitution)`.
type Found = (Id, Vec<(Symbol, Id)>);

#[allow(clippy::too_many_arguments)]
fn compare_relation(
    g: &ColoredEGraph,
    rel: Rel,
    clone: &EGraph,
    strict: bool,
    probes: &[Pattern],
    probe_matches: &[Vec<Match>],
    name: &str,
    report: &mut DiffReport,
) {
    let mut diff = |kind: &str, detail: String| {
        report.entries.push(DiffEntry {
            relation: name.to_string(),
            kind: kind.to_string(),
            detail,
        })
    };
    let best_c = g.extract_all(rel);
    let best_k = extract_all_plain(clone);
    let mut terms = node_terms(g.visible_nodes(rel).into_iter().map(|(n, _)| n), &best_c, |i| g.find_in(rel, i));
    terms.extend(node_terms(
        clone.classes().flat_map(|c| c.nodes.iter().cloned()),
        &best_k,
        |i| clone.find(i),
    ));
    terms.sort();
    terms.dedup();
    report.probe_terms += terms.len();
    let mut fwd: FxHashMap<Id, Id> = FxHashMap::default();
    let mut back: FxHashMap<Id, Id> = FxHashMap::default();
    for t in &terms {
        let a = g.lookup_term_in(rel, t).map(|i| g.find_in(rel, i));
        let b = clone.lookup_term(t).map(|i| clone.find(i));
        match (a, b) {
            (Some(a), Some(b)) => {
                let fa = *fwd.entry(a).or_insert(b);
                let bb = *back.entry(b).or_insert(a);
                // extra black terms may soundly merge more in monochrome mode
                if (strict && fa != b) || bb != a {
                    diff("partition", format!("{t} splits differently"));
                }
            }
            (None, Some(_)) => diff("missing-colored", t.to_string()),
            (Some(_), None) if strict => diff("missing-clone", t.to_string()),
            _ => {}
        }
    }
    // class translation through smallest terms
    let to_clone = |id: Id| -> Option<Id> {
        let (_, t) = best_c.get(&g.find_in(rel, id))?;
        clone.lookup_term(t).map(|i| clone.find(i))
    };
    let visible: FxHashSet<Rel> = {
        let mut s: FxHashSet<Rel> = FxHashSet::default();
        s.insert(None);
        if let Some(c) = rel {
            s.extend(g.chain(c).into_iter().map(Some));
        }
        s
    };
    for (p, found) in probes.iter().zip(probe_matches) {
        let mut mine: Vec<Found> = found
            .iter()
            .filter(|m| visible.contains(&m.color))
            .map(|m| {
                let m = canonicalize_match_in(g, m, rel);
                (m.root, m.subst)
            })
            .collect();
        mine.sort();
        mine.dedup();
        let theirs: Vec<Found> = ematch_black(clone, p).into_iter().map(|m| (m.root, m.subst)).collect();
        report.probe_matches += theirs.len();
        if strict {
            let translated: Option<Vec<Found>> = mine
                .iter()
                .map(|(r, s)| {
                    let s = s.iter().map(|&(v, id)| to_clone(id).map(|k| (v, k))).collect::<Option<Vec<_>>>()?;
                    Some((to_clone(*r)?, s))
                })
                .collect();
            match translated {
                None => diff("match-translation", format!("{p}: a colored match has no clone counterpart")),
                Some(mut t) => {
                    t.sort();
                    if t != theirs {
                        diff("matches", format!("{p}: colored {} vs clone {}", t.len(), theirs.len()));
                    }
                }
            }
        } else {
            // every clone match must show up among the colored ones
            let to_colored = |id: Id| back.get(&clone.find(id)).copied();
            let covered = theirs.iter().all(|(r, s)| {
                let Some(r) = to_colored(*r) else { return false };
                let Some(s) = s.iter().map(|&(v, id)| to_colored(id).map(|k| (v, k))).collect::<Option<Vec<_>>>() else {
                    return false;
                };
                mine.binary_search(&(r, s)).is_ok()
            });
            if !covered {
                diff("matches", format!("{p}: clone matches missing from colored"));
            }
        }
    }
}

/// Runs a colored prover to the end, replays it on clones and compares.
pub fn compare_run(prover: &Prover, terms: &[Term], limits: &Limits, probes: &[Pattern]) -> Result<DiffReport, Error> {
    let (set, index) = CloneSet::replay(prover, terms, limits)?;
    Ok(oracle_compare(prover, &set, &index, probes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fork_copies_and_unions() {
        let mut root = EGraph::new();
        let truth = Truth::install(&mut root);
        let c = root.add_term(&"(p x)".parse().unwrap()).unwrap();
        let mut set = CloneSet::new(root, truth);
        let paths = set.fork(&[], &truth.split(c)).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(set.num_clones(), 2);
        let t = set.get(&paths[0]).unwrap();
        assert_eq!(t.find(c), t.find(truth.t));
        assert_ne!(set.root().find(c), set.root().find(truth.t));
        // independent copies
        let before = set.get(&paths[1]).unwrap().total_size();
        set.node_mut(1).graph.add_term(&"(q y)".parse().unwrap()).unwrap();
        assert_eq!(set.get(&paths[1]).unwrap().total_size(), before);
        let nested = set.fork(&paths[0], &truth.split(c)).unwrap();
        assert_eq!(nested.len(), 2);
        assert_eq!(set.clones_at_depth(2), 2);
        let none = set.fork(&[], &SplitSpec { condition: c, branches: vec![] }).unwrap();
        assert!(none.is_empty());
        assert!(set.fork(&["nope".to_string()], &truth.split(c)).is_err());
        assert_eq!(set.count_enodes(), 5 * 4 + 6);
    }
}
