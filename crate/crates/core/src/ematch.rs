//! Patterns and top-down e-matching, black and colored.
//!
//! Colored matching runs one search for all colors. When the search
//! descends into a child class, it also tries the e-nodes that only become
//! reachable in a descendant color: classes that color merged into this one,
//! and the color's own colored e-nodes. The match is then tagged with the
//! smallest relation it needs.

use std::fmt;
use std::str::FromStr;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;
use symbolic_expressions::Sexp;

use crate::colors::{ColorId, ColoredEGraph, Rel};
use crate::egraph::EGraph;
use crate::language::{parse_one, ENode, Symbol, Term};
use crate::ufind::Id;
use crate::Error;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Pattern {
    /// `?name`; the name is stored without the `?`.
    Hole(Symbol),
    Apply(Symbol, Vec<Pattern>),
}

impl Pattern {
    pub fn leaf(op: &str) -> Pattern {
        Pattern::Apply(op.into(), vec![])
    }

    /// Hole names in first-occurrence order.
    pub fn holes(&self) -> Vec<Symbol> {
        fn go(p: &Pattern, out: &mut Vec<Symbol>) {
            match p {
                Pattern::Hole(v) => {
                    if !out.contains(v) {
                        out.push(*v);
                    }
                }
                Pattern::Apply(_, args) => args.iter().for_each(|a| go(a, out)),
            }
        }
        let mut out = vec![];
        go(self, &mut out);
        out
    }

    /// Every `(op, arity)` used.
    pub fn signature(&self) -> Vec<(Symbol, usize)> {
        fn go(p: &Pattern, out: &mut Vec<(Symbol, usize)>) {
            if let Pattern::Apply(op, args) = p {
                out.push((*op, args.len()));
                args.iter().for_each(|a| go(a, out));
            }
        }
        let mut out = vec![];
        go(self, &mut out);
        out
    }

    pub(crate) fn from_sexp(sexp: &Sexp) -> Result<Pattern, Error> {
        match sexp {
            Sexp::String(s) => match s.strip_prefix('?') {
                Some("") => Err(Error::Parse("hole without a name".into())),
                Some(name) => Ok(Pattern::Hole(name.into())),
                None => Ok(Pattern::leaf(s)),
            },
            Sexp::List(items) => {
                let (head, rest) = items
                    .split_first()
                    .ok_or_else(|| Error::Parse("empty list is not a pattern".into()))?;
                let op = match head {
                    Sexp::String(s) if !s.starts_with('?') => s.as_str(),
                    other => return Err(Error::Parse(format!("bad operator `{other}`"))),
                };
                let args = rest.iter().map(Pattern::from_sexp).collect::<Result<_, _>>()?;
                Ok(Pattern::Apply(op.into(), args))
            }
            Sexp::Empty => Err(Error::Parse("empty pattern".into())),
        }
    }

    /// Substitutes a ground term for every hole.
    pub fn instantiate_term(&self, subst: &impl Fn(Symbol) -> Term) -> Term {
        match self {
            Pattern::Hole(v) => subst(*v),
            Pattern::Apply(op, args) => Term::new(*op, args.iter().map(|a| a.instantiate_term(subst)).collect()),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Hole(v) => write!(f, "?{v}"),
            Pattern::Apply(op, args) if args.is_empty() => write!(f, "{op}"),
            Pattern::Apply(op, args) => {
                write!(f, "({op}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_pattern(s)
    }
}

pub fn parse_pattern(text: &str) -> Result<Pattern, Error> {
    Pattern::from_sexp(&parse_one(text)?)
}

impl From<&Term> for Pattern {
    fn from(t: &Term) -> Pattern {
        Pattern::Apply(t.op, t.args.iter().map(Pattern::from).collect())
    }
}

/// A pattern occurrence. `subst` is sorted by hole name and, like `root`,
/// canonical under the match's relation.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize)]
pub struct Match {
    pub color: Option<ColorId>,
    pub root: Id,
    pub subst: Vec<(Symbol, Id)>,
}

impl Match {
    pub fn get(&self, var: Symbol) -> Option<Id> {
        self.subst.iter().find(|(v, _)| *v == var).map(|&(_, id)| id)
    }
}

/// Pattern with holes numbered in first-occurrence order.
#[derive(Clone, Debug)]
enum Compiled {
    Hole(usize),
    Apply(Symbol, Vec<Compiled>),
}

fn compile(p: &Pattern, vars: &mut Vec<Symbol>) -> Compiled {
    match p {
        Pattern::Hole(v) => {
            let i = match vars.iter().position(|x| x == v) {
                Some(i) => i,
                None => {
                    vars.push(*v);
                    vars.len() - 1
                }
            };
            Compiled::Hole(i)
        }
        Pattern::Apply(op, args) => Compiled::Apply(*op, args.iter().map(|a| compile(a, vars)).collect()),
    }
}

type Binding = Vec<Option<Id>>;

fn finish(vars: &[Symbol], color: Rel, root: Id, binding: &Binding, find: impl Fn(Id) -> Id) -> Match {
    let mut subst: Vec<(Symbol, Id)> = vars
        .iter()
        .zip(binding)
        .map(|(v, id)| (*v, find(id.expect("every hole is bound"))))
        .collect();
    subst.sort_unstable();
    Match {
        color,
        root: find(root),
        subst,
    }
}

// ---- black -------------------------------------------------------------------

/// All matches of `pat` in a plain e-graph, sorted and deduplicated.
pub fn ematch_black(g: &EGraph, pat: &Pattern) -> Vec<Match> {
    let mut vars = vec![];
    let prog = compile(pat, &mut vars);
    let mut out = vec![];
    for class in g.classes() {
        if class.nodes.is_empty() {
            continue;
        }
        let mut found = vec![];
        black_search(g, &prog, class.id, vec![None; vars.len()], &mut found);
        out.extend(found.iter().map(|b| finish(&vars, None, class.id, b, |i| g.find(i))));
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn black_search(g: &EGraph, p: &Compiled, class: Id, binding: Binding, out: &mut Vec<Binding>) {
    match p {
        Compiled::Hole(i) => match binding[*i] {
            None => {
                let mut b = binding;
                b[*i] = Some(class);
                out.push(b);
            }
            Some(j) => {
                if g.find(j) == g.find(class) {
                    out.push(binding);
                }
            }
        },
        Compiled::Apply(op, args) => {
            for n in &g.class(class).nodes {
                if n.op != *op || n.children.len() != args.len() {
                    continue;
                }
                let mut states = vec![binding.clone()];
                for (a, &ch) in args.iter().zip(&n.children) {
                    let mut next = vec![];
                    for s in states {
                        black_search(g, a, ch, s, &mut next);
                    }
                    states = next;
                    if states.is_empty() {
                        break;
                    }
                }
                out.extend(states);
            }
        }
    }
}

// ---- colored -------------------------------------------------------------------

/// Instrumentation of one colored search.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Forked `(color, class)` frontiers explored.
    pub forks: usize,
    /// Frontiers explored twice within one fork step; always 0.
    pub repeated_forks: usize,
    /// Matches dropped because an ancestor relation already had them.
    pub ancestor_duplicates: usize,
    /// Matches dropped by canonicalization within one relation.
    pub canonical_duplicates: usize,
}

struct Search<'a> {
    g: &'a ColoredEGraph,
    stats: SearchStats,
}

type State = (Rel, Binding);

impl Search<'_> {
    fn run(&mut self, p: &Compiled, class: Id, rel: Rel, binding: Binding, out: &mut Vec<State>) {
        match p {
            Compiled::Hole(i) => match binding[*i] {
                None => {
                    let mut b = binding;
                    b[*i] = Some(class);
                    out.push((rel, b));
                }
                Some(j) => {
                    let mut rels = vec![];
                    self.equal_rels(rel, j, class, &mut rels);
                    let last = rels.pop();
                    for r in rels {
                        out.push((r, binding.clone()));
                    }
                    if let Some(r) = last {
                        out.push((r, binding));
                    }
                }
            },
            Compiled::Apply(op, args) => {
                let candidates = self.candidates(rel, class, *op, args.len());
                for (n, r) in candidates {
                    self.descend(args, &n, r, binding.clone(), out);
                }
            }
        }
    }

    fn descend(&mut self, args: &[Compiled], n: &ENode, rel: Rel, binding: Binding, out: &mut Vec<State>) {
        let mut states = vec![(rel, binding)];
        for (a, &ch) in args.iter().zip(&n.children) {
            let mut next = vec![];
            for (r, s) in states {
                self.run(a, ch, r, s, &mut next);
            }
            states = next;
            if states.is_empty() {
                return;
            }
        }
        out.extend(states);
    }

    /// Minimal relations below (or at) `rel` where `a` and `b` are equal.
    fn equal_rels(&self, rel: Rel, a: Id, b: Id, out: &mut Vec<Rel>) {
        if self.g.find_in(rel, a) == self.g.find_in(rel, b) {
            out.push(rel);
            return;
        }
        for d in self.g.children_of(rel) {
            self.equal_rels(Some(d), a, b, out);
        }
    }

    /// E-nodes with `op` reachable from `class`: those visible under `rel`,
    /// then those that only appear in each descendant relation.
    fn candidates(&mut self, rel: Rel, class: Id, op: Symbol, arity: usize) -> Vec<(ENode, Rel)> {
        let g = self.g;
        let wanted = |n: &ENode| n.op == op && n.children.len() == arity;
        let mut out: Vec<(ENode, Rel)> = vec![];
        let members = g.members(rel, class);
        for &m in &members {
            for (n, _) in g.class_nodes(rel, m) {
                if wanted(n) {
                    out.push((n.clone(), rel));
                }
            }
        }
        for d in g.children_of(rel) {
            self.fork(d, class, &members, &wanted, &mut out);
        }
        out
    }

    fn fork(&mut self, d: ColorId, class: Id, below: &[Id], wanted: &dyn Fn(&ENode) -> bool, out: &mut Vec<(ENode, Rel)>) {
        let g = self.g;
        let rel = Some(d);
        let mut seen: FxHashSet<Id> = FxHashSet::default();
        let color = g.color(d);
        // d's own e-nodes in classes already reachable one level up
        for &m in below {
            let own = color.colored_nodes_of(m);
            if !own.is_empty() {
                self.explore(&mut seen, m);
                out.extend(own.iter().filter(|n| wanted(n)).map(|n| (n.clone(), rel)));
            }
        }
        let members = if g.extends_parent(d, class) {
            let all = g.members(rel, class);
            for &m in &all {
                if below.binary_search(&m).is_err() {
                    self.explore(&mut seen, m);
                    for (n, _) in g.class_nodes(rel, m) {
                        if wanted(n) {
                            out.push((n.clone(), rel));
                        }
                    }
                }
            }
            all
        } else {
            below.to_vec()
        };
        for &c in color.children() {
            self.fork(c, class, &members, wanted, out);
        }
    }

    fn explore(&mut self, seen: &mut FxHashSet<Id>, m: Id) {
        self.stats.forks += 1;
        if !seen.insert(m) {
            self.stats.repeated_forks += 1;
        }
    }
}

/// All matches of `pat` under black and every color, in one search.
pub fn ematch_colored(g: &ColoredEGraph, pat: &Pattern) -> Vec<Match> {
    ematch_colored_stats(g, pat).0
}

pub fn ematch_colored_stats(g: &ColoredEGraph, pat: &Pattern) -> (Vec<Match>, SearchStats) {
    let mut vars = vec![];
    let prog = compile(pat, &mut vars);
    let mut search = Search {
        g,
        stats: SearchStats::default(),
    };
    let mut raw: Vec<Match> = vec![];
    let empty: Binding = vec![None; vars.len()];
    for class in g.black().classes() {
        let root = class.id;
        // root candidates: black e-nodes and every color's colored e-nodes
        let mut roots: Vec<(ENode, Rel)> = class.nodes.iter().map(|n| (n.clone(), None)).collect();
        for c in g.color_ids() {
            roots.extend(g.color(c).colored_nodes_of(root).iter().map(|n| (n.clone(), Some(c))));
        }
        let mut states: Vec<State> = vec![];
        match &prog {
            Compiled::Hole(i) => {
                let mut tags: Vec<Rel> = roots.iter().map(|(_, r)| *r).collect();
                tags.dedup();
                for r in tags {
                    let mut b = empty.clone();
                    b[*i] = Some(root);
                    states.push((r, b));
                }
            }
            Compiled::Apply(op, args) => {
                for (n, r) in roots {
                    if n.op == *op && n.children.len() == args.len() {
                        search.descend(args, &n, r, empty.clone(), &mut states);
                    }
                }
            }
        }
        raw.extend(states.iter().map(|(r, b)| finish(&vars, *r, root, b, |i| g.find_in(*r, i))));
    }
    let out = dedup_by_relation(g, raw, &mut search.stats);
    (out, search.stats)
}

/// Per relation: canonical dedup, then drop what an ancestor relation
/// already matched.
fn dedup_by_relation(g: &ColoredEGraph, raw: Vec<Match>, stats: &mut SearchStats) -> Vec<Match> {
    let total = raw.len();
    let mut by_rel: FxHashMap<Rel, Vec<Match>> = FxHashMap::default();
    for m in raw {
        by_rel.entry(m.color).or_default().push(m);
    }
    for ms in by_rel.values_mut() {
        ms.sort_unstable();
        ms.dedup();
    }
    stats.canonical_duplicates = total - by_rel.values().map(Vec::len).sum::<usize>();
    let mut out: Vec<Match> = by_rel.get(&None).cloned().unwrap_or_default();
    for c in g.color_ids() {
        let Some(mine) = by_rel.get(&Some(c)) else {
            continue;
        };
        let rel = Some(c);
        let mut inherited: FxHashSet<Match> = FxHashSet::default();
        let mut ancestors: Vec<Rel> = vec![None];
        ancestors.extend(g.chain(c).into_iter().filter(|&a| a != c).map(Some));
        for a in ancestors {
            if let Some(ms) = by_rel.get(&a) {
                inherited.extend(ms.iter().map(|m| canonicalize_match_in(g, m, rel)));
            }
        }
        for m in mine {
            if inherited.contains(m) {
                stats.ancestor_duplicates += 1;
            } else {
                out.push(m.clone());
            }
        }
    }
    out.sort_unstable();
    out
}

/// `m` with root and substitution mapped to representatives of its own
/// relation.
pub fn canonicalize_match(g: &ColoredEGraph, m: &Match) -> Match {
    canonicalize_match_in(g, m, m.color)
}

/// `m` re-expressed under `rel`, which must coarsen `m`'s relation.
pub fn canonicalize_match_in(g: &ColoredEGraph, m: &Match, rel: Rel) -> Match {
    let mut subst: Vec<(Symbol, Id)> = m.subst.iter().map(|&(v, id)| (v, g.find_in(rel, id))).collect();
    subst.sort_unstable();
    Match {
        color: rel,
        root: g.find_in(rel, m.root),
        subst,
    }
}
