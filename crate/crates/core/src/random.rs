//! Seeded random scenarios for differential testing against clones.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baseline::{compare_run, DiffReport};
use crate::colors::NodeMode;
use crate::ematch::Pattern;
use crate::language::Term;
use crate::saturate::{Limits, Prover, Rule, FALSE, TRUE};
use crate::Error;

const CONSTS: [&str; 4] = ["a", "b", "c", "d"];
const UNARY: [&str; 2] = ["f", "g"];
const HOLES: [&str; 3] = ["x", "y", "z"];
const MAX_NODES: usize = 30;

/// A small rewrite problem: terms, rules, black unions and a color tree
/// with assumptions between existing terms.
///
/// A color spec is `(parent index, assumptions)`.
pub type ColorSpec = (Option<usize>, Vec<(Term, Term)>);

#[derive(Clone, Debug)]
pub struct Scenario {
    pub seed: u64,
    pub terms: Vec<Term>,
    pub rules: Vec<Rule>,
    pub black_unions: Vec<(Term, Term)>,
    /// Parents before children.
    pub colors: Vec<ColorSpec>,
    /// Automatic splits on blocked conditions.
    pub auto_split: bool,
    pub probes: Vec<Pattern>,
}

fn random_term(rng: &mut impl Rng, depth: usize) -> Term {
    if depth <= 1 || rng.gen_bool(0.3) {
        return Term::leaf(*CONSTS.choose(rng).unwrap());
    }
    if rng.gen_bool(0.6) {
        Term::new(*UNARY.choose(rng).unwrap(), vec![random_term(rng, depth - 1)])
    } else {
        Term::new("h", vec![random_term(rng, depth - 1), random_term(rng, depth - 1)])
    }
}

fn subterms(t: &Term, out: &mut Vec<Term>) {
    out.push(t.clone());
    for a in &t.args {
        subterms(a, out);
    }
}

fn distinct_subterms(terms: &[Term]) -> Vec<Term> {
    let mut out = vec![];
    for t in terms {
        subterms(t, &mut out);
    }
    out.sort();
    out.dedup();
    out
}

/// A hole or a constant.
fn atom(rng: &mut impl Rng, holes: &[&str]) -> Pattern {
    if !holes.is_empty() && rng.gen_bool(0.7) {
        Pattern::Hole((*holes.choose(rng).unwrap()).into())
    } else {
        Pattern::leaf(CONSTS.choose(rng).unwrap())
    }
}

/// `f`, `g` or `h` over atoms.
fn shallow(rng: &mut impl Rng, holes: &[&str]) -> Pattern {
    if rng.gen_bool(0.6) {
        Pattern::Apply((*UNARY.choose(rng).unwrap()).into(), vec![atom(rng, holes)])
    } else {
        Pattern::Apply("h".into(), vec![atom(rng, holes), atom(rng, holes)])
    }
}

fn random_rule(rng: &mut impl Rng, i: usize) -> Rule {
    let nholes = rng.gen_range(1..=HOLES.len());
    let holes = &HOLES[..nholes];
    let arg = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.3) { shallow(rng, holes) } else { atom(rng, holes) };
    let mut rng2 = ChaCha8Rng::seed_from_u64(rng.gen());
    if rng2.gen_bool(0.15) {
        // decides some conditions outright
        let lhs = Pattern::Apply("p".into(), vec![arg(&mut rng2)]);
        let rhs = Pattern::leaf(if rng2.gen_bool(0.5) { TRUE } else { FALSE });
        return Rule::new(format!("r{i}"), lhs, rhs, None).expect("generated rules are well formed");
    }
    let lhs = if rng2.gen_bool(0.5) {
        Pattern::Apply((*UNARY.choose(&mut rng2).unwrap()).into(), vec![arg(&mut rng2)])
    } else {
        Pattern::Apply("h".into(), vec![arg(&mut rng2), arg(&mut rng2)])
    };
    let bound: Vec<&str> = lhs
        .holes()
        .into_iter()
        .map(|s| HOLES.iter().copied().find(|h| *h == s.as_str()).unwrap())
        .collect();
    // mostly new structure, so colors get e-nodes of their own
    let rhs = match rng2.gen_range(0..10) {
        0..=1 if !bound.is_empty() => atom(&mut rng2, &bound),
        2 => Pattern::leaf(CONSTS.choose(&mut rng2).unwrap()),
        _ => shallow(&mut rng2, &bound),
    };
    let condition = if !bound.is_empty() && rng2.gen_bool(0.5) {
        Some(Pattern::Apply("p".into(), vec![Pattern::Hole((*bound.choose(&mut rng2).unwrap()).into())]))
    } else {
        None
    };
    Rule::new(format!("r{i}"), lhs, rhs, condition).expect("generated rules are well formed")
}

impl Scenario {
    pub fn generate(seed: u64) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms: Vec<Term> = vec![];
        for _ in 0..rng.gen_range(2..=5) {
            let t = random_term(&mut rng, 4);
            terms.push(t);
            if distinct_subterms(&terms).len() > MAX_NODES {
                terms.pop();
                break;
            }
        }
        let pool = distinct_subterms(&terms);
        let pair = |rng: &mut ChaCha8Rng| (pool.choose(rng).unwrap().clone(), pool.choose(rng).unwrap().clone());
        let rules = (0..rng.gen_range(1..=5)).map(|i| random_rule(&mut rng, i)).collect::<Vec<_>>();
        let black_unions = (0..rng.gen_range(0..=2)).map(|_| pair(&mut rng)).collect();
        let mut colors: Vec<ColorSpec> = vec![];
        let mut depth: Vec<usize> = vec![];
        for _ in 0..rng.gen_range(0..=3) {
            let parents: Vec<usize> = (0..colors.len()).filter(|&i| depth[i] < 2).collect();
            let parent = if parents.is_empty() || rng.gen_bool(0.5) {
                None
            } else {
                Some(*parents.choose(&mut rng).unwrap())
            };
            depth.push(parent.map_or(1, |p| depth[p] + 1));
            let assumptions = (0..rng.gen_range(1..=2)).map(|_| pair(&mut rng)).collect();
            colors.push((parent, assumptions));
        }
        let auto_split = colors.len() <= 1 && rules.iter().any(Rule::is_conditional);
        let mut probes: Vec<Pattern> = rules.iter().map(|r| r.lhs.clone()).collect();
        for p in ["?x", "(f ?x)", "(h ?x ?x)", "(h ?x (g ?y))", "(p ?x)"] {
            probes.push(p.parse().unwrap());
        }
        Scenario {
            seed,
            terms,
            rules,
            black_unions,
            colors,
            auto_split,
            probes,
        }
    }

    pub fn limits(&self) -> Limits {
        Limits {
            iter_cap: 200,
            split_depth: 2,
            max_colors: Some(3),
            ..Limits::default()
        }
    }

    /// Builds and runs the colored prover for this scenario.
    pub fn run(&self, mode: NodeMode, audit: bool) -> Result<Prover, Error> {
        let mut p = Prover::new(mode, self.rules.clone(), self.limits());
        if !self.auto_split {
            p = p.without_splits();
        }
        p.set_audit(audit);
        for t in &self.terms {
            p.add_term(t)?;
        }
        for (l, r) in &self.black_unions {
            p.union_terms(l, r)?;
        }
        let mut ids = vec![];
        for (i, (parent, assumptions)) in self.colors.iter().enumerate() {
            let c = p.create_color(parent.map(|j| ids[j]), &format!("manual {i}"))?;
            for (l, r) in assumptions {
                p.assume(c, l, r)?;
            }
            ids.push(c);
        }
        p.run()?;
        Ok(p)
    }

    /// Runs the scenario and compares every color with its clone.
    pub fn check(&self, mode: NodeMode) -> Result<(Prover, DiffReport), Error> {
        let p = self.run(mode, true)?;
        let diff = compare_run(&p, &self.terms, &self.limits(), &self.probes)?;
        Ok((p, diff))
    }
}
