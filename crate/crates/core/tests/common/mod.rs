//! Strategies and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;

use colored_egraph::Term;

pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

pub fn t(s: &str) -> Term {
    s.parse().expect("test term parses")
}

/// Terms over constants a b c, unary f g and binary h.
pub fn term(depth: u32) -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![Just("a"), Just("b"), Just("c")].prop_map(Term::leaf);
    leaf.prop_recursive(depth, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|x| Term::new("f", vec![x])),
            inner.clone().prop_map(|x| Term::new("g", vec![x])),
            (inner.clone(), inner).prop_map(|(x, y)| Term::new("h", vec![x, y])),
        ]
    })
}

pub fn subterms(terms: &[Term]) -> Vec<Term> {
    fn walk(t: &Term, out: &mut BTreeSet<Term>) {
        out.insert(t.clone());
        for a in &t.args {
            walk(a, out);
        }
    }
    let mut out = BTreeSet::new();
    for t in terms {
        walk(t, &mut out);
    }
    out.into_iter().collect()
}

/// Naive set-merging partition: `label[i]` names i's block.
#[derive(Clone, Debug)]
pub struct Partition {
    label: Vec<usize>,
}

impl Partition {
    pub fn new(n: usize) -> Self {
        Partition { label: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.label.len()
    }

    pub fn merge(&mut self, a: usize, b: usize) -> bool {
        let (la, lb) = (self.label[a], self.label[b]);
        if la == lb {
            return false;
        }
        for l in &mut self.label {
            if *l == lb {
                *l = la;
            }
        }
        true
    }

    pub fn same(&self, a: usize, b: usize) -> bool {
        self.label[a] == self.label[b]
    }
}

/// Congruence closure of `unions` over `terms` by repeated pairwise
/// comparison of every two terms.
pub fn congruence_closure(terms: &[Term], unions: &[(Term, Term)]) -> Partition {
    let idx = |x: &Term| terms.iter().position(|y| y == x).expect("union over known terms");
    let mut p = Partition::new(terms.len());
    for (a, b) in unions {
        p.merge(idx(a), idx(b));
    }
    loop {
        let mut changed = false;
        for i in 0..terms.len() {
            for j in i + 1..terms.len() {
                let (x, y) = (&terms[i], &terms[j]);
                if x.op == y.op
                    && x.args.len() == y.args.len()
                    && x.args.iter().zip(&y.args).all(|(u, v)| p.same(idx(u), idx(v)))
                {
                    changed |= p.merge(i, j);
                }
            }
        }
        if !changed {
            return p;
        }
    }
}
