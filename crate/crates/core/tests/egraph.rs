mod common;

use proptest::prelude::*;

use colored_egraph::{EGraph, ENode, Id, Term};
use common::{congruence_closure, subterms, t, term};

#[test]
fn re_adding_returns_same_class() {
    let mut g = EGraph::new();
    let a = g.add_term(&t("(* a (+ b c))")).unwrap();
    let classes = g.num_classes();
    assert_eq!(g.add_term(&t("(* a (+ b c))")).unwrap(), a);
    let bc = g.add_term(&t("(+ b c)")).unwrap();
    assert_eq!(g.num_classes(), classes);
    assert_eq!(Some(bc), g.lookup_term(&t("(+ b c)")));
}

#[test]
fn lookup_examples() {
    let mut g = EGraph::new();
    g.add_term(&t("(* a (+ b c))")).unwrap();
    assert!(g.lookup(&ENode::leaf("a")).is_some());
    assert_eq!(g.lookup(&ENode::leaf("nope")), None);
    let mut g = EGraph::new();
    let fx = g.add_term(&t("(f x)")).unwrap();
    g.add_term(&t("(f y)")).unwrap();
    let (x, y) = (g.lookup_term(&t("x")).unwrap(), g.lookup_term(&t("y")).unwrap());
    g.union(x, y).unwrap();
    g.rebuild();
    assert_eq!(g.lookup_term(&t("(f y)")), Some(g.find(fx)));
}

#[test]
fn self_union_marks_nothing() {
    let mut g = EGraph::new();
    let x = g.add_term(&t("x")).unwrap();
    assert_eq!(g.union(x, x).unwrap(), (x, false));
    assert!(g.is_clean());
    assert_eq!(g.rebuild(), 0);
}

#[test]
fn black_f_of_x_and_y() {
    let mut g = EGraph::new();
    for s in ["x", "y", "(f x)", "(f y)", "(f (f x))"] {
        g.add_term(&t(s)).unwrap();
    }
    let id = |g: &EGraph, s: &str| g.lookup_term(&t(s)).unwrap();
    let (x, y) = (id(&g, "x"), id(&g, "y"));
    g.union(x, y).unwrap();
    assert_eq!(g.rebuild(), 1);
    assert_eq!(g.find(id(&g, "(f x)")), g.find(id(&g, "(f y)")));
    assert!(g.check_invariants().is_ok());
}

#[test]
fn canonicalize_is_idempotent_and_child_wise() {
    let mut g = EGraph::new();
    let h = g.add_term(&t("(h x z)")).unwrap();
    let (x, z) = (g.lookup_term(&t("x")).unwrap(), g.lookup_term(&t("z")).unwrap());
    let y = g.add_term(&t("y")).unwrap();
    g.union(y, x).unwrap();
    let node = g.class(h).nodes[0].clone();
    let once = g.canonicalize(&node).unwrap();
    assert_eq!(once, ENode::new("h", [g.find(x), g.find(z)]));
    assert_eq!(g.canonicalize(&once).unwrap(), once);
    assert!(g.canonicalize(&ENode::new("f", [Id::from(99)])).is_err());
}

#[test]
fn arity_mismatch_is_rejected() {
    let mut g = EGraph::new();
    g.add_term(&t("(f a)")).unwrap();
    assert!(g.add_term(&t("(f a b)")).is_err());
}

#[test]
fn dump_reflects_classes() {
    let mut g = EGraph::new();
    g.add_term(&t("(+ a b)")).unwrap();
    let d = g.dump();
    assert_eq!(d.schema_version, colored_egraph::egraph::DUMP_SCHEMA_VERSION);
    assert_eq!(d.classes.len(), 3);
    assert_eq!(d.union_find.len(), g.num_ids());
    let total: usize = d.classes.iter().map(|c| c.nodes.len()).sum();
    assert_eq!(total, g.total_size());
    let json = serde_json::to_string(&d).unwrap();
    let back: colored_egraph::egraph::GraphDump = serde_json::from_str(&json).unwrap();
    assert_eq!(back, d);
}

fn instance() -> impl Strategy<Value = (Vec<Term>, Vec<(usize, usize)>)> {
    prop::collection::vec(term(3), 1..6).prop_flat_map(|terms| {
        let n = subterms(&terms).len();
        (Just(terms), prop::collection::vec((0..n, 0..n), 0..6))
    })
}

proptest! {
    #![proptest_config(common::config(128))]

    #[test]
    fn rebuild_is_congruence_closure((terms, picks) in instance()) {
        let all = subterms(&terms);
        let unions: Vec<(Term, Term)> = picks.iter().map(|&(i, j)| (all[i].clone(), all[j].clone())).collect();
        let oracle = congruence_closure(&all, &unions);

        let mut deferred = EGraph::new();
        let mut eager = EGraph::new();
        for g in [&mut deferred, &mut eager] {
            for x in &terms {
                g.add_term(x).unwrap();
            }
        }
        // both graphs allocate identical ids
        let ids: Vec<Id> = all.iter().map(|x| deferred.lookup_term(x).unwrap()).collect();
        for &(i, j) in &picks {
            deferred.union(ids[i], ids[j]).unwrap();
            eager.union(ids[i], ids[j]).unwrap();
            eager.rebuild();
        }
        deferred.rebuild();
        for g in [&deferred, &eager] {
            prop_assert!(g.check_invariants().is_ok(), "{:?}", g.check_invariants());
            for class in g.classes() {
                for n in &class.nodes {
                    let key = g.canonicalize(n).unwrap();
                    prop_assert_eq!(g.lookup(&key), Some(class.id));
                }
            }
        }
        for i in 0..all.len() {
            for j in 0..all.len() {
                let same = |g: &EGraph| g.find(ids[i]) == g.find(ids[j]);
                prop_assert_eq!(same(&deferred), oracle.same(i, j), "{} vs {}", &all[i], &all[j]);
                prop_assert_eq!(same(&eager), oracle.same(i, j));
            }
        }
    }
}
