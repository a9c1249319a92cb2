mod common;

use proptest::prelude::*;

use colored_egraph::{ColorId, ColoredEGraph, EGraph, ENode, Id, NodeMode, Term};
use common::{subterms, t, term};

fn graph(terms: &[&str]) -> ColoredEGraph {
    let mut g = ColoredEGraph::new(NodeMode::Colored);
    for s in terms {
        g.add_term(&t(s)).unwrap();
    }
    g
}

fn id(g: &ColoredEGraph, s: &str) -> Id {
    g.black().lookup_term(&t(s)).unwrap_or_else(|| panic!("{s} is not black"))
}

/// Representatives of every allocated id under `c`.
fn partition(g: &ColoredEGraph, c: ColorId) -> Vec<Id> {
    (0..g.black().num_ids()).map(|i| g.colored_find(c, Id::from(i))).collect()
}

const MAX_TERMS: [&str; 5] = ["(max x y)", "(< x y)", "true", "false", "(not (< x y))"];

#[test]
fn new_color_starts_equal_to_black() {
    let mut g = graph(&MAX_TERMS);
    let blue = g.create_color(None, "blue").unwrap();
    for i in 0..g.black().num_ids() {
        let i = Id::from(i);
        assert_eq!(g.colored_find(blue, i), g.find(i));
        assert_eq!(g.siblings(blue, i).unwrap(), vec![g.find(i)]);
    }
    assert_eq!(g.colored_rebuild(blue), 0);
    assert!(g.create_color(Some(ColorId::from(7)), "orphan").is_err());
}

#[test]
fn max_colored_unions() {
    let mut g = graph(&MAX_TERMS);
    let blue = g.create_color(None, "x < y").unwrap();
    let red = g.create_color(None, "x >= y").unwrap();
    let (lt, tt, ff) = (id(&g, "(< x y)"), id(&g, "true"), id(&g, "false"));
    assert!(g.colored_union(blue, lt, tt).unwrap().1);
    assert_ne!(g.find(lt), g.find(tt));
    assert!(g.colored_union(red, lt, ff).unwrap().1);
    assert_ne!(g.colored_find(blue, lt), g.colored_find(blue, ff));
    assert_ne!(g.colored_find(red, lt), g.colored_find(red, tt));
    assert!(!g.colored_union(blue, tt, lt).unwrap().1);
    g.rebuild();
    assert!(g.check_coarsening());
}

#[test]
fn child_sees_parent_unions_made_later() {
    let mut g = graph(&["x", "y", "(f x)", "(f y)"]);
    let blue = g.create_color(None, "blue").unwrap();
    let red = g.create_color(None, "red").unwrap();
    let child = g.create_color(Some(blue), "child").unwrap();
    let (x, y) = (id(&g, "x"), id(&g, "y"));
    g.colored_union(blue, x, y).unwrap();
    g.rebuild();
    let (fx, fy) = (id(&g, "(f x)"), id(&g, "(f y)"));
    assert_eq!(g.colored_find(child, fx), g.colored_find(child, fy));
    assert_eq!(g.colored_find(blue, fx), g.colored_find(blue, fy));
    assert_ne!(g.colored_find(red, fx), g.colored_find(red, fy));
    let mut sib = g.siblings(blue, x).unwrap();
    sib.sort();
    assert_eq!(sib, vec![g.find(x), g.find(y)]);
}

#[test]
fn colored_add_reuses_colored_equal_node() {
    let mut g = graph(&["(* 1 1)", "(* 1 x)", "(* 1 y)", "(* x y)"]);
    let blue = g.create_color(None, "blue").unwrap();
    let (x, y) = (id(&g, "x"), id(&g, "y"));
    g.colored_union(blue, x, y).unwrap();
    g.rebuild();
    let ids = g.black().num_ids();
    let one = id(&g, "1");
    let got = g.colored_add(blue, ENode::new("*", [one, y])).unwrap();
    assert_eq!(g.colored_find(blue, got), g.colored_find(blue, id(&g, "(* 1 x)")));
    assert_eq!(g.black().num_ids(), ids);
    assert_eq!(g.total_colored_nodes(), 0);
}

#[test]
fn colored_add_of_new_node_is_colored_only() {
    let mut g = graph(&["x"]);
    let blue = g.create_color(None, "blue").unwrap();
    let red = g.create_color(None, "red").unwrap();
    let black = g.black_node_count();
    let x = id(&g, "x");
    let h = g.colored_add(blue, ENode::new("f", [x])).unwrap();
    assert_eq!(g.black_node_count(), black);
    assert_eq!(g.colored_node_count(blue), 1);
    assert_eq!(g.colored_add(blue, ENode::new("f", [x])).unwrap(), h);
    assert_eq!(g.colored_node_count(blue), 1);
    g.rebuild();
    assert!(g.lookup_term_in(Some(blue), &t("(f x)")).is_some());
    assert!(g.lookup_term_in(Some(red), &t("(f x)")).is_none());
    assert!(g.lookup_term_in(None, &t("(f x)")).is_none());
    assert_eq!(g.holder_color(h), Some(blue));
}

#[test]
fn f_g_example_needs_black_import() {
    let mut g = graph(&["x", "y", "(f x)", "(f y)", "(f (f x))", "(f (g y))"]);
    let blue = g.create_color(None, "blue").unwrap();
    let (gy, fy) = (id(&g, "(g y)"), id(&g, "(f y)"));
    g.colored_union(blue, gy, fy).unwrap();
    g.rebuild();
    let (ffx, fgy) = (id(&g, "(f (f x))"), id(&g, "(f (g y))"));
    assert_ne!(g.colored_find(blue, ffx), g.colored_find(blue, fgy));
    let (x, y) = (id(&g, "x"), id(&g, "y"));
    g.union(x, y).unwrap();
    g.rebuild_black();
    g.colored_rebuild(blue);
    assert_eq!(g.colored_find(blue, ffx), g.colored_find(blue, fgy));
    assert_ne!(g.find(ffx), g.find(fgy));
}

#[test]
fn prune_drops_node_subsumed_by_black() {
    let mut g = graph(&["x", "y", "(f x)"]);
    let blue = g.create_color(None, "blue").unwrap();
    let y = id(&g, "y");
    g.colored_add(blue, ENode::new("f", [y])).unwrap();
    g.rebuild();
    assert_eq!(g.colored_node_count(blue), 1);
    assert_eq!(g.prune(blue), 0);
    let x = id(&g, "x");
    g.union(x, y).unwrap();
    g.rebuild_black();
    g.colored_congruence(blue);
    let before = partition(&g, blue);
    assert_eq!(g.prune(blue), 1);
    assert_eq!(g.colored_node_count(blue), 0);
    assert_eq!(partition(&g, blue), before);
}

#[test]
fn minimize_merges_colored_equal_holders() {
    let mut g = graph(&["x", "y"]);
    let blue = g.create_color(None, "blue").unwrap();
    let (x, y) = (id(&g, "x"), id(&g, "y"));
    let fx = g.colored_add(blue, ENode::new("f", [x])).unwrap();
    let gy = g.colored_add(blue, ENode::new("g", [y])).unwrap();
    g.rebuild();
    assert_eq!(g.colored_minimize(blue), 0);
    g.colored_union(blue, fx, gy).unwrap();
    g.colored_congruence(blue);
    g.prune(blue);
    let before = partition(&g, blue);
    assert_eq!(g.colored_minimize(blue), 1);
    assert_eq!(partition(&g, blue), before);
    assert!(g.check_minimization(blue));
    assert_eq!(g.color(blue).holders().len(), 1);
    assert_ne!(g.find(x), g.find(y));
}

#[test]
fn minimize_leaves_black_classes_alone() {
    let mut g = graph(&["x", "y"]);
    let blue = g.create_color(None, "blue").unwrap();
    let (x, y) = (id(&g, "x"), id(&g, "y"));
    let fx = g.colored_add(blue, ENode::new("f", [x])).unwrap();
    g.colored_union(blue, fx, y).unwrap();
    g.rebuild();
    assert_eq!(g.colored_minimize(blue), 0);
    assert_ne!(g.find(fx), g.find(y));
}

#[test]
fn dump_lists_colors() {
    let mut g = graph(&MAX_TERMS);
    let blue = g.create_color(None, "(< x y) = true").unwrap();
    let (lt, tt) = (id(&g, "(< x y)"), id(&g, "true"));
    g.colored_union(blue, lt, tt).unwrap();
    let x = id(&g, "x");
    g.colored_add(blue, ENode::new("f", [x])).unwrap();
    g.rebuild();
    let d = g.dump();
    assert_eq!(d.colors.len(), 1);
    assert_eq!(d.colors[0].label, "(< x y) = true");
    assert_eq!(d.colors[0].unions.len(), 1);
    assert_eq!(d.colors[0].colored_nodes.len(), 1);
    let json = serde_json::to_string(&d).unwrap();
    assert_eq!(serde_json::from_str::<colored_egraph::colors::ColoredDump>(&json).unwrap(), d);
}

// ---- clone equivalence --------------------------------------------------

/// Color 0 and 1 hang off black, 2 off 0.
const PARENTS: [Option<usize>; 3] = [None, None, Some(0)];

fn in_chain(viewer: usize, c: usize) -> bool {
    let mut k = Some(viewer);
    while let Some(i) = k {
        if i == c {
            return true;
        }
        k = PARENTS[i];
    }
    false
}

#[derive(Clone, Debug)]
enum Op {
    AddBlack(Term),
    Union(usize, usize),
    ColoredUnion(usize, usize, usize),
    ColoredAdd(usize, Term),
    Rebuild,
}

fn op(n: usize) -> impl Strategy<Value = Op> {
    prop_oneof![
        1 => term(2).prop_map(Op::AddBlack),
        2 => (0..n, 0..n).prop_map(|(a, b)| Op::Union(a, b)),
        4 => (0..PARENTS.len(), 0..n, 0..n).prop_map(|(c, a, b)| Op::ColoredUnion(c, a, b)),
        3 => (0..PARENTS.len(), term(3)).prop_map(|(c, x)| Op::ColoredAdd(c, x)),
        2 => Just(Op::Rebuild),
    ]
}

fn scenario() -> impl Strategy<Value = (Vec<Term>, Vec<Op>)> {
    prop::collection::vec(term(3), 1..5).prop_flat_map(|base| {
        let n = subterms(&base).len();
        (Just(base), prop::collection::vec(op(n), 0..14))
    })
}

/// Plain e-graph holding `terms` with `unions` applied.
fn clone_graph(terms: &[Term], unions: &[(Term, Term)]) -> EGraph {
    let mut g = EGraph::new();
    for x in terms {
        g.add_term(x).unwrap();
    }
    let pairs: Vec<(Id, Id)> = unions
        .iter()
        .map(|(a, b)| (g.lookup_term(a).unwrap(), g.lookup_term(b).unwrap()))
        .collect();
    for (a, b) in pairs {
        g.union(a, b).unwrap();
    }
    g.rebuild();
    g
}

proptest! {
    #![proptest_config(common::config(256))]

    #[test]
    fn colors_behave_like_clones((base, ops) in scenario()) {
        let pool = subterms(&base);
        let mut g = ColoredEGraph::new(NodeMode::Colored);
        g.set_audit(true);
        for x in &base {
            g.add_term(x).unwrap();
        }
        let ids: Vec<Id> = pool.iter().map(|x| id(&g, &x.to_string())).collect();
        let mut colors = vec![];
        for p in PARENTS {
            colors.push(g.create_color(p.map(|i| colors[i]), "c").unwrap());
        }
        let mut black_terms = base.clone();
        let mut black_unions = vec![];
        let mut colored_terms: Vec<Vec<Term>> = vec![vec![]; PARENTS.len()];
        let mut colored_unions: Vec<Vec<(Term, Term)>> = vec![vec![]; PARENTS.len()];
        for op in &ops {
            match op {
                Op::AddBlack(x) => {
                    g.add_term(x).unwrap();
                    black_terms.push(x.clone());
                }
                Op::Union(a, b) => {
                    g.union(ids[*a], ids[*b]).unwrap();
                    black_unions.push((pool[*a].clone(), pool[*b].clone()));
                }
                Op::ColoredUnion(c, a, b) => {
                    g.colored_union(colors[*c], ids[*a], ids[*b]).unwrap();
                    colored_unions[*c].push((pool[*a].clone(), pool[*b].clone()));
                }
                Op::ColoredAdd(c, x) => {
                    g.colored_add_term(colors[*c], x).unwrap();
                    colored_terms[*c].push(x.clone());
                }
                Op::Rebuild => {
                    g.rebuild();
                }
            }
            prop_assert!(g.check_coarsening());
        }
        g.rebuild();
        prop_assert!(g.black().check_invariants().is_ok(), "{:?}", g.black().check_invariants());

        // black keeps exactly the black congruence
        let black = clone_graph(&black_terms, &black_unions);
        let shared = subterms(&black_terms);
        for a in &shared {
            for b in &shared {
                let ours = g.find(g.lookup_term_in(None, a).unwrap()) == g.find(g.lookup_term_in(None, b).unwrap());
                let theirs = black.find(black.lookup_term(a).unwrap()) == black.find(black.lookup_term(b).unwrap());
                prop_assert_eq!(ours, theirs, "black: {} vs {}", a, b);
            }
        }
        for (k, &c) in colors.iter().enumerate() {
            let mut terms = black_terms.clone();
            let mut unions = black_unions.clone();
            for j in 0..PARENTS.len() {
                if in_chain(k, j) {
                    terms.extend(colored_terms[j].iter().cloned());
                    unions.extend(colored_unions[j].iter().cloned());
                }
            }
            let clone = clone_graph(&terms, &unions);
            let all = subterms(&terms);
            let ours: Vec<Id> = all
                .iter()
                .map(|x| g.lookup_term_in(Some(c), x).map(|i| g.colored_find(c, i)))
                .collect::<Option<_>>()
                .expect("every clone term is represented under its color");
            for i in 0..all.len() {
                for j in 0..all.len() {
                    let theirs = clone.find(clone.lookup_term(&all[i]).unwrap()) == clone.find(clone.lookup_term(&all[j]).unwrap());
                    prop_assert_eq!(ours[i] == ours[j], theirs, "color {}: {} vs {}", k, &all[i], &all[j]);
                }
            }
            // terms colored elsewhere show up only if the clone has them
            for j in (0..PARENTS.len()).filter(|&j| !in_chain(k, j)) {
                for x in &colored_terms[j] {
                    prop_assert_eq!(
                        g.lookup_term_in(Some(c), x).is_some(),
                        clone.lookup_term(x).is_some(),
                        "color {} sees {}", k, x
                    );
                }
            }
            prop_assert!(g.check_minimization(c));
        }
        let s = g.stats();
        prop_assert_eq!(s.coarsening_violations, 0);
        prop_assert_eq!(s.prune_violations, 0);
        prop_assert_eq!(s.minimization_violations, 0);
        prop_assert_eq!(s.duplicate_stores, 0);
    }
}
