mod common;

use std::path::Path;

use colored_egraph::baseline::{compare_run, oracle_compare, CloneSet, SeparateProver};
use colored_egraph::bench::{load_suites, Case};
use colored_egraph::saturate::{check_goal, check_goal_plain, Prover, Truth};
use colored_egraph::{EGraph, Limits, NodeMode, Pattern, StopReason};
use common::t;

fn cases_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("cases")
}

fn case(suite: &str, name: &str) -> Case {
    Case::load(&cases_dir().join(suite).join(name), suite).unwrap()
}

fn colored(c: &Case, mode: NodeMode, limits: Limits) -> Prover {
    let mut p = Prover::new(mode, c.rules.clone(), limits);
    for x in &c.terms {
        p.add_term(x).unwrap();
    }
    for goal in &c.goals {
        p.add_goal(goal.clone()).unwrap();
    }
    p
}

fn separate(c: &Case, limits: Limits) -> SeparateProver {
    let mut p = SeparateProver::new(c.rules.clone(), limits);
    for x in &c.terms {
        p.add_term(x).unwrap();
    }
    for goal in &c.goals {
        p.add_goal(goal.clone()).unwrap();
    }
    p
}

#[test]
fn max_forks_two_clones() {
    let mut p = separate(&case("basic", "max"), Limits::default());
    let report = p.run().unwrap();
    assert_eq!(report.stop_reason, StopReason::Saturated);
    assert_eq!(report.clones_per_depth, vec![2]);
    assert_eq!(report.graphs, 3);
    assert_eq!(report.assumptions, 2);
    let set = p.clones();
    let (max, x, y) = (t("(max x y)"), t("x"), t("y"));
    let yes = set.get(&["(< x y) = true".to_string()]).unwrap();
    let no = set.get(&["(< x y) = false".to_string()]).unwrap();
    assert!(check_goal_plain(yes, &max, &y) && !check_goal_plain(yes, &max, &x));
    assert!(check_goal_plain(no, &max, &x) && !check_goal_plain(no, &max, &y));
    assert!(!check_goal_plain(set.root(), &max, &x) && !check_goal_plain(set.root(), &max, &y));
}

#[test]
fn clones_copy_everything_colors_nothing() {
    let c = case("basic", "max");
    // colored: one saturation step, then split
    let mut p = colored(&c, NodeMode::Colored, Limits::default());
    p.step().unwrap();
    let before = p.graph().total_nodes();
    let (rel, spec) = p.detect_splits().remove(0);
    p.apply_split(rel, &spec).unwrap();
    assert_eq!(p.graph().total_nodes(), before);
    assert_eq!(p.graph().total_colored_nodes(), 0);

    // clones: the same graph forked twice
    let mut root = EGraph::new();
    let truth = Truth::install(&mut root);
    for x in &c.terms {
        root.add_term(x).unwrap();
    }
    root.add_term(&t("(< x y)")).unwrap();
    root.add_term(&t("(not (< x y))")).unwrap();
    let size = root.total_size();
    assert_eq!(size, before);
    let cond = root.lookup_term(&t("(< x y)")).unwrap();
    let mut set = CloneSet::new(root, truth);
    set.fork(&[], &truth.split(cond)).unwrap();
    assert_eq!(set.count_enodes(), 3 * size);
}

#[test]
fn corpus_runs_match_their_replays() {
    let mut compared = 0;
    for c in load_suites(&cases_dir()).unwrap() {
        let probes: Vec<Pattern> = c.rules.iter().map(|r| r.lhs.clone()).collect();
        for mode in [NodeMode::Colored, NodeMode::Monochrome] {
            let mut p = colored(&c, mode, Limits::default());
            p.run().unwrap();
            if p.stop_reason() != Some(StopReason::Saturated) {
                continue;
            }
            let diff = compare_run(&p, &c.terms, &Limits::default(), &probes).unwrap();
            assert!(diff.is_empty(), "{} {mode:?}: {diff:?}", c.name);
            assert_eq!(diff.relations, p.graph().colors().len() + 1);
            compared += 1;
        }
    }
    assert!(compared >= 10, "only {compared} runs saturated");
}

#[test]
fn oracle_notices_a_tampered_clone() {
    let c = case("basic", "max-minus-min");
    let mut p = colored(&c, NodeMode::Colored, Limits::default());
    p.run().unwrap();
    let probes: Vec<Pattern> = c.rules.iter().map(|r| r.lhs.clone()).collect();
    let (mut set, index) = CloneSet::replay(&p, &c.terms, &Limits::default()).unwrap();
    assert!(oracle_compare(&p, &set, &index, &probes).is_empty());
    let leaf = index[&p.graph().leaves()[0]];
    let g = &mut set.node_mut(leaf).graph;
    let (x, y) = (g.lookup_term(&t("x")).unwrap(), g.lookup_term(&t("y")).unwrap());
    g.union(x, y).unwrap();
    g.rebuild();
    let diff = oracle_compare(&p, &set, &index, &probes);
    assert!(diff.refused.is_none());
    assert!(diff.entries.iter().any(|e| e.kind == "partition"), "{diff:?}");
}

#[test]
fn oracle_refuses_unfinished_runs() {
    let c = case("basic", "max-minus-min");
    let mut p = colored(
        &c,
        NodeMode::Colored,
        Limits {
            iter_cap: 1,
            ..Limits::default()
        },
    );
    p.run().unwrap();
    assert_eq!(p.stop_reason(), Some(StopReason::IterationCap));
    let diff = compare_run(&p, &c.terms, &Limits::default(), &[]).unwrap();
    assert!(diff.refused.is_some());
    assert!(!diff.is_empty());
}

#[test]
fn separate_and_colored_agree_on_max_minus_min() {
    let c = case("basic", "max-minus-min");
    let mut sep = separate(&c, Limits::default());
    let theirs = sep.run().unwrap();
    let mut p = colored(&c, NodeMode::Colored, Limits::default());
    let ours = p.run().unwrap();
    assert_eq!(theirs.assumptions, ours.assumptions);
    for (a, b) in ours.goals.iter().zip(&theirs.goals) {
        assert_eq!((a.black, a.by_cases), (b.black, b.by_cases));
    }
    let (lhs, rhs) = (&c.goals[0].lhs, &c.goals[0].rhs);
    for leaf in p.graph().leaves() {
        assert!(check_goal(p.graph(), Some(leaf), lhs, rhs));
    }
    // a clone set holds far more e-nodes than the colored graph
    assert!(theirs.total_enodes > p.graph().total_nodes());
}
