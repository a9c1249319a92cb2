//! The black e-graph: hash-cons, union-find and e-class map, with deferred
//! rebuilding.

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::language::{ENode, Symbol, Term};
use crate::ufind::{Id, LayerMerge, LayeredUnionFind};
use crate::Error;

/// Version of the JSON dump layout.
pub const DUMP_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct EClass {
    pub id: Id,
    pub nodes: Vec<ENode>,
    /// Every e-node mentioning this class, with the class holding it.
    pub parents: Vec<(ENode, Id)>,
}

impl EClass {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Events the colored layer needs to see.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Event {
    Added,
    Union { kept: Id, removed: Id },
}

#[derive(Clone, Default)]
pub struct EGraph {
    uf: LayeredUnionFind,
    classes: Vec<Option<EClass>>,
    hashcons: FxHashMap<ENode, Id>,
    dirty: Vec<Id>,
    arities: FxHashMap<Symbol, usize>,
    track_events: bool,
    events: Vec<Event>,
    layer_merges: Vec<LayerMerge>,
}

impl std::fmt::Debug for EGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EGraph")
            .field("classes", &self.num_classes())
            .field("nodes", &self.total_size())
            .field("dirty", &self.dirty.len())
            .finish()
    }
}

impl EGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn with_events() -> Self {
        EGraph {
            track_events: true,
            ..Self::default()
        }
    }

    pub fn uf(&self) -> &LayeredUnionFind {
        &self.uf
    }

    pub(crate) fn uf_mut(&mut self) -> &mut LayeredUnionFind {
        &mut self.uf
    }

    pub(crate) fn hashcons(&self) -> &FxHashMap<ENode, Id> {
        &self.hashcons
    }

    pub(crate) fn take_events(&mut self) -> (Vec<Event>, Vec<LayerMerge>) {
        (
            std::mem::take(&mut self.events),
            std::mem::take(&mut self.layer_merges),
        )
    }

    /// Number of ids ever allocated.
    pub fn num_ids(&self) -> usize {
        self.uf.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.iter().flatten().count()
    }

    /// Number of stored e-nodes.
    pub fn total_size(&self) -> usize {
        self.classes.iter().flatten().map(EClass::len).sum()
    }

    pub fn is_clean(&self) -> bool {
        self.dirty.is_empty()
    }

    pub fn find(&self, id: Id) -> Id {
        self.uf.find(id)
    }

    pub fn try_find(&self, id: Id) -> Result<Id, Error> {
        self.uf.base().try_find(id)
    }

    /// Live classes in ascending id order.
    pub fn classes(&self) -> impl Iterator<Item = &EClass> + '_ {
        self.classes.iter().flatten()
    }

    /// The class `id` currently belongs to.
    pub fn class(&self, id: Id) -> &EClass {
        self.classes[self.find(id).index()]
            .as_ref()
            .expect("root id without class")
    }

    pub(crate) fn class_mut(&mut self, id: Id) -> &mut EClass {
        let root = self.find(id);
        self.classes[root.index()].as_mut().expect("root id without class")
    }

    pub fn arity_of(&self, op: Symbol) -> Option<usize> {
        self.arities.get(&op).copied()
    }

    pub(crate) fn check_arity(&mut self, op: Symbol, n: usize) -> Result<(), Error> {
        let expected = *self.arities.entry(op).or_insert(n);
        if expected == n {
            Ok(())
        } else {
            Err(Error::Arity { op, expected, found: n })
        }
    }

    pub fn canonicalize(&self, node: &ENode) -> Result<ENode, Error> {
        for &c in &node.children {
            self.uf.check(c)?;
        }
        Ok(self.canon(node))
    }

    pub(crate) fn canon(&self, node: &ENode) -> ENode {
        node.map_children(|c| self.uf.find(c))
    }

    pub fn lookup(&self, node: &ENode) -> Option<Id> {
        let key = self.canonicalize(node).ok()?;
        self.hashcons.get(&key).map(|&id| self.find(id))
    }

    pub fn lookup_term(&self, term: &Term) -> Option<Id> {
        let children = term
            .args
            .iter()
            .map(|a| self.lookup_term(a))
            .collect::<Option<Vec<Id>>>()?;
        self.lookup(&ENode::new(term.op, children))
    }

    pub fn add(&mut self, node: ENode) -> Result<Id, Error> {
        for &c in &node.children {
            self.uf.check(c)?;
        }
        self.check_arity(node.op, node.arity())?;
        Ok(self.add_unchecked(node))
    }

    pub(crate) fn add_unchecked(&mut self, node: ENode) -> Id {
        let node = self.canon(&node);
        if let Some(&id) = self.hashcons.get(&node) {
            return self.find(id);
        }
        let id = self.uf.make_set();
        for &c in &node.children {
            self.class_mut(c).parents.push((node.clone(), id));
        }
        self.hashcons.insert(node.clone(), id);
        self.classes.push(Some(EClass {
            id,
            nodes: vec![node],
            parents: vec![],
        }));
        if self.track_events {
            self.events.push(Event::Added);
        }
        id
    }

    /// Adds `term` bottom-up.
    pub fn add_term(&mut self, term: &Term) -> Result<Id, Error> {
        let children = term
            .args
            .iter()
            .map(|a| self.add_term(a))
            .collect::<Result<Vec<Id>, Error>>()?;
        self.add(ENode::new(term.op, children))
    }

    /// A fresh class with no e-nodes, used to hold colored e-nodes.
    pub(crate) fn add_holder(&mut self) -> Id {
        let id = self.uf.make_set();
        self.classes.push(Some(EClass {
            id,
            nodes: vec![],
            parents: vec![],
        }));
        id
    }

    pub fn union(&mut self, a: Id, b: Id) -> Result<(Id, bool), Error> {
        self.uf.check(a)?;
        self.uf.check(b)?;
        Ok(self.union_unchecked(a, b))
    }

    pub(crate) fn union_unchecked(&mut self, a: Id, b: Id) -> (Id, bool) {
        let (m, merges) = self.uf.union(a, b).expect("ids were checked");
        self.layer_merges.extend(merges);
        let Some(removed) = m.removed else {
            return (m.root, false);
        };
        let gone = self.classes[removed.index()].take().expect("removed root without class");
        let kept = self.classes[m.root.index()].as_mut().expect("kept root without class");
        kept.nodes.extend(gone.nodes);
        kept.parents.extend(gone.parents);
        self.dirty.push(m.root);
        if self.track_events {
            self.events.push(Event::Union { kept: m.root, removed });
        }
        (m.root, true)
    }

    /// Restores congruence closure and hash-cons canonicity. Returns the
    /// number of unions discovered along the way.
    pub fn rebuild(&mut self) -> usize {
        if self.dirty.is_empty() {
            return 0;
        }
        let mut cascades = 0;
        while !self.dirty.is_empty() {
            let mut todo = std::mem::take(&mut self.dirty);
            for id in todo.iter_mut() {
                *id = self.uf.find_mut(*id);
            }
            todo.sort_unstable();
            todo.dedup();
            for id in todo {
                cascades += self.repair(id);
            }
        }
        let uf = &self.uf;
        // A parent whose children sit in two repaired classes is re-keyed by
        // the first repair; the second one only knows the older key.
        self.hashcons
            .retain(|n, _| n.children.iter().all(|&c| uf.find(c) == c));
        for class in self.classes.iter_mut().flatten() {
            for n in class.nodes.iter_mut() {
                *n = n.map_children(|c| uf.find(c));
            }
            class.nodes.sort_unstable();
            class.nodes.dedup();
        }
        cascades
    }

    fn repair(&mut self, id: Id) -> usize {
        let id = self.uf.find_mut(id);
        let parents = std::mem::take(&mut self.class_mut(id).parents);
        for (n, _) in &parents {
            self.hashcons.remove(n);
        }
        let mut unions = 0;
        let mut fresh: Vec<(ENode, Id)> = Vec::with_capacity(parents.len());
        for (n, e) in parents {
            let n = n.map_children(|c| self.uf.find_mut(c));
            let e = self.uf.find_mut(e);
            let e = match self.hashcons.get(&n) {
                Some(&other) => {
                    let (root, merged) = self.union_unchecked(other, e);
                    unions += merged as usize;
                    root
                }
                None => e,
            };
            self.hashcons.insert(n.clone(), e);
            fresh.push((n, e));
        }
        fresh.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        fresh.dedup_by(|a, b| a.0 == b.0);
        self.class_mut(id).parents.extend(fresh);
        unions
    }

    /// Checks the post-rebuild invariants; returns a description of the
    /// first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        if !self.dirty.is_empty() {
            return Err("dirty list not empty".into());
        }
        for (k, &v) in &self.hashcons {
            if self.canon(k) != *k {
                return Err(format!("hash-cons key {k} not canonical"));
            }
            if self.classes[self.find(v).index()].is_none() {
                return Err(format!("hash-cons value {v} has no class"));
            }
        }
        let mut seen: FxHashMap<&ENode, Id> = FxHashMap::default();
        for class in self.classes() {
            if self.find(class.id) != class.id {
                return Err(format!("class {} is not a root", class.id));
            }
            for n in &class.nodes {
                if self.canon(n) != *n {
                    return Err(format!("node {n} in class {} not canonical", class.id));
                }
                if let Some(other) = seen.insert(n, class.id) {
                    return Err(format!("node {n} in classes {other} and {}", class.id));
                }
                if self.hashcons.get(n).map(|&v| self.find(v)) != Some(class.id) {
                    return Err(format!("node {n} missing from hash-cons"));
                }
            }
        }
        Ok(())
    }

    /// JSON-serializable snapshot.
    pub fn dump(&self) -> GraphDump {
        let classes = self
            .classes()
            .map(|c| ClassDump {
                id: c.id,
                nodes: c.nodes.iter().map(|n| self.canon(n).to_string()).collect(),
                parents: {
                    let mut ps: Vec<(String, Id)> = c
                        .parents
                        .iter()
                        .map(|(n, e)| (self.canon(n).to_string(), self.find(*e)))
                        .collect::<FxHashSet<_>>()
                        .into_iter()
                        .collect();
                    ps.sort();
                    ps
                },
            })
            .collect();
        let union_find = (0..self.num_ids())
            .map(|i| {
                let id = Id::from(i);
                (id, self.find(id))
            })
            .collect();
        GraphDump {
            schema_version: DUMP_SCHEMA_VERSION,
            classes,
            union_find,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ClassDump {
    pub id: Id,
    pub nodes: Vec<String>,
    pub parents: Vec<(String, Id)>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct GraphDump {
    pub schema_version: u32,
    pub classes: Vec<ClassDump>,
    /// `(id, root)` for every allocated id.
    pub union_find: Vec<(Id, Id)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Term {
        s.parse().unwrap()
    }

    #[test]
    fn five_classes() {
        let mut g = EGraph::new();
        let root = g.add_term(&t("(* a (+ b c))")).unwrap();
        assert_eq!(g.num_classes(), 5);
        let a = g.lookup_term(&t("a")).unwrap();
        let b = g.lookup_term(&t("b")).unwrap();
        let c = g.lookup_term(&t("c")).unwrap();
        let sum = g.lookup(&ENode::new("+", [b, c])).unwrap();
        assert_eq!(g.lookup(&ENode::new("*", [a, sum])), Some(root));
        assert_eq!(g.hashcons.len(), 5);
        // b + c is already there
        assert_eq!(g.add_term(&t("(+ b c)")).unwrap(), sum);
        assert_eq!(g.num_classes(), 5);
        assert_eq!(g.add_term(&t("(* a (+ b c))")).unwrap(), root);
        assert_eq!(g.lookup_term(&t("d")), None);
    }

    #[test]
    fn union_concatenates() {
        let mut g = EGraph::new();
        g.add_term(&t("(* a (+ b c))")).unwrap();
        let b = g.lookup_term(&t("b")).unwrap();
        let c = g.lookup_term(&t("c")).unwrap();
        let (root, merged) = g.union(b, c).unwrap();
        assert!(merged);
        let mut nodes: Vec<String> = g.class(root).nodes.iter().map(|n| n.to_string()).collect();
        nodes.sort();
        assert_eq!(nodes, vec!["b", "c"]);
        assert_eq!(g.rebuild(), 0);
        g.check_invariants().unwrap();
        // self-union leaves nothing dirty
        assert_eq!(g.union(b, c).unwrap(), (root, false));
        assert!(g.is_clean());
    }

    #[test]
    fn cascade() {
        let mut g = EGraph::new();
        let fx = g.add_term(&t("(f x)")).unwrap();
        let fy = g.add_term(&t("(f y)")).unwrap();
        let ffx = g.add_term(&t("(f (f x))")).unwrap();
        let ffy = g.add_term(&t("(f (f y))")).unwrap();
        let x = g.lookup_term(&t("x")).unwrap();
        let y = g.lookup_term(&t("y")).unwrap();
        assert_eq!(g.rebuild(), 0);
        g.union(x, y).unwrap();
        assert_eq!(g.rebuild(), 2);
        assert_eq!(g.find(fx), g.find(fy));
        assert_eq!(g.find(ffx), g.find(ffy));
        assert_eq!(g.lookup_term(&t("(f y)")), g.lookup_term(&t("(f x)")));
        g.check_invariants().unwrap();
    }

    #[test]
    fn canonicalize_replaces_children() {
        let mut g = EGraph::new();
        let fxz = g.add_term(&t("(f x z)")).unwrap();
        let x = g.lookup_term(&t("x")).unwrap();
        let y = g.add_term(&t("y")).unwrap();
        let z = g.lookup_term(&t("z")).unwrap();
        g.union(y, x).unwrap();
        g.rebuild();
        let root = g.find(x);
        let n = g.canonicalize(&ENode::new("f", [x, z])).unwrap();
        assert_eq!(n, ENode::new("f", [root, z]));
        assert_eq!(g.canonicalize(&n).unwrap(), n);
        assert_eq!(g.lookup(&ENode::new("f", [y, z])), Some(g.find(fxz)));
        assert!(g.canonicalize(&ENode::new("f", [Id::from(99)])).is_err());
    }

    #[test]
    fn arity_is_fixed() {
        let mut g = EGraph::new();
        g.add_term(&t("(f x)")).unwrap();
        let err = g.add_term(&t("(f x y)")).unwrap_err();
        assert!(matches!(err, Error::Arity { expected: 1, found: 2, .. }));
    }

    #[test]
    fn dump_shape() {
        let mut g = EGraph::new();
        g.add_term(&t("(+ a b)")).unwrap();
        let d = g.dump();
        assert_eq!(d.schema_version, DUMP_SCHEMA_VERSION);
        assert_eq!(d.classes.len(), 3);
        assert_eq!(d.classes[2].nodes, vec!["(+ 0 1)"]);
        assert_eq!(d.classes[0].parents, vec![("(+ 0 1)".to_string(), Id::from(2))]);
        let json = serde_json::to_string(&d).unwrap();
        let back: GraphDump = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }
}
