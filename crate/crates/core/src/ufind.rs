//! Plain and layered union-find.
//!
//! [`UnionFind`] is the master structure over all e-class ids.
//! [`LayeredUnionFind`] stacks sparse layers on top of it: each layer only
//! records unions between representatives of the layer below, so its
//! relation is always a coarsening of that layer's.

use std::fmt;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::Error;

/// E-class identifier. Dense, allocated in increasing order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Id(u32);

impl Id {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for Id {
    fn from(n: usize) -> Id {
        Id(u32::try_from(n).expect("e-class id overflow"))
    }
}

impl From<Id> for usize {
    fn from(id: Id) -> usize {
        id.index()
    }
}

impl fmt::Debug for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.0)
    }
}

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Result of a union: the surviving root and, if two sets merged, the root
/// that stopped being one.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Merge {
    pub root: Id,
    pub removed: Option<Id>,
}

impl Merge {
    pub fn merged(&self) -> bool {
        self.removed.is_some()
    }
}

#[derive(Clone, Default, Debug)]
pub struct UnionFind {
    parents: Vec<Id>,
    sizes: Vec<u32>,
}

impl UnionFind {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn make_set(&mut self) -> Id {
        let id = Id::from(self.parents.len());
        self.parents.push(id);
        self.sizes.push(1);
        id
    }

    pub fn contains(&self, id: Id) -> bool {
        id.index() < self.parents.len()
    }

    pub fn check(&self, id: Id) -> Result<(), Error> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(Error::UnknownId(id))
        }
    }

    /// Root of `id` without touching the structure.
    ///
    /// Panics if `id` was never allocated; see [`UnionFind::try_find`].
    pub fn find(&self, mut id: Id) -> Id {
        loop {
            let p = self.parents[id.index()];
            if p == id {
                return id;
            }
            id = p;
        }
    }

    pub fn try_find(&self, id: Id) -> Result<Id, Error> {
        self.check(id)?;
        Ok(self.find(id))
    }

    /// Root of `id`, compressing the traversed path.
    pub fn find_mut(&mut self, id: Id) -> Id {
        let root = self.find(id);
        let mut cur = id;
        while cur != root {
            let next = self.parents[cur.index()];
            self.parents[cur.index()] = root;
            cur = next;
        }
        root
    }

    /// Size of the set `id` belongs to.
    pub fn set_size(&self, id: Id) -> usize {
        self.sizes[self.find(id).index()] as usize
    }

    /// Merges the sets of `a` and `b`. The lower-numbered root survives.
    pub fn union(&mut self, a: Id, b: Id) -> Result<Merge, Error> {
        self.check(a)?;
        self.check(b)?;
        let ra = self.find_mut(a);
        let rb = self.find_mut(b);
        if ra == rb {
            return Ok(Merge { root: ra, removed: None });
        }
        let (keep, gone) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parents[gone.index()] = keep;
        self.sizes[keep.index()] += self.sizes[gone.index()];
        Ok(Merge { root: keep, removed: Some(gone) })
    }
}

/// Index of a layer in a [`LayeredUnionFind`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LayerId(pub u32);

impl LayerId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Sparse union-find over the representatives of the layer below.
///
/// Only ids that took part in a union of this layer appear as keys. No path
/// compression: chains stay short because the lower root always wins and
/// deltas are small.
#[derive(Clone, Default, Debug)]
pub struct Delta {
    parent: FxHashMap<Id, Id>,
    members: FxHashMap<Id, Vec<Id>>,
}

impl Delta {
    pub fn find(&self, mut id: Id) -> Id {
        while let Some(&p) = self.parent.get(&id) {
            if p == id {
                break;
            }
            id = p;
        }
        id
    }

    pub fn contains(&self, id: Id) -> bool {
        self.parent.contains_key(&id)
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Number of keys, stale ones included.
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    fn ensure(&mut self, id: Id) {
        if let std::collections::hash_map::Entry::Vacant(e) = self.parent.entry(id) {
            e.insert(id);
            self.members.insert(id, vec![id]);
        }
    }

    fn union(&mut self, a: Id, b: Id) -> Merge {
        self.ensure(a);
        self.ensure(b);
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return Merge { root: ra, removed: None };
        }
        let (keep, gone) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent.insert(gone, keep);
        let moved = self.members.remove(&gone).unwrap_or_default();
        self.members.entry(keep).or_default().extend(moved);
        Merge { root: keep, removed: Some(gone) }
    }

    /// Keys in the set rooted at `root` (including stale ones).
    fn set_of(&self, root: Id) -> Option<&[Id]> {
        self.members.get(&root).map(Vec::as_slice)
    }

    /// Non-trivial sets, each sorted, in ascending order of root.
    pub fn sets(&self) -> Vec<Vec<Id>> {
        let mut out: Vec<Vec<Id>> = self
            .members
            .values()
            .filter(|m| m.len() > 1)
            .map(|m| {
                let mut m = m.clone();
                m.sort_unstable();
                m
            })
            .collect();
        out.sort();
        out
    }
}

#[derive(Clone, Debug)]
struct Layer {
    parent: Option<LayerId>,
    children: Vec<LayerId>,
    delta: Delta,
}

/// A layer relation that just gained the union `removed` into `root`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct LayerMerge {
    pub layer: LayerId,
    pub root: Id,
    pub removed: Id,
}

/// The master union-find plus a forest of sparse layers.
#[derive(Clone, Default, Debug)]
pub struct LayeredUnionFind {
    base: UnionFind,
    layers: Vec<Layer>,
}

impl LayeredUnionFind {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn base(&self) -> &UnionFind {
        &self.base
    }

    pub fn make_set(&mut self) -> Id {
        self.base.make_set()
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn check(&self, id: Id) -> Result<(), Error> {
        self.base.check(id)
    }

    pub fn find(&self, id: Id) -> Id {
        self.base.find(id)
    }

    pub fn find_mut(&mut self, id: Id) -> Id {
        self.base.find_mut(id)
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn add_layer(&mut self, parent: Option<LayerId>) -> Result<LayerId, Error> {
        if let Some(p) = parent {
            self.check_layer(p)?;
        }
        let id = LayerId(u32::try_from(self.layers.len()).expect("layer overflow"));
        self.layers.push(Layer {
            parent,
            children: vec![],
            delta: Delta::default(),
        });
        if let Some(p) = parent {
            self.layers[p.index()].children.push(id);
        }
        Ok(id)
    }

    pub fn check_layer(&self, layer: LayerId) -> Result<(), Error> {
        if layer.index() < self.layers.len() {
            Ok(())
        } else {
            Err(Error::UnknownLayer(layer))
        }
    }

    pub fn layer_parent(&self, layer: LayerId) -> Option<LayerId> {
        self.layers[layer.index()].parent
    }

    pub fn layer_children(&self, layer: LayerId) -> &[LayerId] {
        &self.layers[layer.index()].children
    }

    pub fn delta(&self, layer: LayerId) -> &Delta {
        &self.layers[layer.index()].delta
    }

    /// Representative in the relation directly below `layer`.
    pub fn below_find(&self, layer: LayerId, id: Id) -> Id {
        match self.layers[layer.index()].parent {
            None => self.base.find(id),
            Some(p) => self.layer_find(p, id),
        }
    }

    /// Representative of `id` in `layer`'s relation.
    ///
    /// Panics on an unknown id; see [`LayeredUnionFind::try_layer_find`].
    pub fn layer_find(&self, layer: LayerId, id: Id) -> Id {
        let below = self.below_find(layer, id);
        self.layers[layer.index()].delta.find(below)
    }

    pub fn try_layer_find(&self, layer: LayerId, id: Id) -> Result<Id, Error> {
        self.check(id)?;
        self.check_layer(layer)?;
        Ok(self.layer_find(layer, id))
    }

    /// Representative under an optional layer, `None` meaning the master.
    pub fn find_in(&self, layer: Option<LayerId>, id: Id) -> Id {
        match layer {
            None => self.base.find(id),
            Some(l) => self.layer_find(l, id),
        }
    }

    /// Union in the master. Layers absorb the merge; any layer whose own
    /// relation changed because of it is reported.
    pub fn union(&mut self, a: Id, b: Id) -> Result<(Merge, Vec<LayerMerge>), Error> {
        let m = self.base.union(a, b)?;
        let mut merges = vec![];
        if let Some(removed) = m.removed {
            let roots: Vec<LayerId> = (0..self.layers.len())
                .map(|i| LayerId(i as u32))
                .filter(|l| self.layers[l.index()].parent.is_none())
                .collect();
            for l in roots {
                self.import(l, m.root, removed, &mut merges);
            }
        }
        Ok((m, merges))
    }

    /// Union in `layer` only. The layers below are untouched.
    pub fn layer_union(&mut self, layer: LayerId, a: Id, b: Id) -> Result<(Merge, Vec<LayerMerge>), Error> {
        self.check(a)?;
        self.check(b)?;
        self.check_layer(layer)?;
        let pa = self.below_find(layer, a);
        let pb = self.below_find(layer, b);
        let m = self.layers[layer.index()].delta.union(pa, pb);
        let mut merges = vec![];
        if let Some(removed) = m.removed {
            merges.push(LayerMerge { layer, root: m.root, removed });
            let children = self.layers[layer.index()].children.clone();
            for c in children {
                self.import(c, m.root, removed, &mut merges);
            }
        }
        Ok((m, merges))
    }

    /// The relation below `layer` merged `removed` into `kept`.
    fn import(&mut self, layer: LayerId, kept: Id, removed: Id, merges: &mut Vec<LayerMerge>) {
        let delta = &mut self.layers[layer.index()].delta;
        let rk = delta.find(kept);
        let rr = delta.find(removed);
        if delta.contains(removed) {
            // `removed` is now stale as a key; tie it to `kept` so the
            // set it belonged to stays connected
            delta.union(kept, removed);
        }
        if rk == rr {
            return;
        }
        let (root, gone) = if rk < rr { (rk, rr) } else { (rr, rk) };
        merges.push(LayerMerge { layer, root, removed: gone });
        let children = self.layers[layer.index()].children.clone();
        for c in children {
            self.import(c, root, gone, merges);
        }
    }

    /// Drops stale keys of `layer`'s delta. The relation is unchanged.
    pub fn normalize(&mut self, layer: LayerId) {
        let sets: Vec<Vec<Id>> = self.layers[layer.index()].delta.members.values().cloned().collect();
        let mut fresh = Delta::default();
        for set in sets {
            let mut live: Vec<Id> = set
                .into_iter()
                .filter(|&k| self.below_find(layer, k) == k)
                .collect();
            live.sort_unstable();
            live.dedup();
            for &k in live.iter().skip(1) {
                fresh.union(live[0], k);
            }
        }
        self.layers[layer.index()].delta = fresh;
    }

    /// Every master root whose `layer` representative equals that of `id`,
    /// ascending.
    pub fn layer_members(&self, layer: Option<LayerId>, id: Id) -> Vec<Id> {
        let mut out = vec![];
        match layer {
            None => out.push(self.base.find(id)),
            Some(l) => {
                let rep = self.layer_find(l, id);
                self.expand(l, rep, &mut out);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Master roots under `rep`, a representative of `layer`.
    fn expand(&self, layer: LayerId, rep: Id, out: &mut Vec<Id>) {
        let delta = &self.layers[layer.index()].delta;
        let keys: &[Id] = match delta.set_of(rep) {
            Some(s) => s,
            None => std::slice::from_ref(&rep),
        };
        for &k in keys {
            if self.below_find(layer, k) != k {
                continue;
            }
            match self.layers[layer.index()].parent {
                None => out.push(k),
                Some(p) => self.expand(p, k, out),
            }
        }
    }

    /// True when `layer` joins `id`'s class below with some other class.
    pub fn layer_extends(&self, layer: LayerId, id: Id) -> bool {
        let below = self.below_find(layer, id);
        let delta = &self.layers[layer.index()].delta;
        let rep = delta.find(below);
        match delta.set_of(rep) {
            None => false,
            Some(keys) => keys.iter().any(|&k| k != below && self.below_find(layer, k) == k),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Naive set-merging partition: `label[i]` is the smallest member.
    #[derive(Clone)]
    struct Naive(Vec<usize>);

    impl Naive {
        fn new(n: usize) -> Self {
            Naive((0..n).collect())
        }
        fn union(&mut self, a: usize, b: usize) {
            let (la, lb) = (self.0[a], self.0[b]);
            let keep = la.min(lb);
            for l in self.0.iter_mut() {
                if *l == la || *l == lb {
                    *l = keep;
                }
            }
        }
        fn same(&self, a: usize, b: usize) -> bool {
            self.0[a] == self.0[b]
        }
    }

    #[test]
    fn make_set_is_dense() {
        let mut uf = UnionFind::new();
        assert_eq!(uf.make_set(), Id::from(0));
        uf.make_set();
        uf.make_set();
        assert_eq!(uf.make_set(), Id::from(3));
        assert_ne!(uf.make_set(), uf.make_set());
    }

    #[test]
    fn union_basics() {
        let mut uf = UnionFind::new();
        let x = uf.make_set();
        let y = uf.make_set();
        let z = uf.make_set();
        assert_eq!(uf.find(x), x);
        let m = uf.union(x, x).unwrap();
        assert!(!m.merged());
        assert_eq!(m.root, x);
        let m = uf.union(z, y).unwrap();
        assert_eq!(m, Merge { root: y, removed: Some(z) });
        uf.union(x, y).unwrap();
        assert_eq!(uf.find(z), x);
        assert_eq!(uf.find(uf.find(z)), uf.find(z));
        assert_eq!(uf.set_size(z), 3);
        assert!(uf.union(x, Id::from(17)).is_err());
        assert!(uf.try_find(Id::from(3)).is_err());
    }

    #[test]
    fn path_compression() {
        let mut uf = UnionFind::new();
        let ids: Vec<Id> = (0..5).map(|_| uf.make_set()).collect();
        for w in ids.windows(2).rev() {
            uf.union(w[1], w[0]).unwrap();
        }
        assert_eq!(uf.find_mut(ids[4]), ids[0]);
        for &i in &ids {
            assert_eq!(uf.parents[i.index()], ids[0]);
        }
    }

    #[test]
    fn layer_basics() {
        let mut luf = LayeredUnionFind::new();
        let x = luf.make_set();
        let y = luf.make_set();
        let blue = luf.add_layer(None).unwrap();
        let red = luf.add_layer(None).unwrap();
        assert_eq!(luf.layer_find(blue, y), y);
        let (m, merges) = luf.layer_union(blue, y, x).unwrap();
        assert_eq!(m.root, x);
        assert_eq!(merges, vec![LayerMerge { layer: blue, root: x, removed: y }]);
        assert_eq!(luf.layer_find(blue, y), x);
        assert_eq!(luf.find(y), y);
        assert_eq!(luf.layer_find(red, y), y);
        assert_eq!(luf.layer_members(Some(blue), y), vec![x, y]);
        assert!(luf.layer_extends(blue, y));
        assert!(!luf.layer_extends(red, y));
        assert!(luf.add_layer(Some(LayerId(9))).is_err());
    }

    #[test]
    fn black_union_reaches_nested_layers() {
        let mut luf = LayeredUnionFind::new();
        let ids: Vec<Id> = (0..4).map(|_| luf.make_set()).collect();
        let blue = luf.add_layer(None).unwrap();
        let deep = luf.add_layer(Some(blue)).unwrap();
        luf.layer_union(deep, ids[2], ids[3]).unwrap();
        let (_, merges) = luf.layer_union(blue, ids[1], ids[3]).unwrap();
        // deep already had 2~3, so blue's 1~3 is news for deep too
        assert_eq!(merges.len(), 2);
        let (_, merges) = luf.union(ids[0], ids[2]).unwrap();
        assert_eq!(merges.iter().map(|m| m.layer).collect::<Vec<_>>(), vec![blue, deep]);
        for &i in &ids {
            assert_eq!(luf.layer_find(deep, i), ids[0]);
        }
        assert_eq!(luf.layer_find(blue, ids[2]), ids[0]);
        assert_eq!(luf.layer_find(blue, ids[1]), luf.layer_find(blue, ids[3]));
        assert_ne!(luf.layer_find(blue, ids[0]), luf.layer_find(blue, ids[1]));
        luf.normalize(blue);
        luf.normalize(deep);
        // black roots only: 2 went into 0
        assert_eq!(luf.layer_members(Some(deep), ids[3]), vec![ids[0], ids[1], ids[3]]);
    }

    #[derive(Clone, Debug)]
    enum Op {
        Black(usize, usize),
        Layer(usize, usize, usize),
        Normalize(usize),
    }

    fn op(n: usize, layers: usize) -> impl Strategy<Value = Op> {
        prop_oneof![
            (0..n, 0..n).prop_map(|(a, b)| Op::Black(a, b)),
            (0..layers, 0..n, 0..n).prop_map(|(l, a, b)| Op::Layer(l, a, b)),
            (0..layers).prop_map(Op::Normalize),
        ]
    }

    proptest! {
        #[test]
        fn union_matches_naive(ops in prop::collection::vec((0..10usize, 0..10usize), 0..30)) {
            let mut uf = UnionFind::new();
            let ids: Vec<Id> = (0..10).map(|_| uf.make_set()).collect();
            let mut naive = Naive::new(10);
            for (a, b) in ops {
                uf.union(ids[a], ids[b]).unwrap();
                naive.union(a, b);
            }
            for a in 0..10 {
                for b in 0..10 {
                    prop_assert_eq!(uf.find(ids[a]) == uf.find(ids[b]), naive.same(a, b));
                }
                // lowest member is the root
                prop_assert_eq!(uf.find(ids[a]).index(), naive.0[a]);
            }
        }

        /// Layers 0 and 1 are roots, 2 is a child of 0, 3 a child of 2.
        /// Each must partition like a flat union-find that received the
        /// master unions plus the unions of every layer on its chain.
        #[test]
        fn layers_match_clone_oracle(ops in prop::collection::vec(op(12, 4), 0..40)) {
            let parents = [None, None, Some(0usize), Some(2usize)];
            let mut luf = LayeredUnionFind::new();
            let ids: Vec<Id> = (0..12).map(|_| luf.make_set()).collect();
            let layers: Vec<LayerId> = parents
                .iter()
                .map(|p| luf.add_layer(p.map(|p| LayerId(p as u32))).unwrap())
                .collect();
            let mut clones: Vec<Naive> = vec![Naive::new(12); 4];
            let mut black = Naive::new(12);
            for op in ops {
                match op {
                    Op::Black(a, b) => {
                        luf.union(ids[a], ids[b]).unwrap();
                        black.union(a, b);
                        for c in clones.iter_mut() {
                            c.union(a, b);
                        }
                    }
                    Op::Layer(l, a, b) => {
                        luf.layer_union(layers[l], ids[a], ids[b]).unwrap();
                        for (i, c) in clones.iter_mut().enumerate() {
                            let mut cur = Some(i);
                            while let Some(x) = cur {
                                if x == l {
                                    c.union(a, b);
                                    break;
                                }
                                cur = parents[x];
                            }
                        }
                    }
                    Op::Normalize(l) => luf.normalize(layers[l]),
                }
                for (i, &l) in layers.iter().enumerate() {
                    for a in 0..12 {
                        for b in 0..12 {
                            let same = luf.layer_find(l, ids[a]) == luf.layer_find(l, ids[b]);
                            prop_assert_eq!(same, clones[i].same(a, b));
                            // coarsening over the master
                            if black.same(a, b) {
                                prop_assert!(same);
                            }
                        }
                    }
                }
            }
            for (i, &l) in layers.iter().enumerate() {
                for a in 0..12 {
                    let members = luf.layer_members(Some(l), ids[a]);
                    let mut expected: Vec<Id> = (0..12)
                        .filter(|&b| clones[i].same(a, b))
                        .map(|b| luf.find(ids[b]))
                        .collect();
                    expected.sort();
                    expected.dedup();
                    prop_assert_eq!(members, expected);
                }
            }
        }
    }
}
