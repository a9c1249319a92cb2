//! Colors: coarsened congruences living inside one e-graph.
//!
//! A color owns a layer of the black union-find, the colored e-nodes that
//! only exist under its assumptions, and a cached view of its hash-cons that
//! only records what differs from the black one. Colored e-nodes live in
//! holder classes: black classes without black e-nodes, so black semantics
//! never sees them. A color sees black e-nodes, its own colored e-nodes and
//! those of its ancestors, never those of its siblings.

use std::collections::hash_map::Entry;
use std::fmt;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::egraph::{EGraph, Event, GraphDump};
use crate::language::{ENode, Term};
use crate::ufind::{Id, LayerId, LayerMerge};
use crate::Error;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColorId(u32);

impl ColorId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    fn layer(self) -> LayerId {
        LayerId(self.0)
    }

    fn of_layer(l: LayerId) -> ColorId {
        ColorId(l.0)
    }
}

impl From<usize> for ColorId {
    fn from(n: usize) -> Self {
        ColorId(u32::try_from(n).expect("color id overflow"))
    }
}

impl fmt::Debug for ColorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

impl fmt::Display for ColorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// Where e-nodes created under a color go.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeMode {
    /// Colored e-nodes in holder classes, pruned and minimized.
    #[default]
    Colored,
    /// Every e-node is added black; only unions are colored.
    Monochrome,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Owner {
    /// A black e-node or an ancestor's colored e-node has this key.
    Shared,
    Own,
}

#[derive(Clone, Debug)]
pub struct Color {
    id: ColorId,
    parent: Option<ColorId>,
    children: Vec<ColorId>,
    label: String,
    depth: usize,
    /// Holder root -> colored e-nodes stored there.
    colored_nodes: FxHashMap<Id, Vec<ENode>>,
    /// Black root -> own colored e-nodes mentioning it, with their holder.
    colored_parents: FxHashMap<Id, Vec<(ENode, Id)>>,
    /// Color-canonical keys that are not already black hash-cons keys.
    view: FxHashMap<ENode, (Id, Owner)>,
    view_valid: bool,
    dirty: Vec<Id>,
    hashcons_builds: usize,
}

impl Color {
    pub fn id(&self) -> ColorId {
        self.id
    }

    pub fn parent(&self) -> Option<ColorId> {
        self.parent
    }

    pub fn children(&self) -> &[ColorId] {
        &self.children
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// 1 for a child of black.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn colored_node_count(&self) -> usize {
        self.colored_nodes.values().map(Vec::len).sum()
    }

    /// Classes holding colored e-nodes of this color, ascending.
    pub fn holders(&self) -> Vec<Id> {
        let mut hs: Vec<Id> = self
            .colored_nodes
            .iter()
            .filter(|(_, ns)| !ns.is_empty())
            .map(|(&h, _)| h)
            .collect();
        hs.sort_unstable();
        hs
    }

    pub fn colored_nodes_of(&self, holder: Id) -> &[ENode] {
        self.colored_nodes.get(&holder).map(Vec::as_slice).unwrap_or(&[])
    }

    /// How many times the hash-cons view was constructed from scratch.
    pub fn hashcons_builds(&self) -> usize {
        self.hashcons_builds
    }

    pub fn is_clean(&self) -> bool {
        self.view_valid && self.dirty.is_empty()
    }
}

/// Counters, most of them only maintained in audit mode.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct ColorStats {
    pub colored_adds: usize,
    pub stored: usize,
    pub pruned: usize,
    pub minimized: usize,
    /// Stored although an e-node with the same color-canonical form was
    /// already visible.
    pub duplicate_stores: usize,
    /// Stored although a black e-node had the same color-canonical form.
    pub subsumed_stores: usize,
    /// Largest number of stores of one color-canonical e-node in one
    /// saturation iteration.
    pub max_stores_per_iteration: usize,
    pub coarsening_checks: usize,
    pub coarsening_violations: usize,
    pub minimization_violations: usize,
    pub prune_violations: usize,
    pub audit_checks: usize,
}

#[derive(Clone)]
pub struct ColoredEGraph {
    black: EGraph,
    colors: Vec<Color>,
    /// Holder classes containing only e-nodes of one color.
    holders: FxHashMap<Id, ColorId>,
    mode: NodeMode,
    audit: bool,
    stats: ColorStats,
    stores_this_iteration: FxHashMap<(ColorId, ENode), usize>,
}

impl Default for ColoredEGraph {
    fn default() -> Self {
        Self::new(NodeMode::Colored)
    }
}

impl fmt::Debug for ColoredEGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ColoredEGraph")
            .field("black", &self.black)
            .field("colors", &self.colors.len())
            .field("mode", &self.mode)
            .finish()
    }
}

/// Relation selector: `None` is black.
pub type Rel = Option<ColorId>;

impl ColoredEGraph {
    pub fn new(mode: NodeMode) -> Self {
        ColoredEGraph {
            black: EGraph::with_events(),
            colors: vec![],
            holders: FxHashMap::default(),
            mode,
            audit: false,
            stats: ColorStats::default(),
            stores_this_iteration: FxHashMap::default(),
        }
    }

    /// Enables the expensive self-checks behind [`ColorStats`].
    pub fn set_audit(&mut self, on: bool) {
        self.audit = on;
    }

    pub fn stats(&self) -> &ColorStats {
        &self.stats
    }

    pub fn mode(&self) -> NodeMode {
        self.mode
    }

    pub fn black(&self) -> &EGraph {
        &self.black
    }

    pub fn colors(&self) -> &[Color] {
        &self.colors
    }

    pub fn color(&self, c: ColorId) -> &Color {
        &self.colors[c.index()]
    }

    pub fn color_ids(&self) -> impl Iterator<Item = ColorId> + '_ {
        (0..self.colors.len()).map(ColorId::from)
    }

    pub fn check_color(&self, c: ColorId) -> Result<(), Error> {
        if c.index() < self.colors.len() {
            Ok(())
        } else {
            Err(Error::UnknownColor(c))
        }
    }

    /// Colors without children, in creation order.
    pub fn leaves(&self) -> Vec<ColorId> {
        self.colors.iter().filter(|c| c.children.is_empty()).map(|c| c.id).collect()
    }

    /// `c` and its ancestors, outermost first.
    pub fn chain(&self, c: ColorId) -> Vec<ColorId> {
        let mut out = vec![c];
        let mut cur = self.colors[c.index()].parent;
        while let Some(p) = cur {
            out.push(p);
            cur = self.colors[p.index()].parent;
        }
        out.reverse();
        out
    }

    fn rel_chain(&self, rel: Rel) -> Vec<ColorId> {
        rel.map(|c| self.chain(c)).unwrap_or_default()
    }

    /// Whether `owner`'s colored e-nodes are visible under `rel`.
    pub fn is_visible(&self, owner: ColorId, rel: Rel) -> bool {
        let mut cur = rel;
        while let Some(c) = cur {
            if c == owner {
                return true;
            }
            cur = self.colors[c.index()].parent;
        }
        false
    }

    /// All strict descendants of `rel`, parents before children.
    pub fn descendants(&self, rel: Rel) -> Vec<ColorId> {
        let mut out = vec![];
        let mut stack: Vec<ColorId> = match rel {
            None => self.colors.iter().filter(|c| c.parent.is_none()).map(|c| c.id).collect(),
            Some(c) => self.colors[c.index()].children.clone(),
        };
        stack.reverse();
        while let Some(c) = stack.pop() {
            out.push(c);
            stack.extend(self.colors[c.index()].children.iter().rev());
        }
        out
    }

    pub fn children_of(&self, rel: Rel) -> Vec<ColorId> {
        match rel {
            None => self.colors.iter().filter(|c| c.parent.is_none()).map(|c| c.id).collect(),
            Some(c) => self.colors[c.index()].children.clone(),
        }
    }

    pub fn black_node_count(&self) -> usize {
        self.black.total_size()
    }

    pub fn colored_node_count(&self, c: ColorId) -> usize {
        self.colors[c.index()].colored_node_count()
    }

    pub fn total_colored_nodes(&self) -> usize {
        self.colors.iter().map(Color::colored_node_count).sum()
    }

    /// Black e-nodes plus every color's colored e-nodes.
    pub fn total_nodes(&self) -> usize {
        self.black_node_count() + self.total_colored_nodes()
    }

    pub fn holder_color(&self, id: Id) -> Option<ColorId> {
        self.holders.get(&self.black.find(id)).copied()
    }

    // ---- finds -------------------------------------------------------

    pub fn find(&self, id: Id) -> Id {
        self.black.find(id)
    }

    /// Panics on unknown ids or colors; see [`ColoredEGraph::try_colored_find`].
    pub fn colored_find(&self, c: ColorId, id: Id) -> Id {
        self.black.uf().layer_find(c.layer(), id)
    }

    pub fn try_colored_find(&self, c: ColorId, id: Id) -> Result<Id, Error> {
        self.check_color(c)?;
        self.black.uf().check(id)?;
        Ok(self.colored_find(c, id))
    }

    pub fn find_in(&self, rel: Rel, id: Id) -> Id {
        match rel {
            None => self.black.find(id),
            Some(c) => self.colored_find(c, id),
        }
    }

    /// Black roots in the `rel`-class of `id`, ascending.
    pub fn members(&self, rel: Rel, id: Id) -> Vec<Id> {
        self.black.uf().layer_members(rel.map(ColorId::layer), id)
    }

    pub fn siblings(&self, c: ColorId, id: Id) -> Result<Vec<Id>, Error> {
        self.check_color(c)?;
        self.black.uf().check(id)?;
        Ok(self.members(Some(c), id))
    }

    /// True when `c` merged the class of `id` with another class of its
    /// parent relation.
    pub fn extends_parent(&self, c: ColorId, id: Id) -> bool {
        self.black.uf().layer_extends(c.layer(), id)
    }

    pub fn canon_in(&self, rel: Rel, node: &ENode) -> ENode {
        node.map_children(|ch| self.find_in(rel, ch))
    }

    fn ccanon(&self, c: ColorId, node: &ENode) -> ENode {
        node.map_children(|ch| self.colored_find(c, ch))
    }

    // ---- black mutations ---------------------------------------------

    pub fn add(&mut self, node: ENode) -> Result<Id, Error> {
        let id = self.black.add(node)?;
        self.sync();
        self.audit_coarsening();
        Ok(id)
    }

    pub fn add_term(&mut self, term: &Term) -> Result<Id, Error> {
        let id = self.black.add_term(term)?;
        self.sync();
        self.audit_coarsening();
        Ok(id)
    }

    pub fn union(&mut self, a: Id, b: Id) -> Result<(Id, bool), Error> {
        let out = self.black.union(a, b)?;
        self.sync();
        self.audit_coarsening();
        Ok(out)
    }

    /// Drains black events into the colors.
    fn sync(&mut self) {
        let (events, merges) = self.black.take_events();
        for ev in events {
            match ev {
                Event::Added => self.invalidate_views(None),
                Event::Union { kept, removed } => self.absorb_black_union(kept, removed),
            }
        }
        self.mark_dirty(merges);
    }

    fn absorb_black_union(&mut self, kept: Id, removed: Id) {
        let gone = self.holders.remove(&removed);
        let stays = self.holders.get(&kept).copied();
        let holder_merge = gone.is_some() && gone == stays;
        if !holder_merge {
            // holders that meet anything else stop being pure holders
            if gone.is_some() {
                self.holders.remove(&kept);
            }
            self.invalidate_views(None);
        }
        for color in self.colors.iter_mut() {
            if let Some(ns) = color.colored_nodes.remove(&removed) {
                color.colored_nodes.entry(kept).or_default().extend(ns);
            }
            if let Some(ps) = color.colored_parents.remove(&removed) {
                color.colored_parents.entry(kept).or_default().extend(ps);
            }
        }
    }

    fn mark_dirty(&mut self, merges: Vec<LayerMerge>) {
        for m in merges {
            self.colors[ColorId::of_layer(m.layer).index()].dirty.push(m.root);
        }
    }

    /// Invalidates the views of every strict descendant of `rel`.
    fn invalidate_views(&mut self, rel: Rel) {
        match rel {
            None => {
                for c in self.colors.iter_mut() {
                    c.view_valid = false;
                }
            }
            Some(_) => {
                for d in self.descendants(rel) {
                    self.colors[d.index()].view_valid = false;
                }
            }
        }
    }

    // ---- colors --------------------------------------------------------

    pub fn create_color(&mut self, parent: Option<ColorId>, label: impl Into<String>) -> Result<ColorId, Error> {
        if let Some(p) = parent {
            self.check_color(p)?;
        }
        let layer = self.black.uf_mut().add_layer(parent.map(ColorId::layer))?;
        let id = ColorId::of_layer(layer);
        debug_assert_eq!(id.index(), self.colors.len());
        let depth = parent.map(|p| self.colors[p.index()].depth + 1).unwrap_or(1);
        self.colors.push(Color {
            id,
            parent,
            children: vec![],
            label: label.into(),
            depth,
            colored_nodes: FxHashMap::default(),
            colored_parents: FxHashMap::default(),
            view: FxHashMap::default(),
            view_valid: false,
            dirty: vec![],
            hashcons_builds: 0,
        });
        if let Some(p) = parent {
            self.colors[p.index()].children.push(id);
        }
        Ok(id)
    }

    pub fn colored_union(&mut self, c: ColorId, a: Id, b: Id) -> Result<(Id, bool), Error> {
        self.check_color(c)?;
        let (m, merges) = self.black.uf_mut().layer_union(c.layer(), a, b)?;
        self.mark_dirty(merges);
        self.audit_coarsening();
        Ok((m.root, m.merged()))
    }

    /// Union under `rel`: black or colored.
    pub fn union_in(&mut self, rel: Rel, a: Id, b: Id) -> Result<(Id, bool), Error> {
        match rel {
            None => self.union(a, b),
            Some(c) => self.colored_union(c, a, b),
        }
    }

    pub fn colored_add(&mut self, c: ColorId, node: ENode) -> Result<Id, Error> {
        self.check_color(c)?;
        for &ch in &node.children {
            self.black.uf().check(ch)?;
        }
        self.black.check_arity(node.op, node.arity())?;
        let id = match self.mode {
            NodeMode::Monochrome => {
                let id = self.black.add_unchecked(node);
                self.sync();
                id
            }
            NodeMode::Colored => self.colored_add_unchecked(c, node),
        };
        self.audit_coarsening();
        Ok(id)
    }

    pub fn colored_add_term(&mut self, c: ColorId, term: &Term) -> Result<Id, Error> {
        let children = term
            .args
            .iter()
            .map(|a| self.colored_add_term(c, a))
            .collect::<Result<Vec<Id>, Error>>()?;
        self.colored_add(c, ENode::new(term.op, children))
    }

    pub fn add_in(&mut self, rel: Rel, node: ENode) -> Result<Id, Error> {
        match rel {
            None => self.add(node),
            Some(c) => self.colored_add(c, node),
        }
    }

    pub fn add_term_in(&mut self, rel: Rel, term: &Term) -> Result<Id, Error> {
        match rel {
            None => self.add_term(term),
            Some(c) => self.colored_add_term(c, term),
        }
    }

    fn colored_add_unchecked(&mut self, c: ColorId, node: ENode) -> Id {
        self.stats.colored_adds += 1;
        let key = self.ccanon(c, &node);
        if let Some(id) = self.lookup_key(c, &key) {
            return id;
        }
        if self.audit {
            self.audit_store(c, &key);
        }
        self.stats.stored += 1;
        let h = self.black.add_holder();
        self.holders.insert(h, c);
        let mut kids: Vec<Id> = key.children.iter().map(|&ch| self.black.find(ch)).collect();
        kids.sort_unstable();
        kids.dedup();
        let color = &mut self.colors[c.index()];
        for k in kids {
            color.colored_parents.entry(k).or_default().push((key.clone(), h));
        }
        if color.view_valid {
            color.view.insert(key.clone(), (h, Owner::Own));
        }
        color.colored_nodes.insert(h, vec![key]);
        self.invalidate_views(Some(c));
        h
    }

    /// Black root of the class holding an e-node whose `c`-canonical form
    /// is `key`, if one is visible under `c`.
    fn lookup_key(&self, c: ColorId, key: &ENode) -> Option<Id> {
        if let Some(&id) = self.black.hashcons().get(key) {
            return Some(self.black.find(id));
        }
        let color = &self.colors[c.index()];
        if color.view_valid {
            if let Some(&(id, _)) = color.view.get(key) {
                return Some(self.black.find(id));
            }
        }
        // The view can lag behind unions made since the last rebuild, so
        // fall back to scanning the parents of the first child.
        let rel = Some(c);
        match key.children.first() {
            None => {
                for a in self.chain(c) {
                    let color = &self.colors[a.index()];
                    for h in color.holders() {
                        if color.colored_nodes[&h].iter().any(|n| n.op == key.op && n.children.is_empty()) {
                            return Some(self.black.find(h));
                        }
                    }
                }
                None
            }
            Some(&first) => {
                let chain = self.chain(c);
                for m in self.members(rel, first) {
                    let mut found = None;
                    self.for_each_parent(&chain, m, |p, e, _| {
                        if found.is_none()
                            && p.op == key.op
                            && p.children.len() == key.children.len()
                            && self.ccanon(c, p) == *key
                        {
                            found = Some(e);
                        }
                    });
                    if let Some(e) = found {
                        return Some(self.black.find(e));
                    }
                }
                None
            }
        }
    }

    /// Visits the parents of black root `m` visible under the colors in
    /// `chain` (outermost first; the last one is the viewing color).
    fn for_each_parent(&self, chain: &[ColorId], m: Id, mut f: impl FnMut(&ENode, Id, Owner)) {
        for (p, e) in &self.black.class(m).parents {
            f(p, *e, Owner::Shared);
        }
        for (i, a) in chain.iter().enumerate() {
            let owner = if i + 1 == chain.len() { Owner::Own } else { Owner::Shared };
            if let Some(ps) = self.colors[a.index()].colored_parents.get(&m) {
                for (p, e) in ps {
                    f(p, *e, owner);
                }
            }
        }
    }

    pub fn colored_lookup(&self, c: ColorId, node: &ENode) -> Option<Id> {
        if c.index() >= self.colors.len() || node.children.iter().any(|&ch| self.black.uf().check(ch).is_err()) {
            return None;
        }
        let key = self.ccanon(c, node);
        self.lookup_key(c, &key)
    }

    pub fn lookup_in(&self, rel: Rel, node: &ENode) -> Option<Id> {
        match rel {
            None => self.black.lookup(node),
            Some(c) => self.colored_lookup(c, node),
        }
    }

    pub fn lookup_term_in(&self, rel: Rel, term: &Term) -> Option<Id> {
        let children = term
            .args
            .iter()
            .map(|a| self.lookup_term_in(rel, a))
            .collect::<Option<Vec<Id>>>()?;
        self.lookup_in(rel, &ENode::new(term.op, children))
    }

    /// E-nodes stored in black class `root` that are visible under `rel`,
    /// each with the color owning it (`None` for black e-nodes).
    pub fn class_nodes(&self, rel: Rel, root: Id) -> Vec<(&ENode, Rel)> {
        let root = self.black.find(root);
        let mut out: Vec<(&ENode, Rel)> = self.black.class(root).nodes.iter().map(|n| (n, None)).collect();
        for a in self.rel_chain(rel) {
            if let Some(ns) = self.colors[a.index()].colored_nodes.get(&root) {
                out.extend(ns.iter().map(|n| (n, Some(a))));
            }
        }
        out
    }

    /// Every e-node visible under `rel` with its black class.
    pub fn visible_nodes(&self, rel: Rel) -> Vec<(ENode, Id)> {
        let mut out = vec![];
        for class in self.black.classes() {
            out.extend(class.nodes.iter().map(|n| (n.clone(), class.id)));
        }
        for a in self.rel_chain(rel) {
            let color = &self.colors[a.index()];
            for h in color.holders() {
                out.extend(color.colored_nodes[&h].iter().map(|n| (n.clone(), self.black.find(h))));
            }
        }
        out
    }

    // ---- rebuilding ------------------------------------------------------

    /// Black rebuild only.
    pub fn rebuild_black(&mut self) -> usize {
        let n = self.black.rebuild();
        self.sync();
        n
    }

    /// Rebuilds black and then every color, parents first, until nothing
    /// is left to do. Returns the number of unions performed.
    pub fn rebuild(&mut self) -> usize {
        let mut total = self.rebuild_black();
        loop {
            let mut any = false;
            for i in 0..self.colors.len() {
                let c = ColorId::from(i);
                if !self.colors[i].is_clean() {
                    any = true;
                    total += self.rebuild_color(c);
                }
            }
            if !any {
                break;
            }
        }
        self.audit_coarsening();
        total
    }

    /// Rebuilds `c` (black first). Descendants are left dirty.
    pub fn colored_rebuild(&mut self, c: ColorId) -> usize {
        let mut n = self.rebuild_black();
        n += self.rebuild_color(c);
        self.audit_coarsening();
        n
    }

    fn rebuild_color(&mut self, c: ColorId) -> usize {
        let merges = self.colored_congruence(c);
        let before = if self.audit { Some(self.term_partition(c)) } else { None };
        self.prune(c);
        self.colored_minimize(c);
        if let Some(before) = before {
            self.stats.audit_checks += 1;
            let after = self.term_partition(c);
            if !same_partition(&before, &after) {
                self.stats.prune_violations += 1;
            }
            if !self.check_minimization(c) {
                self.stats.minimization_violations += 1;
            }
        }
        merges
    }

    /// Colored congruence closure for `c`, without pruning or
    /// minimization. Black must be rebuilt already.
    pub fn colored_congruence(&mut self, c: ColorId) -> usize {
        self.black.uf_mut().normalize(c.layer());
        let mut pending: Vec<(Id, Id)> = vec![];
        let ci = c.index();
        if !self.colors[ci].view_valid {
            self.build_view(c, &mut pending);
        }
        let chain = self.chain(c);
        let mut unions = 0;
        loop {
            for (a, b) in pending.drain(..) {
                let (m, merges) = self.black.uf_mut().layer_union(c.layer(), a, b).expect("live ids");
                unions += m.merged() as usize;
                self.mark_dirty(merges);
            }
            if self.colors[ci].dirty.is_empty() {
                break;
            }
            let mut todo = std::mem::take(&mut self.colors[ci].dirty);
            for id in todo.iter_mut() {
                *id = self.colored_find(c, *id);
            }
            todo.sort_unstable();
            todo.dedup();
            let mut found: Vec<(ENode, Id, Owner)> = vec![];
            for rep in todo {
                for m in self.members(Some(c), rep) {
                    self.for_each_parent(&chain, m, |p, e, o| found.push((self.ccanon(c, p), e, o)));
                }
            }
            for (key, e, o) in found {
                self.view_insert(c, key, e, o, &mut pending);
            }
        }
        unions
    }

    /// From-scratch construction of `c`'s view.
    fn build_view(&mut self, c: ColorId, pending: &mut Vec<(Id, Id)>) {
        let ci = c.index();
        self.colors[ci].hashcons_builds += 1;
        self.colors[ci].view.clear();
        self.colors[ci].dirty.clear();
        let mut entries: Vec<(ENode, Id, Owner)> = vec![];
        for class in self.black.classes() {
            for n in &class.nodes {
                let key = self.ccanon(c, n);
                if key != *n {
                    entries.push((key, class.id, Owner::Shared));
                }
            }
        }
        for a in self.chain(c) {
            let owner = if a == c { Owner::Own } else { Owner::Shared };
            let color = &self.colors[a.index()];
            for (&h, ns) in &color.colored_nodes {
                for n in ns {
                    entries.push((self.ccanon(c, n), h, owner));
                }
            }
        }
        // deterministic union order
        entries.sort_unstable_by(|x, y| (x.1, &x.0).cmp(&(y.1, &y.0)));
        self.colors[ci].view_valid = true;
        for (key, e, o) in entries {
            self.view_insert(c, key, e, o, pending);
        }
    }

    fn view_insert(&mut self, c: ColorId, key: ENode, class: Id, owner: Owner, pending: &mut Vec<(Id, Id)>) {
        let uf = self.black.uf();
        let rep = uf.layer_find(c.layer(), class);
        if let Some(&b) = self.black.hashcons().get(&key) {
            if uf.layer_find(c.layer(), b) != rep {
                pending.push((b, class));
            }
            return;
        }
        match self.colors[c.index()].view.entry(key) {
            Entry::Occupied(mut e) => {
                let (other, o) = *e.get();
                if owner == Owner::Shared && o == Owner::Own {
                    e.get_mut().1 = Owner::Shared;
                }
                if uf.layer_find(c.layer(), other) != rep {
                    pending.push((other, class));
                }
            }
            Entry::Vacant(e) => {
                e.insert((class, owner));
            }
        }
    }

    /// Drops colored e-nodes of `c` whose color-canonical form another
    /// visible e-node already provides. Needs a clean view.
    pub fn prune(&mut self, c: ColorId) -> usize {
        if !self.colors[c.index()].view_valid {
            return 0;
        }
        let mut holders: Vec<Id> = self.colors[c.index()].colored_nodes.keys().copied().collect();
        holders.sort_unstable();
        let mut seen: FxHashSet<ENode> = FxHashSet::default();
        let mut kept: Vec<(Id, Vec<ENode>)> = vec![];
        let mut removed = 0;
        for h in holders {
            let nodes = &self.colors[c.index()].colored_nodes[&h];
            let mut keep = vec![];
            for n in nodes {
                let key = self.ccanon(c, n);
                let shared = self.black.hashcons().contains_key(&key)
                    || matches!(self.colors[c.index()].view.get(&key), Some((_, Owner::Shared)));
                if shared || !seen.insert(key.clone()) {
                    removed += 1;
                } else {
                    keep.push(key);
                }
            }
            kept.push((h, keep));
        }
        let color = &mut self.colors[c.index()];
        color.colored_nodes.clear();
        color.colored_parents.clear();
        for (h, ns) in kept {
            if ns.is_empty() {
                self.holders.remove(&h);
                continue;
            }
            for n in &ns {
                let mut kids: Vec<Id> = n.children.iter().map(|&ch| self.black.find(ch)).collect();
                kids.sort_unstable();
                kids.dedup();
                for k in kids {
                    color.colored_parents.entry(k).or_default().push((n.clone(), h));
                }
            }
            color.colored_nodes.insert(h, ns);
        }
        self.stats.pruned += removed;
        removed
    }

    /// Physically merges pure holder classes of `c` that are `c`-equal.
    pub fn colored_minimize(&mut self, c: ColorId) -> usize {
        let mut groups: FxHashMap<Id, Vec<Id>> = FxHashMap::default();
        for h in self.colors[c.index()].holders() {
            if self.holders.get(&h) == Some(&c) {
                groups.entry(self.colored_find(c, h)).or_default().push(h);
            }
        }
        let mut reps: Vec<Id> = groups.keys().copied().collect();
        reps.sort_unstable();
        let mut merged = 0;
        for r in reps {
            let hs = &groups[&r];
            for &h in &hs[1..] {
                let (_, did) = self.black.union_unchecked(hs[0], h);
                merged += did as usize;
            }
        }
        if merged > 0 {
            self.black.rebuild();
            self.sync();
        }
        self.stats.minimized += merged;
        merged
    }

    // ---- audits ------------------------------------------------------------

    pub fn begin_iteration(&mut self) {
        self.stores_this_iteration.clear();
    }

    fn audit_store(&mut self, c: ColorId, key: &ENode) {
        let rel = Some(c);
        let visible = self.visible_nodes(rel);
        if visible.iter().any(|(n, _)| self.ccanon(c, n) == *key) {
            self.stats.duplicate_stores += 1;
        }
        if self.black.classes().any(|cl| cl.nodes.iter().any(|n| self.ccanon(c, n) == *key)) {
            self.stats.subsumed_stores += 1;
        }
        let n = self.stores_this_iteration.entry((c, key.clone())).or_insert(0);
        *n += 1;
        self.stats.max_stores_per_iteration = self.stats.max_stores_per_iteration.max(*n);
    }

    fn audit_coarsening(&mut self) {
        if self.audit {
            self.stats.coarsening_checks += 1;
            if !self.check_coarsening() {
                self.stats.coarsening_violations += 1;
            }
        }
    }

    /// Every relation coarsens its parent relation.
    pub fn check_coarsening(&self) -> bool {
        for i in 0..self.black.num_ids() {
            let id = Id::from(i);
            for color in &self.colors {
                let below = self.find_in(color.parent, id);
                if self.colored_find(color.id, id) != self.colored_find(color.id, below) {
                    return false;
                }
            }
        }
        true
    }

    /// At most one class per `c`-class holds colored e-nodes of `c`.
    pub fn check_minimization(&self, c: ColorId) -> bool {
        let mut seen = FxHashSet::default();
        self.colors[c.index()]
            .holders()
            .into_iter()
            .all(|h| seen.insert(self.colored_find(c, h)))
    }

    /// One term per visible e-node, paired with its `rel` representative.
    pub fn term_partition(&self, c: ColorId) -> Vec<(Term, Option<Id>)> {
        let rel = Some(c);
        let best = self.extract_all(rel);
        let mut out: Vec<(Term, Id)> = vec![];
        for (n, e) in self.visible_nodes(rel) {
            let args: Option<Vec<Term>> = n
                .children
                .iter()
                .map(|&ch| best.get(&self.find_in(rel, ch)).map(|(_, t)| t.clone()))
                .collect();
            if let Some(args) = args {
                out.push((Term::new(n.op, args), self.find_in(rel, e)));
            }
        }
        out.sort();
        out.dedup();
        // re-resolve through lookup so both snapshots use the same path
        out.into_iter()
            .map(|(t, _)| {
                let id = self.lookup_term_in(rel, &t).map(|i| self.find_in(rel, i));
                (t, id)
            })
            .collect()
    }

    // ---- extraction ------------------------------------------------------

    /// Smallest term of every `rel`-class, keyed by representative.
    pub fn extract_all(&self, rel: Rel) -> FxHashMap<Id, (usize, Term)> {
        let nodes = self.visible_nodes(rel);
        let mut best: FxHashMap<Id, (usize, Term)> = FxHashMap::default();
        loop {
            let mut changed = false;
            for (n, e) in &nodes {
                let mut size = 1;
                let mut args = Vec::with_capacity(n.children.len());
                let mut ok = true;
                for &ch in &n.children {
                    match best.get(&self.find_in(rel, ch)) {
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
                let rep = self.find_in(rel, *e);
                let better = match best.get(&rep) {
                    None => true,
                    Some(cur) => cand < *cur,
                };
                if better {
                    best.insert(rep, cand);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        best
    }

    pub fn extract(&self, rel: Rel, id: Id) -> Option<Term> {
        let rep = self.find_in(rel, id);
        self.extract_all(rel).remove(&rep).map(|(_, t)| t)
    }

    // ---- dumps -------------------------------------------------------------

    pub fn dump(&self) -> ColoredDump {
        let colors = self
            .colors
            .iter()
            .map(|color| {
                let delta = self.black.uf().delta(color.id.layer());
                let unions = delta
                    .sets()
                    .into_iter()
                    .map(|set| {
                        let mut live: Vec<Id> =
                            set.into_iter().filter(|&k| self.find_in(color.parent, k) == k).collect();
                        live.dedup();
                        live
                    })
                    .filter(|s| s.len() > 1)
                    .collect();
                let colored_nodes = color
                    .holders()
                    .into_iter()
                    .map(|h| {
                        let mut ns: Vec<String> =
                            color.colored_nodes[&h].iter().map(|n| self.black.canon(n).to_string()).collect();
                        ns.sort();
                        (self.black.find(h), ns)
                    })
                    .collect();
                ColorDump {
                    id: color.id,
                    parent: color.parent,
                    label: color.label.clone(),
                    unions,
                    colored_nodes,
                }
            })
            .collect();
        ColoredDump {
            graph: self.black.dump(),
            colors,
        }
    }
}

fn same_partition(a: &[(Term, Option<Id>)], b: &[(Term, Option<Id>)]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd: FxHashMap<Id, Id> = FxHashMap::default();
    let mut back: FxHashMap<Id, Id> = FxHashMap::default();
    for ((ta, ia), (tb, ib)) in a.iter().zip(b) {
        let (Some(ia), Some(ib)) = (ia, ib) else {
            return false;
        };
        if ta != tb {
            return false;
        }
        if *fwd.entry(*ia).or_insert(*ib) != *ib || *back.entry(*ib).or_insert(*ia) != *ia {
            return false;
        }
    }
    true
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ColorDump {
    pub id: ColorId,
    pub parent: Option<ColorId>,
    pub label: String,
    /// Sets of parent-relation representatives merged by this color.
    pub unions: Vec<Vec<Id>>,
    /// Holder class -> colored e-nodes.
    pub colored_nodes: Vec<(Id, Vec<String>)>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ColoredDump {
    pub graph: GraphDump,
    pub colors: Vec<ColorDump>,
}
