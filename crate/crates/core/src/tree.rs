//! Edge-weighted trees whose vertices are either labelled points or unlabelled
//! Steiner vertices.
//!
//! Vertices and edges live in an arena with stable ids. Removed slots are
//! marked dead and never reused, so ids held by callers stay meaningful for
//! the lifetime of the tree value.

use std::sync::Arc;

use thiserror::Error;

use crate::metric::{DistanceMatrix, MetricError};

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("vertex {0} is not in the tree")]
    UnknownVertex(VertexId),
    #[error("point {0} is not a label of the tree")]
    UnknownLabel(usize),
    #[error("point {0} is already a label of the tree")]
    LabelPresent(usize),
    #[error("point id {0} has no name")]
    NoName(usize),
    #[error("stem position {position} lies outside the path of length {length}")]
    StemOutOfRange { position: f64, length: f64 },
    #[error("cannot remove every label of a tree")]
    RemovesAllLabels,
    #[error("edge weight {0} is not a finite nonnegative number")]
    BadWeight(f64),
    #[error("labels `{0}` and `{1}` sit on the same vertex")]
    CoincidentLabels(String, String),
    #[error("edges do not form a tree")]
    NotATree,
    #[error("newick: {message} at byte {position}")]
    Newick { position: usize, message: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Clone, Debug)]
struct Vertex {
    label: Option<usize>,
    adj: Vec<(VertexId, EdgeId)>,
    alive: bool,
}

#[derive(Clone, Debug)]
struct Edge {
    ends: [VertexId; 2],
    weight: f64,
    alive: bool,
}

/// Where a stem fell in the tree *before* augmentation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StemLocation {
    AtVertex(VertexId),
    /// Strictly inside `edge`, `offset` away from the endpoint `from`.
    OnEdge {
        edge: EdgeId,
        from: VertexId,
        offset: f64,
    },
}

/// Result of [`WeightedTree::leaf_augment`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Augmentation {
    pub stem: StemLocation,
    /// The stem as a vertex of the augmented tree (new when the stem was on an edge).
    pub stem_vertex: VertexId,
    /// Vertex now carrying the new label.
    pub leaf: VertexId,
}

/// Tree rooted at some vertex: parent links, root distances and a preorder.
#[derive(Clone, Debug)]
pub(crate) struct Rooting {
    pub parent: Vec<Option<(VertexId, EdgeId)>>,
    pub depth: Vec<f64>,
    pub order: Vec<VertexId>,
}

/// Edge-weighted tree over a fixed universe of point names.
#[derive(Clone, Debug)]
pub struct WeightedTree {
    names: Arc<[String]>,
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    label_vertex: Vec<Option<VertexId>>,
    live_vertices: usize,
    live_edges: usize,
    live_labels: usize,
}

impl WeightedTree {
    /// Empty tree whose labels are drawn from `names` (by index).
    pub fn new(names: impl Into<Arc<[String]>>) -> Self {
        let names = names.into();
        let n = names.len();
        WeightedTree {
            names,
            vertices: Vec::new(),
            edges: Vec::new(),
            label_vertex: vec![None; n],
            live_vertices: 0,
            live_edges: 0,
            live_labels: 0,
        }
    }

    /// Single-vertex tree carrying `label`.
    pub fn singleton(names: impl Into<Arc<[String]>>, label: usize) -> Result<Self, TreeError> {
        let mut t = Self::new(names);
        if label >= t.names.len() {
            return Err(TreeError::NoName(label));
        }
        t.add_vertex(Some(label));
        Ok(t)
    }

    /// Builds a tree from explicit vertices and edges. Edges of weight at most
    /// `eta` are contracted; unlabelled leaves and unlabelled degree-2 vertices
    /// are then cleaned up.
    pub fn from_edges(
        names: impl Into<Arc<[String]>>,
        vertex_labels: &[Option<usize>],
        edges: &[(usize, usize, f64)],
        eta: f64,
    ) -> Result<Self, TreeError> {
        let names: Arc<[String]> = names.into();
        let nv = vertex_labels.len();
        if nv > 0 && edges.len() != nv - 1 {
            return Err(TreeError::NotATree);
        }
        for &(_, _, w) in edges {
            if !w.is_finite() || w < 0.0 {
                return Err(TreeError::BadWeight(w));
            }
        }
        let mut uf = crate::unionfind::UnionFind::new(nv);
        for &(a, b, w) in edges {
            if a >= nv || b >= nv {
                return Err(TreeError::NotATree);
            }
            if w <= eta && !uf.union(a, b) {
                return Err(TreeError::NotATree);
            }
        }
        let mut t = Self::new(names);
        let mut rep_vertex: Vec<Option<VertexId>> = vec![None; nv];
        let mut rep_label: Vec<Option<usize>> = vec![None; nv];
        for (v, &label) in vertex_labels.iter().enumerate() {
            let r = uf.find(v);
            if let Some(l) = label {
                if l >= t.names.len() {
                    return Err(TreeError::NoName(l));
                }
                if let Some(prev) = rep_label[r] {
                    return Err(TreeError::CoincidentLabels(
                        t.names[prev].clone(),
                        t.names[l].clone(),
                    ));
                }
                rep_label[r] = Some(l);
            }
        }
        for v in 0..nv {
            let r = uf.find(v);
            if rep_vertex[r].is_none() {
                let id = t.add_vertex(None);
                if let Some(l) = rep_label[r] {
                    if t.label_vertex[l].is_some() {
                        return Err(TreeError::LabelPresent(l));
                    }
                    t.set_label(id, l);
                }
                rep_vertex[r] = Some(id);
            }
        }
        let vertex_of: Vec<VertexId> = (0..nv).map(|v| rep_vertex[uf.find(v)].unwrap()).collect();
        let mut cycles = crate::unionfind::UnionFind::new(t.vertices.len());
        let mut extra = 0usize;
        for &(a, b, w) in edges {
            if w > eta {
                let (va, vb) = (vertex_of[a], vertex_of[b]);
                if !cycles.union(va, vb) {
                    return Err(TreeError::NotATree);
                }
                t.add_edge(va, vb, w);
                extra += 1;
            }
        }
        if t.live_vertices > 0 && extra != t.live_vertices - 1 {
            return Err(TreeError::NotATree);
        }
        let work: Vec<VertexId> = (0..t.vertices.len()).collect();
        t.cleanup(work);
        Ok(t)
    }

    pub fn names(&self) -> &Arc<[String]> {
        &self.names
    }

    pub fn name(&self, label: usize) -> &str {
        &self.names[label]
    }

    pub fn is_empty(&self) -> bool {
        self.live_vertices == 0
    }

    pub fn vertex_count(&self) -> usize {
        self.live_vertices
    }

    pub fn edge_count(&self) -> usize {
        self.live_edges
    }

    pub fn label_count(&self) -> usize {
        self.live_labels
    }

    /// Size of the vertex arena, including dead slots.
    pub fn vertex_capacity(&self) -> usize {
        self.vertices.len()
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.vertices.get(v).is_some_and(|x| x.alive)
    }

    pub fn vertex_of(&self, label: usize) -> Option<VertexId> {
        self.label_vertex.get(label).copied().flatten()
    }

    pub fn label_of(&self, v: VertexId) -> Option<usize> {
        self.vertices
            .get(v)
            .filter(|x| x.alive)
            .and_then(|x| x.label)
    }

    /// Labels present in the tree, ascending by point id.
    pub fn labels(&self) -> Vec<usize> {
        (0..self.label_vertex.len())
            .filter(|&l| self.label_vertex[l].is_some())
            .collect()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.vertices.len()).filter(|&v| self.vertices[v].alive)
    }

    /// Live edges as `(id, a, b, weight)`.
    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, VertexId, VertexId, f64)> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.alive)
            .map(|(id, e)| (id, e.ends[0], e.ends[1], e.weight))
    }

    pub fn edge(&self, e: EdgeId) -> Option<(VertexId, VertexId, f64)> {
        self.edges
            .get(e)
            .filter(|x| x.alive)
            .map(|x| (x.ends[0], x.ends[1], x.weight))
    }

    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, EdgeId)] {
        &self.vertices[v].adj
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.vertices[v].adj.len()
    }

    fn add_vertex(&mut self, label: Option<usize>) -> VertexId {
        let id = self.vertices.len();
        self.vertices.push(Vertex {
            label: None,
            adj: Vec::new(),
            alive: true,
        });
        self.live_vertices += 1;
        if let Some(l) = label {
            self.set_label(id, l);
        }
        id
    }

    fn set_label(&mut self, v: VertexId, label: usize) {
        debug_assert!(self.vertices[v].label.is_none());
        self.vertices[v].label = Some(label);
        self.label_vertex[label] = Some(v);
        self.live_labels += 1;
    }

    fn add_edge(&mut self, a: VertexId, b: VertexId, weight: f64) -> EdgeId {
        let id = self.edges.len();
        self.edges.push(Edge {
            ends: [a, b],
            weight,
            alive: true,
        });
        self.vertices[a].adj.push((b, id));
        self.vertices[b].adj.push((a, id));
        self.live_edges += 1;
        id
    }

    fn detach(&mut self, v: VertexId, e: EdgeId) {
        let adj = &mut self.vertices[v].adj;
        if let Some(p) = adj.iter().position(|&(_, x)| x == e) {
            adj.swap_remove(p);
        }
    }

    fn kill_edge(&mut self, e: EdgeId) {
        let [a, b] = self.edges[e].ends;
        self.detach(a, e);
        self.detach(b, e);
        self.edges[e].alive = false;
        self.live_edges -= 1;
    }

    fn kill_vertex(&mut self, v: VertexId) {
        debug_assert!(self.vertices[v].adj.is_empty());
        if let Some(l) = self.vertices[v].label.take() {
            self.label_vertex[l] = None;
            self.live_labels -= 1;
        }
        self.vertices[v].alive = false;
        self.live_vertices -= 1;
    }

    /// Splits edge `e` at distance `offset` from its endpoint `from` and
    /// returns the new Steiner vertex. Edge `e` keeps the `from` half.
    fn subdivide(&mut self, e: EdgeId, from: VertexId, offset: f64) -> VertexId {
        let [a, b] = self.edges[e].ends;
        let to = if a == from { b } else { a };
        let w = self.edges[e].weight;
        let s = self.add_vertex(None);
        // re-point e: from -- s
        self.detach(to, e);
        self.edges[e].ends = [from, s];
        self.edges[e].weight = offset;
        if let Some(slot) = self.vertices[from].adj.iter_mut().find(|x| x.1 == e) {
            slot.0 = s;
        }
        self.vertices[s].adj.push((from, e));
        self.add_edge(s, to, w - offset);
        s
    }

    /// Removes unlabelled leaves (recursively) and contracts unlabelled
    /// degree-2 vertices reachable from `work`.
    fn cleanup(&mut self, mut work: Vec<VertexId>) {
        while let Some(v) = work.pop() {
            if !self.vertices[v].alive || self.vertices[v].label.is_some() {
                continue;
            }
            match self.vertices[v].adj.len() {
                0 => {
                    if self.live_vertices > 1 || self.live_labels == 0 {
                        self.kill_vertex(v);
                    }
                }
                1 => {
                    let (nb, e) = self.vertices[v].adj[0];
                    self.kill_edge(e);
                    self.kill_vertex(v);
                    work.push(nb);
                }
                2 => {
                    let (a, ea) = self.vertices[v].adj[0];
                    let (b, eb) = self.vertices[v].adj[1];
                    let wb = self.edges[eb].weight;
                    self.kill_edge(eb);
                    // ea: a -- v  becomes  a -- b
                    self.detach(v, ea);
                    let ends = &mut self.edges[ea].ends;
                    if ends[0] == v {
                        ends[0] = b;
                    } else {
                        ends[1] = b;
                    }
                    self.edges[ea].weight += wb;
                    self.vertices[b].adj.push((a, ea));
                    if let Some(slot) = self.vertices[a].adj.iter_mut().find(|x| x.1 == ea) {
                        slot.0 = b;
                    }
                    self.kill_vertex(v);
                }
                _ => {}
            }
        }
    }

    /// Parent links and root distances for the tree hung from `root`.
    /// `visits` is incremented once per edge traversed.
    pub(crate) fn root_at(&self, root: VertexId, visits: &mut usize) -> Rooting {
        let cap = self.vertices.len();
        let mut parent = vec![None; cap];
        let mut depth = vec![f64::NAN; cap];
        let mut order = Vec::with_capacity(self.live_vertices);
        depth[root] = 0.0;
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            order.push(v);
            for &(nb, e) in &self.vertices[v].adj {
                if parent[v].is_some_and(|(p, _)| p == nb) {
                    continue;
                }
                *visits += 1;
                parent[nb] = Some((v, e));
                depth[nb] = depth[v] + self.edges[e].weight;
                stack.push(nb);
            }
        }
        Rooting {
            parent,
            depth,
            order,
        }
    }

    /// Vertices and edges of the path from `from` to `to`.
    pub(crate) fn path(
        &self,
        from: VertexId,
        to: VertexId,
        visits: &mut usize,
    ) -> (Vec<VertexId>, Vec<EdgeId>) {
        let cap = self.vertices.len();
        let mut parent: Vec<Option<(VertexId, EdgeId)>> = vec![None; cap];
        let mut seen = vec![false; cap];
        seen[from] = true;
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                break;
            }
            for &(nb, e) in &self.vertices[v].adj {
                if !seen[nb] {
                    *visits += 1;
                    seen[nb] = true;
                    parent[nb] = Some((v, e));
                    stack.push(nb);
                }
            }
        }
        let mut verts = vec![to];
        let mut edges = Vec::new();
        let mut cur = to;
        while cur != from {
            let (p, e) = parent[cur].expect("tree is connected");
            verts.push(p);
            edges.push(e);
            cur = p;
        }
        verts.reverse();
        edges.reverse();
        (verts, edges)
    }

    /// Length of the unique path between two vertices.
    pub fn tree_distance(&self, u: VertexId, v: VertexId) -> Result<f64, TreeError> {
        for x in [u, v] {
            if !self.contains_vertex(x) {
                return Err(TreeError::UnknownVertex(x));
            }
        }
        let mut visits = 0;
        let (_, edges) = self.path(u, v, &mut visits);
        Ok(edges.iter().map(|&e| self.edges[e].weight).sum())
    }

    /// Distance between the vertices carrying two labels.
    pub fn label_distance(&self, a: usize, b: usize) -> Result<f64, TreeError> {
        let va = self.vertex_of(a).ok_or(TreeError::UnknownLabel(a))?;
        let vb = self.vertex_of(b).ok_or(TreeError::UnknownLabel(b))?;
        self.tree_distance(va, vb)
    }

    /// Adds `label` as the only vertex of an empty tree.
    pub fn insert_first(&mut self, label: usize) -> Result<VertexId, TreeError> {
        if !self.is_empty() {
            return Err(TreeError::LabelPresent(label));
        }
        if label >= self.names.len() {
            return Err(TreeError::NoName(label));
        }
        Ok(self.add_vertex(Some(label)))
    }

    /// Attaches `a` as a leaf whose stem lies on the `u`–`v` path at distance
    /// `d_au - r` from `u`, where `r = (d_au + d_av - d_uv) / 2` becomes the
    /// length of the new pendant edge. The `u`–`v` path is taken from the tree,
    /// so `d_uv` should agree with it.
    ///
    /// Stems within `eta` of an existing vertex snap to it. When `r <= eta` the
    /// label is placed on an unlabelled stem directly; a labelled stem gets a
    /// pendant edge of length `eta` instead.
    #[allow(clippy::too_many_arguments)]
    pub fn leaf_augment(
        &mut self,
        a: usize,
        u: usize,
        v: usize,
        d_au: f64,
        d_av: f64,
        d_uv: f64,
        eta: f64,
    ) -> Result<Augmentation, TreeError> {
        let mut visits = 0;
        self.leaf_augment_counted(a, u, v, d_au, d_av, d_uv, eta, &mut visits)
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn leaf_augment_counted(
        &mut self,
        a: usize,
        u: usize,
        v: usize,
        d_au: f64,
        d_av: f64,
        d_uv: f64,
        eta: f64,
        visits: &mut usize,
    ) -> Result<Augmentation, TreeError> {
        if a >= self.names.len() {
            return Err(TreeError::NoName(a));
        }
        if self.vertex_of(a).is_some() {
            return Err(TreeError::LabelPresent(a));
        }
        let uv = self.vertex_of(u).ok_or(TreeError::UnknownLabel(u))?;
        let vv = self.vertex_of(v).ok_or(TreeError::UnknownLabel(v))?;
        let r = (d_au + d_av - d_uv) / 2.0;
        let position = d_au - r;
        let (path_v, path_e) = if uv == vv {
            (vec![uv], Vec::new())
        } else {
            self.path(uv, vv, visits)
        };
        let mut cum = Vec::with_capacity(path_v.len());
        cum.push(0.0);
        for &e in &path_e {
            cum.push(cum.last().unwrap() + self.edges[e].weight);
        }
        let length = *cum.last().unwrap();
        if !(position >= -eta && position <= length + eta) {
            return Err(TreeError::StemOutOfRange { position, length });
        }
        let position = position.clamp(0.0, length);

        // nearest path vertex within eta, else the edge containing the stem
        let mut snap: Option<usize> = None;
        let mut best = f64::INFINITY;
        for (k, &c) in cum.iter().enumerate() {
            let gap = (c - position).abs();
            if gap <= eta && gap < best {
                best = gap;
                snap = Some(k);
            }
        }
        let (stem, stem_vertex) = match snap {
            Some(k) => (StemLocation::AtVertex(path_v[k]), path_v[k]),
            None => {
                let k = cum
                    .windows(2)
                    .position(|w| w[0] < position && position < w[1])
                    .expect("stem lies inside some path edge");
                let offset = position - cum[k];
                let loc = StemLocation::OnEdge {
                    edge: path_e[k],
                    from: path_v[k],
                    offset,
                };
                (loc, self.subdivide(path_e[k], path_v[k], offset))
            }
        };
        let r = r.max(0.0);
        let leaf = if r <= eta && self.vertices[stem_vertex].label.is_none() {
            self.set_label(stem_vertex, a);
            stem_vertex
        } else {
            let leaf = self.add_vertex(Some(a));
            self.add_edge(stem_vertex, leaf, r.max(eta));
            leaf
        };
        Ok(Augmentation {
            stem,
            stem_vertex,
            leaf,
        })
    }

    /// Detaches the given labels. Leaves are deleted, internal vertices become
    /// Steiner vertices, and the tree is then cleaned up so that every leaf is
    /// labelled and every Steiner vertex has degree at least three.
    pub fn remove_labels(&mut self, labels: &[usize]) -> Result<(), TreeError> {
        let mut targets: Vec<usize> = labels.to_vec();
        targets.sort_unstable();
        targets.dedup();
        for &l in &targets {
            if self.vertex_of(l).is_none() {
                return Err(TreeError::UnknownLabel(l));
            }
        }
        if targets.len() >= self.live_labels {
            return Err(TreeError::RemovesAllLabels);
        }
        let mut work = Vec::with_capacity(targets.len());
        for l in targets {
            let v = self.label_vertex[l].take().unwrap();
            self.vertices[v].label = None;
            self.live_labels -= 1;
            work.push(v);
        }
        self.cleanup(work);
        Ok(())
    }

    /// Shortest-path metric on the labelled vertices, ordered by point id.
    pub fn induced_metric(&self) -> Result<DistanceMatrix, TreeError> {
        let labels = self.labels();
        let mut rows = Vec::with_capacity(labels.len());
        let mut visits = 0;
        for &l in &labels {
            let root = self.label_vertex[l].unwrap();
            let r = self.root_at(root, &mut visits);
            rows.push(
                labels
                    .iter()
                    .map(|&m| r.depth[self.label_vertex[m].unwrap()])
                    .collect::<Vec<f64>>(),
            );
        }
        let names = labels.iter().map(|&l| self.names[l].clone()).collect();
        Ok(DistanceMatrix::from_fn(names, |i, j| rows[i][j])?)
    }

    /// Newick text rooted at the labelled vertex with the smallest name.
    pub fn to_newick(&self) -> String {
        let root = match self
            .vertices()
            .filter(|&v| self.vertices[v].label.is_some())
            .min_by(|&a, &b| self.vertex_name(a).cmp(self.vertex_name(b)))
        {
            Some(r) => r,
            None => return ";".to_string(),
        };
        let mut visits = 0;
        let rooting = self.root_at(root, &mut visits);
        let cap = self.vertices.len();
        let mut children: Vec<Vec<VertexId>> = vec![Vec::new(); cap];
        for &v in &rooting.order {
            if let Some((p, _)) = rooting.parent[v] {
                children[p].push(v);
            }
        }
        // smallest name in each subtree, for a stable child order
        let mut min_name: Vec<Option<&str>> = vec![None; cap];
        for &v in rooting.order.iter().rev() {
            let mut best = self.vertices[v].label.map(|l| self.names[l].as_str());
            for &c in &children[v] {
                best = match (best, min_name[c]) {
                    (Some(x), Some(y)) => Some(x.min(y)),
                    (x, y) => x.or(y),
                };
            }
            min_name[v] = best;
        }
        for list in children.iter_mut() {
            list.sort_by(|&a, &b| min_name[a].cmp(&min_name[b]));
        }
        let mut out = String::new();
        self.write_newick(root, &children, &rooting, &mut out);
        out.push(';');
        out
    }

    fn vertex_name(&self, v: VertexId) -> &str {
        self.vertices[v]
            .label
            .map(|l| self.names[l].as_str())
            .unwrap_or("")
    }

    fn write_newick(
        &self,
        v: VertexId,
        children: &[Vec<VertexId>],
        rooting: &Rooting,
        out: &mut String,
    ) {
        if !children[v].is_empty() {
            out.push('(');
            for (i, &c) in children[v].iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                self.write_newick(c, children, rooting, out);
            }
            out.push(')');
        }
        if let Some(l) = self.vertices[v].label {
            out.push_str(&quote_newick_label(&self.names[l]));
        }
        if let Some((_, e)) = rooting.parent[v] {
            out.push(':');
            out.push_str(&format_length(self.edges[e].weight));
        }
    }

    /// Parses Newick text into a tree. Every leaf must be named; internal
    /// names become labels; zero-length branches are contracted.
    pub fn parse_newick(text: &str) -> Result<Self, TreeError> {
        let parsed = newick::parse(text)?;
        let mut names: Vec<String> = Vec::new();
        let mut vertex_labels = Vec::with_capacity(parsed.nodes.len());
        let mut seen = std::collections::HashSet::new();
        for node in &parsed.nodes {
            match &node.name {
                Some(name) => {
                    if !seen.insert(name.clone()) {
                        return Err(TreeError::Newick {
                            position: node.position,
                            message: format!("duplicate label `{name}`"),
                        });
                    }
                    vertex_labels.push(Some(names.len()));
                    names.push(name.clone());
                }
                None => {
                    if node.is_leaf {
                        return Err(TreeError::Newick {
                            position: node.position,
                            message: "unnamed leaf".into(),
                        });
                    }
                    vertex_labels.push(None);
                }
            }
        }
        WeightedTree::from_edges(names, &vertex_labels, &parsed.edges, 0.0)
    }
}

/// Quotes a Newick label when it contains structural characters.
pub fn quote_newick_label(label: &str) -> String {
    let needs = label.is_empty()
        || label.chars().any(|c| {
            matches!(c, '(' | ')' | ',' | ';' | ':' | '\'' | '[' | ']') || c.is_whitespace()
        });
    if needs {
        format!("'{}'", label.replace('\'', "''"))
    } else {
        label.to_string()
    }
}

/// Formats a branch length with 12 significant digits, trailing zeros trimmed.
pub fn format_length(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-6..=15).contains(&exp) {
        let prec = (11 - exp).max(0) as usize;
        let s = format!("{x:.prec$}");
        trim_zeros(s)
    } else {
        let s = format!("{x:.11e}");
        let (mant, e) = s.split_once('e').unwrap();
        format!("{}e{}", trim_zeros(mant.to_string()), e)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

mod newick {
    use super::TreeError;

    pub(super) struct Node {
        pub name: Option<String>,
        pub is_leaf: bool,
        pub position: usize,
    }

    pub(super) struct Parsed {
        pub nodes: Vec<Node>,
        pub edges: Vec<(usize, usize, f64)>,
    }

    struct Parser<'a> {
        src: &'a [u8],
        pos: usize,
        nodes: Vec<Node>,
        edges: Vec<(usize, usize, f64)>,
    }

    pub(super) fn parse(text: &str) -> Result<Parsed, TreeError> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
            nodes: Vec::new(),
            edges: Vec::new(),
        };
        p.skip_ws();
        let (_, len) = p.subtree()?;
        if len.is_some_and(|l: f64| l != 0.0) {
            // a root branch length carries no distance information
        }
        p.skip_ws();
        if p.peek() != Some(b';') {
            return Err(p.error("expected `;`"));
        }
        p.pos += 1;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("trailing input after `;`"));
        }
        Ok(Parsed {
            nodes: p.nodes,
            edges: p.edges,
        })
    }

    impl Parser<'_> {
        fn error(&self, message: &str) -> TreeError {
            TreeError::Newick {
                position: self.pos,
                message: message.to_string(),
            }
        }

        fn peek(&self) -> Option<u8> {
            self.src.get(self.pos).copied()
        }

        fn skip_ws(&mut self) {
            loop {
                match self.peek() {
                    Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                    Some(b'[') => {
                        while let Some(c) = self.peek() {
                            self.pos += 1;
                            if c == b']' {
                                break;
                            }
                        }
                    }
                    _ => break,
                }
            }
        }

        fn subtree(&mut self) -> Result<(usize, Option<f64>), TreeError> {
            let position = self.pos;
            let id = self.nodes.len();
            self.nodes.push(Node {
                name: None,
                is_leaf: true,
                position,
            });
            let mut children = Vec::new();
            if self.peek() == Some(b'(') {
                self.pos += 1;
                loop {
                    self.skip_ws();
                    children.push(self.subtree()?);
                    self.skip_ws();
                    match self.peek() {
                        Some(b',') => self.pos += 1,
                        Some(b')') => {
                            self.pos += 1;
                            break;
                        }
                        _ => return Err(self.error("expected `,` or `)`")),
                    }
                }
                self.nodes[id].is_leaf = false;
            }
            self.skip_ws();
            self.nodes[id].name = self.name()?;
            self.skip_ws();
            let mut len = None;
            if self.peek() == Some(b':') {
                self.pos += 1;
                self.skip_ws();
                len = Some(self.number()?);
            }
            for (child, clen) in children {
                let w = clen.ok_or_else(|| TreeError::Newick {
                    position: self.nodes[child].position,
                    message: "missing branch length".into(),
                })?;
                self.edges.push((id, child, w));
            }
            Ok((id, len))
        }

        fn name(&mut self) -> Result<Option<String>, TreeError> {
            if self.peek() == Some(b'\'') {
                self.pos += 1;
                let mut out = Vec::new();
                loop {
                    match self.peek() {
                        None => return Err(self.error("unterminated quoted label")),
                        Some(b'\'') => {
                            if self.src.get(self.pos + 1) == Some(&b'\'') {
                                out.push(b'\'');
                                self.pos += 2;
                            } else {
                                self.pos += 1;
                                break;
                            }
                        }
                        Some(c) => {
                            out.push(c);
                            self.pos += 1;
                        }
                    }
                }
                return String::from_utf8(out)
                    .map(Some)
                    .map_err(|_| self.error("label is not UTF-8"));
            }
            let start = self.pos;
            while let Some(c) = self.peek() {
                if matches!(c, b'(' | b')' | b',' | b';' | b':' | b'[' | b']' | b'\'')
                    || c.is_ascii_whitespace()
                {
                    break;
                }
                self.pos += 1;
            }
            if self.pos == start {
                return Ok(None);
            }
            std::str::from_utf8(&self.src[start..self.pos])
                .map(|s| Some(s.to_string()))
                .map_err(|_| self.error("label is not UTF-8"))
        }

        fn number(&mut self) -> Result<f64, TreeError> {
            let start = self.pos;
            while let Some(c) = self.peek() {
                if c.is_ascii_digit() || matches!(c, b'.' | b'-' | b'+' | b'e' | b'E') {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
                _ => Err(TreeError::Newick {
                    position: start,
                    message: format!("invalid branch length `{text}`"),
                }),
            }
        }
    }
}
