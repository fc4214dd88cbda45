//! Bi-criteria outlier embeddings: remove few points, then embed the rest
//! with small additive distortion.
//!
//! * Ultrametrics: drop triples that fail the three-point condition by more
//!   than `2ε·diam`, then take the subdominant (single-linkage) ultrametric.
//! * Trees: drop 4-tuples that fail the four-point condition by more than
//!   `slack_tree_factor·ε·diam`, then build a tree from Gromov products.
//! * Euclidean space: anchor on every `(d+1)`-subset, place points on a grid
//!   within a distance budget, and cover the pairs that disagree.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combin::Combinations;
use crate::metric::{linf_gap, restrict, DistanceMatrix, MetricError, ToleranceConfig};
use crate::outliers::{OutlierResult, Witness};
use crate::tree::{TreeError, WeightedTree};
use crate::tree_outliers::quad_filter;
use crate::ultrametric::triple_filter;
use crate::unionfind::UnionFind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BicriteriaError {
    #[error("epsilon must be a finite nonnegative number, got {0}")]
    BadEpsilon(f64),
    #[error("the Euclidean target needs a dimension")]
    MissingDimension,
    #[error("epsilon must be positive for the Euclidean grid search")]
    ZeroEpsilon,
    #[error("grid spacing {tau} gives {cells} cells per axis, more than the supported {limit}")]
    GridTooFine { tau: f64, cells: f64, limit: f64 },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Optional overrides for the Euclidean grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridOverride {
    pub tau: Option<f64>,
    pub half_width: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BicriteriaParams {
    pub epsilon: f64,
    pub d: Option<usize>,
    /// Constant in the Euclidean placement budget `C_d·√ε·diam + ε·diam`.
    pub c_d: f64,
    /// Tree filter slack, as a multiple of `ε·diam`.
    pub slack_tree_factor: f64,
    pub grid: Option<GridOverride>,
    /// Scan every grid point in lexicographic order instead of pruning.
    pub exhaustive: bool,
}

impl Default for BicriteriaParams {
    fn default() -> Self {
        BicriteriaParams {
            epsilon: 0.0,
            d: None,
            c_d: 8.0,
            slack_tree_factor: 4.0,
            grid: None,
            exhaustive: false,
        }
    }
}

impl BicriteriaParams {
    pub fn new(epsilon: f64) -> Self {
        BicriteriaParams {
            epsilon,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<(), BicriteriaError> {
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(BicriteriaError::BadEpsilon(self.epsilon));
        }
        Ok(())
    }
}

/// `⌈log₂ n⌉`, with 0 for `n ≤ 1`.
pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Minimum spanning tree of the complete graph (Prim, O(n²)). Ties go to the
/// lexicographically smaller edge. Edges are `(i, j, weight)` with `i < j`,
/// in the order they were added.
pub fn mst(m: &DistanceMatrix) -> Vec<(usize, usize, f64)> {
    let n = m.len();
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    if n <= 1 {
        return edges;
    }
    let mut in_tree = vec![false; n];
    // (weight, edge) per vertex outside the tree
    let mut best: Vec<(f64, (usize, usize))> = (0..n).map(|v| (m.get(0, v), (0, v))).collect();
    in_tree[0] = true;
    for _ in 1..n {
        let mut pick = usize::MAX;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            if pick == usize::MAX
                || best[v].0 < best[pick].0
                || (best[v].0 == best[pick].0 && best[v].1 < best[pick].1)
            {
                pick = v;
            }
        }
        in_tree[pick] = true;
        let (w, e) = best[pick];
        edges.push((e.0, e.1, w));
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let cand = (m.get(pick, v), (pick.min(v), pick.max(v)));
            if cand.0 < best[v].0 || (cand.0 == best[v].0 && cand.1 < best[v].1) {
                best[v] = cand;
            }
        }
    }
    edges
}

/// One agglomeration step. Clusters `0..n` are the leaves; the cluster
/// created by merge `k` has id `n + k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

/// Merge-height representation of an ultrametric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub labels: Vec<String>,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Raises every merge height by `alpha`.
    pub fn shifted(&self, alpha: f64) -> Dendrogram {
        let mut d = self.clone();
        for mg in &mut d.merges {
            mg.height += alpha;
        }
        d
    }

    /// Members of every cluster id, leaves first.
    fn members(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for mg in &self.merges {
            let mut both = members[mg.a].clone();
            both.extend_from_slice(&members[mg.b]);
            members.push(both);
        }
        members
    }

    /// Ultrametric: distance between two leaves is the height of their
    /// lowest common merge.
    pub fn cophenetic(&self) -> Result<DistanceMatrix, MetricError> {
        let n = self.len();
        let mut full = vec![0.0; n * n];
        let members = self.members();
        for mg in &self.merges {
            for &p in &members[mg.a] {
                for &q in &members[mg.b] {
                    full[p * n + q] = mg.height;
                    full[q * n + p] = mg.height;
                }
            }
        }
        DistanceMatrix::from_fn(self.labels.clone(), |i, j| full[i * n + j])
    }

    /// Newick text. Branch lengths are height differences, with leaves at
    /// height zero, so every leaf sits at depth equal to the root height.
    pub fn to_newick(&self) -> String {
        let n = self.len();
        if n == 0 {
            return ";".into();
        }
        if self.merges.is_empty() {
            return format!("{};", crate::tree::quote_newick_label(&self.labels[0]));
        }
        let root = n + self.merges.len() - 1;
        let mut out = String::new();
        self.write(root, None, &mut out);
        out.push(';');
        out
    }

    fn height(&self, id: usize) -> f64 {
        if id < self.len() {
            0.0
        } else {
            self.merges[id - self.len()].height
        }
    }

    fn write(&self, id: usize, parent_height: Option<f64>, out: &mut String) {
        let n = self.len();
        if id < n {
            out.push_str(&crate::tree::quote_newick_label(&self.labels[id]));
        } else {
            let mg = self.merges[id - n];
            out.push('(');
            self.write(mg.a, Some(mg.height), out);
            out.push(',');
            self.write(mg.b, Some(mg.height), out);
            out.push(')');
        }
        if let Some(h) = parent_height {
            out.push(':');
            out.push_str(&crate::tree::format_length((h - self.height(id)).max(0.0)));
        }
    }
}

/// Single-linkage dendrogram: MST edges merged by increasing weight (ties by
/// edge). Its ultrametric is the largest one below `m`.
pub fn subdominant_ultrametric(m: &DistanceMatrix) -> Dendrogram {
    let n = m.len();
    let mut edges = mst(m);
    edges.sort_by(|a, b| a.2.total_cmp(&b.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    let mut uf = UnionFind::new(n);
    let mut cluster: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for (i, j, w) in edges {
        let (ri, rj) = (uf.find(i), uf.find(j));
        let (ca, cb) = (cluster[ri], cluster[rj]);
        let s = size[ri] + size[rj];
        uf.union(ri, rj);
        let r = uf.find(ri);
        cluster[r] = n + merges.len();
        size[r] = s;
        merges.push(Merge {
            a: ca.min(cb),
            b: ca.max(cb),
            height: w,
            size: s,
        });
    }
    Dendrogram {
        labels: m.labels().to_vec(),
        merges,
    }
}

/// ℓ∞-optimal ultrametric: the subdominant ultrametric raised by half its gap
/// `β` to the input. Returns the shifted dendrogram and its error `β/2`.
pub fn fkw_optimal_ultrametric(m: &DistanceMatrix) -> Result<(Dendrogram, f64), MetricError> {
    let sub = subdominant_ultrametric(m);
    if m.len() < 2 {
        return Ok((sub, 0.0));
    }
    let beta = linf_gap(&sub.cophenetic()?, m)?;
    Ok((sub.shifted(beta / 2.0), beta / 2.0))
}

/// Result of a bi-criteria ultrametric or tree fit.
#[derive(Clone, Debug, PartialEq)]
pub struct BicriteriaFit<T> {
    pub result: OutlierResult,
    pub embedding: T,
    /// ℓ∞ gap between the embedding and the kept points.
    pub distortion: f64,
    /// Guaranteed bound on `distortion` (ultrametric) or the reference bound
    /// it is compared against (tree).
    pub bound: f64,
}

/// Triple filter at slack `2ε·diam`, then the subdominant ultrametric of the
/// kept points. Distortion is at most `2ε·diam·⌈log₂ n⌉` up to tolerance.
pub fn bicriteria_ultrametric(
    m: &DistanceMatrix,
    params: &BicriteriaParams,
    tol: &ToleranceConfig,
) -> Result<BicriteriaFit<Dendrogram>, BicriteriaError> {
    params.check()?;
    let diam = m.diameter();
    let result = triple_filter(m, 2.0 * params.epsilon * diam, m.eta(tol));
    let bound = 2.0 * params.epsilon * diam * ceil_log2(m.len()) as f64;
    if result.kept.is_empty() {
        return Ok(BicriteriaFit {
            result,
            embedding: Dendrogram {
                labels: Vec::new(),
                merges: Vec::new(),
            },
            distortion: 0.0,
            bound,
        });
    }
    let sub = restrict(m, &result.kept)?;
    let dendrogram = subdominant_ultrametric(&sub);
    let distortion = linf_gap(&dendrogram.cophenetic()?, &sub)?;
    Ok(BicriteriaFit {
        result,
        embedding: dendrogram,
        distortion,
        bound,
    })
}

/// Tree realizing the max-min closure of the Gromov products at `base`.
/// Exact on tree metrics.
pub fn gromov_tree(
    m: &DistanceMatrix,
    base: usize,
    tol: &ToleranceConfig,
) -> Result<WeightedTree, BicriteriaError> {
    let n = m.len();
    if base >= n {
        return Err(MetricError::IndexOutOfRange(base).into());
    }
    let names: Vec<String> = m.labels().to_vec();
    if n == 1 {
        return Ok(WeightedTree::singleton(names, 0)?);
    }
    let prod = |x: usize, y: usize| (m.get(x, base) + m.get(y, base) - m.get(x, y)) / 2.0;

    // maximum spanning tree over the products (Prim), ties by edge
    let mut in_tree = vec![false; n];
    in_tree[0] = true;
    let mut best: Vec<(f64, (usize, usize))> = (0..n).map(|v| (prod(0, v), (0, v))).collect();
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut pick = usize::MAX;
        for v in 0..n {
            if !in_tree[v]
                && (pick == usize::MAX
                    || best[v].0 > best[pick].0
                    || (best[v].0 == best[pick].0 && best[v].1 < best[pick].1))
            {
                pick = v;
            }
        }
        in_tree[pick] = true;
        edges.push((best[pick].0, best[pick].1 .0, best[pick].1 .1));
        for v in 0..n {
            if !in_tree[v] {
                let cand = (prod(pick, v), (pick.min(v), pick.max(v)));
                if cand.0 > best[v].0 || (cand.0 == best[v].0 && cand.1 < best[v].1) {
                    best[v] = cand;
                }
            }
        }
    }
    edges.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));

    // vertices 0..n are the points at depth ρ(x, base); merges add internal
    // vertices at depth equal to the closed product
    let mut labels: Vec<Option<usize>> = (0..n).map(Some).collect();
    let mut depth: Vec<f64> = (0..n).map(|x| m.get(x, base)).collect();
    let mut tree_edges = Vec::with_capacity(2 * n);
    let mut uf = UnionFind::new(n);
    let mut top: Vec<usize> = (0..n).collect();
    for (g, x, y) in edges {
        let (rx, ry) = (uf.find(x), uf.find(y));
        let v = labels.len();
        labels.push(None);
        let h = g.max(0.0);
        depth.push(h);
        for t in [top[rx], top[ry]] {
            tree_edges.push((t, v, (depth[t] - h).max(0.0)));
        }
        uf.union(rx, ry);
        let r = uf.find(rx);
        top[r] = v;
    }
    let eta = m.eta(tol);
    match WeightedTree::from_edges(names.clone(), &labels, &tree_edges, eta) {
        Err(TreeError::CoincidentLabels(..)) => {
            Ok(WeightedTree::from_edges(names, &labels, &tree_edges, -1.0)?)
        }
        other => Ok(other?),
    }
}

/// Index of the point with the smallest eccentricity, lowest index on ties.
pub fn min_eccentricity_point(m: &DistanceMatrix) -> usize {
    let n = m.len();
    let mut best = (f64::INFINITY, 0);
    for x in 0..n {
        let ecc = (0..n).map(|y| m.get(x, y)).fold(0.0, f64::max);
        if ecc < best.0 {
            best = (ecc, x);
        }
    }
    best.1
}

/// Four-point filter at slack `slack_tree_factor·ε·diam`, then the Gromov
/// tree of the kept points rooted at their minimum-eccentricity point.
/// `bound` is `2·slack_tree_factor·ε·diam·⌈log₂ n⌉`.
pub fn bicriteria_tree(
    m: &DistanceMatrix,
    params: &BicriteriaParams,
    tol: &ToleranceConfig,
) -> Result<BicriteriaFit<WeightedTree>, BicriteriaError> {
    params.check()?;
    let diam = m.diameter();
    let slack = params.slack_tree_factor * params.epsilon * diam;
    let result = quad_filter(m, slack, m.eta(tol));
    let bound = 2.0 * slack * ceil_log2(m.len()) as f64;
    if result.kept.is_empty() {
        return Ok(BicriteriaFit {
            result,
            embedding: WeightedTree::new(Vec::<String>::new()),
            distortion: 0.0,
            bound,
        });
    }
    let sub = restrict(m, &result.kept)?;
    let base = min_eccentricity_point(&sub);
    let tree = gromov_tree(&sub, base, tol)?;
    let distortion = linf_gap(&tree.induced_metric()?, &sub)?;
    Ok(BicriteriaFit {
        result,
        embedding: tree,
        distortion,
        bound,
    })
}

/// Square grid of spacing `tau` covering `[-half_width, half_width]^d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub tau: f64,
    pub half_width: f64,
}

/// Largest supported number of grid steps per half axis.
const MAX_GRID_STEPS: f64 = 1e9;

impl GridSpec {
    /// `τ = ε·diam / (2d²)` over the cube of half-width `3·diam`.
    pub fn for_metric(epsilon: f64, d: usize, diameter: f64) -> Self {
        let d = d.max(1) as f64;
        GridSpec {
            tau: epsilon * diameter / (2.0 * d * d),
            half_width: 3.0 * diameter,
        }
    }

    /// Grid indices run over `-steps..=steps` on each axis.
    pub fn steps(&self) -> i64 {
        (self.half_width / self.tau + 1e-9).floor() as i64
    }

    fn validate(&self) -> Result<(), BicriteriaError> {
        let cells = self.half_width / self.tau;
        if self.tau.is_nan() || self.tau <= 0.0 || !cells.is_finite() || cells > MAX_GRID_STEPS {
            return Err(BicriteriaError::GridTooFine {
                tau: self.tau,
                cells,
                limit: MAX_GRID_STEPS,
            });
        }
        Ok(())
    }

    pub fn coordinate(&self, index: i64) -> f64 {
        index as f64 * self.tau
    }
}

/// Range of distances between points of an index box and a fixed point.
fn box_point_range(lo: &[i64], hi: &[i64], p: &[f64], tau: f64) -> (f64, f64) {
    let (mut near, mut far) = (0.0, 0.0);
    for k in 0..lo.len() {
        let (a, b) = (lo[k] as f64 * tau, hi[k] as f64 * tau);
        let gap = (a - p[k]).max(p[k] - b).max(0.0);
        let span = (p[k] - a).abs().max((b - p[k]).abs());
        near += gap * gap;
        far += span * span;
    }
    (near.sqrt(), far.sqrt())
}

/// Range of distances between points of two index boxes.
fn box_box_range(alo: &[i64], ahi: &[i64], blo: &[i64], bhi: &[i64], tau: f64) -> (f64, f64) {
    let (mut near, mut far) = (0.0, 0.0);
    for k in 0..alo.len() {
        let gap = (alo[k] - bhi[k]).max(blo[k] - ahi[k]).max(0) as f64 * tau;
        let span = (ahi[k] - blo[k]).abs().max((bhi[k] - alo[k]).abs()) as f64 * tau;
        near += gap * gap;
        far += span * span;
    }
    (near.sqrt(), far.sqrt())
}

#[inline]
fn compatible(range: (f64, f64), target: f64, budget: f64) -> bool {
    range.0 <= target + budget && range.1 >= target - budget
}

/// A grid point whose distance to every anchor is within `budget` of the
/// target, or `None`. The search splits index boxes along their longest axis,
/// visiting the lower half first, and discards boxes that cannot meet some
/// anchor constraint.
pub fn grid_near_embed(
    dists_to_anchors: &[f64],
    anchors: &[Vec<f64>],
    budget: f64,
    grid: &GridSpec,
) -> Option<Vec<f64>> {
    grid_search(dists_to_anchors, anchors, budget, grid, false)
}

/// [`grid_near_embed`] scanning every grid point in lexicographic order.
pub fn grid_near_embed_exhaustive(
    dists_to_anchors: &[f64],
    anchors: &[Vec<f64>],
    budget: f64,
    grid: &GridSpec,
) -> Option<Vec<f64>> {
    grid_search(dists_to_anchors, anchors, budget, grid, true)
}

fn grid_search(
    targets: &[f64],
    anchors: &[Vec<f64>],
    budget: f64,
    grid: &GridSpec,
    exhaustive: bool,
) -> Option<Vec<f64>> {
    let dim = anchors.first().map_or(0, Vec::len);
    let k = grid.steps();
    let tau = grid.tau;
    let fits = |idx: &[i64]| {
        let p: Vec<f64> = idx.iter().map(|&i| grid.coordinate(i)).collect();
        anchors
            .iter()
            .zip(targets)
            .all(|(a, &t)| (crate::metric::euclidean(&p, a) - t).abs() <= budget)
            .then_some(p)
    };
    if exhaustive {
        let mut idx = vec![-k; dim];
        loop {
            if let Some(p) = fits(&idx) {
                return Some(p);
            }
            let mut c = dim;
            loop {
                if c == 0 {
                    return None;
                }
                c -= 1;
                if idx[c] < k {
                    idx[c] += 1;
                    for slot in idx.iter_mut().skip(c + 1) {
                        *slot = -k;
                    }
                    break;
                }
            }
        }
    }
    let mut stack = vec![(vec![-k; dim], vec![k; dim])];
    while let Some((lo, hi)) = stack.pop() {
        let ok = anchors
            .iter()
            .zip(targets)
            .all(|(a, &t)| compatible(box_point_range(&lo, &hi, a, tau), t, budget));
        if !ok {
            continue;
        }
        let Some(axis) = (0..dim)
            .filter(|&c| hi[c] > lo[c])
            .max_by_key(|&c| (hi[c] - lo[c], std::cmp::Reverse(c)))
        else {
            if let Some(p) = fits(&lo) {
                return Some(p);
            }
            continue;
        };
        let mid = (lo[axis] + hi[axis]).div_euclid(2);
        let (mut lo2, mut hi1) = (lo.clone(), hi.clone());
        hi1[axis] = mid;
        lo2[axis] = mid + 1;
        stack.push((lo2, hi));
        stack.push((lo, hi1));
    }
    None
}

/// Normalized sequence near the anchors `y` in `R^dim`: `p₀` at the origin,
/// `pᵢ` (for `i ≤ dim`) supported on the first `i` axes with a nonnegative
/// `i`-th coordinate. Every pair error is at most `budget`.
fn normalized_sequence(
    m: &DistanceMatrix,
    y: &[usize],
    dim: usize,
    budget: f64,
    grid: &GridSpec,
) -> Option<Vec<Vec<f64>>> {
    let k = y.len();
    let steps = grid.steps();
    let tau = grid.tau;
    if dim == 0 {
        let ok = (0..k).all(|i| (0..i).all(|j| m.get(y[i], y[j]) <= budget));
        return ok.then(|| vec![Vec::new(); k]);
    }
    // boxes for points 1..k, flattened as k-1 blocks of `dim` coordinates
    let mut lo = vec![0i64; (k - 1) * dim];
    let mut hi = vec![0i64; (k - 1) * dim];
    for i in 1..k {
        let reach = ((m.get(y[0], y[i]) + budget) / tau).floor() as i64;
        let r = reach.min(steps);
        for c in 0..dim {
            let s = (i - 1) * dim + c;
            if i <= dim && c > i - 1 {
                continue;
            }
            hi[s] = r;
            lo[s] = if i <= dim && c == i - 1 { 0 } else { -r };
        }
    }
    let origin = vec![0.0; dim];
    let feasible = |lo: &[i64], hi: &[i64]| {
        for i in 1..k {
            let (al, ah) = (&lo[(i - 1) * dim..i * dim], &hi[(i - 1) * dim..i * dim]);
            if !compatible(
                box_point_range(al, ah, &origin, tau),
                m.get(y[0], y[i]),
                budget,
            ) {
                return false;
            }
            for j in 1..i {
                let (bl, bh) = (&lo[(j - 1) * dim..j * dim], &hi[(j - 1) * dim..j * dim]);
                if !compatible(
                    box_box_range(al, ah, bl, bh, tau),
                    m.get(y[i], y[j]),
                    budget,
                ) {
                    return false;
                }
            }
        }
        true
    };
    let mut stack = vec![(lo, hi)];
    while let Some((lo, hi)) = stack.pop() {
        if !feasible(&lo, &hi) {
            continue;
        }
        let Some(axis) = (0..lo.len())
            .filter(|&c| hi[c] > lo[c])
            .max_by_key(|&c| (hi[c] - lo[c], std::cmp::Reverse(c)))
        else {
            let mut pts = vec![origin.clone()];
            for i in 1..k {
                pts.push(
                    lo[(i - 1) * dim..i * dim]
                        .iter()
                        .map(|&v| grid.coordinate(v))
                        .collect(),
                );
            }
            return Some(pts);
        };
        let mid = (lo[axis] + hi[axis]).div_euclid(2);
        let (mut lo2, mut hi1) = (lo.clone(), hi.clone());
        hi1[axis] = mid;
        lo2[axis] = mid + 1;
        stack.push((lo2, hi));
        stack.push((lo, hi1));
    }
    None
}

/// Outcome of the Euclidean bi-criteria search.
#[derive(Clone, Debug, PartialEq)]
pub struct EuclideanBicriteriaFit {
    pub result: OutlierResult,
    /// Positions in `R^d`, one per kept point in `result.kept` order.
    pub coordinates: Vec<Vec<f64>>,
    pub anchors: Vec<usize>,
    pub anchor_dim: usize,
    pub grid: GridSpec,
    /// Placement budget `C_d·√ε·diam + ε·diam`.
    pub budget: f64,
    /// Largest `|ρ − d_E|` over kept pairs.
    pub distortion: f64,
}

struct GridCandidate {
    sorted: Vec<usize>,
    certificate: Vec<Witness>,
    positions: Vec<Option<Vec<f64>>>,
}

/// Candidate, anchors, anchor dimension and anchor positions.
type Best = (GridCandidate, Vec<usize>, usize, Vec<Vec<f64>>);

/// Grid-based bi-criteria embedding into `R^d` (requires `params.d`).
pub fn bicriteria_euclidean(
    m: &DistanceMatrix,
    params: &BicriteriaParams,
) -> Result<EuclideanBicriteriaFit, BicriteriaError> {
    params.check()?;
    let d = params.d.ok_or(BicriteriaError::MissingDimension)?;
    let eps = params.epsilon;
    let n = m.len();
    let diam = m.diameter();
    let mut grid = GridSpec::for_metric(eps, d, diam);
    if let Some(o) = params.grid {
        grid.tau = o.tau.unwrap_or(grid.tau);
        grid.half_width = o.half_width.unwrap_or(grid.half_width);
    }
    let budget = params.c_d * eps.sqrt() * diam + eps * diam;
    if n == 1 {
        return Ok(EuclideanBicriteriaFit {
            result: OutlierResult::from_certificate(1, Vec::new()),
            coordinates: vec![vec![0.0; d]],
            anchors: vec![0],
            anchor_dim: 0,
            grid,
            budget,
            distortion: 0.0,
        });
    }
    if eps == 0.0 && params.grid.and_then(|g| g.tau).is_none() {
        return Err(BicriteriaError::ZeroEpsilon);
    }
    grid.validate()?;
    let step1_budget = eps * diam + grid.tau * (d as f64).sqrt();

    let mut best: Option<Best> = None;
    for y in Combinations::new(n, (d + 1).min(n)) {
        let Some((dim, p)) = (0..=d)
            .find_map(|dim| normalized_sequence(m, &y, dim, step1_budget, &grid).map(|p| (dim, p)))
        else {
            continue;
        };
        let limit = best.as_ref().map_or(usize::MAX, |b| b.0.sorted.len());
        let Some(c) = grid_candidate(m, &y, &p, budget, &grid, params.exhaustive, limit) else {
            continue;
        };
        let wins = match &best {
            None => true,
            Some(b) => (c.sorted.len(), &c.sorted) < (b.0.sorted.len(), &b.0.sorted),
        };
        if wins {
            best = Some((c, y, dim, p));
        }
    }

    let Some((cand, anchors, anchor_dim, _)) = best else {
        let mut result = OutlierResult::from_certificate(
            n,
            vec![Witness::Fallback {
                points: (1..n).collect(),
                dim: d,
            }],
        );
        result
            .warnings
            .push("no anchor subset admits a near-isometric grid placement".into());
        return Ok(EuclideanBicriteriaFit {
            result,
            coordinates: vec![vec![0.0; d]],
            anchors: Vec::new(),
            anchor_dim: 0,
            grid,
            budget,
            distortion: 0.0,
        });
    };
    let result = OutlierResult::from_certificate(n, cand.certificate);
    let coordinates: Vec<Vec<f64>> = result
        .kept
        .iter()
        .map(|&i| {
            let mut p = cand.positions[i].clone().expect("kept points are placed");
            p.resize(d, 0.0);
            p
        })
        .collect();
    let mut distortion = 0.0f64;
    for a in 0..coordinates.len() {
        for b in 0..a {
            let e = crate::metric::euclidean(&coordinates[a], &coordinates[b]);
            distortion = distortion.max((e - m.get(result.kept[a], result.kept[b])).abs());
        }
    }
    Ok(EuclideanBicriteriaFit {
        result,
        coordinates,
        anchors,
        anchor_dim,
        grid,
        budget,
        distortion,
    })
}

/// Steps 2 and 3 for the anchors `y` placed at `p`. Gives up once more than
/// `limit` points are removed.
fn grid_candidate(
    m: &DistanceMatrix,
    y: &[usize],
    p: &[Vec<f64>],
    budget: f64,
    grid: &GridSpec,
    exhaustive: bool,
    limit: usize,
) -> Option<GridCandidate> {
    let n = m.len();
    let mut positions: Vec<Option<Vec<f64>>> = vec![None; n];
    for (&a, pa) in y.iter().zip(p) {
        positions[a] = Some(pa.clone());
    }
    let mut out = vec![false; n];
    let mut count = 0;
    let mut certificate = Vec::new();
    let mut placed = Vec::new();
    for x in (0..n).filter(|x| !y.contains(x)) {
        let targets: Vec<f64> = y.iter().map(|&a| m.get(x, a)).collect();
        match grid_search(&targets, p, budget, grid, exhaustive) {
            Some(px) => {
                positions[x] = Some(px);
                placed.push(x);
            }
            None => {
                out[x] = true;
                count += 1;
                certificate.push(Witness::Unplaceable {
                    anchors: y.to_vec(),
                    anchor_positions: p.to_vec(),
                    point: x,
                    budget,
                    grid: *grid,
                });
                if count > limit {
                    return None;
                }
            }
        }
    }
    for (i, &z) in placed.iter().enumerate() {
        for &z2 in &placed[i + 1..] {
            if out[z] {
                break;
            }
            if out[z2] {
                continue;
            }
            let (pz, pz2) = (
                positions[z].as_ref().unwrap(),
                positions[z2].as_ref().unwrap(),
            );
            if (crate::metric::euclidean(pz, pz2) - m.get(z, z2)).abs() > budget {
                out[z] = true;
                out[z2] = true;
                count += 2;
                certificate.push(Witness::PlacedPair {
                    anchors: y.to_vec(),
                    anchor_positions: p.to_vec(),
                    points: [z, z2],
                    positions: [pz.clone(), pz2.clone()],
                    budget,
                    grid: *grid,
                });
                if count > limit {
                    return None;
                }
            }
        }
    }
    Some(GridCandidate {
        sorted: (0..n).filter(|&i| out[i]).collect(),
        certificate,
        positions,
    })
}
