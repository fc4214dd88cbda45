//! Test instances: vertex-cover reductions whose minimum outlier count equals
//! the minimum vertex cover, and random class members with planted outliers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{DistanceMatrix, MetricError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("nu = {nu} is outside ({lo}, {hi})")]
    NuOutOfRange { nu: f64, lo: f64, hi: f64 },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({0}, {1}) names a vertex outside 0..{2}")]
    VertexOutOfRange(usize, usize, usize),
    #[error("graph text, line {line}: {message}")]
    GraphSyntax { line: usize, message: String },
    #[error("planted instance: {0}")]
    Parameters(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Undirected graph without loops or parallel edges. Edges are stored as
/// `(small, large)`, sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimpleGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl SimpleGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, InstanceError> {
        let mut norm = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(InstanceError::VertexOutOfRange(a, b, n));
            }
            if a == b {
                return Err(InstanceError::SelfLoop(a));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        if let Some(w) = norm.windows(2).find(|w| w[0] == w[1]) {
            return Err(InstanceError::DuplicateEdge(w[0].0, w[0].1));
        }
        Ok(SimpleGraph { n, edges: norm })
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n)
            .flat_map(|j| (0..j).map(move |i| (i, j)))
            .collect::<Vec<_>>();
        SimpleGraph::new(n, &edges).expect("complete graph is simple")
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        SimpleGraph::new(n, &edges).expect("path is simple")
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    pub fn is_cover(&self, cover: &[usize]) -> bool {
        let mut inside = vec![false; self.n];
        for &v in cover {
            if v < self.n {
                inside[v] = true;
            }
        }
        self.edges.iter().all(|&(a, b)| inside[a] || inside[b])
    }

    /// Parses "vertex count" on the first line, then one `a b` edge per line.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self, InstanceError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let syntax = |line, message: &str| InstanceError::GraphSyntax {
            line,
            message: message.into(),
        };
        let (first, head) = lines
            .next()
            .ok_or_else(|| syntax(1, "missing vertex count"))?;
        let n: usize = head
            .parse()
            .map_err(|_| syntax(first, "vertex count is not a nonnegative integer"))?;
        let mut edges = Vec::new();
        for (line, l) in lines {
            let parts: Vec<&str> = l
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            if parts.len() != 2 {
                return Err(syntax(line, "expected two vertex indices"));
            }
            let a = parts[0]
                .parse()
                .map_err(|_| syntax(line, "bad vertex index"))?;
            let b = parts[1]
                .parse()
                .map_err(|_| syntax(line, "bad vertex index"))?;
            edges.push((a, b));
        }
        SimpleGraph::new(n, &edges)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for (a, b) in &self.edges {
            s.push_str(&format!("{a} {b}\n"));
        }
        s
    }
}

fn check_nu(nu: f64, hi: f64) -> Result<(), InstanceError> {
    if nu > 0.0 && nu < hi {
        Ok(())
    } else {
        Err(InstanceError::NuOutOfRange { nu, lo: 0.0, hi })
    }
}

/// Points `x0, y0, x1, y1, …, o`: a star with two-edge arms `o–yᵢ–xᵢ`,
/// except `ρ(xᵢ, xⱼ) = 4 − ν` on edges of `g`.
pub fn vc_tree_instance(g: &SimpleGraph, nu: f64) -> Result<DistanceMatrix, InstanceError> {
    check_nu(nu, 1.0)?;
    let n = g.vertex_count();
    let mut labels = Vec::with_capacity(2 * n + 1);
    for i in 0..n {
        labels.push(format!("x{i}"));
        labels.push(format!("y{i}"));
    }
    labels.push("o".into());
    let o = 2 * n;
    Ok(DistanceMatrix::from_fn(labels, |p, q| {
        // p > q, so only p can be o
        if p == o {
            return if q % 2 == 0 { 2.0 } else { 1.0 };
        }
        let (i, j) = (p / 2, q / 2);
        let (px, qx) = (p % 2 == 0, q % 2 == 0);
        if i == j {
            return 1.0;
        }
        match (px, qx) {
            (true, true) if g.has_edge(i, j) => 4.0 - nu,
            (true, true) => 4.0,
            (false, false) => 2.0,
            _ => 3.0,
        }
    })?)
}

/// Points `u0, w0, u1, w1, …` with `ρ(uᵢ, wᵢ) = 2ν`, cross distances 1, and
/// `ρ(uᵢ, uⱼ) = 1 − ν` on edges of `g`.
pub fn vc_ultrametric_instance(g: &SimpleGraph, nu: f64) -> Result<DistanceMatrix, InstanceError> {
    check_nu(nu, 0.5)?;
    let n = g.vertex_count();
    let mut labels = Vec::with_capacity(2 * n);
    for i in 0..n {
        labels.push(format!("u{i}"));
        labels.push(format!("w{i}"));
    }
    Ok(DistanceMatrix::from_fn(labels, |p, q| {
        let (i, j) = (p / 2, q / 2);
        if i == j {
            2.0 * nu
        } else if p % 2 == 0 && q % 2 == 0 && g.has_edge(i, j) {
            1.0 - nu
        } else {
            1.0
        }
    })?)
}

/// Offset of `x_i` and `y_i` from `z_i` in the Euclidean reduction.
const VC_EUCLIDEAN_OFFSET: f64 = 4.0;

/// Centres `z_i` on a quarter circle, with `x_i` and `y_i` at distance
/// [`VC_EUCLIDEAN_OFFSET`] inside and outside it along the radius. All
/// distances are Euclidean except `ρ(zᵢ, zⱼ) = |zᵢ − zⱼ| − ν` on edges of `g`.
///
/// Collinear centres would break the triangle inequality for any edge, so the
/// radius is chosen to leave every triangle with more than one unit of slack
/// per shortened side.
pub fn vc_euclidean_instance(g: &SimpleGraph, nu: f64) -> Result<DistanceMatrix, InstanceError> {
    check_nu(nu, 1.0)?;
    let n = g.vertex_count();
    let step = std::f64::consts::FRAC_PI_2 / n.saturating_sub(1).max(1) as f64;
    // slack of three consecutive centres is 4R·sin(step/2)·(1 − cos(step/2))
    let radius = (1.0 / ((step / 2.0).sin() * (1.0 - (step / 2.0).cos()))).max(32.0);
    let mut labels = Vec::with_capacity(3 * n);
    let mut pts = Vec::with_capacity(3 * n);
    for i in 0..n {
        let (s, c) = (i as f64 * step).sin_cos();
        for (name, r) in [
            ("x", radius - VC_EUCLIDEAN_OFFSET),
            ("y", radius + VC_EUCLIDEAN_OFFSET),
            ("z", radius),
        ] {
            labels.push(format!("{name}{i}"));
            pts.push([r * c, r * s]);
        }
    }
    Ok(DistanceMatrix::from_fn(labels, |p, q| {
        let (i, j) = (p / 3, q / 3);
        let base = crate::metric::euclidean(&pts[p], &pts[q]);
        if p % 3 == 2 && q % 3 == 2 && g.has_edge(i, j) {
            base - nu
        } else {
            base
        }
    })?)
}

/// Target class of a planted instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantedKind {
    Ultrametric,
    Tree,
    Euclidean { d: usize },
}

/// A noisy class member with `witness` rows corrupted.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedInstance {
    pub matrix: DistanceMatrix,
    /// Corrupted points, ascending.
    pub witness: Vec<usize>,
    pub epsilon_used: f64,
}

/// Samples a member of `kind` on `n` points, adds noise in `[0, ε·diam/2]` to
/// every pair, and corrupts `k` random rows by shifts in `(2ε·diam, diam/2]`.
/// Each perturbation is followed by a shortest-path closure, which restores
/// the triangle inequality without moving any entry below the clean value.
pub fn planted_instance(
    kind: PlantedKind,
    n: usize,
    k: usize,
    eps: f64,
    seed: u64,
) -> Result<PlantedInstance, InstanceError> {
    if n == 0 {
        return Err(InstanceError::Parameters("n must be positive".into()));
    }
    if k >= n && k > 0 {
        return Err(InstanceError::Parameters(format!(
            "k = {k} must be below n = {n}"
        )));
    }
    if !eps.is_finite() || eps < 0.0 {
        return Err(InstanceError::Parameters(format!(
            "epsilon {eps} must be nonnegative"
        )));
    }
    if k > 0 && 2.0 * eps >= 0.5 {
        return Err(InstanceError::Parameters(format!(
            "corruption range (2ε·diam, diam/2] is empty for ε = {eps}"
        )));
    }
    if let PlantedKind::Euclidean { d: 0 } = kind {
        return Err(InstanceError::Parameters(
            "dimension must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut full = match kind {
        PlantedKind::Ultrametric => random_ultrametric(n, &mut rng),
        PlantedKind::Tree => random_tree_metric(n, &mut rng),
        PlantedKind::Euclidean { d } => random_points(n, d, &mut rng),
    };
    let diam = full.iter().cloned().fold(0.0, f64::max);

    if eps > 0.0 {
        let hi = eps * diam / 2.0;
        for i in 0..n {
            for j in 0..i {
                let v = full[i * n + j] + rng.random_range(0.0..=hi);
                full[i * n + j] = v;
                full[j * n + i] = v;
            }
        }
        close(&mut full, n);
    }

    let mut witness = Vec::new();
    if k > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        witness = order[..k].to_vec();
        witness.sort_unstable();
        let (lo, hi) = (2.0 * eps * diam, diam / 2.0);
        let mut shifted = vec![false; n * n];
        for &c in &witness {
            for y in 0..n {
                if y == c || shifted[c * n + y] {
                    continue;
                }
                // uniform on (lo, hi]
                let s = hi - (hi - lo) * rng.random::<f64>();
                full[c * n + y] += s;
                full[y * n + c] += s;
                shifted[c * n + y] = true;
                shifted[y * n + c] = true;
            }
        }
        close(&mut full, n);
    }

    let labels = (0..n).map(|i| format!("p{i}")).collect();
    let matrix = DistanceMatrix::from_fn(labels, |i, j| full[i * n + j])?;
    Ok(PlantedInstance {
        matrix,
        witness,
        epsilon_used: eps,
    })
}

/// Floyd–Warshall on a dense symmetric matrix.
fn close(full: &mut [f64], n: usize) {
    for via in 0..n {
        for i in 0..n {
            let a = full[i * n + via];
            for j in 0..n {
                let cand = a + full[via * n + j];
                if cand < full[i * n + j] {
                    full[i * n + j] = cand;
                }
            }
        }
    }
}

/// Random agglomeration with increasing merge heights in `[1, 2]`.
fn random_ultrametric(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut full = vec![0.0; n * n];
    let mut heights: Vec<f64> = (1..n).map(|_| rng.random_range(1.0..2.0)).collect();
    heights.sort_by(f64::total_cmp);
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for h in heights {
        let a = rng.random_range(0..clusters.len());
        let ca = clusters.swap_remove(a);
        let b = rng.random_range(0..clusters.len());
        for &p in &ca {
            for &q in &clusters[b] {
                full[p * n + q] = h;
                full[q * n + p] = h;
            }
        }
        clusters[b].extend(ca);
    }
    full
}

/// Random recursive tree on `2n` vertices with weights in `[0.5, 1.5]`;
/// labels sit on `n` randomly chosen vertices.
fn random_tree_metric(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let size = 2 * n;
    let mut depth_to: Vec<Vec<f64>> = vec![vec![0.0; size]; size];
    for v in 1..size {
        let parent = rng.random_range(0..v);
        let w = rng.random_range(0.5..=1.5);
        for u in 0..v {
            let d = depth_to[parent][u] + w;
            depth_to[v][u] = d;
            depth_to[u][v] = d;
        }
    }
    let mut vertices: Vec<usize> = (0..size).collect();
    vertices.shuffle(rng);
    vertices.truncate(n);
    let mut full = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            full[i * n + j] = depth_to[vertices[i]][vertices[j]];
        }
    }
    full
}

/// Uniform points in the unit cube `[0, 1]^d`.
fn random_points(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut full = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            full[i * n + j] = crate::metric::euclidean(&pts[i], &pts[j]);
        }
    }
    full
}
