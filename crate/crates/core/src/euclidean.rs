//! Exact isometric embedding into `R^d` with outliers.
//!
//! Embeddability is decided from the Gram matrix
//! `G(i, j) = (ρ(x₀, xᵢ)² + ρ(x₀, xⱼ)² − ρ(xᵢ, xⱼ)²) / 2`: a point set embeds
//! in `R^d` iff `G` is positive semidefinite with rank at most `d`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::combin::Combinations;
use crate::metric::DistanceMatrix;
use crate::outliers::{OutlierResult, Witness};

/// Eigenvalue thresholds, as fractions of the squared diameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedTolerance {
    /// Eigenvalues at or above `-tol_psd · diam²` count as nonnegative.
    pub tol_psd: f64,
    /// Eigenvalues above `tol_rank · diam²` count toward the rank.
    pub tol_rank: f64,
}

impl Default for EmbedTolerance {
    fn default() -> Self {
        EmbedTolerance {
            tol_psd: 1e-8,
            tol_rank: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddabilityReport {
    pub embeddable: bool,
    /// Embedding dimension when the Gram matrix is PSD.
    pub dimension: Option<usize>,
    /// One point per input point, in `R^dimension`, when embeddable.
    pub coordinates: Option<Vec<Vec<f64>>>,
    /// Largest pairwise distance error of `coordinates`.
    pub max_error: Option<f64>,
    /// Some eigenvalue sits within two orders of magnitude of a threshold.
    pub near_threshold: bool,
}

/// Spectrum of the Gram matrix of a point subset, eigenpairs sorted by
/// decreasing eigenvalue.
struct GramSpectrum {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

fn gram_spectrum(m: &DistanceMatrix, idx: &[usize]) -> GramSpectrum {
    let k = idx.len().saturating_sub(1);
    if k == 0 {
        return GramSpectrum {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        };
    }
    let base = idx[0];
    let g = DMatrix::from_fn(k, k, |a, b| {
        let (p, q) = (idx[a + 1], idx[b + 1]);
        let (dp, dq) = (m.get(base, p), m.get(base, q));
        let pq = m.get(p, q);
        (dp * dp + dq * dq - pq * pq) / 2.0
    });
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(k, k, |r, c| eig.eigenvectors[(r, order[c])]);
    GramSpectrum { values, vectors }
}

/// PSD flag and rank of the Gram matrix of `idx` under thresholds scaled by
/// `scale²`.
fn psd_rank(values: &[f64], scale2: f64, tol: &EmbedTolerance) -> (bool, usize) {
    let psd = values.iter().all(|&l| l >= -tol.tol_psd * scale2);
    let rank = values
        .iter()
        .filter(|&&l| l > tol.tol_rank * scale2)
        .count();
    (psd, rank)
}

/// Whether the points `idx` embed isometrically in `R^dim`, with thresholds
/// relative to `scale`.
pub(crate) fn subset_embeds(
    m: &DistanceMatrix,
    idx: &[usize],
    dim: usize,
    scale: f64,
    tol: &EmbedTolerance,
) -> bool {
    subset_dimension(m, idx, scale, tol).is_some_and(|d| d <= dim)
}

/// Embedding dimension of `idx`, or `None` when the Gram matrix is not PSD.
pub(crate) fn subset_dimension(
    m: &DistanceMatrix,
    idx: &[usize],
    scale: f64,
    tol: &EmbedTolerance,
) -> Option<usize> {
    let spectrum = gram_spectrum(m, idx);
    let (psd, rank) = psd_rank(&spectrum.values, scale * scale, tol);
    psd.then_some(rank)
}

fn near_threshold(values: &[f64], scale2: f64, tol: &EmbedTolerance) -> bool {
    values.iter().any(|&l| {
        let a = l.abs();
        let t = tol.tol_rank.max(tol.tol_psd) * scale2;
        a > t / 100.0 && a < t * 100.0
    })
}

/// Full embeddability report for `idx`, thresholds relative to `scale`.
pub(crate) fn subset_report(
    m: &DistanceMatrix,
    idx: &[usize],
    max_dim: usize,
    scale: f64,
    tol: &EmbedTolerance,
) -> EmbeddabilityReport {
    let scale2 = scale * scale;
    let spectrum = gram_spectrum(m, idx);
    let (psd, rank) = psd_rank(&spectrum.values, scale2, tol);
    let near = near_threshold(&spectrum.values, scale2, tol);
    if !psd {
        return EmbeddabilityReport {
            embeddable: false,
            dimension: None,
            coordinates: None,
            max_error: None,
            near_threshold: near,
        };
    }
    let embeddable = rank <= max_dim;
    let mut coordinates = None;
    let mut max_error = None;
    if embeddable {
        let mut pts = vec![vec![0.0; rank]; idx.len()];
        for (p, row) in pts.iter_mut().enumerate().skip(1) {
            for (c, slot) in row.iter_mut().enumerate() {
                *slot = spectrum.vectors[(p - 1, c)] * spectrum.values[c].sqrt();
            }
        }
        let mut err = 0.0f64;
        for a in 0..idx.len() {
            for b in 0..a {
                let e = crate::metric::euclidean(&pts[a], &pts[b]);
                err = err.max((e - m.get(idx[a], idx[b])).abs());
            }
        }
        coordinates = Some(pts);
        max_error = Some(err);
    }
    EmbeddabilityReport {
        embeddable,
        dimension: Some(rank),
        coordinates,
        max_error,
        near_threshold: near,
    }
}

/// Decides whether `m` embeds isometrically in `R^max_dim` and realizes it.
/// The base point is the first label.
pub fn embedding_report(
    m: &DistanceMatrix,
    max_dim: usize,
    tol: &EmbedTolerance,
) -> EmbeddabilityReport {
    let idx: Vec<usize> = (0..m.len()).collect();
    subset_report(m, &idx, max_dim, m.diameter(), tol)
}

/// Simple graph over point indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictGraph {
    pub nodes: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

/// Both endpoints of a greedy maximal matching, scanning edges in
/// lexicographic order.
pub fn vertex_cover_2approx(g: &ConflictGraph) -> Vec<usize> {
    let mut edges: Vec<(usize, usize)> =
        g.edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    edges.sort_unstable();
    let mut matched = std::collections::BTreeSet::new();
    let mut cover = Vec::new();
    for (a, b) in edges {
        if a != b && !matched.contains(&a) && !matched.contains(&b) {
            matched.insert(a);
            matched.insert(b);
            cover.push(a);
            cover.push(b);
        }
    }
    cover
}

/// Points rejected against the base `y` and the conflict graph on the rest.
pub fn conflict_graph(
    m: &DistanceMatrix,
    y: &[usize],
    d_prime: usize,
    tol: &EmbedTolerance,
) -> (Vec<usize>, ConflictGraph) {
    let scale = m.diameter();
    let mut in_y = vec![false; m.len()];
    for &p in y {
        in_y[p] = true;
    }
    let mut rejected = Vec::new();
    let mut nodes = Vec::new();
    let mut buf = y.to_vec();
    for x in (0..m.len()).filter(|&x| !in_y[x]) {
        buf.push(x);
        if subset_embeds(m, &buf, d_prime, scale, tol) {
            nodes.push(x);
        } else {
            rejected.push(x);
        }
        buf.pop();
    }
    let mut edges = Vec::new();
    for (a, &z) in nodes.iter().enumerate() {
        for &z2 in &nodes[a + 1..] {
            buf.push(z);
            buf.push(z2);
            if !subset_embeds(m, &buf, d_prime, scale, tol) {
                edges.push((z, z2));
            }
            buf.truncate(y.len());
        }
    }
    (rejected, ConflictGraph { nodes, edges })
}

/// Outliers plus coordinates of the kept points.
#[derive(Clone, Debug, PartialEq)]
pub struct EuclideanFit {
    pub result: OutlierResult,
    /// Coordinates in `R^d`, one row per kept point in `result.kept` order.
    pub coordinates: Vec<Vec<f64>>,
    /// Anchor subset behind the chosen candidate, if any.
    pub anchors: Vec<usize>,
    /// Embedding dimension of the anchors.
    pub anchor_dim: usize,
}

/// Candidate outlier set for one anchor subset.
struct Candidate {
    sorted: Vec<usize>,
    certificate: Vec<Witness>,
}

fn better(a: &Candidate, b: &Option<Candidate>) -> bool {
    match b {
        None => true,
        Some(b) => (a.sorted.len(), &a.sorted) < (b.sorted.len(), &b.sorted),
    }
}

/// 2-approximation for minimum-outlier isometric embedding into `R^d`,
/// enumerating every `(d+1)`-subset as an anchor.
pub fn outliers_euclidean(m: &DistanceMatrix, d: usize, tol: &EmbedTolerance) -> EuclideanFit {
    let n = m.len();
    let scale = m.diameter();
    let k = (d + 1).min(n);
    let mut best: Option<Candidate> = None;
    let mut best_anchor: (Vec<usize>, usize) = (Vec::new(), 0);
    let mut warnings = Vec::new();

    for y in Combinations::new(n, k) {
        let spectrum = gram_spectrum(m, &y);
        let (psd, d_prime) = psd_rank(&spectrum.values, scale * scale, tol);
        if !psd || d_prime > d {
            continue;
        }
        let budget = best.as_ref().map_or(usize::MAX, |b| b.sorted.len());
        let Some(c) = anchor_candidate(m, &y, d_prime, scale, tol, budget) else {
            continue;
        };
        if better(&c, &best) {
            if near_threshold(&spectrum.values, scale * scale, tol) {
                warnings.push(format!(
                    "embedding dimension of anchors {:?} is sensitive to the rank tolerance",
                    y.iter().map(|&i| m.label(i)).collect::<Vec<_>>()
                ));
            }
            best = Some(c);
            best_anchor = (y, d_prime);
        }
    }

    let (certificate, anchors, anchor_dim) = match best {
        Some(c) => (c.certificate, best_anchor.0, best_anchor.1),
        None => {
            let (removed, kept_dim) = fallback(m, d, scale, tol);
            warnings
                .push("no anchor subset embeds; kept the first largest embeddable subset".into());
            let cert = if removed.is_empty() {
                Vec::new()
            } else {
                vec![Witness::Fallback {
                    points: removed,
                    dim: d,
                }]
            };
            (cert, Vec::new(), kept_dim)
        }
    };
    let mut result = OutlierResult::from_certificate(n, certificate);
    let report = subset_report(m, &result.kept, d, scale, tol);
    let coordinates = match report.coordinates {
        Some(pts) => pts.into_iter().map(|p| pad(p, d)).collect(),
        None => {
            warnings.push("kept points failed the final embedding check".into());
            vec![vec![0.0; d]; result.kept.len()]
        }
    };
    result.warnings = warnings;
    EuclideanFit {
        result,
        coordinates,
        anchors,
        anchor_dim,
    }
}

fn pad(mut p: Vec<f64>, d: usize) -> Vec<f64> {
    p.resize(d.max(p.len()), 0.0);
    p
}

/// Steps 2 and 3 for one anchor set. Gives up once the candidate exceeds
/// `budget` points, since it could not win.
fn anchor_candidate(
    m: &DistanceMatrix,
    y: &[usize],
    d_prime: usize,
    scale: f64,
    tol: &EmbedTolerance,
    budget: usize,
) -> Option<Candidate> {
    let n = m.len();
    let mut in_y = vec![false; n];
    for &p in y {
        in_y[p] = true;
    }
    let mut certificate = Vec::new();
    let mut out = vec![false; n];
    let mut count = 0;
    let mut buf = y.to_vec();
    let mut survivors = Vec::new();
    for x in (0..n).filter(|&x| !in_y[x]) {
        buf.push(x);
        if subset_embeds(m, &buf, d_prime, scale, tol) {
            survivors.push(x);
        } else {
            out[x] = true;
            count += 1;
            certificate.push(Witness::NotEmbeddable {
                base: y.to_vec(),
                points: vec![x],
                dim: d_prime,
            });
            if count > budget {
                return None;
            }
        }
        buf.pop();
    }
    // greedy matching in lexicographic edge order; an edge with a matched
    // endpoint never changes the matching, so it is not tested
    for (a, &z) in survivors.iter().enumerate() {
        for &z2 in &survivors[a + 1..] {
            if out[z] {
                break;
            }
            if out[z2] {
                continue;
            }
            buf.push(z);
            buf.push(z2);
            let ok = subset_embeds(m, &buf, d_prime, scale, tol);
            buf.truncate(y.len());
            if !ok {
                out[z] = true;
                out[z2] = true;
                count += 2;
                certificate.push(Witness::NotEmbeddable {
                    base: y.to_vec(),
                    points: vec![z, z2],
                    dim: d_prime,
                });
                if count > budget {
                    return None;
                }
            }
        }
    }
    let sorted = (0..n).filter(|&i| out[i]).collect();
    Some(Candidate {
        sorted,
        certificate,
    })
}

/// Complement of the first embeddable subset, trying sizes from `d` down.
fn fallback(m: &DistanceMatrix, d: usize, scale: f64, tol: &EmbedTolerance) -> (Vec<usize>, usize) {
    let n = m.len();
    for size in (1..=d.min(n)).rev() {
        for s in Combinations::new(n, size) {
            if let Some(dim) = subset_dimension(m, &s, scale, tol).filter(|&k| k <= d) {
                let removed = (0..n).filter(|i| !s.contains(i)).collect();
                return (removed, dim);
            }
        }
    }
    ((1..n).collect(), 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n)
            .map(|i| ((b'a' + i as u8) as char).to_string())
            .collect()
    }

    fn pts(points: &[&[f64]]) -> DistanceMatrix {
        let p: Vec<Vec<f64>> = points.iter().map(|x| x.to_vec()).collect();
        DistanceMatrix::from_points(names(p.len()), &p).unwrap()
    }

    #[test]
    fn right_triangle_is_planar() {
        let m = pts(&[&[0.0, 0.0], &[3.0, 0.0], &[0.0, 4.0]]);
        let r = embedding_report(&m, 2, &EmbedTolerance::default());
        assert!(r.embeddable);
        assert_eq!(r.dimension, Some(2));
        assert!(r.max_error.unwrap() < 1e-12);
    }

    #[test]
    fn regular_simplex_needs_three_dimensions() {
        let m = DistanceMatrix::from_fn(names(4), |_, _| 1.0).unwrap();
        let tol = EmbedTolerance::default();
        let r = embedding_report(&m, 2, &tol);
        assert!(!r.embeddable);
        assert_eq!(r.dimension, Some(3));
        assert!(embedding_report(&m, 3, &tol).embeddable);
    }

    #[test]
    fn collinear_points() {
        let m = pts(&[&[0.0], &[1.0], &[3.0]]);
        let r = embedding_report(&m, 1, &EmbedTolerance::default());
        assert_eq!(r.dimension, Some(1));
        let c = r.coordinates.unwrap();
        let xs: Vec<f64> = c.iter().map(|p| p[0] * c[2][0].signum()).collect();
        for (a, b) in xs.iter().zip([0.0, 1.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cover_examples() {
        let tri = ConflictGraph {
            nodes: vec![0, 1, 2],
            edges: vec![(1, 2), (0, 2), (0, 1)],
        };
        assert_eq!(vertex_cover_2approx(&tri), vec![0, 1]);
        let path = ConflictGraph {
            nodes: vec![0, 1, 2],
            edges: vec![(0, 1), (1, 2)],
        };
        assert_eq!(vertex_cover_2approx(&path), vec![0, 1]);
        assert!(vertex_cover_2approx(&ConflictGraph::default()).is_empty());
    }

    #[test]
    fn planar_points_have_no_outliers() {
        let m = pts(&[
            &[0.0, 0.0],
            &[1.0, 0.2],
            &[0.3, 1.1],
            &[2.0, 1.5],
            &[1.2, -0.7],
        ]);
        let fit = outliers_euclidean(&m, 2, &EmbedTolerance::default());
        assert!(fit.result.outliers.is_empty());
        let back = DistanceMatrix::from_points(m.labels().to_vec(), &fit.coordinates).unwrap();
        assert!(crate::metric::linf_gap(&m, &back).unwrap() < 1e-9);
    }

    #[test]
    fn inflated_point_is_removed() {
        let base = [
            [0.0, 0.0],
            [1.0, 0.2],
            [0.3, 1.1],
            [2.0, 1.5],
            [1.2, -0.7],
            [0.8, 0.6],
        ];
        let p: Vec<Vec<f64>> = base.iter().map(|x| x.to_vec()).collect();
        let m = DistanceMatrix::from_fn(names(6), |i, j| {
            let d = crate::metric::euclidean(&p[i], &p[j]);
            if i == 5 {
                d + 1.0
            } else {
                d
            }
        })
        .unwrap();
        let fit = outliers_euclidean(&m, 2, &EmbedTolerance::default());
        assert_eq!(fit.result.outliers, vec![5]);
        let (rejected, g) =
            conflict_graph(&m, &fit.anchors, fit.anchor_dim, &EmbedTolerance::default());
        assert_eq!(rejected, vec![5]);
        assert!(g.edges.is_empty());
    }
}
