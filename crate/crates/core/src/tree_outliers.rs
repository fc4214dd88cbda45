//! Minimum-outlier embedding into tree metrics.
//!
//! [`outliers_tree_fast`] grows a tree one point at a time. Before inserting
//! `x` it orients the current tree with respect to `x` and its nearest kept
//! neighbour `x*`, picks a sink, and tries the leaf augmentation suggested by
//! that sink. If the augmentation disagrees with the input somewhere, a
//! 4-tuple containing `x` that violates the four-point condition is read off
//! the orientation and all four points are dropped.

use thiserror::Error;

use crate::metric::{four_point_defect, four_point_ok, DistanceMatrix, ToleranceConfig};
use crate::outliers::{OutlierResult, Witness};
use crate::tree::{EdgeId, StemLocation, TreeError, VertexId, WeightedTree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeFitError {
    #[error("point {0} is not a label of the tree")]
    NotInTree(usize),
    #[error("point {0} is already a label of the tree")]
    AlreadyInTree(usize),
    #[error("point {x_star} is not a nearest kept neighbour of {x}")]
    NotNearest { x: usize, x_star: usize },
    #[error("the tree is empty")]
    EmptyTree,
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Orientation of a single edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeDirection {
    None,
    Toward(VertexId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SinkSite {
    Edge(EdgeId),
    Vertex(VertexId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sink {
    pub site: SinkSite,
    /// Kept point whose augmentation pair `{x*, generating_vertex}` puts the
    /// stem of `x` at this site.
    pub generating_vertex: usize,
}

/// An `x`-orientation of a tree, indexed by edge id.
#[derive(Clone, Debug)]
pub struct OrientationState {
    pub direction: Vec<EdgeDirection>,
    pub masked: Vec<bool>,
    pub orienting_vertex: Vec<Option<usize>>,
    /// Global sinks, in the order they were first recorded.
    pub sinks: Vec<Sink>,
    /// Edges traversed while building the orientation.
    pub visits: usize,
}

/// Outcome of one insertion step.
#[derive(Clone, Debug, PartialEq)]
pub enum Extension {
    /// `x` was attached; the tree now realizes the kept set plus `x`.
    Extended { stem: StemLocation },
    /// `x` cannot be attached; these four points (starting with `x`) violate
    /// the four-point condition. The tree is left as it was.
    Violation([usize; 4]),
}

/// Distance from `v` to the stem of `x` in the augmentation at `{v, x*}`.
#[inline]
fn stem_distance(m: &DistanceMatrix, x: usize, x_star: usize, v: usize) -> f64 {
    (m.get(v, x) + m.get(v, x_star) - m.get(x, x_star)) / 2.0
}

/// Nearest kept point to `x`, lowest index on ties.
fn nearest(m: &DistanceMatrix, x: usize, kept: &[usize]) -> usize {
    let mut best = kept[0];
    let mut bd = m.get(x, best);
    for &v in &kept[1..] {
        let d = m.get(x, v);
        if d < bd || (d == bd && v < best) {
            best = v;
            bd = d;
        }
    }
    best
}

/// Builds the `x`-orientation of `tree` (rooted at `x*`), processing the
/// labels of the tree in index order.
pub fn compute_x_orientation(
    tree: &WeightedTree,
    m: &DistanceMatrix,
    x: usize,
    x_star: usize,
    eta: f64,
) -> Result<OrientationState, TreeFitError> {
    let root = tree
        .vertex_of(x_star)
        .ok_or(TreeFitError::NotInTree(x_star))?;
    if tree.vertex_of(x).is_some() {
        return Err(TreeFitError::AlreadyInTree(x));
    }
    let labels = tree.labels();
    let d_star = m.get(x, x_star);
    if labels.iter().any(|&v| v != x_star && m.get(x, v) < d_star) {
        return Err(TreeFitError::NotNearest { x, x_star });
    }
    let mut visits = 0;
    let rooting = tree.root_at(root, &mut visits);
    let ne = tree.edges().map(|(id, ..)| id + 1).max().unwrap_or(0);
    let mut direction = vec![EdgeDirection::None; ne];
    let mut masked = vec![false; ne];
    let mut orienting_vertex = vec![None; ne];
    let mut candidates: Vec<Sink> = Vec::new();

    for &v in &labels {
        if v == x_star {
            continue;
        }
        let target = stem_distance(m, x, x_star, v);
        let mut cur = tree.vertex_of(v).expect("label present");
        let mut walked = 0.0;
        let mut passed = false;
        if (walked - target).abs() <= eta {
            candidates.push(Sink {
                site: SinkSite::Vertex(cur),
                generating_vertex: v,
            });
            passed = true;
        }
        while let Some((parent, e)) = rooting.parent[cur] {
            if masked[e] {
                break;
            }
            visits += 1;
            masked[e] = true;
            orienting_vertex[e] = Some(v);
            let next = walked + tree.edge(e).expect("live edge").2;
            if passed {
                direction[e] = EdgeDirection::Toward(cur);
            } else if (next - target).abs() <= eta {
                direction[e] = EdgeDirection::Toward(parent);
                candidates.push(Sink {
                    site: SinkSite::Vertex(parent),
                    generating_vertex: v,
                });
                passed = true;
            } else if next < target {
                direction[e] = EdgeDirection::Toward(parent);
            } else {
                candidates.push(Sink {
                    site: SinkSite::Edge(e),
                    generating_vertex: v,
                });
                passed = true;
            }
            cur = parent;
            walked = next;
        }
        if cur == root && !passed {
            candidates.push(Sink {
                site: SinkSite::Vertex(root),
                generating_vertex: v,
            });
        }
    }

    let mut sinks = Vec::new();
    let mut seen_vertex = vec![false; tree.vertex_capacity()];
    for c in candidates {
        let global = match c.site {
            SinkSite::Edge(e) => direction[e] == EdgeDirection::None,
            SinkSite::Vertex(s) => {
                if seen_vertex[s] {
                    false
                } else {
                    tree.neighbors(s)
                        .iter()
                        .all(|&(_, e)| direction[e] == EdgeDirection::Toward(s))
                }
            }
        };
        if let SinkSite::Vertex(s) = c.site {
            if global {
                seen_vertex[s] = true;
            }
        }
        if global {
            sinks.push(c);
        }
    }
    Ok(OrientationState {
        direction,
        masked,
        orienting_vertex,
        sinks,
        visits,
    })
}

/// Tries to insert `x` into `tree`, which must realize its labels
/// isometrically. Returns either the new stem or a violating 4-tuple.
pub fn extend_or_violate(
    tree: &mut WeightedTree,
    m: &DistanceMatrix,
    x: usize,
    eta: f64,
) -> Result<Extension, TreeFitError> {
    let mut visits = 0;
    extend_counted(tree, m, x, eta, &mut visits)
}

fn extend_counted(
    tree: &mut WeightedTree,
    m: &DistanceMatrix,
    x: usize,
    eta: f64,
    visits: &mut usize,
) -> Result<Extension, TreeFitError> {
    if tree.is_empty() {
        return Err(TreeFitError::EmptyTree);
    }
    if tree.vertex_of(x).is_some() {
        return Err(TreeFitError::AlreadyInTree(x));
    }
    let kept = tree.labels();
    let x_star = nearest(m, x, &kept);
    if kept.len() == 1 {
        let aug = tree.leaf_augment_counted(
            x,
            x_star,
            x_star,
            m.get(x, x_star),
            m.get(x, x_star),
            0.0,
            eta,
            visits,
        )?;
        return Ok(Extension::Extended { stem: aug.stem });
    }
    let orientation = compute_x_orientation(tree, m, x, x_star, eta)?;
    *visits += orientation.visits;
    debug_assert!(
        !orientation.sinks.is_empty(),
        "x-orientation without a sink"
    );
    let Some(sink) = orientation.sinks.first().copied() else {
        return Ok(Extension::Violation(brute_force_quad(m, x, &kept, eta)));
    };
    let u = sink.generating_vertex;
    let (d_xs, d_xu, d_su) = (m.get(x, x_star), m.get(x, u), m.get(x_star, u));
    let aug = match tree.leaf_augment_counted(x, x_star, u, d_xs, d_xu, d_su, eta, visits) {
        Ok(a) => a,
        Err(TreeError::StemOutOfRange { .. }) => {
            return Ok(Extension::Violation(brute_force_quad(m, x, &kept, eta)));
        }
        Err(e) => return Err(e.into()),
    };

    // distances from x in the augmented tree
    let check = 2.0 * eta;
    let from_x = tree.root_at(aug.leaf, visits);
    let d_l = |v: usize| from_x.depth[tree.vertex_of(v).unwrap()];
    let Some(w) = kept
        .iter()
        .copied()
        .find(|&v| (d_l(v) - m.get(x, v)).abs() > check)
    else {
        return Ok(Extension::Extended { stem: aug.stem });
    };

    // lowest common ancestor of u and w with the tree hung from x*
    let root = tree.vertex_of(x_star).unwrap();
    let rooting = tree.root_at(root, visits);
    let mut on_u_path = vec![false; tree.vertex_capacity()];
    let mut cur = tree.vertex_of(u).unwrap();
    on_u_path[cur] = true;
    while let Some((p, _)) = rooting.parent[cur] {
        on_u_path[p] = true;
        cur = p;
    }
    let mut below_y: Option<(VertexId, EdgeId)> = None;
    let mut y = tree.vertex_of(w).unwrap();
    while !on_u_path[y] {
        let (p, e) = rooting.parent[y].expect("x* is a common ancestor");
        below_y = Some((y, e));
        y = p;
    }

    let d_xw = m.get(x, w);
    let mut candidates: Vec<[usize; 4]> = Vec::with_capacity(3);
    if y != aug.stem_vertex || d_xw > d_l(w) {
        candidates.push([x, x_star, u, w]);
    } else if let Some(z) =
        below_y.and_then(|(_, e)| orientation.orienting_vertex.get(e).copied().flatten())
    {
        if (d_l(z) - m.get(x, z)).abs() <= check {
            candidates.push([x, x_star, z, w]);
        } else {
            candidates.push([x, x_star, z, u]);
        }
        candidates.push([x, x_star, z, w]);
        candidates.push([x, x_star, z, u]);
    }
    candidates.push([x, x_star, u, w]);

    tree.remove_labels(&[x])?;
    for q in candidates {
        if distinct(&q) && !four_point_ok(m, q[0], q[1], q[2], q[3], 0.0, eta) {
            return Ok(Extension::Violation(q));
        }
    }
    Ok(Extension::Violation(brute_force_quad(m, x, &kept, eta)))
}

fn distinct(q: &[usize; 4]) -> bool {
    (0..4).all(|i| (i + 1..4).all(|j| q[i] != q[j]))
}

/// Violating 4-tuple containing `x`, found by exhaustive search. Returns the
/// tuple with the largest defect when none exceeds `eta`.
fn brute_force_quad(m: &DistanceMatrix, x: usize, kept: &[usize], eta: f64) -> [usize; 4] {
    let mut best = ([x, kept[0], kept[0], kept[0]], f64::NEG_INFINITY);
    for (a, &p) in kept.iter().enumerate() {
        for (b, &q) in kept.iter().enumerate().skip(a + 1) {
            for &r in &kept[b + 1..] {
                let defect = four_point_defect(m, x, p, q, r);
                if defect > eta {
                    return [x, p, q, r];
                }
                if defect > best.1 {
                    best = ([x, p, q, r], defect);
                }
            }
        }
    }
    best.0
}

/// O(n²) incremental 4-approximation. Also returns the tree realizing the
/// kept points.
pub fn outliers_tree_fast(
    m: &DistanceMatrix,
    tol: &ToleranceConfig,
) -> (OutlierResult, WeightedTree) {
    let n = m.len();
    let eta = m.eta(tol);
    let names: std::sync::Arc<[String]> = m.labels().to_vec().into();
    let mut tree = WeightedTree::new(names.clone());
    let mut certificate = Vec::new();
    let mut warnings = Vec::new();
    let mut work = Vec::with_capacity(n);
    for x in 0..n {
        if tree.is_empty() {
            tree.insert_first(x).expect("fresh tree");
            work.push(0);
            continue;
        }
        let mut visits = 0;
        let step =
            extend_counted(&mut tree, m, x, eta, &mut visits).expect("tree holds only kept points");
        work.push(visits);
        if let Extension::Violation(q) = step {
            if four_point_ok(m, q[0], q[1], q[2], q[3], 0.0, eta) {
                warnings.push(format!(
                    "no 4-tuple containing `{}` violates the four-point condition beyond tolerance",
                    m.label(x)
                ));
            }
            let others = [q[1], q[2], q[3]];
            if tree.label_count() == 3 {
                tree = WeightedTree::new(names.clone());
            } else {
                tree.remove_labels(&others)
                    .expect("kept labels are in the tree");
            }
            certificate.push(Witness::Quad {
                points: q,
                slack: 0.0,
            });
        }
    }
    let mut result = OutlierResult::from_certificate(n, certificate);
    result.work = work;
    result.warnings = warnings;
    (result, tree)
}

/// Lexicographic 4-tuple scan removing every tuple whose four-point defect
/// exceeds `slack`.
pub(crate) fn quad_filter(m: &DistanceMatrix, slack: f64, eta: f64) -> OutlierResult {
    let n = m.len();
    let mut removed = vec![false; n];
    let mut certificate = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                for l in k + 1..n {
                    if removed[i] || removed[j] || removed[k] {
                        break;
                    }
                    if removed[l] {
                        continue;
                    }
                    if !four_point_ok(m, i, j, k, l, slack, eta) {
                        for p in [i, j, k, l] {
                            removed[p] = true;
                        }
                        certificate.push(Witness::Quad {
                            points: [i, j, k, l],
                            slack,
                        });
                    }
                }
                if removed[i] || removed[j] {
                    break;
                }
            }
            if removed[i] {
                break;
            }
        }
    }
    OutlierResult::from_certificate(n, certificate)
}

/// O(n⁴) 4-tuple scan 4-approximation.
pub fn outliers_tree_quartic(m: &DistanceMatrix, tol: &ToleranceConfig) -> OutlierResult {
    quad_filter(m, 0.0, m.eta(tol))
}
