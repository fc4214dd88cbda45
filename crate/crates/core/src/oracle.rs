//! Brute-force ground truth for small inputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bicriteria::grid_near_embed;
use crate::combin::Combinations;
use crate::euclidean::{subset_embeds, EmbedTolerance};
use crate::instances::SimpleGraph;
use crate::metric::{
    euclidean, four_point_ok, ultrametric_triple_ok, DistanceMatrix, ToleranceConfig,
};
use crate::outliers::{OutlierResult, Witness};

/// Hard cap on the oracle input size.
pub const ORACLE_HARD_MAX: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("{n} points exceed the oracle limit of {max_n}")]
    TooLarge { n: usize, max_n: usize },
    #[error("no feasible outlier set with at most {0} points")]
    SubsetCapReached(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleBudget {
    pub max_n: usize,
    /// Largest outlier set tried; `None` searches all sizes.
    pub max_subset: Option<usize>,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_n: 12,
            max_subset: None,
        }
    }
}

impl OracleBudget {
    pub fn with_max_n(max_n: usize) -> Self {
        OracleBudget {
            max_n,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Ultrametric,
    Tree,
    Euclidean(usize),
}

/// Lexicographically least minimum outlier set, with default tolerances.
pub fn exact_min_outliers(
    m: &DistanceMatrix,
    target: Target,
    budget: &OracleBudget,
) -> Result<Vec<usize>, OracleError> {
    exact_min_outliers_with(
        m,
        target,
        budget,
        &ToleranceConfig::default(),
        &EmbedTolerance::default(),
    )
}

/// Enumerates outlier sets by size, lexicographically within a size, and
/// returns the first whose complement belongs to the target class.
pub fn exact_min_outliers_with(
    m: &DistanceMatrix,
    target: Target,
    budget: &OracleBudget,
    tol: &ToleranceConfig,
    embed_tol: &EmbedTolerance,
) -> Result<Vec<usize>, OracleError> {
    let n = m.len();
    let max_n = budget.max_n.min(ORACLE_HARD_MAX);
    if n > max_n {
        return Err(OracleError::TooLarge { n, max_n });
    }
    let eta = m.eta(tol);
    // ultrametric and tree membership reduce to hitting every violating tuple
    let bad: Vec<Vec<usize>> = match target {
        Target::Ultrametric => Combinations::new(n, 3)
            .filter(|t| !ultrametric_triple_ok(m, t[0], t[1], t[2], 0.0, eta))
            .collect(),
        Target::Tree => Combinations::new(n, 4)
            .filter(|q| !four_point_ok(m, q[0], q[1], q[2], q[3], 0.0, eta))
            .collect(),
        Target::Euclidean(_) => Vec::new(),
    };
    let scale = m.diameter();
    let cap = budget.max_subset.unwrap_or(n).min(n);
    let mut removed = vec![false; n];
    for size in 0..=cap {
        for subset in Combinations::new(n, size) {
            removed.iter_mut().for_each(|r| *r = false);
            for &s in &subset {
                removed[s] = true;
            }
            let feasible = match target {
                Target::Euclidean(d) => {
                    let kept: Vec<usize> = (0..n).filter(|&i| !removed[i]).collect();
                    subset_embeds(m, &kept, d, scale, embed_tol)
                }
                _ => bad.iter().all(|t| t.iter().any(|&p| removed[p])),
            };
            if feasible {
                return Ok(subset);
            }
        }
    }
    Err(OracleError::SubsetCapReached(cap))
}

/// Lexicographically least minimum vertex cover. Sizes below the size of a
/// greedy maximal matching are skipped, since they cannot cover it.
pub fn exact_min_vertex_cover(g: &SimpleGraph) -> Result<Vec<usize>, OracleError> {
    let n = g.vertex_count();
    if n > ORACLE_HARD_MAX {
        return Err(OracleError::TooLarge {
            n,
            max_n: ORACLE_HARD_MAX,
        });
    }
    let mut matched = vec![false; n];
    let mut lower = 0;
    for &(a, b) in g.edges() {
        if !matched[a] && !matched[b] {
            matched[a] = true;
            matched[b] = true;
            lower += 1;
        }
    }
    for size in lower..=n {
        if let Some(c) = Combinations::new(n, size).find(|c| g.is_cover(c)) {
            return Ok(c);
        }
    }
    unreachable!("the full vertex set is a cover")
}

/// Re-checks a result with default tolerances.
pub fn verify_certificate(m: &DistanceMatrix, r: &OutlierResult) -> bool {
    verify_certificate_with(
        m,
        r,
        &ToleranceConfig::default(),
        &EmbedTolerance::default(),
    )
}

/// True iff `outliers` and `kept` partition the points, the outliers are
/// exactly the points the certificate removes (in order), and every witness
/// genuinely holds against `m`.
pub fn verify_certificate_with(
    m: &DistanceMatrix,
    r: &OutlierResult,
    tol: &ToleranceConfig,
    embed_tol: &EmbedTolerance,
) -> bool {
    let n = m.len();
    if r.kept.windows(2).any(|w| w[0] >= w[1]) {
        return false;
    }
    let mut seen = vec![false; n];
    for &p in r.outliers.iter().chain(&r.kept) {
        if p >= n || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    if seen.iter().any(|s| !s) {
        return false;
    }
    let mut order = Vec::new();
    let mut removed = vec![false; n];
    for w in &r.certificate {
        for p in w.removed() {
            if p >= n {
                return false;
            }
            if !removed[p] {
                removed[p] = true;
                order.push(p);
            }
        }
    }
    if order != r.outliers {
        return false;
    }
    let eta = m.eta(tol);
    let scale = m.diameter();
    r.certificate
        .iter()
        .all(|w| witness_holds(m, w, &r.kept, eta, scale, embed_tol))
}

fn distinct(points: &[usize]) -> bool {
    (0..points.len()).all(|i| !points[..i].contains(&points[i]))
}

fn on_grid(p: &[f64], grid: &crate::bicriteria::GridSpec) -> bool {
    p.iter().all(|&c| {
        let idx = c / grid.tau;
        (idx - idx.round()).abs() < 1e-6 && c.abs() <= grid.half_width + grid.tau * 1e-6
    })
}

fn witness_holds(
    m: &DistanceMatrix,
    w: &Witness,
    kept: &[usize],
    eta: f64,
    scale: f64,
    embed_tol: &EmbedTolerance,
) -> bool {
    match w {
        Witness::Triple { points: t, slack } => {
            distinct(t) && !ultrametric_triple_ok(m, t[0], t[1], t[2], *slack, eta)
        }
        Witness::Quad { points: q, slack } => {
            distinct(q) && !four_point_ok(m, q[0], q[1], q[2], q[3], *slack, eta)
        }
        Witness::NotEmbeddable { base, points, dim } => {
            let mut all = base.clone();
            all.extend_from_slice(points);
            distinct(&all) && !subset_embeds(m, &all, *dim, scale, embed_tol)
        }
        Witness::Fallback { points, dim } => {
            let _ = points;
            subset_embeds(m, kept, *dim, scale, embed_tol)
        }
        Witness::Unplaceable {
            anchors,
            anchor_positions,
            point,
            budget,
            grid,
        } => {
            anchors.len() == anchor_positions.len() && !anchors.contains(point) && {
                let targets: Vec<f64> = anchors.iter().map(|&a| m.get(*point, a)).collect();
                grid_near_embed(&targets, anchor_positions, *budget, grid).is_none()
            }
        }
        Witness::PlacedPair {
            anchors,
            anchor_positions,
            points,
            positions,
            budget,
            grid,
        } => {
            if anchors.len() != anchor_positions.len() || points[0] == points[1] {
                return false;
            }
            let placed_ok = points.iter().zip(positions).all(|(&z, p)| {
                !anchors.contains(&z)
                    && on_grid(p, grid)
                    && anchors
                        .iter()
                        .zip(anchor_positions)
                        .all(|(&a, pa)| (euclidean(p, pa) - m.get(z, a)).abs() <= *budget)
            });
            placed_ok
                && (euclidean(&positions[0], &positions[1]) - m.get(points[0], points[1])).abs()
                    > *budget
        }
    }
}
