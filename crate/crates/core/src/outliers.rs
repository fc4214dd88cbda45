//! Outlier sets together with the certificates that justify each removal.

use serde::{Deserialize, Serialize};

use crate::metric::DistanceMatrix;

/// One certificate entry. Every variant names the points it removed and
/// carries enough data to re-check the violation against the input matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Three points failing the ultrametric condition by more than `slack`.
    Triple { points: [usize; 3], slack: f64 },
    /// Four points failing the four-point condition by more than `slack`.
    Quad { points: [usize; 4], slack: f64 },
    /// `base ∪ points` has no isometric embedding in `R^dim`.
    NotEmbeddable {
        base: Vec<usize>,
        points: Vec<usize>,
        dim: usize,
    },
    /// Two points placed near the anchors whose placements disagree with
    /// their distance by more than `budget`.
    PlacedPair {
        anchors: Vec<usize>,
        anchor_positions: Vec<Vec<f64>>,
        points: [usize; 2],
        positions: [Vec<f64>; 2],
        budget: f64,
        grid: crate::bicriteria::GridSpec,
    },
    /// No grid point lies within `budget` of every anchor distance of `point`.
    Unplaceable {
        anchors: Vec<usize>,
        anchor_positions: Vec<Vec<f64>>,
        point: usize,
        budget: f64,
        grid: crate::bicriteria::GridSpec,
    },
    /// No anchor subset embeds; `points` are removed so that the rest
    /// embeds in `R^dim`.
    Fallback { points: Vec<usize>, dim: usize },
}

impl Witness {
    /// Points this entry removed.
    pub fn removed(&self) -> Vec<usize> {
        match self {
            Witness::Triple { points, .. } => points.to_vec(),
            Witness::Quad { points, .. } => points.to_vec(),
            Witness::NotEmbeddable { points, .. } => points.clone(),
            Witness::PlacedPair { points, .. } => points.to_vec(),
            Witness::Unplaceable { point, .. } => vec![*point],
            Witness::Fallback { points, .. } => points.clone(),
        }
    }

    /// Same witness with every point index passed through `f`.
    pub fn map_points(&self, f: impl Fn(usize) -> usize) -> Witness {
        let map = |v: &[usize]| v.iter().map(|&p| f(p)).collect::<Vec<_>>();
        match self {
            Witness::Triple { points, slack } => Witness::Triple {
                points: points.map(&f),
                slack: *slack,
            },
            Witness::Quad { points, slack } => Witness::Quad {
                points: points.map(&f),
                slack: *slack,
            },
            Witness::NotEmbeddable { base, points, dim } => Witness::NotEmbeddable {
                base: map(base),
                points: map(points),
                dim: *dim,
            },
            Witness::PlacedPair {
                anchors,
                anchor_positions,
                points,
                positions,
                budget,
                grid,
            } => Witness::PlacedPair {
                anchors: map(anchors),
                anchor_positions: anchor_positions.clone(),
                points: points.map(&f),
                positions: positions.clone(),
                budget: *budget,
                grid: *grid,
            },
            Witness::Unplaceable {
                anchors,
                anchor_positions,
                point,
                budget,
                grid,
            } => Witness::Unplaceable {
                anchors: map(anchors),
                anchor_positions: anchor_positions.clone(),
                point: f(*point),
                budget: *budget,
                grid: *grid,
            },
            Witness::Fallback { points, dim } => Witness::Fallback {
                points: map(points),
                dim: *dim,
            },
        }
    }
}

/// Outliers in removal order, the kept points in index order, and the
/// certificate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutlierResult {
    pub outliers: Vec<usize>,
    pub kept: Vec<usize>,
    pub certificate: Vec<Witness>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Per-insertion work counters for the incremental algorithms.
    #[serde(skip)]
    pub work: Vec<usize>,
}

impl OutlierResult {
    /// Builds a result over `n` points from a certificate, listing outliers in
    /// the order the witnesses removed them.
    pub fn from_certificate(n: usize, certificate: Vec<Witness>) -> Self {
        let mut removed = vec![false; n];
        let mut outliers = Vec::new();
        for w in &certificate {
            for p in w.removed() {
                if !removed[p] {
                    removed[p] = true;
                    outliers.push(p);
                }
            }
        }
        let kept = (0..n).filter(|&i| !removed[i]).collect();
        OutlierResult {
            outliers,
            kept,
            certificate,
            warnings: Vec::new(),
            work: Vec::new(),
        }
    }

    pub fn outlier_labels<'a>(&self, m: &'a DistanceMatrix) -> Vec<&'a str> {
        self.outliers.iter().map(|&i| m.label(i)).collect()
    }

    pub fn kept_labels<'a>(&self, m: &'a DistanceMatrix) -> Vec<&'a str> {
        self.kept.iter().map(|&i| m.label(i)).collect()
    }
}
