//! Finite metrics stored as packed lower-triangular distance matrices, plus the
//! pointwise conditions (triangle, three-point, four-point) the embedding
//! algorithms are built on.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while building or combining distance matrices.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("a distance matrix needs at least one point")]
    Empty,
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("row {row} has {found} entries, expected {expected}")]
    Ragged {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("distance between `{a}` and `{b}` is {value}; expected a finite nonnegative number")]
    InvalidEntry { a: String, b: String, value: f64 },
    #[error("distinct points `{a}` and `{b}` are at distance zero")]
    ZeroDistance { a: String, b: String },
    #[error("asymmetric entries for `{a}`/`{b}`: {forward} vs {backward}")]
    Asymmetric {
        a: String,
        b: String,
        forward: f64,
        backward: f64,
    },
    #[error("nonzero diagonal entry {value} for `{label}`")]
    NonzeroDiagonal { label: String, value: f64 },
    #[error("label sets differ")]
    LabelMismatch,
    #[error("selection is empty")]
    EmptySelection,
    #[error("point index {0} is out of range")]
    IndexOutOfRange(usize),
}

/// Comparison slack for floating point inputs.
///
/// Every predicate in this crate accepts a relation that holds within
/// `eta = max(abs_tol, rel_tol * diam)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            abs_tol: 1e-9,
            rel_tol: 1e-12,
        }
    }
}

impl ToleranceConfig {
    pub fn eta(&self, diameter: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * diameter).max(0.0)
    }
}

/// Symmetric distance matrix over labelled points.
///
/// Only the strict lower triangle is stored; `get(i, i)` is always zero.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    dist: Vec<f64>,
    diameter: f64,
}

#[inline]
fn packed(i: usize, j: usize) -> usize {
    debug_assert!(i > j);
    i * (i - 1) / 2 + j
}

impl DistanceMatrix {
    /// Builds a matrix from `f(i, j)`, called once for every `i > j`.
    pub fn from_fn<F>(labels: Vec<String>, mut f: F) -> Result<Self, MetricError>
    where
        F: FnMut(usize, usize) -> f64,
    {
        let n = labels.len();
        if n == 0 {
            return Err(MetricError::Empty);
        }
        check_unique(&labels)?;
        let mut dist = Vec::with_capacity(n * (n - 1) / 2);
        let mut diameter = 0.0f64;
        for i in 1..n {
            for j in 0..i {
                let value = f(i, j);
                if !value.is_finite() || value < 0.0 {
                    return Err(MetricError::InvalidEntry {
                        a: labels[i].clone(),
                        b: labels[j].clone(),
                        value,
                    });
                }
                if value == 0.0 {
                    return Err(MetricError::ZeroDistance {
                        a: labels[j].clone(),
                        b: labels[i].clone(),
                    });
                }
                diameter = diameter.max(value);
                dist.push(value);
            }
        }
        Ok(DistanceMatrix {
            labels,
            dist,
            diameter,
        })
    }

    /// Builds a matrix from full square rows. Entries `(i, j)` and `(j, i)` that
    /// differ by at most `eta` are averaged; larger differences are rejected.
    pub fn from_rows(
        labels: Vec<String>,
        rows: &[Vec<f64>],
        tol: &ToleranceConfig,
    ) -> Result<Self, MetricError> {
        let n = labels.len();
        if rows.len() != n {
            return Err(MetricError::Ragged {
                row: rows.len(),
                found: rows.len(),
                expected: n,
            });
        }
        let mut max_entry = 0.0f64;
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(MetricError::Ragged {
                    row: r,
                    found: row.len(),
                    expected: n,
                });
            }
            for &v in row {
                if v.is_finite() {
                    max_entry = max_entry.max(v.abs());
                }
            }
        }
        let eta = tol.eta(max_entry);
        for i in 0..n {
            let d = rows[i][i];
            if !d.is_finite() || d.abs() > eta {
                return Err(MetricError::NonzeroDiagonal {
                    label: labels[i].clone(),
                    value: d,
                });
            }
            for j in 0..i {
                let (forward, backward) = (rows[i][j], rows[j][i]);
                if forward.is_finite() && backward.is_finite() && (forward - backward).abs() > eta {
                    return Err(MetricError::Asymmetric {
                        a: labels[j].clone(),
                        b: labels[i].clone(),
                        forward: backward,
                        backward: forward,
                    });
                }
            }
        }
        Self::from_fn(labels, |i, j| 0.5 * (rows[i][j] + rows[j][i]))
    }

    /// Builds a matrix from points in Euclidean space.
    pub fn from_points(labels: Vec<String>, points: &[Vec<f64>]) -> Result<Self, MetricError> {
        if points.len() != labels.len() {
            return Err(MetricError::Ragged {
                row: points.len(),
                found: points.len(),
                expected: labels.len(),
            });
        }
        Self::from_fn(labels, |i, j| euclidean(&points[i], &points[j]))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Greater => self.dist[packed(i, j)],
            std::cmp::Ordering::Less => self.dist[packed(j, i)],
        }
    }

    /// Distances from point `i` to all points `j < i`, contiguous in memory.
    #[inline]
    pub fn lower_row(&self, i: usize) -> &[f64] {
        if i == 0 {
            return &[];
        }
        let start = packed(i, 0);
        &self.dist[start..start + i]
    }

    /// Largest pairwise distance; zero for a single point.
    #[inline]
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Effective comparison slack for this matrix.
    #[inline]
    pub fn eta(&self, tol: &ToleranceConfig) -> f64 {
        tol.eta(self.diameter)
    }

    /// Packed upper triangle: `upper[k]` holds `ρ(i, j)` for `j > i`, rows
    /// contiguous. Together with [`lower_row`](Self::lower_row) this gives
    /// every row as two contiguous slices. Filled in cache-sized tiles.
    pub fn upper_rows(&self) -> UpperRows {
        const TILE: usize = 64;
        let n = self.len();
        let offset: Vec<usize> = (0..n).map(|i| i * n - i * (i + 1) / 2).collect();
        let mut data = vec![0.0; n * n.saturating_sub(1) / 2];
        for bi in (0..n).step_by(TILE) {
            for bj in (0..=bi).step_by(TILE) {
                for i in bi..(bi + TILE).min(n) {
                    let row = self.lower_row(i);
                    for j in bj..(bj + TILE).min(i) {
                        data[offset[j] + (i - j - 1)] = row[j];
                    }
                }
            }
        }
        UpperRows { n, offset, data }
    }

    /// Full square rows, mostly for serialization.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Returns the same matrix with every off-diagonal entry increased by `alpha`.
    pub fn shifted(&self, alpha: f64) -> Result<Self, MetricError> {
        Self::from_fn(self.labels.clone(), |i, j| self.get(i, j) + alpha)
    }
}

/// Upper-triangular transpose of a [`DistanceMatrix`].
#[derive(Clone, Debug)]
pub struct UpperRows {
    n: usize,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl UpperRows {
    /// Distances from `i` to every `j > i`; entry `k` is `ρ(i, i + 1 + k)`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let start = self.offset[i];
        &self.data[start..start + (self.n - i - 1)]
    }
}

fn check_unique(labels: &[String]) -> Result<(), MetricError> {
    let mut seen = HashMap::with_capacity(labels.len());
    for l in labels {
        if seen.insert(l.as_str(), ()).is_some() {
            return Err(MetricError::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Diameter of a matrix: the largest pairwise distance, zero for one point.
pub fn diameter(m: &DistanceMatrix) -> f64 {
    m.diameter()
}

/// Outcome of [`validate_metric`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    /// Total number of violated triangle inequalities.
    pub violation_count: usize,
    /// Up to [`ValidationReport::MAX_REPORTED`] violations `[a, b, c]`, each
    /// meaning `ρ(a, c) > ρ(a, b) + ρ(b, c) + η`.
    pub violations: Vec<[usize; 3]>,
}

impl ValidationReport {
    pub const MAX_REPORTED: usize = 1000;
}

/// Checks the triangle inequality on every triple. Symmetry and positivity
/// already hold by construction of [`DistanceMatrix`].
pub fn validate_metric(m: &DistanceMatrix, tol: &ToleranceConfig) -> ValidationReport {
    let n = m.len();
    let eta = m.eta(tol);
    let mut violations = Vec::new();
    let mut count = 0usize;
    let mut record = |v: [usize; 3]| {
        count += 1;
        if violations.len() < ValidationReport::MAX_REPORTED {
            violations.push(v);
        }
    };
    for i in 0..n {
        for j in (i + 1)..n {
            let dij = m.get(i, j);
            for k in (j + 1)..n {
                let dik = m.get(i, k);
                let djk = m.get(j, k);
                if dik > dij + djk + eta {
                    record([i, j, k]);
                }
                if dij > dik + djk + eta {
                    record([i, k, j]);
                }
                if djk > dij + dik + eta {
                    record([j, i, k]);
                }
            }
        }
    }
    ValidationReport {
        ok: count == 0,
        violation_count: count,
        violations,
    }
}

/// Largest side minus the second largest side of a triangle. Zero exactly when
/// the triple satisfies the ultrametric three-point condition.
#[inline]
pub fn ultrametric_defect(m: &DistanceMatrix, i: usize, j: usize, k: usize) -> f64 {
    let (a, b, c) = (m.get(i, j), m.get(i, k), m.get(j, k));
    top_two_gap(a, b, c)
}

/// True iff every rotation of `(i, j, k)` satisfies
/// `ρ(x, y) ≤ max{ρ(x, z), ρ(z, y)} + slack + eta`.
#[inline]
pub fn ultrametric_triple_ok(
    m: &DistanceMatrix,
    i: usize,
    j: usize,
    k: usize,
    slack: f64,
    eta: f64,
) -> bool {
    ultrametric_defect(m, i, j, k) <= slack + eta
}

/// The three pairing sums of a 4-tuple.
#[inline]
pub fn pairing_sums(m: &DistanceMatrix, i: usize, j: usize, k: usize, l: usize) -> [f64; 3] {
    [
        m.get(i, j) + m.get(k, l),
        m.get(i, k) + m.get(j, l),
        m.get(i, l) + m.get(j, k),
    ]
}

/// Largest pairing sum minus the second largest. Zero exactly when the
/// 4-tuple satisfies the four-point condition.
#[inline]
pub fn four_point_defect(m: &DistanceMatrix, i: usize, j: usize, k: usize, l: usize) -> f64 {
    let [a, b, c] = pairing_sums(m, i, j, k, l);
    top_two_gap(a, b, c)
}

/// True iff each pairing sum is at most the larger of the other two plus
/// `slack + eta`.
#[inline]
pub fn four_point_ok(
    m: &DistanceMatrix,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
    slack: f64,
    eta: f64,
) -> bool {
    four_point_defect(m, i, j, k, l) <= slack + eta
}

#[inline]
fn top_two_gap(a: f64, b: f64, c: f64) -> f64 {
    let hi = a.max(b).max(c);
    let mid = if hi == a {
        b.max(c)
    } else if hi == b {
        a.max(c)
    } else {
        a.max(b)
    };
    hi - mid
}

/// Largest absolute entrywise difference between two matrices over the same
/// label set. Label order may differ.
pub fn linf_gap(a: &DistanceMatrix, b: &DistanceMatrix) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LabelMismatch);
    }
    let index: HashMap<&str, usize> = b
        .labels()
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let map: Vec<usize> = a
        .labels()
        .iter()
        .map(|l| {
            index
                .get(l.as_str())
                .copied()
                .ok_or(MetricError::LabelMismatch)
        })
        .collect::<Result<_, _>>()?;
    let mut gap = 0.0f64;
    for i in 1..a.len() {
        for j in 0..i {
            gap = gap.max((a.get(i, j) - b.get(map[i], map[j])).abs());
        }
    }
    Ok(gap)
}

/// Principal submatrix on `keep`, in original index order.
pub fn restrict(m: &DistanceMatrix, keep: &[usize]) -> Result<DistanceMatrix, MetricError> {
    let mut idx: Vec<usize> = keep.to_vec();
    idx.sort_unstable();
    idx.dedup();
    if idx.is_empty() {
        return Err(MetricError::EmptySelection);
    }
    if let Some(&bad) = idx.iter().find(|&&i| i >= m.len()) {
        return Err(MetricError::IndexOutOfRange(bad));
    }
    let labels = idx.iter().map(|&i| m.labels[i].clone()).collect();
    DistanceMatrix::from_fn(labels, |a, b| m.get(idx[a], idx[b]))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn labels(n: usize) -> Vec<String> {
        (0..n)
            .map(|i| ((b'a' + i as u8) as char).to_string())
            .collect()
    }

    fn tri(ab: f64, ac: f64, bc: f64) -> DistanceMatrix {
        DistanceMatrix::from_rows(
            labels(3),
            &[vec![0.0, ab, ac], vec![ab, 0.0, bc], vec![ac, bc, 0.0]],
            &ToleranceConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn validate_equilateral_and_broken_triangle() {
        let tol = ToleranceConfig::default();
        assert!(validate_metric(&tri(1.0, 1.0, 1.0), &tol).ok);
        let bad = validate_metric(&tri(1.0, 3.0, 1.0), &tol);
        assert!(!bad.ok);
        assert_eq!(bad.violations, vec![[0, 1, 2]]);
    }

    #[test]
    fn diameter_examples() {
        let one = DistanceMatrix::from_fn(vec!["a".into()], |_, _| unreachable!()).unwrap();
        assert_eq!(diameter(&one), 0.0);
        assert_eq!(diameter(&tri(1.0, 1.0, 1.0)), 1.0);
        let line =
            DistanceMatrix::from_points(labels(3), &[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(diameter(&line), 3.0);
    }

    #[test]
    fn triple_predicate_examples() {
        let m = tri(1.0, 2.0, 2.0);
        assert!(ultrametric_triple_ok(&m, 0, 1, 2, 0.0, 1e-9));
        let m = tri(3.0, 2.0, 1.0);
        assert!(!ultrametric_triple_ok(&m, 0, 1, 2, 0.0, 1e-9));
        assert!(ultrametric_triple_ok(&m, 0, 1, 2, 2.0, 1e-9));
    }

    #[test]
    fn four_point_examples() {
        let path =
            DistanceMatrix::from_points(labels(4), &[vec![0.0], vec![1.0], vec![2.0], vec![3.0]])
                .unwrap();
        assert!(four_point_ok(&path, 0, 1, 2, 3, 0.0, 1e-9));
        // unit square cut metric: sums 2, 4, 2
        let sq = DistanceMatrix::from_rows(
            labels(4),
            &[
                vec![0.0, 1.0, 2.0, 1.0],
                vec![1.0, 0.0, 1.0, 2.0],
                vec![2.0, 1.0, 0.0, 1.0],
                vec![1.0, 2.0, 1.0, 0.0],
            ],
            &ToleranceConfig::default(),
        )
        .unwrap();
        let mut sums = pairing_sums(&sq, 0, 1, 2, 3);
        sums.sort_by(f64::total_cmp);
        assert_eq!(sums, [2.0, 2.0, 4.0]);
        assert!(!four_point_ok(&sq, 0, 1, 2, 3, 0.0, 1e-9));
        assert_eq!(four_point_defect(&sq, 3, 1, 0, 2), 2.0);
    }

    #[test]
    fn linf_gap_examples() {
        let line =
            DistanceMatrix::from_points(labels(3), &[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(linf_gap(&line, &line).unwrap(), 0.0);
        let sub = tri(1.0, 2.0, 2.0);
        assert_eq!(linf_gap(&line, &sub).unwrap(), 1.0);
        assert_eq!(linf_gap(&sub, &sub.shifted(0.25).unwrap()).unwrap(), 0.25);
        let other = DistanceMatrix::from_fn(vec!["a".into(), "z".into()], |_, _| 1.0).unwrap();
        assert_eq!(linf_gap(&line, &other), Err(MetricError::LabelMismatch));
    }

    #[test]
    fn linf_gap_ignores_label_order() {
        let a = tri(1.0, 2.0, 2.5);
        let b = DistanceMatrix::from_rows(
            vec!["c".into(), "a".into(), "b".into()],
            &[
                vec![0.0, 2.0, 2.5],
                vec![2.0, 0.0, 1.0],
                vec![2.5, 1.0, 0.0],
            ],
            &ToleranceConfig::default(),
        )
        .unwrap();
        assert_eq!(linf_gap(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn restrict_examples() {
        let m = tri(1.0, 2.0, 2.5);
        assert_eq!(restrict(&m, &[2, 0, 1]).unwrap(), m);
        let one = restrict(&m, &[1]).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.label(0), "b");
        assert_eq!(one.get(0, 0), 0.0);
        assert_eq!(restrict(&m, &[]), Err(MetricError::EmptySelection));
        assert_eq!(restrict(&m, &[7]), Err(MetricError::IndexOutOfRange(7)));
    }

    #[test]
    fn construction_rejects_bad_input() {
        let tol = ToleranceConfig::default();
        let asym = DistanceMatrix::from_rows(labels(2), &[vec![0.0, 1.0], vec![1.5, 0.0]], &tol);
        assert!(matches!(asym, Err(MetricError::Asymmetric { .. })));
        let zero = DistanceMatrix::from_rows(labels(2), &[vec![0.0, 0.0], vec![0.0, 0.0]], &tol);
        assert!(matches!(zero, Err(MetricError::ZeroDistance { .. })));
        let neg = DistanceMatrix::from_rows(labels(2), &[vec![0.0, -1.0], vec![-1.0, 0.0]], &tol);
        assert!(matches!(neg, Err(MetricError::InvalidEntry { .. })));
        let dup = DistanceMatrix::from_fn(vec!["a".into(), "a".into()], |_, _| 1.0);
        assert_eq!(dup, Err(MetricError::DuplicateLabel("a".into())));
        let near =
            DistanceMatrix::from_rows(labels(2), &[vec![0.0, 1.0], vec![1.0 + 1e-12, 0.0]], &tol)
                .unwrap();
        assert!((near.get(0, 1) - 1.0).abs() < 1e-11);
    }
}
