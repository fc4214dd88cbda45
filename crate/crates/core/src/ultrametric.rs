//! Minimum-outlier embedding into ultrametrics.
//!
//! Both algorithms remove whole violating triples, so they return at most
//! three times the optimal number of outliers.

use crate::metric::{ultrametric_triple_ok, DistanceMatrix, ToleranceConfig};
use crate::outliers::{OutlierResult, Witness};

/// Lexicographic triple scan; every triple failing the three-point condition
/// with the given `slack` is removed whole. Triples touching an already
/// removed point are skipped.
pub(crate) fn triple_filter(m: &DistanceMatrix, slack: f64, eta: f64) -> OutlierResult {
    let n = m.len();
    let mut removed = vec![false; n];
    let mut certificate = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if removed[i] {
                break;
            }
            if removed[j] {
                continue;
            }
            for k in j + 1..n {
                if removed[j] {
                    break;
                }
                if removed[k] {
                    continue;
                }
                if !ultrametric_triple_ok(m, i, j, k, slack, eta) {
                    removed[i] = true;
                    removed[j] = true;
                    removed[k] = true;
                    certificate.push(Witness::Triple {
                        points: [i, j, k],
                        slack,
                    });
                }
            }
        }
    }
    OutlierResult::from_certificate(n, certificate)
}

/// O(n³) triple scan 3-approximation.
pub fn outliers_ultrametric_cubic(m: &DistanceMatrix, tol: &ToleranceConfig) -> OutlierResult {
    triple_filter(m, 0.0, m.eta(tol))
}

/// O(n²) incremental 3-approximation.
///
/// Points are inserted in index order. For a new point `x` with nearest kept
/// neighbour `x*` (lowest index on ties), the kept set stays ultrametric iff
/// `ρ(x, w) = max{ρ(x, x*), ρ(x*, w)}` for every kept `w`. The first `w`
/// breaking this yields the violating triple `(x, x*, w)`.
pub fn outliers_ultrametric_fast(m: &DistanceMatrix, tol: &ToleranceConfig) -> OutlierResult {
    let n = m.len();
    let eta = m.eta(tol);
    let mut kept: Vec<usize> = Vec::with_capacity(n);
    let mut certificate = Vec::new();
    let mut work = Vec::with_capacity(n);
    let upper = m.upper_rows();
    for x in 0..n {
        if kept.is_empty() {
            kept.push(x);
            work.push(0);
            continue;
        }
        let row = m.lower_row(x);
        let mut star = kept[0];
        let mut d_star = row[star];
        for &w in &kept[1..] {
            if row[w] < d_star {
                star = w;
                d_star = row[w];
            }
        }
        let (below, above) = (m.lower_row(star), upper.row(star));
        // `kept` is increasing, so points before `star` read its lower row
        // and points after it read its upper row
        let split = kept.partition_point(|&w| w < star);
        let ok = |w: usize, d_sw: f64| (row[w] - d_star.max(d_sw)).abs() <= eta;
        let failed = kept[..split]
            .iter()
            .find(|&&w| !ok(w, below[w]))
            .or_else(|| {
                kept[split + 1..]
                    .iter()
                    .find(|&&w| !ok(w, above[w - star - 1]))
            })
            .copied();
        let checked = match failed {
            None => kept.len() - 1,
            Some(w) => kept.iter().position(|&k| k == w).unwrap() - usize::from(w > star) + 1,
        };
        let reads = kept.len() + 2 * checked;
        work.push(reads);
        match failed {
            None => kept.push(x),
            Some(w) => {
                kept.retain(|&k| k != star && k != w);
                certificate.push(Witness::Triple {
                    points: [x, star, w],
                    slack: 0.0,
                });
            }
        }
    }
    let mut result = OutlierResult::from_certificate(n, certificate);
    result.work = work;
    result
}
