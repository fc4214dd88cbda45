//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line.
//!
//! Lines go straight to stdout, so they appear in a plain `cargo test` run.
//! Tests share a lock so timings are not disturbed.

use std::collections::BTreeSet;
use std::io::Write;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use outlier_embed::bicriteria::{
    bicriteria_euclidean, bicriteria_tree, bicriteria_ultrametric, ceil_log2,
    fkw_optimal_ultrametric, BicriteriaParams,
};
use outlier_embed::euclidean::{outliers_euclidean, EmbedTolerance};
use outlier_embed::instances::{
    planted_instance, vc_euclidean_instance, vc_tree_instance, vc_ultrametric_instance,
    PlantedKind, SimpleGraph,
};
use outlier_embed::metric::{four_point_ok, linf_gap, restrict, DistanceMatrix, ToleranceConfig};
use outlier_embed::oracle::{
    exact_min_outliers, exact_min_vertex_cover, verify_certificate, OracleBudget, Target,
};
use outlier_embed::outliers::OutlierResult;
use outlier_embed::tree_outliers::outliers_tree_fast;
use outlier_embed::ultrametric::outliers_ultrametric_fast;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static LOCK: Mutex<()> = Mutex::new(());

/// Writes straight to stdout so the line shows up without `--nocapture`.
fn report(id: u32, name: &str, outcome: Result<String, String>) {
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    let mut out = std::io::stdout().lock();
    writeln!(out, "{tag} criterion {id} ({name}): {detail}").unwrap();
    out.flush().unwrap();
    if let Err(detail) = outcome {
        panic!("criterion {id} failed: {detail}");
    }
}

fn guard() -> std::sync::MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

/// One representative per isomorphism class of graphs on `n` vertices.
fn nonisomorphic_graphs(n: usize) -> Vec<SimpleGraph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
    let perms = permutations(n);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        let canon = perms
            .iter()
            .map(|p| {
                let mut e: Vec<(usize, usize)> = edges
                    .iter()
                    .map(|&(a, b)| (p[a].min(p[b]), p[a].max(p[b])))
                    .collect();
                e.sort_unstable();
                e
            })
            .min()
            .unwrap();
        if seen.insert(canon) {
            out.push(SimpleGraph::new(n, &edges).unwrap());
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn random_metric(n: usize, rng: &mut ChaCha8Rng) -> DistanceMatrix {
    // entries in [1, 2] always satisfy the triangle inequality
    let labels = (0..n).map(|i| format!("r{i}")).collect();
    DistanceMatrix::from_fn(labels, |_, _| rng.random_range(1.0..=2.0)).unwrap()
}

#[test]
fn criterion_01_reduction_equality() {
    let _g = guard();
    let start = Instant::now();
    let budget = OracleBudget::with_max_n(15);
    let mut graphs = 0;
    let mut failures = Vec::new();
    for n in 1..=5 {
        for g in nonisomorphic_graphs(n) {
            graphs += 1;
            let vc = exact_min_vertex_cover(&g).unwrap().len();
            let cases = [
                ("tree", vc_tree_instance(&g, 0.1).unwrap(), Target::Tree),
                (
                    "ultrametric",
                    vc_ultrametric_instance(&g, 0.1).unwrap(),
                    Target::Ultrametric,
                ),
                (
                    "euclidean",
                    vc_euclidean_instance(&g, 0.1).unwrap(),
                    Target::Euclidean(2),
                ),
            ];
            for (kind, m, target) in cases {
                let opt = exact_min_outliers(&m, target, &budget).unwrap().len();
                if opt != vc {
                    failures.push(format!("{kind} on {:?}: {opt} vs {vc}", g.edges()));
                }
            }
        }
    }
    let outcome = if graphs != 52 {
        Err(format!("enumerated {graphs} graphs, expected 52"))
    } else if failures.is_empty() {
        Ok(format!(
            "{graphs} graphs x 3 constructions, all equal, {:.1}s",
            start.elapsed().as_secs_f64()
        ))
    } else {
        Err(failures.join("; "))
    };
    report(1, "reduction equality", outcome);
}

/// Instances for the ratio sweep: reductions plus planted and random ones.
fn ratio_instances(kind: &str) -> Vec<DistanceMatrix> {
    let mut out = Vec::new();
    let max_vertices = match kind {
        "ultrametric" => 5,
        "tree" => 4,
        _ => 3,
    };
    for n in 1..=max_vertices {
        for g in nonisomorphic_graphs(n) {
            out.push(match kind {
                "ultrametric" => vc_ultrametric_instance(&g, 0.1).unwrap(),
                "tree" => vc_tree_instance(&g, 0.1).unwrap(),
                _ => vc_euclidean_instance(&g, 0.1).unwrap(),
            });
        }
    }
    let planted_kind = match kind {
        "ultrametric" => PlantedKind::Ultrametric,
        "tree" => PlantedKind::Tree,
        _ => PlantedKind::Euclidean { d: 2 },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut seed = 0u64;
    while out.len() < 200 {
        seed += 1;
        let n = rng.random_range(4..=10);
        let k = rng.random_range(0..=3.min(n - 1));
        let eps = [0.0, 0.0, 0.01, 0.05][rng.random_range(0..4)];
        out.push(
            planted_instance(planted_kind, n, k, eps, seed)
                .unwrap()
                .matrix,
        );
        if seed.is_multiple_of(5) {
            out.push(random_metric(rng.random_range(3..=9), &mut rng));
        }
    }
    out
}

#[test]
fn criterion_02_approximation_ratios() {
    let _g = guard();
    let tol = ToleranceConfig::default();
    let budget = OracleBudget::with_max_n(10);
    let mut count = 0;
    let mut worst = [0.0f64; 3];
    let mut failures = Vec::new();
    for (slot, kind, factor) in [(0, "ultrametric", 3), (1, "tree", 4), (2, "euclidean", 2)] {
        for m in ratio_instances(kind) {
            count += 1;
            let (found, target) = match kind {
                "ultrametric" => (outliers_ultrametric_fast(&m, &tol), Target::Ultrametric),
                "tree" => (outliers_tree_fast(&m, &tol).0, Target::Tree),
                _ => (
                    outliers_euclidean(&m, 2, &EmbedTolerance::default()).result,
                    Target::Euclidean(2),
                ),
            };
            let opt = exact_min_outliers(&m, target, &budget).unwrap().len();
            let got = found.outliers.len();
            if got > factor * opt {
                failures.push(format!("{kind} n={}: {got} > {factor}x{opt}", m.len()));
            }
            if opt > 0 {
                worst[slot] = worst[slot].max(got as f64 / opt as f64);
            }
        }
    }
    let outcome = if count < 500 {
        Err(format!("only {count} instances"))
    } else if failures.is_empty() {
        Ok(format!(
            "{count} instances, worst ratios ultrametric {:.2}, tree {:.2}, euclidean {:.2}",
            worst[0], worst[1], worst[2]
        ))
    } else {
        Err(failures.join("; "))
    };
    report(2, "approximation ratios", outcome);
}

#[test]
fn criterion_03_certificate_soundness() {
    let _g = guard();
    let tol = ToleranceConfig::default();
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut check = |name: &str, m: &DistanceMatrix, r: &OutlierResult| {
        checked += 1;
        if !verify_certificate(m, r) {
            failures.push(format!("{name} on n={}", m.len()));
        }
    };
    for kind in ["ultrametric", "tree", "euclidean"] {
        for m in ratio_instances(kind) {
            check("ultrametric fast", &m, &outliers_ultrametric_fast(&m, &tol));
            check(
                "ultrametric cubic",
                &m,
                &outlier_embed::ultrametric::outliers_ultrametric_cubic(&m, &tol),
            );
            check("tree fast", &m, &outliers_tree_fast(&m, &tol).0);
            check(
                "tree quartic",
                &m,
                &outlier_embed::tree_outliers::outliers_tree_quartic(&m, &tol),
            );
            if m.len() <= 10 {
                let e = outliers_euclidean(&m, 2, &EmbedTolerance::default());
                check("euclidean", &m, &e.result);
            }
            let p = BicriteriaParams::new(0.05);
            check(
                "bicriteria ultrametric",
                &m,
                &bicriteria_ultrametric(&m, &p, &tol).unwrap().result,
            );
            check(
                "bicriteria tree",
                &m,
                &bicriteria_tree(&m, &p, &tol).unwrap().result,
            );
        }
    }
    for seed in 0..6 {
        let inst = planted_instance(PlantedKind::Euclidean { d: 2 }, 7, 1, 0.05, seed).unwrap();
        let mut p = BicriteriaParams::new(0.05);
        p.d = Some(2);
        let fit = bicriteria_euclidean(&inst.matrix, &p).unwrap();
        check("bicriteria euclidean", &inst.matrix, &fit.result);
    }
    let outcome = if failures.is_empty() {
        Ok(format!("{checked} results verified"))
    } else {
        Err(format!(
            "{} of {checked} failed: {}",
            failures.len(),
            failures.join("; ")
        ))
    };
    report(3, "certificate soundness", outcome);
}

#[test]
fn criterion_04_exactness_on_members() {
    let _g = guard();
    let tol = ToleranceConfig::default();
    let mut msgs = Vec::new();
    let mut failures = Vec::new();

    let u = planted_instance(PlantedKind::Ultrametric, 500, 0, 0.0, 11)
        .unwrap()
        .matrix;
    let r = outliers_ultrametric_fast(&u, &tol);
    let fit = bicriteria_ultrametric(&u, &BicriteriaParams::new(0.0), &tol).unwrap();
    let err = fit.distortion / u.diameter();
    msgs.push(format!(
        "ultrametric n=500 outliers {} err {err:.1e}",
        r.outliers.len()
    ));
    if !r.outliers.is_empty() || err > 1e-7 {
        failures.push("ultrametric".to_string());
    }

    let t = planted_instance(PlantedKind::Tree, 500, 0, 0.0, 12)
        .unwrap()
        .matrix;
    let (r, tree) = outliers_tree_fast(&t, &tol);
    let err = linf_gap(&tree.induced_metric().unwrap(), &t).unwrap() / t.diameter();
    msgs.push(format!(
        "tree n=500 outliers {} err {err:.1e}",
        r.outliers.len()
    ));
    if !r.outliers.is_empty() || err > 1e-7 {
        failures.push("tree".to_string());
    }

    let e = planted_instance(PlantedKind::Euclidean { d: 2 }, 30, 0, 0.0, 13)
        .unwrap()
        .matrix;
    let fit = outliers_euclidean(&e, 2, &EmbedTolerance::default());
    let rebuilt = DistanceMatrix::from_points(e.labels().to_vec(), &fit.coordinates).unwrap();
    let err = linf_gap(&rebuilt, &e).unwrap() / e.diameter();
    msgs.push(format!(
        "planar n=30 outliers {} err {err:.1e}",
        fit.result.outliers.len()
    ));
    if !fit.result.outliers.is_empty() || err > 1e-7 {
        failures.push("euclidean".to_string());
    }

    let outcome = if failures.is_empty() {
        Ok(msgs.join(", "))
    } else {
        Err(format!("{} ({})", failures.join(", "), msgs.join(", ")))
    };
    report(4, "exactness on members", outcome);
}

/// Subdominant ultrametric by minimax paths (Floyd–Warshall).
fn minimax_closure(m: &DistanceMatrix) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut u: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| m.get(i, j)).collect())
        .collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = u[i][k].max(u[k][j]);
                if via < u[i][j] {
                    u[i][j] = via;
                }
            }
        }
    }
    u
}

fn linf_error(m: &DistanceMatrix, u: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut e = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            e = e.max((u[i][j] - m.get(i, j)).abs());
        }
    }
    e
}

/// Random ultrametric: random agglomeration order with random increasing
/// heights drawn from `[lo, hi]`.
fn random_candidate(n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut u = vec![vec![0.0; n]; n];
    let mut heights: Vec<f64> = (1..n).map(|_| rng.random_range(lo..=hi)).collect();
    heights.sort_by(f64::total_cmp);
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for h in heights {
        let a = clusters.swap_remove(rng.random_range(0..clusters.len()));
        let b = rng.random_range(0..clusters.len());
        for &p in &a {
            for &q in &clusters[b] {
                u[p][q] = h;
                u[q][p] = h;
            }
        }
        clusters[b].extend(a);
    }
    u
}

/// The optimum with every entry jittered, then re-closed into an ultrametric.
fn jittered_candidate(opt: &[Vec<f64>], scale: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = opt.len();
    let mut u = opt.to_vec();
    for i in 0..n {
        for j in 0..i {
            let v = u[i][j] + rng.random_range(-scale..=scale);
            u[i][j] = v.max(1e-6);
            u[j][i] = u[i][j];
        }
    }
    let labels = (0..n).map(|i| i.to_string()).collect();
    let m = DistanceMatrix::from_fn(labels, |i, j| u[i][j]).unwrap();
    minimax_closure(&m)
}

#[test]
fn criterion_05_fkw_optimality() {
    let _g = guard();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    let mut candidates = 0usize;
    let mut tightest = f64::INFINITY;
    for _ in 0..50 {
        let n = rng.random_range(3..=12);
        let m = random_metric(n, &mut rng);
        let diam = m.diameter();
        let sub = minimax_closure(&m);
        let beta = linf_error(&m, &sub);
        let (dendro, err) = fkw_optimal_ultrametric(&m).unwrap();
        let achieved = linf_gap(&dendro.cophenetic().unwrap(), &m).unwrap();
        if (achieved - beta / 2.0).abs() > 1e-9 * diam || (err - beta / 2.0).abs() > 1e-9 * diam {
            failures.push(format!(
                "n={n}: achieved {achieved} vs beta/2 {}",
                beta / 2.0
            ));
        }
        let opt: Vec<Vec<f64>> = sub
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, &v)| if i == j { 0.0 } else { v + beta / 2.0 })
                    .collect()
            })
            .collect();
        for c in 0..2000 {
            let cand = match c % 4 {
                0 => random_candidate(n, 0.5, 2.5, &mut rng),
                1 => random_candidate(n, 1.0, 2.0, &mut rng),
                2 => jittered_candidate(&opt, beta / 4.0, &mut rng),
                _ => jittered_candidate(&opt, beta / 50.0, &mut rng),
            };
            candidates += 1;
            let e = linf_error(&m, &cand);
            tightest = tightest.min(e - achieved);
            if e < achieved - 1e-9 * diam {
                failures.push(format!("candidate beats optimum: {e} < {achieved}"));
            }
        }
    }
    let outcome = if failures.is_empty() {
        Ok(format!(
            "50 metrics, {candidates} candidates, smallest excess over optimum {tightest:.2e}"
        ))
    } else {
        Err(failures.join("; "))
    };
    report(5, "FKW optimality", outcome);
}

#[test]
fn criterion_06_bicriteria_ultrametric() {
    let _g = guard();
    let tol = ToleranceConfig::default();
    let mut failures = Vec::new();
    let mut runs = 0;
    let mut worst_ratio = 0.0f64;
    for &n in &[16usize, 64, 256] {
        for &eps in &[0.01, 0.05, 0.1] {
            for &k in &[1usize, n / 16, n / 8] {
                for seed in 0..2u64 {
                    runs += 1;
                    let inst =
                        planted_instance(PlantedKind::Ultrametric, n, k, eps, 600 + seed).unwrap();
                    let m = &inst.matrix;
                    let fit = bicriteria_ultrametric(m, &BicriteriaParams::new(eps), &tol).unwrap();
                    let bound = 2.0 * eps * m.diameter() * ceil_log2(n) as f64;
                    if fit.distortion > bound {
                        failures.push(format!(
                            "n={n} eps={eps} k={k}: distortion {} > {bound}",
                            fit.distortion
                        ));
                    }
                    if fit.result.outliers.len() > 3 * k {
                        failures.push(format!(
                            "n={n} eps={eps} k={k}: {} outliers",
                            fit.result.outliers.len()
                        ));
                    }
                    if !verify_certificate(m, &fit.result) {
                        failures.push(format!("n={n} eps={eps} k={k}: certificate"));
                    }
                    worst_ratio = worst_ratio.max(fit.distortion / bound);
                }
            }
        }
    }
    let outcome = if failures.is_empty() {
        Ok(format!(
            "{runs} planted instances, max distortion/bound {worst_ratio:.3}"
        ))
    } else {
        Err(failures.join("; "))
    };
    report(6, "bi-criteria ultrametric", outcome);
}

#[test]
fn criterion_07_bicriteria_tree() {
    let _g = guard();
    let tol = ToleranceConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    let mut runs = 0;
    let mut constant = 0.0f64;
    for &n in &[16usize, 32, 64] {
        for &eps in &[0.01, 0.05, 0.1] {
            for &k in &[1usize, n / 8] {
                runs += 1;
                let inst = planted_instance(PlantedKind::Tree, n, k, eps, 700 + n as u64).unwrap();
                let m = &inst.matrix;
                let fit = bicriteria_tree(m, &BicriteriaParams::new(eps), &tol).unwrap();
                let induced = fit.embedding.induced_metric().unwrap();
                let kept = induced.len();
                if kept >= 4 {
                    let eta = induced.eta(&tol);
                    for _ in 0..10_000 {
                        let mut q = [0usize; 4];
                        loop {
                            for slot in q.iter_mut() {
                                *slot = rng.random_range(0..kept);
                            }
                            let mut s = q;
                            s.sort_unstable();
                            if s.windows(2).all(|w| w[0] != w[1]) {
                                break;
                            }
                        }
                        if !four_point_ok(&induced, q[0], q[1], q[2], q[3], 0.0, eta) {
                            failures.push(format!("n={n} eps={eps}: four-point failure {q:?}"));
                            break;
                        }
                    }
                }
                let scale = eps * m.diameter() * ceil_log2(n) as f64;
                let sub = restrict(m, &fit.result.kept).unwrap();
                let distortion = linf_gap(&induced, &sub).unwrap();
                if distortion > 8.0 * scale {
                    failures.push(format!("n={n} eps={eps} k={k}: distortion {distortion}"));
                }
                if fit.result.outliers.len() > 4 * k {
                    failures.push(format!(
                        "n={n} eps={eps} k={k}: {} outliers",
                        fit.result.outliers.len()
                    ));
                }
                constant = constant.max(distortion / scale);
            }
        }
    }
    let outcome = if failures.is_empty() {
        Ok(format!(
            "{runs} planted instances, measured constant distortion/(eps*diam*ceil(log2 n)) = {constant:.3}"
        ))
    } else {
        Err(failures.join("; "))
    };
    report(7, "bi-criteria tree", outcome);
}

#[test]
fn criterion_08_bicriteria_euclidean() {
    let _g = guard();
    let mut failures = Vec::new();
    let mut runs = 0;
    let mut slowest = Duration::ZERO;
    for &eps in &[0.05, 0.1] {
        for &n in &[6usize, 8] {
            for &k in &[1usize, 2] {
                runs += 1;
                let inst =
                    planted_instance(PlantedKind::Euclidean { d: 2 }, n, k, eps, 800 + n as u64)
                        .unwrap();
                let m = &inst.matrix;
                let mut p = BicriteriaParams::new(eps);
                p.d = Some(2);
                let start = Instant::now();
                let fit = bicriteria_euclidean(m, &p).unwrap();
                let took = start.elapsed();
                slowest = slowest.max(took);
                let diam = m.diameter();
                let budget = p.c_d * eps.sqrt() * diam + eps * diam;
                let kept = &fit.result.kept;
                for a in 0..kept.len() {
                    for b in 0..a {
                        let e = outlier_embed_distance(&fit.coordinates[a], &fit.coordinates[b]);
                        if (e - m.get(kept[a], kept[b])).abs() > budget {
                            failures.push(format!("eps={eps} n={n}: pair ({a},{b})"));
                        }
                    }
                }
                if fit.result.outliers.len() > 2 * k {
                    failures.push(format!(
                        "eps={eps} n={n} k={k}: {} outliers",
                        fit.result.outliers.len()
                    ));
                }
                if took > Duration::from_secs(600) {
                    failures.push(format!("eps={eps} n={n}: {took:?}"));
                }
                if !verify_certificate(m, &fit.result) {
                    failures.push(format!("eps={eps} n={n}: certificate"));
                }
            }
        }
    }
    let outcome = if failures.is_empty() {
        Ok(format!(
            "{runs} planted instances, slowest {:.2}s",
            slowest.as_secs_f64()
        ))
    } else {
        Err(failures.join("; "))
    };
    report(8, "bi-criteria Euclidean", outcome);
}

fn outlier_embed_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Per-run wall time: runs are batched so that one batch lasts at least
/// `min_batch` seconds, sizes are interleaved across rounds, and the fastest
/// batch per size is kept.
fn interleaved_times(
    jobs: &mut [Box<dyn FnMut() + '_>],
    rounds: usize,
    min_batch: f64,
) -> Vec<f64> {
    let mut reps = Vec::with_capacity(jobs.len());
    for job in jobs.iter_mut() {
        let mut r = 1usize;
        loop {
            let t = Instant::now();
            for _ in 0..r {
                job();
            }
            if t.elapsed().as_secs_f64() >= min_batch {
                break;
            }
            r *= 2;
        }
        reps.push(r);
    }
    let mut best = vec![f64::INFINITY; jobs.len()];
    for _ in 0..rounds {
        for (i, job) in jobs.iter_mut().enumerate() {
            let t = Instant::now();
            for _ in 0..reps[i] {
                job();
            }
            best[i] = best[i].min(t.elapsed().as_secs_f64() / reps[i] as f64);
        }
    }
    best
}

#[test]
fn criterion_09_quadratic_time() {
    let _g = guard();
    let tol = ToleranceConfig::default();
    let sizes = [256usize, 512, 1024];
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    for kind in ["ultrametric", "tree"] {
        let planted = match kind {
            "ultrametric" => PlantedKind::Ultrametric,
            _ => PlantedKind::Tree,
        };
        let inputs: Vec<DistanceMatrix> = sizes
            .iter()
            .map(|&n| {
                planted_instance(planted, n, 0, 0.0, 900 + n as u64)
                    .unwrap()
                    .matrix
            })
            .collect();
        let mut c = 0.0f64;
        for m in &inputs {
            let work = match kind {
                "ultrametric" => outliers_ultrametric_fast(m, &tol).work,
                _ => outliers_tree_fast(m, &tol).0.work,
            };
            for (i, &w) in work.iter().enumerate() {
                c = c.max(w as f64 / (i.max(1)) as f64);
            }
        }
        let mut jobs: Vec<Box<dyn FnMut() + '_>> = inputs
            .iter()
            .map(|m| -> Box<dyn FnMut() + '_> {
                match kind {
                    "ultrametric" => Box::new(move || {
                        std::hint::black_box(outliers_ultrametric_fast(m, &tol));
                    }),
                    _ => Box::new(move || {
                        std::hint::black_box(outliers_tree_fast(m, &tol));
                    }),
                }
            })
            .collect();
        let times = interleaved_times(&mut jobs, 7, 0.04);
        let ratios = [times[1] / times[0], times[2] / times[1]];
        notes.push(format!(
            "{kind} times {:.2}/{:.2}/{:.2} ms, ratios {:.2}, {:.2}, work constant c = {c:.1}",
            times[0] * 1e3,
            times[1] * 1e3,
            times[2] * 1e3,
            ratios[0],
            ratios[1]
        ));
        if ratios.iter().any(|r| !(3.0..=5.5).contains(r)) {
            failures.push(format!("{kind} time ratios {ratios:?}"));
        }
    }
    let outcome = if failures.is_empty() {
        Ok(notes.join("; "))
    } else {
        Err(format!("{} ({})", failures.join("; "), notes.join("; ")))
    };
    report(9, "quadratic time", outcome);
}

#[test]
fn criterion_10_determinism() {
    let _g = guard();
    let dir = tempfile::tempdir().unwrap();
    let exe = env!("CARGO_BIN_EXE_outlier-embed");
    let run = |args: &[&str]| {
        let out = Command::new(exe)
            .args(args)
            .current_dir(dir.path())
            .output()
            .unwrap();
        (out.status.code(), out.stdout, out.stderr)
    };
    let setup: [&[&str]; 4] = [
        &[
            "gen",
            "planted",
            "--kind",
            "tree",
            "-n",
            "24",
            "-k",
            "2",
            "--epsilon",
            "0.05",
            "--seed",
            "3",
            "-o",
            "t.csv",
        ],
        &[
            "gen",
            "planted",
            "--kind",
            "euclidean",
            "--dim",
            "2",
            "-n",
            "7",
            "-k",
            "1",
            "--epsilon",
            "0.05",
            "--seed",
            "4",
            "-o",
            "e.csv",
        ],
        &[
            "gen",
            "vc-ultrametric",
            "--complete",
            "4",
            "--nu",
            "0.1",
            "-o",
            "u.csv",
        ],
        &[
            "gen",
            "planted",
            "--kind",
            "ultrametric",
            "-n",
            "20",
            "-k",
            "2",
            "--epsilon",
            "0.05",
            "--seed",
            "5",
            "-o",
            "p.csv",
        ],
    ];
    let mut failures = Vec::new();
    for args in setup {
        let (code, _, err) = run(args);
        if code != Some(0) {
            failures.push(format!(
                "{args:?} exited {code:?}: {}",
                String::from_utf8_lossy(&err)
            ));
        }
    }
    let commands: Vec<Vec<&str>> = vec![
        vec!["embed", "--target", "tree", "-i", "t.csv"],
        vec![
            "embed",
            "--target",
            "tree",
            "--algorithm",
            "naive",
            "-i",
            "t.csv",
        ],
        vec!["embed", "--target", "ultrametric", "-i", "u.csv"],
        vec![
            "embed",
            "--target",
            "euclidean",
            "--dim",
            "2",
            "-i",
            "e.csv",
        ],
        vec![
            "bicriteria",
            "--target",
            "ultrametric",
            "--epsilon",
            "0.05",
            "-i",
            "p.csv",
        ],
        vec![
            "bicriteria",
            "--target",
            "tree",
            "--epsilon",
            "0.05",
            "-i",
            "t.csv",
        ],
        vec![
            "bicriteria",
            "--target",
            "euclidean",
            "--dim",
            "2",
            "--epsilon",
            "0.1",
            "-i",
            "e.csv",
        ],
        vec!["exact", "--target", "ultrametric", "-i", "u.csv"],
        vec!["validate", "-i", "t.csv"],
        vec![
            "embed",
            "--target",
            "ultrametric",
            "-i",
            "p.csv",
            "--shuffle-seed",
            "9",
        ],
    ];
    for args in &commands {
        let outputs: Vec<_> = (0..3).map(|_| run(args)).collect();
        if outputs[0].0 != Some(0) {
            failures.push(format!(
                "{args:?} exited {:?}: {}",
                outputs[0].0,
                String::from_utf8_lossy(&outputs[0].2)
            ));
        } else if outputs.iter().any(|o| o.1 != outputs[0].1) {
            failures.push(format!("{args:?} output differs between runs"));
        }
    }
    let outcome = if failures.is_empty() {
        Ok(format!(
            "{} commands x 3 runs byte-identical",
            commands.len()
        ))
    } else {
        Err(failures.join("; "))
    };
    report(10, "determinism", outcome);
}
