use outlier_embed::bicriteria::{
    bicriteria_ultrametric, gromov_tree, min_eccentricity_point, subdominant_ultrametric,
    BicriteriaParams,
};
use outlier_embed::euclidean::{
    embedding_report, outliers_euclidean, vertex_cover_2approx, ConflictGraph, EmbedTolerance,
};
use outlier_embed::instances::{
    planted_instance, vc_euclidean_instance, vc_tree_instance, vc_ultrametric_instance,
    PlantedKind, SimpleGraph,
};
use outlier_embed::metric::{
    four_point_defect, four_point_ok, linf_gap, restrict, ultrametric_triple_ok, validate_metric,
};
use outlier_embed::oracle::{
    exact_min_outliers, exact_min_vertex_cover, verify_certificate, OracleBudget, Target,
};
use outlier_embed::tree_outliers::outliers_tree_fast;
use outlier_embed::ultrametric::{outliers_ultrametric_cubic, outliers_ultrametric_fast};
use outlier_embed::{DistanceMatrix, ToleranceConfig};
use proptest::prelude::*;
use proptest::sample::subsequence;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}")).collect()
}

/// Any symmetric matrix with off-diagonal entries in `[1, 2]` is a metric.
fn metric(max_n: usize) -> impl Strategy<Value = DistanceMatrix> {
    (2..=max_n).prop_flat_map(|n| {
        prop::collection::vec(1.0f64..=2.0, n * (n - 1) / 2).prop_map(move |v| {
            DistanceMatrix::from_fn(names(n), |i, j| v[i * (i - 1) / 2 + j]).unwrap()
        })
    })
}

fn permuted(m: &DistanceMatrix, perm: &[usize]) -> DistanceMatrix {
    let labels = perm.iter().map(|&p| m.label(p).to_owned()).collect();
    DistanceMatrix::from_fn(labels, |i, j| m.get(perm[i], perm[j])).unwrap()
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

fn planted(kind: PlantedKind, n: usize, k: usize, eps: f64, seed: u64) -> DistanceMatrix {
    planted_instance(kind, n, k, eps, seed).unwrap().matrix
}

fn graph(max_n: usize) -> impl Strategy<Value = SimpleGraph> {
    (1..=max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect();
        let len = pairs.len();
        subsequence(pairs, 0..=len).prop_map(move |e| SimpleGraph::new(n, &e).unwrap())
    })
}

fn tol() -> ToleranceConfig {
    ToleranceConfig::default()
}

fn kept_is_ultrametric(m: &DistanceMatrix, kept: &[usize]) -> bool {
    let eta = m.eta(&tol());
    kept.iter().enumerate().all(|(a, &i)| {
        kept[a + 1..].iter().enumerate().all(|(b, &j)| {
            kept[a + b + 2..]
                .iter()
                .all(|&k| ultrametric_triple_ok(m, i, j, k, 0.0, eta))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn predicates_are_permutation_invariant(
        (m, perm) in metric(7).prop_flat_map(|m| { let n = m.len(); (Just(m), permutation(n)) })
    ) {
        let p = permuted(&m, &perm);
        let t = tol();
        let eta = m.eta(&t);
        prop_assert_eq!(validate_metric(&m, &t).ok, validate_metric(&p, &t).ok);
        let n = m.len();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i == j || j == k || i == k {
                        continue;
                    }
                    prop_assert_eq!(
                        ultrametric_triple_ok(&p, i, j, k, 0.0, eta),
                        ultrametric_triple_ok(&m, perm[i], perm[j], perm[k], 0.0, eta)
                    );
                    for l in (0..n).filter(|&l| l != i && l != j && l != k) {
                        prop_assert_eq!(
                            four_point_ok(&p, i, j, k, l, 0.0, eta),
                            four_point_ok(&m, perm[i], perm[j], perm[k], perm[l], 0.0, eta)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn ultrametrics_are_tree_metrics(n in 4usize..12, seed in any::<u64>()) {
        let m = planted(PlantedKind::Ultrametric, n, 0, 0.0, seed);
        let eta = m.eta(&tol());
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    prop_assert!(ultrametric_triple_ok(&m, i, j, k, 0.0, eta));
                    for l in k + 1..n {
                        prop_assert!(four_point_ok(&m, i, j, k, l, 0.0, eta));
                    }
                }
            }
        }
    }

    #[test]
    fn linf_gap_is_a_pseudometric(
        (a, b, c) in (2usize..7).prop_flat_map(|n| {
            let v = || prop::collection::vec(1.0f64..=2.0, n * (n - 1) / 2)
                .prop_map(move |v| DistanceMatrix::from_fn(names(n), |i, j| v[i * (i - 1) / 2 + j]).unwrap());
            (v(), v(), v())
        })
    ) {
        let ab = linf_gap(&a, &b).unwrap();
        prop_assert_eq!(ab, linf_gap(&b, &a).unwrap());
        prop_assert_eq!(linf_gap(&a, &a).unwrap(), 0.0);
        prop_assert!(linf_gap(&a, &c).unwrap() <= ab + linf_gap(&b, &c).unwrap());
    }

    #[test]
    fn restrict_composes(
        (m, first, second) in metric(8).prop_flat_map(|m| {
            let n = m.len();
            let all: Vec<usize> = (0..n).collect();
            (Just(m), subsequence(all.clone(), 1..=n), subsequence(all, 1..=n))
        })
    ) {
        let inner: Vec<usize> = first.iter().enumerate()
            .filter(|(_, p)| second.contains(p))
            .map(|(pos, _)| pos)
            .collect();
        prop_assume!(!inner.is_empty());
        let both: Vec<usize> = first.iter().copied().filter(|p| second.contains(p)).collect();
        let twice = restrict(&restrict(&m, &first).unwrap(), &inner).unwrap();
        prop_assert_eq!(twice, restrict(&m, &both).unwrap());
    }

    #[test]
    fn generated_instances_are_metrics(g in graph(7), nu in 0.001f64..0.499) {
        let t = tol();
        prop_assert!(validate_metric(&vc_tree_instance(&g, nu).unwrap(), &t).ok);
        prop_assert!(validate_metric(&vc_ultrametric_instance(&g, nu).unwrap(), &t).ok);
        prop_assert!(validate_metric(&vc_euclidean_instance(&g, nu).unwrap(), &t).ok);
    }

    #[test]
    fn planted_instances_are_metrics_and_deterministic(
        n in 3usize..30, k in 0usize..3, eps in 0.0f64..0.2, seed in any::<u64>(), kind in 0usize..3
    ) {
        let kind = [PlantedKind::Ultrametric, PlantedKind::Tree, PlantedKind::Euclidean { d: 2 }][kind];
        let a = planted_instance(kind, n, k, eps, seed).unwrap();
        prop_assert!(validate_metric(&a.matrix, &tol()).ok);
        prop_assert_eq!(a.witness.len(), k);
        prop_assert!(a.witness.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(a, planted_instance(kind, n, k, eps, seed).unwrap());
    }

    #[test]
    fn clean_planted_instances_are_members(n in 2usize..40, seed in any::<u64>()) {
        let t = tol();
        prop_assert!(outliers_ultrametric_fast(&planted(PlantedKind::Ultrametric, n, 0, 0.0, seed), &t)
            .outliers.is_empty());
        prop_assert!(outliers_tree_fast(&planted(PlantedKind::Tree, n, 0, 0.0, seed), &t)
            .0.outliers.is_empty());
    }

    #[test]
    fn ultrametric_outliers_are_sound(m in metric(9)) {
        let t = tol();
        for r in [outliers_ultrametric_fast(&m, &t), outliers_ultrametric_cubic(&m, &t)] {
            prop_assert!(verify_certificate(&m, &r));
            prop_assert!(kept_is_ultrametric(&m, &r.kept));
            let opt = exact_min_outliers(&m, Target::Ultrametric, &OracleBudget::default()).unwrap();
            prop_assert!(r.outliers.len() <= 3 * opt.len());
            prop_assert_eq!(r.outliers.is_empty(), opt.is_empty());
        }
    }

    #[test]
    fn tree_outliers_are_sound(m in metric(8)) {
        let t = tol();
        let (r, tree) = outliers_tree_fast(&m, &t);
        prop_assert!(verify_certificate(&m, &r));
        prop_assume!(!r.kept.is_empty());
        let induced = tree.induced_metric().unwrap();
        let kept = restrict(&m, &r.kept).unwrap();
        prop_assert!(linf_gap(&induced, &kept).unwrap() <= m.eta(&t));
        let opt = exact_min_outliers(&m, Target::Tree, &OracleBudget::default()).unwrap();
        prop_assert!(r.outliers.len() <= 4 * opt.len());
    }

    #[test]
    fn tree_label_removal_preserves_distances(
        (n, seed, drop) in (3usize..20).prop_flat_map(|n| {
            (Just(n), any::<u64>(), subsequence((0..n).collect::<Vec<_>>(), 0..n - 1))
        })
    ) {
        let t = tol();
        let m = planted(PlantedKind::Tree, n, 0, 0.0, seed);
        let (r, mut tree) = outliers_tree_fast(&m, &t);
        prop_assert!(r.outliers.is_empty());
        prop_assert!(tree.vertex_count() <= (2 * n).saturating_sub(2).max(1));
        let before = tree.induced_metric().unwrap();
        tree.remove_labels(&drop).unwrap();
        let survivors: Vec<usize> = (0..n).filter(|p| !drop.contains(p)).collect();
        prop_assert_eq!(tree.labels(), survivors.clone());
        let after = tree.induced_metric().unwrap();
        prop_assert!(linf_gap(&after, &restrict(&before, &survivors).unwrap()).unwrap() <= m.eta(&t));
        let l = survivors.len();
        prop_assert!(tree.vertex_count() <= (2 * l).saturating_sub(2).max(1));
        for v in tree.vertices() {
            if tree.label_of(v).is_none() {
                prop_assert!(tree.degree(v) >= 3);
            }
        }
    }

    #[test]
    fn euclidean_kept_set_embeds(
        n in 4usize..8, seed in any::<u64>(), k in 0usize..2
    ) {
        let e = EmbedTolerance::default();
        let m = planted(PlantedKind::Euclidean { d: 2 }, n, k, 0.0, seed);
        let fit = outliers_euclidean(&m, 2, &e);
        prop_assert!(verify_certificate(&m, &fit.result));
        let kept = restrict(&m, &fit.result.kept).unwrap();
        let report = embedding_report(&kept, 2, &e);
        prop_assert!(report.embeddable);
        let opt = exact_min_outliers(&m, Target::Euclidean(2), &OracleBudget::default()).unwrap();
        prop_assert!(fit.result.outliers.len() <= 2 * opt.len());
    }

    #[test]
    fn euclidean_fit_ignores_rigid_motions(
        pts in prop::collection::vec(prop::array::uniform2(-1.0f64..1.0), 4..7),
        angle in 0.0f64..std::f64::consts::TAU,
        shift in prop::array::uniform2(-5.0f64..5.0),
    ) {
        let raw: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
        let (s, c) = angle.sin_cos();
        let moved: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| vec![c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1]])
            .collect();
        let a = DistanceMatrix::from_points(names(raw.len()), &raw);
        prop_assume!(a.is_ok());
        let b = DistanceMatrix::from_points(names(raw.len()), &moved).unwrap();
        let e = EmbedTolerance::default();
        let (fa, fb) = (outliers_euclidean(&a.unwrap(), 1, &e), outliers_euclidean(&b, 1, &e));
        prop_assert_eq!(fa.result.outliers, fb.result.outliers);
    }

    #[test]
    fn matching_cover_is_a_two_approximation(g in graph(12)) {
        let cg = ConflictGraph {
            nodes: (0..g.vertex_count()).collect(),
            edges: g.edges().to_vec(),
        };
        let cover = vertex_cover_2approx(&cg);
        prop_assert!(g.is_cover(&cover));
        prop_assert!(cover.len() <= 2 * exact_min_vertex_cover(&g).unwrap().len());
    }

    #[test]
    fn oracle_feasibility_is_monotone(
        (m, extra) in metric(8).prop_flat_map(|m| { let n = m.len(); (Just(m), 0..n) })
    ) {
        let opt = exact_min_outliers(&m, Target::Ultrametric, &OracleBudget::default()).unwrap();
        let mut bigger = opt.clone();
        if !bigger.contains(&extra) {
            bigger.push(extra);
        }
        let kept: Vec<usize> = (0..m.len()).filter(|p| !bigger.contains(p)).collect();
        prop_assert!(kept_is_ultrametric(&m, &kept));
        if !kept.is_empty() {
            let sub = restrict(&m, &kept).unwrap();
            prop_assert!(outliers_ultrametric_fast(&sub, &tol()).outliers.is_empty());
        }
    }

    #[test]
    fn subdominant_lies_below(m in metric(10)) {
        let sub = subdominant_ultrametric(&m).cophenetic().unwrap();
        let n = m.len();
        for i in 0..n {
            for j in 0..i {
                prop_assert!(sub.get(i, j) <= m.get(i, j));
            }
        }
    }

    #[test]
    fn bicriteria_ultrametric_within_bound(
        n in 8usize..40, k in 0usize..3, eps in 0.01f64..0.1, seed in any::<u64>()
    ) {
        let m = planted(PlantedKind::Ultrametric, n, k, eps, seed);
        let fit = bicriteria_ultrametric(&m, &BicriteriaParams::new(eps), &tol()).unwrap();
        prop_assert!(fit.distortion <= fit.bound + m.eta(&tol()));
        prop_assert!(fit.result.outliers.len() <= 3 * k);
        prop_assert!(verify_certificate(&m, &fit.result));
    }

    #[test]
    fn gromov_tree_is_a_tree_metric(m in metric(9)) {
        let t = tol();
        let tree = gromov_tree(&m, min_eccentricity_point(&m), &t).unwrap();
        let induced = tree.induced_metric().unwrap();
        let n = induced.len();
        let eta = m.eta(&t);
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    for l in k + 1..n {
                        prop_assert!(four_point_defect(&induced, i, j, k, l) <= eta);
                    }
                }
            }
        }
    }

    #[test]
    fn gromov_tree_reproduces_tree_metrics(n in 2usize..25, seed in any::<u64>()) {
        let t = tol();
        let m = planted(PlantedKind::Tree, n, 0, 0.0, seed);
        let tree = gromov_tree(&m, min_eccentricity_point(&m), &t).unwrap();
        prop_assert!(linf_gap(&tree.induced_metric().unwrap(), &m).unwrap() <= m.eta(&t));
    }
}
