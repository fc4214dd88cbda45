//! Browser bindings. Each export takes plain strings and numbers and returns a
//! JSON string for the page script.

use outlier_embed::bicriteria::{
    bicriteria_euclidean, bicriteria_tree, bicriteria_ultrametric, subdominant_ultrametric,
    BicriteriaError, BicriteriaParams,
};
use outlier_embed::euclidean::{outliers_euclidean, EmbedTolerance};
use outlier_embed::instances::{planted_instance, InstanceError, PlantedKind};
use outlier_embed::io::{matrix_to_csv, parse_matrix, MatrixFormat, ParseError};
use outlier_embed::metric::{restrict, MetricError};
use outlier_embed::oracle::verify_certificate;
use outlier_embed::tree_outliers::outliers_tree_fast;
use outlier_embed::ultrametric::outliers_ultrametric_fast;
use outlier_embed::{DistanceMatrix, OutlierResult, ToleranceConfig};
use serde_json::{json, Value};
use thiserror::Error;
use wasm_bindgen::prelude::*;

/// Largest input the page accepts for Euclidean targets.
pub const MAX_EUCLIDEAN_POINTS: usize = 30;
/// Largest instance the generator produces.
pub const MAX_GENERATED_POINTS: usize = 400;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("unknown target '{0}' (use ultrametric, tree or euclidean)")]
    Target(String),
    #[error("dimension must be 1, 2 or 3")]
    Dimension,
    #[error("at most {max} points here, got {n}")]
    TooLarge { n: usize, max: usize },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Bicriteria(#[from] BicriteriaError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Target {
    Ultrametric,
    Tree,
    Euclidean(usize),
}

fn target(name: &str, dim: usize) -> Result<Target, DemoError> {
    match name {
        "ultrametric" => Ok(Target::Ultrametric),
        "tree" => Ok(Target::Tree),
        "euclidean" if (1..=3).contains(&dim) => Ok(Target::Euclidean(dim)),
        "euclidean" => Err(DemoError::Dimension),
        other => Err(DemoError::Target(other.to_owned())),
    }
}

fn load(csv: &str, t: Target) -> Result<DistanceMatrix, DemoError> {
    let m = parse_matrix(csv, MatrixFormat::Auto, &ToleranceConfig::default())?;
    if matches!(t, Target::Euclidean(_)) && m.len() > MAX_EUCLIDEAN_POINTS {
        return Err(DemoError::TooLarge {
            n: m.len(),
            max: MAX_EUCLIDEAN_POINTS,
        });
    }
    Ok(m)
}

fn summary(m: &DistanceMatrix, r: &OutlierResult) -> Value {
    json!({
        "n": m.len(),
        "outliers": r.outlier_labels(m),
        "kept": r.kept_labels(m),
        "witnesses": r.certificate.len(),
        "verified": verify_certificate(m, r),
    })
}

fn kept_newick(m: &DistanceMatrix, kept: &[usize]) -> Result<Option<String>, DemoError> {
    if kept.is_empty() {
        return Ok(None);
    }
    Ok(Some(
        subdominant_ultrametric(&restrict(m, kept)?).to_newick(),
    ))
}

/// Outlier removal followed by an exact embedding of the kept points.
pub fn find_outliers_json(csv: &str, target_name: &str, dim: usize) -> Result<Value, DemoError> {
    let t = target(target_name, dim)?;
    let m = load(csv, t)?;
    let tol = ToleranceConfig::default();
    let mut out;
    match t {
        Target::Ultrametric => {
            let r = outliers_ultrametric_fast(&m, &tol);
            out = summary(&m, &r);
            out["newick"] = json!(kept_newick(&m, &r.kept)?);
        }
        Target::Tree => {
            let (r, tree) = outliers_tree_fast(&m, &tol);
            out = summary(&m, &r);
            out["newick"] = json!((!r.kept.is_empty()).then(|| tree.to_newick()));
        }
        Target::Euclidean(d) => {
            let fit = outliers_euclidean(&m, d, &EmbedTolerance::default());
            out = summary(&m, &fit.result);
            out["coordinates"] = json!(fit.coordinates);
        }
    }
    Ok(out)
}

/// Bi-criteria fit: fewer outliers in exchange for bounded distortion.
pub fn fit_bicriteria_json(
    csv: &str,
    target_name: &str,
    epsilon: f64,
    dim: usize,
) -> Result<Value, DemoError> {
    let t = target(target_name, dim)?;
    let m = load(csv, t)?;
    let tol = ToleranceConfig::default();
    let mut params = BicriteriaParams::new(epsilon);
    let mut out;
    match t {
        Target::Ultrametric => {
            let fit = bicriteria_ultrametric(&m, &params, &tol)?;
            out = summary(&m, &fit.result);
            out["newick"] = json!((!fit.result.kept.is_empty()).then(|| fit.embedding.to_newick()));
            out["distortion"] = json!(fit.distortion);
            out["bound"] = json!(fit.bound);
        }
        Target::Tree => {
            let fit = bicriteria_tree(&m, &params, &tol)?;
            out = summary(&m, &fit.result);
            out["newick"] = json!((!fit.result.kept.is_empty()).then(|| fit.embedding.to_newick()));
            out["distortion"] = json!(fit.distortion);
            out["bound"] = json!(fit.bound);
        }
        Target::Euclidean(d) => {
            params.d = Some(d);
            let fit = bicriteria_euclidean(&m, &params)?;
            out = summary(&m, &fit.result);
            out["coordinates"] = json!(fit.coordinates);
            out["distortion"] = json!(fit.distortion);
            out["bound"] = json!(fit.budget);
        }
    }
    Ok(out)
}

/// A noisy class member with `k` corrupted points, as CSV plus the witness
/// labels.
pub fn planted_json(
    kind: &str,
    n: usize,
    k: usize,
    epsilon: f64,
    seed: u64,
    dim: usize,
) -> Result<Value, DemoError> {
    let kind = match target(kind, dim)? {
        Target::Ultrametric => PlantedKind::Ultrametric,
        Target::Tree => PlantedKind::Tree,
        Target::Euclidean(d) => PlantedKind::Euclidean { d },
    };
    let max = match kind {
        PlantedKind::Euclidean { .. } => MAX_EUCLIDEAN_POINTS,
        _ => MAX_GENERATED_POINTS,
    };
    if n > max {
        return Err(DemoError::TooLarge { n, max });
    }
    let p = planted_instance(kind, n, k, epsilon, seed)?;
    let witness: Vec<&str> = p.witness.iter().map(|&i| p.matrix.label(i)).collect();
    Ok(json!({
        "csv": matrix_to_csv(&p.matrix),
        "witness": witness,
    }))
}

fn to_js(r: Result<Value, DemoError>) -> Result<String, JsError> {
    r.map(|v| v.to_string())
        .map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = findOutliers)]
pub fn find_outliers(csv: &str, target: &str, dim: usize) -> Result<String, JsError> {
    to_js(find_outliers_json(csv, target, dim))
}

#[wasm_bindgen(js_name = fitBicriteria)]
pub fn fit_bicriteria(
    csv: &str,
    target: &str,
    epsilon: f64,
    dim: usize,
) -> Result<String, JsError> {
    to_js(fit_bicriteria_json(csv, target, epsilon, dim))
}

#[wasm_bindgen(js_name = plantedInstance)]
pub fn planted(
    kind: &str,
    n: usize,
    k: usize,
    epsilon: f64,
    seed: u32,
    dim: usize,
) -> Result<String, JsError> {
    to_js(planted_json(kind, n, k, epsilon, u64::from(seed), dim))
}
