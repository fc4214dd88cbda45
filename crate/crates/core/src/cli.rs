//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 infeasible parameters,
//! 3 oracle budget exceeded.

use std::ffi::OsString;
use std::fs;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bicriteria::{
    bicriteria_euclidean, bicriteria_tree, bicriteria_ultrametric, subdominant_ultrametric,
    BicriteriaError, BicriteriaParams, GridOverride, GridSpec,
};
use crate::euclidean::{outliers_euclidean, EmbedTolerance};
use crate::instances::{
    planted_instance, vc_euclidean_instance, vc_tree_instance, vc_ultrametric_instance,
    InstanceError, PlantedKind, SimpleGraph,
};
use crate::io::{coordinates_to_csv, matrix_to_csv, parse_matrix, MatrixFormat};
use crate::metric::{restrict, validate_metric, DistanceMatrix, ToleranceConfig};
use crate::oracle::{
    exact_min_outliers_with, verify_certificate_with, OracleBudget, OracleError, Target,
};
use crate::outliers::{OutlierResult, Witness};
use crate::tree_outliers::{outliers_tree_fast, outliers_tree_quartic};
use crate::ultrametric::{outliers_ultrametric_cubic, outliers_ultrametric_fast};

/// Schema version of every JSON report.
pub const FORMAT_VERSION: u32 = 1;

/// Largest Euclidean dimension accepted by the bi-criteria search.
pub const MAX_BICRITERIA_DIM: usize = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

impl From<crate::io::ParseError> for CliError {
    fn from(e: crate::io::ParseError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<InstanceError> for CliError {
    fn from(e: InstanceError) -> Self {
        match e {
            InstanceError::NuOutOfRange { .. } | InstanceError::Parameters(_) => {
                CliError::Infeasible(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<BicriteriaError> for CliError {
    fn from(e: BicriteriaError) -> Self {
        match e {
            BicriteriaError::Metric(_) | BicriteriaError::Tree(_) => CliError::Input(e.to_string()),
            other => CliError::Infeasible(other.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Budget(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "outlier-embed",
    version,
    about = "Remove outliers and embed finite metrics"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the triangle inequality.
    Validate(ValidateArgs),
    /// Approximate minimum-outlier isometric embedding.
    Embed(EmbedArgs),
    /// Few outliers plus small additive distortion.
    Bicriteria(BicriteriaArgs),
    /// Exact minimum outlier set by enumeration (small inputs).
    Exact(ExactArgs),
    /// Generate instances.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Time the quadratic algorithms on growing inputs.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Matrix file, or `-` for stdin.
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    format: FormatArg,
    #[arg(long, default_value_t = 1e-9)]
    abs_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    rel_tol: f64,
}

impl InputArgs {
    fn tol(&self) -> ToleranceConfig {
        ToleranceConfig {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
        }
    }

    fn load(&self) -> Result<DistanceMatrix, CliError> {
        let text = read_text(&self.input)?;
        let format = match self.format {
            FormatArg::Auto => MatrixFormat::Auto,
            FormatArg::Square => MatrixFormat::Square,
            FormatArg::Edges => MatrixFormat::Edges,
        };
        Ok(parse_matrix(&text, format, &self.tol())?)
    }
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Report file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Include wall time in the report (makes it run-dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Auto,
    Square,
    Edges,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum TargetArg {
    Ultrametric,
    Tree,
    Euclidean,
}

impl TargetArg {
    fn name(self) -> &'static str {
        match self {
            TargetArg::Ultrametric => "ultrametric",
            TargetArg::Tree => "tree",
            TargetArg::Euclidean => "euclidean",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AlgorithmArg {
    Fast,
    Naive,
}

#[derive(Args, Debug)]
struct EmbedTolArgs {
    #[arg(long, default_value_t = 1e-8)]
    tol_psd: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol_rank: f64,
}

impl EmbedTolArgs {
    fn get(&self) -> EmbedTolerance {
        EmbedTolerance {
            tol_psd: self.tol_psd,
            tol_rank: self.tol_rank,
        }
    }
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long, value_enum)]
    target: TargetArg,
    /// Euclidean dimension.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_enum, default_value_t = AlgorithmArg::Fast)]
    algorithm: AlgorithmArg,
    /// Write the fitted tree or dendrogram here.
    #[arg(long)]
    newick: Option<PathBuf>,
    /// Write Euclidean coordinates of the kept points here.
    #[arg(long)]
    coords: Option<PathBuf>,
    /// Process points in a seeded random order.
    #[arg(long)]
    shuffle_seed: Option<u64>,
    #[command(flatten)]
    embed_tol: EmbedTolArgs,
}

#[derive(Args, Debug)]
struct BicriteriaArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long, value_enum)]
    target: TargetArg,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    dim: Option<usize>,
    /// Constant in the Euclidean placement budget.
    #[arg(long, default_value_t = 8.0)]
    c_d: f64,
    /// Tree filter slack as a multiple of epsilon times the diameter.
    #[arg(long, default_value_t = 4.0)]
    slack_tree_factor: f64,
    #[arg(long)]
    grid_tau: Option<f64>,
    #[arg(long)]
    grid_half_width: Option<f64>,
    /// Scan every grid point instead of pruning.
    #[arg(long)]
    exhaustive: bool,
    #[arg(long)]
    newick: Option<PathBuf>,
    #[arg(long)]
    coords: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExactArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long, value_enum)]
    target: TargetArg,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 12)]
    max_n: usize,
    #[arg(long)]
    max_subset: Option<usize>,
    #[command(flatten)]
    embed_tol: EmbedTolArgs,
}

#[derive(Subcommand, Debug)]
enum GenKind {
    /// Tree reduction from a graph.
    VcTree(VcArgs),
    /// Ultrametric reduction from a graph.
    VcUltrametric(VcArgs),
    /// Planar reduction from a graph.
    VcEuclidean(VcArgs),
    /// Random class member with corrupted rows.
    Planted(PlantedArgs),
}

#[derive(Args, Debug)]
struct VcArgs {
    #[command(flatten)]
    source: GraphSource,
    #[arg(long, default_value_t = 0.1)]
    nu: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct GraphSource {
    /// Graph file: vertex count, then one `a b` edge per line.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Use the complete graph on this many vertices.
    #[arg(long)]
    complete: Option<usize>,
    /// Use the path on this many vertices.
    #[arg(long)]
    path: Option<usize>,
}

#[derive(Args, Debug)]
struct PlantedArgs {
    #[arg(long, value_enum)]
    kind: TargetArg,
    #[arg(short)]
    n: usize,
    #[arg(short, default_value_t = 0)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write the corrupted labels here, one per line.
    #[arg(long)]
    witness: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_enum, default_value_t = TargetArg::Tree)]
    target: TargetArg,
    #[arg(long, value_delimiter = ',', default_values_t = [256usize, 512, 1024])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Parameters echoed in a report.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Parameters {
    pub abs_tol: f64,
    pub rel_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slack_tree_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_psd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_rank: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_n: Option<usize>,
}

/// JSON report of `embed`, `bicriteria` and `exact`. Certificate indices
/// refer to input order.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub format_version: u32,
    pub command: Vec<String>,
    pub target: String,
    pub algorithm: String,
    pub n: usize,
    /// Outlier labels in removal order.
    pub outliers: Vec<String>,
    pub kept: Vec<String>,
    pub certificate: Vec<Witness>,
    /// Result of re-checking the certificate; absent for `exact`, whose
    /// answer is certified by exhaustive search instead.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate_verified: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distortion: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distortion_bound: Option<f64>,
    pub parameters: Parameters,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
}

impl RunReport {
    fn new(
        command: &[String],
        target: TargetArg,
        algorithm: &str,
        m: &DistanceMatrix,
        r: &OutlierResult,
        parameters: Parameters,
    ) -> Self {
        RunReport {
            format_version: FORMAT_VERSION,
            command: command.to_vec(),
            target: target.name().into(),
            algorithm: algorithm.into(),
            n: m.len(),
            outliers: r.outlier_labels(m).into_iter().map(String::from).collect(),
            kept: r.kept_labels(m).into_iter().map(String::from).collect(),
            certificate: r.certificate.clone(),
            certificate_verified: None,
            distortion: None,
            distortion_bound: None,
            parameters,
            warnings: r.warnings.clone(),
            runtime_ms: None,
        }
    }
}

fn read_text(path: &PathBuf) -> Result<String, CliError> {
    let mut text = String::new();
    if path.as_os_str() == "-" {
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| CliError::Input(format!("stdin: {e}")))?;
    } else {
        text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(text)
}

fn write_text(path: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Input(format!("stdout: {e}"))),
    }
}

fn write_json<T: Serialize>(path: Option<&PathBuf>, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    write_text(path, &text)
}

fn need_dim(target: TargetArg, dim: Option<usize>) -> Result<Option<usize>, CliError> {
    match (target, dim) {
        (TargetArg::Euclidean, None) => Err(CliError::Infeasible(
            "--dim is required for the euclidean target".into(),
        )),
        (TargetArg::Euclidean, Some(0)) => {
            Err(CliError::Infeasible("--dim must be positive".into()))
        }
        (TargetArg::Euclidean, d) => Ok(d),
        _ => Ok(None),
    }
}

/// Runs the CLI and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let command: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match dispatch(cli.command, &command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, echo: &[String]) -> Result<i32, CliError> {
    match command {
        Command::Validate(a) => validate(a, echo),
        Command::Embed(a) => embed(a, echo).map(|_| 0),
        Command::Bicriteria(a) => bicriteria(a, echo).map(|_| 0),
        Command::Exact(a) => exact(a, echo).map(|_| 0),
        Command::Gen { kind } => generate(kind).map(|_| 0),
        Command::Bench(a) => bench(a, echo).map(|_| 0),
    }
}

#[derive(Serialize)]
struct ValidationOutput {
    format_version: u32,
    command: Vec<String>,
    n: usize,
    diameter: f64,
    ok: bool,
    violation_count: usize,
    /// `[a, b, c]` with `ρ(a, c) > ρ(a, b) + ρ(b, c) + η`.
    violations: Vec<[String; 3]>,
}

fn validate(a: ValidateArgs, echo: &[String]) -> Result<i32, CliError> {
    let m = a.input.load()?;
    let v = validate_metric(&m, &a.input.tol());
    let out = ValidationOutput {
        format_version: FORMAT_VERSION,
        command: echo.to_vec(),
        n: m.len(),
        diameter: m.diameter(),
        ok: v.ok,
        violation_count: v.violation_count,
        violations: v
            .violations
            .iter()
            .map(|t| t.map(|i| m.label(i).to_owned()))
            .collect(),
    };
    write_json(a.output.output.as_ref(), &out)?;
    Ok(if v.ok { 0 } else { 1 })
}

/// Applies a seeded permutation; `perm[i]` is the input index of point `i`.
fn permuted(m: &DistanceMatrix, seed: u64) -> (DistanceMatrix, Vec<usize>) {
    let mut perm: Vec<usize> = (0..m.len()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let labels = perm.iter().map(|&i| m.label(i).to_owned()).collect();
    let p = DistanceMatrix::from_fn(labels, |i, j| m.get(perm[i], perm[j]))
        .expect("permutation of a valid matrix");
    (p, perm)
}

fn unpermute(r: &OutlierResult, perm: &[usize]) -> OutlierResult {
    let certificate = r
        .certificate
        .iter()
        .map(|w| w.map_points(|p| perm[p]))
        .collect();
    let mut out = OutlierResult::from_certificate(perm.len(), certificate);
    out.warnings = r.warnings.clone();
    out
}

fn not_metric_warning(m: &DistanceMatrix, tol: &ToleranceConfig) -> Option<String> {
    let v = validate_metric(m, tol);
    (!v.ok).then(|| {
        format!(
            "input violates the triangle inequality in {} triples",
            v.violation_count
        )
    })
}

fn embed(a: EmbedArgs, echo: &[String]) -> Result<(), CliError> {
    let m = a.input.load()?;
    let tol = a.input.tol();
    let dim = need_dim(a.target, a.dim)?;
    let start = Instant::now();
    let (work, perm) = match a.shuffle_seed {
        Some(seed) => {
            let (p, perm) = permuted(&m, seed);
            (p, Some(perm))
        }
        None => (m.clone(), None),
    };
    let embed_tol = a.embed_tol.get();
    let mut coords = None;
    let (result, algorithm) = match (a.target, a.algorithm) {
        (TargetArg::Ultrametric, AlgorithmArg::Fast) => {
            (outliers_ultrametric_fast(&work, &tol), "ultrametric-fast")
        }
        (TargetArg::Ultrametric, AlgorithmArg::Naive) => {
            (outliers_ultrametric_cubic(&work, &tol), "ultrametric-cubic")
        }
        (TargetArg::Tree, AlgorithmArg::Fast) => (outliers_tree_fast(&work, &tol).0, "tree-fast"),
        (TargetArg::Tree, AlgorithmArg::Naive) => {
            (outliers_tree_quartic(&work, &tol), "tree-quartic")
        }
        (TargetArg::Euclidean, _) => {
            let fit = outliers_euclidean(&work, dim.unwrap_or(1), &embed_tol);
            coords = Some(fit.coordinates);
            (fit.result, "euclidean-anchor")
        }
    };
    let result = match &perm {
        Some(p) => {
            if let Some(c) = coords.as_mut() {
                // rows follow the permuted kept order; restore input order
                let mut rows: Vec<(usize, Vec<f64>)> =
                    result.kept.iter().map(|&i| p[i]).zip(c.drain(..)).collect();
                rows.sort_by_key(|r| r.0);
                *c = rows.into_iter().map(|r| r.1).collect();
            }
            unpermute(&result, p)
        }
        None => result,
    };
    let elapsed = start.elapsed();

    let mut params = Parameters {
        abs_tol: tol.abs_tol,
        rel_tol: tol.rel_tol,
        d: dim,
        seed: a.shuffle_seed,
        ..Parameters::default()
    };
    if a.target == TargetArg::Euclidean {
        params.tol_psd = Some(embed_tol.tol_psd);
        params.tol_rank = Some(embed_tol.tol_rank);
    }
    let mut report = RunReport::new(echo, a.target, algorithm, &m, &result, params);
    report.certificate_verified = Some(verify_certificate_with(&m, &result, &tol, &embed_tol));
    report.warnings.extend(not_metric_warning(&m, &tol));
    if a.output.timing {
        report.runtime_ms = Some(elapsed.as_secs_f64() * 1e3);
    }

    if let Some(path) = &a.newick {
        let text = match a.target {
            TargetArg::Ultrametric if !result.kept.is_empty() => {
                let sub = restrict(&m, &result.kept).map_err(|e| CliError::Input(e.to_string()))?;
                subdominant_ultrametric(&sub).to_newick()
            }
            TargetArg::Tree if !result.kept.is_empty() => {
                let sub = restrict(&m, &result.kept).map_err(|e| CliError::Input(e.to_string()))?;
                outliers_tree_fast(&sub, &tol).1.to_newick()
            }
            _ => ";".into(),
        };
        write_text(Some(path), &format!("{text}\n"))?;
    }
    if let (Some(path), Some(c)) = (&a.coords, &coords) {
        write_text(Some(path), &coordinates_to_csv(&result.kept_labels(&m), c))?;
    }
    write_json(a.output.output.as_ref(), &report)
}

fn bicriteria(a: BicriteriaArgs, echo: &[String]) -> Result<(), CliError> {
    let m = a.input.load()?;
    let tol = a.input.tol();
    let dim = need_dim(a.target, a.dim)?;
    if let Some(d) = dim {
        if d > MAX_BICRITERIA_DIM {
            return Err(CliError::Infeasible(format!(
                "dimension {d} exceeds the supported maximum of {MAX_BICRITERIA_DIM} for the grid search"
            )));
        }
    }
    let params = BicriteriaParams {
        epsilon: a.epsilon,
        d: dim,
        c_d: a.c_d,
        slack_tree_factor: a.slack_tree_factor,
        grid: (a.grid_tau.is_some() || a.grid_half_width.is_some()).then_some(GridOverride {
            tau: a.grid_tau,
            half_width: a.grid_half_width,
        }),
        exhaustive: a.exhaustive,
    };
    let mut report_params = Parameters {
        abs_tol: tol.abs_tol,
        rel_tol: tol.rel_tol,
        epsilon: Some(a.epsilon),
        d: dim,
        ..Parameters::default()
    };
    let start = Instant::now();
    let (result, algorithm, distortion, bound, newick, coords) = match a.target {
        TargetArg::Ultrametric => {
            let fit = bicriteria_ultrametric(&m, &params, &tol)?;
            let nwk = fit.embedding.to_newick();
            (
                fit.result,
                "bicriteria-ultrametric",
                fit.distortion,
                fit.bound,
                Some(nwk),
                None,
            )
        }
        TargetArg::Tree => {
            report_params.slack_tree_factor = Some(a.slack_tree_factor);
            let fit = bicriteria_tree(&m, &params, &tol)?;
            let nwk = fit.embedding.to_newick();
            (
                fit.result,
                "bicriteria-tree",
                fit.distortion,
                fit.bound,
                Some(nwk),
                None,
            )
        }
        TargetArg::Euclidean => {
            report_params.c_d = Some(a.c_d);
            let fit = bicriteria_euclidean(&m, &params)?;
            report_params.grid = Some(fit.grid);
            (
                fit.result,
                "bicriteria-euclidean",
                fit.distortion,
                fit.budget,
                None,
                Some(fit.coordinates),
            )
        }
    };
    let elapsed = start.elapsed();
    let mut report = RunReport::new(echo, a.target, algorithm, &m, &result, report_params);
    report.certificate_verified = Some(verify_certificate_with(
        &m,
        &result,
        &tol,
        &EmbedTolerance::default(),
    ));
    report.distortion = Some(distortion);
    report.distortion_bound = Some(bound);
    report.warnings.extend(not_metric_warning(&m, &tol));
    if a.output.timing {
        report.runtime_ms = Some(elapsed.as_secs_f64() * 1e3);
    }
    if let (Some(path), Some(text)) = (&a.newick, &newick) {
        write_text(Some(path), &format!("{text}\n"))?;
    }
    if let (Some(path), Some(c)) = (&a.coords, &coords) {
        write_text(Some(path), &coordinates_to_csv(&result.kept_labels(&m), c))?;
    }
    write_json(a.output.output.as_ref(), &report)
}

fn exact(a: ExactArgs, echo: &[String]) -> Result<(), CliError> {
    if a.max_n > crate::oracle::ORACLE_HARD_MAX {
        return Err(CliError::Infeasible(format!(
            "--max-n {} exceeds the hard limit {}",
            a.max_n,
            crate::oracle::ORACLE_HARD_MAX
        )));
    }
    let m = a.input.load()?;
    let tol = a.input.tol();
    let dim = need_dim(a.target, a.dim)?;
    let target = match a.target {
        TargetArg::Ultrametric => Target::Ultrametric,
        TargetArg::Tree => Target::Tree,
        TargetArg::Euclidean => Target::Euclidean(dim.unwrap_or(1)),
    };
    let budget = OracleBudget {
        max_n: a.max_n,
        max_subset: a.max_subset,
    };
    let embed_tol = a.embed_tol.get();
    let start = Instant::now();
    let outliers = exact_min_outliers_with(&m, target, &budget, &tol, &embed_tol)?;
    let elapsed = start.elapsed();
    let kept = (0..m.len()).filter(|i| !outliers.contains(i)).collect();
    let result = OutlierResult {
        outliers,
        kept,
        ..OutlierResult::default()
    };
    let params = Parameters {
        abs_tol: tol.abs_tol,
        rel_tol: tol.rel_tol,
        d: dim,
        max_n: Some(a.max_n),
        tol_psd: dim.map(|_| embed_tol.tol_psd),
        tol_rank: dim.map(|_| embed_tol.tol_rank),
        ..Parameters::default()
    };
    let mut report = RunReport::new(echo, a.target, "exact-enumeration", &m, &result, params);
    if a.output.timing {
        report.runtime_ms = Some(elapsed.as_secs_f64() * 1e3);
    }
    write_json(a.output.output.as_ref(), &report)
}

fn graph_of(a: &VcArgs) -> Result<SimpleGraph, CliError> {
    let a = &a.source;
    if let Some(n) = a.complete {
        return Ok(SimpleGraph::complete(n));
    }
    if let Some(n) = a.path {
        return Ok(SimpleGraph::path(n));
    }
    let path = a.graph.as_ref().expect("clap requires one graph source");
    Ok(SimpleGraph::parse(&read_text(path)?)?)
}

fn generate(kind: GenKind) -> Result<(), CliError> {
    let (m, out) = match kind {
        GenKind::VcTree(a) => (vc_tree_instance(&graph_of(&a)?, a.nu)?, a.output),
        GenKind::VcUltrametric(a) => (vc_ultrametric_instance(&graph_of(&a)?, a.nu)?, a.output),
        GenKind::VcEuclidean(a) => (vc_euclidean_instance(&graph_of(&a)?, a.nu)?, a.output),
        GenKind::Planted(a) => {
            let kind = match a.kind {
                TargetArg::Ultrametric => PlantedKind::Ultrametric,
                TargetArg::Tree => PlantedKind::Tree,
                TargetArg::Euclidean => PlantedKind::Euclidean {
                    d: need_dim(a.kind, a.dim)?.unwrap_or(1),
                },
            };
            let inst = planted_instance(kind, a.n, a.k, a.epsilon, a.seed)?;
            if let Some(path) = &a.witness {
                let mut text = String::new();
                for &w in &inst.witness {
                    text.push_str(inst.matrix.label(w));
                    text.push('\n');
                }
                write_text(Some(path), &text)?;
            }
            (inst.matrix, a.output)
        }
    };
    write_text(out.as_ref(), &matrix_to_csv(&m))
}

#[derive(Serialize)]
struct BenchOutput {
    format_version: u32,
    command: Vec<String>,
    target: String,
    sizes: Vec<usize>,
    /// Best wall time per size, in milliseconds.
    times_ms: Vec<f64>,
    /// Ratio of consecutive times.
    ratios: Vec<f64>,
    /// Largest per-insertion work divided by the insertion index.
    work_constant: f64,
}

fn bench(a: BenchArgs, echo: &[String]) -> Result<(), CliError> {
    if a.target == TargetArg::Euclidean {
        return Err(CliError::Infeasible(
            "bench covers the ultrametric and tree algorithms".into(),
        ));
    }
    if a.reps == 0 || a.sizes.is_empty() || a.sizes.contains(&0) {
        return Err(CliError::Infeasible(
            "need positive sizes and repetitions".into(),
        ));
    }
    let tol = ToleranceConfig::default();
    let mut times = Vec::new();
    let mut c = 0.0f64;
    for &n in &a.sizes {
        let kind = if a.target == TargetArg::Tree {
            PlantedKind::Tree
        } else {
            PlantedKind::Ultrametric
        };
        let m = planted_instance(kind, n, 0, 0.0, a.seed)?.matrix;
        let mut best = f64::INFINITY;
        for _ in 0..a.reps {
            let t = Instant::now();
            let r = match a.target {
                TargetArg::Tree => outliers_tree_fast(&m, &tol).0,
                _ => outliers_ultrametric_fast(&m, &tol),
            };
            best = best.min(t.elapsed().as_secs_f64() * 1e3);
            for (i, &w) in r.work.iter().enumerate() {
                c = c.max(w as f64 / i.max(1) as f64);
            }
        }
        times.push(best);
    }
    let ratios = times.windows(2).map(|w| w[1] / w[0]).collect();
    write_json(
        a.output.as_ref(),
        &BenchOutput {
            format_version: FORMAT_VERSION,
            command: echo.to_vec(),
            target: a.target.name().into(),
            sizes: a.sizes,
            times_ms: times,
            ratios,
            work_constant: c,
        },
    )
}
