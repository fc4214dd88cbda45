//! Text formats: CSV distance matrices, edge lists, and coordinate tables.

use std::collections::HashMap;

use thiserror::Error;

use crate::metric::{DistanceMatrix, MetricError, ToleranceConfig};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("empty input")]
    Empty,
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}, column {column}: '{text}' is not a number")]
    NotANumber {
        row: usize,
        column: usize,
        text: String,
    },
    #[error("edge list, record {record}: expected 3 fields, found {found}")]
    EdgeArity { record: usize, found: usize },
    #[error("edge list has no distance between '{0}' and '{1}'")]
    MissingPair(String, String),
    #[error("edge list gives '{a}'-'{b}' twice with different values {first} and {second}")]
    ConflictingPair {
        a: String,
        b: String,
        first: f64,
        second: f64,
    },
    #[error("edge list pairs '{0}' with itself")]
    SelfPair(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MatrixFormat {
    /// Square if the text reads as a square matrix, otherwise an edge list.
    #[default]
    Auto,
    /// Header row of labels, then one row per label. A leading label column
    /// in the body is allowed.
    Square,
    /// `label,label,distance` records, optionally under a header.
    Edges,
}

fn records(text: &str) -> Result<Vec<Vec<String>>, ParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for r in reader.records() {
        let r = r?;
        if r.iter().all(str::is_empty) {
            continue;
        }
        out.push(r.iter().map(str::to_owned).collect());
    }
    if out.is_empty() {
        return Err(ParseError::Empty);
    }
    Ok(out)
}

fn number(text: &str, row: usize, column: usize) -> Result<f64, ParseError> {
    text.parse().map_err(|_| ParseError::NotANumber {
        row,
        column,
        text: text.to_owned(),
    })
}

/// Parses a matrix. Asymmetric entries within `η` are averaged; larger gaps,
/// missing pairs, negative or zero off-diagonal entries and duplicate labels
/// are errors.
pub fn parse_matrix(
    text: &str,
    format: MatrixFormat,
    tol: &ToleranceConfig,
) -> Result<DistanceMatrix, ParseError> {
    let recs = records(text)?;
    match format {
        MatrixFormat::Square => square(&recs, tol),
        MatrixFormat::Edges => edges(&recs, tol),
        MatrixFormat::Auto => {
            let n = header(&recs).len();
            let shaped =
                recs.len() == n + 1 && recs[1..].iter().all(|r| r.len() == n || r.len() == n + 1);
            match (shaped, square(&recs, tol)) {
                (true, Ok(m)) => Ok(m),
                (true, Err(e)) if recs.iter().all(|r| r.len() != 3) => Err(e),
                (false, _) if recs.iter().any(|r| r.len() != 3) => square(&recs, tol),
                _ => edges(&recs, tol),
            }
        }
    }
}

/// Header labels, without an empty corner cell above a label column.
fn header(recs: &[Vec<String>]) -> &[String] {
    match recs[0].split_first() {
        Some((corner, rest)) if corner.is_empty() => rest,
        _ => &recs[0],
    }
}

fn square(recs: &[Vec<String>], tol: &ToleranceConfig) -> Result<DistanceMatrix, ParseError> {
    let labels = header(recs).to_vec();
    let n = labels.len();
    let mut rows = Vec::with_capacity(n);
    for (r, rec) in recs[1..].iter().enumerate() {
        let cells = if rec.len() == n + 1 {
            &rec[1..]
        } else {
            &rec[..]
        };
        let offset = rec.len() - cells.len();
        let row = cells
            .iter()
            .enumerate()
            .map(|(c, t)| number(t, r + 2, c + 1 + offset))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    Ok(DistanceMatrix::from_rows(labels, &rows, tol)?)
}

fn edges(recs: &[Vec<String>], tol: &ToleranceConfig) -> Result<DistanceMatrix, ParseError> {
    let mut labels: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut triples = Vec::new();
    for (r, rec) in recs.iter().enumerate() {
        if rec.len() != 3 {
            return Err(ParseError::EdgeArity {
                record: r + 1,
                found: rec.len(),
            });
        }
        let value = match rec[2].parse::<f64>() {
            Ok(v) => v,
            // a header line
            Err(_) if r == 0 => continue,
            Err(_) => return Err(number(&rec[2], r + 1, 3).unwrap_err()),
        };
        let mut id = |s: &str| {
            *index.entry(s.to_owned()).or_insert_with(|| {
                labels.push(s.to_owned());
                labels.len() - 1
            })
        };
        let (a, b) = (id(&rec[0]), id(&rec[1]));
        if a == b {
            if value == 0.0 {
                continue;
            }
            return Err(ParseError::SelfPair(rec[0].clone()));
        }
        triples.push((a, b, value));
    }
    let n = labels.len();
    let mut table: Vec<Option<f64>> = vec![None; n * n];
    let scale = triples.iter().map(|t| t.2.abs()).fold(0.0, f64::max);
    let eta = tol.eta(scale);
    for &(a, b, v) in &triples {
        let slot = &mut table[a.max(b) * n + a.min(b)];
        *slot = match *slot {
            None => Some(v),
            Some(old) if (old - v).abs() <= eta => Some((old + v) / 2.0),
            Some(old) => {
                return Err(ParseError::ConflictingPair {
                    a: labels[a].clone(),
                    b: labels[b].clone(),
                    first: old,
                    second: v,
                })
            }
        };
    }
    for i in 1..n {
        for j in 0..i {
            if table[i * n + j].is_none() {
                return Err(ParseError::MissingPair(
                    labels[j].clone(),
                    labels[i].clone(),
                ));
            }
        }
    }
    Ok(DistanceMatrix::from_fn(labels, |i, j| {
        table[i * n + j].unwrap()
    })?)
}

/// Square CSV with a header row. Values use Rust's shortest round-trip
/// formatting, so parsing the output restores the matrix exactly.
pub fn matrix_to_csv(m: &DistanceMatrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(m.labels()).expect("in-memory write");
    for row in m.to_rows() {
        w.write_record(row.iter().map(|v| format!("{v:?}")))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV output is UTF-8")
}

/// `label,x1,…,xd` rows under a header.
pub fn coordinates_to_csv(labels: &[&str], coords: &[Vec<f64>]) -> String {
    let d = coords.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label".to_string()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    w.write_record(&header).expect("in-memory write");
    for (l, p) in labels.iter().zip(coords) {
        let mut rec = vec![l.to_string()];
        rec.extend(p.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV output is UTF-8")
}
