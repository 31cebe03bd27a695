//! Edge lists, feature and target CSVs, and JSON state dumps.

use std::path::Path;

use num_complex::Complex64;
use qgcn_core::linalg::Matrix;
use qgcn_core::qsim::{QState, RegisterLayout};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, ParseError};

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn parse_err(source: &str, line: usize, message: impl Into<String>) -> ParseError {
    ParseError { source_name: source.to_string(), line, message: message.into() }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeList {
    pub edges: Vec<(usize, usize, f64)>,
    /// One past the largest node index mentioned.
    pub nodes: usize,
}

/// Whitespace- or comma-separated `u v [w]` lines; `#` starts a comment and
/// a missing weight means 1.
pub fn parse_edge_list(text: &str, source: &str) -> Result<EdgeList, ParseError> {
    let mut edges = Vec::new();
    let mut nodes = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split(|c: char| c.is_whitespace() || c == ',').filter(|f| !f.is_empty()).collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(parse_err(source, line, format!("expected `u v [weight]`, found {} fields", fields.len())));
        }
        let node = |f: &str| f.parse::<usize>().map_err(|_| parse_err(source, line, format!("invalid node index {f:?}")));
        let u = node(fields[0])?;
        let v = node(fields[1])?;
        let w = match fields.get(2) {
            Some(f) => f.parse::<f64>().map_err(|_| parse_err(source, line, format!("invalid weight {f:?}")))?,
            None => 1.0,
        };
        if !w.is_finite() {
            return Err(parse_err(source, line, format!("non-finite weight {w}")));
        }
        nodes = nodes.max(u + 1).max(v + 1);
        edges.push((u, v, w));
    }
    Ok(EdgeList { edges, nodes })
}

fn numeric_rows(text: &str, source: &str) -> Result<Vec<(usize, Vec<f64>)>, ParseError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(i + 1);
            parse_err(source, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 1);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = rec.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) => {
                if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                    return Err(parse_err(source, line, format!("non-finite value {x}")));
                }
                rows.push((line, v));
            }
            // a fully non-numeric first row is a header
            Err(_) if rows.is_empty() && rec.iter().all(|f| f.parse::<f64>().is_err()) => {}
            Err(_) => {
                let bad = rec.iter().find(|f| f.parse::<f64>().is_err()).unwrap_or("");
                return Err(parse_err(source, line, format!("invalid number {bad:?}")));
            }
        }
    }
    Ok(rows)
}

/// Feature CSV: one row per node, one column per feature. An optional
/// all-text first row is taken as a header.
pub fn parse_feature_csv(text: &str, source: &str) -> Result<Matrix, ParseError> {
    let rows = numeric_rows(text, source)?;
    let Some((_, first)) = rows.first() else {
        return Err(parse_err(source, 1, "no data rows"));
    };
    let width = first.len();
    for (line, r) in &rows {
        if r.len() != width {
            return Err(parse_err(source, *line, format!("expected {width} columns, found {}", r.len())));
        }
    }
    let data: Vec<Vec<f64>> = rows.into_iter().map(|r| r.1).collect();
    Matrix::from_rows(&data).map_err(|e| parse_err(source, 1, e.to_string()))
}

/// Target values, one per node, either one per line or on a single row.
pub fn parse_targets(text: &str, source: &str) -> Result<Vec<f64>, ParseError> {
    let rows = numeric_rows(text, source)?;
    if rows.len() == 1 {
        return Ok(rows.into_iter().next().map(|r| r.1).unwrap_or_default());
    }
    let mut out = Vec::with_capacity(rows.len());
    for (line, r) in rows {
        if r.len() != 1 {
            return Err(parse_err(source, line, "expected one target per line"));
        }
        out.push(r[0]);
    }
    if out.is_empty() {
        return Err(parse_err(source, 1, "no targets"));
    }
    Ok(out)
}

/// One amplitude of a state dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpEntry {
    pub label: Vec<u64>,
    pub re: f64,
    pub im: f64,
}

/// Amplitudes in label order (the state's own ordering is by label).
pub fn dump_state(s: &QState) -> Vec<DumpEntry> {
    s.iter().map(|(l, a)| DumpEntry { label: l.to_vec(), re: a.re, im: a.im }).collect()
}

pub fn state_from_dump(layout: RegisterLayout, entries: &[DumpEntry]) -> CliResult<QState> {
    let amps = entries.iter().map(|e| (e.label.clone(), Complex64::new(e.re, e.im)));
    Ok(QState::from_amplitudes(layout, amps)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_list_forms() {
        let e = parse_edge_list("# path\n0 1\n1,2,0.5\n\n2 3 2 # heavy\n", "g").unwrap();
        assert_eq!(e.nodes, 4);
        assert_eq!(e.edges, vec![(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0)]);
    }

    #[test]
    fn malformed_edge_reports_line() {
        let err = parse_edge_list("0 x 1\n", "g.txt").unwrap_err();
        assert_eq!(err.line, 1);
        let err = parse_edge_list("0 1\n\n1 2 w\n", "g.txt").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(parse_edge_list("0\n", "g").is_err());
    }

    #[test]
    fn feature_csv_with_header() {
        let m = parse_feature_csv("a,b\n1,2\n3,4\n", "x").unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 2));
        assert_eq!(m[(1, 0)], 3.0);
        let err = parse_feature_csv("1,2\n3\n", "x").unwrap_err();
        assert_eq!(err.line, 2);
        let err = parse_feature_csv("1,2\n3,q\n", "x").unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn targets_either_shape() {
        assert_eq!(parse_targets("0.5\n0.25\n", "t").unwrap(), vec![0.5, 0.25]);
        assert_eq!(parse_targets("0.5, 0.25\n", "t").unwrap(), vec![0.5, 0.25]);
    }

    #[test]
    fn dump_round_trip() {
        use qgcn_core::qsim::{Controls, RegisterKind};
        let mut l = RegisterLayout::new();
        let a = l.add("a", 2, RegisterKind::Index).unwrap();
        let s = QState::init(l.clone()).unwrap().walsh(a, &Controls::none()).unwrap();
        let d = dump_state(&s);
        assert_eq!(d.len(), 4);
        assert!(d.windows(2).all(|w| w[0].label < w[1].label));
        let json = serde_json::to_string(&d).unwrap();
        let back: Vec<DumpEntry> = serde_json::from_str(&json).unwrap();
        let t = state_from_dump(l, &back).unwrap();
        assert_eq!(dump_state(&t), d);
    }
}
