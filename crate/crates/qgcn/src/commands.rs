use std::path::Path;

use qgcn_core::classical::FeatureMatrix;
use qgcn_core::graph::{build_weight_matrix, gaussian_similarity, laplacian, WeightedGraph};
use qgcn_core::linalg::Matrix;
use qgcn_core::overlap::estimate_all_overlaps;
use qgcn_core::qconv::{forward, forward_oracle};
use qgcn_core::spectral::{eigendecompose, select, SpectralBasis, SpectralDecomposition};
use qgcn_core::train::{fit, ForwardPath, TrainConfig, TrainData};
use qgcn_core::{layer_error_budget, overlap_error_budget};
use serde_json::json;

use crate::config::{GraphMode, Mode, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{parse_edge_list, parse_feature_csv, parse_targets, read_text, write_text};
use crate::report::{
    overlap_rows, sweep_csv, train_csv, BuildReport, ForwardReport, LayerOverlaps, LayerReport, SweepRow,
};

/// Text a command prints on standard output.
pub type Stdout = String;

fn load_features(c: &RunConfig) -> CliResult<Option<Matrix>> {
    let Some(p) = &c.features else { return Ok(None) };
    let text = read_text(p)?;
    Ok(Some(parse_feature_csv(&text, &p.display().to_string())?))
}

fn require_features(c: &RunConfig) -> CliResult<Matrix> {
    load_features(c)?.ok_or_else(|| CliError::Usage("a features file is required (--features)".into()))
}

fn node_count(c: &RunConfig, implied: usize) -> CliResult<usize> {
    match c.nodes {
        Some(n) if n < implied => Err(CliError::Input(format!("nodes = {n} but the inputs mention {implied} nodes"))),
        Some(n) => Ok(n),
        None => Ok(implied),
    }
}

fn build_graph(c: &RunConfig, features: Option<&Matrix>) -> CliResult<WeightedGraph> {
    match c.graph {
        GraphMode::EdgeList => {
            let p = c.edges.as_ref().ok_or_else(|| CliError::Usage("an edge list is required (--edges)".into()))?;
            let e = parse_edge_list(&read_text(p)?, &p.display().to_string())?;
            let implied = e.nodes.max(features.map_or(0, Matrix::rows));
            Ok(build_weight_matrix(&e.edges, node_count(c, implied)?)?)
        }
        GraphMode::Gaussian { sigma } => {
            let x = features.ok_or_else(|| CliError::Usage("gaussian graphs need a features file".into()))?;
            node_count(c, x.rows())?;
            Ok(gaussian_similarity(x, sigma)?)
        }
    }
}

struct Problem {
    x: FeatureMatrix,
    dec: SpectralDecomposition,
    basis: SpectralBasis,
}

fn problem(c: &RunConfig) -> CliResult<Problem> {
    c.validate()?;
    let x = require_features(c)?;
    let g = build_graph(c, Some(&x))?;
    if x.rows() != g.n() {
        return Err(CliError::Input(format!("features have {} rows for a {}-node graph", x.rows(), g.n())));
    }
    let dec = eigendecompose(&laplacian(&g))?;
    let basis = select(&dec, c.d, c.eigen_order.into())?;
    Ok(Problem { x: FeatureMatrix::new(x)?, dec, basis })
}

fn emit(c: &RunConfig, body: String) -> CliResult<Stdout> {
    match &c.out {
        Some(p) => write_text(p, &body).map(|_| String::new()),
        None => Ok(body),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Laplacian and eigendecomposition of the configured graph.
pub fn cmd_build(c: &RunConfig) -> CliResult<Stdout> {
    c.validate()?;
    let features = load_features(c)?;
    let g = build_graph(c, features.as_ref())?;
    let l = laplacian(&g);
    let dec = eigendecompose(&l)?;
    let body = to_json(&BuildReport::new(c, &g, &l, &dec));
    let summary = json!({ "n": g.n(), "eigenvalues": dec.eigenvalues() });
    match &c.out {
        Some(p) => {
            write_text(p, &body)?;
            Ok(format!("{summary}\n"))
        }
        None => Ok(body),
    }
}

/// Forward pass in the configured mode. In both mode a layer whose error
/// exceeds [`layer_error_budget`] turns into a tolerance error after the
/// report is written.
pub fn cmd_forward(c: &RunConfig) -> CliResult<Stdout> {
    let p = problem(c)?;
    let filters = c.filters();
    let b_frac = c.b_frac;
    let mut layers = Vec::new();
    let mut overlaps = Vec::new();
    let mut budget = None;
    match c.mode {
        Mode::Oracle => {
            for (s, cols) in forward_oracle(&p.x, &p.basis, &filters)?.iter().enumerate() {
                layers.extend(cols.iter().enumerate().map(|(k, o)| LayerReport::from_oracle(s, k, o, b_frac)));
            }
        }
        Mode::Quantum | Mode::Both => {
            let cfg = c.estimation()?;
            let both = c.mode == Mode::Both;
            if both {
                budget = Some(layer_error_budget(cfg.q));
            }
            for (s, run) in forward(&p.x, &p.basis, &filters, &cfg)?.iter().enumerate() {
                for (k, col) in run.columns.iter().enumerate() {
                    let composed = both.then(|| run.composed_oracle[k].as_slice());
                    layers.push(LayerReport::from_quantum(s, k, col, composed, cfg.q, b_frac));
                }
                overlaps.push(LayerOverlaps {
                    layer: s,
                    max_abs_error: run.overlaps.max_abs_error(),
                    peak_branches: run.overlaps.peak_branches,
                    estimates: overlap_rows(&run.overlaps),
                });
            }
        }
    }
    let report = ForwardReport {
        config: c,
        mode: c.mode,
        n: p.basis.n(),
        eigenvalues: p.dec.eigenvalues().to_vec(),
        layers,
        overlaps,
        budget,
    };
    let out = emit(c, to_json(&report))?;
    if let Some(b) = budget {
        if let Some(l) = report.layers.iter().find(|l| l.max_abs_error.is_some_and(|e| e > b)) {
            return Err(CliError::Tolerance(format!(
                "layer {} column {}: max_abs_error {:.3e} exceeds budget {b:.3e}",
                l.layer,
                l.column,
                l.max_abs_error.unwrap_or(f64::NAN)
            )));
        }
    }
    Ok(out)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

/// Overlap error against `q`, one CSV row per entry of `q_list`.
pub fn cmd_sweep(c: &RunConfig) -> CliResult<Stdout> {
    if c.q_list.is_empty() {
        return Err(CliError::Usage("q_list must not be empty".into()));
    }
    let p = problem(c)?;
    let mut rows = Vec::with_capacity(c.q_list.len());
    for &q in &c.q_list {
        let mut errs = (0..c.sweep_seeds as u64)
            .map(|s| Ok(estimate_all_overlaps(&p.x, &p.basis, &c.estimation_at(q, c.seed.wrapping_add(s))?)?.max_abs_error()))
            .collect::<CliResult<Vec<f64>>>()?;
        let max_error = errs.iter().copied().fold(0.0, f64::max);
        rows.push(SweepRow { q, runs: errs.len(), median_error: median(&mut errs), max_error, budget: overlap_error_budget(q) });
    }
    let mut by_q: Vec<&SweepRow> = rows.iter().collect();
    by_q.sort_by_key(|r| r.q);
    let non_increasing = by_q.windows(2).all(|w| w[1].median_error <= w[0].median_error);
    let csv = sweep_csv(&rows);
    let summary = json!({ "rows": rows.len(), "median_non_increasing": non_increasing });
    match &c.out {
        Some(path) => {
            write_text(path, &csv)?;
            Ok(format!("{summary}\n"))
        }
        None => Ok(csv),
    }
}

/// Fits the first filter column of layer 0 to the targets. Quantum mode
/// trains through the circuit; the other modes use the oracle.
pub fn cmd_train(c: &RunConfig) -> CliResult<Stdout> {
    let tp = c.targets.as_ref().ok_or_else(|| CliError::Usage("a targets file is required (--targets)".into()))?;
    let out = c.out.as_ref().ok_or_else(|| CliError::Usage("train writes its trace to --out".into()))?;
    let p = problem(c)?;
    let targets = parse_targets(&read_text(tp)?, &tp.display().to_string())?;
    let theta0 = c.filters()[0][0].clone();
    let path = match c.mode {
        Mode::Quantum => ForwardPath::Quantum(c.estimation()?),
        Mode::Oracle | Mode::Both => ForwardPath::Oracle,
    };
    let cfg = TrainConfig { epochs: c.epochs.get(), learning_rate: c.learning_rate, h: c.h, path, seed: c.seed };
    let data = TrainData { x: p.x, basis: p.basis, targets };
    let trace = fit(&theta0, &data, &cfg)?;
    write_text(out, &train_csv(&trace))?;
    let initial = trace.losses.first().copied().unwrap_or(trace.final_loss);
    Ok(format!("{}\n", json!({ "theta": trace.theta, "initial_loss": initial, "final_loss": trace.final_loss })))
}

/// Reads and resolves a config file, or the defaults when none is given.
pub fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}
