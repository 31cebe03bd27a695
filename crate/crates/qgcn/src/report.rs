//! Serializable run reports. Every report embeds the resolved config.

use qgcn_core::classical::LayerOracle;
use qgcn_core::graph::{Laplacian, WeightedGraph};
use qgcn_core::linalg::Matrix;
use qgcn_core::overlap::OverlapRun;
use qgcn_core::qconv::LayerOutput;
use qgcn_core::spectral::SpectralDecomposition;
use qgcn_core::train::TrainTrace;
use serde::Serialize;

use crate::config::{Mode, RunConfig};

pub fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

#[derive(Debug, Serialize)]
pub struct BuildReport<'a> {
    pub config: &'a RunConfig,
    pub n: usize,
    pub weights: Vec<Vec<f64>>,
    pub laplacian: Vec<Vec<f64>>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl<'a> BuildReport<'a> {
    pub fn new(config: &'a RunConfig, g: &WeightedGraph, l: &Laplacian, dec: &SpectralDecomposition) -> Self {
        Self {
            config,
            n: g.n(),
            weights: matrix_rows(g.weights()),
            laplacian: matrix_rows(l.entries()),
            eigenvalues: dec.eigenvalues().to_vec(),
            eigenvectors: matrix_rows(dec.eigenvectors()),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct OverlapRow {
    pub j: usize,
    pub k: usize,
    pub estimate: f64,
    pub exact: f64,
    pub abs_error: f64,
}

pub fn overlap_rows(run: &OverlapRun) -> Vec<OverlapRow> {
    run.estimates
        .iter()
        .map(|e| OverlapRow { j: e.j, k: e.k, estimate: e.overlap, exact: e.exact, abs_error: e.abs_error })
        .collect()
}

/// One filter column of one layer.
#[derive(Debug, Serialize)]
pub struct LayerReport {
    pub layer: usize,
    pub column: usize,
    pub eta: Vec<f64>,
    #[serde(rename = "C")]
    pub c: f64,
    pub postselect_prob: f64,
    pub features: Vec<f64>,
    /// All-classical chain from the input features; absent in quantum mode.
    pub oracle: Option<Vec<f64>>,
    /// `max |features - oracle|`; present in both mode only.
    pub max_abs_error: Option<f64>,
    /// Error against the oracle on the overlap table the circuit consumed.
    pub stage_error: Option<f64>,
    pub q: Option<u32>,
    pub b_frac: u32,
}

impl LayerReport {
    pub fn from_oracle(layer: usize, column: usize, o: &LayerOracle, b_frac: u32) -> Self {
        Self {
            layer,
            column,
            eta: o.eta.clone(),
            c: o.c,
            postselect_prob: o.postselect_prob,
            features: o.out.clone(),
            oracle: Some(o.out.clone()),
            max_abs_error: None,
            stage_error: None,
            q: None,
            b_frac,
        }
    }

    pub fn from_quantum(
        layer: usize,
        column: usize,
        out: &LayerOutput,
        composed: Option<&[f64]>,
        q: u32,
        b_frac: u32,
    ) -> Self {
        let max_abs_error = composed
            .map(|o| out.features.iter().zip(o).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())));
        Self {
            layer,
            column,
            eta: out.eta.eta.clone(),
            c: out.eta.c,
            postselect_prob: out.postselect_prob,
            features: out.features.clone(),
            oracle: composed.map(<[f64]>::to_vec),
            max_abs_error,
            stage_error: composed.map(|_| out.max_abs_error),
            q: Some(q),
            b_frac,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct LayerOverlaps {
    pub layer: usize,
    pub max_abs_error: f64,
    pub peak_branches: usize,
    pub estimates: Vec<OverlapRow>,
}

#[derive(Debug, Serialize)]
pub struct ForwardReport<'a> {
    pub config: &'a RunConfig,
    pub mode: Mode,
    pub n: usize,
    pub eigenvalues: Vec<f64>,
    pub layers: Vec<LayerReport>,
    pub overlaps: Vec<LayerOverlaps>,
    /// Per-layer tolerance on `max_abs_error` in both mode.
    pub budget: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub q: u32,
    pub runs: usize,
    pub median_error: f64,
    pub max_error: f64,
    pub budget: f64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}

/// `epoch,loss,grad_norm`; the last row carries the final loss and no gradient.
pub fn train_csv(t: &TrainTrace) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "loss", "grad_norm"]).expect("in-memory csv");
    for (i, (l, g)) in t.losses.iter().zip(&t.grad_norms).enumerate() {
        w.write_record([i.to_string(), l.to_string(), g.to_string()]).expect("in-memory csv");
    }
    w.write_record([t.losses.len().to_string(), t.final_loss.to_string(), String::new()]).expect("in-memory csv");
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}
