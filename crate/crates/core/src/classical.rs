//! Classical spectral convolution and exact oracles for every quantum stage.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::math;
use crate::spectral::SpectralBasis;

/// Node features, one column per feature.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    x: Matrix,
    column_norms: Vec<f64>,
}

impl FeatureMatrix {
    /// Rejects non-finite entries and all-zero columns.
    pub fn new(x: Matrix) -> Result<Self> {
        if !x.all_finite() {
            return Err(Error::NonFinite("feature matrix"));
        }
        let column_norms: Vec<f64> = (0..x.cols()).map(|j| linalg::norm(&x.col(j))).collect();
        if let Some(j) = column_norms.iter().position(|&n| n == 0.0) {
            return Err(Error::ZeroNormColumn(j));
        }
        Ok(Self { x, column_norms })
    }

    pub fn from_columns<C: AsRef<[f64]>>(cols: &[C]) -> Result<Self> {
        Self::new(Matrix::from_columns(cols)?)
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn f(&self) -> usize {
        self.x.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.x
    }

    pub fn column_norms(&self) -> &[f64] {
        &self.column_norms
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.col(j)
    }

    pub fn unit_column(&self, j: usize) -> Vec<f64> {
        self.x.col(j).iter().map(|v| v / self.column_norms[j]).collect()
    }
}

/// Per-layer diagonal kernels: `kernels[i][j]` is the diagonal of
/// `F_{s,i,j}` mapping input feature `i` to output feature `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    layers: Vec<Vec<Vec<Vec<f64>>>>,
}

impl FilterBank {
    /// Checks that every kernel has length `m` and that layer `s + 1` consumes
    /// as many features as layer `s` produces.
    pub fn new(layers: Vec<Vec<Vec<Vec<f64>>>>, m: usize) -> Result<Self> {
        let mut prev_out: Option<usize> = None;
        for (s, layer) in layers.iter().enumerate() {
            let f_in = layer.len();
            let f_out = layer.first().map_or(0, Vec::len);
            if f_in == 0 || f_out == 0 {
                return Err(Error::DimensionMismatch(alloc::format!("layer {s} has no kernels")));
            }
            if let Some(p) = prev_out {
                if p != f_in {
                    return Err(Error::DimensionMismatch(alloc::format!(
                        "layer {s} takes {f_in} features but the previous layer yields {p}"
                    )));
                }
            }
            for row in layer {
                if row.len() != f_out {
                    return Err(Error::DimensionMismatch(alloc::format!("layer {s} kernel table is ragged")));
                }
                for k in row {
                    if k.len() != m {
                        return Err(Error::DimensionMismatch(alloc::format!(
                            "layer {s} kernel of length {} (expected {m})",
                            k.len()
                        )));
                    }
                    if k.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFinite("kernel"));
                    }
                }
            }
            prev_out = Some(f_out);
        }
        Ok(Self { layers })
    }

    /// Kernels shared across input features: output feature `j` of layer `s`
    /// uses `theta[s][j]` for every input. This is the indexing the quantum
    /// pipeline realizes.
    pub fn from_column_filters(theta: &[Vec<Vec<f64>>], f0: usize, m: usize) -> Result<Self> {
        let mut f_in = f0;
        let mut layers = Vec::new();
        for cols in theta {
            layers.push((0..f_in).map(|_| cols.clone()).collect());
            f_in = cols.len();
        }
        Self::new(layers, m)
    }

    pub fn layers(&self) -> &[Vec<Vec<Vec<f64>>>] {
        &self.layers
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Activation {
    #[default]
    Identity,
    Relu,
    Tanh,
    /// `sqrt((1 + min(z^2, 1)) / 2)`, the value the exchange-test readout produces.
    CosReadout,
}

impl Activation {
    pub fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => libm::tanh(z),
            Activation::CosReadout => math::sqrt((1.0 + (z * z).min(1.0)) / 2.0),
        }
    }
}

fn spectral_filter(
    x: &FeatureMatrix,
    v: &Matrix,
    kernels: &[Vec<Vec<f64>>],
    h: Activation,
) -> Result<Matrix> {
    let n = x.n();
    let m = v.cols();
    if v.rows() != n {
        return Err(Error::DimensionMismatch(alloc::format!("basis has {} rows for {n} nodes", v.rows())));
    }
    if kernels.len() != x.f() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{} kernel rows for {} input features",
            kernels.len(),
            x.f()
        )));
    }
    let f_out = kernels.first().map_or(0, Vec::len);
    let vt = v.transpose();
    let coeffs: Vec<Vec<f64>> = (0..x.f()).map(|i| vt.matvec(&x.column(i))).collect::<Result<_>>()?;
    let mut out = Matrix::zeros(n, f_out);
    for j in 0..f_out {
        let mut spec = alloc::vec![0.0; m];
        for (i, c) in coeffs.iter().enumerate() {
            let k = &kernels[i][j];
            if k.len() != m {
                return Err(Error::DimensionMismatch(alloc::format!("kernel of length {} for {m} eigenvectors", k.len())));
            }
            for t in 0..m {
                spec[t] += k[t] * c[t];
            }
        }
        let col = v.matvec(&spec)?;
        for p in 0..n {
            out[(p, j)] = h.apply(col[p]);
        }
    }
    Ok(out)
}

/// `x_j = h(V sum_i F_ij V^T x_i)` with the full eigenbasis.
pub fn conv_layer_full(x: &FeatureMatrix, v: &Matrix, kernels: &[Vec<Vec<f64>>], h: Activation) -> Result<Matrix> {
    if v.rows() != v.cols() {
        return Err(Error::DimensionMismatch("full basis must be square".into()));
    }
    spectral_filter(x, v, kernels, h)
}

/// `x_j = h(V_d sum_i F_ij V_d^T x_i)`.
pub fn conv_layer_truncated(
    x: &FeatureMatrix,
    basis: &SpectralBasis,
    kernels: &[Vec<Vec<f64>>],
    h: Activation,
) -> Result<Matrix> {
    spectral_filter(x, basis.v_d(), kernels, h)
}

/// `f_s x d` table of `<x_j/|x_j|, v_k>`.
pub fn emulate_overlap_table(x: &FeatureMatrix, basis: &SpectralBasis) -> Result<Matrix> {
    if x.n() != basis.n() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{} feature rows for {} nodes",
            x.n(),
            basis.n()
        )));
    }
    let cols: Vec<Vec<f64>> = (0..basis.d()).map(|k| basis.column(k)).collect();
    Ok(Matrix::from_fn(x.f(), basis.d(), |j, k| {
        linalg::dot(&x.unit_column(j), &cols[k]).clamp(-1.0, 1.0)
    }))
}

/// Overlaps scaled back by the raw column norms, for comparison with the
/// unnormalized classical filter.
pub fn rescale_overlaps(table: &Matrix, x: &FeatureMatrix) -> Matrix {
    Matrix::from_fn(table.rows(), table.cols(), |j, k| table[(j, k)] * x.column_norms()[j])
}

/// Exact values of every quantity the layer pipeline produces.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerOracle {
    /// `s_k = sum_j theta_k overlap(j, k)`
    pub s: Vec<f64>,
    /// `max_k |s_k|`
    pub c: f64,
    pub eta: Vec<f64>,
    pub eta_norm: f64,
    /// `eta / |eta|`
    pub f_hat: Vec<f64>,
    /// `f_hat . v_p / |v_p|` per node `p`
    pub dots: Vec<f64>,
    /// `sqrt((1 + dots_p^2) / 2)`
    pub out: Vec<f64>,
    /// `sum_k eta_k^2 / d`
    pub postselect_prob: f64,
}

/// Normalization `C = max_k |s_k|` of the raw sums.
pub fn normalization(s: &[f64]) -> f64 {
    s.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn emulate_layer_output(overlaps: &Matrix, theta: &[f64], basis: &SpectralBasis) -> Result<LayerOracle> {
    let d = basis.d();
    if overlaps.cols() != d || theta.len() != d {
        return Err(Error::DimensionMismatch(alloc::format!(
            "overlap table with {} columns and {} filter values for d = {d}",
            overlaps.cols(),
            theta.len()
        )));
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("filter"));
    }
    let s: Vec<f64> = (0..d).map(|k| (0..overlaps.rows()).map(|j| theta[k] * overlaps[(j, k)]).sum()).collect();
    let c = normalization(&s);
    if c == 0.0 {
        return Err(Error::ZeroEta);
    }
    let eta: Vec<f64> = s.iter().map(|v| v / c).collect();
    layer_from_eta(s, c, eta, basis)
}

pub(crate) fn layer_from_eta(s: Vec<f64>, c: f64, eta: Vec<f64>, basis: &SpectralBasis) -> Result<LayerOracle> {
    let d = basis.d();
    let eta_norm = linalg::norm(&eta);
    if eta_norm == 0.0 {
        return Err(Error::ZeroEta);
    }
    let f_hat: Vec<f64> = eta.iter().map(|v| v / eta_norm).collect();
    let mut dots = Vec::with_capacity(basis.n());
    for p in 0..basis.n() {
        let rn = basis.row_norms()[p];
        if rn == 0.0 {
            return Err(Error::ZeroNormVector(p));
        }
        dots.push((linalg::dot(&f_hat, basis.row(p)) / rn).clamp(-1.0, 1.0));
    }
    let out = dots.iter().map(|&z| Activation::CosReadout.apply(z)).collect();
    let postselect_prob = eta.iter().map(|e| e * e).sum::<f64>() / d as f64;
    Ok(LayerOracle { s, c, eta, eta_norm, f_hat, dots, out, postselect_prob })
}
