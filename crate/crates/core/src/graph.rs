//! Weight, degree and Laplacian matrices of an undirected weighted graph.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::math;

/// Symmetric, non-negative weight matrix with a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    weights: Matrix,
}

impl WeightedGraph {
    /// Validates a dense weight matrix.
    pub fn from_matrix(weights: Matrix) -> Result<Self> {
        let n = weights.rows();
        if n != weights.cols() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "weight matrix is {}x{}",
                n,
                weights.cols()
            )));
        }
        if n < 2 {
            return Err(Error::InvalidNodeCount(n));
        }
        if !weights.all_finite() {
            return Err(Error::NonFinite("weight matrix"));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::InvalidWeights("zero diagonal"));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if w < 0.0 {
                    return Err(Error::NegativeWeight { u: i, v: j, w });
                }
                if w != weights[(j, i)] {
                    return Err(Error::InvalidWeights("symmetry"));
                }
            }
        }
        Ok(Self { weights })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.weights.rows()
    }

    #[inline]
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }
}

/// Diagonal of the degree matrix, `d_ii = sum_j w_ij`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeMatrix {
    diag: Vec<f64>,
}

impl DegreeMatrix {
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn to_matrix(&self) -> Matrix {
        let n = self.diag.len();
        Matrix::from_fn(n, n, |i, j| if i == j { self.diag[i] } else { 0.0 })
    }
}

/// Unnormalized graph Laplacian `L = D - W`.
#[derive(Clone, Debug, PartialEq)]
pub struct Laplacian {
    entries: Matrix,
}

impl Laplacian {
    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn n(&self) -> usize {
        self.entries.rows()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.entries.row(i).iter().sum()).collect()
    }

    /// `x^T L x`.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        let lx = self.entries.matvec(x)?;
        Ok(dot(x, &lx))
    }
}

/// Places each `(u, v, w)` edge symmetrically into an `n x n` weight matrix.
///
/// Duplicate pairs are rejected in either orientation.
pub fn build_weight_matrix(edges: &[(usize, usize, f64)], n: usize) -> Result<WeightedGraph> {
    if n < 2 {
        return Err(Error::InvalidNodeCount(n));
    }
    let mut w = Matrix::zeros(n, n);
    let mut seen = Matrix::zeros(n, n);
    for &(u, v, weight) in edges {
        if u >= n || v >= n {
            return Err(Error::IndexOutOfRange { u, v, n });
        }
        if !weight.is_finite() {
            return Err(Error::NonFinite("edge weight"));
        }
        if weight < 0.0 {
            return Err(Error::NegativeWeight { u, v, w: weight });
        }
        if u == v {
            return Err(Error::SelfLoop(u));
        }
        if seen[(u, v)] != 0.0 {
            return Err(Error::DuplicateEdge { u, v });
        }
        seen[(u, v)] = 1.0;
        seen[(v, u)] = 1.0;
        w[(u, v)] = weight;
        w[(v, u)] = weight;
    }
    WeightedGraph::from_matrix(w)
}

/// Dense graph with `w_ij = exp(-||x_i - x_j||^2 / (2 sigma^2))` between the
/// rows of `features`.
pub fn gaussian_similarity(features: &Matrix, sigma: f64) -> Result<WeightedGraph> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let n = features.rows();
    if n < 2 {
        return Err(Error::InvalidNodeCount(n));
    }
    if !features.all_finite() {
        return Err(Error::NonFinite("feature matrix"));
    }
    let denom = 2.0 * sigma * sigma;
    let w = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            return 0.0;
        }
        // Evaluate the pair in a fixed orientation so w_ij == w_ji bitwise.
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let d2: f64 = features
            .row(a)
            .iter()
            .zip(features.row(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        math::exp(-d2 / denom)
    });
    WeightedGraph::from_matrix(w)
}

pub fn degree_matrix(g: &WeightedGraph) -> DegreeMatrix {
    let w = g.weights();
    DegreeMatrix { diag: (0..g.n()).map(|i| w.row(i).iter().sum()).collect() }
}

pub fn laplacian(g: &WeightedGraph) -> Laplacian {
    let deg = degree_matrix(g);
    let w = g.weights();
    let n = g.n();
    let entries = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            deg.diag[i] - w[(i, j)]
        } else {
            -w[(i, j)]
        }
    });
    Laplacian { entries }
}
