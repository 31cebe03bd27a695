//! Eigendecomposition of the Laplacian and the truncated basis `V_d`.
//!
//! The eigenpairs are obtained by exact diagonalization. The `e^{iLt}`
//! oracle and a phase-estimation readout of single eigenvalues are provided
//! on top of the same decomposition.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Laplacian;
use crate::linalg::{self, CMatrix, Matrix};
use crate::math;
use crate::qsim::{self, BranchUnitary, Controls, PowerStrategy, QState, RegId, RegisterKind, RegisterLayout};

/// Which end of the spectrum `V_d` retains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EigenOrder {
    #[default]
    Largest,
    Smallest,
}

/// All eigenpairs of a Laplacian, eigenvalues descending.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: Matrix,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns are the eigenvectors, in eigenvalue order.
    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    /// `V diag(lambda) V^T`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.n();
        let v = &self.eigenvectors;
        Matrix::from_fn(n, n, |i, j| (0..n).map(|k| v[(i, k)] * self.eigenvalues[k] * v[(j, k)]).sum())
    }
}

/// The retained `d` eigenpairs.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralBasis {
    order: EigenOrder,
    v_d: Matrix,
    lambda_d: Vec<f64>,
    row_norms: Vec<f64>,
}

impl SpectralBasis {
    pub fn d(&self) -> usize {
        self.lambda_d.len()
    }

    pub fn n(&self) -> usize {
        self.v_d.rows()
    }

    pub fn order(&self) -> EigenOrder {
        self.order
    }

    /// `n x d`, columns orthonormal.
    pub fn v_d(&self) -> &Matrix {
        &self.v_d
    }

    pub fn lambda_d(&self) -> &[f64] {
        &self.lambda_d
    }

    /// l2 norms of the `n` rows of `V_d`.
    pub fn row_norms(&self) -> &[f64] {
        &self.row_norms
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.v_d.col(k)
    }

    pub fn row(&self, p: usize) -> &[f64] {
        self.v_d.row(p)
    }

    /// `V_d V_d^T`.
    pub fn projector(&self) -> Matrix {
        let n = self.n();
        let v = &self.v_d;
        Matrix::from_fn(n, n, |i, j| (0..self.d()).map(|k| v[(i, k)] * v[(j, k)]).sum())
    }

    /// Basis from explicitly given orthonormal columns (tests and replays).
    pub fn from_parts(v_d: Matrix, lambda_d: Vec<f64>, order: EigenOrder) -> Result<Self> {
        let d = v_d.cols();
        if lambda_d.len() != d {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} eigenvalues for {d} eigenvectors",
                lambda_d.len()
            )));
        }
        if d == 0 || d > v_d.rows() || !d.is_power_of_two() {
            return Err(Error::InvalidD { d, n: v_d.rows() });
        }
        let row_norms = (0..v_d.rows()).map(|p| linalg::norm(v_d.row(p))).collect();
        Ok(Self { order, v_d, lambda_d, row_norms })
    }
}

/// Eigenvalues closer than this (relative to the spectral radius) are
/// treated as degenerate when ordering columns.
const DEGENERACY_TOL: f64 = 1e-9;

fn lexicographic_desc(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.partial_cmp(x) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

pub fn eigendecompose(l: &Laplacian) -> Result<SpectralDecomposition> {
    let (values, vectors) = linalg::symmetric_eigen(l.entries())?;
    let n = values.len();
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|k| {
            let mut v = vectors.col(k);
            let first = v.iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(0.0);
            if first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            (values[k], v)
        })
        .collect();
    pairs.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= DEGENERACY_TOL * scale {
            lexicographic_desc(&a.1, &b.1)
        } else {
            b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal)
        }
    });
    let eigenvalues = pairs.iter().map(|p| p.0).collect();
    let cols: Vec<Vec<f64>> = pairs.into_iter().map(|p| p.1).collect();
    Ok(SpectralDecomposition { eigenvalues, eigenvectors: Matrix::from_columns(&cols)? })
}

/// The `d` largest eigenpairs (descending).
pub fn top_d(dec: &SpectralDecomposition, d: usize) -> Result<SpectralBasis> {
    select(dec, d, EigenOrder::Largest)
}

/// The `d` eigenpairs at the chosen end of the spectrum; `Smallest` lists
/// them in ascending order.
pub fn select(dec: &SpectralDecomposition, d: usize, order: EigenOrder) -> Result<SpectralBasis> {
    let n = dec.n();
    if d == 0 || d > n || !d.is_power_of_two() {
        return Err(Error::InvalidD { d, n });
    }
    let idx: Vec<usize> = match order {
        EigenOrder::Largest => (0..d).collect(),
        EigenOrder::Smallest => (0..d).map(|i| n - 1 - i).collect(),
    };
    let cols: Vec<Vec<f64>> = idx.iter().map(|&k| dec.eigenvectors.col(k)).collect();
    let lambda = idx.iter().map(|&k| dec.eigenvalues[k]).collect();
    SpectralBasis::from_parts(Matrix::from_columns(&cols)?, lambda, order)
}

/// Eigenvalue indices observed when measuring the maximally mixed input in
/// the eigenbasis, i.e. uniform draws over `0..n`.
pub fn sample_eigen_measurement(dec: &SpectralDecomposition, shots: usize, seed: u64) -> Result<Vec<usize>> {
    if shots == 0 {
        return Err(Error::InvalidConfig("shots must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..shots).map(|_| rng.random_range(0..dec.n())).collect())
}

/// `pi / (2 lambda_max)`, keeping every eigenphase `lambda t` in `[0, pi/2]`.
pub fn default_time(dec: &SpectralDecomposition) -> f64 {
    let lmax = dec.eigenvalues.first().copied().unwrap_or(0.0);
    if lmax > 0.0 {
        PI / (2.0 * lmax)
    } else {
        PI / 2.0
    }
}

/// `e^{iLt}` built from the decomposition.
pub fn evolution_operator(dec: &SpectralDecomposition, t: f64) -> CMatrix {
    let n = dec.n();
    let v = &dec.eigenvectors;
    CMatrix::from_fn(n, |i, j| {
        (0..n)
            .map(|k| {
                let ph = dec.eigenvalues[k] * t;
                Complex64::new(math::cos(ph), math::sin(ph)) * (v[(i, k)] * v[(j, k)])
            })
            .sum()
    })
}

struct Evolution {
    reg: RegId,
    matrix: CMatrix,
}

impl BranchUnitary for Evolution {
    fn targets(&self) -> Vec<RegId> {
        alloc::vec![self.reg]
    }
    fn selectors(&self) -> Vec<RegId> {
        Vec::new()
    }
    fn apply(&self, s: QState, c: &Controls) -> Result<QState> {
        s.apply_matrices(&[self.reg], c, |_| Some(&self.matrix))
    }
    fn apply_inverse(&self, s: QState, c: &Controls) -> Result<QState> {
        let adj = self.matrix.adjoint();
        s.apply_matrices(&[self.reg], c, |_| Some(&adj))
    }
    fn matrix(&self, _: &RegisterLayout, _: &[u64]) -> Result<CMatrix> {
        Ok(self.matrix.clone())
    }
}

/// Phase estimation of `e^{iLt}` (default `t`) on eigenvector `j` with a
/// `q`-bit register. Returns the modal label and the eigenvalue it encodes.
pub fn estimate_eigenvalue(dec: &SpectralDecomposition, j: usize, q: u32) -> Result<(u64, f64)> {
    let n = dec.n();
    if j >= n {
        return Err(Error::IndexOutOfRange { u: j, v: j, n });
    }
    let t = default_time(dec);
    let w = math::ceil_log2(n);
    let dim = 1usize << w;
    let u = evolution_operator(dec, t);
    let padded = CMatrix::from_fn(dim, |a, b| {
        if a < n && b < n {
            u[(a, b)]
        } else if a == b {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let mut layout = RegisterLayout::with_max_qubits(w + q);
    let reg = layout.add("node", w, RegisterKind::Index)?;
    let s = QState::init(layout)?.load_vector(&dec.eigenvectors.col(j), reg, &Controls::none())?;
    let op = Evolution { reg, matrix: padded };
    let (s, phase) = qsim::phase_estimate(s, &op, "phase", q, PowerStrategy::DenseSquaring)?;
    let dist = s.marginal(&[phase])?;
    let (label, _) = dist
        .iter()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(Ordering::Equal))
        .map(|(k, p)| (k[0], *p))
        .ok_or(Error::Invariant("empty phase distribution".into()))?;
    let lambda = 2.0 * PI * label as f64 / ((1u64 << q) as f64 * t);
    Ok((label, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_weight_matrix, laplacian};
    use rand::Rng;

    fn lap(edges: &[(usize, usize, f64)], n: usize) -> Laplacian {
        laplacian(&build_weight_matrix(edges, n).unwrap())
    }

    fn random_lap(n: usize, seed: u64) -> Laplacian {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < 0.5 {
                    edges.push((i, j, rng.random_range(0.1..2.0)));
                }
            }
        }
        lap(&edges, n)
    }

    #[test]
    fn p2_spectrum() {
        let dec = eigendecompose(&lap(&[(0, 1, 1.0)], 2)).unwrap();
        assert!((dec.eigenvalues()[0] - 2.0).abs() < 1e-12);
        assert!(dec.eigenvalues()[1].abs() < 1e-12);
        let h = 1.0 / libm::sqrt(2.0);
        let v = dec.eigenvectors();
        assert!((v[(0, 0)] - h).abs() < 1e-12 && (v[(1, 0)] + h).abs() < 1e-12);
        assert!((v[(0, 1)] - h).abs() < 1e-12 && (v[(1, 1)] - h).abs() < 1e-12);
    }

    #[test]
    fn k3_spectrum() {
        let dec = eigendecompose(&lap(&[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)], 3)).unwrap();
        let ev = dec.eigenvalues();
        assert!((ev[0] - 3.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12 && ev[2].abs() < 1e-12);
    }

    #[test]
    fn random_against_nalgebra() {
        let l = random_lap(8, 17);
        let dec = eigendecompose(&l).unwrap();
        let m = nalgebra::DMatrix::from_fn(8, 8, |i, j| l.entries()[(i, j)]);
        let mut reference: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        reference.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in dec.eigenvalues().iter().zip(&reference) {
            assert!((a - b).abs() < 1e-8);
        }
        for k in 0..8 {
            let v = dec.eigenvectors().col(k);
            let lv = l.entries().matvec(&v).unwrap();
            for (x, y) in lv.iter().zip(&v) {
                assert!((x - dec.eigenvalues()[k] * y).abs() < 1e-8);
            }
        }
        assert!(dec.reconstruct().frobenius_distance(l.entries()) < 1e-8);
    }

    #[test]
    fn sign_convention() {
        let dec = eigendecompose(&random_lap(6, 3)).unwrap();
        for k in 0..6 {
            let v = dec.eigenvectors().col(k);
            assert!(v.iter().find(|x| x.abs() > 1e-12).unwrap() > &0.0);
        }
    }

    #[test]
    fn top_d_examples() {
        let dec = eigendecompose(&lap(&[(0, 1, 1.0)], 2)).unwrap();
        let full = top_d(&dec, 2).unwrap();
        assert_eq!(full.v_d(), dec.eigenvectors());
        let one = top_d(&dec, 1).unwrap();
        assert_eq!(one.lambda_d().len(), 1);
        assert!((one.lambda_d()[0] - 2.0).abs() < 1e-12);
        assert!((one.row(0)[0] - libm::sqrt(0.5)).abs() < 1e-12);

        let l3 = lap(&[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)], 3);
        let dec3 = eigendecompose(&l3).unwrap();
        let b = top_d(&dec3, 2).unwrap();
        for k in 0..2 {
            let v = b.column(k);
            let lv = l3.entries().matvec(&v).unwrap();
            for (x, y) in lv.iter().zip(&v) {
                assert!((x - 3.0 * y).abs() < 1e-10);
            }
            assert!(v.iter().sum::<f64>().abs() < 1e-10);
        }
        assert!(linalg::dot(&b.column(0), &b.column(1)).abs() < 1e-10);
    }

    #[test]
    fn invalid_d() {
        let dec = eigendecompose(&random_lap(4, 1)).unwrap();
        assert_eq!(top_d(&dec, 0).unwrap_err(), Error::InvalidD { d: 0, n: 4 });
        assert_eq!(top_d(&dec, 3).unwrap_err(), Error::InvalidD { d: 3, n: 4 });
        assert_eq!(top_d(&dec, 8).unwrap_err(), Error::InvalidD { d: 8, n: 4 });
    }

    #[test]
    fn full_projector_is_identity() {
        let dec = eigendecompose(&random_lap(8, 5)).unwrap();
        let b = top_d(&dec, 8).unwrap();
        assert!(b.projector().frobenius_distance(&Matrix::identity(8)) < 1e-10);
    }

    #[test]
    fn degenerate_subspace_reproducible() {
        let l3 = lap(&[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)], 3);
        let a = top_d(&eigendecompose(&l3).unwrap(), 2).unwrap().projector();
        let b = top_d(&eigendecompose(&l3).unwrap(), 2).unwrap().projector();
        assert!(a.frobenius_distance(&b) < 1e-8);
        let expected = Matrix::from_fn(3, 3, |i, j| if i == j { 2.0 / 3.0 } else { -1.0 / 3.0 });
        assert!(a.frobenius_distance(&expected) < 1e-8);
    }

    #[test]
    fn smallest_order() {
        let dec = eigendecompose(&lap(&[(0, 1, 1.0)], 2)).unwrap();
        let b = select(&dec, 1, EigenOrder::Smallest).unwrap();
        assert!(b.lambda_d()[0].abs() < 1e-12);
    }

    #[test]
    fn sampling() {
        let dec = eigendecompose(&lap(&[(0, 1, 1.0)], 2)).unwrap();
        assert!(sample_eigen_measurement(&dec, 0, 1).is_err());
        let s = sample_eigen_measurement(&dec, 10_000, 42).unwrap();
        let ones = s.iter().filter(|&&i| i == 1).count() as f64;
        // 3 sigma of a fair binomial with 10^4 trials is 150
        assert!((ones - 5000.0).abs() < 150.0);

        let dec4 = eigendecompose(&random_lap(4, 2)).unwrap();
        let s = sample_eigen_measurement(&dec4, 10_000, 7).unwrap();
        let mut counts = [0f64; 4];
        s.iter().for_each(|&i| counts[i] += 1.0);
        let chi2: f64 = counts.iter().map(|c| (c - 2500.0) * (c - 2500.0) / 2500.0).sum();
        // chi-square critical value, 3 degrees of freedom, 0.01 level
        assert!(chi2 < 11.345);
    }

    #[test]
    fn evolution_is_unitary_and_pe_reads_eigenvalues() {
        let dec = eigendecompose(&lap(&[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)], 4)).unwrap();
        let u = evolution_operator(&dec, default_time(&dec));
        assert!(u.mul(&u.adjoint()).max_distance(&CMatrix::identity(4)) < 1e-12);
        // lambda_max t = pi/2 is exactly a quarter turn: label 2^q / 4
        let (label, lambda) = estimate_eigenvalue(&dec, 0, 6).unwrap();
        assert_eq!(label, 16);
        assert!((lambda - dec.eigenvalues()[0]).abs() < 1e-12);
        for j in 1..4 {
            let (_, lambda) = estimate_eigenvalue(&dec, j, 8).unwrap();
            let step = 2.0 * PI / (256.0 * default_time(&dec));
            assert!((lambda - dec.eigenvalues()[j]).abs() <= step / 2.0 + 1e-12);
        }
    }
}
