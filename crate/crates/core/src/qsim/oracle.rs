//! Amplitude-encoding oracles standing in for QRAM row and column loads.
//!
//! Each load is a Householder reflection exchanging `|0>` with the target
//! normalized vector, so the same circuit both loads (from `|0>`) and
//! unloads (back to `|0>`).

use alloc::vec::Vec;

use super::gates::{apply_householder, householder_from_e0};
use super::layout::RegId;
use super::state::{matches, Controls, QState};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// U1: control label `m` loads row `m`.
    Row,
    /// U2: control label `m` loads column `m`.
    Column,
}

/// Normalized rows or columns of a real matrix, addressable by index.
#[derive(Clone, Debug)]
pub struct PreparationOracle {
    direction: Direction,
    vectors: Vec<Vec<f64>>,
    norms: Vec<f64>,
}

impl PreparationOracle {
    pub fn new(matrix: &Matrix, direction: Direction) -> Result<Self> {
        if !matrix.all_finite() {
            return Err(Error::NonFinite("oracle matrix"));
        }
        let raw: Vec<Vec<f64>> = match direction {
            Direction::Row => (0..matrix.rows()).map(|i| matrix.row(i).to_vec()).collect(),
            Direction::Column => (0..matrix.cols()).map(|j| matrix.col(j)).collect(),
        };
        let mut vectors = Vec::with_capacity(raw.len());
        let mut norms = Vec::with_capacity(raw.len());
        for (i, v) in raw.iter().enumerate() {
            let n = linalg::norm(v);
            if n == 0.0 {
                return Err(Error::ZeroNormVector(i));
            }
            norms.push(n);
            vectors.push(v.iter().map(|x| x / n).collect());
        }
        Ok(Self { direction, vectors, norms })
    }

    /// Oracle over explicitly given vectors (normalized here).
    pub fn from_vectors(vectors: &[Vec<f64>]) -> Result<Self> {
        let m = Matrix::from_rows(vectors)?;
        Self::new(&m, Direction::Row)
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Number of loadable vectors.
    pub fn count(&self) -> usize {
        self.vectors.len()
    }

    /// Length of each vector.
    pub fn len(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }

    /// l2 norms of the source vectors before normalization.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    fn reflectors_for(&self, dim: usize) -> Vec<Option<Vec<f64>>> {
        self.vectors.iter().map(|v| householder_from_e0(v, dim)).collect()
    }
}

impl QState {
    /// Loads `oracle`'s vector selected by the label of `control` into
    /// `target` on every branch matching `extra`. Branches whose control
    /// label exceeds the oracle's count are left alone.
    pub fn apply_u_prepare(
        self,
        oracle: &PreparationOracle,
        control: RegId,
        target: RegId,
        extra: &Controls,
    ) -> Result<Self> {
        let pc = self.pos(control)?;
        let pt = self.pos(target)?;
        let resolved = extra.resolve(self.layout())?;
        let count = oracle.count() as u64;
        let dirty = self
            .iter()
            .any(|(l, _)| matches(&resolved, l) && l[pc] < count && l[pt] != 0);
        if dirty {
            return Err(Error::TargetNotZero(self.name(target)));
        }
        self.toggle_load(oracle, control, target, extra)
    }

    /// Same reflection as [`QState::apply_u_prepare`] without the `|0>`
    /// precondition; applying it to a loaded register unloads it.
    pub fn toggle_load(
        self,
        oracle: &PreparationOracle,
        control: RegId,
        target: RegId,
        extra: &Controls,
    ) -> Result<Self> {
        let dim = self.layout().register(target)?.dim();
        if oracle.len() > dim {
            return Err(Error::DimensionMismatch(alloc::format!(
                "vectors of length {} in the {dim}-label register {}",
                oracle.len(),
                self.name(target)
            )));
        }
        let pc = self.pos(control)?;
        let refl = oracle.reflectors_for(dim);
        self.apply_vector_op(&[target], extra, |ctx, v| match refl.get(ctx[pc] as usize) {
            Some(Some(u)) => {
                apply_householder(u, v);
                Ok(true)
            }
            _ => Ok(false),
        })
    }

    /// Loads one fixed real unit vector into `target` (same involution).
    pub fn load_vector(self, vector: &[f64], target: RegId, controls: &Controls) -> Result<Self> {
        let dim = self.layout().register(target)?.dim();
        if vector.len() > dim {
            return Err(Error::DimensionMismatch(alloc::format!(
                "vector of length {} in the {dim}-label register {}",
                vector.len(),
                self.name(target)
            )));
        }
        let n = linalg::norm(vector);
        if n == 0.0 {
            return Err(Error::ZeroNormVector(0));
        }
        let unit: Vec<f64> = vector.iter().map(|x| x / n).collect();
        let Some(u) = householder_from_e0(&unit, dim) else {
            return Ok(self);
        };
        self.apply_vector_op(&[target], controls, |_, v| {
            apply_householder(&u, v);
            Ok(true)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::layout::{RegisterKind, RegisterLayout};
    use num_complex::Complex64;

    fn one_column(col: [f64; 2]) -> QState {
        let m = Matrix::from_columns(&[col]).unwrap();
        let o = PreparationOracle::new(&m, Direction::Column).unwrap();
        let mut l = RegisterLayout::new();
        let c = l.add("c", 0, RegisterKind::Index).unwrap();
        let t = l.add("t", 1, RegisterKind::Index).unwrap();
        QState::init(l).unwrap().apply_u_prepare(&o, c, t, &Controls::none()).unwrap()
    }

    fn re(s: &QState, l: &[u64]) -> f64 {
        let a = s.amplitude(l);
        assert!(a.im.abs() < 1e-15);
        a.re
    }

    #[test]
    fn basis_column() {
        let s = one_column([1.0, 0.0]);
        assert_eq!(s.branch_count(), 1);
        assert!((re(&s, &[0, 0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn balanced_column() {
        let s = one_column([1.0, 1.0]);
        let h = 1.0 / libm::sqrt(2.0);
        assert!((re(&s, &[0, 0]) - h).abs() < 1e-15);
        assert!((re(&s, &[0, 1]) - h).abs() < 1e-15);
    }

    #[test]
    fn three_four_column() {
        let s = one_column([3.0, 4.0]);
        assert!((re(&s, &[0, 0]) - 0.6).abs() < 1e-15);
        assert!((re(&s, &[0, 1]) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_column_rejected() {
        let m = Matrix::from_columns(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert_eq!(
            PreparationOracle::new(&m, Direction::Column).unwrap_err(),
            Error::ZeroNormVector(1)
        );
        assert_eq!(
            PreparationOracle::new(&m, Direction::Row).unwrap_err(),
            Error::ZeroNormVector(1)
        );
    }

    #[test]
    fn controlled_rows_and_unload() {
        let m = Matrix::from_rows(&[[1.0, 1.0], [1.0, -1.0]]).unwrap();
        let o = PreparationOracle::new(&m, Direction::Row).unwrap();
        let mut l = RegisterLayout::new();
        let c = l.add("c", 1, RegisterKind::Index).unwrap();
        let t = l.add("t", 1, RegisterKind::Index).unwrap();
        let s = QState::init(l).unwrap().hadamard_all(c).unwrap();
        let s = s.apply_u_prepare(&o, c, t, &Controls::none()).unwrap();
        assert!((re(&s, &[1, 1]) + 0.5).abs() < 1e-15);
        let err = s.clone().apply_u_prepare(&o, c, t, &Controls::none()).unwrap_err();
        assert_eq!(err, Error::TargetNotZero("t".into()));
        let s = s.toggle_load(&o, c, t, &Controls::none()).unwrap();
        assert!(s.register_is_zero(t).unwrap());
        assert!((s.amplitude(&[1, 0]) - Complex64::new(libm::sqrt(0.5), 0.0)).norm() < 1e-15);
    }
}
