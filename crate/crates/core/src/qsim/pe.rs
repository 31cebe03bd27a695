//! Phase estimation of unitaries that may depend on selector registers.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::layout::{RegId, RegisterKind, RegisterLayout};
use super::state::{Controls, QState};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Dense powers are used automatically up to this many target qubits.
pub const DENSE_QUBIT_LIMIT: u32 = 12;

/// A unitary on `targets` whose action is selected by the labels of
/// `selectors` (for instance one Grover operator per index pair).
pub trait BranchUnitary {
    fn targets(&self) -> Vec<RegId>;
    fn selectors(&self) -> Vec<RegId>;
    /// Gate-level application on branches matching `controls`.
    fn apply(&self, state: QState, controls: &Controls) -> Result<QState>;
    fn apply_inverse(&self, state: QState, controls: &Controls) -> Result<QState>;

    /// Dense matrix over `targets` (first target most significant) for the
    /// given selector labels, extracted from the gate-level action.
    fn matrix(&self, layout: &RegisterLayout, selector: &[u64]) -> Result<CMatrix> {
        let fixed: Vec<(RegId, u64)> = self.selectors().into_iter().zip(selector.iter().copied()).collect();
        extract_dense(layout, &self.targets(), &fixed, |s| self.apply(s, &Controls::none()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PowerStrategy {
    /// Dense squaring when the targets span at most [`DENSE_QUBIT_LIMIT`] qubits.
    #[default]
    Auto,
    /// `2^s` gate-level applications for phase bit `s`.
    Repeated,
    /// Matrix powers by repeated squaring.
    DenseSquaring,
}

/// Matrix of `op` restricted to `targets`, with the registers in `fixed`
/// held at the given labels and every other register at zero.
pub fn extract_dense(
    layout: &RegisterLayout,
    targets: &[RegId],
    fixed: &[(RegId, u64)],
    op: impl Fn(QState) -> Result<QState>,
) -> Result<CMatrix> {
    let tpos: Vec<usize> = targets.iter().map(|&t| layout.position(t)).collect::<Result<_>>()?;
    let dims: Vec<usize> = tpos.iter().map(|&p| layout.at(p).dim()).collect();
    let dim: usize = dims.iter().product();
    let mut base = alloc::vec![0u64; layout.len()];
    for &(r, v) in fixed {
        base[layout.position(r)?] = v;
    }
    let mut m = CMatrix::zeros(dim);
    for col in 0..dim {
        let mut label = base.clone();
        let mut rest = col;
        for (&p, &d) in tpos.iter().zip(&dims).rev() {
            label[p] = (rest % d) as u64;
            rest /= d;
        }
        let s = QState::from_amplitudes(layout.clone(), [(label, Complex64::new(1.0, 0.0))])?;
        let out = op(s)?;
        for (l, a) in out.iter() {
            for (p, (&lp, &bp)) in l.iter().zip(&base).enumerate() {
                if !tpos.contains(&p) && lp != bp {
                    return Err(Error::Invariant(alloc::format!(
                        "operator acts outside its targets (register {})",
                        layout.at(p).name()
                    )));
                }
            }
            let mut row = 0usize;
            for (&p, &d) in tpos.iter().zip(&dims) {
                row = row * d + l[p] as usize;
            }
            m[(row, col)] = a;
        }
    }
    Ok(m)
}

fn use_dense(layout: &RegisterLayout, u: &dyn BranchUnitary, strategy: PowerStrategy) -> Result<bool> {
    Ok(match strategy {
        PowerStrategy::Repeated => false,
        PowerStrategy::DenseSquaring => true,
        PowerStrategy::Auto => {
            let mut w = 0;
            for t in u.targets() {
                w += layout.register(t)?.width();
            }
            w <= DENSE_QUBIT_LIMIT
        }
    })
}

/// Dense `U(sel)^{2^s}` for `s < q`, one list per selector tuple on the support.
fn dense_powers(state: &QState, u: &dyn BranchUnitary, q: u32) -> Result<BTreeMap<Vec<u64>, Vec<CMatrix>>> {
    let sel = u.selectors();
    let keys = state.marginal(&sel)?;
    let mut out = BTreeMap::new();
    for key in keys.into_keys() {
        let mut m = u.matrix(state.layout(), &key)?;
        let mut powers = Vec::with_capacity(q as usize);
        for _ in 0..q {
            let next = m.mul(&m);
            powers.push(m);
            m = next;
        }
        out.insert(key, powers);
    }
    Ok(out)
}

fn controlled_power(
    state: QState,
    u: &dyn BranchUnitary,
    phase: RegId,
    s: u32,
    dense: Option<&BTreeMap<Vec<u64>, Vec<CMatrix>>>,
    inverse: bool,
) -> Result<QState> {
    let ctl = Controls::qubit(phase, s, true);
    match dense {
        Some(powers) => {
            let sp: Vec<usize> = u.selectors().iter().map(|&r| state.layout().position(r)).collect::<Result<_>>()?;
            let adj: BTreeMap<&Vec<u64>, CMatrix>;
            let lookup: BTreeMap<Vec<u64>, &CMatrix> = if inverse {
                adj = powers.iter().map(|(k, v)| (k, v[s as usize].adjoint())).collect();
                adj.iter().map(|(k, m)| ((*k).clone(), m)).collect()
            } else {
                powers.iter().map(|(k, v)| (k.clone(), &v[s as usize])).collect()
            };
            state.apply_matrices(&u.targets(), &ctl, |ctx| {
                let key: Vec<u64> = sp.iter().map(|&p| ctx[p]).collect();
                lookup.get(&key).copied()
            })
        }
        None => {
            let mut st = state;
            for _ in 0..(1u64 << s) {
                st = if inverse { u.apply_inverse(st, &ctl)? } else { u.apply(st, &ctl)? };
            }
            Ok(st)
        }
    }
}

/// Appends a `q`-qubit phase register named `name` and runs phase
/// estimation of `u` into it. An eigenphase `e^{2 pi i phi}` reads out near
/// label `phi * 2^q`.
pub fn phase_estimate(
    state: QState,
    u: &dyn BranchUnitary,
    name: &str,
    q: u32,
    strategy: PowerStrategy,
) -> Result<(QState, RegId)> {
    let (mut s, phase) = state.add_register(name, q, RegisterKind::Phase)?;
    s = s.walsh(phase, &Controls::none())?;
    let dense = if use_dense(s.layout(), u, strategy)? { Some(dense_powers(&s, u, q)?) } else { None };
    for bit in 0..q {
        s = controlled_power(s, u, phase, bit, dense.as_ref(), false)?;
    }
    Ok((s.inverse_qft(phase)?, phase))
}

/// Undoes [`phase_estimate`]; the phase register is left in place for the
/// caller to check and drop.
pub fn inverse_phase_estimate(
    state: QState,
    u: &dyn BranchUnitary,
    phase: RegId,
    strategy: PowerStrategy,
) -> Result<QState> {
    let q = state.layout().register(phase)?.width();
    let mut s = state.qft(phase)?;
    let dense = if use_dense(s.layout(), u, strategy)? { Some(dense_powers(&s, u, q)?) } else { None };
    for bit in (0..q).rev() {
        s = controlled_power(s, u, phase, bit, dense.as_ref(), true)?;
    }
    s.walsh(phase, &Controls::none())
}
