use alloc::vec::Vec;

use num_complex::Complex64;

use super::layout::{RegId, RegisterKind};
use super::state::{matches, Controls, QState};
use crate::error::{Error, Result};
use crate::math;

/// One qubit of a register, `bit` 0 being the least significant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Qubit {
    pub reg: RegId,
    pub bit: u32,
}

impl Qubit {
    pub fn new(reg: RegId, bit: u32) -> Self {
        Self { reg, bit }
    }
}

/// In-place Walsh-Hadamard transform of a length-`2^w` vector.
pub(crate) fn walsh_hadamard(v: &mut [Complex64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
    let s = 1.0 / math::sqrt(n as f64);
    v.iter_mut().for_each(|x| *x *= s);
}

/// Unit vector `u` of the Householder reflection `I - 2uu^T` that swaps
/// `e_0` and `target` (a real unit vector, zero-padded to `dim`). `None` when
/// `target` already is `e_0`.
pub(crate) fn householder_from_e0(target: &[f64], dim: usize) -> Option<Vec<f64>> {
    let mut w: Vec<f64> = (0..dim).map(|i| -target.get(i).copied().unwrap_or(0.0)).collect();
    let t0 = -w[0];
    let tail: f64 = w[1..].iter().map(|x| x * x).sum();
    w[0] = if t0 > 0.0 { tail / (1.0 + t0) } else { 1.0 - t0 };
    let n = crate::linalg::norm(&w);
    if n < 1e-15 {
        return None;
    }
    w.iter_mut().for_each(|x| *x /= n);
    Some(w)
}

pub(crate) fn apply_householder(u: &[f64], v: &mut [Complex64]) {
    let proj: Complex64 = u.iter().zip(v.iter()).map(|(a, b)| b * *a).sum();
    for (x, a) in v.iter_mut().zip(u) {
        *x -= proj * (2.0 * a);
    }
}

impl QState {
    fn check_bit(&self, q: Qubit) -> Result<usize> {
        let p = self.pos(q.reg)?;
        if q.bit >= self.layout().at(p).width() {
            return Err(Error::InvalidRegisterKind(alloc::format!(
                "{} has no bit {}",
                self.name(q.reg),
                q.bit
            )));
        }
        Ok(p)
    }

    /// `H^{\otimes w}` on an index or flag register.
    pub fn hadamard_all(self, reg: RegId) -> Result<Self> {
        match self.layout().register(reg)?.kind() {
            RegisterKind::Index | RegisterKind::Flag => self.walsh(reg, &Controls::none()),
            _ => Err(Error::InvalidRegisterKind(self.name(reg))),
        }
    }

    /// `H^{\otimes w}` on any register, restricted to branches matching `controls`.
    pub fn walsh(self, reg: RegId, controls: &Controls) -> Result<Self> {
        if self.layout().register(reg)?.width() == 0 {
            return Ok(self);
        }
        self.apply_vector_op(&[reg], controls, |_, v| {
            walsh_hadamard(v);
            Ok(true)
        })
    }

    /// Involutive map `|0> <-> (1/sqrt(count)) sum_{i<count} |i>`.
    ///
    /// For `count == 2^w` this prepares the same state as `H^{\otimes w}`
    /// from `|0>`, but it also handles counts that are not powers of two.
    pub fn uniform(self, reg: RegId, count: usize, controls: &Controls) -> Result<Self> {
        let dim = self.layout().register(reg)?.dim();
        if count == 0 || count > dim {
            return Err(Error::DimensionMismatch(alloc::format!(
                "uniform superposition over {count} labels in a {dim}-label register"
            )));
        }
        let amp = 1.0 / math::sqrt(count as f64);
        let target: Vec<f64> = (0..count).map(|_| amp).collect();
        let Some(u) = householder_from_e0(&target, dim) else {
            return Ok(self);
        };
        self.apply_vector_op(&[reg], controls, |_, v| {
            apply_householder(&u, v);
            Ok(true)
        })
    }

    pub fn pauli_x(self, q: Qubit) -> Result<Self> {
        self.mcx(&Controls::none(), q)
    }

    pub fn cnot(self, control: Qubit, target: Qubit) -> Result<Self> {
        if control == target {
            return Err(Error::OverlappingRegisters(self.name(target.reg)));
        }
        self.check_bit(control)?;
        self.mcx(&Controls::qubit(control.reg, control.bit, true), target)
    }

    /// Bit flip on `target` for branches matching `controls`.
    pub fn mcx(self, controls: &Controls, target: Qubit) -> Result<Self> {
        let p = self.check_bit(target)?;
        if controls.registers().any(|r| r == target.reg) {
            return Err(Error::OverlappingRegisters(self.name(target.reg)));
        }
        let masks = resolve(&self, controls)?;
        let flip = 1u64 << target.bit;
        self.map_labels(|l| {
            if matches(&masks, l) {
                l[p] ^= flip;
            }
            Ok(())
        })
    }

    /// XORs a constant into `reg` on branches matching `controls`.
    pub fn xor_value(self, reg: RegId, value: u64, controls: &Controls) -> Result<Self> {
        let p = self.pos(reg)?;
        if value >= self.layout().at(p).dim() as u64 {
            return Err(Error::DimensionMismatch(alloc::format!(
                "value {value} does not fit {}",
                self.name(reg)
            )));
        }
        if controls.registers().any(|r| r == reg) {
            return Err(Error::OverlappingRegisters(self.name(reg)));
        }
        let masks = resolve(&self, controls)?;
        self.map_labels(|l| {
            if matches(&masks, l) {
                l[p] ^= value;
            }
            Ok(())
        })
    }

    /// Exchanges the labels of two equal-width registers when `control` is set.
    pub fn controlled_swap(self, control: Qubit, a: RegId, b: RegId) -> Result<Self> {
        self.check_bit(control)?;
        self.swap_registers(a, b, &Controls::qubit(control.reg, control.bit, true))
    }

    /// Exchanges the labels of two equal-width registers on branches
    /// matching `controls`.
    pub fn swap_registers(self, a: RegId, b: RegId, controls: &Controls) -> Result<Self> {
        let pa = self.pos(a)?;
        let pb = self.pos(b)?;
        if pa == pb || controls.registers().any(|r| r == a || r == b) {
            return Err(Error::OverlappingRegisters(self.name(a)));
        }
        if self.layout().at(pa).width() != self.layout().at(pb).width() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "swap of {} and {} with different widths",
                self.name(a),
                self.name(b)
            )));
        }
        let masks = resolve(&self, controls)?;
        self.map_labels(|l| {
            if matches(&masks, l) {
                l.swap(pa, pb);
            }
            Ok(())
        })
    }

    /// `phase` on every branch matching `controls`; `Controls::none()` gives a
    /// global phase.
    pub fn phase(self, phase: Complex64, controls: &Controls) -> Result<Self> {
        let masks = resolve(&self, controls)?;
        Ok(self.map_phases(|l| {
            if matches(&masks, l) {
                phase
            } else {
                Complex64::new(1.0, 0.0)
            }
        }))
    }
}

fn resolve(state: &QState, controls: &Controls) -> Result<Vec<(usize, u64, u64)>> {
    controls.resolve(state.layout())
}
