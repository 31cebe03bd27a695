//! Reversible fixed-point arithmetic on register labels.
//!
//! Every operation XORs its result into a destination register, so running
//! it a second time restores the destination. Amplitudes never change.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::layout::{RegId, RegisterKind};
use super::state::QState;
use crate::error::{Error, Result};
use crate::fixed::{FixedFormat, Rounded};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FixedOp {
    /// `a + b`
    Add,
    /// `a * b`
    Mul,
    /// `a^2`
    Square,
    /// `cos(a)`; a phase-register source is read as the angle `pi * signed(y) / 2^q`.
    Cosine,
    /// `a * x + b` with constants quantized to the destination format.
    Affine { a: f64, b: f64 },
}

impl FixedOp {
    fn arity(&self) -> usize {
        match self {
            FixedOp::Add | FixedOp::Mul => 2,
            _ => 1,
        }
    }
}

/// Angle encoded by a `q`-bit phase label, `pi * signed(y) / 2^q`.
pub fn phase_angle(label: u64, q: u32) -> f64 {
    let half = 1u64 << (q - 1);
    let signed = if label >= half { label as i64 - (1i64 << q) } else { label as i64 };
    PI * signed as f64 / (1u64 << q) as f64
}

#[derive(Clone, Copy)]
enum Source {
    Fixed(usize, FixedFormat),
    Phase(usize, u32),
}

impl QState {
    fn arith_sources(&self, op: FixedOp, sources: &[RegId], dest: RegId) -> Result<(Vec<Source>, usize, FixedFormat)> {
        if sources.len() != op.arity() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{op:?} takes {} sources, got {}",
                op.arity(),
                sources.len()
            )));
        }
        let dreg = self.layout().register(dest)?;
        let fmt = dreg.format().ok_or_else(|| Error::InvalidRegisterKind(self.name(dest)))?;
        let pd = self.pos(dest)?;
        let mut out = Vec::new();
        for &s in sources {
            if s == dest {
                return Err(Error::OverlappingRegisters(self.name(dest)));
            }
            let r = self.layout().register(s)?;
            let p = self.pos(s)?;
            match (r.kind(), op) {
                (RegisterKind::FixedPoint(f), _) => {
                    if f != fmt {
                        return Err(Error::FormatMismatch(self.name(s)));
                    }
                    out.push(Source::Fixed(p, f));
                }
                (RegisterKind::Phase, FixedOp::Cosine) => out.push(Source::Phase(p, r.width())),
                _ => return Err(Error::InvalidRegisterKind(self.name(s))),
            }
        }
        Ok((out, pd, fmt))
    }

    fn xor_fixed(self, op: FixedOp, sources: &[RegId], dest: RegId, count: bool) -> Result<Self> {
        let (srcs, pd, fmt) = self.arith_sources(op, sources, dest)?;
        let mut overflows = 0usize;
        let mut s = self.map_labels(|l| {
            let raw = |i: usize| match srcs[i] {
                Source::Fixed(p, f) => f.from_label(l[p]),
                Source::Phase(..) => 0,
            };
            let r: Rounded = match op {
                FixedOp::Add => fmt.add(raw(0), raw(1)),
                FixedOp::Mul => fmt.mul(raw(0), raw(1)),
                FixedOp::Square => fmt.square(raw(0)),
                FixedOp::Affine { a, b } => fmt.affine(raw(0), a, b),
                FixedOp::Cosine => match srcs[0] {
                    Source::Phase(p, q) => fmt.cosine(phase_angle(l[p], q)),
                    Source::Fixed(p, f) => fmt.cosine(f.decode_label(l[p])),
                },
            };
            overflows += r.saturated as usize;
            l[pd] ^= fmt.to_label(r.raw);
            Ok(())
        })?;
        if count {
            s.note_overflows(overflows);
        }
        Ok(s)
    }

    /// Computes `op(sources)` into the zeroed fixed-point register `dest`.
    /// Saturating branches are counted in the diagnostics.
    pub fn fixed_point_op(self, op: FixedOp, sources: &[RegId], dest: RegId) -> Result<Self> {
        if !self.register_is_zero(dest)? {
            return Err(Error::DestNotZero(self.name(dest)));
        }
        self.xor_fixed(op, sources, dest, true)
    }

    /// Inverse of [`QState::fixed_point_op`]; fails unless `dest` ends at zero.
    pub fn uncompute_fixed_point_op(self, op: FixedOp, sources: &[RegId], dest: RegId) -> Result<Self> {
        let s = self.xor_fixed(op, sources, dest, false)?;
        if !s.register_is_zero(dest)? {
            return Err(Error::UncomputeResidual(s.name(dest)));
        }
        Ok(s)
    }

    /// XORs `f(labels of keys)` into `dest` on every branch. This is the
    /// classically controlled bit-setting used to load tables.
    pub fn xor_lookup(self, dest: RegId, keys: &[RegId], mut f: impl FnMut(&[u64]) -> Result<u64>) -> Result<Self> {
        let pd = self.pos(dest)?;
        let dim = self.layout().register(dest)?.dim() as u64;
        let kp: Vec<usize> = keys.iter().map(|&k| self.pos(k)).collect::<Result<_>>()?;
        if kp.contains(&pd) {
            return Err(Error::OverlappingRegisters(self.name(dest)));
        }
        let mut key = Vec::with_capacity(kp.len());
        let name = self.name(dest);
        self.map_labels(|l| {
            key.clear();
            key.extend(kp.iter().map(|&p| l[p]));
            let v = f(&key)?;
            if v >= dim {
                return Err(Error::DimensionMismatch(alloc::format!("value {v} does not fit {name}")));
            }
            l[pd] ^= v;
            Ok(())
        })
    }

    /// Loads quantized `values[k]` into the zeroed fixed-point register `dest`
    /// on branches where `key` holds `k`.
    pub fn load_values(self, dest: RegId, key: RegId, values: &[f64]) -> Result<(Self, usize)> {
        let fmt = self
            .layout()
            .register(dest)?
            .format()
            .ok_or_else(|| Error::InvalidRegisterKind(self.name(dest)))?;
        if !self.register_is_zero(dest)? {
            return Err(Error::DestNotZero(self.name(dest)));
        }
        let mut saturated = 0;
        let labels: Vec<u64> = values
            .iter()
            .map(|&v| {
                let r = fmt.quantize(v);
                saturated += r.saturated as usize;
                fmt.to_label(r.raw)
            })
            .collect();
        let s = self.xor_lookup(dest, &[key], |k| Ok(labels.get(k[0] as usize).copied().unwrap_or(0)))?;
        Ok((s, saturated))
    }

    /// Reads the label of `value` as a function of the labels of `keys`.
    /// Fails with `NonClassicalBranch` when some key combination carries
    /// more than one value label.
    pub fn classical_table(&self, keys: &[RegId], value: RegId) -> Result<BTreeMap<Vec<u64>, u64>> {
        let pv = self.pos(value)?;
        let kp: Vec<usize> = keys.iter().map(|&k| self.pos(k)).collect::<Result<_>>()?;
        let mut out: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
        for (l, _) in self.iter() {
            let key: Vec<u64> = kp.iter().map(|&p| l[p]).collect();
            match out.get(&key) {
                Some(&v) if v != l[pv] => return Err(Error::NonClassicalBranch(self.name(value))),
                Some(_) => {}
                None => {
                    out.insert(key, l[pv]);
                }
            }
        }
        Ok(out)
    }
}
