use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use smallvec::SmallVec;

use super::layout::{RegId, RegisterKind, RegisterLayout};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Composite basis label, one entry per register in layout order.
pub type Label = SmallVec<[u64; 12]>;

/// Amplitudes below this modulus are dropped after every operation.
pub const PRUNE_THRESHOLD: f64 = 1e-14;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Events recorded while evolving a state.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Branches on which a fixed-point result saturated.
    pub overflow_events: usize,
}

/// Sparse multi-register quantum state.
///
/// Amplitudes are stored in a map keyed by the composite label, so the
/// iteration order is deterministic. Operations consume the state and return
/// the evolved one; nothing is renormalized behind the caller's back.
#[derive(Clone, Debug)]
pub struct QState {
    layout: RegisterLayout,
    amps: BTreeMap<Label, Complex64>,
    diagnostics: Diagnostics,
}

/// Conjunction of conditions on register labels selecting the branches an
/// operation acts on.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Controls {
    conds: Vec<Condition>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Condition {
    reg: RegId,
    mask: u64,
    value: u64,
}

impl Controls {
    pub fn none() -> Self {
        Self::default()
    }

    /// Single-qubit control: bit `bit` of `reg` must be set (`on`) or clear.
    pub fn qubit(reg: RegId, bit: u32, on: bool) -> Self {
        Self::none().and_qubit(reg, bit, on)
    }

    /// The whole register must hold `value`.
    pub fn value(reg: RegId, value: u64) -> Self {
        Self::none().and_value(reg, value)
    }

    pub fn and_qubit(mut self, reg: RegId, bit: u32, on: bool) -> Self {
        let mask = 1u64 << bit;
        self.conds.push(Condition { reg, mask, value: if on { mask } else { 0 } });
        self
    }

    pub fn and_value(mut self, reg: RegId, value: u64) -> Self {
        self.conds.push(Condition { reg, mask: u64::MAX, value });
        self
    }

    pub fn and(mut self, other: &Controls) -> Self {
        self.conds.extend_from_slice(&other.conds);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.conds.is_empty()
    }

    pub fn registers(&self) -> impl Iterator<Item = RegId> + '_ {
        self.conds.iter().map(|c| c.reg)
    }

    pub(crate) fn resolve(&self, layout: &RegisterLayout) -> Result<Vec<(usize, u64, u64)>> {
        self.conds
            .iter()
            .map(|c| Ok((layout.position(c.reg)?, c.mask, c.value)))
            .collect()
    }
}

#[inline]
pub(crate) fn matches(resolved: &[(usize, u64, u64)], label: &[u64]) -> bool {
    resolved.iter().all(|&(p, mask, value)| label[p] & mask == value)
}

impl QState {
    /// All-zero basis state on `layout`.
    pub fn init(layout: RegisterLayout) -> Result<Self> {
        if layout.is_empty() {
            return Err(Error::EmptyLayout);
        }
        let needed = layout.total_qubits();
        if needed > layout.max_qubits() {
            return Err(Error::LayoutTooWide { needed, max: layout.max_qubits() });
        }
        let mut amps = BTreeMap::new();
        amps.insert(Label::from_elem(0, layout.len()), Complex64::new(1.0, 0.0));
        Ok(Self { layout, amps, diagnostics: Diagnostics::default() })
    }

    /// State with explicitly given amplitudes. Labels must have one in-range
    /// entry per register; repeated labels are summed.
    pub fn from_amplitudes<I, L>(layout: RegisterLayout, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (L, Complex64)>,
        L: AsRef<[u64]>,
    {
        let mut state = Self::init(layout)?;
        state.amps.clear();
        for (label, amp) in entries {
            let label = label.as_ref();
            if label.len() != state.layout.len() {
                return Err(Error::DimensionMismatch(alloc::format!(
                    "label has {} entries for {} registers",
                    label.len(),
                    state.layout.len()
                )));
            }
            for (p, &l) in label.iter().enumerate() {
                if l >= state.layout.at(p).dim() as u64 {
                    return Err(Error::DimensionMismatch(alloc::format!(
                        "label {l} out of range for register {}",
                        state.layout.at(p).name()
                    )));
                }
            }
            *state.amps.entry(Label::from_slice(label)).or_insert(ZERO) += amp;
        }
        state.prune();
        Ok(state)
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    /// Number of stored (nonzero) amplitudes.
    pub fn branch_count(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn amplitude(&self, label: &[u64]) -> Complex64 {
        self.amps.get(label).copied().unwrap_or(ZERO)
    }

    /// Amplitudes in ascending label order.
    pub fn iter(&self) -> impl Iterator<Item = (&[u64], Complex64)> {
        self.amps.iter().map(|(l, a)| (l.as_slice(), *a))
    }

    pub(crate) fn pos(&self, id: RegId) -> Result<usize> {
        self.layout.position(id)
    }

    pub(crate) fn name(&self, id: RegId) -> alloc::string::String {
        self.layout.name_of(id)
    }

    pub(crate) fn note_overflows(&mut self, count: usize) {
        self.diagnostics.overflow_events += count;
    }

    /// Extends every label with a new register in `|0>`.
    pub fn add_register(mut self, name: &str, width: u32, kind: RegisterKind) -> Result<(Self, RegId)> {
        let id = self.layout.add(name, width, kind)?;
        let amps = core::mem::take(&mut self.amps);
        self.amps = amps
            .into_iter()
            .map(|(mut l, a)| {
                l.push(0);
                (l, a)
            })
            .collect();
        Ok((self, id))
    }

    pub fn add_fixed(self, name: &str, format: crate::fixed::FixedFormat) -> Result<(Self, RegId)> {
        self.add_register(name, format.width(), RegisterKind::FixedPoint(format))
    }

    /// Whether `reg` holds `|0>` on every stored branch.
    pub fn register_is_zero(&self, reg: RegId) -> Result<bool> {
        let p = self.pos(reg)?;
        Ok(self.amps.keys().all(|l| l[p] == 0))
    }

    /// Removes a register that is exactly `|0>` on every branch.
    pub fn drop_register(mut self, reg: RegId) -> Result<Self> {
        if !self.register_is_zero(reg)? {
            return Err(Error::UncomputeResidual(self.name(reg)));
        }
        let p = self.layout.remove(reg)?;
        let amps = core::mem::take(&mut self.amps);
        self.amps = amps
            .into_iter()
            .map(|(mut l, a)| {
                l.remove(p);
                (l, a)
            })
            .collect();
        Ok(self)
    }

    /// Distinct labels of `reg` across stored branches.
    pub fn register_labels(&self, reg: RegId) -> Result<alloc::collections::BTreeSet<u64>> {
        let p = self.pos(reg)?;
        Ok(self.amps.keys().map(|l| l[p]).collect())
    }

    fn prune(&mut self) {
        self.amps.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
    }

    /// Basis permutation. `f` rewrites each label in place and must be
    /// injective on the support.
    pub(crate) fn map_labels(mut self, mut f: impl FnMut(&mut Label) -> Result<()>) -> Result<Self> {
        let amps = core::mem::take(&mut self.amps);
        let mut out = BTreeMap::new();
        for (mut l, a) in amps {
            f(&mut l)?;
            if out.insert(l, a).is_some() {
                return Err(Error::Invariant("label map is not injective".into()));
            }
        }
        self.amps = out;
        Ok(self)
    }

    /// Multiplies each amplitude by a label-dependent factor of unit modulus.
    pub(crate) fn map_phases(mut self, mut f: impl FnMut(&Label) -> Complex64) -> Self {
        for (l, a) in self.amps.iter_mut() {
            *a *= f(l);
        }
        self
    }

    /// Applies `op` to the dense vector over `targets` (first target most
    /// significant) of every branch group selected by `controls`.
    ///
    /// `op` receives the context label, i.e. the group's label with the target
    /// entries zeroed, and returns `false` to leave the group untouched.
    pub(crate) fn apply_vector_op(
        mut self,
        targets: &[RegId],
        controls: &Controls,
        mut op: impl FnMut(&Label, &mut [Complex64]) -> Result<bool>,
    ) -> Result<Self> {
        let tpos: Vec<usize> = targets.iter().map(|&t| self.pos(t)).collect::<Result<_>>()?;
        for (i, p) in tpos.iter().enumerate() {
            if tpos[..i].contains(p) {
                return Err(Error::OverlappingRegisters(self.name(targets[i])));
            }
        }
        for c in controls.registers() {
            if targets.contains(&c) {
                return Err(Error::OverlappingRegisters(self.name(c)));
            }
        }
        let resolved = controls.resolve(&self.layout)?;
        let dims: Vec<usize> = tpos.iter().map(|&p| self.layout.at(p).dim()).collect();
        let dim: usize = dims.iter().product();

        let amps = core::mem::take(&mut self.amps);
        let mut out: BTreeMap<Label, Complex64> = BTreeMap::new();
        let mut groups: BTreeMap<Label, Vec<(usize, Complex64)>> = BTreeMap::new();
        for (l, a) in amps {
            if !matches(&resolved, &l) {
                out.insert(l, a);
                continue;
            }
            let mut idx = 0usize;
            let mut ctx = l;
            for (&p, &d) in tpos.iter().zip(&dims) {
                idx = idx * d + ctx[p] as usize;
                ctx[p] = 0;
            }
            groups.entry(ctx).or_default().push((idx, a));
        }

        let mut buf = vec![ZERO; dim];
        for (ctx, entries) in groups {
            buf.iter_mut().for_each(|v| *v = ZERO);
            for &(i, a) in &entries {
                buf[i] = a;
            }
            let changed = op(&ctx, &mut buf)?;
            if !changed {
                for (i, a) in entries {
                    out.insert(with_targets(&ctx, &tpos, &dims, i), a);
                }
                continue;
            }
            for (i, &a) in buf.iter().enumerate() {
                if a.norm() >= PRUNE_THRESHOLD {
                    *out.entry(with_targets(&ctx, &tpos, &dims, i)).or_insert(ZERO) += a;
                }
            }
        }
        self.amps = out;
        self.prune();
        Ok(self)
    }

    /// Multiplies each selected group's target vector by the matrix `lookup`
    /// returns for its context (`None` leaves the group unchanged).
    pub(crate) fn apply_matrices<'m>(
        self,
        targets: &[RegId],
        controls: &Controls,
        lookup: impl Fn(&Label) -> Option<&'m CMatrix>,
    ) -> Result<Self> {
        self.apply_vector_op(targets, controls, |ctx, v| match lookup(ctx) {
            None => Ok(false),
            Some(m) => {
                if m.dim() != v.len() {
                    return Err(Error::DimensionMismatch(alloc::format!(
                        "{}-dimensional operator on a {}-dimensional subsystem",
                        m.dim(),
                        v.len()
                    )));
                }
                let r = m.apply(v);
                v.copy_from_slice(&r);
                Ok(true)
            }
        })
    }
}

fn with_targets(ctx: &Label, tpos: &[usize], dims: &[usize], mut idx: usize) -> Label {
    let mut l = ctx.clone();
    for (&p, &d) in tpos.iter().zip(dims).rev() {
        l[p] = (idx % d) as u64;
        idx /= d;
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_regs() -> (RegisterLayout, RegId, RegId) {
        let mut l = RegisterLayout::new();
        let a = l.add("a", 2, RegisterKind::Index).unwrap();
        let b = l.add("b", 3, RegisterKind::Index).unwrap();
        (l, a, b)
    }

    #[test]
    fn init_is_all_zero() {
        let (l, _, _) = two_regs();
        let s = QState::init(l).unwrap();
        assert_eq!(s.branch_count(), 1);
        assert_eq!(s.amplitude(&[0, 0]), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn empty_layout_rejected() {
        assert_eq!(QState::init(RegisterLayout::new()).unwrap_err(), Error::EmptyLayout);
    }

    #[test]
    fn forty_qubits_ok_forty_one_not() {
        let mut l = RegisterLayout::new();
        l.add("a", 40, RegisterKind::Index).unwrap();
        assert!(QState::init(l).is_ok());
        let mut l = RegisterLayout::new();
        l.add("a", 30, RegisterKind::Index).unwrap();
        assert_eq!(
            l.add("b", 11, RegisterKind::Index),
            Err(Error::LayoutTooWide { needed: 41, max: 40 })
        );
    }

    #[test]
    fn add_and_drop_register() {
        let (l, a, _) = two_regs();
        let s = QState::init(l).unwrap();
        let (s, c) = s.add_register("c", 1, RegisterKind::Flag).unwrap();
        assert_eq!(s.amplitude(&[0, 0, 0]), Complex64::new(1.0, 0.0));
        let s = s.drop_register(c).unwrap();
        assert_eq!(s.layout().len(), 2);
        let s = s.pauli_x(super::super::Qubit { reg: a, bit: 0 }).unwrap();
        assert_eq!(s.drop_register(a).unwrap_err(), Error::UncomputeResidual("a".into()));
    }

    #[test]
    fn overlapping_target_and_control() {
        let (l, a, _) = two_regs();
        let s = QState::init(l).unwrap();
        let err = s
            .apply_vector_op(&[a], &Controls::value(a, 0), |_, _| Ok(true))
            .unwrap_err();
        assert!(matches!(err, Error::OverlappingRegisters(_)));
    }
}
