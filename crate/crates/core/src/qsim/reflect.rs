use alloc::vec::Vec;

use num_complex::Complex64;

use super::layout::RegId;
use super::state::{Controls, QState};
use crate::error::{Error, Result};

/// A circuit `A` preparing some state from `|0>` on its registers.
pub trait Preparation {
    fn registers(&self) -> Vec<RegId>;
    /// Applies `A` on branches matching `controls`.
    fn prepare(&self, state: QState, controls: &Controls) -> Result<QState>;
    /// Applies `A^dagger` on branches matching `controls`.
    fn unprepare(&self, state: QState, controls: &Controls) -> Result<QState>;
}

/// What a reflection is taken about.
pub enum Axis<'a> {
    /// `I - 2|0><0|` on the listed registers.
    Zero(Vec<RegId>),
    /// `A (I - 2|0><0|) A^dagger = I - 2|psi><psi|`.
    Prepared(&'a dyn Preparation),
}

impl QState {
    /// Negates the branches on which every register of `regs` is zero.
    pub fn reflect_zero(self, regs: &[RegId], controls: &Controls) -> Result<Self> {
        let mut c = controls.clone();
        for &r in regs {
            c = c.and_value(r, 0);
        }
        self.phase(Complex64::new(-1.0, 0.0), &c)
    }

    pub fn apply_reflection(self, axis: &Axis<'_>, controls: &Controls) -> Result<Self> {
        match axis {
            Axis::Zero(regs) => self.reflect_zero(regs, controls),
            Axis::Prepared(prep) => {
                let regs = prep.registers();
                if regs.iter().any(|&r| self.layout().register(r).is_err()) {
                    return Err(Error::UnknownDescriptor);
                }
                let s = prep.unprepare(self, controls)?;
                let s = s.reflect_zero(&regs, controls)?;
                prep.prepare(s, controls)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::layout::{RegisterKind, RegisterLayout};

    struct Load {
        reg: RegId,
        v: Vec<f64>,
    }

    impl Preparation for Load {
        fn registers(&self) -> Vec<RegId> {
            alloc::vec![self.reg]
        }
        fn prepare(&self, s: QState, c: &Controls) -> Result<QState> {
            s.load_vector(&self.v, self.reg, c)
        }
        fn unprepare(&self, s: QState, c: &Controls) -> Result<QState> {
            s.load_vector(&self.v, self.reg, c)
        }
    }

    #[test]
    fn zero_reflection_on_zero() {
        let mut l = RegisterLayout::new();
        let r = l.add("r", 2, RegisterKind::Index).unwrap();
        let s = QState::init(l).unwrap().apply_reflection(&Axis::Zero(alloc::vec![r]), &Controls::none()).unwrap();
        assert_eq!(s.amplitude(&[0]), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn prepared_reflection_fixes_psi_and_squares_to_one() {
        let mut l = RegisterLayout::new();
        let r = l.add("r", 3, RegisterKind::Index).unwrap();
        let v: Vec<f64> = (0..8).map(|i| 0.3 + libm::sin(i as f64 * 1.7)).collect();
        let n = crate::linalg::norm(&v);
        let prep = Load { reg: r, v: v.clone() };
        let axis = Axis::Prepared(&prep);
        let s = QState::init(l.clone()).unwrap().load_vector(&v, r, &Controls::none()).unwrap();
        let t = s.clone().apply_reflection(&axis, &Controls::none()).unwrap();
        // I - 2|psi><psi| sends psi to -psi
        for i in 0..8u64 {
            assert!((t.amplitude(&[i]) + Complex64::new(v[i as usize] / n, 0.0)).norm() < 1e-12);
        }
        let basis = QState::init(l).unwrap().xor_value(r, 5, &Controls::none()).unwrap();
        let twice = basis
            .clone()
            .apply_reflection(&axis, &Controls::none())
            .unwrap()
            .apply_reflection(&axis, &Controls::none())
            .unwrap();
        for (lab, a) in basis.iter() {
            assert!((twice.amplitude(lab) - a).norm() < 1e-10);
        }
        assert!((twice.norm_sqr() - 1.0).abs() < 1e-10);
    }
}
