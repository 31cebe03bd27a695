use core::f64::consts::PI;

use num_complex::Complex64;

use super::layout::RegId;
use super::state::{Controls, QState};
use crate::error::Result;
use crate::math;

/// In-place radix-2 DFT, `X_y = sum_x x_x e^{sign 2 pi i x y / N} / sqrt(N)`.
pub(crate) fn unitary_dft(v: &mut [Complex64], sign: f64) {
    let n = v.len();
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            v.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let w = Complex64::new(math::cos(ang * k as f64), math::sin(ang * k as f64));
                let a = v[start + k];
                let b = v[start + k + len / 2] * w;
                v[start + k] = a + b;
                v[start + k + len / 2] = a - b;
            }
        }
        len <<= 1;
    }
    let s = 1.0 / math::sqrt(n as f64);
    v.iter_mut().for_each(|x| *x *= s);
}

impl QState {
    /// `|x> -> 2^{-q/2} sum_y e^{2 pi i x y / 2^q} |y>` on `reg`.
    pub fn qft(self, reg: RegId) -> Result<Self> {
        self.layout().register(reg)?;
        self.apply_vector_op(&[reg], &Controls::none(), |_, v| {
            unitary_dft(v, 1.0);
            Ok(true)
        })
    }

    pub fn inverse_qft(self, reg: RegId) -> Result<Self> {
        self.layout().register(reg)?;
        self.apply_vector_op(&[reg], &Controls::none(), |_, v| {
            unitary_dft(v, -1.0);
            Ok(true)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::layout::{RegisterKind, RegisterLayout};
    use alloc::vec::Vec;

    fn naive(v: &[Complex64], sign: f64) -> Vec<Complex64> {
        let n = v.len();
        (0..n)
            .map(|y| {
                let s: Complex64 = (0..n)
                    .map(|x| {
                        let a = sign * 2.0 * PI * (x * y) as f64 / n as f64;
                        v[x] * Complex64::new(libm::cos(a), libm::sin(a))
                    })
                    .sum();
                s / libm::sqrt(n as f64)
            })
            .collect()
    }

    #[test]
    fn fft_matches_definition() {
        let v: Vec<Complex64> = (0..16).map(|i| Complex64::new(i as f64 * 0.1, 1.0 - i as f64 * 0.05)).collect();
        for sign in [1.0, -1.0] {
            let mut w = v.clone();
            unitary_dft(&mut w, sign);
            for (a, b) in w.iter().zip(naive(&v, sign)) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    fn phase_reg(q: u32) -> (QState, RegId) {
        let mut l = RegisterLayout::new();
        let r = l.add("p", q, RegisterKind::Phase).unwrap();
        (QState::init(l).unwrap(), r)
    }

    #[test]
    fn inverse_undoes_forward() {
        let (s, r) = phase_reg(4);
        let s = s.xor_value(r, 5, &Controls::none()).unwrap();
        let s = s.qft(r).unwrap().inverse_qft(r).unwrap();
        assert_eq!(s.branch_count(), 1);
        assert!((s.amplitude(&[5]) - Complex64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn uniform_goes_to_zero() {
        let (s, r) = phase_reg(3);
        let s = s.walsh(r, &Controls::none()).unwrap().inverse_qft(r).unwrap();
        assert_eq!(s.branch_count(), 1);
        assert!((s.amplitude(&[0]) - Complex64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn exact_phase_readout() {
        let q = 5;
        let (s, r) = phase_reg(q);
        let n = 1u64 << q;
        let target = 11u64;
        let s = s.walsh(r, &Controls::none()).unwrap();
        let s = s.map_phases(|l| {
            let a = 2.0 * PI * (target * l[0]) as f64 / n as f64;
            Complex64::new(libm::cos(a), libm::sin(a))
        });
        let s = s.inverse_qft(r).unwrap();
        assert_eq!(s.branch_count(), 1);
        assert!((s.amplitude(&[target]).norm() - 1.0).abs() < 1e-10);
    }
}
