use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

use super::layout::RegId;
use super::state::QState;
use crate::error::{Error, Result};
use crate::math;

/// Outcomes with probability below this are treated as impossible.
const MIN_PROBABILITY: f64 = 1e-24;

impl QState {
    fn positions(&self, regs: &[RegId]) -> Result<Vec<usize>> {
        regs.iter().map(|&r| self.pos(r)).collect()
    }

    /// Probability of reading `outcome` from `reg`.
    pub fn probability(&self, reg: RegId, outcome: u64) -> Result<f64> {
        let p = self.pos(reg)?;
        Ok(self.iter().filter(|(l, _)| l[p] == outcome).map(|(_, a)| a.norm_sqr()).sum())
    }

    /// Post-selects `reg` on `outcome`, renormalizing, and returns the
    /// outcome's probability.
    pub fn measure(self, reg: RegId, outcome: u64) -> Result<(Self, f64)> {
        let prob = self.probability(reg, outcome)?;
        if prob < MIN_PROBABILITY {
            return Err(Error::ZeroProbabilityOutcome { register: self.name(reg), outcome });
        }
        let p = self.pos(reg)?;
        let scale = 1.0 / math::sqrt(prob);
        let s = self.filter_scale(|l| l[p] == outcome, scale);
        Ok((s, prob))
    }

    /// Draws an outcome of `reg` and collapses onto it.
    pub fn measure_sampled<R: Rng + ?Sized>(self, reg: RegId, rng: &mut R) -> Result<(Self, u64, f64)> {
        let dist = self.marginal(&[reg])?;
        let outcome = draw(&dist, rng)[0];
        let (s, prob) = self.measure(reg, outcome)?;
        Ok((s, outcome, prob))
    }

    /// Joint outcome distribution of `regs`, keyed by their labels in order.
    pub fn marginal(&self, regs: &[RegId]) -> Result<BTreeMap<Vec<u64>, f64>> {
        let ps = self.positions(regs)?;
        let mut out: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
        for (l, a) in self.iter() {
            let key: Vec<u64> = ps.iter().map(|&p| l[p]).collect();
            *out.entry(key).or_insert(0.0) += a.norm_sqr();
        }
        Ok(out)
    }

    /// Histogram of `shots` joint measurements of `regs`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        regs: &[RegId],
        shots: usize,
        rng: &mut R,
    ) -> Result<BTreeMap<Vec<u64>, usize>> {
        let dist = self.marginal(regs)?;
        let mut counts = BTreeMap::new();
        for _ in 0..shots {
            *counts.entry(draw(&dist, rng).to_vec()).or_insert(0) += 1;
        }
        Ok(counts)
    }

    /// `Tr(rho^2)` of the reduced state on `keep`.
    pub fn purity(&self, keep: &[RegId]) -> Result<f64> {
        let kp = self.positions(keep)?;
        // Tr(rho_A^2) = Tr(rho_B^2): Gram over whichever side has fewer labels.
        let mut by_env: BTreeMap<Vec<u64>, BTreeMap<Vec<u64>, Complex64>> = BTreeMap::new();
        let mut by_kept: BTreeMap<Vec<u64>, BTreeMap<Vec<u64>, Complex64>> = BTreeMap::new();
        for (l, a) in self.iter() {
            let kept: Vec<u64> = kp.iter().map(|&p| l[p]).collect();
            let env: Vec<u64> = (0..l.len()).filter(|p| !kp.contains(p)).map(|p| l[p]).collect();
            by_env.entry(env.clone()).or_default().insert(kept.clone(), a);
            by_kept.entry(kept).or_default().insert(env, a);
        }
        let groups = if by_env.len() <= by_kept.len() { by_env } else { by_kept };
        let vecs: Vec<&BTreeMap<Vec<u64>, Complex64>> = groups.values().collect();
        let mut total = 0.0;
        for (i, a) in vecs.iter().enumerate() {
            for (j, b) in vecs.iter().enumerate().skip(i) {
                let ip: Complex64 = a
                    .iter()
                    .filter_map(|(k, x)| b.get(k).map(|y| x.conj() * y))
                    .sum();
                total += if i == j { ip.norm_sqr() } else { 2.0 * ip.norm_sqr() };
            }
        }
        Ok(total)
    }

    fn filter_scale(self, keep: impl Fn(&[u64]) -> bool, scale: f64) -> Self {
        let entries: Vec<(Vec<u64>, Complex64)> =
            self.iter().filter(|(l, _)| keep(l)).map(|(l, a)| (l.to_vec(), a * scale)).collect();
        let layout = self.layout().clone();
        let diag = self.diagnostics().clone();
        let mut s = QState::from_amplitudes(layout, entries).expect("labels come from a valid state");
        s.note_overflows(diag.overflow_events);
        s
    }
}

fn draw<'a, R: Rng + ?Sized>(dist: &'a BTreeMap<Vec<u64>, f64>, rng: &mut R) -> &'a [u64] {
    let total: f64 = dist.values().sum();
    let mut u: f64 = rng.random::<f64>() * total;
    let mut last = None;
    for (k, &p) in dist {
        if p <= 0.0 {
            continue;
        }
        last = Some(k);
        if u < p {
            return k;
        }
        u -= p;
    }
    last.expect("nonempty distribution")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::layout::{RegisterKind, RegisterLayout};
    use crate::qsim::state::Controls;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plus() -> (QState, RegId) {
        let mut l = RegisterLayout::new();
        let f = l.add("f", 1, RegisterKind::Flag).unwrap();
        (QState::init(l).unwrap().hadamard_all(f).unwrap(), f)
    }

    #[test]
    fn measure_plus() {
        let (s, f) = plus();
        let (s, p) = s.measure(f, 0).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!((s.amplitude(&[0]) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn measure_own_label() {
        let mut l = RegisterLayout::new();
        let r = l.add("r", 3, RegisterKind::Index).unwrap();
        let s = QState::init(l).unwrap().xor_value(r, 5, &Controls::none()).unwrap();
        assert_eq!(s.measure(r, 5).unwrap().1, 1.0);
    }

    #[test]
    fn impossible_outcome() {
        let mut l = RegisterLayout::new();
        let r = l.add("r", 2, RegisterKind::Index).unwrap();
        let s = QState::init(l).unwrap();
        assert_eq!(
            s.measure(r, 3).unwrap_err(),
            Error::ZeroProbabilityOutcome { register: "r".into(), outcome: 3 }
        );
    }

    #[test]
    fn sampling_is_seeded() {
        let (s, f) = plus();
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(s.sample(&[f], 1000, &mut r1).unwrap(), s.sample(&[f], 1000, &mut r2).unwrap());
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let (_, outcome, p) = s.measure_sampled(f, &mut r).unwrap();
        assert!(outcome < 2 && (p - 0.5).abs() < 1e-15);
    }

    #[test]
    fn purity_product_and_bell() {
        let mut l = RegisterLayout::new();
        let a = l.add("a", 1, RegisterKind::Flag).unwrap();
        let b = l.add("b", 1, RegisterKind::Flag).unwrap();
        let s = QState::init(l).unwrap().hadamard_all(a).unwrap();
        assert!((s.purity(&[a]).unwrap() - 1.0).abs() < 1e-12);
        let s = s.cnot(super::super::Qubit::new(a, 0), super::super::Qubit::new(b, 0)).unwrap();
        assert!((s.purity(&[a]).unwrap() - 0.5).abs() < 1e-12);
    }
}
