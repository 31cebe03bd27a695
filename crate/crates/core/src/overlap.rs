//! Grover-based estimation of the overlaps `<x_j/|x_j|, v_k>`.
//!
//! An interference circuit places `cos^2(theta) = (1 + overlap) / 2` on a
//! flag qubit; phase estimation of the matching Grover operator reads
//! `theta`, and fixed-point arithmetic turns it into `2 cos^2(theta) - 1`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classical::{emulate_overlap_table, FeatureMatrix};
use crate::error::{Error, Result};
use crate::fixed::FixedFormat;
use crate::linalg::{CMatrix, Matrix};
use crate::math;
use crate::qsim::{
    self, phase_angle, BranchUnitary, Controls, Direction, FixedOp, PowerStrategy, Preparation, PreparationOracle, QState,
    RegId, RegisterKind, RegisterLayout,
};
use crate::spectral::SpectralBasis;

/// Default layout bound for pipeline states, which carry several
/// fixed-point work registers.
pub const PIPELINE_MAX_QUBITS: u32 = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Readout {
    /// Outcome probabilities read from the state.
    Exact,
    /// Outcomes drawn from the state's distribution.
    Shots { shots: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimationConfig {
    /// Phase-register bits.
    pub q: u32,
    pub readout: Readout,
    pub format: FixedFormat,
    pub strategy: PowerStrategy,
    pub max_qubits: u32,
    /// Run the inverse estimation after readout and report the purity of
    /// (feature, eigen, overlap). Costly unless every angle is representable.
    pub uncompute: bool,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            q: 10,
            readout: Readout::Exact,
            format: FixedFormat::default(),
            strategy: PowerStrategy::Auto,
            max_qubits: PIPELINE_MAX_QUBITS,
            uncompute: false,
        }
    }
}

impl EstimationConfig {
    pub fn with_q(q: u32) -> Self {
        Self { q, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=16).contains(&self.q) {
            return Err(Error::InvalidConfig(alloc::format!("q = {} outside 2..=16", self.q)));
        }
        if let Readout::Shots { shots: 0, .. } = self.readout {
            return Err(Error::InvalidConfig("shots must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverlapEstimate {
    pub j: usize,
    pub k: usize,
    /// Modal phase label in `0..2^q` (the representative with `signed >= 0`).
    pub theta_tilde: u64,
    /// Probability of `+-theta_tilde` once the two branches are merged.
    pub probability: f64,
    pub cos_theta: f64,
    pub overlap: f64,
    pub exact: f64,
    pub abs_error: f64,
}

/// Registers of the interference state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InterferenceRegs {
    pub feature: RegId,
    pub eigen: RegId,
    pub node: RegId,
    pub flag: RegId,
}

/// Circuit `A`: H on the flag, flag-controlled loads of `x_j` (flag 0) and
/// `v_k` (flag 1) into the node register, H on the flag.
#[derive(Clone, Debug)]
pub struct InterferencePrep {
    regs: InterferenceRegs,
    x: PreparationOracle,
    v: PreparationOracle,
}

impl Preparation for InterferencePrep {
    fn registers(&self) -> Vec<RegId> {
        alloc::vec![self.regs.node, self.regs.flag]
    }

    fn prepare(&self, s: QState, c: &Controls) -> Result<QState> {
        let r = self.regs;
        let s = s.walsh(r.flag, c)?;
        let s = s.toggle_load(&self.x, r.feature, r.node, &c.clone().and_qubit(r.flag, 0, false))?;
        let s = s.toggle_load(&self.v, r.eigen, r.node, &c.clone().and_qubit(r.flag, 0, true))?;
        s.walsh(r.flag, c)
    }

    fn unprepare(&self, s: QState, c: &Controls) -> Result<QState> {
        // H L H with L an involution is its own inverse
        self.prepare(s, c)
    }
}

/// `Q = -A S_0 A^dagger S_0'` with `S_0'` negating flag 1 and `S_0` the
/// reflection about all-zero node and flag. Eigenvalues `e^{+-2 i theta}`
/// on the span of the prepared state.
#[derive(Clone, Debug)]
pub struct GroverQ {
    prep: InterferencePrep,
    layout: RegisterLayout,
}

fn minus_one() -> Complex64 {
    Complex64::new(-1.0, 0.0)
}

impl GroverQ {
    pub fn regs(&self) -> InterferenceRegs {
        self.prep.regs
    }

    pub fn preparation(&self) -> &InterferencePrep {
        &self.prep
    }

    /// Dense matrix over (node, flag) for the pair `(j, k)`.
    pub fn dense(&self, j: usize, k: usize) -> Result<CMatrix> {
        self.matrix(&self.layout, &[j as u64, k as u64])
    }
}

impl BranchUnitary for GroverQ {
    fn targets(&self) -> Vec<RegId> {
        alloc::vec![self.prep.regs.node, self.prep.regs.flag]
    }

    fn selectors(&self) -> Vec<RegId> {
        alloc::vec![self.prep.regs.feature, self.prep.regs.eigen]
    }

    fn apply(&self, s: QState, c: &Controls) -> Result<QState> {
        let r = self.prep.regs;
        let s = s.phase(minus_one(), &c.clone().and_qubit(r.flag, 0, true))?;
        let s = self.prep.unprepare(s, c)?;
        let s = s.reflect_zero(&[r.node, r.flag], c)?;
        let s = self.prep.prepare(s, c)?;
        s.phase(minus_one(), c)
    }

    fn apply_inverse(&self, s: QState, c: &Controls) -> Result<QState> {
        let r = self.prep.regs;
        let s = s.phase(minus_one(), c)?;
        let s = self.prep.unprepare(s, c)?;
        let s = s.reflect_zero(&[r.node, r.flag], c)?;
        let s = self.prep.prepare(s, c)?;
        s.phase(minus_one(), &c.clone().and_qubit(r.flag, 0, true))
    }
}

/// Which overlaps an interference state covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    Pair(usize, usize),
    All,
}

/// Interference state for plain vector oracles: feature index `j` loads
/// `x.vector(j)`, eigen index `k` loads `v.vector(k)`.
pub fn prepare_from_oracles(
    x: PreparationOracle,
    v: PreparationOracle,
    config: &EstimationConfig,
) -> Result<(QState, GroverQ)> {
    let n = x.len().max(v.len());
    if x.len() != v.len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "vectors of length {} and {}",
            x.len(),
            v.len()
        )));
    }
    let mut layout = RegisterLayout::with_max_qubits(config.max_qubits);
    let regs = InterferenceRegs {
        feature: layout.add("feature", math::ceil_log2(x.count()), RegisterKind::Index)?,
        eigen: layout.add("eigen", math::ceil_log2(v.count()), RegisterKind::Index)?,
        node: layout.add("node", math::ceil_log2(n), RegisterKind::Index)?,
        flag: layout.add("flag", 1, RegisterKind::Flag)?,
    };
    let (fc, vc) = (x.count(), v.count());
    let prep = InterferencePrep { regs, x, v };
    let s = QState::init(layout.clone())?;
    let s = s.uniform(regs.feature, fc, &Controls::none())?;
    let s = s.uniform(regs.eigen, vc, &Controls::none())?;
    let s = prep.prepare(s, &Controls::none())?;
    Ok((s, GroverQ { prep, layout }))
}

/// The interference state over the selected `(j, k)` pairs together with the
/// Grover operator built from the same oracles.
pub fn prepare_interference_state(
    x: &FeatureMatrix,
    basis: &SpectralBasis,
    selection: Selection,
    config: &EstimationConfig,
) -> Result<(QState, GroverQ)> {
    if x.n() != basis.n() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{} feature rows for {} nodes",
            x.n(),
            basis.n()
        )));
    }
    let (xo, vo) = match selection {
        Selection::All => (
            PreparationOracle::new(x.matrix(), Direction::Column)?,
            PreparationOracle::new(basis.v_d(), Direction::Column)?,
        ),
        Selection::Pair(j, k) => {
            if j >= x.f() || k >= basis.d() {
                return Err(Error::IndexOutOfRange { u: j, v: k, n: x.f().max(basis.d()) });
            }
            (
                PreparationOracle::from_vectors(&[x.column(j)])?,
                PreparationOracle::from_vectors(&[basis.column(k)])?,
            )
        }
    };
    prepare_from_oracles(xo, vo, config)
}

/// Grover operator of the single pair `(j, k)`.
pub fn grover_q(x: &FeatureMatrix, basis: &SpectralBasis, j: usize, k: usize) -> Result<GroverQ> {
    let cfg = EstimationConfig::default();
    Ok(prepare_interference_state(x, basis, Selection::Pair(j, k), &cfg)?.1)
}

/// `theta` with `cos^2(theta) = (1 + overlap) / 2`.
pub fn interference_angle(overlap: f64) -> f64 {
    math::acos(math::sqrt(((1.0 + overlap) / 2.0).clamp(0.0, 1.0)))
}

/// Phase estimation of `q` into a new register named `theta`.
pub fn phase_estimate(state: QState, q: &GroverQ, config: &EstimationConfig) -> Result<(QState, RegId)> {
    config.validate()?;
    qsim::phase_estimate(state, q, "theta", config.q, config.strategy)
}

/// Work registers of the arithmetic recovery.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecoveryRegs {
    pub phase: RegId,
    pub cos: RegId,
    pub cos_sq: RegId,
    pub overlap: RegId,
}

/// Writes `cos(theta~)`, its square and `2 cos^2 - 1` into fresh fixed-point
/// registers.
pub fn recover_overlap(state: QState, phase: RegId, config: &EstimationConfig) -> Result<(QState, RecoveryRegs)> {
    let (s, cos) = state.add_fixed("cos", config.format)?;
    let (s, cos_sq) = s.add_fixed("cos_sq", config.format)?;
    let (s, overlap) = s.add_fixed("overlap", config.format)?;
    let s = s.fixed_point_op(FixedOp::Cosine, &[phase], cos)?;
    let s = s.fixed_point_op(FixedOp::Square, &[cos], cos_sq)?;
    let s = s.fixed_point_op(FixedOp::Affine { a: 2.0, b: -1.0 }, &[cos_sq], overlap)?;
    Ok((s, RecoveryRegs { phase, cos, cos_sq, overlap }))
}

/// Clears `cos_sq` and `cos` (keeping the overlap register).
pub fn uncompute_recovery(state: QState, regs: &RecoveryRegs) -> Result<QState> {
    let s = state.uncompute_fixed_point_op(FixedOp::Square, &[regs.cos], regs.cos_sq)?;
    let s = s.uncompute_fixed_point_op(FixedOp::Cosine, &[regs.phase], regs.cos)?;
    s.drop_register(regs.cos_sq)?.drop_register(regs.cos)
}

/// Signed magnitude of a phase label, merging `y` and `2^q - y`.
fn fold_phase(label: u64, q: u32) -> u64 {
    let n = 1u64 << q;
    if label > n / 2 {
        n - label
    } else {
        label
    }
}

fn argmax<K: Clone>(m: &BTreeMap<K, f64>) -> Option<(K, f64)> {
    let mut best: Option<(K, f64)> = None;
    for (k, &p) in m {
        if best.as_ref().is_none_or(|b| p > b.1) {
            best = Some((k.clone(), p));
        }
    }
    best
}

/// Classical replay of the arithmetic on one phase label.
pub fn overlap_from_label(label: u64, q: u32, fmt: FixedFormat) -> (f64, f64) {
    let c = fmt.cosine(phase_angle(label, q)).raw;
    let sq = fmt.square(c).raw;
    let o = fmt.affine(sq, 2.0, -1.0).raw;
    (fmt.decode_raw(c), fmt.decode_raw(o))
}

/// Result of a full overlap-estimation run.
#[derive(Clone, Debug)]
pub struct OverlapRun {
    /// Row-major over `(j, k)`.
    pub estimates: Vec<OverlapEstimate>,
    pub f: usize,
    pub d: usize,
    /// Raw overlap-register labels per cell, row-major.
    pub labels: Vec<u64>,
    /// Largest branch count seen during the run.
    pub peak_branches: usize,
    /// Purity of (feature, eigen, overlap) after the inverse estimation,
    /// when requested.
    pub purity: Option<f64>,
    pub overflow_events: usize,
    /// State over (feature, eigen, node, flag, theta, overlap): after the
    /// inverse estimation when requested, else right after recovery.
    pub final_state: QState,
    pub regs: InterferenceRegs,
    pub overlap_reg: RegId,
}

impl OverlapRun {
    pub fn table(&self) -> Matrix {
        Matrix::from_fn(self.f, self.d, |j, k| self.estimates[j * self.d + k].overlap)
    }

    pub fn max_abs_error(&self) -> f64 {
        self.estimates.iter().fold(0.0f64, |m, e| m.max(e.abs_error))
    }

    pub fn estimate(&self, j: usize, k: usize) -> &OverlapEstimate {
        &self.estimates[j * self.d + k]
    }
}

/// Estimates every overlap from one superposed state evolution.
pub fn estimate_all_overlaps(x: &FeatureMatrix, basis: &SpectralBasis, config: &EstimationConfig) -> Result<OverlapRun> {
    config.validate()?;
    let exact = emulate_overlap_table(x, basis)?;
    let (s, gq) = prepare_interference_state(x, basis, Selection::All, config)?;
    run_estimation(s, &gq, x.f(), basis.d(), &|j, k| exact[(j, k)], config)
}

/// Estimates the overlap of two vectors of equal length.
pub fn estimate_vector_overlap(a: &[f64], b: &[f64], config: &EstimationConfig) -> Result<OverlapEstimate> {
    config.validate()?;
    let xo = PreparationOracle::from_vectors(&[a.to_vec()])?;
    let vo = PreparationOracle::from_vectors(&[b.to_vec()])?;
    let exact = crate::linalg::dot(xo.vector(0), vo.vector(0));
    let (s, gq) = prepare_from_oracles(xo, vo, config)?;
    let run = run_estimation(s, &gq, 1, 1, &|_, _| exact, config)?;
    Ok(run.estimates[0].clone())
}

fn run_estimation(
    state: QState,
    gq: &GroverQ,
    f: usize,
    d: usize,
    exact: &dyn Fn(usize, usize) -> f64,
    config: &EstimationConfig,
) -> Result<OverlapRun> {
    let regs = gq.regs();
    let q = config.q;
    let fmt = config.format;
    let (s, phase) = phase_estimate(state, gq, config)?;
    let mut peak = s.branch_count();
    let (s, rr) = recover_overlap(s, phase, config)?;
    peak = peak.max(s.branch_count());

    let mut estimates = Vec::with_capacity(f * d);
    let mut labels = Vec::with_capacity(f * d);
    match config.readout {
        Readout::Exact => {
            let by_phase = s.marginal(&[regs.feature, regs.eigen, phase])?;
            let by_cos = s.marginal(&[regs.feature, regs.eigen, rr.cos])?;
            let by_overlap = s.marginal(&[regs.feature, regs.eigen, rr.overlap])?;
            for j in 0..f {
                for k in 0..d {
                    let cell = |m: &BTreeMap<Vec<u64>, f64>, fold: bool| {
                        let mut out: BTreeMap<u64, f64> = BTreeMap::new();
                        for (key, p) in m.range(alloc::vec![j as u64, k as u64, 0]..=alloc::vec![j as u64, k as u64, u64::MAX]) {
                            let l = if fold { fold_phase(key[2], q) } else { key[2] };
                            *out.entry(l).or_insert(0.0) += p;
                        }
                        out
                    };
                    let (theta_tilde, probability) =
                        argmax(&cell(&by_phase, true)).ok_or(Error::InsufficientShots { j, k })?;
                    let (cos_label, _) = argmax(&cell(&by_cos, false)).ok_or(Error::InsufficientShots { j, k })?;
                    let (ov_label, _) = argmax(&cell(&by_overlap, false)).ok_or(Error::InsufficientShots { j, k })?;
                    let overlap = fmt.decode_label(ov_label);
                    let ex = exact(j, k);
                    labels.push(ov_label);
                    estimates.push(OverlapEstimate {
                        j,
                        k,
                        theta_tilde,
                        probability,
                        cos_theta: fmt.decode_label(cos_label),
                        overlap,
                        exact: ex,
                        abs_error: (overlap - ex).abs(),
                    });
                }
            }
        }
        Readout::Shots { shots, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let counts = s.sample(&[regs.feature, regs.eigen, phase], shots, &mut rng)?;
            let mut cells: BTreeMap<(usize, usize), BTreeMap<u64, f64>> = BTreeMap::new();
            let mut totals: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            for (key, c) in &counts {
                let cell = (key[0] as usize, key[1] as usize);
                *cells.entry(cell).or_default().entry(fold_phase(key[2], q)).or_insert(0.0) += *c as f64;
                *totals.entry(cell).or_insert(0) += c;
            }
            for j in 0..f {
                for k in 0..d {
                    let hist = cells.get(&(j, k)).ok_or(Error::InsufficientShots { j, k })?;
                    let (theta_tilde, count) = argmax(hist).ok_or(Error::InsufficientShots { j, k })?;
                    let (cos_theta, overlap) = overlap_from_label(theta_tilde, q, fmt);
                    let ex = exact(j, k);
                    labels.push(fmt.to_label(fmt.quantize(overlap).raw));
                    estimates.push(OverlapEstimate {
                        j,
                        k,
                        theta_tilde,
                        probability: count / totals[&(j, k)] as f64,
                        cos_theta,
                        overlap,
                        exact: ex,
                        abs_error: (overlap - ex).abs(),
                    });
                }
            }
        }
    }

    let overflow_events = s.diagnostics().overflow_events;
    let s = uncompute_recovery(s, &rr)?;
    let (s, purity) = if config.uncompute {
        let s = qsim::inverse_phase_estimate(s, gq, phase, config.strategy)?;
        let s = gq.preparation().unprepare(s, &Controls::none())?;
        let p = s.purity(&[regs.feature, regs.eigen, rr.overlap])?;
        (s, Some(p))
    } else {
        (s, None)
    };
    Ok(OverlapRun {
        estimates,
        f,
        d,
        labels,
        peak_branches: peak,
        purity,
        overflow_events,
        final_state: s,
        regs,
        overlap_reg: rr.overlap,
    })
}

/// Phase label a perfect estimator would report for `overlap`.
pub fn ideal_label(overlap: f64, q: u32) -> f64 {
    interference_angle(overlap) * (1u64 << q) as f64 / PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::EigenOrder;

    fn basis2() -> SpectralBasis {
        let h = libm::sqrt(0.5);
        let v = Matrix::from_columns(&[[h, h], [h, -h]]).unwrap();
        SpectralBasis::from_parts(v, alloc::vec![1.0, 0.0], EigenOrder::Largest).unwrap()
    }

    fn flag_probs(s: &QState, flag: RegId) -> (f64, f64) {
        (s.probability(flag, 0).unwrap(), s.probability(flag, 1).unwrap())
    }

    #[test]
    fn interference_examples() {
        let b = basis2();
        let cfg = EstimationConfig::default();
        let x = FeatureMatrix::from_columns(&[[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]).unwrap();
        let (s, g) = prepare_interference_state(&x, &b, Selection::Pair(0, 0), &cfg).unwrap();
        assert!(flag_probs(&s, g.regs().flag).1 < 1e-24);
        let (s, g) = prepare_interference_state(&x, &b, Selection::Pair(1, 0), &cfg).unwrap();
        assert!(flag_probs(&s, g.regs().flag).0 < 1e-24);
        let (s, g) = prepare_interference_state(&x, &b, Selection::Pair(2, 0), &cfg).unwrap();
        assert!((flag_probs(&s, g.regs().flag).0 - 0.5).abs() < 1e-14);
    }

    #[test]
    fn grover_eigenvalues_n2() {
        let b = basis2();
        let x = FeatureMatrix::from_columns(&[[0.6, 0.8]]).unwrap();
        let g = grover_q(&x, &b, 0, 0).unwrap();
        let m = g.dense(0, 0).unwrap();
        assert!(m.mul(&m.adjoint()).max_distance(&CMatrix::identity(4)) < 1e-10);
        let theta = interference_angle(7.0 / (5.0 * libm::sqrt(2.0)));
        let re = nalgebra::DMatrix::from_fn(4, 4, |i, j| {
            assert!(m[(i, j)].im.abs() < 1e-14);
            m[(i, j)].re
        });
        let eig = re.complex_eigenvalues();
        for sign in [1.0, -1.0] {
            let target = Complex64::new(libm::cos(2.0 * theta), sign * libm::sin(2.0 * theta));
            let best = eig.iter().map(|e| (Complex64::new(e.re, e.im) - target).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8, "missing eigenvalue {target}");
        }
    }

    #[test]
    fn pi_over_four_reads_exactly() {
        // overlap 0 gives theta = pi/4, label 2 at q = 3
        let cfg = EstimationConfig::with_q(3);
        let e = estimate_vector_overlap(&[1.0, 0.0], &[0.0, 1.0], &cfg).unwrap();
        assert_eq!(e.theta_tilde, 2);
        assert!((e.probability - 1.0).abs() < 1e-10);
        assert!(e.overlap.abs() <= 1.0 / 4096.0);
    }

    #[test]
    fn parallel_reads_one() {
        let cfg = EstimationConfig::with_q(4);
        let e = estimate_vector_overlap(&[0.3, 0.4], &[0.6, 0.8], &cfg).unwrap();
        assert_eq!(e.theta_tilde, 0);
        assert_eq!(e.overlap, 1.0);
    }

    #[test]
    fn anti_parallel_reads_minus_one() {
        let cfg = EstimationConfig::with_q(4);
        let e = estimate_vector_overlap(&[0.3, 0.4], &[-0.6, -0.8], &cfg).unwrap();
        assert_eq!(e.overlap, -1.0);
    }

    #[test]
    fn three_four_example() {
        let cfg = EstimationConfig::with_q(10);
        let h = libm::sqrt(0.5);
        let e = estimate_vector_overlap(&[0.6, 0.8], &[h, h], &cfg).unwrap();
        let exact = 7.0 / (5.0 * libm::sqrt(2.0));
        assert!((e.overlap - exact).abs() <= 2.0 * PI / 1024.0 * 2.0);
        assert!((e.theta_tilde as f64 - ideal_label(exact, 10)).abs() <= 1.0);
    }

    #[test]
    fn swapped_oracles_agree() {
        let cfg = EstimationConfig::with_q(8);
        let a = [0.2, -0.7, 0.4, 0.1];
        let b = [0.5, 0.5, -0.1, 0.9];
        let ab = estimate_vector_overlap(&a, &b, &cfg).unwrap();
        let ba = estimate_vector_overlap(&b, &a, &cfg).unwrap();
        assert!((ab.overlap - ba.overlap).abs() <= 1.0 / 1024.0);
    }

    #[test]
    fn shots_mode_matches_exact_on_sharp_instance() {
        let x = FeatureMatrix::from_columns(&[[1.0, 0.0], [0.6, 0.8]]).unwrap();
        let b = basis2();
        let exact = estimate_all_overlaps(&x, &b, &EstimationConfig::with_q(6)).unwrap();
        let cfg = EstimationConfig { readout: Readout::Shots { shots: 4000, seed: 1 }, ..EstimationConfig::with_q(6) };
        let shots = estimate_all_overlaps(&x, &b, &cfg).unwrap();
        for (a, c) in exact.estimates.iter().zip(&shots.estimates) {
            assert!((a.overlap - c.overlap).abs() <= 2.0 * PI / 64.0);
        }
        let few = EstimationConfig { readout: Readout::Shots { shots: 1, seed: 1 }, ..EstimationConfig::with_q(6) };
        assert!(matches!(estimate_all_overlaps(&x, &b, &few), Err(Error::InsufficientShots { .. })));
    }

    #[test]
    fn exact_angles_uncompute_to_pure() {
        // overlaps in {1, 0, -1} have exactly representable theta
        let x = FeatureMatrix::from_columns(&[[1.0, 1.0], [1.0, -1.0]]).unwrap();
        let cfg = EstimationConfig { uncompute: true, ..EstimationConfig::with_q(4) };
        let run = estimate_all_overlaps(&x, &basis2(), &cfg).unwrap();
        assert!(run.purity.unwrap() > 1.0 - 1e-9);
        assert!(run.final_state.register_is_zero(run.regs.flag).unwrap());
        assert_eq!(run.estimate(0, 0).overlap, 1.0);
        assert_eq!(run.estimate(0, 1).overlap, 0.0);
        assert_eq!(run.estimate(1, 1).overlap, 1.0);
    }

    #[test]
    fn config_bounds() {
        assert!(EstimationConfig::with_q(1).validate().is_err());
        assert!(EstimationConfig::with_q(17).validate().is_err());
        let c = EstimationConfig { readout: Readout::Shots { shots: 0, seed: 0 }, ..Default::default() };
        assert!(c.validate().is_err());
    }
}
