//! Quantum convolution layer: filter arithmetic on the overlap table, the
//! amplitude rotation onto `eta`, the exchange test against rows of `V_d`
//! and the second amplitude estimation that yields next-layer features.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classical::{emulate_layer_output, emulate_overlap_table, normalization, FeatureMatrix, LayerOracle};
use crate::error::{Error, Result};
use crate::fixed::FixedFormat;
use crate::linalg::{self, CMatrix, Matrix};
use crate::math;
use crate::overlap::{estimate_all_overlaps, EstimationConfig, OverlapRun, Readout};
use crate::qsim::{
    self, phase_angle, BranchUnitary, Controls, Direction, FixedOp, Preparation, PreparationOracle, QState, RegId,
    RegisterKind, RegisterLayout,
};
use crate::spectral::SpectralBasis;

#[derive(Clone, Debug, PartialEq)]
pub struct EtaVector {
    /// Raw sums `s_k = sum_j theta_k overlap(j, k)` as held by the sum register.
    pub s: Vec<f64>,
    pub c: f64,
    pub eta: Vec<f64>,
    /// `sum_k eta_k^2 / d`
    pub postselect_prob: f64,
}

impl EtaVector {
    pub fn norm(&self) -> f64 {
        linalg::norm(&self.eta)
    }

    pub fn f_hat(&self) -> Vec<f64> {
        let n = self.norm();
        self.eta.iter().map(|e| e / n).collect()
    }
}

/// Registers of a pipeline state. Stage registers are `None` until created
/// and again after they are uncomputed and dropped.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StageRegs {
    pub feature: Option<RegId>,
    pub eigen: Option<RegId>,
    pub overlap: Option<RegId>,
    pub theta: Option<RegId>,
    pub product: Option<RegId>,
    pub sum: Option<RegId>,
    pub eta_flag: Option<RegId>,
    pub node: Option<RegId>,
    pub row: Option<RegId>,
    pub swap: Option<RegId>,
}

/// A pipeline state with the classical bookkeeping the stages need.
#[derive(Clone, Debug)]
pub struct PipelineState {
    pub state: QState,
    pub regs: StageRegs,
    pub format: FixedFormat,
    f: usize,
    d: usize,
    /// Overlap labels per `(j, k)`, row-major.
    overlap_labels: Vec<u64>,
    theta_labels: Option<Vec<u64>>,
    sum_labels: Option<Vec<u64>>,
    pub eta: Option<EtaVector>,
    /// Probability of the rotation flag reading 0, from the state.
    pub measured_postselect: Option<f64>,
    pub peak_branches: usize,
}

fn need(r: Option<RegId>, what: &str) -> Result<RegId> {
    r.ok_or_else(|| Error::UnknownRegister(what.into()))
}

impl PipelineState {
    pub fn f(&self) -> usize {
        self.f
    }

    pub fn d(&self) -> usize {
        self.d
    }

    fn track(mut self) -> Self {
        self.peak_branches = self.peak_branches.max(self.state.branch_count());
        self
    }

    /// `(1 / sqrt(f d)) sum_{j,k} |j>|k>|overlap(j, k)>` from an overlap table
    /// of register labels.
    pub fn from_overlap_labels(labels: &[u64], f: usize, d: usize, config: &EstimationConfig) -> Result<Self> {
        if labels.len() != f * d {
            return Err(Error::LengthMismatch { got: labels.len(), expected: f * d });
        }
        if !d.is_power_of_two() {
            return Err(Error::DimensionMismatch(alloc::format!("d = {d} is not a power of two")));
        }
        let mut layout = RegisterLayout::with_max_qubits(config.max_qubits);
        let feature = layout.add("feature", math::ceil_log2(f), RegisterKind::Index)?;
        let eigen = layout.add("eigen", math::ceil_log2(d), RegisterKind::Index)?;
        let overlap = layout.add_fixed("overlap", config.format)?;
        let s = QState::init(layout)?
            .uniform(feature, f, &Controls::none())?
            .hadamard_all(eigen)?
            .xor_lookup(overlap, &[feature, eigen], |key| Ok(labels[key[0] as usize * d + key[1] as usize]))?;
        let regs = StageRegs { feature: Some(feature), eigen: Some(eigen), overlap: Some(overlap), ..Default::default() };
        Ok(Self {
            peak_branches: s.branch_count(),
            state: s,
            regs,
            format: config.format,
            f,
            d,
            overlap_labels: labels.to_vec(),
            theta_labels: None,
            sum_labels: None,
            eta: None,
            measured_postselect: None,
        })
    }

    pub fn from_overlap_run(run: &OverlapRun, config: &EstimationConfig) -> Result<Self> {
        Self::from_overlap_labels(&run.labels, run.f, run.d, config)
    }

    /// Overlap table the state carries, decoded.
    pub fn overlap_table(&self) -> Matrix {
        Matrix::from_fn(self.f, self.d, |j, k| self.format.decode_label(self.overlap_labels[j * self.d + k]))
    }
}

/// Loads `theta_k` into a new fixed-point register on the branches with
/// eigen label `k`.
pub fn load_theta(mut ps: PipelineState, theta: &[f64]) -> Result<PipelineState> {
    let eigen = need(ps.regs.eigen, "eigen")?;
    if theta.len() != ps.d {
        return Err(Error::LengthMismatch { got: theta.len(), expected: ps.d });
    }
    if let Some(&t) = theta.iter().find(|t| !t.is_finite()) {
        return Err(Error::ThetaOutOfRange(t));
    }
    let fmt = ps.format;
    let mut labels = Vec::with_capacity(theta.len());
    for &t in theta {
        let r = fmt.quantize(t);
        if r.saturated {
            return Err(Error::ThetaOutOfRange(t));
        }
        labels.push(fmt.to_label(r.raw));
    }
    let (s, reg) = ps.state.add_fixed("theta", fmt)?;
    ps.state = s.xor_lookup(reg, &[eigen], |k| Ok(labels[k[0] as usize]))?;
    ps.regs.theta = Some(reg);
    ps.theta_labels = Some(labels);
    Ok(ps.track())
}

/// `product = theta_k * overlap(j, k)` on every branch.
pub fn multiply_theta(mut ps: PipelineState) -> Result<PipelineState> {
    let ov = need(ps.regs.overlap, "overlap")?;
    let th = need(ps.regs.theta, "theta")?;
    let (s, reg) = ps.state.add_fixed("product", ps.format)?;
    ps.state = s.fixed_point_op(FixedOp::Mul, &[ov, th], reg)?;
    ps.regs.product = Some(reg);
    Ok(ps.track())
}

/// `sum = sum_j product(j, k)` on every branch with eigen label `k`, by
/// controlled additions of the product table over the feature index.
pub fn sum_over_features(mut ps: PipelineState) -> Result<PipelineState> {
    let feature = need(ps.regs.feature, "feature")?;
    let eigen = need(ps.regs.eigen, "eigen")?;
    let prod = need(ps.regs.product, "product")?;
    let fmt = ps.format;
    let table = ps.state.classical_table(&[feature, eigen], prod)?;
    let mut raw = alloc::vec![0i64; ps.d];
    let mut overflows = 0;
    for j in 0..ps.f {
        for (k, acc) in raw.iter_mut().enumerate() {
            let p = table
                .get(&alloc::vec![j as u64, k as u64])
                .ok_or_else(|| Error::Invariant(alloc::format!("no branch for ({j}, {k})")))?;
            let r = fmt.add(*acc, fmt.from_label(*p));
            overflows += r.saturated as usize;
            *acc = r.raw;
        }
    }
    let labels: Vec<u64> = raw.iter().map(|&r| fmt.to_label(r)).collect();
    let (s, reg) = ps.state.add_fixed("sum", fmt)?;
    let mut s = s.xor_lookup(reg, &[eigen], |k| Ok(labels[k[0] as usize]))?;
    s.note_overflows(overflows);
    ps.state = s;
    ps.regs.sum = Some(reg);
    ps.sum_labels = Some(labels);
    Ok(ps.track())
}

/// Clears and drops the product and theta registers; the sum is kept.
pub fn uncompute_products(mut ps: PipelineState) -> Result<PipelineState> {
    let ov = need(ps.regs.overlap, "overlap")?;
    let th = need(ps.regs.theta, "theta")?;
    let prod = need(ps.regs.product, "product")?;
    let eigen = need(ps.regs.eigen, "eigen")?;
    let theta = ps.theta_labels.take().ok_or_else(|| Error::UnknownRegister("theta".into()))?;
    let s = ps.state.uncompute_fixed_point_op(FixedOp::Mul, &[ov, th], prod)?;
    let s = s.xor_lookup(th, &[eigen], |k| Ok(theta[k[0] as usize]))?;
    if !s.register_is_zero(th)? {
        return Err(Error::UncomputeResidual("theta".into()));
    }
    ps.state = s.drop_register(prod)?.drop_register(th)?;
    ps.regs.product = None;
    ps.regs.theta = None;
    Ok(ps)
}

/// `eta_k |0> + sqrt(1 - eta_k^2) |1>` on a new flag, with `eta_k = s_k / C`.
/// `c = None` picks `C = max_k |s_k|`.
pub fn controlled_rotation_eta(mut ps: PipelineState, c: Option<f64>) -> Result<PipelineState> {
    let eigen = need(ps.regs.eigen, "eigen")?;
    let sum = need(ps.regs.sum, "sum")?;
    let fmt = ps.format;
    let table = ps.state.classical_table(&[eigen], sum)?;
    let s: Vec<f64> = (0..ps.d)
        .map(|k| table.get(&alloc::vec![k as u64]).map(|&l| fmt.decode_label(l)).unwrap_or(0.0))
        .collect();
    let c = c.unwrap_or_else(|| normalization(&s));
    if !(c > 0.0) || s.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroEta);
    }
    let mut eta = Vec::with_capacity(ps.d);
    for &v in &s {
        let e = v / c;
        if e.abs() > 1.0 + 1e-12 {
            return Err(Error::EtaExceedsOne(e.abs()));
        }
        eta.push(e.clamp(-1.0, 1.0));
    }
    let (st, flag) = ps.state.add_register("eta_flag", 1, RegisterKind::Flag)?;
    let psum = st.layout().position(sum)?;
    let st = st.apply_vector_op(&[flag], &Controls::none(), |ctx, v| {
        let e = (fmt.decode_label(ctx[psum]) / c).clamp(-1.0, 1.0);
        let r = math::sqrt(1.0 - e * e);
        let (a, b) = (v[0], v[1]);
        v[0] = a * e - b * r;
        v[1] = a * r + b * e;
        Ok(true)
    })?;
    let postselect_prob = eta.iter().map(|e| e * e).sum::<f64>() / ps.d as f64;
    ps.measured_postselect = Some(st.probability(flag, 0)?);
    ps.state = st;
    ps.regs.eta_flag = Some(flag);
    ps.eta = Some(EtaVector { s, c, eta, postselect_prob });
    Ok(ps.track())
}

/// Clears sum, overlap and feature registers, leaving
/// `(1 / sqrt(d)) sum_k |k> (eta_k |0> + sqrt(1 - eta_k^2) |1>)`.
pub fn uncompute_to_eta_state(mut ps: PipelineState) -> Result<PipelineState> {
    let feature = need(ps.regs.feature, "feature")?;
    let eigen = need(ps.regs.eigen, "eigen")?;
    let sum = need(ps.regs.sum, "sum")?;
    let ov = need(ps.regs.overlap, "overlap")?;
    need(ps.regs.eta_flag, "eta_flag")?;
    let sums = ps.sum_labels.take().ok_or_else(|| Error::UnknownRegister("sum".into()))?;
    let d = ps.d;
    let labels = &ps.overlap_labels;
    let s = ps.state.xor_lookup(sum, &[eigen], |k| Ok(sums[k[0] as usize]))?;
    if !s.register_is_zero(sum)? {
        return Err(Error::UncomputeResidual("sum".into()));
    }
    let s = s.drop_register(sum)?;
    let s = s.xor_lookup(ov, &[feature, eigen], |key| Ok(labels[key[0] as usize * d + key[1] as usize]))?;
    if !s.register_is_zero(ov)? {
        return Err(Error::UncomputeResidual("overlap".into()));
    }
    let s = s.drop_register(ov)?.uniform(feature, ps.f, &Controls::none())?;
    if !s.register_is_zero(feature)? {
        return Err(Error::UncomputeResidual("feature".into()));
    }
    ps.state = s.drop_register(feature)?;
    ps.regs.sum = None;
    ps.regs.overlap = None;
    ps.regs.feature = None;
    Ok(ps)
}

/// Runs every stage from the overlap state to the eta state.
pub fn prepare_eta_state(ps: PipelineState, theta: &[f64], c: Option<f64>) -> Result<PipelineState> {
    let ps = load_theta(ps, theta)?;
    let ps = multiply_theta(ps)?;
    let ps = sum_over_features(ps)?;
    let ps = uncompute_products(ps)?;
    let ps = controlled_rotation_eta(ps, c)?;
    uncompute_to_eta_state(ps)
}

/// Post-selects the rotation flag on 0 (leaving `f_hat` on the eigen
/// register), then builds the exchange-test state against each row of
/// `V_d` over a uniform node register. Returns the post-selection
/// probability alongside.
pub fn exchange_test_state(mut ps: PipelineState, basis: &SpectralBasis) -> Result<(PipelineState, f64)> {
    let eigen = need(ps.regs.eigen, "eigen")?;
    let flag = need(ps.regs.eta_flag, "eta_flag")?;
    if basis.d() != ps.d {
        return Err(Error::DimensionMismatch(alloc::format!("basis d = {} for a d = {} state", basis.d(), ps.d)));
    }
    let (s, prob) = match ps.state.measure(flag, 0) {
        Ok(r) => r,
        Err(Error::ZeroProbabilityOutcome { .. }) => return Err(Error::ZeroPostselectProbability),
        Err(e) => return Err(e),
    };
    let s = s.drop_register(flag)?;
    ps.regs.eta_flag = None;
    let rows = PreparationOracle::new(basis.v_d(), Direction::Row)?;
    let (s, node) = s.add_register("node", math::ceil_log2(basis.n()), RegisterKind::Index)?;
    let s = s.uniform(node, basis.n(), &Controls::none())?;
    let (s, row) = s.add_register("row", math::ceil_log2(ps.d), RegisterKind::Index)?;
    let s = s.apply_u_prepare(&rows, node, row, &Controls::none())?;
    let (s, swap) = s.add_register("swap", 1, RegisterKind::Flag)?;
    let regs = ExchangeRegs { eigen, row, swap, node };
    ps.state = exchange_sandwich(s, &regs, &Controls::none())?;
    ps.regs.node = Some(node);
    ps.regs.row = Some(row);
    ps.regs.swap = Some(swap);
    Ok((ps.track(), prob))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExchangeRegs {
    pub eigen: RegId,
    pub row: RegId,
    pub swap: RegId,
    pub node: RegId,
}

fn exchange_sandwich(s: QState, r: &ExchangeRegs, c: &Controls) -> Result<QState> {
    let s = s.walsh(r.swap, c)?;
    let s = s.swap_registers(r.eigen, r.row, &c.clone().and_qubit(r.swap, 0, true))?;
    s.walsh(r.swap, c)
}

/// `P(swap = 0 | node = p)` for every node.
pub fn exchange_flag_probabilities(ps: &PipelineState) -> Result<Vec<f64>> {
    let node = need(ps.regs.node, "node")?;
    let swap = need(ps.regs.swap, "swap")?;
    let m = ps.state.marginal(&[node, swap])?;
    let n = ps.state.layout().register(node)?.dim();
    let mut out = Vec::new();
    for p in 0..n as u64 {
        let p0 = m.get(&alloc::vec![p, 0]).copied().unwrap_or(0.0);
        let p1 = m.get(&alloc::vec![p, 1]).copied().unwrap_or(0.0);
        if p0 + p1 > 0.0 {
            out.push(p0 / (p0 + p1));
        }
    }
    Ok(out)
}

/// Circuit `A_p`: load `f_hat` into eigen, row `p` of `V_d` into row
/// (controlled on node), then the H, controlled-swap, H sandwich.
#[derive(Clone, Debug)]
pub struct ExchangePrep {
    regs: ExchangeRegs,
    f_hat: Vec<f64>,
    rows: PreparationOracle,
}

impl Preparation for ExchangePrep {
    fn registers(&self) -> Vec<RegId> {
        alloc::vec![self.regs.eigen, self.regs.row, self.regs.swap]
    }

    fn prepare(&self, s: QState, c: &Controls) -> Result<QState> {
        let s = s.load_vector(&self.f_hat, self.regs.eigen, c)?;
        let s = s.toggle_load(&self.rows, self.regs.node, self.regs.row, c)?;
        exchange_sandwich(s, &self.regs, c)
    }

    fn unprepare(&self, s: QState, c: &Controls) -> Result<QState> {
        let s = exchange_sandwich(s, &self.regs, c)?;
        let s = s.toggle_load(&self.rows, self.regs.node, self.regs.row, c)?;
        s.load_vector(&self.f_hat, self.regs.eigen, c)
    }
}

/// `G_p = -A_p S_0 A_p^dagger S_0'` selected by the node register, with
/// eigenvalues `e^{+-2 i alpha_p}`, `cos^2 alpha_p = (1 + (f_hat . v_p)^2) / 2`.
#[derive(Clone, Debug)]
pub struct GroverG {
    prep: ExchangePrep,
    layout: RegisterLayout,
}

impl GroverG {
    pub fn regs(&self) -> ExchangeRegs {
        self.prep.regs
    }

    pub fn preparation(&self) -> &ExchangePrep {
        &self.prep
    }

    /// Dense matrix over (eigen, row, swap) for node `p`.
    pub fn dense(&self, p: usize) -> Result<CMatrix> {
        self.matrix(&self.layout, &[p as u64])
    }
}

impl BranchUnitary for GroverG {
    fn targets(&self) -> Vec<RegId> {
        self.prep.registers()
    }

    fn selectors(&self) -> Vec<RegId> {
        alloc::vec![self.prep.regs.node]
    }

    fn apply(&self, s: QState, c: &Controls) -> Result<QState> {
        let r = self.prep.regs;
        let m1 = Complex64::new(-1.0, 0.0);
        let s = s.phase(m1, &c.clone().and_qubit(r.swap, 0, true))?;
        let s = self.prep.unprepare(s, c)?;
        let s = s.reflect_zero(&[r.eigen, r.row, r.swap], c)?;
        let s = self.prep.prepare(s, c)?;
        s.phase(m1, c)
    }

    fn apply_inverse(&self, s: QState, c: &Controls) -> Result<QState> {
        let r = self.prep.regs;
        let m1 = Complex64::new(-1.0, 0.0);
        let s = s.phase(m1, c)?;
        let s = self.prep.unprepare(s, c)?;
        let s = s.reflect_zero(&[r.eigen, r.row, r.swap], c)?;
        let s = self.prep.prepare(s, c)?;
        s.phase(m1, &c.clone().and_qubit(r.swap, 0, true))
    }
}

/// Grover operator of the exchange test for `eta` against the rows of
/// `V_d`, on the registers of `ps` when given, else on a fresh layout.
pub fn grover_g(basis: &SpectralBasis, eta: &EtaVector, ps: Option<&PipelineState>) -> Result<GroverG> {
    let rows = PreparationOracle::new(basis.v_d(), Direction::Row)?;
    let norm = eta.norm();
    if norm == 0.0 {
        return Err(Error::ZeroEta);
    }
    let f_hat = eta.f_hat();
    let (regs, layout) = match ps {
        Some(ps) => {
            let regs = ExchangeRegs {
                eigen: need(ps.regs.eigen, "eigen")?,
                row: need(ps.regs.row, "row")?,
                swap: need(ps.regs.swap, "swap")?,
                node: need(ps.regs.node, "node")?,
            };
            (regs, ps.state.layout().clone())
        }
        None => {
            let mut l = RegisterLayout::new();
            let eigen = l.add("eigen", math::ceil_log2(basis.d()), RegisterKind::Index)?;
            let node = l.add("node", math::ceil_log2(basis.n()), RegisterKind::Index)?;
            let row = l.add("row", math::ceil_log2(basis.d()), RegisterKind::Index)?;
            let swap = l.add("swap", 1, RegisterKind::Flag)?;
            (ExchangeRegs { eigen, row, swap, node }, l)
        }
    };
    Ok(GroverG { prep: ExchangePrep { regs, f_hat, rows }, layout })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageDiagnostics {
    pub overflow_events: usize,
    pub peak_branches: usize,
    /// `P(swap = 0 | node = p)` of the exchange-test state.
    pub exchange_flag0: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerOutput {
    /// Modal phase labels per node, folded to the non-negative representative.
    pub alpha_tilde: Vec<u64>,
    /// `cos(alpha~ pi / 2^q)` per node, as read from the fixed-point register.
    pub features: Vec<f64>,
    /// Oracle evaluated on the same overlap table the circuit consumed.
    pub oracle_features: Vec<f64>,
    pub max_abs_error: f64,
    pub eta: EtaVector,
    /// Measured probability of the rotation flag reading 0.
    pub postselect_prob: f64,
    pub diagnostics: StageDiagnostics,
}

fn fold(label: u64, q: u32) -> u64 {
    let n = 1u64 << q;
    if label > n / 2 {
        n - label
    } else {
        label
    }
}

fn modal<K: Clone + Ord>(m: &BTreeMap<K, f64>) -> Option<K> {
    let mut best: Option<(&K, f64)> = None;
    for (k, &p) in m {
        if best.is_none_or(|b| p > b.1) {
            best = Some((k, p));
        }
    }
    best.map(|b| b.0.clone())
}

/// Phase estimation of `G` on the exchange-test state and cosine readout.
/// `oracle` is the classical layer this output is compared against.
pub fn estimate_layer_output(
    ps: PipelineState,
    basis: &SpectralBasis,
    postselect_prob: f64,
    oracle: &LayerOracle,
    config: &EstimationConfig,
) -> Result<LayerOutput> {
    config.validate()?;
    let eta = ps.eta.clone().ok_or(Error::ZeroEta)?;
    if !(postselect_prob > 0.0) {
        return Err(Error::ZeroPostselectProbability);
    }
    let exchange_flag0 = exchange_flag_probabilities(&ps)?;
    let g = grover_g(basis, &eta, Some(&ps))?;
    let node = g.regs().node;
    let q = config.q;
    let fmt = config.format;
    let mut peak = ps.peak_branches;
    let (s, phase) = qsim::phase_estimate(ps.state, &g, "alpha", q, config.strategy)?;
    peak = peak.max(s.branch_count());
    let (s, out) = s.add_fixed("feature_out", fmt)?;
    let s = s.fixed_point_op(FixedOp::Cosine, &[phase], out)?;
    let n = basis.n();
    let mut alpha_tilde = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n);
    match config.readout {
        Readout::Exact => {
            let by_phase = s.marginal(&[node, phase])?;
            let by_out = s.marginal(&[node, out])?;
            for p in 0..n as u64 {
                let mut hp: BTreeMap<u64, f64> = BTreeMap::new();
                for (k, v) in by_phase.range(alloc::vec![p, 0]..=alloc::vec![p, u64::MAX]) {
                    *hp.entry(fold(k[1], q)).or_insert(0.0) += v;
                }
                let mut ho: BTreeMap<u64, f64> = BTreeMap::new();
                for (k, v) in by_out.range(alloc::vec![p, 0]..=alloc::vec![p, u64::MAX]) {
                    *ho.entry(k[1]).or_insert(0.0) += v;
                }
                let bad = Error::InsufficientShots { j: p as usize, k: 0 };
                alpha_tilde.push(modal(&hp).ok_or(bad.clone())?);
                features.push(fmt.decode_label(modal(&ho).ok_or(bad)?));
            }
        }
        Readout::Shots { shots, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            let counts = s.sample(&[node, phase], shots, &mut rng)?;
            for p in 0..n as u64 {
                let mut hp: BTreeMap<u64, f64> = BTreeMap::new();
                for (k, c) in counts.range(alloc::vec![p, 0]..=alloc::vec![p, u64::MAX]) {
                    *hp.entry(fold(k[1], q)).or_insert(0.0) += *c as f64;
                }
                let a = modal(&hp).ok_or(Error::InsufficientShots { j: p as usize, k: 0 })?;
                alpha_tilde.push(a);
                features.push(fmt.decode_raw(fmt.cosine(phase_angle(a, q)).raw));
            }
        }
    }
    let oracle_features = oracle.out.clone();
    if oracle_features.len() != features.len() {
        return Err(Error::LengthMismatch { got: oracle_features.len(), expected: features.len() });
    }
    let max_abs_error = features.iter().zip(&oracle_features).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(LayerOutput {
        alpha_tilde,
        features,
        oracle_features,
        max_abs_error,
        eta,
        postselect_prob,
        diagnostics: StageDiagnostics { overflow_events: s.diagnostics().overflow_events, peak_branches: peak, exchange_flag0 },
    })
}

/// One output column: filter `theta` applied to an overlap table.
pub fn run_column(
    overlaps: &OverlapRun,
    basis: &SpectralBasis,
    theta: &[f64],
    config: &EstimationConfig,
) -> Result<LayerOutput> {
    let ps = PipelineState::from_overlap_run(overlaps, config)?;
    let oracle = emulate_layer_output(&ps.overlap_table(), theta, basis)?;
    let ps = prepare_eta_state(ps, theta, None)?;
    let (ps, prob) = exchange_test_state(ps, basis)?;
    estimate_layer_output(ps, basis, prob, &oracle, config)
}

#[derive(Clone, Debug)]
pub struct LayerRun {
    pub overlaps: OverlapRun,
    /// One output per filter column.
    pub columns: Vec<LayerOutput>,
    /// Features of the all-classical chain from the input features, per column.
    pub composed_oracle: Vec<Vec<f64>>,
    pub composed_error: f64,
}

impl LayerRun {
    /// Quantum features as the next layer's input (n rows, one column per filter).
    pub fn features(&self) -> Result<FeatureMatrix> {
        let cols: Vec<&[f64]> = self.columns.iter().map(|c| c.features.as_slice()).collect();
        FeatureMatrix::from_columns(&cols)
    }

    pub fn max_abs_error(&self) -> f64 {
        self.columns.iter().fold(0.0f64, |m, c| m.max(c.max_abs_error))
    }
}

fn check_filters(filters: &[Vec<Vec<f64>>], d: usize) -> Result<()> {
    if filters.is_empty() {
        return Err(Error::InvalidConfig("at least one layer is required".into()));
    }
    for (s, layer) in filters.iter().enumerate() {
        if layer.is_empty() {
            return Err(Error::InvalidConfig(alloc::format!("layer {s} has no filter columns")));
        }
        for col in layer {
            if col.len() != d {
                return Err(Error::LengthMismatch { got: col.len(), expected: d });
            }
        }
    }
    Ok(())
}

/// Classical chain: exact overlaps and [`emulate_layer_output`] per column,
/// feeding each layer's outputs into the next.
pub fn forward_oracle(x0: &FeatureMatrix, basis: &SpectralBasis, filters: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<LayerOracle>>> {
    check_filters(filters, basis.d())?;
    let mut x = x0.clone();
    let mut out = Vec::with_capacity(filters.len());
    for layer in filters {
        let table = emulate_overlap_table(&x, basis)?;
        let cols: Vec<LayerOracle> = layer.iter().map(|t| emulate_layer_output(&table, t, basis)).collect::<Result<_>>()?;
        let feats: Vec<&[f64]> = cols.iter().map(|c| c.out.as_slice()).collect();
        x = FeatureMatrix::from_columns(&feats)?;
        out.push(cols);
    }
    Ok(out)
}

/// Multi-layer quantum forward pass; `filters[s][c]` is the length-`d`
/// filter producing column `c` of layer `s`'s output.
pub fn forward(
    x0: &FeatureMatrix,
    basis: &SpectralBasis,
    filters: &[Vec<Vec<f64>>],
    config: &EstimationConfig,
) -> Result<Vec<LayerRun>> {
    let composed = forward_oracle(x0, basis, filters)?;
    config.validate()?;
    let mut x = x0.clone();
    let mut runs = Vec::with_capacity(filters.len());
    for (layer, oracle) in filters.iter().zip(composed) {
        let overlaps = estimate_all_overlaps(&x, basis, config)?;
        let columns: Vec<LayerOutput> =
            layer.iter().map(|t| run_column(&overlaps, basis, t, config)).collect::<Result<_>>()?;
        let composed_oracle: Vec<Vec<f64>> = oracle.into_iter().map(|o| o.out).collect();
        let composed_error = columns
            .iter()
            .zip(&composed_oracle)
            .flat_map(|(c, o)| c.features.iter().zip(o).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        let run = LayerRun { overlaps, columns, composed_oracle, composed_error };
        x = run.features()?;
        runs.push(run);
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_weight_matrix, laplacian};
    use crate::spectral::{eigendecompose, top_d, EigenOrder};
    use core::f64::consts::PI;
    use rand::{Rng, SeedableRng};

    fn fmt() -> FixedFormat {
        FixedFormat::default()
    }

    fn cfg(q: u32) -> EstimationConfig {
        EstimationConfig::with_q(q)
    }

    fn label(x: f64) -> u64 {
        fmt().to_label(fmt().quantize(x).raw)
    }

    fn table_state(overlaps: &[f64], f: usize, d: usize) -> PipelineState {
        let labels: Vec<u64> = overlaps.iter().map(|&o| label(o)).collect();
        PipelineState::from_overlap_labels(&labels, f, d, &cfg(8)).unwrap()
    }

    fn values(ps: &PipelineState, reg: Option<RegId>) -> BTreeMap<Vec<u64>, f64> {
        let keys: Vec<RegId> = [ps.regs.feature, ps.regs.eigen].into_iter().flatten().collect();
        ps.state
            .classical_table(&keys, reg.unwrap())
            .unwrap()
            .into_iter()
            .map(|(k, v)| (k, fmt().decode_label(v)))
            .collect()
    }

    fn basis2() -> SpectralBasis {
        let h = libm::sqrt(0.5);
        let v = Matrix::from_columns(&[[h, h], [h, -h]]).unwrap();
        SpectralBasis::from_parts(v, alloc::vec![2.0, 0.0], EigenOrder::Largest).unwrap()
    }

    #[test]
    fn theta_loading() {
        let ps = load_theta(table_state(&[0.1, 0.2], 1, 2), &[0.5, -0.25]).unwrap();
        let v = values(&ps, ps.regs.theta);
        assert_eq!(v[&alloc::vec![0, 0]], 0.5);
        assert_eq!(v[&alloc::vec![0, 1]], -0.25);
        let ps = load_theta(table_state(&[0.1, 0.2], 1, 2), &[0.0, 0.0]).unwrap();
        assert!(ps.state.register_is_zero(ps.regs.theta.unwrap()).unwrap());
        let ps = load_theta(table_state(&[0.1, 0.2], 1, 2), &[1.0, 1.0]).unwrap();
        assert!(values(&ps, ps.regs.theta).values().all(|&t| t == 1.0));
        assert_eq!(load_theta(table_state(&[0.1, 0.2], 1, 2), &[9.0, 0.0]).unwrap_err(), Error::ThetaOutOfRange(9.0));
    }

    #[test]
    fn products_and_sums() {
        let ps = multiply_theta(load_theta(table_state(&[1.0, 0.98995], 1, 2), &[0.5, 0.3]).unwrap()).unwrap();
        let v = values(&ps, ps.regs.product);
        assert_eq!(v[&alloc::vec![0, 0]], 0.5);
        let f = fmt();
        let expect = f.decode_raw(f.mul(f.quantize(0.98995).raw, f.quantize(0.3).raw).raw);
        assert_eq!(v[&alloc::vec![0, 1]], expect);
        assert!((expect - 0.296985).abs() <= 2.0 / 4096.0);

        let ps = sum_over_features(ps).unwrap();
        assert_eq!(values(&ps, ps.regs.sum), values(&ps, ps.regs.product));

        // columns j = 0, 1 of a 2 x 1 table
        let ps = table_state(&[0.3, 0.5], 2, 1);
        let ps = sum_over_features(multiply_theta(load_theta(ps, &[1.0]).unwrap()).unwrap()).unwrap();
        assert!(values(&ps, ps.regs.sum).values().all(|&s| (s - 0.8).abs() <= 1.0 / 4096.0));

        let ps = table_state(&[0.4, -0.4], 2, 1);
        let ps = sum_over_features(multiply_theta(load_theta(ps, &[0.7]).unwrap()).unwrap()).unwrap();
        assert!(values(&ps, ps.regs.sum).values().all(|&s| s == 0.0));
    }

    #[test]
    fn products_uncompute_cleanly() {
        let ps = table_state(&[0.3, -0.6, 0.9, 0.1], 2, 2);
        let before = ps.state.clone();
        let ps = sum_over_features(multiply_theta(load_theta(ps, &[0.7, -1.2]).unwrap()).unwrap()).unwrap();
        let branches = ps.state.branch_count();
        let ps = uncompute_products(ps).unwrap();
        assert_eq!(ps.state.branch_count(), branches);
        assert!((ps.state.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(ps.regs.theta.is_none() && ps.regs.product.is_none());
        // replaying multiply reproduces the table
        let again = multiply_theta(load_theta(ps.clone(), &[0.7, -1.2]).unwrap()).unwrap();
        let once = multiply_theta(load_theta(PipelineState { state: before, ..ps.clone() }, &[0.7, -1.2]).unwrap()).unwrap();
        assert_eq!(values(&again, again.regs.product), values(&once, once.regs.product));
    }

    #[test]
    fn rotation_probabilities() {
        // s = (1, -0.5) with C = 1
        let ps = table_state(&[1.0, -0.5], 1, 2);
        let ps = sum_over_features(multiply_theta(load_theta(ps, &[1.0, 1.0]).unwrap()).unwrap()).unwrap();
        let ps = controlled_rotation_eta(uncompute_products(ps).unwrap(), None).unwrap();
        let eta = ps.eta.clone().unwrap();
        assert_eq!(eta.eta, alloc::vec![1.0, -0.5]);
        assert!((eta.postselect_prob - 1.25 / 2.0).abs() < 1e-15);
        assert!((ps.measured_postselect.unwrap() - eta.postselect_prob).abs() < 1e-10);

        let ps = table_state(&[0.5, 0.25], 1, 2);
        let ps = sum_over_features(multiply_theta(load_theta(ps, &[1.0, 1.0]).unwrap()).unwrap()).unwrap();
        let ps = uncompute_products(ps).unwrap();
        assert!(matches!(controlled_rotation_eta(ps.clone(), Some(0.4)), Err(Error::EtaExceedsOne(_))));
        let ps = controlled_rotation_eta(ps, Some(0.5)).unwrap();
        let flag = ps.regs.eta_flag.unwrap();
        let eigen = ps.regs.eigen.unwrap();
        let m = ps.state.marginal(&[eigen, flag]).unwrap();
        // eta = 1 on k = 0, 0.5 on k = 1
        assert!(m.get(&alloc::vec![0, 1]).is_none());
        assert!((m[&alloc::vec![1, 0]] - 0.125).abs() < 1e-12);

        let ps = table_state(&[0.0, 0.0], 1, 2);
        let ps = sum_over_features(multiply_theta(load_theta(ps, &[1.0, 1.0]).unwrap()).unwrap()).unwrap();
        assert_eq!(controlled_rotation_eta(uncompute_products(ps).unwrap(), None).unwrap_err(), Error::ZeroEta);
    }

    #[test]
    fn eta_state_matches_direct_construction() {
        let ps = table_state(&[0.3, -0.6, 0.9, 0.1, -0.2, 0.45], 3, 2);
        let ps = prepare_eta_state(ps, &[0.7, -1.2], None).unwrap();
        let eta = ps.eta.clone().unwrap();
        let eigen = ps.regs.eigen.unwrap();
        let flag = ps.regs.eta_flag.unwrap();
        assert_eq!(ps.state.layout().len(), 2);
        let h = libm::sqrt(0.5);
        for k in 0..2u64 {
            let e = eta.eta[k as usize];
            let mut l = alloc::vec![0u64; 2];
            l[ps.state.layout().position(eigen).unwrap()] = k;
            let pf = ps.state.layout().position(flag).unwrap();
            l[pf] = 0;
            assert!((ps.state.amplitude(&l).re - h * e).abs() < 1e-10);
            l[pf] = 1;
            assert!((ps.state.amplitude(&l).re - h * libm::sqrt(1.0 - e * e)).abs() < 1e-10);
        }
        assert!((ps.state.norm_sqr() - 1.0).abs() < 1e-12);

        let ps = prepare_eta_state(table_state(&[0.8], 1, 1), &[1.0], None).unwrap();
        assert_eq!(ps.state.branch_count(), 1);
        assert_eq!(ps.state.amplitude(&[0, 0]), Complex64::new(1.0, 0.0));
    }

    fn exchange(overlaps: &[f64], theta: &[f64], basis: &SpectralBasis) -> (PipelineState, f64) {
        let d = basis.d();
        let ps = prepare_eta_state(table_state(overlaps, overlaps.len() / d, d), theta, None).unwrap();
        exchange_test_state(ps, basis).unwrap()
    }

    #[test]
    fn exchange_probabilities() {
        let b = basis2();
        // f_hat = (1, 0); rows of V are (h, h) and (h, -h), dot^2 = 1/2
        let (ps, prob) = exchange(&[1.0, 0.0], &[1.0, 1.0], &b);
        assert!((prob - 0.5).abs() < 1e-12);
        for p in exchange_flag_probabilities(&ps).unwrap() {
            assert!((p - 0.75).abs() < 1e-10);
        }
        // f_hat = row 0 exactly
        let (ps, _) = exchange(&[0.5, 0.5], &[1.0, 1.0], &b);
        let probs = exchange_flag_probabilities(&ps).unwrap();
        assert!((probs[0] - 1.0).abs() < 1e-10);
        assert!((probs[1] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn exchange_random_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a: f64 = rng.random_range(0.0..PI);
            let v = Matrix::from_columns(&[[libm::cos(a), libm::sin(a)], [-libm::sin(a), libm::cos(a)]]).unwrap();
            let b = SpectralBasis::from_parts(v, alloc::vec![1.0, 0.0], EigenOrder::Largest).unwrap();
            let ov = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let (ps, _) = exchange(&ov, &[1.0, 1.0], &b);
            let eta = ps.eta.clone().unwrap();
            let orc = crate::classical::layer_from_eta(eta.s.clone(), eta.c, eta.eta.clone(), &b).unwrap();
            for (p, got) in exchange_flag_probabilities(&ps).unwrap().into_iter().enumerate() {
                assert!((got - (1.0 + orc.dots[p] * orc.dots[p]) / 2.0).abs() < 1e-10);
            }
        }
    }

    fn lattice_eigs(m: &CMatrix) -> Vec<Complex64> {
        let n = m.dim();
        let re = nalgebra::DMatrix::from_fn(n, n, |i, j| m[(i, j)].re);
        re.complex_eigenvalues().iter().map(|e| Complex64::new(e.re, e.im)).collect()
    }

    #[test]
    fn grover_g_eigenvalues() {
        let b = basis2();
        let (ps, _) = exchange(&[1.0, 0.3], &[1.0, 1.0], &b);
        let eta = ps.eta.clone().unwrap();
        let orc = crate::classical::layer_from_eta(eta.s.clone(), eta.c, eta.eta.clone(), &b).unwrap();
        let g = grover_g(&b, &eta, Some(&ps)).unwrap();
        for p in 0..2 {
            let m = g.dense(p).unwrap();
            assert!(m.mul(&m.adjoint()).max_distance(&CMatrix::identity(m.dim())) < 1e-10);
            let alpha = libm::acos(orc.out[p]);
            let eig = lattice_eigs(&m);
            for sign in [1.0, -1.0] {
                let t = Complex64::new(libm::cos(2.0 * alpha), sign * libm::sin(2.0 * alpha));
                assert!(eig.iter().any(|e| (e - t).norm() < 1e-8));
            }
        }
        // f_hat orthogonal to a row gives alpha = pi/4
        let eta = EtaVector { s: alloc::vec![1.0, -1.0], c: 1.0, eta: alloc::vec![1.0, -1.0], postselect_prob: 1.0 };
        let g = grover_g(&b, &eta, None).unwrap();
        let eig = lattice_eigs(&g.dense(0).unwrap());
        assert!(eig.iter().any(|e| (e - Complex64::new(0.0, 1.0)).norm() < 1e-8));
    }

    #[test]
    fn layer_output_orthogonal_rows() {
        // f_hat = (1, 0) against rows (h, h), (h, -h)
        let b = basis2();
        let x = FeatureMatrix::from_columns(&[[1.0, 1.0]]).unwrap();
        let c = cfg(8);
        let run = estimate_all_overlaps(&x, &b, &c).unwrap();
        let out = run_column(&run, &b, &[1.0, 1.0], &c).unwrap();
        let expect = libm::sqrt(0.75);
        for f in &out.features {
            assert!((f - expect).abs() <= PI * 2.0 / 256.0 + 1.0 / 2048.0);
        }
        assert!(out.max_abs_error <= PI * 2.0 / 256.0 + 1.0 / 2048.0);
    }

    #[test]
    fn layer_output_d1_reads_one() {
        let h = libm::sqrt(0.5);
        let v = Matrix::from_columns(&[[h, h]]).unwrap();
        let b = SpectralBasis::from_parts(v, alloc::vec![0.0], EigenOrder::Largest).unwrap();
        let x = FeatureMatrix::from_columns(&[[0.3, 0.9]]).unwrap();
        let c = cfg(6);
        let run = estimate_all_overlaps(&x, &b, &c).unwrap();
        let out = run_column(&run, &b, &[1.0], &c).unwrap();
        assert!(out.features.iter().all(|&f| f == 1.0));
        assert!(out.alpha_tilde.iter().all(|&a| a == 0));
    }

    #[test]
    fn features_invariant_under_theta_sign() {
        let dec = eigendecompose(&laplacian(&build_weight_matrix(&[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5)], 4).unwrap())).unwrap();
        let b = top_d(&dec, 2).unwrap();
        let x = FeatureMatrix::from_columns(&[[0.2, 0.9, -0.4, 0.3], [1.0, 0.1, 0.5, -0.7]]).unwrap();
        let c = cfg(7);
        let run = estimate_all_overlaps(&x, &b, &c).unwrap();
        let a = run_column(&run, &b, &[0.8, -0.3], &c).unwrap();
        let m = run_column(&run, &b, &[-0.8, 0.3], &c).unwrap();
        for (p, q) in a.features.iter().zip(&m.features) {
            assert!((p.abs() - q.abs()).abs() < 1e-10);
        }
        assert!(a.diagnostics.peak_branches >= 1);
    }

    #[test]
    fn zero_filters_fail_at_first_layer() {
        let b = basis2();
        let x = FeatureMatrix::from_columns(&[[1.0, 0.2]]).unwrap();
        let err = forward(&x, &b, &[alloc::vec![alloc::vec![0.0, 0.0]]], &cfg(5)).unwrap_err();
        assert_eq!(err, Error::ZeroEta);
    }

    #[test]
    fn two_layers_on_p2() {
        let dec = eigendecompose(&laplacian(&build_weight_matrix(&[(0, 1, 1.0)], 2).unwrap())).unwrap();
        let b = top_d(&dec, 2).unwrap();
        let x = FeatureMatrix::from_columns(&[[0.9, 0.2]]).unwrap();
        let filters = alloc::vec![alloc::vec![alloc::vec![1.0, 0.5]], alloc::vec![alloc::vec![0.4, 1.0]]];
        let c = cfg(10);
        let runs = forward(&x, &b, &filters, &c).unwrap();
        assert_eq!(runs.len(), 2);
        let budget = crate::layer_error_budget(10);
        for r in &runs {
            assert!(r.max_abs_error() <= budget);
            assert!(r.composed_error <= 2.0 * budget);
        }
        let orc = forward_oracle(&x, &b, &filters).unwrap();
        assert_eq!(orc[1][0].out, runs[1].composed_oracle[0]);
    }

    #[test]
    fn shots_readout_agrees_on_sharp_case() {
        let b = basis2();
        let x = FeatureMatrix::from_columns(&[[1.0, 1.0]]).unwrap();
        let exact = cfg(6);
        let shots = EstimationConfig { readout: Readout::Shots { shots: 3000, seed: 9 }, ..exact };
        let re = run_column(&estimate_all_overlaps(&x, &b, &exact).unwrap(), &b, &[1.0, 1.0], &exact).unwrap();
        let rs = run_column(&estimate_all_overlaps(&x, &b, &shots).unwrap(), &b, &[1.0, 1.0], &shots).unwrap();
        for (a, s) in re.features.iter().zip(&rs.features) {
            assert!((a - s).abs() <= PI / 32.0);
        }
    }
}
