//! Finite-difference gradient descent on one layer's filter.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::classical::{emulate_layer_output, emulate_overlap_table, FeatureMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::overlap::{estimate_all_overlaps, EstimationConfig, OverlapRun, Readout};
use crate::qconv::run_column;
use crate::spectral::SpectralBasis;

/// Losses above this abort a fit.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ForwardPath {
    Oracle,
    Quantum(EstimationConfig),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Central-difference step.
    pub h: f64,
    pub path: ForwardPath,
    /// Seeds shot readout on the quantum path.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 100, learning_rate: 0.1, h: 1e-4, path: ForwardPath::Oracle, seed: 0 }
    }
}

/// Smallest step the quantum path accepts at `q` phase bits.
pub fn min_quantum_step(q: u32) -> f64 {
    4.0 * PI / (1u64 << q) as f64
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!("step h = {} must be positive", self.h)));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(alloc::format!(
                "learning rate {} must be non-negative",
                self.learning_rate
            )));
        }
        if let ForwardPath::Quantum(c) = self.path {
            c.validate()?;
            if self.h < min_quantum_step(c.q) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "quantum path needs h >= {} at q = {}",
                    min_quantum_step(c.q),
                    c.q
                )));
            }
        }
        Ok(())
    }
}

/// Mean squared error.
pub fn loss(output: &[f64], targets: &[f64]) -> Result<f64> {
    if output.len() != targets.len() {
        return Err(Error::LengthMismatch { got: output.len(), expected: targets.len() });
    }
    if output.is_empty() {
        return Ok(0.0);
    }
    Ok(output.iter().zip(targets).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / output.len() as f64)
}

/// `(L(theta + h e_k) - L(theta - h e_k)) / 2h` for every `k`.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> Result<f64>, theta: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut t = theta.to_vec();
    let mut g = Vec::with_capacity(theta.len());
    for k in 0..theta.len() {
        t[k] = theta[k] + h;
        let up = f(&t)?;
        t[k] = theta[k] - h;
        let down = f(&t)?;
        t[k] = theta[k];
        g.push((up - down) / (2.0 * h));
    }
    Ok(g)
}

/// Training problem: one layer mapping `x` to `targets` (one value per node).
#[derive(Clone, Debug)]
pub struct TrainData {
    pub x: FeatureMatrix,
    pub basis: SpectralBasis,
    pub targets: Vec<f64>,
}

/// Precomputed overlap table; the filter does not enter it.
enum Table {
    Oracle(Matrix),
    Quantum(OverlapRun, EstimationConfig),
}

/// Layer outputs as a function of the filter along a chosen path.
pub struct Objective<'a> {
    data: &'a TrainData,
    table: Table,
}

impl<'a> Objective<'a> {
    pub fn new(data: &'a TrainData, path: ForwardPath, seed: u64) -> Result<Self> {
        if data.targets.len() != data.basis.n() {
            return Err(Error::LengthMismatch { got: data.targets.len(), expected: data.basis.n() });
        }
        let table = match path {
            ForwardPath::Oracle => Table::Oracle(emulate_overlap_table(&data.x, &data.basis)?),
            ForwardPath::Quantum(mut c) => {
                if let Readout::Shots { seed: s, .. } = &mut c.readout {
                    *s ^= seed;
                }
                Table::Quantum(estimate_all_overlaps(&data.x, &data.basis, &c)?, c)
            }
        };
        Ok(Self { data, table })
    }

    pub fn features(&self, theta: &[f64]) -> Result<Vec<f64>> {
        match &self.table {
            Table::Oracle(t) => Ok(emulate_layer_output(t, theta, &self.data.basis)?.out),
            Table::Quantum(run, c) => Ok(run_column(run, &self.data.basis, theta, c)?.features),
        }
    }

    pub fn loss(&self, theta: &[f64]) -> Result<f64> {
        loss(&self.features(theta)?, &self.data.targets)
    }

    pub fn gradient(&self, theta: &[f64], h: f64) -> Result<Vec<f64>> {
        central_difference(|t| self.loss(t), theta, h)
    }
}

pub fn grad_fd(theta: &[f64], data: &TrainData, config: &TrainConfig) -> Result<Vec<f64>> {
    config.validate()?;
    Objective::new(data, config.path, config.seed)?.gradient(theta, config.h)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainTrace {
    /// Loss before each update.
    pub losses: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub theta: Vec<f64>,
    /// Loss at the final filter.
    pub final_loss: f64,
}

/// Plain gradient descent for `config.epochs` updates.
pub fn fit(theta0: &[f64], data: &TrainData, config: &TrainConfig) -> Result<TrainTrace> {
    config.validate()?;
    if theta0.len() != data.basis.d() {
        return Err(Error::LengthMismatch { got: theta0.len(), expected: data.basis.d() });
    }
    let obj = Objective::new(data, config.path, config.seed)?;
    let mut theta = theta0.to_vec();
    let mut losses = Vec::with_capacity(config.epochs);
    let mut grad_norms = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let l = obj.loss(&theta)?;
        if !(l <= DIVERGENCE_LIMIT) {
            return Err(Error::DivergenceDetected(l));
        }
        let g = obj.gradient(&theta, config.h)?;
        losses.push(l);
        grad_norms.push(linalg::norm(&g));
        for (t, gk) in theta.iter_mut().zip(&g) {
            *t -= config.learning_rate * gk;
        }
    }
    let final_loss = obj.loss(&theta)?;
    if !(final_loss <= DIVERGENCE_LIMIT) {
        return Err(Error::DivergenceDetected(final_loss));
    }
    Ok(TrainTrace { losses, grad_norms, theta, final_loss })
}
