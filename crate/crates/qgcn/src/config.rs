use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use qgcn_core::fixed::FixedFormat;
use qgcn_core::overlap::{EstimationConfig, Readout};
use qgcn_core::spectral::EigenOrder;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::read_text;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Quantum,
    Oracle,
    #[default]
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum GraphMode {
    /// Weights from the edge list.
    #[default]
    EdgeList,
    /// Gaussian similarity of the feature rows.
    Gaussian { sigma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    #[default]
    Largest,
    Smallest,
}

impl From<Order> for EigenOrder {
    fn from(o: Order) -> Self {
        match o {
            Order::Largest => EigenOrder::Largest,
            Order::Smallest => EigenOrder::Smallest,
        }
    }
}

fn default_d() -> usize {
    2
}
fn default_q() -> u32 {
    10
}
fn default_int_bits() -> u32 {
    2
}
fn default_b_frac() -> u32 {
    12
}
fn default_epochs() -> NonZeroUsize {
    NonZeroUsize::new(100).unwrap()
}
fn default_lr() -> f64 {
    0.5
}
fn default_h() -> f64 {
    1e-4
}
fn default_sweep_seeds() -> usize {
    1
}

/// Experiment configuration. Relative paths resolve against the directory
/// of the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub edges: Option<PathBuf>,
    #[serde(default)]
    pub features: Option<PathBuf>,
    #[serde(default)]
    pub targets: Option<PathBuf>,
    #[serde(default)]
    pub graph: GraphMode,
    /// Node count; defaults to what the inputs imply.
    #[serde(default)]
    pub nodes: Option<usize>,
    #[serde(default = "default_d")]
    pub d: usize,
    /// `layers[s][c]` is the filter (length `d`) producing column `c` of
    /// layer `s`. Empty means one layer with an all-ones filter.
    #[serde(default)]
    pub layers: Vec<Vec<Vec<f64>>>,
    #[serde(default = "default_q")]
    pub q: u32,
    #[serde(default = "default_int_bits")]
    pub int_bits: u32,
    #[serde(default = "default_b_frac")]
    pub b_frac: u32,
    #[serde(default)]
    pub eigen_order: Order,
    #[serde(default)]
    pub mode: Mode,
    /// Sampled readout with this many shots; exact readout when absent.
    #[serde(default)]
    pub shots: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub q_list: Vec<u32>,
    #[serde(default = "default_sweep_seeds")]
    pub sweep_seeds: usize,
    #[serde(default = "default_epochs")]
    pub epochs: NonZeroUsize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_h")]
    pub h: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl RunConfig {
    pub fn from_json(text: &str, source: &Path) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| {
            CliError::Parse(crate::error::ParseError {
                source_name: source.display().to_string(),
                line: e.line(),
                message: e.to_string(),
            })
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let mut c = Self::from_json(&read_text(path)?, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut c.edges, &mut c.features, &mut c.targets, &mut c.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }

    pub fn format(&self) -> CliResult<FixedFormat> {
        FixedFormat::new(self.int_bits, self.b_frac).ok_or_else(|| {
            CliError::Input(format!("fixed-point format with {} integer and {} fractional bits", self.int_bits, self.b_frac))
        })
    }

    pub fn estimation(&self) -> CliResult<EstimationConfig> {
        self.estimation_at(self.q, self.seed)
    }

    pub fn estimation_at(&self, q: u32, seed: u64) -> CliResult<EstimationConfig> {
        let readout = match self.shots {
            Some(shots) => Readout::Shots { shots, seed },
            None => Readout::Exact,
        };
        let c = EstimationConfig { q, readout, format: self.format()?, ..EstimationConfig::default() };
        c.validate()?;
        Ok(c)
    }

    /// Layer filters, defaulting to one all-ones column.
    pub fn filters(&self) -> Vec<Vec<Vec<f64>>> {
        if self.layers.is_empty() {
            vec![vec![vec![1.0; self.d]]]
        } else {
            self.layers.clone()
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.format()?;
        if let GraphMode::Gaussian { sigma } = self.graph {
            if !(sigma > 0.0) {
                return Err(CliError::Input(format!("gaussian sigma must be positive, got {sigma}")));
            }
        }
        if self.shots == Some(0) {
            return Err(CliError::Input("shots must be at least 1".into()));
        }
        if self.sweep_seeds == 0 {
            return Err(CliError::Input("sweep_seeds must be at least 1".into()));
        }
        self.estimation()?;
        for (s, layer) in self.filters().iter().enumerate() {
            for col in layer {
                if col.len() != self.d {
                    return Err(CliError::Input(format!("layer {s} filter has {} values for d = {}", col.len(), self.d)));
                }
            }
        }
        Ok(())
    }
}
