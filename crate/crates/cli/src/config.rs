//! Experiment configuration. One JSON file fully determines a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sync_mesh_core::dynamics::{EarlyStop, SyncThresholds};
use sync_mesh_core::topo::random_weights;
use sync_mesh_core::{CouplingFn, Graph, OscBank, OscNetwork, SystemKind};

use crate::error::{io_err, CliError};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GraphConfig {
    /// 1-indexed `(tail, head)` pairs.
    Explicit { n: usize, edges: Vec<[usize; 2]>, weights: Vec<f64> },
    Path(Family),
    Cycle(Family),
    Complete(Family),
    /// Random spanning tree plus each remaining pair with probability `p`.
    Random { n: usize, p: f64, seed: u64, #[serde(default)] weight_range: Option<[f64; 2]> },
}

/// Weights are explicit, drawn from `weight_range` with `seed`, or all one.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Family {
    pub n: usize,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub weight_range: Option<[f64; 2]>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialConfig {
    Explicit { phi: Vec<f64>, gamma: Vec<f64> },
    /// Phases uniform on `[0, 2 pi)`, filter states uniform on `gamma_range`.
    Random { seed: u64, gamma_range: [f64; 2] },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Random Newton starts in addition to `mu = 0` and the twisted states.
    #[serde(default = "default_random_starts")]
    pub random_starts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Leaf coordinate `r` at which to linearize.
    #[serde(default)]
    pub r: f64,
}

fn default_random_starts() -> usize {
    20
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphConfig,
    pub bank: OscBank,
    pub coupling: CouplingFn,
    pub controller: SystemKind,
    #[serde(default)]
    pub dual_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub kappa: Option<Vec<f64>>,
    pub initial: InitialConfig,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub early_stop: Option<EarlyStop>,
    /// Success criteria for every trial. Required so that no batch verdict
    /// depends on hidden defaults.
    pub thresholds: SyncThresholds,
    #[serde(default)]
    pub analysis: Option<AnalysisConfig>,
    /// Run even when the coupling fails its structural checks, e.g. to
    /// demonstrate what goes wrong with sine coupling on long cycles.
    #[serde(default)]
    pub allow_noncompliant_coupling: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::ConfigParse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn n(&self) -> usize {
        match &self.graph {
            GraphConfig::Explicit { n, .. } | GraphConfig::Random { n, .. } => *n,
            GraphConfig::Path(f) | GraphConfig::Cycle(f) | GraphConfig::Complete(f) => f.n,
        }
    }

    pub fn build_graph(&self) -> Result<Graph, CliError> {
        let invalid = |e: sync_mesh_core::Error| CliError::InvalidConfig(format!("graph: {e}"));
        let weights = |m: usize, explicit: &Option<Vec<f64>>, range: &Option<[f64; 2]>, seed: u64| match (explicit, range) {
            (Some(w), None) => Ok(w.clone()),
            (None, Some([lo, hi])) => random_weights(m, seed, (*lo, *hi)).map_err(invalid),
            (None, None) => Ok(vec![1.0; m]),
            (Some(_), Some(_)) => Err(CliError::InvalidConfig("graph: give either weights or weight_range, not both".into())),
        };
        let g = match &self.graph {
            GraphConfig::Explicit { n, edges, weights } => {
                let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e[0], e[1])).collect();
                Graph::new(*n, &pairs, weights)
            }
            GraphConfig::Path(f) => Graph::path(f.n, &weights(f.n.saturating_sub(1), &f.weights, &f.weight_range, f.seed)?),
            GraphConfig::Cycle(f) => Graph::cycle(f.n, &weights(f.n, &f.weights, &f.weight_range, f.seed)?),
            GraphConfig::Complete(f) => {
                Graph::complete(f.n, &weights(f.n * f.n.saturating_sub(1) / 2, &f.weights, &f.weight_range, f.seed)?)
            }
            GraphConfig::Random { n, p, seed, weight_range } => {
                let pairs = Graph::random_connected_pairs(*n, *p, *seed).map_err(invalid)?;
                let w = weights(pairs.len(), &None, weight_range, seed ^ 0x5eed)?;
                Graph::new(*n, &pairs, &w)
            }
        };
        g.map_err(invalid)
    }

    pub fn build_network(&self) -> Result<OscNetwork, CliError> {
        let invalid = |e: sync_mesh_core::Error| CliError::InvalidConfig(e.to_string());
        let mut net = OscNetwork::new(self.build_graph()?, self.coupling, self.bank.clone()).map_err(invalid)?;
        if let Some(d) = &self.dual_weights {
            net = net.with_dual_weights(d.clone()).map_err(invalid)?;
        }
        if let Some(k) = &self.kappa {
            net = net.with_kappa(k.clone()).map_err(invalid)?;
        }
        Ok(net)
    }

    pub fn check_numbers(&self) -> Result<(), CliError> {
        if !(self.dt > 0.0 && self.t_end >= self.dt) {
            return Err(CliError::InvalidConfig(format!("need dt > 0 and t_end >= dt, got dt = {}, t_end = {}", self.dt, self.t_end)));
        }
        if self.record_every == 0 {
            return Err(CliError::InvalidConfig("record_every must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(CliError::InvalidConfig("trials must be at least 1".into()));
        }
        let n = self.n();
        match &self.initial {
            InitialConfig::Explicit { phi, gamma } if phi.len() != n || gamma.len() != n => Err(CliError::InvalidConfig(format!(
                "initial state has {} phases and {} filter states for {n} vertices",
                phi.len(),
                gamma.len()
            ))),
            InitialConfig::Random { gamma_range: [lo, hi], .. } if !(lo < hi) => {
                Err(CliError::InvalidConfig(format!("gamma_range [{lo}, {hi}] is empty")))
            }
            _ => Ok(()),
        }
    }
}
