use serde::{Deserialize, Serialize};

use crate::coupling::CouplingFn;
use crate::error::{Error, Result};
use crate::topo::{projection_set, Graph, ProjectionSet};
use crate::vco::OscBank;

/// Graph, oscillator bank and coupling function: one complete system.
///
/// `dual_weights` are the extra edge weights `d_k` of the dual controller and
/// `kappa` the per-vertex proportional gains of the PI controller; both
/// default to ones.
#[derive(Debug, Clone)]
pub struct OscNetwork {
    graph: Graph,
    coupling: CouplingFn,
    bank: OscBank,
    dual_weights: Vec<f64>,
    kappa: Vec<f64>,
    proj: ProjectionSet,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub graph: Graph,
    pub coupling: CouplingFn,
    pub bank: OscBank,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual_weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Vec<f64>>,
}

impl OscNetwork {
    pub fn new(graph: Graph, coupling: CouplingFn, bank: OscBank) -> Result<Self> {
        if bank.n() != graph.n() {
            return Err(Error::DimensionMismatch { expected: graph.n(), got: bank.n() });
        }
        let proj = projection_set(&graph, bank.gains())?;
        let m = graph.m();
        let n = graph.n();
        Ok(OscNetwork { graph, coupling, bank, dual_weights: vec![1.0; m], kappa: vec![1.0; n], proj })
    }

    pub fn from_spec(spec: NetworkSpec) -> Result<Self> {
        let mut net = OscNetwork::new(spec.graph, spec.coupling, spec.bank)?;
        if let Some(d) = spec.dual_weights {
            net = net.with_dual_weights(d)?;
        }
        if let Some(k) = spec.kappa {
            net = net.with_kappa(k)?;
        }
        Ok(net)
    }

    pub fn with_dual_weights(mut self, d: Vec<f64>) -> Result<Self> {
        if d.len() != self.graph.m() {
            return Err(Error::DimensionMismatch { expected: self.graph.m(), got: d.len() });
        }
        if let Some((k, &w)) = d.iter().enumerate().find(|(_, &w)| !(w > 0.0 && w.is_finite())) {
            return Err(Error::NonPositiveWeight { edge: k + 1, weight: w });
        }
        self.dual_weights = d;
        Ok(self)
    }

    pub fn with_kappa(mut self, kappa: Vec<f64>) -> Result<Self> {
        if kappa.len() != self.graph.n() {
            return Err(Error::DimensionMismatch { expected: self.graph.n(), got: kappa.len() });
        }
        if let Some((i, &k)) = kappa.iter().enumerate().find(|(_, &k)| !(k > 0.0 && k.is_finite())) {
            return Err(Error::NonPositiveGain { vertex: i + 1, gain: k });
        }
        self.kappa = kappa;
        Ok(self)
    }

    /// Same system with a different coupling function.
    pub fn with_coupling(&self, coupling: CouplingFn) -> Self {
        OscNetwork { coupling, ..self.clone() }
    }

    /// Same system with every edge orientation flipped.
    pub fn reversed(&self) -> Self {
        OscNetwork { graph: self.graph.reversed(), proj: projection_set(&self.graph.reversed(), self.bank.gains()).expect("gains already validated"), ..self.clone() }
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn coupling(&self) -> &CouplingFn {
        &self.coupling
    }

    pub fn bank(&self) -> &OscBank {
        &self.bank
    }

    pub fn dual_weights(&self) -> &[f64] {
        &self.dual_weights
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn projections(&self) -> &ProjectionSet {
        &self.proj
    }

    pub fn to_spec(&self) -> NetworkSpec {
        let ones = |v: &[f64]| v.iter().all(|&x| x == 1.0);
        NetworkSpec {
            graph: self.graph.clone(),
            coupling: self.coupling.clone(),
            bank: self.bank.clone(),
            dual_weights: (!ones(&self.dual_weights)).then(|| self.dual_weights.clone()),
            kappa: (!ones(&self.kappa)).then(|| self.kappa.clone()),
        }
    }
}
