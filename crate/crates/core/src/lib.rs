//! Simulation and analysis of networks of coupled heterogeneous oscillators
//! under two distributed synchronization controllers.

pub mod analysis;
pub mod angle;
pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod network;
pub mod quadrature;
pub mod report;
pub mod topo;
pub mod vco;

pub use analysis::{EquilibriumReport, Verdict};
pub use coupling::{CouplingFn, CouplingKind};
pub use dynamics::{IntegrateOptions, NetState, SyncReport, SystemKind, Trajectory};
pub use error::{Error, Result};
pub use network::OscNetwork;
pub use report::ValidationReport;
pub use topo::Graph;
pub use vco::{FreqFn, Interval, OscBank, ScalingFn};
