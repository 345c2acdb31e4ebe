#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sync_mesh_core::analysis::{diagnose, Diagnosis};
use sync_mesh_core::dynamics::{integrate, sync_report, EarlyStop, SyncThresholds};
use sync_mesh_core::topo::random_weights;
use sync_mesh_core::*;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    Uniform::new(lo, hi).sample(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Path,
    Cycle,
    Complete,
    Random,
}

pub const TOPOLOGIES: [Topology; 4] = [Topology::Path, Topology::Cycle, Topology::Complete, Topology::Random];
pub const SIZES: [usize; 3] = [3, 5, 8];

pub fn graph(topo: Topology, n: usize, seed: u64) -> Graph {
    let ones = |m: usize| vec![1.0; m];
    let g = match topo {
        Topology::Path => Graph::path(n, &ones(n - 1)),
        Topology::Cycle => Graph::cycle(n, &ones(n)),
        Topology::Complete => Graph::complete(n, &ones(n * (n - 1) / 2)),
        Topology::Random => {
            let pairs = Graph::random_connected_pairs(n, 0.4, seed).unwrap();
            Graph::new(n, &pairs, &ones(pairs.len()))
        }
    }
    .unwrap();
    g.with_weights(&random_weights(g.m(), seed ^ 0x5eed, (0.5, 2.0)).unwrap()).unwrap()
}

/// Heterogeneous saturating oscillators with overlapping images inside
/// `(0, 10)`. The dual variant squeezes its input onto `(0.5, 4)` and
/// centres the oscillators there, so every image and input is positive.
pub fn bank(kind: SystemKind, n: usize, r: &mut ChaCha8Rng) -> OscBank {
    let dual = kind == SystemKind::Dual;
    let oscillators = (0..n)
        .map(|_| FreqFn::Saturating {
            lo: uniform(r, 0.5, 1.5),
            hi: uniform(r, 3.5, 4.5),
            u0: if dual { uniform(r, 1.75, 2.75) } else { uniform(r, -0.5, 0.5) },
            s: uniform(r, 0.8, 1.5),
        })
        .collect();
    let gains = (0..n).map(|_| uniform(r, 0.5, 2.0)).collect();
    let zeta = if dual { ScalingFn::Logistic { lo: 0.5, hi: 4.0, center: 0.0, slope: 2.0 } } else { ScalingFn::Identity };
    OscBank::new(oscillators, zeta, Interval::new(0.0, 10.0), gains).unwrap()
}

pub fn sweep_seed(topo: Topology, n: usize) -> u64 {
    1000 * (topo as u64 + 1) + n as u64
}

pub fn sweep_network(kind: SystemKind, topo: Topology, n: usize) -> OscNetwork {
    let seed = sweep_seed(topo, n);
    let mut r = rng(seed);
    let b = bank(kind, n, &mut r);
    OscNetwork::new(graph(topo, n, seed), CouplingFn::tanlock(PI / (n as f64 - 1.0)).unwrap(), b).unwrap()
}

pub fn random_state(n: usize, r: &mut ChaCha8Rng) -> NetState {
    NetState::new((0..n).map(|_| uniform(r, 0.0, TAU)).collect(), (0..n).map(|_| uniform(r, -2.0, 2.0)).collect())
}

pub fn sweep_options() -> IntegrateOptions {
    IntegrateOptions::new(0.01, 1500.0, 10).with_early_stop(EarlyStop::default())
}

#[derive(Debug, Default)]
pub struct SweepOutcome {
    pub trials: usize,
    pub successes: usize,
    pub failures: Vec<(SyncReport, Diagnosis)>,
    pub errors: Vec<String>,
    pub max_u_increase: f64,
    pub max_q_drift: f64,
    pub violations: usize,
    pub worst_dphi: f64,
    pub worst_spread: f64,
}

impl SweepOutcome {
    pub fn unexplained(&self) -> usize {
        self.failures.iter().filter(|(_, d)| !d.explained()).count() + self.errors.len()
    }
}

/// Seeded initial-condition sweep on one network.
pub fn run_sweep(kind: SystemKind, topo: Topology, n: usize, trials: usize) -> SweepOutcome {
    let net = sweep_network(kind, topo, n);
    let mut r = rng(sweep_seed(topo, n) ^ 0xabcdef);
    let thr = SyncThresholds::default();
    let opts = sweep_options();
    let mut out = SweepOutcome { trials, max_u_increase: f64::NEG_INFINITY, ..Default::default() };
    for _ in 0..trials {
        let x0 = random_state(n, &mut r);
        let traj = match integrate(&net, kind, &x0, &opts) {
            Ok(t) => t,
            Err(e) => {
                out.errors.push(e.to_string());
                continue;
            }
        };
        let rep = sync_report(&traj, net.bank());
        out.max_u_increase = out.max_u_increase.max(rep.max_u_increase.unwrap_or(0.0));
        out.max_q_drift = out.max_q_drift.max(rep.q_gamma_drift);
        out.violations += rep.constraint_violations;
        out.worst_dphi = out.worst_dphi.max(rep.final_dphi);
        out.worst_spread = out.worst_spread.max(rep.final_frequency_spread);
        if rep.verdict(&thr, net.bank(), &x0.gamma).success() {
            out.successes += 1;
        } else {
            let d = diagnose(&net, kind, &traj.final_state().unwrap());
            out.failures.push((rep, d));
        }
    }
    out
}

/// Two affine oscillators `1 + u`, `2 + u` on one unit edge.
pub fn affine_pair(coupling: CouplingFn) -> OscNetwork {
    let bank = OscBank::new(
        vec![FreqFn::Affine { omega: 1.0, k: 1.0 }, FreqFn::Affine { omega: 2.0, k: 1.0 }],
        ScalingFn::Identity,
        Interval::REAL_LINE,
        vec![1.0, 1.0],
    )
    .unwrap();
    OscNetwork::new(Graph::path(2, &[1.0]).unwrap(), coupling, bank).unwrap()
}

/// Heterogeneous affine oscillators `omega_i + u` with unit gains.
pub fn affine_bank(n: usize, r: &mut ChaCha8Rng) -> OscBank {
    let osc = (0..n).map(|_| FreqFn::Affine { omega: uniform(r, 0.5, 1.5), k: 1.0 }).collect();
    OscBank::new(osc, ScalingFn::Identity, Interval::REAL_LINE, vec![1.0; n]).unwrap()
}

// Random matrices for the block-matrix stability oracles. Spectra are kept
// away from zero so no verdict falls in the marginal band.

pub fn orthogonal(p: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(p, p, |_, _| uniform(r, -1.0, 1.0));
    m.qr().q()
}

pub fn symmetric_with(eigs: &[f64], r: &mut ChaCha8Rng) -> DMatrix<f64> {
    let q = orthogonal(eigs.len(), r);
    let m = &q * DMatrix::from_diagonal(&DVector::from_column_slice(eigs)) * q.transpose();
    (&m + m.transpose()) * 0.5
}

pub fn spd(p: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    let eigs: Vec<f64> = (0..p).map(|_| uniform(r, 0.3, 2.0)).collect();
    symmetric_with(&eigs, r)
}

/// Symmetric with eigenvalue magnitudes in `[0.2, 2]`; `negatives` of them negative.
pub fn symmetric_signed(p: usize, negatives: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    let eigs: Vec<f64> = (0..p).map(|i| uniform(r, 0.2, 2.0) * if i < negatives { -1.0 } else { 1.0 }).collect();
    symmetric_with(&eigs, r)
}

pub struct PiInstance {
    pub l: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub l_negatives: usize,
}

/// `L` symmetric, `X + X^T > 0`, `Y` symmetric invertible (any signature),
/// `Y^{-1} Z` symmetric positive definite.
pub fn pi_instance(r: &mut ChaCha8Rng) -> PiInstance {
    let p = r.gen_range(1..=6);
    let l_negatives = if r.gen_bool(0.5) { 0 } else { r.gen_range(1..=p) };
    let l = symmetric_signed(p, l_negatives, r);
    let skew = {
        let a = DMatrix::from_fn(p, p, |_, _| uniform(r, -1.0, 1.0));
        &a - a.transpose()
    };
    let x = spd(p, r) + skew;
    let y = symmetric_signed(p, r.gen_range(0..=p), r);
    let z = &y * spd(p, r);
    PiInstance { l, x, y, z, l_negatives }
}

pub struct DualInstance {
    pub l1: DMatrix<f64>,
    pub l2: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub l1_negatives: usize,
}

pub fn dual_instance(r: &mut ChaCha8Rng) -> DualInstance {
    let p = r.gen_range(1..=6);
    let l1_negatives = if r.gen_bool(0.5) { 0 } else { r.gen_range(1..=p) };
    let l1 = symmetric_signed(p, l1_negatives, r);
    let l2 = spd(p, r);
    let y = symmetric_signed(p, r.gen_range(0..=p), r);
    let z = &y * spd(p, r);
    DualInstance { l1, l2, y, z, l1_negatives }
}

/// Certificate `H = diag(-L1^{-1}, -Z^{-1} Y)`.
pub fn dual_certificate(d: &DualInstance) -> DMatrix<f64> {
    let p = d.l1.nrows();
    let mut h = DMatrix::zeros(2 * p, 2 * p);
    h.view_mut((0, 0), (p, p)).copy_from(&(-d.l1.clone().try_inverse().unwrap()));
    let zy = d.z.clone().try_inverse().unwrap() * &d.y;
    h.view_mut((p, p), (p, p)).copy_from(&(-(&zy + zy.transpose()) * 0.5));
    h
}
