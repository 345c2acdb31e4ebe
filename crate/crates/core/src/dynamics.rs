//! Closed-loop vector fields (PI controller, dual controller, Kuramoto
//! baseline), a fixed-step RK4 integrator on the universal cover of the torus
//! and trajectory metrics.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::analysis::lyapunov_u;
use crate::angle::circle_distance;
use crate::coupling::CouplingKind;
use crate::error::{Error, Result};
use crate::network::OscNetwork;
use crate::vco::{FreqFn, OscBank};

/// Phases (on the universal cover) and loop-filter states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetState {
    pub phi: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl NetState {
    pub fn new(phi: Vec<f64>, gamma: Vec<f64>) -> Self {
        NetState { phi, gamma }
    }

    pub fn n(&self) -> usize {
        self.phi.len()
    }

    fn check(&self, n: usize) -> Result<()> {
        for len in [self.phi.len(), self.gamma.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    /// Proportional-integral loop filter.
    Pi,
    /// Integrator loop filter driven by phase error plus frequency mismatch.
    Dual,
    /// Unity loop filter with sinusoidal coupling.
    Kuramoto,
}

/// Verifies the structural requirements of `kind` on `net`.
pub fn check_system(net: &OscNetwork, kind: SystemKind) -> Result<()> {
    match kind {
        SystemKind::Pi => Ok(()),
        SystemKind::Dual => {
            if net.bank().dual_positivity_holds() {
                Ok(())
            } else {
                let u = net.bank().domain();
                Err(Error::DualPositivityViolated(format!("input domain ({}, {}) or some oscillator image is not positive", u.lo, u.hi)))
            }
        }
        SystemKind::Kuramoto => {
            let affine = net.bank().oscillators().iter().all(|o| matches!(o, FreqFn::Affine { .. }));
            if affine && net.coupling().kind() == CouplingKind::Sine {
                Ok(())
            } else {
                Err(Error::KuramotoRequirements)
            }
        }
    }
}

/// `e(phi) = -B A F(B^T phi)`, written into `out`.
pub fn phase_error_into(net: &OscNetwork, phi: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    let f = net.coupling();
    for (e, &a) in net.graph().edges().iter().zip(net.graph().weights()) {
        let flow = a * f.eval(phi[e.tail] - phi[e.head]);
        out[e.tail] -= flow;
        out[e.head] += flow;
    }
}

/// Phase error `e_i = sum_k a_k f(phi_j - phi_i)` over the neighbours of `i`.
pub fn phase_error(net: &OscNetwork, phi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; net.n()];
    phase_error_into(net, phi, &mut out);
    out
}

/// `eta_k = d_k zeta(gamma_j) / chi_j(zeta(gamma_j))` with `j` the tail of edge `k`.
fn eta(net: &OscNetwork, k: usize, gamma: &[f64]) -> f64 {
    let bank = net.bank();
    let t = net.graph().edges()[k].tail;
    let u = bank.zeta().eval(gamma[t]);
    net.dual_weights()[k] * u / bank.oscillators()[t].eval(u)
}

/// `z = -B H(gamma) B^T Sigma(gamma)`, written into `out`.
fn z_error_into(net: &OscNetwork, gamma: &[f64], sigma: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for (k, e) in net.graph().edges().iter().enumerate() {
        let flow = eta(net, k, gamma) * (sigma[e.tail] - sigma[e.head]);
        out[e.tail] -= flow;
        out[e.head] += flow;
    }
}

fn check_positive_point(net: &OscNetwork, gamma: &[f64]) -> Result<()> {
    let bank = net.bank();
    for (i, &g) in gamma.iter().enumerate() {
        let u = bank.zeta().eval(g);
        let v = bank.oscillators()[i].eval(u);
        if !(u > 0.0 && v > 0.0) {
            return Err(Error::DualPositivityViolated(format!("vertex {}: zeta = {u}, chi = {v}", i + 1)));
        }
    }
    Ok(())
}

/// Frequency-mismatch error `z_i = sum_k eta_k (dphi_j - dphi_i)`.
pub fn z_error(net: &OscNetwork, gamma: &[f64]) -> Result<Vec<f64>> {
    check_positive_point(net, gamma)?;
    let sigma: Vec<f64> = (0..net.n()).map(|i| net.bank().sigma(i, gamma[i])).collect();
    let mut out = vec![0.0; net.n()];
    z_error_into(net, gamma, &sigma, &mut out);
    Ok(out)
}

/// The same error computed from the frequency ratios
/// `rho_ij = zeta_j chi_i / (zeta_i chi_j)` that a vertex can measure locally.
pub fn z_error_ratio(net: &OscNetwork, gamma: &[f64]) -> Result<Vec<f64>> {
    check_positive_point(net, gamma)?;
    let bank = net.bank();
    let zeta: Vec<f64> = gamma.iter().map(|&g| bank.zeta().eval(g)).collect();
    let chi: Vec<f64> = (0..net.n()).map(|i| bank.oscillators()[i].eval(zeta[i])).collect();
    let rho = |i: usize, j: usize| zeta[j] * chi[i] / (zeta[i] * chi[j]);
    let mut out = vec![0.0; net.n()];
    for (k, e) in net.graph().edges().iter().enumerate() {
        let d = net.dual_weights()[k];
        let (t, h) = (e.tail, e.head);
        // head side: neighbour t is the tail
        out[h] += d * (zeta[t] - rho(h, t) * zeta[h]);
        // tail side
        out[t] += d * (zeta[h] / rho(t, h) - zeta[t]);
    }
    Ok(out)
}

/// Scratch buffers for allocation-free field evaluation.
#[derive(Debug, Clone)]
pub struct Workspace {
    e: Vec<f64>,
    z: Vec<f64>,
    sigma: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        Workspace { e: vec![0.0; n], z: vec![0.0; n], sigma: vec![0.0; n] }
    }
}

/// Evaluates the closed-loop field at `(phi, gamma)`.
pub fn vector_field_into(
    net: &OscNetwork,
    kind: SystemKind,
    phi: &[f64],
    gamma: &[f64],
    dphi: &mut [f64],
    dgamma: &mut [f64],
    ws: &mut Workspace,
) {
    let bank = net.bank();
    let c = bank.gains();
    phase_error_into(net, phi, &mut ws.e);
    match kind {
        SystemKind::Pi => {
            let kappa = net.kappa();
            for i in 0..phi.len() {
                dphi[i] = bank.sigma(i, kappa[i] * ws.e[i] + gamma[i]);
                dgamma[i] = c[i] * ws.e[i];
            }
        }
        SystemKind::Dual => {
            for i in 0..phi.len() {
                ws.sigma[i] = bank.sigma(i, gamma[i]);
                dphi[i] = ws.sigma[i];
            }
            z_error_into(net, gamma, &ws.sigma, &mut ws.z);
            for i in 0..phi.len() {
                dgamma[i] = c[i] * (ws.e[i] + ws.z[i]);
            }
        }
        SystemKind::Kuramoto => {
            for i in 0..phi.len() {
                dphi[i] = bank.oscillators()[i].eval(ws.e[i]);
                dgamma[i] = 0.0;
            }
        }
    }
}

/// Allocating convenience wrapper around [`vector_field_into`].
pub fn vector_field(net: &OscNetwork, kind: SystemKind, x: &NetState) -> NetState {
    let n = x.n();
    let mut d = NetState::new(vec![0.0; n], vec![0.0; n]);
    vector_field_into(net, kind, &x.phi, &x.gamma, &mut d.phi, &mut d.gamma, &mut Workspace::new(n));
    d
}

/// Largest pairwise geodesic distance between phases, in `[0, pi]`.
pub fn phase_diameter(phi: &[f64]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..phi.len() {
        for j in i + 1..phi.len() {
            d = d.max(circle_distance(phi[i], phi[j]));
        }
    }
    d
}

/// Stop once the phases have collapsed: `dphi < dphi_tol` and
/// `max |e_i| < error_tol` on `samples` consecutive recorded samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub dphi_tol: f64,
    pub error_tol: f64,
    pub samples: usize,
}

impl Default for EarlyStop {
    fn default() -> Self {
        EarlyStop { dphi_tol: 1e-10, error_tol: 1e-12, samples: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    /// Record the Lyapunov function `U` at every sample.
    #[serde(default = "yes")]
    pub record_u: bool,
    #[serde(default)]
    pub early_stop: Option<EarlyStop>,
}

fn yes() -> bool {
    true
}

impl IntegrateOptions {
    pub fn new(dt: f64, t_end: f64, record_every: usize) -> Self {
        IntegrateOptions { dt, t_end, record_every, record_u: true, early_stop: None }
    }

    pub fn with_early_stop(mut self, rule: EarlyStop) -> Self {
        self.early_stop = Some(rule);
        self
    }

    pub fn without_u(mut self) -> Self {
        self.record_u = false;
        self
    }
}

/// Recorded samples. `phi` is on the universal cover; `freq` holds the
/// analytic `dphi/dt` at each sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub dphi: Vec<f64>,
    pub freq: Vec<Vec<f64>>,
    /// Empty when `U` recording was switched off.
    pub u: Vec<f64>,
    pub q_gamma: Vec<f64>,
    /// Time at which the early-stop rule fired, if it did.
    pub stopped_at: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn final_state(&self) -> Option<NetState> {
        Some(NetState::new(self.phi.last()?.clone(), self.gamma.last()?.clone()))
    }
}

struct Recorder<'a> {
    net: &'a OscNetwork,
    kind: SystemKind,
    record_u: bool,
    traj: Trajectory,
    ws: Workspace,
    dphi: Vec<f64>,
    dgamma: Vec<f64>,
}

impl Recorder<'_> {
    /// Records a sample; returns `max |e_i|` there.
    fn record(&mut self, t: f64, phi: &[f64], gamma: &[f64], offset: f64) -> Result<f64> {
        vector_field_into(self.net, self.kind, phi, gamma, &mut self.dphi, &mut self.dgamma, &mut self.ws);
        let e_norm = self.ws.e.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let lifted: Vec<f64> = phi.iter().map(|p| p + offset).collect();
        let state = NetState::new(phi.to_vec(), gamma.to_vec());
        if self.record_u {
            self.traj.u.push(lyapunov_u(self.net, &state)?);
        }
        self.traj.t.push(t);
        self.traj.dphi.push(phase_diameter(phi));
        self.traj.phi.push(lifted);
        self.traj.gamma.push(gamma.to_vec());
        self.traj.freq.push(self.dphi.clone());
        self.traj.q_gamma.push(self.net.bank().foliation_coordinate(gamma));
        Ok(e_norm)
    }
}

/// Classical RK4 with fixed step `dt` from `t = 0` to `t_end`.
///
/// Phases evolve as unwrapped reals. Whenever the first phase drifts past one
/// turn all phases are shifted by a whole number of turns, which leaves the
/// field unchanged and keeps phase differences at full precision; recorded
/// phases add the shift back.
pub fn integrate(net: &OscNetwork, kind: SystemKind, x0: &NetState, opts: &IntegrateOptions) -> Result<Trajectory> {
    let n = net.n();
    x0.check(n)?;
    check_system(net, kind)?;
    let IntegrateOptions { dt, t_end, record_every, .. } = *opts;
    if !(dt > 0.0 && dt.is_finite() && t_end >= dt && t_end.is_finite()) || record_every == 0 {
        return Err(Error::InvalidStep { dt, t_end });
    }
    let steps = (t_end / dt).round() as u64;

    let mut phi = x0.phi.clone();
    let mut gamma = x0.gamma.clone();
    let mut offset = 0.0;
    let recenter = |phi: &mut [f64], offset: &mut f64| {
        if phi[0].abs() > TAU {
            let shift = TAU * (phi[0] / TAU).round();
            phi.iter_mut().for_each(|p| *p -= shift);
            *offset += shift;
        }
    };
    recenter(&mut phi, &mut offset);

    let mut rec = Recorder {
        net,
        kind,
        record_u: opts.record_u,
        traj: Trajectory::default(),
        ws: Workspace::new(n),
        dphi: vec![0.0; n],
        dgamma: vec![0.0; n],
    };
    let mut calm = 0usize;
    let note_calm = |rec: &Recorder, e_norm: f64, calm: &mut usize| -> bool {
        match opts.early_stop {
            Some(rule) => {
                if *rec.traj.dphi.last().unwrap() < rule.dphi_tol && e_norm < rule.error_tol {
                    *calm += 1;
                } else {
                    *calm = 0;
                }
                *calm >= rule.samples
            }
            None => false,
        }
    };
    let e0 = rec.record(0.0, &phi, &gamma, offset)?;
    note_calm(&rec, e0, &mut calm);

    let mut ws = Workspace::new(n);
    let mut k = [(vec![0.0; n], vec![0.0; n]), (vec![0.0; n], vec![0.0; n]), (vec![0.0; n], vec![0.0; n]), (vec![0.0; n], vec![0.0; n])];
    let mut tp = vec![0.0; n];
    let mut tg = vec![0.0; n];

    for step in 1..=steps {
        {
            let [k1, k2, k3, k4] = &mut k;
            vector_field_into(net, kind, &phi, &gamma, &mut k1.0, &mut k1.1, &mut ws);
            for i in 0..n {
                tp[i] = phi[i] + 0.5 * dt * k1.0[i];
                tg[i] = gamma[i] + 0.5 * dt * k1.1[i];
            }
            vector_field_into(net, kind, &tp, &tg, &mut k2.0, &mut k2.1, &mut ws);
            for i in 0..n {
                tp[i] = phi[i] + 0.5 * dt * k2.0[i];
                tg[i] = gamma[i] + 0.5 * dt * k2.1[i];
            }
            vector_field_into(net, kind, &tp, &tg, &mut k3.0, &mut k3.1, &mut ws);
            for i in 0..n {
                tp[i] = phi[i] + dt * k3.0[i];
                tg[i] = gamma[i] + dt * k3.1[i];
            }
            vector_field_into(net, kind, &tp, &tg, &mut k4.0, &mut k4.1, &mut ws);
            for i in 0..n {
                phi[i] += dt / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
                gamma[i] += dt / 6.0 * (k1.1[i] + 2.0 * k2.1[i] + 2.0 * k3.1[i] + k4.1[i]);
            }
        }
        let t = step as f64 * dt;
        if !phi.iter().chain(&gamma).all(|x| x.is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        recenter(&mut phi, &mut offset);
        if step % record_every as u64 == 0 || step == steps {
            let e_norm = rec.record(t, &phi, &gamma, offset)?;
            if note_calm(&rec, e_norm, &mut calm) {
                rec.traj.stopped_at = Some(t);
                break;
            }
        }
    }
    Ok(rec.traj)
}

/// Run-level synchronization metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncReport {
    pub samples: usize,
    pub t_final: f64,
    pub stopped_early: bool,
    pub final_dphi: f64,
    /// `beta^{-1}(q^T gamma(0))`, when the common interval is nonempty.
    pub predicted_frequency: Option<f64>,
    /// `max_i |dphi_i/dt - predicted|` at the last sample; measured against
    /// the mean frequency when no prediction exists.
    pub final_frequency_spread: f64,
    pub final_mean_frequency: f64,
    /// Samples with some frequency outside the constraint interval.
    pub constraint_violations: usize,
    pub max_gamma_norm: f64,
    pub initial_gamma_norm: f64,
    pub q_gamma_drift: f64,
    /// Largest single-sample increase of `U` (negative when strictly decreasing).
    pub max_u_increase: Option<f64>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn sync_report(traj: &Trajectory, bank: &OscBank) -> SyncReport {
    let last = traj.len() - 1;
    let freq = &traj.freq[last];
    let mean = freq.iter().sum::<f64>() / freq.len() as f64;
    let predicted = bank.predicted_frequency(&traj.gamma[0]).ok();
    let reference = predicted.unwrap_or(mean);
    let ci = bank.constraint();
    let q0 = traj.q_gamma[0];
    SyncReport {
        samples: traj.len(),
        t_final: traj.t[last],
        stopped_early: traj.stopped_at.is_some(),
        final_dphi: traj.dphi[last],
        predicted_frequency: predicted,
        final_frequency_spread: freq.iter().fold(0.0f64, |m, f| m.max((f - reference).abs())),
        final_mean_frequency: mean,
        constraint_violations: traj.freq.iter().filter(|f| !f.iter().all(|&v| ci.contains(v))).count(),
        max_gamma_norm: traj.gamma.iter().map(|g| inf_norm(g)).fold(0.0, f64::max),
        initial_gamma_norm: inf_norm(&traj.gamma[0]),
        q_gamma_drift: traj.q_gamma.iter().fold(0.0f64, |m, q| m.max((q - q0).abs())),
        max_u_increase: traj.u.windows(2).map(|w| w[1] - w[0]).reduce(f64::max),
    }
}

/// Per-trial success thresholds for synchronization within the constraint
/// interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncThresholds {
    pub dphi: f64,
    pub frequency_spread: f64,
    pub max_constraint_violations: usize,
    /// `max ||gamma||_inf <= factor * max(||gamma(0)||_inf, ||alpha(r)||_inf, 1)`.
    pub gamma_envelope_factor: f64,
}

impl Default for SyncThresholds {
    fn default() -> Self {
        SyncThresholds { dphi: 1e-4, frequency_spread: 1e-6, max_constraint_violations: 0, gamma_envelope_factor: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncVerdict {
    pub phase_synchronized: bool,
    pub frequency_synchronized: bool,
    pub within_constraint: bool,
    pub bounded: bool,
}

impl SyncVerdict {
    pub fn success(&self) -> bool {
        self.phase_synchronized && self.frequency_synchronized && self.within_constraint && self.bounded
    }
}

impl SyncReport {
    pub fn verdict(&self, thr: &SyncThresholds, bank: &OscBank, gamma0: &[f64]) -> SyncVerdict {
        let alpha_norm = bank.alpha(bank.foliation_coordinate(gamma0)).map(|a| inf_norm(&a)).unwrap_or(0.0);
        let envelope = thr.gamma_envelope_factor * self.initial_gamma_norm.max(alpha_norm).max(1.0);
        SyncVerdict {
            phase_synchronized: self.final_dphi < thr.dphi,
            frequency_synchronized: self.final_frequency_spread < thr.frequency_spread,
            within_constraint: self.constraint_violations <= thr.max_constraint_violations,
            bounded: self.max_gamma_norm <= envelope,
        }
    }
}
