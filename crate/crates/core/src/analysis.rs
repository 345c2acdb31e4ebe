//! Equilibria of the projected dynamics, their linearizations and stability
//! verdicts, the Lyapunov function `U` and its time derivative.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::angle::{circle_distance, wrap};
use crate::dynamics::{phase_error, vector_field, NetState, SystemKind};
use crate::error::{Error, Result};
use crate::network::OscNetwork;
use crate::report::ValidationReport;

/// Real-part threshold separating Stable / Marginal / Unstable.
pub const STABILITY_EPS: f64 = 1e-9;
pub const NEWTON_MAX_ITER: usize = 50;
pub const NEWTON_TOL: f64 = 1e-12;
pub const IN_PHASE_TOL: f64 = 1e-8;
pub const DEDUP_TOL: f64 = 1e-6;

/// Full phase vector `R mu` (vertex 1 pinned at zero).
pub fn lift(mu: &[f64]) -> Vec<f64> {
    std::iter::once(0.0).chain(mu.iter().copied()).collect()
}

/// `L(mu) = B A F'(B^T R mu) B^T` and `L_flat = R^T L R`.
pub fn laplacian(net: &OscNetwork, mu: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = net.n();
    let phi = lift(mu);
    let f = net.coupling();
    let mut l = DMatrix::zeros(n, n);
    for (e, &a) in net.graph().edges().iter().zip(net.graph().weights()) {
        let w = a * f.derivative(phi[e.tail] - phi[e.head]);
        l[(e.tail, e.tail)] += w;
        l[(e.head, e.head)] += w;
        l[(e.tail, e.head)] -= w;
        l[(e.head, e.tail)] -= w;
    }
    let flat = l.view((1, 1), (n - 1, n - 1)).into_owned();
    (l, flat)
}

/// `L_eta = B H(gamma) B^T` reduced by `R`.
pub fn laplacian_eta_flat(net: &OscNetwork, gamma: &[f64]) -> DMatrix<f64> {
    let n = net.n();
    let bank = net.bank();
    let mut l = DMatrix::zeros(n, n);
    for (k, e) in net.graph().edges().iter().enumerate() {
        let u = bank.zeta().eval(gamma[e.tail]);
        let w = net.dual_weights()[k] * u / bank.oscillators()[e.tail].eval(u);
        l[(e.tail, e.tail)] += w;
        l[(e.head, e.head)] += w;
        l[(e.tail, e.head)] -= w;
        l[(e.head, e.tail)] -= w;
    }
    l.view((1, 1), (n - 1, n - 1)).into_owned()
}

/// `P(mu) = R^T B A F(B^T R mu)`; zero exactly on the reduced equilibrium set.
pub fn p_residual(net: &OscNetwork, mu: &[f64]) -> DVector<f64> {
    let e = phase_error(net, &lift(mu));
    DVector::from_iterator(mu.len(), e[1..].iter().map(|x| -x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    /// Wrapped to `(-pi, pi]`.
    pub mu: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// 2-norm condition number of `L_flat(mu)`.
    pub lflat_condition: f64,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Damped Newton iteration on `P(mu) = 0` with Jacobian `L_flat(mu)`.
pub fn find_equilibrium(net: &OscNetwork, mu0: &[f64]) -> Result<Equilibrium> {
    if mu0.len() + 1 != net.n() {
        return Err(Error::DimensionMismatch { expected: net.n() - 1, got: mu0.len() });
    }
    let mut mu = DVector::from_column_slice(mu0);
    let mut p = p_residual(net, mu.as_slice());
    let mut res = inf_norm(&p);
    for iteration in 0..NEWTON_MAX_ITER {
        if res < NEWTON_TOL {
            let wrapped: Vec<f64> = mu.iter().map(|&x| wrap(x)).collect();
            let (_, lf) = laplacian(net, &wrapped);
            return Ok(Equilibrium { residual: inf_norm(&p_residual(net, &wrapped)), mu: wrapped, iterations: iteration, lflat_condition: condition_number(&lf) });
        }
        let (_, lf) = laplacian(net, mu.as_slice());
        let step = lf.lu().solve(&p).ok_or(Error::SingularJacobian { iteration })?;
        let mut t = 1.0;
        loop {
            let trial = &mu - &step * t;
            let pt = p_residual(net, trial.as_slice());
            let rt = inf_norm(&pt);
            if rt < res || t < 1e-6 {
                mu = trial;
                p = pt;
                res = rt;
                break;
            }
            t *= 0.5;
        }
    }
    if res < NEWTON_TOL {
        let wrapped: Vec<f64> = mu.iter().map(|&x| wrap(x)).collect();
        let (_, lf) = laplacian(net, &wrapped);
        return Ok(Equilibrium { residual: res, mu: wrapped, iterations: NEWTON_MAX_ITER, lflat_condition: condition_number(&lf) });
    }
    Err(Error::NewtonDiverged { iterations: NEWTON_MAX_ITER, residual: res })
}

/// Largest componentwise circle distance.
pub fn reduced_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| circle_distance(*x, *y)).fold(0.0, f64::max)
}

/// Twisted states `phi_i = 2 pi k (i - 1) / n` for `k = 1..n-1`, as reduced phases.
pub fn twisted_seeds(n: usize) -> Vec<Vec<f64>> {
    (1..n).map(|k| (1..n).map(|i| wrap(TAU * (k * i) as f64 / n as f64)).collect()).collect()
}

/// Newton from `mu = 0`, the twisted states and `random` seeded points;
/// converged roots are deduplicated by wrapped distance.
pub fn search_equilibria(net: &OscNetwork, random: usize, seed: u64) -> Vec<Equilibrium> {
    let n = net.n();
    let mut seeds = vec![vec![0.0; n - 1]];
    seeds.extend(twisted_seeds(n));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new(-PI, PI);
    for _ in 0..random {
        seeds.push((0..n - 1).map(|_| dist.sample(&mut rng)).collect());
    }
    let mut found: Vec<Equilibrium> = Vec::new();
    for s in seeds {
        if let Ok(eq) = find_equilibrium(net, &s) {
            if !found.iter().any(|f| reduced_distance(&f.mu, &eq.mu) < DEDUP_TOL) {
                found.push(eq);
            }
        }
    }
    found
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

/// Eigenvalues of a real square matrix as `(re, im)` pairs.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    let schur = Schur::try_new(m.clone(), 1e-15, 100_000).ok_or(Error::EigenFailure)?;
    Ok(schur.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect())
}

pub fn verdict_from(eigs: &[(f64, f64)]) -> Verdict {
    if eigs.iter().any(|e| e.0 > STABILITY_EPS) {
        Verdict::Unstable
    } else if eigs.iter().all(|e| e.0 < -STABILITY_EPS) {
        Verdict::Stable
    } else {
        Verdict::Marginal
    }
}

pub fn classify(lambda: &DMatrix<f64>) -> Result<Verdict> {
    Ok(verdict_from(&eigenvalues(lambda)?))
}

/// Counts `(positive, zero, negative)` eigenvalues of a symmetric matrix, or
/// real parts of eigenvalues otherwise; zero band `1e-9`.
pub fn inertia_count(m: &DMatrix<f64>) -> Result<(usize, usize, usize)> {
    let symmetric = (m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0);
    let re: Vec<f64> = if symmetric {
        SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect()
    } else {
        eigenvalues(m)?.into_iter().map(|e| e.0).collect()
    };
    let pos = re.iter().filter(|&&x| x > STABILITY_EPS).count();
    let neg = re.iter().filter(|&&x| x < -STABILITY_EPS).count();
    Ok((pos, re.len() - pos - neg, neg))
}

/// `[[-X L, Z], [-Y L, 0]]`.
pub fn pi_block(x: &DMatrix<f64>, y: &DMatrix<f64>, z: &DMatrix<f64>, l: &DMatrix<f64>) -> DMatrix<f64> {
    let p = l.nrows();
    let mut m = DMatrix::zeros(2 * p, 2 * p);
    m.view_mut((0, 0), (p, p)).copy_from(&(-(x * l)));
    m.view_mut((0, p), (p, p)).copy_from(z);
    m.view_mut((p, 0), (p, p)).copy_from(&(-(y * l)));
    m
}

/// `[[0, Z], [-Y L1, -Y L2 Z]]`.
pub fn dual_block(y: &DMatrix<f64>, z: &DMatrix<f64>, l1: &DMatrix<f64>, l2: &DMatrix<f64>) -> DMatrix<f64> {
    let p = l1.nrows();
    let mut m = DMatrix::zeros(2 * p, 2 * p);
    m.view_mut((0, p), (p, p)).copy_from(z);
    m.view_mut((p, 0), (p, p)).copy_from(&(-(y * l1)));
    m.view_mut((p, p), (p, p)).copy_from(&(-(y * l2 * z)));
    m
}

#[derive(Debug, Clone)]
pub struct Linearization {
    pub lambda: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub lflat: DMatrix<f64>,
    /// Present for the dual controller.
    pub lflat_eta: Option<DMatrix<f64>>,
    pub hypotheses: ValidationReport,
}

fn min_sym_eig(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

/// Jacobian of the projected dynamics at `(mu*, 0)` on the leaf `q^T gamma = r`.
pub fn linearize(net: &OscNetwork, kind: SystemKind, mu: &[f64], r: f64) -> Result<Linearization> {
    if kind == SystemKind::Kuramoto {
        return Err(Error::InvalidParameter("linearization is defined for the pi and dual controllers".into()));
    }
    crate::dynamics::check_system(net, kind)?;
    let residual = inf_norm(&p_residual(net, mu));
    if residual > 1e-9 {
        return Err(Error::NotAnEquilibrium { residual });
    }
    let bank = net.bank();
    let pr = net.projections();
    let alpha = bank.alpha(r)?;
    let sp = DMatrix::from_diagonal(&DVector::from_iterator(net.n(), (0..net.n()).map(|i| bank.sigma_prime(i, alpha[i]))));
    let kappa = DMatrix::from_diagonal(&DVector::from_column_slice(net.kappa()));
    let st = pr.s.transpose();
    let x = &st * &sp * &kappa * &pr.s;
    let z = &st * &sp * &pr.q_perp;
    let y = pr.y.clone();
    let (_, lflat) = laplacian(net, mu);

    let mut hyp = ValidationReport::new(format!("{kind:?} linearization hypotheses"));
    let (lambda, lflat_eta) = match kind {
        SystemKind::Pi => {
            let mx = min_sym_eig(&x);
            hyp.push("x_plus_xt_positive", mx > 0.0, format!("min eig of sym(X) = {mx:e}"));
            (pi_block(&x, &y, &z, &lflat), None)
        }
        _ => {
            let le = laplacian_eta_flat(net, &alpha);
            let me = min_sym_eig(&le);
            hyp.push("lflat_eta_positive", me > 0.0, format!("min eig of L_flat_eta = {me:e}"));
            (dual_block(&y, &z, &lflat, &le), Some(le))
        }
    };
    let ya = asymmetry(&y);
    let my = min_sym_eig(&y);
    hyp.push("y_symmetric_positive", ya < 1e-12 && my > 0.0, format!("asymmetry {ya:e}, min eig {my:e}"));
    match y.clone().try_inverse() {
        Some(yi) => {
            let w = yi * &z;
            let wa = asymmetry(&w);
            let mw = min_sym_eig(&w);
            hyp.push("y_inv_z_symmetric_positive", wa < 1e-10 && mw > 0.0, format!("asymmetry {wa:e}, min eig {mw:e}"));
        }
        None => hyp.push("y_inv_z_symmetric_positive", false, "Y is singular"),
    }
    Ok(Linearization { lambda, x, y, z, lflat, lflat_eta, hypotheses: hyp })
}

/// Field of the projected system in `(w1, w2)` on the leaf `q^T gamma = r`,
/// with `w1 = S^T phi` and `w2 = Q^T (gamma - alpha_r)`.
pub fn projected_field(net: &OscNetwork, kind: SystemKind, r: f64, w1: &[f64], w2: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
    let pr = net.projections();
    let alpha = DVector::from_vec(net.bank().alpha(r)?);
    let gamma = alpha + &pr.q_perp * DVector::from_column_slice(w2);
    let x = NetState::new(lift(w1), gamma.iter().copied().collect());
    let d = vector_field(net, kind, &x);
    let dw1 = pr.s.transpose() * DVector::from_vec(d.phi);
    let dw2 = pr.q_perp.transpose() * DVector::from_vec(d.gamma);
    Ok((dw1, dw2))
}

/// Central-difference Jacobian of [`projected_field`] at `(mu, 0)`.
pub fn projected_jacobian_fd(net: &OscNetwork, kind: SystemKind, mu: &[f64], r: f64, h: f64) -> Result<DMatrix<f64>> {
    let p = mu.len();
    let mut jac = DMatrix::zeros(2 * p, 2 * p);
    let base2 = vec![0.0; p];
    for col in 0..2 * p {
        let mut w1p = mu.to_vec();
        let mut w1m = mu.to_vec();
        let mut w2p = base2.clone();
        let mut w2m = base2.clone();
        if col < p {
            w1p[col] += h;
            w1m[col] -= h;
        } else {
            w2p[col - p] += h;
            w2m[col - p] -= h;
        }
        let (a1, a2) = projected_field(net, kind, r, &w1p, &w2p)?;
        let (b1, b2) = projected_field(net, kind, r, &w1m, &w2m)?;
        for row in 0..p {
            jac[(row, col)] = (a1[row] - b1[row]) / (2.0 * h);
            jac[(row + p, col)] = (a2[row] - b2[row]) / (2.0 * h);
        }
    }
    Ok(jac)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub kind: SystemKind,
    pub mu: Vec<f64>,
    pub r: f64,
    pub residual: f64,
    pub lambda: Vec<Vec<f64>>,
    pub eigenvalues: Vec<[f64; 2]>,
    pub verdict: Verdict,
    pub in_phase: bool,
    pub lflat_eigenvalues: Vec<f64>,
    pub lflat_invertible: bool,
    pub lflat_condition: f64,
    pub hypotheses: ValidationReport,
}

/// Linearizes at `mu` and bundles the spectrum and verdict.
pub fn equilibrium_report(net: &OscNetwork, kind: SystemKind, mu: &[f64], r: f64) -> Result<EquilibriumReport> {
    let lin = linearize(net, kind, mu, r)?;
    let eigs = eigenvalues(&lin.lambda)?;
    let mut lf_eigs: Vec<f64> = SymmetricEigen::new(lin.lflat.clone()).eigenvalues.iter().copied().collect();
    lf_eigs.sort_by(f64::total_cmp);
    let cond = condition_number(&lin.lflat);
    Ok(EquilibriumReport {
        kind,
        mu: mu.iter().map(|&x| wrap(x)).collect(),
        r,
        residual: inf_norm(&p_residual(net, mu)),
        lambda: lin.lambda.row_iter().map(|row| row.iter().copied().collect()).collect(),
        eigenvalues: eigs.iter().map(|&(re, im)| [re, im]).collect(),
        verdict: verdict_from(&eigs),
        in_phase: mu.iter().all(|&x| wrap(x).abs() < IN_PHASE_TOL),
        lflat_eigenvalues: lf_eigs.clone(),
        lflat_invertible: lf_eigs.iter().all(|x| x.abs() > STABILITY_EPS) && cond < 1e12,
        lflat_condition: cond,
        hypotheses: lin.hypotheses,
    })
}

/// `U = sum_k a_k Psi(theta_k) + W(gamma)`.
pub fn lyapunov_u(net: &OscNetwork, x: &NetState) -> Result<f64> {
    let f = net.coupling();
    let v: f64 = net.graph().edges().iter().zip(net.graph().weights()).map(|(e, &a)| a * f.potential(x.phi[e.tail] - x.phi[e.head])).sum();
    Ok(v + net.bank().w_potential(&x.gamma)?)
}

/// Analytic `dU/dt` along the closed-loop flow.
pub fn lyapunov_udot(net: &OscNetwork, kind: SystemKind, x: &NetState) -> Result<f64> {
    let bank = net.bank();
    let e = phase_error(net, &x.phi);
    match kind {
        SystemKind::Pi => Ok(-(0..net.n())
            .map(|i| e[i] * (bank.sigma(i, net.kappa()[i] * e[i] + x.gamma[i]) - bank.sigma(i, x.gamma[i])))
            .sum::<f64>()),
        SystemKind::Dual => {
            let sigma: Vec<f64> = (0..net.n()).map(|i| bank.sigma(i, x.gamma[i])).collect();
            let eta = dual_eta(net, &x.gamma);
            Ok(-net.graph().edges().iter().zip(&eta).map(|(ed, h)| h * (sigma[ed.tail] - sigma[ed.head]).powi(2)).sum::<f64>())
        }
        SystemKind::Kuramoto => {
            let d = vector_field(net, kind, x);
            Ok(-e.iter().zip(&d.phi).map(|(a, b)| a * b).sum::<f64>())
        }
    }
}

/// Edge weights `eta_k(gamma)` of the frequency-mismatch comparator.
pub fn dual_eta(net: &OscNetwork, gamma: &[f64]) -> Vec<f64> {
    let bank = net.bank();
    net.graph()
        .edges()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let u = bank.zeta().eval(gamma[e.tail]);
            net.dual_weights()[k] * u / bank.oscillators()[e.tail].eval(u)
        })
        .collect()
}

/// Explanation for a trial that did not synchronize: the equilibrium the
/// run approached and its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub start_mu: Vec<f64>,
    pub report: Option<EquilibriumReport>,
    pub newton_error: Option<String>,
}

impl Diagnosis {
    /// True when the run was heading to an equilibrium certified unstable.
    pub fn explained(&self) -> bool {
        matches!(&self.report, Some(r) if r.verdict == Verdict::Unstable)
    }
}

/// Runs Newton from the reduced phase of `x` and classifies the root on the
/// leaf of `x`.
pub fn diagnose(net: &OscNetwork, kind: SystemKind, x: &NetState) -> Diagnosis {
    let mu: Vec<f64> = x.phi[1..].iter().map(|p| wrap(p - x.phi[0])).collect();
    let r = net.bank().foliation_coordinate(&x.gamma);
    match find_equilibrium(net, &mu).and_then(|eq| equilibrium_report(net, kind, &eq.mu, r)) {
        Ok(report) => Diagnosis { start_mu: mu, report: Some(report), newton_error: None },
        Err(e) => Diagnosis { start_mu: mu, report: None, newton_error: Some(e.to_string()) },
    }
}
