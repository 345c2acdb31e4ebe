//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p sync-mesh-core --test acceptance`.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;

use common::*;
use sync_mesh_core::analysis::{
    classify, dual_block, eigenvalues, equilibrium_report, find_equilibrium, inertia_count, laplacian, linearize,
    lyapunov_u, lyapunov_udot, p_residual, pi_block, projected_jacobian_fd, twisted_seeds, Verdict,
};
use sync_mesh_core::dynamics::{integrate, sync_report, vector_field};
use sync_mesh_core::*;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

// Sweeps feed criteria 2 through 6, so they run once and are shared.
struct Sweeps {
    pi: Vec<(Topology, usize, SweepOutcome)>,
    dual: Vec<(Topology, usize, SweepOutcome)>,
    c1_u_increase: f64,
    c1_drift: f64,
}

fn run_sweeps(kind: SystemKind) -> Vec<(Topology, usize, SweepOutcome)> {
    let mut out = Vec::new();
    for topo in TOPOLOGIES {
        for n in SIZES {
            out.push((topo, n, run_sweep(kind, topo, n, 100)));
        }
    }
    out
}

fn criterion_1(s: &mut Sweeps) -> Outcome {
    let net = affine_pair(CouplingFn::tanlock(0.5).unwrap());
    let predicted = net.bank().predicted_frequency(&[0.0, 0.0]).unwrap();
    let x0 = NetState::new(vec![0.0, 1.0], vec![0.0, 0.0]);
    let traj = match integrate(&net, SystemKind::Pi, &x0, &IntegrateOptions::new(1e-3, 200.0, 100)) {
        Ok(t) => t,
        Err(e) => return outcome(false, e.to_string()),
    };
    let rep = sync_report(&traj, net.bank());
    s.c1_u_increase = rep.max_u_increase.unwrap();
    s.c1_drift = rep.q_gamma_drift;
    let freq = traj.freq.last().unwrap();
    let err = freq.iter().map(|f| (f - 1.5).abs()).fold(0.0, f64::max);
    outcome(
        (predicted - 1.5).abs() < 1e-12 && err < 1e-6 && rep.final_dphi < 1e-6,
        format!("predicted {predicted:.12}, max |freq - 1.5| = {err:.2e}, final dphi = {:.2e}", rep.final_dphi),
    )
}

fn sweep_criterion(sweeps: &[(Topology, usize, SweepOutcome)]) -> Outcome {
    let mut ok = true;
    let mut worst = String::new();
    let mut min_success = usize::MAX;
    let mut unexplained = 0;
    let mut failures = 0;
    for (topo, n, o) in sweeps {
        failures += o.failures.len();
        unexplained += o.unexplained();
        if o.successes < 99 || o.unexplained() > 0 {
            ok = false;
        }
        if o.successes < min_success {
            min_success = o.successes;
            worst = format!("{topo:?} n={n}");
        }
    }
    outcome(
        ok,
        format!("{} networks x 100 trials; fewest successes {min_success}/100 ({worst}); {failures} failures, {unexplained} unexplained", sweeps.len()),
    )
}

fn criterion_4(s: &Sweeps) -> Outcome {
    let v: usize = s.pi.iter().map(|(_, _, o)| o.violations).sum();
    outcome(v == 0, format!("{v} recorded samples with a frequency outside I across {} PI trials", s.pi.len() * 100))
}

fn random_state_udot(kind: SystemKind, topo: Topology, n: usize, states: usize) -> (usize, usize, f64) {
    let net = sweep_network(kind, topo, n);
    let mut r = rng(77 + n as u64);
    let h = 1e-5;
    let mut positive = 0;
    let mut mismatched = 0;
    let mut worst = 0.0f64;
    for _ in 0..states {
        let mut x = random_state(n, &mut r);
        x.gamma.iter_mut().for_each(|g| *g *= 1.5);
        let an = lyapunov_udot(&net, kind, &x).unwrap();
        if an > 0.0 {
            positive += 1;
        }
        let d = vector_field(&net, kind, &x);
        let shifted = |sgn: f64| {
            let phi = x.phi.iter().zip(&d.phi).map(|(p, v)| p + sgn * h * v).collect();
            let gamma = x.gamma.iter().zip(&d.gamma).map(|(g, v)| g + sgn * h * v).collect();
            lyapunov_u(&net, &NetState::new(phi, gamma)).unwrap()
        };
        let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * h);
        let rel = (fd - an).abs() / an.abs().max(1e-3);
        worst = worst.max(rel);
        if rel > 1e-6 {
            mismatched += 1;
        }
    }
    (positive, mismatched, worst)
}

fn criterion_5(s: &Sweeps) -> Outcome {
    let traj_worst = s
        .pi
        .iter()
        .chain(&s.dual)
        .map(|(_, _, o)| o.max_u_increase)
        .fold(s.c1_u_increase, f64::max);
    let (p_pos, p_bad, p_rel) = random_state_udot(SystemKind::Pi, Topology::Cycle, 5, 10_000);
    let (d_pos, d_bad, d_rel) = random_state_udot(SystemKind::Dual, Topology::Random, 5, 10_000);
    outcome(
        traj_worst <= 1e-8 && p_pos + d_pos == 0 && p_bad + d_bad == 0,
        format!(
            "max U step increase {traj_worst:.2e}; PI: {p_pos} positive Udot, worst FD rel err {p_rel:.2e}; dual: {d_pos} positive, worst {d_rel:.2e}"
        ),
    )
}

fn criterion_6(s: &Sweeps) -> Outcome {
    let worst = s.pi.iter().chain(&s.dual).map(|(_, _, o)| o.max_q_drift).fold(s.c1_drift, f64::max);
    outcome(worst < 1e-8, format!("max |q^T gamma(t) - q^T gamma(0)| = {worst:.2e}"))
}

fn cycle6_affine(coupling: CouplingFn, weights: Option<u64>) -> OscNetwork {
    let mut r = rng(606);
    let bank = affine_bank(6, &mut r);
    let g = match weights {
        Some(seed) => Graph::cycle(6, &sync_mesh_core::topo::random_weights(6, seed, (0.9, 1.1)).unwrap()).unwrap(),
        None => Graph::cycle(6, &[1.0; 6]).unwrap(),
    };
    OscNetwork::new(g, coupling, bank).unwrap()
}

fn sorted_eigs(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let mut e = eigenvalues(m).unwrap();
    e.sort_by(|a, b| a.1.total_cmp(&b.1));
    e
}

fn criterion_7() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let pair = affine_pair(CouplingFn::tanlock(0.5).unwrap());
    let lin = linearize(&pair, SystemKind::Pi, &[0.0], 0.0).unwrap();
    let e = sorted_eigs(&lin.lambda);
    let eig_err = ((e[0].0 + 1.0).abs()).max((e[0].1 + 1.0).abs()).max((e[1].0 + 1.0).abs()).max((e[1].1 - 1.0).abs());
    let v0 = classify(&lin.lambda).unwrap();
    let out = find_equilibrium(&pair, &[3.0]).unwrap();
    let vpi = classify(&linearize(&pair, SystemKind::Pi, &out.mu, 0.0).unwrap().lambda).unwrap();
    ok &= eig_err < 1e-9 && v0 == Verdict::Stable && vpi == Verdict::Unstable && (out.mu[0].abs() - PI).abs() < 1e-10;
    notes.push(format!("pair: eig err {eig_err:.1e}, mu=0 {v0:?}, mu=pi {vpi:?}"));

    let net = cycle6_affine(CouplingFn::tanlock(PI / 5.0).unwrap(), Some(66));
    let splay = &twisted_seeds(6)[0];
    let eq = match find_equilibrium(&net, splay) {
        Ok(eq) => eq,
        Err(e) => return outcome(false, format!("Newton from splay seed: {e}")),
    };
    let rep = equilibrium_report(&net, SystemKind::Pi, &eq.mu, 0.0).unwrap();
    ok &= rep.verdict == Verdict::Unstable && !rep.in_phase;
    notes.push(format!("6-cycle splay |P| {:.0e} {:?}", rep.residual, rep.verdict));

    let mut r = rng(7);
    let alpha = net.bank().alpha(0.0).unwrap();
    let phi: Vec<f64> = sync_mesh_core::analysis::lift(&eq.mu).iter().map(|p| p + uniform(&mut r, -1e-3, 1e-3)).collect();
    let traj = integrate(&net, SystemKind::Pi, &NetState::new(phi, alpha), &IntegrateOptions::new(0.01, 1500.0, 10).without_u()).unwrap();
    let fin = *traj.dphi.last().unwrap();
    ok &= fin < 1e-4;
    notes.push(format!("escape run final dphi {fin:.1e}"));

    // dual counterpart on a positive bank
    let mut r = rng(61);
    let dual_net = OscNetwork::new(net.graph().clone(), net.coupling().clone(), bank(SystemKind::Dual, 6, &mut r)).unwrap();
    let d0 = equilibrium_report(&dual_net, SystemKind::Dual, &[0.0; 5], 0.3).unwrap().verdict;
    let ds = equilibrium_report(&dual_net, SystemKind::Dual, &eq.mu, 0.3).unwrap().verdict;
    ok &= d0 == Verdict::Stable && ds == Verdict::Unstable;
    notes.push(format!("dual: mu=0 {d0:?}, splay {ds:?}"));
    outcome(ok, notes.join("; "))
}

fn criterion_8() -> Outcome {
    let net = cycle6_affine(CouplingFn::sine(), None);
    let splay = &twisted_seeds(6)[0];
    let eq = match find_equilibrium(&net, splay) {
        Ok(eq) => eq,
        Err(e) => return outcome(false, format!("Newton from splay: {e}")),
    };
    let rep = equilibrium_report(&net, SystemKind::Pi, &eq.mu, 0.0).unwrap();
    let mut ok = rep.verdict == Verdict::Stable;
    let mut r = rng(8);
    let alpha = net.bank().alpha(0.0).unwrap();
    let (mut worst_dphi, mut worst_spread) = (0.0f64, 0.0f64);
    for _ in 0..5 {
        let phi: Vec<f64> = sync_mesh_core::analysis::lift(&eq.mu).iter().map(|p| p + uniform(&mut r, -1e-2, 1e-2)).collect();
        let gamma: Vec<f64> = alpha.iter().map(|g| g + uniform(&mut r, -1e-2, 1e-2)).collect();
        let traj = integrate(&net, SystemKind::Pi, &NetState::new(phi, gamma), &IntegrateOptions::new(0.01, 600.0, 50)).unwrap();
        let s = sync_report(&traj, net.bank());
        worst_dphi = worst_dphi.max((s.final_dphi - PI).abs());
        worst_spread = worst_spread.max(s.final_frequency_spread);
        ok &= s.max_u_increase.unwrap() <= 1e-8;
    }
    ok &= worst_dphi < 1e-3 && worst_spread < 1e-6;
    outcome(
        ok,
        format!("splay verdict {:?}; 5 nearby runs: max |dphi - pi| {worst_dphi:.1e}, max freq spread {worst_spread:.1e}", rep.verdict),
    )
}

fn criterion_9() -> Outcome {
    let mut r = rng(9);
    let mut pi_agree = 0;
    for _ in 0..1000 {
        let inst = pi_instance(&mut r);
        let lambda = pi_block(&inst.x, &inst.y, &inst.z, &inst.l);
        let expected = if inst.l_negatives > 0 { Verdict::Unstable } else { Verdict::Stable };
        if classify(&lambda).unwrap() == expected {
            pi_agree += 1;
        }
    }
    let mut dual_agree = 0;
    let mut identity_worst = 0.0f64;
    let mut psd_worst = 0.0f64;
    let mut inertia_agree = 0;
    for _ in 0..1000 {
        let inst = dual_instance(&mut r);
        let lambda = dual_block(&inst.y, &inst.z, &inst.l1, &inst.l2);
        let expected = if inst.l1_negatives > 0 { Verdict::Unstable } else { Verdict::Stable };
        if classify(&lambda).unwrap() == expected {
            dual_agree += 1;
        }
        let h = dual_certificate(&inst);
        let lhs = &lambda * &h + &h * lambda.transpose();
        let p = inst.l1.nrows();
        let mut rhs = DMatrix::zeros(2 * p, 2 * p);
        rhs.view_mut((p, p), (p, p)).copy_from(&(&inst.y * &inst.l2 * &inst.y * 2.0));
        identity_worst = identity_worst.max((&lhs - &rhs).amax());
        let sym = (&lhs + lhs.transpose()) * 0.5;
        let min = nalgebra::SymmetricEigen::new(sym).eigenvalues.min();
        psd_worst = psd_worst.min(min);
        let (lp, _, _) = inertia_count(&lambda).unwrap();
        let (hp, _, _) = inertia_count(&h).unwrap();
        if lp == hp && hp == inst.l1_negatives {
            inertia_agree += 1;
        }
    }
    outcome(
        pi_agree == 1000 && dual_agree == 1000 && identity_worst < 1e-10 && psd_worst > -1e-10 && inertia_agree == 1000,
        format!(
            "PI-block {pi_agree}/1000, dual-block {dual_agree}/1000, certificate identity err {identity_worst:.1e}, min eig {psd_worst:.1e}, inertia {inertia_agree}/1000"
        ),
    )
}

fn criterion_10() -> Outcome {
    let net = sweep_network(SystemKind::Pi, Topology::Cycle, 5);
    let mut r = rng(10);
    let h = 1e-6;
    let mut jac_worst = 0.0f64;
    for _ in 0..100 {
        let mu: Vec<f64> = (0..4).map(|_| uniform(&mut r, -PI, PI)).collect();
        let (_, lf) = laplacian(&net, &mu);
        for j in 0..4 {
            let mut a = mu.clone();
            let mut b = mu.clone();
            a[j] += h;
            b[j] -= h;
            let col = (p_residual(&net, &a) - p_residual(&net, &b)) / (2.0 * h);
            for i in 0..4 {
                jac_worst = jac_worst.max((col[i] - lf[(i, j)]).abs());
            }
        }
    }

    let mut lin_worst = 0.0f64;
    let mut mus = vec![vec![0.0; 4]];
    mus.extend(twisted_seeds(5).iter().filter_map(|s| find_equilibrium(&net, s).ok()).map(|e| e.mu));
    for kind in [SystemKind::Pi] {
        for mu in &mus {
            for rr in [-0.5, 0.0, 0.7] {
                let lin = linearize(&net, kind, mu, rr).unwrap();
                let fd = projected_jacobian_fd(&net, kind, mu, rr, 1e-6).unwrap();
                lin_worst = lin_worst.max((&lin.lambda - fd).amax());
            }
        }
    }

    // RK4 order on the two-vertex instance
    let pair = affine_pair(CouplingFn::tanlock(0.5).unwrap());
    let x0 = NetState::new(vec![0.0, 1.0], vec![0.0, 0.0]);
    let end = |dt: f64| {
        let t = integrate(&pair, SystemKind::Pi, &x0, &IntegrateOptions::new(dt, 10.0, 1_000_000).without_u()).unwrap();
        let s = t.final_state().unwrap();
        (s.phi, s.gamma)
    };
    let reference = end(1e-5);
    let err = |dt: f64| {
        let (p, g) = end(dt);
        p.iter().zip(&reference.0).chain(g.iter().zip(&reference.1)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let errs: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|&dt| err(dt)).collect();
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    let order_ok = ratios.iter().all(|q| (14.0..=18.0).contains(q));
    outcome(
        jac_worst < 1e-6 && lin_worst < 1e-5 && order_ok,
        format!(
            "L_flat vs FD {jac_worst:.1e}; PI linearization vs FD {lin_worst:.1e} over {} equilibria; RK4 error ratios {:.2}, {:.2}",
            mus.len(),
            ratios[0],
            ratios[1]
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut s = Sweeps { pi: Vec::new(), dual: Vec::new(), c1_u_increase: 0.0, c1_drift: 0.0 };
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1 closed-form synchronized frequency", criterion_1(&mut s)));
    s.pi = run_sweeps(SystemKind::Pi);
    results.push(("2 PI synchronization sweep", sweep_criterion(&s.pi)));
    s.dual = run_sweeps(SystemKind::Dual);
    results.push(("3 dual-controller sweep", sweep_criterion(&s.dual)));
    results.push(("4 constrained frequencies", criterion_4(&s)));
    results.push(("5 Lyapunov dissipation", criterion_5(&s)));
    results.push(("6 foliation conservation", criterion_6(&s)));
    results.push(("7 stability classification", criterion_7()));
    results.push(("8 sine coupling keeps the splay state", criterion_8()));
    results.push(("9 randomized block-matrix oracles", criterion_9()));
    results.push(("10 numerical hygiene", criterion_10()));

    let mut all = true;
    for (name, o) in &results {
        all &= o.passed;
        println!("[{}] criterion {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    for (kind, sweeps) in [("PI", &s.pi), ("dual", &s.dual)] {
        for (topo, n, o) in sweeps.iter() {
            for (rep, d) in &o.failures {
                println!(
                    "  {kind} {topo:?} n={n} failure: dphi {:.1e}, spread {:.1e}, equilibrium verdict {:?}",
                    rep.final_dphi,
                    rep.final_frequency_spread,
                    d.report.as_ref().map(|r| r.verdict)
                );
            }
        }
    }
    println!("acceptance finished in {:.1?}", start.elapsed());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
