use std::f64::consts::TAU;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sync_mesh_core::analysis::{equilibrium_report, search_equilibria};
use sync_mesh_core::coupling::validate_coupling;
use sync_mesh_core::dynamics::{check_system, integrate, sync_report, SyncThresholds, SyncVerdict};
use sync_mesh_core::vco::validate_bank;
use sync_mesh_core::{EquilibriumReport, IntegrateOptions, NetState, OscNetwork, SyncReport, SystemKind, Trajectory, ValidationReport};

use crate::config::{ExperimentConfig, InitialConfig};
use crate::error::{io_err, CliError};

/// Coupling and bank checks for `cfg`. A failing bank always aborts; a
/// failing coupling aborts unless the config opts out.
pub fn validate(cfg: &ExperimentConfig) -> Result<(OscNetwork, Vec<ValidationReport>), CliError> {
    cfg.check_numbers()?;
    let net = cfg.build_network()?;
    let coupling = validate_coupling(net.coupling(), net.n());
    let bank = validate_bank(net.bank(), cfg.controller == SystemKind::Dual);
    let fatal = !bank.passed() || (!coupling.passed() && !cfg.allow_noncompliant_coupling);
    let reports = vec![coupling, bank];
    if fatal {
        return Err(CliError::ValidationFailed(reports));
    }
    check_system(&net, cfg.controller).map_err(|e| CliError::InvalidConfig(e.to_string()))?;
    Ok((net, reports))
}

/// Initial state of trial `k`. Random draws use stream `k` of the seed, so
/// trials are independent of how many run or in which order.
pub fn initial_state(cfg: &ExperimentConfig, trial: usize) -> NetState {
    let n = cfg.n();
    match &cfg.initial {
        InitialConfig::Explicit { phi, gamma } => NetState::new(phi.clone(), gamma.clone()),
        InitialConfig::Random { seed, gamma_range: [lo, hi] } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            rng.set_stream(trial as u64);
            let phase = Uniform::new(0.0, TAU);
            let filter = Uniform::new(*lo, *hi);
            let phi = (0..n).map(|_| phase.sample(&mut rng)).collect();
            let gamma = (0..n).map(|_| filter.sample(&mut rng)).collect();
            NetState::new(phi, gamma)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub success: bool,
    pub verdict: SyncVerdict,
    pub initial: NetState,
    pub report: SyncReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub success: bool,
    pub final_dphi: f64,
    pub final_mean_frequency: f64,
    pub final_frequency_spread: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub controller: SystemKind,
    pub n: usize,
    pub trials: usize,
    pub thresholds: SyncThresholds,
    pub successes: usize,
    pub success_fraction: f64,
    /// Every trial met the frequency criterion, whatever happened to the phases.
    pub all_frequency_synchronized: bool,
    pub min_final_dphi: f64,
    pub max_final_dphi: f64,
    pub max_final_frequency_spread: f64,
    pub noncompliant_coupling_allowed: bool,
    pub validation: Vec<ValidationReport>,
    pub per_trial: Vec<TrialSummary>,
}

pub struct Outcome {
    pub summary: Summary,
    pub equilibria: Option<Vec<EquilibriumReport>>,
}

impl Outcome {
    /// 0 when every trial succeeded, 3 otherwise.
    pub fn exit_code(&self) -> u8 {
        if self.summary.successes == self.summary.trials {
            0
        } else {
            3
        }
    }
}

fn write_csv(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let n = traj.phi.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io { path: path.into(), source: e.into() })?;
    let mut header = vec!["t".to_string()];
    for prefix in ["phi", "gamma"] {
        header.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    }
    header.push("dphi".into());
    header.extend((1..=n).map(|i| format!("freq_{i}")));
    header.extend(["U".to_string(), "qTgamma".to_string()]);
    let csv_err = |e: csv::Error| CliError::Io { path: path.into(), source: e.into() };
    w.write_record(&header).map_err(csv_err)?;
    for k in 0..traj.len() {
        let mut row = Vec::with_capacity(header.len());
        row.push(traj.t[k].to_string());
        row.extend(traj.phi[k].iter().chain(&traj.gamma[k]).map(f64::to_string));
        row.push(traj.dphi[k].to_string());
        row.extend(traj.freq[k].iter().map(f64::to_string));
        row.push(traj.u.get(k).map_or(String::new(), f64::to_string));
        row.push(traj.q_gamma[k].to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

fn run_trial(cfg: &ExperimentConfig, net: &OscNetwork, trial: usize, out: &Path) -> Result<TrialResult, CliError> {
    let x0 = initial_state(cfg, trial);
    let mut opts = IntegrateOptions::new(cfg.dt, cfg.t_end, cfg.record_every);
    opts.early_stop = cfg.early_stop;
    let traj = integrate(net, cfg.controller, &x0, &opts)?;
    let report = sync_report(&traj, net.bank());
    let verdict = report.verdict(&cfg.thresholds, net.bank(), &x0.gamma);
    write_csv(&out.join(format!("trial_{trial:04}.csv")), &traj)?;
    let result = TrialResult { trial, success: verdict.success(), verdict, initial: x0, report };
    write_json(&out.join(format!("trial_{trial:04}.json")), &result)?;
    Ok(result)
}

/// Newton multistart plus linearization at every distinct equilibrium.
pub fn analyze(cfg: &ExperimentConfig, net: &OscNetwork) -> Result<Vec<EquilibriumReport>, CliError> {
    let kind = match cfg.controller {
        SystemKind::Kuramoto => SystemKind::Pi,
        k => k,
    };
    let a = cfg.analysis.clone().unwrap_or(crate::config::AnalysisConfig { random_starts: 20, seed: 0, r: 0.0 });
    search_equilibria(net, a.random_starts, a.seed)
        .iter()
        .map(|eq| equilibrium_report(net, kind, &eq.mu, a.r).map_err(CliError::from))
        .collect()
}

fn thread_pool() -> rayon::ThreadPool {
    let threads = std::env::var("SYNC_MESH_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
}

/// Runs every trial, writes all artifacts into `out` and returns the batch summary.
pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let (net, validation) = validate(cfg)?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let results: Vec<TrialResult> =
        thread_pool().install(|| (0..cfg.trials).into_par_iter().map(|k| run_trial(cfg, &net, k, out)).collect::<Result<_, _>>())?;

    let successes = results.iter().filter(|r| r.success).count();
    let dphis = results.iter().map(|r| r.report.final_dphi);
    let summary = Summary {
        controller: cfg.controller,
        n: net.n(),
        trials: cfg.trials,
        thresholds: cfg.thresholds,
        successes,
        success_fraction: successes as f64 / cfg.trials as f64,
        all_frequency_synchronized: results.iter().all(|r| r.verdict.frequency_synchronized),
        min_final_dphi: dphis.clone().fold(f64::INFINITY, f64::min),
        max_final_dphi: dphis.fold(0.0, f64::max),
        max_final_frequency_spread: results.iter().map(|r| r.report.final_frequency_spread).fold(0.0, f64::max),
        noncompliant_coupling_allowed: cfg.allow_noncompliant_coupling,
        validation,
        per_trial: results
            .iter()
            .map(|r| TrialSummary {
                trial: r.trial,
                success: r.success,
                final_dphi: r.report.final_dphi,
                final_mean_frequency: r.report.final_mean_frequency,
                final_frequency_spread: r.report.final_frequency_spread,
            })
            .collect(),
    };
    write_json(&out.join("summary.json"), &summary)?;

    let equilibria = match cfg.analysis {
        Some(_) => {
            let reports = analyze(cfg, &net)?;
            write_json(&out.join("equilibria.json"), &reports)?;
            Some(reports)
        }
        None => None,
    };
    Ok(Outcome { summary, equilibria })
}

pub fn analyze_to(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<EquilibriumReport>, CliError> {
    let (net, _) = validate(cfg)?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let reports = analyze(cfg, &net)?;
    write_json(&out.join("equilibria.json"), &reports)?;
    Ok(reports)
}

/// Output directory: command line, then config, then `out`.
pub fn output_dir(cfg: &ExperimentConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}
