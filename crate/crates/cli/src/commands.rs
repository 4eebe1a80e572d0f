//! Subcommand implementations.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use viscobeam::attractor_lab::{
    absorbing_entry_time, distance_to_stationary, holder_probe, stabilizability_check, stationary_solutions,
    AbsorbingReport, DistanceSeries, HolderReport, PairReport, StationarySet,
};
use viscobeam::beam_fem::EmbeddingConstants;
use viscobeam::dynamics::simulate;
use viscobeam::energy::{
    apply_delta, check_bands, energy_identity_residual, fit_decay_rate, run_bounds, select_delta, BandReport,
    DecayFit, DeltaConfig, EnergyReport,
};
use viscobeam::law::AssumptionReport;
use viscobeam::{Model64, Trajectory64};

use crate::config::{DampingSpec, RunConfig};
use crate::error::{CliResult, Diagnostic, ExitCode};
use crate::initial::{InitialData, InitialKind};
use crate::output::Sink;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Sweep,
    Pair,
    Stationary,
    Validate,
    Probe,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Pair => "pair",
            Command::Stationary => "stationary",
            Command::Validate => "validate",
            Command::Probe => "probe",
        }
    }
}

pub const WORKERS_ENV: &str = "VISCOBEAM_WORKERS";
pub const DIAGNOSTIC_FILE: &str = "diagnostic.json";

/// Loads the config, runs `cmd` and reports failures in `diagnostic.json`.
pub fn run(cmd: Command, config_path: &Path, out: Option<&Path>) -> ExitCode {
    let cfg = RunConfig::load(config_path);
    let dir = match (out, &cfg) {
        (Some(d), _) => d.to_owned(),
        (None, Ok(c)) => c.outputs.directory.clone(),
        (None, Err(_)) => PathBuf::from(crate::config::OutputConfig::default().directory),
    };
    let result = cfg.and_then(|c| execute(cmd, &c, &dir));
    let diag_path = dir.join(DIAGNOSTIC_FILE);
    match result {
        Ok(()) => {
            if diag_path.exists() {
                let _ = std::fs::remove_file(&diag_path);
            }
            ExitCode::Success
        }
        Err(e) => {
            eprintln!("viscobeam {}: {e}", cmd.name());
            let diag = Diagnostic::new(cmd.name(), &e);
            let body = serde_json::to_string_pretty(&diag).unwrap_or_default() + "\n";
            if std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(&diag_path, body)).is_err() {
                eprintln!("viscobeam: could not write {}", diag_path.display());
            }
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command, cfg: &RunConfig, dir: &Path) -> CliResult<()> {
    let sink = Sink::new(dir.to_owned(), cfg.outputs.clone())?;
    sink.text("config.toml", &cfg.to_toml()?)?;
    match cmd {
        Command::Simulate => simulate_cmd(cfg, &sink).map(|_| ()),
        Command::Sweep => sweep_cmd(cfg, &sink),
        Command::Pair => pair_cmd(cfg, &sink).map(|_| ()),
        Command::Stationary => stationary_cmd(cfg, &sink).map(|_| ()),
        Command::Validate => validate_cmd(cfg, &sink).map(|_| ()),
        Command::Probe => probe_cmd(cfg, &sink).map(|_| ()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelSummary {
    pub modes: Vec<[f64; 2]>,
    pub mass: f64,
    pub kappa: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub assumptions: AssumptionReport,
    pub constants: EmbeddingConstants<f64>,
    pub kernel: KernelSummary,
    /// `1/(2C₀)`, the largest `δ` admitted by the equivalence estimate.
    pub delta_equivalence_bound: Option<f64>,
}

pub fn validate_cmd(cfg: &RunConfig, sink: &Sink) -> CliResult<ValidationReport> {
    let (assumptions, constants) = cfg.assumptions()?;
    let k = cfg.kernel_spec()?;
    let passed = assumptions.passed();
    let delta_equivalence_bound = passed.then(|| {
        DeltaConfig::with_delta(0.0, &constants, assumptions.kappa, assumptions.rho).equivalence_bound
    });
    let report = ValidationReport {
        passed,
        kernel: KernelSummary {
            modes: cfg.kernel.modes.clone(),
            mass: k.mass(),
            kappa: k.kappa(),
            alpha1: k.alpha1(),
            alpha2: k.alpha2(),
            alpha3: k.alpha3(),
        },
        assumptions,
        constants,
        delta_equivalence_bound,
    };
    sink.json("validation.json", &report)?;
    report.assumptions.clone().into_result()?;
    Ok(report)
}

/// Everything `simulate` reports about one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub kappa: f64,
    pub rho: f64,
    #[serde(rename = "C_f")]
    pub big_c_f: f64,
    pub delta: DeltaConfig,
    pub decay_window: [f64; 2],
    /// `None` when the excess energy vanishes in the window.
    pub decay: Option<DecayFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_note: Option<String>,
    /// Entry time into the absorbing ball.
    #[serde(rename = "t_B")]
    pub t_b: Option<f64>,
    pub absorbing: AbsorbingReport,
    pub bands: BandReport,
    /// Largest `E_{n+1} − E_n` over the run (positive means an increase).
    pub max_energy_increase: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identity_residual_max: Option<f64>,
    pub samples: usize,
    pub initial: EnergyReport,
    #[serde(rename = "final")]
    pub last: EnergyReport,
}

/// Simulation plus energy diagnostics, without writing anything.
pub fn analyse(cfg: &RunConfig) -> CliResult<(Model64, Trajectory64, RunSummary)> {
    let (report, constants) = cfg.assumptions()?;
    let report = report.into_result()?;
    let model = cfg.model_unchecked()?;
    if let Some(d) = cfg.analysis.delta {
        let dc = DeltaConfig::with_delta(d, &constants, report.kappa, report.rho);
        if !dc.admissible {
            return Err(viscobeam::Error::assumption(format!(
                "δ = {d} exceeds the equivalence bound 1/(2C₀) = {}",
                dc.equivalence_bound
            ))
            .into());
        }
    }
    let z0 = cfg.initial.build(&model, cfg.seed)?;
    let mut traj = simulate(&z0, &model, &cfg.sim)?;
    let rho = report.rho;
    let delta = match cfg.analysis.delta {
        Some(d) => DeltaConfig::with_delta(d, &constants, report.kappa, rho),
        None => {
            let bounds = run_bounds(&model, &constants, rho, traj.samples.iter().map(|s| s.tip));
            select_delta(&model, &constants, rho, &bounds)
        }
    };
    apply_delta(&mut traj, &delta)?;
    let bands = check_bands(&traj, rho, report.big_c_f, &delta, cfg.analysis.band_slack)?;
    let window = cfg.decay_window();
    let (decay, decay_note) = match fit_decay_rate(&traj, window) {
        Ok(f) => (Some(f), None),
        Err(e @ (viscobeam::Error::Numerical(_) | viscobeam::Error::Config(_))) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let absorbing = absorbing_entry_time(&traj, &model.law, rho, &cfg.analysis.absorbing);
    let max_energy_increase =
        traj.samples.windows(2).map(|w| w[1].energy.e - w[0].energy.e).fold(f64::NEG_INFINITY, f64::max);
    let identity_residual_max = (cfg.sim.sample_every == 1 && traj.samples.len() > 1)
        .then(|| energy_identity_residual(&traj).map(|r| r.max_abs))
        .transpose()?;
    let summary = RunSummary {
        kappa: report.kappa,
        rho,
        big_c_f: report.big_c_f,
        delta,
        decay_window: [window.0, window.1],
        decay,
        decay_note,
        t_b: absorbing.entry_time,
        absorbing,
        bands,
        max_energy_increase: if traj.samples.len() > 1 { max_energy_increase } else { 0.0 },
        identity_residual_max,
        samples: traj.samples.len(),
        initial: traj.samples[0].energy,
        last: traj.last().energy,
    };
    Ok((model, traj, summary))
}

fn write_run(sink: &Sink, traj: &Trajectory64, summary: &RunSummary) -> CliResult<()> {
    sink.energy_csv("energy.csv", traj)?;
    sink.json("summary.json", summary)?;
    sink.plot("energy.gp", "energy.csv", "energy", &[(3, "E"), (4, "Etilde"), (5, "Edelta")], false)?;
    sink.plot("norm.gp", "energy.csv", "norm", &[(2, "norm_H2")], true)
}

pub fn simulate_cmd(cfg: &RunConfig, sink: &Sink) -> CliResult<RunSummary> {
    let (_, traj, summary) = analyse(cfg)?;
    write_run(sink, &traj, &summary)?;
    Ok(summary)
}

/// Worker count from the environment, if set.
pub fn worker_override() -> CliResult<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| viscobeam::Error::config(format!("{WORKERS_ENV} must be a positive integer, got {s:?}")).into()),
        Err(_) => Ok(None),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub run: usize,
    pub m0: f64,
    pub norm: Option<f64>,
    pub seed: u64,
    pub omega: Option<f64>,
    pub r2: Option<f64>,
    #[serde(rename = "t_B")]
    pub t_b: Option<f64>,
    #[serde(rename = "R2")]
    pub radius_sq: f64,
    pub initial_norm_sq: f64,
    pub final_norm_sq: f64,
    pub decay_violations: usize,
}

/// Configs of the individual sweep runs, in output order.
pub fn sweep_runs(cfg: &RunConfig) -> CliResult<Vec<RunConfig>> {
    let sw = &cfg.sweep;
    if !sw.norms.is_empty() && cfg.initial.kind != InitialKind::Random {
        return Err(viscobeam::Error::config("sweeping norms needs random initial data").into());
    }
    let base_m0 = match cfg.law.damping {
        DampingSpec::Affine { m0, .. } => Some(m0),
        DampingSpec::Tabulated { .. } => None,
    };
    if !sw.m0.is_empty() && base_m0.is_none() {
        return Err(viscobeam::Error::config("sweeping m0 needs affine damping").into());
    }
    let m0s: Vec<Option<f64>> = if sw.m0.is_empty() { vec![None] } else { sw.m0.iter().copied().map(Some).collect() };
    let norms: Vec<Option<f64>> = if sw.norms.is_empty() { vec![None] } else { sw.norms.iter().copied().map(Some).collect() };
    let seeds: Vec<Option<u64>> = if sw.seeds.is_empty() { vec![None] } else { sw.seeds.iter().copied().map(Some).collect() };
    let mut out = Vec::new();
    for m0 in &m0s {
        for norm in &norms {
            for seed in &seeds {
                let mut c = cfg.clone();
                c.sweep = Default::default();
                if let (Some(v), DampingSpec::Affine { m0, .. }) = (m0, &mut c.law.damping) {
                    *m0 = *v;
                }
                if let Some(n) = norm {
                    c.initial.norm = Some(*n);
                }
                if let Some(s) = seed {
                    c.seed = *s;
                }
                out.push(c);
            }
        }
    }
    Ok(out)
}

pub fn sweep_cmd(cfg: &RunConfig, sink: &Sink) -> CliResult<()> {
    let runs = sweep_runs(cfg)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_override()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| viscobeam::Error::config(format!("worker pool: {e}")))?;
    let rows: Vec<CliResult<SweepRow>> = pool.install(|| {
        runs.par_iter()
            .enumerate()
            .map(|(i, c)| {
                let (_, traj, summary) = analyse(c)?;
                write_run(&sink.child(&format!("run_{i:03}"))?, &traj, &summary)?;
                Ok(SweepRow {
                    run: i,
                    m0: c.material_law()?.damping.m0(),
                    norm: c.initial.norm,
                    seed: c.seed,
                    omega: summary.decay.map(|d| d.omega),
                    r2: summary.decay.map(|d| d.r2),
                    t_b: summary.t_b,
                    radius_sq: summary.absorbing.radius_sq,
                    initial_norm_sq: summary.absorbing.initial_norm_sq,
                    final_norm_sq: summary.absorbing.final_norm_sq,
                    decay_violations: summary.bands.decay_violations,
                })
            })
            .collect()
    });
    let rows = rows.into_iter().collect::<CliResult<Vec<_>>>()?;
    let header =
        ["run", "m0", "norm", "seed", "omega", "r2", "t_B", "R2", "initial_norm_sq", "final_norm_sq", "decay_violations"];
    sink.csv("sweep.csv", &header, rows.iter())?;
    sink.json("sweep.json", &rows)
}

/// Second datum for `pair`: explicit, or the first one perturbed.
pub fn second_datum(cfg: &RunConfig, model: &Model64) -> CliResult<InitialData> {
    if let Some(d) = &cfg.pair.second {
        return Ok(d.clone());
    }
    let z1 = cfg.initial.build(model, cfg.seed)?;
    let size = cfg.pair.perturbation * z1.norm_sq(model).sqrt().max(1.0);
    let dz = InitialData::random(size, 4).build(model, cfg.seed.wrapping_add(1))?;
    let u: Vec<f64> = (&z1.u + &dz.u).iter().copied().collect();
    let v: Vec<f64> = (&z1.v + &dz.v).iter().copied().collect();
    match (&cfg.initial.prehistory, cfg.initial.kind) {
        (Some(_), InitialKind::Zero) => {
            Err(viscobeam::Error::config("a prehistory on zero data cannot be perturbed; give pair.second").into())
        }
        (pre, _) => Ok(InitialData::explicit(u, v, pre.clone())),
    }
}

#[derive(Serialize)]
struct PairRow {
    t: f64,
    lhs: f64,
    rhs: f64,
    margin: f64,
}

pub fn pair_cmd(cfg: &RunConfig, sink: &Sink) -> CliResult<PairReport> {
    let model = cfg.model()?;
    let z1 = cfg.initial.build(&model, cfg.seed)?;
    let z2 = second_datum(cfg, &model)?.build(&model, cfg.seed)?;
    let report = stabilizability_check(&z1, &z2, &model, &cfg.sim, &cfg.pair.pair_config())?;
    let rows = (0..report.t.len()).map(|i| PairRow {
        t: report.t[i],
        lhs: report.lhs[i],
        rhs: report.rhs[i],
        margin: report.margin[i],
    });
    sink.csv("pair.csv", &["t", "lhs", "rhs", "margin"], rows)?;
    sink.json("pair.json", &report)?;
    sink.plot("pair.gp", "pair.csv", "stabilizability", &[(2, "lhs"), (3, "rhs")], true)?;
    if !report.pass {
        eprintln!("viscobeam pair: no grid value of eps satisfies the inequality");
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryReport {
    pub set: StationarySet,
    pub terminal_distance: f64,
    pub distance: DistanceSeries,
}

pub fn stationary_cmd(cfg: &RunConfig, sink: &Sink) -> CliResult<StationaryReport> {
    let model = cfg.model()?;
    let set = stationary_solutions(&model.ops, &model.law, model.kappa(), &cfg.analysis.stationary)?;
    if set.is_empty() {
        let why = set.diagnostic.clone().unwrap_or_else(|| "no stationary solution found".into());
        return Err(viscobeam::Error::numerical(why).into());
    }
    let z0 = cfg.initial.build(&model, cfg.seed)?;
    let traj = simulate(&z0, &model, &cfg.sim)?;
    let distance = distance_to_stationary(&traj, &set, &model)?;
    sink.csv("distance.csv", &["t", "d"], distance.t.iter().zip(&distance.d))?;
    sink.plot("distance.gp", "distance.csv", "distance to stationary set", &[(2, "d")], true)?;
    let report = StationaryReport { terminal_distance: distance.terminal, set, distance };
    sink.json("stationary.json", &report)?;
    Ok(report)
}

pub fn probe_cmd(cfg: &RunConfig, sink: &Sink) -> CliResult<HolderReport> {
    let model = cfg.model()?;
    let z0 = cfg.initial.build(&model, cfg.seed)?;
    let mut sim = cfg.sim.clone();
    sim.keep_history = true;
    let traj = simulate(&z0, &model, &sim)?;
    let report = holder_probe(&traj, &model, &cfg.analysis.probe)?;
    sink.csv("probe.csv", &["lag", "distance"], report.lags.iter().zip(&report.distances))?;
    sink.json("probe.json", &report)?;
    Ok(report)
}
