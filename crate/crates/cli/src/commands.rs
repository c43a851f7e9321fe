use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use observer_synth::linalg::{rows, Mat};
use observer_synth::lipschitz::{LipschitzCheck, LipschitzEstimate};
use observer_synth::model::{load_model_file, ModelFile};
use observer_synth::sdp::{export_sdpa, import_sdpa_solution};
use observer_synth::sim::{write_plot_columns, write_trajectory_csv, MetricsSummary};
use observer_synth::synth::{assemble_lmi_generalized_with, assemble_lmi_lipschitz_with, design_from_solution};
use observer_synth::{
    estimate_lipschitz, metrics, search_generalized_lipschitz, simulate, simulate_arcak,
    simulate_luenberger, solve_feasibility, verify_lipschitz, DesignCertificate, DesignMode, LipschitzSystem,
    ObserverGains, SimError, SynthError,
};
use serde::{Deserialize, Serialize};

use crate::config::{LoadedConfig, ModeKind};
use crate::{exit, CliError};

pub const LIPSCHITZ_FILE: &str = "lipschitz.json";
pub const GAINS_FILE: &str = "gains.json";
pub const CERTIFICATE_FILE: &str = "certificate.json";
pub const SDPA_FILE: &str = "problem.dat-s";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const LUENBERGER_FILE: &str = "baseline_luenberger.csv";
pub const ARCAK_FILE: &str = "baseline_arcak.csv";
pub const FIG1_FILE: &str = "fig1.csv";
pub const FIG2_FILE: &str = "fig2.csv";
pub const REPORT_FILE: &str = "report.txt";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzArtifact {
    pub estimate: LipschitzEstimate,
    pub verification: LipschitzCheck,
}

/// `gains.json`; `m` and `n` are written for reference and recomputed on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainsFile {
    #[serde(with = "rows")]
    pub j: Mat,
    #[serde(with = "rows")]
    pub l: Mat,
    #[serde(with = "rows")]
    pub k: Mat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum BaselineOutcome {
    Ok { summary: MetricsSummary },
    Failed { error: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsArtifact {
    pub proposed: MetricsSummary,
    pub luenberger: BaselineOutcome,
    pub arcak: BaselineOutcome,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::validation(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_error(path, e))?;
    write_text(path, &(text + "\n"))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, format!("cannot read ({e})")))?;
    serde_json::from_str(&text).map_err(|e| io_error(path, e))
}

fn prepare_out_dir(cfg: &LoadedConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    Ok(dir)
}

fn load_model(cfg: &LoadedConfig) -> Result<(ModelFile, LipschitzSystem), CliError> {
    cfg.validate()?;
    load_model_file(&cfg.model_path()).map_err(|e| CliError::validation(e.to_string()))
}

fn estimate(cfg: &LoadedConfig, sys: &LipschitzSystem) -> Result<LipschitzArtifact, CliError> {
    let section = &cfg.config.lipschitz;
    let estimation = |e: observer_synth::LipschitzError| CliError::new(exit::ESTIMATION, e.to_string());
    let estimate = estimate_lipschitz(sys, sys.domain(), &section.estimate).map_err(estimation)?;
    let verification = verify_lipschitz(sys, estimate.ell, &section.verify).map_err(estimation)?;
    Ok(LipschitzArtifact { estimate, verification })
}

/// Estimates `ℓ` over the model's domain and writes `lipschitz.json`.
pub fn cmd_lipschitz(cfg: &LoadedConfig) -> Result<String, CliError> {
    let (_, sys) = load_model(cfg)?;
    let artifact = estimate(cfg, &sys)?;
    let out = prepare_out_dir(cfg)?;
    write_json(&out.join(LIPSCHITZ_FILE), &artifact)?;
    Ok(format!(
        "ell = {:.6} ({} evaluations, sampled worst ratio {:.6})",
        artifact.estimate.ell, artifact.estimate.samples_used, artifact.verification.worst_ratio
    ))
}

fn design_mode(cfg: &LoadedConfig, sys: &LipschitzSystem) -> Result<DesignMode, CliError> {
    let d = &cfg.config.design;
    match d.mode {
        ModeKind::Lipschitz => {
            let ell = match d.ell {
                Some(ell) => ell,
                None => estimate(cfg, sys)?.estimate.ell,
            };
            Ok(DesignMode::Lipschitz { ell })
        }
        ModeKind::Generalized => match (&d.v, &d.w) {
            (Some(v), Some(w)) => Ok(DesignMode::Generalized { v: v.clone(), w: w.clone() }),
            _ => {
                let pair = search_generalized_lipschitz(sys, &d.generalized_search)
                    .map_err(|e| CliError::new(exit::ESTIMATION, e.to_string()))?;
                Ok(DesignMode::Generalized { v: pair.v, w: pair.w })
            }
        },
    }
}

fn synth_error(e: SynthError) -> CliError {
    match e {
        SynthError::Infeasible { certificate_value, .. } => CliError::new(
            exit::INFEASIBLE,
            format!("LMIs infeasible (dual certificate value {certificate_value:e})"),
        ),
        SynthError::Unknown { max_block_eig, .. } => CliError::new(
            exit::UNKNOWN,
            format!("solver undecided (largest block eigenvalue {max_block_eig:e})"),
        ),
        SynthError::NotPositiveDefinite => CliError::new(exit::UNKNOWN, e.to_string()),
        other => CliError::validation(other.to_string()),
    }
}

/// Solves the design LMIs and writes `gains.json`, `certificate.json` and optionally
/// `problem.dat-s`. Exit 0 only for a valid certificate.
pub fn cmd_design(cfg: &LoadedConfig) -> Result<String, CliError> {
    let (_, sys) = load_model(cfg)?;
    let d = &cfg.config.design;
    let mode = design_mode(cfg, &sys)?;
    let lmi = match &mode {
        DesignMode::Lipschitz { ell } => assemble_lmi_lipschitz_with(&sys, *ell, &d.options()),
        DesignMode::Generalized { v, w } => assemble_lmi_generalized_with(&sys, v, w, &d.options()),
    }
    .map_err(synth_error)?;
    let out = prepare_out_dir(cfg)?;
    if d.export_sdpa {
        let text = export_sdpa(&lmi.problem).map_err(|e| CliError::validation(e.to_string()))?;
        write_text(&out.join(SDPA_FILE), &text)?;
    }
    let solution = match &d.sdpa_solution {
        Some(path) => {
            let path = cfg.resolve(path);
            let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
            import_sdpa_solution(&lmi.problem, &text).map_err(|e| io_error(&path, e))?
        }
        None => solve_feasibility(&lmi.problem, &d.solver).map_err(|e| CliError::validation(e.to_string()))?,
    };
    let outcome = design_from_solution(&sys, lmi, solution).map_err(synth_error)?;
    write_json(&out.join(GAINS_FILE), &outcome.gains)?;
    write_json(&out.join(CERTIFICATE_FILE), &outcome.certificate)?;
    let c = &outcome.certificate;
    let line = format!(
        "ARI max eigenvalue {:.6e}, spectral abscissa of M {:.6e}, min eig P {:.6e}",
        c.ari_max_eig, c.spectral_abscissa_m, c.p_min_eig
    );
    if c.is_valid() {
        Ok(line)
    } else {
        Err(CliError::new(exit::UNKNOWN, format!("certificate invalid: {line}")))
    }
}

/// Estimate/state pairs plotted in `fig1.csv`.
fn plot_columns(model: &ModelFile, nx: usize) -> Vec<(&'static str, usize)> {
    match model {
        ModelFile::SidartheV { .. } => vec![("S", 0), ("H", 6)],
        _ if nx > 1 => vec![("x_1", 0), ("x_n", nx - 1)],
        _ => vec![("x_1", 0)],
    }
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::NonFiniteState { .. } => CliError::new(exit::NON_FINITE, e.to_string()),
        other => CliError::validation(other.to_string()),
    }
}

fn write_csv(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<(), SimError>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| io_error(path, e))?;
    fs::write(path, buf).map_err(|e| io_error(path, e))
}

fn run_baseline(
    out: &Path,
    file: &str,
    result: Result<observer_synth::Trajectory, SimError>,
) -> Result<BaselineOutcome, CliError> {
    let traj = match result {
        Ok(t) => t,
        Err(e @ SimError::NonFiniteState { .. }) => return Ok(BaselineOutcome::Failed { error: e.to_string() }),
        Err(e) => return Err(sim_error(e)),
    };
    let m = metrics(&traj, None).map_err(sim_error)?;
    write_csv(&out.join(file), |w| write_trajectory_csv(&traj, &m, w))?;
    Ok(BaselineOutcome::Ok { summary: m.summary })
}

/// Co-simulates the plant with the designed observer and both baselines.
pub fn cmd_simulate(cfg: &LoadedConfig) -> Result<String, CliError> {
    let (model, sys) = load_model(cfg)?;
    let out = cfg.out_dir();
    let gains_path = out.join(GAINS_FILE);
    if !gains_path.is_file() {
        return Err(CliError::validation(format!("gains file not found: {}", gains_path.display())));
    }
    let file: GainsFile = read_json(&gains_path)?;
    let gains = ObserverGains::new(&sys, file.j, file.l, file.k).map_err(|e| io_error(&gains_path, e))?;
    let cert_path = out.join(CERTIFICATE_FILE);
    let p = if cert_path.is_file() { Some(read_json::<DesignCertificate>(&cert_path)?.p) } else { None };

    let sim = cfg.sim();
    sim.steps().map_err(sim_error)?;
    let traj = simulate(&sys, &gains, &sim).map_err(sim_error)?;
    let m = metrics(&traj, p.as_ref()).map_err(sim_error)?;
    write_csv(&out.join(TRAJECTORY_FILE), |w| write_trajectory_csv(&traj, &m, w))?;
    let columns = plot_columns(&model, sys.dims().nx);
    write_csv(&out.join(FIG1_FILE), |w| write_plot_columns(&traj, &columns, w))?;
    let mut fig2 = String::from("t,percent_error\n");
    for (t, pe) in traj.times.iter().zip(&m.percent_error) {
        let _ = writeln!(fig2, "{t:?},{}", pe.map(|v| format!("{v:?}")).unwrap_or_default());
    }
    write_text(&out.join(FIG2_FILE), &fig2)?;

    let luenberger = run_baseline(&out, LUENBERGER_FILE, simulate_luenberger(&sys, gains.l(), &sim))?;
    let arcak = run_baseline(&out, ARCAK_FILE, simulate_arcak(&sys, gains.l(), gains.k(), &sim))?;
    let artifact = MetricsArtifact { proposed: m.summary.clone(), luenberger, arcak };
    write_json(&out.join(METRICS_FILE), &artifact)?;
    Ok(format!(
        "final error {:.6e}, steady percent error {}",
        m.summary.final_error,
        m.summary.steady_percent_error.map_or("n/a".into(), |v| format!("{v:.4}%"))
    ))
}

fn opt(v: Option<f64>, unit: &str) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.6e}{unit}"))
}

fn baseline_line(name: &str, outcome: &BaselineOutcome) -> String {
    match outcome {
        BaselineOutcome::Ok { summary } => format!(
            "  {name:<12} final error {:.6e}  steady percent error {}",
            summary.final_error,
            opt(summary.steady_percent_error, "%")
        ),
        BaselineOutcome::Failed { error } => format!("  {name:<12} failed: {error}"),
    }
}

/// Writes `report.txt` from the artifacts of the earlier commands.
pub fn cmd_report(cfg: &LoadedConfig) -> Result<String, CliError> {
    let out = cfg.out_dir();
    for name in [CERTIFICATE_FILE, METRICS_FILE] {
        let path = out.join(name);
        if !path.is_file() {
            return Err(CliError::validation(format!("missing input for report: {}", path.display())));
        }
    }
    let cert: DesignCertificate = read_json(&out.join(CERTIFICATE_FILE))?;
    let metrics: MetricsArtifact = read_json(&out.join(METRICS_FILE))?;
    let lipschitz_path = out.join(LIPSCHITZ_FILE);
    let lipschitz: Option<LipschitzArtifact> =
        if lipschitz_path.is_file() { Some(read_json(&lipschitz_path)?) } else { None };

    let mut r = String::new();
    let _ = writeln!(r, "observer-synth report");
    let _ = writeln!(r, "model: {}", cfg.config.model.display());
    let _ = writeln!(r);
    let _ = writeln!(r, "Lipschitz constant");
    match (&lipschitz, &cert.mode) {
        (Some(l), _) => {
            let _ = writeln!(
                r,
                "  ell = {:.6} over the {} domain ({} evaluations; sampled worst ratio {:.6})",
                l.estimate.ell,
                serde_json::to_value(l.estimate.domain_kind).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default(), l.estimate.samples_used, l.verification.worst_ratio
            );
        }
        (None, DesignMode::Lipschitz { ell }) => {
            let _ = writeln!(r, "  ell = {ell:.6} (design input)");
        }
        (None, DesignMode::Generalized { .. }) => {
            let _ = writeln!(r, "  not estimated");
        }
    }
    match &cert.mode {
        DesignMode::Lipschitz { ell } => {
            let _ = writeln!(r, "  design mode: lipschitz, ell = {ell:.6}");
        }
        DesignMode::Generalized { v, w } => {
            let _ = writeln!(r, "  design mode: generalized, V {}x{}, W {}x{}", v.nrows(), v.ncols(), w.nrows(), w.ncols());
        }
    }
    let _ = writeln!(r);
    let _ = writeln!(r, "Design");
    let status = if cert.is_valid() { "feasible, certificate valid" } else { "certificate INVALID" };
    let _ = writeln!(r, "  status: {status}");
    let _ = writeln!(r, "  ARI max eigenvalue:        {:.6e}", cert.ari_max_eig);
    let _ = writeln!(r, "  spectral abscissa of M:    {:.6e}", cert.spectral_abscissa_m);
    let _ = writeln!(r, "  min eigenvalue of P:       {:.6e}", cert.p_min_eig);
    let _ = writeln!(r, "  LMI feasibility margin:    {:.6e}", cert.feasibility_margin);
    let _ = writeln!(r);
    let p = &metrics.proposed;
    let _ = writeln!(r, "Simulation (T = {}, {} samples)", p.final_time, p.samples);
    let _ = writeln!(r, "  initial error:             {:.6e}", p.initial_error);
    let _ = writeln!(r, "  final error:               {:.6e}", p.final_error);
    let _ = writeln!(r, "  relative final error:      {}", opt(p.relative_final_error, ""));
    let _ = writeln!(r, "  steady percent error:      {}", opt(p.steady_percent_error, "%"));
    let _ = writeln!(r, "  max Lyapunov increase:     {}", opt(p.lyapunov_max_increase, ""));
    if p.zero_state_count > 0 {
        let _ = writeln!(r, "  samples with zero state:   {}", p.zero_state_count);
    }
    if out.join(LUENBERGER_FILE).is_file() || out.join(ARCAK_FILE).is_file() {
        let _ = writeln!(r);
        let _ = writeln!(r, "Baseline comparison");
        let _ = writeln!(r, "{}", baseline_line("proposed", &BaselineOutcome::Ok { summary: p.clone() }));
        let _ = writeln!(r, "{}", baseline_line("luenberger", &metrics.luenberger));
        let _ = writeln!(r, "{}", baseline_line("arcak", &metrics.arcak));
    }
    write_text(&out.join(REPORT_FILE), &r)?;
    Ok(r)
}

/// All four stages in order, stopping at the first failure.
pub fn cmd_run(cfg: &LoadedConfig) -> Result<String, CliError> {
    let mut log = String::new();
    for (name, stage) in [
        ("lipschitz", cmd_lipschitz as fn(&LoadedConfig) -> Result<String, CliError>),
        ("design", cmd_design),
        ("simulate", cmd_simulate),
    ] {
        let line = stage(cfg)?;
        let _ = writeln!(log, "{name}: {line}");
    }
    log.push_str(&cmd_report(cfg)?);
    Ok(log)
}
