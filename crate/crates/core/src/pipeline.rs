//! Algorithm stages as file-producing commands: simulate data, reconstruct
//! from a data file, both in sequence, and the truncation diagnostic.
//!
//! Artifacts written to `out_dir`:
//!
//! | file | producer |
//! |---|---|
//! | `manifest.txt` | every command (config + version) |
//! | `p_true.csv`, `cauchy_clean.csv`, `cauchy_noisy.csv` | simulate |
//! | `indirect.csv`, `w.csv`, `p_comp.csv`, `p_imag_residual.csv`, `metrics.txt`, `phi.csv`, `phi_map.csv` | reconstruct |
//! | `basis.csv`, `phi.csv`, `phi_map.csv` | basis-diag |
//! | `summary.txt` | appended by every command, includes timings |

use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::basis::Basis;
use crate::config::{C0Spec, RunConfig};
use crate::data::{add_noise, compute_indirect, cutoff_diagnostic, CauchyData, CutoffDiagnostic};
use crate::error::{Error, Result};
use crate::forward::{ForwardProblem, ForwardSolver, IncidentWave};
use crate::grid::{AngleGrid, Grid2D, ScalarField2D};
use crate::io;
use crate::phantoms::Phantom;
use crate::qrm::{solve_qrm, QrmConfig, VectorFieldW};
use crate::recon::{metrics, recover_source, synthesize_w, Metrics, ReconstructionResult};

pub const MANIFEST: &str = "manifest.txt";
pub const P_TRUE: &str = "p_true.csv";
pub const CAUCHY_CLEAN: &str = "cauchy_clean.csv";
pub const CAUCHY_NOISY: &str = "cauchy_noisy.csv";
pub const INDIRECT: &str = "indirect.csv";
pub const W_FIELD: &str = "w.csv";
pub const P_COMP: &str = "p_comp.csv";
pub const P_IMAG: &str = "p_imag_residual.csv";
pub const METRICS: &str = "metrics.txt";
pub const PHI_TABLE: &str = "phi.csv";
pub const PHI_MAP: &str = "phi_map.csv";
pub const BASIS_DUMP: &str = "basis.csv";
pub const SUMMARY: &str = "summary.txt";

/// Wall-clock seconds per stage, in execution order.
#[derive(Debug, Clone, Default)]
pub struct Timings(pub Vec<(&'static str, f64)>);

impl Timings {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage))?;
        self.0.push((stage, start.elapsed().as_secs_f64()));
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub clean: CauchyData,
    pub noisy: CauchyData,
    pub noisy_path: PathBuf,
    pub timings: Timings,
}

#[derive(Debug, Clone)]
pub struct ReconstructOutput {
    pub w: VectorFieldW,
    pub result: ReconstructionResult,
    /// Absent when no true source is configured or it is identically zero.
    pub metrics: Option<Metrics>,
    pub cutoff: Option<CutoffDiagnostic>,
    pub timings: Timings,
}

pub fn grid(cfg: &RunConfig) -> Result<Grid2D> {
    Grid2D::new(cfg.n_x)
}

pub fn angles(cfg: &RunConfig) -> Result<AngleGrid> {
    AngleGrid::new(cfg.n_theta, cfg.theta_min, cfg.theta_max)
}

pub fn phantom(cfg: &RunConfig) -> Result<Phantom> {
    match (&cfg.mask, &cfg.phantom) {
        (Some(_), Some(_)) => Err(Error::invalid("set either phantom or mask, not both")),
        (Some(path), None) => Phantom::load_mask(path, cfg.amplitude),
        (None, Some(name)) => Phantom::builtin(name),
        (None, None) => {
            cfg.require_source()?;
            unreachable!()
        }
    }
}

pub fn c0_field(cfg: &RunConfig, grid: Grid2D) -> Result<ScalarField2D> {
    match &cfg.c0 {
        C0Spec::Constant(v) => Ok(ScalarField2D::constant(grid, *v)),
        C0Spec::File(path) => {
            let (_, field) = io::read_field(path)?;
            if *field.grid() != grid {
                return Err(Error::invalid(format!(
                    "c0 file {} has n_x = {}, run uses {}",
                    path.display(),
                    field.grid().n_x(),
                    grid.n_x()
                )));
            }
            Ok(field)
        }
    }
}

fn out(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out_dir.join(name)
}

fn write_manifest(cfg: &RunConfig) -> Result<()> {
    io::write_string(&out(cfg, MANIFEST), &cfg.to_key_values())
}

fn append_summary(cfg: &RunConfig, command: &str, body: &str, timings: &Timings) -> Result<()> {
    let mut s = String::new();
    writeln!(s, "[{command}]").unwrap();
    s.push_str(body);
    for (stage, secs) in &timings.0 {
        writeln!(s, "time_{}={secs:.3}", stage.replace(' ', "_")).unwrap();
    }
    s.push('\n');
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut f = OpenOptions::new().create(true).append(true).open(out(cfg, SUMMARY))?;
    f.write_all(s.as_bytes())?;
    Ok(())
}

/// Forward-solves every angle for the configured source and writes clean and
/// noisy Cauchy data.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateOutput> {
    cfg.validate()?;
    let source = phantom(cfg)?;
    let grid = grid(cfg)?;
    let angles = angles(cfg)?;
    let mut timings = Timings::default();
    let p_true = source.sample(&grid)?;
    let c0 = c0_field(cfg, grid)?;
    let wave = IncidentWave::new(cfg.k)?;
    let clean = timings.time("forward", || {
        let solver = ForwardSolver::new(ForwardProblem::new(wave, c0, p_true.clone())?)?;
        solver.simulate_all(&angles)
    })?;
    let noisy = if cfg.delta == 0.0 { clean.clone() } else { add_noise(&clean, cfg.delta, cfg.seed)? };
    write_manifest(cfg)?;
    io::write_field(&out(cfg, P_TRUE), &p_true, "p_true")?;
    io::write_cauchy(&out(cfg, CAUCHY_CLEAN), &clean)?;
    let noisy_path = out(cfg, CAUCHY_NOISY);
    io::write_cauchy(&noisy_path, &noisy)?;
    let body = format!("phantom={}\ndelta={:e}\nseed={}\n", source.name, cfg.delta, cfg.seed);
    append_summary(cfg, "simulate", &body, &timings)?;
    Ok(SimulateOutput { clean, noisy, noisy_path, timings })
}

/// Loads Cauchy data and checks it against the configured grids.
pub fn load_data(cfg: &RunConfig, path: &Path) -> Result<CauchyData> {
    let data = io::read_cauchy(path)?;
    let angles = data.angles();
    let mismatch = |what: &str, file: String, config: String| {
        Err(Error::invalid(format!("{}: {what} is {file} in the data file but {config} in the config", path.display())))
    };
    let n_x = data.boundary().grid().n_x();
    if n_x != cfg.n_x {
        return mismatch("n_x", n_x.to_string(), cfg.n_x.to_string());
    }
    if angles.n_theta() != cfg.n_theta {
        return mismatch("n_theta", angles.n_theta().to_string(), cfg.n_theta.to_string());
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    if !close(angles.theta_min(), cfg.theta_min) || !close(angles.theta_max(), cfg.theta_max) {
        return mismatch(
            "angle range",
            format!("[{}, {}]", angles.theta_min(), angles.theta_max()),
            format!("[{}, {}]", cfg.theta_min, cfg.theta_max),
        );
    }
    if !close(data.k(), cfg.k) {
        return mismatch("k", data.k().to_string(), cfg.k.to_string());
    }
    Ok(data)
}

/// Runs basis → indirect data → QRM → source recovery → metrics on a data
/// file (default: the noisy data in `out_dir`).
pub fn cmd_reconstruct(cfg: &RunConfig, data_path: Option<&Path>) -> Result<ReconstructOutput> {
    cfg.validate()?;
    let default_path = out(cfg, CAUCHY_NOISY);
    let data_path = data_path.unwrap_or(&default_path);
    let data = load_data(cfg, data_path).map_err(|e| e.in_stage("load data"))?;
    let truth = match (&cfg.phantom, &cfg.mask) {
        (None, None) => None,
        _ => Some(phantom(cfg)?),
    };
    let grid = grid(cfg)?;
    let c0 = c0_field(cfg, grid)?;
    let wave = IncidentWave::new(cfg.k)?;
    let mut timings = Timings::default();

    let basis = timings.time("basis", || Basis::build(cfg.n, data.angles(), cfg.refine))?;
    let indirect = timings.time("indirect data", || compute_indirect(&data, &wave, &basis))?;
    let qrm_cfg = QrmConfig {
        epsilon: cfg.epsilon,
        tolerance: cfg.tolerance,
        max_iterations: cfg.max_iterations,
        layer1_rows: cfg.layer1_rows,
    };
    let w = timings.time("qrm", || solve_qrm(&wave, &c0, &basis, &indirect, &qrm_cfg))?;
    let result = timings.time("recon", || recover_source(&synthesize_w(&w, &basis)?, &wave, &c0))?;
    // the table covers the listed N up to the solve truncation; basis-diag
    // takes arbitrary lists
    let phi_list: Vec<usize> = cfg.phi_n_list.iter().copied().filter(|&m| m <= cfg.n).collect();
    let cutoff = if phi_list.is_empty() {
        None
    } else {
        Some(timings.time("cutoff diagnostic", || cutoff_diagnostic(&data, &wave, &basis, cfg.phi_edge, &phi_list))?)
    };
    let metrics = match &truth {
        Some(source) => {
            let p_true = source.sample(&grid)?;
            if p_true.values().iter().all(|v| v.re == 0.0) {
                None
            } else {
                Some(metrics(&result.p_comp, &p_true)?)
            }
        }
        None => None,
    };

    write_manifest(cfg)?;
    io::write_indirect(&out(cfg, INDIRECT), &indirect)?;
    io::write_w(&out(cfg, W_FIELD), &w)?;
    io::write_field(&out(cfg, P_COMP), &result.p_comp, "p_comp")?;
    io::write_field(&out(cfg, P_IMAG), &result.p_imag_residual, "p_imag_residual")?;
    let mut body = format!("data={}\nqrm_iterations={}\nqrm_residual={:e}\n", data_path.display(), w.iterations, w.residual);
    if let Some(m) = &metrics {
        io::write_string(&out(cfg, METRICS), &m.to_key_values())?;
        body.push_str(&m.to_key_values());
    }
    if let Some(diag) = &cutoff {
        write_cutoff(cfg, diag, data.angles(), &grid)?;
        for (m, v) in diag.n_list.iter().zip(&diag.sup) {
            writeln!(body, "phi_{m}={v:e}").unwrap();
        }
    }
    append_summary(cfg, "reconstruct", &body, &timings)?;
    Ok(ReconstructOutput { w, result, metrics, cutoff, timings })
}

fn write_cutoff(cfg: &RunConfig, diag: &CutoffDiagnostic, angles: &AngleGrid, grid: &Grid2D) -> Result<()> {
    io::write_string(&out(cfg, PHI_TABLE), &io::cutoff_table_to_csv(diag))?;
    io::write_string(&out(cfg, PHI_MAP), &io::cutoff_map_to_csv(diag, angles, grid))
}

/// Simulate then reconstruct.
pub fn cmd_pipeline(cfg: &RunConfig) -> Result<(SimulateOutput, ReconstructOutput)> {
    cfg.require_source()?;
    let sim = cmd_simulate(cfg)?;
    let rec = cmd_reconstruct(cfg, Some(&sim.noisy_path))?;
    Ok((sim, rec))
}

/// φ(N) for each N in `n_list` on the configured edge, plus the basis dump.
pub fn cmd_basis_diag(cfg: &RunConfig, n_list: &[usize], data_path: Option<&Path>) -> Result<CutoffDiagnostic> {
    cfg.validate()?;
    if n_list.is_empty() {
        return Err(Error::invalid("basis-diag needs a non-empty N list"));
    }
    let default_path = out(cfg, CAUCHY_NOISY);
    let data_path = data_path.unwrap_or(&default_path);
    let data = load_data(cfg, data_path).map_err(|e| e.in_stage("load data"))?;
    let wave = IncidentWave::new(cfg.k)?;
    let grid = grid(cfg)?;
    let mut timings = Timings::default();
    let n_max = n_list.iter().copied().max().unwrap_or(1);
    let basis = timings.time("basis", || Basis::build(n_max, data.angles(), cfg.refine))?;
    let diag = timings.time("cutoff diagnostic", || cutoff_diagnostic(&data, &wave, &basis, cfg.phi_edge, n_list))?;
    basis.write_csv(&out(cfg, BASIS_DUMP))?;
    write_cutoff(cfg, &diag, data.angles(), &grid)?;
    let mut body = String::new();
    for (m, v) in diag.n_list.iter().zip(&diag.sup) {
        writeln!(body, "phi_{m}={v:e}").unwrap();
    }
    append_summary(cfg, "basis-diag", &body, &timings)?;
    Ok(diag)
}
