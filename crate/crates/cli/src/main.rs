use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use isp_qrm::config::RunConfig;
use isp_qrm::phantoms::{Phantom, BUILTIN_NAMES};
use isp_qrm::pipeline::{self, ReconstructOutput, Timings};
use isp_qrm::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(name = "isp-qrm", version, about = "Reconstruct a Helmholtz source term from multi-angle boundary data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate clean and noisy Cauchy data for a phantom
    Simulate(Common),
    /// Recover the source from a Cauchy data file
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Data file (default: <out_dir>/cauchy_noisy.csv)
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Simulate, then reconstruct
    Pipeline(Common),
    /// Truncation diagnostic φ(N) on one boundary edge
    BasisDiag {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Comma-separated N values
        #[arg(long = "n_list", default_value = "15,25,35")]
        n_list: String,
    },
    /// List built-in phantoms
    Phantoms,
}

/// Config file plus per-key overrides; flag names match config keys.
#[derive(Args)]
struct Common {
    /// key=value config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores); results do not depend on it
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long = "n_x")]
    n_x: Option<String>,
    #[arg(long = "n_theta")]
    n_theta: Option<String>,
    #[arg(long = "N")]
    n: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long = "theta_min")]
    theta_min: Option<String>,
    #[arg(long = "theta_max")]
    theta_max: Option<String>,
    #[arg(long)]
    phantom: Option<String>,
    #[arg(long)]
    mask: Option<String>,
    #[arg(long)]
    amplitude: Option<String>,
    #[arg(long)]
    c0: Option<String>,
    #[arg(long = "out_dir")]
    out_dir: Option<String>,
    #[arg(long)]
    tolerance: Option<String>,
    #[arg(long = "max_iterations")]
    max_iterations: Option<String>,
    #[arg(long)]
    refine: Option<String>,
    #[arg(long = "layer1_rows")]
    layer1_rows: Option<String>,
    #[arg(long = "phi_n_list")]
    phi_n_list: Option<String>,
    #[arg(long = "phi_edge")]
    phi_edge: Option<String>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let overrides = [
            ("k", &self.k),
            ("n_x", &self.n_x),
            ("n_theta", &self.n_theta),
            ("N", &self.n),
            ("epsilon", &self.epsilon),
            ("delta", &self.delta),
            ("seed", &self.seed),
            ("theta_min", &self.theta_min),
            ("theta_max", &self.theta_max),
            ("phantom", &self.phantom),
            ("mask", &self.mask),
            ("amplitude", &self.amplitude),
            ("c0", &self.c0),
            ("out_dir", &self.out_dir),
            ("tolerance", &self.tolerance),
            ("max_iterations", &self.max_iterations),
            ("refine", &self.refine),
            ("layer1_rows", &self.layer1_rows),
            ("phi_n_list", &self.phi_n_list),
            ("phi_edge", &self.phi_edge),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        if let Some(t) = self.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        }
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Stage { source, .. } | Error::AngleSolve { source, .. } => exit_code(source),
        Error::Io(_) => EXIT_IO,
        _ if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

fn print_timings(t: &Timings) {
    for (stage, secs) in &t.0 {
        eprintln!("  {stage}: {secs:.2} s");
    }
}

fn report(rec: &ReconstructOutput) {
    println!("qrm_iterations={}", rec.w.iterations);
    println!("qrm_residual={:e}", rec.w.residual);
    if let Some(m) = &rec.metrics {
        print!("{}", m.to_key_values());
    }
    if let Some(d) = &rec.cutoff {
        for (n, v) in d.n_list.iter().zip(&d.sup) {
            println!("phi_{n}={v:e}");
        }
    }
    print_timings(&rec.timings);
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(common) => {
            let cfg = common.resolve()?;
            let out = pipeline::cmd_simulate(&cfg)?;
            println!("wrote {}", out.noisy_path.display());
            print_timings(&out.timings);
        }
        Command::Reconstruct { common, data } => {
            let cfg = common.resolve()?;
            report(&pipeline::cmd_reconstruct(&cfg, data.as_deref())?);
        }
        Command::Pipeline(common) => {
            let cfg = common.resolve()?;
            let (sim, rec) = pipeline::cmd_pipeline(&cfg)?;
            print_timings(&sim.timings);
            report(&rec);
        }
        Command::BasisDiag { common, data, n_list } => {
            let cfg = common.resolve()?;
            let list: Vec<usize> = n_list
                .split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| t.trim().parse().map_err(|_| Error::InvalidInput(format!("bad N list {n_list:?}"))))
                .collect::<Result<_, _>>()?;
            let diag = pipeline::cmd_basis_diag(&cfg, &list, data.as_deref())?;
            println!("N,phi_sup,phi_l2");
            for i in 0..diag.n_list.len() {
                println!("{},{:e},{:e}", diag.n_list[i], diag.sup[i], diag.l2[i]);
            }
        }
        Command::Phantoms => {
            for name in BUILTIN_NAMES {
                let p = Phantom::builtin(name)?;
                println!("{name}\t{}", p.description());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
