use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ising_quench::experiment::{compare_oracle, run_experiment, CollapseSection, ExperimentConfig, ExperimentKind, RunReport};
use ising_quench::fss::{Ansatz, ParamBounds};
use ising_quench::Result;

#[derive(Parser)]
#[command(name = "ising-quench", version, about = "Quench sweeps, oracle checks, spectra and scaling collapses")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a TOML configuration.
    Run {
        config: PathBuf,
        /// Replace the configured output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare MPS correlations with the free-fermion solution.
    CompareOracle {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Level statistics and eigenvector entropies.
    Spectrum {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Scaling collapse of trajectories listed in a CSV manifest.
    Collapse {
        /// CSV with columns `label,path[,column,control,error]`.
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "size-mzz")]
        ansatz: AnsatzArg,
        /// Starting point `B_c,nu,beta`.
        #[arg(long, value_delimiter = ',', num_args = 3, required = true)]
        init: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.5, 2.0])]
        critical: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [-1.0, 1.0])]
        beta_over_nu: Vec<f64>,
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.01, 2.0])]
        inv_nu: Vec<f64>,
        /// Error assigned to rows without one.
        #[arg(long, default_value_t = 1e-3)]
        error: f64,
        #[arg(long)]
        min_label: Option<f64>,
        #[arg(long, default_value_t = 200)]
        replicas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "collapse")]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum AnsatzArg {
    SizeMz,
    TimeMz,
    SizeMzz,
    TimeMzz,
}

impl From<AnsatzArg> for Ansatz {
    fn from(a: AnsatzArg) -> Self {
        match a {
            AnsatzArg::SizeMz => Ansatz::SizeMz,
            AnsatzArg::TimeMz => Ansatz::TimeMz,
            AnsatzArg::SizeMzz => Ansatz::SizeMzz,
            AnsatzArg::TimeMzz => Ansatz::TimeMzz,
        }
    }
}

fn load(path: &Path, output: Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(o) = output {
        cfg.output = o;
    }
    Ok(cfg)
}

fn execute(cmd: Cmd) -> Result<RunReport> {
    match cmd {
        Cmd::Run { config, output } => run_experiment(&load(&config, output)?),
        Cmd::CompareOracle { config, output } => compare_oracle(&load(&config, output)?),
        Cmd::Spectrum { config, output } => {
            let mut cfg = load(&config, output)?;
            cfg.kind = ExperimentKind::ChaosSpectrum;
            run_experiment(&cfg)
        }
        Cmd::Collapse { manifest, ansatz, init, critical, beta_over_nu, inv_nu, error, min_label, replicas, seed, output } => {
            let cfg = ExperimentConfig {
                kind: ExperimentKind::FssCollapse,
                output,
                seed,
                workers: None,
                model: None,
                evolver: Default::default(),
                run: Default::default(),
                collapse: Some(CollapseSection {
                    manifest,
                    ansatz: ansatz.into(),
                    default_error: error,
                    init: [init[0], init[1], init[2]],
                    bounds: ParamBounds {
                        critical: (critical[0], critical[1]),
                        beta_over_nu: (beta_over_nu[0], beta_over_nu[1]),
                        inv_nu: (inv_nu[0], inv_nu[1]),
                    },
                    min_label,
                    control_window: None,
                    replicas,
                    grid: 3,
                    max_eval: 3000,
                }),
            };
            run_experiment(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(report) => {
            let m = &report.manifest;
            println!("{} points, {} failed, {} files in {}", m.points, m.failures.len(), m.files.len(), report.dir.display());
            for f in &m.failures {
                eprintln!("failed {}: {}", f.point, f.error);
            }
            println!("summary: {}", report.summary.display());
            if report.failed() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
