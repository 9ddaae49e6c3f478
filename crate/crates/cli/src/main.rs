mod audit;
mod error;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;
use crate::experiments::Artifact;

/// Nash states of quantum observables: solver runs and reproducible
/// experiment artifacts.
#[derive(Parser, Debug)]
#[command(name = "nash-states", version)]
struct Cli {
    /// Seed for every random draw in the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Nash varieties of random instances.
    #[command(subcommand)]
    Variety(VarietyCmd),
    /// Transverse-field Ising chain thermodynamics.
    #[command(subcommand)]
    Tfim(TfimCmd),
    /// Quantum Prisoner's Dilemma.
    #[command(subcommand)]
    Qpd(QpdCmd),
    /// Residual and optimality report for a state.
    #[command(subcommand)]
    Nash(NashCmd),
    /// Approximate Nash states among Haar-random states.
    #[command(subcommand)]
    Haar(HaarCmd),
    /// Eigenstates of random two-local Hamiltonians as Nash states.
    #[command(subcommand)]
    Theorem1(Theorem1Cmd),
    /// Re-verify every residual in emitted artifacts.
    Audit {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum VarietyCmd {
    /// Multistart point clouds with local dimension estimates.
    Sample {
        #[arg(long, default_value_t = 2)]
        qubits: usize,
        /// Real-symmetric observables; samples the rebit set `W̃′`.
        #[arg(long)]
        real: bool,
        #[arg(long, default_value_t = 10)]
        instances: usize,
        #[arg(long, default_value_t = 20)]
        n_starts: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1e-7)]
        rank_tol: f64,
    },
    /// Trace the components of `W̃′` for random real two-qubit instances.
    Trace {
        #[arg(long, default_value_t = 10)]
        instances: usize,
        #[arg(long, default_value_t = 20)]
        n_starts: usize,
        #[arg(long, default_value_t = 0.02)]
        step: f64,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        #[arg(long, default_value_t = 8)]
        max_components: usize,
    },
}

#[derive(Subcommand, Debug)]
enum TfimCmd {
    /// Thermal `⟨x⟩` and `⟨zz⟩` against temperature.
    Correlators {
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Transverse field; repeat for several curves.
        #[arg(long = "g", default_values_t = [0.5, 1.5])]
        g: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        t_min: f64,
        #[arg(long, default_value_t = 5.0)]
        t_max: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
        /// Skip the exact-diagonalization columns.
        #[arg(long)]
        no_ed: bool,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Positivity of the thermal bilinear form of a star term.
    Hessian {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long = "g", default_values_t = [0.25, 0.5, 1.0, 1.5, 2.0])]
        g: Vec<f64>,
        #[arg(long = "beta", default_values_t = [0.0, 0.5, 1.0, 5.0, 50.0])]
        beta: Vec<f64>,
        #[arg(long)]
        no_ed: bool,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
}

#[derive(Subcommand, Debug)]
enum QpdCmd {
    /// Point cloud of the rebit Nash variety, stereographically projected.
    Variety {
        #[arg(long, default_value_t = 2000)]
        points: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Nash states on an entanglement orbit.
    Orbits {
        #[arg(long, allow_hyphen_values = true)]
        chi: f64,
        /// Identify antipodal rebits.
        #[arg(long)]
        quotient: bool,
        #[arg(long, default_value_t = 64)]
        n_starts: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
}

#[derive(Subcommand, Debug)]
enum NashCmd {
    /// Check a state given as JSON: `n_qubits`, `observables`, optional
    /// `blocks`, `state` (numbers or `[re, im]` pairs).
    Check {
        input: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Subcommand, Debug)]
enum HaarCmd {
    Ubiquity {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Defaults to `2^(-n/4)`.
        #[arg(long)]
        epsilon: Option<f64>,
    },
}

#[derive(Subcommand, Debug)]
enum Theorem1Cmd {
    Audit {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [3, 4, 5])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("NASH_THREADS") {
        let n: usize = v.parse().map_err(|_| CliError::config(format!("NASH_THREADS={v} is not a count")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(CliError::config)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let seed = cli.seed;
    let outcome = match cli.command {
        Command::Variety(VarietyCmd::Sample { qubits, real, instances, n_starts, tol, rank_tol }) => {
            experiments::variety_sample(
                seed,
                &experiments::VarietySample { qubits, real, instances, n_starts, tol, rank_tol },
            )
        }
        Command::Variety(VarietyCmd::Trace { instances, n_starts, step, max_steps, max_components }) => {
            experiments::variety_trace(
                seed,
                &experiments::VarietyTrace { instances, n_starts, step, max_steps, max_components },
            )
        }
        Command::Tfim(TfimCmd::Correlators { n, g, t_min, t_max, points, no_ed, tol }) => {
            experiments::tfim_correlators(&experiments::TfimCorrelators { n, g, t_min, t_max, points, ed: !no_ed, tol })
        }
        Command::Tfim(TfimCmd::Hessian { n, g, beta, no_ed, tol }) => {
            experiments::tfim_hessian(&experiments::TfimHessian { n, g, beta, ed: !no_ed, tol })
        }
        Command::Qpd(QpdCmd::Variety { points, tol }) => {
            experiments::qpd_variety(seed, &experiments::QpdVariety { points, tol })
        }
        Command::Qpd(QpdCmd::Orbits { chi, quotient, n_starts, tol }) => {
            experiments::qpd_orbits(seed, &experiments::QpdOrbits { chi, quotient, n_starts, tol })
        }
        Command::Nash(NashCmd::Check { input, tol }) => {
            let text = std::fs::read_to_string(&input).map_err(CliError::config)?;
            experiments::nash_check(&text, &input.display().to_string(), tol)
        }
        Command::Haar(HaarCmd::Ubiquity { n, samples, epsilon }) => {
            experiments::haar_ubiquity(seed, &experiments::HaarUbiquity { n, samples, epsilon })
        }
        Command::Theorem1(Theorem1Cmd::Audit { instances, sizes, tol }) => {
            experiments::theorem1_audit(seed, &experiments::Theorem1Audit { instances, sizes, tol })
        }
        Command::Audit { files } => return run_audit(&files),
    };
    let (config, artifact) = outcome?;
    let text = match &artifact {
        Artifact::Csv(table) => output::render_csv(&config, table)?,
        Artifact::Json(value) => output::render_json(&config, value)?,
    };
    output::emit(cli.output.as_deref(), &text)
}

fn run_audit(files: &[PathBuf]) -> Result<(), CliError> {
    let mut failed = 0;
    for f in files {
        let text = std::fs::read_to_string(f).map_err(CliError::config)?;
        let report = audit::audit_text(&text)?;
        let status = if report.failures.is_empty() { "ok" } else { "FAILED" };
        println!(
            "{}: {} ({}), {} checks, max residual {:.3e}",
            f.display(),
            status,
            report.command,
            report.checks,
            report.max_residual
        );
        for msg in &report.failures {
            println!("  {msg}");
        }
        failed += usize::from(!report.failures.is_empty());
    }
    if failed > 0 {
        return Err(CliError::invariant(format!("{failed} file(s) failed the audit")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nash-states: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
