mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wineland_core::Error;

/// Finite-statistics significance tests for spin-squeezing claims.
#[derive(Debug, Parser)]
#[command(name = "wineland", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Significance level the p-value bound is compared against.
    #[arg(long, global = true, default_value_t = 0.05)]
    pub p_target: f64,

    /// Seed for every randomized command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Monte Carlo trials per oracle estimate.
    #[arg(long, global = true, default_value_t = 100_000)]
    pub trials: u64,

    /// Points per axis of the tangent-point grid.
    #[arg(long, global = true, default_value_t = 101)]
    pub grid: usize,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Worker threads for grids and trials (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Also write the output to this file.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StateKind {
    /// Coherent spin state along +z, measured along z and x.
    Css,
    /// One-axis-twisted state mixed with the polarized pair along its
    /// squeezed axis.
    Mixture,
}

#[derive(Debug, Args)]
pub struct StateArgs {
    #[arg(long, short = 'n')]
    pub n_spins: u32,

    #[arg(long, value_enum, default_value_t = StateKind::Css)]
    pub state: StateKind,

    /// Twisting angle in radians for the mixture state.
    #[arg(long, default_value_t = 0.3)]
    pub twist: f64,

    /// Weight of the twisted state in the mixture (default: largest
    /// non-squeezed weight).
    #[arg(long)]
    pub r: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Upper bounds on the p-value for raw data (CSV) or a summary (JSON).
    Analyze {
        input: PathBuf,
        /// Number of spins; required for CSV input.
        #[arg(long, short = 'n')]
        n_spins: Option<u32>,
        /// Reject outcomes that are not of the form 2k/N - 1.
        #[arg(long)]
        lattice_strict: bool,
    },
    /// Measurements needed by each bound to reach the target significance.
    RequiredM {
        /// Summary statistics JSON.
        summary: PathBuf,
        /// Value of the linearized criterion for the McDiarmid and block
        /// bounds (default: computed from the summary).
        #[arg(long, allow_hyphen_values = true)]
        gamma: Option<f64>,
        /// Add the optimized requirement over 21 values of mu_perp in
        /// [-0.1, 0.1].
        #[arg(long)]
        mu_perp_sweep: bool,
    },
    /// Lower bound on any test's p-value from the non-squeezed mixture.
    LowerBound {
        #[arg(long)]
        xi2: f64,
        #[arg(long)]
        q_par_sq: f64,
        #[arg(long, short = 'n')]
        n_spins: u32,
    },
    /// Compare Monte Carlo tail frequencies of a null state with the bounds.
    Validate {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, value_delimiter = ',', default_value = "20,200,2000")]
        m_values: Vec<u64>,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "-0.01,-0.03,-0.1,-0.3,-0.6"
        )]
        gammas: Vec<f64>,
        /// Tangent point (default: the state's exact mean outcomes).
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
    },
    /// Experiment table with sufficient and necessary measurement counts.
    Report {
        /// Catalog JSON (default: the builtin published experiments).
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Print the measurement deficit table instead.
        #[arg(long)]
        deficit: bool,
    },
    /// Write a simulated batch in the raw-data CSV format.
    Simulate {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long)]
        rounds: usize,
    },
}

/// Outcome of a command that ran to completion.
pub enum Verdict {
    Ok,
    NotRejected,
    Infeasible,
    OracleViolation,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 10,
        Error::Parse(_) => 11,
        Error::Range { .. }
        | Error::Pairing { .. }
        | Error::Lattice { .. }
        | Error::Validation(_)
        | Error::MissingField { .. }
        | Error::TooFewSamples { .. }
        | Error::EmptyBatch
        | Error::Blocking(_)
        | Error::Size { .. }
        | Error::NullViolation(_) => 12,
        Error::Infeasible => 3,
        Error::Division(_) | Error::Domain(_) => 13,
    }
}

fn run(cli: Cli) -> Result<Verdict, Error> {
    let common = &cli.common;
    if !(common.p_target > 0.0 && common.p_target < 1.0) {
        return Err(Error::Validation(format!(
            "--p-target must lie in (0, 1), got {}",
            common.p_target
        )));
    }
    if common.trials == 0 {
        return Err(Error::Validation("--trials must be at least 1".into()));
    }
    if let Some(w) = common.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Analyze {
            input,
            n_spins,
            lattice_strict,
        } => commands::analyze(common, &input, n_spins, lattice_strict),
        Command::RequiredM {
            summary,
            gamma,
            mu_perp_sweep,
        } => commands::required_m(common, &summary, gamma, mu_perp_sweep),
        Command::LowerBound {
            xi2,
            q_par_sq,
            n_spins,
        } => commands::lower_bound(common, xi2, q_par_sq, n_spins),
        Command::Validate {
            state,
            m_values,
            gammas,
            alpha,
            beta,
        } => commands::validate(common, &state, &m_values, &gammas, alpha.zip(beta)),
        Command::Report { catalog, deficit } => commands::report(common, catalog.as_deref(), deficit),
        Command::Simulate { state, rounds } => commands::simulate(common, &state, rounds),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 14 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Verdict::Ok) => ExitCode::SUCCESS,
        Ok(Verdict::NotRejected) => ExitCode::from(2),
        Ok(Verdict::Infeasible) => ExitCode::from(3),
        Ok(Verdict::OracleViolation) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
