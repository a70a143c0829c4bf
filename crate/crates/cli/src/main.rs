use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sensorsched_cli::commands::{self, Overrides};
use sensorsched_cli::{CliError, Outcome};

#[derive(Parser)]
#[command(name = "sensorsched", version, about = "Sparse sensor precision scheduling under a covariance bound")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the nominal trajectory and prior statistics.
    Simulate(Common),
    /// Solve the reweighted precision program for each s_max case.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Chain this many consecutive horizons.
        #[arg(long, default_value_t = 1)]
        horizons: usize,
    },
    /// Monte Carlo check of the optimized schedules.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Validate this precision grid CSV instead of solving.
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Compare several s_max values.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// TOML scenario file; the reference scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated precision bounds, e.g. 450,750,1200.
    #[arg(long = "s-max", value_delimiter = ',')]
    s_max: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long = "gap-tol")]
    gap_tol: Option<f64>,
    #[arg(long = "feas-tol")]
    feas_tol: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            s_max: self.s_max.clone(),
            trials: self.trials,
            gap_tol: self.gap_tol,
            feas_tol: self.feas_tol,
        }
    }
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = commands::load_config(c.config.as_deref(), &c.overrides())?;
            let summary = commands::simulate(&cfg, &c.out)?;
            println!(
                "simulated {} samples to t = {:.4}; final prior trace {:.6e}",
                summary.samples, summary.t_end, summary.final_prior_trace
            );
            Ok(Outcome::Success)
        }
        Command::Optimize { common: c, horizons } => {
            let cfg = commands::load_config(c.config.as_deref(), &c.overrides())?;
            let (report, outcome) = commands::optimize(&cfg, &c.out, horizons)?;
            println!("gamma = {:.6e} (prior trace {:.6e})", report.gamma, report.prior_trace);
            for case in &report.cases {
                println!(
                    "s_max {:>8} horizon {}: {:?}, objective {:.6e}, {} active",
                    case.label, case.horizon, case.status, case.objective, case.active_count
                );
            }
            Ok(outcome)
        }
        Command::Validate { common: c, schedule } => {
            let cfg = commands::load_config(c.config.as_deref(), &c.overrides())?;
            let (report, outcome) = commands::validate(&cfg, &c.out, schedule.as_deref())?;
            for case in &report.cases {
                match &case.monte_carlo {
                    Some(m) => println!(
                        "{}: empirical {:.6e} ± {:.2e}, analytic {:.6e}, gamma {:.6e}",
                        case.label, m.empirical_trace, m.standard_error, m.analytic_trace, case.gamma
                    ),
                    None => println!("{}: {:?}, not simulated", case.label, case.status),
                }
            }
            Ok(outcome)
        }
        Command::Sweep(c) => {
            let cfg = commands::load_config(c.config.as_deref(), &c.overrides())?;
            let (report, outcome) = commands::sweep(&cfg, &c.out)?;
            for r in &report.rows {
                println!(
                    "s_max {:>8}: {:?}, {} active, objective {:.6e}",
                    r.s_max, r.status, r.active_count, r.first_objective
                );
            }
            Ok(outcome)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match run(cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            e.outcome()
        }
    };
    ExitCode::from(outcome.code() as u8)
}
