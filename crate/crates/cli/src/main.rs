use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ezbsde::experiment::SweepParam;
use ezbsde::{init_threads, load_config, CliResult, Outcome, Overrides};

/// Constrained Epstein-Zin consumption-investment via regression Monte Carlo.
#[derive(Parser)]
#[command(name = "ezbsde", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte-Carlo paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Number of time steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            paths: self.paths,
            steps: self.steps,
            out: self.out.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the value BSDE and write solution, strategy, summary and verification files.
    Solve(Common),
    /// Solve once per value of one parameter and write sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// preferences.gamma, preferences.psi, constraints.pi.lo or constraints.pi.hi
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Check the model conditions and the a priori bounds on the solution.
    Verify(Common),
    /// Convert the artifacts of `figures` into fig*.dat files.
    Plotdata {
        dir: PathBuf,
    },
    /// Run every experiment behind the figures and write the plot data.
    Figures {
        #[arg(long, default_value = "figures")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
    },
}

fn run(cli: Cli) -> CliResult<Outcome> {
    init_threads()?;
    let started = Instant::now();
    let outcome = match cli.command {
        Command::Solve(c) => {
            let res = load_config(&c.config)?.resolve(&c.overrides())?;
            let (outcome, s) = ezbsde::run_solve(&res)?;
            println!(
                "Y0 = {:.10}  (stderr {:.2e})\npi*(0) = {:.10}  c_hat*(0) = {:.10}",
                s.y0, s.y0_stderr, s.pi_star_0, s.c_hat_star_0
            );
            println!(
                "V0 closed form = {:.10e}  simulated = {:.10e} +- {:.2e}",
                s.v0_closed_form, s.v0_simulated, s.v0_stderr
            );
            println!("artifacts in {}", res.out.display());
            outcome
        }
        Command::Sweep { common, param, values } => {
            let res = load_config(&common.config)?.resolve(&common.overrides())?;
            let param = SweepParam::parse(&param)?;
            let values = ezbsde::experiment::parse_values(&values)?;
            let path = ezbsde::run_sweep_cmd(&res, param, &values)?;
            println!("wrote {}", path.display());
            Outcome::Passed
        }
        Command::Verify(c) => {
            let res = load_config(&c.config)?.resolve(&c.overrides())?;
            let (outcome, table) = ezbsde::run_verify(&res)?;
            print!("{table}");
            outcome
        }
        Command::Plotdata { dir } => {
            for p in ezbsde::emit_plotdata(&dir)? {
                println!("wrote {}", p.display());
            }
            Outcome::Passed
        }
        Command::Figures { out, seed, paths, steps } => {
            let ov = Overrides {
                seed,
                paths,
                steps,
                out: None,
            };
            for p in ezbsde::run_figures(&out, &ov)? {
                println!("wrote {}", p.display());
            }
            Outcome::Passed
        }
    };
    eprintln!("elapsed {:.2}s", started.elapsed().as_secs_f64());
    Ok(outcome)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::BoundsViolated) => {
            eprintln!("verification failed: the solution violates the a priori bounds");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
