//! Configuration loading, experiment orchestration and artifact output for
//! the `ezbsde` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod figures;
pub mod output;

pub use commands::{run_solve, run_sweep_cmd, run_verify, Outcome};
pub use config::{load_config, parse_config, ExperimentConfig, Overrides, Resolved};
pub use error::{CliError, CliResult};
pub use figures::{emit_plotdata, run_figures};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "EZBSDE_THREADS";

/// Sizes the global rayon pool from [`THREADS_ENV`] when it is set.
pub fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::invalid(THREADS_ENV, format!("`{v}` is not a thread count")))?;
    // A second initialization (tests in one process) keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
