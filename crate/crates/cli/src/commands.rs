//! The `solve`, `verify` and `sweep` commands.

use std::path::PathBuf;

use crate::config::Resolved;
use crate::error::CliResult;
use crate::experiment::{run_sweep, solve, SweepParam};
use crate::output::{self, RunInfo, Summary, VerifyOutput};

/// Whether the a priori bounds held on the solver output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    BoundsViolated,
}

/// Solves, evaluates the optimal strategy and writes `solution.csv`,
/// `strategy.csv`, `strategy_by_state.csv`, `summary.json`, `verify.json`
/// and optionally `paths.csv` into `res.out`.
pub fn run_solve(res: &Resolved) -> CliResult<(Outcome, Summary)> {
    let dir = &res.out;
    output::create_dir(dir)?;
    let solved = solve(res)?;
    let strategy = solved.strategy(res.wealth)?;
    let report = solved.report()?;
    let passed = report.y_bounds.as_ref().is_some_and(|b| b.passed());
    let info = RunInfo::new(res, &solved);

    output::write_solution(&dir.join("solution.csv"), &solved)?;
    output::write_strategy(&dir.join("strategy.csv"), &solved, &strategy)?;
    output::write_strategy_by_state(&dir.join("strategy_by_state.csv"), &solved)?;
    if res.write_paths > 0 {
        output::write_paths(&dir.join("paths.csv"), &solved, &strategy, res.write_paths)?;
    }
    let x0 = solved.x0().to_vec();
    let se = strategy.stderr();
    let summary = Summary {
        run: info.clone(),
        y0: solved.solution.y0,
        y0_stderr: solved.solution.y0_stderr,
        z0: solved.solution.z0.clone(),
        y_upper: solved.solution.y_upper,
        pi_star_0: solved.pi_star(0, &x0)?,
        c_hat_star_0: solved.c_hat_star(0, &x0)?,
        wealth: res.wealth,
        v0_closed_form: strategy.v0_closed_form,
        v0_simulated: strategy.v0_simulated(),
        v0_stderr: se,
        v0_gap_in_stderr: (strategy.v0_simulated() - strategy.v0_closed_form) / se,
        z_truncations: solved.solution.steps.iter().map(|s| s.trunc_hits).sum(),
        bounds_ok: passed,
    };
    output::write_json(&dir.join("summary.json"), &summary)?;
    output::write_json(
        &dir.join("verify.json"),
        &VerifyOutput {
            run: &info,
            report: &report,
            passed,
        },
    )?;
    let outcome = if passed { Outcome::Passed } else { Outcome::BoundsViolated };
    Ok((outcome, summary))
}

/// Solves and writes only `verify.json`; returns the printable table.
pub fn run_verify(res: &Resolved) -> CliResult<(Outcome, String)> {
    output::create_dir(&res.out)?;
    let solved = solve(res)?;
    let report = solved.report()?;
    let passed = report.y_bounds.as_ref().is_some_and(|b| b.passed());
    let info = RunInfo::new(res, &solved);
    output::write_json(
        &res.out.join("verify.json"),
        &VerifyOutput {
            run: &info,
            report: &report,
            passed,
        },
    )?;
    let outcome = if passed { Outcome::Passed } else { Outcome::BoundsViolated };
    Ok((outcome, output::report_table(&report)))
}

/// Runs a sweep and writes `sweep.csv` into `res.out`.
pub fn run_sweep_cmd(res: &Resolved, param: SweepParam, values: &[f64]) -> CliResult<PathBuf> {
    output::create_dir(&res.out)?;
    let rows = run_sweep(res, param, values)?;
    let path = res.out.join("sweep.csv");
    output::write_sweep(&path, &rows)?;
    Ok(path)
}
