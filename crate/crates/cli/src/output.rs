//! Artifact writers. Floats are written with 17 significant digits so the
//! files round-trip exactly and compare byte for byte.

use std::fs;
use std::path::Path;

use ezbsde_core::analytics::VerificationReport;
use ezbsde_core::market::ModelParams;
use ezbsde_core::strategy::StrategyResult;
use ezbsde_core::{ConstraintSet, Preferences, TimeGrid};
use serde::Serialize;

use crate::config::Resolved;
use crate::error::{CliError, CliResult};
use crate::experiment::{Solved, SweepRow};

pub fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// `solution.csv`: per step, the fitted `Y` and `Z` at the initial state and
/// regression diagnostics.
pub fn write_solution(path: &Path, solved: &Solved) -> CliResult<()> {
    let mut w = writer(path)?;
    let x0 = solved.x0();
    let k = solved.solution.z0.len();
    let mut header = vec!["step".to_string(), "t".into(), "y_x0".into()];
    header.extend((0..k).map(|i| if k == 1 { "z_x0".to_string() } else { format!("z{}_x0", i + 1) }));
    header.extend(
        ["y_min", "y_max", "y_stderr", "r2_y", "r2_z", "z_truncations"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    for (i, s) in solved.solution.steps.iter().enumerate() {
        let mut rec = vec![i.to_string(), fmt_f(s.t), fmt_f(solved.solution.y_at(i, x0))];
        rec.extend(solved.solution.z_at(i, x0).into_iter().map(fmt_f));
        rec.extend([s.y_min, s.y_max, s.stderr, s.r2_y, s.r2_z].into_iter().map(fmt_f));
        rec.push(s.trunc_hits.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// `strategy.csv`: per step, `pi*` and `c_hat*` at the initial state and
/// their cross-path means along the simulated states.
pub fn write_strategy(path: &Path, solved: &Solved, strategy: &StrategyResult) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record([
        "step",
        "t",
        "pi_x0",
        "c_hat_x0",
        "pi_mean",
        "pi_stderr",
        "c_hat_mean",
        "c_hat_stderr",
    ])?;
    let x0 = solved.x0();
    for i in 0..=solved.solution.grid.steps {
        let rec = [
            solved.solution.grid.time(i),
            solved.pi_star(i, x0)?,
            solved.c_hat_star(i, x0)?,
            strategy.pi_stats.mean[i],
            strategy.pi_stats.stderr[i],
            strategy.c_hat_stats.mean[i],
            strategy.c_hat_stats.stderr[i],
        ];
        let mut out = vec![i.to_string()];
        out.extend(rec.into_iter().map(fmt_f));
        w.write_record(&out)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Step at which strategies are tabulated against the state.
pub fn state_step(solved: &Solved) -> usize {
    solved.solution.grid.steps / 2
}

/// Evaluation states for the by-state table: 41 points between the 1% and
/// 99% quantiles of the simulated state, or `x0 +- 0.1` when the state does
/// not move.
pub fn state_grid(solved: &Solved, step: usize) -> Vec<f64> {
    let x0 = solved.x0()[0];
    let (lo, hi) = if solved.paths.is_degenerate_at(step) {
        (x0 - 0.1, x0 + 0.1)
    } else {
        let k = solved.paths.state_dim();
        let mut xs: Vec<f64> = solved.paths.states_at(step).chunks(k).map(|c| c[0]).collect();
        xs.sort_by(f64::total_cmp);
        let q = |p: f64| xs[((xs.len() - 1) as f64 * p).round() as usize];
        (q(0.01), q(0.99))
    };
    (0..41).map(|i| lo + (hi - lo) * i as f64 / 40.0).collect()
}

/// `strategy_by_state.csv`: `Y`, `pi*` and `c_hat*` along a grid of the
/// first state coordinate at the middle time step, other coordinates at
/// their initial values.
pub fn write_strategy_by_state(path: &Path, solved: &Solved) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(["step", "t", "x", "y", "pi", "c_hat"])?;
    let step = state_step(solved);
    let t = solved.solution.grid.time(step);
    let mut x = solved.x0().to_vec();
    for xv in state_grid(solved, step) {
        x[0] = xv;
        let rec = [
            t,
            xv,
            solved.solution.y_at(step, &x),
            solved.pi_star(step, &x)?,
            solved.c_hat_star(step, &x)?,
        ];
        let mut out = vec![step.to_string()];
        out.extend(rec.into_iter().map(fmt_f));
        w.write_record(&out)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// `paths.csv`: state, wealth and strategy along the first `count` paths.
pub fn write_paths(path: &Path, solved: &Solved, strategy: &StrategyResult, count: usize) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(["path", "step", "t", "x", "wealth", "pi", "c_hat"])?;
    let grid = solved.solution.grid;
    for j in 0..count.min(solved.paths.len()) {
        for i in 0..=grid.steps {
            let rec = [
                grid.time(i),
                solved.paths.state(j, i)[0],
                strategy.wealth.wealth(j, i),
                strategy.table.pi(j, i)[0],
                strategy.table.c_hat(j, i),
            ];
            let mut out = vec![j.to_string(), i.to_string()];
            out.extend(rec.into_iter().map(fmt_f));
            w.write_record(&out)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(["param", "value", "pi_star_0", "c_hat_star_0", "Y0", "V0"])?;
    for r in rows {
        let mut out = vec![r.param.to_string()];
        out.extend([r.value, r.pi_star_0, r.c_hat_star_0, r.y0, r.v0].into_iter().map(fmt_f));
        w.write_record(&out)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct RunInfo {
    pub model: ModelParams,
    pub x0: Vec<f64>,
    pub preferences: Preferences,
    pub pi_set: ConstraintSet,
    pub c_hat_set: Option<ConstraintSet>,
    pub grid: TimeGrid,
    pub paths: usize,
    pub seed: u64,
    pub degree: usize,
    pub theta: f64,
    pub z_cap: f64,
}

impl RunInfo {
    pub fn new(res: &Resolved, solved: &Solved) -> Self {
        RunInfo {
            model: res.model.params().clone(),
            x0: res.model.initial_state().to_vec(),
            preferences: res.prefs,
            pi_set: res.set_pi.clone(),
            c_hat_set: res.set_c.clone(),
            grid: res.grid,
            paths: res.paths,
            seed: res.seed,
            degree: res.solver.basis.degree(),
            theta: res.solver.theta,
            z_cap: solved.solution.z_cap,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub run: RunInfo,
    pub y0: f64,
    pub y0_stderr: f64,
    pub z0: Vec<f64>,
    pub y_upper: f64,
    pub pi_star_0: f64,
    pub c_hat_star_0: f64,
    pub wealth: f64,
    pub v0_closed_form: f64,
    pub v0_simulated: f64,
    pub v0_stderr: f64,
    /// `(V0 simulated - V0 closed form) / stderr`.
    pub v0_gap_in_stderr: f64,
    pub z_truncations: usize,
    pub bounds_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutput<'a> {
    pub run: &'a RunInfo,
    pub report: &'a VerificationReport,
    pub passed: bool,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Human-readable verification table.
pub fn report_table(report: &VerificationReport) -> String {
    let mut s = String::new();
    let line = |s: &mut String, name: &str, holds: bool, lhs: f64, rhs: f64| {
        s.push_str(&format!(
            "  {:<44} {:<5} lhs {:>14.6e}  rhs {:>14.6e}\n",
            name,
            if holds { "ok" } else { "FAIL" },
            lhs,
            rhs
        ));
    };
    s.push_str(&format!(
        "C0 = {:.6e}  r_min = {:.6e}  C_p = {:.6e}\nC1 = {:.6e}  C1 T = {:.6e}  C2 rate = {:.6e}\n",
        report.c0, report.r_min, report.c_p, report.c1, report.y_upper, report.c2.rate
    ));
    s.push_str("conditions:\n");
    let c = &report.lfo_condition;
    line(&mut s, &c.name, c.holds, c.lhs, c.rhs);
    for c in report.prop_conditions.iter().chain(report.feller.iter()) {
        line(&mut s, &c.name, c.holds, c.lhs, c.rhs);
    }
    if let Some(l) = &report.lyapunov {
        s.push_str(&format!(
            "Lyapunov scan of {}: sup {:.6e} (refined {:.6e}) at x = {:.6e}, interior: {}\n",
            l.test_function, l.sup, l.sup_refined, l.argmax, l.interior
        ));
    }
    if let Some(b) = &report.y_bounds {
        s.push_str(&format!(
            "Y <= C1 T: {} (worst excess {:.3e})\n",
            if b.upper_ok { "ok" } else { "FAIL" },
            b.worst_upper
        ));
        if b.lower_checked {
            s.push_str(&format!(
                "Y >= lower bound: {} (worst margin {:.3} stderr)\n",
                if b.lower_ok { "ok" } else { "FAIL" },
                b.worst_lower_in_se
            ));
        }
    }
    for n in &report.notes {
        s.push_str(&format!("note: {n}\n"));
    }
    s
}
