//! Solve, verify and sweep pipelines on top of the core crate.

use ezbsde_core::analytics::{check_y_bounds, verification_report, VerificationReport};
use ezbsde_core::paths::{simulate_state, PathSet};
use ezbsde_core::solver::{solve_bsde, BsdeSolution};
use ezbsde_core::strategy::{closed_form_utility, optimal_portfolio, run_optimal, StrategyResult, UtilityConfig};
use ezbsde_core::{ConstraintSet, GeneratorContext, Preferences};

use crate::config::Resolved;
use crate::error::{CliError, CliResult};

/// A solved value BSDE together with the inputs that produced it.
pub struct Solved {
    pub ctx: GeneratorContext,
    pub paths: PathSet,
    pub solution: BsdeSolution,
}

impl Solved {
    /// `pi*` (first asset) at a grid step and state.
    pub fn pi_star(&self, step: usize, x: &[f64]) -> CliResult<f64> {
        pi_star(&self.ctx, &self.solution, step, x)
    }

    pub fn c_hat_star(&self, step: usize, x: &[f64]) -> CliResult<f64> {
        c_hat_star(&self.ctx, &self.solution, step, x)
    }

    pub fn x0(&self) -> &[f64] {
        self.ctx.model.initial_state()
    }

    pub fn report(&self) -> CliResult<VerificationReport> {
        let mut report = verification_report(&self.ctx)?;
        report.y_bounds = Some(check_y_bounds(&self.solution, &self.ctx));
        Ok(report)
    }

    pub fn strategy(&self, wealth: f64) -> CliResult<StrategyResult> {
        Ok(run_optimal(
            &self.ctx,
            &self.paths,
            &self.solution,
            wealth,
            &UtilityConfig::default(),
        )?)
    }
}

pub fn pi_star(ctx: &GeneratorContext, solution: &BsdeSolution, step: usize, x: &[f64]) -> CliResult<f64> {
    let z = solution.z_at(step, x);
    let t = solution.grid.time(step);
    Ok(optimal_portfolio(ctx, t, x, &z)?.1[0])
}

pub fn c_hat_star(ctx: &GeneratorContext, solution: &BsdeSolution, step: usize, x: &[f64]) -> CliResult<f64> {
    Ok(ctx.optimal_consumption(solution.y_at(step, x))?)
}

pub fn simulate(res: &Resolved) -> CliResult<PathSet> {
    Ok(simulate_state(&res.model, res.grid, res.paths, res.seed)?)
}

pub fn solve(res: &Resolved) -> CliResult<Solved> {
    let ctx = res.context()?;
    let paths = simulate(res)?;
    let solution = solve_bsde(&ctx, &paths, &res.solver)?;
    Ok(Solved {
        ctx,
        paths,
        solution,
    })
}

/// Parameters that `sweep` can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Gamma,
    Psi,
    /// Upper end of an interval portfolio constraint.
    PiUpper,
    /// Lower end of an interval portfolio constraint.
    PiLower,
}

impl SweepParam {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "preferences.gamma" | "gamma" => Ok(SweepParam::Gamma),
            "preferences.psi" | "psi" => Ok(SweepParam::Psi),
            "constraints.pi.hi" => Ok(SweepParam::PiUpper),
            "constraints.pi.lo" => Ok(SweepParam::PiLower),
            _ => Err(CliError::invalid(
                "--param",
                format!(
                    "unknown sweep parameter `{s}`; expected preferences.gamma, preferences.psi, \
                     constraints.pi.lo or constraints.pi.hi"
                ),
            )),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Gamma => "preferences.gamma",
            SweepParam::Psi => "preferences.psi",
            SweepParam::PiUpper => "constraints.pi.hi",
            SweepParam::PiLower => "constraints.pi.lo",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: &'static str,
    pub value: f64,
    pub pi_star_0: f64,
    pub c_hat_star_0: f64,
    pub y0: f64,
    pub v0: f64,
}

fn with_param(res: &Resolved, param: SweepParam, v: f64) -> CliResult<GeneratorContext> {
    let mut prefs = res.prefs;
    let mut set_pi = res.set_pi.clone();
    let key = param.name();
    match param {
        SweepParam::Gamma => {
            prefs = Preferences::new(prefs.delta, v, prefs.psi).map_err(|e| CliError::invalid(key, e.to_string()))?
        }
        SweepParam::Psi => {
            prefs = Preferences::new(prefs.delta, prefs.gamma, v).map_err(|e| CliError::invalid(key, e.to_string()))?
        }
        SweepParam::PiUpper | SweepParam::PiLower => {
            let ConstraintSet::Interval { lo, hi } = set_pi else {
                return Err(CliError::invalid(key, "the portfolio constraint is not an interval"));
            };
            let (lo, hi) = if param == SweepParam::PiUpper { (lo, v) } else { (v, hi) };
            set_pi = ConstraintSet::interval(lo, hi).map_err(|e| CliError::invalid(key, e.to_string()))?;
        }
    }
    Ok(GeneratorContext::new(
        res.model.clone(),
        prefs,
        set_pi,
        res.set_c.clone(),
        res.grid.horizon,
    )?)
}

/// Solves once per value on a shared path set and reports the time-0 optimum.
pub fn run_sweep(res: &Resolved, param: SweepParam, values: &[f64]) -> CliResult<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(CliError::invalid("--values", "empty value list"));
    }
    let paths = simulate(res)?;
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        if !v.is_finite() {
            return Err(CliError::invalid("--values", format!("{v} is not finite")));
        }
        let ctx = with_param(res, param, v)?;
        let solution = solve_bsde(&ctx, &paths, &res.solver)?;
        let x0 = ctx.model.initial_state();
        rows.push(SweepRow {
            param: param.name(),
            value: v,
            pi_star_0: pi_star(&ctx, &solution, 0, x0)?,
            c_hat_star_0: c_hat_star(&ctx, &solution, 0, x0)?,
            y0: solution.y0,
            v0: closed_form_utility(res.wealth, ctx.prefs.gamma, solution.y0),
        });
    }
    Ok(rows)
}

/// Parses `v1,v2,...`.
pub fn parse_values(s: &str) -> CliResult<Vec<f64>> {
    let values: Vec<f64> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| CliError::invalid("--values", format!("`{t}` is not a number")))
        })
        .collect::<CliResult<_>>()?;
    if values.is_empty() {
        return Err(CliError::invalid("--values", "empty value list"));
    }
    Ok(values)
}
