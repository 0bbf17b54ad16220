//! Optimal strategies read off a solved value BSDE, and Monte-Carlo
//! evaluation of the Epstein-Zin utility of proportional strategies.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintSet;
use crate::exec;
use crate::generator::{portfolio_target, GeneratorContext};
use crate::market::MarketModel;
use crate::paths::{simulate_wealth, PathSet, StrategyTable, WealthPaths};
use crate::prefs::Preferences;
use crate::regression::{mean_and_stderr, Basis, BasisSpec, Regression};
use crate::solver::BsdeSolution;
use crate::{Error, Result};

pub use crate::generator::optimal_consumption;

/// `(p*, pi*)`: the nearest point of the image constraint set to
/// `(1/gamma) sigma' Sigma^{-1} (mu + sigma rho z')` and its preimage.
pub fn optimal_portfolio(
    ctx: &GeneratorContext,
    t: f64,
    x: &[f64],
    z: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let local = ctx.model.local(t, x)?;
    let u = portfolio_target(&local, ctx.prefs.gamma, z)?;
    let proj = ctx.set_pi.project_image(&local.coeffs.sigma, &u)?;
    Ok((proj.p, proj.pi))
}

/// `V = W^{1-gamma}/(1-gamma) e^Y`.
pub fn closed_form_utility(omega: f64, gamma: f64, y: f64) -> f64 {
    omega.powf(1.0 - gamma) / (1.0 - gamma) * y.exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityConfig {
    /// Basis over `(x, ln W)`.
    pub basis: BasisSpec,
    /// Regressions per step; each one refines the left-end value entering
    /// the step integral.
    pub passes: usize,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        UtilityConfig {
            basis: BasisSpec::Tensor(2),
            passes: 2,
        }
    }
}

/// Monte-Carlo estimate of `V_0` with the pathwise samples behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityEstimate {
    pub v0: f64,
    pub stderr: f64,
    pub samples: Vec<f64>,
}

impl UtilityEstimate {
    /// Mean and standard error of the pathwise difference `self - other`,
    /// valid when both were computed on the same paths.
    pub fn paired_difference(&self, other: &UtilityEstimate) -> (f64, f64) {
        let d: Vec<f64> = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a - b)
            .collect();
        mean_and_stderr(&d)
    }
}

/// The aggregator in scaled form: `f(c_hat W, V) = W^{1-gamma} F(c_hat, phi)`
/// with `phi = (1-gamma) V W^{gamma-1} > 0`.
fn scaled_aggregator(prefs: &Preferences, c_hat: f64, phi: f64) -> f64 {
    let q = 1.0 - 1.0 / prefs.psi;
    let phi = phi.max(f64::MIN_POSITIVE);
    prefs.delta * c_hat.powf(q) / q * phi.powf(1.0 - 1.0 / prefs.theta)
        - prefs.delta * prefs.theta * phi / (1.0 - prefs.gamma)
}

/// Three-point Gauss-Legendre rule on `[0, 1]`.
const GAUSS3: [(f64, f64); 3] = [
    (0.5 - 0.387_298_334_620_741_7, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.5 + 0.387_298_334_620_741_7, 5.0 / 18.0),
];

/// `int_{t_i}^{t_{i+1}} f(c_hat W_s, V_s) ds` along one path. `ln W` is a
/// Brownian bridge between the grid values with variance rate `p2`, so
/// `E[W_s^{1-gamma}]` given both ends is available in closed form; `phi` is
/// interpolated geometrically.
#[allow(clippy::too_many_arguments)]
fn step_integral(
    prefs: &Preferences,
    dt: f64,
    c_hat: f64,
    p2: f64,
    lw0: f64,
    lw1: f64,
    phi0: f64,
    phi1: f64,
) -> f64 {
    let e = 1.0 - prefs.gamma;
    let (l0, l1) = (phi0.max(f64::MIN_POSITIVE).ln(), phi1.max(f64::MIN_POSITIVE).ln());
    GAUSS3
        .iter()
        .map(|&(tau, w)| {
            let lw = (1.0 - tau) * lw0 + tau * lw1;
            let bridge = 0.5 * e * e * p2 * dt * tau * (1.0 - tau);
            let phi = ((1.0 - tau) * l0 + tau * l1).exp();
            w * (e * lw + bridge).exp() * scaled_aggregator(prefs, c_hat, phi)
        })
        .sum::<f64>()
        * dt
}

/// Epstein-Zin utility of a proportional strategy.
///
/// Pathwise backward recursion `S_N = U(W_T)`,
/// `S_i = S_{i+1} + int_{t_i}^{t_{i+1}} f(c_hat_i W_s, V_s) ds`. The
/// continuation values `V_i` entering the integral come from regressing on
/// `(X_i, ln W_i)`. Proportional strategies make `V W^{gamma-1}` a function
/// of the state alone, so the regression target is scaled by `W^{gamma-1}`.
pub fn evaluate_utility(
    model: &MarketModel,
    prefs: &Preferences,
    paths: &PathSet,
    table: &StrategyTable,
    wealth: &WealthPaths,
    cfg: &UtilityConfig,
) -> Result<UtilityEstimate> {
    let grid = paths.grid();
    let m = paths.len();
    let k = paths.state_dim();
    let n = grid.steps;
    if wealth.steps() != n || wealth.paths() != m || table.paths() != m || table.steps() != n {
        return Err(Error::GridMismatch("wealth or strategy does not match the paths"));
    }
    let dt = grid.dt();
    let g = prefs.gamma;
    for j in 0..m {
        for i in 0..=n {
            let w = wealth.log_wealth(j, i);
            if !w.is_finite() {
                return Err(Error::NonPositiveWealth { step: i, path: j });
            }
        }
    }
    let mut s: Vec<f64> = (0..m)
        .map(|j| ((1.0 - g) * wealth.log_wealth(j, n)).exp() / (1.0 - g))
        .collect();
    // Scaled continuation value at the right end of the current step.
    let mut phi_next = vec![1.0; m];

    for i in (0..n).rev() {
        let dim = k + 1;
        let mut xs = Vec::with_capacity(m * dim);
        for j in 0..m {
            xs.extend_from_slice(paths.state(j, i));
            xs.push(wealth.log_wealth(j, i));
        }
        let t = grid.time(i);
        let p2: Vec<f64> = exec::map_indexed(m, |j| {
            let c = model.coefficients(t, paths.state(j, i));
            let p = c.sigma.tr_mat_vec(table.pi(j, i));
            p.iter().map(|v| v * v).sum()
        });
        let integral = |j: usize, phi0: f64| {
            step_integral(
                prefs,
                dt,
                table.c_hat(j, i),
                p2[j],
                wealth.log_wealth(j, i),
                wealth.log_wealth(j, i + 1),
                phi0,
                phi_next[j],
            )
        };
        let basis = Basis::fit(cfg.basis, dim, &xs)?;
        let reg = Regression::new(basis, &xs, i)?;
        // (1-gamma) W^{gamma-1}
        let scale = |j: usize| (1.0 - g) * ((g - 1.0) * wealth.log_wealth(j, i)).exp();
        let mut phi = phi_next.clone();
        let mut step = exec::map_indexed(m, |j| integral(j, phi[j]));
        for _ in 0..cfg.passes.max(1) {
            let target: Vec<f64> = (0..m).map(|j| (s[j] + step[j]) * scale(j)).collect();
            let coef = reg.fit(&target)?;
            phi = (0..m).map(|j| reg.fitted(&coef, j).max(f64::MIN_POSITIVE)).collect();
            step = exec::map_indexed(m, |j| integral(j, phi[j]));
        }
        for j in 0..m {
            s[j] += step[j];
        }
        phi_next = phi;
    }
    let (v0, stderr) = mean_and_stderr(&s);
    Ok(UtilityEstimate {
        v0,
        stderr,
        samples: s,
    })
}

/// Per-step cross-path mean and standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StrategyResult {
    pub table: StrategyTable,
    pub wealth: WealthPaths,
    pub omega: f64,
    pub y0: f64,
    pub v0_closed_form: f64,
    pub utility: UtilityEstimate,
    /// Portfolio fraction of the first asset.
    pub pi_stats: StepStats,
    pub c_hat_stats: StepStats,
}

impl StrategyResult {
    pub fn v0_simulated(&self) -> f64 {
        self.utility.v0
    }

    pub fn stderr(&self) -> f64 {
        self.utility.stderr
    }
}

fn step_stats(steps: usize, paths: usize, value: impl Fn(usize, usize) -> f64) -> StepStats {
    let mut mean = Vec::with_capacity(steps + 1);
    let mut stderr = Vec::with_capacity(steps + 1);
    let mut buf = vec![0.0; paths];
    for i in 0..=steps {
        for (j, b) in buf.iter_mut().enumerate() {
            *b = value(j, i);
        }
        let (m, s) = mean_and_stderr(&buf);
        mean.push(m);
        stderr.push(s);
    }
    StepStats { mean, stderr }
}

/// Tabulates `c_hat*` and `pi*` from the solution along every path.
pub fn optimal_table(ctx: &GeneratorContext, paths: &PathSet, solution: &BsdeSolution) -> Result<StrategyTable> {
    if solution.grid != paths.grid() {
        return Err(Error::GridMismatch("solution was computed on another grid"));
    }
    let n = paths.asset_dim();
    let table = StrategyTable::from_fn(paths, |i, t, x| {
        let y = solution.y_at(i, x);
        let z = solution.z_at(i, x);
        let c = ctx.optimal_consumption(y).unwrap_or(f64::NAN);
        let pi = optimal_portfolio(ctx, t, x, &z)
            .map(|r| r.1)
            .unwrap_or_else(|_| vec![f64::NAN; n]);
        (c, pi)
    })?;
    for j in 0..paths.len() {
        for i in 0..=paths.grid().steps {
            if table.c_hat(j, i).is_nan() || table.pi(j, i).iter().any(|v| v.is_nan()) {
                return Err(Error::Singular("volatility along a simulated path"));
            }
        }
    }
    Ok(table)
}

/// Evaluates a tabulated strategy: simulates wealth and estimates `V_0`.
pub fn evaluate_table(
    ctx: &GeneratorContext,
    paths: &PathSet,
    table: &StrategyTable,
    omega: f64,
    cfg: &UtilityConfig,
) -> Result<(WealthPaths, UtilityEstimate)> {
    let wealth = simulate_wealth(&ctx.model, paths, table, omega)?;
    let est = evaluate_utility(&ctx.model, &ctx.prefs, paths, table, &wealth, cfg)?;
    Ok((wealth, est))
}

/// The optimal strategy along the paths, its wealth, and both the simulated
/// and the closed-form optimal utility.
pub fn run_optimal(
    ctx: &GeneratorContext,
    paths: &PathSet,
    solution: &BsdeSolution,
    omega: f64,
    cfg: &UtilityConfig,
) -> Result<StrategyResult> {
    let table = optimal_table(ctx, paths, solution)?;
    let (wealth, utility) = evaluate_table(ctx, paths, &table, omega, cfg)?;
    let steps = paths.grid().steps;
    let pi_stats = step_stats(steps, paths.len(), |j, i| table.pi(j, i)[0]);
    let c_hat_stats = step_stats(steps, paths.len(), |j, i| table.c_hat(j, i));
    Ok(StrategyResult {
        v0_closed_form: closed_form_utility(omega, ctx.prefs.gamma, solution.y0),
        y0: solution.y0,
        omega,
        table,
        wealth,
        utility,
        pi_stats,
        c_hat_stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Perturbation {
    /// `pi -> proj(pi + eps)` on every asset.
    ShiftPi(f64),
    /// `c_hat -> clamp(c_hat (1 + eps))`.
    ScaleC(f64),
}

/// Eight perturbations around the optimum used by the dominance check.
pub const CANNED_PERTURBATIONS: [Perturbation; 8] = [
    Perturbation::ShiftPi(0.1),
    Perturbation::ShiftPi(-0.1),
    Perturbation::ShiftPi(0.05),
    Perturbation::ShiftPi(-0.05),
    Perturbation::ScaleC(0.1),
    Perturbation::ScaleC(-0.1),
    Perturbation::ScaleC(0.25),
    Perturbation::ScaleC(-0.25),
];

/// A perturbed copy of `base`, projected back onto the constraint sets.
pub fn perturb_strategy(
    base: &StrategyTable,
    eps: Perturbation,
    set_pi: &ConstraintSet,
    set_c: Option<&ConstraintSet>,
) -> Result<StrategyTable> {
    let mut out = base.clone();
    let n = base.asset_dim();
    match eps {
        Perturbation::ShiftPi(e) => {
            if e != 0.0 {
                for chunk in out.pi_mut().chunks_mut(n) {
                    let moved: Vec<f64> = chunk.iter().map(|v| v + e).collect();
                    chunk.copy_from_slice(&set_pi.project(&moved)?);
                }
            }
        }
        Perturbation::ScaleC(e) => {
            if e != 0.0 {
                for c in out.c_hat_mut() {
                    let scaled = (*c * (1.0 + e)).max(0.0);
                    *c = match set_c {
                        Some(s) => s.project(&[scaled])?[0],
                        None => scaled,
                    };
                }
            }
        }
    }
    Ok(out)
}
