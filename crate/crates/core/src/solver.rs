//! Backward regression Monte-Carlo for the value BSDE
//! `Y_t = int_t^T H(s, Y_s, Z_s) ds - int_t^T Z_s dW_s`.
//!
//! Time stepping is a theta-scheme in `y` (trapezoidal by default) with the
//! implicit part solved pathwise by Picard iteration, and `Z` is estimated
//! explicitly from `E_i[Y_{i+1} dW_i] / dt`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::exec;
use crate::generator::GeneratorContext;
use crate::linalg::norm;
use crate::paths::{PathSet, TimeGrid};
use crate::regression::{mean_and_stderr, r_squared, Basis, BasisSpec, Regression, Representation};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub basis: BasisSpec,
    /// Overrides the default `Z` truncation level.
    pub z_cap: Option<f64>,
    /// Weight of the left end of each step in the `y` integral; 1 is
    /// implicit Euler, 0.5 the trapezoidal rule.
    pub theta: f64,
    pub picard_max: usize,
    pub picard_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            basis: BasisSpec::TotalDegree(3),
            z_cap: None,
            theta: 0.5,
            picard_max: 20,
            picard_tol: 1e-12,
        }
    }
}

impl SolverConfig {
    /// `K_Z`, by default `10 sqrt(C0 + 1) (1 + degree)`.
    pub fn z_cap_for(&self, c0: f64) -> f64 {
        self.z_cap
            .unwrap_or_else(|| 10.0 * (c0 + 1.0).sqrt() * (1.0 + self.basis.degree() as f64))
    }
}

/// Regression representation and diagnostics at one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSolution {
    pub t: f64,
    pub y: Representation,
    /// One representation per state dimension.
    pub z: Vec<Representation>,
    /// Fit quality of the conditional expectation behind `Y`.
    pub r2_y: f64,
    /// Mean fit quality over the `Z` components.
    pub r2_z: f64,
    /// Paths on which `Z` hit the truncation level.
    pub trunc_hits: usize,
    /// Standard error of the regression estimate of `Y`.
    pub stderr: f64,
    /// Pathwise extremes of `Y` at this step.
    pub y_min: f64,
    pub y_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsdeSolution {
    pub grid: TimeGrid,
    /// Steps `0..=N`; step `N` carries the terminal condition.
    pub steps: Vec<StepSolution>,
    pub y0: f64,
    pub z0: Vec<f64>,
    pub y0_stderr: f64,
    pub z_cap: f64,
    pub y_upper: f64,
}

impl BsdeSolution {
    pub fn y_at(&self, step: usize, x: &[f64]) -> f64 {
        self.steps[step].y.eval(x).min(self.y_upper)
    }

    /// `Z` at a step, truncated at `K_Z` in Euclidean norm.
    pub fn z_at(&self, step: usize, x: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = self.steps[step].z.iter().map(|r| r.eval(x)).collect();
        truncate(z, self.z_cap).0
    }
}

fn truncate(mut z: Vec<f64>, cap: f64) -> (Vec<f64>, bool) {
    let n = norm(&z);
    if n > cap {
        for v in &mut z {
            *v *= cap / n;
        }
        (z, true)
    } else {
        (z, false)
    }
}

/// Solves `y = base + w * (rest + term(y))` by fixed-point iteration.
fn picard<F>(base: f64, w: f64, rest: f64, term: F, cfg: &SolverConfig, cap: f64) -> core::result::Result<f64, f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut y = base;
    let mut last = f64::INFINITY;
    for _ in 0..cfg.picard_max {
        let next = (base + w * (rest + term(y).map_err(|_| f64::NAN)?)).min(cap);
        last = (next - y).abs();
        y = next;
        if last <= cfg.picard_tol * (1.0 + y.abs()) {
            return Ok(y);
        }
    }
    Err(last)
}

/// Runs the backward recursion on `paths`.
pub fn solve_bsde(ctx: &GeneratorContext, paths: &PathSet, cfg: &SolverConfig) -> Result<BsdeSolution> {
    if !(0.0..=1.0).contains(&cfg.theta) {
        return Err(Error::domain("theta", cfg.theta, "0 <= theta <= 1"));
    }
    if paths.state_dim() != ctx.model.state_dim() || paths.asset_dim() != ctx.model.asset_dim() {
        return Err(Error::GridMismatch("paths do not match the model dimensions"));
    }
    let grid = paths.grid();
    if (grid.horizon - ctx.horizon).abs() > 1e-12 * ctx.horizon {
        return Err(Error::GridMismatch("path horizon differs from the generator horizon"));
    }
    let m = paths.len();
    let k = paths.state_dim();
    let n_steps = grid.steps;
    let dt = grid.dt();
    let cap = ctx.y_upper();
    let z_cap = cfg.z_cap_for(ctx.bounds.c0);
    let zero_z = vec![0.0; k];

    // Terminal step: Y_N = 0 and Z_N = 0.
    let mut y_next = vec![0.0; m];
    let mut h_next: Vec<f64> = if paths.is_degenerate_at(n_steps) {
        let h = ctx.eval(grid.horizon, paths.state(0, n_steps), 0.0, &zero_z)?;
        vec![h; m]
    } else {
        exec::map_indexed(m, |j| ctx.eval(grid.horizon, paths.state(j, n_steps), 0.0, &zero_z))
            .into_iter()
            .collect::<Result<Vec<f64>>>()?
    };
    let mut steps = vec![StepSolution {
        t: grid.horizon,
        y: Representation::constant(k, 0.0),
        z: vec![Representation::constant(k, 0.0); k],
        r2_y: 1.0,
        r2_z: 1.0,
        trunc_hits: 0,
        stderr: 0.0,
        y_min: 0.0,
        y_max: 0.0,
    }];

    for i in (0..n_steps).rev() {
        let t = grid.time(i);
        let xs = paths.states_at(i);
        let degenerate = paths.is_degenerate_at(i);
        let basis = if degenerate {
            Basis::constant(k)
        } else {
            Basis::fit(cfg.basis, k, &xs)?
        };
        let reg = Regression::new(basis, &xs, i)?;

        let target: Vec<f64> = y_next
            .iter()
            .zip(&h_next)
            .map(|(y, h)| y + (1.0 - cfg.theta) * dt * h)
            .collect();
        let coef_t = reg.fit(&target)?;
        let fit_t = reg.fitted_all(&coef_t);
        let r2_y = r_squared(&target, &fit_t);
        let resid: Vec<f64> = target.iter().zip(&fit_t).map(|(a, b)| a - b).collect();
        let stderr = mean_and_stderr(&resid).1;

        let coef_y = reg.fit(&y_next)?;
        let fit_y = reg.fitted_all(&coef_y);
        let mut z_reps = Vec::with_capacity(k);
        let mut z_fit = vec![0.0; m * k];
        let mut r2_z = 0.0;
        for d in 0..k {
            let zt: Vec<f64> = (0..m)
                .map(|j| (y_next[j] - fit_y[j]) * paths.dw(j, i)[d] / dt)
                .collect();
            let c = reg.fit(&zt)?;
            let f = reg.fitted_all(&c);
            r2_z += r_squared(&zt, &f) / k as f64;
            for j in 0..m {
                z_fit[j * k + d] = f[j];
            }
            z_reps.push(reg.representation(c));
        }

        let solve_path = |j: usize| -> Result<(f64, f64, bool)> {
            let (z, hit) = truncate(z_fit[j * k..(j + 1) * k].to_vec(), z_cap);
            let frozen = ctx.freeze(t, paths.state(j, i), &z)?;
            let w = cfg.theta * dt;
            let y = picard(fit_t[j], w, frozen.rest, |y| ctx.consumption_term(y), cfg, cap)
                .map_err(|residual| Error::PicardDiverged {
                    step: i,
                    path: j,
                    residual,
                })?;
            Ok((y, frozen.eval(y)?, hit))
        };
        let results: Vec<(f64, f64, bool)> = if degenerate {
            let r = solve_path(0)?;
            vec![r; m]
        } else {
            exec::map_indexed(m, solve_path)
                .into_iter()
                .collect::<Result<Vec<_>>>()?
        };

        let mut trunc_hits = 0;
        let mut y_min = f64::INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        for (j, &(y, h, hit)) in results.iter().enumerate() {
            y_next[j] = y;
            h_next[j] = h;
            trunc_hits += hit as usize;
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
        let coef_rep = reg.fit(&y_next)?;
        steps.push(StepSolution {
            t,
            y: reg.representation(coef_rep),
            z: z_reps,
            r2_y,
            r2_z,
            trunc_hits,
            stderr,
            y_min,
            y_max,
        });
    }
    steps.reverse();

    let x0 = paths.state(0, 0).to_vec();
    let y0 = y_next[0];
    let (z0, _) = truncate(steps[0].z.iter().map(|r| r.eval(&x0)).collect(), z_cap);
    let y0_stderr = steps[0].stderr;
    Ok(BsdeSolution {
        grid,
        steps,
        y0,
        z0,
        y0_stderr,
        z_cap,
        y_upper: cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::ConstraintSet;
    use crate::market::MarketModel;
    use crate::ode::{solve_ode_constant, DEFAULT_ODE_STEPS};
    use crate::paths::simulate_state;
    use crate::prefs::Preferences;

    fn bs_ctx(set: ConstraintSet) -> GeneratorContext {
        let m = MarketModel::black_scholes(0.03, 0.05, 0.17).unwrap();
        let p = Preferences::new(0.08, 2.0, 1.2).unwrap();
        GeneratorContext::new(m, p, set, None, 30.0).unwrap()
    }

    #[test]
    fn black_scholes_matches_the_ode() {
        for set in [ConstraintSet::full(1).unwrap(), ConstraintSet::interval(0.0, 0.5).unwrap()] {
            let ctx = bs_ctx(set);
            let grid = TimeGrid::new(30.0, 100).unwrap();
            let paths = simulate_state(&ctx.model, grid, 200, 42).unwrap();
            let sol = solve_bsde(&ctx, &paths, &SolverConfig::default()).unwrap();
            let ode = solve_ode_constant(&ctx, DEFAULT_ODE_STEPS).unwrap();
            assert!((sol.y0 - ode.y0()).abs() < 1e-3, "{} vs {}", sol.y0, ode.y0());
            assert!(sol.z0[0].abs() < 1e-12);
            assert_eq!(sol.steps.len(), 101);
            assert_eq!(sol.steps[100].y.eval(&[0.0]), 0.0);
        }
    }

    #[test]
    fn implicit_euler_is_first_order() {
        let ctx = bs_ctx(ConstraintSet::full(1).unwrap());
        let grid = TimeGrid::new(30.0, 100).unwrap();
        let paths = simulate_state(&ctx.model, grid, 10, 1).unwrap();
        let cfg = SolverConfig {
            theta: 1.0,
            ..SolverConfig::default()
        };
        let sol = solve_bsde(&ctx, &paths, &cfg).unwrap();
        let ode = solve_ode_constant(&ctx, DEFAULT_ODE_STEPS).unwrap();
        let err = (sol.y0 - ode.y0()).abs();
        assert!(err > 1e-3 && err < 2e-2, "{err}");
    }

    #[test]
    fn upper_bound_holds_on_heston_paths() {
        let m = MarketModel::heston(5.0, 0.0225, 0.25, 0.05, 0.0, 1.0, 0.47, -0.5).unwrap();
        let p = Preferences::new(0.08, 2.0, 1.2).unwrap();
        let ctx = GeneratorContext::new(m, p, ConstraintSet::interval(0.0, 0.1).unwrap(), None, 1.0)
            .unwrap();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let paths = simulate_state(&ctx.model, grid, 2000, 3).unwrap();
        let sol = solve_bsde(&ctx, &paths, &SolverConfig::default()).unwrap();
        for s in &sol.steps {
            assert!(s.y_max <= ctx.y_upper());
        }
        assert!(sol.y0.is_finite());
    }

    #[test]
    fn rejects_mismatched_horizon() {
        let ctx = bs_ctx(ConstraintSet::full(1).unwrap());
        let paths = simulate_state(&ctx.model, TimeGrid::new(1.0, 10).unwrap(), 10, 1).unwrap();
        assert!(matches!(
            solve_bsde(&ctx, &paths, &SolverConfig::default()),
            Err(Error::GridMismatch(_))
        ));
    }
}
