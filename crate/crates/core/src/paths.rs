//! Monte-Carlo simulation of the state process, the Brownian increments
//! driving it and the assets, and controlled wealth.
//!
//! Each path owns a ChaCha8 stream selected by its index, so path `j` is the
//! same whatever the total path count.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::exec;
use crate::linalg::{dot, Matrix};
use crate::market::{MarketModel, ModelParams};
use crate::{Error, Result};

/// Post-step floor keeping square-root paths inside `(0, inf)`.
pub const STATE_FLOOR: f64 = 1e-10;

/// Uniform grid `t_i = i T / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::domain("horizon", horizon, "T > 0"));
        }
        if steps == 0 {
            return Err(Error::domain("steps", 0.0, "N >= 1"));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.steps as f64
    }
}

/// Simulated state paths with the increments that generated them.
/// Written once by [`simulate_state`] and never mutated afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    grid: TimeGrid,
    paths: usize,
    state_dim: usize,
    asset_dim: usize,
    seed: u64,
    /// `paths x (N+1) x k`
    x: Vec<f64>,
    /// `paths x N x k`
    dw: Vec<f64>,
    /// `paths x N x n`
    dw_perp: Vec<f64>,
}

impl PathSet {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.paths
    }

    pub fn is_empty(&self) -> bool {
        self.paths == 0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn asset_dim(&self) -> usize {
        self.asset_dim
    }

    pub fn state(&self, path: usize, step: usize) -> &[f64] {
        let k = self.state_dim;
        let at = (path * (self.grid.steps + 1) + step) * k;
        &self.x[at..at + k]
    }

    pub fn dw(&self, path: usize, step: usize) -> &[f64] {
        let k = self.state_dim;
        let at = (path * self.grid.steps + step) * k;
        &self.dw[at..at + k]
    }

    pub fn dw_perp(&self, path: usize, step: usize) -> &[f64] {
        let n = self.asset_dim;
        let at = (path * self.grid.steps + step) * n;
        &self.dw_perp[at..at + n]
    }

    /// States of all paths at one step, row-major `paths x k`.
    pub fn states_at(&self, step: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.paths * self.state_dim);
        for j in 0..self.paths {
            out.extend_from_slice(self.state(j, step));
        }
        out
    }

    /// True when every path shares the same state at `step`.
    pub fn is_degenerate_at(&self, step: usize) -> bool {
        let first = self.state(0, step);
        (1..self.paths).all(|j| self.state(j, step) == first)
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Simulates `paths` state trajectories from the model's initial state.
///
/// Black-Scholes paths are constant. The linear diffusion uses the exact
/// Gaussian transition, drawn jointly with the Brownian increment of the same
/// step. The square-root model uses full-truncation Euler with a floor of
/// [`STATE_FLOOR`]. Constant models are arithmetic Brownian motions.
pub fn simulate_state(
    model: &MarketModel,
    grid: TimeGrid,
    paths: usize,
    seed: u64,
) -> Result<PathSet> {
    if paths == 0 {
        return Err(Error::domain("paths", 0.0, "M >= 1"));
    }
    let x0 = model.initial_state().to_vec();
    model.check_in_domain(&x0)?;
    let k = model.state_dim();
    let n = model.asset_dim();
    let steps = grid.steps;
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();

    let per_path = exec::map_indexed(paths, |j| {
        let mut rng = path_rng(seed, j);
        let mut xs = Vec::with_capacity((steps + 1) * k);
        let mut dws = Vec::with_capacity(steps * k);
        let mut dwps = Vec::with_capacity(steps * n);
        xs.extend_from_slice(&x0);
        let mut x = x0.clone();
        let mut drift = vec![0.0; k];
        for i in 0..steps {
            let t = grid.time(i);
            let dw: Vec<f64> = (0..k).map(|_| sqrt_dt * normal(&mut rng)).collect();
            match *model.params() {
                ModelParams::BlackScholes { .. } => {}
                ModelParams::LinearDiffusion { b, a, .. } => {
                    // (dW, int e^{-b(t+dt-s)} dW_s) is bivariate normal.
                    let decay = (-b * dt).exp();
                    let var = (1.0 - decay * decay) / (2.0 * b);
                    let cov = (1.0 - decay) / b;
                    let resid = (var - cov * cov / dt).max(0.0).sqrt();
                    let integral = cov / dt * dw[0] + resid * normal(&mut rng);
                    x[0] = x[0] * decay + a * integral;
                }
                ModelParams::Heston { b, l, a, .. } => {
                    let xp = x[0].max(0.0);
                    x[0] = (x[0] + b * (l - xp) * dt + a * xp.sqrt() * dw[0]).max(STATE_FLOOR);
                }
                ModelParams::Constant(ref c) => {
                    model.drift(t, &x, &mut drift);
                    let diff = c.a.mat_vec(&dw);
                    for d in 0..k {
                        x[d] += drift[d] * dt + diff[d];
                    }
                }
            }
            let dwp: Vec<f64> = (0..n).map(|_| sqrt_dt * normal(&mut rng)).collect();
            xs.extend_from_slice(&x);
            dws.extend_from_slice(&dw);
            dwps.extend_from_slice(&dwp);
        }
        (xs, dws, dwps)
    });

    let mut out = PathSet {
        grid,
        paths,
        state_dim: k,
        asset_dim: n,
        seed,
        x: Vec::with_capacity(paths * (steps + 1) * k),
        dw: Vec::with_capacity(paths * steps * k),
        dw_perp: Vec::with_capacity(paths * steps * n),
    };
    for (xs, dws, dwps) in per_path {
        out.x.extend_from_slice(&xs);
        out.dw.extend_from_slice(&dws);
        out.dw_perp.extend_from_slice(&dwps);
    }
    Ok(out)
}

/// `dW^rho = rho dW + rho_perp dW_perp`.
pub fn correlated_increment(
    rho: &Matrix,
    rho_perp: &Matrix,
    dw: &[f64],
    dw_perp: &[f64],
) -> Result<Vec<f64>> {
    let n = rho.rows();
    let dev = rho
        .outer_gram()
        .add(&rho_perp.outer_gram())
        .max_abs_diff(&Matrix::identity(n));
    if dev > 1e-10 {
        return Err(Error::Correlation { deviation: dev });
    }
    Ok(correlate_unchecked(rho, rho_perp, dw, dw_perp))
}

fn correlate_unchecked(rho: &Matrix, rho_perp: &Matrix, dw: &[f64], dw_perp: &[f64]) -> Vec<f64> {
    let a = rho.mat_vec(dw);
    let b = rho_perp.mat_vec(dw_perp);
    a.iter().zip(&b).map(|(x, y)| x + y).collect()
}

/// A proportional strategy tabulated on the simulated paths: consumption
/// ratio and portfolio fractions `pi` (in units of wealth) at every path and
/// step `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyTable {
    paths: usize,
    steps: usize,
    asset_dim: usize,
    c_hat: Vec<f64>,
    pi: Vec<f64>,
}

impl StrategyTable {
    pub fn new(
        paths: usize,
        steps: usize,
        asset_dim: usize,
        c_hat: Vec<f64>,
        pi: Vec<f64>,
    ) -> Result<Self> {
        if c_hat.len() != paths * (steps + 1) {
            return Err(Error::GridMismatch("consumption table size"));
        }
        if pi.len() != paths * (steps + 1) * asset_dim {
            return Err(Error::GridMismatch("portfolio table size"));
        }
        Ok(StrategyTable {
            paths,
            steps,
            asset_dim,
            c_hat,
            pi,
        })
    }

    /// Tabulates `f(step, t, x) -> (c_hat, pi)` along every path.
    pub fn from_fn<F>(paths: &PathSet, f: F) -> Result<Self>
    where
        F: Fn(usize, f64, &[f64]) -> (f64, Vec<f64>) + Sync + Send,
    {
        let grid = paths.grid();
        let n = paths.asset_dim();
        let rows = exec::map_indexed(paths.len(), |j| {
            let mut c = Vec::with_capacity(grid.steps + 1);
            let mut p = Vec::with_capacity((grid.steps + 1) * n);
            for i in 0..=grid.steps {
                let (ch, pi) = f(i, grid.time(i), paths.state(j, i));
                c.push(ch);
                p.extend_from_slice(&pi);
            }
            (c, p)
        });
        let mut c_hat = Vec::with_capacity(paths.len() * (grid.steps + 1));
        let mut pi = Vec::with_capacity(paths.len() * (grid.steps + 1) * n);
        for (c, p) in rows {
            c_hat.extend(c);
            pi.extend(p);
        }
        StrategyTable::new(paths.len(), grid.steps, n, c_hat, pi)
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn asset_dim(&self) -> usize {
        self.asset_dim
    }

    pub fn c_hat(&self, path: usize, step: usize) -> f64 {
        self.c_hat[path * (self.steps + 1) + step]
    }

    pub fn pi(&self, path: usize, step: usize) -> &[f64] {
        let at = (path * (self.steps + 1) + step) * self.asset_dim;
        &self.pi[at..at + self.asset_dim]
    }

    pub(crate) fn c_hat_mut(&mut self) -> &mut [f64] {
        &mut self.c_hat
    }

    pub(crate) fn pi_mut(&mut self) -> &mut [f64] {
        &mut self.pi
    }
}

/// Log-wealth along every path, `paths x (N+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthPaths {
    steps: usize,
    log_w: Vec<f64>,
}

impl WealthPaths {
    pub fn log_wealth(&self, path: usize, step: usize) -> f64 {
        self.log_w[path * (self.steps + 1) + step]
    }

    pub fn wealth(&self, path: usize, step: usize) -> f64 {
        self.log_wealth(path, step).exp()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn paths(&self) -> usize {
        self.log_w.len() / (self.steps + 1)
    }
}

/// Wealth under a proportional strategy, stepped in log space:
/// `ln W += (r + pi'mu - c_hat - |sigma'pi|^2/2) dt + (sigma'pi)' dW^rho`,
/// with coefficients and controls frozen at the left end of each step.
pub fn simulate_wealth(
    model: &MarketModel,
    paths: &PathSet,
    strategy: &StrategyTable,
    omega: f64,
) -> Result<WealthPaths> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::domain("omega", omega, "omega > 0"));
    }
    let grid = paths.grid();
    if strategy.paths() != paths.len() || strategy.steps() != grid.steps {
        return Err(Error::GridMismatch("strategy table does not match the paths"));
    }
    let steps = grid.steps;
    let dt = grid.dt();
    let ln0 = omega.ln();
    let mut log_w = vec![0.0; paths.len() * (steps + 1)];
    exec::for_each_chunk_mut(&mut log_w, steps + 1, |j, row| {
        row[0] = ln0;
        for i in 0..steps {
            let c = model.coefficients(grid.time(i), paths.state(j, i));
            let pi = strategy.pi(j, i);
            let ch = strategy.c_hat(j, i);
            let p = c.sigma.tr_mat_vec(pi);
            let dwr = correlate_unchecked(&c.rho, &c.rho_perp, paths.dw(j, i), paths.dw_perp(j, i));
            let drift = c.r + dot(pi, &c.mu) - ch - 0.5 * dot(&p, &p);
            row[i + 1] = row[i] + drift * dt + dot(&p, &dwr);
        }
    });
    Ok(WealthPaths { steps, log_w })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_stats(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, var)
    }

    #[test]
    fn black_scholes_state_is_constant() {
        let m = MarketModel::black_scholes(0.03, 0.05, 0.17).unwrap();
        let ps = simulate_state(&m, TimeGrid::new(1.0, 10).unwrap(), 50, 1).unwrap();
        for j in 0..50 {
            for i in 0..=10 {
                assert_eq!(ps.state(j, i), &[0.0]);
            }
        }
        assert!(ps.is_degenerate_at(10));
    }

    #[test]
    fn reproducible_and_prefix_stable() {
        let m = MarketModel::heston(5.0, 0.0225, 0.25, 0.05, 0.0, 1.0, 0.47, -0.5).unwrap();
        let g = TimeGrid::new(1.0, 20).unwrap();
        let a = simulate_state(&m, g, 64, 9).unwrap();
        let b = simulate_state(&m, g, 64, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate_state(&m, g, 128, 9).unwrap();
        for j in 0..64 {
            for i in 0..=20 {
                assert_eq!(a.state(j, i), c.state(j, i));
            }
        }
        let d = simulate_state(&m, g, 64, 10).unwrap();
        assert_ne!(a.state(0, 5), d.state(0, 5));
    }

    #[test]
    fn rejects_empty_and_out_of_domain() {
        let m = MarketModel::black_scholes(0.03, 0.05, 0.17).unwrap();
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert!(simulate_state(&m, g, 0, 1).is_err());
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn correlated_increment_examples() {
        let one = Matrix::scalar(1.0);
        let zero = Matrix::scalar(0.0);
        assert_eq!(
            correlated_increment(&one, &zero, &[0.3], &[-0.7]).unwrap(),
            vec![0.3]
        );
        assert_eq!(
            correlated_increment(&zero, &one, &[0.3], &[-0.7]).unwrap(),
            vec![-0.7]
        );
        assert!(matches!(
            correlated_increment(&one, &one, &[0.3], &[-0.7]),
            Err(Error::Correlation { .. })
        ));
    }

    #[test]
    fn riskless_growth() {
        let m = MarketModel::black_scholes(0.03, 0.05, 0.17).unwrap();
        let g = TimeGrid::new(1.0, 12).unwrap();
        let ps = simulate_state(&m, g, 4, 3).unwrap();
        let st = StrategyTable::from_fn(&ps, |_, _, _| (0.0, vec![0.0])).unwrap();
        let w = simulate_wealth(&m, &ps, &st, 1.0).unwrap();
        for j in 0..4 {
            assert!((w.wealth(j, 12) - 0.03f64.exp()).abs() < 1e-14);
        }
        assert!(simulate_wealth(&m, &ps, &st, 0.0).is_err());
    }

    #[test]
    fn ou_increments_have_unit_variance_per_dt() {
        let m = MarketModel::linear_diffusion(0.0226, 0.0189, 0.0436, 0.0014, 1.0, 0.05, 1.0, -0.935)
            .unwrap();
        let g = TimeGrid::new(2.0, 4).unwrap();
        let ps = simulate_state(&m, g, 20_000, 5).unwrap();
        let dw: Vec<f64> = (0..ps.len()).map(|j| ps.dw(j, 2)[0]).collect();
        let (mean, var) = sample_stats(&dw);
        assert!(mean.abs() < 4.0 * (0.5f64 / 20_000.0).sqrt());
        assert!((var / 0.5 - 1.0).abs() < 0.05);
    }
}
