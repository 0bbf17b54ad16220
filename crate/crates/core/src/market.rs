//! Market coefficient models: the state diffusion `dX = b dt + a dW`, the
//! short rate, excess returns, volatility and the correlation split
//! `W^rho = rho W + rho_perp W_perp`.
//!
//! Three one-dimensional built-ins (Black-Scholes, truncated linear
//! diffusion, Heston-type square-root volatility) plus a constant-coefficient
//! model of arbitrary dimension, which is what the ODE oracle runs on.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::linalg::{dot, Cholesky, Matrix};
use crate::{Error, Result};

/// Truncation level applied to the linear-diffusion state inside `r` and `mu`.
pub const LINEAR_TRUNCATION: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    BlackScholes,
    LinearDiffusion,
    Heston,
    Constant,
}

/// Coefficients of the market at one `(t, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    /// State drift, length `k`.
    pub b: Vec<f64>,
    /// State diffusion, `k x k`.
    pub a: Matrix,
    pub r: f64,
    /// Excess return, length `n`.
    pub mu: Vec<f64>,
    /// Volatility, `n x n`.
    pub sigma: Matrix,
    /// `n x k`
    pub rho: Matrix,
    /// `n x n`
    pub rho_perp: Matrix,
}

impl Coefficients {
    pub fn state_dim(&self) -> usize {
        self.b.len()
    }

    pub fn asset_dim(&self) -> usize {
        self.mu.len()
    }

    /// Max-abs deviation of `rho rho' + rho_perp rho_perp'` from the identity.
    pub fn correlation_deviation(&self) -> f64 {
        let s = self.rho.outer_gram().add(&self.rho_perp.outer_gram());
        s.max_abs_diff(&Matrix::identity(self.asset_dim()))
    }

    pub fn validate_shapes(&self) -> Result<()> {
        let k = self.b.len();
        let n = self.mu.len();
        let shapes = [
            (self.a.rows(), self.a.cols(), k, k),
            (self.sigma.rows(), self.sigma.cols(), n, n),
            (self.rho.rows(), self.rho.cols(), n, k),
            (self.rho_perp.rows(), self.rho_perp.cols(), n, n),
        ];
        for (r, c, er, ec) in shapes {
            if r != er || c != ec {
                return Err(Error::Dimension {
                    expected: er * ec,
                    found: r * c,
                });
            }
        }
        Ok(())
    }
}

/// Coefficients plus the quantities every consumer needs from them.
#[derive(Debug, Clone)]
pub struct LocalMarket {
    pub coeffs: Coefficients,
    sigma_cov: Cholesky,
    /// `Sigma^{-1} mu`
    pub sigma_inv_mu: Vec<f64>,
    /// `mu' Sigma^{-1} mu`, the squared market price of risk.
    pub mpr_sq: f64,
}

impl LocalMarket {
    pub fn new(coeffs: Coefficients) -> Result<Self> {
        let sigma_cov = coeffs.sigma.outer_gram().cholesky()?;
        let sigma_inv_mu = sigma_cov.solve(&coeffs.mu);
        let mpr_sq = dot(&coeffs.mu, &sigma_inv_mu);
        Ok(LocalMarket {
            coeffs,
            sigma_cov,
            sigma_inv_mu,
            mpr_sq,
        })
    }

    /// `Sigma^{-1} v`
    pub fn sigma_cov_solve(&self, v: &[f64]) -> Vec<f64> {
        self.sigma_cov.solve(v)
    }

    /// `sigma' Sigma^{-1} mu`
    pub fn risk_price(&self) -> Vec<f64> {
        self.coeffs.sigma.tr_mat_vec(&self.sigma_inv_mu)
    }

    /// `sigma' Sigma^{-1} sigma rho` (`n x k`).
    pub fn projected_rho(&self) -> Matrix {
        let sr = self.coeffs.sigma.mul(&self.coeffs.rho);
        let inner = self.sigma_cov.solve_matrix(&sr);
        self.coeffs.sigma.transpose().mul(&inner)
    }

    /// `rho' sigma' Sigma^{-1} sigma rho` (`k x k`).
    pub fn rho_quadratic(&self) -> Matrix {
        self.coeffs.rho.transpose().mul(&self.projected_rho())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    BlackScholes {
        r: f64,
        mu: f64,
        sigma: f64,
    },
    LinearDiffusion {
        b: f64,
        a: f64,
        sigma: f64,
        r0: f64,
        r1: f64,
        lambda0: f64,
        lambda1: f64,
        rho: f64,
    },
    Heston {
        b: f64,
        l: f64,
        a: f64,
        r0: f64,
        r1: f64,
        sigma_scale: f64,
        lambda: f64,
        rho: f64,
    },
    Constant(Coefficients),
}

/// An immutable market model together with its initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketModel {
    params: ModelParams,
    x0: Vec<f64>,
    /// Open interval per state coordinate.
    domain: Vec<(f64, f64)>,
}

impl MarketModel {
    /// Constant-coefficient single asset; the state is a dummy with zero
    /// drift and diffusion so the model runs through the same pipeline.
    pub fn black_scholes(r: f64, mu: f64, sigma: f64) -> Result<Self> {
        finite("r", r)?;
        finite("mu", mu)?;
        positive("sigma", sigma)?;
        Ok(MarketModel {
            params: ModelParams::BlackScholes { r, mu, sigma },
            x0: vec![0.0],
            domain: vec![(f64::NEG_INFINITY, f64::INFINITY)],
        })
    }

    /// Ornstein-Uhlenbeck state `dX = -b X dt + a dW` with
    /// `r(x) = r0 + r1 max(-100, x)` and
    /// `mu(x) = sigma (lambda0 + lambda1 clamp(x, -100, 100))`.
    #[allow(clippy::too_many_arguments)]
    pub fn linear_diffusion(
        b: f64,
        a: f64,
        sigma: f64,
        r0: f64,
        r1: f64,
        lambda0: f64,
        lambda1: f64,
        rho: f64,
    ) -> Result<Self> {
        positive("b", b)?;
        positive("a", a)?;
        positive("sigma", sigma)?;
        finite("r0", r0)?;
        finite("r1", r1)?;
        finite("lambda0", lambda0)?;
        finite("lambda1", lambda1)?;
        correlation("rho", rho)?;
        Ok(MarketModel {
            params: ModelParams::LinearDiffusion {
                b,
                a,
                sigma,
                r0,
                r1,
                lambda0,
                lambda1,
                rho,
            },
            x0: vec![0.0],
            domain: vec![(f64::NEG_INFINITY, f64::INFINITY)],
        })
    }

    /// Square-root state `dX = b (l - X) dt + a sqrt(X) dW` with
    /// `r(x) = r0 + r1 x`, `sigma(x) = sigma_scale x` and
    /// `mu(x) = sigma_scale lambda x`. The initial state defaults to `l`.
    ///
    /// A violated Feller condition is not an error; see [`MarketModel::feller`].
    #[allow(clippy::too_many_arguments)]
    pub fn heston(
        b: f64,
        l: f64,
        a: f64,
        r0: f64,
        r1: f64,
        sigma_scale: f64,
        lambda: f64,
        rho: f64,
    ) -> Result<Self> {
        positive("b", b)?;
        positive("l", l)?;
        positive("a", a)?;
        positive("sigma", sigma_scale)?;
        positive("lambda", lambda)?;
        finite("r0", r0)?;
        finite("r1", r1)?;
        correlation("rho", rho)?;
        Ok(MarketModel {
            params: ModelParams::Heston {
                b,
                l,
                a,
                r0,
                r1,
                sigma_scale,
                lambda,
                rho,
            },
            x0: vec![l],
            domain: vec![(0.0, f64::INFINITY)],
        })
    }

    /// Time- and state-independent coefficients of any dimension. The state
    /// follows an arithmetic Brownian motion with the given `b` and `a`.
    pub fn constant(coeffs: Coefficients) -> Result<Self> {
        coeffs.validate_shapes()?;
        let dev = coeffs.correlation_deviation();
        if dev > 1e-10 {
            return Err(Error::Correlation { deviation: dev });
        }
        LocalMarket::new(coeffs.clone())?;
        let k = coeffs.state_dim();
        Ok(MarketModel {
            params: ModelParams::Constant(coeffs),
            x0: vec![0.0; k],
            domain: vec![(f64::NEG_INFINITY, f64::INFINITY); k],
        })
    }

    pub fn with_initial_state(mut self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.state_dim() {
            return Err(Error::Dimension {
                expected: self.state_dim(),
                found: x0.len(),
            });
        }
        self.check_in_domain(&x0)?;
        self.x0 = x0;
        Ok(self)
    }

    /// The model with every coefficient frozen at `(t, x)`, as a constant
    /// model started from the same state.
    pub fn frozen_at(&self, t: f64, x: &[f64]) -> Result<Self> {
        let coeffs = self.coefficients(t, x);
        MarketModel::constant(coeffs)?.with_initial_state(x.to_vec())
    }

    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::BlackScholes { .. } => ModelKind::BlackScholes,
            ModelParams::LinearDiffusion { .. } => ModelKind::LinearDiffusion,
            ModelParams::Heston { .. } => ModelKind::Heston,
            ModelParams::Constant(_) => ModelKind::Constant,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.x0
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn state_dim(&self) -> usize {
        match &self.params {
            ModelParams::Constant(c) => c.state_dim(),
            _ => 1,
        }
    }

    pub fn asset_dim(&self) -> usize {
        match &self.params {
            ModelParams::Constant(c) => c.asset_dim(),
            _ => 1,
        }
    }

    /// True when no coefficient depends on the state.
    pub fn is_constant(&self) -> bool {
        matches!(
            self.params,
            ModelParams::BlackScholes { .. } | ModelParams::Constant(_)
        )
    }

    /// True when the short rate does not depend on the state.
    pub fn has_constant_rate(&self) -> bool {
        match self.params {
            ModelParams::LinearDiffusion { r1, .. } | ModelParams::Heston { r1, .. } => r1 == 0.0,
            _ => true,
        }
    }

    /// Feller condition `b l > a^2 / 2` for the square-root model, as
    /// `(holds, lhs, rhs)`. `None` for other models.
    pub fn feller(&self) -> Option<(bool, f64, f64)> {
        match self.params {
            ModelParams::Heston { b, l, a, .. } => {
                let lhs = b * l;
                let rhs = 0.5 * a * a;
                Some((lhs > rhs, lhs, rhs))
            }
            _ => None,
        }
    }

    pub fn check_in_domain(&self, x: &[f64]) -> Result<()> {
        for (i, (&v, &(lo, hi))) in x.iter().zip(&self.domain).enumerate() {
            if !(v > lo && v < hi) {
                return Err(Error::OutsideDomain {
                    coord: i,
                    value: v,
                });
            }
        }
        Ok(())
    }

    /// State drift `b(t, x)`.
    pub fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        match &self.params {
            ModelParams::BlackScholes { .. } => out[0] = 0.0,
            ModelParams::LinearDiffusion { b, .. } => out[0] = -b * x[0],
            ModelParams::Heston { b, l, .. } => out[0] = b * (l - x[0]),
            ModelParams::Constant(c) => out.copy_from_slice(&c.b),
        }
    }

    pub fn coefficients(&self, t: f64, x: &[f64]) -> Coefficients {
        let scalar = |v: f64| Matrix::scalar(v);
        match self.params {
            ModelParams::BlackScholes { r, mu, sigma } => Coefficients {
                b: vec![0.0],
                a: scalar(0.0),
                r,
                mu: vec![mu],
                sigma: scalar(sigma),
                rho: scalar(1.0),
                rho_perp: scalar(0.0),
            },
            ModelParams::LinearDiffusion {
                b,
                a,
                sigma,
                r0,
                r1,
                lambda0,
                lambda1,
                rho,
            } => {
                let x = x[0];
                let xr = x.max(-LINEAR_TRUNCATION);
                let xm = x.clamp(-LINEAR_TRUNCATION, LINEAR_TRUNCATION);
                Coefficients {
                    b: vec![-b * x],
                    a: scalar(a),
                    r: r0 + r1 * xr,
                    mu: vec![sigma * (lambda0 + lambda1 * xm)],
                    sigma: scalar(sigma),
                    rho: scalar(rho),
                    rho_perp: scalar((1.0 - rho * rho).max(0.0).sqrt()),
                }
            }
            ModelParams::Heston {
                b,
                l,
                a,
                r0,
                r1,
                sigma_scale,
                lambda,
                rho,
            } => {
                let x = x[0];
                let xp = x.max(0.0);
                Coefficients {
                    b: vec![b * (l - x)],
                    a: scalar(a * xp.sqrt()),
                    r: r0 + r1 * x,
                    mu: vec![sigma_scale * lambda * x],
                    sigma: scalar(sigma_scale * x),
                    rho: scalar(rho),
                    rho_perp: scalar((1.0 - rho * rho).max(0.0).sqrt()),
                }
            }
            ModelParams::Constant(ref c) => {
                let _ = t;
                c.clone()
            }
        }
    }

    pub fn local(&self, t: f64, x: &[f64]) -> Result<LocalMarket> {
        LocalMarket::new(self.coefficients(t, x))
    }

    /// Closed-form bound on `mu' Sigma^{-1} mu` over the whole state domain.
    pub fn analytic_mpr_bound(&self) -> Option<f64> {
        match &self.params {
            ModelParams::BlackScholes { mu, sigma, .. } => Some((mu / sigma) * (mu / sigma)),
            ModelParams::LinearDiffusion {
                lambda0, lambda1, ..
            } => {
                let lo = lambda0 - lambda1 * LINEAR_TRUNCATION;
                let hi = lambda0 + lambda1 * LINEAR_TRUNCATION;
                Some((lo * lo).max(hi * hi))
            }
            ModelParams::Heston { lambda, .. } => Some(lambda * lambda),
            ModelParams::Constant(c) => LocalMarket::new(c.clone()).ok().map(|l| l.mpr_sq),
        }
    }

    /// Closed-form infimum of `r` over the state domain, if finite.
    pub fn analytic_rate_floor(&self) -> Option<f64> {
        match self.params {
            ModelParams::BlackScholes { r, .. } => Some(r),
            ModelParams::LinearDiffusion { r0, r1, .. } => {
                (r1 >= 0.0).then(|| r0 - r1 * LINEAR_TRUNCATION)
            }
            ModelParams::Heston { r0, r1, .. } => (r1 >= 0.0).then_some(r0),
            ModelParams::Constant(ref c) => Some(c.r),
        }
    }

    /// A deterministic `(t, x)` grid covering `[0, horizon]` and a wide slice
    /// of the state domain, used for bounds and condition scans.
    pub fn sample_grid(&self, horizon: f64) -> Vec<(f64, Vec<f64>)> {
        let times: Vec<f64> = (0..=4).map(|i| horizon * i as f64 / 4.0).collect();
        let states: Vec<Vec<f64>> = match self.params {
            ModelParams::BlackScholes { .. } | ModelParams::Constant(_) => vec![self.x0.clone()],
            ModelParams::LinearDiffusion { .. } => (0..=400)
                .map(|i| vec![-2.0 * LINEAR_TRUNCATION + i as f64])
                .collect(),
            ModelParams::Heston { .. } => (0..=280)
                .map(|i| vec![10f64.powf(-4.0 + i as f64 / 40.0)])
                .collect(),
        };
        let mut grid = Vec::with_capacity(times.len() * states.len());
        for &t in &times {
            for x in &states {
                grid.push((t, x.clone()));
            }
        }
        grid
    }
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, v, "finite"))
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, v, "> 0"))
    }
}

fn correlation(name: &'static str, v: f64) -> Result<()> {
    if v.abs() <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(name, v, "|rho| <= 1"))
    }
}

/// Market-wide constants entering the a priori bounds on the value process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketBounds {
    /// Bound on `mu' Sigma^{-1} mu`.
    pub c0: f64,
    /// Lower bound on the short rate, clamped to be `<= 0`.
    pub r_min: f64,
    /// Norm bound of a bounded element of the portfolio constraint set.
    pub c_p: f64,
}

impl MarketBounds {
    pub fn with_c_p(mut self, c_p: f64) -> Self {
        self.c_p = c_p;
        self
    }
}

/// `r_min = min(0, inf r)` and `C0`, preferring closed forms and falling back
/// to the sampled maximum with 10% headroom. `c_p` is left at zero.
pub fn market_bounds(model: &MarketModel, sample_grid: &[(f64, Vec<f64>)]) -> Result<MarketBounds> {
    if sample_grid.is_empty() {
        return Err(Error::Invalid("empty sample grid".into()));
    }
    let mut r_min = 0.0f64;
    let mut mpr_max = 0.0f64;
    for (t, x) in sample_grid {
        model.check_in_domain(x)?;
        let local = model.local(*t, x)?;
        r_min = r_min.min(local.coeffs.r);
        mpr_max = mpr_max.max(local.mpr_sq);
    }
    if let Some(floor) = model.analytic_rate_floor() {
        r_min = r_min.min(floor);
    }
    let c0 = model.analytic_mpr_bound().unwrap_or(1.1 * mpr_max);
    Ok(MarketBounds { c0, r_min, c_p: 0.0 })
}
