//! The driver of the value BSDE and its consumption-constrained variant.
//!
//! `z` is a row vector in `R^k`, stored as a slice.

use alloc::vec::Vec;


use crate::analytics::compute_c1;
use crate::constraint::ConstraintSet;
use crate::linalg::{dot, norm_sq};
use crate::market::{market_bounds, LocalMarket, MarketBounds, MarketModel};
use crate::prefs::Preferences;
use crate::{Error, Result};

/// Everything the driver needs: market, preferences, portfolio constraint
/// (in fractions of wealth, mapped to `p = sigma' pi` per point), optional
/// consumption-ratio constraint, and the market bounds behind the `C1 T` clamp.
#[derive(Debug, Clone)]
pub struct GeneratorContext {
    pub model: MarketModel,
    pub prefs: Preferences,
    pub set_pi: ConstraintSet,
    pub set_c: Option<ConstraintSet>,
    pub bounds: MarketBounds,
    pub horizon: f64,
    c1: f64,
}

/// The driver at fixed `(t, x, z)`, split into the part that does not depend
/// on `y` and the consumption term that does.
#[derive(Debug, Clone)]
pub struct FrozenDriver<'a> {
    ctx: &'a GeneratorContext,
    /// All terms except the consumption term.
    pub rest: f64,
}

impl FrozenDriver<'_> {
    pub fn eval(&self, y: f64) -> Result<f64> {
        Ok(self.rest + self.ctx.consumption_term(y)?)
    }
}

impl GeneratorContext {
    /// Bounds are taken from the model's sample grid; `C_p` is the largest
    /// minimum norm of the image constraint set over that grid.
    pub fn new(
        model: MarketModel,
        prefs: Preferences,
        set_pi: ConstraintSet,
        set_c: Option<ConstraintSet>,
        horizon: f64,
    ) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::domain("horizon", horizon, "T > 0"));
        }
        let grid = model.sample_grid(horizon);
        let mut c_p = 0.0f64;
        for (t, x) in &grid {
            let c = model.coefficients(*t, x);
            c_p = c_p.max(set_pi.image_min_norm(&c.sigma)?);
        }
        let bounds = market_bounds(&model, &grid)?.with_c_p(c_p);
        Self::with_bounds(model, prefs, set_pi, set_c, horizon, bounds)
    }

    pub fn with_bounds(
        model: MarketModel,
        prefs: Preferences,
        set_pi: ConstraintSet,
        set_c: Option<ConstraintSet>,
        horizon: f64,
        bounds: MarketBounds,
    ) -> Result<Self> {
        if set_pi.dim() != model.asset_dim() {
            return Err(Error::Dimension {
                expected: model.asset_dim(),
                found: set_pi.dim(),
            });
        }
        if let Some(c) = &set_c {
            check_consumption_set(c)?;
        }
        let c1 = compute_c1(&bounds, &prefs);
        Ok(GeneratorContext {
            model,
            prefs,
            set_pi,
            set_c,
            bounds,
            horizon,
            c1,
        })
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// The a priori upper bound `C1 T` on the value process.
    pub fn y_upper(&self) -> f64 {
        self.c1 * self.horizon
    }

    /// The `y`-dependent term with `y` clamped at `C1 T`: the closed form when
    /// consumption is unconstrained, otherwise the constrained infimum.
    pub fn consumption_term(&self, y: f64) -> Result<f64> {
        let y = y.min(self.y_upper());
        match &self.set_c {
            None => Ok(self.prefs.consumption_term(y)),
            Some(set) => {
                let c = clamp_consumption(y, &self.prefs, set)?;
                Ok(self.prefs.consumption_objective(c, y))
            }
        }
    }

    /// Optimal consumption ratio for value `y` (clamped at `C1 T`).
    pub fn optimal_consumption(&self, y: f64) -> Result<f64> {
        optimal_consumption(y.min(self.y_upper()), &self.prefs, self.set_c.as_ref())
    }

    /// Everything but the consumption term at `(t, x, z)`.
    pub fn freeze(&self, t: f64, x: &[f64], z: &[f64]) -> Result<FrozenDriver<'_>> {
        let local = self.model.local(t, x)?;
        self.freeze_local(&local, z)
    }

    pub fn freeze_local(&self, local: &LocalMarket, z: &[f64]) -> Result<FrozenDriver<'_>> {
        let rest = driver_rest(local, &self.prefs, &self.set_pi, z)?;
        Ok(FrozenDriver { ctx: self, rest })
    }

    /// `H(t, x, y, z)`, using the constrained consumption term when a
    /// consumption constraint is present.
    pub fn eval(&self, t: f64, x: &[f64], y: f64, z: &[f64]) -> Result<f64> {
        self.freeze(t, x, z)?.eval(y)
    }
}

fn check_consumption_set(set: &ConstraintSet) -> Result<()> {
    let ok = match set {
        ConstraintSet::Full { .. } => false,
        ConstraintSet::Interval { lo, .. } => *lo >= 0.0,
        ConstraintSet::Box(b) => b.len() == 1 && b[0].0 >= 0.0,
        ConstraintSet::Union(p) => p.iter().all(|&(lo, _)| lo >= 0.0),
        ConstraintSet::Finite(p) => p.iter().all(|q| q.len() == 1 && q[0] >= 0.0),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Invalid(
            "consumption constraint must be a closed subset of [0, inf)".into(),
        ))
    }
}

/// `u = (1/gamma) sigma' Sigma^{-1} (mu + sigma rho z')`, the unconstrained
/// optimiser in `p` coordinates.
pub fn portfolio_target(local: &LocalMarket, gamma: f64, z: &[f64]) -> Result<Vec<f64>> {
    let c = &local.coeffs;
    if z.len() != c.state_dim() {
        return Err(Error::Dimension {
            expected: c.state_dim(),
            found: z.len(),
        });
    }
    let srz = c.sigma.mat_vec(&c.rho.mat_vec(z));
    let v: Vec<f64> = c.mu.iter().zip(&srz).map(|(m, s)| m + s).collect();
    let w = local.sigma_cov_solve(&v);
    Ok(c.sigma.tr_mat_vec(&w).into_iter().map(|e| e / gamma).collect())
}

fn driver_rest(
    local: &LocalMarket,
    prefs: &Preferences,
    set_pi: &ConstraintSet,
    z: &[f64],
) -> Result<f64> {
    let g = prefs.gamma;
    let c = &local.coeffs;
    let u = portfolio_target(local, g, z)?;
    let dist = set_pi.project_image(&c.sigma, &u)?.dist;
    let rz = c.rho.mat_vec(z);
    let srz = c.sigma.mat_vec(&rz);
    // rho z' is mapped by the projection sigma' Sigma^{-1} sigma.
    let proj = c.sigma.tr_mat_vec(&local.sigma_cov_solve(&srz));
    let quad = 0.5 * norm_sq(z) + (1.0 - g) / (2.0 * g) * dot(&rz, &proj);
    let lin = (1.0 - g) / g * dot(&local.sigma_inv_mu, &srz);
    let constant = (1.0 - g) / (2.0 * g) * local.mpr_sq + (1.0 - g) * c.r - prefs.delta * prefs.theta;
    Ok(-g * (1.0 - g) / 2.0 * dist * dist + quad + lin + constant)
}

/// `H(t, x, y, z)` with the unconstrained consumption term and `y` clamped
/// at `C1 T`.
pub fn generator_h(ctx: &GeneratorContext, t: f64, x: &[f64], y: f64, z: &[f64]) -> Result<f64> {
    let frozen = ctx.freeze(t, x, z)?;
    let y = y.min(ctx.y_upper());
    Ok(frozen.rest + ctx.prefs.consumption_term(y))
}

/// `H` with the consumption term replaced by the infimum over the context's
/// consumption set (the whole half-line when none is set).
pub fn generator_h_consumption(
    ctx: &GeneratorContext,
    t: f64,
    x: &[f64],
    y: f64,
    z: &[f64],
) -> Result<f64> {
    ctx.eval(t, x, y, z)
}

/// Minimiser over `set` of `-(1 - gamma) c + delta theta e^{-y/theta} c^{1 - 1/psi}`.
///
/// The objective is convex on `[0, inf)`, so on each interval the minimiser
/// is the unconstrained one clamped into it. Ties go to the smaller ratio.
pub fn clamp_consumption(y: f64, prefs: &Preferences, set: &ConstraintSet) -> Result<f64> {
    let star = prefs.consumption_ratio(y);
    let cands: Vec<f64> = match set {
        ConstraintSet::Interval { lo, hi } => return Ok(star.max(*lo).min(*hi)),
        ConstraintSet::Box(b) if b.len() == 1 => return Ok(star.max(b[0].0).min(b[0].1)),
        ConstraintSet::Union(p) => p.iter().map(|&(lo, hi)| star.max(lo).min(hi)).collect(),
        ConstraintSet::Finite(p) => p.iter().map(|q| q[0]).collect(),
        _ => return Err(Error::Unsupported("consumption constraint must be one-dimensional")),
    };
    let mut best = f64::NAN;
    let mut best_val = f64::INFINITY;
    for c in cands {
        let v = prefs.consumption_objective(c, y);
        if best.is_nan() {
            best = c;
            best_val = v;
            continue;
        }
        let tol = 4.0 * f64::EPSILON * (v.abs() + best_val.abs());
        if v < best_val - tol || ((v - best_val).abs() <= tol && c < best) {
            best = c;
            best_val = v;
        }
    }
    if best.is_nan() {
        return Err(Error::EmptySet);
    }
    Ok(best)
}

/// `delta^psi e^{-(psi/theta) y}`, or its constrained counterpart.
pub fn optimal_consumption(y: f64, prefs: &Preferences, set_c: Option<&ConstraintSet>) -> Result<f64> {
    match set_c {
        None => Ok(prefs.consumption_ratio(y)),
        Some(s) => clamp_consumption(y, prefs, s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn bs_ctx(set_pi: ConstraintSet, set_c: Option<ConstraintSet>) -> GeneratorContext {
        let m = MarketModel::black_scholes(0.03, 0.05, 0.17).unwrap();
        let p = Preferences::new(0.08, 2.0, 1.2).unwrap();
        GeneratorContext::new(m, p, set_pi, set_c, 30.0).unwrap()
    }

    #[test]
    fn black_scholes_unconstrained_at_origin() {
        let ctx = bs_ctx(ConstraintSet::full(1).unwrap(), None);
        let h = generator_h(&ctx, 0.0, &[0.0], 0.0, &[0.0]).unwrap();
        let c0 = (0.05f64 / 0.17).powi(2);
        let expect = -5.0 * 0.08f64.powf(1.2) + 0.45 - 0.25 * c0;
        assert!((h - expect).abs() < 1e-14, "{h} vs {expect}");
    }

    #[test]
    fn singleton_portfolio_set_distance() {
        let ctx = bs_ctx(ConstraintSet::finite(vec![vec![0.3]]).unwrap(), None);
        let full = bs_ctx(ConstraintSet::full(1).unwrap(), None);
        let h = generator_h(&ctx, 0.0, &[0.0], 0.0, &[0.0]).unwrap();
        let h0 = generator_h(&full, 0.0, &[0.0], 0.0, &[0.0]).unwrap();
        let u = 0.05 / 0.17 / 2.0;
        let d2 = (0.17f64 * 0.3 - u).powi(2);
        assert!((h - h0 - d2).abs() < 1e-14);
    }

    #[test]
    fn half_line_consumption_matches_closed_form() {
        let half = ConstraintSet::interval(0.0, f64::INFINITY).unwrap();
        let ctx = bs_ctx(ConstraintSet::full(1).unwrap(), Some(half));
        let free = bs_ctx(ConstraintSet::full(1).unwrap(), None);
        for &y in &[-1.0, 0.0, 0.7, 2.5] {
            let a = generator_h_consumption(&ctx, 0.0, &[0.0], y, &[0.0]).unwrap();
            let b = generator_h(&free, 0.0, &[0.0], y, &[0.0]).unwrap();
            assert!((a - b).abs() < 1e-13 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn clamp_consumption_examples() {
        let p = Preferences::new(0.08, 2.0, 1.2).unwrap();
        let star = 0.08f64.powf(1.2);
        let wide = ConstraintSet::interval(0.0, 1.0).unwrap();
        assert_eq!(clamp_consumption(0.0, &p, &wide).unwrap(), star);
        let low = ConstraintSet::interval(0.0, 0.01).unwrap();
        assert_eq!(clamp_consumption(0.0, &p, &low).unwrap(), 0.01);
        let single = ConstraintSet::finite(vec![vec![0.04]]).unwrap();
        assert_eq!(clamp_consumption(0.3, &p, &single).unwrap(), 0.04);
        let y = 0.6;
        let c = optimal_consumption(y, &p, None).unwrap();
        assert!((c - star * 0.12f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn clamp_matches_grid_search() {
        let p = Preferences::new(0.08, 2.0, 1.2).unwrap();
        let set = ConstraintSet::union(vec![(0.0, 0.02), (0.05, 0.06), (0.2, 0.3)]).unwrap();
        for &y in &[-3.0, -1.0, 0.0, 1.0, 3.0] {
            let c = clamp_consumption(y, &p, &set).unwrap();
            let best = (0..=10_000)
                .map(|i| i as f64 * 0.3 / 10_000.0)
                .filter(|c| set.contains(&[*c]))
                .map(|c| p.consumption_objective(c, y))
                .fold(f64::INFINITY, f64::min);
            assert!(p.consumption_objective(c, y) <= best + 1e-12);
        }
    }

    #[test]
    fn rejects_negative_consumption_sets() {
        let m = MarketModel::black_scholes(0.03, 0.05, 0.17).unwrap();
        let p = Preferences::new(0.08, 2.0, 1.2).unwrap();
        let bad = ConstraintSet::interval(-0.1, 0.5).unwrap();
        assert!(GeneratorContext::new(m, p, ConstraintSet::full(1).unwrap(), Some(bad), 1.0).is_err());
    }
}
