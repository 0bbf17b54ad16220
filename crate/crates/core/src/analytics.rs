//! A priori bounds on the value process, the Lyapunov operator, and the
//! parameter conditions under which the optimal strategy is verified.
//!
//! Every condition is reported with both sides of its inequality.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::generator::GeneratorContext;
use crate::linalg::{norm, Matrix};
use crate::market::{LocalMarket, MarketBounds, MarketModel, ModelParams};
use crate::prefs::Preferences;
use crate::solver::BsdeSolution;
use crate::{Error, Result};

/// One inequality `lhs < rhs` (or `>`, as named), evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

impl Condition {
    fn new(name: &str, holds: bool, lhs: f64, rhs: f64) -> Self {
        Condition {
            name: name.to_string(),
            holds,
            lhs,
            rhs,
        }
    }

    fn less(name: &str, lhs: f64, rhs: f64) -> Self {
        Self::new(name, lhs < rhs, lhs, rhs)
    }

    fn greater(name: &str, lhs: f64, rhs: f64) -> Self {
        Self::new(name, lhs > rhs, lhs, rhs)
    }
}

/// `C1 = (1 - gamma) r_min - delta theta + 2 (C0 + gamma (gamma - 1) C_p)`.
pub fn compute_c1(bounds: &MarketBounds, prefs: &Preferences) -> f64 {
    let g = prefs.gamma;
    (1.0 - g) * bounds.r_min - prefs.delta * prefs.theta + 2.0 * (bounds.c0 + g * (g - 1.0) * bounds.c_p)
}

/// `C2(t) = rate (T - t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C2 {
    pub rate: f64,
    pub horizon: f64,
}

impl C2 {
    pub fn at(&self, t: f64) -> f64 {
        self.rate * (self.horizon - t)
    }
}

/// `C1` and `C2(t) = [(theta/psi) delta^psi e^{-(psi/theta) C1 T}
/// + (1 - gamma)/(2 gamma) C0 - delta theta] (T - t)`.
pub fn compute_c1_c2(bounds: &MarketBounds, prefs: &Preferences, horizon: f64) -> (f64, C2) {
    let c1 = compute_c1(bounds, prefs);
    let g = prefs.gamma;
    let rate = prefs.consumption_term(c1 * horizon) + (1.0 - g) / (2.0 * g) * bounds.c0
        - prefs.delta * prefs.theta;
    (c1, C2 { rate, horizon })
}

/// `1/2 + 2 (1 - gamma)/gamma |sigma' Sigma^{-1} sigma rho| |rho|` with
/// Frobenius norms.
pub fn lfo_expression(local: &LocalMarket, gamma: f64) -> f64 {
    0.5 + 2.0 * (1.0 - gamma) / gamma * local.projected_rho().frobenius() * local.coeffs.rho.frobenius()
}

/// The positivity condition over `grid`, reported at its worst point.
pub fn check_lfo_condition(
    model: &MarketModel,
    prefs: &Preferences,
    grid: &[(f64, Vec<f64>)],
) -> Result<Condition> {
    let mut worst = f64::INFINITY;
    for (t, x) in grid {
        worst = worst.min(lfo_expression(&model.local(*t, x)?, prefs.gamma));
    }
    Ok(Condition::greater("1/2 + 2(1-g)/g |s'S^-1 s rho| |rho| > 0", worst, 0.0))
}

/// A twice differentiable test function on the state space.
pub trait Lyapunov {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> Matrix;
}

/// `c0 x^2` in one dimension.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic(pub f64);

impl Lyapunov for Quadratic {
    fn value(&self, x: &[f64]) -> f64 {
        self.0 * x[0] * x[0]
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![2.0 * self.0 * x[0]]
    }
    fn hessian(&self, _x: &[f64]) -> Matrix {
        Matrix::scalar(2.0 * self.0)
    }
}

/// `c1 x - c2 ln x` on `(0, inf)`.
#[derive(Debug, Clone, Copy)]
pub struct LinearLog {
    pub c1: f64,
    pub c2: f64,
}

impl Lyapunov for LinearLog {
    fn value(&self, x: &[f64]) -> f64 {
        self.c1 * x[0] - self.c2 * x[0].ln()
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![self.c1 - self.c2 / x[0]]
    }
    fn hessian(&self, x: &[f64]) -> Matrix {
        Matrix::scalar(self.c2 / (x[0] * x[0]))
    }
}

/// Constant test function.
#[derive(Debug, Clone, Copy)]
pub struct Flat(pub f64);

impl Lyapunov for Flat {
    fn value(&self, _x: &[f64]) -> f64 {
        self.0
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }
    fn hessian(&self, x: &[f64]) -> Matrix {
        Matrix::zeros(x.len(), x.len())
    }
}

/// The Lyapunov operator
///
/// ```text
/// F(phi) = b'grad phi + 1/2 sum A_ij d_ij phi
///        - 2(1-g)/g |s'S^-1 mu| |rho a' grad phi| - (1-g) C_p |rho a' grad phi|
///        + 1/4 num^2 / den
/// num = (1-g) C_p |rho| + 2(1-g)/g |s'S^-1 mu| |rho| - |grad phi' a|
///       + 2(1-g)/g |s'S^-1 s rho| |rho a' grad phi|
/// den = 1/2 + 2(1-g)/g |s'S^-1 s rho| |rho|
/// ```
///
/// with Euclidean vector norms and Frobenius matrix norms. Fails when the
/// denominator is not positive.
pub fn lyapunov_operator<P: Lyapunov + ?Sized>(
    phi: &P,
    model: &MarketModel,
    prefs: &Preferences,
    c_p: f64,
    t: f64,
    x: &[f64],
) -> Result<f64> {
    model.check_in_domain(x)?;
    let local = model.local(t, x)?;
    let c = &local.coeffs;
    let g = prefs.gamma;
    let k = c.state_dim();
    let grad = phi.gradient(x);
    let hess = phi.hessian(x);
    let mut drift = vec![0.0; k];
    model.drift(t, x, &mut drift);
    let big_a = c.a.outer_gram();
    let mut second = 0.0;
    for i in 0..k {
        for j in 0..k {
            second += big_a[(i, j)] * hess[(i, j)];
        }
    }
    let a_grad = c.a.tr_mat_vec(&grad);
    let rho_a_grad = norm(&c.rho.mat_vec(&a_grad));
    let grad_a = norm(&a_grad);
    let mpr = norm(&local.risk_price());
    let proj = local.projected_rho().frobenius();
    let rho = c.rho.frobenius();
    let w = 2.0 * (1.0 - g) / g;
    let den = 0.5 + w * proj * rho;
    if !(den > 0.0) {
        return Err(Error::domain("Lyapunov denominator", den, "> 0"));
    }
    let num = (1.0 - g) * c_p * rho + w * mpr * rho - grad_a + w * proj * rho_a_grad;
    Ok(crate::linalg::dot(&drift, &grad) + 0.5 * second - w * mpr * rho_a_grad
        - (1.0 - g) * c_p * rho_a_grad
        + 0.25 * num * num / den)
}

/// Largest operator value over `points` and where it is attained.
pub fn lyapunov_sup<P: Lyapunov + ?Sized>(
    phi: &P,
    model: &MarketModel,
    prefs: &Preferences,
    c_p: f64,
    t: f64,
    points: &[Vec<f64>],
) -> Result<(f64, usize)> {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, x) in points.iter().enumerate() {
        let v = lyapunov_operator(phi, model, prefs, c_p, t, x)?;
        if v > best.0 {
            best = (v, i);
        }
    }
    Ok(best)
}

/// Scan of the operator on a model-specific grid, with one refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovScan {
    pub test_function: String,
    pub sup: f64,
    pub sup_refined: f64,
    pub argmax: f64,
    pub interior: bool,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<Vec<f64>> {
    (0..=n)
        .map(|i| vec![lo * (hi / lo).powf(i as f64 / n as f64)])
        .collect()
}

fn lin_grid(lo: f64, hi: f64, n: usize) -> Vec<Vec<f64>> {
    (0..=n).map(|i| vec![lo + (hi - lo) * i as f64 / n as f64]).collect()
}

/// Scans the operator for the standard test function of each state model:
/// `0.01 (x - ln x)` on `[1e-3, 1e3]` for the square-root model and
/// `0.01 x^2` on `[-1e3, 1e3]` for the linear diffusion.
pub fn lyapunov_scan(model: &MarketModel, prefs: &Preferences, c_p: f64) -> Result<Option<LyapunovScan>> {
    let (phi, name, grid): (&dyn Lyapunov, &str, fn(usize) -> Vec<Vec<f64>>) = match model.params() {
        ModelParams::Heston { .. } => (
            &LinearLog { c1: 0.01, c2: 0.01 },
            "0.01 x - 0.01 ln x",
            |n| log_grid(1e-3, 1e3, n),
        ),
        ModelParams::LinearDiffusion { .. } => (&Quadratic(0.01), "0.01 x^2", |n| lin_grid(-1e3, 1e3, n)),
        _ => return Ok(None),
    };
    let coarse = grid(600);
    let fine = grid(1200);
    let (sup, _) = lyapunov_sup(phi, model, prefs, c_p, 0.0, &coarse)?;
    let (sup_refined, i) = lyapunov_sup(phi, model, prefs, c_p, 0.0, &fine)?;
    Ok(Some(LyapunovScan {
        test_function: name.to_string(),
        sup,
        sup_refined,
        argmax: fine[i][0],
        interior: i != 0 && i != fine.len() - 1,
    }))
}

/// Conditions for the linear-diffusion market:
/// (i) `b, a > 0`; (ii) `r1 > 0`;
/// (iii) `a^2/b < (1 + 4(1-g) rho^2/g) / (2(1-g) rho^2/g - 1)^2`;
/// (iv) `(psi - 1) r1 < (b - (psi - 1) a lambda1 rho)^2 / (2 a^2)`.
pub fn check_prop_exp2(model: &MarketModel, prefs: &Preferences) -> Result<Vec<Condition>> {
    let ModelParams::LinearDiffusion {
        b,
        a,
        r1,
        lambda1,
        rho,
        ..
    } = *model.params()
    else {
        return Err(Error::Unsupported("conditions apply to the linear diffusion market"));
    };
    let g = prefs.gamma;
    let psi = prefs.psi;
    let s = 2.0 * (1.0 - g) * rho * rho / g;
    let num = 1.0 + 4.0 * (1.0 - g) * rho * rho / g;
    Ok(vec![
        Condition::greater("(i) min(b, a) > 0", b.min(a), 0.0),
        Condition::greater("(ii) r1 > 0", r1, 0.0),
        Condition::less("(iii) a^2/b < (1+4(1-g)rho^2/g)/(2(1-g)rho^2/g-1)^2", a * a / b, num / ((s - 1.0) * (s - 1.0))),
        Condition::less(
            "(iv) (psi-1) r1 < (b-(psi-1) a lambda1 rho)^2/(2a^2)",
            (psi - 1.0) * r1,
            (b - (psi - 1.0) * a * lambda1 * rho).powi(2) / (2.0 * a * a),
        ),
    ])
}

/// Conditions for the square-root market:
/// (i) positive parameters, `r1 >= 0` and `b l > a^2/2`;
/// (ii) `1/2 + 2(1-g) rho^2/g > 0`; (iii) `(psi - 1) r1 < b^2/(2 a^2)`.
pub fn check_prop_exp1(model: &MarketModel, prefs: &Preferences) -> Result<Vec<Condition>> {
    let ModelParams::Heston {
        b,
        l,
        a,
        r1,
        sigma_scale,
        lambda,
        rho,
        ..
    } = *model.params()
    else {
        return Err(Error::Unsupported("conditions apply to the square-root market"));
    };
    let g = prefs.gamma;
    let positive = b > 0.0 && l > 0.0 && a > 0.0 && sigma_scale > 0.0 && lambda > 0.0 && r1 >= 0.0;
    let lhs = b * l;
    let rhs = a * a / 2.0;
    Ok(vec![
        Condition::new("(i) positivity and b l > a^2/2", positive && lhs > rhs, lhs, rhs),
        Condition::greater("(ii) 1/2 + 2(1-g) rho^2/g > 0", 0.5 + 2.0 * (1.0 - g) * rho * rho / g, 0.0),
        Condition::less("(iii) (psi-1) r1 < b^2/(2a^2)", (prefs.psi - 1.0) * r1, b * b / (2.0 * a * a)),
    ])
}

/// `zeta < beta^2 / (2 a^2)`, under which the Laplace transform of the
/// integrated square-root process is finite.
pub fn laplace_condition(zeta: f64, beta: f64, a: f64) -> Result<Condition> {
    if a == 0.0 || !a.is_finite() {
        return Err(Error::domain("a", a, "a != 0"));
    }
    Ok(Condition::less("zeta < beta^2/(2a^2)", zeta, beta * beta / (2.0 * a * a)))
}

/// Outcome of checking solver output against the a priori bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YBoundCheck {
    pub upper: f64,
    /// Largest `Y - C1 T` over all paths and steps.
    pub worst_upper: f64,
    pub upper_ok: bool,
    /// Whether the lower bound applies (constant short rate only).
    pub lower_checked: bool,
    /// Smallest `(Y - lower) / stderr` over steps; negative means below.
    pub worst_lower_in_se: f64,
    pub lower_ok: bool,
}

impl YBoundCheck {
    pub fn passed(&self) -> bool {
        self.upper_ok && self.lower_ok
    }
}

/// Upper bound `Y <= C1 T` on every path and step (tolerance 1e-9); when the
/// short rate is constant, also `Y >= (1-g) r (T-t) + C2(t)` up to three
/// regression standard errors.
pub fn check_y_bounds(solution: &BsdeSolution, ctx: &GeneratorContext) -> YBoundCheck {
    let (c1, c2) = compute_c1_c2(&ctx.bounds, &ctx.prefs, ctx.horizon);
    let upper = c1 * ctx.horizon;
    let worst_upper = solution
        .steps
        .iter()
        .map(|s| s.y_max - upper)
        .fold(f64::NEG_INFINITY, f64::max);
    let rate = ctx.model.has_constant_rate().then(|| {
        ctx.model
            .coefficients(0.0, ctx.model.initial_state())
            .r
    });
    let mut worst_lower = f64::INFINITY;
    let mut lower_ok = true;
    if let Some(r) = rate {
        let g = ctx.prefs.gamma;
        for s in &solution.steps {
            let lower = (1.0 - g) * r * (ctx.horizon - s.t) + c2.at(s.t);
            let gap = s.y_min - lower;
            let tol = 3.0 * s.stderr;
            if gap < -tol - 1e-12 * (1.0 + lower.abs()) {
                lower_ok = false;
            }
            let scaled = if s.stderr > 0.0 { gap / s.stderr } else if gap >= 0.0 { f64::INFINITY } else { gap / 1e-300 };
            worst_lower = worst_lower.min(scaled);
        }
    }
    YBoundCheck {
        upper,
        worst_upper,
        upper_ok: worst_upper <= 1e-9,
        lower_checked: rate.is_some(),
        worst_lower_in_se: worst_lower,
        lower_ok,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub c0: f64,
    pub r_min: f64,
    pub c_p: f64,
    pub c1: f64,
    pub y_upper: f64,
    pub c2: C2,
    pub lfo_condition: Condition,
    pub lyapunov: Option<LyapunovScan>,
    pub prop_conditions: Vec<Condition>,
    pub feller: Option<Condition>,
    pub y_bounds: Option<YBoundCheck>,
    pub notes: Vec<String>,
}

/// Bounds and parameter conditions for the context's model.
pub fn verification_report(ctx: &GeneratorContext) -> Result<VerificationReport> {
    let (c1, c2) = compute_c1_c2(&ctx.bounds, &ctx.prefs, ctx.horizon);
    let grid = ctx.model.sample_grid(ctx.horizon);
    let lfo_condition = check_lfo_condition(&ctx.model, &ctx.prefs, &grid)?;
    let mut notes = Vec::new();
    let lyapunov = if lfo_condition.holds {
        lyapunov_scan(&ctx.model, &ctx.prefs, ctx.bounds.c_p)?
    } else {
        notes.push("Lyapunov operator not evaluated: its denominator is not positive".to_string());
        None
    };
    let prop_conditions = match ctx.model.params() {
        ModelParams::LinearDiffusion { .. } => check_prop_exp2(&ctx.model, &ctx.prefs)?,
        ModelParams::Heston { .. } => check_prop_exp1(&ctx.model, &ctx.prefs)?,
        _ => Vec::new(),
    };
    for c in prop_conditions.iter().filter(|c| !c.holds) {
        notes.push(format!("condition {} fails: lhs {} vs rhs {}", c.name, c.lhs, c.rhs));
    }
    let feller = ctx
        .model
        .feller()
        .map(|(h, l, r)| Condition::new("b l > a^2/2", h, l, r));
    if let Some(f) = &feller {
        if !f.holds {
            notes.push("Feller condition fails; simulated paths rely on flooring".to_string());
        }
    }
    if !ctx.model.has_constant_rate() {
        notes.push("lower bound on Y not checked: the short rate is state dependent".to_string());
    }
    Ok(VerificationReport {
        c0: ctx.bounds.c0,
        r_min: ctx.bounds.r_min,
        c_p: ctx.bounds.c_p,
        c1,
        y_upper: c1 * ctx.horizon,
        c2,
        lfo_condition,
        lyapunov,
        prop_conditions,
        feller,
        y_bounds: None,
        notes,
    })
}
