//! Deterministic reference solution for constant coefficients, where the
//! value BSDE has `Z = 0` and reduces to `Y' = -H(Y)`, `Y(T) = 0`.

use alloc::vec::Vec;


#[allow(unused_imports)]
use num_traits::Float;
use crate::generator::GeneratorContext;
use crate::{Error, Result};

/// Default number of integration steps over the horizon.
pub const DEFAULT_ODE_STEPS: usize = 10_000;

/// `Y` at `steps + 1` equally spaced times on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub horizon: f64,
    pub values: Vec<f64>,
}

impl OdeSolution {
    pub fn y0(&self) -> f64 {
        self.values[0]
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    /// Linear interpolation between grid values.
    pub fn at(&self, t: f64) -> f64 {
        let n = self.steps();
        let s = (t / self.horizon * n as f64).clamp(0.0, n as f64);
        let i = (s.floor() as usize).min(n - 1);
        let w = s - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

/// Classical fourth-order Runge-Kutta, integrated backward from `T`.
/// The context's model must have constant coefficients.
pub fn solve_ode_constant(ctx: &GeneratorContext, steps: usize) -> Result<OdeSolution> {
    if !ctx.model.is_constant() {
        return Err(Error::Unsupported("the ODE reference needs constant coefficients"));
    }
    if steps == 0 {
        return Err(Error::domain("steps", 0.0, "steps >= 1"));
    }
    let x0 = ctx.model.initial_state().to_vec();
    let z = alloc::vec![0.0; ctx.model.state_dim()];
    let driver = ctx.freeze(0.0, &x0, &z)?;
    let h = ctx.horizon / steps as f64;
    let f = |y: f64| driver.eval(y);
    let mut values = alloc::vec![0.0; steps + 1];
    let mut y = 0.0;
    for i in (0..steps).rev() {
        // dY/ds = H(Y) in reversed time s = T - t.
        let k1 = f(y)?;
        let k2 = f(y + 0.5 * h * k1)?;
        let k3 = f(y + 0.5 * h * k2)?;
        let k4 = f(y + h * k3)?;
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        values[i] = y;
    }
    Ok(OdeSolution {
        horizon: ctx.horizon,
        values,
    })
}

/// `|Y0(steps) - Y0(4 steps)|`, the step-size consistency of the reference.
pub fn richardson_gap(ctx: &GeneratorContext, steps: usize) -> Result<f64> {
    let coarse = solve_ode_constant(ctx, steps)?.y0();
    let fine = solve_ode_constant(ctx, 4 * steps)?.y0();
    Ok((coarse - fine).abs())
}
