use ezbsde_core::constraint::ConstraintSet;
use ezbsde_core::generator::{generator_h, generator_h_consumption, GeneratorContext};
use ezbsde_core::market::MarketModel;
use ezbsde_core::prefs::Preferences;
use proptest::prelude::*;

fn heston_ctx(set_pi: ConstraintSet, set_c: Option<ConstraintSet>) -> GeneratorContext {
    let m = MarketModel::heston(5.0, 0.0225, 0.25, 0.05, 0.0, 1.0, 0.47, -0.5).unwrap();
    let p = Preferences::new(0.08, 2.0, 1.2).unwrap();
    GeneratorContext::new(m, p, set_pi, set_c, 10.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    /// With `0` in the portfolio set the driver is dominated by
    /// `5/2 |z|^2 + 2 C0 + 2 g (g-1) C_p + |linear terms| + |(1-g) r - delta theta|`
    /// plus the consumption term.
    #[test]
    fn driver_growth_bound(
        lo in -1.0..0.0f64,
        hi in 0.0..1.0f64,
        x in 0.001..1.0f64,
        z in -5.0..5.0f64,
        y in -5.0..2.0f64,
    ) {
        let ctx = heston_ctx(ConstraintSet::interval(lo, hi).unwrap(), None);
        let p = ctx.prefs;
        let g = p.gamma;
        let h = generator_h(&ctx, 0.0, &[x], y, &[z]).unwrap();
        let local = ctx.model.local(0.0, &[x]).unwrap();
        let c = &local.coeffs;
        let lin = ((1.0 - g) / g * local.sigma_inv_mu[0] * c.sigma[(0, 0)] * c.rho[(0, 0)] * z).abs();
        let bound = 2.5 * z * z + 2.0 * ctx.bounds.c0 + 2.0 * g * (g - 1.0) * ctx.bounds.c_p + lin
            + ((1.0 - g) * c.r - p.delta * p.theta).abs()
            + p.consumption_term(y.min(ctx.y_upper()));
        prop_assert!(h <= bound + 1e-12, "{} > {}", h, bound);
    }

    /// Restricting consumption can only raise the infimum.
    #[test]
    fn constrained_consumption_dominates(
        y in -5.0..3.0f64,
        lo in 0.0..0.2f64,
        w in 0.0..0.2f64,
        x in 0.005..0.1f64,
    ) {
        let free = heston_ctx(ConstraintSet::full(1).unwrap(), None);
        let capped = heston_ctx(ConstraintSet::full(1).unwrap(), Some(ConstraintSet::interval(lo, lo + w).unwrap()));
        let a = generator_h(&free, 0.0, &[x], y, &[0.1]).unwrap();
        let b = generator_h_consumption(&capped, 0.0, &[x], y, &[0.1]).unwrap();
        prop_assert!(b >= a - 1e-13 * (1.0 + a.abs()));
    }
}

#[test]
fn interior_consumption_interval_is_inactive() {
    let p = Preferences::new(0.08, 2.0, 1.2).unwrap();
    let y = 0.3;
    let star = p.consumption_ratio(y);
    let free = heston_ctx(ConstraintSet::full(1).unwrap(), None);
    let wide = heston_ctx(
        ConstraintSet::full(1).unwrap(),
        Some(ConstraintSet::interval(0.5 * star, 2.0 * star).unwrap()),
    );
    let a = generator_h(&free, 0.0, &[0.02], y, &[0.0]).unwrap();
    let b = generator_h_consumption(&wide, 0.0, &[0.02], y, &[0.0]).unwrap();
    assert!((a - b).abs() < 1e-14);
}
