use ezbsde_core::market::{market_bounds, MarketModel};
use proptest::prelude::*;

fn models() -> Vec<(MarketModel, f64)> {
    vec![
        (MarketModel::black_scholes(0.03, 0.05, 0.17).unwrap(), 30.0),
        (
            MarketModel::linear_diffusion(0.0226, 0.0189, 0.0436, 0.0014, 1.0, 0.05, 1.0, -0.935).unwrap(),
            1.0,
        ),
        (
            MarketModel::heston(5.0, 0.0225, 0.25, 0.05, 0.0, 1.0, 0.47, -0.5).unwrap(),
            10.0,
        ),
    ]
}

fn state(model: &MarketModel, u: f64) -> Vec<f64> {
    match model.domain()[0] {
        (lo, _) if lo == 0.0 => vec![10f64.powf(-6.0 + 10.0 * u)],
        _ => vec![-1e4 + 2e4 * u],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn coefficients_are_well_posed(u in 0.0..1.0f64, s in 0.0..1.0f64) {
        for (model, horizon) in models() {
            let grid = model.sample_grid(horizon);
            let bounds = market_bounds(&model, &grid).unwrap();
            let x = state(&model, u);
            let local = model.local(s * horizon, &x).unwrap();
            prop_assert!(local.coeffs.correlation_deviation() <= 1e-12);
            prop_assert!(local.mpr_sq > 0.0);
            prop_assert!(local.mpr_sq <= bounds.c0 * (1.0 + 1e-12));
            prop_assert!(local.coeffs.r >= bounds.r_min);
        }
    }

    #[test]
    fn heston_price_of_risk_is_constant(u in 0.0..1.0f64) {
        let model = &models()[2].0;
        let local = model.local(0.0, &state(model, u)).unwrap();
        prop_assert!((local.mpr_sq - 0.47 * 0.47).abs() < 1e-12);
    }
}

#[test]
fn reference_bounds() {
    let [(bs, tb), (_, _), (h, th)] = <[_; 3]>::try_from(models()).unwrap();
    let b = market_bounds(&bs, &bs.sample_grid(tb)).unwrap();
    assert_eq!(b.r_min, 0.0);
    assert!((b.c0 - 0.086505).abs() < 1e-6);
    let b = market_bounds(&h, &h.sample_grid(th)).unwrap();
    assert!((b.c0 - 0.2209).abs() < 1e-12);
}
