//! Epstein-Zin preferences with relative risk aversion `gamma > 1` and
//! elasticity of intertemporal substitution `psi > 1`.

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preferences {
    /// Discount rate per year.
    pub delta: f64,
    /// Relative risk aversion.
    pub gamma: f64,
    /// Elasticity of intertemporal substitution.
    pub psi: f64,
    /// `(1 - gamma) / (1 - 1/psi)`, strictly negative.
    pub theta: f64,
}

impl Preferences {
    pub fn new(delta: f64, gamma: f64, psi: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::domain("delta", delta, "delta > 0"));
        }
        let theta = theta_of(gamma, psi)?;
        Ok(Preferences {
            delta,
            gamma,
            psi,
            theta,
        })
    }

    /// Unconstrained optimal consumption-to-wealth ratio `delta^psi exp(-(psi/theta) y)`.
    pub fn consumption_ratio(&self, y: f64) -> f64 {
        self.delta.powf(self.psi) * (-(self.psi / self.theta) * y).exp()
    }

    /// The exponential term `(theta/psi) delta^psi exp(-(psi/theta) y)` of the
    /// value generator, which equals the infimum over `c >= 0` of
    /// [`Preferences::consumption_objective`].
    pub fn consumption_term(&self, y: f64) -> f64 {
        self.theta / self.psi * self.consumption_ratio(y)
    }

    /// `-(1 - gamma) c + delta theta exp(-y/theta) c^(1 - 1/psi)`, convex in `c >= 0`.
    pub fn consumption_objective(&self, c: f64, y: f64) -> f64 {
        -(1.0 - self.gamma) * c
            + self.delta * self.theta * (-y / self.theta).exp() * c.powf(1.0 - 1.0 / self.psi)
    }
}

/// `theta = (1 - gamma) / (1 - 1/psi)`.
pub fn theta_of(gamma: f64, psi: f64) -> Result<f64> {
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(Error::domain("gamma", gamma, "gamma > 1"));
    }
    if !(psi > 1.0) || !psi.is_finite() {
        return Err(Error::domain("psi", psi, "psi > 1"));
    }
    Ok((1.0 - gamma) / (1.0 - 1.0 / psi))
}

/// Epstein-Zin aggregator in the power form
/// `delta c^(1-1/psi) / (1-1/psi) * ((1-gamma) v)^(1-1/theta) - delta theta v`.
pub fn aggregator(c: f64, v: f64, prefs: &Preferences) -> Result<f64> {
    check_aggregator_args(c, v)?;
    let Preferences {
        delta,
        gamma,
        psi,
        theta,
    } = *prefs;
    let q = 1.0 - 1.0 / psi;
    Ok(delta * c.powf(q) / q * ((1.0 - gamma) * v).powf(1.0 - 1.0 / theta) - delta * theta * v)
}

/// The same aggregator written as a certainty-equivalent ratio,
/// `delta (1-gamma) v / (1-1/psi) * [(c / ((1-gamma) v)^(1/(1-gamma)))^(1-1/psi) - 1]`.
pub fn aggregator_ratio_form(c: f64, v: f64, prefs: &Preferences) -> Result<f64> {
    check_aggregator_args(c, v)?;
    let Preferences {
        delta, gamma, psi, ..
    } = *prefs;
    let q = 1.0 - 1.0 / psi;
    let ce = ((1.0 - gamma) * v).powf(1.0 / (1.0 - gamma));
    Ok(delta * (1.0 - gamma) * v / q * ((c / ce).powf(q) - 1.0))
}

fn check_aggregator_args(c: f64, v: f64) -> Result<()> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::domain("c", c, "c >= 0"));
    }
    if !(v < 0.0) || !v.is_finite() {
        return Err(Error::domain("v", v, "v < 0"));
    }
    Ok(())
}

/// Bequest utility `c^(1-gamma) / (1-gamma)`.
pub fn bequest_utility(c: f64, gamma: f64) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain("c", c, "c > 0"));
    }
    if !(gamma > 1.0) {
        return Err(Error::domain("gamma", gamma, "gamma > 1"));
    }
    Ok(c.powf(1.0 - gamma) / (1.0 - gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn prefs() -> Preferences {
        Preferences::new(0.08, 2.0, 1.2).unwrap()
    }

    #[test]
    fn theta_examples() {
        assert!((theta_of(2.0, 1.2).unwrap() + 6.0).abs() < 1e-12);
        assert!((theta_of(2.0, 2.0).unwrap() + 2.0).abs() < 1e-12);
        assert!((theta_of(5.0, 1.5).unwrap() + 12.0).abs() < 1e-12);
    }

    #[test]
    fn theta_rejects_out_of_domain() {
        assert!(theta_of(1.0, 1.2).is_err());
        assert!(theta_of(0.5, 1.2).is_err());
        assert!(theta_of(2.0, 1.0).is_err());
        assert!(theta_of(2.0, f64::NAN).is_err());
        assert!(Preferences::new(0.0, 2.0, 1.2).is_err());
    }

    #[test]
    fn aggregator_examples() {
        let p = prefs();
        assert!(aggregator(1.0, -1.0, &p).unwrap().abs() < 1e-15);
        assert!((aggregator(0.0, -1.0, &p).unwrap() + 0.48).abs() < 1e-15);
    }

    #[test]
    fn aggregator_rejects_nonnegative_utility() {
        let p = prefs();
        assert!(aggregator(1.0, 0.0, &p).is_err());
        assert!(aggregator(1.0, 0.5, &p).is_err());
        assert!(aggregator(-0.1, -1.0, &p).is_err());
        assert!(aggregator_ratio_form(1.0, 0.0, &p).is_err());
    }

    #[test]
    fn bequest_examples() {
        assert_eq!(bequest_utility(1.0, 2.0).unwrap(), -1.0);
        assert_eq!(bequest_utility(2.0, 2.0).unwrap(), -0.5);
        assert!(bequest_utility(0.0, 2.0).is_err());
    }

    #[test]
    fn consumption_term_is_the_unconstrained_infimum() {
        let p = prefs();
        for y in [-2.0, 0.0, 0.6, 3.0] {
            let c = p.consumption_ratio(y);
            assert!((p.consumption_objective(c, y) - p.consumption_term(y)).abs() < 1e-14);
            for k in 1..200 {
                let trial = c * k as f64 / 100.0;
                assert!(p.consumption_objective(trial, y) >= p.consumption_term(y) - 1e-14);
            }
        }
    }

    proptest! {
        #[test]
        fn theta_negative(gamma in 1.0001f64..100.0, psi in 1.0001f64..100.0) {
            prop_assert!(theta_of(gamma, psi).unwrap() < 0.0);
        }

        #[test]
        fn aggregator_forms_agree(
            c in 1e-6f64..10.0,
            v in -10.0f64..-1e-6,
            gamma in 1.05f64..10.0,
            psi in 1.05f64..5.0,
            delta in 0.001f64..0.5,
        ) {
            let p = Preferences::new(delta, gamma, psi).unwrap();
            let a = aggregator(c, v, &p).unwrap();
            let b = aggregator_ratio_form(c, v, &p).unwrap();
            // relative to the size of the two summands, since they can cancel
            let scale = (a + p.delta * p.theta * v).abs() + (p.delta * p.theta * v).abs();
            prop_assert!((a - b).abs() <= 1e-12 * scale, "{} vs {}", a, b);
        }

        #[test]
        fn aggregator_increasing_in_consumption(
            c in 0.0f64..10.0, dc in 1e-3f64..1.0, v in -10.0f64..-1e-3,
        ) {
            let p = prefs();
            prop_assert!(aggregator(c + dc, v, &p).unwrap() > aggregator(c, v, &p).unwrap());
        }

        #[test]
        fn bequest_increasing(c in 1e-3f64..100.0, dc in 1e-3f64..10.0, gamma in 1.01f64..10.0) {
            prop_assert!(bequest_utility(c + dc, gamma).unwrap() > bequest_utility(c, gamma).unwrap());
        }
    }
}
