use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{normal_cdf, normal_pdf};
use crate::surrogate::Prediction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfillKind {
    /// Predicted objective value.
    Pov,
    /// Negated expected improvement.
    Ei,
    /// Lower confidence bound.
    Lcb,
}

/// Acquisition function, minimized on the surrogate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfillCriterion {
    pub kind: InfillKind,
    /// LCB trade-off weight.
    #[serde(default = "default_w")]
    pub w: f64,
}

fn default_w() -> f64 {
    2.0
}

impl Default for InfillCriterion {
    fn default() -> Self {
        Self::lcb()
    }
}

impl InfillCriterion {
    pub fn pov() -> Self {
        Self {
            kind: InfillKind::Pov,
            w: default_w(),
        }
    }

    pub fn ei() -> Self {
        Self {
            kind: InfillKind::Ei,
            w: default_w(),
        }
    }

    pub fn lcb() -> Self {
        Self {
            kind: InfillKind::Lcb,
            w: default_w(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(Error::invalid(format!("LCB weight must be positive (got {})", self.w)));
        }
        Ok(())
    }
}

const STD_FLOOR: f64 = 1e-12;

/// Infill value of a prediction; lower is better.
///
/// EI is returned negated, `(mean - y_min) * Phi(z) - std * phi(z)`, so that
/// all three criteria are minimized.
pub fn infill_value(criterion: &InfillCriterion, p: Prediction, y_min: f64) -> Result<f64> {
    if p.mean.is_nan() || p.std.is_nan() || y_min.is_nan() {
        return Err(Error::invalid("infill_value received NaN"));
    }
    if p.std < 0.0 {
        return Err(Error::invalid("negative predictive std"));
    }
    Ok(match criterion.kind {
        InfillKind::Pov => p.mean,
        InfillKind::Lcb => p.mean - criterion.w * p.std,
        InfillKind::Ei => {
            if p.std < STD_FLOOR {
                (p.mean - y_min).min(0.0)
            } else {
                let z = (y_min - p.mean) / p.std;
                (p.mean - y_min) * normal_cdf(z) - p.std * normal_pdf(z)
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn pred(mean: f64, std: f64) -> Prediction {
        Prediction { mean, std }
    }

    #[test]
    fn lcb_with_default_weight() {
        let v = infill_value(&InfillCriterion::lcb(), pred(1.0, 0.2), 0.0).unwrap();
        assert!((v - 0.6).abs() < 1e-15);
    }

    #[test]
    fn ei_zero_std_limit() {
        let ei = InfillCriterion::ei();
        assert_eq!(infill_value(&ei, pred(4.0, 0.0), 5.0).unwrap(), -1.0);
        assert_eq!(infill_value(&ei, pred(6.0, 0.0), 5.0).unwrap(), 0.0);
    }

    #[test]
    fn ei_against_monte_carlo() {
        let mut rng = RngStream::new(12);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                let y: f64 = StandardNormal.sample(&mut rng);
                y.min(0.0)
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let v = infill_value(&InfillCriterion::ei(), pred(0.0, 1.0), 0.0).unwrap();
        assert!((v - mean).abs() < 3.0 * se, "{v} vs {mean} +- {se}");
    }

    #[test]
    fn nan_rejected() {
        assert!(infill_value(&InfillCriterion::pov(), pred(f64::NAN, 0.0), 0.0).is_err());
        assert!(infill_value(&InfillCriterion::lcb(), pred(0.0, 1.0), f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn lcb_below_pov_and_ei_nonpositive(
            mean in -50.0f64..50.0,
            std in 0.0f64..10.0,
            y_min in -50.0f64..50.0,
        ) {
            let p = pred(mean, std);
            let pov = infill_value(&InfillCriterion::pov(), p, y_min).unwrap();
            let lcb = infill_value(&InfillCriterion::lcb(), p, y_min).unwrap();
            let ei = infill_value(&InfillCriterion::ei(), p, y_min).unwrap();
            prop_assert!(lcb <= pov);
            prop_assert!(ei <= 0.0);
        }
    }
}
