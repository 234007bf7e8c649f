//! Surrogate models: Gaussian process regression and cubic RBF interpolation.

mod gpr;
pub(crate) mod optim;
mod rbf;

use serde::{Deserialize, Serialize};

pub use gpr::{log_marginal_likelihood, GprConfig, GprModel};
pub use rbf::RbfModel;

use crate::error::Result;

/// Posterior mean and standard deviation at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub std: f64,
}

pub trait Surrogate: Send + Sync {
    fn predict(&self, x: &[f64]) -> Prediction;

    fn predict_mean(&self, x: &[f64]) -> f64 {
        self.predict(x).mean
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateKind {
    Gpr,
    Rbf,
}

/// A fitted model of either family.
#[derive(Clone, Debug)]
pub enum FittedSurrogate {
    Gpr(GprModel),
    Rbf(RbfModel),
}

impl FittedSurrogate {
    pub fn fit(
        kind: SurrogateKind,
        x: &[Vec<f64>],
        y: &[f64],
        gpr: &GprConfig,
    ) -> Result<Self> {
        match kind {
            SurrogateKind::Gpr => GprModel::fit(x, y, gpr).map(FittedSurrogate::Gpr),
            SurrogateKind::Rbf => RbfModel::fit(x, y).map(FittedSurrogate::Rbf),
        }
    }

    pub fn kind(&self) -> SurrogateKind {
        match self {
            FittedSurrogate::Gpr(_) => SurrogateKind::Gpr,
            FittedSurrogate::Rbf(_) => SurrogateKind::Rbf,
        }
    }
}

impl Surrogate for FittedSurrogate {
    fn predict(&self, x: &[f64]) -> Prediction {
        match self {
            FittedSurrogate::Gpr(m) => m.predict(x),
            FittedSurrogate::Rbf(m) => m.predict(x),
        }
    }

    fn predict_mean(&self, x: &[f64]) -> f64 {
        match self {
            FittedSurrogate::Gpr(m) => m.predict_mean(x),
            FittedSurrogate::Rbf(m) => m.predict_mean(x),
        }
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}
