use nalgebra::{DMatrix, DVector};

use super::{Prediction, Surrogate};
use crate::error::{Error, Result};

/// Cubic radial basis interpolant with a linear polynomial tail.
#[derive(Clone, Debug)]
pub struct RbfModel {
    centers: Vec<Vec<f64>>,
    weights: Vec<f64>,
    // [constant, coefficient per coordinate]
    tail: Vec<f64>,
}

impl RbfModel {
    pub fn fit(x: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::invalid("RBF needs matching, non-empty inputs and targets"));
        }
        let n = x.len();
        let d = x[0].len();
        if n < d + 2 {
            return Err(Error::TrainingFailure(format!(
                "cubic RBF with a linear tail needs at least {} points in {} dimensions (got {n})",
                d + 2,
                d
            )));
        }
        let m = n + d + 1;
        let mut a = DMatrix::<f64>::zeros(m, m);
        for i in 0..n {
            for j in 0..i {
                let r = super::sq_dist(&x[i], &x[j]).sqrt();
                let phi = r * r * r;
                a[(i, j)] = phi;
                a[(j, i)] = phi;
            }
            a[(i, n)] = 1.0;
            a[(n, i)] = 1.0;
            for k in 0..d {
                a[(i, n + 1 + k)] = x[i][k];
                a[(n + 1 + k, i)] = x[i][k];
            }
        }
        let mut rhs = DVector::<f64>::zeros(m);
        for i in 0..n {
            rhs[i] = y[i];
        }
        let sol = a
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::TrainingFailure("singular RBF saddle-point system".into()))?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::TrainingFailure("RBF solve produced non-finite weights".into()));
        }
        let residual = (&a * &sol - &rhs).amax();
        let scale = 1.0 + rhs.amax();
        if residual > 1e-6 * scale {
            return Err(Error::TrainingFailure(format!(
                "RBF system is numerically singular (residual {residual:e})"
            )));
        }
        Ok(Self {
            centers: x.to_vec(),
            weights: sol.rows(0, n).iter().copied().collect(),
            tail: sol.rows(n, d + 1).iter().copied().collect(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn tail(&self) -> &[f64] {
        &self.tail
    }

    fn value(&self, x: &[f64]) -> f64 {
        let radial: f64 = self
            .centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| {
                let r = super::sq_dist(c, x).sqrt();
                w * r * r * r
            })
            .sum();
        let linear: f64 = self.tail[1..].iter().zip(x).map(|(c, v)| c * v).sum();
        radial + self.tail[0] + linear
    }
}

impl Surrogate for RbfModel {
    fn predict(&self, x: &[f64]) -> Prediction {
        Prediction {
            mean: self.value(x),
            std: 0.0,
        }
    }

    fn predict_mean(&self, x: &[f64]) -> f64 {
        self.value(x)
    }
}
