use nalgebra::{DMatrix, DVector};

use super::optim::nelder_mead_box;
use super::{Prediction, Surrogate};
use crate::error::{Error, Result};

/// Settings for [`GprModel::fit`].
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct GprConfig {
    /// One length-scale per input dimension instead of a shared one.
    pub per_dimension: bool,
    /// Multi-start count for the likelihood search.
    pub starts: usize,
    pub length_scale_min: f64,
    pub length_scale_max: f64,
    /// Initial nugget on the correlation matrix, escalated by 10x on failure.
    pub jitter: f64,
    pub max_jitter: f64,
    /// Likelihood evaluations per start.
    pub evals_per_start: usize,
}

impl Default for GprConfig {
    fn default() -> Self {
        Self {
            per_dimension: false,
            starts: 5,
            length_scale_min: 1e-2,
            length_scale_max: 10.0,
            jitter: 1e-10,
            max_jitter: 1e-6,
            evals_per_start: 40,
        }
    }
}

impl GprConfig {
    /// Starting points of the multi-start search, as log length-scales.
    pub fn start_points(&self, dim: usize) -> Vec<Vec<f64>> {
        let k = self.starts.max(1);
        let (lo, hi) = (self.length_scale_min.ln(), self.length_scale_max.ln());
        let params = if self.per_dimension { dim } else { 1 };
        (0..k)
            .map(|i| {
                let t = (i as f64 + 0.5) / k as f64;
                vec![lo + t * (hi - lo); params]
            })
            .collect()
    }
}

/// Squared-exponential Gaussian process with standardized targets.
///
/// The kernel is `sigma2 * exp(-0.5 * sum((x - x') / l)^2)`; the amplitude is
/// profiled out of the likelihood in closed form, so the search runs over the
/// length-scales only.
#[derive(Clone, Debug)]
pub struct GprModel {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
    length_scales: Vec<f64>,
    signal_var: f64,
    jitter: f64,
    // row-major lower Cholesky factor of R + jitter * I
    chol: Vec<f64>,
    alpha: Vec<f64>,
    log_likelihood: f64,
    start_log_likelihoods: Vec<f64>,
}

struct Factorized {
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    signal_var: f64,
    lml: f64,
}

fn standardize(y: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = if var > 0.0 && var.is_finite() { var.sqrt() } else { 1.0 };
    (y.iter().map(|v| (v - mean) / scale).collect(), mean, scale)
}

fn expand(log_ls: &[f64], dim: usize) -> Vec<f64> {
    if log_ls.len() == dim {
        log_ls.iter().map(|v| v.exp()).collect()
    } else {
        vec![log_ls[0].exp(); dim]
    }
}

fn correlation(a: &[f64], b: &[f64], inv_ls: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((p, q), w) in a.iter().zip(b).zip(inv_ls) {
        let t = (p - q) * w;
        s += t * t;
    }
    (-0.5 * s).exp()
}

fn factorize(x: &[Vec<f64>], ys: &[f64], ls: &[f64], jitter: f64) -> Option<Factorized> {
    let n = x.len();
    let inv: Vec<f64> = ls.iter().map(|l| 1.0 / l).collect();
    let mut r = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = 1.0 + jitter;
        for j in 0..i {
            let c = correlation(&x[i], &x[j], &inv);
            r[(i, j)] = c;
            r[(j, i)] = c;
        }
    }
    let chol = r.cholesky()?;
    let yv = DVector::from_column_slice(ys);
    let alpha = chol.solve(&yv);
    let l = chol.unpack();
    let log_det: f64 = 2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>();
    let quad = yv.dot(&alpha);
    let signal_var = (quad / n as f64).max(1e-12);
    let lml = -0.5 * n as f64 * ((2.0 * std::f64::consts::PI * signal_var).ln() + 1.0) - 0.5 * log_det;
    if !lml.is_finite() || alpha.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(Factorized {
        chol: l,
        alpha,
        signal_var,
        lml,
    })
}

/// Profile log marginal likelihood of raw targets `y` (standardized
/// internally) at the given log length-scales. `None` if the kernel matrix
/// cannot be factorized.
pub fn log_marginal_likelihood(
    x: &[Vec<f64>],
    y: &[f64],
    log_length_scales: &[f64],
    jitter: f64,
) -> Option<f64> {
    let (ys, _, _) = standardize(y);
    let dim = x.first()?.len();
    factorize(x, &ys, &expand(log_length_scales, dim), jitter).map(|f| f.lml)
}

impl GprModel {
    pub fn fit(x: &[Vec<f64>], y: &[f64], config: &GprConfig) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::invalid("GPR needs at least two training points"));
        }
        if x.len() != y.len() {
            return Err(Error::invalid("GPR inputs and targets differ in length"));
        }
        if y.iter().chain(x.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("GPR training data contains non-finite values"));
        }
        let dim = x[0].len();
        let (ys, y_mean, y_scale) = standardize(y);
        let starts = config.start_points(dim);
        let np = starts[0].len();
        let lo = vec![config.length_scale_min.ln(); np];
        let hi = vec![config.length_scale_max.ln(); np];

        let mut jitter = config.jitter;
        loop {
            let objective = |p: &[f64]| match factorize(x, &ys, &expand(p, dim), jitter) {
                Some(f) => -f.lml,
                None => f64::INFINITY,
            };
            let start_lml: Vec<f64> = starts.iter().map(|s| -objective(s)).collect();
            let mut best: Option<(Vec<f64>, f64)> = None;
            for s in &starts {
                let (p, v) = nelder_mead_box(
                    objective,
                    s,
                    &lo,
                    &hi,
                    0.5,
                    config.evals_per_start,
                    1e-6,
                );
                if v.is_finite() && best.as_ref().is_none_or(|(_, b)| v < *b) {
                    best = Some((p, v));
                }
            }
            if let Some((p, _)) = best {
                let ls = expand(&p, dim);
                if let Some(f) = factorize(x, &ys, &ls, jitter) {
                    let n = x.len();
                    let mut chol = vec![0.0; n * n];
                    for i in 0..n {
                        for j in 0..=i {
                            chol[i * n + j] = f.chol[(i, j)];
                        }
                    }
                    return Ok(Self {
                        x: x.to_vec(),
                        y: y.to_vec(),
                        y_mean,
                        y_scale,
                        length_scales: ls,
                        signal_var: f.signal_var,
                        jitter,
                        chol,
                        alpha: f.alpha.iter().copied().collect(),
                        log_likelihood: f.lml,
                        start_log_likelihoods: start_lml,
                    });
                }
            }
            if jitter >= config.max_jitter {
                return Err(Error::TrainingFailure(format!(
                    "kernel matrix not positive definite with jitter up to {:e}",
                    config.max_jitter
                )));
            }
            jitter = (jitter * 10.0).min(config.max_jitter);
        }
    }

    pub fn length_scales(&self) -> &[f64] {
        &self.length_scales
    }

    /// Kernel amplitude in standardized target units.
    pub fn signal_variance(&self) -> f64 {
        self.signal_var
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Mean and scale used to standardize the targets.
    pub fn target_scaling(&self) -> (f64, f64) {
        (self.y_mean, self.y_scale)
    }

    /// Prior standard deviation in target units.
    pub fn prior_std(&self) -> f64 {
        self.signal_var.sqrt() * self.y_scale
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn start_log_likelihoods(&self) -> &[f64] {
        &self.start_log_likelihoods
    }

    pub fn training_inputs(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn training_targets(&self) -> &[f64] {
        &self.y
    }

    /// Prediction with input validation.
    pub fn try_predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.length_scales.len() {
            return Err(Error::invalid("prediction point has the wrong dimension"));
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("prediction point contains NaN"));
        }
        Ok(self.predict(x))
    }

    fn cross_correlation(&self, x: &[f64]) -> Vec<f64> {
        let inv: Vec<f64> = self.length_scales.iter().map(|l| 1.0 / l).collect();
        self.x.iter().map(|xi| correlation(xi, x, &inv)).collect()
    }
}

impl Surrogate for GprModel {
    fn predict(&self, x: &[f64]) -> Prediction {
        let r = self.cross_correlation(x);
        let mean: f64 = r.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        // forward substitution: v = L^-1 r
        let n = r.len();
        let mut v = vec![0.0; n];
        for i in 0..n {
            let row = &self.chol[i * n..i * n + i];
            let s: f64 = row.iter().zip(&v[..i]).map(|(a, b)| a * b).sum();
            v[i] = (r[i] - s) / self.chol[i * n + i];
        }
        let explained: f64 = v.iter().map(|t| t * t).sum();
        let var = (self.signal_var * (1.0 - explained)).max(0.0);
        Prediction {
            mean: self.y_mean + self.y_scale * mean,
            std: self.y_scale * var.sqrt(),
        }
    }

    fn predict_mean(&self, x: &[f64]) -> f64 {
        let r = self.cross_correlation(x);
        let mean: f64 = r.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        self.y_mean + self.y_scale * mean
    }
}
