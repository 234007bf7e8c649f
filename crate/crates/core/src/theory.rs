//! Convergence-gain analysis of a single knowledge competition.
//!
//! For a target decay `gamma(t) = gamma_o + gamma_i * exp(-lambda * t)`, current
//! time `tau` and a winning source that is `delta_tau` evaluations ahead, the
//! gain of transferring with similarity `s` over one internal step is
//!
//! ```text
//! psi(s) = s * [gamma(tau) - gamma(s * (tau + delta_tau))] - [gamma(tau) - gamma(tau + 1)]
//! ```
//!
//! and the convergence gain is `max(0, psi(max(s, 0)))`.

use std::io::Write;

use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::mean_std;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub gamma_o: f64,
    pub gamma_i: f64,
    pub lambda: f64,
    pub tau: f64,
    pub delta_tau: f64,
}

impl TheoryParams {
    pub fn new(gamma_o: f64, gamma_i: f64, lambda: f64, tau: f64, delta_tau: f64) -> Result<Self> {
        let p = Self {
            gamma_o,
            gamma_i,
            lambda,
            tau,
            delta_tau,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.gamma_o, self.gamma_i, self.lambda, self.tau, self.delta_tau]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::invalid("theory parameters must be finite"));
        }
        if self.gamma_i <= 0.0 {
            return Err(Error::invalid("gamma_i must be positive"));
        }
        if self.lambda <= 0.0 {
            return Err(Error::invalid("lambda must be positive"));
        }
        if self.tau < 1.0 {
            return Err(Error::invalid("tau must be at least 1"));
        }
        if self.delta_tau < 0.0 {
            return Err(Error::invalid("delta_tau must be non-negative"));
        }
        Ok(())
    }

    fn gamma(&self, t: f64) -> f64 {
        self.gamma_o + self.gamma_i * (-self.lambda * t).exp()
    }

    /// Improvement of one internal step at `tau`.
    fn one_step(&self) -> f64 {
        // gamma_o cancels; writing the difference directly keeps precision
        self.gamma_i * ((-self.lambda * self.tau).exp() - (-self.lambda * (self.tau + 1.0)).exp())
    }

    fn horizon(&self) -> f64 {
        self.tau + self.delta_tau
    }
}

pub fn psi(s: f64, p: &TheoryParams) -> f64 {
    let big_t = p.horizon();
    let ahead = p.gamma_i * ((-p.lambda * p.tau).exp() - (-p.lambda * s * big_t).exp());
    s * ahead - p.one_step()
}

pub fn psi_derivative(s: f64, p: &TheoryParams) -> f64 {
    let big_t = p.horizon();
    let e = (-p.lambda * s * big_t).exp();
    p.gamma(p.tau) - p.gamma(s * big_t) + s * big_t * p.lambda * p.gamma_i * e
}

pub fn convergence_gain(s: f64, p: &TheoryParams) -> f64 {
    psi(s.max(0.0), p).max(0.0)
}

pub const ROOT_TOLERANCE: f64 = 1e-10;
pub const MAX_BISECTIONS: usize = 200;

/// Smallest similarity giving a positive gain, or `None` when even `s = 1`
/// cannot beat one internal step.
///
/// `psi` is negative on `[0, tau / (tau + delta_tau)]` and strictly
/// increasing after it, so the root is bracketed there and unique.
pub fn s_tilde(p: &TheoryParams) -> Option<f64> {
    if psi(1.0, p) <= 0.0 {
        return None;
    }
    let mut lo = (p.tau / p.horizon()).min(1.0);
    let mut hi = 1.0;
    let mut mid = hi;
    for _ in 0..MAX_BISECTIONS {
        mid = 0.5 * (lo + hi);
        let v = psi(mid, p);
        if v.abs() < ROOT_TOLERANCE {
            break;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(mid)
}

type Sampler = Box<dyn FnMut(&mut RngStream) -> f64>;

/// Distribution of the conditional similarity on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensitySpec {
    Uniform { a: f64, b: f64 },
    /// Point masses `(s, weight)`; weights are normalized.
    Discrete { points: Vec<(f64, f64)> },
    /// Beta(alpha, beta) stretched from `[0, 1]` onto `[-1, 1]`.
    Beta { alpha: f64, beta: f64 },
}

impl DensitySpec {
    pub fn point_mass(s: f64) -> Self {
        DensitySpec::Discrete {
            points: vec![(s, 1.0)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let inside = |v: f64| (-1.0..=1.0).contains(&v);
        match self {
            DensitySpec::Uniform { a, b } => {
                if !(inside(*a) && inside(*b) && a <= b) {
                    return Err(Error::invalid(format!("uniform support [{a}, {b}] not in [-1, 1]")));
                }
            }
            DensitySpec::Discrete { points } => {
                let total: f64 = points.iter().map(|p| p.1).sum();
                if points.is_empty() || points.iter().any(|&(s, w)| !inside(s) || !(w >= 0.0)) || !(total > 0.0) {
                    return Err(Error::invalid("discrete density needs points in [-1, 1] with positive total weight"));
                }
            }
            DensitySpec::Beta { alpha, beta } => {
                if !(*alpha > 0.0 && *beta > 0.0) {
                    return Err(Error::invalid("beta shape parameters must be positive"));
                }
            }
        }
        Ok(())
    }

    fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        Ok(match self.clone() {
            DensitySpec::Uniform { a, b } => Box::new(move |rng| a + (b - a) * rng.uniform()),
            DensitySpec::Discrete { points } => {
                let total: f64 = points.iter().map(|p| p.1).sum();
                Box::new(move |rng| {
                    let mut u = rng.uniform() * total;
                    for &(s, w) in &points {
                        if u < w {
                            return s;
                        }
                        u -= w;
                    }
                    points.last().map(|p| p.0).unwrap_or(0.0)
                })
            }
            DensitySpec::Beta { alpha, beta } => {
                let dist = Beta::new(alpha, beta).map_err(|e| Error::invalid(e.to_string()))?;
                Box::new(move |rng| 2.0 * dist.sample(rng) - 1.0)
            }
        })
    }
}

/// Monte-Carlo estimate of the expected convergence gain and its standard error.
pub fn expected_gain(
    p: &TheoryParams,
    density: &DensitySpec,
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<(f64, f64)> {
    p.validate()?;
    if n_mc < 1000 {
        return Err(Error::invalid("expected_gain needs at least 1000 draws"));
    }
    let mut draw = density.sampler()?;
    let gains: Vec<f64> = (0..n_mc).map(|_| convergence_gain(draw(rng), p)).collect();
    let (mean, std) = mean_std(&gains);
    Ok((mean, std / (n_mc as f64).sqrt()))
}

/// `n` evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepCell {
    pub lambda_t: f64,
    pub delta_tau_star: f64,
    pub s_tilde: Option<f64>,
}

/// Threshold similarity over a `lambda x delta_tau` grid, row-major in lambda.
/// The threshold does not depend on `gamma_o` or the scale `gamma_i`.
pub fn sweep_s_tilde(lambda_grid: &[f64], delta_tau_grid: &[f64], tau: f64) -> Result<Vec<SweepCell>> {
    if lambda_grid.is_empty() || delta_tau_grid.is_empty() {
        return Err(Error::invalid("sweep grids must be non-empty"));
    }
    let mut cells = Vec::with_capacity(lambda_grid.len() * delta_tau_grid.len());
    for &lambda_t in lambda_grid {
        for &delta_tau_star in delta_tau_grid {
            let p = TheoryParams::new(0.0, 1.0, lambda_t, tau, delta_tau_star)?;
            cells.push(SweepCell {
                lambda_t,
                delta_tau_star,
                s_tilde: s_tilde(&p),
            });
        }
    }
    Ok(cells)
}

/// Writes sweep cells as CSV; `None` thresholds become empty cells.
pub fn write_sweep_csv<W: Write>(cells: &[SweepCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["lambda_t", "delta_tau_star", "s_tilde"]).map_err(to_err)?;
    for c in cells {
        w.write_record([
            c.lambda_t.to_string(),
            c.delta_tau_star.to_string(),
            c.s_tilde.map(|s| s.to_string()).unwrap_or_default(),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}
