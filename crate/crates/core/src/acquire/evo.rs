//! Evolutionary optimizers used to search surrogates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Variation operators and their parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Operators {
    /// SBX crossover, polynomial mutation, roulette-wheel mating selection.
    /// Half the initial population comes from elites, half is random.
    Sbx {
        crossover_prob: f64,
        eta_c: f64,
        /// Per-gene mutation probability; `None` means `1/d`.
        mutation_prob: Option<f64>,
        eta_m: f64,
    },
    /// DE/best/1/bin with elite initialization.
    DeBest1 { f: f64, cr: f64 },
}

impl Operators {
    pub fn sbx_default() -> Self {
        Operators::Sbx {
            crossover_prob: 1.0,
            eta_c: 15.0,
            mutation_prob: None,
            eta_m: 15.0,
        }
    }

    pub fn de_default() -> Self {
        Operators::DeBest1 { f: 0.5, cr: 0.8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvoConfig {
    pub population: usize,
    pub iterations: usize,
    pub operators: Operators,
}

impl Default for EvoConfig {
    fn default() -> Self {
        Self {
            population: 50,
            iterations: 50,
            operators: Operators::sbx_default(),
        }
    }
}

impl EvoConfig {
    pub fn de() -> Self {
        Self {
            operators: Operators::de_default(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::invalid("evolutionary population must be at least 4"));
        }
        if self.iterations < 1 {
            return Err(Error::invalid("evolutionary search needs at least one iteration"));
        }
        Ok(())
    }

    /// Number of elites placed in the initial population.
    pub fn elite_slots(&self) -> usize {
        match self.operators {
            Operators::Sbx { .. } => self.population / 2,
            Operators::DeBest1 { .. } => self.population,
        }
    }
}

/// Outcome of an evolutionary search.
#[derive(Clone, Debug)]
pub struct SearchResult {
    pub best: Vec<f64>,
    pub best_value: f64,
    /// Best value after initialization and after each generation.
    pub history: Vec<f64>,
}

/// Minimizes `objective` over `[0, 1]^dim`.
///
/// `elites` seed the initial population (best first); missing slots are
/// filled with uniform random points.
pub fn evolve<F>(
    objective: F,
    dim: usize,
    elites: &[Vec<f64>],
    cfg: &EvoConfig,
    rng: &mut RngStream,
) -> SearchResult
where
    F: Fn(&[f64]) -> f64,
{
    let eval = |x: &[f64]| {
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let n_pop = cfg.population;
    let mut pop: Vec<Vec<f64>> = elites.iter().take(cfg.elite_slots()).cloned().collect();
    while pop.len() < n_pop {
        pop.push((0..dim).map(|_| rng.uniform()).collect());
    }
    let mut fit: Vec<f64> = pop.iter().map(|x| eval(x)).collect();
    let mut history = Vec::with_capacity(cfg.iterations + 1);
    history.push(fit.iter().copied().fold(f64::INFINITY, f64::min));

    for _ in 0..cfg.iterations {
        match cfg.operators {
            Operators::Sbx {
                crossover_prob,
                eta_c,
                mutation_prob,
                eta_m,
            } => {
                let pm = mutation_prob.unwrap_or(1.0 / dim as f64);
                let mut offspring = Vec::with_capacity(n_pop);
                while offspring.len() < n_pop {
                    let a = roulette(&fit, rng);
                    let b = roulette(&fit, rng);
                    let (mut c1, mut c2) = (pop[a].clone(), pop[b].clone());
                    if rng.uniform() < crossover_prob {
                        sbx(&mut c1, &mut c2, eta_c, rng);
                    }
                    polynomial_mutation(&mut c1, pm, eta_m, rng);
                    polynomial_mutation(&mut c2, pm, eta_m, rng);
                    offspring.push(c1);
                    if offspring.len() < n_pop {
                        offspring.push(c2);
                    }
                }
                let off_fit: Vec<f64> = offspring.iter().map(|x| eval(x)).collect();
                // (mu + lambda) survival keeps the elite
                let mut merged: Vec<(Vec<f64>, f64)> = pop
                    .drain(..)
                    .zip(fit.drain(..))
                    .chain(offspring.into_iter().zip(off_fit))
                    .collect();
                merged.sort_by(|a, b| a.1.total_cmp(&b.1));
                merged.truncate(n_pop);
                for (x, f) in merged {
                    pop.push(x);
                    fit.push(f);
                }
            }
            Operators::DeBest1 { f, cr } => {
                let best = argmin(&fit);
                let base = pop[best].clone();
                for i in 0..n_pop {
                    let (r1, r2) = distinct_pair(n_pop, i, rng);
                    let jrand = rng.index(dim);
                    let trial: Vec<f64> = (0..dim)
                        .map(|j| {
                            if j == jrand || rng.uniform() < cr {
                                (base[j] + f * (pop[r1][j] - pop[r2][j])).clamp(0.0, 1.0)
                            } else {
                                pop[i][j]
                            }
                        })
                        .collect();
                    let ft = eval(&trial);
                    if ft <= fit[i] {
                        pop[i] = trial;
                        fit[i] = ft;
                    }
                }
            }
        }
        history.push(fit.iter().copied().fold(f64::INFINITY, f64::min));
    }

    let b = argmin(&fit);
    SearchResult {
        best: pop[b].clone(),
        best_value: fit[b],
        history,
    }
}

fn argmin(v: &[f64]) -> usize {
    let mut b = 0;
    for i in 1..v.len() {
        if v[i] < v[b] {
            b = i;
        }
    }
    b
}

fn distinct_pair(n: usize, exclude: usize, rng: &mut RngStream) -> (usize, usize) {
    let mut r1 = rng.index(n);
    while r1 == exclude {
        r1 = rng.index(n);
    }
    let mut r2 = rng.index(n);
    while r2 == exclude || r2 == r1 {
        r2 = rng.index(n);
    }
    (r1, r2)
}

/// Roulette-wheel pick on minimization values: weight = max - value.
fn roulette(values: &[f64], rng: &mut RngStream) -> usize {
    let finite_max = values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = values
        .iter()
        .map(|v| if v.is_finite() { finite_max - v } else { 0.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return rng.index(values.len());
    }
    let mut target = rng.uniform() * total;
    for (i, w) in weights.iter().enumerate() {
        if target < *w {
            return i;
        }
        target -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Bounded simulated binary crossover on `[0, 1]`.
fn sbx(c1: &mut [f64], c2: &mut [f64], eta: f64, rng: &mut RngStream) {
    let (lo, hi) = (0.0, 1.0);
    for j in 0..c1.len() {
        if rng.uniform() > 0.5 {
            continue;
        }
        let (p1, p2) = (c1[j], c2[j]);
        if (p1 - p2).abs() < 1e-14 {
            continue;
        }
        let (y1, y2) = if p1 < p2 { (p1, p2) } else { (p2, p1) };
        let u = rng.uniform();
        let spread = |beta: f64| {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        let beta1 = 1.0 + 2.0 * (y1 - lo) / (y2 - y1);
        let bq1 = spread(beta1);
        let child1 = 0.5 * ((y1 + y2) - bq1 * (y2 - y1));
        let beta2 = 1.0 + 2.0 * (hi - y2) / (y2 - y1);
        let bq2 = spread(beta2);
        let child2 = 0.5 * ((y1 + y2) + bq2 * (y2 - y1));
        let (child1, child2) = (child1.clamp(lo, hi), child2.clamp(lo, hi));
        if rng.uniform() <= 0.5 {
            c1[j] = child2;
            c2[j] = child1;
        } else {
            c1[j] = child1;
            c2[j] = child2;
        }
    }
}

/// Bounded polynomial mutation on `[0, 1]`.
fn polynomial_mutation(x: &mut [f64], pm: f64, eta: f64, rng: &mut RngStream) {
    let (lo, hi) = (0.0, 1.0);
    for v in x.iter_mut() {
        if rng.uniform() >= pm {
            continue;
        }
        let d1 = (*v - lo) / (hi - lo);
        let d2 = (hi - *v) / (hi - lo);
        let u = rng.uniform();
        let pow = 1.0 / (eta + 1.0);
        let dq = if u < 0.5 {
            let val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
            val.powf(pow) - 1.0
        } else {
            let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
            1.0 - val.powf(pow)
        };
        *v = (*v + dq * (hi - lo)).clamp(lo, hi);
    }
}
