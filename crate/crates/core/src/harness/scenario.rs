//! Synthetic transfer scenarios: one target and `k` sources built from the
//! same base function, with source optima placed at controlled distances from
//! the target optimum.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::task::Task;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseFunction {
    Sphere,
    Rastrigin,
    Griewank,
    Quartic,
    Ackley,
}

impl BaseFunction {
    /// Symmetric problem-unit half-width of the search box.
    pub fn half_width(self) -> f64 {
        match self {
            BaseFunction::Sphere => 5.0,
            BaseFunction::Rastrigin => 5.12,
            BaseFunction::Griewank => 50.0,
            BaseFunction::Quartic => 1.28,
            BaseFunction::Ackley => 32.768,
        }
    }

    /// Value at `z`, with the minimum 0 at the origin.
    pub fn eval(self, z: &[f64]) -> f64 {
        let d = z.len() as f64;
        match self {
            BaseFunction::Sphere => z.iter().map(|v| v * v).sum(),
            BaseFunction::Rastrigin => {
                10.0 * d + z.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
            }
            BaseFunction::Griewank => {
                let s: f64 = z.iter().map(|v| v * v).sum::<f64>() / 4000.0;
                let p: f64 = z
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
                    .product();
                1.0 + s - p
            }
            BaseFunction::Quartic => z
                .iter()
                .enumerate()
                .map(|(i, v)| (i + 1) as f64 * v.powi(4))
                .sum(),
            BaseFunction::Ackley => {
                let sq = (z.iter().map(|v| v * v).sum::<f64>() / d).sqrt();
                let cs = z.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / d;
                // clamp the rounding residue at the optimum
                (-20.0 * (-0.2 * sq).exp() - cs.exp() + 20.0 + std::f64::consts::E).max(0.0)
            }
        }
    }
}

impl fmt::Display for BaseFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BaseFunction::Sphere => "sphere",
            BaseFunction::Rastrigin => "rastrigin",
            BaseFunction::Griewank => "griewank",
            BaseFunction::Quartic => "quartic",
            BaseFunction::Ackley => "ackley",
        };
        f.write_str(s)
    }
}

impl FromStr for BaseFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sphere" => Ok(BaseFunction::Sphere),
            "rastrigin" => Ok(BaseFunction::Rastrigin),
            "griewank" => Ok(BaseFunction::Griewank),
            "quartic" => Ok(BaseFunction::Quartic),
            "ackley" => Ok(BaseFunction::Ackley),
            other => Err(Error::invalid(format!("unknown base function `{other}`"))),
        }
    }
}

/// Source-target similarity category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Category {
    /// Source optima close to the target optimum.
    Hs,
    /// Alternating close and far sources.
    Ms,
    /// Source optima far from the target optimum.
    Ls,
}

/// Lower and upper limits of the target optimum in common space.
pub const PLACEMENT: (f64, f64) = (0.2, 0.8);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub function: BaseFunction,
    pub dim: usize,
    pub category: Category,
    pub k: usize,
    /// Chebyshev radius of close-source shifts.
    pub hs_radius: f64,
    /// Chebyshev annulus `[inner, outer]` of far-source shifts.
    pub ls_radius: (f64, f64),
    pub rotate: bool,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            function: BaseFunction::Sphere,
            dim: 2,
            category: Category::Hs,
            k: 5,
            hs_radius: 0.05,
            ls_radius: (0.3, 0.5),
            rotate: false,
            seed: 1,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("scenario dimension must be positive"));
        }
        let (inner, outer) = self.ls_radius;
        if !(self.hs_radius >= 0.0 && inner > 0.0 && inner <= outer) {
            return Err(Error::invalid(format!(
                "shift radii must satisfy 0 <= hs and 0 < ls_inner <= ls_outer, got {} and [{inner}, {outer}]",
                self.hs_radius
            )));
        }
        if self.hs_radius >= inner {
            return Err(Error::invalid(format!(
                "hs radius {} must be below the ls inner radius {inner}",
                self.hs_radius
            )));
        }
        // optima are placed in [0.2, 0.8]; close shifts must stay inside the
        // box on every side, far shifts on at least one side per coordinate
        if self.hs_radius > PLACEMENT.0 || outer > 0.5 {
            return Err(Error::invalid(format!(
                "shift radii (hs {}, ls outer {outer}) exceed the placement margin",
                self.hs_radius
            )));
        }
        Ok(())
    }
}

/// A generated scenario. Optima are in common space.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub target: Task,
    pub target_optimum: Vec<f64>,
    pub sources: Vec<Task>,
    pub source_optima: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "spec": self.spec,
            "target_optimum": self.target_optimum,
            "source_optima": self.source_optima,
            "source_distances": self.source_optima.iter()
                .map(|o| chebyshev(o, &self.target_optimum))
                .collect::<Vec<_>>(),
        })
    }
}

fn chebyshev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

fn close_shift(center: &[f64], radius: f64, rng: &mut RngStream) -> Vec<f64> {
    center
        .iter()
        .map(|c| c + radius * (2.0 * rng.uniform() - 1.0))
        .collect()
}

fn far_shift(center: &[f64], (inner, outer): (f64, f64), rng: &mut RngStream) -> Vec<f64> {
    let r = inner + (outer - inner) * rng.uniform();
    let lead = rng.index(center.len());
    center
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            if j == lead {
                let up = c + r <= 1.0;
                let down = c - r >= 0.0;
                let go_up = match (up, down) {
                    (true, true) => rng.uniform() < 0.5,
                    (up, _) => up,
                };
                if go_up {
                    c + r
                } else {
                    c - r
                }
            } else {
                let lo = (c - r).max(0.0);
                let hi = (c + r).min(1.0);
                lo + (hi - lo) * rng.uniform()
            }
        })
        .collect()
}

fn random_rotation(dim: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let normal = rand_distr::StandardNormal;
    let m = DMatrix::from_fn(dim, dim, |_, _| rand_distr::Distribution::<f64>::sample(&normal, rng));
    let qr = m.qr();
    let (mut q, r) = (qr.q(), qr.r());
    // fix column signs so the factorization is unique
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn shifted_task(
    name: String,
    function: BaseFunction,
    optimum: &[f64],
    rotation: Option<DMatrix<f64>>,
) -> Result<Task> {
    let w = function.half_width();
    let dim = optimum.len();
    let center: Vec<f64> = optimum.iter().map(|c| -w + 2.0 * w * c).collect();
    Task::from_fn(name, vec![-w; dim], vec![w; dim], move |x| {
        let z: Vec<f64> = x.iter().zip(&center).map(|(a, c)| a - c).collect();
        match &rotation {
            Some(q) => {
                let rz = q * nalgebra::DVector::from_vec(z);
                function.eval(rz.as_slice())
            }
            None => function.eval(&z),
        }
    })
}

/// Builds the target and source tasks of a scenario, deterministically in
/// `spec.seed`.
pub fn gen_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = RngStream::new(spec.seed);
    let (lo, hi) = PLACEMENT;
    let target_optimum: Vec<f64> = (0..spec.dim).map(|_| lo + (hi - lo) * rng.uniform()).collect();

    let mut source_optima = Vec::with_capacity(spec.k);
    for i in 0..spec.k {
        let close = match spec.category {
            Category::Hs => true,
            Category::Ls => false,
            Category::Ms => i % 2 == 0,
        };
        source_optima.push(if close {
            close_shift(&target_optimum, spec.hs_radius, &mut rng)
        } else {
            far_shift(&target_optimum, spec.ls_radius, &mut rng)
        });
    }

    let rotation = |rng: &mut RngStream| spec.rotate.then(|| random_rotation(spec.dim, rng));
    let target = shifted_task(
        format!("{}-target", spec.function),
        spec.function,
        &target_optimum,
        rotation(&mut rng),
    )?;
    let sources = source_optima
        .iter()
        .enumerate()
        .map(|(i, o)| {
            shifted_task(format!("{}-source{i}", spec.function), spec.function, o, rotation(&mut rng))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Scenario {
        spec: spec.clone(),
        target,
        target_optimum,
        sources,
        source_optima,
    })
}
