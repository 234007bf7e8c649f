use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Latin hypercube sample of `n` points in `[0, 1)^d`.
///
/// Every column places exactly one point in each stratum `[i/n, (i+1)/n)`.
pub fn lhs_sample(n: usize, d: usize, rng: &mut RngStream) -> Result<Vec<Vec<f64>>> {
    if n == 0 || d == 0 {
        return Err(Error::invalid(format!("lhs_sample needs n, d >= 1 (got n={n}, d={d})")));
    }
    let mut out = vec![vec![0.0; d]; n];
    let width = 1.0 / n as f64;
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..d {
        strata.shuffle(rng);
        for (row, &s) in out.iter_mut().zip(&strata) {
            let lo = s as f64 * width;
            let hi = (s + 1) as f64 * width;
            let v = lo + rng.uniform() * width;
            // keep rounding from spilling into the next stratum
            row[j] = if v >= hi { lo } else { v };
        }
    }
    Ok(out)
}
