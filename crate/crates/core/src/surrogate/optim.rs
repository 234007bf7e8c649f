//! Box-constrained Nelder-Mead used for hyperparameter search.

/// Minimizes `f` over the box `[lo, hi]` starting at `x0`.
///
/// Trial points are projected onto the box. The returned point is the best one
/// ever evaluated, so the result is never worse than `f(x0)`.
pub fn nelder_mead_box<F>(
    f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    step: f64,
    max_evals: usize,
    ftol: f64,
) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let project = |x: &mut Vec<f64>| {
        for j in 0..n {
            x[j] = x[j].clamp(lo[j], hi[j]);
        }
    };
    let mut evals = 0usize;
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut start = x0.to_vec();
    project(&mut start);
    let f0 = eval(&start, &mut evals);
    simplex.push((start.clone(), f0));
    for j in 0..n {
        let mut v = start.clone();
        // step inward if the forward step would leave the box
        v[j] = if v[j] + step <= hi[j] { v[j] + step } else { v[j] - step };
        project(&mut v);
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= ftol * (1.0 + best.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = (0..n)
                .map(|j| centroid[j] + t * (simplex[n].0[j] - centroid[j]))
                .collect();
            for j in 0..n {
                p[j] = p[j].clamp(lo[j], hi[j]);
            }
            p
        };

        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                // shrink toward the best vertex
                let x_best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    for j in 0..n {
                        v.0[j] = x_best[j] + 0.5 * (v.0[j] - x_best[j]);
                    }
                    v.1 = eval(&v.0, &mut evals);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    if fx <= f0 {
        (x, fx)
    } else {
        (start, f0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_minimum() {
        let (x, fx) = nelder_mead_box(
            |x| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.1).powi(2),
            &[1.0, 1.0],
            &[-2.0, -2.0],
            &[2.0, 2.0],
            0.5,
            500,
            1e-14,
        );
        assert!((x[0] - 0.3).abs() < 1e-4 && (x[1] + 0.1).abs() < 1e-4, "{x:?}");
        assert!(fx < 1e-7);
    }

    #[test]
    fn respects_bounds() {
        let (x, _) = nelder_mead_box(|x| x[0], &[0.5], &[0.0], &[1.0], 0.2, 200, 1e-12);
        assert!(x[0] >= 0.0 && x[0] < 1e-3);
    }
}
