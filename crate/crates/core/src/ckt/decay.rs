use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponential decay `gamma_o + gamma_i * exp(-lambda * tau)` of a best-so-far trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayModel {
    pub gamma_o: f64,
    pub gamma_i: f64,
    pub lambda: f64,
    /// Coefficient of determination on the fitted trace.
    pub r2: f64,
    pub degenerate: bool,
}

impl DecayModel {
    pub fn new(gamma_o: f64, gamma_i: f64, lambda: f64) -> Self {
        Self {
            gamma_o,
            gamma_i,
            lambda,
            r2: f64::NAN,
            degenerate: false,
        }
    }

    pub fn value(&self, tau: f64) -> f64 {
        self.gamma_o + self.gamma_i * (-self.lambda * tau).exp()
    }

    /// Time at which the model reaches `level`; `None` when the level lies
    /// outside `(gamma_o, +inf)` or the model is flat.
    pub fn time_to_reach(&self, level: f64) -> Option<f64> {
        let gap = level - self.gamma_o;
        if self.degenerate || gap <= 0.0 || self.gamma_i <= 0.0 || self.lambda <= 0.0 {
            return None;
        }
        Some((self.gamma_i / gap).ln() / self.lambda)
    }

    fn degenerate_for(trace: &[f64]) -> Self {
        let mut m = Self {
            gamma_o: trace.iter().copied().fold(f64::INFINITY, f64::min),
            gamma_i: 0.0,
            lambda: 1e-6,
            r2: f64::NAN,
            degenerate: true,
        };
        m.r2 = r_squared(trace, &m);
        m
    }
}

/// Number of strict decreases in a best-so-far trace.
pub fn count_improvements(best_so_far: &[f64]) -> usize {
    best_so_far.windows(2).filter(|w| w[1] < w[0]).count()
}

/// Fits the decay model to a non-increasing best-so-far trace, with time
/// `tau = 1, 2, ...` along the trace.
///
/// With an unknown optimum, the log-magnitudes of the nonzero first
/// differences are regressed on `tau`, giving `lambda` and `gamma_i`, and
/// `gamma_o` is the mean residual of the trace. That estimate is then refined
/// by minimizing the trace residuals over `lambda` with the curve pinned to
/// the last trace value, solving `gamma_i` in closed form for each candidate. With a known optimum, the
/// model is anchored at the first value and `lambda` is the least-squares
/// slope of `log((gamma - gamma_o) / (gamma_1 - gamma_o))` on `tau - 1`.
pub fn fit_decay(best_so_far: &[f64], known_optimum: Option<f64>) -> Result<DecayModel> {
    if best_so_far.len() < 3 {
        return Err(Error::invalid("decay fit needs at least three trace values"));
    }
    if best_so_far.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("decay fit received non-finite values"));
    }
    if let Some(t) = best_so_far.windows(2).position(|w| w[1] > w[0]) {
        return Err(Error::invalid(format!(
            "best-so-far trace increases at position {}",
            t + 1
        )));
    }
    let mut model = match known_optimum {
        Some(opt) => fit_known(best_so_far, opt),
        None => refine(best_so_far, fit_unknown(best_so_far)),
    };
    if !model.degenerate {
        model.r2 = r_squared(best_so_far, &model);
    }
    Ok(model)
}

fn fit_unknown(trace: &[f64]) -> DecayModel {
    let pts: Vec<(f64, f64)> = trace
        .windows(2)
        .enumerate()
        .filter_map(|(t, w)| {
            let d = w[0] - w[1];
            (d > 0.0).then(|| ((t + 1) as f64, d.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return DecayModel::degenerate_for(trace);
    }
    let (slope, intercept) = linear_fit(&pts);
    let lambda = -slope;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return DecayModel::degenerate_for(trace);
    }
    let gamma_i = intercept.exp() / (1.0 - (-lambda).exp());
    let gamma_o = trace
        .iter()
        .enumerate()
        .map(|(t, g)| g - gamma_i * (-lambda * (t + 1) as f64).exp())
        .sum::<f64>()
        / trace.len() as f64;
    if !(gamma_i.is_finite() && gamma_o.is_finite()) {
        return DecayModel::degenerate_for(trace);
    }
    DecayModel {
        gamma_o,
        gamma_i,
        lambda,
        r2: f64::NAN,
        degenerate: false,
    }
}

/// Least-squares fit of `gamma_i` for a fixed `lambda`, with `gamma_o` tied
/// so that the curve passes through the last trace value. Returns
/// `(gamma_o, gamma_i, sse)`, or `None` unless `gamma_i > 0`.
fn profile(trace: &[f64], lambda: f64) -> Option<(f64, f64, f64)> {
    let n = trace.len();
    let last = trace[n - 1];
    let e_last = (-lambda * n as f64).exp();
    let (mut saa, mut sar) = (0.0, 0.0);
    for (t, g) in trace.iter().enumerate() {
        let a = (-lambda * (t + 1) as f64).exp() - e_last;
        saa += a * a;
        sar += a * (g - last);
    }
    if !(saa > 0.0) {
        return None;
    }
    let gamma_i = sar / saa;
    let gamma_o = last - gamma_i * e_last;
    if !(gamma_i > 0.0 && gamma_o.is_finite()) {
        return None;
    }
    let sse = trace
        .iter()
        .enumerate()
        .map(|(t, g)| (g - gamma_o - gamma_i * (-lambda * (t + 1) as f64).exp()).powi(2))
        .sum();
    Some((gamma_o, gamma_i, sse))
}

/// Improves a difference-regression fit by minimizing the residuals of the
/// trace itself over `lambda`, keeping the curve on the latest best value.
/// Staircase traces of real runs have few, uneven drops, and the regression
/// alone can land far from the trace. A free least-squares fit, in turn, is
/// dominated by the large early values and tends to put `gamma_o` above the
/// best value already found.
fn refine(trace: &[f64], initial: DecayModel) -> DecayModel {
    if initial.degenerate {
        return initial;
    }
    let sse_of = |m: &DecayModel| -> f64 {
        trace
            .iter()
            .enumerate()
            .map(|(t, g)| (g - m.value((t + 1) as f64)).powi(2))
            .sum()
    };
    let objective = |log_l: f64| profile(trace, log_l.exp()).map_or(f64::INFINITY, |p| p.2);

    const GRID: usize = 80;
    let (lo, hi) = ((1e-4f64).ln(), (10.0f64).ln());
    let step = (hi - lo) / GRID as f64;
    let grid: Vec<f64> = (0..=GRID).map(|k| lo + step * k as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&g| objective(g)).collect();
    let k = (0..values.len())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    if !values[k].is_finite() {
        return initial;
    }

    // golden-section search in the bracketing grid cells
    let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(GRID)]);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    for _ in 0..80 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = objective(d);
        }
    }
    let log_l = if fc <= fd { c } else { d };
    let Some((gamma_o, gamma_i, sse)) = profile(trace, log_l.exp()) else {
        return initial;
    };
    // the regression estimate survives only when it already fits at least as
    // well and keeps its asymptote below the latest best value
    let last = trace[trace.len() - 1];
    if sse_of(&initial) <= sse && initial.gamma_o <= last {
        initial
    } else {
        DecayModel {
            gamma_o,
            gamma_i,
            lambda: log_l.exp(),
            r2: f64::NAN,
            degenerate: false,
        }
    }
}

fn fit_known(trace: &[f64], gamma_o: f64) -> DecayModel {
    let initial = trace[0] - gamma_o;
    if initial <= 0.0 {
        return DecayModel::degenerate_for(trace);
    }
    let (mut sxy, mut sxx) = (0.0, 0.0);
    let mut used = 0;
    for (t, g) in trace.iter().enumerate().skip(1) {
        let gap = g - gamma_o;
        if gap <= 0.0 {
            continue;
        }
        let x = t as f64;
        sxy += x * (gap / initial).ln();
        sxx += x * x;
        used += 1;
    }
    if used < 2 {
        return DecayModel::degenerate_for(trace);
    }
    let lambda = -sxy / sxx;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return DecayModel::degenerate_for(trace);
    }
    DecayModel {
        gamma_o,
        // value(1) reproduces the first trace entry
        gamma_i: initial * lambda.exp(),
        lambda,
        r2: f64::NAN,
        degenerate: false,
    }
}

fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn r_squared(trace: &[f64], m: &DecayModel) -> f64 {
    let n = trace.len() as f64;
    let mean = trace.iter().sum::<f64>() / n;
    let ss_tot: f64 = trace.iter().map(|g| (g - mean).powi(2)).sum();
    let ss_res: f64 = trace
        .iter()
        .enumerate()
        .map(|(t, g)| (g - m.value((t + 1) as f64)).powi(2))
        .sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(go: f64, gi: f64, lambda: f64, n: usize) -> Vec<f64> {
        (1..=n).map(|t| go + gi * (-lambda * t as f64).exp()).collect()
    }

    #[test]
    fn recovers_noiseless_parameters_unknown_optimum() {
        let trace = synthetic(2.0, 8.0, 0.05, 100);
        let m = fit_decay(&trace, None).unwrap();
        assert!(!m.degenerate);
        assert!((m.gamma_o - 2.0).abs() < 1e-4, "{m:?}");
        assert!((m.gamma_i - 8.0).abs() < 1e-4, "{m:?}");
        assert!((m.lambda - 0.05).abs() < 1e-4, "{m:?}");
        assert!(m.r2 > 0.999_999);
    }

    #[test]
    fn recovers_noiseless_parameters_known_optimum() {
        let trace = synthetic(-1.0, 3.0, 0.2, 40);
        let m = fit_decay(&trace, Some(-1.0)).unwrap();
        assert!((m.lambda - 0.2).abs() < 1e-10);
        assert!((m.gamma_i - 3.0).abs() < 1e-9);
        assert!((m.value(1.0) - trace[0]).abs() < 1e-12);
    }

    #[test]
    fn constant_trace_is_degenerate() {
        let m = fit_decay(&[4.5; 10], None).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.gamma_o, 4.5);
        assert_eq!(m.gamma_i, 0.0);
        assert_eq!(m.lambda, 1e-6);
    }

    #[test]
    fn single_improvement_is_degenerate() {
        let m = fit_decay(&[5.0, 5.0, 3.0, 3.0], None).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.gamma_o, 3.0);
    }

    #[test]
    fn increasing_trace_rejected() {
        assert!(fit_decay(&[3.0, 2.0, 2.5], None).is_err());
        assert!(fit_decay(&[3.0, 2.0], None).is_err());
    }

    #[test]
    fn time_to_reach_inverts_value() {
        let m = DecayModel::new(1.0, 5.0, 0.3);
        let t = m.time_to_reach(m.value(7.5)).unwrap();
        assert!((t - 7.5).abs() < 1e-12);
        assert!(m.time_to_reach(0.5).is_none());
    }

    #[test]
    fn improvements_counted() {
        assert_eq!(count_improvements(&[5.0, 4.0, 4.0, 1.0, 1.0]), 2);
    }
}
