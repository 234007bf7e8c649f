//! Rank statistics: average ranks, Spearman correlation, and the Wilcoxon
//! rank-sum test with Holm step-down adjustment.

use crate::error::{Error, Result};

/// Ranks starting at 1, ties receiving the mean of the ranks they span.
pub fn rank_vector(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::invalid("rank_vector of an empty vector"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("rank_vector input contains non-finite values"));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    Ok(ranks)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spearman {
    pub rho: f64,
    /// One of the inputs was entirely tied; `rho` is then 0.
    pub degenerate: bool,
}

/// Spearman rank correlation: Pearson correlation of the average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<Spearman> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "spearman on vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::invalid("spearman needs at least two observations"));
    }
    let ra = rank_vector(a)?;
    let rb = rank_vector(b)?;
    Ok(pearson_of_ranks(&ra, &rb))
}

pub(crate) fn pearson_of_ranks(ra: &[f64], rb: &[f64]) -> Spearman {
    let n = ra.len() as f64;
    // both rank vectors have mean (n + 1) / 2
    let mean = (n + 1.0) / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(rb) {
        let (dx, dy) = (x - mean, y - mean);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Spearman {
            rho: 0.0,
            degenerate: true,
        };
    }
    Spearman {
        rho: (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0),
        degenerate: false,
    }
}

/// Outcome of a Wilcoxon rank-sum test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankSumTest {
    pub p_value: f64,
    /// Sum of the pooled ranks of the first sample.
    pub rank_sum: f64,
    pub exact: bool,
}

/// Pooled sizes up to this use exact enumeration.
pub const EXACT_LIMIT: usize = 12;

const TIE_EPS: f64 = 1e-9;

/// Wilcoxon rank-sum test of `a` against `b`.
///
/// The one-sided alternative is that `a` tends to be smaller than `b`.
/// Exact enumeration is used when `|a| + |b| <= 12`; otherwise the normal
/// approximation with tie and continuity correction.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64], two_sided: bool) -> Result<RankSumTest> {
    if a.len() < 3 || b.len() < 3 {
        return Err(Error::invalid(format!(
            "rank-sum test needs at least 3 observations per sample (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = rank_vector(&pooled)?;
    let (n, m) = (a.len(), b.len());
    let w: f64 = ranks[..n].iter().sum();
    let total = n + m;

    if total <= EXACT_LIMIT {
        let pmf = exact_rank_sum_pmf(&ranks, n);
        let center = n as f64 * (total as f64 + 1.0) / 2.0;
        let p: f64 = if two_sided {
            let obs = (w - center).abs();
            pmf.iter()
                .filter(|(v, _)| (v - center).abs() >= obs - TIE_EPS)
                .map(|(_, p)| p)
                .sum()
        } else {
            pmf.iter().filter(|(v, _)| *v <= w + TIE_EPS).map(|(_, p)| p).sum()
        };
        return Ok(RankSumTest {
            p_value: p.min(1.0),
            rank_sum: w,
            exact: true,
        });
    }

    let (nf, mf, tf) = (n as f64, m as f64, total as f64);
    let u = w - nf * (nf + 1.0) / 2.0;
    let mean = nf * mf / 2.0;
    let tie_term: f64 = tie_group_sizes(&pooled)
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = nf * mf / 12.0 * ((tf + 1.0) - tie_term / (tf * (tf - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let sd = var.sqrt();
        if two_sided {
            let z = ((u - mean).abs() - 0.5).max(0.0) / sd;
            libm::erfc(z / std::f64::consts::SQRT_2)
        } else {
            normal_cdf((u - mean + 0.5) / sd)
        }
    };
    Ok(RankSumTest {
        p_value: p.clamp(f64::MIN_POSITIVE, 1.0),
        rank_sum: w,
        exact: false,
    })
}

/// Exact null distribution of the rank sum of `n` items drawn from the pooled
/// ranks, as `(rank_sum, probability)` pairs sorted by rank sum.
pub fn exact_rank_sum_pmf(pooled_ranks: &[f64], n: usize) -> Vec<(f64, f64)> {
    let total = pooled_ranks.len();
    let mut sums = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        sums.push(idx.iter().map(|&i| pooled_ranks[i]).sum::<f64>());
        // advance to the next n-combination in lexicographic order
        let mut k = n;
        while k > 0 && idx[k - 1] == total - n + k - 1 {
            k -= 1;
        }
        if k == 0 {
            return collapse(sums);
        }
        idx[k - 1] += 1;
        for j in k..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn collapse(mut sums: Vec<f64>) -> Vec<(f64, f64)> {
    let count = sums.len() as f64;
    sums.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for s in sums {
        match out.last_mut() {
            Some((v, c)) if (s - *v).abs() < TIE_EPS => *c += 1.0,
            _ => out.push((s, 1.0)),
        }
    }
    for (_, c) in &mut out {
        *c /= count;
    }
    out
}

fn tie_group_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > 1 {
            groups.push(j - i);
        }
        i = j;
    }
    groups
}

/// Holm step-down adjusted p-values, returned in input order.
pub fn holm_adjust(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        let v = ((m - rank) as f64 * p_values[i]).min(1.0);
        running = running.max(v);
        adjusted[i] = running;
    }
    adjusted
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
