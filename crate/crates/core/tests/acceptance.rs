//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Failures are reported but the
//! process exits successfully unless `ACCEPTANCE_STRICT=1` is set, so the
//! report can live inside the regular test suite.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use sas_ckt::adapt::{adapted_similarity, sda_fit, SdaConfig};
use sas_ckt::ckt::{fit_decay, run_sas_ckt, AdaptationMode, CktConfig, KnowledgeBase};
use sas_ckt::engine::run_sas;
use sas_ckt::harness::{gen_scenario, run_experiment, Category, ExperimentConfig, ExperimentOutcome};
use sas_ckt::rng::RngStream;
use sas_ckt::sampling::lhs_sample;
use sas_ckt::stats::{median, rank_vector, spearman, wilcoxon_rank_sum};
use sas_ckt::surrogate::{GprConfig, GprModel, Prediction, RbfModel, Surrogate};
use sas_ckt::task::Database;
use sas_ckt::theory::{
    convergence_gain, expected_gain, linspace, psi, psi_derivative, s_tilde, sweep_s_tilde, DensitySpec,
    TheoryParams,
};
use sas_ckt::acquire::{infill_value, InfillCriterion};

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: u32, title: &str, pass: bool, detail: String, elapsed: Duration) {
        if !pass {
            self.failed += 1;
        }
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id:>2}] {title}: {detail} ({:.2}s)", elapsed.as_secs_f64());
    }
}

fn random_params(rng: &mut RngStream) -> TheoryParams {
    let gamma_o = -10.0 + 20.0 * rng.uniform();
    let gamma_i = 0.01 + 100.0 * rng.uniform();
    let lambda = 10f64.powf(-3.0 + 3.0 * rng.uniform());
    let tau = 1.0 + (199.0 * rng.uniform()).floor();
    let delta = 500.0 * rng.uniform();
    TheoryParams::new(gamma_o, gamma_i, lambda, tau, delta).expect("sampled parameters are valid")
}

fn c1_non_negative_gain() -> (bool, String) {
    let mut rng = RngStream::new(101);
    let mut worst = f64::INFINITY;
    for _ in 0..10_000 {
        let p = random_params(&mut rng);
        let s = -1.0 + 2.0 * rng.uniform();
        worst = worst.min(convergence_gain(s, &p));
    }
    (worst >= -1e-12, format!("min gain over 1e4 draws = {worst:.3e}"))
}

fn c2_threshold() -> (bool, String) {
    let mut rng = RngStream::new(202);
    let mut mc_rng = RngStream::new(203);
    let (mut found, mut worst_residual, mut worst_z) = (0, 0.0f64, f64::INFINITY);
    while found < 100 {
        let p = random_params(&mut rng);
        if psi(1.0, &p) <= 0.0 {
            continue;
        }
        let Some(s) = s_tilde(&p) else {
            return (false, format!("no threshold although psi(1) > 0 for {p:?}"));
        };
        found += 1;
        worst_residual = worst_residual.max(psi(s, &p).abs());
        let density = DensitySpec::Uniform { a: s, b: 1.0 };
        match expected_gain(&p, &density, 100_000, &mut mc_rng) {
            Ok((mean, se)) => worst_z = worst_z.min(if se > 0.0 { mean / se } else { f64::INFINITY }),
            Err(e) => return (false, e.to_string()),
        }
    }
    (
        worst_residual < 1e-10 && worst_z > 3.0,
        format!("max |psi(s~)| = {worst_residual:.2e}, min mean/SE = {worst_z:.1}"),
    )
}

fn c3_sweep_trends() -> (bool, String) {
    let lambdas = linspace(0.02, 0.3, 15);
    let deltas = linspace(2.0, 200.0, 15);
    let cells = match sweep_s_tilde(&lambdas, &deltas, 1.0) {
        Ok(c) => c,
        Err(e) => return (false, e.to_string()),
    };
    // a missing threshold ranks above every real one
    let value = |i: usize, j: usize| cells[i * deltas.len() + j].s_tilde.unwrap_or(f64::INFINITY);
    let mut bad = 0;
    for j in 0..deltas.len() {
        for i in 1..lambdas.len() {
            if value(i, j) < value(i - 1, j) {
                bad += 1;
            }
        }
    }
    for i in 0..lambdas.len() {
        for j in 1..deltas.len() {
            if value(i, j) > value(i, j - 1) {
                bad += 1;
            }
        }
    }
    let short = match sweep_s_tilde(&lambdas, &[0.0, 0.25, 0.5, 0.75, 0.999], 1.0) {
        Ok(c) => c,
        Err(e) => return (false, e.to_string()),
    };
    let short_none = short.iter().all(|c| c.s_tilde.is_none());
    (
        bad == 0 && short_none,
        format!("{bad} monotonicity violations in 15x15, delta_tau < 1 all none: {short_none}"),
    )
}

fn c4_derivative() -> (bool, String) {
    let mut rng = RngStream::new(404);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let s = 0.05 + 0.9 * rng.uniform();
        // Richardson-extrapolated central difference, with the step scaled
        // to the decay's time constant over the horizon
        let central = |h: f64| (psi(s + h, &p) - psi(s - h, &p)) / (2.0 * h);
        let horizon = p.tau + p.delta_tau;
        let h = 1e-2 / (p.lambda * horizon).max(1.0);
        let numeric = (4.0 * central(h / 2.0) - central(h)) / 3.0;
        let analytic = psi_derivative(s, &p);
        let scale = analytic.abs().max(1e-8 * p.gamma_i);
        worst = worst.max((numeric - analytic).abs() / scale);
    }
    (worst < 1e-6, format!("max relative error = {worst:.2e}"))
}

fn c5_decay_recovery() -> (bool, String) {
    let trace: Vec<f64> = (1..=100).map(|t| 2.0 + 8.0 * (-0.05 * t as f64).exp()).collect();
    match fit_decay(&trace, None) {
        Ok(m) => {
            let err = (m.gamma_o - 2.0)
                .abs()
                .max((m.gamma_i - 8.0).abs())
                .max((m.lambda - 0.05).abs());
            (err < 1e-4, format!("max parameter error = {err:.2e}"))
        }
        Err(e) => (false, e.to_string()),
    }
}

fn counting_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&a| {
            let less = v.iter().filter(|&&b| b < a).count() as f64;
            let equal = v.iter().filter(|&&b| b == a).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn c6_oracles() -> (bool, String) {
    let mut rng = RngStream::new(606);
    let mut rank_err = 0.0f64;
    for case in 0..200 {
        let n = 3 + case % 25;
        let a: Vec<f64> = (0..n).map(|_| rng.index(n / 2 + 1) as f64).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        for (x, y) in rank_vector(&a).unwrap().iter().zip(counting_ranks(&a)) {
            rank_err = rank_err.max((x - y).abs());
        }
        let oracle = pearson(&counting_ranks(&a), &counting_ranks(&b));
        let s = spearman(&a, &b).unwrap();
        if oracle.is_finite() {
            rank_err = rank_err.max((s.rho - oracle).abs());
        } else if !s.degenerate {
            rank_err = f64::INFINITY;
        }
    }
    let p = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0], true).unwrap().p_value;

    let x = vec![vec![0.1, 0.7], vec![0.5, 0.2], vec![0.9, 0.9]];
    let y = vec![1.5, -0.3, 2.2];
    let m = GprModel::fit(&x, &y, &GprConfig::default()).unwrap();
    let (mu, scale) = m.target_scaling();
    let ls = m.length_scales().to_vec();
    let k = |a: &[f64], b: &[f64]| {
        let s: f64 = a.iter().zip(b).zip(&ls).map(|((p, q), l)| ((p - q) / l).powi(2)).sum();
        (-0.5 * s).exp()
    };
    let r = DMatrix::from_fn(3, 3, |i, j| k(&x[i], &x[j]) + if i == j { m.jitter() } else { 0.0 });
    let w = r.try_inverse().unwrap() * DVector::from_iterator(3, y.iter().map(|v| (v - mu) / scale));
    let gpr_err = [[0.3, 0.3], [0.0, 1.0], [0.6, 0.55]]
        .iter()
        .map(|q| {
            let kq = DVector::from_iterator(3, x.iter().map(|xi| k(xi, q)));
            (m.predict(q).mean - (mu + scale * kq.dot(&w))).abs()
        })
        .fold(0.0, f64::max);

    let mut ei_z = 0.0f64;
    let mut mc = RngStream::new(607);
    for (mean, std, y_min) in [(1.0, 0.5, 1.2), (0.0, 2.0, -1.0), (3.0, 0.1, 2.9)] {
        let ei = -infill_value(&InfillCriterion::ei(), Prediction { mean, std }, y_min).unwrap();
        let n = 200_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut mc);
                (y_min - (mean + std * z)).max(0.0)
            })
            .collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        ei_z = ei_z.max((ei - m).abs() / (var / n as f64).sqrt());
    }
    let pass = rank_err <= 1e-12 && (p - 0.1).abs() < 1e-12 && gpr_err <= 1e-10 && ei_z < 3.0;
    (
        pass,
        format!(
            "rank/spearman err {rank_err:.1e}, wilcoxon p {p}, GPR err {gpr_err:.1e}, EI |z| max {ei_z:.2}"
        ),
    )
}

fn c7_degradation() -> (bool, String) {
    let cfg = ExperimentConfig::default();
    let scenario = gen_scenario(&cfg.scenario).unwrap();
    let backbone = &cfg.backbones[0];
    let kb = KnowledgeBase::empty(cfg.scenario.dim);
    let mut equal = 0;
    for seed in 0..5 {
        let plain = run_sas(&mut scenario.target.fresh(), backbone, &mut RngStream::new(seed)).unwrap();
        let ckt = run_sas_ckt(
            &mut scenario.target.fresh(),
            &kb,
            backbone,
            &CktConfig::default(),
            &mut RngStream::new(seed),
        )
        .unwrap();
        let same = plain.records.len() == ckt.records.len()
            && plain.records.iter().zip(&ckt.records).all(|(a, b)| {
                a.y.to_bits() == b.y.to_bits()
                    && a.x.iter().zip(&b.x).all(|(p, q)| p.to_bits() == q.to_bits())
                    && a.transferred == b.transferred
            });
        equal += usize::from(same);
    }
    (equal == 5, format!("{equal}/5 seeds bitwise equal"))
}

fn experiment_config(category: Category) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.scenario.category = category;
    cfg.adaptation = AdaptationMode::Off;
    cfg
}

/// Median-benefit check on the `/ckt` arm of `backbone`.
fn hs_benefit(outcome: &ExperimentOutcome, backbone: &str) -> (bool, String) {
    let ckt = outcome.arm(&format!("{backbone}/ckt")).unwrap().final_values();
    let plain = outcome.arm(&format!("{backbone}/plain")).unwrap().final_values();
    let (mc, mp) = (median(&ckt), median(&plain));
    let p = wilcoxon_rank_sum(&ckt, &plain, true).map(|t| t.p_value).unwrap_or(1.0);
    let improvement = if mp > 0.0 { (mp - mc) / mp } else { 0.0 };
    let pass = mc <= mp && (p < 0.1 || improvement >= 0.2);
    (
        pass,
        format!("HS median ckt {mc:.3e} vs plain {mp:.3e} ({:+.0}%), p = {p:.3}", 100.0 * improvement),
    )
}

fn ls_not_worse(outcome: &ExperimentOutcome) -> (bool, String) {
    let ckt = outcome.arm("bo-lcb/ckt").unwrap().final_values();
    let plain = outcome.arm("bo-lcb/plain").unwrap().final_values();
    let p = wilcoxon_rank_sum(&ckt, &plain, true).map(|t| t.p_value).unwrap_or(1.0);
    let worse = p <= 0.05 && median(&ckt) > median(&plain);
    (
        !worse,
        format!("LS median ckt {:.3e} vs plain {:.3e}, p = {p:.3}", median(&ckt), median(&plain)),
    )
}

fn transfer_rate_decline(outcome: &ExperimentOutcome) -> (bool, String) {
    let arm = outcome.arm("bo-lcb/ckt").unwrap();
    let ind = arm.transfer_indicators();
    let n = arm.checkpoints().len();
    if n < 2 || ind.is_empty() {
        return (false, format!("{n} checkpoints, nothing to compare"));
    }
    let third = (n / 3).max(1);
    let mean_over = |range: std::ops::Range<usize>| {
        let width = range.len() as f64;
        ind.iter()
            .map(|run| run[range.clone()].iter().sum::<f64>() / width)
            .sum::<f64>()
            / ind.len() as f64
    };
    let first = mean_over(0..third);
    let last = mean_over(n - third..n);
    let per_checkpoint: Vec<String> = (0..n)
        .map(|c| format!("{:.1}", ind.iter().map(|r| r[c]).sum::<f64>() / ind.len() as f64))
        .collect();
    (
        first > last,
        format!(
            "first third {first:.2} vs last third {last:.2} (rates by checkpoint [{}])",
            per_checkpoint.join(", ")
        ),
    )
}

fn translated_source(x: &[f64]) -> f64 {
    (x[0] + 0.3 - 0.5).powi(2) + (x[1] - 0.2 - 0.4).powi(2)
}

fn c11_sda() -> (bool, String) {
    let shift = [0.3, -0.2];
    let cfg = SdaConfig { eval_budget: 2000, ..SdaConfig::default() };
    let (mut hits, mut never_below) = (0, true);
    let mut errors = Vec::new();
    for seed in 0..10 {
        let mut rng = RngStream::new(seed);
        let sx = lhs_sample(100, 2, &mut rng).unwrap();
        let sy: Vec<f64> = sx.iter().map(|p| translated_source(p)).collect();
        let tx = lhs_sample(40, 2, &mut rng).unwrap();
        let ty: Vec<f64> = tx.iter().map(|p| (p[0] - 0.5).powi(2) + (p[1] - 0.4).powi(2)).collect();
        let surrogate = RbfModel::fit(&sx, &sy).unwrap();
        let db = Database::from_parts(tx, ty).unwrap();
        let map = sda_fit(&surrogate, &db, &cfg, &mut RngStream::new(100 + seed)).unwrap();
        let err = map.theta.iter().zip(shift).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let ranks = rank_vector(db.values()).unwrap();
        let (at_zero, _) = adapted_similarity(&surrogate, &db, &ranks, &[0.0, 0.0]);
        never_below &= map.s_adapted >= at_zero;
        hits += usize::from(err <= 0.05);
        errors.push(format!("{err:.3}"));
    }
    (
        hits >= 8 && never_below,
        format!(
            "recovered within 0.05 in {hits}/10 (errors [{}]), adapted >= unadapted in all runs: {never_below}",
            errors.join(", ")
        ),
    )
}

const OUTPUT_FILES: [&str; 7] = [
    "traces.csv",
    "convergence.csv",
    "transfer_rate.csv",
    "stats.json",
    "scenario.json",
    "config.toml",
    "kb.json",
];

fn same_files(a: &Path, b: &Path) -> (bool, String) {
    let mut differing = Vec::new();
    for name in OUTPUT_FILES {
        match (fs::read(a.join(name)), fs::read(b.join(name))) {
            (Ok(x), Ok(y)) if x == y => {}
            _ => differing.push(name),
        }
    }
    (
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} files identical", OUTPUT_FILES.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn main() {
    let mut report = Report { failed: 0 };

    let ((ok, detail), t) = timed(c1_non_negative_gain);
    report.line(1, "non-negative convergence gain", ok && t < Duration::from_secs(5), detail, t);
    let ((ok, detail), t) = timed(c2_threshold);
    report.line(2, "threshold similarity", ok && t < Duration::from_secs(30), detail, t);
    let ((ok, detail), t) = timed(c3_sweep_trends);
    report.line(3, "threshold sweep trends", ok && t < Duration::from_secs(10), detail, t);
    let ((ok, detail), t) = timed(c4_derivative);
    report.line(4, "gain derivative", ok, detail, t);
    let ((ok, detail), t) = timed(c5_decay_recovery);
    report.line(5, "decay-fit recovery", ok && t < Duration::from_secs(1), detail, t);
    let ((ok, detail), t) = timed(c6_oracles);
    report.line(6, "oracle equivalences", ok, detail, t);
    let ((ok, detail), t) = timed(c7_degradation);
    report.line(7, "empty knowledge base", ok && t < Duration::from_secs(120), detail, t);

    let dir = tempfile::tempdir().expect("temporary directory");
    let (first, second) = (dir.path().join("hs-a"), dir.path().join("hs-b"));
    let (hs, t_hs) = timed(|| run_experiment(&experiment_config(Category::Hs), Some(&first)));
    let (ls, t_ls) = timed(|| run_experiment(&experiment_config(Category::Ls), None));
    match (&hs, &ls) {
        (Ok(hs), Ok(ls)) => {
            let (ok_hs, d_hs) = hs_benefit(hs, "bo-lcb");
            let (ok_ls, d_ls) = ls_not_worse(ls);
            let limit = Duration::from_secs(20 * 60);
            report.line(8, "transfer benefit (BO-LCB)", ok_hs && ok_ls && t_hs + t_ls < limit, format!("{d_hs}; {d_ls}"), t_hs + t_ls);
            let (ok, detail) = hs_benefit(hs, "rbf-pov");
            report.line(9, "transfer benefit (RBF-POV)", ok, detail, t_hs);
            let (ok, detail) = transfer_rate_decline(hs);
            report.line(10, "transfer-rate decline", ok, detail, t_hs);
        }
        (Err(e), _) | (_, Err(e)) => {
            for (id, title) in [(8, "transfer benefit (BO-LCB)"), (9, "transfer benefit (RBF-POV)"), (10, "transfer-rate decline")] {
                report.line(id, title, false, format!("experiment failed: {e}"), t_hs + t_ls);
            }
        }
    }

    let ((ok, detail), t) = timed(c11_sda);
    report.line(11, "translation recovery", ok, detail, t);

    let (rerun, t) = timed(|| run_experiment(&experiment_config(Category::Hs), Some(&second)));
    let (ok, detail) = match (&hs, &rerun) {
        (Ok(_), Ok(_)) => same_files(&first, &second),
        (_, Err(e)) | (Err(e), _) => (false, e.to_string()),
    };
    report.line(12, "deterministic outputs", ok, detail, t);

    println!("{} of 12 criteria failed", report.failed);
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && report.failed > 0 {
        std::process::exit(1);
    }
}
