//! End-to-end experiments: build the knowledge base, run every arm for every
//! seed, and write traces, summaries and significance tests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::ckt::{run_sas_ckt, transfer_checkpoints, AdaptationMode, CktConfig, KnowledgeBase};
use crate::engine::{run_sas, BackboneConfig, RunTrace};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::{holm_adjust, mean_std, median, wilcoxon_rank_sum};

use super::config::ExperimentConfig;
use super::kb_io::{build_kb, save_kb};
use super::scenario::{gen_scenario, Scenario};

pub const TRACE_HEADER: [&str; 9] = [
    "run_id",
    "arm",
    "fe",
    "best_y",
    "y",
    "transferred",
    "source_id",
    "delta_in",
    "delta_ex_max",
];

/// Significance level of the verdicts.
pub const ALPHA: f64 = 0.05;
/// Arms with fewer successful runs are left out of the statistics.
pub const MIN_RUNS_FOR_STATS: usize = 3;

const KB_STREAM: u64 = 0x6b62;

#[derive(Clone, Debug, PartialEq)]
pub enum ArmVariant {
    Plain,
    Transfer(CktConfig),
}

#[derive(Clone, Debug)]
pub struct ArmOutcome {
    /// `<backbone>/<variant>`, e.g. `bo-lcb/ckt`.
    pub name: String,
    pub backbone: BackboneConfig,
    pub variant: ArmVariant,
    /// One entry per seed; failures keep their error message.
    pub runs: Vec<std::result::Result<RunTrace, String>>,
}

impl ArmOutcome {
    pub fn traces(&self) -> impl Iterator<Item = &RunTrace> {
        self.runs.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn final_values(&self) -> Vec<f64> {
        self.traces().filter_map(RunTrace::final_best).collect()
    }

    /// Checkpoints of this arm, empty for plain arms.
    pub fn checkpoints(&self) -> Vec<usize> {
        match &self.variant {
            ArmVariant::Plain => Vec::new(),
            ArmVariant::Transfer(c) => transfer_checkpoints(&self.backbone, c),
        }
    }

    /// Per successful run, the 0/1 transfer indicator at each checkpoint.
    pub fn transfer_indicators(&self) -> Vec<Vec<f64>> {
        let cps = self.checkpoints();
        self.traces()
            .map(|t| {
                cps.iter()
                    .map(|&fe| f64::from(u8::from(t.records[fe - 1].transferred)))
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ArmSummary {
    pub arm: String,
    pub runs_ok: usize,
    pub runs_failed: usize,
    pub median_final: f64,
    pub mean_final: f64,
    pub std_final: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub backbone: String,
    /// The transfer arm.
    pub arm: String,
    pub baseline: String,
    pub p_value: Option<f64>,
    pub p_holm: Option<f64>,
    pub median_arm: f64,
    pub median_baseline: f64,
    /// `win`, `tie` or `loss` for `arm` against `baseline`, or `insufficient`.
    pub verdict: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct StatsReport {
    pub alpha: f64,
    pub test: String,
    pub correction: String,
    pub arms: Vec<ArmSummary>,
    pub comparisons: Vec<Comparison>,
    pub failures: Vec<serde_json::Value>,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub scenario: Scenario,
    pub kb: KnowledgeBase,
    pub arms: Vec<ArmOutcome>,
    pub stats: StatsReport,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentOutcome {
    pub fn arm(&self, name: &str) -> Option<&ArmOutcome> {
        self.arms.iter().find(|a| a.name == name)
    }
}

fn arm_layout(cfg: &ExperimentConfig) -> Vec<(String, BackboneConfig, ArmVariant)> {
    let mut arms = Vec::new();
    for b in &cfg.backbones {
        arms.push((format!("{}/plain", b.name), b.clone(), ArmVariant::Plain));
        let plain_ckt = CktConfig {
            adaptation: AdaptationMode::Off,
            ..cfg.ckt.clone()
        };
        arms.push((format!("{}/ckt", b.name), b.clone(), ArmVariant::Transfer(plain_ckt)));
        if cfg.adaptation != AdaptationMode::Off {
            let adapted = CktConfig {
                adaptation: cfg.adaptation,
                ..cfg.ckt.clone()
            };
            arms.push((format!("{}/ckt-a", b.name), b.clone(), ArmVariant::Transfer(adapted)));
        }
    }
    arms
}

fn run_one(
    scenario: &Scenario,
    kb: &KnowledgeBase,
    backbone: &BackboneConfig,
    variant: &ArmVariant,
    seed: u64,
    run: usize,
) -> std::result::Result<RunTrace, String> {
    let mut task = scenario.target.fresh();
    let mut rng = RngStream::for_run(seed, run as u64);
    let result = match variant {
        ArmVariant::Plain => run_sas(&mut task, backbone, &mut rng),
        ArmVariant::Transfer(c) => run_sas_ckt(&mut task, kb, backbone, c, &mut rng),
    };
    result.map_err(|e| e.to_string())
}

/// Runs the whole experiment. When `out_dir` is given, every output file is
/// written there.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;

    let scenario = gen_scenario(&cfg.scenario)?;
    let kb_clock = Instant::now();
    let kb_rng = RngStream::new(cfg.seed).fork(KB_STREAM);
    let kb = pool.install(|| build_kb(&scenario.sources, &cfg.kb_backbone(), &kb_rng))?;
    let kb_seconds = kb_clock.elapsed().as_secs_f64();

    let layout = arm_layout(cfg);
    let jobs: Vec<(usize, usize)> = (0..layout.len())
        .flat_map(|a| (0..cfg.runs).map(move |r| (a, r)))
        .collect();
    let results: Vec<_> = pool.install(|| {
        jobs.par_iter()
            .map(|&(a, r)| {
                let (_, backbone, variant) = &layout[a];
                run_one(&scenario, &kb, backbone, variant, cfg.seed, r)
            })
            .collect()
    });

    let mut arms: Vec<ArmOutcome> = layout
        .into_iter()
        .map(|(name, backbone, variant)| ArmOutcome {
            name,
            backbone,
            variant,
            runs: Vec::with_capacity(cfg.runs),
        })
        .collect();
    for (&(a, _), res) in jobs.iter().zip(results) {
        if let Err(e) = &res {
            log::warn!("{} run failed: {e}", arms[a].name);
        }
        arms[a].runs.push(res);
    }

    let stats = compute_stats(&arms);
    let outcome = ExperimentOutcome {
        config: cfg.clone(),
        scenario,
        kb,
        arms,
        stats,
        out_dir: out_dir.map(Path::to_path_buf),
    };
    if let Some(dir) = out_dir {
        write_outputs(&outcome, dir)?;
        let finished = SystemTime::now();
        let secs = |t: SystemTime| t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let meta = json!({
            "started_unix": secs(started),
            "finished_unix": secs(finished),
            "wall_seconds": clock.elapsed().as_secs_f64(),
            "kb_build_seconds": kb_seconds,
            "run_wall_seconds": outcome.arms.iter().map(|a| json!({
                "arm": a.name,
                "seconds": a.traces().map(|t| t.wall_time.as_secs_f64()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        });
        write_json(&dir.join("metadata.json"), &meta)?;
    }
    Ok(outcome)
}

/// Pairwise tests of each transfer arm against its backbone's plain arm,
/// Holm-adjusted across all comparisons.
pub fn compute_stats(arms: &[ArmOutcome]) -> StatsReport {
    let summaries = arms
        .iter()
        .map(|a| {
            let finals = a.final_values();
            let (mean, std) = mean_std(&finals);
            ArmSummary {
                arm: a.name.clone(),
                runs_ok: finals.len(),
                runs_failed: a.runs.len() - finals.len(),
                median_final: median(&finals),
                mean_final: mean,
                std_final: std,
            }
        })
        .collect();

    let mut comparisons = Vec::new();
    for a in arms.iter().filter(|a| a.variant != ArmVariant::Plain) {
        let Some(base) = arms
            .iter()
            .find(|b| b.variant == ArmVariant::Plain && b.backbone.name == a.backbone.name)
        else {
            continue;
        };
        let (xa, xb) = (a.final_values(), base.final_values());
        let p = if xa.len() >= MIN_RUNS_FOR_STATS && xb.len() >= MIN_RUNS_FOR_STATS {
            wilcoxon_rank_sum(&xa, &xb, true).ok().map(|t| t.p_value)
        } else {
            None
        };
        comparisons.push(Comparison {
            backbone: a.backbone.name.clone(),
            arm: a.name.clone(),
            baseline: base.name.clone(),
            p_value: p,
            p_holm: None,
            median_arm: median(&xa),
            median_baseline: median(&xb),
            verdict: String::new(),
        });
    }
    let tested: Vec<usize> = (0..comparisons.len())
        .filter(|&i| comparisons[i].p_value.is_some())
        .collect();
    let raw: Vec<f64> = tested.iter().filter_map(|&i| comparisons[i].p_value).collect();
    for (&i, adj) in tested.iter().zip(holm_adjust(&raw)) {
        comparisons[i].p_holm = Some(adj);
    }
    for c in &mut comparisons {
        c.verdict = match c.p_holm {
            None => "insufficient",
            Some(p) if p < ALPHA && c.median_arm < c.median_baseline => "win",
            Some(p) if p < ALPHA && c.median_arm > c.median_baseline => "loss",
            Some(_) => "tie",
        }
        .to_string();
    }

    let failures = arms
        .iter()
        .flat_map(|a| {
            a.runs.iter().enumerate().filter_map(move |(r, res)| {
                res.as_ref()
                    .err()
                    .map(|e| json!({"arm": a.name, "run_id": r, "error": e}))
            })
        })
        .collect();

    StatsReport {
        alpha: ALPHA,
        test: "wilcoxon rank-sum, two-sided".into(),
        correction: "holm".into(),
        arms: summaries,
        comparisons,
        failures,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Parse(format!("{}: {e}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_traces_csv(arms: &[ArmOutcome], path: &Path) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(TRACE_HEADER).map_err(&err)?;
    for arm in arms {
        for (run_id, res) in arm.runs.iter().enumerate() {
            let Ok(trace) = res else { continue };
            for r in &trace.records {
                w.write_record([
                    run_id.to_string(),
                    arm.name.clone(),
                    r.fe.to_string(),
                    r.best_so_far.to_string(),
                    r.y.to_string(),
                    u8::from(r.transferred).to_string(),
                    r.source_id.map(|s| s.to_string()).unwrap_or_default(),
                    opt(r.delta_in),
                    opt(r.delta_ex_max),
                ])
                .map_err(&err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_convergence_csv(arms: &[ArmOutcome], path: &Path) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(["arm", "fe", "mean_best", "median_best", "std_best"]).map_err(&err)?;
    for arm in arms {
        let curves: Vec<Vec<f64>> = arm.traces().map(RunTrace::best_so_far).collect();
        let Some(len) = curves.iter().map(Vec::len).min() else { continue };
        for i in 0..len {
            let col: Vec<f64> = curves.iter().map(|c| c[i]).collect();
            let (mean, std) = mean_std(&col);
            w.write_record([
                arm.name.clone(),
                (i + 1).to_string(),
                mean.to_string(),
                median(&col).to_string(),
                std.to_string(),
            ])
            .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_transfer_rate_csv(arms: &[ArmOutcome], path: &Path) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(["arm", "checkpoint", "fe", "mean_rate", "std_rate"]).map_err(&err)?;
    for arm in arms.iter().filter(|a| a.variant != ArmVariant::Plain) {
        let ind = arm.transfer_indicators();
        if ind.is_empty() {
            continue;
        }
        for (c, fe) in arm.checkpoints().into_iter().enumerate() {
            let col: Vec<f64> = ind.iter().map(|run| run[c]).collect();
            let (mean, std) = mean_std(&col);
            w.write_record([
                arm.name.clone(),
                (c + 1).to_string(),
                fe.to_string(),
                mean.to_string(),
                std.to_string(),
            ])
            .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes every output file except `metadata.json`.
pub fn write_outputs(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_traces_csv(&outcome.arms, &dir.join("traces.csv"))?;
    write_convergence_csv(&outcome.arms, &dir.join("convergence.csv"))?;
    write_transfer_rate_csv(&outcome.arms, &dir.join("transfer_rate.csv"))?;
    write_json(&dir.join("stats.json"), &outcome.stats)?;
    write_json(&dir.join("scenario.json"), &outcome.scenario.describe())?;
    let mut config = outcome.config.clone();
    config.out_dir = None;
    config.workers = 0;
    fs::write(dir.join("config.toml"), config.to_toml_string()?)
        .map_err(|e| Error::io(dir.join("config.toml"), e))?;
    save_kb(&outcome.kb, &dir.join("kb.json"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EvalRecord;
    use std::time::Duration;

    fn fake_trace(finals: f64) -> RunTrace {
        RunTrace {
            seed: 0,
            records: (1..=4)
                .map(|fe| EvalRecord {
                    fe,
                    x: vec![0.5],
                    y: finals + (4 - fe) as f64,
                    best_so_far: finals + (4 - fe) as f64,
                    transferred: false,
                    source_id: None,
                    delta_in: None,
                    delta_ex_max: None,
                    fallback: false,
                })
                .collect(),
            wall_time: Duration::ZERO,
        }
    }

    fn arm(name: &str, variant: ArmVariant, finals: &[f64]) -> ArmOutcome {
        ArmOutcome {
            name: name.into(),
            backbone: BackboneConfig::bo_lcb(),
            variant,
            runs: finals.iter().map(|&f| Ok(fake_trace(f))).collect(),
        }
    }

    #[test]
    fn identical_arms_tie_with_unit_p() {
        let finals: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
        let arms = vec![
            arm("b/plain", ArmVariant::Plain, &finals),
            arm("b/ckt", ArmVariant::Transfer(CktConfig::default()), &finals),
        ];
        let s = compute_stats(&arms);
        assert_eq!(s.comparisons.len(), 1);
        assert_eq!(s.comparisons[0].p_value, Some(1.0));
        assert_eq!(s.comparisons[0].verdict, "tie");
    }

    #[test]
    fn separated_arms_win() {
        let plain: Vec<f64> = (0..10).map(|i| 10.0 + i as f64).collect();
        let ckt: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let arms = vec![
            arm("b/plain", ArmVariant::Plain, &plain),
            arm("b/ckt", ArmVariant::Transfer(CktConfig::default()), &ckt),
        ];
        assert_eq!(compute_stats(&arms).comparisons[0].verdict, "win");
    }

    #[test]
    fn failed_runs_excluded() {
        let mut a = arm("b/ckt", ArmVariant::Transfer(CktConfig::default()), &[1.0, 2.0]);
        a.runs.push(Err("boom".into()));
        let arms = vec![arm("b/plain", ArmVariant::Plain, &[1.0, 2.0, 3.0]), a];
        let s = compute_stats(&arms);
        assert_eq!(s.arms[1].runs_failed, 1);
        assert_eq!(s.comparisons[0].verdict, "insufficient");
        assert_eq!(s.failures.len(), 1);
    }

    #[test]
    fn trace_csv_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let arms = vec![arm("b/plain", ArmVariant::Plain, &[1.0, 2.0])];
        write_traces_csv(&arms, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "run_id,arm,fe,best_y,y,transferred,source_id,delta_in,delta_ex_max"
        );
        assert_eq!(lines.count(), 8);
    }
}
