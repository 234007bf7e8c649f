use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sas_ckt::ckt::AdaptationMode;
use sas_ckt::harness::{self, kb_io, ExperimentConfig};
use sas_ckt::rng::RngStream;
use sas_ckt::surrogate::{GprConfig, SurrogateKind};
use sas_ckt::theory;

#[derive(Parser)]
#[command(name = "sasckt", version, about = "Surrogate-assisted optimization with competitive knowledge transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Parallel runs (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the scenario and describe it.
    GenScenario(Common),
    /// Optimize the source tasks and write the knowledge base.
    BuildKb(Common),
    /// Run a full experiment.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        adaptation: Option<AdaptationMode>,
        /// Transfer interval in evaluations.
        #[arg(long)]
        delta: Option<usize>,
    },
    /// Tabulate the positive-gain similarity threshold.
    TheorySweep {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, num_args = 3, value_names = ["MIN", "MAX", "STEPS"], default_values_t = [0.02, 0.3, 15.0])]
        lambda: Vec<f64>,
        #[arg(long, num_args = 3, value_names = ["MIN", "MAX", "STEPS"], default_values_t = [0.0, 200.0, 15.0])]
        delta_tau: Vec<f64>,
    },
    /// Knowledge-base utilities.
    Kb {
        #[command(subcommand)]
        command: KbCommand,
    },
}

#[derive(Subcommand)]
enum KbCommand {
    /// Print a summary of a knowledge-base file.
    Inspect { path: PathBuf },
}

fn load_config(common: &Common) -> sas_ckt::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> sas_ckt::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| sas_ckt::Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn grid(spec: &[f64]) -> Vec<f64> {
    theory::linspace(spec[0], spec[1], spec[2].max(1.0) as usize)
}

fn run(cli: Cli) -> sas_ckt::Result<()> {
    match cli.command {
        Command::GenScenario(common) => {
            let cfg = load_config(&common)?;
            let sc = harness::gen_scenario(&cfg.scenario)?;
            ensure_dir(&common.out)?;
            let path = common.out.join("scenario.json");
            let text = serde_json::to_string_pretty(&sc.describe()).expect("scenario JSON");
            std::fs::write(&path, text + "\n").map_err(|e| sas_ckt::Error::Io { path: path.clone(), source: e })?;
            println!("wrote {}", path.display());
        }
        Command::BuildKb(common) => {
            let cfg = load_config(&common)?;
            let sc = harness::gen_scenario(&cfg.scenario)?;
            let rng = RngStream::new(cfg.seed);
            let kb = harness::build_kb(&sc.sources, &cfg.kb_backbone(), &rng)?;
            ensure_dir(&common.out)?;
            let path = common.out.join("kb.json");
            harness::save_kb(&kb, &path)?;
            println!("wrote {} ({} sources)", path.display(), kb.len());
        }
        Command::Run {
            common,
            adaptation,
            delta,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(a) = adaptation {
                cfg.adaptation = a;
            }
            if let Some(d) = delta {
                cfg.ckt.delta = d;
            }
            let outcome = harness::run_experiment(&cfg, Some(&common.out))?;
            for c in &outcome.stats.comparisons {
                println!(
                    "{:<16} vs {:<16} median {:.6e} vs {:.6e}  p_holm {}  {}",
                    c.arm,
                    c.baseline,
                    c.median_arm,
                    c.median_baseline,
                    c.p_holm.map(|p| format!("{p:.4}")).unwrap_or_else(|| "-".into()),
                    c.verdict
                );
            }
            println!("outputs in {}", common.out.display());
        }
        Command::TheorySweep {
            out,
            tau,
            lambda,
            delta_tau,
        } => {
            let cells = theory::sweep_s_tilde(&grid(&lambda), &grid(&delta_tau), tau)?;
            ensure_dir(&out)?;
            let path = out.join("s_tilde.csv");
            let file = std::fs::File::create(&path).map_err(|e| sas_ckt::Error::Io { path: path.clone(), source: e })?;
            theory::write_sweep_csv(&cells, file)?;
            println!("wrote {} ({} cells)", path.display(), cells.len());
        }
        Command::Kb {
            command: KbCommand::Inspect { path },
        } => {
            let kb = kb_io::load_kb(&path, SurrogateKind::Rbf, &GprConfig::default())?;
            println!("dimension {}, {} sources", kb.dim, kb.len());
            for (i, r) in kb.records.iter().enumerate() {
                println!(
                    "  [{i}] {:<20} evals {:>4}  best {:.6e}  decay (go {:.4e}, gi {:.4e}, lambda {:.4e}, r2 {:.3}){}",
                    r.task_id,
                    r.tau_max(),
                    r.best_value(),
                    r.decay.gamma_o,
                    r.decay.gamma_i,
                    r.decay.lambda,
                    r.decay.r2,
                    if r.decay.degenerate { " degenerate" } else { "" }
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
