//! `infopower`: train and evaluate tree policies, run synthetic-user
//! experiments and serve live sessions.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use infopower_core::fixtures::trained_tree;
use infopower_core::harness::{model_accuracy, run_experiment, AccuracyConfig, AccuracySource, ExperimentConfig};
use infopower_core::metrics::RuleCatalog;
use infopower_core::plant::PlantConfig;
use infopower_core::policy::{evaluate, ExpertPolicy, RandomPolicy};
use infopower_core::tree::{train_cqi, CqiHyperparams, DecisionTreePolicy};
use infopower_core::xai::XaiMode;
use infopower_service::ServiceConfig;
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "infopower", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Train a tree policy and store its accuracy against the expert.
    Train(TrainArgs),
    /// Mean episode energy of a tree next to the expert and a random policy.
    Eval(EvalArgs),
    /// Model accuracy of a tree.
    Accuracy(AccuracyArgs),
    /// Synthetic-user experiments.
    Experiment {
        #[command(subcommand)]
        command: ExperimentCmd,
    },
    /// Serve sessions over HTTP and WebSocket.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
enum ExperimentCmd {
    /// Run both arms and write report.json, summary.csv and session logs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Tree file, overriding the config.
        #[arg(long)]
        tree: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// TOML with optional `[cqi]` and `[plant]` tables.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overrides the configured episode count.
    #[arg(long)]
    episodes: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TrainFile {
    cqi: CqiHyperparams,
    plant: Option<PlantConfig>,
    accuracy: AccuracyConfig,
}

#[derive(Debug, Args)]
struct TreeArg {
    /// Tree file; the bundled tree if omitted.
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Full plant configuration TOML.
    #[arg(long)]
    plant: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    tree: TreeArg,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    /// Seed of the random baseline.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Source {
    Agreement,
    NormalizedReturn,
}

#[derive(Debug, Args)]
struct AccuracyArgs {
    #[command(flatten)]
    tree: TreeArg,
    #[arg(long, value_enum, default_value = "agreement")]
    source: Source,
    #[arg(long, default_value_t = 20)]
    episodes: usize,
    #[arg(long, default_value_t = 0.2)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Service TOML; `INFOPOWER_*` variables and these flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    tree: Option<PathBuf>,
    #[arg(long)]
    mode: Option<XaiMode>,
    #[arg(long)]
    bind: Option<String>,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    step_seconds: Option<f64>,
    #[arg(long)]
    journal_dir: Option<PathBuf>,
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Cmd::Train(a) => train(a),
        Cmd::Eval(a) => eval(a),
        Cmd::Accuracy(a) => accuracy(a),
        Cmd::Experiment { command: ExperimentCmd::Run { config, out, tree } } => experiment(&config, &out, tree),
        Cmd::Serve(a) => serve(a),
    }
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

impl TreeArg {
    fn load(&self) -> Result<(DecisionTreePolicy, PlantConfig)> {
        let tree = match &self.tree {
            Some(p) => DecisionTreePolicy::load(p).with_context(|| format!("loading tree {}", p.display()))?,
            None => trained_tree(),
        };
        let plant = match &self.plant {
            Some(p) => read_toml(p)?,
            None => PlantConfig::default(),
        };
        plant.validate()?;
        Ok((tree, plant))
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let mut file: TrainFile = match &a.config {
        Some(p) => read_toml(p)?,
        None => TrainFile::default(),
    };
    if let Some(n) = a.episodes {
        file.cqi.episodes = n;
    }
    let plant = file.plant.unwrap_or_default();
    plant.validate()?;
    let started = std::time::Instant::now();
    let mut tree = train_cqi(&plant, &file.cqi, a.seed)?;
    let a_m = model_accuracy(&tree, &plant, &file.accuracy)?;
    tree.set_accuracy(a_m);
    tree.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "trained {} episodes in {:.1}s: {} nodes, depth {}, accuracy {a_m:.4} -> {}",
        file.cqi.episodes,
        started.elapsed().as_secs_f64(),
        tree.len(),
        tree.max_depth(),
        a.out.display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    if a.episodes == 0 {
        bail!("--episodes must be at least 1");
    }
    let (tree, plant) = a.tree.load()?;
    let model = evaluate(&plant, &mut &tree, a.episodes)?;
    let expert = evaluate(&plant, &mut ExpertPolicy::new(plant.clone()), a.episodes)?;
    let random = evaluate(&plant, &mut RandomPolicy::new(a.seed), a.episodes)?;
    if a.json {
        let v = serde_json::json!({ "tree": model, "expert": expert, "random": random });
        println!("{}", serde_json::to_string_pretty(&v)?);
        return Ok(());
    }
    println!("{:<8} {:>10} {:>10} {:>10} {:>8}", "policy", "mean", "min", "max", "damaged");
    for (name, s) in [("tree", &model), ("expert", &expert), ("random", &random)] {
        println!(
            "{name:<8} {:>10.2} {:>10.2} {:>10.2} {:>7.1}%",
            s.mean_energy,
            s.min_energy,
            s.max_energy,
            100.0 * s.damage_rate
        );
    }
    if random.mean_energy > 0.0 {
        println!("tree / random = {:.2}", model.mean_energy / random.mean_energy);
    }
    Ok(())
}

fn accuracy(a: AccuracyArgs) -> Result<()> {
    let (tree, plant) = a.tree.load()?;
    let cfg = AccuracyConfig {
        source: match a.source {
            Source::Agreement => AccuracySource::Agreement,
            Source::NormalizedReturn => AccuracySource::NormalizedReturn,
        },
        eval_episodes: a.episodes,
        noise: a.noise,
        seed: a.seed,
    };
    let a_m = model_accuracy(&tree, &plant, &cfg)?;
    println!("{a_m:.6}");
    if let Some(stored) = tree.metadata().accuracy {
        eprintln!("stored in tree metadata: {stored:.6}");
    }
    Ok(())
}

fn experiment(config: &Path, out: &Path, tree: Option<PathBuf>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if tree.is_some() {
        cfg.tree = tree;
    }
    let tree = cfg.load_tree()?;
    let started = std::time::Instant::now();
    let output = run_experiment(&cfg, &tree, &RuleCatalog::default_catalog())?;
    output.write_to(out)?;
    let r = &output.report;
    println!("{} ({} users per arm, a_m {:.4}) in {:.2}s", r.name, r.users_per_arm, r.a_m, started.elapsed().as_secs_f64());
    for arm in &r.arms {
        println!(
            "  {:<10} IP {:.6}  score {:.1}  rules {:.2}  what {}  why {}",
            arm.mode.key(),
            arm.ip,
            arm.mean_final_score,
            arm.mean_rules_correct,
            arm.what_total,
            arm.why_total
        );
    }
    if let Some(d) = r.ip_difference {
        println!("  user-aware minus classical: {d:+.6}");
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    cfg.apply_env(std::env::vars())?;
    if let Some(t) = a.tree {
        cfg.tree = Some(t);
    }
    if let Some(m) = a.mode {
        cfg.mode = m;
    }
    if let Some(b) = a.bind {
        cfg.bind = b;
    }
    if let Some(p) = a.port {
        cfg.port = p;
    }
    if let Some(s) = a.step_seconds {
        cfg.step_seconds = Some(s);
    }
    if let Some(d) = a.journal_dir {
        cfg.journal_dir = Some(d);
    }
    cfg.validate()?;
    let tree = match &cfg.tree {
        Some(p) => DecisionTreePolicy::load(p).with_context(|| format!("loading tree {}", p.display()))?,
        None => trained_tree(),
    };
    if tree.metadata().accuracy.is_none() {
        tracing::warn!("tree has no stored accuracy; reports will carry no IP");
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(infopower_service::serve(&cfg, Arc::new(tree), Arc::new(RuleCatalog::default_catalog())))?;
    Ok(())
}
