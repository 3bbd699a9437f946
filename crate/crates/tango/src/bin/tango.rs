use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use tango_core::corpus::{augment, generate_corpus, make_generalization_set, split, ScriptedExpert, Strategy};
use tango_core::domain::{goal as catalog_goal, MicroHome, GOAL_IDS, RESERVE_POOL};
use tango_core::harness::{
    eval_action_accuracy, eval_plan_accuracy, prepare, row_ablations, run_row, table_csv, table_text, train, RandomPolicy,
    ABLATION_ROWS, SET_NAMES,
};
use tango_core::policy::TangoAgent;
use tango_core::sim::{run_episode, Policy, SimConfig};
use tango_core::world::{Goal, WorldState};

use tango::config::{seed_from_env, SEED_ENV};
use tango::records::{
    cases_to_jsonl, read_cases, read_corpus, read_text, state_from_record, state_to_record, trace_to_record, write_corpus,
    write_text,
};
use tango::server::{serve, AppState};
use tango::{Checkpoint, EmbeddingSource, RunConfig};

#[derive(Parser)]
#[command(name = "tango", version, about = "Goal-conditioned tool-interaction policy toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulator utilities.
    Sim {
        #[command(subcommand)]
        command: SimCommand,
    },
    /// Demonstration corpus pipeline.
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
    /// Train a policy from a run config and write a checkpoint.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "model.ckpt")]
        out: PathBuf,
    },
    /// Plan-execution accuracy of a checkpoint on one evaluation set.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value = "test")]
        set: String,
        /// Evaluation episodes from `corpus genset` instead of a named set.
        #[arg(long)]
        cases: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        /// Enable random execution errors.
        #[arg(long)]
        stochastic: bool,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
    },
    /// Train and evaluate every ablation row and print the results table.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the instruction server.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Directory that relative checkpoint paths are resolved against.
        #[arg(long, default_value = ".")]
        checkpoint_root: PathBuf,
    },
}

#[derive(Subcommand)]
enum SimCommand {
    /// Run one episode and print its trace-v1 record.
    Run {
        /// State record file or micro-home scene id.
        #[arg(long)]
        scene: String,
        /// Catalog goal id or a goal JSON file.
        #[arg(long)]
        goal: String,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        /// `expert`, `random` or `model:PATH`.
        #[arg(long, default_value = "expert")]
        policy: String,
        #[arg(long)]
        stochastic: bool,
        /// Force a drop on the first step at or after this index.
        #[arg(long)]
        forced_drop: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the state record of a generated scene.
    Scene {
        #[arg(long)]
        id: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EmbeddingArgs {
    /// Word-vector text file; the built-in desk table when absent.
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Knowledge-graph text file used to retrofit `--vectors`.
    #[arg(long)]
    graph: Option<PathBuf>,
}

impl EmbeddingArgs {
    fn source(&self) -> EmbeddingSource {
        match &self.vectors {
            Some(v) => EmbeddingSource::Files { vectors: v.clone(), graph: self.graph.clone(), iterations: 10, lambda: 1.0 },
            None => EmbeddingSource::default(),
        }
    }
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Expert demonstrations for every scene and catalog goal.
    Gen {
        #[arg(long, default_value_t = 12)]
        scenes: usize,
        #[arg(long, default_value_t = 7)]
        scene_seed: u64,
        /// Share of demonstrations with a forced drop and its recovery.
        #[arg(long, default_value_t = 0.4)]
        perturb_rate: f64,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Jittered and class-swapped variants of every demonstration.
    Augment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        factor: usize,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        embeddings: EmbeddingArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grouped train/val/test split written as three files.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Generalization episodes (case-v1 records).
    Genset {
        #[arg(long)]
        input: PathBuf,
        /// position, alternate, unseen, random or goal.
        #[arg(long)]
        strategy: String,
        /// Jitter radius for the position strategy.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        embeddings: EmbeddingArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay every demonstration of a corpus file.
    Validate {
        #[arg(long)]
        input: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Sim { command } => sim(command),
        Command::Corpus { command } => corpus(command),
        Command::Train { config, out } => train_cmd(config.as_deref(), &out),
        Command::Eval { ckpt, set, cases, episodes, stochastic, seed } => {
            eval_cmd(&ckpt, &set, cases.as_deref(), episodes, stochastic, seed)
        }
        Command::Ablate { config, csv } => ablate_cmd(config.as_deref(), csv.as_deref()),
        Command::Serve { addr, checkpoint_root } => {
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("listening on http://{addr}");
            rt.block_on(serve(&addr, AppState::new(MicroHome::default(), checkpoint_root)))?;
            Ok(())
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(write_text(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_scene(arg: &str) -> Result<WorldState> {
    let path = Path::new(arg);
    if path.is_file() {
        return Ok(state_from_record(&read_text(path)?)?);
    }
    Ok(MicroHome::default().scene(arg)?)
}

fn load_goal(arg: &str) -> Result<Goal> {
    let path = Path::new(arg);
    if path.is_file() {
        return serde_json::from_str(&read_text(path)?).with_context(|| format!("goal file {arg}"));
    }
    Ok(catalog_goal(arg)?)
}

fn sim(command: SimCommand) -> Result<()> {
    match command {
        SimCommand::Scene { id, out } => emit(out.as_deref(), &(state_to_record(&MicroHome::default().scene(&id)?) + "\n")),
        SimCommand::Run { scene, goal, seed, policy, stochastic, forced_drop, out } => {
            let s0 = load_scene(&scene)?;
            let g = load_goal(&goal)?;
            let base = if stochastic { SimConfig::default() } else { SimConfig::deterministic() };
            let cfg = SimConfig { seed, forced_drop, ..base };
            let trace = match policy.as_str() {
                "expert" => run_episode(&mut ScriptedExpert::default(), &s0, &g, &cfg)?,
                "random" => run_episode(&mut RandomPolicy::new(seed), &s0, &g, &cfg)?,
                other => {
                    let Some(path) = other.strip_prefix("model:") else {
                        bail!("unknown policy `{other}` (expected expert, random or model:PATH)");
                    };
                    let ckpt = Checkpoint::load(Path::new(path))?;
                    let table = ckpt.table()?;
                    let mut agent = TangoAgent { model: &ckpt.model, table: &table };
                    run_episode(&mut agent as &mut dyn Policy, &s0, &g, &cfg)?
                }
            };
            emit(out.as_deref(), &(trace_to_record(&trace) + "\n"))
        }
    }
}

fn corpus(command: CorpusCommand) -> Result<()> {
    match command {
        CorpusCommand::Gen { scenes, scene_seed, perturb_rate, seed, out } => {
            let home = MicroHome { seed: scene_seed, scenes };
            let c = generate_corpus(&home, &GOAL_IDS, perturb_rate, seed)?;
            write_corpus(&out, &c)?;
            eprintln!("{} demonstrations -> {}", c.len(), out.display());
        }
        CorpusCommand::Augment { input, factor, seed, embeddings, out } => {
            let c = read_corpus(&input)?;
            let (table, _) = embeddings.source().tables()?;
            let (aug, report) = augment(&c, factor, &table, seed)?;
            write_corpus(&out, &aug)?;
            eprintln!("{} -> {} demonstrations ({} rejected variants) -> {}", report.input, report.produced, report.rejected, out.display());
        }
        CorpusCommand::Split { input, seed, out_dir } => {
            let parts = split(&read_corpus(&input)?, seed)?;
            for (name, c) in [("train", &parts.train), ("val", &parts.val), ("test", &parts.test)] {
                let p = out_dir.join(format!("{name}.jsonl"));
                write_corpus(&p, c)?;
                eprintln!("{name}: {} -> {}", c.len(), p.display());
            }
        }
        CorpusCommand::Genset { input, strategy, radius, seed, embeddings, out } => {
            let mut s = Strategy::from_name(&strategy)?;
            if let (Strategy::Position { radius: r }, Some(given)) = (&mut s, radius) {
                *r = given;
            }
            let (table, _) = embeddings.source().tables()?;
            let cases = make_generalization_set(&read_corpus(&input)?, &s, &table, &RESERVE_POOL, seed)?;
            write_text(&out, &cases_to_jsonl(&cases))?;
            eprintln!("{} {} episodes -> {}", cases.len(), s.name(), out.display());
        }
        CorpusCommand::Validate { input } => {
            let c = read_corpus(&input)?;
            c.validate()?;
            println!("{}", json!({"file": input.display().to_string(), "demonstrations": c.len(), "valid": true}));
        }
    }
    Ok(())
}

/// Config file (or defaults) with the seed override applied.
fn run_config(path: Option<&Path>) -> Result<RunConfig> {
    let mut c = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = seed_from_env()? {
        c = c.with_seed(seed);
    }
    c.validate()?;
    Ok(c)
}

fn train_cmd(config: Option<&Path>, out: &Path) -> Result<()> {
    let c = run_config(config)?;
    let (table, _) = c.embeddings.tables()?;
    let start = Instant::now();
    let data = prepare(&c.data, &table)?;
    eprintln!("train {} / val {} / test {} demonstrations", data.train.len(), data.val.len(), data.test.len());
    let (model, report) = train(&c.train, &data.train, &data.val, &table, &mut |e| {
        eprintln!(
            "epoch {:3}  train loss {:.4}  val loss {:.4}  val action acc {:.3}  ({:.0}s)",
            e.epoch,
            e.train_loss,
            e.val_loss,
            e.val_accuracy,
            start.elapsed().as_secs_f64()
        )
    })?;
    let ckpt = Checkpoint { model, embeddings: c.embeddings.clone(), data: Some(c.data.clone()) };
    ckpt.save(out)?;
    let mut agent = TangoAgent { model: &ckpt.model, table: &table };
    let plan = eval_plan_accuracy(&mut agent, data.set("test")?, &SimConfig::deterministic(), c.episodes_per_case)?;
    println!(
        "{}",
        json!({
            "checkpoint": out.display().to_string(),
            "epochs_run": report.epochs_run,
            "best_epoch": report.best_epoch,
            "best_val_action_accuracy": report.best_val_accuracy,
            "test_plan_accuracy": plan,
            "seconds": start.elapsed().as_secs_f64(),
        })
    );
    Ok(())
}

fn eval_cmd(ckpt_path: &Path, set: &str, cases: Option<&Path>, episodes: usize, stochastic: bool, seed: u64) -> Result<()> {
    let ckpt = Checkpoint::load(ckpt_path)?;
    let table = ckpt.table()?;
    let mut agent = TangoAgent { model: &ckpt.model, table: &table };
    let base = if stochastic { SimConfig::default() } else { SimConfig::deterministic() };
    let cfg = SimConfig { seed, ..base };
    let (name, plan, action) = match cases {
        Some(p) => ("file".to_string(), eval_plan_accuracy(&mut agent, &read_cases(p)?, &cfg, episodes)?, None),
        None => {
            if !SET_NAMES.contains(&set) {
                bail!("unknown set `{set}` (expected one of {})", SET_NAMES.join(", "));
            }
            let spec = ckpt.data.clone().context("checkpoint lacks a data spec; pass --cases")?;
            let (retrofitted, _) = ckpt.embeddings.tables()?;
            let data = prepare(&spec, &retrofitted)?;
            let plan = eval_plan_accuracy(&mut agent, data.set(set)?, &cfg, episodes)?;
            let action = (set == "test").then(|| eval_action_accuracy(&mut agent, &data.test)).transpose()?;
            (set.to_string(), plan, action)
        }
    };
    println!("{}", json!({"set": name, "plan_accuracy": plan, "action_accuracy": action, "stochastic": stochastic}));
    Ok(())
}

fn ablate_cmd(config: Option<&Path>, csv: Option<&Path>) -> Result<()> {
    let c = run_config(config)?;
    let names: Vec<String> =
        if c.rows.is_empty() { ABLATION_ROWS.iter().map(|(n, _)| n.to_string()).collect() } else { c.rows.clone() };
    for n in &names {
        row_ablations(n)?;
    }
    let (retrofitted, base) = c.embeddings.tables()?;
    let data = prepare(&c.data, &retrofitted)?;
    let mut rows = Vec::new();
    for n in &names {
        let start = Instant::now();
        let (_, row) = run_row(n, &c.train, &data, &retrofitted, &base, &mut |_| {})?;
        eprintln!("{n}: test plan accuracy {:.3} ({:.0}s)", row.plan[0], start.elapsed().as_secs_f64());
        rows.push(row);
    }
    print!("{}", table_text(&rows));
    if let Some(p) = csv {
        write_text(p, &table_csv(&rows))?;
    }
    Ok(())
}
