//! Command-line surface: dataset generation, training, proving,
//! evaluation, proof replay and feature inspection.
//!
//! Every subcommand reads an optional `--config` file and applies
//! `--set key=value` overrides on top, so flags shared with the config
//! format never drift apart. Exit codes: 0 on success, 1 on
//! operational failure (no proof found, replay does not close, bad
//! input files), 2 on usage errors.

use std::path::{Path, PathBuf};
use std::rc::Rc;

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::arith::{gen_stage, SplitKind, StageSpec};
use crate::config::FullConfig;
use crate::env::Env;
use crate::evalrun::{
    cumulative_length_histogram, evaluate_parallel, evaluate_problem, histogram_tsv,
};
use crate::fol::{parse_problem, serialize_problem, ProblemSpec};
use crate::learner::{load_checkpoint, Learner};
use crate::store::ProofStore;
use crate::tableau::{iterative_deepening, replay, Proof};
use crate::trainer::{report_tsv, Trainer};

#[derive(Parser)]
#[command(
    name = "curricop",
    version,
    about = "Connection tableau proving over Robinson arithmetic with curriculum reinforcement learning"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines applied over the defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Single-key overrides applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Eval,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProveMode {
    /// Exhaustive iterative deepening over proof length.
    Id,
    /// Rollouts of a trained policy checkpoint.
    Policy,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a stage dataset: one problem file per statement plus a manifest.
    Generate {
        /// Curriculum stage (1, 2 or 3).
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        stage: u8,
        #[arg(long, value_enum)]
        split: SplitArg,
        /// Output directory, created if missing.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Generation seed; the same seed regenerates identical files.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a policy with curriculum learning on proofs.
    Train {
        /// Problem file or directory of `.cnf` files.
        #[arg(long, value_name = "PATH")]
        problems: PathBuf,
        /// Run directory for checkpoint, proofs and the training log.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Optional proof store seeding the curriculum.
        #[arg(long, value_name = "FILE")]
        proofs: Option<PathBuf>,
    },
    /// Prove a single problem and print the proof.
    Prove {
        problem: PathBuf,
        #[arg(long, value_enum, default_value = "id")]
        mode: ProveMode,
        /// Extension-step bound for iterative deepening.
        #[arg(long, default_value_t = 12)]
        max_depth: usize,
        /// Total search-node budget for iterative deepening.
        #[arg(long, default_value_t = 50_000_000)]
        search_budget: usize,
        /// Checkpoint directory (policy mode).
        #[arg(long, value_name = "DIR")]
        checkpoint: Option<PathBuf>,
        /// Also write the proof as a proof-store file.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint over a problem set.
    Evaluate {
        /// Problem file or directory of `.cnf` files.
        #[arg(long, value_name = "PATH")]
        problems: PathBuf,
        #[arg(long, value_name = "DIR")]
        checkpoint: PathBuf,
        /// Write the per-problem metrics table here instead of stdout.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Write a cumulative proof-length histogram here.
        #[arg(long, value_name = "FILE")]
        histogram: Option<PathBuf>,
        /// Histogram length bounds.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "10,20,50,100,200,500,1000,2000,5000,10000,20000"
        )]
        bounds: Vec<usize>,
    },
    /// Check a stored proof against a problem; exits 0 iff it closes.
    Replay {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        proof: PathBuf,
    },
    /// Dump the hashed feature vectors of a problem's initial state.
    Features { problem: PathBuf },
}

/// Entry point used by the binary: parses real process arguments.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Parses and executes `argv`, returning the process exit code.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = err.print();
            return code;
        }
    };
    let cfg = match build_config(&cli.common) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("error: {err:#}");
            return if err.is::<UsageError>() { 2 } else { 1 };
        }
    };
    match dispatch(cli.cmd, &cfg) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    }
}

/// Marker for bad `--set` overrides, which are usage errors rather
/// than operational ones. Config file problems stay operational.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn build_config(common: &Common) -> Result<FullConfig> {
    let mut cfg = match &common.config {
        Some(path) => FullConfig::load(path)?,
        None => FullConfig::default(),
    };
    for pair in &common.overrides {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            UsageError(format!("--set expects KEY=VALUE, got '{pair}'"))
        })?;
        cfg.apply(key.trim(), value.trim())
            .map_err(|e| UsageError(format!("--set '{pair}': {e}")))?;
    }
    Ok(cfg)
}

fn dispatch(cmd: Cmd, cfg: &FullConfig) -> Result<()> {
    match cmd {
        Cmd::Generate {
            stage,
            split,
            out,
            seed,
        } => generate(stage, split, &out, seed),
        Cmd::Train {
            problems,
            out,
            proofs,
        } => train(&problems, &out, proofs.as_deref(), cfg),
        Cmd::Prove {
            problem,
            mode,
            max_depth,
            search_budget,
            checkpoint,
            out,
        } => prove(
            &problem,
            mode,
            max_depth,
            search_budget,
            checkpoint.as_deref(),
            out.as_deref(),
            cfg,
        ),
        Cmd::Evaluate {
            problems,
            checkpoint,
            out,
            histogram,
            bounds,
        } => evaluate_cmd(
            &problems,
            &checkpoint,
            out.as_deref(),
            histogram.as_deref(),
            &bounds,
            cfg,
        ),
        Cmd::Replay { problem, proof } => replay_cmd(&problem, &proof),
        Cmd::Features { problem } => features_cmd(&problem, cfg),
    }
}

fn load_problem(path: &Path) -> Result<Rc<ProblemSpec>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading problem {}", path.display()))?;
    let problem =
        parse_problem(&text).with_context(|| format!("parsing problem {}", path.display()))?;
    Ok(Rc::new(problem))
}

/// Reads a problem file, or every `.cnf` file of a directory in
/// filename order. Returns raw texts so parallel consumers can parse
/// per worker.
fn load_problem_texts(path: &Path) -> Result<Vec<String>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .with_context(|| format!("reading directory {}", path.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "cnf"))
            .collect();
        files.sort();
        if files.is_empty() {
            bail!("no .cnf files in {}", path.display());
        }
        files
            .iter()
            .map(|f| {
                std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))
            })
            .collect()
    } else {
        Ok(vec![std::fs::read_to_string(path)
            .with_context(|| format!("reading problem {}", path.display()))?])
    }
}

fn load_problems(path: &Path) -> Result<Vec<Rc<ProblemSpec>>> {
    load_problem_texts(path)?
        .iter()
        .map(|text| {
            parse_problem(text)
                .map(Rc::new)
                .with_context(|| format!("parsing problems from {}", path.display()))
        })
        .collect()
}

fn generate(stage: u8, split: SplitArg, out: &Path, seed: u64) -> Result<()> {
    let split = match split {
        SplitArg::Train => SplitKind::Train,
        SplitArg::Eval => SplitKind::Eval,
    };
    let spec = StageSpec::new(stage, split, seed);
    let problems = gen_stage(&spec);
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut manifest = String::from("problem_id\tfile\tstatement\n");
    for p in &problems {
        let file = format!("{}.cnf", p.id);
        std::fs::write(out.join(&file), serialize_problem(p))
            .with_context(|| format!("writing {file}"))?;
        let statement = p.metadata.statement.as_deref().unwrap_or("-");
        manifest.push_str(&format!("{}\t{}\t{}\n", p.id, file, statement));
    }
    std::fs::write(out.join("manifest.tsv"), manifest).context("writing manifest.tsv")?;
    println!(
        "wrote {} problems for stage {} {} split to {}",
        problems.len(),
        stage,
        split.name(),
        out.display()
    );
    Ok(())
}

fn train(problems: &Path, out: &Path, proofs: Option<&Path>, cfg: &FullConfig) -> Result<()> {
    let problem_set = load_problems(problems)?;
    let store = match proofs {
        Some(path) => ProofStore::load(path)?,
        None => ProofStore::new(),
    };
    let learner = Learner::new(cfg.env.features, cfg.learner, cfg.train.seed);
    let mut trainer = Trainer::new(problem_set, store, learner, cfg.train, cfg.env)?;
    println!("steps\tcurriculum\tsuccess_rate\tmean_reward\tproofs_known");
    trainer.run_with(|row| {
        println!(
            "{}\t{}\t{:.4}\t{:.4}\t{}",
            row.steps, row.curriculum, row.success_rate, row.mean_reward, row.proofs_known
        );
    })?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    trainer
        .learner
        .save_checkpoint(&out.join("checkpoint"), &cfg.config_hash(), trainer.steps() as u64)?;
    trainer.store.save(&out.join("proofs.tsv"))?;
    std::fs::write(out.join("train_log.tsv"), report_tsv(trainer.rows()))
        .context("writing train_log.tsv")?;
    eprintln!(
        "trained {} steps, {} proofs known, artifacts in {}",
        trainer.steps(),
        trainer.store.len(),
        out.display()
    );
    Ok(())
}

fn format_proof(proof: &Proof) -> String {
    proof
        .actions
        .iter()
        .map(|a| format!("{}.{}", a.clause_id, a.literal_idx))
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_proof_file(path: &Path, problem: &Rc<ProblemSpec>, proof: Proof) -> Result<()> {
    let mut store = ProofStore::new();
    store.update(problem, proof)?;
    store.save(path)?;
    Ok(())
}

fn prove(
    problem_path: &Path,
    mode: ProveMode,
    max_depth: usize,
    search_budget: usize,
    checkpoint: Option<&Path>,
    out: Option<&Path>,
    cfg: &FullConfig,
) -> Result<()> {
    let problem = load_problem(problem_path)?;
    let proof = match mode {
        ProveMode::Id => iterative_deepening(&problem, max_depth, search_budget)?
            .ok_or_else(|| {
                anyhow!(
                    "no proof of {} within {} extensions",
                    problem.id,
                    max_depth
                )
            })?,
        ProveMode::Policy => {
            let dir = checkpoint
                .ok_or_else(|| anyhow!("--checkpoint is required with --mode policy"))?;
            let (learner, manifest) = load_checkpoint(dir, cfg.env.features, cfg.learner)?;
            check_hash(&manifest.config_hash, cfg);
            let record = evaluate_problem(&learner, &problem, &cfg.eval)?;
            record.best_proof.ok_or_else(|| {
                anyhow!(
                    "no proof of {} in {} attempts",
                    problem.id,
                    record.attempts_used
                )
            })?
        }
    };
    let report = replay(&problem, &proof);
    if !report.closed {
        bail!("internal error: found proof fails to replay");
    }
    println!("proof of {} in {} extensions", problem.id, proof.length());
    println!("{}", format_proof(&proof));
    if let Some(path) = out {
        write_proof_file(path, &problem, proof)?;
    }
    Ok(())
}

fn check_hash(found: &str, cfg: &FullConfig) {
    let current = cfg.config_hash();
    if found != current {
        eprintln!(
            "note: checkpoint was trained under config {found}, current is {current}; \
             network shapes were validated, other settings may differ"
        );
    }
}

fn evaluate_cmd(
    problems: &Path,
    checkpoint: &Path,
    out: Option<&Path>,
    histogram: Option<&Path>,
    bounds: &[usize],
    cfg: &FullConfig,
) -> Result<()> {
    let texts = load_problem_texts(problems)?;
    let (learner, manifest) = load_checkpoint(checkpoint, cfg.env.features, cfg.learner)?;
    check_hash(&manifest.config_hash, cfg);
    let metrics = evaluate_parallel(&learner, &texts, &cfg.eval)?;
    let table = metrics.to_tsv();
    match out {
        Some(path) => {
            std::fs::write(path, &table)
                .with_context(|| format!("writing {}", path.display()))?;
            println!(
                "evaluated {} problems: succ {:.4}, len {}",
                metrics.records.len(),
                metrics.succ,
                metrics
                    .len
                    .map_or_else(|| "-".to_string(), |l| format!("{l:.2}")),
            );
        }
        None => print!("{table}"),
    }
    if let Some(path) = histogram {
        let rows = cumulative_length_histogram(&metrics.solved_lengths(), bounds);
        std::fs::write(path, histogram_tsv(&rows))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn replay_cmd(problem_path: &Path, proof_path: &Path) -> Result<()> {
    let problem = load_problem(problem_path)?;
    let store = ProofStore::load(proof_path)?;
    let proof = match store.get(&problem.id) {
        Some(p) => p,
        None => {
            let mut iter = store.iter();
            match (iter.next(), iter.next()) {
                (Some((_, only)), None) => only,
                _ => bail!(
                    "proof file has no entry for {} and is not a single-proof file",
                    problem.id
                ),
            }
        }
    };
    let report = replay(&problem, proof);
    if report.closed {
        println!(
            "proof of {} closes after {} extensions",
            problem.id, report.final_length
        );
        Ok(())
    } else {
        match report.failed_at {
            Some(i) => bail!(
                "replay fails at action {} of {} ({}.{})",
                i + 1,
                proof.length(),
                proof.actions[i].clause_id,
                proof.actions[i].literal_idx
            ),
            None => bail!(
                "replay applies all {} actions but the tableau is not closed",
                proof.length()
            ),
        }
    }
}

fn features_cmd(problem_path: &Path, cfg: &FullConfig) -> Result<()> {
    let problem = load_problem(problem_path)?;
    let mut env = Env::new(cfg.env);
    let obs = env.reset(&problem, None, 1)?;
    println!("problem {}", problem.id);
    println!(
        "state dim {} nnz {}: {}",
        obs.state_vec.dim(),
        obs.state_vec.nnz(),
        obs.state_vec
    );
    println!("actions {}", obs.actions.len());
    for (action, vec) in &obs.actions {
        println!(
            "action {}.{} dim {} nnz {}: {}",
            action.clause_id,
            action.literal_idx,
            vec.dim(),
            vec.nnz(),
            vec
        );
    }
    Ok(())
}
