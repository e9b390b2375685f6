//! End-to-end training demo: curriculum learning on the two stage-1
//! training problems, checkpoint round-trip, then evaluation of the
//! learned policy on all statements with operands below a bound.
//!
//! The two training proofs are found by iterative deepening first, so
//! the curriculum can replay their suffixes from the start. Training
//! then follows the batch loop: sample episodes, update the policy,
//! advance the curriculum whenever the batch success rate clears the
//! threshold. Evaluation runs in two tiers, the way a multi-attempt
//! stochastic protocol stays affordable: a cheap low-limit pass over
//! everything, then a high-limit pass over only the remainder.
//!
//! Usage: train_curriculum [train_steps] [eval_bound] [seed] [attempts]
//! Defaults: 60000 steps, bound 10 (the 200 easiest eval statements),
//! seed 0, 8 first-tier attempts per problem. Expect two to three
//! minutes in release mode with a success rate around 0.95 or higher.

use std::collections::HashMap;
use std::rc::Rc;

use curricop::arith::{gen_stage, make_problem, stage1_statements, SplitKind, StageSpec};
use curricop::config::FullConfig;
use curricop::env::EnvConfig;
use curricop::evalrun::{evaluate, EvalConfig, EvalMode, Metrics};
use curricop::learner::{load_checkpoint, Learner, LearnerConfig};
use curricop::store::ProofStore;
use curricop::tableau::iterative_deepening;
use curricop::trainer::{CurriculumMode, TrainConfig, Trainer};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let train_steps: usize = args.get(1).map_or(60_000, |s| s.parse().expect("steps"));
    let eval_bound: u64 = args.get(2).map_or(10, |s| s.parse().expect("bound"));
    let seed: u64 = args.get(3).map_or(0, |s| s.parse().expect("seed"));
    let attempts: usize = args.get(4).map_or(8, |s| s.parse().expect("attempts"));

    let problems = gen_stage(&StageSpec::new(1, SplitKind::Train, 0));
    let problems: Vec<Rc<_>> = problems.into_iter().map(Rc::new).collect();

    // Bootstrap the proof store with exact shortest proofs.
    let mut store = ProofStore::new();
    for p in &problems {
        let proof = iterative_deepening(p, 10, 10_000_000)
            .expect("search")
            .expect("stage-1 training problems are provable within depth 10");
        println!("bootstrap proof of {} in {} extensions", p.id, proof.length());
        store.update(p, proof).expect("oracle proofs replay");
    }

    let mut cfg = FullConfig::default();
    cfg.train = TrainConfig {
        progress_threshold: 0.8,
        episodes_per_update: 64,
        step_budget: train_steps,
        curriculum: CurriculumMode::Global,
        seed,
    };
    cfg.env = EnvConfig {
        step_limit: 100,
        ..EnvConfig::train()
    };
    cfg.learner = LearnerConfig {
        hidden: 96,
        hidden_layers: 1,
        lr: 3e-4,
        entropy_coef: 0.05,
        ..LearnerConfig::default()
    };

    let learner = Learner::new(cfg.env.features, cfg.learner, seed);
    let mut trainer = Trainer::new(problems, store, learner, cfg.train, cfg.env).expect("setup");
    println!("steps\tcurriculum\tsuccess_rate\tproofs_known");
    let mut batch = 0usize;
    trainer
        .run_with(|row| {
            batch += 1;
            if batch % 20 == 0 || row.steps >= train_steps {
                println!(
                    "{}\t{}\t{:.2}\t{}",
                    row.steps, row.curriculum, row.success_rate, row.proofs_known
                );
            }
        })
        .expect("training");

    // Round-trip the learned parameters through a checkpoint.
    let dir = std::env::temp_dir().join(format!("curricop_demo_{seed}"));
    trainer
        .learner
        .save_checkpoint(&dir, &cfg.config_hash(), trainer.steps() as u64)
        .expect("save");
    let (loaded, manifest) = load_checkpoint(&dir, cfg.env.features, cfg.learner).expect("load");
    println!(
        "checkpoint round-trip ok ({} train steps recorded)",
        manifest.train_steps
    );

    let eval_problems: Vec<Rc<_>> = stage1_statements(eval_bound)
        .iter()
        .map(|s| Rc::new(make_problem(s)))
        .collect();

    // Tier 1: many cheap attempts. Most problems fall here because
    // failed stochastic attempts always run to the step limit.
    let tier1 = EvalConfig {
        attempts,
        step_limit: 120,
        mode: EvalMode::Stochastic,
        seed,
        ..EvalConfig::default()
    };
    let first = evaluate(&loaded, &eval_problems, &tier1).expect("eval");

    // Tier 2: fewer long attempts on whatever tier 1 missed.
    let unsolved: Vec<Rc<_>> = eval_problems
        .iter()
        .filter(|p| {
            first
                .records
                .iter()
                .any(|r| r.problem_id == p.id && !r.solved)
        })
        .cloned()
        .collect();
    let mut by_id: HashMap<String, _> = first
        .records
        .into_iter()
        .map(|r| (r.problem_id.clone(), r))
        .collect();
    if !unsolved.is_empty() {
        let tier2 = EvalConfig {
            attempts: (attempts / 2).max(1),
            step_limit: 1500,
            mode: EvalMode::Stochastic,
            seed: seed ^ 0xabcd,
            ..EvalConfig::default()
        };
        let second = evaluate(&loaded, &unsolved, &tier2).expect("eval tier 2");
        for r in second.records {
            by_id.insert(r.problem_id.clone(), r);
        }
    }
    let metrics = Metrics::from_records(by_id.into_values().collect());

    println!(
        "eval on {} problems with operands < {}: succ {:.3}, mean len {}",
        eval_problems.len(),
        eval_bound,
        metrics.succ,
        metrics
            .len
            .map_or_else(|| "-".to_string(), |l| format!("{l:.1}")),
    );
    let unsolved: Vec<&str> = metrics
        .records
        .iter()
        .filter(|r| !r.solved)
        .map(|r| r.problem_id.as_str())
        .collect();
    if !unsolved.is_empty() {
        let shown = unsolved.len().min(12);
        println!("unsolved ({}): {:?} ...", unsolved.len(), &unsolved[..shown]);
    }
}
