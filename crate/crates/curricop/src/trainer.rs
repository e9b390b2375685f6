//! Curriculum learning on proofs: the full training loop.
//!
//! Each iteration samples `episodes_per_update` episodes, every episode
//! on a problem drawn uniformly at random (with replacement) from the
//! problem set. A problem with a stored proof starts part-way in: the
//! stored actions are replayed until `curriculum` steps remain. Found
//! proofs go to the proof store when strictly shorter than the
//! incumbent, and the first proof of a previously unproven problem
//! resets the curriculum to 1 immediately, affecting the rest of the
//! batch. After the batch the policy is updated once, and the
//! curriculum advances by one when the batch success rate strictly
//! exceeds the progress threshold.
//!
//! Curriculum scheduling is global by default (one shared level); a
//! per-problem mode advances and restarts each problem independently,
//! and `Off` disables prefix replay and scheduling entirely, which is
//! the pure-exploration baseline.
//!
//! Everything is single-threaded and deterministic in the seed: the
//! same problems, configs and seed reproduce the training trajectory
//! exactly.

use std::collections::HashMap;
use std::rc::Rc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::{Env, EnvConfig, EnvError, TerminationCause};
use crate::fol::ProblemSpec;
use crate::learner::{sample_index, Batch, Learner, LearnerError, Transition};
use crate::store::{ProofStore, StoreError, StoreUpdate};
use crate::tableau::Proof;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurriculumMode {
    /// One curriculum level shared by all problems.
    Global,
    /// Independent level per problem, advanced on per-problem success.
    PerProblem,
    /// No prefix replay and no scheduling: pure exploration.
    Off,
}

impl CurriculumMode {
    pub fn name(self) -> &'static str {
        match self {
            CurriculumMode::Global => "global",
            CurriculumMode::PerProblem => "per_problem",
            CurriculumMode::Off => "off",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    /// Advance the curriculum when a batch's success rate strictly
    /// exceeds this.
    pub progress_threshold: f64,
    /// Episodes per policy update (k).
    pub episodes_per_update: usize,
    /// Total environment steps to train for, checked between batches.
    pub step_budget: usize,
    pub curriculum: CurriculumMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            progress_threshold: 0.8,
            episodes_per_update: 64,
            step_budget: 100_000,
            curriculum: CurriculumMode::Global,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let ok = (0.0..=1.0).contains(&self.progress_threshold)
            && self.episodes_per_update >= 1
            && self.step_budget >= 1;
        if ok {
            Ok(())
        } else {
            Err(TrainError::InvalidConfig)
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("problem set is empty")]
    NoProblems,
    #[error("train config out of range: need threshold in [0,1], k >= 1, step budget >= 1")]
    InvalidConfig,
    #[error("feature dimensions of learner and environment disagree")]
    FeatureMismatch,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// One sampled episode with everything the learner and the proof store
/// need from it.
#[derive(Clone, Debug)]
pub struct EpisodeRecord {
    pub problem_id: String,
    pub transitions: Vec<Transition>,
    pub success: bool,
    pub proof: Option<Proof>,
    pub env_steps: usize,
    pub total_reward: f64,
    pub cause: Option<TerminationCause>,
}

/// Rolls out one episode with stochastic action sampling, recording
/// transitions for the learner.
pub fn sample_episode(
    env: &mut Env,
    learner: &Learner,
    problem: &Rc<ProblemSpec>,
    stored: Option<&Proof>,
    curriculum: usize,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeRecord, TrainError> {
    let mut obs = env.reset(problem, stored, curriculum)?;
    let mut record = EpisodeRecord {
        problem_id: problem.id.clone(),
        transitions: Vec::new(),
        success: false,
        proof: None,
        env_steps: 0,
        total_reward: 0.0,
        cause: env.finished(),
    };
    while env.finished().is_none() {
        let action_vecs: Vec<_> = obs.actions.iter().map(|(_, v)| v.clone()).collect();
        let probs = learner.policy_probs(&obs.state_vec, &action_vecs)?;
        let chosen = sample_index(&probs, rng);
        let logp_old = probs[chosen].ln();
        let value = learner.value_of(&obs.state_vec);
        let out = env.step(chosen)?;
        record.transitions.push(Transition {
            state: obs.state_vec,
            actions: action_vecs,
            chosen,
            logp_old,
            reward: out.reward,
            done: out.done,
            value,
        });
        record.env_steps += 1;
        record.total_reward += out.reward;
        if out.done {
            record.cause = out.cause;
            if out.cause == Some(TerminationCause::Closed) {
                record.success = true;
                record.proof = out.proof;
            }
        }
        obs = out.observation;
    }
    Ok(record)
}

/// Per-update training log row: environment steps so far, the
/// curriculum level (mean across problems in per-problem mode), batch
/// success rate and mean episode reward, and how many problems have
/// stored proofs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainRow {
    pub steps: usize,
    pub curriculum: f64,
    pub success_rate: f64,
    pub mean_reward: f64,
    pub proofs_known: usize,
}

/// Renders log rows as a tab-separated table with a header.
pub fn report_tsv(rows: &[TrainRow]) -> String {
    let mut out = String::from("steps\tcurriculum\tsuccess_rate\tmean_reward\tproofs_known\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{:.4}\t{:.4}\t{}\n",
            r.steps, r.curriculum, r.success_rate, r.mean_reward, r.proofs_known
        ));
    }
    out
}

/// The curriculum advancement rule: one step up exactly when the
/// success rate strictly exceeds the threshold.
pub fn advance_curriculum(curriculum: usize, success_rate: f64, threshold: f64) -> usize {
    if success_rate > threshold {
        curriculum + 1
    } else {
        curriculum
    }
}

pub struct Trainer {
    problems: Vec<Rc<ProblemSpec>>,
    pub store: ProofStore,
    pub learner: Learner,
    env: Env,
    cfg: TrainConfig,
    curriculum: usize,
    per_problem: HashMap<String, usize>,
    steps: usize,
    rng: ChaCha8Rng,
    rows: Vec<TrainRow>,
}

impl Trainer {
    /// `initial_proofs` may seed the store (they are replay-validated
    /// on first use). The learner's feature dimensions must match the
    /// environment's.
    pub fn new(
        problems: Vec<Rc<ProblemSpec>>,
        initial_proofs: ProofStore,
        learner: Learner,
        cfg: TrainConfig,
        env_cfg: EnvConfig,
    ) -> Result<Trainer, TrainError> {
        cfg.validate()?;
        if problems.is_empty() {
            return Err(TrainError::NoProblems);
        }
        if learner.features != env_cfg.features {
            return Err(TrainError::FeatureMismatch);
        }
        Ok(Trainer {
            problems,
            store: initial_proofs,
            learner,
            env: Env::new(env_cfg),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            curriculum: 1,
            per_problem: HashMap::new(),
            steps: 0,
            rows: Vec::new(),
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// The global curriculum level (or the mean per-problem level).
    pub fn curriculum(&self) -> f64 {
        match self.cfg.curriculum {
            CurriculumMode::Global | CurriculumMode::Off => self.curriculum as f64,
            CurriculumMode::PerProblem => {
                let total: usize = self
                    .problems
                    .iter()
                    .map(|p| self.per_problem.get(&p.id).copied().unwrap_or(1))
                    .sum();
                total as f64 / self.problems.len() as f64
            }
        }
    }

    pub fn rows(&self) -> &[TrainRow] {
        &self.rows
    }

    fn level_for(&self, problem_id: &str) -> usize {
        match self.cfg.curriculum {
            CurriculumMode::Global => self.curriculum,
            CurriculumMode::PerProblem => {
                self.per_problem.get(problem_id).copied().unwrap_or(1)
            }
            CurriculumMode::Off => 1,
        }
    }

    /// One Algorithm-1 iteration: k sampled episodes, store updates and
    /// curriculum restarts inline, one policy update, then the
    /// advancement check.
    pub fn step_batch(&mut self) -> Result<TrainRow, TrainError> {
        let k = self.cfg.episodes_per_update;
        let mut successes = 0usize;
        let mut total_reward = 0.0;
        let mut transitions = Vec::new();
        let mut attempts: HashMap<String, (usize, usize)> = HashMap::new();

        for _ in 0..k {
            let p = self.problems[self.rng.gen_range(0..self.problems.len())].clone();
            let stored = match self.cfg.curriculum {
                CurriculumMode::Off => None,
                _ => self.store.get(&p.id).cloned(),
            };
            let level = self.level_for(&p.id);
            let record = sample_episode(
                &mut self.env,
                &self.learner,
                &p,
                stored.as_ref(),
                level,
                &mut self.rng,
            )?;
            self.steps += record.env_steps;
            total_reward += record.total_reward;
            let entry = attempts.entry(p.id.clone()).or_insert((0, 0));
            entry.0 += 1;
            if record.success {
                successes += 1;
                entry.1 += 1;
                if let Some(proof) = record.proof {
                    if self.store.update(&p, proof)? == StoreUpdate::NewlyProven {
                        match self.cfg.curriculum {
                            CurriculumMode::Global => self.curriculum = 1,
                            CurriculumMode::PerProblem => {
                                self.per_problem.insert(p.id.clone(), 1);
                            }
                            CurriculumMode::Off => {}
                        }
                    }
                }
            }
            transitions.extend(record.transitions);
        }

        if !transitions.is_empty() {
            let batch =
                Batch::from_transitions(transitions, self.learner.cfg.gamma, self.learner.cfg.lam)?;
            self.learner.ppo_update(&batch)?;
        }

        let success_rate = successes as f64 / k as f64;
        match self.cfg.curriculum {
            CurriculumMode::Global => {
                self.curriculum =
                    advance_curriculum(self.curriculum, success_rate, self.cfg.progress_threshold);
            }
            CurriculumMode::PerProblem => {
                for (id, (tried, won)) in &attempts {
                    let rate = *won as f64 / *tried as f64;
                    let level = self.per_problem.get(id).copied().unwrap_or(1);
                    let next = advance_curriculum(level, rate, self.cfg.progress_threshold);
                    if next != level {
                        self.per_problem.insert(id.clone(), next);
                    }
                }
            }
            CurriculumMode::Off => {}
        }

        let row = TrainRow {
            steps: self.steps,
            curriculum: self.curriculum(),
            success_rate,
            mean_reward: total_reward / k as f64,
            proofs_known: self.store.len(),
        };
        self.rows.push(row);
        Ok(row)
    }

    /// Runs batches until the step budget is spent.
    pub fn run(&mut self) -> Result<(), TrainError> {
        self.run_with(|_| {})
    }

    /// As [`Trainer::run`], invoking the callback after every batch.
    pub fn run_with(&mut self, mut on_batch: impl FnMut(&TrainRow)) -> Result<(), TrainError> {
        while self.steps < self.cfg.step_budget {
            let row = self.step_batch()?;
            on_batch(&row);
        }
        Ok(())
    }
}
