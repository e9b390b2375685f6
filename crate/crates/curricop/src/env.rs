//! The prover as an episodic environment: reset to a problem
//! (optionally part-way into a stored proof, per the curriculum), then
//! step through extension actions until the tableau closes, the search
//! dead-ends, or the step limit runs out.
//!
//! Rewards are sparse: `reward_success` on the closing step, zero
//! everywhere else, so the per-episode return is either zero or
//! `reward_success`. Dead ends terminate at zero rather than a penalty;
//! the policy only ever scores the actions actually offered, so it has
//! no way to steer away from a forced dead end and punishing one would
//! just add variance.
//!
//! Everything here is deterministic: the offered action list comes out
//! of the engine in ascending (clause, literal) order and features use
//! a fixed hash, so a problem plus an action index sequence fully
//! determines every observation and reward. The `seed` carried in the
//! config is for the policy driving the episode, not the environment.

use std::rc::Rc;

use thiserror::Error;

use crate::features::{state_features, ActionFeatureCache, FeatureConfig, SparseVec};
use crate::fol::ProblemSpec;
use crate::tableau::{init_state_with, Action, EngineError, Proof, ProofState};

/// Environment knobs. `step_limit` bounds the number of agent steps in
/// one episode, not counting any stored-proof prefix replayed by a
/// curriculum reset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvConfig {
    pub step_limit: usize,
    pub reward_success: f64,
    pub occurs_check: bool,
    pub features: FeatureConfig,
    pub seed: u64,
}

impl EnvConfig {
    /// Training defaults: short episodes.
    pub fn train() -> EnvConfig {
        EnvConfig {
            step_limit: 1000,
            reward_success: 1.0,
            occurs_check: true,
            features: FeatureConfig::default(),
            seed: 0,
        }
    }

    /// Evaluation defaults: long rollouts.
    pub fn eval() -> EnvConfig {
        EnvConfig {
            step_limit: 20_000,
            ..EnvConfig::train()
        }
    }
}

/// What the agent sees: the featurized state, the applicable actions
/// each with its own feature vector, and how many extension steps the
/// tableau has accumulated (stored-proof prefix included).
#[derive(Clone, Debug)]
pub struct Observation {
    pub state_vec: SparseVec,
    pub actions: Vec<(Action, SparseVec)>,
    pub steps_taken: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminationCause {
    /// Tableau closed: the proof is complete.
    Closed,
    /// No applicable action in an open state.
    DeadEnd,
    /// The per-episode step limit was reached.
    StepLimit,
}

impl TerminationCause {
    pub fn name(self) -> &'static str {
        match self {
            TerminationCause::Closed => "closed",
            TerminationCause::DeadEnd => "dead_end",
            TerminationCause::StepLimit => "step_limit",
        }
    }
}

/// Step result: next observation (empty action list when the episode
/// ended), the reward, and termination info.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub cause: Option<TerminationCause>,
    /// The closing proof, present exactly when `cause` is `Closed`.
    /// Includes any stored-proof prefix replayed at reset.
    pub proof: Option<Proof>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnvError {
    #[error("curriculum level must be at least 1")]
    ZeroCurriculum,
    #[error("stored proof for {problem_id} fails replay at action {failed_at}")]
    CorruptStoredProof { problem_id: String, failed_at: usize },
    #[error("no active episode: call reset first")]
    NoEpisode,
    #[error("episode already finished")]
    EpisodeFinished,
    #[error("action index {index} out of range: {available} actions offered")]
    InvalidActionIndex { index: usize, available: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// One environment instance. Instances are independent; parallel
/// rollouts use one instance per worker.
#[derive(Debug)]
pub struct Env {
    cfg: EnvConfig,
    state: Option<ProofState>,
    cache: Option<ActionFeatureCache>,
    offered: Vec<Action>,
    prev: Option<Action>,
    episode_steps: usize,
    finished: Option<TerminationCause>,
}

impl Env {
    pub fn new(cfg: EnvConfig) -> Env {
        assert!(cfg.step_limit > 0, "step_limit must be positive");
        Env {
            cfg,
            state: None,
            cache: None,
            offered: Vec::new(),
            prev: None,
            episode_steps: 0,
            finished: None,
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// Termination cause of the current episode, if it has ended.
    pub fn finished(&self) -> Option<TerminationCause> {
        self.finished
    }

    /// Agent steps taken since the last reset (prefix replay excluded).
    pub fn episode_steps(&self) -> usize {
        self.episode_steps
    }

    pub fn state(&self) -> Option<&ProofState> {
        self.state.as_ref()
    }

    /// Starts an episode on `problem`. With a stored proof of length L
    /// and curriculum level c, the first max(0, L - c) actions are
    /// replayed so at most c steps remain on the stored path; a level
    /// at or above L starts from the beginning, as does a missing
    /// proof. The last replayed action becomes the "previous action"
    /// feature block of the first observation.
    pub fn reset(
        &mut self,
        problem: &Rc<ProblemSpec>,
        stored: Option<&Proof>,
        curriculum: usize,
    ) -> Result<Observation, EnvError> {
        if curriculum == 0 {
            return Err(EnvError::ZeroCurriculum);
        }
        let mut st = init_state_with(problem, self.cfg.occurs_check)?;
        let mut prev = None;
        if let Some(proof) = stored {
            let prefix = proof.length().saturating_sub(curriculum);
            for (i, &a) in proof.actions[..prefix].iter().enumerate() {
                if st.is_closed() || st.apply_action(a).is_err() {
                    return Err(EnvError::CorruptStoredProof {
                        problem_id: problem.id.clone(),
                        failed_at: i,
                    });
                }
                prev = Some(a);
            }
            if st.is_closed() {
                // A prefix strictly shorter than the declared length
                // closed the tableau, so the stored length is wrong.
                return Err(EnvError::CorruptStoredProof {
                    problem_id: problem.id.clone(),
                    failed_at: prefix,
                });
            }
        }
        self.cache = Some(ActionFeatureCache::build(problem, &self.cfg.features));
        self.offered = st.applicable_actions()?;
        self.prev = prev;
        self.episode_steps = 0;
        self.finished = if self.offered.is_empty() {
            Some(TerminationCause::DeadEnd)
        } else {
            None
        };
        self.state = Some(st);
        Ok(self.observe())
    }

    fn observe(&self) -> Observation {
        let st = self.state.as_ref().expect("active episode");
        let cache = self.cache.as_ref().expect("active episode");
        let actions = self
            .offered
            .iter()
            .map(|&a| (a, cache.get(a).expect("offered action is valid").clone()))
            .collect();
        Observation {
            state_vec: state_features(st, self.prev, &self.cfg.features),
            actions,
            steps_taken: st.steps_taken(),
        }
    }

    /// Applies the `index`-th offered action. Termination precedence:
    /// a closing step reports `Closed` even on the last allowed step;
    /// otherwise the step limit, then dead ends.
    pub fn step(&mut self, index: usize) -> Result<StepOutcome, EnvError> {
        if self.state.is_none() {
            return Err(EnvError::NoEpisode);
        }
        if self.finished.is_some() {
            return Err(EnvError::EpisodeFinished);
        }
        if index >= self.offered.len() {
            return Err(EnvError::InvalidActionIndex {
                index,
                available: self.offered.len(),
            });
        }
        let action = self.offered[index];
        let st = self.state.as_mut().expect("checked above");
        st.apply_action(action)?;
        self.prev = Some(action);
        self.episode_steps += 1;

        let cause = if st.is_closed() {
            Some(TerminationCause::Closed)
        } else if self.episode_steps >= self.cfg.step_limit {
            Some(TerminationCause::StepLimit)
        } else {
            self.offered = st.applicable_actions()?;
            if self.offered.is_empty() {
                Some(TerminationCause::DeadEnd)
            } else {
                None
            }
        };
        if cause.is_some() {
            self.offered.clear();
        }
        self.finished = cause;

        let closed = cause == Some(TerminationCause::Closed);
        let proof = closed.then(|| self.state.as_ref().expect("active").proof());
        Ok(StepOutcome {
            observation: self.observe(),
            reward: if closed { self.cfg.reward_success } else { 0.0 },
            done: cause.is_some(),
            cause,
            proof,
        })
    }
}
