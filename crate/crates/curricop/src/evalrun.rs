//! Evaluation of a frozen policy: independent rollouts per problem,
//! success and proof-length metrics, and plot-ready table emission.
//!
//! Each attempt is a fresh episode with its own deterministic RNG seed
//! derived from the evaluation seed, the problem id and the attempt
//! index, so results do not depend on scheduling order and problems
//! can be evaluated in parallel without changing any number.

use std::rc::Rc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::env::{Env, EnvConfig, EnvError, TerminationCause};
use crate::features::fnv1a64;
use crate::fol::{parse_problem, ParseError, ProblemSpec};
use crate::learner::{greedy_index, sample_index, Learner, LearnerError};
use crate::tableau::{replay, Proof};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    /// Sample actions from the policy distribution.
    Stochastic,
    /// Always take the highest-probability action. Deterministic, so a
    /// single attempt suffices.
    Greedy,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Stochastic => "stochastic",
            EvalMode::Greedy => "greedy",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalConfig {
    /// Independent rollouts per problem.
    pub attempts: usize,
    /// Agent steps allowed per attempt.
    pub step_limit: usize,
    /// Optional per-attempt wall-clock cutoff. Using it trades
    /// determinism for paper-style time limits.
    pub wall_limit: Option<Duration>,
    pub mode: EvalMode,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> EvalConfig {
        EvalConfig {
            attempts: 100,
            step_limit: 20_000,
            wall_limit: None,
            mode: EvalMode::Stochastic,
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.attempts >= 1 && self.step_limit >= 1 {
            Ok(())
        } else {
            Err(EvalError::InvalidConfig)
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("eval config out of range: need attempts >= 1 and step limit >= 1")]
    InvalidConfig,
    #[error("policy produced a proof of {problem_id} that does not replay")]
    InvalidProofFound { problem_id: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Outcome of all attempts on one problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemEval {
    pub problem_id: String,
    pub solved: bool,
    /// Length of the shortest proof found across attempts.
    pub best_length: Option<usize>,
    /// Attempts actually executed (all of them, except greedy mode
    /// which runs one).
    pub attempts_used: usize,
    pub best_proof: Option<Proof>,
}

/// Aggregate metrics: `succ` is the fraction of problems solved at
/// least once, `len` the mean over solved problems of each problem's
/// shortest found proof. `len` is `None` when nothing was solved.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub succ: f64,
    pub len: Option<f64>,
    pub records: Vec<ProblemEval>,
}

impl Metrics {
    pub fn from_records(records: Vec<ProblemEval>) -> Metrics {
        let solved = records.iter().filter(|r| r.solved).count();
        let succ = if records.is_empty() {
            0.0
        } else {
            solved as f64 / records.len() as f64
        };
        let len = if solved == 0 {
            None
        } else {
            let total: usize = records.iter().filter_map(|r| r.best_length).sum();
            Some(total as f64 / solved as f64)
        };
        Metrics { succ, len, records }
    }

    /// Lengths of the best proofs of solved problems, in record order.
    pub fn solved_lengths(&self) -> Vec<usize> {
        self.records.iter().filter_map(|r| r.best_length).collect()
    }

    /// One row per problem (`problem_id`, `solved`, `best_length`,
    /// `attempts_used`) and a final `ALL` summary row carrying `succ`,
    /// mean `len` and total attempts.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("problem_id\tsolved\tbest_length\tattempts_used\n");
        for r in &self.records {
            let len = r
                .best_length
                .map_or_else(|| "-".to_string(), |l| l.to_string());
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.problem_id,
                u8::from(r.solved),
                len,
                r.attempts_used
            ));
        }
        let total_attempts: usize = self.records.iter().map(|r| r.attempts_used).sum();
        let len = self
            .len
            .map_or_else(|| "-".to_string(), |l| format!("{l:.2}"));
        out.push_str(&format!(
            "ALL\t{:.4}\t{}\t{}\n",
            self.succ, len, total_attempts
        ));
        out
    }
}

/// Counts proofs with length at or below each bound. Bounds are
/// reported in the order given; with ascending bounds the counts are
/// monotone and the last one counts every proof no longer than the
/// largest bound.
pub fn cumulative_length_histogram(lengths: &[usize], bounds: &[usize]) -> Vec<(usize, usize)> {
    bounds
        .iter()
        .map(|&b| (b, lengths.iter().filter(|&&l| l <= b).count()))
        .collect()
}

/// Histogram rows as `bound<TAB>count` lines with a header.
pub fn histogram_tsv(rows: &[(usize, usize)]) -> String {
    let mut out = String::from("length_bound\tproofs_within\n");
    for (bound, count) in rows {
        out.push_str(&format!("{bound}\t{count}\n"));
    }
    out
}

/// Deterministic per-attempt RNG seed.
pub fn attempt_seed(seed: u64, problem_id: &str, attempt: usize) -> u64 {
    let key = format!("{seed}|{problem_id}|{attempt}");
    fnv1a64(key.as_bytes())
}

fn eval_env_config(learner: &Learner, cfg: &EvalConfig) -> EnvConfig {
    let mut env_cfg = EnvConfig::eval();
    env_cfg.step_limit = cfg.step_limit;
    env_cfg.features = learner.features;
    env_cfg
}

/// Runs all attempts on one problem. Every reported proof is
/// re-validated by an independent replay before it is returned.
pub fn evaluate_problem(
    learner: &Learner,
    problem: &Rc<ProblemSpec>,
    cfg: &EvalConfig,
) -> Result<ProblemEval, EvalError> {
    cfg.validate()?;
    let mut env = Env::new(eval_env_config(learner, cfg));
    let attempts = match cfg.mode {
        EvalMode::Stochastic => cfg.attempts,
        EvalMode::Greedy => 1,
    };
    let mut record = ProblemEval {
        problem_id: problem.id.clone(),
        solved: false,
        best_length: None,
        attempts_used: 0,
        best_proof: None,
    };
    for attempt in 0..attempts {
        record.attempts_used += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(attempt_seed(cfg.seed, &problem.id, attempt));
        let started = Instant::now();
        let mut obs = env.reset(problem, None, 1)?;
        let proof = loop {
            if env.finished().is_some() {
                break None;
            }
            if let Some(limit) = cfg.wall_limit {
                if started.elapsed() > limit {
                    break None;
                }
            }
            let action_vecs: Vec<_> = obs.actions.iter().map(|(_, v)| v.clone()).collect();
            let probs = learner.policy_probs(&obs.state_vec, &action_vecs)?;
            let chosen = match cfg.mode {
                EvalMode::Stochastic => sample_index(&probs, &mut rng),
                EvalMode::Greedy => greedy_index(&probs),
            };
            let out = env.step(chosen)?;
            if out.done {
                break if out.cause == Some(TerminationCause::Closed) {
                    out.proof
                } else {
                    None
                };
            }
            obs = out.observation;
        };
        if let Some(proof) = proof {
            let report = replay(problem, &proof);
            if !report.closed {
                return Err(EvalError::InvalidProofFound {
                    problem_id: problem.id.clone(),
                });
            }
            let len = proof.length();
            if record.best_length.is_none_or(|best| len < best) {
                record.best_length = Some(len);
                record.best_proof = Some(proof);
            }
            record.solved = true;
        }
    }
    Ok(record)
}

/// Sequential evaluation over problems in the given order.
pub fn evaluate(
    learner: &Learner,
    problems: &[Rc<ProblemSpec>],
    cfg: &EvalConfig,
) -> Result<Metrics, EvalError> {
    let mut records = Vec::with_capacity(problems.len());
    for p in problems {
        records.push(evaluate_problem(learner, p, cfg)?);
    }
    Ok(Metrics::from_records(records))
}

/// Parallel evaluation from serialized problem texts. Each worker
/// parses its own problems, so results are identical to the sequential
/// path regardless of thread count.
pub fn evaluate_parallel(
    learner: &Learner,
    problem_texts: &[String],
    cfg: &EvalConfig,
) -> Result<Metrics, EvalError> {
    let records: Vec<ProblemEval> = problem_texts
        .par_iter()
        .map(|text| {
            let problem = Rc::new(parse_problem(text)?);
            evaluate_problem(learner, &problem, cfg)
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(Metrics::from_records(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{make_problem, Expr, Statement};
    use crate::features::FeatureConfig;
    use crate::fol::serialize_problem;
    use crate::learner::LearnerConfig;
    use proptest::prelude::*;

    fn tiny_learner() -> Learner {
        Learner::new(
            FeatureConfig::new(16),
            LearnerConfig {
                hidden: 4,
                hidden_layers: 1,
                ..LearnerConfig::default()
            },
            9,
        )
    }

    fn problems() -> Vec<Rc<ProblemSpec>> {
        vec![
            Rc::new(
                parse_problem(
                    "% problem: trivial_eq\n\
                     cnf(goal, negated_conjecture, ~eq(o,o)).\n\
                     cnf(fact, axiom, eq(o,o)).\n",
                )
                .expect("valid"),
            ),
            Rc::new(make_problem(&Statement::new(
                Expr::plus(Expr::num(1), Expr::num(1)),
                Expr::num(2),
            ))),
        ]
    }

    #[test]
    fn histogram_matches_hand_counts() {
        assert_eq!(
            cumulative_length_histogram(&[3, 5, 5, 100], &[10, 1000]),
            vec![(10, 3), (1000, 4)]
        );
        assert_eq!(
            cumulative_length_histogram(&[], &[1, 2, 3]),
            vec![(1, 0), (2, 0), (3, 0)]
        );
    }

    proptest! {
        #[test]
        fn histogram_counts_are_monotone_for_sorted_bounds(
            lengths in proptest::collection::vec(0usize..200, 0..40),
            mut bounds in proptest::collection::vec(0usize..250, 1..10),
        ) {
            bounds.sort_unstable();
            let rows = cumulative_length_histogram(&lengths, &bounds);
            for w in rows.windows(2) {
                prop_assert!(w[0].1 <= w[1].1);
            }
            let max_bound = *bounds.last().unwrap();
            let expect = lengths.iter().filter(|&&l| l <= max_bound).count();
            prop_assert_eq!(rows.last().unwrap().1, expect);
        }
    }

    #[test]
    fn forced_win_is_solved_with_best_length_one() {
        let learner = tiny_learner();
        let cfg = EvalConfig {
            attempts: 3,
            step_limit: 5,
            ..EvalConfig::default()
        };
        let record = evaluate_problem(&learner, &problems()[0], &cfg).unwrap();
        assert!(record.solved);
        assert_eq!(record.best_length, Some(1));
        assert_eq!(record.attempts_used, 3);
        let proof = record.best_proof.expect("kept");
        assert!(replay(&problems()[0], &proof).closed);
    }

    #[test]
    fn greedy_mode_runs_a_single_attempt() {
        let learner = tiny_learner();
        let cfg = EvalConfig {
            attempts: 50,
            step_limit: 5,
            mode: EvalMode::Greedy,
            ..EvalConfig::default()
        };
        let record = evaluate_problem(&learner, &problems()[0], &cfg).unwrap();
        assert_eq!(record.attempts_used, 1);
        assert!(record.solved);
    }

    #[test]
    fn metrics_aggregate_solved_fraction_and_mean_length() {
        let records = vec![
            ProblemEval {
                problem_id: "a".into(),
                solved: true,
                best_length: Some(4),
                attempts_used: 2,
                best_proof: None,
            },
            ProblemEval {
                problem_id: "b".into(),
                solved: false,
                best_length: None,
                attempts_used: 2,
                best_proof: None,
            },
            ProblemEval {
                problem_id: "c".into(),
                solved: true,
                best_length: Some(8),
                attempts_used: 2,
                best_proof: None,
            },
            ProblemEval {
                problem_id: "d".into(),
                solved: false,
                best_length: None,
                attempts_used: 2,
                best_proof: None,
            },
        ];
        let m = Metrics::from_records(records);
        assert!((m.succ - 0.5).abs() < 1e-12);
        assert_eq!(m.len, Some(6.0));
        let tsv = m.to_tsv();
        assert!(tsv.starts_with("problem_id\tsolved\tbest_length\tattempts_used\n"));
        assert!(tsv.contains("a\t1\t4\t2\n"));
        assert!(tsv.contains("b\t0\t-\t2\n"));
        assert!(tsv.ends_with("ALL\t0.5000\t6.00\t8\n"));
    }

    #[test]
    fn parallel_and_sequential_evaluation_agree() {
        let learner = tiny_learner();
        let cfg = EvalConfig {
            attempts: 4,
            step_limit: 6,
            ..EvalConfig::default()
        };
        let ps = problems();
        let sequential = evaluate(&learner, &ps, &cfg).unwrap();
        let texts: Vec<String> = ps.iter().map(|p| serialize_problem(p)).collect();
        let parallel = evaluate_parallel(&learner, &texts, &cfg).unwrap();
        assert_eq!(sequential, parallel);
        let again = evaluate(&learner, &ps, &cfg).unwrap();
        assert_eq!(sequential, again);
    }
}
