//! Policy and value function approximation with clipped-surrogate
//! policy optimization.
//!
//! The policy network scores one (state, action) feature pair at a
//! time; scores of all actions offered in a state are softmax-normalized
//! into a distribution. The value network maps state features to a
//! scalar. Updates maximize the clipped surrogate
//! `min(r * A, clamp(r, 1 - eps, 1 + eps) * A)` with an entropy bonus,
//! plus value regression toward generalized-advantage returns, using
//! adaptive moment estimation over minibatched epochs.
//!
//! Rollout scoring only needs `&self`, so workers can share a clone of
//! the learner as a read-only parameter snapshot while the trainer
//! updates its own copy and swaps new snapshots in between iterations.

mod checkpoint;
mod mlp;

pub use checkpoint::{load_checkpoint, CheckpointError, CheckpointManifest};
pub use mlp::{Adam, Mlp, MlpGrads};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::features::{FeatureConfig, SparseVec};

/// Optimization hyperparameters. `hidden`/`hidden_layers` size both
/// networks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub lam: f64,
    pub clip: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub lr: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub hidden: usize,
    pub hidden_layers: usize,
    pub normalize_advantages: bool,
}

impl Default for LearnerConfig {
    fn default() -> LearnerConfig {
        LearnerConfig {
            gamma: 0.99,
            lam: 0.95,
            clip: 0.2,
            entropy_coef: 0.01,
            value_coef: 0.5,
            lr: 3e-4,
            epochs: 4,
            minibatch: 64,
            hidden: 512,
            hidden_layers: 2,
            normalize_advantages: true,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let ok = (0.0..=1.0).contains(&self.gamma)
            && (0.0..=1.0).contains(&self.lam)
            && self.clip > 0.0
            && self.lr > 0.0
            && self.epochs > 0
            && self.minibatch > 0
            && self.hidden > 0
            && self.hidden_layers > 0;
        if ok {
            Ok(())
        } else {
            Err(LearnerError::InvalidConfig)
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LearnerError {
    #[error("config out of range: need gamma, lam in [0,1], clip > 0, positive sizes")]
    InvalidConfig,
    #[error("no actions offered")]
    EmptyActionList,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("rewards, values and dones must align: got {rewards}, {values}, {dones}")]
    LengthMismatch {
        rewards: usize,
        values: usize,
        dones: usize,
    },
    #[error("non-finite loss during update {update}: {context}")]
    NonFinite { update: u64, context: String },
}

/// One environment interaction as stored for updates. `logp_old` is
/// the behavior policy's log-probability of `chosen` over exactly the
/// stored `actions` list.
#[derive(Clone, Debug)]
pub struct Transition {
    pub state: SparseVec,
    pub actions: Vec<SparseVec>,
    pub chosen: usize,
    pub logp_old: f64,
    pub reward: f64,
    pub done: bool,
    pub value: f64,
}

/// Transitions of whole episodes plus their advantage estimates.
#[derive(Clone, Debug)]
pub struct Batch {
    pub transitions: Vec<Transition>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    /// Runs generalized advantage estimation over the transitions
    /// (episode boundaries given by `done`) and packages the result.
    pub fn from_transitions(
        transitions: Vec<Transition>,
        gamma: f64,
        lam: f64,
    ) -> Result<Batch, LearnerError> {
        if transitions.is_empty() {
            return Err(LearnerError::EmptyBatch);
        }
        let rewards: Vec<f64> = transitions.iter().map(|t| t.reward).collect();
        let values: Vec<f64> = transitions.iter().map(|t| t.value).collect();
        let dones: Vec<bool> = transitions.iter().map(|t| t.done).collect();
        let (advantages, returns) = gae(&rewards, &values, &dones, gamma, lam)?;
        Ok(Batch {
            transitions,
            advantages,
            returns,
        })
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Generalized advantage estimation. `dones` marks episode ends; the
/// value after a terminal (or after the last entry) is taken as zero,
/// so truncated episodes should be cut at a recorded value instead of
/// relying on a bootstrap here. Returns (advantages, returns) with
/// returns = advantages + values.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lam: f64,
) -> Result<(Vec<f64>, Vec<f64>), LearnerError> {
    if rewards.len() != values.len() || rewards.len() != dones.len() {
        return Err(LearnerError::LengthMismatch {
            rewards: rewards.len(),
            values: values.len(),
            dones: dones.len(),
        });
    }
    let n = rewards.len();
    let mut advantages = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let next_value = if dones[t] || t + 1 == n { 0.0 } else { values[t + 1] };
        let delta = rewards[t] + gamma * next_value - values[t];
        acc = if dones[t] { delta } else { delta + gamma * lam * acc };
        advantages[t] = acc;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, returns))
}

/// The clipped surrogate objective for one transition:
/// `min(r * adv, clamp(r, 1 - eps, 1 + eps) * adv)`.
pub fn clipped_surrogate(ratio: f64, adv: f64, eps: f64) -> f64 {
    (ratio * adv).min(ratio.clamp(1.0 - eps, 1.0 + eps) * adv)
}

/// Aggregate diagnostics of one update. `policy_loss` is the mean
/// negated surrogate (entropy excluded), `value_loss` the mean squared
/// return error before its coefficient, `clip_fraction` the share of
/// transitions with |ratio - 1| > eps.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// Worst relative gradient errors found by [`Learner::finite_difference_check`].
#[derive(Clone, Copy, Debug, Default)]
pub struct GradCheck {
    pub max_rel_policy: f64,
    pub max_rel_value: f64,
    pub params_checked: usize,
}

/// Policy and value networks plus their optimizers.
#[derive(Clone, Debug)]
pub struct Learner {
    pub cfg: LearnerConfig,
    pub features: FeatureConfig,
    policy: Mlp,
    value: Mlp,
    opt_policy: Adam,
    opt_value: Adam,
    rng: ChaCha8Rng,
    updates: u64,
}

impl Learner {
    pub fn new(features: FeatureConfig, cfg: LearnerConfig, seed: u64) -> Learner {
        cfg.validate().expect("learner config in range");
        let policy = Mlp::new(
            features.state_dim() + features.action_dim(),
            cfg.hidden,
            cfg.hidden_layers,
            seed,
        );
        let value = Mlp::new(features.state_dim(), cfg.hidden, cfg.hidden_layers, seed ^ 0x9e37);
        let opt_policy = Adam::new(&policy, cfg.lr);
        let opt_value = Adam::new(&value, cfg.lr);
        Learner {
            cfg,
            features,
            policy,
            value,
            opt_policy,
            opt_value,
            rng: ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x5851_f42d_4c95_7f2d)),
            updates: 0,
        }
    }

    /// Number of completed parameter updates.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub(crate) fn nets(&self) -> (&Mlp, &Mlp) {
        (&self.policy, &self.value)
    }

    pub(crate) fn restore(
        features: FeatureConfig,
        cfg: LearnerConfig,
        policy: Mlp,
        value: Mlp,
        updates: u64,
    ) -> Learner {
        let opt_policy = Adam::new(&policy, cfg.lr);
        let opt_value = Adam::new(&value, cfg.lr);
        Learner {
            cfg,
            features,
            policy,
            value,
            opt_policy,
            opt_value,
            rng: ChaCha8Rng::seed_from_u64(updates),
            updates,
        }
    }

    /// Per-action scores in offered order, one network pass each with
    /// the state part of the first layer shared.
    fn scores(&self, state: &SparseVec, actions: &[SparseVec]) -> Vec<f64> {
        let state_offset = 0;
        let action_offset = self.features.state_dim();
        let prefix = self.policy.prefix(&[(state_offset, state)]);
        actions
            .iter()
            .map(|a| self.policy.forward(&prefix, &[(action_offset, a)]).out)
            .collect()
    }

    /// Softmax policy over the offered actions. Strictly positive and
    /// sums to one up to floating-point rounding.
    pub fn policy_probs(
        &self,
        state: &SparseVec,
        actions: &[SparseVec],
    ) -> Result<Vec<f64>, LearnerError> {
        if actions.is_empty() {
            return Err(LearnerError::EmptyActionList);
        }
        Ok(softmax(&self.scores(state, actions)))
    }

    pub fn value_of(&self, state: &SparseVec) -> f64 {
        self.value.forward_parts(&[(0, state)]).out
    }

    /// One full optimization pass over the batch: `epochs` runs of
    /// shuffled minibatches, policy and value stepped together.
    pub fn ppo_update(&mut self, batch: &Batch) -> Result<UpdateStats, LearnerError> {
        if batch.is_empty() {
            return Err(LearnerError::EmptyBatch);
        }
        let adv = self.prepared_advantages(batch);
        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut total = UpdateStats::default();
        let mut minibatches = 0.0;
        for _ in 0..self.cfg.epochs {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(self.cfg.minibatch) {
                let (stats, pgrads) = self.policy_grads(batch, &adv, chunk);
                let (vloss, vgrads) = self.value_grads(batch, chunk);
                if !stats.policy_loss.is_finite()
                    || !vloss.is_finite()
                    || !pgrads.is_finite()
                    || !vgrads.is_finite()
                {
                    return Err(LearnerError::NonFinite {
                        update: self.updates,
                        context: format!(
                            "policy_loss {} value_loss {} over {} transitions",
                            stats.policy_loss,
                            vloss,
                            chunk.len()
                        ),
                    });
                }
                self.opt_policy.step(&mut self.policy, &pgrads);
                self.opt_value.step(&mut self.value, &vgrads);
                total.policy_loss += stats.policy_loss;
                total.entropy += stats.entropy;
                total.clip_fraction += stats.clip_fraction;
                total.value_loss += vloss;
                minibatches += 1.0;
            }
        }
        self.updates += 1;
        total.policy_loss /= minibatches;
        total.value_loss /= minibatches;
        total.entropy /= minibatches;
        total.clip_fraction /= minibatches;
        Ok(total)
    }

    fn prepared_advantages(&self, batch: &Batch) -> Vec<f64> {
        if !self.cfg.normalize_advantages || batch.len() < 2 {
            return batch.advantages.clone();
        }
        let n = batch.len() as f64;
        let mean = batch.advantages.iter().sum::<f64>() / n;
        let var = batch
            .advantages
            .iter()
            .map(|a| (a - mean).powi(2))
            .sum::<f64>()
            / n;
        let std = var.sqrt().max(1e-8);
        batch.advantages.iter().map(|a| (a - mean) / std).collect()
    }

    /// Loss value of the policy objective on the given transitions,
    /// used by the finite-difference gradient check.
    fn policy_objective(&self, batch: &Batch, adv: &[f64], idxs: &[usize]) -> f64 {
        let mut loss = 0.0;
        for &t in idxs {
            let tr = &batch.transitions[t];
            let probs = softmax(&self.scores(&tr.state, &tr.actions));
            let logp = probs[tr.chosen].ln();
            let ratio = (logp - tr.logp_old).exp();
            let entropy = -probs.iter().map(|p| p * p.ln()).sum::<f64>();
            loss += -clipped_surrogate(ratio, adv[t], self.cfg.clip)
                - self.cfg.entropy_coef * entropy;
        }
        loss / idxs.len() as f64
    }

    fn policy_grads(
        &self,
        batch: &Batch,
        adv: &[f64],
        idxs: &[usize],
    ) -> (UpdateStats, MlpGrads) {
        let mut grads = MlpGrads::zeros_like(&self.policy);
        let mut stats = UpdateStats::default();
        let scale = 1.0 / idxs.len() as f64;
        let action_offset = self.features.state_dim();
        for &t in idxs {
            let tr = &batch.transitions[t];
            let prefix = self.policy.prefix(&[(0, &tr.state)]);
            let fwds: Vec<_> = tr
                .actions
                .iter()
                .map(|a| self.policy.forward(&prefix, &[(action_offset, a)]))
                .collect();
            let scores: Vec<f64> = fwds.iter().map(|f| f.out).collect();
            let probs = softmax(&scores);
            let logp = probs[tr.chosen].ln();
            let ratio = (logp - tr.logp_old).exp();
            let a = adv[t];
            let unclipped = ratio * a;
            let clipped = ratio.clamp(1.0 - self.cfg.clip, 1.0 + self.cfg.clip) * a;
            let surr = unclipped.min(clipped);
            let entropy = -probs.iter().map(|p| p * p.ln()).sum::<f64>();

            stats.policy_loss += -surr * scale;
            stats.entropy += entropy * scale;
            if (ratio - 1.0).abs() > self.cfg.clip {
                stats.clip_fraction += scale;
            }

            // d(-surr)/dlogp: the ratio path is live only while the
            // unclipped branch is the minimum.
            let dsurr_dlogp = if unclipped <= clipped { ratio * a } else { 0.0 };
            for (k, fwd) in fwds.iter().enumerate() {
                let indicator = if k == tr.chosen { 1.0 } else { 0.0 };
                let dlogp_dscore = indicator - probs[k];
                let dentropy_dscore = -probs[k] * (probs[k].ln() + entropy);
                let dscore = scale
                    * (-dsurr_dlogp * dlogp_dscore
                        - self.cfg.entropy_coef * dentropy_dscore);
                self.policy.backward(
                    dscore,
                    fwd,
                    &[(0, &tr.state), (action_offset, &tr.actions[k])],
                    &mut grads,
                );
            }
        }
        (stats, grads)
    }

    fn value_grads(&self, batch: &Batch, idxs: &[usize]) -> (f64, MlpGrads) {
        let mut grads = MlpGrads::zeros_like(&self.value);
        let mut loss = 0.0;
        let scale = 1.0 / idxs.len() as f64;
        for &t in idxs {
            let tr = &batch.transitions[t];
            let fwd = self.value.forward_parts(&[(0, &tr.state)]);
            let err = fwd.out - batch.returns[t];
            loss += err * err * scale;
            let dout = scale * self.cfg.value_coef * 2.0 * err;
            self.value.backward(dout, &fwd, &[(0, &tr.state)], &mut grads);
        }
        (loss, grads)
    }

    /// Mean squared return error over a whole batch, without updating.
    pub fn value_loss(&self, batch: &Batch) -> f64 {
        let mut loss = 0.0;
        for (tr, ret) in batch.transitions.iter().zip(&batch.returns) {
            let err = self.value_of(&tr.state) - ret;
            loss += err * err;
        }
        loss / batch.len() as f64
    }

    /// Compares analytic gradients against central finite differences
    /// over every weight and bias of both networks. Each parameter is
    /// perturbed by `±h`, the objective is re-evaluated, and the error
    /// `|numeric - analytic| / (floor + max(|numeric|, |analytic|))`
    /// is accumulated; `floor` folds an absolute tolerance into the
    /// relative form so vanishing gradients do not dominate. All
    /// parameters are restored before returning.
    pub fn finite_difference_check(&mut self, batch: &Batch, h: f64, floor: f64) -> GradCheck {
        let idxs: Vec<usize> = (0..batch.len()).collect();
        let adv = self.prepared_advantages(batch);
        let (_, pgrads) = self.policy_grads(batch, &adv, &idxs);
        let (_, vgrads) = self.value_grads(batch, &idxs);
        let rel = |numeric: f64, analytic: f64| {
            (numeric - analytic).abs() / (floor + numeric.abs().max(analytic.abs()))
        };

        let mut report = GradCheck {
            max_rel_policy: 0.0,
            max_rel_value: 0.0,
            params_checked: 0,
        };
        for li in 0..self.policy.layers.len() {
            for wi in 0..self.policy.layers[li].w.len() {
                let orig = self.policy.layers[li].w[wi];
                self.policy.layers[li].w[wi] = orig + h;
                let up = self.policy_objective(batch, &adv, &idxs);
                self.policy.layers[li].w[wi] = orig - h;
                let down = self.policy_objective(batch, &adv, &idxs);
                self.policy.layers[li].w[wi] = orig;
                let numeric = (up - down) / (2.0 * h);
                report.max_rel_policy = report.max_rel_policy.max(rel(numeric, pgrads.w[li][wi]));
                report.params_checked += 1;
            }
            for bi in 0..self.policy.layers[li].b.len() {
                let orig = self.policy.layers[li].b[bi];
                self.policy.layers[li].b[bi] = orig + h;
                let up = self.policy_objective(batch, &adv, &idxs);
                self.policy.layers[li].b[bi] = orig - h;
                let down = self.policy_objective(batch, &adv, &idxs);
                self.policy.layers[li].b[bi] = orig;
                let numeric = (up - down) / (2.0 * h);
                report.max_rel_policy = report.max_rel_policy.max(rel(numeric, pgrads.b[li][bi]));
                report.params_checked += 1;
            }
        }

        let value_objective = |l: &Learner| {
            let mut loss = 0.0;
            for &t in &idxs {
                let err = l.value_of(&batch.transitions[t].state) - batch.returns[t];
                loss += l.cfg.value_coef * err * err;
            }
            loss / idxs.len() as f64
        };
        for li in 0..self.value.layers.len() {
            for wi in 0..self.value.layers[li].w.len() {
                let orig = self.value.layers[li].w[wi];
                self.value.layers[li].w[wi] = orig + h;
                let up = value_objective(self);
                self.value.layers[li].w[wi] = orig - h;
                let down = value_objective(self);
                self.value.layers[li].w[wi] = orig;
                let numeric = (up - down) / (2.0 * h);
                report.max_rel_value = report.max_rel_value.max(rel(numeric, vgrads.w[li][wi]));
                report.params_checked += 1;
            }
            for bi in 0..self.value.layers[li].b.len() {
                let orig = self.value.layers[li].b[bi];
                self.value.layers[li].b[bi] = orig + h;
                let up = value_objective(self);
                self.value.layers[li].b[bi] = orig - h;
                let down = value_objective(self);
                self.value.layers[li].b[bi] = orig;
                let numeric = (up - down) / (2.0 * h);
                report.max_rel_value = report.max_rel_value.max(rel(numeric, vgrads.b[li][bi]));
                report.params_checked += 1;
            }
        }
        report
    }

    /// Writes parameters and a text manifest into `dir`. `train_steps`
    /// records how many environment steps this policy was trained on.
    pub fn save_checkpoint(
        &self,
        dir: &std::path::Path,
        config_hash: &str,
        train_steps: u64,
    ) -> Result<(), CheckpointError> {
        checkpoint::save(self, dir, config_hash, train_steps)
    }
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Samples an index from a probability vector by inverse CDF.
pub fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Index of the largest probability, first on ties.
pub fn greedy_index(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate().skip(1) {
        if *p > probs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    fn tiny_features() -> FeatureConfig {
        FeatureConfig::new(8)
    }

    fn random_sparse(dim: usize, rng: &mut ChaCha8Rng) -> SparseVec {
        let mut v = SparseVec::zeros(dim);
        for _ in 0..4 {
            v.bump((rng.next_u32() as usize) % dim, 1 + rng.next_u32() % 3);
        }
        v
    }

    fn random_batch(learner: &Learner, n: usize, seed: u64) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = learner.features;
        let mut transitions = Vec::new();
        for i in 0..n {
            let state = random_sparse(f.state_dim(), &mut rng);
            let k = 2 + (rng.next_u32() as usize) % 3;
            let actions: Vec<SparseVec> = (0..k)
                .map(|_| random_sparse(f.action_dim(), &mut rng))
                .collect();
            let chosen = (rng.next_u32() as usize) % k;
            let probs = learner.policy_probs(&state, &actions).unwrap();
            // Behavior log-prob slightly off the current policy keeps
            // ratios away from the clip kinks.
            let noise = (rng.next_u32() % 100) as f64 / 2000.0 - 0.025;
            let logp_old = probs[chosen].ln() + noise;
            let value = learner.value_of(&state);
            transitions.push(Transition {
                state,
                actions,
                chosen,
                logp_old,
                reward: if i % 4 == 3 { 1.0 } else { 0.0 },
                done: i % 4 == 3 || i + 1 == n,
                value,
            });
        }
        Batch::from_transitions(transitions, learner.cfg.gamma, learner.cfg.lam).unwrap()
    }

    fn small_learner(seed: u64) -> Learner {
        let cfg = LearnerConfig {
            hidden: 6,
            hidden_layers: 2,
            minibatch: 4,
            epochs: 2,
            lr: 1e-3,
            ..LearnerConfig::default()
        };
        Learner::new(tiny_features(), cfg, seed)
    }

    #[test]
    fn softmax_matches_hand_values() {
        let p = softmax(&[2.0, 2.0]);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        assert_eq!(softmax(&[3.7]), vec![1.0]);
        let p = softmax(&[2.0_f64.ln(), 0.0]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn policy_probs_form_a_distribution_and_bound_entropy() {
        let learner = small_learner(11);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let state = random_sparse(learner.features.state_dim(), &mut rng);
            let k = 1 + (rng.next_u32() as usize) % 6;
            let actions: Vec<SparseVec> = (0..k)
                .map(|_| random_sparse(learner.features.action_dim(), &mut rng))
                .collect();
            let probs = learner.policy_probs(&state, &actions).unwrap();
            assert_eq!(probs.len(), k);
            assert!(probs.iter().all(|p| *p > 0.0));
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let entropy = -probs.iter().map(|p| p * p.ln()).sum::<f64>();
            assert!(entropy <= (k as f64).ln() + 1e-12);
        }
        assert_eq!(
            learner.policy_probs(&SparseVec::zeros(24), &[]).unwrap_err(),
            LearnerError::EmptyActionList
        );
    }

    #[test]
    fn permuting_actions_permutes_probabilities() {
        let learner = small_learner(3);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let state = random_sparse(learner.features.state_dim(), &mut rng);
        let actions: Vec<SparseVec> = (0..4)
            .map(|_| random_sparse(learner.features.action_dim(), &mut rng))
            .collect();
        let base = learner.policy_probs(&state, &actions).unwrap();
        let perm = [2usize, 0, 3, 1];
        let shuffled: Vec<SparseVec> = perm.iter().map(|&i| actions[i].clone()).collect();
        let moved = learner.policy_probs(&state, &shuffled).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            assert!((moved[j] - base[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn gae_matches_closed_forms() {
        let rewards = [0.0, 0.0, 1.0];
        let values = [0.0, 0.0, 0.0];
        let dones = [false, false, true];
        let (adv, ret) = gae(&rewards, &values, &dones, 1.0, 1.0).unwrap();
        assert_eq!(adv, vec![1.0, 1.0, 1.0]);
        assert_eq!(ret, vec![1.0, 1.0, 1.0]);

        let (adv, _) = gae(&rewards, &values, &dones, 0.5, 1.0).unwrap();
        assert_eq!(adv, vec![0.25, 0.5, 1.0]);

        let zeros = [0.0, 0.0, 0.0];
        let (adv, ret) = gae(&zeros, &zeros, &dones, 0.9, 0.8).unwrap();
        assert!(adv.iter().all(|a| *a == 0.0));
        assert!(ret.iter().all(|r| *r == 0.0));

        assert_eq!(
            gae(&rewards, &values[..2], &dones, 0.9, 0.9).unwrap_err(),
            LearnerError::LengthMismatch {
                rewards: 3,
                values: 2,
                dones: 3
            }
        );
    }

    #[test]
    fn gae_restarts_across_episode_boundaries() {
        // Two episodes concatenated; the second's advantages must not
        // leak into the first.
        let rewards = [0.0, 1.0, 0.0, 1.0];
        let values = [0.0, 0.0, 0.0, 0.0];
        let dones = [false, true, false, true];
        let (adv, _) = gae(&rewards, &values, &dones, 1.0, 1.0).unwrap();
        assert_eq!(adv, vec![1.0, 1.0, 1.0, 1.0]);
        let (adv, _) = gae(&rewards, &values, &dones, 0.5, 1.0).unwrap();
        assert_eq!(adv, vec![0.5, 1.0, 0.5, 1.0]);
    }

    #[test]
    fn clip_arithmetic_matches_definition() {
        assert_eq!(clipped_surrogate(2.0, 1.0, 0.2), 1.2);
        assert_eq!(clipped_surrogate(1.0, 1.0, 0.2), 1.0);
        assert_eq!(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
        assert_eq!(clipped_surrogate(1.1, 2.0, 0.2), 2.2);
    }

    #[test]
    fn policy_gradient_matches_finite_differences() {
        let mut learner = small_learner(21);
        let batch = random_batch(&learner, 10, 99);
        let adv = learner.prepared_advantages(&batch);
        let idxs: Vec<usize> = (0..batch.len()).collect();
        let (_, grads) = learner.policy_grads(&batch, &adv, &idxs);

        let h = 1e-5;
        let mut checked = 0usize;
        for li in 0..learner.policy.layers.len() {
            for wi in 0..learner.policy.layers[li].w.len() {
                let orig = learner.policy.layers[li].w[wi];
                learner.policy.layers[li].w[wi] = orig + h;
                let up = learner.policy_objective(&batch, &adv, &idxs);
                learner.policy.layers[li].w[wi] = orig - h;
                let down = learner.policy_objective(&batch, &adv, &idxs);
                learner.policy.layers[li].w[wi] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.w[li][wi];
                let tol = 1e-7 + 1e-4 * numeric.abs().max(analytic.abs());
                assert!(
                    (numeric - analytic).abs() <= tol,
                    "policy layer {li} w[{wi}]: analytic {analytic} numeric {numeric}"
                );
                checked += 1;
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn value_gradient_matches_finite_differences() {
        let mut learner = small_learner(33);
        let batch = random_batch(&learner, 10, 7);
        let idxs: Vec<usize> = (0..batch.len()).collect();
        let (_, grads) = learner.value_grads(&batch, &idxs);

        let objective = |l: &Learner| {
            let mut loss = 0.0;
            for &t in &idxs {
                let err = l.value_of(&batch.transitions[t].state) - batch.returns[t];
                loss += l.cfg.value_coef * err * err;
            }
            loss / idxs.len() as f64
        };
        let h = 1e-5;
        for li in 0..learner.value.layers.len() {
            for wi in 0..learner.value.layers[li].w.len() {
                let orig = learner.value.layers[li].w[wi];
                learner.value.layers[li].w[wi] = orig + h;
                let up = objective(&learner);
                learner.value.layers[li].w[wi] = orig - h;
                let down = objective(&learner);
                learner.value.layers[li].w[wi] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads.w[li][wi];
                let tol = 1e-7 + 1e-4 * numeric.abs().max(analytic.abs());
                assert!(
                    (numeric - analytic).abs() <= tol,
                    "value layer {li} w[{wi}]: analytic {analytic} numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn update_changes_parameters_and_reports_finite_stats() {
        let mut learner = small_learner(41);
        let batch = random_batch(&learner, 16, 13);
        let before = learner.policy.clone();
        let stats = learner.ppo_update(&batch).unwrap();
        assert_ne!(before, learner.policy);
        assert!(stats.policy_loss.is_finite());
        assert!(stats.value_loss >= 0.0);
        assert!(stats.entropy > 0.0);
        assert!((0.0..=1.0).contains(&stats.clip_fraction));
        assert_eq!(learner.updates(), 1);
    }

    #[test]
    fn value_regression_decreases_loss_over_first_updates() {
        let cfg = LearnerConfig {
            hidden: 8,
            hidden_layers: 2,
            minibatch: 16,
            epochs: 1,
            lr: 1e-4,
            entropy_coef: 0.0,
            ..LearnerConfig::default()
        };
        let mut learner = Learner::new(tiny_features(), cfg, 55);
        let batch = random_batch(&learner, 16, 23);
        let mut last = learner.value_loss(&batch);
        for step in 0..10 {
            learner.ppo_update(&batch).unwrap();
            let now = learner.value_loss(&batch);
            assert!(now < last, "step {step}: {now} !< {last}");
            last = now;
        }
    }

    #[test]
    fn empty_batch_is_rejected() {
        let mut learner = small_learner(1);
        let batch = Batch {
            transitions: vec![],
            advantages: vec![],
            returns: vec![],
        };
        assert_eq!(
            learner.ppo_update(&batch).unwrap_err(),
            LearnerError::EmptyBatch
        );
    }

    #[test]
    fn sampling_helpers_behave() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let probs = [0.1, 0.6, 0.3];
        let mut counts = [0usize; 3];
        for _ in 0..3000 {
            counts[sample_index(&probs, &mut rng)] += 1;
        }
        assert!(counts[1] > counts[0] && counts[1] > counts[2]);
        assert_eq!(greedy_index(&probs), 1);
        assert_eq!(greedy_index(&[0.5, 0.5]), 0);
    }
}
