//! REINFORCE training over the training-split queries.
//!
//! Each query is rolled out for a fixed number of hops by sampling from the
//! policy; the terminal 0/1 reward, discounted per step and centered by an
//! optional running-mean baseline, weights the log-probability gradients.
//! Updates are applied with Adam after global-norm clipping.
//!
//! The loop is single-worker and consumes one seeded RNG sequentially, so a
//! (seed, config, data) triple fixes every parameter bit-for-bit.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffnet::{adam_step, AdamState, TensorSet, Var};
use crate::env::{self, SemanticMode};
use crate::error::{Error, Result};
use crate::evaluator::{self, EvalConfig, FilterIndex};
use crate::kg::TemporalKG;
use crate::policy::{Dims, PolicyCfg, PolicyParams, QueryCtx, TapeWalk};
use crate::ranker::SearchCfg;
use crate::types::{Action, Query};

/// Training knobs. Defaults follow the reference regime: three hops, 100
/// candidates, batches of 512, Adam at 1e-3, discount 0.95.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub k_hops: usize,
    pub n_candidates: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub gamma: f64,
    pub epochs: u64,
    pub rollouts_per_query: usize,
    pub baseline: bool,
    pub entropy_coef: f64,
    pub seed: u64,
    /// Probability of routing a seen training subject through the OOV row.
    pub oov_dropout: f64,
    pub grad_clip: f64,
    /// Early stop after this many epochs without a validation MRR improvement.
    pub patience: u64,
    /// Run validation every this many epochs (when a valid split exists).
    pub eval_every: u64,
    pub eval_beam_width: usize,
    pub semantic_mode: SemanticMode,
    pub policy: PolicyCfg,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k_hops: 3,
            n_candidates: 100,
            batch_size: 512,
            lr: 0.001,
            gamma: 0.95,
            epochs: 100,
            rollouts_per_query: 1,
            baseline: true,
            entropy_coef: 0.0,
            seed: 0,
            oov_dropout: 0.05,
            grad_clip: 5.0,
            patience: 5,
            eval_every: 1,
            eval_beam_width: 100,
            semantic_mode: SemanticMode::UnseenOnly,
            policy: PolicyCfg::default(),
        }
    }
}

impl TrainConfig {
    pub fn effective_semantic_mode(&self) -> SemanticMode {
        self.policy.variant.semantic_mode(self.semantic_mode)
    }

    fn search_cfg(&self) -> SearchCfg {
        SearchCfg {
            k_hops: self.k_hops,
            beam_width: self.eval_beam_width,
            n_candidates: self.n_candidates,
            semantic_mode: self.semantic_mode,
            policy: self.policy,
        }
    }
}

/// One sampled step: the chosen action, its log-probability (value and tape
/// node), and how many candidates were on offer.
#[derive(Debug)]
pub struct TrajStep {
    pub action: Action,
    pub log_prob: f64,
    pub candidate_count: usize,
    lp_node: Var,
    entropy_node: Option<Var>,
}

/// A sampled K-hop walk with its tape, ready for gradient accumulation.
pub struct Trajectory {
    pub query: Query,
    pub steps: Vec<TrajStep>,
    pub reward: f64,
    walk: TapeWalk,
}

impl Trajectory {
    /// Adds this trajectory's contribution to `grads`.
    ///
    /// `step_weights[k]` multiplies `-log pi(a_k)`; the entropy bonus (when
    /// recorded) enters with weight `-entropy_scale`.
    fn accumulate(&mut self, step_weights: &[f64], entropy_scale: f64, grads: &mut TensorSet) -> f64 {
        let mut terms: Vec<(Var, f64)> = Vec::with_capacity(2 * self.steps.len());
        for (step, w) in self.steps.iter().zip(step_weights) {
            terms.push((step.lp_node, -w));
            if let Some(h) = step.entropy_node {
                terms.push((h, -entropy_scale));
            }
        }
        let loss = self.walk.weighted_sum(&terms);
        let loss_value = self.walk.values(loss)[0];
        self.walk.backward(loss, grads);
        loss_value
    }
}

/// Per-step discount weights `gamma^(K-k)` for k = 1..K.
pub fn discount_weights(k_hops: usize, gamma: f64) -> Vec<f64> {
    (1..=k_hops).map(|k| gamma.powi((k_hops - k) as i32)).collect()
}

fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let draw: f64 = rng.gen();
    let mut cumulative = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cumulative += p;
        if draw < cumulative {
            return i;
        }
    }
    probs.len() - 1
}

/// Samples one K-hop trajectory for `query` under the current policy.
pub fn rollout(
    query: &Query,
    store: &TemporalKG,
    params: &PolicyParams,
    config: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<Trajectory> {
    let mut ctx = QueryCtx::new(query, store);
    if !ctx.subject_to_oov && config.oov_dropout > 0.0 && rng.gen::<f64>() < config.oov_dropout {
        ctx = ctx.with_forced_oov();
    }
    let semantic_mode = config.effective_semantic_mode();

    let mut walk = TapeWalk::start(params, config.policy, ctx);
    let mut state = env::initial_state(*query);
    let mut steps = Vec::with_capacity(config.k_hops);
    for _ in 0..config.k_hops {
        let actions = env::available_actions(&state, store, config.n_candidates, semantic_mode);
        let lp = walk.step_log_probs(params, &actions)?;
        let probs: Vec<f64> = walk.values(lp).iter().map(|v| v.exp()).collect();
        let chosen = sample_index(&probs, rng);
        let lp_node = walk.pick(lp, chosen);
        let entropy_node = (config.entropy_coef > 0.0).then(|| walk.entropy(lp));
        let action = actions[chosen];

        steps.push(TrajStep {
            action,
            log_prob: walk.values(lp_node)[0],
            candidate_count: actions.len(),
            lp_node,
            entropy_node,
        });
        state = env::transition(&state, &action)?;
        walk.advance(params, &action);
    }
    let reward = env::terminal_reward(&state, query)? as f64;
    Ok(Trajectory { query: *query, steps, reward, walk })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateStats {
    pub mean_reward: f64,
    pub mean_loss: f64,
    pub baseline: f64,
    pub grad_norm: f64,
}

/// Folds a batch of trajectories into one gradient estimate.
///
/// Exposed separately from the Adam step so the estimate itself can be
/// checked against finite differences.
pub fn batch_gradient(
    trajectories: &mut [Trajectory],
    baseline: &mut Option<f64>,
    config: &TrainConfig,
    grads: &mut TensorSet,
) -> Result<UpdateStats> {
    if trajectories.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let count = trajectories.len() as f64;
    let mean_reward = trajectories.iter().map(|t| t.reward).sum::<f64>() / count;
    let center = if config.baseline {
        let updated = match *baseline {
            None => mean_reward,
            Some(b) => 0.9 * b + 0.1 * mean_reward,
        };
        *baseline = Some(updated);
        updated
    } else {
        0.0
    };

    let discounts = discount_weights(config.k_hops, config.gamma);
    let scale = 1.0 / count;
    let mut loss_total = 0.0;
    for traj in trajectories.iter_mut() {
        let advantage = traj.reward - center;
        let weights: Vec<f64> = discounts.iter().map(|g| g * advantage * scale).collect();
        loss_total += traj.accumulate(&weights, config.entropy_coef * scale, grads);
    }
    if let Some((name, offset)) = grads.find_non_finite() {
        return Err(Error::NonFinite(format!(
            "batch gradient {name}[{offset}] (reward mean {mean_reward}, baseline {center})"
        )));
    }
    Ok(UpdateStats {
        mean_reward,
        mean_loss: loss_total,
        baseline: center,
        grad_norm: grads.l2_norm(),
    })
}

/// One REINFORCE update: gradient estimate, global-norm clip, Adam.
pub fn reinforce_update(
    mut trajectories: Vec<Trajectory>,
    params: &mut PolicyParams,
    adam: &mut AdamState,
    baseline: &mut Option<f64>,
    config: &TrainConfig,
) -> Result<UpdateStats> {
    let mut grads = params.tensors().zeros_like();
    let mut stats = batch_gradient(&mut trajectories, baseline, config, &mut grads)?;
    drop(trajectories);

    let norm = grads.l2_norm();
    if config.grad_clip > 0.0 && norm > config.grad_clip {
        grads.scale(config.grad_clip / norm);
    }
    stats.grad_norm = norm;
    adam_step(params.tensors_mut(), &grads, adam, config.lr)?;
    Ok(stats)
}

/// Everything that evolves during training; checkpoints serialize exactly
/// this.
pub struct TrainState {
    pub params: PolicyParams,
    pub adam: AdamState,
    pub rng: ChaCha8Rng,
    pub baseline: Option<f64>,
    pub epochs_done: u64,
}

impl TrainState {
    /// Fresh state: the seeded RNG initializes the parameters and then keeps
    /// driving shuffling and sampling.
    pub fn new(dims: Dims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = PolicyParams::init(dims, &mut rng);
        let adam = AdamState::new(params.tensors());
        Self { params, adam, rng, baseline: None, epochs_done: 0 }
    }
}

/// Per-epoch statistics emitted to the training hook and the run log.
#[derive(Debug, Clone)]
pub struct EpochStats {
    pub epoch: u64,
    pub batches: usize,
    pub mean_reward: f64,
    pub mean_loss: f64,
    pub baseline: f64,
    pub val_mrr: Option<f64>,
    pub val_hits1: Option<f64>,
    pub elapsed_secs: f64,
}

impl EpochStats {
    /// One `key=value` log line.
    pub fn to_log_line(&self) -> String {
        let mut line = format!(
            "epoch={} batches={} reward={:.6} loss={:.6} baseline={:.6}",
            self.epoch, self.batches, self.mean_reward, self.mean_loss, self.baseline
        );
        if let (Some(mrr), Some(h1)) = (self.val_mrr, self.val_hits1) {
            line.push_str(&format!(" val_mrr={mrr:.6} val_hits1={h1:.6}"));
        }
        line.push_str(&format!(" elapsed_s={:.3}", self.elapsed_secs));
        line
    }
}

/// Decision returned by the per-epoch hook.
pub enum HookOutcome {
    Continue,
    Stop,
}

/// Trains until the epoch budget, the validation plateau, or the hook stops
/// the run. Training queries are the stored training facts (inverses
/// included); validation MRR comes from the valid split when present.
pub fn train(
    store: &TemporalKG,
    state: &mut TrainState,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochStats) -> Result<HookOutcome>,
) -> Result<()> {
    let queries: Vec<Query> = store.facts().iter().map(Query::from_fact).collect();
    if queries.is_empty() {
        return Err(Error::EmptyTrainSplit);
    }
    let filter = (!store.valid_facts().is_empty()).then(|| FilterIndex::build(store));
    let mut best_val = f64::NEG_INFINITY;
    let mut epochs_since_best = 0u64;

    while state.epochs_done < config.epochs {
        let start = Instant::now();
        let epoch = state.epochs_done + 1;

        let mut order: Vec<usize> = (0..queries.len()).collect();
        shuffle(&mut order, &mut state.rng);

        let mut reward_sum = 0.0;
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut baseline_last = state.baseline.unwrap_or(0.0);
        for chunk in order.chunks(config.batch_size) {
            let mut trajectories = Vec::with_capacity(chunk.len() * config.rollouts_per_query);
            for &qi in chunk {
                for _ in 0..config.rollouts_per_query {
                    trajectories.push(rollout(&queries[qi], store, &state.params, config, &mut state.rng)?);
                }
            }
            let stats = reinforce_update(
                trajectories,
                &mut state.params,
                &mut state.adam,
                &mut state.baseline,
                config,
            )?;
            reward_sum += stats.mean_reward;
            loss_sum += stats.mean_loss;
            baseline_last = stats.baseline;
            batches += 1;
        }
        state.epochs_done = epoch;

        let mut stats = EpochStats {
            epoch,
            batches,
            mean_reward: reward_sum / batches as f64,
            mean_loss: loss_sum / batches as f64,
            baseline: baseline_last,
            val_mrr: None,
            val_hits1: None,
            elapsed_secs: 0.0,
        };

        if let Some(filter) = &filter {
            if epoch % config.eval_every.max(1) == 0 {
                let eval_cfg = EvalConfig {
                    search: config.search_cfg(),
                    ..EvalConfig::default()
                };
                let report =
                    evaluator::evaluate(&state.params, store.valid_facts(), store, filter, &eval_cfg)?;
                stats.val_mrr = Some(report.combined.mrr);
                stats.val_hits1 = Some(report.combined.hits1);
            }
        }
        stats.elapsed_secs = start.elapsed().as_secs_f64();

        let outcome = on_epoch(&stats)?;
        if matches!(outcome, HookOutcome::Stop) {
            return Ok(());
        }
        if let Some(mrr) = stats.val_mrr {
            if mrr > best_val {
                best_val = mrr;
                epochs_since_best = 0;
            } else {
                epochs_since_best += config.eval_every.max(1);
                if epochs_since_best >= config.patience {
                    return Ok(());
                }
            }
        }
    }
    Ok(())
}

/// Fisher–Yates driven by the training RNG.
fn shuffle(order: &mut [usize], rng: &mut impl Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}
