//! The two-branch policy network.
//!
//! Branch one scores candidates from static `(relation, entity)` features
//! against the walked entity-relation history; branch two scores the same
//! candidates from time-encoded relation features only, which is what lets it
//! handle queries whose subject has no trained embedding. A per-candidate
//! sigmoid gate mixes the two score vectors before the softmax.
//!
//! Every forward exists twice: tape ops (see [`TapeWalk`]) used during
//! training, and the plain functions used for inference and as the
//! independent route in gradient checks. `tape_and_plain_agree` pins the two
//! routes together.

use std::str::FromStr;

use rand::Rng;

use crate::diffnet::{self, Tape, Tensor, TensorSet, Var};
use crate::error::{Error, Result};
use crate::kg::TemporalKG;
use crate::types::{Action, EntityId, Query, RelationId, TimeStep};

/// Model variants: the full gated network plus the ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Full,
    /// Static branch only.
    Policy1,
    /// Temporal branch only.
    Policy2,
    /// Temporal branch consumes raw relation embeddings (no time encoding).
    NoTre,
    /// Mean of the two branch scores instead of the learned gate.
    NoGm,
    /// Full network with semantic edges disabled in the environment.
    NoSemanticEdges,
}

pub const ALL_VARIANTS: [Variant; 6] = [
    Variant::Full,
    Variant::Policy1,
    Variant::Policy2,
    Variant::NoTre,
    Variant::NoGm,
    Variant::NoSemanticEdges,
];

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Policy1 => "policy1",
            Variant::Policy2 => "policy2",
            Variant::NoTre => "no-tre",
            Variant::NoGm => "no-gm",
            Variant::NoSemanticEdges => "no-semantic-edges",
        }
    }

    /// Whether the environment should expose semantic edges under this
    /// variant, given the configured mode.
    pub fn semantic_mode(self, configured: crate::env::SemanticMode) -> crate::env::SemanticMode {
        if self == Variant::NoSemanticEdges {
            crate::env::SemanticMode::Off
        } else {
            configured
        }
    }

    fn needs_static(self) -> bool {
        self != Variant::Policy2
    }

    fn needs_temporal(self) -> bool {
        self != Variant::Policy1
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::Full),
            "policy1" => Ok(Variant::Policy1),
            "policy2" => Ok(Variant::Policy2),
            "no-tre" => Ok(Variant::NoTre),
            "no-gm" => Ok(Variant::NoGm),
            "no-semantic-edges" => Ok(Variant::NoSemanticEdges),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// Gate granularity: one sigmoid per candidate (default) or one per state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateGranularity {
    PerCandidate,
    PerState,
}

impl GateGranularity {
    pub fn as_str(self) -> &'static str {
        match self {
            GateGranularity::PerCandidate => "per-candidate",
            GateGranularity::PerState => "per-state",
        }
    }
}

impl FromStr for GateGranularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-candidate" => Ok(GateGranularity::PerCandidate),
            "per-state" => Ok(GateGranularity::PerState),
            other => Err(Error::Config(format!("unknown gate granularity {other:?}"))),
        }
    }
}

/// Forward-pass knobs shared by training and inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyCfg {
    pub variant: Variant,
    pub gate: GateGranularity,
    /// Time differences are capped here before the temporal relation encoder.
    pub dt_clamp: TimeStep,
}

impl Default for PolicyCfg {
    fn default() -> Self {
        Self {
            variant: Variant::Full,
            gate: GateGranularity::PerCandidate,
            dt_clamp: 400,
        }
    }
}

/// Network dimensions. `entity_count` is the vocabulary (the table gets one
/// extra out-of-vocabulary row); `relation_count` counts base relations,
/// inverses, and the self-loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub d: usize,
    pub m: usize,
    pub entity_count: usize,
    pub relation_count: usize,
}

/// All trainable tensors, in the fixed order the checkpoint format writes.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    dims: Dims,
    tensors: TensorSet,
}

// Tensor indices; the order is part of the checkpoint contract.
pub(crate) const T_ENTITY_EMB: usize = 0;
pub(crate) const T_RELATION_EMB: usize = 1;
const T_LSTM_S_WX: usize = 2;
const T_LSTM_S_WH: usize = 3;
const T_LSTM_S_B: usize = 4;
const T_LSTM_T_WX: usize = 5;
const T_LSTM_T_WH: usize = 6;
const T_LSTM_T_B: usize = 7;
const T_W1_S: usize = 8;
const T_W2_S: usize = 9;
const T_W1_T: usize = 10;
const T_W2_T: usize = 11;
const T_TRE_W: usize = 12;
const T_TRE_B: usize = 13;
const T_W_G: usize = 14;

impl PolicyParams {
    /// Fresh parameters: uniform fan-in init for matrices, zero biases, and a
    /// ones temporal-encoder bias so the encoder starts near the identity.
    pub fn init(dims: Dims, rng: &mut impl Rng) -> Self {
        let Dims { d, m, entity_count, relation_count } = dims;
        let mut t = TensorSet::new();
        t.push("entity_emb", Tensor::uniform(&[entity_count + 1, d], d, rng));
        t.push("relation_emb", Tensor::uniform(&[relation_count, d], d, rng));
        t.push("lstm_s_wx", Tensor::uniform(&[4 * d, 2 * d], 2 * d, rng));
        t.push("lstm_s_wh", Tensor::uniform(&[4 * d, d], d, rng));
        t.push("lstm_s_b", Tensor::zeros(&[4 * d]));
        t.push("lstm_t_wx", Tensor::uniform(&[4 * d, d], d, rng));
        t.push("lstm_t_wh", Tensor::uniform(&[4 * d, d], d, rng));
        t.push("lstm_t_b", Tensor::zeros(&[4 * d]));
        t.push("w1_s", Tensor::uniform(&[m, 3 * d], 3 * d, rng));
        t.push("w2_s", Tensor::uniform(&[2 * d, m], m, rng));
        t.push("w1_t", Tensor::uniform(&[m, 2 * d], 2 * d, rng));
        t.push("w2_t", Tensor::uniform(&[d, m], m, rng));
        t.push("tre_w", Tensor::uniform(&[d], 1, rng));
        t.push("tre_b", Tensor::filled(&[d], 1.0));
        t.push("w_g", Tensor::uniform(&[1, 3 * d], 3 * d, rng));
        Self { dims, tensors: t }
    }

    /// Rebuilds from a tensor set in checkpoint order, validating shapes.
    pub fn from_tensors(dims: Dims, tensors: TensorSet) -> Result<Self> {
        let fresh = Self::init(dims, &mut rand::rngs::mock::StepRng::new(0, 1));
        if tensors.len() != fresh.tensors.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} tensors, got {}",
                fresh.tensors.len(),
                tensors.len()
            )));
        }
        for idx in 0..tensors.len() {
            if tensors.get(idx).shape() != fresh.tensors.get(idx).shape() {
                return Err(Error::ShapeMismatch(format!(
                    "tensor {}: expected shape {:?}, got {:?}",
                    fresh.tensors.name(idx),
                    fresh.tensors.get(idx).shape(),
                    tensors.get(idx).shape()
                )));
            }
        }
        Ok(Self { dims, tensors })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn tensors(&self) -> &TensorSet {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut TensorSet {
        &mut self.tensors
    }

    pub fn self_loop_relation(&self) -> RelationId {
        (self.dims.relation_count - 1) as RelationId
    }

    fn oov_row(&self) -> usize {
        self.dims.entity_count
    }

    fn entity_row(&self, entity: EntityId, ctx: &QueryCtx) -> usize {
        if ctx.subject_to_oov && entity == ctx.subject {
            self.oov_row()
        } else {
            entity as usize
        }
    }

    pub fn entity_embedding(&self, entity: EntityId, ctx: &QueryCtx) -> &[f64] {
        self.tensors.get(T_ENTITY_EMB).row(self.entity_row(entity, ctx))
    }

    pub fn relation_embedding(&self, relation: RelationId) -> &[f64] {
        self.tensors.get(T_RELATION_EMB).row(relation as usize)
    }
}

/// Query-scoped embedding context. `subject_to_oov` routes the subject (and
/// only the subject) to the out-of-vocabulary row: set when the subject was
/// never seen in training, or when entity dropout fires during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryCtx {
    pub subject: EntityId,
    pub relation: RelationId,
    pub time: TimeStep,
    pub subject_to_oov: bool,
}

impl QueryCtx {
    pub fn new(query: &Query, store: &TemporalKG) -> Self {
        Self {
            subject: query.subject,
            relation: query.relation,
            time: query.time,
            subject_to_oov: !store.is_seen(query.subject),
        }
    }

    pub fn with_forced_oov(mut self) -> Self {
        self.subject_to_oov = true;
        self
    }
}

fn clamped_dt(query_time: TimeStep, action_time: TimeStep, clamp: TimeStep) -> f64 {
    debug_assert!(action_time <= query_time, "action after query time");
    query_time.saturating_sub(action_time).min(clamp) as f64
}

// ---------------------------------------------------------------------------
// Plain forward (inference and oracle route)
// ---------------------------------------------------------------------------

/// Recurrent path state for the plain forward: hidden/cell pairs of both
/// branches plus the last temporal-relation input (feeds the per-state gate).
#[derive(Debug, Clone, PartialEq)]
pub struct Histories {
    pub h_static: Vec<f64>,
    pub c_static: Vec<f64>,
    pub h_temporal: Vec<f64>,
    pub c_temporal: Vec<f64>,
    pub last_temporal_input: Vec<f64>,
    pub step: usize,
}

/// Time-conditioned relation vector: `(tanh(tre_w * dt) + tre_b) .* emb(r)`.
///
/// `dt` is the query time minus the action time and must be non-negative.
pub fn temporal_relation(params: &PolicyParams, relation: RelationId, dt: i64) -> Result<Vec<f64>> {
    if dt < 0 {
        return Err(Error::IllegalTransition(format!("negative time difference {dt}")));
    }
    let w = params.tensors.get(T_TRE_W).data();
    let b = params.tensors.get(T_TRE_B).data();
    let r = params.relation_embedding(relation);
    Ok(r.iter()
        .zip(w.iter().zip(b))
        .map(|(rk, (wk, bk))| ((wk * dt as f64).tanh() + bk) * rk)
        .collect())
}

fn temporal_input(params: &PolicyParams, cfg: &PolicyCfg, relation: RelationId, dt: f64) -> Vec<f64> {
    if cfg.variant == Variant::NoTre {
        return params.relation_embedding(relation).to_vec();
    }
    let w = params.tensors.get(T_TRE_W).data();
    let b = params.tensors.get(T_TRE_B).data();
    params
        .relation_embedding(relation)
        .iter()
        .zip(w.iter().zip(b))
        .map(|(rk, (wk, bk))| ((wk * dt).tanh() + bk) * rk)
        .collect()
}

/// Advances the static branch over one accepted action.
pub fn advance_static(
    params: &PolicyParams,
    ctx: &QueryCtx,
    h: &[f64],
    c: &[f64],
    action: &Action,
) -> (Vec<f64>, Vec<f64>) {
    let mut input = Vec::with_capacity(2 * params.dims.d);
    input.extend_from_slice(params.relation_embedding(action.relation));
    input.extend_from_slice(params.entity_embedding(action.entity, ctx));
    diffnet::recurrent_step(
        params.tensors.get(T_LSTM_S_WX),
        params.tensors.get(T_LSTM_S_WH),
        params.tensors.get(T_LSTM_S_B),
        h,
        c,
        &input,
    )
    .expect("static branch shapes are fixed at construction")
}

/// Advances the temporal branch over one accepted action's encoded relation.
pub fn advance_temporal(
    params: &PolicyParams,
    cfg: &PolicyCfg,
    h: &[f64],
    c: &[f64],
    relation: RelationId,
    dt: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let input = temporal_input(params, cfg, relation, dt);
    let (nh, nc) = diffnet::recurrent_step(
        params.tensors.get(T_LSTM_T_WX),
        params.tensors.get(T_LSTM_T_WH),
        params.tensors.get(T_LSTM_T_B),
        h,
        c,
        &input,
    )
    .expect("temporal branch shapes are fixed at construction");
    (nh, nc, input)
}

/// Both branches' initial step: the self-loop on the query subject, consumed
/// from zero recurrent state with a zero time difference.
pub fn init_histories(params: &PolicyParams, cfg: &PolicyCfg, ctx: &QueryCtx) -> Histories {
    let d = params.dims.d;
    let zeros = vec![0.0; d];
    let start = Action {
        relation: params.self_loop_relation(),
        entity: ctx.subject,
        time: ctx.time,
    };
    let (h_s, c_s) = advance_static(params, ctx, &zeros, &zeros, &start);
    let (h_t, c_t, last) = advance_temporal(params, cfg, &zeros, &zeros, start.relation, 0.0);
    Histories {
        h_static: h_s,
        c_static: c_s,
        h_temporal: h_t,
        c_temporal: c_t,
        last_temporal_input: last,
        step: 0,
    }
}

/// Advances both branches over the chosen action.
pub fn advance(params: &PolicyParams, cfg: &PolicyCfg, ctx: &QueryCtx, hist: &Histories, action: &Action) -> Histories {
    let (h_s, c_s) = advance_static(params, ctx, &hist.h_static, &hist.c_static, action);
    let dt = clamped_dt(ctx.time, action.time, cfg.dt_clamp);
    let (h_t, c_t, last) =
        advance_temporal(params, cfg, &hist.h_temporal, &hist.c_temporal, action.relation, dt);
    Histories {
        h_static: h_s,
        c_static: c_s,
        h_temporal: h_t,
        c_temporal: c_t,
        last_temporal_input: last,
        step: hist.step + 1,
    }
}

/// Per-candidate feature rows: row `i` of `static_features` is
/// `[emb(r_i); emb(e_i)]`, row `i` of `temporal_features` the encoded
/// relation of candidate `i`.
#[derive(Debug, Clone)]
pub struct CandidateBatch {
    pub actions: Vec<Action>,
    pub static_features: Vec<f64>,
    pub temporal_features: Vec<f64>,
}

impl CandidateBatch {
    pub fn build(params: &PolicyParams, cfg: &PolicyCfg, ctx: &QueryCtx, actions: &[Action]) -> Self {
        let d = params.dims.d;
        let mut static_features = Vec::with_capacity(actions.len() * 2 * d);
        let mut temporal_features = Vec::with_capacity(actions.len() * d);
        for a in actions {
            static_features.extend_from_slice(params.relation_embedding(a.relation));
            static_features.extend_from_slice(params.entity_embedding(a.entity, ctx));
            let dt = clamped_dt(ctx.time, a.time, cfg.dt_clamp);
            temporal_features.extend(temporal_input(params, cfg, a.relation, dt));
        }
        Self { actions: actions.to_vec(), static_features, temporal_features }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn static_row(&self, i: usize, d: usize) -> &[f64] {
        &self.static_features[i * 2 * d..(i + 1) * 2 * d]
    }

    fn temporal_row(&self, i: usize, d: usize) -> &[f64] {
        &self.temporal_features[i * d..(i + 1) * d]
    }
}

/// Static-branch candidate scores (one per candidate).
pub fn score_static(
    params: &PolicyParams,
    ctx: &QueryCtx,
    hist: &Histories,
    candidates: &CandidateBatch,
) -> Vec<f64> {
    let d = params.dims.d;
    let mut input = Vec::with_capacity(3 * d);
    input.extend_from_slice(&hist.h_static);
    input.extend_from_slice(params.entity_embedding(ctx.subject, ctx));
    input.extend_from_slice(params.relation_embedding(ctx.relation));
    let v = diffnet::mlp2(&input, params.tensors.get(T_W1_S), params.tensors.get(T_W2_S))
        .expect("static MLP shapes are fixed at construction");
    (0..candidates.len())
        .map(|i| diffnet::dot(candidates.static_row(i, d), &v))
        .collect()
}

/// Temporal-branch candidate scores. Reads no entity embeddings at all.
pub fn score_temporal(
    params: &PolicyParams,
    hist: &Histories,
    ctx: &QueryCtx,
    candidates: &CandidateBatch,
) -> Vec<f64> {
    let d = params.dims.d;
    let mut input = Vec::with_capacity(2 * d);
    input.extend_from_slice(&hist.h_temporal);
    input.extend_from_slice(params.relation_embedding(ctx.relation));
    let v = diffnet::mlp2(&input, params.tensors.get(T_W1_T), params.tensors.get(T_W2_T))
        .expect("temporal MLP shapes are fixed at construction");
    (0..candidates.len())
        .map(|i| diffnet::dot(candidates.temporal_row(i, d), &v))
        .collect()
}

/// Per-candidate gate values in (0, 1).
pub fn gate_values(
    params: &PolicyParams,
    cfg: &PolicyCfg,
    ctx: &QueryCtx,
    hist: &Histories,
    candidates: &CandidateBatch,
) -> Vec<f64> {
    let d = params.dims.d;
    let w_g = params.tensors.get(T_W_G).data();
    let rel_q = params.relation_embedding(ctx.relation);
    let gate_for = |feature: &[f64]| {
        let mut input = Vec::with_capacity(3 * d);
        input.extend_from_slice(&hist.h_temporal);
        input.extend_from_slice(feature);
        input.extend_from_slice(rel_q);
        diffnet::sigmoid(diffnet::dot(w_g, &input))
    };
    match cfg.gate {
        GateGranularity::PerCandidate => (0..candidates.len())
            .map(|i| gate_for(candidates.temporal_row(i, d)))
            .collect(),
        GateGranularity::PerState => {
            let g = gate_for(&hist.last_temporal_input);
            vec![g; candidates.len()]
        }
    }
}

/// Eq-style fusion: `(1 - g) .* phi_s + g .* phi_t`.
pub fn fused_scores(phi_s: &[f64], phi_t: &[f64], gates: &[f64]) -> Vec<f64> {
    phi_s
        .iter()
        .zip(phi_t)
        .zip(gates)
        .map(|((s, t), g)| (1.0 - g) * s + g * t)
        .collect()
}

/// The full per-step action distribution for the configured variant.
pub fn action_distribution(
    params: &PolicyParams,
    cfg: &PolicyCfg,
    ctx: &QueryCtx,
    hist: &Histories,
    candidates: &CandidateBatch,
) -> Result<Vec<f64>> {
    Ok(diffnet::softmax(&step_scores(params, cfg, ctx, hist, candidates)?))
}

/// Pre-softmax step scores for the configured variant.
pub fn step_scores(
    params: &PolicyParams,
    cfg: &PolicyCfg,
    ctx: &QueryCtx,
    hist: &Histories,
    candidates: &CandidateBatch,
) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let phi_s = cfg
        .variant
        .needs_static()
        .then(|| score_static(params, ctx, hist, candidates));
    let phi_t = cfg
        .variant
        .needs_temporal()
        .then(|| score_temporal(params, hist, ctx, candidates));
    Ok(match cfg.variant {
        Variant::Policy1 => phi_s.unwrap(),
        Variant::Policy2 => phi_t.unwrap(),
        Variant::NoGm => phi_s
            .unwrap()
            .iter()
            .zip(&phi_t.unwrap())
            .map(|(s, t)| 0.5 * (s + t))
            .collect(),
        Variant::Full | Variant::NoTre | Variant::NoSemanticEdges => {
            let gates = gate_values(params, cfg, ctx, hist, candidates);
            fused_scores(&phi_s.unwrap(), &phi_t.unwrap(), &gates)
        }
    })
}

// ---------------------------------------------------------------------------
// Tape forward (training)
// ---------------------------------------------------------------------------

struct HistVars {
    h_static: Var,
    c_static: Var,
    h_temporal: Var,
    c_temporal: Var,
    last_temporal_input: Var,
}

/// One walk's tape: embeds the query context once, advances the two recurrent
/// branches as actions are accepted, and emits per-step log-probabilities
/// whose gradients flow back into every parameter they touched.
pub struct TapeWalk {
    tape: Tape,
    cfg: PolicyCfg,
    ctx: QueryCtx,
    subject_var: Var,
    relation_var: Var,
    hist: HistVars,
}

impl TapeWalk {
    pub fn start(params: &PolicyParams, cfg: PolicyCfg, ctx: QueryCtx) -> Self {
        let mut tape = Tape::new();
        let subject_var = entity_var(&mut tape, params, &ctx, ctx.subject);
        let relation_var = relation_var(&mut tape, params, ctx.relation);
        let d = params.dims.d;
        let zero = tape.zeros(d);
        let start = Action {
            relation: params.self_loop_relation(),
            entity: ctx.subject,
            time: ctx.time,
        };
        let hist = advance_vars(
            &mut tape,
            params,
            &cfg,
            &ctx,
            (zero, zero, zero, zero),
            &start,
            0.0,
        );
        Self { tape, cfg, ctx, subject_var, relation_var, hist }
    }

    /// Scores `actions` from the current histories; returns the
    /// log-probability vector node.
    pub fn step_log_probs(&mut self, params: &PolicyParams, actions: &[Action]) -> Result<Var> {
        if actions.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        let tape = &mut self.tape;
        let d = params.dims.d;

        // Candidate feature rows.
        let mut static_parts = Vec::with_capacity(actions.len() * 2);
        let mut temporal_parts = Vec::with_capacity(actions.len());
        for a in actions {
            let r = relation_var(tape, params, a.relation);
            if self.cfg.variant.needs_static() {
                let e = entity_var(tape, params, &self.ctx, a.entity);
                static_parts.push(r);
                static_parts.push(e);
            }
            let dt = clamped_dt(self.ctx.time, a.time, self.cfg.dt_clamp);
            temporal_parts.push(temporal_input_var(tape, params, &self.cfg, a.relation, dt));
        }

        let phi_s = self.cfg.variant.needs_static().then(|| {
            let features = tape.concat(&static_parts);
            let input = tape.concat(&[self.hist.h_static, self.subject_var, self.relation_var]);
            let w1 = tape.param(params.tensors(), T_W1_S);
            let w2 = tape.param(params.tensors(), T_W2_S);
            let v = tape.mlp2(w1, w2, input);
            tape.matvec(features, v)
        });
        let phi_t = self.cfg.variant.needs_temporal().then(|| {
            let features = tape.concat(&temporal_parts);
            let input = tape.concat(&[self.hist.h_temporal, self.relation_var]);
            let w1 = tape.param(params.tensors(), T_W1_T);
            let w2 = tape.param(params.tensors(), T_W2_T);
            let v = tape.mlp2(w1, w2, input);
            tape.matvec(features, v)
        });

        let scores = match self.cfg.variant {
            Variant::Policy1 => phi_s.unwrap(),
            Variant::Policy2 => phi_t.unwrap(),
            Variant::NoGm => {
                let sum = tape.add(phi_s.unwrap(), phi_t.unwrap());
                tape.affine(sum, 0.5, 0.0)
            }
            Variant::Full | Variant::NoTre | Variant::NoSemanticEdges => {
                let w_g = tape.param(params.tensors(), T_W_G);
                let phi_s = phi_s.unwrap();
                let phi_t = phi_t.unwrap();
                match self.cfg.gate {
                    GateGranularity::PerCandidate => {
                        let mut gate_parts = Vec::with_capacity(actions.len());
                        for feat in &temporal_parts {
                            let input =
                                tape.concat(&[self.hist.h_temporal, *feat, self.relation_var]);
                            let z = tape.dot(w_g, input);
                            gate_parts.push(tape.sigmoid(z));
                        }
                        let gates = tape.concat(&gate_parts);
                        let inverse = tape.affine(gates, -1.0, 1.0);
                        let from_static = tape.mul(inverse, phi_s);
                        let from_temporal = tape.mul(gates, phi_t);
                        tape.add(from_static, from_temporal)
                    }
                    GateGranularity::PerState => {
                        let input = tape.concat(&[
                            self.hist.h_temporal,
                            self.hist.last_temporal_input,
                            self.relation_var,
                        ]);
                        let z = tape.dot(w_g, input);
                        let gate = tape.sigmoid(z);
                        let inverse = tape.affine(gate, -1.0, 1.0);
                        let from_static = tape.scale_by_scalar(phi_s, inverse);
                        let from_temporal = tape.scale_by_scalar(phi_t, gate);
                        tape.add(from_static, from_temporal)
                    }
                }
            }
        };
        Ok(self.tape.log_softmax(scores))
    }

    /// Advances both branches over the accepted action.
    pub fn advance(&mut self, params: &PolicyParams, action: &Action) {
        let dt = clamped_dt(self.ctx.time, action.time, self.cfg.dt_clamp);
        self.hist = advance_vars(
            &mut self.tape,
            params,
            &self.cfg,
            &self.ctx,
            (
                self.hist.h_static,
                self.hist.c_static,
                self.hist.h_temporal,
                self.hist.c_temporal,
            ),
            action,
            dt,
        );
    }

    pub fn values(&self, v: Var) -> &[f64] {
        self.tape.value(v)
    }

    /// Scalar node `log_probs[idx]`.
    pub fn pick(&mut self, log_probs: Var, idx: usize) -> Var {
        self.tape.index(log_probs, idx)
    }

    /// Entropy of the distribution behind a log-probability vector.
    pub fn entropy(&mut self, log_probs: Var) -> Var {
        let probs = self.tape.exp(log_probs);
        let plogp = self.tape.dot(probs, log_probs);
        self.tape.affine(plogp, -1.0, 0.0)
    }

    /// Builds `sum_k weight_k * node_k` as a scalar node.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Var {
        let mut acc: Option<Var> = None;
        for &(node, weight) in terms {
            let scaled = self.tape.affine(node, weight, 0.0);
            acc = Some(match acc {
                None => scaled,
                Some(prev) => self.tape.add(prev, scaled),
            });
        }
        acc.expect("weighted_sum needs at least one term")
    }

    pub fn backward(&self, loss: Var, grads: &mut TensorSet) {
        self.tape.backward(loss, grads);
    }

    pub fn node_count(&self) -> usize {
        self.tape.node_count()
    }
}

fn entity_var(tape: &mut Tape, params: &PolicyParams, ctx: &QueryCtx, entity: EntityId) -> Var {
    let d = params.dims.d;
    let row = params.entity_row(entity, ctx);
    tape.param_slice(params.tensors(), T_ENTITY_EMB, row * d, d)
}

fn relation_var(tape: &mut Tape, params: &PolicyParams, relation: RelationId) -> Var {
    let d = params.dims.d;
    tape.param_slice(params.tensors(), T_RELATION_EMB, relation as usize * d, d)
}

fn temporal_input_var(
    tape: &mut Tape,
    params: &PolicyParams,
    cfg: &PolicyCfg,
    relation: RelationId,
    dt: f64,
) -> Var {
    let r = relation_var(tape, params, relation);
    if cfg.variant == Variant::NoTre {
        return r;
    }
    let w = tape.param(params.tensors(), T_TRE_W);
    let b = tape.param(params.tensors(), T_TRE_B);
    let scaled = tape.affine(w, dt, 0.0);
    let activated = tape.tanh(scaled);
    let shifted = tape.add(activated, b);
    tape.mul(shifted, r)
}

fn advance_vars(
    tape: &mut Tape,
    params: &PolicyParams,
    cfg: &PolicyCfg,
    ctx: &QueryCtx,
    prev: (Var, Var, Var, Var),
    action: &Action,
    dt: f64,
) -> HistVars {
    let (h_s, c_s, h_t, c_t) = prev;
    let r = relation_var(tape, params, action.relation);
    let e = entity_var(tape, params, ctx, action.entity);
    let static_input = tape.concat(&[r, e]);
    let s_wx = tape.param(params.tensors(), T_LSTM_S_WX);
    let s_wh = tape.param(params.tensors(), T_LSTM_S_WH);
    let s_b = tape.param(params.tensors(), T_LSTM_S_B);
    let (nh_s, nc_s) = tape.lstm_step(s_wx, s_wh, s_b, h_s, c_s, static_input);

    let temporal_input = temporal_input_var(tape, params, cfg, action.relation, dt);
    let t_wx = tape.param(params.tensors(), T_LSTM_T_WX);
    let t_wh = tape.param(params.tensors(), T_LSTM_T_WH);
    let t_b = tape.param(params.tensors(), T_LSTM_T_B);
    let (nh_t, nc_t) = tape.lstm_step(t_wx, t_wh, t_b, h_t, c_t, temporal_input);

    HistVars {
        h_static: nh_s,
        c_static: nc_s,
        h_temporal: nh_t,
        c_temporal: nc_t,
        last_temporal_input: temporal_input,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_dims() -> Dims {
        Dims { d: 4, m: 4, entity_count: 6, relation_count: 5 }
    }

    fn toy_params(seed: u64) -> PolicyParams {
        PolicyParams::init(toy_dims(), &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn toy_ctx() -> QueryCtx {
        QueryCtx { subject: 0, relation: 1, time: 9, subject_to_oov: false }
    }

    fn toy_actions() -> Vec<Action> {
        vec![
            Action { relation: 4, entity: 0, time: 9 },
            Action { relation: 1, entity: 2, time: 7 },
            Action { relation: 0, entity: 3, time: 5 },
            Action { relation: 3, entity: 1, time: 2 },
        ]
    }

    #[test]
    fn tre_identity_cases() {
        let mut params = toy_params(3);
        // dt = 0: output is exactly tre_b .* emb(r).
        let out = temporal_relation(&params, 2, 0).unwrap();
        let b = params.tensors().get(T_TRE_B).data().to_vec();
        let r = params.relation_embedding(2).to_vec();
        for k in 0..4 {
            assert_eq!(out[k], b[k] * r[k]);
        }
        // tre_w = 0, tre_b = 1: the encoder is the identity on embeddings.
        params.tensors_mut().get_mut(T_TRE_W).fill(0.0);
        params.tensors_mut().get_mut(T_TRE_B).fill(1.0);
        let out = temporal_relation(&params, 2, 7).unwrap();
        assert_eq!(out, params.relation_embedding(2).to_vec());
    }

    #[test]
    fn tre_matches_elementwise_oracle() {
        let params = toy_params(11);
        let dt = 7i64;
        let got = temporal_relation(&params, 3, dt).unwrap();
        let w = params.tensors().get(T_TRE_W).data();
        let b = params.tensors().get(T_TRE_B).data();
        let r = params.relation_embedding(3);
        for k in 0..4 {
            let expect = ((w[k] * dt as f64).tanh() + b[k]) * r[k];
            assert!((got[k] - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn tre_rejects_negative_dt() {
        let params = toy_params(3);
        assert!(temporal_relation(&params, 0, -1).is_err());
    }

    #[test]
    fn zero_params_keep_histories_zero() {
        let dims = toy_dims();
        let mut params = toy_params(1);
        for idx in 0..params.tensors().len() {
            params.tensors_mut().get_mut(idx).fill(0.0);
        }
        let cfg = PolicyCfg::default();
        let ctx = toy_ctx();
        let mut hist = init_histories(&params, &cfg, &ctx);
        for a in toy_actions() {
            hist = advance(&params, &cfg, &ctx, &hist, &a);
        }
        assert!(hist.h_static.iter().all(|v| *v == 0.0));
        assert!(hist.h_temporal.iter().all(|v| *v == 0.0));
        assert_eq!(hist.h_static.len(), dims.d);
    }

    #[test]
    fn static_history_matches_manual_unroll() {
        let params = toy_params(5);
        let cfg = PolicyCfg::default();
        let ctx = toy_ctx();
        let hist = init_histories(&params, &cfg, &ctx);
        let action = Action { relation: 1, entity: 2, time: 7 };
        let next = advance(&params, &cfg, &ctx, &hist, &action);

        // Manual: two recurrent_step calls with explicitly built inputs.
        let d = 4;
        let mut x0 = Vec::new();
        x0.extend_from_slice(params.relation_embedding(params.self_loop_relation()));
        x0.extend_from_slice(params.entity_embedding(0, &ctx));
        let (h0, c0) = diffnet::recurrent_step(
            params.tensors().get(T_LSTM_S_WX),
            params.tensors().get(T_LSTM_S_WH),
            params.tensors().get(T_LSTM_S_B),
            &vec![0.0; d],
            &vec![0.0; d],
            &x0,
        )
        .unwrap();
        let mut x1 = Vec::new();
        x1.extend_from_slice(params.relation_embedding(1));
        x1.extend_from_slice(params.entity_embedding(2, &ctx));
        let (h1, _) = diffnet::recurrent_step(
            params.tensors().get(T_LSTM_S_WX),
            params.tensors().get(T_LSTM_S_WH),
            params.tensors().get(T_LSTM_S_B),
            &h0,
            &c0,
            &x1,
        )
        .unwrap();
        for k in 0..d {
            assert!((next.h_static[k] - h1[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn score_static_zero_features_give_zero_scores() {
        let mut params = toy_params(7);
        params.tensors_mut().get_mut(T_ENTITY_EMB).fill(0.0);
        params.tensors_mut().get_mut(T_RELATION_EMB).fill(0.0);
        let cfg = PolicyCfg::default();
        let ctx = toy_ctx();
        let hist = init_histories(&params, &cfg, &ctx);
        let batch = CandidateBatch::build(&params, &cfg, &ctx, &toy_actions());
        let scores = score_static(&params, &ctx, &hist, &batch);
        assert!(scores.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn scores_match_matrix_oracle() {
        let params = toy_params(13);
        let cfg = PolicyCfg::default();
        let ctx = toy_ctx();
        let hist = init_histories(&params, &cfg, &ctx);
        let actions = toy_actions();
        let batch = CandidateBatch::build(&params, &cfg, &ctx, &actions);
        let phi_s = score_static(&params, &ctx, &hist, &batch);
        let phi_t = score_temporal(&params, &hist, &ctx, &batch);

        // Independent oracle: rebuild each score with raw loops.
        let d = 4;
        let mlp = |input: &[f64], w1: &Tensor, w2: &Tensor| -> Vec<f64> {
            let mut z = vec![0.0; w1.rows()];
            for r in 0..w1.rows() {
                let mut acc = 0.0;
                for c in 0..w1.cols() {
                    acc += w1.data()[r * w1.cols() + c] * input[c];
                }
                z[r] = acc.max(0.0);
            }
            let mut out = vec![0.0; w2.rows()];
            for r in 0..w2.rows() {
                let mut acc = 0.0;
                for c in 0..w2.cols() {
                    acc += w2.data()[r * w2.cols() + c] * z[c];
                }
                out[r] = acc;
            }
            out
        };
        let mut u = hist.h_static.clone();
        u.extend_from_slice(params.entity_embedding(0, &ctx));
        u.extend_from_slice(params.relation_embedding(1));
        let v = mlp(&u, params.tensors().get(T_W1_S), params.tensors().get(T_W2_S));
        for (i, a) in actions.iter().enumerate() {
            let mut feat = params.relation_embedding(a.relation).to_vec();
            feat.extend_from_slice(params.entity_embedding(a.entity, &ctx));
            let expect: f64 = feat.iter().zip(&v).map(|(f, vk)| f * vk).sum();
            assert!((phi_s[i] - expect).abs() < 1e-9, "static score {i}");
        }
        let mut u2 = hist.h_temporal.clone();
        u2.extend_from_slice(params.relation_embedding(1));
        let v2 = mlp(&u2, params.tensors().get(T_W1_T), params.tensors().get(T_W2_T));
        for (i, a) in actions.iter().enumerate() {
            let dt = (ctx.time - a.time) as i64;
            let feat = temporal_relation(&params, a.relation, dt).unwrap();
            let expect: f64 = feat.iter().zip(&v2).map(|(f, vk)| f * vk).sum();
            assert!((phi_t[i] - expect).abs() < 1e-9, "temporal score {i}");
        }
    }

    #[test]
    fn scores_are_sensitive_to_history() {
        let params = toy_params(17);
        let cfg = PolicyCfg::default();
        let ctx = toy_ctx();
        let hist = init_histories(&params, &cfg, &ctx);
        let batch = CandidateBatch::build(&params, &cfg, &ctx, &toy_actions());
        let base_s = score_static(&params, &ctx, &hist, &batch);
        let base_t = score_temporal(&params, &hist, &ctx, &batch);

        let moved = advance(&params, &cfg, &ctx, &hist, &toy_actions()[1]);
        let new_s = score_static(&params, &ctx, &moved, &batch);
        let new_t = score_temporal(&params, &moved, &ctx, &batch);
        assert!(base_s.iter().zip(&new_s).any(|(a, b)| (a - b).abs() > 1e-9));
        assert!(base_t.iter().zip(&new_t).any(|(a, b)| (a - b).abs() > 1e-9));
    }

    #[test]
    fn zero_gate_weights_give_half_gates() {
        let mut params = toy_params(19);
        params.tensors_mut().get_mut(T_W_G).fill(0.0);
        let cfg = PolicyCfg::default();
        let ctx = toy_ctx();
        let hist = init_histories(&params, &cfg, &ctx);
        let batch = CandidateBatch::build(&params, &cfg, &ctx, &toy_actions());
        for g in gate_values(&params, &cfg, &ctx, &hist, &batch) {
            assert_eq!(g, 0.5);
        }
    }

    #[test]
    fn extreme_gate_weights_saturate_monotonically() {
        let params = toy_params(23);
        let cfg = PolicyCfg::default();
        let ctx = toy_ctx();
        let hist = init_histories(&params, &cfg, &ctx);
        let batch = CandidateBatch::build(&params, &cfg, &ctx, &toy_actions());
        let mut previous: Option<Vec<f64>> = None;
        for scale in [1.0, 10.0, 100.0, 1000.0] {
            let mut scaled = params.clone();
            for v in scaled.tensors_mut().get_mut(T_W_G).data_mut() {
                *v *= scale;
            }
            let gates = gate_values(&scaled, &cfg, &ctx, &hist, &batch);
            for (i, g) in gates.iter().enumerate() {
                assert!(*g > 0.0 && *g < 1.0);
                if let Some(prev) = &previous {
                    // Same sign pre-activation, larger magnitude: moves toward {0,1}.
                    let drift = (g - 0.5).abs() - (prev[i] - 0.5).abs();
                    assert!(drift >= -1e-12);
                }
            }
            previous = Some(gates);
        }
    }

    #[test]
    fn gate_hand_case() {
        let params = toy_params(29);
        let cfg = PolicyCfg::default();
        let ctx = toy_ctx();
        let hist = init_histories(&params, &cfg, &ctx);
        let actions = toy_actions();
        let batch = CandidateBatch::build(&params, &cfg, &ctx, &actions);
        let gates = gate_values(&params, &cfg, &ctx, &hist, &batch);
        let w_g = params.tensors().get(T_W_G).data();
        for (i, a) in actions.iter().enumerate() {
            let dt = (ctx.time - a.time) as i64;
            let mut feat = hist.h_temporal.clone();
            feat.extend(temporal_relation(&params, a.relation, dt).unwrap());
            feat.extend_from_slice(params.relation_embedding(1));
            let z: f64 = w_g.iter().zip(&feat).map(|(w, f)| w * f).sum();
            let expect = 1.0 / (1.0 + (-z).exp());
            assert!((gates[i] - expect).abs() < 1e-12, "gate {i}");
        }
    }

    #[test]
    fn gate_saturation_reproduces_single_branches() {
        let params = toy_params(31);
        let cfg = PolicyCfg::default();
        let ctx = toy_ctx();
        let hist = init_histories(&params, &cfg, &ctx);
        let batch = CandidateBatch::build(&params, &cfg, &ctx, &toy_actions());
        let phi_s = score_static(&params, &ctx, &hist, &batch);
        let phi_t = score_temporal(&params, &hist, &ctx, &batch);

        let all_one = diffnet::softmax(&fused_scores(&phi_s, &phi_t, &vec![1.0; 4]));
        let all_zero = diffnet::softmax(&fused_scores(&phi_s, &phi_t, &vec![0.0; 4]));
        let p2 = diffnet::softmax(&phi_t);
        let p1 = diffnet::softmax(&phi_s);
        for k in 0..4 {
            assert!((all_one[k] - p2[k]).abs() < 1e-6);
            assert!((all_zero[k] - p1[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn full_distribution_matches_independent_recomputation() {
        let params = toy_params(37);
        let cfg = PolicyCfg::default();
        let ctx = toy_ctx();
        let hist = init_histories(&params, &cfg, &ctx);
        let actions = toy_actions();
        let batch = CandidateBatch::build(&params, &cfg, &ctx, &actions);
        let dist = action_distribution(&params, &cfg, &ctx, &hist, &batch).unwrap();

        let phi_s = score_static(&params, &ctx, &hist, &batch);
        let phi_t = score_temporal(&params, &hist, &ctx, &batch);
        let gates = gate_values(&params, &cfg, &ctx, &hist, &batch);
        let mut combined = vec![0.0; 4];
        for k in 0..4 {
            combined[k] = (1.0 - gates[k]) * phi_s[k] + gates[k] * phi_t[k];
        }
        let max = combined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = combined.iter().map(|s| (s - max).exp()).sum();
        for k in 0..4 {
            let expect = (combined[k] - max).exp() / z;
            assert!((dist[k] - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn variant_distributions_have_expected_shapes() {
        let params = toy_params(41);
        let ctx = toy_ctx();
        let actions = toy_actions();
        for variant in ALL_VARIANTS {
            let cfg = PolicyCfg { variant, ..Default::default() };
            let hist = init_histories(&params, &cfg, &ctx);
            let batch = CandidateBatch::build(&params, &cfg, &ctx, &actions);
            let dist = action_distribution(&params, &cfg, &ctx, &hist, &batch).unwrap();
            assert_eq!(dist.len(), actions.len());
            let sum: f64 = dist.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "{variant:?}");
        }
    }

    #[test]
    fn no_gm_is_the_mean_of_branch_scores() {
        let params = toy_params(43);
        let cfg = PolicyCfg { variant: Variant::NoGm, ..Default::default() };
        let ctx = toy_ctx();
        let hist = init_histories(&params, &cfg, &ctx);
        let batch = CandidateBatch::build(&params, &cfg, &ctx, &toy_actions());
        let dist = action_distribution(&params, &cfg, &ctx, &hist, &batch).unwrap();
        let phi_s = score_static(&params, &ctx, &hist, &batch);
        let phi_t = score_temporal(&params, &hist, &ctx, &batch);
        let mean: Vec<f64> = phi_s.iter().zip(&phi_t).map(|(s, t)| 0.5 * (s + t)).collect();
        let expect = diffnet::softmax(&mean);
        for k in 0..4 {
            assert!((dist[k] - expect[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn policy2_ignores_entity_embeddings() {
        let params = toy_params(47);
        let cfg = PolicyCfg { variant: Variant::Policy2, ..Default::default() };
        let ctx = QueryCtx { subject: 5, relation: 1, time: 9, subject_to_oov: true };
        let hist = init_histories(&params, &cfg, &ctx);
        let batch = CandidateBatch::build(&params, &cfg, &ctx, &toy_actions());
        let base = score_temporal(&params, &hist, &ctx, &batch);

        // Scramble every entity embedding row; policy2 scores must not move.
        let mut scrambled = params.clone();
        for v in scrambled.tensors_mut().get_mut(T_ENTITY_EMB).data_mut() {
            *v = *v * -3.0 + 1.7;
        }
        let hist2 = init_histories(&scrambled, &cfg, &ctx);
        let batch2 = CandidateBatch::build(&scrambled, &cfg, &ctx, &toy_actions());
        let moved = score_temporal(&scrambled, &hist2, &ctx, &batch2);
        assert_eq!(base, moved);
    }

    #[test]
    fn softmax_argmax_invariant_under_joint_shift() {
        let params = toy_params(53);
        let cfg = PolicyCfg::default();
        let ctx = toy_ctx();
        let hist = init_histories(&params, &cfg, &ctx);
        let batch = CandidateBatch::build(&params, &cfg, &ctx, &toy_actions());
        let phi_s = score_static(&params, &ctx, &hist, &batch);
        let phi_t = score_temporal(&params, &hist, &ctx, &batch);
        let gates = gate_values(&params, &cfg, &ctx, &hist, &batch);

        let argmax = |v: &[f64]| {
            v.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        let base = diffnet::softmax(&fused_scores(&phi_s, &phi_t, &gates));
        for shift in [-3.0, 0.5, 12.0] {
            let s: Vec<f64> = phi_s.iter().map(|v| v + shift).collect();
            let t: Vec<f64> = phi_t.iter().map(|v| v + shift).collect();
            let shifted = diffnet::softmax(&fused_scores(&s, &t, &gates));
            assert_eq!(argmax(&base), argmax(&shifted));
        }
    }

    #[test]
    fn tape_and_plain_agree() {
        for seed in 0..20u64 {
            let params = toy_params(seed);
            for variant in ALL_VARIANTS {
                for gate in [GateGranularity::PerCandidate, GateGranularity::PerState] {
                    let cfg = PolicyCfg { variant, gate, ..Default::default() };
                    let ctx = toy_ctx();
                    let actions = toy_actions();

                    let mut walk = TapeWalk::start(&params, cfg, ctx);
                    let lp = walk.step_log_probs(&params, &actions).unwrap();
                    let tape_probs: Vec<f64> = walk.values(lp).iter().map(|v| v.exp()).collect();

                    let hist = init_histories(&params, &cfg, &ctx);
                    let batch = CandidateBatch::build(&params, &cfg, &ctx, &actions);
                    let plain = action_distribution(&params, &cfg, &ctx, &hist, &batch).unwrap();
                    for k in 0..actions.len() {
                        assert!(
                            (tape_probs[k] - plain[k]).abs() < 1e-12,
                            "{variant:?}/{gate:?} candidate {k}: {} vs {}",
                            tape_probs[k],
                            plain[k]
                        );
                    }

                    // Agreement must survive an advance.
                    let mut walk2 = walk;
                    walk2.advance(&params, &actions[1]);
                    let lp2 = walk2.step_log_probs(&params, &actions).unwrap();
                    let tape_probs2: Vec<f64> = walk2.values(lp2).iter().map(|v| v.exp()).collect();
                    let hist2 = advance(&params, &cfg, &ctx, &hist, &actions[1]);
                    let plain2 =
                        action_distribution(&params, &cfg, &ctx, &hist2, &batch).unwrap();
                    for k in 0..actions.len() {
                        assert!((tape_probs2[k] - plain2[k]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn every_tensor_receives_gradient_somewhere() {
        let params = toy_params(59);
        let cfg = PolicyCfg::default();
        let mut grads = params.tensors().zeros_like();

        // Seen-subject walk covers the regular entity rows; an OOV walk
        // covers the out-of-vocabulary row.
        for ctx in [toy_ctx(), toy_ctx().with_forced_oov()] {
            let actions = toy_actions();
            let mut walk = TapeWalk::start(&params, cfg, ctx);
            let lp1 = walk.step_log_probs(&params, &actions).unwrap();
            let pick1 = walk.pick(lp1, 1);
            walk.advance(&params, &actions[1]);
            let lp2 = walk.step_log_probs(&params, &actions).unwrap();
            let pick2 = walk.pick(lp2, 2);
            let loss = walk.weighted_sum(&[(pick1, -1.0), (pick2, -1.0)]);
            walk.backward(loss, &mut grads);
        }
        for (name, tensor) in grads.iter() {
            assert!(
                tensor.data().iter().any(|v| *v != 0.0),
                "tensor {name} received no gradient"
            );
        }
    }
}
