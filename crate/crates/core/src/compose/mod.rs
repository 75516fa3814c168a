//! Compositional encoder, waypoint arithmetic, policy network and losses.

mod latent;

pub use latent::LatentVec;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::craftworld::{feature_len, featurize_sparse, Action, GridState};
use crate::nn::{softmax_xent, triplet_margin, Mlp, MlpTrace, NnError, ParamStore, SparseVec};
use crate::num::Scalar;

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("feature length {found} does not match the network input {expected}")]
    FeatureMismatch { expected: usize, found: usize },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: i64 },
    #[error("step {t} lies beyond the trajectory length {n}")]
    StepBeyondEnd { t: i64, n: i64 },
    #[error("variant {0} has no baseline goal")]
    NotABaseline(Variant),
    #[error("action index {0} out of range")]
    BadAction(usize),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Case,
    CaseCi,
    CaseCiL,
    GoalGuidance,
    CpvFull,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Case,
        Variant::CaseCi,
        Variant::CaseCiL,
        Variant::GoalGuidance,
        Variant::CpvFull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Case => "CASE",
            Variant::CaseCi => "CASE_CI",
            Variant::CaseCiL => "CASE_CI_L",
            Variant::GoalGuidance => "GOAL_GUIDANCE",
            Variant::CpvFull => "CPV_FULL",
        }
    }

    /// Policy sees `featurize(U_t)` in addition to the goal vector.
    pub fn has_state_branch(self) -> bool {
        self != Variant::Case
    }

    /// Trains with the two triplet losses.
    pub fn has_assistive_losses(self) -> bool {
        self == Variant::CaseCiL
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, Variant::GoalGuidance | Variant::CpvFull)
    }

    pub fn is_case(self) -> bool {
        !self.is_baseline()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let norm = s.trim().to_ascii_uppercase().replace(['-', '+'], "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .ok_or_else(|| format!("unknown variant {s:?} (expected one of CASE, CASE_CI, CASE_CI_L, GOAL_GUIDANCE, CPV_FULL)"))
    }
}

/// `p = floor(t·T/N)`, `I = min(p + k, T)`; `N == 0` gives `I = T`.
pub fn waypoint_index(t: i64, n: i64, t_ref: i64, k: i64) -> Result<usize, ComposeError> {
    for (name, value) in [("t", t), ("N", n), ("T", t_ref), ("k", k)] {
        if value < 0 {
            return Err(ComposeError::Negative { name, value });
        }
    }
    if n == 0 {
        return Ok(t_ref as usize);
    }
    if t > n {
        return Err(ComposeError::StepBeyondEnd { t, n });
    }
    let p = (t as i128 * t_ref as i128) / n as i128;
    Ok((p + k as i128).min(t_ref as i128) as usize)
}

/// Index used during closed-loop rollouts, where the episode length is
/// unknown and estimated as the reference length.
pub fn rollout_waypoint_index(t: usize, t_ref: usize, k: usize) -> usize {
    (t.min(t_ref) + k).min(t_ref)
}

/// Maps `featurize(a) ⧺ featurize(b)` to a latent vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderNet {
    mlp: Mlp,
    feat_len: usize,
}

impl EncoderNet {
    pub fn feat_len(&self) -> usize {
        self.feat_len
    }

    pub fn latent_dim(&self) -> usize {
        self.mlp.output_len()
    }

    fn input<S: Scalar>(&self, a: &SparseVec<S>, b: &SparseVec<S>) -> Result<SparseVec<S>, ComposeError> {
        for f in [a, b] {
            if f.len() != self.feat_len {
                return Err(ComposeError::FeatureMismatch {
                    expected: self.feat_len,
                    found: f.len(),
                });
            }
        }
        Ok(a.concat(b))
    }

    pub fn forward<S: Scalar>(
        &self,
        store: &ParamStore<S>,
        a: &SparseVec<S>,
        b: &SparseVec<S>,
    ) -> Result<MlpTrace<S>, ComposeError> {
        Ok(self.mlp.forward(store, self.input(a, b)?)?)
    }

    pub fn encode_features<S: Scalar>(
        &self,
        store: &ParamStore<S>,
        a: &SparseVec<S>,
        b: &SparseVec<S>,
    ) -> Result<LatentVec<S>, ComposeError> {
        Ok(LatentVec(self.mlp.infer(store, self.input(a, b)?)?))
    }

    pub fn encode<S: Scalar>(&self, store: &ParamStore<S>, a: &GridState, b: &GridState) -> Result<LatentVec<S>, ComposeError> {
        self.encode_features(store, &featurize_sparse(a), &featurize_sparse(b))
    }

    pub fn backward<S: Scalar>(&self, store: &mut ParamStore<S>, trace: &MlpTrace<S>, dlatent: &[S]) -> Result<(), ComposeError> {
        self.mlp.backward(store, trace, dlatent, false)?;
        Ok(())
    }
}

/// Maps the variant's policy input to action logits.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    mlp: Mlp,
    variant: Variant,
    feat_len: usize,
    latent_dim: usize,
}

impl PolicyNet {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// `[goal]` for CASE, `[featurize(U_t) ⧺ goal]` otherwise.
    pub fn input<S: Scalar>(&self, feat_t: &SparseVec<S>, goal: &[S]) -> Result<SparseVec<S>, ComposeError> {
        if goal.len() != self.latent_dim {
            return Err(ComposeError::FeatureMismatch {
                expected: self.latent_dim,
                found: goal.len(),
            });
        }
        if !self.variant.has_state_branch() {
            return Ok(SparseVec::from_dense(goal));
        }
        if feat_t.len() != self.feat_len {
            return Err(ComposeError::FeatureMismatch {
                expected: self.feat_len,
                found: feat_t.len(),
            });
        }
        Ok(feat_t.append_dense(goal))
    }

    pub fn forward<S: Scalar>(
        &self,
        store: &ParamStore<S>,
        feat_t: &SparseVec<S>,
        goal: &[S],
    ) -> Result<MlpTrace<S>, ComposeError> {
        Ok(self.mlp.forward(store, self.input(feat_t, goal)?)?)
    }

    pub fn logits<S: Scalar>(&self, store: &ParamStore<S>, feat_t: &SparseVec<S>, goal: &[S]) -> Result<Vec<S>, ComposeError> {
        Ok(self.mlp.infer(store, self.input(feat_t, goal)?)?)
    }

    /// Accumulates parameter gradients; returns `d loss / d goal`.
    pub fn backward<S: Scalar>(&self, store: &mut ParamStore<S>, trace: &MlpTrace<S>, dlogits: &[S]) -> Result<Vec<S>, ComposeError> {
        let dinput = self.mlp.backward(store, trace, dlogits, true)?.expect("input grad requested");
        Ok(dinput[dinput.len() - self.latent_dim..].to_vec())
    }
}

/// Greedy decoding; ties go to the lowest action index.
pub fn argmax_action<S: Scalar>(logits: &[S]) -> Action {
    let mut best = 0;
    for (i, &x) in logits.iter().enumerate() {
        if x > logits[best] {
            best = i;
        }
    }
    Action::from_index(best).expect("policy emits one logit per action")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub variant: Variant,
    pub width: usize,
    pub height: usize,
    pub latent_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub policy_hidden: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::CaseCiL,
            width: 8,
            height: 8,
            latent_dim: 32,
            encoder_hidden: vec![64, 64],
            policy_hidden: vec![128, 64],
        }
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

fn split(s: &str) -> Result<Vec<usize>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split('x')
        .map(|p| p.parse().map_err(|_| format!("bad layer list {s:?}")))
        .collect()
}

impl ModelConfig {
    pub fn feat_len(&self) -> usize {
        feature_len(self.width, self.height)
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("model.variant".into(), self.variant.name().into()),
            ("model.width".into(), self.width.to_string()),
            ("model.height".into(), self.height.to_string()),
            ("model.latent_dim".into(), self.latent_dim.to_string()),
            ("model.encoder_hidden".into(), join(&self.encoder_hidden)),
            ("model.policy_hidden".into(), join(&self.policy_hidden)),
        ])
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, ComposeError> {
        let get = |k: &str| {
            map.get(k)
                .ok_or_else(|| ComposeError::Config(format!("missing key {k}")))
        };
        let num = |k: &str| -> Result<usize, ComposeError> {
            get(k)?
                .parse()
                .map_err(|_| ComposeError::Config(format!("{k} is not an integer")))
        };
        Ok(ModelConfig {
            variant: get("model.variant")?.parse().map_err(ComposeError::Config)?,
            width: num("model.width")?,
            height: num("model.height")?,
            latent_dim: num("model.latent_dim")?,
            encoder_hidden: split(get("model.encoder_hidden")?).map_err(ComposeError::Config)?,
            policy_hidden: split(get("model.policy_hidden")?).map_err(ComposeError::Config)?,
        })
    }

    fn encoder_sizes(&self) -> Vec<usize> {
        let mut s = vec![2 * self.feat_len()];
        s.extend(&self.encoder_hidden);
        s.push(self.latent_dim);
        s
    }

    fn policy_sizes(&self) -> Vec<usize> {
        let input = if self.variant.has_state_branch() {
            self.feat_len() + self.latent_dim
        } else {
            self.latent_dim
        };
        let mut s = vec![input];
        s.extend(&self.policy_hidden);
        s.push(Action::COUNT);
        s
    }
}

/// Encoder `g` and policy `π` sharing one parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseModel<S> {
    pub config: ModelConfig,
    pub store: ParamStore<S>,
    pub encoder: EncoderNet,
    pub policy: PolicyNet,
}

impl<S: Scalar> CaseModel<S> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ComposeError> {
        if config.width == 0 || config.height == 0 || config.latent_dim == 0 {
            return Err(ComposeError::Config("grid and latent sizes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let enc = Mlp::new(&mut store, "enc", &config.encoder_sizes(), &mut rng)?;
        let pi = Mlp::new(&mut store, "pi", &config.policy_sizes(), &mut rng)?;
        Ok(Self::assemble(config, store, enc, pi))
    }

    /// Wraps parameters loaded from a checkpoint.
    pub fn from_store(config: ModelConfig, store: ParamStore<S>) -> Result<Self, ComposeError> {
        let enc = Mlp::attach(&store, "enc", &config.encoder_sizes())?;
        let pi = Mlp::attach(&store, "pi", &config.policy_sizes())?;
        if store.len() != 2 * (enc.sizes().len() - 1 + pi.sizes().len() - 1) {
            return Err(ComposeError::Config("checkpoint holds unexpected tensors".into()));
        }
        Ok(Self::assemble(config, store, enc, pi))
    }

    fn assemble(config: ModelConfig, store: ParamStore<S>, enc: Mlp, pi: Mlp) -> Self {
        let feat_len = config.feat_len();
        CaseModel {
            encoder: EncoderNet { mlp: enc, feat_len },
            policy: PolicyNet {
                mlp: pi,
                variant: config.variant,
                feat_len,
                latent_dim: config.latent_dim,
            },
            config,
            store,
        }
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn encode(&self, a: &GridState, b: &GridState) -> Result<LatentVec<S>, ComposeError> {
        self.encoder.encode(&self.store, a, b)
    }

    /// Goal vector from precomputed features, per the model's variant.
    pub fn goal_features(&self, x: &StepInputs<'_, S>) -> Result<LatentVec<S>, ComposeError> {
        let mut goal = LatentVec::zeros(self.config.latent_dim);
        for &(sign, seg) in goal_terms(self.variant()) {
            let (a, b) = x.segment(seg);
            let v = self.encoder.encode_features(&self.store, a, b)?;
            goal = if sign > 0 { &goal + &v } else { &goal - &v };
        }
        Ok(goal)
    }

    pub fn act(&self, x: &StepInputs<'_, S>) -> Result<Action, ComposeError> {
        let goal = self.goal_features(x)?;
        let logits = self.policy.logits(&self.store, x.ut, &goal.0)?;
        Ok(argmax_action(&logits))
    }
}

/// `W = g(U_t, U_N) − g(R_I, R_T)`.
pub fn waypoint_embedding<S: Scalar>(
    net: &EncoderNet,
    store: &ParamStore<S>,
    u_t: &GridState,
    u_n: &GridState,
    r_i: &GridState,
    r_t: &GridState,
) -> Result<LatentVec<S>, ComposeError> {
    Ok(&net.encode(store, u_t, u_n)? - &net.encode(store, r_i, r_t)?)
}

/// Goal vector of the two baselines.
#[allow(clippy::too_many_arguments)]
pub fn baseline_goal<S: Scalar>(
    net: &EncoderNet,
    store: &ParamStore<S>,
    variant: Variant,
    u_0: &GridState,
    u_t: &GridState,
    u_n: &GridState,
    r_0: &GridState,
    r_t: &GridState,
) -> Result<LatentVec<S>, ComposeError> {
    match variant {
        Variant::GoalGuidance => net.encode(store, u_t, u_n),
        Variant::CpvFull => Ok(&net.encode(store, r_0, r_t)? - &net.encode(store, u_0, u_t)?),
        v => Err(ComposeError::NotABaseline(v)),
    }
}

/// State pairs the losses encode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    UtUn,
    RiRt,
    U0Ut,
    U0Un,
    R0Rt,
    /// Negative for `L_H`: another pair's `(U'_0, U'_N)`.
    NegU,
    /// Negative for `L_P`: another pair's `(R'_0, R'_T)`.
    NegR,
}

const SEGMENTS: usize = 7;

impl Segment {
    fn slot(self) -> usize {
        self as usize
    }
}

/// Signed encodings summed into the policy's goal vector.
pub fn goal_terms(variant: Variant) -> &'static [(i8, Segment)] {
    match variant {
        Variant::Case | Variant::CaseCi | Variant::CaseCiL => &[(1, Segment::UtUn), (-1, Segment::RiRt)],
        Variant::GoalGuidance => &[(1, Segment::UtUn)],
        Variant::CpvFull => &[(1, Segment::R0Rt), (-1, Segment::U0Ut)],
    }
}

/// Featurized states of one training sample.
#[derive(Debug, Clone, Copy)]
pub struct StepInputs<'a, S> {
    pub u0: &'a SparseVec<S>,
    pub ut: &'a SparseVec<S>,
    pub un: &'a SparseVec<S>,
    pub r0: &'a SparseVec<S>,
    pub ri: &'a SparseVec<S>,
    pub rt: &'a SparseVec<S>,
}

impl<'a, S> StepInputs<'a, S> {
    /// States of a non-negative segment.
    pub fn segment(&self, seg: Segment) -> (&'a SparseVec<S>, &'a SparseVec<S>) {
        match seg {
            Segment::UtUn => (self.ut, self.un),
            Segment::RiRt => (self.ri, self.rt),
            Segment::U0Ut => (self.u0, self.ut),
            Segment::U0Un => (self.u0, self.un),
            Segment::R0Rt => (self.r0, self.rt),
            Segment::NegU | Segment::NegR => panic!("negative segments come from Negatives::States"),
        }
    }
}

/// Negatives for the two triplet losses.
#[derive(Debug, Clone, Copy)]
pub enum Negatives<'a, S> {
    /// Fixed vectors standing in for `g(U_0,U_N)` (in `L_H`) and
    /// `g(R_0,R_T)` (in `L_P`); no gradient reaches them.
    Detached { h: &'a LatentVec<S>, p: &'a LatentVec<S> },
    /// Another pair's states, encoded with gradients like anchor and positive.
    States {
        u0: &'a SparseVec<S>,
        un: &'a SparseVec<S>,
        r0: &'a SparseVec<S>,
        rt: &'a SparseVec<S>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights<S> {
    /// Weight of `L_a` (1 or 0).
    pub policy: S,
    pub lambda_h: S,
    pub lambda_p: S,
    pub margin: S,
    /// Multiplies every gradient (e.g. `1 / batch`), not the reported values.
    pub grad_scale: S,
}

impl<S: Scalar> LossWeights<S> {
    pub fn only(policy: S, lambda_h: S, lambda_p: S, margin: S) -> Self {
        LossWeights {
            policy,
            lambda_h,
            lambda_p,
            margin,
            grad_scale: S::one(),
        }
    }
}

/// Unweighted components and the weighted total. Components whose weight is
/// zero are not evaluated and read as zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossValues<S> {
    pub policy: S,
    pub h: S,
    pub p: S,
    pub total: S,
}

/// `L = L_a + λ_H·L_H + λ_P·L_P`.
pub fn loss_total<S: Scalar>(l_a: S, l_h: S, l_p: S, lambda_h: S, lambda_p: S) -> S {
    l_a + lambda_h * l_h + lambda_p * l_p
}

/// Encoder passes of one sample. Each segment is encoded at most once and
/// back-propagated once with its summed upstream gradient.
struct Graph<'a, S> {
    x: StepInputs<'a, S>,
    neg: Option<Negatives<'a, S>>,
    traces: [Option<MlpTrace<S>>; SEGMENTS],
    grads: [Option<Vec<S>>; SEGMENTS],
}

impl<'a, S: Scalar> Graph<'a, S> {
    fn new(x: StepInputs<'a, S>, neg: Option<Negatives<'a, S>>) -> Self {
        Graph {
            x,
            neg,
            traces: Default::default(),
            grads: Default::default(),
        }
    }

    fn latent(&mut self, enc: &EncoderNet, store: &ParamStore<S>, seg: Segment) -> Result<Vec<S>, ComposeError> {
        let slot = seg.slot();
        if self.traces[slot].is_none() {
            let (a, b) = match (seg, self.neg) {
                (Segment::NegU, Some(Negatives::States { u0, un, .. })) => (u0, un),
                (Segment::NegR, Some(Negatives::States { r0, rt, .. })) => (r0, rt),
                _ => self.x.segment(seg),
            };
            self.traces[slot] = Some(enc.forward(store, a, b)?);
        }
        Ok(self.traces[slot].as_ref().expect("just filled").output().to_vec())
    }

    fn push_grad(&mut self, seg: Segment, scale: S, g: &[S]) {
        let acc = self.grads[seg.slot()].get_or_insert_with(|| vec![S::zero(); g.len()]);
        for (a, &x) in acc.iter_mut().zip(g) {
            *a = *a + scale * x;
        }
    }

    fn backward(self, enc: &EncoderNet, store: &mut ParamStore<S>) -> Result<(), ComposeError> {
        for (trace, grad) in self.traces.iter().zip(&self.grads) {
            if let (Some(t), Some(g)) = (trace, grad) {
                enc.backward(store, t, g)?;
            }
        }
        Ok(())
    }
}

fn vadd<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

/// Evaluates the weighted loss of one sample and accumulates its gradients
/// into the model's store.
pub fn sample_loss<S: Scalar>(
    model: &mut CaseModel<S>,
    x: StepInputs<'_, S>,
    action: usize,
    negatives: Option<Negatives<'_, S>>,
    w: LossWeights<S>,
) -> Result<LossValues<S>, ComposeError> {
    if action >= Action::COUNT {
        return Err(ComposeError::BadAction(action));
    }
    let CaseModel {
        config,
        store,
        encoder,
        policy,
    } = model;
    let mut g = Graph::new(x, negatives);
    let mut out = LossValues::default();
    let zero = S::zero();

    if w.policy != zero {
        let terms = goal_terms(config.variant);
        let mut goal = vec![zero; config.latent_dim];
        for &(sign, seg) in terms {
            let v = g.latent(encoder, store, seg)?;
            for (a, b) in goal.iter_mut().zip(v) {
                *a = if sign > 0 { *a + b } else { *a - b };
            }
        }
        let trace = policy.forward(store, x.ut, &goal)?;
        let (loss, dlogits) = softmax_xent(trace.output(), action)?;
        let scale = w.policy * w.grad_scale;
        let dlogits: Vec<S> = dlogits.into_iter().map(|d| d * scale).collect();
        let dgoal = policy.backward(store, &trace, &dlogits)?;
        for &(sign, seg) in terms {
            g.push_grad(seg, if sign > 0 { S::one() } else { -S::one() }, &dgoal);
        }
        out.policy = loss;
    }

    let need_neg = || negatives.ok_or_else(|| ComposeError::Config("triplet losses need negatives".into()));
    if w.lambda_h != zero {
        need_neg()?;
        let anchor = vadd(&g.latent(encoder, store, Segment::U0Ut)?, &g.latent(encoder, store, Segment::UtUn)?);
        let pos = g.latent(encoder, store, Segment::U0Un)?;
        let neg = match negatives {
            Some(Negatives::Detached { h, .. }) => h.0.clone(),
            _ => g.latent(encoder, store, Segment::NegU)?,
        };
        let (loss, tg) = triplet_margin(&anchor, &pos, &neg, w.margin)?;
        let scale = w.lambda_h * w.grad_scale;
        g.push_grad(Segment::U0Ut, scale, &tg.anchor);
        g.push_grad(Segment::UtUn, scale, &tg.anchor);
        g.push_grad(Segment::U0Un, scale, &tg.positive);
        if let Some(Negatives::States { .. }) = negatives {
            g.push_grad(Segment::NegU, scale, &tg.negative);
        }
        out.h = loss;
    }
    if w.lambda_p != zero {
        need_neg()?;
        let anchor = g.latent(encoder, store, Segment::U0Un)?;
        let pos = g.latent(encoder, store, Segment::R0Rt)?;
        let neg = match negatives {
            Some(Negatives::Detached { p, .. }) => p.0.clone(),
            _ => g.latent(encoder, store, Segment::NegR)?,
        };
        let (loss, tg) = triplet_margin(&anchor, &pos, &neg, w.margin)?;
        let scale = w.lambda_p * w.grad_scale;
        g.push_grad(Segment::U0Un, scale, &tg.anchor);
        g.push_grad(Segment::R0Rt, scale, &tg.positive);
        if let Some(Negatives::States { .. }) = negatives {
            g.push_grad(Segment::NegR, scale, &tg.negative);
        }
        out.p = loss;
    }
    g.backward(encoder, store)?;
    out.total = loss_total(w.policy * out.policy, out.h, out.p, w.lambda_h, w.lambda_p);
    Ok(out)
}

/// `−log π(a | input)` with gradients into both networks through the goal.
pub fn loss_policy<S: Scalar>(model: &mut CaseModel<S>, x: StepInputs<'_, S>, action: usize) -> Result<S, ComposeError> {
    let w = LossWeights::only(S::one(), S::zero(), S::zero(), S::one());
    sample_loss(model, x, action, None, w).map(|v| v.policy)
}

/// Triplet loss pulling `g(U_0,U_t) + g(U_t,U_N)` toward `g(U_0,U_N)`.
pub fn loss_h<S: Scalar>(
    model: &mut CaseModel<S>,
    u0: &SparseVec<S>,
    ut: &SparseVec<S>,
    un: &SparseVec<S>,
    negative: &LatentVec<S>,
    margin: S,
) -> Result<S, ComposeError> {
    let x = StepInputs { u0, ut, un, r0: u0, ri: u0, rt: u0 };
    let w = LossWeights::only(S::zero(), S::one(), S::zero(), margin);
    let neg = Negatives::Detached { h: negative, p: negative };
    sample_loss(model, x, 0, Some(neg), w).map(|v| v.h)
}

/// Triplet loss pulling `g(U_0,U_N)` toward `g(R_0,R_T)`.
pub fn loss_p<S: Scalar>(
    model: &mut CaseModel<S>,
    u0: &SparseVec<S>,
    un: &SparseVec<S>,
    r0: &SparseVec<S>,
    rt: &SparseVec<S>,
    negative: &LatentVec<S>,
    margin: S,
) -> Result<S, ComposeError> {
    let x = StepInputs { u0, ut: u0, un, r0, ri: r0, rt };
    let w = LossWeights::only(S::zero(), S::zero(), S::one(), margin);
    let neg = Negatives::Detached { h: negative, p: negative };
    sample_loss(model, x, 0, Some(neg), w).map(|v| v.p)
}
