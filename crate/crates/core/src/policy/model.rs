use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::features::{action_width, encode_action, ActionTarget, GoalFeatures, SceneFeatures, METRIC_WIDTH};
use super::PolicyConfig;
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::nn::{bce, Gru, Linear, Lstm, Mlp, ParamId, ParamStore, Tape, Tensor, Var};
use crate::world::{Action, Goal, InteractionType, ObjectId, WorldState, ATTRIBUTE_WIDTH};
use crate::{rng_from_seed, Rng};

/// Scoring head for o1 or o2.
#[derive(Clone, Debug, PartialEq)]
pub enum ObjectHead {
    /// One shared network applied to every object row.
    Factored(Mlp),
    /// One linear map to a fixed list of class slots.
    Slots(Linear),
}

/// Every trainable piece of the network. Absent parts are switched off by
/// the ablation flags.
#[derive(Clone, Debug, PartialEq)]
pub struct Layers {
    /// `r⁰ = tanh(W_r [l; e] + b_r)`.
    pub node_init: Linear,
    /// `messages[k][j]`: H×H weight of relation `j` in round `k`.
    pub messages: Vec<[ParamId; 4]>,
    pub gru: Option<Gru>,
    pub metric: Option<Mlp>,
    pub history: Option<Lstm>,
    /// Query `W_g [g_obj; η] + b_g`; object logits are `s̃ · query / √|s̃|`.
    pub attention: Option<Linear>,
    pub interaction: Mlp,
    pub alpha: ObjectHead,
    pub beta: ObjectHead,
}

/// Head values for one decision step.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadOutputs {
    /// Softmax over interaction types.
    pub interaction: Vec<f64>,
    /// Per-object o1 likelihood.
    pub alpha: Vec<f64>,
    /// Per-object o2 likelihood, present when the decoded interaction takes
    /// two arguments.
    pub beta: Option<Vec<f64>>,
}

/// Intermediate encodings of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedState {
    pub nodes: Tensor,
    pub metric: Option<Tensor>,
    pub fused: Tensor,
    pub attention: Vec<f64>,
    pub omega: Vec<f64>,
    pub history: Vec<f64>,
    pub goal_relations: Vec<f64>,
    pub goal_objects: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Inference {
    pub action: Action,
    pub heads: HeadOutputs,
    pub encoded: EncodedState,
}

/// One supervised decision: scene, demonstrated action and its encoding as
/// history input for the next step.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainStep {
    pub scene: SceneFeatures,
    pub target: ActionTarget,
    pub action: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSequence {
    pub goal: GoalFeatures,
    pub steps: Vec<TrainStep>,
}

impl TrainSequence {
    pub fn build(states: &[WorldState], actions: &[Action], goal: &Goal, table: &EmbeddingTable) -> Result<Self> {
        if states.len() != actions.len() {
            return Err(Error::Config(format!("{} states for {} actions", states.len(), actions.len())));
        }
        let steps = states
            .iter()
            .zip(actions)
            .map(|(s, a)| {
                let scene = SceneFeatures::from_state(s, table)?;
                let target = ActionTarget::resolve(a, &scene)?;
                Ok(TrainStep { scene, target, action: encode_action(a, table) })
            })
            .collect::<Result<_>>()?;
        Ok(Self { goal: GoalFeatures::from_goal(goal, table), steps })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TangoModel {
    pub config: PolicyConfig,
    pub params: ParamStore,
    pub layers: Layers,
}

struct StepVars {
    nodes: Var,
    metric: Option<Var>,
    fused: Var,
    attention: Var,
    omega: Var,
    context: Var,
}

fn one_hot(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

/// Index of the largest value; ties go to the smallest id.
pub fn argmax_by_id(values: &[f64], ids: &[ObjectId]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] || (values[i] == values[best] && ids[i] < ids[best]) {
            best = i;
        }
    }
    best
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

/// Turns head values into an action. The second argument is read only for
/// two-argument interactions.
pub fn decode(heads: &HeadOutputs, ids: &[ObjectId]) -> Result<Action> {
    if ids.is_empty() {
        return Err(Error::EmptyScene);
    }
    let interaction = InteractionType::ALL[argmax(&heads.interaction)];
    let o1 = ids[argmax_by_id(&heads.alpha, ids)].clone();
    let o2 = if interaction.arity() == 2 {
        let beta = heads.beta.as_ref().ok_or(Error::Config("two-argument interaction without o2 scores".into()))?;
        Some(ids[argmax_by_id(beta, ids)].clone())
    } else {
        None
    };
    Action::new(interaction, o1, o2)
}

/// `BCE(interaction, one-hot I) + BCE(α, one-hot o1) [+ BCE(β, one-hot o2)]`.
pub fn imitation_loss(heads: &HeadOutputs, target: &ActionTarget) -> Result<f64> {
    let n = heads.alpha.len();
    if target.o1 >= n || target.o2.is_some_and(|k| k >= n) || target.interaction >= heads.interaction.len() {
        return Err(Error::Config("target index outside the head outputs".into()));
    }
    let mut loss = bce(&heads.interaction, &one_hot(heads.interaction.len(), target.interaction))?;
    loss += bce(&heads.alpha, &one_hot(n, target.o1))?;
    if let Some(k) = target.o2 {
        let beta = heads.beta.as_ref().ok_or(Error::Config("o2 target without o2 scores".into()))?;
        loss += bce(beta, &one_hot(n, k))?;
    }
    Ok(loss)
}

impl TangoModel {
    pub fn new(config: PolicyConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_from_seed(seed);
        let mut params = ParamStore::new();
        let layers = Self::build(&config, &mut params, &mut rng);
        Ok(Self { config, params, layers })
    }

    fn build(c: &PolicyConfig, store: &mut ParamStore, rng: &mut Rng) -> Layers {
        let (h, q, a) = (c.hidden, c.embed_dim, &c.ablations);
        let node_init = Linear::new(store, "ggcn.init", ATTRIBUTE_WIDTH + q, h, rng);
        let (messages, gru) = if a.no_ggcn {
            (Vec::new(), None)
        } else {
            let messages = (0..c.message_steps)
                .map(|k| core::array::from_fn(|j| store.uniform(&format!("ggcn.msg.{k}.{j}"), h, h, h, rng)))
                .collect();
            (messages, Some(Gru::new(store, "ggcn.gru", h, h, rng)))
        };
        let metric = (!a.no_metric).then(|| {
            let mut widths = vec![METRIC_WIDTH];
            widths.extend(core::iter::repeat_n(h, c.metric_layers));
            Mlp::new(store, "metric", &widths, c.prelu_slope, c.learnable_slope, true, rng)
        });
        let history = (!a.no_history).then(|| Lstm::new(store, "history", action_width(q), h, rng));
        let s = c.fused_width();
        let attention = (!a.no_attention).then(|| Linear::new(store, "attention", q + h, s, rng));
        let ctx = c.context_width();
        let n_int = InteractionType::COUNT;
        let interaction = Mlp::new(store, "head.interaction", &[ctx, h, n_int], c.prelu_slope, c.learnable_slope, false, rng);
        let mut object_head = |name: &str, extra: usize, rng: &mut Rng| {
            if a.fixed_object_decoder {
                ObjectHead::Slots(Linear::new(store, name, ctx + n_int, c.object_slots.len() + 1, rng))
            } else {
                let widths = [ctx + q + n_int + extra, h, 1];
                ObjectHead::Factored(Mlp::new(store, name, &widths, c.prelu_slope, c.learnable_slope, false, rng))
            }
        };
        let alpha = object_head("head.alpha", 0, rng);
        let beta = object_head("head.beta", 1, rng);
        Layers { node_init, messages, gru, metric, history, attention, interaction, alpha, beta }
    }

    fn check_inputs(&self, scene: &SceneFeatures, goal: &GoalFeatures) -> Result<()> {
        if scene.is_empty() {
            return Err(Error::EmptyScene);
        }
        let q = self.config.embed_dim;
        if scene.embeddings.cols() != q || goal.relations.len() != q || goal.objects.len() != q {
            return Err(Error::Shape {
                op: "embedding width",
                left: scene.embeddings.shape(),
                right: [1, self.config.embed_dim],
            });
        }
        Ok(())
    }

    /// Embedding vectors have unit norm; they enter the network multiplied
    /// by `√q` so each coordinate is of order one.
    pub fn embed_gain(&self) -> f64 {
        crate::math::sqrt(self.config.embed_dim as f64)
    }

    /// Zero history state `(η, c)`.
    pub fn history_init(&self, tape: &mut Tape) -> (Var, Var) {
        let h = self.config.hidden;
        (tape.input(Tensor::zeros(1, h)), tape.input(Tensor::zeros(1, h)))
    }

    /// Folds one encoded past action into the history state.
    pub fn history_step(&self, tape: &mut Tape, state: (Var, Var), action: &[f64]) -> Result<(Var, Var)> {
        match &self.layers.history {
            None => Ok(state),
            Some(lstm) => {
                let gain = self.embed_gain();
                let scaled = action
                    .iter()
                    .enumerate()
                    .map(|(i, v)| if i < InteractionType::COUNT { *v } else { v * gain })
                    .collect();
                let x = tape.input(Tensor::row_vector(scaled));
                lstm.step(tape, state.0, state.1, x)
            }
        }
    }

    fn slot_index(&self, scene: &SceneFeatures) -> Vec<usize> {
        let k = self.config.object_slots.len();
        scene.classes.iter().map(|c| self.config.object_slots.iter().position(|s| s == c).unwrap_or(k)).collect()
    }

    fn encode(&self, t: &mut Tape, scene: &SceneFeatures, goal: &GoalFeatures, eta: Var) -> Result<StepVars> {
        let n = scene.len();
        let a = &self.config.ablations;
        let l = t.input(scene.attributes.clone());
        let e = t.input(scene.embeddings.map(|v| v * self.embed_gain()));
        let le = t.concat(&[l, e])?;
        let pre = self.layers.node_init.forward(t, le)?;
        let mut r = t.tanh(pre);
        if let Some(gru) = &self.layers.gru {
            for round in &self.layers.messages {
                let mut x: Option<Var> = None;
                for (j, w) in round.iter().enumerate() {
                    if scene.neighbors[j].iter().all(Vec::is_empty) {
                        continue;
                    }
                    let agg = t.aggregate(r, &scene.neighbors[j])?;
                    let wv = t.param(*w);
                    let msg = t.matmul_t(agg, wv)?;
                    x = Some(match x {
                        None => msg,
                        Some(acc) => t.add(acc, msg)?,
                    });
                }
                let x = match x {
                    Some(x) => x,
                    None => t.input(Tensor::zeros(n, self.config.hidden)),
                };
                r = gru.step(t, r, x)?;
            }
        }
        let metric = match &self.layers.metric {
            Some(mlp) => {
                let mi = t.input(scene.metric.clone());
                Some(mlp.forward(t, mi)?)
            }
            None => None,
        };
        let fused = match metric {
            Some(m) => t.concat(&[r, m])?,
            None => r,
        };
        let (attention, omega) = match &self.layers.attention {
            Some(att) if !a.no_attention => {
                let gobj = t.input(Tensor::row_vector(goal.objects.iter().map(|v| v * self.embed_gain()).collect()));
                let ge = t.concat(&[gobj, eta])?;
                let query = att.forward(t, ge)?;
                let raw = t.matmul_t(fused, query)?;
                let logits = t.scale(raw, 1.0 / crate::math::sqrt(self.config.fused_width() as f64));
                let w = t.softmax(logits);
                let omega = t.weighted_sum(w, fused)?;
                (w, omega)
            }
            _ => (t.input(Tensor::filled(n, 1, 1.0 / n as f64)), t.mean_rows(fused)),
        };
        let grel = t.input(Tensor::row_vector(goal.relations.iter().map(|v| v * self.embed_gain()).collect()));
        let context = t.concat(&[omega, grel, eta])?;
        Ok(StepVars { nodes: r, metric, fused, attention, omega, context })
    }

    fn interaction_probs(&self, t: &mut Tape, context: Var) -> Result<Var> {
        let logits = self.layers.interaction.forward(t, context)?;
        Ok(t.softmax(logits))
    }

    /// N×1 object likelihoods of `head` given the interaction one-hot and,
    /// for the o2 head, the per-object o1 values.
    fn object_probs(
        &self,
        t: &mut Tape,
        head: &ObjectHead,
        context: Var,
        scene: &SceneFeatures,
        interaction: &[f64],
        alpha_in: Option<Var>,
    ) -> Result<Var> {
        let n = scene.len();
        let ibar = t.input(Tensor::row_vector(interaction.to_vec()));
        let logits = match head {
            ObjectHead::Factored(mlp) => {
                let cb = t.broadcast(context, n)?;
                let e = t.input(scene.embeddings.map(|v| v * self.embed_gain()));
                let ib = t.broadcast(ibar, n)?;
                let mut parts = vec![cb, e, ib];
                parts.extend(alpha_in);
                let x = t.concat(&parts)?;
                mlp.forward(t, x)?
            }
            ObjectHead::Slots(lin) => {
                let x = t.concat(&[context, ibar])?;
                let slots = lin.forward(t, x)?;
                t.gather(slots, &self.slot_index(scene))?
            }
        };
        Ok(t.sigmoid(logits))
    }

    /// History state after folding in `history` from zero.
    fn run_history(&self, t: &mut Tape, history: &[Vec<f64>]) -> Result<Var> {
        let mut state = self.history_init(t);
        if self.layers.history.is_some() {
            for a in history {
                state = self.history_step(t, state, a)?;
            }
        }
        Ok(state.0)
    }

    /// Full forward pass and decode. `history` holds encoded past actions,
    /// oldest first.
    pub fn infer(&self, scene: &SceneFeatures, goal: &GoalFeatures, history: &[Vec<f64>]) -> Result<Inference> {
        self.check_inputs(scene, goal)?;
        let mut t = Tape::new(&self.params);
        let eta = self.run_history(&mut t, history)?;
        let v = self.encode(&mut t, scene, goal, eta)?;
        let pi = self.interaction_probs(&mut t, v.context)?;
        let interaction = t.value(pi).data().to_vec();
        let k = argmax(&interaction);
        let ibar = one_hot(interaction.len(), k);
        let alpha_v = self.object_probs(&mut t, &self.layers.alpha, v.context, scene, &ibar, None)?;
        let alpha = t.value(alpha_v).data().to_vec();
        let beta = if InteractionType::ALL[k].arity() == 2 {
            let b = self.object_probs(&mut t, &self.layers.beta, v.context, scene, &ibar, Some(alpha_v))?;
            Some(t.value(b).data().to_vec())
        } else {
            None
        };
        let heads = HeadOutputs { interaction, alpha, beta };
        if heads.interaction.iter().chain(&heads.alpha).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("policy heads"));
        }
        let action = decode(&heads, &scene.ids)?;
        let encoded = EncodedState {
            nodes: t.value(v.nodes).clone(),
            metric: v.metric.map(|m| t.value(m).clone()),
            fused: t.value(v.fused).clone(),
            attention: t.value(v.attention).data().to_vec(),
            omega: t.value(v.omega).data().to_vec(),
            history: t.value(eta).data().to_vec(),
            goal_relations: goal.relations.clone(),
            goal_objects: goal.objects.clone(),
        };
        Ok(Inference { action, heads, encoded })
    }

    /// Next action for `state` after `history` (oldest first).
    pub fn predict(&self, state: &WorldState, goal: &Goal, history: &[Action], table: &EmbeddingTable) -> Result<Action> {
        let scene = SceneFeatures::from_state(state, table)?;
        let g = GoalFeatures::from_goal(goal, table);
        let hist: Vec<Vec<f64>> = history.iter().map(|a| encode_action(a, table)).collect();
        Ok(self.infer(&scene, &g, &hist)?.action)
    }

    /// Teacher-forced head values for one step, for checking the tape loss
    /// against [`imitation_loss`].
    pub fn teacher_heads(&self, scene: &SceneFeatures, goal: &GoalFeatures, history: &[Vec<f64>], target: &ActionTarget) -> Result<HeadOutputs> {
        self.check_inputs(scene, goal)?;
        let mut t = Tape::new(&self.params);
        let eta = self.run_history(&mut t, history)?;
        let (pi, alpha, beta) = self.step_heads(&mut t, scene, goal, eta, target)?;
        Ok(HeadOutputs {
            interaction: t.value(pi).data().to_vec(),
            alpha: t.value(alpha).data().to_vec(),
            beta: beta.map(|b| t.value(b).data().to_vec()),
        })
    }

    fn step_heads(
        &self,
        t: &mut Tape,
        scene: &SceneFeatures,
        goal: &GoalFeatures,
        eta: Var,
        target: &ActionTarget,
    ) -> Result<(Var, Var, Option<Var>)> {
        let v = self.encode(t, scene, goal, eta)?;
        let pi = self.interaction_probs(t, v.context)?;
        let ibar = one_hot(InteractionType::COUNT, target.interaction);
        let alpha = self.object_probs(t, &self.layers.alpha, v.context, scene, &ibar, None)?;
        let beta = match target.o2 {
            Some(_) => {
                let demo = t.input(Tensor::from_vec(scene.len(), 1, one_hot(scene.len(), target.o1))?);
                Some(self.object_probs(t, &self.layers.beta, v.context, scene, &ibar, Some(demo))?)
            }
            None => None,
        };
        Ok((pi, alpha, beta))
    }

    /// Mean teacher-forced imitation loss over a demonstration, recorded on
    /// `tape` so one backward pass covers every step.
    pub fn sequence_loss(&self, tape: &mut Tape, seq: &TrainSequence) -> Result<Var> {
        if seq.steps.is_empty() {
            return Err(Error::Config("empty demonstration".into()));
        }
        let mut state = self.history_init(tape);
        let mut losses = Vec::with_capacity(seq.steps.len());
        for (i, step) in seq.steps.iter().enumerate() {
            self.check_inputs(&step.scene, &seq.goal)?;
            if i > 0 {
                state = self.history_step(tape, state, &seq.steps[i - 1].action)?;
            }
            let (pi, alpha, beta) = self.step_heads(tape, &step.scene, &seq.goal, state.0, &step.target)?;
            let n = step.scene.len();
            let mut terms = vec![
                tape.bce(pi, &one_hot(InteractionType::COUNT, step.target.interaction))?,
                tape.bce(alpha, &one_hot(n, step.target.o1))?,
            ];
            if let (Some(b), Some(k)) = (beta, step.target.o2) {
                terms.push(tape.bce(b, &one_hot(n, k))?);
            }
            losses.push(tape.sum(&terms)?);
        }
        let total = tape.sum(&losses)?;
        Ok(tape.scale(total, 1.0 / seq.steps.len() as f64))
    }

    /// Forward-only value of [`Self::sequence_loss`].
    pub fn sequence_loss_value(&self, seq: &TrainSequence) -> Result<f64> {
        let mut tape = Tape::new(&self.params);
        let out = self.sequence_loss(&mut tape, seq)?;
        Ok(tape.value(out).data()[0])
    }

    /// Predicted action at every step of `seq`, with the demonstrated
    /// actions as history.
    pub fn teacher_forced(&self, seq: &TrainSequence) -> Result<Vec<Action>> {
        let mut history: Vec<Vec<f64>> = Vec::with_capacity(seq.steps.len());
        let mut out = Vec::with_capacity(seq.steps.len());
        for step in &seq.steps {
            out.push(self.infer(&step.scene, &seq.goal, &history)?.action);
            history.push(step.action.clone());
        }
        Ok(out)
    }

    /// Loss value and parameter gradients for one demonstration.
    pub fn loss_and_grad(&self, seq: &TrainSequence) -> Result<(f64, crate::nn::Gradients)> {
        self.loss_and_grad_with(&self.params, seq)
    }

    /// Like [`Self::loss_and_grad`] but reading parameter values from
    /// `params`, which must share this model's layout.
    pub fn loss_and_grad_with(&self, params: &ParamStore, seq: &TrainSequence) -> Result<(f64, crate::nn::Gradients)> {
        let mut tape = Tape::new(params);
        let out = self.sequence_loss(&mut tape, seq)?;
        let loss = tape.value(out).data()[0];
        if !loss.is_finite() {
            return Err(Error::NonFinite("imitation loss"));
        }
        Ok((loss, tape.backward(out)?))
    }
}

/// Drives [`TangoModel::predict`] from the simulator's episode loop.
pub struct TangoAgent<'a> {
    pub model: &'a TangoModel,
    pub table: &'a EmbeddingTable,
}

impl crate::sim::Policy for TangoAgent<'_> {
    fn act(&mut self, state: &WorldState, goal: &Goal, history: &[Action]) -> Result<Action> {
        self.model.predict(state, goal, history, self.table)
    }
}
