//! Symbolic transition function: precondition checks, deterministic effects,
//! seeded execution errors and the closed-loop episode runner.

mod episode;
mod rules;

pub use episode::{run_episode, PlanTrace, Policy};
pub use rules::{applicable, effects, footprint_distance, level_of, reachable, PRECONDITIONS};
pub(crate) use rules::move_with_load;

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{Action, Attribute, ObjectId, RelationEdge, RelationKind, WorldState};
use crate::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    /// Probability that a held object slips out of the hand after an action.
    pub p_drop: f64,
    /// Probability that an applicable action has no effect.
    pub p_fail: f64,
    pub max_steps: usize,
    /// Planar reach in meters, measured to the target's footprint.
    pub reach_radius: f64,
    pub stick_reach_bonus: f64,
    /// Largest footprint extent (meters) the gripper can pick.
    pub grasp_bound: f64,
    /// Footprint gap (meters) under which two objects are Near.
    pub near_threshold: f64,
    /// Objects whose base is at least this high need the robot elevated.
    pub elevated_height: f64,
    /// Forces a drop perturbation on the first applied step at or after this
    /// index on which the robot holds something.
    pub forced_drop: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            p_drop: 0.02,
            p_fail: 0.02,
            max_steps: 50,
            reach_radius: 1.0,
            stick_reach_bonus: 0.6,
            grasp_bound: 0.45,
            near_threshold: 0.4,
            elevated_height: 1.0,
            forced_drop: None,
        }
    }
}

impl SimConfig {
    /// Default geometry with both error probabilities at zero.
    pub fn deterministic() -> Self {
        Self { p_drop: 0.0, p_fail: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.p_drop) || !prob(self.p_fail) {
            return Err(Error::Config("probabilities must lie in [0, 1]".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if !(self.reach_radius > 0.0) || !(self.stick_reach_bonus >= 0.0) || !(self.grasp_bound > 0.0) {
            return Err(Error::Config("reach and grasp distances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Applied,
    NoOpFailure,
    DropPerturbation,
    Rejected,
}

/// Attribute flip recorded in a transition delta.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeChange {
    pub object: ObjectId,
    pub attribute: Attribute,
    pub value: bool,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Delta {
    pub added: Vec<RelationEdge>,
    pub removed: Vec<RelationEdge>,
    pub attributes: Vec<AttributeChange>,
}

impl Delta {
    pub fn between(before: &WorldState, after: &WorldState) -> Delta {
        let added = after.relations.difference(&before.relations).cloned().collect();
        let removed = before.relations.difference(&after.relations).cloned().collect();
        let mut attributes = Vec::new();
        for o in &after.objects {
            let prev = before.object(&o.id);
            for (&a, &v) in &o.attributes {
                if prev.map(|p| p.attr(a)) != Some(v) {
                    attributes.push(AttributeChange { object: o.id.clone(), attribute: a, value: v });
                }
            }
        }
        Delta { added, removed, attributes }
    }

    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.attributes.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvent {
    pub action: Action,
    pub outcome: Outcome,
    /// Whether the action's schema effects took place.
    pub effects: bool,
    pub delta: Delta,
    /// Violated precondition for rejected actions, otherwise a short summary.
    pub note: String,
}

impl TransitionEvent {
    pub fn violation(&self) -> Option<&str> {
        (self.outcome == Outcome::Rejected).then_some(self.note.as_str())
    }
}

/// Which random events happen on one transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Draws {
    pub fail: bool,
    pub drop: bool,
}

/// Stochastic transition. Rejected actions return the input state and consume
/// no randomness; applied actions consume exactly two uniform draws.
pub fn apply(state: &WorldState, action: &Action, cfg: &SimConfig, rng: &mut Rng) -> (WorldState, TransitionEvent) {
    if let Err(reason) = applicable(state, action, cfg) {
        return (state.clone(), rejected(action, reason));
    }
    let fail = rng.random::<f64>() < cfg.p_fail;
    let drop = rng.random::<f64>() < cfg.p_drop;
    apply_with(state, action, cfg, Draws { fail, drop })
}

/// Transition with the random events fixed by the caller.
pub fn apply_with(state: &WorldState, action: &Action, cfg: &SimConfig, draws: Draws) -> (WorldState, TransitionEvent) {
    if let Err(reason) = applicable(state, action, cfg) {
        return (state.clone(), rejected(action, reason));
    }
    let mut next = state.clone();
    if !draws.fail {
        effects(&mut next, action, cfg);
    }
    let mut outcome = if draws.fail { Outcome::NoOpFailure } else { Outcome::Applied };
    if draws.drop && next.robot.grabbed.is_some() {
        release_to_floor(&mut next);
        outcome = Outcome::DropPerturbation;
    }
    refresh_derived(&mut next, cfg);
    let delta = Delta::between(state, &next);
    let note = match outcome {
        Outcome::Applied => "applied".to_string(),
        Outcome::NoOpFailure => "execution failed".to_string(),
        _ => "held object dropped".to_string(),
    };
    let event = TransitionEvent { action: action.clone(), outcome, effects: !draws.fail, delta, note };
    (next, event)
}

fn rejected(action: &Action, reason: &str) -> TransitionEvent {
    TransitionEvent {
        action: action.clone(),
        outcome: Outcome::Rejected,
        effects: false,
        delta: Delta::default(),
        note: reason.to_string(),
    }
}

/// The id of the floor object, if the scene has one.
pub fn floor_of(state: &WorldState) -> Option<ObjectId> {
    state.objects.iter().find(|o| o.class == "floor").map(|o| o.id.clone())
}

/// Releases the held object onto the floor at the robot's position.
pub fn release_to_floor(state: &mut WorldState) {
    let Some(g) = state.robot.grabbed.take() else { return };
    let floor = floor_of(state);
    let floor_top = floor.as_ref().and_then(|f| state.object(f)).map(|f| f.top()).unwrap_or(0.0);
    if let Some(o) = state.object_mut(&g) {
        o.set_attr(Attribute::Grabbed, false);
    }
    let [x, y] = state.robot.position;
    rules::move_with_load(state, &g, x, y, floor_top);
    if let Some(f) = floor {
        state.relations.insert(RelationEdge::new(RelationKind::OnTop, g, f));
    }
}

/// Recomputes derived state: Near edges from geometry and the Inside flag from
/// Inside edges.
pub fn refresh_derived(state: &mut WorldState, cfg: &SimConfig) {
    state.relations.retain(|e| e.kind != RelationKind::Near);
    let floor = floor_of(state);
    let n = state.objects.len();
    let mut near = BTreeSet::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (&state.objects[i], &state.objects[j]);
            if Some(&a.id) == floor.as_ref() || Some(&b.id) == floor.as_ref() {
                continue;
            }
            if rules::footprint_gap(a, b) <= cfg.near_threshold {
                near.insert(RelationEdge::new(RelationKind::Near, a.id.clone(), b.id.clone()));
                near.insert(RelationEdge::new(RelationKind::Near, b.id.clone(), a.id.clone()));
            }
        }
    }
    state.relations.extend(near);
    let inside: BTreeSet<ObjectId> =
        state.relations.iter().filter(|e| e.kind == RelationKind::Inside).map(|e| e.src.clone()).collect();
    for o in &mut state.objects {
        let v = inside.contains(&o.id);
        o.set_attr(Attribute::Inside, v);
    }
}

#[cfg(test)]
mod tests;
