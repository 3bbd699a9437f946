//! Demonstration corpora: the scripted expert, replay validation,
//! augmentation, grouped splits and generalization test sets.

mod augment;
mod expert;
mod genset;

pub use augment::{augment, jitter_scene, AugmentReport};
pub use expert::{expert_demo, generate_corpus, ScriptedExpert};
pub use genset::{episode_starts, make_generalization_set, most_used_tools, EvalCase, Strategy};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{apply_with, Draws, Outcome, SimConfig, TransitionEvent};
use crate::world::{goal_satisfied, Action, Goal, WorldState};
use crate::{derive_seed, rng_from_seed};

/// Smallest corpus [`split`] accepts.
pub const MIN_SPLIT: usize = 10;

fn applied() -> Outcome {
    Outcome::Applied
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_applied(o: &Outcome) -> bool {
    *o == Outcome::Applied
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoStep {
    /// State before `action`.
    pub state: WorldState,
    pub action: Action,
    /// Recorded execution outcome; anything but `applied` marks an injected
    /// execution error that replay reproduces.
    #[serde(default = "applied", skip_serializing_if = "is_applied")]
    pub outcome: Outcome,
    /// The action itself had no effect. Only needed to tell a failed step
    /// that also dropped the held object from a plain drop.
    #[serde(default, skip_serializing_if = "is_false")]
    pub failed: bool,
}

impl DemoStep {
    pub fn planned(&self) -> PlanStep {
        PlanStep { action: self.action.clone(), outcome: self.outcome, failed: self.failed }
    }
}

/// An action with the outcome it had when it was recorded.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanStep {
    pub action: Action,
    pub outcome: Outcome,
    pub failed: bool,
}

impl PlanStep {
    pub fn from_event(e: &TransitionEvent) -> Self {
        PlanStep { action: e.action.clone(), outcome: e.outcome, failed: !e.effects && e.outcome != Outcome::Rejected }
    }

    pub fn draws(&self) -> Draws {
        draws_for(self.outcome, self.failed)
    }

    pub fn into_step(self, state: WorldState) -> DemoStep {
        DemoStep { state, action: self.action, outcome: self.outcome, failed: self.failed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub id: String,
    pub scene_id: String,
    pub goal_id: String,
    pub goal: Goal,
    pub initial: WorldState,
    pub steps: Vec<DemoStep>,
    pub teacher: String,
}

impl Demonstration {
    pub fn actions(&self) -> Vec<Action> {
        self.steps.iter().map(|s| s.action.clone()).collect()
    }

    pub fn states(&self) -> Vec<WorldState> {
        self.steps.iter().map(|s| s.state.clone()).collect()
    }

    /// Grouping key for splits.
    pub fn group(&self) -> (String, String) {
        (self.scene_id.clone(), self.goal_id.clone())
    }

    pub fn perturbed(&self) -> bool {
        self.steps.iter().any(|s| s.outcome != Outcome::Applied)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub domain: String,
    #[serde(default)]
    pub notes: Vec<String>,
    pub demos: Vec<Demonstration>,
}

impl Corpus {
    pub fn new(domain: &str, demos: Vec<Demonstration>) -> Self {
        Self { domain: domain.to_string(), notes: Vec::new(), demos }
    }

    pub fn len(&self) -> usize {
        self.demos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demos.is_empty()
    }

    /// Replays every demonstration, failing on the first mismatch.
    pub fn validate(&self) -> Result<()> {
        let cfg = SimConfig::deterministic();
        self.demos.iter().try_for_each(|d| replay(d, &cfg).map(|_| ()))
    }

    /// Object classes appearing in any state of the corpus.
    pub fn classes(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for d in &self.demos {
            for s in core::iter::once(&d.initial).chain(d.steps.iter().map(|s| &s.state)) {
                out.extend(s.objects.iter().map(|o| o.class.clone()));
            }
        }
        out
    }
}

/// Random events that reproduce a recorded outcome. `failed` marks a drop
/// that happened on a step whose action had no effect.
pub fn draws_for(outcome: Outcome, failed: bool) -> Draws {
    Draws { fail: failed || outcome == Outcome::NoOpFailure, drop: outcome == Outcome::DropPerturbation }
}

/// Replays the actions from `s0` with the recorded outcomes and returns the
/// visited states (before each action) and the final state.
pub fn replay_actions(s0: &WorldState, steps: &[PlanStep], goal: &Goal, cfg: &SimConfig) -> Result<(Vec<WorldState>, WorldState)> {
    let mut state = s0.clone();
    let mut states = Vec::with_capacity(steps.len());
    for (j, step) in steps.iter().enumerate() {
        let (action, outcome) = (&step.action, &step.outcome);
        let mismatch = |reason: String| Error::ReplayMismatch { demo: String::new(), step: j, reason };
        if *outcome == Outcome::Rejected {
            return Err(mismatch("recorded step was rejected".into()));
        }
        let (next, event) = apply_with(&state, action, cfg, step.draws());
        if let Some(v) = event.violation() {
            return Err(mismatch(format!("{action} violates {v}")));
        }
        if event.outcome != *outcome {
            return Err(mismatch(format!("expected {outcome:?}, got {:?}", event.outcome)));
        }
        states.push(state);
        state = next;
    }
    if !goal_satisfied(&state, goal)? {
        return Err(Error::ReplayMismatch { demo: String::new(), step: steps.len(), reason: "goal not satisfied".into() });
    }
    Ok((states, state))
}

/// Checks a demonstration: actions replay from `initial`, every recorded
/// state is reproduced exactly and the goal holds at the end.
pub fn replay(demo: &Demonstration, cfg: &SimConfig) -> Result<WorldState> {
    let named = |e: Error| match e {
        Error::ReplayMismatch { step, reason, .. } => Error::ReplayMismatch { demo: demo.id.clone(), step, reason },
        other => other,
    };
    if demo.steps.is_empty() {
        return Err(named(Error::ReplayMismatch { demo: String::new(), step: 0, reason: "no steps".into() }));
    }
    let plan: Vec<PlanStep> = demo.steps.iter().map(DemoStep::planned).collect();
    let (states, last) = replay_actions(&demo.initial, &plan, &demo.goal, cfg).map_err(named)?;
    for (j, (got, step)) in states.iter().zip(&demo.steps).enumerate() {
        if got != &step.state {
            return Err(named(Error::ReplayMismatch { demo: String::new(), step: j, reason: "recorded state differs".into() }));
        }
    }
    Ok(last)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Corpus,
    pub val: Corpus,
    pub test: Corpus,
}

fn round_half_up(x: f64) -> usize {
    libm::floor(x + 0.5) as usize
}

/// Picks whole groups (in shuffled order) until `target` members are taken.
fn take_groups(groups: &[Vec<usize>], target: usize) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let mut taken = BTreeSet::new();
    let mut rest = BTreeSet::new();
    for g in groups {
        if taken.len() + g.len() <= target {
            taken.extend(g.iter().copied());
        } else {
            rest.extend(g.iter().copied());
        }
    }
    (taken, rest)
}

fn shuffled_groups(corpus: &Corpus, members: &BTreeSet<usize>, seed: u64) -> Vec<Vec<usize>> {
    let mut by_key: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for &i in members {
        by_key.entry(corpus.demos[i].group()).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = by_key.into_values().collect();
    let mut rng = rng_from_seed(seed);
    use rand::seq::SliceRandom;
    groups.shuffle(&mut rng);
    groups
}

/// 75/25 train/test by scene-goal group, then 10% of train as validation.
/// Partitions keep corpus order.
pub fn split(corpus: &Corpus, seed: u64) -> Result<Split> {
    let n = corpus.len();
    if n < MIN_SPLIT {
        return Err(Error::CorpusTooSmall { len: n, min: MIN_SPLIT });
    }
    let all: BTreeSet<usize> = (0..n).collect();
    let groups = shuffled_groups(corpus, &all, derive_seed(seed, 0));
    let (test, train_all) = take_groups(&groups, round_half_up(n as f64 * 0.25));
    let train_groups = shuffled_groups(corpus, &train_all, derive_seed(seed, 1));
    let (val, train) = take_groups(&train_groups, round_half_up(train_all.len() as f64 * 0.1));
    let pick = |set: &BTreeSet<usize>, tag: &str| {
        let mut c = Corpus::new(&corpus.domain, set.iter().map(|&i| corpus.demos[i].clone()).collect());
        c.notes = corpus.notes.clone();
        c.notes.push(format!("{tag} split, seed {seed}"));
        c
    };
    Ok(Split { train: pick(&train, "train"), val: pick(&val, "val"), test: pick(&test, "test") })
}

#[cfg(test)]
mod tests;
