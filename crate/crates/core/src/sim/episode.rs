use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{apply_with, Draws, Outcome, SimConfig, TransitionEvent};
use crate::error::Result;
use crate::rng_from_seed;
use crate::world::{goal_satisfied, Action, Goal, WorldState};

/// Anything that maps (state, goal, history) to the next action.
pub trait Policy {
    fn act(&mut self, state: &WorldState, goal: &Goal, history: &[Action]) -> Result<Action>;
}

impl<F> Policy for F
where
    F: FnMut(&WorldState, &Goal, &[Action]) -> Result<Action>,
{
    fn act(&mut self, state: &WorldState, goal: &Goal, history: &[Action]) -> Result<Action> {
        self(state, goal, history)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanTrace {
    pub initial: WorldState,
    pub goal: Goal,
    pub events: Vec<TransitionEvent>,
    #[serde(rename = "final")]
    pub final_state: WorldState,
    pub success: bool,
    pub steps: usize,
    /// Set when the policy failed or emitted a malformed action.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

/// Closed-loop execution until the goal holds or `cfg.max_steps` actions
/// have been taken. Errors only when the goal references unknown objects.
pub fn run_episode(policy: &mut dyn Policy, s0: &WorldState, goal: &Goal, cfg: &SimConfig) -> Result<PlanTrace> {
    let mut rng = rng_from_seed(cfg.seed);
    let mut state = s0.clone();
    let mut events = Vec::new();
    let mut history: Vec<Action> = Vec::new();
    let mut aborted = None;
    let mut success = goal_satisfied(&state, goal)?;
    let mut forced_pending = cfg.forced_drop;
    while !success && events.len() < cfg.max_steps {
        let action = match policy.act(&state, goal, &history) {
            Ok(a) => a,
            Err(e) => {
                aborted = Some(e.to_string());
                break;
            }
        };
        let malformed = !state.contains(action.o1()) || action.o2().is_some_and(|o| !state.contains(o));
        if malformed {
            events.push(TransitionEvent {
                action,
                outcome: Outcome::Rejected,
                effects: false,
                delta: Default::default(),
                note: "unknown-object".to_string(),
            });
            aborted = Some("policy referenced an object absent from the scene".to_string());
            break;
        }
        let (next, event) = if super::applicable(&state, &action, cfg).is_ok() {
            let fail = rng.random::<f64>() < cfg.p_fail;
            let mut drop = rng.random::<f64>() < cfg.p_drop;
            if let Some(k) = forced_pending {
                if events.len() >= k {
                    let mut probe = state.clone();
                    if !fail {
                        super::effects(&mut probe, &action, cfg);
                    }
                    if probe.robot.grabbed.is_some() {
                        drop = true;
                        forced_pending = None;
                    }
                }
            }
            apply_with(&state, &action, cfg, Draws { fail, drop })
        } else {
            apply_with(&state, &action, cfg, Draws::default())
        };
        history.push(action);
        events.push(event);
        state = next;
        success = goal_satisfied(&state, goal)?;
    }
    let steps = events.len();
    Ok(PlanTrace { initial: s0.clone(), goal: goal.clone(), events, final_state: state, success, steps, aborted })
}
