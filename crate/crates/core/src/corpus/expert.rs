use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::Rng as _;

use super::{replay_actions, Corpus, Demonstration, PlanStep};
use crate::domain::{self, MicroHome};
use crate::error::{Error, Result};
use crate::sim::{level_of, reachable, run_episode, Policy, SimConfig};
use crate::world::{
    Action, Attribute, Capability, Constraint, Goal, InteractionType, ObjectId, RelationKind, WorldState,
};
use crate::{derive_seed, rng_from_seed};

use InteractionType::*;

/// Hand-written procedures that read the goal constraints and the current
/// state. The robot walks to an object before acting on it unless the
/// previous action already involved that object.
#[derive(Clone, Debug)]
pub struct ScriptedExpert {
    pub cfg: SimConfig,
}

impl Default for ScriptedExpert {
    fn default() -> Self {
        Self { cfg: SimConfig::deterministic() }
    }
}

struct Ctx<'a> {
    s: &'a WorldState,
    last: Option<&'a Action>,
    cfg: &'a SimConfig,
}

fn unachievable(goal: &Goal, reason: &str) -> Error {
    Error::Unachievable { goal: goal.text.clone(), reason: reason.to_string() }
}

impl Ctx<'_> {
    fn has(&self, id: &ObjectId, tag: Capability) -> bool {
        self.s.class_of(id).is_some_and(|c| c.has(tag))
    }

    fn held(&self) -> Option<&ObjectId> {
        self.s.robot.grabbed.as_ref()
    }

    fn elevated(&self, id: &ObjectId) -> bool {
        self.s.object(id).is_some_and(|o| level_of(o, self.cfg) > 0)
    }

    /// Climbable object the robot stands on.
    fn standing_on(&self) -> Option<ObjectId> {
        let p = self.s.robot.position;
        self.s
            .objects
            .iter()
            .filter(|o| self.has(&o.id, Capability::Climbable))
            .find(|o| crate::sim::footprint_distance(p, o) == 0.0)
            .map(|o| o.id.clone())
    }

    /// `act` once the robot is in position for `target`, otherwise the move
    /// that gets it there.
    fn near(&self, target: &ObjectId, act: Action) -> Result<Action> {
        if self.s.robot.elevation > 0 {
            if self.elevated(target) {
                return Ok(act);
            }
            let stool = self.standing_on().ok_or_else(|| Error::Config("elevated robot off any climbable".into()))?;
            return Ok(Action::unary(ClimbDown, stool));
        }
        let involved = self.last.is_some_and(|a| a.o1() == target || a.o2() == Some(target));
        if involved && reachable(self.s, target, self.cfg) {
            Ok(act)
        } else {
            Ok(Action::unary(MoveTo, target.clone()))
        }
    }

    fn first_with(&self, tag: Capability, tool: bool) -> Option<ObjectId> {
        self.s
            .objects
            .iter()
            .filter(|o| self.s.classes.get(&o.class).is_some_and(|c| c.has(tag) && c.is_tool == tool))
            .map(|o| o.id.clone())
            .min()
    }

    /// A graspable tool that carries items (tray or box).
    fn carrier(&self, exclude: &ObjectId) -> Option<ObjectId> {
        let mut ids: Vec<ObjectId> = self
            .s
            .objects
            .iter()
            .filter(|o| &o.id != exclude)
            .filter(|o| {
                self.s.classes.get(&o.class).is_some_and(|c| {
                    c.is_tool
                        && (c.has(Capability::Surface) || c.has(Capability::Container))
                        && c.attributes.contains(&Attribute::Grabbed)
                })
            })
            .filter(|o| o.size[0].max(o.size[1]) <= self.cfg.grasp_bound)
            .map(|o| o.id.clone())
            .collect();
        ids.sort();
        ids.into_iter().next()
    }

    fn on(&self, x: &ObjectId, support: &ObjectId) -> bool {
        self.s.has_edge(RelationKind::OnTop, x, support) || self.s.has_edge(RelationKind::Inside, x, support)
    }

    fn put_down(&self, held: &ObjectId) -> Result<Action> {
        let floor = crate::sim::floor_of(self.s).ok_or_else(|| Error::Config("scene has no floor".into()))?;
        self.near(&floor, Action::binary(Drop, held.clone(), floor.clone()))
    }

    /// Gets `x` into the hand, climbing for elevated items.
    fn fetch(&self, x: &ObjectId, goal: &Goal) -> Result<Action> {
        if let Some(h) = self.held() {
            return self.put_down(&h.clone());
        }
        if !self.elevated(x) || self.s.robot.elevation > 0 {
            return self.near(x, Action::unary(Pick, x.clone()));
        }
        let stool = self.first_with(Capability::Climbable, true).ok_or_else(|| unachievable(goal, "no climbable tool"))?;
        let support = self.s.parent(RelationKind::OnTop, x).cloned().ok_or_else(|| unachievable(goal, "elevated item without support"))?;
        if self.s.has_edge(RelationKind::Near, &stool, &support) {
            self.near(&stool, Action::unary(ClimbUp, stool.clone()))
        } else {
            self.near(&stool, Action::binary(Push, stool.clone(), support))
        }
    }

    /// Brings every item in `items` onto or into `dst`.
    fn place(&self, items: &[ObjectId], dst: &ObjectId, goal: &Goal) -> Result<Action> {
        let pending: Vec<&ObjectId> = items.iter().filter(|x| !self.on(x, dst)).collect();
        let Some(&first) = pending.first() else {
            return Err(Error::Config("nothing to place".into()));
        };
        let closed = self.has(dst, Capability::Openable) && !self.s.object(dst).is_some_and(|o| o.attr(Attribute::Open));
        if closed {
            if let Some(h) = self.held() {
                return self.put_down(&h.clone());
            }
            return self.near(dst, Action::unary(Open, dst.clone()));
        }
        let carrier = if pending.len() >= 2 { self.carrier(dst) } else { None };
        if let Some(c) = carrier {
            return match self.held() {
                Some(h) if h == &c => self.near(dst, Action::binary(Drop, c.clone(), dst.clone())),
                Some(h) if pending.contains(&h) => self.near(&c, Action::binary(Drop, h.clone(), c.clone())),
                Some(h) => self.put_down(&h.clone()),
                None => match pending.iter().find(|x| !self.on(x, &c)) {
                    Some(x) => self.fetch(x, goal),
                    None => self.near(&c, Action::unary(Pick, c.clone())),
                },
            };
        }
        match self.held() {
            Some(h) if pending.contains(&h) => self.near(dst, Action::binary(Drop, h.clone(), dst.clone())),
            Some(h) if self.s.has_edge(RelationKind::OnTop, first, h) || self.s.has_edge(RelationKind::Inside, first, h) => {
                self.near(dst, Action::binary(Drop, h.clone(), dst.clone()))
            }
            _ => self.fetch(first, goal),
        }
    }

    fn set_attribute(&self, object: &ObjectId, attribute: Attribute, value: bool, goal: &Goal) -> Result<Action> {
        let needs_hand = matches!(attribute, Attribute::Open);
        match (attribute, value) {
            (Attribute::Open, v) => {
                if let Some(h) = self.held().filter(|_| needs_hand) {
                    return self.put_down(&h.clone());
                }
                self.near(object, Action::unary(if v { Open } else { Close }, object.clone()))
            }
            (Attribute::On, v) => self.near(object, Action::unary(if v { SwitchOn } else { SwitchOff }, object.clone())),
            (Attribute::Dirty, false) => {
                let cleaner = self.first_with(Capability::Cleaner, true).ok_or_else(|| unachievable(goal, "no cleaning tool"))?;
                if self.held() == Some(&cleaner) {
                    self.near(object, Action::unary(Clean, object.clone()))
                } else {
                    self.fetch(&cleaner, goal)
                }
            }
            _ => Err(unachievable(goal, &format!("no procedure for {}", attribute.token(value)))),
        }
    }

    fn next(&self, goal: &Goal) -> Result<Action> {
        // Placement constraints first, then attribute constraints, each in
        // goal order.
        let mut pending_rel = None;
        for c in &goal.constraints {
            if let Constraint::Relation { kind, src, dst } = c {
                if !c.holds(self.s)? {
                    if !matches!(kind, RelationKind::Inside | RelationKind::OnTop) {
                        return Err(unachievable(goal, "no procedure for this relation"));
                    }
                    pending_rel = Some((*kind, src.clone(), dst.clone()));
                    break;
                }
            }
        }
        if let Some((kind, _, dst)) = pending_rel {
            let items: Vec<ObjectId> = goal
                .constraints
                .iter()
                .filter_map(|c| match c {
                    Constraint::Relation { kind: k, src, dst: d } if *k == kind && d == &dst => Some(src.clone()),
                    _ => None,
                })
                .collect();
            return self.place(&items, &dst, goal);
        }
        for c in &goal.constraints {
            if let Constraint::Attribute { object, attribute, value } = c {
                if !c.holds(self.s)? {
                    return self.set_attribute(object, *attribute, *value, goal);
                }
            }
        }
        Err(Error::Config("goal already satisfied".into()))
    }
}

impl Policy for ScriptedExpert {
    fn act(&mut self, state: &WorldState, goal: &Goal, history: &[Action]) -> Result<Action> {
        for id in goal.objects() {
            state.require(&id)?;
        }
        Ctx { s: state, last: history.last(), cfg: &self.cfg }.next(goal)
    }
}

/// Runs the expert from `state` and records the plan. `forced_drop` injects
/// one drop of the held object at the first holding step at or after that
/// index.
pub fn expert_demo(scene_id: &str, state: &WorldState, goal_id: &str, goal: &Goal, forced_drop: Option<usize>) -> Result<Demonstration> {
    let cfg = SimConfig { forced_drop, ..SimConfig::deterministic() };
    let mut expert = ScriptedExpert { cfg: cfg.clone() };
    let trace = run_episode(&mut expert, state, goal, &cfg)?;
    if let Some(reason) = &trace.aborted {
        return Err(unachievable(goal, reason));
    }
    if !trace.success {
        return Err(unachievable(goal, "expert exceeded the step budget"));
    }
    let plan: Vec<PlanStep> = trace.events.iter().map(PlanStep::from_event).collect();
    let (states, _) = replay_actions(state, &plan, goal, &SimConfig::deterministic())?;
    let steps = states.into_iter().zip(plan).map(|(state, p)| p.into_step(state)).collect();
    let tag = if forced_drop.is_some() { "+drop" } else { "" };
    Ok(Demonstration {
        id: format!("{scene_id}/{goal_id}{tag}"),
        scene_id: scene_id.to_string(),
        goal_id: goal_id.to_string(),
        goal: goal.clone(),
        initial: state.clone(),
        steps,
        teacher: "expert".to_string(),
    })
}

/// One expert demonstration per (scene, goal). With probability
/// `perturb_rate` a demonstration includes a forced drop on a step drawn
/// uniformly from those that end with the robot holding something.
pub fn generate_corpus(home: &MicroHome, goal_ids: &[&str], perturb_rate: f64, seed: u64) -> Result<Corpus> {
    let mut demos = Vec::new();
    for scene_id in home.scene_ids() {
        let state = home.scene(&scene_id)?;
        for goal_id in goal_ids {
            let goal = domain::goal(goal_id)?;
            let mut rng = rng_from_seed(derive_seed(seed, demos.len() as u64));
            let mut demo = expert_demo(&scene_id, &state, goal_id, &goal, None)?;
            // steps after which the robot still holds something
            let holding: Vec<usize> = (0..demo.steps.len().saturating_sub(1))
                .filter(|&j| demo.steps[j + 1].state.robot.grabbed.is_some())
                .collect();
            if rng.random::<f64>() < perturb_rate && !holding.is_empty() {
                let k = holding[rng.random_range(0..holding.len())];
                demo = expert_demo(&scene_id, &state, goal_id, &goal, Some(k))?;
            }
            demos.push(demo);
        }
    }
    let mut corpus = Corpus::new("home", demos);
    corpus.notes.push(format!("micro-home seed {}, {} scenes, expert seed {seed}", home.seed, home.scenes));
    Ok(corpus)
}
