use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;
use crate::domain::{self, add_object, generate_scene};
use crate::rng_from_seed;
use crate::world::{Capability, Goal, InteractionType, Pose};

fn id(s: &str) -> ObjectId {
    ObjectId::from(s)
}

fn det() -> SimConfig {
    SimConfig::deterministic()
}

/// Robot standing next to the given object.
fn beside(state: &mut WorldState, target: &str) {
    let cfg = det();
    let (next, ev) = apply_with(state, &Action::unary(InteractionType::MoveTo, target), &cfg, Draws::default());
    assert_eq!(ev.outcome, Outcome::Applied);
    *state = next;
}

/// Floor, an open-able fridge holding milk, a table with an apple, a stool,
/// a mop and a light switch.
fn small_scene(fridge_open: bool) -> WorldState {
    let mut s = WorldState::empty(domain::ROOM);
    let floor = add_object(&mut s, "floor", Pose { x: 3.0, y: 2.5, z: 0.0, yaw: 0.0 }).unwrap();
    let fridge = add_object(&mut s, "fridge", Pose { x: 1.0, y: 0.5, z: 0.01, yaw: 0.0 }).unwrap();
    let table = add_object(&mut s, "table", Pose { x: 4.0, y: 2.5, z: 0.01, yaw: 0.0 }).unwrap();
    let milk = add_object(&mut s, "milk", Pose { x: 1.0, y: 0.5, z: 0.01, yaw: 0.0 }).unwrap();
    let apple = add_object(&mut s, "apple", Pose { x: 4.0, y: 2.5, z: 0.76, yaw: 0.0 }).unwrap();
    let stool = add_object(&mut s, "stool", Pose { x: 2.0, y: 4.0, z: 0.01, yaw: 0.0 }).unwrap();
    for o in [&fridge, &table, &stool] {
        s.relations.insert(RelationEdge::new(RelationKind::OnTop, o.clone(), floor.clone()));
    }
    s.relations.insert(RelationEdge::new(RelationKind::Inside, milk, fridge.clone()));
    s.relations.insert(RelationEdge::new(RelationKind::OnTop, apple, table));
    s.object_mut(&fridge).unwrap().set_attr(Attribute::Open, fridge_open);
    s.robot.position = [3.0, 2.5];
    refresh_derived(&mut s, &det());
    s.validate().unwrap();
    s
}

#[test]
fn move_to_is_applicable_from_anywhere_on_the_floor() {
    let s = generate_scene(3).unwrap();
    assert_eq!(applicable(&s, &Action::unary(InteractionType::MoveTo, "table_0"), &det()), Ok(()));
}

#[test]
fn pick_inside_closed_container_is_rejected() {
    let mut s = small_scene(false);
    beside(&mut s, "fridge_0");
    let pick = Action::unary(InteractionType::Pick, "milk_0");
    assert_eq!(applicable(&s, &pick, &det()), Err("container-closed"));
    let (next, ev) = apply(&s, &pick, &det(), &mut rng_from_seed(0));
    assert_eq!(ev.outcome, Outcome::Rejected);
    assert_eq!(ev.violation(), Some("container-closed"));
    assert_eq!(next, s);
}

#[test]
fn open_then_drop_into_fridge() {
    let mut s = small_scene(false);
    beside(&mut s, "fridge_0");
    let (s1, _) = apply_with(&s, &Action::unary(InteractionType::Open, "fridge_0"), &det(), Draws::default());
    assert!(s1.object(&id("fridge_0")).unwrap().attr(Attribute::Open));
    let (s2, ev) = apply_with(&s1, &Action::unary(InteractionType::Pick, "milk_0"), &det(), Draws::default());
    assert_eq!(ev.outcome, Outcome::Applied);
    assert!(!s2.has_edge(RelationKind::Inside, &id("milk_0"), &id("fridge_0")));
    assert!(!s2.object(&id("milk_0")).unwrap().attr(Attribute::Inside));
    let (s3, ev) = apply_with(&s2, &Action::binary(InteractionType::Drop, "milk_0", "fridge_0"), &det(), Draws::default());
    assert_eq!(ev.outcome, Outcome::Applied);
    assert!(s3.has_edge(RelationKind::Inside, &id("milk_0"), &id("fridge_0")));
    assert!(ev.delta.added.contains(&RelationEdge::new(RelationKind::Inside, "milk_0", "fridge_0")));
    assert_eq!(s3.robot.grabbed, None);
    s3.validate().unwrap();
}

/// Independent restatement of the Pick precondition table.
fn pick_oracle(s: &WorldState, target: &ObjectId, cfg: &SimConfig) -> Result<(), &'static str> {
    let o = s.object(target).unwrap();
    let class = &s.classes[&o.class];
    if !class.attributes.contains(&Attribute::Grabbed) || o.size[0] > cfg.grasp_bound || o.size[1] > cfg.grasp_bound {
        return Err("not-graspable");
    }
    if s.robot.grabbed.as_ref() == Some(target) {
        return Err("already-held");
    }
    for e in &s.relations {
        if e.kind == RelationKind::Inside && &e.src == target {
            let c = s.object(&e.dst).unwrap();
            if s.classes[&c.class].has(Capability::Openable) && !c.attr(Attribute::Open) {
                return Err("container-closed");
            }
        }
    }
    if s.robot.grabbed.is_some() {
        return Err("hand-occupied");
    }
    // brute-force distance: sample the footprint densely
    let mut best = f64::INFINITY;
    let n = 400;
    for i in 0..=n {
        for j in 0..=n {
            let x = o.pose.x - o.size[0] / 2.0 + o.size[0] * i as f64 / n as f64;
            let y = o.pose.y - o.size[1] / 2.0 + o.size[1] * j as f64 / n as f64;
            let d = ((x - s.robot.position[0]).powi(2) + (y - s.robot.position[1]).powi(2)).sqrt();
            best = best.min(d);
        }
    }
    let level = u8::from(o.pose.z >= cfg.elevated_height);
    if best > cfg.reach_radius + 1e-9 || level > s.robot.elevation {
        return Err("unreachable");
    }
    Ok(())
}

#[test]
fn pick_applicability_matches_precondition_oracle() {
    let cfg = det();
    for (open, spot, hold) in [(false, "fridge_0", false), (true, "fridge_0", false), (true, "table_0", false), (true, "table_0", true)] {
        let mut s = small_scene(open);
        if hold {
            beside(&mut s, "apple_0");
            s = apply_with(&s, &Action::unary(InteractionType::Pick, "apple_0"), &cfg, Draws::default()).0;
        }
        beside(&mut s, spot);
        for target in s.sorted_ids() {
            let got = applicable(&s, &Action::unary(InteractionType::Pick, target.clone()), &cfg);
            assert_eq!(got, pick_oracle(&s, &target, &cfg), "{target} with fridge open={open} at {spot}");
        }
    }
}

#[test]
fn elevated_targets_need_climbing() {
    let cfg = det();
    let mut s = generate_scene(5).unwrap();
    let bottle = id("bottle_0");
    beside(&mut s, "bottle_0");
    assert!(!reachable(&s, &bottle, &cfg));
    let push = Action::binary(InteractionType::Push, "stool_0", "shelf_0");
    beside(&mut s, "stool_0");
    let (s, ev) = apply_with(&s, &push, &cfg, Draws::default());
    assert_eq!(ev.outcome, Outcome::Applied, "{}", ev.note);
    let (s, ev) = apply_with(&s, &Action::unary(InteractionType::ClimbUp, "stool_0"), &cfg, Draws::default());
    assert_eq!(ev.outcome, Outcome::Applied, "{}", ev.note);
    assert!(reachable(&s, &bottle, &cfg));
    assert_eq!(
        applicable(&s, &Action::unary(InteractionType::MoveTo, "table_0"), &cfg),
        Err("robot-elevated")
    );
}

#[test]
fn zero_distance_target_is_reachable() {
    let mut s = small_scene(true);
    s.robot.position = [4.0, 2.5];
    assert!(reachable(&s, &id("table_0"), &det()));
}

#[test]
fn reachable_set_matches_geometric_scan() {
    let cfg = det();
    let mut rng = rng_from_seed(11);
    for trial in 0..10 {
        let mut s = WorldState::empty(domain::ROOM);
        for k in 0..20 {
            let token = ["apple", "book", "milk", "dirt", "bottle"][k % 5];
            let z = if rng.random_bool(0.3) { 1.2 } else { 0.01 };
            let p = Pose { x: rng.random_range(0.0..6.0), y: rng.random_range(0.0..5.0), z, yaw: 0.0 };
            add_object(&mut s, token, p).unwrap();
        }
        s.robot.position = [rng.random_range(0.0..6.0), rng.random_range(0.0..5.0)];
        s.robot.elevation = u8::from(trial % 3 == 0);
        for o in s.objects.clone() {
            // Oracle: closest point by clamping, computed without helpers.
            let cx = s.robot.position[0].clamp(o.pose.x - o.size[0] / 2.0, o.pose.x + o.size[0] / 2.0);
            let cy = s.robot.position[1].clamp(o.pose.y - o.size[1] / 2.0, o.pose.y + o.size[1] / 2.0);
            let d = ((cx - s.robot.position[0]).powi(2) + (cy - s.robot.position[1]).powi(2)).sqrt();
            let expect = d <= cfg.reach_radius && (o.pose.z < 1.0 || s.robot.elevation >= 1);
            assert_eq!(reachable(&s, &o.id, &cfg), expect, "{} trial {trial}", o.id);
        }
    }
}

#[test]
fn forced_drop_always_lands_on_floor() {
    let cfg = SimConfig { p_drop: 1.0, p_fail: 0.0, ..SimConfig::default() };
    for seed in 0..100 {
        let mut s = generate_scene(seed).unwrap();
        beside(&mut s, "milk_0");
        let pick = Action::unary(InteractionType::Pick, "milk_0");
        let (next, ev) = apply(&s, &pick, &cfg, &mut rng_from_seed(seed));
        assert_eq!(ev.outcome, Outcome::DropPerturbation);
        assert!(next.has_edge(RelationKind::OnTop, &id("milk_0"), &id("floor_0")));
        assert_eq!(next.robot.grabbed, None);
        next.validate().unwrap();
    }
}

#[test]
fn certain_failure_leaves_state_unchanged_except_nothing() {
    let cfg = SimConfig { p_drop: 0.0, p_fail: 1.0, ..SimConfig::default() };
    let mut s = small_scene(false);
    beside(&mut s, "fridge_0");
    let (next, ev) = apply(&s, &Action::unary(InteractionType::Open, "fridge_0"), &cfg, &mut rng_from_seed(1));
    assert_eq!(ev.outcome, Outcome::NoOpFailure);
    assert_eq!(next, s);
}

#[test]
fn carried_tray_moves_its_load_and_unloads_into_containers() {
    let cfg = det();
    let mut s = WorldState::empty(domain::ROOM);
    let floor = add_object(&mut s, "floor", Pose { x: 3.0, y: 2.5, z: 0.0, yaw: 0.0 }).unwrap();
    let tray = add_object(&mut s, "tray", Pose { x: 2.0, y: 2.0, z: 0.01, yaw: 0.0 }).unwrap();
    let apple = add_object(&mut s, "apple", Pose { x: 2.0, y: 2.0, z: 0.04, yaw: 0.0 }).unwrap();
    let cup = add_object(&mut s, "cupboard", Pose { x: 5.0, y: 0.5, z: 0.01, yaw: 0.0 }).unwrap();
    s.relations.insert(RelationEdge::new(RelationKind::OnTop, tray.clone(), floor.clone()));
    s.relations.insert(RelationEdge::new(RelationKind::OnTop, apple.clone(), tray.clone()));
    s.relations.insert(RelationEdge::new(RelationKind::OnTop, cup.clone(), floor));
    s.object_mut(&cup).unwrap().set_attr(Attribute::Open, true);
    s.robot.position = [2.0, 2.5];
    refresh_derived(&mut s, &cfg);
    let steps = [
        Action::unary(InteractionType::Pick, "tray_0"),
        Action::unary(InteractionType::MoveTo, "cupboard_0"),
    ];
    for a in &steps {
        let (n, ev) = apply_with(&s, a, &cfg, Draws::default());
        assert_eq!(ev.outcome, Outcome::Applied, "{a}: {}", ev.note);
        s = n;
    }
    let t = s.object(&tray).unwrap().pose;
    let a = s.object(&apple).unwrap().pose;
    assert_eq!((t.x, t.y), (a.x, a.y));
    assert!(s.has_edge(RelationKind::OnTop, &apple, &tray));
    let (s, ev) = apply_with(&s, &Action::binary(InteractionType::Drop, "tray_0", "cupboard_0"), &cfg, Draws::default());
    assert_eq!(ev.outcome, Outcome::Applied);
    assert!(s.has_edge(RelationKind::Inside, &apple, &cup));
    assert!(s.has_edge(RelationKind::Inside, &tray, &cup));
    assert!(s.object(&apple).unwrap().attr(Attribute::Inside));
    s.validate().unwrap();
}

struct Constant(Action);

impl Policy for Constant {
    fn act(&mut self, _: &WorldState, _: &Goal, _: &[Action]) -> crate::Result<Action> {
        Ok(self.0.clone())
    }
}

#[test]
fn episode_stops_immediately_when_goal_holds() {
    let mut s = generate_scene(1).unwrap();
    s.object_mut(&id("light_switch_0")).unwrap().set_attr(Attribute::On, true);
    let goal = domain::goal("light_on").unwrap();
    let trace = run_episode(&mut Constant(Action::unary(InteractionType::MoveTo, "floor_0")), &s, &goal, &det()).unwrap();
    assert!(trace.success);
    assert_eq!(trace.steps, 0);
}

#[test]
fn episode_hits_the_step_cap() {
    let s = generate_scene(1).unwrap();
    let goal = domain::goal("light_on").unwrap();
    let trace = run_episode(&mut Constant(Action::unary(InteractionType::MoveTo, "floor_0")), &s, &goal, &det()).unwrap();
    assert!(!trace.success);
    assert_eq!(trace.steps, 50);
    assert_eq!(trace.events.len(), 50);
}

#[test]
fn malformed_action_aborts_the_episode() {
    let s = generate_scene(1).unwrap();
    let goal = domain::goal("light_on").unwrap();
    let trace = run_episode(&mut Constant(Action::unary(InteractionType::Pick, "ghost_0")), &s, &goal, &det()).unwrap();
    assert!(!trace.success);
    assert!(trace.aborted.is_some());
    assert_eq!(trace.events.len(), 1);
    assert_eq!(trace.events[0].violation(), Some("unknown-object"));
}

/// Every action whose arguments are objects of the scene.
pub(crate) fn all_actions(s: &WorldState) -> Vec<Action> {
    let ids = s.sorted_ids();
    let mut out = Vec::new();
    for it in InteractionType::ALL {
        for a in &ids {
            if it.arity() == 1 {
                out.push(Action::unary(it, a.clone()));
            } else {
                for b in &ids {
                    out.push(Action::binary(it, a.clone(), b.clone()));
                }
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_applicable_walks_preserve_invariants(scene in 0u64..1000, seed in any::<u64>()) {
        let cfg = SimConfig { p_drop: 0.05, p_fail: 0.05, ..SimConfig::default() };
        let mut s = generate_scene(scene).unwrap();
        let mut rng = rng_from_seed(seed);
        for _ in 0..40 {
            let options: Vec<Action> = all_actions(&s).into_iter().filter(|a| applicable(&s, a, &cfg).is_ok()).collect();
            prop_assert!(!options.is_empty());
            let a = &options[rng.random_range(0..options.len())];
            let (next, ev) = apply(&s, a, &cfg, &mut rng);
            prop_assert_ne!(ev.outcome, Outcome::Rejected);
            if let Err(e) = next.validate() {
                return Err(TestCaseError::fail(alloc::format!("{a}: {e}")));
            }
            s = next;
        }
    }

    #[test]
    fn rejected_actions_leave_state_unchanged(scene in 0u64..1000, pick in any::<prop::sample::Index>()) {
        let cfg = det();
        let s = generate_scene(scene).unwrap();
        let rejected: Vec<Action> = all_actions(&s).into_iter().filter(|a| applicable(&s, a, &cfg).is_err()).collect();
        let a = pick.get(&rejected);
        let mut rng = rng_from_seed(scene);
        let before = rng.clone();
        let (next, ev) = apply(&s, a, &cfg, &mut rng);
        prop_assert_eq!(ev.outcome, Outcome::Rejected);
        prop_assert!(PRECONDITIONS.iter().any(|(it, names)| *it == a.interaction() && names.contains(&ev.note.as_str()))
            || ev.note == "unknown-object");
        prop_assert_eq!(next, s);
        prop_assert_eq!(rng, before);
    }

    #[test]
    fn transitions_are_deterministic(scene in 0u64..1000, seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let cfg = SimConfig::default();
        let s = generate_scene(scene).unwrap();
        let actions = all_actions(&s);
        let a = pick.get(&actions);
        let (n1, e1) = apply(&s, a, &cfg, &mut rng_from_seed(seed));
        let (n2, e2) = apply(&s, a, &cfg, &mut rng_from_seed(seed));
        prop_assert_eq!(n1, n2);
        prop_assert_eq!(e1, e2);
    }
}
