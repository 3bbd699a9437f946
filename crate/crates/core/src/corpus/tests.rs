use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

use super::*;
use crate::domain::{goal, MicroHome, GOAL_IDS, RESERVE_POOL};
use crate::embed::{desk_table, nearest_class, DESK_DIM};
use crate::sim::{run_episode, Outcome, SimConfig};
use crate::world::{Action, Attribute, InteractionType::*, ObjectId};

fn home() -> MicroHome {
    MicroHome::default()
}

fn scene_where(pred: impl Fn(&WorldState) -> bool) -> (String, WorldState) {
    let h = home();
    h.scene_ids().into_iter().map(|id| (id.clone(), h.scene(&id).unwrap())).find(|(_, s)| pred(s)).expect("no scene matches")
}

fn open(s: &WorldState, id: &str) -> bool {
    s.object(&ObjectId::from(id)).unwrap().attr(Attribute::Open)
}

fn small_corpus() -> Corpus {
    generate_corpus(&home(), &GOAL_IDS, 0.0, 1).unwrap()
}

fn id(s: &str) -> ObjectId {
    ObjectId::from(s)
}

#[test]
fn milk_plan_is_seven_steps() {
    let (sid, s) = scene_where(|s| !open(s, "fridge_0"));
    let d = expert_demo(&sid, &s, "milk_fridge", &goal("milk_fridge").unwrap(), None).unwrap();
    let expected = [
        Action::unary(MoveTo, "fridge_0"),
        Action::unary(Open, "fridge_0"),
        Action::unary(MoveTo, "milk_0"),
        Action::unary(Pick, "milk_0"),
        Action::unary(MoveTo, "fridge_0"),
        Action::binary(Drop, "milk_0", "fridge_0"),
        Action::unary(Close, "fridge_0"),
    ];
    assert_eq!(d.actions(), expected);
    replay(&d, &SimConfig::deterministic()).unwrap();
}

#[test]
fn light_plan_is_two_steps() {
    let s = home().scene("home_00").unwrap();
    let d = expert_demo("home_00", &s, "light_on", &goal("light_on").unwrap(), None).unwrap();
    assert_eq!(d.actions(), [Action::unary(MoveTo, "light_switch_0"), Action::unary(SwitchOn, "light_switch_0")]);
}

#[test]
fn fruits_ride_the_tray() {
    let s = home().scene("home_03").unwrap();
    let d = expert_demo("home_03", &s, "fruits_cupboard", &goal("fruits_cupboard").unwrap(), None).unwrap();
    let acts = d.actions();
    let drops_on_tray: Vec<&Action> = acts.iter().filter(|a| a.interaction() == Drop && a.o2() == Some(&id("tray_0"))).collect();
    assert_eq!(drops_on_tray.len(), 2);
    assert!(acts.contains(&Action::unary(Pick, "tray_0")));
    assert!(acts.contains(&Action::binary(Drop, "tray_0", "cupboard_0")));
    assert_eq!(acts.last().unwrap(), &Action::unary(Close, "cupboard_0"));
    replay(&d, &SimConfig::deterministic()).unwrap();
}

#[test]
fn bottle_plan_climbs_the_stool() {
    let s = home().scene("home_01").unwrap();
    let d = expert_demo("home_01", &s, "bottle_dumpster", &goal("bottle_dumpster").unwrap(), None).unwrap();
    let kinds: Vec<_> = d.actions().iter().map(|a| a.interaction()).collect();
    assert!(kinds.contains(&ClimbUp) && kinds.contains(&ClimbDown), "{kinds:?}");
    let up = kinds.iter().position(|k| *k == ClimbUp).unwrap();
    assert_eq!(d.steps[up + 1].action, Action::unary(Pick, "bottle_0"));
}

#[test]
fn expert_solves_every_scene_goal_pair() {
    let h = home();
    let cfg = SimConfig::deterministic();
    let mut solved = 0;
    for sid in h.scene_ids() {
        let s = h.scene(&sid).unwrap();
        for g in GOAL_IDS {
            let trace = run_episode(&mut ScriptedExpert::default(), &s, &goal(g).unwrap(), &cfg).unwrap();
            assert!(trace.success, "{sid} {g}: {:?}", trace.events.last());
            assert!(trace.events.iter().all(|e| e.outcome == Outcome::Applied));
            solved += 1;
        }
    }
    assert_eq!(solved, 60);
}

#[test]
fn expert_recovers_from_a_drop() {
    let (sid, s) = scene_where(|s| !open(s, "fridge_0"));
    let g = goal("milk_fridge").unwrap();
    let d = expert_demo(&sid, &s, "milk_fridge", &g, Some(4)).unwrap();
    assert!(d.perturbed());
    let k = d.steps.iter().position(|st| st.outcome == Outcome::DropPerturbation).unwrap();
    assert_eq!(k, 4);
    assert_eq!(d.steps[k + 1].action, Action::unary(MoveTo, "milk_0"));
    assert_eq!(d.steps[k + 2].action, Action::unary(Pick, "milk_0"));
    assert_eq!(d.steps.len(), 10);
    replay(&d, &SimConfig::deterministic()).unwrap();
}

#[test]
fn fruits_without_carrier_go_one_by_one() {
    let mut s = home().scene("home_03").unwrap();
    s.remove_object(&id("tray_0"));
    let d = expert_demo("home_03", &s, "fruits_cupboard", &goal("fruits_cupboard").unwrap(), None).unwrap();
    let drops: Vec<Action> = d.actions().into_iter().filter(|a| a.interaction() == Drop).collect();
    assert_eq!(drops, [Action::binary(Drop, "apple_0", "cupboard_0"), Action::binary(Drop, "orange_0", "cupboard_0")]);
}

#[test]
fn missing_tool_is_unachievable() {
    let mut s = home().scene("home_02").unwrap();
    s.remove_object(&id("mop_0"));
    let err = expert_demo("home_02", &s, "clean_floor", &goal("clean_floor").unwrap(), None).unwrap_err();
    assert!(matches!(err, Error::Unachievable { .. }), "{err:?}");
}

#[test]
fn replay_rejects_tampering() {
    let s = home().scene("home_00").unwrap();
    let d = expert_demo("home_00", &s, "milk_fridge", &goal("milk_fridge").unwrap(), None).unwrap();
    let cfg = SimConfig::deterministic();

    let mut bad = d.clone();
    bad.steps[2].state.robot.position[0] += 0.01;
    assert!(matches!(replay(&bad, &cfg), Err(Error::ReplayMismatch { step: 2, .. })));

    let mut short = d.clone();
    short.steps.pop();
    assert!(matches!(replay(&short, &cfg), Err(Error::ReplayMismatch { reason, .. }) if reason.contains("goal")));

    let mut wrong = d.clone();
    wrong.steps[1].action = Action::unary(SwitchOn, "fridge_0");
    assert!(matches!(replay(&wrong, &cfg), Err(Error::ReplayMismatch { step: 1, .. })));
}

#[test]
fn failed_step_with_a_drop_replays() {
    let s = home().scene("home_00").unwrap();
    let d = expert_demo("home_00", &s, "milk_fridge", &goal("milk_fridge").unwrap(), None).unwrap();
    let k = d.steps.iter().position(|st| st.state.robot.grabbed.is_some() && st.action.interaction() == MoveTo).unwrap();
    let cfg = SimConfig::deterministic();
    let before = &d.steps[k].state;
    let (after, event) = apply_with(before, &d.steps[k].action, &cfg, Draws { fail: true, drop: true });
    assert_eq!((event.outcome, event.effects), (Outcome::DropPerturbation, false));
    let planned = PlanStep::from_event(&event);
    assert!(planned.failed);
    assert_eq!(apply_with(before, &event.action, &cfg, planned.draws()).0, after);
    // the outcome alone would also move the robot
    assert_ne!(apply_with(before, &event.action, &cfg, draws_for(event.outcome, false)).0, after);
    let step = planned.into_step(before.clone());
    let text = serde_json::to_string(&step).unwrap();
    assert!(text.contains("\"failed\":true"));
    assert_eq!(serde_json::from_str::<DemoStep>(&text).unwrap(), step);
    assert!(!serde_json::to_string(&d.steps[0]).unwrap().contains("failed"));
}

#[test]
fn generated_corpus_replays() {
    let c = generate_corpus(&home(), &GOAL_IDS, 0.4, 3).unwrap();
    assert_eq!(c.len(), 60);
    c.validate().unwrap();
    let perturbed = c.demos.iter().filter(|d| d.perturbed()).count();
    assert!(perturbed > 5 && perturbed < 40, "{perturbed}");
    assert_eq!(c, generate_corpus(&home(), &GOAL_IDS, 0.4, 3).unwrap());
    for r in RESERVE_POOL {
        assert!(!c.classes().contains(r));
    }
}

fn synthetic(n: usize) -> Corpus {
    let base = small_corpus().demos[0].clone();
    let demos = (0..n)
        .map(|i| {
            let mut d = base.clone();
            d.scene_id = format!("s{i}");
            d.id = format!("s{i}/g");
            d
        })
        .collect();
    Corpus::new("home", demos)
}

#[test]
fn split_sizes_follow_the_ratios() {
    let sp = split(&synthetic(100), 5).unwrap();
    assert_eq!((sp.train.len(), sp.val.len(), sp.test.len()), (67, 8, 25));
    let again = split(&synthetic(100), 5).unwrap();
    assert_eq!(sp, again);
    let other = split(&synthetic(100), 6).unwrap();
    assert_ne!(sp.test, other.test);
}

#[test]
fn split_needs_ten_demos() {
    assert_eq!(split(&synthetic(9), 0).unwrap_err(), Error::CorpusTooSmall { len: 9, min: 10 });
    assert!(split(&synthetic(10), 0).is_ok());
}

#[test]
fn split_keeps_groups_together() {
    let (aug, _) = augment(&small_corpus(), 3, &desk_table(DESK_DIM, 0), 2).unwrap();
    let sp = split(&aug, 9).unwrap();
    let groups = |c: &Corpus| c.demos.iter().map(|d| d.group()).collect::<BTreeSet<_>>();
    let (tr, va, te) = (groups(&sp.train), groups(&sp.val), groups(&sp.test));
    // exhaustive membership scan
    for g in &te {
        assert!(!tr.contains(g) && !va.contains(g), "{g:?} leaks");
    }
    for g in &va {
        assert!(!tr.contains(g));
    }
    assert_eq!(sp.train.len() + sp.val.len() + sp.test.len(), aug.len());
}

#[test]
fn augment_identity_factor() {
    let c = small_corpus();
    let (out, report) = augment(&c, 1, &desk_table(DESK_DIM, 0), 7).unwrap();
    assert_eq!(out.demos, c.demos);
    assert_eq!(report.produced, 0);
    assert_eq!(out.notes.len(), c.notes.len() + 1);
    assert!(augment(&c, 0, &desk_table(DESK_DIM, 0), 7).is_err());
}

#[test]
fn augmented_demos_all_replay() {
    let c = generate_corpus(&MicroHome { seed: 7, scenes: 3 }, &["milk_fridge", "fruits_cupboard", "bottle_dumpster", "clean_floor"], 0.5, 4)
        .unwrap();
    let c = Corpus::new("home", c.demos.into_iter().take(12).collect());
    let table = desk_table(DESK_DIM, 0);
    let (out, report) = augment(&c, 5, &table, 7).unwrap();
    assert!(out.len() <= 5 * c.len());
    assert_eq!(out.len(), c.len() + report.produced);
    assert_eq!(report.produced + report.rejected, 4 * c.len());
    assert!(report.produced >= 2 * c.len(), "{report:?}");
    out.validate().unwrap();
    for r in RESERVE_POOL {
        assert!(!out.classes().contains(r), "{r} introduced");
    }
    // variants move things around
    let moved = out.demos.iter().filter(|d| d.id.contains('~')).filter(|d| {
        let orig = c.demos.iter().find(|o| d.id.starts_with(&o.id)).unwrap();
        orig.initial != d.initial
    });
    assert_eq!(moved.count(), report.produced);
    let swapped = out.demos.iter().filter(|d| d.initial.objects.len() == d.initial.classes.len()).filter(|d| {
        let orig = c.demos.iter().find(|o| d.id.starts_with(&o.id)).unwrap();
        orig.initial.classes.keys().collect::<Vec<_>>() != d.initial.classes.keys().collect::<Vec<_>>()
    });
    assert!(swapped.count() > 0);
}

fn corpus_classes(c: &Corpus) -> BTreeSet<String> {
    c.classes()
}

#[test]
fn most_used_tools_per_goal() {
    let tools = most_used_tools(&small_corpus());
    assert_eq!(tools.get("fruits_cupboard").map(String::as_str), Some("tray"));
    assert_eq!(tools.get("clean_floor").map(String::as_str), Some("mop"));
    assert_eq!(tools.get("bottle_dumpster").map(String::as_str), Some("stool"));
    assert!(!tools.contains_key("milk_fridge") && !tools.contains_key("light_on"));
}

#[test]
fn position_with_zero_radius_is_identity() {
    let c = small_corpus();
    let set = make_generalization_set(&c, &Strategy::Position { radius: 0.0 }, &desk_table(DESK_DIM, 0), &RESERVE_POOL, 3).unwrap();
    assert_eq!(set.len(), c.len());
    for (case, d) in set.iter().zip(&c.demos) {
        assert_eq!(case.scene, d.initial);
        assert_eq!(case.goal, d.goal);
    }
    let moved = make_generalization_set(&c, &Strategy::Position { radius: 0.3 }, &desk_table(DESK_DIM, 0), &RESERVE_POOL, 3).unwrap();
    assert!(moved.iter().zip(&c.demos).all(|(m, d)| m.scene != d.initial));
}

#[test]
fn alternate_removes_the_tool() {
    let c = small_corpus();
    let set = make_generalization_set(&c, &Strategy::Alternate, &desk_table(DESK_DIM, 0), &RESERVE_POOL, 0).unwrap();
    let transport: Vec<&EvalCase> = set.iter().filter(|e| e.goal_id == "fruits_cupboard").collect();
    assert_eq!(transport.len(), 12);
    for e in &set {
        let removed = most_used_tools(&c)[&e.goal_id].clone();
        // exhaustive scan
        assert!(e.scene.objects.iter().all(|o| o.class != removed), "{} still has {removed}", e.id);
    }
    for e in transport {
        assert!(e.scene.contains(&id("box_0")));
        // the substitute carrier still solves the task
        let t = run_episode(&mut ScriptedExpert::default(), &e.scene, &e.goal, &SimConfig::deterministic()).unwrap();
        assert!(t.success);
        assert!(t.events.iter().any(|ev| ev.action == Action::binary(Drop, "box_0", "cupboard_0")));
    }
}

#[test]
fn unseen_uses_the_nearest_reserve_class() {
    let c = small_corpus();
    let table = desk_table(DESK_DIM, 0);
    let set = make_generalization_set(&c, &Strategy::Unseen, &table, &RESERVE_POOL, 0).unwrap();
    let expected = nearest_class(&table, "tray", &RESERVE_POOL).unwrap();
    assert_eq!(expected, "box");
    let seen = corpus_classes(&c);
    for e in &set {
        let novel: Vec<&String> = e.scene.classes.keys().filter(|k| !seen.contains(*k)).collect();
        assert_eq!(novel.len(), 1, "{}: {novel:?}", e.id);
        if e.goal_id == "fruits_cupboard" {
            assert_eq!(novel[0], expected);
            assert!(!e.scene.contains(&id("tray_0")));
        }
    }
    assert_eq!(make_generalization_set(&c, &Strategy::Unseen, &table, &[], 0).unwrap_err(), Error::EmptyReservePool);
    assert_eq!(make_generalization_set(&c, &Strategy::Goal, &table, &[], 0).unwrap_err(), Error::EmptyReservePool);
}

#[test]
fn random_and_goal_sets() {
    let c = small_corpus();
    let table = desk_table(DESK_DIM, 0);
    let random = make_generalization_set(&c, &Strategy::Random, &table, &RESERVE_POOL, 4).unwrap();
    assert_eq!(random.len(), 36);
    for e in &random {
        let tool = &most_used_tools(&c)[&e.goal_id];
        assert!(e.scene.objects.iter().all(|o| &o.class != tool));
    }
    let goals = make_generalization_set(&c, &Strategy::Goal, &table, &RESERVE_POOL, 4).unwrap();
    assert_eq!(goals.len(), 36);
    for e in &goals {
        let reserve_items: Vec<ObjectId> = e.goal.objects().into_iter().filter(|o| RESERVE_POOL.contains(&o.class_token())).collect();
        assert!(!reserve_items.is_empty(), "{}", e.id);
        for o in reserve_items {
            assert!(e.scene.contains(&o));
        }
        let t = run_episode(&mut ScriptedExpert::default(), &e.scene, &e.goal, &SimConfig::deterministic()).unwrap();
        assert!(t.success, "{}", e.id);
    }
}

#[test]
fn demo_json_round_trip_keeps_outcomes() {
    let (sid, s) = scene_where(|s| !open(s, "fridge_0"));
    let d = expert_demo(&sid, &s, "milk_fridge", &goal("milk_fridge").unwrap(), Some(4)).unwrap();
    let v = serde_json::to_string(&d).unwrap();
    assert!(v.contains("drop-perturbation"));
    let back: Demonstration = serde_json::from_str(&v).unwrap();
    assert_eq!(back.steps.iter().map(|s| s.outcome).collect::<Vec<_>>(), d.steps.iter().map(|s| s.outcome).collect::<Vec<_>>());
    assert_eq!(back, d);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn split_is_a_partition(n in 10usize..80, seed in 0u64..1000) {
        let c = synthetic(n);
        let sp = split(&c, seed).unwrap();
        let ids = |c: &Corpus| c.demos.iter().map(|d| d.id.clone()).collect::<BTreeSet<_>>();
        let (a, b, t) = (ids(&sp.train), ids(&sp.val), ids(&sp.test));
        prop_assert!(a.is_disjoint(&b) && a.is_disjoint(&t) && b.is_disjoint(&t));
        prop_assert_eq!(a.len() + b.len() + t.len(), n);
        let test = libm::floor(n as f64 * 0.25 + 0.5) as usize;
        prop_assert_eq!(t.len(), test);
        prop_assert_eq!(b.len(), libm::floor((n - test) as f64 * 0.1 + 0.5) as usize);
    }
}
