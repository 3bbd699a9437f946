use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use super::{replay_actions, Corpus, Demonstration, PlanStep};
use crate::domain::{class_catalog, class_spec, RESERVE_POOL};
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::math::cosine;
use crate::sim::{floor_of, move_with_load, refresh_derived, SimConfig};
use crate::world::{Action, ObjectId, ObjectInstance, RelationEdge, RelationKind, WorldState};
use crate::{derive_seed, rng_from_seed, Rng};

/// Probability that a variant swaps one non-goal object's class.
pub const SWAP_PROBABILITY: f64 = 0.3;
/// Half-width of the uniform pose jitter in meters.
pub const JITTER: f64 = 0.2;
/// Swap candidates are drawn from this many most similar classes.
const SWAP_NEIGHBORS: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct AugmentReport {
    pub input: usize,
    pub produced: usize,
    pub rejected: usize,
}

fn clamp_axis(v: f64, half: f64, extent: f64) -> f64 {
    if 2.0 * half >= extent {
        extent / 2.0
    } else {
        v.clamp(half, extent - half)
    }
}

/// Shifts free-standing objects (with their load) and items resting on
/// furniture by up to `radius` along x and y, keeping footprints inside the
/// room or on their support. The robot moves too.
pub fn jitter_scene(state: &mut WorldState, radius: f64, rng: &mut Rng) {
    if radius <= 0.0 {
        return;
    }
    let floor = floor_of(state);
    let ids = state.sorted_ids();
    for id in ids {
        if Some(&id) == floor.as_ref() || state.robot.grabbed.as_ref() == Some(&id) {
            continue;
        }
        let dx = rng.random_range(-radius..=radius);
        let dy = rng.random_range(-radius..=radius);
        if state.parent(RelationKind::Inside, &id).is_some() {
            continue;
        }
        let Some(o) = state.object(&id).cloned() else { continue };
        let support = state.parent(RelationKind::OnTop, &id).cloned();
        let (x, y) = match support.as_ref().filter(|s| Some(*s) != floor.as_ref()).and_then(|s| state.object(s)) {
            Some(sup) => {
                let hx = ((sup.size[0] - o.size[0]) / 2.0).max(0.0);
                let hy = ((sup.size[1] - o.size[1]) / 2.0).max(0.0);
                ((o.pose.x + dx).clamp(sup.pose.x - hx, sup.pose.x + hx), (o.pose.y + dy).clamp(sup.pose.y - hy, sup.pose.y + hy))
            }
            None => (
                clamp_axis(o.pose.x + dx, o.size[0] / 2.0, state.room[0]),
                clamp_axis(o.pose.y + dy, o.size[1] / 2.0, state.room[1]),
            ),
        };
        move_with_load(state, &id, x, y, o.pose.z);
    }
    let [rx, ry] = state.robot.position;
    let dx = rng.random_range(-radius..=radius);
    let dy = rng.random_range(-radius..=radius);
    state.robot.position = [(rx + dx).clamp(0.0, state.room[0]), (ry + dy).clamp(0.0, state.room[1])];
    if let Some(g) = state.robot.grabbed.clone() {
        let [x, y] = state.robot.position;
        if let Some(z) = state.object(&g).map(|o| o.pose.z) {
            move_with_load(state, &g, x, y, z);
        }
    }
}

/// Replaces object `old` by a fresh instance of `token` at the same pose and
/// with the same relations. Returns the new id.
pub(crate) fn replace_class(state: &mut WorldState, old: &ObjectId, token: &str) -> Result<ObjectId> {
    let spec = class_spec(token)?;
    let prev = state.require(old)?.clone();
    let index = (0..).find(|i| !state.contains(&ObjectId::new(token, *i))).unwrap_or(0);
    let id = ObjectId::new(token, index);
    let mut obj = ObjectInstance::new(id.clone(), &spec.class, prev.pose, spec.size);
    for (a, v) in &prev.attributes {
        if obj.attributes.contains_key(a) && *a != crate::world::Attribute::Grabbed {
            obj.set_attr(*a, *v);
        }
    }
    let edges: Vec<RelationEdge> = state.relations.iter().filter(|e| &e.src == old || &e.dst == old).cloned().collect();
    let was_held = state.robot.grabbed.as_ref() == Some(old);
    state.remove_object(old);
    state.insert_object(&spec.class, obj);
    for e in edges {
        let src = if &e.src == old { id.clone() } else { e.src };
        let dst = if &e.dst == old { id.clone() } else { e.dst };
        state.relations.insert(RelationEdge::new(e.kind, src, dst));
    }
    if was_held {
        state.robot.grabbed = Some(id.clone());
        if let Some(o) = state.object_mut(&id) {
            o.set_attr(crate::world::Attribute::Grabbed, true);
        }
    }
    state.objects.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(id)
}

fn rename(action: &Action, map: &BTreeMap<ObjectId, ObjectId>) -> Result<Action> {
    let f = |id: &ObjectId| map.get(id).cloned().unwrap_or_else(|| id.clone());
    Action::new(action.interaction(), f(action.o1()), action.o2().map(f))
}

/// Non-reserve classes absent from the scene, most similar to `token` first.
fn similar_classes(state: &WorldState, token: &str, table: &EmbeddingTable) -> Vec<String> {
    let e = table.embed(token);
    let mut cands: Vec<(String, f64)> = class_catalog()
        .into_keys()
        .filter(|c| c != token && c != "floor" && !RESERVE_POOL.contains(&c.as_str()) && !state.classes.contains_key(c))
        .map(|c| {
            let s = cosine(&e, &table.embed(&c));
            (c, s)
        })
        .collect();
    cands.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    cands.into_iter().take(SWAP_NEIGHBORS).map(|(c, _)| c).collect()
}

fn variant(demo: &Demonstration, table: &EmbeddingTable, rng: &mut Rng, index: usize) -> Result<Demonstration> {
    let mut s = demo.initial.clone();
    jitter_scene(&mut s, JITTER, rng);
    let mut map = BTreeMap::new();
    if rng.random::<f64>() < SWAP_PROBABILITY {
        let floor = floor_of(&s);
        let goal_objects = demo.goal.objects();
        let cands: Vec<ObjectId> =
            s.sorted_ids().into_iter().filter(|id| Some(id) != floor.as_ref() && !goal_objects.contains(id)).collect();
        if !cands.is_empty() {
            let old = cands[rng.random_range(0..cands.len())].clone();
            let classes = similar_classes(&s, old.class_token(), table);
            if !classes.is_empty() {
                let token = &classes[rng.random_range(0..classes.len())];
                let new = replace_class(&mut s, &old, token)?;
                map.insert(old, new);
            }
        }
    }
    let cfg = SimConfig::deterministic();
    refresh_derived(&mut s, &cfg);
    s.validate()?;
    let plan: Vec<PlanStep> = demo
        .steps
        .iter()
        .map(|st| Ok(PlanStep { action: rename(&st.action, &map)?, ..st.planned() }))
        .collect::<Result<_>>()?;
    let (states, _) = replay_actions(&s, &plan, &demo.goal, &cfg)?;
    let steps = states.into_iter().zip(plan).map(|(state, p)| p.into_step(state)).collect();
    Ok(Demonstration {
        id: format!("{}~{index}", demo.id),
        scene_id: demo.scene_id.clone(),
        goal_id: demo.goal_id.clone(),
        goal: demo.goal.clone(),
        initial: s,
        steps,
        teacher: demo.teacher.clone(),
    })
}

/// Keeps every demonstration and adds up to `factor - 1` replay-valid
/// variants of each. Invalid variants are dropped and counted.
pub fn augment(corpus: &Corpus, factor: usize, table: &EmbeddingTable, seed: u64) -> Result<(Corpus, AugmentReport)> {
    if factor == 0 {
        return Err(Error::Config("augmentation factor must be at least 1".into()));
    }
    let mut out = corpus.clone();
    out.demos.clear();
    let mut report = AugmentReport { input: corpus.len(), ..Default::default() };
    for (i, demo) in corpus.demos.iter().enumerate() {
        out.demos.push(demo.clone());
        for j in 1..factor {
            let mut rng = rng_from_seed(derive_seed(derive_seed(seed, i as u64), j as u64));
            match variant(demo, table, &mut rng, j) {
                Ok(v) => {
                    out.demos.push(v);
                    report.produced += 1;
                }
                Err(_) => report.rejected += 1,
            }
        }
    }
    out.notes.push(format!(
        "augmented x{factor} seed {seed}: {} variants kept, {} rejected",
        report.produced, report.rejected
    ));
    Ok((out, report))
}
