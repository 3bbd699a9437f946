use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::augment::{jitter_scene, replace_class};
use super::Corpus;
use crate::domain::{add_object, alternative, class_catalog};
use crate::embed::{nearest_class, EmbeddingTable};
use crate::error::{Error, Result};
use crate::sim::{floor_of, refresh_derived, SimConfig};
use crate::world::{Attribute, Goal, ObjectId, RelationEdge, RelationKind, WorldState};
use crate::{derive_seed, rng_from_seed};

/// How an evaluation set departs from the demonstrations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Strategy {
    /// Pose jitter of up to `radius` meters plus, when the radius is
    /// positive, one exchange of two loose items.
    Position { radius: f64 },
    /// The most used tool is removed and its declared alternative added.
    Alternate,
    /// The most used tool is replaced by the closest reserve class.
    Unseen,
    /// The most used tool is replaced by an unrelated class.
    Random,
    /// Goal items are replaced by reserve classes.
    Goal,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Position { .. } => "position",
            Strategy::Alternate => "alternate",
            Strategy::Unseen => "unseen",
            Strategy::Random => "random",
            Strategy::Goal => "goal",
        }
    }

    pub fn from_name(name: &str) -> Result<Strategy> {
        Ok(match name {
            "position" => Strategy::Position { radius: 0.5 },
            "alternate" => Strategy::Alternate,
            "unseen" => Strategy::Unseen,
            "random" => Strategy::Random,
            "goal" => Strategy::Goal,
            _ => return Err(Error::Config(format!("unknown generalization set `{name}`"))),
        })
    }
}

/// One evaluation episode start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalCase {
    pub id: String,
    pub scene_id: String,
    pub goal_id: String,
    pub scene: WorldState,
    pub goal: Goal,
}

/// Per goal, the tool class whose instances appear in the most demonstrated
/// actions. Ties go to the smaller token.
pub fn most_used_tools(corpus: &Corpus) -> BTreeMap<String, String> {
    let mut counts: BTreeMap<&str, BTreeMap<String, usize>> = BTreeMap::new();
    for d in &corpus.demos {
        let per = counts.entry(d.goal_id.as_str()).or_default();
        for step in &d.steps {
            let a = &step.action;
            for id in core::iter::once(a.o1()).chain(a.o2()) {
                if step.state.class_of(id).is_some_and(|c| c.is_tool) {
                    *per.entry(id.class_token().to_string()).or_default() += 1;
                }
            }
        }
    }
    counts
        .into_iter()
        .filter_map(|(g, per)| {
            let best = per.iter().max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))?;
            Some((g.to_string(), best.0.clone()))
        })
        .collect()
}

fn instances_of(state: &WorldState, token: &str) -> Vec<ObjectId> {
    state.sorted_ids().into_iter().filter(|id| state.object(id).is_some_and(|o| o.class == token)).collect()
}

/// Distinct (scene, goal) starts of the corpus, first demonstration wins.
fn starts(corpus: &Corpus) -> Vec<(String, String, WorldState, Goal)> {
    let mut seen = BTreeSet::new();
    corpus
        .demos
        .iter()
        .filter(|d| seen.insert(d.group()))
        .map(|d| (d.scene_id.clone(), d.goal_id.clone(), d.initial.clone(), d.goal.clone()))
        .collect()
}

/// The corpus' distinct (scene, goal) starts as unmodified episodes.
pub fn episode_starts(corpus: &Corpus, tag: &str) -> Vec<EvalCase> {
    starts(corpus)
        .into_iter()
        .map(|(scene_id, goal_id, scene, goal)| EvalCase { id: format!("{tag}/{scene_id}/{goal_id}"), scene_id, goal_id, scene, goal })
        .collect()
}

fn is_item(state: &WorldState, id: &ObjectId) -> bool {
    state.class_of(id).is_some_and(|c| c.attributes.contains(&Attribute::Grabbed) && !c.is_tool)
}

/// Swaps the poses and supports of two loose items outside the goal.
fn exchange(state: &mut WorldState, goal: &Goal, rng: &mut crate::Rng) {
    let goal_objects = goal.objects();
    let loose: Vec<ObjectId> = state
        .sorted_ids()
        .into_iter()
        .filter(|id| {
            state.class_of(id).is_some_and(|c| c.attributes.contains(&Attribute::Grabbed))
                && !goal_objects.contains(id)
                && state.robot.grabbed.as_ref() != Some(id)
                && state.parent(RelationKind::Inside, id).is_none()
                && state.children(RelationKind::OnTop, id).is_empty()
        })
        .collect();
    if loose.len() < 2 {
        return;
    }
    let i = rng.random_range(0..loose.len());
    let mut j = rng.random_range(0..loose.len() - 1);
    if j >= i {
        j += 1;
    }
    let (a, b) = (loose[i].clone(), loose[j].clone());
    let (pa, pb) = (state.object(&a).map(|o| o.pose), state.object(&b).map(|o| o.pose));
    let (Some(pa), Some(pb)) = (pa, pb) else { return };
    let sa = state.parent(RelationKind::OnTop, &a).cloned();
    let sb = state.parent(RelationKind::OnTop, &b).cloned();
    if let Some(o) = state.object_mut(&a) {
        o.pose = pb;
    }
    if let Some(o) = state.object_mut(&b) {
        o.pose = pa;
    }
    state.relations.retain(|e| !(e.kind == RelationKind::OnTop && (e.src == a || e.src == b)));
    if let Some(s) = sb {
        state.relations.insert(RelationEdge::new(RelationKind::OnTop, a, s));
    }
    if let Some(s) = sa {
        state.relations.insert(RelationEdge::new(RelationKind::OnTop, b, s));
    }
}

/// Builds evaluation episodes from the distinct (scene, goal) starts of
/// `corpus`. Tool strategies skip goals without a demonstrated tool; the
/// goal strategy skips goals without a movable goal item.
pub fn make_generalization_set(
    corpus: &Corpus,
    strategy: &Strategy,
    table: &EmbeddingTable,
    reserve: &[&str],
    seed: u64,
) -> Result<Vec<EvalCase>> {
    let needs_reserve = matches!(strategy, Strategy::Unseen | Strategy::Goal);
    if needs_reserve && reserve.is_empty() {
        return Err(Error::EmptyReservePool);
    }
    let tools = most_used_tools(corpus);
    let catalog = class_catalog();
    let cfg = SimConfig::deterministic();
    let mut out = Vec::new();
    for (k, (scene_id, goal_id, mut scene, mut goal)) in starts(corpus).into_iter().enumerate() {
        let mut rng = rng_from_seed(derive_seed(seed, k as u64));
        let tool = tools.get(&goal_id).filter(|t| !instances_of(&scene, t).is_empty());
        match strategy {
            Strategy::Position { radius } => {
                jitter_scene(&mut scene, *radius, &mut rng);
                if *radius > 0.0 {
                    exchange(&mut scene, &goal, &mut rng);
                }
            }
            Strategy::Alternate => {
                let Some(tool) = tool else { continue };
                let ids = instances_of(&scene, tool);
                let anchor = scene.object(&ids[0]).map(|o| o.pose);
                let support = scene.parent(RelationKind::OnTop, &ids[0]).cloned();
                for id in &ids {
                    scene.remove_object(id);
                }
                if let (Some(alt), Some(pose)) = (alternative(tool), anchor) {
                    let id = add_object(&mut scene, alt, pose)?;
                    if let Some(s) = support.or_else(|| floor_of(&scene)) {
                        scene.relations.insert(RelationEdge::new(RelationKind::OnTop, id, s));
                    }
                }
            }
            Strategy::Unseen => {
                let Some(tool) = tool else { continue };
                let replacement = nearest_class(table, tool, reserve).ok_or(Error::EmptyReservePool)?;
                for id in instances_of(&scene, tool) {
                    replace_class(&mut scene, &id, replacement)?;
                }
            }
            Strategy::Random => {
                let Some(tool) = tool else { continue };
                let goal_classes: Vec<String> = goal.objects().iter().map(|o| o.class_token().to_string()).collect();
                let unrelated: Vec<&String> = catalog
                    .iter()
                    .filter(|(t, c)| {
                        !c.class.is_tool
                            && t.as_str() != "floor"
                            && !reserve.contains(&t.as_str())
                            && !goal_classes.contains(t)
                    })
                    .map(|(t, _)| t)
                    .collect();
                let pick = unrelated[rng.random_range(0..unrelated.len())].clone();
                for id in instances_of(&scene, tool) {
                    replace_class(&mut scene, &id, &pick)?;
                }
            }
            Strategy::Goal => {
                let items: Vec<&str> = reserve
                    .iter()
                    .copied()
                    .filter(|t| catalog.get(*t).is_some_and(|c| !c.class.is_tool && c.class.attributes.contains(&Attribute::Grabbed)))
                    .collect();
                if items.is_empty() {
                    return Err(Error::EmptyReservePool);
                }
                let mut map = BTreeMap::new();
                for id in goal.objects() {
                    if is_item(&scene, &id) {
                        let token = nearest_class(table, id.class_token(), &items).ok_or(Error::EmptyReservePool)?;
                        let new = replace_class(&mut scene, &id, token)?;
                        map.insert(id, new);
                    }
                }
                if map.is_empty() {
                    continue;
                }
                goal = goal.map_ids(|id| map.get(id).cloned().unwrap_or_else(|| id.clone()));
            }
        }
        scene.objects.sort_by(|a, b| a.id.cmp(&b.id));
        refresh_derived(&mut scene, &cfg);
        scene.validate()?;
        out.push(EvalCase { id: format!("{}/{scene_id}/{goal_id}", strategy.name()), scene_id, goal_id, scene, goal });
    }
    Ok(out)
}
