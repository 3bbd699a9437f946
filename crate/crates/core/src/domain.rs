//! The micro-home domain: object classes, the goal catalog, the reserve class
//! pool used by generalization tests, and a seeded scene generator.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::sim::{refresh_derived, SimConfig};
use crate::world::{
    Attribute, Capability, Constraint, Goal, ObjectClass, ObjectId, ObjectInstance, Pose, RelationEdge,
    RelationKind, WorldState,
};
use crate::{derive_seed, rng_from_seed, Rng};

/// Room extent in meters.
pub const ROOM: [f64; 3] = [6.0, 5.0, 3.0];

/// Classes never placed in generated scenes; used to test generalization.
pub const RESERVE_POOL: [&str; 6] = ["box", "juice", "ladder", "pear", "tape", "vacuum"];

/// A class together with the default extent of its instances.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassSpec {
    pub class: ObjectClass,
    pub size: [f64; 3],
}

fn spec(token: &str, tool: bool, tags: &[Capability], attrs: &[Attribute], size: [f64; 3]) -> ClassSpec {
    ClassSpec { class: ObjectClass::new(token, tool, tags, attrs), size }
}

/// Every class the domain knows about, keyed by token.
pub fn class_catalog() -> BTreeMap<String, ClassSpec> {
    use Attribute::*;
    use Capability::*;
    let item = [Grabbed, Inside];
    let specs = [
        spec("floor", false, &[Surface], &[], [ROOM[0], ROOM[1], 0.01]),
        spec("table", false, &[Surface], &[], [1.4, 0.8, 0.75]),
        spec("shelf", false, &[Surface], &[], [1.0, 0.4, 1.2]),
        spec("fridge", false, &[Container, Openable], &[Open], [0.8, 0.7, 1.8]),
        spec("cupboard", false, &[Container, Openable], &[Open], [1.0, 0.5, 0.9]),
        spec("dumpster", false, &[Container], &[], [0.6, 0.6, 0.8]),
        spec("light_switch", false, &[Operable], &[On], [0.1, 0.05, 0.1]),
        spec("milk", false, &[], &item, [0.08, 0.08, 0.25]),
        spec("juice", false, &[], &item, [0.08, 0.08, 0.22]),
        spec("apple", false, &[], &item, [0.08, 0.08, 0.08]),
        spec("orange", false, &[], &item, [0.08, 0.08, 0.08]),
        spec("pear", false, &[], &item, [0.07, 0.07, 0.1]),
        spec("bottle", false, &[], &item, [0.08, 0.08, 0.3]),
        spec("book", false, &[], &item, [0.25, 0.18, 0.04]),
        spec("paper", false, &[], &[Grabbed, Inside, Sticky], [0.3, 0.21, 0.01]),
        spec("dirt", false, &[], &[Dirty], [0.3, 0.3, 0.01]),
        spec("tray", true, &[Surface], &item, [0.4, 0.3, 0.03]),
        spec("box", true, &[Container], &item, [0.4, 0.3, 0.25]),
        spec("stool", true, &[Climbable], &[], [0.45, 0.45, 0.5]),
        spec("ladder", true, &[Climbable], &[], [0.5, 0.3, 1.5]),
        spec("stick", true, &[ReachExtender], &item, [0.4, 0.03, 0.03]),
        spec("mop", true, &[Cleaner], &item, [0.3, 0.3, 1.2]),
        spec("vacuum", true, &[Cleaner], &item, [0.35, 0.3, 1.0]),
        spec("glue", true, &[ApplicableAdhesive], &item, [0.05, 0.05, 0.12]),
        spec("tape", true, &[ApplicableAdhesive], &item, [0.1, 0.1, 0.05]),
    ];
    specs.into_iter().map(|s| (s.class.token.clone(), s)).collect()
}

pub fn class_spec(token: &str) -> Result<ClassSpec> {
    class_catalog().remove(token).ok_or_else(|| Error::UnknownClass(token.to_string()))
}

/// Declared substitute for a tool class.
pub fn alternative(token: &str) -> Option<&'static str> {
    match token {
        "tray" => Some("box"),
        "mop" => Some("vacuum"),
        "stool" => Some("ladder"),
        "glue" => Some("tape"),
        _ => None,
    }
}

/// Tool each catalog goal's expert relies on, if any.
pub fn goal_tool(goal_id: &str) -> Option<&'static str> {
    match goal_id {
        "fruits_cupboard" => Some("tray"),
        "clean_floor" => Some("mop"),
        "bottle_dumpster" => Some("stool"),
        _ => None,
    }
}

/// Goals whose expert moves objects with a carrier tool.
pub const TRANSPORT_GOALS: [&str; 1] = ["fruits_cupboard"];

pub const GOAL_IDS: [&str; 5] = ["milk_fridge", "fruits_cupboard", "light_on", "clean_floor", "bottle_dumpster"];

pub fn goal(id: &str) -> Result<Goal> {
    use Attribute::{Dirty, On, Open};
    use RelationKind::Inside;
    let g = match id {
        "milk_fridge" => Goal::new(
            "place milk in fridge",
            alloc::vec![Constraint::relation(Inside, "milk_0", "fridge_0"), Constraint::attribute("fridge_0", Open, false)],
        ),
        "fruits_cupboard" => Goal::new(
            "place fruits in cupboard",
            alloc::vec![
                Constraint::relation(Inside, "apple_0", "cupboard_0"),
                Constraint::relation(Inside, "orange_0", "cupboard_0"),
                Constraint::attribute("cupboard_0", Open, false),
            ],
        ),
        "light_on" => Goal::new("illuminate the room", alloc::vec![Constraint::attribute("light_switch_0", On, true)]),
        "clean_floor" => Goal::new("remove dirt from floor", alloc::vec![Constraint::attribute("dirt_0", Dirty, false)]),
        "bottle_dumpster" => {
            Goal::new("throw bottle in dumpster", alloc::vec![Constraint::relation(Inside, "bottle_0", "dumpster_0")])
        }
        _ => {
            return Err(Error::UnknownGoal {
                id: id.to_string(),
                available: GOAL_IDS.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    Ok(g)
}

/// Id of the generated scene with the given index.
pub fn scene_id(index: usize) -> String {
    format!("home_{index:02}")
}

/// Generated scenes addressed by id; scene `home_k` is built from a seed
/// derived from the domain seed and `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct MicroHome {
    pub seed: u64,
    pub scenes: usize,
}

impl Default for MicroHome {
    fn default() -> Self {
        Self { seed: 7, scenes: 12 }
    }
}

impl MicroHome {
    pub fn scene_ids(&self) -> Vec<String> {
        (0..self.scenes).map(scene_id).collect()
    }

    pub fn scene(&self, id: &str) -> Result<WorldState> {
        let index = self.scene_ids().iter().position(|s| s == id).ok_or_else(|| Error::UnknownScene {
            id: id.to_string(),
            available: self.scene_ids(),
        })?;
        generate_scene(derive_seed(self.seed, index as u64))
    }
}

/// Adds an instance of `token` at `pose`, returning its id.
pub fn add_object(state: &mut WorldState, token: &str, pose: Pose) -> Result<ObjectId> {
    let spec = class_spec(token)?;
    let index = (0..).find(|i| !state.contains(&ObjectId::new(token, *i))).unwrap_or(0);
    let id = ObjectId::new(token, index);
    let obj = ObjectInstance::new(id.clone(), &spec.class, pose, spec.size);
    state.insert_object(&spec.class, obj);
    Ok(id)
}

fn floor_pose(x: f64, y: f64) -> Pose {
    Pose { x, y, z: 0.01, yaw: 0.0 }
}

struct Layout<'a> {
    rng: &'a mut Rng,
    /// Planar discs already taken on the floor.
    taken: Vec<([f64; 2], f64)>,
}

impl Layout<'_> {
    fn free_floor_spot(&mut self, radius: f64) -> [f64; 2] {
        let mut best = [ROOM[0] / 2.0, ROOM[1] / 2.0];
        for _ in 0..200 {
            let p = [self.rng.random_range(0.5..ROOM[0] - 0.5), self.rng.random_range(1.3..ROOM[1] - 1.3)];
            best = p;
            if self.taken.iter().all(|(q, r)| crate::math::hypot(p[0] - q[0], p[1] - q[1]) > r + radius) {
                break;
            }
        }
        self.taken.push((best, radius));
        best
    }
}

/// Point on the top face of `support`, inset so an object of `size` fits.
fn spot_on(support: &ObjectInstance, size: [f64; 3], rng: &mut Rng, spread: f64) -> Pose {
    let hx = ((support.size[0] - size[0]) / 2.0 * spread).max(0.0);
    let hy = ((support.size[1] - size[1]) / 2.0 * spread).max(0.0);
    let x = support.pose.x + if hx > 0.0 { rng.random_range(-hx..hx) } else { 0.0 };
    let y = support.pose.y + if hy > 0.0 { rng.random_range(-hy..hy) } else { 0.0 };
    Pose { x, y, z: support.top(), yaw: 0.0 }
}

fn place(state: &mut WorldState, token: &str, support: &ObjectId, rng: &mut Rng, spread: f64) -> Result<ObjectId> {
    let size = class_spec(token)?.size;
    let pose = spot_on(state.require(support)?, size, rng, spread);
    let id = add_object(state, token, pose)?;
    state.relations.insert(RelationEdge::new(RelationKind::OnTop, id.clone(), support.clone()));
    Ok(id)
}

/// Builds a randomized micro-home scene. Furniture sits along the two long
/// walls, the table in the middle, loose items on the table or floor; the
/// bottle always starts on the shelf.
pub fn generate_scene(seed: u64) -> Result<WorldState> {
    let mut rng = rng_from_seed(seed);
    let rng = &mut rng;
    let mut s = WorldState::empty(ROOM);
    let floor = add_object(&mut s, "floor", Pose { x: ROOM[0] / 2.0, y: ROOM[1] / 2.0, z: 0.0, yaw: 0.0 })?;

    // Six wall slots, three per long wall.
    let mut slots: Vec<(f64, bool)> = [1.0, 3.0, 5.0].iter().flat_map(|&x| [(x, false), (x, true)]).collect();
    for i in (1..slots.len()).rev() {
        let j = rng.random_range(0..=i);
        slots.swap(i, j);
    }
    let mut taken = Vec::new();
    for (k, token) in ["fridge", "cupboard", "dumpster", "shelf"].iter().enumerate() {
        let (sx, far) = slots[k];
        let size = class_spec(token)?.size;
        let x = sx + rng.random_range(-0.25..0.25);
        let y = if far { ROOM[1] - size[1] / 2.0 - 0.05 } else { size[1] / 2.0 + 0.05 };
        add_object(&mut s, token, floor_pose(x, y))?;
        taken.push(([x, y], 0.6));
    }
    let table_xy = [rng.random_range(2.2..3.8), rng.random_range(2.1..2.9)];
    let table = add_object(&mut s, "table", floor_pose(table_xy[0], table_xy[1]))?;
    taken.push((table_xy, 0.9));
    let side = if rng.random_bool(0.5) { 0.05 } else { ROOM[0] - 0.05 };
    add_object(&mut s, "light_switch", Pose { x: side, y: rng.random_range(1.5..3.5), z: 0.9, yaw: 0.0 })?;
    let furniture: Vec<ObjectId> = s.sorted_ids().into_iter().filter(|id| id != &floor && id.class_token() != "light_switch").collect();
    for id in furniture {
        s.relations.insert(RelationEdge::new(RelationKind::OnTop, id, floor.clone()));
    }

    let mut layout = Layout { rng, taken };
    let on_floor = |s: &mut WorldState, layout: &mut Layout, token: &str, r: f64| -> Result<ObjectId> {
        let p = layout.free_floor_spot(r);
        let id = add_object(s, token, floor_pose(p[0], p[1]))?;
        s.relations.insert(RelationEdge::new(RelationKind::OnTop, id.clone(), floor.clone()));
        Ok(id)
    };
    for (token, p_table) in [("milk", 0.6), ("apple", 0.5), ("orange", 0.5), ("tray", 0.5), ("book", 0.5)] {
        if token == "book" && layout.rng.random_bool(0.5) {
            continue;
        }
        if layout.rng.random_bool(p_table) {
            place(&mut s, token, &table, layout.rng, 0.8)?;
        } else {
            on_floor(&mut s, &mut layout, token, 0.3)?;
        }
    }
    let shelf = ObjectId::new("shelf", 0);
    place(&mut s, "bottle", &shelf, layout.rng, 0.2)?;
    on_floor(&mut s, &mut layout, "stool", 0.4)?;
    on_floor(&mut s, &mut layout, "mop", 0.3)?;
    on_floor(&mut s, &mut layout, "dirt", 0.3)?;
    if layout.rng.random_bool(0.5) {
        on_floor(&mut s, &mut layout, "stick", 0.3)?;
    }
    for token in ["fridge", "cupboard"] {
        let open = layout.rng.random_bool(0.3);
        if let Some(o) = s.object_mut(&ObjectId::new(token, 0)) {
            o.set_attr(Attribute::Open, open);
        }
    }
    if let Some(d) = s.object_mut(&ObjectId::new("dirt", 0)) {
        d.set_attr(Attribute::Dirty, true);
    }
    let start = layout.free_floor_spot(0.2);
    s.robot.position = start;
    s.objects.sort_by(|a, b| a.id.cmp(&b.id));
    refresh_derived(&mut s, &SimConfig::default());
    s.validate()?;
    Ok(s)
}
