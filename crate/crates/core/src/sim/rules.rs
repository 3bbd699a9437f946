use alloc::vec::Vec;

use super::SimConfig;
use crate::math::hypot;
use crate::world::{Action, Attribute, Capability, InteractionType, ObjectId, ObjectInstance, RelationEdge, RelationKind, WorldState};

/// Precondition names per interaction, in the order they are checked. Every
/// interaction first checks `unknown-object`.
pub const PRECONDITIONS: [(InteractionType, &[&str]); 13] = {
    use InteractionType::*;
    [
        (MoveTo, &["robot-elevated", "target-held"]),
        (Pick, &["not-graspable", "already-held", "container-closed", "hand-occupied", "unreachable"]),
        (Drop, &["not-holding", "invalid-destination", "not-receptacle", "container-closed", "unreachable"]),
        (Open, &["not-openable", "already-open", "hand-occupied", "unreachable"]),
        (Close, &["not-openable", "already-closed", "hand-occupied", "unreachable"]),
        (SwitchOn, &["not-operable", "already-on", "unreachable"]),
        (SwitchOff, &["not-operable", "already-off", "unreachable"]),
        (ClimbUp, &["not-climbable", "already-elevated", "hand-occupied", "target-elevated", "unreachable"]),
        (ClimbDown, &["not-climbable", "not-elevated", "not-standing-on"]),
        (Push, &["not-pushable", "robot-elevated", "hand-occupied", "invalid-destination", "unreachable"]),
        (Clean, &["no-cleaner", "not-dirty", "unreachable"]),
        (Apply, &["not-holding", "not-adhesive", "not-stickable", "already-sticky", "unreachable"]),
        (Stick, &["not-holding", "invalid-destination", "not-sticky", "unreachable"]),
    ]
};

fn half(o: &ObjectInstance) -> (f64, f64) {
    (o.size[0] / 2.0, o.size[1] / 2.0)
}

/// Planar distance from a point to an object's axis-aligned footprint.
pub fn footprint_distance(p: [f64; 2], o: &ObjectInstance) -> f64 {
    let (hx, hy) = half(o);
    let dx = ((p[0] - o.pose.x).abs() - hx).max(0.0);
    let dy = ((p[1] - o.pose.y).abs() - hy).max(0.0);
    hypot(dx, dy)
}

/// Planar gap between two footprints (zero when they overlap).
pub fn footprint_gap(a: &ObjectInstance, b: &ObjectInstance) -> f64 {
    let (ax, ay) = half(a);
    let (bx, by) = half(b);
    let dx = ((a.pose.x - b.pose.x).abs() - ax - bx).max(0.0);
    let dy = ((a.pose.y - b.pose.y).abs() - ay - by).max(0.0);
    hypot(dx, dy)
}

/// Elevation level an object sits at.
pub fn level_of(o: &ObjectInstance, cfg: &SimConfig) -> u8 {
    u8::from(o.pose.z >= cfg.elevated_height)
}

fn holding(state: &WorldState, tag: Capability) -> bool {
    state.robot.grabbed.as_ref().and_then(|g| state.class_of(g)).is_some_and(|c| c.has(tag))
}

/// Whether the robot can act on `target` from where it stands.
pub fn reachable(state: &WorldState, target: &ObjectId, cfg: &SimConfig) -> bool {
    let Some(o) = state.object(target) else { return false };
    if state.robot.grabbed.as_ref() == Some(target) {
        return true;
    }
    let mut radius = cfg.reach_radius;
    if holding(state, Capability::ReachExtender) {
        radius += cfg.stick_reach_bonus;
    }
    footprint_distance(state.robot.position, o) <= radius && level_of(o, cfg) <= state.robot.elevation
}

/// Everything resting on or inside `id`, transitively (excluding `id`).
pub(crate) fn load_of(state: &WorldState, id: &ObjectId) -> Vec<ObjectId> {
    let mut out: Vec<ObjectId> = Vec::new();
    let mut stack = alloc::vec![id.clone()];
    while let Some(n) = stack.pop() {
        for e in &state.relations {
            if matches!(e.kind, RelationKind::OnTop | RelationKind::Inside) && e.dst == n && !out.contains(&e.src) && &e.src != id {
                out.push(e.src.clone());
                stack.push(e.src.clone());
            }
        }
    }
    out
}

/// Translates `id` and its load so that `id`'s base ends at (x, y, z).
pub(crate) fn move_with_load(state: &mut WorldState, id: &ObjectId, x: f64, y: f64, z: f64) {
    let Some(o) = state.object(id) else { return };
    let (dx, dy, dz) = (x - o.pose.x, y - o.pose.y, z - o.pose.z);
    let mut ids = load_of(state, id);
    ids.push(id.clone());
    for o in state.objects.iter_mut().filter(|o| ids.contains(&o.id)) {
        o.pose.x += dx;
        o.pose.y += dy;
        o.pose.z += dz;
    }
}

fn is_inside_closed(state: &WorldState, id: &ObjectId) -> bool {
    state.parent(RelationKind::Inside, id).and_then(|c| state.object(c)).is_some_and(|c| {
        state.classes.get(&c.class).is_some_and(|k| k.has(Capability::Openable)) && !c.attr(Attribute::Open)
    })
}

/// First violated precondition, or `Ok` when the action can be executed.
pub fn applicable(state: &WorldState, action: &Action, cfg: &SimConfig) -> Result<(), &'static str> {
    use InteractionType::*;
    let o1 = action.o1();
    let Some(t1) = state.object(o1) else { return Err("unknown-object") };
    let t2 = match action.o2() {
        Some(id) => Some(state.object(id).ok_or("unknown-object")?),
        None => None,
    };
    let c1 = state.classes.get(&t1.class).ok_or("unknown-object")?;
    let held = state.robot.grabbed.as_ref();
    let hand_free = held.is_none();
    let elevated = state.robot.elevation > 0;
    let check = |ok: bool, name: &'static str| if ok { Ok(()) } else { Err(name) };
    match action.interaction() {
        MoveTo => {
            check(!elevated, "robot-elevated")?;
            let carried = held.is_some_and(|g| g == o1 || load_of(state, g).contains(o1));
            check(!carried, "target-held")
        }
        Pick => {
            let fits = t1.size[0].max(t1.size[1]) <= cfg.grasp_bound;
            check(c1.attributes.contains(&Attribute::Grabbed) && fits, "not-graspable")?;
            check(held != Some(o1), "already-held")?;
            check(!is_inside_closed(state, o1), "container-closed")?;
            check(hand_free, "hand-occupied")?;
            check(reachable(state, o1, cfg), "unreachable")
        }
        Drop => {
            let (o2, t2) = (action.o2().expect("arity"), t2.expect("arity"));
            check(held == Some(o1), "not-holding")?;
            check(o2 != o1 && !load_of(state, o1).contains(o2), "invalid-destination")?;
            let c2 = state.classes.get(&t2.class).ok_or("unknown-object")?;
            check(c2.has(Capability::Surface) || c2.has(Capability::Container), "not-receptacle")?;
            check(!(c2.has(Capability::Openable) && !t2.attr(Attribute::Open)), "container-closed")?;
            check(!is_inside_closed(state, o2), "container-closed")?;
            check(reachable(state, o2, cfg), "unreachable")
        }
        Open | Close => {
            check(c1.has(Capability::Openable), "not-openable")?;
            if action.interaction() == Open {
                check(!t1.attr(Attribute::Open), "already-open")?;
            } else {
                check(t1.attr(Attribute::Open), "already-closed")?;
            }
            check(hand_free, "hand-occupied")?;
            check(reachable(state, o1, cfg), "unreachable")
        }
        SwitchOn | SwitchOff => {
            check(c1.has(Capability::Operable), "not-operable")?;
            if action.interaction() == SwitchOn {
                check(!t1.attr(Attribute::On), "already-on")?;
            } else {
                check(t1.attr(Attribute::On), "already-off")?;
            }
            check(reachable(state, o1, cfg), "unreachable")
        }
        ClimbUp => {
            check(c1.has(Capability::Climbable), "not-climbable")?;
            check(!elevated, "already-elevated")?;
            check(hand_free, "hand-occupied")?;
            check(level_of(t1, cfg) == 0, "target-elevated")?;
            check(reachable(state, o1, cfg), "unreachable")
        }
        ClimbDown => {
            check(c1.has(Capability::Climbable), "not-climbable")?;
            check(elevated, "not-elevated")?;
            check(footprint_distance(state.robot.position, t1) == 0.0, "not-standing-on")
        }
        Push => {
            let (o2, t2) = (action.o2().expect("arity"), t2.expect("arity"));
            check(c1.has(Capability::Climbable), "not-pushable")?;
            check(!elevated, "robot-elevated")?;
            check(hand_free, "hand-occupied")?;
            let support = state.parent(RelationKind::OnTop, o1);
            let bad = o2 == o1 || support == Some(o2) || load_of(state, o1).contains(o2) || t2.class == "floor";
            check(!bad, "invalid-destination")?;
            check(reachable(state, o1, cfg), "unreachable")
        }
        Clean => {
            check(holding(state, Capability::Cleaner), "no-cleaner")?;
            check(t1.attr(Attribute::Dirty), "not-dirty")?;
            check(reachable(state, o1, cfg), "unreachable")
        }
        Apply => {
            let (o2, t2) = (action.o2().expect("arity"), t2.expect("arity"));
            check(held == Some(o1), "not-holding")?;
            check(c1.has(Capability::ApplicableAdhesive), "not-adhesive")?;
            let c2 = state.classes.get(&t2.class).ok_or("unknown-object")?;
            check(c2.attributes.contains(&Attribute::Sticky), "not-stickable")?;
            check(!t2.attr(Attribute::Sticky), "already-sticky")?;
            check(reachable(state, o2, cfg), "unreachable")
        }
        Stick => {
            let (o2, t2) = (action.o2().expect("arity"), t2.expect("arity"));
            check(held == Some(o1), "not-holding")?;
            check(o2 != o1 && !load_of(state, o1).contains(o2), "invalid-destination")?;
            check(t2.attr(Attribute::Sticky), "not-sticky")?;
            check(reachable(state, o2, cfg), "unreachable")
        }
    }
}

fn hand_pose(state: &WorldState) -> (f64, f64, f64) {
    let [x, y] = state.robot.position;
    (x, y, 0.8 + 0.5 * f64::from(state.robot.elevation))
}

fn detach(state: &mut WorldState, id: &ObjectId) {
    state.relations.retain(|e| !(matches!(e.kind, RelationKind::OnTop | RelationKind::Inside) && &e.src == id));
}

fn release(state: &mut WorldState, id: &ObjectId) {
    state.robot.grabbed = None;
    if let Some(o) = state.object_mut(id) {
        o.set_attr(Attribute::Grabbed, false);
    }
}

fn clamp_into(p: [f64; 2], support: &ObjectInstance, inner: &ObjectInstance) -> (f64, f64) {
    let hx = ((support.size[0] - inner.size[0]) / 2.0).max(0.0);
    let hy = ((support.size[1] - inner.size[1]) / 2.0).max(0.0);
    (p[0].clamp(support.pose.x - hx, support.pose.x + hx), p[1].clamp(support.pose.y - hy, support.pose.y + hy))
}

fn clamp_room(state: &WorldState, p: [f64; 2]) -> [f64; 2] {
    [p[0].clamp(0.0, state.room[0]), p[1].clamp(0.0, state.room[1])]
}

/// Deterministic schema effects of an applicable action. Derived state (Near
/// edges, Inside flags) is refreshed by the caller.
pub fn effects(state: &mut WorldState, action: &Action, cfg: &SimConfig) {
    use InteractionType::*;
    let o1 = action.o1().clone();
    let Some(t1) = state.object(&o1).cloned() else { return };
    match action.interaction() {
        MoveTo => {
            let p = state.robot.position;
            let (hx, hy) = half(&t1);
            let c = [p[0].clamp(t1.pose.x - hx, t1.pose.x + hx), p[1].clamp(t1.pose.y - hy, t1.pose.y + hy)];
            let d = hypot(p[0] - c[0], p[1] - c[1]);
            if d > 0.0 {
                let k = cfg.reach_radius / 2.0 / d;
                let target = [c[0] + (p[0] - c[0]) * k, c[1] + (p[1] - c[1]) * k];
                state.robot.position = clamp_room(state, target);
            }
            if let Some(g) = state.robot.grabbed.clone() {
                let (x, y, z) = hand_pose(state);
                move_with_load(state, &g, x, y, z);
            }
        }
        Pick => {
            detach(state, &o1);
            if let Some(o) = state.object_mut(&o1) {
                o.set_attr(Attribute::Grabbed, true);
            }
            state.robot.grabbed = Some(o1.clone());
            let (x, y, z) = hand_pose(state);
            move_with_load(state, &o1, x, y, z);
        }
        Drop => {
            let o2 = action.o2().expect("arity").clone();
            let Some(t2) = state.object(&o2).cloned() else { return };
            release(state, &o1);
            let container = state.classes.get(&t2.class).is_some_and(|c| c.has(crate::world::Capability::Container));
            if container {
                // A carrier dropped into a container releases its load there.
                let children: Vec<ObjectId> = state
                    .relations
                    .iter()
                    .filter(|e| matches!(e.kind, RelationKind::OnTop | RelationKind::Inside) && e.dst == o1)
                    .map(|e| e.src.clone())
                    .collect();
                for c in children {
                    detach(state, &c);
                    move_with_load(state, &c, t2.pose.x, t2.pose.y, t2.pose.z);
                    state.relations.insert(RelationEdge::new(RelationKind::Inside, c, o2.clone()));
                }
                move_with_load(state, &o1, t2.pose.x, t2.pose.y, t2.pose.z);
                state.relations.insert(RelationEdge::new(RelationKind::Inside, o1, o2));
            } else {
                let (x, y) = clamp_into(state.robot.position, &t2, &t1);
                move_with_load(state, &o1, x, y, t2.top());
                state.relations.insert(RelationEdge::new(RelationKind::OnTop, o1, o2));
            }
        }
        Open | Close => {
            let v = action.interaction() == Open;
            if let Some(o) = state.object_mut(&o1) {
                o.set_attr(Attribute::Open, v);
            }
        }
        SwitchOn | SwitchOff => {
            let v = action.interaction() == SwitchOn;
            if let Some(o) = state.object_mut(&o1) {
                o.set_attr(Attribute::On, v);
            }
        }
        ClimbUp => {
            state.robot.elevation = 1;
            state.robot.position = [t1.pose.x, t1.pose.y];
        }
        ClimbDown => {
            state.robot.elevation = 0;
        }
        Push => {
            let o2 = action.o2().expect("arity");
            let Some(t2) = state.object(o2).cloned() else { return };
            let p = state.robot.position;
            let (mut dx, mut dy) = (p[0] - t2.pose.x, p[1] - t2.pose.y);
            let n = hypot(dx, dy);
            if n > 1e-9 {
                dx /= n;
                dy /= n;
            } else {
                (dx, dy) = (1.0, 0.0);
            }
            // Distance along the direction to leave o2's footprint.
            let (hx2, hy2) = half(&t2);
            let ex = if dx.abs() > 1e-12 { hx2 / dx.abs() } else { f64::INFINITY };
            let ey = if dy.abs() > 1e-12 { hy2 / dy.abs() } else { f64::INFINITY };
            let (hx1, hy1) = half(&t1);
            let t = ex.min(ey) + hx1.max(hy1) + 0.05;
            let target = clamp_room(state, [t2.pose.x + dx * t, t2.pose.y + dy * t]);
            move_with_load(state, &o1, target[0], target[1], t1.pose.z);
            let back = hx1.max(hy1) + cfg.reach_radius / 2.0;
            state.robot.position = clamp_room(state, [target[0] + dx * back, target[1] + dy * back]);
        }
        Clean => {
            if let Some(o) = state.object_mut(&o1) {
                o.set_attr(Attribute::Dirty, false);
            }
        }
        Apply => {
            let o2 = action.o2().expect("arity");
            if let Some(o) = state.object_mut(o2) {
                o.set_attr(Attribute::Sticky, true);
            }
        }
        Stick => {
            let o2 = action.o2().expect("arity").clone();
            let Some(t2) = state.object(&o2).cloned() else { return };
            release(state, &o1);
            move_with_load(state, &o1, t2.pose.x, t2.pose.y, t2.top());
            state.relations.insert(RelationEdge::new(RelationKind::ConnectedTo, o1, o2));
        }
    }
}
