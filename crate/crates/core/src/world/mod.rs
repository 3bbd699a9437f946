//! Object-centric world representation: objects with symbolic attributes and
//! coarse metric pose, typed relation edges, the robot posture, goals and the
//! symbolic action vocabulary.

mod action;
mod goal;
mod graph;

pub use action::{Action, InteractionType};
pub use goal::{goal_satisfied, Constraint, Goal};
pub use graph::{build_scene_graph, SceneGraph};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of the attribute vector fed to the network.
pub const ATTRIBUTE_WIDTH: usize = 29;

/// Discrete object attributes. Each variant stands for one attribute pair
/// (`Open` covers Open/Closed); `true` means the first word of the pair holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Grabbed,
    Inside,
    On,
    Open,
    Sticky,
    Dirty,
    Welded,
    Drilled,
    Driven,
    Cut,
    Painted,
}

impl Attribute {
    pub const ALL: [Attribute; 11] = [
        Attribute::Grabbed,
        Attribute::Inside,
        Attribute::On,
        Attribute::Open,
        Attribute::Sticky,
        Attribute::Dirty,
        Attribute::Welded,
        Attribute::Drilled,
        Attribute::Driven,
        Attribute::Cut,
        Attribute::Painted,
    ];

    /// Word for the literal `attribute = value`, e.g. `Open=false` is "closed".
    pub fn token(self, value: bool) -> &'static str {
        let (yes, no) = match self {
            Attribute::Grabbed => ("grabbed", "free"),
            Attribute::Inside => ("inside", "outside"),
            Attribute::On => ("on", "off"),
            Attribute::Open => ("open", "closed"),
            Attribute::Sticky => ("sticky", "notsticky"),
            Attribute::Dirty => ("dirty", "clean"),
            Attribute::Welded => ("welded", "notwelded"),
            Attribute::Drilled => ("drilled", "notdrilled"),
            Attribute::Driven => ("driven", "notdriven"),
            Attribute::Cut => ("cut", "notcut"),
            Attribute::Painted => ("painted", "notpainted"),
        };
        if value {
            yes
        } else {
            no
        }
    }

    pub fn from_token(token: &str) -> Option<(Attribute, bool)> {
        Attribute::ALL.iter().find_map(|&a| {
            if a.token(true) == token {
                Some((a, true))
            } else if a.token(false) == token {
                Some((a, false))
            } else {
                None
            }
        })
    }
}

/// Fixed slot order of the attribute vector. Slots past the eleven attribute
/// pairs are reserved and always zero.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributeVocabulary {
    slots: Vec<Option<Attribute>>,
}

impl Default for AttributeVocabulary {
    fn default() -> Self {
        let mut slots: Vec<Option<Attribute>> = Attribute::ALL.iter().copied().map(Some).collect();
        slots.resize(ATTRIBUTE_WIDTH, None);
        Self { slots }
    }
}

impl AttributeVocabulary {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn index_of(&self, attribute: Attribute) -> Option<usize> {
        self.slots.iter().position(|s| *s == Some(attribute))
    }

    /// Binary vector with a one at every slot whose attribute applies to the
    /// object and is currently true.
    pub fn attribute_vector(&self, obj: &ObjectInstance) -> Vec<f64> {
        self.slots
            .iter()
            .map(|slot| match slot {
                Some(a) if obj.attributes.get(a).copied().unwrap_or(false) => 1.0,
                _ => 0.0,
            })
            .collect()
    }
}

/// Capability tags carried by an object class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Capability {
    Surface,
    Container,
    Openable,
    Operable,
    Climbable,
    Cleaner,
    ApplicableAdhesive,
    Fuel,
    ReachExtender,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectClass {
    pub token: String,
    pub attributes: BTreeSet<Attribute>,
    pub is_tool: bool,
    pub tags: BTreeSet<Capability>,
}

impl ObjectClass {
    pub fn new(token: &str, is_tool: bool, tags: &[Capability], attributes: &[Attribute]) -> Self {
        Self {
            token: token.to_string(),
            attributes: attributes.iter().copied().collect(),
            is_tool,
            tags: tags.iter().copied().collect(),
        }
    }

    pub fn has(&self, tag: Capability) -> bool {
        self.tags.contains(&tag)
    }
}

/// Instance identifier of the form `classtoken_index`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub String);

impl ObjectId {
    pub fn new(class: &str, index: usize) -> Self {
        ObjectId(format!("{class}_{index}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Class token recovered from the id (everything before the last `_`).
    pub fn class_token(&self) -> &str {
        match self.0.rsplit_once('_') {
            Some((class, idx)) if !class.is_empty() && idx.bytes().all(|b| b.is_ascii_digit()) => class,
            _ => &self.0,
        }
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        ObjectId(s.to_string())
    }
}

/// Position in meters (room frame, `z` is the height of the object's base)
/// plus yaw in radians.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: ObjectId,
    /// Token of the object's class; resolved against [`WorldState::classes`].
    pub class: String,
    pub attributes: BTreeMap<Attribute, bool>,
    pub pose: Pose,
    /// Extent along x, y, z in meters.
    pub size: [f64; 3],
}

impl ObjectInstance {
    /// New instance with every schema attribute false.
    pub fn new(id: ObjectId, class: &ObjectClass, pose: Pose, size: [f64; 3]) -> Self {
        Self {
            id,
            class: class.token.clone(),
            attributes: class.attributes.iter().map(|&a| (a, false)).collect(),
            pose,
            size,
        }
    }

    pub fn attr(&self, a: Attribute) -> bool {
        self.attributes.get(&a).copied().unwrap_or(false)
    }

    pub fn set_attr(&mut self, a: Attribute, value: bool) {
        if let Some(v) = self.attributes.get_mut(&a) {
            *v = value;
        }
    }

    /// Top of the object (base height plus vertical extent).
    pub fn top(&self) -> f64 {
        self.pose.z + self.size[2]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationKind {
    OnTop,
    Inside,
    Near,
    ConnectedTo,
}

impl RelationKind {
    pub const ALL: [RelationKind; 4] =
        [RelationKind::OnTop, RelationKind::Inside, RelationKind::Near, RelationKind::ConnectedTo];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn token(self) -> &'static str {
        match self {
            RelationKind::OnTop => "ontop",
            RelationKind::Inside => "inside",
            RelationKind::Near => "near",
            RelationKind::ConnectedTo => "connectedto",
        }
    }

    pub fn from_name(name: &str) -> Option<RelationKind> {
        RelationKind::ALL
            .iter()
            .copied()
            .find(|k| k.token() == name.to_ascii_lowercase() || format!("{k:?}") == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationEdge {
    pub kind: RelationKind,
    pub src: ObjectId,
    pub dst: ObjectId,
}

impl RelationEdge {
    pub fn new(kind: RelationKind, src: impl Into<ObjectId>, dst: impl Into<ObjectId>) -> Self {
        Self { kind, src: src.into(), dst: dst.into() }
    }
}

impl From<String> for ObjectId {
    fn from(s: String) -> Self {
        ObjectId(s)
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Robot {
    /// Planar base position in meters.
    pub position: [f64; 2],
    /// Discrete elevation level; 1 while standing on a climbable object.
    pub elevation: u8,
    pub grabbed: Option<ObjectId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    /// Room extent along x, y, z (meters); the room spans `[0, extent]`.
    pub room: [f64; 3],
    pub classes: BTreeMap<String, ObjectClass>,
    pub objects: Vec<ObjectInstance>,
    pub relations: BTreeSet<RelationEdge>,
    pub robot: Robot,
}

impl WorldState {
    pub fn empty(room: [f64; 3]) -> Self {
        Self {
            room,
            classes: BTreeMap::new(),
            objects: Vec::new(),
            relations: BTreeSet::new(),
            robot: Robot::default(),
        }
    }

    pub fn object(&self, id: &ObjectId) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| &o.id == id)
    }

    pub fn object_mut(&mut self, id: &ObjectId) -> Option<&mut ObjectInstance> {
        self.objects.iter_mut().find(|o| &o.id == id)
    }

    pub fn require(&self, id: &ObjectId) -> Result<&ObjectInstance> {
        self.object(id).ok_or_else(|| Error::UnknownObject(id.0.clone()))
    }

    pub fn class_of(&self, id: &ObjectId) -> Option<&ObjectClass> {
        self.object(id).and_then(|o| self.classes.get(&o.class))
    }

    pub fn contains(&self, id: &ObjectId) -> bool {
        self.object(id).is_some()
    }

    pub fn has_edge(&self, kind: RelationKind, src: &ObjectId, dst: &ObjectId) -> bool {
        self.relations.contains(&RelationEdge { kind, src: src.clone(), dst: dst.clone() })
    }

    /// Destination of the unique outgoing edge of `kind` from `src`, if any.
    pub fn parent(&self, kind: RelationKind, src: &ObjectId) -> Option<&ObjectId> {
        self.relations.iter().find(|e| e.kind == kind && &e.src == src).map(|e| &e.dst)
    }

    /// Sources of edges of `kind` pointing at `dst`.
    pub fn children(&self, kind: RelationKind, dst: &ObjectId) -> Vec<ObjectId> {
        self.relations.iter().filter(|e| e.kind == kind && &e.dst == dst).map(|e| e.src.clone()).collect()
    }

    pub fn insert_object(&mut self, class: &ObjectClass, obj: ObjectInstance) {
        self.classes.entry(class.token.clone()).or_insert_with(|| class.clone());
        self.objects.push(obj);
    }

    /// Drops an object and every edge touching it.
    pub fn remove_object(&mut self, id: &ObjectId) {
        self.objects.retain(|o| &o.id != id);
        self.relations.retain(|e| &e.src != id && &e.dst != id);
        if self.robot.grabbed.as_ref() == Some(id) {
            self.robot.grabbed = None;
        }
        let used: BTreeSet<&String> = self.objects.iter().map(|o| &o.class).collect();
        let unused: Vec<String> = self.classes.keys().filter(|k| !used.contains(k)).cloned().collect();
        for k in unused {
            self.classes.remove(&k);
        }
    }

    /// Ids in canonical (sorted) order.
    pub fn sorted_ids(&self) -> Vec<ObjectId> {
        let mut ids: Vec<ObjectId> = self.objects.iter().map(|o| o.id.clone()).collect();
        ids.sort();
        ids
    }

    /// Copy with objects in canonical id order.
    pub fn canonical(&self) -> WorldState {
        let mut s = self.clone();
        s.objects.sort_by(|a, b| a.id.cmp(&b.id));
        s
    }

    /// Checks every structural invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        let fail = |name: &'static str, detail: String| Err(Error::Invariant { name, detail });
        let mut ids = BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(&o.id) {
                return fail("unique-id", format!("duplicate object id {}", o.id));
            }
            let Some(class) = self.classes.get(&o.class) else {
                return fail("known-class", format!("{} has unknown class {}", o.id, o.class));
            };
            if o.size.iter().any(|&s| !(s > 0.0)) {
                return fail("positive-size", format!("{} has non-positive extent", o.id));
            }
            if let Some(a) = o.attributes.keys().find(|a| !class.attributes.contains(a)) {
                return fail("attribute-schema", format!("{} carries {:?} outside its class schema", o.id, a));
            }
            let p = o.pose;
            if ![p.x, p.y, p.z, p.yaw].iter().all(|v| v.is_finite()) {
                return fail("finite-pose", format!("{} has a non-finite pose", o.id));
            }
        }
        for e in &self.relations {
            if e.src == e.dst {
                return fail("no-self-edge", format!("{:?} edge from {} to itself", e.kind, e.src));
            }
            if !ids.contains(&e.src) || !ids.contains(&e.dst) {
                return fail("edge-endpoints", format!("{:?}({}, {}) references a missing object", e.kind, e.src, e.dst));
            }
            if e.kind == RelationKind::Near && !self.has_edge(RelationKind::Near, &e.dst, &e.src) {
                return fail("near-symmetric", format!("Near({}, {}) lacks its mirror", e.src, e.dst));
            }
        }
        let mut inside_parent: BTreeMap<&ObjectId, &ObjectId> = BTreeMap::new();
        for e in self.relations.iter().filter(|e| e.kind == RelationKind::Inside) {
            if let Some(prev) = inside_parent.insert(&e.src, &e.dst) {
                return fail("unique-container", format!("{} is inside both {} and {}", e.src, prev, e.dst));
            }
        }
        // OnTop cycles: follow parent pointers (several supports are allowed, so walk all).
        let mut on: BTreeMap<&ObjectId, Vec<&ObjectId>> = BTreeMap::new();
        for e in self.relations.iter().filter(|e| e.kind == RelationKind::OnTop) {
            on.entry(&e.src).or_default().push(&e.dst);
        }
        for start in on.keys() {
            let mut stack: Vec<&ObjectId> = on[start].clone();
            let mut seen = BTreeSet::new();
            while let Some(n) = stack.pop() {
                if n == *start {
                    return fail("acyclic-ontop", format!("OnTop cycle through {start}"));
                }
                if seen.insert(n) {
                    if let Some(next) = on.get(n) {
                        stack.extend(next.iter().copied());
                    }
                }
            }
        }
        if let Some(g) = &self.robot.grabbed {
            match self.object(g) {
                None => return fail("grabbed-exists", format!("robot holds missing object {g}")),
                Some(o) if !o.attr(Attribute::Grabbed) => {
                    return fail("grabbed-flag", format!("held object {g} lacks Grabbed=true"))
                }
                _ => {}
            }
        }
        if let Some(o) = self.objects.iter().find(|o| o.attr(Attribute::Grabbed) && self.robot.grabbed.as_ref() != Some(&o.id)) {
            return fail("grabbed-flag", format!("{} is flagged Grabbed but not held", o.id));
        }
        Ok(())
    }

    /// Pose normalized per axis to `[-1, 1]` by the room extent (yaw by pi).
    pub fn normalized_pose(&self, obj: &ObjectInstance) -> [f64; 4] {
        let n = |v: f64, ext: f64| if ext > 0.0 { (2.0 * v / ext - 1.0).clamp(-1.0, 1.0) } else { 0.0 };
        [
            n(obj.pose.x, self.room[0]),
            n(obj.pose.y, self.room[1]),
            n(obj.pose.z, self.room[2]),
            (obj.pose.yaw / core::f64::consts::PI).clamp(-1.0, 1.0),
        ]
    }

    /// Size scaled by the room extent.
    pub fn normalized_size(&self, obj: &ObjectInstance) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, v) in out.iter_mut().enumerate() {
            *v = if self.room[i] > 0.0 { (obj.size[i] / self.room[i]).min(1.0) } else { 0.0 };
        }
        out
    }
}

/// Attribute vector under the global vocabulary.
pub fn attribute_vector(obj: &ObjectInstance) -> Vec<f64> {
    AttributeVocabulary::default().attribute_vector(obj)
}
