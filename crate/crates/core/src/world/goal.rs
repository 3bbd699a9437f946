use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::{Attribute, ObjectId, RelationKind, WorldState};
use crate::error::{Error, Result};

/// One conjunct of a declarative goal.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Constraint {
    Relation { kind: RelationKind, src: ObjectId, dst: ObjectId },
    Attribute { object: ObjectId, attribute: Attribute, value: bool },
}

impl Constraint {
    pub fn relation(kind: RelationKind, src: impl Into<ObjectId>, dst: impl Into<ObjectId>) -> Self {
        Constraint::Relation { kind, src: src.into(), dst: dst.into() }
    }

    pub fn attribute(object: impl Into<ObjectId>, attribute: Attribute, value: bool) -> Self {
        Constraint::Attribute { object: object.into(), attribute, value }
    }

    /// Relation or literal word used for the goal's relation encoding.
    pub fn token(&self) -> &'static str {
        match self {
            Constraint::Relation { kind, .. } => kind.token(),
            Constraint::Attribute { attribute, value, .. } => attribute.token(*value),
        }
    }

    pub fn objects(&self) -> Vec<&ObjectId> {
        match self {
            Constraint::Relation { src, dst, .. } => alloc::vec![src, dst],
            Constraint::Attribute { object, .. } => alloc::vec![object],
        }
    }

    fn map_ids(&self, f: &mut impl FnMut(&ObjectId) -> ObjectId) -> Constraint {
        match self {
            Constraint::Relation { kind, src, dst } => Constraint::Relation { kind: *kind, src: f(src), dst: f(dst) },
            Constraint::Attribute { object, attribute, value } => {
                Constraint::Attribute { object: f(object), attribute: *attribute, value: *value }
            }
        }
    }

    /// Whether the state entails this constraint.
    pub fn holds(&self, state: &WorldState) -> Result<bool> {
        for id in self.objects() {
            state.require(id)?;
        }
        Ok(match self {
            Constraint::Relation { kind, src, dst } => state.has_edge(*kind, src, dst),
            Constraint::Attribute { object, attribute, value } => {
                state.require(object)?.attr(*attribute) == *value
            }
        })
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Relation { kind, src, dst } => write!(f, "{kind:?}({src}, {dst})"),
            Constraint::Attribute { object, attribute, value } => {
                let t = attribute.token(*value);
                let mut cs = t.chars();
                let head = cs.next().map(|c| c.to_ascii_uppercase()).unwrap_or(' ');
                write!(f, "{head}{}({object})", cs.as_str())
            }
        }
    }
}

/// A declarative goal: a conjunction of symbolic constraints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub text: String,
    pub constraints: Vec<Constraint>,
}

impl Goal {
    pub fn new(text: &str, constraints: Vec<Constraint>) -> Self {
        Self { text: text.into(), constraints }
    }

    /// Distinct relation/literal tokens in order of first appearance.
    pub fn relation_tokens(&self) -> Vec<&'static str> {
        let mut out: Vec<&'static str> = Vec::new();
        for c in &self.constraints {
            let t = c.token();
            if !out.contains(&t) {
                out.push(t);
            }
        }
        out
    }

    /// Distinct object ids referenced by the goal, in order of first appearance.
    pub fn objects(&self) -> Vec<ObjectId> {
        let mut out: Vec<ObjectId> = Vec::new();
        for c in &self.constraints {
            for id in c.objects() {
                if !out.contains(id) {
                    out.push(id.clone());
                }
            }
        }
        out
    }

    pub fn map_ids(&self, mut f: impl FnMut(&ObjectId) -> ObjectId) -> Goal {
        Goal { text: self.text.clone(), constraints: self.constraints.iter().map(|c| c.map_ids(&mut f)).collect() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::Invariant { name: "goal-text", detail: "goal text is empty".into() });
        }
        Ok(())
    }
}

/// Goal check: true iff every constraint is entailed by `state`.
pub fn goal_satisfied(state: &WorldState, goal: &Goal) -> Result<bool> {
    let mut all = true;
    for c in &goal.constraints {
        // keep evaluating so an unresolvable id is always reported
        all &= c.holds(state)?;
    }
    Ok(all)
}
