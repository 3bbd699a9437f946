use alloc::format;
use alloc::string::String;
use core::fmt;

use serde::{Deserialize, Serialize};

use super::ObjectId;
use crate::error::{Error, Result};

/// The symbolic interaction vocabulary and its arity (the grammar table).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InteractionType {
    MoveTo,
    Pick,
    Drop,
    Open,
    Close,
    SwitchOn,
    SwitchOff,
    ClimbUp,
    ClimbDown,
    Push,
    Clean,
    Apply,
    Stick,
}

impl InteractionType {
    pub const ALL: [InteractionType; 13] = [
        InteractionType::MoveTo,
        InteractionType::Pick,
        InteractionType::Drop,
        InteractionType::Open,
        InteractionType::Close,
        InteractionType::SwitchOn,
        InteractionType::SwitchOff,
        InteractionType::ClimbUp,
        InteractionType::ClimbDown,
        InteractionType::Push,
        InteractionType::Clean,
        InteractionType::Apply,
        InteractionType::Stick,
    ];

    pub const COUNT: usize = Self::ALL.len();

    pub fn arity(self) -> usize {
        match self {
            InteractionType::Drop | InteractionType::Push | InteractionType::Apply | InteractionType::Stick => 2,
            _ => 1,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn token(self) -> &'static str {
        match self {
            InteractionType::MoveTo => "MoveTo",
            InteractionType::Pick => "Pick",
            InteractionType::Drop => "Drop",
            InteractionType::Open => "Open",
            InteractionType::Close => "Close",
            InteractionType::SwitchOn => "SwitchOn",
            InteractionType::SwitchOff => "SwitchOff",
            InteractionType::ClimbUp => "ClimbUp",
            InteractionType::ClimbDown => "ClimbDown",
            InteractionType::Push => "Push",
            InteractionType::Clean => "Clean",
            InteractionType::Apply => "Apply",
            InteractionType::Stick => "Stick",
        }
    }

    pub fn from_token(token: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|i| i.token().eq_ignore_ascii_case(token))
            .ok_or_else(|| Error::UnknownInteraction(token.into()))
    }
}

impl fmt::Display for InteractionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A symbolic action `I(o1, o2)`; `o2` is present exactly for arity-2 interactions.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawAction", into = "RawAction")]
pub struct Action {
    interaction: InteractionType,
    o1: ObjectId,
    o2: Option<ObjectId>,
}

impl Action {
    pub fn new(interaction: InteractionType, o1: ObjectId, o2: Option<ObjectId>) -> Result<Self> {
        let found = 1 + o2.is_some() as usize;
        if found != interaction.arity() {
            return Err(Error::Arity { interaction: interaction.token(), expected: interaction.arity(), found });
        }
        Ok(Self { interaction, o1, o2 })
    }

    pub fn unary(interaction: InteractionType, o1: impl Into<ObjectId>) -> Self {
        Self::new(interaction, o1.into(), None).expect("arity-1 interaction")
    }

    pub fn binary(interaction: InteractionType, o1: impl Into<ObjectId>, o2: impl Into<ObjectId>) -> Self {
        Self::new(interaction, o1.into(), Some(o2.into())).expect("arity-2 interaction")
    }

    pub fn interaction(&self) -> InteractionType {
        self.interaction
    }

    pub fn o1(&self) -> &ObjectId {
        &self.o1
    }

    pub fn o2(&self) -> Option<&ObjectId> {
        self.o2.as_ref()
    }

    /// Same action with object ids rewritten through `f`.
    pub fn map_ids(&self, mut f: impl FnMut(&ObjectId) -> ObjectId) -> Action {
        Action { interaction: self.interaction, o1: f(&self.o1), o2: self.o2.as_ref().map(f) }
    }

    /// Parses `Drop(milk_0, fridge_0)` style text.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = || Error::UnknownInteraction(String::from(text));
        let open = text.find('(').ok_or_else(bad)?;
        if !text.ends_with(')') {
            return Err(bad());
        }
        let interaction = InteractionType::from_token(text[..open].trim())?;
        let args: alloc::vec::Vec<&str> =
            text[open + 1..text.len() - 1].split(',').map(str::trim).filter(|a| !a.is_empty()).collect();
        match args.as_slice() {
            [a] => Action::new(interaction, ObjectId::from(*a), None),
            [a, b] => Action::new(interaction, ObjectId::from(*a), Some(ObjectId::from(*b))),
            _ => Err(Error::Arity { interaction: interaction.token(), expected: interaction.arity(), found: args.len() }),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.o2 {
            Some(o2) => write!(f, "{}({}, {})", self.interaction, self.o1, o2),
            None => write!(f, "{}({})", self.interaction, self.o1),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawAction {
    interaction: InteractionType,
    o1: ObjectId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    o2: Option<ObjectId>,
}

impl TryFrom<RawAction> for Action {
    type Error = String;
    fn try_from(raw: RawAction) -> core::result::Result<Self, String> {
        Action::new(raw.interaction, raw.o1, raw.o2).map_err(|e| format!("{e}"))
    }
}

impl From<Action> for RawAction {
    fn from(a: Action) -> Self {
        RawAction { interaction: a.interaction, o1: a.o1, o2: a.o2 }
    }
}
