use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A world-state invariant does not hold.
    Invariant { name: &'static str, detail: String },
    /// An object id is not present in the state it was resolved against.
    UnknownObject(String),
    UnknownClass(String),
    UnknownInteraction(String),
    /// Action argument count disagrees with the grammar table.
    Arity { interaction: &'static str, expected: usize, found: usize },
    Shape { op: &'static str, left: [usize; 2], right: [usize; 2] },
    NonFinite(&'static str),
    /// A binary cross-entropy target outside {0, 1}.
    BadTarget(f64),
    EmptyScene,
    Unachievable { goal: String, reason: String },
    CorpusTooSmall { len: usize, min: usize },
    EmptyReservePool,
    DemoObjectMissing(String),
    /// Training produced a non-finite loss.
    Divergence { epoch: usize, step: usize },
    ReplayMismatch { demo: String, step: usize, reason: String },
    Config(String),
    UnknownGoal { id: String, available: Vec<String> },
    UnknownScene { id: String, available: Vec<String> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Invariant { name, detail } => write!(f, "invariant `{name}` violated: {detail}"),
            Error::UnknownObject(id) => write!(f, "unknown object id `{id}`"),
            Error::UnknownClass(t) => write!(f, "unknown object class `{t}`"),
            Error::UnknownInteraction(t) => write!(f, "unknown interaction `{t}`"),
            Error::Arity { interaction, expected, found } => {
                write!(f, "{interaction} takes {expected} argument(s), got {found}")
            }
            Error::Shape { op, left, right } => write!(
                f,
                "shape mismatch in {op}: {}x{} vs {}x{}",
                left[0], left[1], right[0], right[1]
            ),
            Error::NonFinite(ctx) => write!(f, "non-finite value in {ctx}"),
            Error::BadTarget(t) => write!(f, "binary target must be 0 or 1, got {t}"),
            Error::EmptyScene => f.write_str("empty scene"),
            Error::Unachievable { goal, reason } => write!(f, "goal `{goal}` unachievable: {reason}"),
            Error::CorpusTooSmall { len, min } => write!(f, "corpus has {len} demonstrations, need at least {min}"),
            Error::EmptyReservePool => f.write_str("reserve class pool is empty"),
            Error::DemoObjectMissing(id) => write!(f, "demonstrated object `{id}` absent from scene"),
            Error::Divergence { epoch, step } => write!(f, "non-finite loss at epoch {epoch}, step {step}"),
            Error::ReplayMismatch { demo, step, reason } => {
                write!(f, "demonstration `{demo}` fails replay at step {step}: {reason}")
            }
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::UnknownGoal { id, available } => {
                write!(f, "unknown goal `{id}` (available: {})", available.join(", "))
            }
            Error::UnknownScene { id, available } => {
                write!(f, "unknown scene `{id}` (available: {})", available.join(", "))
            }
        }
    }
}

impl core::error::Error for Error {}
