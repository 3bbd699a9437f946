//! Versioned JSON records: canonical state (`v1`), episode traces
//! (`trace-v1`), demonstrations (`demo-v1`, one per line) and evaluation
//! episodes (`case-v1`, one per line).
//!
//! Every record is a JSON object with sorted keys and a `schema` field, so
//! serializing the same value always yields the same bytes.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use tango_core::corpus::{Corpus, Demonstration, EvalCase};
use tango_core::sim::PlanTrace;
use tango_core::world::WorldState;

use crate::error::{Error, Result};

pub const STATE_SCHEMA: &str = "v1";
pub const TRACE_SCHEMA: &str = "trace-v1";
pub const DEMO_SCHEMA: &str = "demo-v1";
pub const CASE_SCHEMA: &str = "case-v1";

/// Domain name given to corpora read from disk.
pub const DOMAIN: &str = "micro-home";

fn to_sorted(value: &impl Serialize) -> Value {
    // serde_json's default map is ordered by key
    serde_json::to_value(value).expect("records serialize to JSON")
}

/// `{"schema": .., <key>: value}` or, without a key, the value's own fields
/// next to `schema`.
fn envelope(schema: &str, key: Option<&str>, value: &impl Serialize) -> String {
    let mut map = match key {
        Some(k) => {
            let mut m = Map::new();
            m.insert(k.into(), to_sorted(value));
            m
        }
        None => match to_sorted(value) {
            Value::Object(m) => m,
            other => panic!("record body must be an object, got {other}"),
        },
    };
    map.insert("schema".into(), Value::String(schema.into()));
    Value::Object(map).to_string()
}

/// Parses one record, checking its schema. `line` is the 1-based line of
/// the record in its file and is used in error positions.
fn open<T: DeserializeOwned>(context: &str, text: &str, line: usize, schema: &'static str, key: Option<&str>) -> Result<T> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::parse(context, line + e.line() - 1, e.column(), "", e))?;
    let Value::Object(mut map) = value else {
        return Err(Error::parse(context, line, 1, "", "record must be a JSON object"));
    };
    let found = match map.remove("schema") {
        Some(Value::String(s)) => s,
        Some(other) => other.to_string(),
        None => String::from("<missing>"),
    };
    if found != schema {
        return Err(Error::Schema { context: context.into(), expected: schema, found });
    }
    let (body, prefix) = match key {
        Some(k) => (map.remove(k).unwrap_or(Value::Null), format!("{k}.")),
        None => (Value::Object(map), String::new()),
    };
    serde_path_to_error::deserialize(body).map_err(|e| {
        let field = format!("{prefix}{}", e.path());
        Error::parse(context, line, 0, field, e.into_inner())
    })
}

fn state_invariants(context: &str, line: usize, field: &str, state: &WorldState) -> Result<()> {
    state.validate().map_err(|e| Error::parse(context, line, 0, field, e))
}

/// Canonical single-line record: objects sorted by id, edges and keys sorted.
pub fn state_to_record(state: &WorldState) -> String {
    envelope(STATE_SCHEMA, Some("state"), &state.canonical())
}

/// Inverse of [`state_to_record`]; also checks the state invariants.
pub fn state_from_record(text: &str) -> Result<WorldState> {
    let state: WorldState = open("state record", text, 1, STATE_SCHEMA, Some("state"))?;
    state_invariants("state record", 1, "state", &state)?;
    Ok(state)
}

pub fn trace_to_record(trace: &PlanTrace) -> String {
    envelope(TRACE_SCHEMA, None, trace)
}

pub fn trace_from_record(text: &str) -> Result<PlanTrace> {
    open("trace record", text, 1, TRACE_SCHEMA, None)
}

pub fn demo_to_record(demo: &Demonstration) -> String {
    envelope(DEMO_SCHEMA, None, demo)
}

pub fn demo_from_record(text: &str) -> Result<Demonstration> {
    demo_at(text, 1)
}

fn demo_at(text: &str, line: usize) -> Result<Demonstration> {
    let demo: Demonstration = open("demo record", text, line, DEMO_SCHEMA, None)?;
    state_invariants("demo record", line, "initial", &demo.initial)?;
    Ok(demo)
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

/// One `demo-v1` record per line; blank lines are skipped.
pub fn corpus_to_jsonl(corpus: &Corpus) -> String {
    corpus.demos.iter().map(|d| demo_to_record(d) + "\n").collect()
}

pub fn corpus_from_jsonl(text: &str) -> Result<Corpus> {
    let demos = lines(text).map(|(n, l)| demo_at(l, n)).collect::<Result<Vec<_>>>()?;
    Ok(Corpus::new(DOMAIN, demos))
}

pub fn cases_to_jsonl(cases: &[EvalCase]) -> String {
    cases.iter().map(|c| envelope(CASE_SCHEMA, None, c) + "\n").collect()
}

pub fn cases_from_jsonl(text: &str) -> Result<Vec<EvalCase>> {
    lines(text)
        .map(|(n, l)| {
            let case: EvalCase = open("case record", l, n, CASE_SCHEMA, None)?;
            state_invariants("case record", n, "scene", &case.scene)?;
            Ok(case)
        })
        .collect()
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    corpus_from_jsonl(&read_text(path)?).map_err(|e| with_path(e, path))
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    write_text(path, &corpus_to_jsonl(corpus))
}

pub fn read_cases(path: &Path) -> Result<Vec<EvalCase>> {
    cases_from_jsonl(&read_text(path)?).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse { context, line, column, field, message } => {
            Error::Parse { context: format!("{} ({context})", path.display()), line, column, field, message }
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tango_core::corpus::{expert_demo, ScriptedExpert};
    use tango_core::domain::{goal, MicroHome};
    use tango_core::sim::{run_episode, SimConfig};
    use tango_core::world::{RelationEdge, RelationKind};

    #[test]
    fn empty_state_round_trips() {
        let s = WorldState::empty([4.0, 4.0, 3.0]);
        let text = state_to_record(&s);
        assert!(text.contains("\"objects\":[]") && text.contains("\"relations\":[]"), "{text}");
        assert_eq!(state_from_record(&text).unwrap(), s);
    }

    #[test]
    fn scene_round_trip_is_byte_stable() {
        let s = MicroHome::default().scene("home_03").unwrap();
        let text = state_to_record(&s);
        let back = state_from_record(&text).unwrap();
        assert_eq!(back, s.canonical());
        assert_eq!(state_to_record(&back), text);
        let mut shuffled = s.clone();
        shuffled.objects.reverse();
        assert_eq!(state_to_record(&shuffled), text);
        // keys appear in sorted order at the top level
        assert!(text.starts_with("{\"schema\":\"v1\",\"state\":{\"classes\""), "{}", &text[..60]);
    }

    #[test]
    fn dangling_edge_is_rejected_with_field() {
        let mut s = MicroHome::default().scene("home_00").unwrap();
        s.relations.insert(RelationEdge::new(RelationKind::OnTop, "ghost_0", "floor_0"));
        let text = state_to_record(&s);
        match state_from_record(&text) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "state"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_records_report_positions() {
        match state_from_record("{\"schema\":\"v1\",\n\"state\": {oops}}") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 11)),
            other => panic!("{other:?}"),
        }
        match state_from_record("{\"schema\":\"v1\",\"state\":{\"room\":\"wide\"}}") {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "state.room"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(state_from_record("{\"schema\":\"v2\",\"state\":{}}"), Err(Error::Schema { .. })));
        assert!(matches!(state_from_record("[1]"), Err(Error::Parse { .. })));
    }

    #[test]
    fn corpus_round_trip_and_line_numbers() {
        let home = MicroHome::default();
        let s = home.scene("home_01").unwrap();
        let demos = vec![
            expert_demo("home_01", &s, "milk_fridge", &goal("milk_fridge").unwrap(), None).unwrap(),
            expert_demo("home_01", &s, "milk_fridge", &goal("milk_fridge").unwrap(), Some(4)).unwrap(),
        ];
        let corpus = Corpus::new(DOMAIN, demos);
        let text = corpus_to_jsonl(&corpus);
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().all(|l| l.contains("\"schema\":\"demo-v1\"")));
        let back = corpus_from_jsonl(&text).unwrap();
        assert_eq!(back.demos, corpus.demos);
        back.validate().unwrap();
        let broken = format!("{}\n\n{{\"schema\":\"demo-v1\",\"id\":3}}\n", text.lines().next().unwrap());
        match corpus_from_jsonl(&broken) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trace_round_trip() {
        let s = MicroHome::default().scene("home_02").unwrap();
        let g = goal("light_on").unwrap();
        let t = run_episode(&mut ScriptedExpert::default(), &s, &g, &SimConfig::deterministic()).unwrap();
        let text = trace_to_record(&t);
        assert!(text.contains("\"schema\":\"trace-v1\"") && text.contains("\"final\""));
        assert_eq!(trace_from_record(&text).unwrap(), t);
        assert_eq!(trace_to_record(&trace_from_record(&text).unwrap()), text);
    }
}
