//! Plain-text embedding and knowledge-graph files.
//!
//! Vectors: one `token v1 v2 ... vq` line per word, optionally preceded by a
//! `count dim` header line. Graph: one `src Relation dst` line per edge.
//! Blank lines and lines starting with `#` are ignored in both.

use std::path::Path;

use tango_core::embed::{EmbeddingTable, KgRelation, KnowledgeGraph};

use crate::error::{Error, Result};
use crate::records::read_text;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_vectors(text: &str) -> Result<EmbeddingTable> {
    let ctx = "vector file";
    let mut table: Option<EmbeddingTable> = None;
    let mut declared: Option<(usize, usize)> = None;
    for (n, line) in content_lines(text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if table.is_none() && declared.is_none() && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            declared = Some((fields[0].parse().unwrap_or(0), fields[1].parse().unwrap_or(0)));
            continue;
        }
        let token = fields[0].to_lowercase();
        let values = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| Error::parse(ctx, n, 0, token.as_str(), format!("`{f}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(Error::parse(ctx, n, 0, token, "no vector components"));
        }
        let t = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
        if values.len() != t.dim {
            return Err(Error::parse(ctx, n, 0, token, format!("{} components, expected {}", values.len(), t.dim)));
        }
        t.insert(&token, values).map_err(|e| Error::parse(ctx, n, 0, "", e))?;
    }
    let table = table.ok_or_else(|| Error::parse(ctx, 1, 0, "", "no vectors"))?;
    if let Some((count, dim)) = declared {
        if dim != table.dim || count != table.entries.len() {
            return Err(Error::parse(ctx, 1, 0, "", format!(
                "header declares {count} x {dim}, file holds {} x {}",
                table.entries.len(),
                table.dim
            )));
        }
    }
    Ok(table)
}

pub fn parse_graph(text: &str) -> Result<KnowledgeGraph> {
    let ctx = "graph file";
    let mut kg = KnowledgeGraph::new();
    for (n, line) in content_lines(text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [src, rel, dst] = fields.as_slice() else {
            return Err(Error::parse(ctx, n, 0, "", "expected `src Relation dst`"));
        };
        let relation = KgRelation::from_name(rel).ok_or_else(|| {
            let known: Vec<&str> = KgRelation::ALL.iter().map(|r| r.name()).collect();
            Error::parse(ctx, n, 0, *rel, format!("unknown relation (known: {})", known.join(", ")))
        })?;
        kg.add(src, relation, dst).map_err(|e| Error::parse(ctx, n, 0, "", e))?;
    }
    Ok(kg)
}

pub fn vectors_to_text(table: &EmbeddingTable) -> String {
    let mut out = format!("{} {}\n", table.entries.len(), table.dim);
    for (token, v) in &table.entries {
        out.push_str(token);
        for x in v {
            out.push(' ');
            out.push_str(&format!("{x:?}"));
        }
        out.push('\n');
    }
    out
}

pub fn graph_to_text(kg: &KnowledgeGraph) -> String {
    kg.edges.iter().map(|e| format!("{} {} {}\n", e.src, e.relation.name(), e.dst)).collect()
}

pub fn read_vectors(path: &Path) -> Result<EmbeddingTable> {
    parse_vectors(&read_text(path)?)
}

pub fn read_graph(path: &Path) -> Result<KnowledgeGraph> {
    parse_graph(&read_text(path)?)
}
