//! Word embeddings for class and relation tokens, knowledge-graph
//! retrofitting and nearest-class lookup.

mod desk;

pub use desk::{desk_base_table, desk_graph, desk_table, DESK_DIM};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::cosine;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KgRelation {
    SimilarTo,
    IsA,
    UsedFor,
    PartOf,
    CapableOf,
}

impl KgRelation {
    pub const ALL: [KgRelation; 5] =
        [KgRelation::SimilarTo, KgRelation::IsA, KgRelation::UsedFor, KgRelation::PartOf, KgRelation::CapableOf];

    /// Default retrofitting weight.
    pub fn weight(self) -> f64 {
        match self {
            KgRelation::SimilarTo => 1.0,
            KgRelation::IsA => 0.8,
            KgRelation::UsedFor => 0.6,
            KgRelation::PartOf | KgRelation::CapableOf => 0.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KgRelation::SimilarTo => "SimilarTo",
            KgRelation::IsA => "IsA",
            KgRelation::UsedFor => "UsedFor",
            KgRelation::PartOf => "PartOf",
            KgRelation::CapableOf => "CapableOf",
        }
    }

    pub fn from_name(name: &str) -> Option<KgRelation> {
        KgRelation::ALL.into_iter().find(|r| r.name().eq_ignore_ascii_case(name))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KgEdge {
    pub src: String,
    pub relation: KgRelation,
    pub dst: String,
}

/// Undirected weighted token graph used for retrofitting and for embedding
/// unknown tokens.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub edges: Vec<KgEdge>,
    pub weights: BTreeMap<KgRelation, f64>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self { edges: Vec::new(), weights: KgRelation::ALL.iter().map(|r| (*r, r.weight())).collect() }
    }

    /// Adds an edge; tokens are lowercased and self-loops rejected.
    pub fn add(&mut self, src: &str, relation: KgRelation, dst: &str) -> Result<()> {
        let (src, dst) = (src.to_lowercase(), dst.to_lowercase());
        if src == dst {
            return Err(Error::Config(alloc::format!("self-loop on `{src}` in knowledge graph")));
        }
        self.edges.push(KgEdge { src, relation, dst });
        Ok(())
    }

    pub fn weight(&self, r: KgRelation) -> f64 {
        self.weights.get(&r).copied().unwrap_or_else(|| r.weight())
    }

    /// Neighbors of `token` with edge weights, in both edge directions.
    pub fn neighbors(&self, token: &str) -> Vec<(&str, f64)> {
        let mut out = Vec::new();
        for e in &self.edges {
            if e.src == token {
                out.push((e.dst.as_str(), self.weight(e.relation)));
            } else if e.dst == token {
                out.push((e.src.as_str(), self.weight(e.relation)));
            }
        }
        out
    }

    pub fn tokens(&self) -> BTreeSet<&str> {
        self.edges.iter().flat_map(|e| [e.src.as_str(), e.dst.as_str()]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Base,
    Retrofitted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub entries: BTreeMap<String, Vec<f64>>,
    pub provenance: Provenance,
    /// Neighbor lists consulted for tokens missing from `entries`.
    #[serde(default)]
    pub fallback: BTreeMap<String, Vec<String>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self { dim, entries: BTreeMap::new(), provenance: Provenance::Base, fallback: BTreeMap::new() }
    }

    pub fn insert(&mut self, token: &str, v: Vec<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Shape { op: "embedding insert", left: [1, self.dim], right: [1, v.len()] });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("embedding entry"));
        }
        self.entries.insert(token.to_string(), v);
        Ok(())
    }

    /// Records the graph's neighbor lists for the unknown-token fallback.
    pub fn attach_graph(&mut self, kg: &KnowledgeGraph) {
        self.fallback.clear();
        for t in kg.tokens() {
            let ns: Vec<String> = kg.neighbors(t).into_iter().map(|(n, _)| n.to_string()).collect();
            self.fallback.insert(t.to_string(), ns);
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    /// Stored vector; otherwise the mean of the stored vectors of the token's
    /// graph neighbors; otherwise zero.
    pub fn embed(&self, token: &str) -> Vec<f64> {
        if let Some(v) = self.entries.get(token) {
            return v.clone();
        }
        let mut sum = vec![0.0; self.dim];
        let mut seen = BTreeSet::new();
        if let Some(ns) = self.fallback.get(token) {
            for n in ns {
                if let Some(v) = self.entries.get(n) {
                    if seen.insert(n.as_str()) {
                        sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                    }
                }
            }
        }
        if !seen.is_empty() {
            let k = seen.len() as f64;
            sum.iter_mut().for_each(|s| *s /= k);
        }
        sum
    }

    /// Mean embedding of several tokens (zero for an empty list).
    pub fn mean(&self, tokens: &[&str]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for t in tokens {
            out.iter_mut().zip(self.embed(t)).for_each(|(o, x)| *o += x);
        }
        if !tokens.is_empty() {
            let k = tokens.len() as f64;
            out.iter_mut().for_each(|o| *o /= k);
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> EmbeddingTable {
        let mut t = self.clone();
        t.entries.values_mut().for_each(|v| v.iter_mut().for_each(|x| *x *= factor));
        t
    }
}

/// Jacobi retrofitting: every sweep recomputes all vectors from the previous
/// sweep. Neighbors without a stored vector are ignored; tokens with no usable
/// neighbor keep their base vector.
pub fn retrofit(table: &EmbeddingTable, kg: &KnowledgeGraph, iterations: usize, lambda: f64) -> Result<EmbeddingTable> {
    if iterations == 0 || !(lambda > 0.0) {
        return Err(Error::Config("retrofit needs iterations >= 1 and lambda > 0".into()));
    }
    let neigh: BTreeMap<&str, Vec<(&str, f64)>> = table
        .entries
        .keys()
        .map(|t| {
            let ns: Vec<(&str, f64)> = kg.neighbors(t).into_iter().filter(|(n, _)| table.contains(n)).collect();
            (t.as_str(), ns)
        })
        .filter(|(_, ns)| !ns.is_empty())
        .collect();
    let mut current = table.entries.clone();
    for _ in 0..iterations {
        let mut next = current.clone();
        for (&t, ns) in &neigh {
            let base = &table.entries[t];
            let mut acc: Vec<f64> = base.iter().map(|x| lambda * x).collect();
            let mut denom = lambda;
            for &(n, beta) in ns {
                acc.iter_mut().zip(&current[n]).for_each(|(a, x)| *a += beta * x);
                denom += beta;
            }
            acc.iter_mut().for_each(|a| *a /= denom);
            next.insert(t.to_string(), acc);
        }
        current = next;
    }
    let mut out = table.clone();
    out.entries = current;
    out.provenance = Provenance::Retrofitted;
    out.attach_graph(kg);
    Ok(out)
}

/// Candidate whose embedding is most cosine-similar to `token`'s; ties go to
/// the lexicographically smallest candidate.
pub fn nearest_class<'a>(table: &EmbeddingTable, token: &str, candidates: &[&'a str]) -> Option<&'a str> {
    let e = table.embed(token);
    let mut sorted: Vec<&'a str> = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<(&'a str, f64)> = None;
    for c in sorted {
        let s = cosine(&e, &table.embed(c));
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((c, s));
        }
    }
    best.map(|(c, _)| c)
}

#[cfg(test)]
mod tests;
