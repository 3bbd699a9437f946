//! Hand-built desk-scale embedding table and knowledge graph.
//!
//! Base vectors mix a token-specific random direction with shared feature
//! directions, so tokens with common surface features start out somewhat
//! similar. The graph then pulls semantically related tokens together.

use alloc::vec::Vec;

use super::{retrofit, EmbeddingTable, KgRelation, KnowledgeGraph};
use crate::math::{norm, standard_normal};
use crate::{derive_seed, rng_from_seed};

pub const DESK_DIM: usize = 32;

const FEATURE_WEIGHT: f64 = 0.6;

const TOKENS: &[(&str, &[&str])] = &[
    // objects
    ("floor", &["room", "ground", "flat"]),
    ("wall", &["room", "vertical"]),
    ("table", &["furniture", "flat", "kitchen"]),
    ("shelf", &["furniture", "flat", "high"]),
    ("fridge", &["appliance", "kitchen", "cold", "door"]),
    ("cupboard", &["furniture", "kitchen", "door"]),
    ("dumpster", &["waste", "outdoor", "bin"]),
    ("light_switch", &["electric", "wall_mounted"]),
    ("milk", &["food", "liquid", "carton"]),
    ("juice", &["food", "liquid", "sweet"]),
    ("apple", &["food", "round", "sweet"]),
    ("orange", &["food", "round", "citrus"]),
    ("pear", &["food", "sweet", "green"]),
    ("bottle", &["glass", "liquid", "waste"]),
    ("book", &["paper_made", "reading"]),
    ("paper", &["paper_made", "flat", "thin"]),
    ("dirt", &["ground", "mess"]),
    ("tray", &["flat", "kitchen", "handle"]),
    ("box", &["cardboard", "closed_shape"]),
    ("stool", &["furniture", "seat", "legs"]),
    ("ladder", &["legs", "tall", "rungs"]),
    ("stick", &["wood", "long", "thin"]),
    ("mop", &["wet", "handle", "long"]),
    ("vacuum", &["electric", "suction", "noise"]),
    ("sponge", &["wet", "soft"]),
    ("glue", &["liquid", "tube"]),
    ("tape", &["roll", "thin"]),
    // relations
    ("ontop", &["spatial", "above"]),
    ("inside", &["spatial", "enclosed"]),
    ("near", &["spatial", "distance"]),
    ("connectedto", &["spatial", "joined"]),
    // attribute literals
    ("open", &["state", "door"]),
    ("closed", &["state", "door", "shut"]),
    ("on", &["state", "electric"]),
    ("off", &["state", "electric", "shut"]),
    ("dirty", &["state", "mess"]),
    ("clean", &["state", "wet"]),
    ("grabbed", &["state", "hand"]),
    ("free", &["state"]),
    ("sticky", &["state", "joined"]),
    ("outside", &["spatial", "state"]),
    // concepts reached through the graph
    ("container", &["enclosed", "closed_shape"]),
    ("carrier", &["handle", "flat"]),
    ("transport", &["motion", "handle"]),
    ("fruit", &["food", "sweet"]),
    ("drink", &["liquid", "food"]),
    ("cleaner", &["wet", "mess"]),
    ("climb", &["legs", "high", "motion"]),
    ("adhesive", &["joined", "liquid"]),
    ("storage", &["enclosed", "furniture"]),
    ("appliance", &["electric", "kitchen"]),
    ("light", &["electric", "room"]),
    ("waste", &["bin", "mess"]),
    ("reach", &["long", "motion"]),
];

const GRAPH: &[(&str, KgRelation, &str)] = {
    use KgRelation::*;
    &[
        ("box", SimilarTo, "tray"),
        ("box", IsA, "container"),
        ("box", IsA, "carrier"),
        ("box", UsedFor, "transport"),
        ("tray", IsA, "carrier"),
        ("tray", UsedFor, "transport"),
        ("carrier", UsedFor, "transport"),
        ("carrier", SimilarTo, "container"),
        ("apple", IsA, "fruit"),
        ("orange", IsA, "fruit"),
        ("pear", IsA, "fruit"),
        ("pear", SimilarTo, "apple"),
        ("orange", SimilarTo, "apple"),
        ("milk", IsA, "drink"),
        ("juice", IsA, "drink"),
        ("juice", SimilarTo, "milk"),
        ("bottle", UsedFor, "drink"),
        ("bottle", IsA, "waste"),
        ("dumpster", UsedFor, "waste"),
        ("dumpster", IsA, "container"),
        ("fridge", IsA, "appliance"),
        ("fridge", IsA, "container"),
        ("fridge", UsedFor, "storage"),
        ("fridge", UsedFor, "drink"),
        ("cupboard", IsA, "container"),
        ("cupboard", UsedFor, "storage"),
        ("shelf", UsedFor, "storage"),
        ("table", SimilarTo, "shelf"),
        ("mop", IsA, "cleaner"),
        ("vacuum", IsA, "cleaner"),
        ("sponge", IsA, "cleaner"),
        ("vacuum", SimilarTo, "mop"),
        ("mop", UsedFor, "clean"),
        ("vacuum", UsedFor, "clean"),
        ("sponge", UsedFor, "clean"),
        ("cleaner", UsedFor, "clean"),
        ("dirt", CapableOf, "dirty"),
        ("dirty", SimilarTo, "dirt"),
        ("stool", UsedFor, "climb"),
        ("ladder", UsedFor, "climb"),
        ("ladder", SimilarTo, "stool"),
        ("shelf", CapableOf, "climb"),
        ("stick", UsedFor, "reach"),
        ("ladder", UsedFor, "reach"),
        ("glue", IsA, "adhesive"),
        ("tape", IsA, "adhesive"),
        ("tape", SimilarTo, "glue"),
        ("adhesive", UsedFor, "sticky"),
        ("paper", CapableOf, "sticky"),
        ("book", PartOf, "paper"),
        ("light_switch", UsedFor, "light"),
        ("light_switch", PartOf, "wall"),
        ("light", CapableOf, "on"),
        ("on", SimilarTo, "open"),
        ("off", SimilarTo, "closed"),
        ("inside", SimilarTo, "container"),
        ("ontop", SimilarTo, "carrier"),
        ("ontop", SimilarTo, "table"),
        ("near", SimilarTo, "reach"),
        ("connectedto", SimilarTo, "sticky"),
        ("grabbed", SimilarTo, "transport"),
        ("free", SimilarTo, "outside"),
        ("outside", SimilarTo, "floor"),
        ("dirt", PartOf, "floor"),
        ("floor", SimilarTo, "ontop"),
        ("wall", SimilarTo, "floor"),
        ("storage", IsA, "container"),
        ("appliance", UsedFor, "storage"),
        ("juice", PartOf, "fruit"),
        ("closed", SimilarTo, "container"),
        ("clean", SimilarTo, "cleaner"),
        ("stool", PartOf, "furniture"),
        ("table", PartOf, "furniture"),
        ("cupboard", PartOf, "furniture"),
        ("shelf", PartOf, "furniture"),
        ("transport", CapableOf, "reach"),
        ("bottle", SimilarTo, "milk"),
        ("dumpster", SimilarTo, "box"),
        ("mop", PartOf, "stick"),
        ("tray", PartOf, "table"),
    ]
};

fn token_seed(token: &str) -> u64 {
    // FNV-1a
    token.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

fn gaussian_unit(seed: u64, dim: usize) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let v: Vec<f64> = (0..dim).map(|_| standard_normal(&mut rng)).collect();
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// Base (non-retrofitted) table of width `dim`.
pub fn desk_base_table(dim: usize, seed: u64) -> EmbeddingTable {
    let mut table = EmbeddingTable::new(dim);
    for (token, features) in TOKENS {
        let mut v = gaussian_unit(derive_seed(seed, token_seed(token)), dim);
        for f in *features {
            let d = gaussian_unit(derive_seed(seed ^ 0x5EED, token_seed(f)), dim);
            v.iter_mut().zip(d).for_each(|(a, b)| *a += FEATURE_WEIGHT * b);
        }
        let n = norm(&v);
        v.iter_mut().for_each(|x| *x /= n);
        table.insert(token, v).expect("width matches");
    }
    table.attach_graph(&desk_graph());
    table
}

pub fn desk_graph() -> KnowledgeGraph {
    let mut kg = KnowledgeGraph::new();
    for (a, r, b) in GRAPH {
        kg.add(a, *r, b).expect("no self-loops");
    }
    kg
}

/// Retrofitted desk table (10 sweeps, lambda 1).
pub fn desk_table(dim: usize, seed: u64) -> EmbeddingTable {
    retrofit(&desk_base_table(dim, seed), &desk_graph(), 10, 1.0).expect("valid retrofit parameters")
}
