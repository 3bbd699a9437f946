use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;
use crate::domain::class_catalog;
use crate::math::cosine;

fn table(entries: &[(&str, Vec<f64>)]) -> EmbeddingTable {
    let mut t = EmbeddingTable::new(entries[0].1.len());
    for (k, v) in entries {
        t.insert(k, v.clone()).unwrap();
    }
    t
}

#[test]
fn lookup_returns_stored_vector() {
    let t = desk_table(DESK_DIM, 0);
    let v = t.embed("milk");
    assert_eq!(v.len(), DESK_DIM);
    assert_eq!(&v, &t.entries["milk"]);
}

#[test]
fn unknown_token_falls_back_to_neighbor_mean_then_zero() {
    let mut t = table(&[("a", vec![1.0, 0.0]), ("b", vec![0.0, 3.0])]);
    let mut kg = KnowledgeGraph::new();
    kg.add("x", KgRelation::IsA, "a").unwrap();
    kg.add("b", KgRelation::UsedFor, "x").unwrap();
    kg.add("x", KgRelation::PartOf, "ghost").unwrap();
    t.attach_graph(&kg);
    assert_eq!(t.embed("x"), vec![(1.0 + 0.0) / 2.0, (0.0 + 3.0) / 2.0]);
    assert_eq!(t.embed("nothing"), vec![0.0, 0.0]);
}

#[test]
fn retrofit_without_edges_is_identity() {
    let t = desk_base_table(8, 3);
    let r = retrofit(&t, &KnowledgeGraph::new(), 5, 1.0).unwrap();
    assert_eq!(r.entries, t.entries);
}

#[test]
fn similar_tokens_move_closer() {
    let t = table(&[("a", vec![1.0, 0.2, 0.0]), ("b", vec![0.0, 0.5, 1.0]), ("c", vec![0.3, -1.0, 0.2])]);
    let mut kg = KnowledgeGraph::new();
    kg.add("a", KgRelation::SimilarTo, "b").unwrap();
    let before = cosine(&t.embed("a"), &t.embed("b"));
    let r = retrofit(&t, &kg, 10, 1.0).unwrap();
    let after = cosine(&r.embed("a"), &r.embed("b"));
    assert!(after > before, "{after} <= {before}");
    assert_eq!(r.entries["c"], t.entries["c"]);
}

/// Reference Jacobi iteration written against plain maps.
fn reference_retrofit(
    base: &BTreeMap<String, Vec<f64>>,
    edges: &[(&str, f64, &str)],
    iters: usize,
    lambda: f64,
) -> BTreeMap<String, Vec<f64>> {
    let mut cur = base.clone();
    for _ in 0..iters {
        let mut next = cur.clone();
        for (w, b) in base {
            let mut num: Vec<f64> = b.iter().map(|x| x * lambda).collect();
            let mut den = lambda;
            let mut any = false;
            for &(s, beta, d) in edges {
                let other = if s == w { d } else if d == w { s } else { continue };
                let Some(v) = cur.get(other) else { continue };
                any = true;
                for i in 0..num.len() {
                    num[i] += beta * v[i];
                }
                den += beta;
            }
            if any {
                next.insert(w.clone(), num.iter().map(|x| x / den).collect());
            }
        }
        cur = next;
    }
    cur
}

#[test]
fn retrofit_matches_reference_on_a_chain() {
    let t = table(&[("a", vec![1.0, 0.0, 0.5]), ("b", vec![0.0, 1.0, -0.5]), ("c", vec![0.25, 0.25, 2.0])]);
    let mut kg = KnowledgeGraph::new();
    kg.add("a", KgRelation::SimilarTo, "b").unwrap();
    kg.add("b", KgRelation::IsA, "c").unwrap();
    for (iters, lambda) in [(1, 1.0), (3, 0.5), (25, 2.0)] {
        let got = retrofit(&t, &kg, iters, lambda).unwrap();
        let want = reference_retrofit(&t.entries, &[("a", 1.0, "b"), ("b", 0.8, "c")], iters, lambda);
        for (k, v) in &want {
            for (x, y) in v.iter().zip(&got.entries[k]) {
                assert!((x - y).abs() <= 1e-12, "{k}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn retrofit_rejects_bad_parameters() {
    let t = desk_base_table(4, 0);
    assert!(retrofit(&t, &desk_graph(), 0, 1.0).is_err());
    assert!(retrofit(&t, &desk_graph(), 3, 0.0).is_err());
}

#[test]
fn nearest_class_examples() {
    let t = desk_table(DESK_DIM, 0);
    assert_eq!(nearest_class(&t, "milk", &["milk"]), Some("milk"));
    // Oracle: compute the cosines directly.
    let c_tray = cosine(&t.embed("box"), &t.embed("tray"));
    let c_stick = cosine(&t.embed("box"), &t.embed("stick"));
    assert!(c_tray > c_stick, "{c_tray} vs {c_stick}");
    assert_eq!(nearest_class(&t, "box", &["tray", "stick"]), Some("tray"));
    assert_eq!(nearest_class(&t, "box", &[]), None);
}

#[test]
fn nearest_class_breaks_ties_lexicographically() {
    let t = table(&[("q", vec![1.0, 0.0]), ("b", vec![2.0, 0.0]), ("a", vec![5.0, 0.0]), ("z", vec![0.0, 1.0])]);
    assert_eq!(nearest_class(&t, "q", &["z", "b", "a"]), Some("a"));
}

#[test]
fn desk_table_covers_domain_and_relation_tokens() {
    let t = desk_table(DESK_DIM, 0);
    for token in class_catalog().keys() {
        assert!(t.contains(token), "{token}");
    }
    for kind in crate::world::RelationKind::ALL {
        assert!(t.contains(kind.token()));
    }
    for token in ["open", "closed", "on", "off", "clean", "dirty"] {
        assert!(t.contains(token));
    }
    assert!(desk_graph().edges.len() >= 75);
    for e in &desk_graph().edges {
        assert_ne!(e.src, e.dst);
        assert_eq!(e.src, e.src.to_lowercase());
    }
}

#[test]
fn substitutes_are_nearest_to_their_tools() {
    let t = desk_table(DESK_DIM, 0);
    let scene_classes = ["apple", "book", "bottle", "cupboard", "dirt", "dumpster", "floor", "fridge", "light_switch", "milk", "mop", "orange", "shelf", "stick", "stool", "table", "tray"];
    for (alt, tool) in [("box", "tray"), ("vacuum", "mop"), ("ladder", "stool")] {
        assert_eq!(nearest_class(&t, alt, &scene_classes), Some(tool), "{alt}");
    }
}

#[test]
fn retrofit_keeps_width_and_finite_values() {
    let t = desk_table(DESK_DIM, 9);
    assert_eq!(t.provenance, Provenance::Retrofitted);
    assert!(t.entries.values().all(|v| v.len() == DESK_DIM && v.iter().all(|x| x.is_finite())));
    let base = desk_base_table(DESK_DIM, 9);
    let kg_tokens: Vec<String> = desk_graph().tokens().iter().map(|s| s.to_string()).collect();
    for (k, v) in &base.entries {
        if !kg_tokens.contains(k) {
            assert_eq!(v, &t.entries[k]);
        }
    }
}

proptest! {
    #[test]
    fn cosine_is_bounded_and_reflexive(a in prop::collection::vec(-10.0f64..10.0, 1..16)) {
        let b: Vec<f64> = a.iter().rev().copied().collect();
        let c = cosine(&a, &b);
        prop_assert!((-1.0..=1.0).contains(&c));
        if a.iter().any(|x| *x != 0.0) {
            prop_assert!((cosine(&a, &a) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nearest_class_is_scale_invariant(seed in 0u64..50, factor in 0.1f64..10.0, pick in 0usize..30) {
        let t = desk_table(16, seed);
        let tokens: Vec<&str> = t.entries.keys().map(|s| s.as_str()).collect();
        let token = tokens[pick % tokens.len()];
        let cands: Vec<&str> = tokens.iter().copied().filter(|c| *c != token).take(12).collect();
        prop_assert_eq!(nearest_class(&t, token, &cands), nearest_class(&t.scaled(factor), token, &cands));
        prop_assert_eq!(nearest_class(&t, token, &cands), nearest_class(&t.scaled(3.0), token, &cands));
    }
}
