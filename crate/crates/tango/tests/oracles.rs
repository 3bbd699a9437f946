mod common;

use rand::seq::SliceRandom;
use rand::Rng as _;
use tango_core::domain::{self, generate_scene};
use tango_core::embed::{desk_table, DESK_DIM};
use tango_core::harness::applicable_actions;
use tango_core::policy::{encode_action, GoalFeatures, PolicyConfig, SceneFeatures, TangoModel};
use tango_core::rng_from_seed;
use tango_core::sim::SimConfig;

use common::{max_diff, reference};

#[test]
fn forward_pass_matches_naive_reference() {
    let table = desk_table(DESK_DIM, 0);
    for i in 0..50u64 {
        let mut rng = rng_from_seed(1000 + i);
        let config = PolicyConfig { hidden: 6 + (i as usize % 5), learnable_slope: i % 2 == 0, ..PolicyConfig::default() };
        let model = TangoModel::new(config, i).unwrap();
        let mut s = generate_scene(i).unwrap();
        let mut ids = s.sorted_ids();
        ids.shuffle(&mut rng);
        let keep = rng.random_range(1..=ids.len());
        for id in &ids[keep..] {
            s.remove_object(id);
        }
        let options = applicable_actions(&s, &SimConfig::deterministic());
        let history: Vec<Vec<f64>> = (0..rng.random_range(0..5))
            .filter_map(|_| options.get(rng.random_range(0..options.len().max(1))))
            .map(|a| encode_action(a, &table))
            .collect();
        let goal = domain::goal(domain::GOAL_IDS[i as usize % domain::GOAL_IDS.len()]).unwrap();
        let scene = SceneFeatures::from_state(&s, &table).unwrap();
        let g = GoalFeatures::from_goal(&goal, &table);
        let got = model.infer(&scene, &g, &history).unwrap();
        let want = reference(&model, &scene, &g, &history);
        let tol = 1e-12;
        for (o, row) in want.nodes.iter().enumerate() {
            assert!(max_diff(got.encoded.nodes.row(o), row) < tol, "instance {i} node {o}");
        }
        assert!(max_diff(&got.encoded.history, &want.history) < tol, "instance {i} history");
        assert!(max_diff(&got.encoded.attention, &want.attention) < tol, "instance {i} attention");
        assert!(max_diff(&got.encoded.omega, &want.omega) < tol, "instance {i} omega");
        assert!(max_diff(&got.heads.interaction, &want.interaction) < tol, "instance {i} interaction");
        assert!(max_diff(&got.heads.alpha, &want.alpha) < tol, "instance {i} alpha");
        match (&got.heads.beta, &want.beta) {
            (Some(a), Some(b)) => assert!(max_diff(a, b) < tol, "instance {i} beta"),
            (None, None) => {}
            other => panic!("instance {i}: beta presence differs {other:?}"),
        }
        assert_eq!(got.action, want.action, "instance {i}");
    }
}
