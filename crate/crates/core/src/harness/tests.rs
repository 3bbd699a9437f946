use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::corpus::{episode_starts, generate_corpus, Corpus, ScriptedExpert};
use crate::domain::{MicroHome, GOAL_IDS};
use crate::embed::{desk_table, DESK_DIM};
use crate::policy::{PolicyConfig, TangoAgent};
use crate::sim::{applicable, SimConfig};
use crate::Error;

fn corpus() -> Corpus {
    generate_corpus(&MicroHome::default(), &GOAL_IDS, 0.4, 5).unwrap()
}

fn tiny_spec(epochs: usize) -> TrainSpec {
    TrainSpec { epochs, patience: 200, lr: 5e-4, seed: 3, policy: PolicyConfig { hidden: 16, ..PolicyConfig::default() } }
}

#[test]
fn oracle_stub_is_perfect() {
    let c = corpus();
    let mut oracle = OraclePolicy { corpus: &c };
    assert_eq!(eval_action_accuracy(&mut oracle, &c).unwrap(), 1.0);
    let cases = episode_starts(&c, "all");
    assert_eq!(cases.len(), 60);
    // unperturbed episodes follow the unperturbed demonstrations only
    let clean = Corpus::new("home", c.demos.iter().filter(|d| !d.perturbed()).cloned().collect());
    let clean_cases = episode_starts(&clean, "clean");
    let mut oracle = OraclePolicy { corpus: &clean };
    assert_eq!(eval_plan_accuracy(&mut oracle, &clean_cases, &SimConfig::deterministic(), 1).unwrap(), 1.0);
    assert_eq!(eval_plan_accuracy(&mut ScriptedExpert::default(), &cases, &SimConfig::deterministic(), 1).unwrap(), 1.0);
}

#[test]
fn random_policy_is_poor() {
    let c = corpus();
    let cases = episode_starts(&c, "all");
    let mut random = RandomPolicy::new(11);
    let plan = eval_plan_accuracy(&mut random, &cases, &SimConfig::deterministic(), 2).unwrap();
    assert!(plan < 0.1, "{plan}");
    // Monte Carlo over the demonstrated steps against 1/|valid actions|
    let first: Corpus = Corpus::new("home", c.demos.iter().take(20).cloned().collect());
    let mut random = RandomPolicy::new(12);
    let (mut hits, mut expected, mut n) = (0usize, 0.0, 0usize);
    for _ in 0..8 {
        for d in &first.demos {
            for s in &d.steps {
                let options = applicable_actions(&s.state, &SimConfig::deterministic());
                expected += 1.0 / options.len() as f64;
                n += 1;
                if crate::sim::Policy::act(&mut random, &s.state, &d.goal, &[]).unwrap() == s.action {
                    hits += 1;
                }
            }
        }
    }
    let acc = hits as f64 / n as f64;
    let expected = expected / n as f64;
    assert!(acc < 0.1 && expected < 0.1, "{acc} {expected}");
    assert!((acc - expected).abs() < 0.03, "{acc} vs {expected}");
}

#[test]
fn applicable_actions_are_applicable() {
    let s = MicroHome::default().scene("home_04").unwrap();
    let cfg = SimConfig::deterministic();
    let acts = applicable_actions(&s, &cfg);
    assert!(acts.len() > 10);
    assert!(acts.iter().all(|a| applicable(&s, a, &cfg).is_ok()));
}

fn binomial_tail(wins: u64, n: u64) -> f64 {
    let choose = |n: u64, k: u64| (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128);
    let num: u128 = (wins..=n).map(|k| choose(n, k)).sum();
    num as f64 / (1u128 << n) as f64
}

#[test]
fn sign_test_matches_exact_binomial() {
    for n in 1..=30u64 {
        for w in 0..=n {
            let p = sign_test(w as usize, (n - w) as usize);
            assert!((p - binomial_tail(w, n)).abs() < 1e-12, "{w}/{n}");
        }
    }
    assert!(sign_test(15, 5) < 0.05);
    assert!(sign_test(14, 6) > 0.05);
    assert_eq!(sign_test(0, 0), 1.0);
}

#[test]
fn train_spec_validation() {
    assert!(TrainSpec { epochs: 0, ..TrainSpec::default() }.validate().is_err());
    assert!(TrainSpec { epochs: 201, ..TrainSpec::default() }.validate().is_err());
    assert!(TrainSpec { patience: 0, ..TrainSpec::default() }.validate().is_err());
    TrainSpec::default().validate().unwrap();
}

#[test]
fn single_demo_overfits() {
    let c = corpus();
    let one = Corpus::new("home", vec![c.demos.iter().find(|d| d.goal_id == "milk_fridge").unwrap().clone()]);
    let table = desk_table(DESK_DIM, 0);
    let spec = TrainSpec { lr: 1e-2, ..tiny_spec(200) };
    let (model, report) = train(&spec, &one, &Corpus::new("home", Vec::new()), &table, &mut |_| {}).unwrap();
    let mut agent = TangoAgent { model: &model, table: &table };
    assert_eq!(eval_action_accuracy(&mut agent, &one).unwrap(), 1.0, "{:?}", report.curve.last());
    assert_eq!(report.best_val_accuracy, 1.0);
}

#[test]
fn training_is_deterministic() {
    let c = corpus();
    let few = Corpus::new("home", c.demos[..3].to_vec());
    let table = desk_table(DESK_DIM, 0);
    let run = || train(&tiny_spec(2), &few, &few, &table, &mut |_| {}).unwrap();
    let (a, ra) = run();
    let (b, rb) = run();
    assert_eq!(a.params, b.params);
    assert_eq!(ra, rb);
    let (c2, _) = train(&TrainSpec { seed: 4, ..tiny_spec(2) }, &few, &few, &table, &mut |_| {}).unwrap();
    assert_ne!(a.params, c2.params);
}

#[test]
fn exploding_updates_report_divergence() {
    let c = corpus();
    let few = Corpus::new("home", c.demos[..3].to_vec());
    let table = desk_table(DESK_DIM, 0);
    let spec = TrainSpec { lr: 1e200, ..tiny_spec(3) };
    match train(&spec, &few, &few, &table, &mut |_| {}) {
        Err(Error::Divergence { .. }) => {}
        other => panic!("{:?}", other.map(|(_, r)| r)),
    }
}

#[test]
fn ablation_rows_and_table_shape() {
    assert_eq!(ABLATION_ROWS.len(), 8);
    for (name, _) in ABLATION_ROWS {
        row_ablations(name).unwrap();
    }
    let aff = row_ablations("affordance-only").unwrap();
    assert!(aff.no_ggcn && aff.no_attention && !aff.no_history);
    let rows: Vec<AblationRow> = ABLATION_ROWS
        .iter()
        .map(|(n, _)| AblationRow {
            name: n.to_string(),
            action_accuracy: 0.5,
            plan: vec![1.0, 0.5, 0.25, 0.0, 0.125, 1.0 / 3.0],
            report: TrainReport { epochs_run: 1, best_epoch: 1, best_val_accuracy: 0.5, curve: Vec::new() },
        })
        .collect();
    let csv = table_csv(&rows);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 9);
    assert_eq!(lines[0], "configuration,action,test,position,alternate,unseen,random,goal");
    assert_eq!(lines[1], "full,50.00,100.00,50.00,25.00,0.00,12.50,33.33");
    assert!(lines.iter().all(|l| l.split(',').count() == 8));
    let text = table_text(&rows);
    let tl: Vec<&str> = text.lines().collect();
    assert_eq!(tl.len(), 10);
    assert!(tl[1].chars().all(|c| c == '-'));
    assert_eq!(tl[2].len(), tl[0].len());
}

#[test]
fn prepared_data_shapes() {
    let table = desk_table(DESK_DIM, 0);
    let data = prepare(&DataSpec::default(), &table).unwrap();
    assert_eq!(data.base.len(), 60);
    assert_eq!(data.test.len(), 15);
    assert_eq!(data.val.len(), 5);
    let train_base = 60 - 15 - 5;
    assert!(data.train.len() > 3 * train_base && data.train.len() <= 5 * train_base, "{}", data.train.len());
    assert_eq!(data.sets.len(), 6);
    assert_eq!(data.set("test").unwrap().len(), 15);
    assert!(data.set("nope").is_err());
    data.train.validate().unwrap();
}
