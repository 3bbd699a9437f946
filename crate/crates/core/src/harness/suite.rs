use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::eval::{eval_action_accuracy, eval_plan_accuracy};
use super::train::{train, EpochLog, TrainReport, TrainSpec};
use crate::corpus::{augment, episode_starts, generate_corpus, make_generalization_set, split, Corpus, EvalCase, Strategy};
use crate::domain::{class_catalog, MicroHome, GOAL_IDS, RESERVE_POOL};
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::policy::{Ablations, TangoAgent, TangoModel};
use crate::sim::SimConfig;
use crate::derive_seed;

/// How the desk-scale corpora are produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSpec {
    pub scenes: usize,
    pub scene_seed: u64,
    /// Share of demonstrations that include a forced drop.
    pub perturb_rate: f64,
    pub augment_factor: usize,
    pub position_radius: f64,
    pub seed: u64,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self { scenes: 12, scene_seed: 7, perturb_rate: 0.4, augment_factor: 5, position_radius: 0.5, seed: 0 }
    }
}

/// Evaluation column names, in table order.
pub const SET_NAMES: [&str; 6] = ["test", "position", "alternate", "unseen", "random", "goal"];

#[derive(Clone, Debug, PartialEq)]
pub struct DeskData {
    /// Expert demonstrations before splitting.
    pub base: Corpus,
    /// Augmented training split.
    pub train: Corpus,
    pub val: Corpus,
    pub test: Corpus,
    /// Evaluation episodes per [`SET_NAMES`] entry.
    pub sets: Vec<(String, Vec<EvalCase>)>,
}

impl DeskData {
    pub fn set(&self, name: &str) -> Result<&[EvalCase]> {
        self.sets
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_slice())
            .ok_or_else(|| Error::Config(format!("unknown evaluation set `{name}` (available: {})", SET_NAMES.join(", "))))
    }
}

/// Expert corpus, split, training augmentation and the evaluation sets.
pub fn prepare(spec: &DataSpec, table: &EmbeddingTable) -> Result<DeskData> {
    let home = MicroHome { seed: spec.scene_seed, scenes: spec.scenes };
    let base = generate_corpus(&home, &GOAL_IDS, spec.perturb_rate, derive_seed(spec.seed, 1))?;
    let parts = split(&base, derive_seed(spec.seed, 2))?;
    let (train, _) = augment(&parts.train, spec.augment_factor, table, derive_seed(spec.seed, 3))?;
    let mut sets = vec![("test".to_string(), episode_starts(&parts.test, "test"))];
    let strategies = [
        Strategy::Position { radius: spec.position_radius },
        Strategy::Alternate,
        Strategy::Unseen,
        Strategy::Random,
        Strategy::Goal,
    ];
    for (k, s) in strategies.iter().enumerate() {
        let cases = make_generalization_set(&parts.test, s, table, &RESERVE_POOL, derive_seed(spec.seed, 10 + k as u64))?;
        sets.push((s.name().to_string(), cases));
    }
    Ok(DeskData { base, train, val: parts.val, test: parts.test, sets })
}

/// Classes the fixed-slot decoder scores: every non-reserve catalog class.
pub fn default_slots() -> Vec<String> {
    class_catalog().into_keys().filter(|c| !RESERVE_POOL.contains(&c.as_str())).collect()
}

/// Ablation rows in table order with the flags each one sets.
pub const ABLATION_ROWS: [(&str, &[&str]); 8] = [
    ("full", &[]),
    ("-GGCN", &["no_ggcn"]),
    ("-Metric", &["no_metric"]),
    ("-Attn", &["no_attention"]),
    ("-History", &["no_history"]),
    ("-ConceptNet", &["base_embeddings"]),
    ("-FactoredLikelihood", &["fixed_object_decoder"]),
    ("affordance-only", &["no_ggcn", "no_attention"]),
];

pub fn row_ablations(name: &str) -> Result<Ablations> {
    let (_, flags) = ABLATION_ROWS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Config(format!("unknown ablation row `{name}`")))?;
    let mut a = Ablations::default();
    for f in *flags {
        let one = Ablations::only(f)?;
        a.no_ggcn |= one.no_ggcn;
        a.no_metric |= one.no_metric;
        a.no_attention |= one.no_attention;
        a.no_history |= one.no_history;
        a.base_embeddings |= one.base_embeddings;
        a.fixed_object_decoder |= one.fixed_object_decoder;
    }
    Ok(a)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    /// Teacher-forced action accuracy on the test split.
    pub action_accuracy: f64,
    /// Plan execution accuracy per [`SET_NAMES`] entry.
    pub plan: Vec<f64>,
    pub report: TrainReport,
}

/// Trains one configuration and evaluates it on every set.
pub fn run_row(
    name: &str,
    spec: &TrainSpec,
    data: &DeskData,
    retrofitted: &EmbeddingTable,
    base: &EmbeddingTable,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<(TangoModel, AblationRow)> {
    let mut spec = spec.clone();
    spec.policy.ablations = row_ablations(name)?;
    if spec.policy.ablations.fixed_object_decoder && spec.policy.object_slots.is_empty() {
        spec.policy.object_slots = default_slots();
    }
    let table = if spec.policy.ablations.base_embeddings { base } else { retrofitted };
    let (model, report) = train(&spec, &data.train, &data.val, table, on_epoch)?;
    let mut agent = TangoAgent { model: &model, table };
    let action_accuracy = eval_action_accuracy(&mut agent, &data.test)?;
    let cfg = SimConfig::deterministic();
    let plan = data.sets.iter().map(|(_, cases)| eval_plan_accuracy(&mut agent, cases, &cfg, 1)).collect::<Result<_>>()?;
    Ok((model, AblationRow { name: name.to_string(), action_accuracy, plan, report }))
}

/// Every row of [`ABLATION_ROWS`] with shared seeds.
pub fn ablation_suite(
    spec: &TrainSpec,
    data: &DeskData,
    retrofitted: &EmbeddingTable,
    base: &EmbeddingTable,
    on_row: &mut dyn FnMut(&AblationRow),
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for (name, _) in ABLATION_ROWS {
        let (_, row) = run_row(name, spec, data, retrofitted, base, &mut |_| {})?;
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}

fn header() -> Vec<String> {
    let mut h = vec!["configuration".to_string(), "action".to_string()];
    h.extend(SET_NAMES.iter().map(|s| s.to_string()));
    h
}

fn cells(row: &AblationRow) -> Vec<String> {
    let mut c = vec![row.name.clone(), format!("{:.2}", 100.0 * row.action_accuracy)];
    c.extend(row.plan.iter().map(|v| format!("{:.2}", 100.0 * v)));
    c
}

/// Rows as CSV with percentages.
pub fn table_csv(rows: &[AblationRow]) -> String {
    let mut out = header().join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&cells(r).join(","));
        out.push('\n');
    }
    out
}

/// Rows as a space-aligned text table.
pub fn table_text(rows: &[AblationRow]) -> String {
    let mut grid = vec![header()];
    grid.extend(rows.iter().map(cells));
    let cols = grid[0].len();
    let width: Vec<usize> = (0..cols).map(|c| grid.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, r) in grid.iter().enumerate() {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, v)| if c == 0 { format!("{v:<w$}", w = width[c]) } else { format!("{v:>w$}", w = width[c]) })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (cols - 1)));
            out.push('\n');
        }
    }
    out
}
