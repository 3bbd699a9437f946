//! Training loop, the two accuracy metrics, reference policies and the
//! ablation table.

mod eval;
mod suite;
mod train;

pub use eval::{
    applicable_actions, eval_action_accuracy, eval_plan_accuracy, run_cases, sign_test, EpisodeResult, OraclePolicy,
    RandomPolicy,
};
pub use suite::{
    ablation_suite, default_slots, prepare, row_ablations, run_row, table_csv, table_text, AblationRow, DataSpec,
    DeskData, ABLATION_ROWS, SET_NAMES,
};
pub use train::{sequences, train, EpochLog, TrainReport, TrainSpec};

#[cfg(test)]
mod tests;
