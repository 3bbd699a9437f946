use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EvalCase};
use crate::error::{Error, Result};
use crate::sim::{applicable, run_episode, Policy, SimConfig};
use crate::world::{Action, Goal, InteractionType, WorldState};
use crate::{derive_seed, rng_from_seed, Rng};

/// Fraction of demonstrated steps whose predicted action (interaction and
/// every argument id) equals the demonstration, with the demonstrated prefix
/// as history.
pub fn eval_action_accuracy(policy: &mut dyn Policy, corpus: &Corpus) -> Result<f64> {
    let (mut hits, mut total) = (0usize, 0usize);
    for d in &corpus.demos {
        let actions = d.actions();
        for (j, step) in d.steps.iter().enumerate() {
            if policy.act(&step.state, &d.goal, &actions[..j])? == step.action {
                hits += 1;
            }
            total += 1;
        }
    }
    Ok(if total == 0 { 0.0 } else { hits as f64 / total as f64 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub case: String,
    pub seed: u64,
    pub success: bool,
    pub steps: usize,
}

/// Runs `episodes_per_case` episodes per case and reports each one. Episode
/// `e` of case `k` uses simulator seed `derive_seed(cfg.seed, k * n + e)`.
pub fn run_cases(policy: &mut dyn Policy, cases: &[EvalCase], cfg: &SimConfig, episodes_per_case: usize) -> Result<Vec<EpisodeResult>> {
    let n = episodes_per_case.max(1);
    let mut out = Vec::with_capacity(cases.len() * n);
    for (k, case) in cases.iter().enumerate() {
        for e in 0..n {
            let seed = derive_seed(cfg.seed, (k * n + e) as u64);
            let run = SimConfig { seed, ..cfg.clone() };
            let trace = run_episode(policy, &case.scene, &case.goal, &run)?;
            out.push(EpisodeResult { case: case.id.clone(), seed, success: trace.success, steps: trace.steps });
        }
    }
    Ok(out)
}

/// Success fraction over [`run_cases`].
pub fn eval_plan_accuracy(policy: &mut dyn Policy, cases: &[EvalCase], cfg: &SimConfig, episodes_per_case: usize) -> Result<f64> {
    let runs = run_cases(policy, cases, cfg, episodes_per_case)?;
    Ok(if runs.is_empty() { 0.0 } else { runs.iter().filter(|r| r.success).count() as f64 / runs.len() as f64 })
}

/// Answers with the demonstrated action of the first step whose state, goal
/// and action history match exactly.
pub struct OraclePolicy<'a> {
    pub corpus: &'a Corpus,
}

impl Policy for OraclePolicy<'_> {
    fn act(&mut self, state: &WorldState, goal: &Goal, history: &[Action]) -> Result<Action> {
        let j = history.len();
        self.corpus
            .demos
            .iter()
            .filter(|d| &d.goal == goal && d.steps.len() > j)
            .find(|d| &d.steps[j].state == state && d.steps[..j].iter().zip(history).all(|(s, a)| &s.action == a))
            .map(|d| d.steps[j].action.clone())
            .ok_or_else(|| Error::Config("state not in the oracle corpus".into()))
    }
}

/// Every grammatical action over the scene's objects that is applicable in
/// `state`.
pub fn applicable_actions(state: &WorldState, cfg: &SimConfig) -> Vec<Action> {
    let ids = state.sorted_ids();
    let mut out = Vec::new();
    for i in InteractionType::ALL {
        for a in &ids {
            if i.arity() == 1 {
                let act = Action::unary(i, a.clone());
                if applicable(state, &act, cfg).is_ok() {
                    out.push(act);
                }
            } else {
                for b in &ids {
                    let act = Action::binary(i, a.clone(), b.clone());
                    if applicable(state, &act, cfg).is_ok() {
                        out.push(act);
                    }
                }
            }
        }
    }
    out
}

/// Uniform choice among the applicable actions.
pub struct RandomPolicy {
    pub rng: Rng,
    pub cfg: SimConfig,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self { rng: rng_from_seed(seed), cfg: SimConfig::deterministic() }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, state: &WorldState, _goal: &Goal, _history: &[Action]) -> Result<Action> {
        let options = applicable_actions(state, &self.cfg);
        if options.is_empty() {
            return Err(Error::Config("no applicable action".into()));
        }
        Ok(options[self.rng.random_range(0..options.len())].clone())
    }
}

/// One-sided sign test: probability of at least `wins` successes in
/// `wins + losses` fair coin flips. Ties are dropped by the caller.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    // C(n, k) / 2^n summed in floating point; n is small.
    let mut tail = 0.0;
    let mut c = 1.0f64;
    for k in 0..=n {
        if k >= wins {
            tail += c;
        }
        c = c * (n - k) as f64 / (k + 1) as f64;
    }
    tail / crate::math::powi(2.0, n as i32)
}
