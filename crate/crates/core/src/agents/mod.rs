//! Offline agents trained from logged transitions, baselines, and batch
//! evaluation.

mod bc;
mod checkpoint;
mod cql;

pub use bc::{bc_loss, bc_train, BcPolicy};
pub use checkpoint::{read_agent, write_agent, Agent};
pub use cql::{cql_loss, cql_objective, cql_train, CqlAgent, CqlConfig, CqlLoss, CqlTerms};

use crate::env::{run_episode, Action, EnvConfig, EnvError, Observation, Policy, SagdpEnv};
use crate::gen::{derive_seed, gen_scenario, Dataset, GenConfig, GenError, NormStats, ScriptedExpert};
use crate::nn::NnError;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Output-layer weights start this much smaller than He-uniform, so fresh
/// networks predict near-constant values.
pub const OUTPUT_INIT_SCALE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("bad agent checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_iter: usize,
    pub batch_size: usize,
    pub eval_batch_size: usize,
    /// Evaluate every this many iterations (and after the last one).
    pub eval_interval: usize,
    pub seed: u64,
    pub lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_iter: 1000,
            batch_size: 64,
            eval_batch_size: 100,
            eval_interval: 100,
            seed: 0,
            lr: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.n_iter == 0 || self.batch_size == 0 || self.eval_batch_size == 0 || self.eval_interval == 0 {
            return Err(AgentError::InvalidConfig("training counts must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(AgentError::InvalidConfig("lr must be positive".into()));
        }
        Ok(())
    }
}

/// One row of the training log. Terms that do not apply to an algorithm,
/// and evaluation columns on iterations without evaluation, are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub iter: usize,
    pub train_loss: f64,
    pub td_term: Option<f64>,
    pub conservative_term: Option<f64>,
    pub eval_mean: Option<f64>,
    pub eval_std: Option<f64>,
}

/// Where evaluation episodes come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[derive(Default)]
pub struct EvalSource {
    pub gen: GenConfig,
    pub env: EnvConfig,
}

/// Optional in-training evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EvalHook<'a> {
    pub source: &'a EvalSource,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mean: f64,
    /// Standard error of the mean return.
    pub std: f64,
    /// Sample standard deviation of the episode returns.
    pub episode_std: f64,
    pub returns: Vec<f64>,
}

/// Greedy rollouts on `eval_batch_size` generated scenarios. Scenario `i`
/// uses a seed derived from (`seed`, `i`), so the same seed always sees the
/// same scenarios, and a larger batch extends a smaller one.
pub fn evaluate(
    policy: &dyn Policy,
    source: &EvalSource,
    eval_batch_size: usize,
    seed: u64,
) -> Result<EvalResult, AgentError> {
    if eval_batch_size == 0 {
        return Err(AgentError::InvalidConfig("eval_batch_size must be at least 1".into()));
    }
    let returns: Vec<f64> = (0..eval_batch_size as u64)
        .into_par_iter()
        .map(|i| {
            let scenario = gen_scenario(&source.gen.with_seed(derive_seed(seed, i)))?;
            let mut env = SagdpEnv::new(source.env.clone());
            Ok(run_episode(&mut env, &scenario, policy)?.total_return)
        })
        .collect::<Result<_, AgentError>>()?;
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let episode_std = if returns.len() > 1 {
        (returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(EvalResult {
        mean,
        std: episode_std / n.sqrt(),
        episode_std,
        returns,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineKind {
    Constant,
    OracleCapacity,
}

/// Fixed-rate or weather-capacity reference policies.
pub fn baseline_policy(kind: BaselineKind, rate: u32, paar_max: u32) -> Result<Box<dyn Policy>, AgentError> {
    match kind {
        BaselineKind::Constant => {
            if rate > paar_max {
                return Err(AgentError::InvalidConfig(format!(
                    "rate {rate} above maximum {paar_max}"
                )));
            }
            Ok(Box::new(move |_: &Observation| Action::uniform(rate)))
        }
        BaselineKind::OracleCapacity => Ok(Box::new(ScriptedExpert {
            paar_max,
            ..Default::default()
        })),
    }
}

/// `n` indices drawn uniformly with replacement.
pub fn sample_indices(rng: &mut ChaCha8Rng, len: usize, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..len)).collect()
}

/// Normalized minibatch in network layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    /// `size × dim`, row-major.
    pub obs: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub actions: Vec<[u32; crate::env::LOOKAHEAD]>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn gather(dataset: &Dataset, stats: &NormStats, indices: &[usize]) -> Batch {
        let mut b = Batch {
            size: indices.len(),
            obs: Vec::new(),
            next_obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            dones: Vec::new(),
        };
        for &i in indices {
            let t = &dataset.transitions[i];
            b.obs.extend(stats.normalize(&t.obs));
            b.next_obs.extend(stats.normalize(&t.next_obs));
            b.actions.push(t.action);
            b.rewards.push(t.reward);
            b.dones.push(t.done);
        }
        b
    }
}

fn check_actions(dataset: &Dataset, paar_max: u32) -> Result<(), AgentError> {
    if dataset.transitions.is_empty() {
        return Err(AgentError::EmptyDataset);
    }
    if let Some(t) = dataset
        .transitions
        .iter()
        .find(|t| t.action.iter().any(|&a| a > paar_max))
    {
        return Err(AgentError::InvalidConfig(format!(
            "dataset action {:?} exceeds maximum rate {paar_max}",
            t.action
        )));
    }
    Ok(())
}

fn eval_columns(
    hook: Option<EvalHook<'_>>,
    policy: &dyn Policy,
    iter: usize,
    cfg: &TrainConfig,
) -> Result<(Option<f64>, Option<f64>), AgentError> {
    match hook {
        Some(h) if iter.is_multiple_of(cfg.eval_interval) || iter == cfg.n_iter => {
            let r = evaluate(policy, h.source, cfg.eval_batch_size, h.seed)?;
            log::info!("iter {iter}: eval mean {:.1} (se {:.1})", r.mean, r.std);
            Ok((Some(r.mean), Some(r.std)))
        }
        _ => Ok((None, None)),
    }
}
