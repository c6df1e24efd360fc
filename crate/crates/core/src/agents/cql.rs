use super::{
    check_actions, eval_columns, sample_indices, AgentError, Batch, EvalHook, TrainConfig, TrainLogRow,
    OUTPUT_INIT_SCALE,
};
use crate::env::{Action, Observation, Policy, LOOKAHEAD};
use crate::gen::{Dataset, NormStats};
use crate::nn::{backward, forward, forward_batch, Adam, Grads, NetSpec, NnError, Params};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CqlConfig {
    /// Weight of the conservative regularizer; 0 gives plain TD learning.
    pub alpha: f64,
    pub gamma: f64,
    /// Gradient steps between target-network copies.
    pub target_sync: usize,
    /// Rewards are multiplied by this before entering the TD target.
    pub reward_scale: f64,
}

impl Default for CqlConfig {
    fn default() -> Self {
        CqlConfig {
            alpha: 1.0,
            gamma: 0.99,
            target_sync: 200,
            reward_scale: 0.01,
        }
    }
}

impl CqlConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(AgentError::InvalidConfig("alpha must be a finite value >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(AgentError::InvalidConfig("gamma must lie in [0, 1)".into()));
        }
        if self.target_sync == 0 {
            return Err(AgentError::InvalidConfig("target_sync must be positive".into()));
        }
        if !(self.reward_scale > 0.0) {
            return Err(AgentError::InvalidConfig("reward_scale must be positive".into()));
        }
        Ok(())
    }
}

/// Factorized Q-function: head h scores each rate 0..=paar_max for quarter
/// t+1+h. Output index is `h * (paar_max + 1) + rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct CqlAgent {
    pub q_net: Params,
    pub target_net: Params,
    pub stats: NormStats,
    pub config: CqlConfig,
    pub paar_max: u32,
}

impl CqlAgent {
    pub fn n_actions(&self) -> usize {
        self.paar_max as usize + 1
    }

    pub fn q_values(&self, obs: &Observation) -> Vec<f64> {
        let x = self.stats.normalize(&obs.to_vec());
        forward(&self.q_net, &x)
            .expect("q-network input width matches observation")
            .0
    }

    /// Per-head argmax; ties go to the lower rate.
    pub fn greedy(q: &[f64], n_actions: usize) -> Action {
        let mut paar = [0; LOOKAHEAD];
        for (h, p) in paar.iter_mut().enumerate() {
            let head = &q[h * n_actions..(h + 1) * n_actions];
            let mut best = 0;
            for (a, &v) in head.iter().enumerate() {
                if v > head[best] {
                    best = a;
                }
            }
            *p = best as u32;
        }
        Action { paar }
    }
}

impl Policy for CqlAgent {
    fn act(&self, obs: &Observation) -> Action {
        Self::greedy(&self.q_values(obs), self.n_actions())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CqlTerms {
    pub loss: f64,
    pub td_term: f64,
    pub conservative_term: f64,
}

fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Loss terms and dL/dQ from raw Q-values (`batch × heads × n_actions`)
/// and target-network values at the next states.
///
/// Per head: td = (Q(s,a) - [r + γ max Q̄(s',·)(1 - done)])²,
/// conservative = logsumexp Q(s,·) - Q(s,a). Both are averaged over batch
/// and heads; loss = td + alpha · conservative.
pub fn cql_objective(
    q: &[f64],
    q_next: &[f64],
    batch: &Batch,
    cfg: &CqlConfig,
    n_actions: usize,
) -> (CqlTerms, Vec<f64>) {
    let n = (batch.size * LOOKAHEAD) as f64;
    let mut td = 0.0;
    let mut cons = 0.0;
    let mut dq = vec![0.0; q.len()];
    for r in 0..batch.size {
        for h in 0..LOOKAHEAD {
            let off = (r * LOOKAHEAD + h) * n_actions;
            let head = &q[off..off + n_actions];
            let next = &q_next[off..off + n_actions];
            let a = batch.actions[r][h] as usize;
            let bootstrap = if batch.dones[r] {
                0.0
            } else {
                cfg.gamma * next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            let target = batch.rewards[r] * cfg.reward_scale + bootstrap;
            let e = head[a] - target;
            td += e * e;
            dq[off + a] += 2.0 * e / n;
            let lse = logsumexp(head);
            cons += lse - head[a];
            if cfg.alpha != 0.0 {
                for (k, &v) in head.iter().enumerate() {
                    dq[off + k] += cfg.alpha * (v - lse).exp() / n;
                }
                dq[off + a] -= cfg.alpha / n;
            }
        }
    }
    let td_term = td / n;
    let conservative_term = cons / n;
    let loss = if cfg.alpha == 0.0 {
        td_term
    } else {
        td_term + cfg.alpha * conservative_term
    };
    (
        CqlTerms {
            loss,
            td_term,
            conservative_term,
        },
        dq,
    )
}

#[derive(Debug, Clone)]
pub struct CqlLoss {
    pub terms: CqlTerms,
    pub grads: Grads,
}

/// Full loss with gradients w.r.t. `q_net`; `target_net` is held fixed.
pub fn cql_loss(
    q_net: &Params,
    target_net: &Params,
    batch: &Batch,
    cfg: &CqlConfig,
    n_actions: usize,
) -> Result<CqlLoss, NnError> {
    let cache = forward_batch(q_net, &batch.obs)?;
    let next = forward_batch(target_net, &batch.next_obs)?;
    let (terms, dq) = cql_objective(cache.output(), next.output(), batch, cfg, n_actions);
    let grads = backward(q_net, &cache, &dq)?;
    Ok(CqlLoss { terms, grads })
}

pub fn cql_train(
    dataset: &Dataset,
    spec: &NetSpec,
    config: &CqlConfig,
    cfg: &TrainConfig,
    paar_max: u32,
    eval: Option<EvalHook<'_>>,
) -> Result<(CqlAgent, Vec<TrainLogRow>), AgentError> {
    cfg.validate()?;
    config.validate()?;
    check_actions(dataset, paar_max)?;
    let n_actions = paar_max as usize + 1;
    if spec.input() != dataset.dim() || spec.output() != LOOKAHEAD * n_actions {
        return Err(AgentError::InvalidConfig(format!(
            "network {:?} does not map {} inputs to {LOOKAHEAD}x{n_actions} values",
            spec.layer_sizes,
            dataset.dim()
        )));
    }
    let mut q_net = Params::init(spec, cfg.seed)?;
    q_net.scale_output_layer(OUTPUT_INIT_SCALE);
    let mut agent = CqlAgent {
        target_net: q_net.clone(),
        q_net,
        stats: dataset.stats.clone(),
        config: config.clone(),
        paar_max,
    };
    let mut opt = Adam::new(agent.q_net.len(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = Vec::with_capacity(cfg.n_iter);
    for iter in 1..=cfg.n_iter {
        let idx = sample_indices(&mut rng, dataset.transitions.len(), cfg.batch_size);
        let batch = Batch::gather(dataset, &agent.stats, &idx);
        let out = cql_loss(&agent.q_net, &agent.target_net, &batch, config, n_actions)?;
        opt.step(&mut agent.q_net, &out.grads)?;
        if iter % config.target_sync == 0 {
            agent.target_net = agent.q_net.clone();
        }
        let (eval_mean, eval_std) = eval_columns(eval, &agent, iter, cfg)?;
        log.push(TrainLogRow {
            iter,
            train_loss: out.terms.loss,
            td_term: Some(out.terms.td_term),
            conservative_term: Some(out.terms.conservative_term),
            eval_mean,
            eval_std,
        });
    }
    Ok((agent, log))
}
