use super::{
    check_actions, eval_columns, sample_indices, AgentError, Batch, EvalHook, TrainConfig, TrainLogRow,
    OUTPUT_INIT_SCALE,
};
use crate::env::{Action, Observation, Policy, LOOKAHEAD};
use crate::gen::{Dataset, NormStats};
use crate::nn::{backward, forward, forward_batch, Adam, Grads, NetSpec, NnError, Params};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Regression policy: one head per lookahead quarter, trained on rates
/// scaled to [0, 1] by `paar_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct BcPolicy {
    pub net: Params,
    pub stats: NormStats,
    pub paar_max: u32,
}

impl BcPolicy {
    /// Head outputs in rate units, before rounding.
    pub fn raw_rates(&self, obs: &Observation) -> Vec<f64> {
        let x = self.stats.normalize(&obs.to_vec());
        let (y, _) = forward(&self.net, &x).expect("policy input width matches observation");
        y.iter().map(|v| v * self.paar_max as f64).collect()
    }

    /// Rounds half to even, then clamps to [0, paar_max].
    pub fn to_rate(raw: f64, paar_max: u32) -> u32 {
        if raw.is_nan() {
            return 0;
        }
        raw.round_ties_even().clamp(0.0, paar_max as f64) as u32
    }
}

impl Policy for BcPolicy {
    fn act(&self, obs: &Observation) -> Action {
        let mut paar = [0; LOOKAHEAD];
        for (p, raw) in paar.iter_mut().zip(self.raw_rates(obs)) {
            *p = Self::to_rate(raw, self.paar_max);
        }
        Action { paar }
    }
}

/// Mean squared error over batch and heads against `actions / paar_max`.
pub fn bc_loss(net: &Params, batch: &Batch, paar_max: u32) -> Result<(f64, Grads), NnError> {
    let cache = forward_batch(net, &batch.obs)?;
    let y = cache.output();
    let n = (batch.size * LOOKAHEAD) as f64;
    let mut loss = 0.0;
    let mut dy = vec![0.0; y.len()];
    for (r, action) in batch.actions.iter().enumerate() {
        for h in 0..LOOKAHEAD {
            let k = r * LOOKAHEAD + h;
            let e = y[k] - action[h] as f64 / paar_max as f64;
            loss += e * e;
            dy[k] = 2.0 * e / n;
        }
    }
    Ok((loss / n, backward(net, &cache, &dy)?))
}

pub fn bc_train(
    dataset: &Dataset,
    spec: &NetSpec,
    cfg: &TrainConfig,
    paar_max: u32,
    eval: Option<EvalHook<'_>>,
) -> Result<(BcPolicy, Vec<TrainLogRow>), AgentError> {
    cfg.validate()?;
    check_actions(dataset, paar_max)?;
    if spec.input() != dataset.dim() || spec.output() != LOOKAHEAD {
        return Err(AgentError::InvalidConfig(format!(
            "network {:?} does not map {} inputs to {LOOKAHEAD} heads",
            spec.layer_sizes,
            dataset.dim()
        )));
    }
    let mut net = Params::init(spec, cfg.seed)?;
    net.scale_output_layer(OUTPUT_INIT_SCALE);
    let mut policy = BcPolicy {
        net,
        stats: dataset.stats.clone(),
        paar_max,
    };
    let mut opt = Adam::new(policy.net.len(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = Vec::with_capacity(cfg.n_iter);
    for iter in 1..=cfg.n_iter {
        let idx = sample_indices(&mut rng, dataset.transitions.len(), cfg.batch_size);
        let batch = Batch::gather(dataset, &policy.stats, &idx);
        let (loss, grads) = bc_loss(&policy.net, &batch, paar_max)?;
        opt.step(&mut policy.net, &grads)?;
        let (eval_mean, eval_std) = eval_columns(eval, &policy, iter, cfg)?;
        log.push(TrainLogRow {
            iter,
            train_loss: loss,
            td_term: None,
            conservative_term: None,
            eval_mean,
            eval_std,
        });
    }
    Ok((policy, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Dense;

    #[test]
    fn rounding_convention() {
        assert_eq!(BcPolicy::to_rate(11.6, 16), 12);
        assert_eq!(BcPolicy::to_rate(11.5, 16), 12);
        assert_eq!(BcPolicy::to_rate(10.5, 16), 10);
        assert_eq!(BcPolicy::to_rate(-3.0, 16), 0);
        assert_eq!(BcPolicy::to_rate(40.0, 16), 16);
        assert_eq!(BcPolicy::to_rate(f64::NAN, 16), 0);
    }

    #[test]
    fn head_output_is_rounded() {
        // single linear layer whose bias alone sets every head to 11.6 / 16
        let mut l = Dense::zeros(crate::env::OBS_DIM, LOOKAHEAD, crate::nn::Activation::Linear);
        l.b = vec![11.6 / 16.0; LOOKAHEAD];
        let policy = BcPolicy {
            net: Params::from_layers(vec![l]).unwrap(),
            stats: NormStats::identity(crate::env::OBS_DIM),
            paar_max: 16,
        };
        assert_eq!(policy.act(&Observation::default()), Action::uniform(12));
    }
}
