use super::{backward, forward_batch, Cache, Grads, NetSpec, NnError, Params};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const BATCH: usize = 4;

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Worst relative error between `grads` and central differences of `loss`
/// around `params`, over every parameter.
pub fn check_gradient<F>(params: &Params, grads: &Grads, mut loss: F) -> Result<f64, NnError>
where
    F: FnMut(&Params) -> Result<f64, NnError>,
{
    let analytic = grads.flatten();
    if analytic.len() != params.len() {
        return Err(NnError::Shape {
            expected: params.len(),
            got: analytic.len(),
        });
    }
    let base = params.flatten();
    let mut probe = params.clone();
    let mut flat = base.clone();
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        flat[k] = base[k] + STEP;
        probe.set_flat(&flat)?;
        let up = loss(&probe)?;
        flat[k] = base[k] - STEP;
        probe.set_flat(&flat)?;
        let down = loss(&probe)?;
        flat[k] = base[k];
        worst = worst.max(relative_error(analytic[k], (up - down) / (2.0 * STEP)));
    }
    Ok(worst)
}

/// Neumaier summation. A plain sum over hundreds of squared residuals loses
/// enough low bits to swamp central differences of small gradient entries.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + carry
}

/// Like [`grad_check`] with a substitute backward pass.
pub fn grad_check_with<B>(spec: &NetSpec, seed: u64, backward_fn: B) -> Result<f64, NnError>
where
    B: Fn(&Params, &Cache, &[f64]) -> Result<Grads, NnError>,
{
    let params = Params::init(spec, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let x: Vec<f64> = (0..BATCH * spec.input()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let target: Vec<f64> = (0..BATCH * spec.output()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // 0.5 ||y - target||² averaged over the batch
    let residual = |p: &Params| -> Result<(Cache, Vec<f64>), NnError> {
        let cache = forward_batch(p, &x)?;
        let r = cache.output().iter().zip(&target).map(|(y, t)| y - t).collect();
        Ok((cache, r))
    };
    let (cache, r) = residual(&params)?;
    let dy: Vec<f64> = r.iter().map(|r| r / BATCH as f64).collect();
    let grads = backward_fn(&params, &cache, &dy)?;
    check_gradient(&params, &grads, |p| {
        let (_, r) = residual(p)?;
        Ok(0.5 * compensated_sum(r.iter().map(|r| r * r)) / BATCH as f64)
    })
}

/// Random parameters and batch under a squared loss; returns the worst
/// relative error of backprop against central differences (h = 1e-5).
pub fn grad_check(spec: &NetSpec, seed: u64) -> Result<f64, NnError> {
    grad_check_with(spec, seed, backward)
}
