use crate::data::Scenario;
use crate::env::{Action, EnvConfig, EnvError, Policy, SagdpEnv, LOOKAHEAD, OBS_DIM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::{self, Read, Write};
use thiserror::Error;

const MAGIC: &[u8; 8] = b"GDPDATA1";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset needs at least one scenario")]
    Empty,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("malformed dataset file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: [u32; LOOKAHEAD],
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// Per-dimension mean and standard deviation (floored at 1e-6).
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub const STD_FLOOR: f64 = 1e-6;

    pub fn identity(dim: usize) -> Self {
        NormStats {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn from_rows<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize) -> Self {
        let mut n = 0usize;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for row in rows {
            n += 1;
            for (k, &x) in row.iter().enumerate() {
                let d = x - mean[k];
                mean[k] += d / n as f64;
                m2[k] += d * (x - mean[k]);
            }
        }
        let std = m2
            .iter()
            .map(|&s| {
                if n == 0 {
                    1.0
                } else {
                    (s / n as f64).sqrt().max(Self::STD_FLOOR)
                }
            })
            .collect();
        NormStats { mean, std }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub transitions: Vec<Transition>,
    pub stats: NormStats,
}

fn jitter(action: Action, noise: u32, paar_max: u32, rng: &mut impl Rng) -> Action {
    if noise == 0 {
        return action;
    }
    let n = noise as i64;
    let mut paar = action.paar;
    for r in &mut paar {
        *r = (*r as i64 + rng.gen_range(-n..=n)).clamp(0, paar_max as i64) as u32;
    }
    Action { paar }
}

fn rollout(
    scenario: &Scenario,
    policy: &dyn Policy,
    noise: u32,
    mut rng: ChaCha8Rng,
    config: &EnvConfig,
) -> Result<Vec<Transition>, EnvError> {
    let mut env = SagdpEnv::new(config.clone());
    let mut obs = env.reset(scenario)?;
    let mut out = Vec::new();
    loop {
        let action = jitter(policy.act(&obs), noise, config.paar_max, &mut rng);
        let r = env.step(&action)?;
        out.push(Transition {
            obs: obs.to_vec(),
            action: action.paar,
            reward: r.reward,
            next_obs: r.obs.to_vec(),
            done: r.done,
        });
        obs = r.obs;
        if r.done {
            return Ok(out);
        }
    }
}

/// Rolls `policy` (with integer jitter of +/- `noise` on every rate) through
/// each scenario and collects the transitions in scenario order.
pub fn build_dataset(
    scenarios: &[Scenario],
    policy: &dyn Policy,
    noise: u32,
    seed: u64,
    config: &EnvConfig,
) -> Result<Dataset, DatasetError> {
    if scenarios.is_empty() {
        return Err(DatasetError::Empty);
    }
    let episodes: Vec<Vec<Transition>> = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            rollout(s, policy, noise, rng, config)
        })
        .collect::<Result<_, _>>()?;
    let transitions: Vec<Transition> = episodes.into_iter().flatten().collect();
    let stats = NormStats::from_rows(transitions.iter().map(|t| t.obs.as_slice()), OBS_DIM);
    Ok(Dataset { transitions, stats })
}

fn put_f64s(w: &mut impl Write, xs: &[f64]) -> io::Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn get_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64s(r: &mut impl Read, n: usize) -> io::Result<Vec<f64>> {
    (0..n).map(|_| get_u64(r).map(f64::from_bits)).collect()
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.stats.mean.len()
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        let dim = self.dim();
        w.write_all(MAGIC)?;
        w.write_all(&(dim as u64).to_le_bytes())?;
        w.write_all(&(self.transitions.len() as u64).to_le_bytes())?;
        put_f64s(w, &self.stats.mean)?;
        put_f64s(w, &self.stats.std)?;
        for t in &self.transitions {
            put_f64s(w, &t.obs)?;
            for a in t.action {
                w.write_all(&a.to_le_bytes())?;
            }
            w.write_all(&t.reward.to_le_bytes())?;
            put_f64s(w, &t.next_obs)?;
            w.write_all(&[t.done as u8])?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Dataset, DatasetError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(DatasetError::Format("bad magic".into()));
        }
        let dim = get_u64(r)? as usize;
        let n = get_u64(r)? as usize;
        if dim == 0 || dim > 1 << 16 {
            return Err(DatasetError::Format(format!("implausible dimension {dim}")));
        }
        let mean = get_f64s(r, dim)?;
        let std = get_f64s(r, dim)?;
        let mut transitions = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let obs = get_f64s(r, dim)?;
            let mut action = [0u32; LOOKAHEAD];
            for a in &mut action {
                let mut b = [0u8; 4];
                r.read_exact(&mut b)?;
                *a = u32::from_le_bytes(b);
            }
            let reward = f64::from_bits(get_u64(r)?);
            let next_obs = get_f64s(r, dim)?;
            let mut done = [0u8; 1];
            r.read_exact(&mut done)?;
            transitions.push(Transition {
                obs,
                action,
                reward,
                next_obs,
                done: done[0] != 0,
            });
        }
        Ok(Dataset {
            transitions,
            stats: NormStats { mean, std },
        })
    }
}
