use super::{AgentError, BcPolicy, CqlAgent, CqlConfig};
use crate::env::{Action, Observation, Policy};
use crate::gen::NormStats;
use crate::nn::{read_params, write_params};
use std::io::{Read, Write};

const MAGIC: &[u8; 8] = b"GDPAGNT1";

/// A trained agent of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Agent {
    Bc(BcPolicy),
    Cql(CqlAgent),
}

impl Agent {
    pub fn kind(&self) -> &'static str {
        match self {
            Agent::Bc(_) => "bc",
            Agent::Cql(_) => "cql",
        }
    }

    pub fn paar_max(&self) -> u32 {
        match self {
            Agent::Bc(p) => p.paar_max,
            Agent::Cql(a) => a.paar_max,
        }
    }
}

impl Policy for Agent {
    fn act(&self, obs: &Observation) -> Action {
        match self {
            Agent::Bc(p) => p.act(obs),
            Agent::Cql(a) => a.act(obs),
        }
    }
}

fn put_f64(w: &mut impl Write, x: f64) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn get_f64(r: &mut impl Read) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn write_agent(w: &mut impl Write, agent: &Agent) -> Result<(), AgentError> {
    w.write_all(MAGIC)?;
    w.write_all(&[matches!(agent, Agent::Cql(_)) as u8])?;
    w.write_all(&agent.paar_max().to_le_bytes())?;
    let stats = match agent {
        Agent::Bc(p) => &p.stats,
        Agent::Cql(a) => &a.stats,
    };
    w.write_all(&(stats.mean.len() as u32).to_le_bytes())?;
    for &x in stats.mean.iter().chain(&stats.std) {
        put_f64(w, x)?;
    }
    match agent {
        Agent::Bc(p) => write_params(w, &p.net)?,
        Agent::Cql(a) => {
            put_f64(w, a.config.alpha)?;
            put_f64(w, a.config.gamma)?;
            w.write_all(&(a.config.target_sync as u64).to_le_bytes())?;
            put_f64(w, a.config.reward_scale)?;
            write_params(w, &a.q_net)?;
            write_params(w, &a.target_net)?;
        }
    }
    Ok(())
}

pub fn read_agent(r: &mut impl Read) -> Result<Agent, AgentError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(AgentError::Checkpoint("not an agent checkpoint".into()));
    }
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    let paar_max = get_u32(r)?;
    let dim = get_u32(r)? as usize;
    if dim == 0 || dim > 1 << 16 {
        return Err(AgentError::Checkpoint(format!("implausible input width {dim}")));
    }
    let mean = (0..dim).map(|_| get_f64(r)).collect::<Result<Vec<_>, _>>()?;
    let std = (0..dim).map(|_| get_f64(r)).collect::<Result<Vec<_>, _>>()?;
    let stats = NormStats { mean, std };
    let agent = match kind[0] {
        0 => Agent::Bc(BcPolicy {
            net: read_params(r)?,
            stats,
            paar_max,
        }),
        1 => {
            let alpha = get_f64(r)?;
            let gamma = get_f64(r)?;
            let mut sync = [0u8; 8];
            r.read_exact(&mut sync)?;
            let config = CqlConfig {
                alpha,
                gamma,
                target_sync: u64::from_le_bytes(sync) as usize,
                reward_scale: get_f64(r)?,
            };
            let q_net = read_params(r)?;
            let target_net = read_params(r)?;
            if q_net
                .layers()
                .iter()
                .map(|l| (l.n_in, l.n_out))
                .ne(target_net.layers().iter().map(|l| (l.n_in, l.n_out)))
            {
                return Err(AgentError::Checkpoint("target network shape differs".into()));
            }
            Agent::Cql(CqlAgent {
                q_net,
                target_net,
                stats,
                config,
                paar_max,
            })
        }
        k => return Err(AgentError::Checkpoint(format!("unknown agent kind {k}"))),
    };
    let input = match &agent {
        Agent::Bc(p) => p.net.input(),
        Agent::Cql(a) => a.q_net.input(),
    };
    if input != dim {
        return Err(AgentError::Checkpoint(
            "normalization width differs from network input".into(),
        ));
    }
    Ok(agent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{NetSpec, Params};

    #[test]
    fn round_trip_both_kinds() {
        let stats = NormStats {
            mean: vec![0.5; 122],
            std: vec![2.0; 122],
        };
        let bc = Agent::Bc(BcPolicy {
            net: Params::init(&NetSpec::default_for(8), 1).unwrap(),
            stats: stats.clone(),
            paar_max: 16,
        });
        let q = Params::init(&NetSpec::default_for(136), 2).unwrap();
        let cql = Agent::Cql(CqlAgent {
            q_net: q.clone(),
            target_net: Params::init(&NetSpec::default_for(136), 3).unwrap(),
            stats,
            config: CqlConfig {
                alpha: 5.0,
                ..Default::default()
            },
            paar_max: 16,
        });
        for a in [bc, cql] {
            let mut buf = Vec::new();
            write_agent(&mut buf, &a).unwrap();
            let back = read_agent(&mut buf.as_slice()).unwrap();
            assert_eq!(back, a);
            let mut again = Vec::new();
            write_agent(&mut again, &back).unwrap();
            assert_eq!(buf, again);
        }
    }
}
