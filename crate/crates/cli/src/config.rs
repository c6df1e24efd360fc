use gdpsim_core::agents::{BaselineKind, CqlConfig, TrainConfig};
use gdpsim_core::env::{EnvConfig, LOOKAHEAD};
use gdpsim_core::gen::GenConfig;
use gdpsim_core::nn::{Activation, NetSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Bc,
    Cql,
}

/// Hidden layers of the agent networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden: vec![64, 64],
            activation: Activation::Relu,
        }
    }
}

impl NetworkConfig {
    pub fn spec(&self, outputs: usize) -> Result<NetSpec, gdpsim_core::nn::NnError> {
        let mut sizes = vec![gdpsim_core::OBS_DIM];
        sizes.extend(&self.hidden);
        sizes.push(outputs);
        NetSpec::new(sizes, self.activation)
    }
}

/// `oracle` or `constant:N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Baseline {
    pub kind: BaselineKind,
    pub rate: u32,
}

impl FromStr for Baseline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "oracle" => Ok(Baseline {
                kind: BaselineKind::OracleCapacity,
                rate: 0,
            }),
            Some(("constant", n)) => n
                .parse()
                .map(|rate| Baseline {
                    kind: BaselineKind::Constant,
                    rate,
                })
                .map_err(|_| format!("bad rate in baseline {s:?}")),
            _ => Err(format!("unknown baseline {s:?}; expected oracle or constant:N")),
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            BaselineKind::OracleCapacity => write!(f, "oracle"),
            BaselineKind::Constant => write!(f, "constant:{}", self.rate),
        }
    }
}

impl Serialize for Baseline {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Baseline {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything that influences a run. Loaded from `--config`, then
/// overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Scenarios written by `gen`.
    pub n_scenarios: usize,
    /// Jitter on expert rates when building the dataset.
    pub noise: u32,
    pub gen: GenConfig,
    pub env: EnvConfig,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub cql: CqlConfig,
    pub algo: Algo,
    pub baseline: Option<Baseline>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            n_scenarios: 20,
            noise: 1,
            gen: GenConfig::default(),
            env: EnvConfig::default(),
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
            cql: CqlConfig::default(),
            algo: Algo::Bc,
            baseline: None,
        }
    }
}

impl RunConfig {
    /// Copies the master seed into every component.
    pub fn resolve(mut self) -> Self {
        self.gen.seed = self.seed;
        self.train.seed = self.seed;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        self.gen.validate().map_err(|e| e.to_string())?;
        self.env.reward.validate()?;
        self.train.validate().map_err(|e| e.to_string())?;
        self.cql.validate().map_err(|e| e.to_string())?;
        if self.env.paar_max == 0 || self.env.default_paar > self.env.paar_max {
            return Err("env.default_paar must lie in [0, env.paar_max] with paar_max >= 1".into());
        }
        if self.n_scenarios == 0 {
            return Err("n_scenarios must be at least 1".into());
        }
        self.network.spec(LOOKAHEAD).map_err(|e| e.to_string())?;
        if let Some(b) = self.baseline {
            if b.kind == BaselineKind::Constant && b.rate > self.env.paar_max {
                return Err(format!("baseline rate {} above env.paar_max", b.rate));
            }
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(bytes))
    }
}

pub fn file_sha256(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}
