use super::LOOKAHEAD;
use serde::{Deserialize, Serialize};

/// Cost weights of the step reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    /// Minutes per step.
    pub qtr: f64,
    /// Cost per minute of ground delay.
    pub c_gnd: f64,
    /// Cost per minute of airborne delay.
    pub c_air: f64,
    /// Penalty per holding flight above the benchmark.
    pub p: f64,
    pub n: usize,
    pub hold_benchmark: u32,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            qtr: 15.0,
            c_gnd: 1.0,
            c_air: 2.5,
            p: 10.0,
            n: LOOKAHEAD,
            hold_benchmark: 10,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [self.qtr, self.c_gnd, self.c_air, self.p];
        if positive.iter().any(|v| !(*v > 0.0)) || self.n == 0 || self.hold_benchmark == 0 {
            return Err("reward parameters must be strictly positive".into());
        }
        if self.c_air <= self.c_gnd {
            return Err("airborne delay must cost more than ground delay".into());
        }
        Ok(())
    }
}

/// Negative weighted delay over the lookahead plus the holding penalty.
///
/// The holding term is clamped at zero so a quiet terminal area is not
/// rewarded for being below the benchmark.
pub fn compute_reward(gd: &[u32], ad: &[u32], nh: u32, params: &RewardParams) -> f64 {
    let delay: f64 = gd
        .iter()
        .zip(ad)
        .take(params.n)
        .map(|(&g, &a)| params.c_gnd * g as f64 + params.c_air * a as f64)
        .sum();
    let excess = nh.saturating_sub(params.hold_benchmark) as f64;
    -(params.qtr * delay + params.p * excess)
}
