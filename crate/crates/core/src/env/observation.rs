use super::LOOKAHEAD;
use serde::{Deserialize, Serialize};

/// Flattened observation length.
pub const OBS_DIM: usize = 2 + 7 * LOOKAHEAD + LOOKAHEAD * LOOKAHEAD;

/// Airport state at one decision quarter. Lookahead entries cover the next
/// eight quarters; entries past the end of the day are zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub arr_rate: f64,
    pub act_arr: f64,
    pub ceiling_bins: [f64; LOOKAHEAD],
    pub wind_angle: [f64; LOOKAHEAD],
    pub wind_speed: [f64; LOOKAHEAD],
    pub visibility_bins: [f64; LOOKAHEAD],
    pub runway_count: [f64; LOOKAHEAD],
    pub arr_demand: [f64; LOOKAHEAD],
    pub dep_demand: [f64; LOOKAHEAD],
    /// `enroute[i][j]`: flights airborne during lookahead quarter i that land
    /// in lookahead quarter j. Zero for j <= i.
    pub enroute: [[f64; LOOKAHEAD]; LOOKAHEAD],
}

impl Observation {
    /// Fixed field order, enroute block row-major.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(OBS_DIM);
        v.push(self.arr_rate);
        v.push(self.act_arr);
        for block in [
            &self.ceiling_bins,
            &self.wind_angle,
            &self.wind_speed,
            &self.visibility_bins,
            &self.runway_count,
            &self.arr_demand,
            &self.dep_demand,
        ] {
            v.extend_from_slice(block);
        }
        for row in &self.enroute {
            v.extend_from_slice(row);
        }
        v
    }

    pub fn from_slice(v: &[f64]) -> Option<Self> {
        if v.len() != OBS_DIM {
            return None;
        }
        let block = |k: usize| -> [f64; LOOKAHEAD] {
            let off = 2 + k * LOOKAHEAD;
            v[off..off + LOOKAHEAD].try_into().unwrap()
        };
        let mut enroute = [[0.0; LOOKAHEAD]; LOOKAHEAD];
        let base = 2 + 7 * LOOKAHEAD;
        for (i, row) in enroute.iter_mut().enumerate() {
            row.copy_from_slice(&v[base + i * LOOKAHEAD..base + (i + 1) * LOOKAHEAD]);
        }
        Some(Observation {
            arr_rate: v[0],
            act_arr: v[1],
            ceiling_bins: block(0),
            wind_angle: block(1),
            wind_speed: block(2),
            visibility_bins: block(3),
            runway_count: block(4),
            arr_demand: block(5),
            dep_demand: block(6),
            enroute,
        })
    }

    pub fn is_strictly_upper_triangular(&self) -> bool {
        (0..LOOKAHEAD).all(|i| (0..=i).all(|j| self.enroute[i][j] == 0.0))
    }
}
