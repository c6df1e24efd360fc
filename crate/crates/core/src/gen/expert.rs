use super::CapacityTable;
use crate::env::{Action, Observation, Policy, LOOKAHEAD};

/// Sets each lookahead rate to the capacity implied by the forecast weather.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedExpert {
    pub table: CapacityTable,
    pub paar_max: u32,
}

impl Default for ScriptedExpert {
    fn default() -> Self {
        ScriptedExpert {
            table: CapacityTable::default(),
            paar_max: 16,
        }
    }
}

impl Policy for ScriptedExpert {
    fn act(&self, obs: &Observation) -> Action {
        let mut paar = [0u32; LOOKAHEAD];
        for (i, rate) in paar.iter_mut().enumerate() {
            let runways = obs.runway_count[i].round();
            if runways < 1.0 {
                // past the end of the day
                continue;
            }
            let cap = self
                .table
                .capacity(
                    obs.ceiling_bins[i].round() as u8,
                    obs.visibility_bins[i].round() as u8,
                    runways as u32,
                    obs.wind_speed[i],
                )
                .unwrap_or(0);
            *rate = cap.min(self.paar_max);
        }
        Action { paar }
    }
}

/// [`ScriptedExpert`] with the default capacity table.
pub fn scripted_expert(obs: &Observation) -> Action {
    ScriptedExpert::default().act(obs)
}
