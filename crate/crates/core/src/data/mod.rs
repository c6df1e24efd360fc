//! Domain records for flights, airport quarter-hours and GDP advisories.
//!
//! All times are integer quarter-hour indices counted from the start of the
//! simulated day (10:00 UTC). Nothing in here touches wall-clock time.

mod csv_io;
mod weather;

pub use csv_io::{
    parse_airport_quarters, parse_flights, parse_gdp_advisories, write_airport_quarters, write_flights,
    write_gdp_advisories,
};
pub use weather::{discretize_weather, WeatherKind};

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Quarter-hour index relative to the episode start.
pub type Quarter = i32;

/// Number of quarter-hours in one simulated day.
pub const HORIZON: usize = 80;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: malformed CSV: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: invalid field `{field}`: {message}")]
    Validation {
        line: u64,
        field: &'static str,
        message: String,
    },

    #[error("{kind:?} value {value} outside domain")]
    Range { kind: WeatherKind, value: f64 },

    #[error("expected 80 quarters, got {0}")]
    QuarterCount(usize),

    #[error("quarter at position {position} has index {t}")]
    QuarterIndex { position: usize, t: Quarter },

    #[error("advisory airport {advisory} does not match scenario airport {airport}")]
    AirportMismatch { airport: String, advisory: String },

    #[error("flight {flight_id} neither departs from nor arrives at {airport}")]
    UnrelatedFlight { flight_id: String, airport: String },

    #[error("flight {flight_id}: {message}")]
    InvalidFlight { flight_id: String, message: String },

    #[error("invalid advisory: {0}")]
    InvalidAdvisory(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightRecord {
    pub flight_id: String,
    pub origin: String,
    pub dest: String,
    pub sched_dep: Quarter,
    pub sched_arr: Quarter,
    pub actual_dep: Option<Quarter>,
    pub enroute_quarters: u32,
    pub origin_center: String,
    pub origin_distance_nm: f64,
}

impl FlightRecord {
    /// Returns the name of the first violated field, with a message.
    pub fn check(&self) -> Result<(), (&'static str, String)> {
        if self.sched_arr <= self.sched_dep {
            return Err((
                "sched_arr",
                format!(
                    "sched_arr {} must be after sched_dep {}",
                    self.sched_arr, self.sched_dep
                ),
            ));
        }
        if self.enroute_quarters < 1 {
            return Err(("enroute_quarters", "must be at least 1".into()));
        }
        if let Some(dep) = self.actual_dep {
            if dep < 0 {
                return Err(("actual_dep", format!("{dep} is negative")));
            }
        }
        if !(self.origin_distance_nm >= 0.0) || !self.origin_distance_nm.is_finite() {
            return Err((
                "origin_distance_nm",
                format!("{} is not a non-negative number", self.origin_distance_nm),
            ));
        }
        Ok(())
    }

    /// Arrival quarter the flight would reach with no ground delay.
    pub fn eta(&self) -> Quarter {
        self.sched_arr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AirportQuarter {
    pub t: Quarter,
    pub arr_rate: u32,
    pub ceiling_100ft: f64,
    pub wind_angle_deg: u32,
    pub wind_speed: f64,
    pub visibility_sm: f64,
    pub runway_count: u32,
    pub sched_arr_demand: u32,
    pub sched_dep_demand: u32,
}

impl AirportQuarter {
    pub fn check(&self) -> Result<(), (&'static str, String)> {
        if !(0..HORIZON as Quarter).contains(&self.t) {
            return Err(("t", format!("{} outside 0..79", self.t)));
        }
        if !(0.0..=100.0).contains(&self.ceiling_100ft) {
            return Err(("ceiling_100ft", format!("{} outside [0, 100]", self.ceiling_100ft)));
        }
        if self.wind_angle_deg > 359 {
            return Err(("wind_angle_deg", format!("{} outside [0, 359]", self.wind_angle_deg)));
        }
        if !(self.wind_speed >= 0.0) || !self.wind_speed.is_finite() {
            return Err(("wind_speed", format!("{} is negative", self.wind_speed)));
        }
        if !(0.0..=10.0).contains(&self.visibility_sm) {
            return Err(("visibility_sm", format!("{} outside [0, 10]", self.visibility_sm)));
        }
        if self.runway_count < 1 {
            return Err(("runway_count", "must be at least 1".into()));
        }
        Ok(())
    }

    pub fn ceiling_bin(&self) -> u8 {
        discretize_weather(WeatherKind::Ceiling, self.ceiling_100ft).unwrap_or(1)
    }

    pub fn visibility_bin(&self) -> u8 {
        discretize_weather(WeatherKind::Visibility, self.visibility_sm).unwrap_or(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ScopeKind {
    Distance,
    Centers,
}

/// Which origins a program controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Scope {
    /// Origins within this great-circle distance (nm, inclusive).
    Distance(f64),
    /// Origins inside these ARTCCs.
    Centers(BTreeSet<String>),
}

impl Scope {
    pub fn kind(&self) -> ScopeKind {
        match self {
            Scope::Distance(_) => ScopeKind::Distance,
            Scope::Centers(_) => ScopeKind::Centers,
        }
    }

    pub fn distance_nm(&self) -> Option<f64> {
        match self {
            Scope::Distance(d) => Some(*d),
            Scope::Centers(_) => None,
        }
    }

    pub fn centers(&self) -> Option<&BTreeSet<String>> {
        match self {
            Scope::Distance(_) => None,
            Scope::Centers(c) => Some(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdpAdvisory {
    pub airport: String,
    pub release_t: Quarter,
    pub start_t: Quarter,
    pub end_t: Quarter,
    pub scope: Scope,
}

impl GdpAdvisory {
    pub fn check(&self) -> Result<(), (&'static str, String)> {
        if self.release_t > self.start_t {
            return Err((
                "release_t",
                format!("release_t {} after start_t {}", self.release_t, self.start_t),
            ));
        }
        if self.end_t <= self.start_t {
            return Err((
                "end_t",
                format!("end_t {} must be after start_t {}", self.end_t, self.start_t),
            ));
        }
        if let Scope::Distance(d) = self.scope {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(("scope_distance_nm", format!("{d} is not a valid distance")));
            }
        }
        Ok(())
    }

    pub fn window_contains(&self, q: Quarter) -> bool {
        self.start_t <= q && q <= self.end_t
    }
}

/// One episode's airport truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub airport: String,
    pub quarters: Vec<AirportQuarter>,
    pub flights: Vec<FlightRecord>,
    pub gdp: GdpAdvisory,
    pub seed: u64,
}

impl Scenario {
    /// Checks every cross-record invariant.
    pub fn validate(&self) -> Result<(), DataError> {
        if self.quarters.len() != HORIZON {
            return Err(DataError::QuarterCount(self.quarters.len()));
        }
        for (position, q) in self.quarters.iter().enumerate() {
            if q.t != position as Quarter {
                return Err(DataError::QuarterIndex { position, t: q.t });
            }
            q.check().map_err(|(field, message)| DataError::Validation {
                line: position as u64 + 2,
                field,
                message,
            })?;
        }
        if self.gdp.airport != self.airport {
            return Err(DataError::AirportMismatch {
                airport: self.airport.clone(),
                advisory: self.gdp.airport.clone(),
            });
        }
        self.gdp
            .check()
            .map_err(|(_, message)| DataError::InvalidAdvisory(message))?;
        for f in &self.flights {
            if f.dest != self.airport && f.origin != self.airport {
                return Err(DataError::UnrelatedFlight {
                    flight_id: f.flight_id.clone(),
                    airport: self.airport.clone(),
                });
            }
            f.check().map_err(|(_, message)| DataError::InvalidFlight {
                flight_id: f.flight_id.clone(),
                message,
            })?;
        }
        Ok(())
    }

    /// Flights landing at this scenario's airport.
    pub fn arrivals(&self) -> impl Iterator<Item = &FlightRecord> {
        self.flights.iter().filter(move |f| f.dest == self.airport)
    }
}

/// Assembles and validates a scenario from individually parsed records.
pub fn build_scenario(
    airport: &str,
    mut quarters: Vec<AirportQuarter>,
    flights: Vec<FlightRecord>,
    gdp: GdpAdvisory,
    seed: u64,
) -> Result<Scenario, DataError> {
    quarters.sort_by_key(|q| q.t);
    let scenario = Scenario {
        airport: airport.to_string(),
        quarters,
        flights,
        gdp,
        seed,
    };
    scenario.validate()?;
    Ok(scenario)
}
