//! Synthetic scenarios standing in for historical airport days.
//!
//! Weather follows a three-regime Markov chain (VMC / MVMC / IMC); capacity
//! is derived from the weather bins and runway count; arrival demand is a
//! two-peak daily profile. The program window covers the span where
//! scheduled demand exceeds capacity.

mod dataset;
mod expert;

pub use dataset::{build_dataset, Dataset, DatasetError, NormStats, Transition};
pub use expert::{scripted_expert, ScriptedExpert};

use crate::data::{
    discretize_weather, AirportQuarter, DataError, FlightRecord, GdpAdvisory, Quarter, Scenario, Scope, WeatherKind,
    HORIZON,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("weather bin {0} outside 1..=4")]
    InvalidBin(u8),
    #[error("runway count must be at least 1")]
    NoRunways,
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Vmc,
    Mvmc,
    Imc,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Vmc, Regime::Mvmc, Regime::Imc];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Regime implied by the worse of the two weather bins.
    pub fn from_bins(ceiling_bin: u8, visibility_bin: u8) -> Result<Regime, GenError> {
        for b in [ceiling_bin, visibility_bin] {
            if !(1..=4).contains(&b) {
                return Err(GenError::InvalidBin(b));
            }
        }
        Ok(match ceiling_bin.min(visibility_bin) {
            1 => Regime::Imc,
            2 => Regime::Mvmc,
            _ => Regime::Vmc,
        })
    }
}

/// Per-runway landings per quarter by regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CapacityTable {
    pub vmc: u32,
    pub mvmc: u32,
    pub imc: u32,
    /// Above this wind speed each runway loses `wind_penalty` slots.
    pub wind_threshold: f64,
    pub wind_penalty: u32,
}

impl Default for CapacityTable {
    fn default() -> Self {
        CapacityTable {
            vmc: 6,
            mvmc: 5,
            imc: 4,
            wind_threshold: 25.0,
            wind_penalty: 1,
        }
    }
}

impl CapacityTable {
    pub fn capacity(
        &self,
        ceiling_bin: u8,
        visibility_bin: u8,
        runway_count: u32,
        wind_speed: f64,
    ) -> Result<u32, GenError> {
        if runway_count < 1 {
            return Err(GenError::NoRunways);
        }
        let per_runway = match Regime::from_bins(ceiling_bin, visibility_bin)? {
            Regime::Vmc => self.vmc,
            Regime::Mvmc => self.mvmc,
            Regime::Imc => self.imc,
        };
        let per_runway = if wind_speed > self.wind_threshold {
            per_runway.saturating_sub(self.wind_penalty)
        } else {
            per_runway
        };
        Ok((per_runway * runway_count).max(1))
    }
}

/// Arrival rate per quarter under the default capacity table.
pub fn capacity_from_weather(
    ceiling_bin: u8,
    visibility_bin: u8,
    runway_count: u32,
    wind_speed: f64,
) -> Result<u32, GenError> {
    CapacityTable::default().capacity(ceiling_bin, visibility_bin, runway_count, wind_speed)
}

/// Row-stochastic transition matrix over [`Regime::ALL`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeChain(pub [[f64; 3]; 3]);

impl Default for RegimeChain {
    fn default() -> Self {
        RegimeChain([[0.92, 0.06, 0.02], [0.12, 0.78, 0.10], [0.05, 0.12, 0.83]])
    }
}

impl RegimeChain {
    pub fn validate(&self) -> Result<(), GenError> {
        for (i, row) in self.0.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(GenError::InvalidConfig(format!(
                    "regime_transition row {i} is not a probability distribution"
                )));
            }
        }
        Ok(())
    }

    /// Stationary distribution by power iteration from uniform.
    pub fn stationary(&self) -> [f64; 3] {
        let mut pi = [1.0 / 3.0; 3];
        for _ in 0..2000 {
            let mut next = [0.0; 3];
            for (i, row) in self.0.iter().enumerate() {
                for (j, p) in row.iter().enumerate() {
                    next[j] += pi[i] * p;
                }
            }
            pi = next;
        }
        pi
    }

    fn draw(probs: &[f64; 3], rng: &mut impl Rng) -> Regime {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (r, p) in Regime::ALL.iter().zip(probs) {
            acc += p;
            if u < acc {
                return *r;
            }
        }
        // rounding left a sliver; take the last regime with mass
        Regime::ALL[probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)]
    }

    /// `n` regimes, the first drawn from the stationary distribution.
    pub fn sample_path(&self, n: usize, rng: &mut impl Rng) -> Vec<Regime> {
        let mut path = Vec::with_capacity(n);
        if n == 0 {
            return path;
        }
        let mut cur = Self::draw(&self.stationary(), rng);
        path.push(cur);
        for _ in 1..n {
            cur = Self::draw(&self.0[cur.index()], rng);
            path.push(cur);
        }
        path
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub seed: u64,
    pub airport: String,
    pub n_flights: usize,
    pub peak_demand_per_quarter: u32,
    pub regime_transition: RegimeChain,
    /// Inclusive [min, max].
    pub runway_count_range: [u32; 2],
    /// Fraction of arrivals whose origin lies inside the program scope.
    pub scope_mix: f64,
    pub scope_distance_nm: f64,
    pub capacity: CapacityTable,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            airport: "SYN".into(),
            n_flights: 600,
            peak_demand_per_quarter: 14,
            regime_transition: RegimeChain::default(),
            runway_count_range: [2, 2],
            scope_mix: 0.8,
            scope_distance_nm: 1000.0,
            capacity: CapacityTable::default(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        self.regime_transition.validate()?;
        if !(0.0..=1.0).contains(&self.scope_mix) {
            return Err(GenError::InvalidConfig("scope_mix must be in [0, 1]".into()));
        }
        if self.n_flights == 0 && self.peak_demand_per_quarter > 0 {
            return Err(GenError::InvalidConfig(
                "n_flights = 0 with a nonzero demand peak".into(),
            ));
        }
        if self.n_flights > 0 && self.peak_demand_per_quarter == 0 {
            return Err(GenError::InvalidConfig("flights need a nonzero demand peak".into()));
        }
        let [lo, hi] = self.runway_count_range;
        if lo < 1 || lo > hi {
            return Err(GenError::InvalidConfig(
                "runway_count_range must satisfy 1 <= min <= max".into(),
            ));
        }
        if !(self.scope_distance_nm >= 100.0) {
            return Err(GenError::InvalidConfig("scope_distance_nm must be at least 100".into()));
        }
        Ok(())
    }

    /// Same family, another member: the seed is the only difference.
    pub fn with_seed(&self, seed: u64) -> GenConfig {
        GenConfig { seed, ..self.clone() }
    }
}

/// Seed of the `index`-th member of a family rooted at `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index + 1);
    rng.gen()
}

const CENTERS: [&str; 20] = [
    "ZNY", "ZDC", "ZBW", "ZOB", "ZID", "ZTL", "ZAU", "ZJX", "ZME", "ZKC", "ZFW", "ZHU", "ZDV", "ZMP", "ZAB", "ZLC",
    "ZLA", "ZOA", "ZSE", "ZMA",
];
const DEMAND_PEAKS: [f64; 2] = [16.0, 52.0];
const PEAK_WIDTH: f64 = 5.0;

/// Relative arrival weight per quarter: a flat base plus two Gaussian peaks.
fn demand_profile(peak: u32) -> Vec<f64> {
    let peak = peak as f64;
    (0..HORIZON)
        .map(|q| {
            let bumps: f64 = DEMAND_PEAKS
                .iter()
                .map(|c| (-(q as f64 - c).powi(2) / (2.0 * PEAK_WIDTH * PEAK_WIDTH)).exp())
                .sum();
            peak / 3.0 + peak * bumps
        })
        .collect()
}

fn sample_index(cumulative: &[f64], rng: &mut impl Rng) -> usize {
    let u = rng.gen::<f64>() * cumulative[cumulative.len() - 1];
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

/// Value in tenths drawn uniformly from (lo, hi] or [lo, hi].
fn tenths(rng: &mut impl Rng, lo: u32, hi: u32) -> f64 {
    rng.gen_range(lo..=hi) as f64 / 10.0
}

fn weather(regime: Regime, rng: &mut impl Rng) -> (f64, f64, f64) {
    // (ceiling in 100 ft, visibility in sm, wind speed)
    match regime {
        Regime::Vmc => (tenths(rng, 101, 1000), tenths(rng, 31, 100), tenths(rng, 0, 200)),
        Regime::Mvmc => (tenths(rng, 51, 100), tenths(rng, 11, 100), tenths(rng, 50, 280)),
        Regime::Imc => {
            if rng.gen_bool(0.5) {
                (tenths(rng, 0, 50), tenths(rng, 0, 100), tenths(rng, 100, 350))
            } else {
                (tenths(rng, 0, 1000), tenths(rng, 0, 10), tenths(rng, 100, 350))
            }
        }
    }
}

pub fn gen_scenario(config: &GenConfig) -> Result<Scenario, GenError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let [rw_lo, rw_hi] = config.runway_count_range;
    let runways = rng.gen_range(rw_lo..=rw_hi);

    let regimes = config.regime_transition.sample_path(HORIZON, &mut rng);
    let mut quarters: Vec<AirportQuarter> = regimes
        .iter()
        .enumerate()
        .map(|(t, &regime)| {
            let (ceiling, vis, wind) = weather(regime, &mut rng);
            let c_bin = discretize_weather(WeatherKind::Ceiling, ceiling).expect("ceiling in domain");
            let v_bin = discretize_weather(WeatherKind::Visibility, vis).expect("visibility in domain");
            let arr_rate = config.capacity.capacity(c_bin, v_bin, runways, wind)?;
            Ok(AirportQuarter {
                t: t as Quarter,
                arr_rate,
                ceiling_100ft: ceiling,
                wind_angle_deg: rng.gen_range(0..360),
                wind_speed: wind,
                visibility_sm: vis,
                runway_count: runways,
                sched_arr_demand: 0,
                sched_dep_demand: 0,
            })
        })
        .collect::<Result<_, GenError>>()?;

    let mut flights = Vec::with_capacity(config.n_flights);
    if config.n_flights > 0 {
        let profile = demand_profile(config.peak_demand_per_quarter);
        let cumulative: Vec<f64> = profile
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        let total: f64 = profile.iter().sum();
        for (q, w) in quarters.iter_mut().zip(&profile) {
            let base = w / total * config.n_flights as f64 * 0.8;
            q.sched_dep_demand = base.round() as u32 + rng.gen_range(0..=2);
        }
        for i in 0..config.n_flights {
            let sched_arr = sample_index(&cumulative, &mut rng) as Quarter;
            let limit = config.scope_distance_nm;
            let distance = if rng.gen_bool(config.scope_mix) {
                rng.gen_range(100.0..=limit)
            } else {
                limit + rng.gen_range(1.0..=1600.0)
            };
            let distance = (distance * 10.0).round() / 10.0;
            let distance = if distance > limit && distance - limit < 1.0 {
                limit + 1.0
            } else {
                distance
            };
            let enroute = (2.0 + 10.0 * ((distance - 100.0) / 2500.0)).round().clamp(2.0, 12.0) as u32;
            let sched_dep = sched_arr - enroute as Quarter;
            flights.push(FlightRecord {
                flight_id: format!("F{i:04}"),
                origin: format!("O{:02}", rng.gen_range(0..40)),
                dest: config.airport.clone(),
                sched_dep,
                sched_arr,
                actual_dep: Some(sched_dep.max(0)),
                enroute_quarters: enroute,
                origin_center: CENTERS[rng.gen_range(0..CENTERS.len())].to_string(),
                origin_distance_nm: distance,
            });
            quarters[sched_arr as usize].sched_arr_demand += 1;
        }
    }

    let gdp = program_window(&quarters, config);
    let scenario = Scenario {
        airport: config.airport.clone(),
        quarters,
        flights,
        gdp,
        seed: config.seed,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Window spanning every quarter where scheduled demand exceeds capacity,
/// released up to an hour ahead. Never releases at quarter 0 so flights
/// already airborne at the start of the day count as departed.
fn program_window(quarters: &[AirportQuarter], config: &GenConfig) -> GdpAdvisory {
    let congested: Vec<Quarter> = quarters
        .iter()
        .filter(|q| q.sched_arr_demand > q.arr_rate)
        .map(|q| q.t)
        .collect();
    let (start, end) = match (congested.first(), congested.last()) {
        (Some(&a), Some(&b)) => (a.max(1), b.max(a.max(1) + 1)),
        _ => (40, 47),
    };
    let end = end.min(HORIZON as Quarter - 1).max(start + 1);
    GdpAdvisory {
        airport: config.airport.clone(),
        release_t: (start - 4).max(1).min(start),
        start_t: start,
        end_t: end,
        scope: Scope::Distance(config.scope_distance_nm),
    }
}

/// Scheduled demand exceeds capacity somewhere in the day.
pub fn is_congested(s: &Scenario) -> bool {
    s.quarters.iter().any(|q| q.sched_arr_demand > q.arr_rate)
}
