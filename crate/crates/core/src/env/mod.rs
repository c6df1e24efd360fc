//! Episodic single-airport GDP environment.
//!
//! Each step takes eight program rates for the next two hours, re-rations
//! the controlled flights that are still on the ground, lands the current
//! quarter through the terminal hold stack, and prices the projected
//! ground/airborne delay over the lookahead.

mod observation;
mod reward;

pub use observation::{Observation, OBS_DIM};
pub use reward::{compute_reward, RewardParams};

use crate::data::{DataError, Quarter, Scenario, WeatherKind, HORIZON};
use crate::rbs::{advance_arrival_queue, fold_queue, ration_by_schedule, CapacityProfile, SlotRequest};
use crate::scope::{classify, ClassKind, FlightClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Quarters covered by one action.
pub const LOOKAHEAD: usize = 8;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(#[from] DataError),
    #[error("step called before reset")]
    NotReset,
    #[error("episode already finished")]
    Done,
    #[error("invalid action: {0}")]
    InvalidAction(String),
}

/// Program rates for quarters t+1..=t+8, chosen at t.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub paar: [u32; LOOKAHEAD],
}

impl Action {
    pub fn new(paar: [u32; LOOKAHEAD]) -> Self {
        Action { paar }
    }

    pub fn uniform(rate: u32) -> Self {
        Action {
            paar: [rate; LOOKAHEAD],
        }
    }
}

/// Anything that maps an observation to an action.
pub trait Policy: Sync {
    fn act(&self, obs: &Observation) -> Action;
}

impl<F: Fn(&Observation) -> Action + Sync> Policy for F {
    fn act(&self, obs: &Observation) -> Action {
        self(obs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub reward: RewardParams,
    pub paar_max: u32,
    /// Rate for quarters no action has covered yet.
    pub default_paar: u32,
    /// Half-width of uniform noise on lookahead weather. 0 uses truth.
    pub forecast_noise: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            reward: RewardParams::default(),
            paar_max: 16,
            default_paar: 12,
            forecast_noise: 0.0,
        }
    }
}

/// Rate in effect for quarter `q`: the most recent decision whose window
/// t+1..=t+8 covers it, else `default`.
pub fn effective_paar(revisions: &[(Quarter, Action)], q: Quarter, default: u32) -> u32 {
    let mut best: Option<(Quarter, u32)> = None;
    for (t, a) in revisions {
        let offset = q - t - 1;
        if (0..LOOKAHEAD as Quarter).contains(&offset) && best.is_none_or(|(bt, _)| *t >= bt) {
            best = Some((*t, a.paar[offset as usize]));
        }
    }
    best.map_or(default, |(_, r)| r)
}

/// One step's bookkeeping, also the episode trace record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub t: Quarter,
    pub action: [u32; LOOKAHEAD],
    /// Rates in effect for t+1..=t+8 after this decision.
    pub effective_paar: [u32; LOOKAHEAD],
    /// Projected ground-held flights for t+1..=t+8.
    pub gd: [u32; LOOKAHEAD],
    /// Projected airborne-delayed flights for t+1..=t+8.
    pub ad: [u32; LOOKAHEAD],
    /// Terminal hold stack at the end of quarter t.
    pub nh: u32,
    pub reward: f64,
    pub act_arr: u32,
    /// Controlled flights held on the ground during quarter t.
    pub realized_gd: u32,
    /// Flights airborne-delayed during quarter t.
    pub realized_ad: u32,
    /// Sum of assigned minus scheduled arrival over controlled flights.
    pub planned_gd_total: u64,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
struct Arrival {
    sched_arr: Quarter,
    enroute: Quarter,
    class: ClassKind,
    planned_arr: Quarter,
}

/// Allocation and rates at the first program decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSnapshot {
    pub t: Quarter,
    /// Planned arrival per arrival flight, in `SagdpEnv::classes` order.
    pub planned_arr: Vec<Quarter>,
    /// Effective rate per quarter of the day.
    pub paar: Vec<u32>,
}

pub struct SagdpEnv {
    config: EnvConfig,
    scenario: Option<Scenario>,
    arrivals: Vec<Arrival>,
    classes: Vec<FlightClass>,
    controlled_order: Vec<usize>,
    paar_table: Vec<u32>,
    revisions: Vec<(Quarter, Action)>,
    due: Vec<u32>,
    clock: Quarter,
    nh: u32,
    last_act_arr: u32,
    allocated: bool,
    done: bool,
    initial_plan: Option<PlanSnapshot>,
}

impl SagdpEnv {
    pub fn new(config: EnvConfig) -> Self {
        SagdpEnv {
            config,
            scenario: None,
            arrivals: Vec::new(),
            classes: Vec::new(),
            controlled_order: Vec::new(),
            paar_table: Vec::new(),
            revisions: Vec::new(),
            due: vec![0; HORIZON],
            clock: 0,
            nh: 0,
            last_act_arr: 0,
            allocated: false,
            done: false,
            initial_plan: None,
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn clock(&self) -> Quarter {
        self.clock
    }

    pub fn reset(&mut self, scenario: &Scenario) -> Result<Observation, EnvError> {
        scenario.validate()?;
        let gdp = &scenario.gdp;
        self.arrivals.clear();
        self.classes.clear();
        let mut ids = Vec::new();
        for f in scenario.arrivals() {
            let class = classify(f, gdp, gdp.release_t).expect("arrivals land at the program airport");
            self.arrivals.push(Arrival {
                sched_arr: f.sched_arr,
                enroute: f.enroute_quarters as Quarter,
                class: class.class,
                planned_arr: f.eta(),
            });
            ids.push(f.flight_id.as_str());
            self.classes.push(class);
        }
        let mut order: Vec<usize> = (0..self.arrivals.len())
            .filter(|&i| self.arrivals[i].class == ClassKind::Controlled)
            .collect();
        order.sort_by(|&a, &b| (self.arrivals[a].sched_arr, ids[a]).cmp(&(self.arrivals[b].sched_arr, ids[b])));
        self.controlled_order = order;
        self.paar_table = vec![self.config.default_paar; HORIZON + LOOKAHEAD];
        self.revisions.clear();
        self.clock = 0;
        self.nh = 0;
        self.last_act_arr = 0;
        self.allocated = false;
        self.done = false;
        self.initial_plan = None;
        self.scenario = Some(scenario.clone());
        self.recount_due();
        Ok(self.encode_observation())
    }

    /// Classification of every arrival, fixed at the release quarter.
    pub fn classes(&self) -> &[FlightClass] {
        &self.classes
    }

    pub fn planned_arrivals(&self) -> Vec<Quarter> {
        self.arrivals.iter().map(|a| a.planned_arr).collect()
    }

    pub fn revisions(&self) -> &[(Quarter, Action)] {
        &self.revisions
    }

    /// Rate in effect for every quarter of the day.
    pub fn effective_paar_table(&self) -> Vec<u32> {
        self.paar_table[..HORIZON].to_vec()
    }

    pub fn initial_plan(&self) -> Option<&PlanSnapshot> {
        self.initial_plan.as_ref()
    }

    fn recount_due(&mut self) {
        self.due.iter_mut().for_each(|d| *d = 0);
        for a in &self.arrivals {
            if (0..HORIZON as Quarter).contains(&a.planned_arr) {
                self.due[a.planned_arr as usize] += 1;
            }
        }
    }

    fn reallocate(&mut self, t: Quarter, start: Quarter) {
        let start = start.clamp(0, HORIZON as Quarter);
        let profile = CapacityProfile::new(start, self.paar_table[start as usize..HORIZON].to_vec());
        let first = !self.allocated;
        let on_ground = |a: &Arrival| first || a.planned_arr - a.enroute >= t;

        let pinned = self.arrivals.iter().filter_map(|a| match a.class {
            ClassKind::Controlled if on_ground(a) => None,
            _ => Some(a.planned_arr),
        });
        let movable: Vec<usize> = self
            .controlled_order
            .iter()
            .copied()
            .filter(|&i| on_ground(&self.arrivals[i]))
            .collect();
        let requests: Vec<SlotRequest> = movable
            .iter()
            .map(|&i| {
                let a = &self.arrivals[i];
                SlotRequest {
                    sched_arr: a.sched_arr,
                    earliest: a.sched_arr.max(t + a.enroute),
                }
            })
            .collect();
        let r = ration_by_schedule(&requests, pinned, &profile);
        for (&i, &q) in movable.iter().zip(&r.assigned) {
            self.arrivals[i].planned_arr = q;
        }
        self.allocated = true;
        self.recount_due();
    }

    /// Controlled flights held on the ground during each quarter of the day.
    fn ground_holds(&self) -> Vec<u32> {
        let mut diff = vec![0i64; HORIZON + 1];
        for &i in &self.controlled_order {
            let a = &self.arrivals[i];
            let lo = a.sched_arr.clamp(0, HORIZON as Quarter) as usize;
            let hi = a.planned_arr.clamp(0, HORIZON as Quarter) as usize;
            if lo < hi {
                diff[lo] += 1;
                diff[hi] -= 1;
            }
        }
        let mut run = 0i64;
        diff[..HORIZON]
            .iter()
            .map(|d| {
                run += d;
                run as u32
            })
            .collect()
    }

    pub fn step(&mut self, action: &Action) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::Done);
        }
        let scenario = self.scenario.as_ref().ok_or(EnvError::NotReset)?;
        if let Some(r) = action.paar.iter().find(|&&r| r > self.config.paar_max) {
            return Err(EnvError::InvalidAction(format!(
                "rate {r} above maximum {}",
                self.config.paar_max
            )));
        }
        let t = self.clock;
        let arr_rates: Vec<u32> = scenario.quarters.iter().map(|q| q.arr_rate).collect();
        let (release, start) = (scenario.gdp.release_t, scenario.gdp.start_t);

        // (1) record the revision; latest decision wins
        self.revisions.push((t, *action));
        for (i, &rate) in action.paar.iter().enumerate() {
            self.paar_table[t as usize + 1 + i] = rate;
        }
        let mut effective = [0u32; LOOKAHEAD];
        effective.copy_from_slice(&self.paar_table[t as usize + 1..t as usize + 1 + LOOKAHEAD]);

        // (3) ration-by-schedule once the program is out
        if t >= release {
            let first = !self.allocated;
            self.reallocate(t, start);
            if first {
                self.initial_plan = Some(PlanSnapshot {
                    t,
                    planned_arr: self.planned_arrivals(),
                    paar: self.effective_paar_table(),
                });
            }
        }

        // (4)-(5) land quarter t
        let landed = advance_arrival_queue(self.nh, self.due[t as usize], arr_rates[t as usize]);
        self.nh = landed.new_nh;
        self.last_act_arr = landed.act_arr;

        let holds = self.ground_holds();
        let mut gd = [0u32; LOOKAHEAD];
        let mut ad = [0u32; LOOKAHEAD];
        let ahead: Vec<usize> = (t as usize + 1..(t as usize + 1 + LOOKAHEAD).min(HORIZON)).collect();
        let due: Vec<u32> = ahead.iter().map(|&q| self.due[q]).collect();
        let rates: Vec<u32> = ahead.iter().map(|&q| arr_rates[q]).collect();
        let (_, _, projected_ad) = fold_queue(self.nh, &due, &rates);
        for (i, &q) in ahead.iter().enumerate() {
            gd[i] = holds[q];
            ad[i] = projected_ad[i];
        }

        let reward = compute_reward(&gd, &ad, self.nh, &self.config.reward);
        let planned_gd_total = self
            .controlled_order
            .iter()
            .map(|&i| (self.arrivals[i].planned_arr - self.arrivals[i].sched_arr).max(0) as u64)
            .sum();
        let info = StepInfo {
            t,
            action: action.paar,
            effective_paar: effective,
            gd,
            ad,
            nh: self.nh,
            reward,
            act_arr: landed.act_arr,
            realized_gd: holds[t as usize],
            realized_ad: landed.ad_count,
            planned_gd_total,
        };

        self.clock += 1;
        self.done = t as usize == HORIZON - 1;
        Ok(StepResult {
            obs: self.encode_observation(),
            reward,
            done: self.done,
            info,
        })
    }

    /// Observation at the current clock.
    pub fn encode_observation(&self) -> Observation {
        let mut obs = Observation::default();
        let Some(scenario) = self.scenario.as_ref() else {
            return obs;
        };
        let c = self.clock;
        if (c as usize) < HORIZON {
            obs.arr_rate = scenario.quarters[c as usize].arr_rate as f64;
        }
        obs.act_arr = self.last_act_arr as f64;

        let mut rng =
            (self.config.forecast_noise > 0.0).then(|| ChaCha8Rng::seed_from_u64(scenario.seed ^ ((c as u64) << 32)));
        for i in 0..LOOKAHEAD {
            let q = c as usize + 1 + i;
            if q >= HORIZON {
                break;
            }
            let aq = &scenario.quarters[q];
            let (mut ceiling, mut vis, mut wind) = (aq.ceiling_100ft, aq.visibility_sm, aq.wind_speed);
            if let Some(rng) = rng.as_mut() {
                let w = self.config.forecast_noise;
                ceiling = (ceiling + rng.gen_range(-w..=w) * 10.0).clamp(0.0, 100.0);
                vis = (vis + rng.gen_range(-w..=w)).clamp(0.0, 10.0);
                wind = (wind + rng.gen_range(-w..=w) * 5.0).max(0.0);
            }
            let bin = |k, v| crate::data::discretize_weather(k, v).unwrap_or(1) as f64;
            obs.ceiling_bins[i] = bin(WeatherKind::Ceiling, ceiling);
            obs.visibility_bins[i] = bin(WeatherKind::Visibility, vis);
            obs.wind_angle[i] = aq.wind_angle_deg as f64;
            obs.wind_speed[i] = wind;
            obs.runway_count[i] = aq.runway_count as f64;
            obs.arr_demand[i] = self.due[q] as f64;
            obs.dep_demand[i] = aq.sched_dep_demand as f64;
        }

        let first = c + 1;
        let last = (c + LOOKAHEAD as Quarter).min(HORIZON as Quarter - 1);
        for a in &self.arrivals {
            let arr = a.planned_arr;
            if arr < first || arr > last {
                continue;
            }
            let j = (arr - first) as usize;
            let dep = arr - a.enroute;
            for q in dep.max(first)..arr {
                obs.enroute[(q - first) as usize][j] += 1.0;
            }
        }
        obs
    }
}

/// Full rollout of one scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<StepInfo>,
    pub total_return: f64,
}

pub fn run_episode(env: &mut SagdpEnv, scenario: &Scenario, policy: &dyn Policy) -> Result<EpisodeTrace, EnvError> {
    let mut obs = env.reset(scenario)?;
    let mut steps = Vec::with_capacity(HORIZON);
    let mut total = 0.0;
    loop {
        let r = env.step(&policy.act(&obs))?;
        total += r.reward;
        steps.push(r.info);
        obs = r.obs;
        if r.done {
            break;
        }
    }
    Ok(EpisodeTrace {
        steps,
        total_return: total,
    })
}
