//! Benchmark fixtures shared by the criterion benches.

use gdpsim_core::agents::Batch;
use gdpsim_core::data::{FlightRecord, Quarter, Scenario};
use gdpsim_core::env::EnvConfig;
use gdpsim_core::gen::{build_dataset, derive_seed, gen_scenario, Dataset, GenConfig, ScriptedExpert};
use std::collections::BTreeMap;

pub fn scenario(seed: u64) -> Scenario {
    gen_scenario(&GenConfig::default().with_seed(seed)).expect("default generator config is valid")
}

/// Expert transitions from `n` default scenarios.
pub fn dataset(n: u64) -> Dataset {
    let scenarios: Vec<Scenario> = (0..n).map(|i| scenario(derive_seed(1, i))).collect();
    build_dataset(&scenarios, &ScriptedExpert::default(), 1, 1, &EnvConfig::default()).expect("expert dataset")
}

/// First `size` transitions, normalized.
pub fn batch(dataset: &Dataset, size: usize) -> Batch {
    let idx: Vec<usize> = (0..size).map(|i| i % dataset.transitions.len()).collect();
    Batch::gather(dataset, &dataset.stats, &idx)
}

/// A congested allocation: `n` controlled flights spread over 80 quarters
/// with a fixed rate of 8, plus one exempt arrival every other quarter.
pub struct RbsInstance {
    pub controlled: Vec<FlightRecord>,
    pub exempt: BTreeMap<String, Quarter>,
    pub paar: BTreeMap<Quarter, u32>,
    pub window: (Quarter, Quarter),
}

pub fn rbs_instance(n: usize) -> RbsInstance {
    let controlled = (0..n)
        .map(|i| {
            let sched_arr = ((i * 7919) % 80) as Quarter;
            FlightRecord {
                flight_id: format!("F{i:05}"),
                origin: "ORG".into(),
                dest: "SYN".into(),
                sched_dep: sched_arr - 4,
                sched_arr,
                actual_dep: None,
                enroute_quarters: 4,
                origin_center: "ZZZ".into(),
                origin_distance_nm: 500.0,
            }
        })
        .collect();
    RbsInstance {
        controlled,
        exempt: (0..40).map(|q| (format!("X{q:03}"), 2 * q)).collect(),
        paar: (0..80).map(|q| (q, 8)).collect(),
        window: (0, 79),
    }
}
