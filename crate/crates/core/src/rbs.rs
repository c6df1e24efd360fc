//! Ration-by-schedule slot allocation and the arrival queue.
//!
//! Capacity is bucketed per quarter. Pinned flights (exempt, unaffected, or
//! already airborne) consume capacity at their ETAs first; any excess spills
//! into the next quarters first-come-first-served. Controlled flights then
//! take the earliest remaining capacity at or after their earliest feasible
//! arrival, in scheduled-arrival order with flight id as the tie-break.

use crate::data::{FlightRecord, Quarter};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RbsError {
    #[error("no program rate for quarter {0} inside the window")]
    MissingRate(Quarter),
    #[error("exempt demand exceeds program capacity; first saturated quarter {first_saturated}")]
    Infeasible { first_saturated: Quarter },
}

/// Per-quarter capacity on `[start, start + slots.len())`. Quarters outside
/// that span are not governed by the program and have no slot limit.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityProfile {
    pub start: Quarter,
    pub slots: Vec<u32>,
}

impl CapacityProfile {
    pub fn new(start: Quarter, slots: Vec<u32>) -> Self {
        CapacityProfile { start, slots }
    }

    pub fn end(&self) -> Quarter {
        self.start + self.slots.len() as Quarter
    }

    fn index(&self, q: Quarter) -> Option<usize> {
        (q >= self.start && q < self.end()).then(|| (q - self.start) as usize)
    }
}

/// One controlled flight awaiting a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRequest {
    pub sched_arr: Quarter,
    /// Earliest quarter the flight can physically land.
    pub earliest: Quarter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rationing {
    /// Assigned quarter per request, in request order.
    pub assigned: Vec<Quarter>,
    /// First quarter whose pinned load exceeded its capacity.
    pub first_saturated: Option<Quarter>,
    /// Pinned flights that could not be absorbed before the profile ended.
    pub pinned_overflow: u32,
}

/// Smallest index >= i with free capacity; `len` means past the end.
struct FreeSlots {
    residual: Vec<u32>,
    next: Vec<usize>,
}

impl FreeSlots {
    fn new(residual: Vec<u32>) -> Self {
        let len = residual.len();
        let next = (0..=len)
            .map(|i| if i < len && residual[i] == 0 { i + 1 } else { i })
            .collect();
        FreeSlots { residual, next }
    }

    fn find(&mut self, mut i: usize) -> usize {
        let mut root = i;
        while self.next[root] != root {
            root = self.next[root];
        }
        while self.next[i] != root {
            let up = self.next[i];
            self.next[i] = root;
            i = up;
        }
        root
    }

    fn take(&mut self, i: usize) {
        self.residual[i] -= 1;
        if self.residual[i] == 0 {
            self.next[i] = i + 1;
        }
    }
}

/// Core allocator. `requests` must already be in priority order.
pub fn ration_by_schedule(
    requests: &[SlotRequest],
    pinned: impl IntoIterator<Item = Quarter>,
    profile: &CapacityProfile,
) -> Rationing {
    let len = profile.slots.len();
    let mut load = vec![0u32; len];
    for q in pinned {
        if let Some(i) = profile.index(q) {
            load[i] += 1;
        }
    }

    let mut residual = profile.slots.clone();
    let mut carry = 0u32;
    let mut first_saturated = None;
    for i in 0..len {
        let demand = load[i] + carry;
        let used = demand.min(residual[i]);
        if demand > residual[i] && first_saturated.is_none() {
            first_saturated = Some(profile.start + i as Quarter);
        }
        residual[i] -= used;
        carry = demand - used;
    }

    let mut free = FreeSlots::new(residual);
    let assigned = requests
        .iter()
        .map(|r| {
            let earliest = r.earliest.max(r.sched_arr);
            match profile.index(earliest) {
                Some(i) => {
                    let slot = free.find(i);
                    if slot < len {
                        free.take(slot);
                        profile.start + slot as Quarter
                    } else {
                        profile.end()
                    }
                }
                None => earliest,
            }
        })
        .collect();

    Rationing {
        assigned,
        first_saturated,
        pinned_overflow: carry,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotEntry {
    pub flight_id: String,
    pub sched_arr: Quarter,
    pub assigned_arr: Quarter,
    pub controlled: bool,
}

impl SlotEntry {
    pub fn ground_delay_quarters(&self) -> u32 {
        if self.controlled {
            (self.assigned_arr - self.sched_arr).max(0) as u32
        } else {
            0
        }
    }
}

/// Controlled flights in rationing order, followed by exempt flights by id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotAssignment {
    pub entries: Vec<SlotEntry>,
}

impl SlotAssignment {
    pub fn get(&self, flight_id: &str) -> Option<&SlotEntry> {
        self.entries.iter().find(|e| e.flight_id == flight_id)
    }

    pub fn total_ground_delay(&self) -> u64 {
        self.entries.iter().map(|e| e.ground_delay_quarters() as u64).sum()
    }

    pub fn controlled(&self) -> impl Iterator<Item = &SlotEntry> {
        self.entries.iter().filter(|e| e.controlled)
    }
}

pub fn allocate_slots_rbs(
    controlled: &[FlightRecord],
    exempt_etas: &BTreeMap<String, Quarter>,
    paar: &BTreeMap<Quarter, u32>,
    window: (Quarter, Quarter),
) -> Result<SlotAssignment, RbsError> {
    let (start, end) = window;
    if let Some(q) = (start..=end).find(|q| !paar.contains_key(q)) {
        return Err(RbsError::MissingRate(q));
    }
    let last = paar.keys().next_back().copied().unwrap_or(end).max(end);
    let slots = (start..=last).map(|q| paar.get(&q).copied().unwrap_or(0)).collect();
    let profile = CapacityProfile::new(start, slots);

    let mut order: Vec<&FlightRecord> = controlled.iter().collect();
    order.sort_by(|a, b| (a.sched_arr, &a.flight_id).cmp(&(b.sched_arr, &b.flight_id)));
    let requests: Vec<SlotRequest> = order
        .iter()
        .map(|f| SlotRequest {
            sched_arr: f.sched_arr,
            earliest: f.sched_arr,
        })
        .collect();

    let r = ration_by_schedule(&requests, exempt_etas.values().copied(), &profile);
    if r.pinned_overflow > 0 {
        return Err(RbsError::Infeasible {
            first_saturated: r.first_saturated.unwrap_or(start),
        });
    }

    let mut entries: Vec<SlotEntry> = order
        .iter()
        .zip(&r.assigned)
        .map(|(f, &q)| SlotEntry {
            flight_id: f.flight_id.clone(),
            sched_arr: f.sched_arr,
            assigned_arr: q,
            controlled: true,
        })
        .collect();
    entries.extend(exempt_etas.iter().map(|(id, &eta)| SlotEntry {
        flight_id: id.clone(),
        sched_arr: eta,
        assigned_arr: eta,
        controlled: false,
    }));
    Ok(SlotAssignment { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueueStep {
    pub act_arr: u32,
    pub new_nh: u32,
    pub ad_count: u32,
}

/// One quarter of the terminal hold stack: land up to capacity, everyone
/// left over accrues one quarter of airborne delay.
pub fn advance_arrival_queue(prev_nh: u32, arrivals_due: u32, arr_rate: u32) -> QueueStep {
    let waiting = prev_nh + arrivals_due;
    let act_arr = waiting.min(arr_rate);
    let new_nh = waiting - act_arr;
    QueueStep {
        act_arr,
        new_nh,
        ad_count: new_nh,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueueStats {
    pub gd: Vec<u32>,
    pub ad: Vec<u32>,
    pub nh: Vec<u32>,
    pub act_arr: Vec<u32>,
}

/// Folds the arrival queue over consecutive quarters starting from `initial_nh`.
/// Returns (act_arr, nh, ad) per quarter.
pub fn fold_queue(initial_nh: u32, due: &[u32], rates: &[u32]) -> (Vec<u32>, Vec<u32>, Vec<u32>) {
    let mut nh = initial_nh;
    let mut act = Vec::with_capacity(due.len());
    let mut stack = Vec::with_capacity(due.len());
    let mut ad = Vec::with_capacity(due.len());
    for (&d, &rate) in due.iter().zip(rates) {
        let s = advance_arrival_queue(nh, d, rate);
        nh = s.new_nh;
        act.push(s.act_arr);
        stack.push(s.new_nh);
        ad.push(s.ad_count);
    }
    (act, stack, ad)
}

/// Ground holds plus the queuing diagram over quarters `0..horizon`.
pub fn queue_stats(
    assignment: &SlotAssignment,
    enroute_arrivals: &[u32],
    arr_rate: &[u32],
    horizon: usize,
) -> QueueStats {
    let mut gd = vec![0u32; horizon];
    let mut due = vec![0u32; horizon];
    for e in &assignment.entries {
        if e.controlled {
            let lo = e.sched_arr.max(0) as usize;
            let hi = (e.assigned_arr.max(0) as usize).min(horizon);
            for g in gd.iter_mut().take(hi).skip(lo) {
                *g += 1;
            }
        }
        if (0..horizon as Quarter).contains(&e.assigned_arr) {
            due[e.assigned_arr as usize] += 1;
        }
    }
    for (d, &extra) in due.iter_mut().zip(enroute_arrivals) {
        *d += extra;
    }
    let rates: Vec<u32> = (0..horizon).map(|q| arr_rate.get(q).copied().unwrap_or(0)).collect();
    let (act_arr, nh, ad) = fold_queue(0, &due, &rates);
    QueueStats { gd, ad, nh, act_arr }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::fixtures::flight;
    use proptest::prelude::*;

    fn uniform(window: (Quarter, Quarter), rate: u32) -> BTreeMap<Quarter, u32> {
        (window.0..=window.1).map(|q| (q, rate)).collect()
    }

    #[test]
    fn three_flights_one_slot_each() {
        let fs = vec![flight("C", 0), flight("A", 0), flight("B", 0)];
        let a = allocate_slots_rbs(&fs, &BTreeMap::new(), &uniform((0, 5), 1), (0, 5)).unwrap();
        let delays: Vec<u32> = a.controlled().map(|e| e.ground_delay_quarters()).collect();
        assert_eq!(delays, vec![0, 1, 2]);
        // lexicographic tie-break
        let ids: Vec<&str> = a.controlled().map(|e| e.flight_id.as_str()).collect();
        assert_eq!(ids, vec!["A", "B", "C"]);
    }

    #[test]
    fn exempt_lands_first() {
        let exempt: BTreeMap<String, Quarter> = [("X".to_string(), 0)].into();
        let a = allocate_slots_rbs(&[flight("C", 0)], &exempt, &uniform((0, 3), 1), (0, 3)).unwrap();
        assert_eq!(a.get("X").unwrap().assigned_arr, 0);
        assert_eq!(a.get("X").unwrap().ground_delay_quarters(), 0);
        assert_eq!(a.get("C").unwrap().assigned_arr, 1);
        assert_eq!(a.get("C").unwrap().ground_delay_quarters(), 1);
    }

    #[test]
    fn empty_inputs() {
        let a = allocate_slots_rbs(&[], &BTreeMap::new(), &uniform((0, 3), 2), (0, 3)).unwrap();
        assert!(a.entries.is_empty());
        assert_eq!(a.total_ground_delay(), 0);
    }

    #[test]
    fn infeasible_exempt_names_first_saturated_quarter() {
        let exempt: BTreeMap<String, Quarter> = (0..4).map(|i| (format!("X{i}"), 2)).collect();
        let err = allocate_slots_rbs(&[], &exempt, &uniform((0, 3), 1), (0, 3)).unwrap_err();
        assert_eq!(err, RbsError::Infeasible { first_saturated: 2 });
    }

    #[test]
    fn missing_rate_in_window() {
        let mut paar = uniform((0, 3), 1);
        paar.remove(&2);
        assert_eq!(
            allocate_slots_rbs(&[], &BTreeMap::new(), &paar, (0, 3)).unwrap_err(),
            RbsError::MissingRate(2)
        );
    }

    #[test]
    fn overflow_past_profile_goes_to_first_ungoverned_quarter() {
        let fs: Vec<_> = (0..4).map(|i| flight(&format!("F{i}"), 0)).collect();
        let a = allocate_slots_rbs(&fs, &BTreeMap::new(), &uniform((0, 1), 1), (0, 1)).unwrap();
        let got: Vec<Quarter> = a.controlled().map(|e| e.assigned_arr).collect();
        assert_eq!(got, vec![0, 1, 2, 2]);
    }

    #[test]
    fn earliest_bound_respected() {
        let profile = CapacityProfile::new(0, vec![5; 10]);
        let reqs = [
            SlotRequest {
                sched_arr: 2,
                earliest: 6,
            },
            SlotRequest {
                sched_arr: 3,
                earliest: 3,
            },
        ];
        let r = ration_by_schedule(&reqs, [], &profile);
        assert_eq!(r.assigned, vec![6, 3]);
    }

    #[test]
    fn queue_examples() {
        assert_eq!(
            advance_arrival_queue(0, 5, 5),
            QueueStep {
                act_arr: 5,
                new_nh: 0,
                ad_count: 0
            }
        );
        assert_eq!(
            advance_arrival_queue(2, 4, 3),
            QueueStep {
                act_arr: 3,
                new_nh: 3,
                ad_count: 3
            }
        );
        assert_eq!(
            advance_arrival_queue(0, 0, 10),
            QueueStep {
                act_arr: 0,
                new_nh: 0,
                ad_count: 0
            }
        );
    }

    #[test]
    fn single_held_flight_gd_profile() {
        let a = SlotAssignment {
            entries: vec![SlotEntry {
                flight_id: "F".into(),
                sched_arr: 0,
                assigned_arr: 2,
                controlled: true,
            }],
        };
        let s = queue_stats(&a, &[], &[5; 6], 6);
        assert_eq!(s.gd, vec![1, 1, 0, 0, 0, 0]);
        assert_eq!(s.act_arr, vec![0, 0, 1, 0, 0, 0]);
    }

    #[test]
    fn uncongested_has_no_hold() {
        let fs: Vec<_> = (0..6).map(|i| flight(&format!("F{i}"), i)).collect();
        let a = allocate_slots_rbs(&fs, &BTreeMap::new(), &uniform((0, 9), 3), (0, 9)).unwrap();
        let s = queue_stats(&a, &[1; 10], &[4; 10], 10);
        assert!(s.nh.iter().all(|&n| n == 0));
        assert!(s.ad.iter().all(|&n| n == 0));
    }

    #[test]
    fn delay_equals_area_between_cumulative_curves() {
        // 5 flights: two controlled held by a 1-per-quarter program, plus
        // exogenous arrivals that overflow a 1-per-quarter runway.
        let fs = vec![flight("A", 1), flight("B", 1), flight("C", 2)];
        let paar: BTreeMap<Quarter, u32> = (0..10).map(|q| (q, 1)).collect();
        let a = allocate_slots_rbs(&fs, &BTreeMap::new(), &paar, (0, 9)).unwrap();
        let enroute = [0, 0, 1, 1, 0, 0, 0, 0, 0, 0];
        let rates = [1u32; 10];
        let s = queue_stats(&a, &enroute, &rates, 10);
        let total: u32 = s.gd.iter().sum::<u32>() + s.ad.iter().sum::<u32>();

        // cumulative scheduled demand minus cumulative landings, per quarter
        let sched = [0, 2, 2, 1, 0, 0, 0, 0, 0, 0];
        let mut demand = 0;
        let mut landed = 0;
        let mut area = 0;
        for q in 0..10 {
            demand += sched[q];
            landed += s.act_arr[q];
            area += demand - landed;
        }
        assert_eq!(landed, 5);
        assert_eq!(total, area);
        assert_eq!(area, 6);
    }

    /// Minimum total delay over all capacity-feasible, order-preserving
    /// assignments. Quarter `horizon` is an unlimited overflow bucket.
    fn brute_force_min_delay(sched: &[Quarter], caps: &[u32]) -> u64 {
        let mut sorted = sched.to_vec();
        sorted.sort();
        let h = caps.len() as Quarter;
        fn go(
            i: usize,
            sorted: &[Quarter],
            used: &mut Vec<u32>,
            caps: &[u32],
            h: Quarter,
            assigned: &mut Vec<Quarter>,
            cost: u64,
            best: &mut u64,
        ) {
            if cost >= *best {
                return;
            }
            if i == sorted.len() {
                *best = cost;
                return;
            }
            let mut lo = sorted[i];
            for j in 0..i {
                if sorted[j] < sorted[i] {
                    lo = lo.max(assigned[j]);
                }
            }
            for q in lo..=h {
                if q < h && used[q as usize] >= caps[q as usize] {
                    continue;
                }
                if q < h {
                    used[q as usize] += 1;
                }
                assigned.push(q);
                go(
                    i + 1,
                    sorted,
                    used,
                    caps,
                    h,
                    assigned,
                    cost + (q - sorted[i]) as u64,
                    best,
                );
                assigned.pop();
                if q < h {
                    used[q as usize] -= 1;
                }
            }
        }
        let mut best = u64::MAX;
        go(
            0,
            &sorted,
            &mut vec![0; caps.len()],
            caps,
            h,
            &mut Vec::new(),
            0,
            &mut best,
        );
        best
    }

    #[test]
    fn brute_force_confirms_first_example() {
        assert_eq!(brute_force_min_delay(&[0, 0, 0], &[1, 1, 1, 1]), 3);
    }

    fn arb_instance() -> impl Strategy<Value = (Vec<Quarter>, Vec<u32>)> {
        (1usize..=8).prop_flat_map(|h| {
            (
                proptest::collection::vec(0..h as Quarter, 0..=8),
                proptest::collection::vec(0u32..=3, h),
            )
        })
    }

    fn run(sched: &[Quarter], caps: &[u32]) -> SlotAssignment {
        let fs: Vec<_> = sched
            .iter()
            .enumerate()
            .map(|(i, &s)| flight(&format!("F{i:02}"), s))
            .collect();
        let paar: BTreeMap<Quarter, u32> = caps.iter().enumerate().map(|(q, &c)| (q as Quarter, c)).collect();
        allocate_slots_rbs(&fs, &BTreeMap::new(), &paar, (0, caps.len() as Quarter - 1)).unwrap()
    }

    proptest! {
        #[test]
        fn rbs_matches_exhaustive_minimum((sched, caps) in arb_instance()) {
            let a = run(&sched, &caps);
            prop_assert_eq!(a.total_ground_delay(), brute_force_min_delay(&sched, &caps));
        }

        #[test]
        fn slots_conserved_and_capacity_respected((sched, caps) in arb_instance()) {
            let a = run(&sched, &caps);
            prop_assert_eq!(a.controlled().count(), sched.len());
            for (q, &cap) in caps.iter().enumerate() {
                let n = a.controlled().filter(|e| e.assigned_arr == q as Quarter).count() as u32;
                prop_assert!(n <= cap);
            }
            for e in a.controlled() {
                prop_assert!(e.assigned_arr >= e.sched_arr);
            }
        }

        #[test]
        fn order_preserved((sched, caps) in arb_instance()) {
            let a = run(&sched, &caps);
            let es: Vec<_> = a.controlled().collect();
            for x in &es {
                for y in &es {
                    if x.sched_arr < y.sched_arr {
                        prop_assert!(x.assigned_arr <= y.assigned_arr);
                    }
                }
            }
        }

        #[test]
        fn more_capacity_never_more_delay((sched, caps) in arb_instance()) {
            let raised: Vec<u32> = caps.iter().map(|c| c + 1).collect();
            prop_assert!(run(&sched, &raised).total_ground_delay() <= run(&sched, &caps).total_ground_delay());
        }

        #[test]
        fn full_shift_when_program_within_capacity(
            (sched, caps) in arb_instance(),
            headroom in proptest::collection::vec(0u32..=2, 8),
        ) {
            let a = run(&sched, &caps);
            let h = caps.len();
            // runway capacity at least the program rate everywhere, and enough
            // for the overflow bucket
            let mut rates: Vec<u32> = caps.iter().zip(&headroom).map(|(c, x)| c + x).collect();
            rates.push(sched.len() as u32);
            let s = queue_stats(&a, &[], &rates, h + 1);
            prop_assert!(s.ad.iter().all(|&x| x == 0));
        }

        #[test]
        fn flow_conservation(due in proptest::collection::vec(0u32..8, 1..20), rates in proptest::collection::vec(0u32..8, 20), nh0 in 0u32..5) {
            let (act, nh, _) = fold_queue(nh0, &due, &rates);
            let landed: u32 = act.iter().sum();
            prop_assert_eq!(landed + *nh.last().unwrap(), due.iter().sum::<u32>() + nh0);
            for (a, r) in act.iter().zip(&rates) {
                prop_assert!(a <= r);
            }
        }
    }
}
