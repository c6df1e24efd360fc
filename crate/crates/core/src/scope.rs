//! GDP applicability: which arrivals a program controls, exempts, or leaves alone.
//!
//! A flight is controlled when its scheduled arrival falls inside the
//! program window, its origin is inside the scope, and it has not departed
//! when the program is released. Window-inside flights that fail either of
//! the last two tests are exempt; everything else is unaffected.

use crate::data::{FlightRecord, GdpAdvisory, Quarter, Scope};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScopeError {
    #[error("flight {flight_id} lands at {dest}, program is for {airport}")]
    DestMismatch {
        flight_id: String,
        dest: String,
        airport: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClassKind {
    Controlled,
    Exempt,
    Unaffected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClassReason {
    OutOfWindow,
    OutOfScope,
    AlreadyDeparted,
    InScope,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlightClass {
    pub flight_id: String,
    pub class: ClassKind,
    pub reason: ClassReason,
}

fn check_dest(flight: &FlightRecord, gdp: &GdpAdvisory) -> Result<(), ScopeError> {
    if flight.dest != gdp.airport {
        return Err(ScopeError::DestMismatch {
            flight_id: flight.flight_id.clone(),
            dest: flight.dest.clone(),
            airport: gdp.airport.clone(),
        });
    }
    Ok(())
}

fn origin_in_scope(flight: &FlightRecord, scope: &Scope) -> bool {
    match scope {
        Scope::Distance(limit) => flight.origin_distance_nm <= *limit,
        Scope::Centers(centers) => centers.contains(&flight.origin_center),
    }
}

/// A departure in the decision quarter itself still counts as on the ground.
fn departed_before(flight: &FlightRecord, now: Quarter) -> bool {
    matches!(flight.actual_dep, Some(dep) if dep < now)
}

pub fn is_in_scope(flight: &FlightRecord, gdp: &GdpAdvisory, now: Quarter) -> Result<bool, ScopeError> {
    check_dest(flight, gdp)?;
    Ok(gdp.window_contains(flight.sched_arr) && origin_in_scope(flight, &gdp.scope) && !departed_before(flight, now))
}

pub fn classify(flight: &FlightRecord, gdp: &GdpAdvisory, now: Quarter) -> Result<FlightClass, ScopeError> {
    check_dest(flight, gdp)?;
    let (class, reason) = if !gdp.window_contains(flight.sched_arr) {
        (ClassKind::Unaffected, ClassReason::OutOfWindow)
    } else if !origin_in_scope(flight, &gdp.scope) {
        (ClassKind::Exempt, ClassReason::OutOfScope)
    } else if departed_before(flight, now) {
        (ClassKind::Exempt, ClassReason::AlreadyDeparted)
    } else {
        (ClassKind::Controlled, ClassReason::InScope)
    };
    Ok(FlightClass {
        flight_id: flight.flight_id.clone(),
        class,
        reason,
    })
}

/// Exhaustive, disjoint split of a flight list.
#[derive(Debug, Clone, Default)]
pub struct Partition<'a> {
    pub controlled: Vec<&'a FlightRecord>,
    pub exempt: Vec<&'a FlightRecord>,
    pub unaffected: Vec<&'a FlightRecord>,
    /// One entry per input flight, in input order.
    pub classes: Vec<FlightClass>,
}

impl Partition<'_> {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.controlled.len(), self.exempt.len(), self.unaffected.len())
    }
}

pub fn partition_flights<'a>(
    flights: &'a [FlightRecord],
    gdp: &GdpAdvisory,
    now: Quarter,
) -> Result<Partition<'a>, ScopeError> {
    let mut p = Partition::default();
    for f in flights {
        let c = classify(f, gdp, now)?;
        match c.class {
            ClassKind::Controlled => p.controlled.push(f),
            ClassKind::Exempt => p.exempt.push(f),
            ClassKind::Unaffected => p.unaffected.push(f),
        }
        p.classes.push(c);
    }
    Ok(p)
}
