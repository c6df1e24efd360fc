use super::{AirportQuarter, DataError, FlightRecord, GdpAdvisory, Quarter, Scope, ScopeKind};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

const FLIGHT_COLUMNS: [&str; 9] = [
    "flight_id",
    "origin",
    "dest",
    "sched_dep",
    "sched_arr",
    "actual_dep",
    "enroute_quarters",
    "origin_center",
    "origin_distance_nm",
];

const QUARTER_COLUMNS: [&str; 9] = [
    "t",
    "arr_rate",
    "ceiling_100ft",
    "wind_angle_deg",
    "wind_speed",
    "visibility_sm",
    "runway_count",
    "sched_arr_demand",
    "sched_dep_demand",
];

const ADVISORY_COLUMNS: [&str; 7] = [
    "airport",
    "release_t",
    "start_t",
    "end_t",
    "scope_kind",
    "scope_distance_nm",
    "scope_centers",
];

fn csv_error(err: csv::Error) -> DataError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    let message = match err.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} columns, found {len}")
        }
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        _ => err.to_string(),
    };
    DataError::Parse { line, message }
}

/// Reads typed rows, checking that the header carries exactly `columns` in
/// any order. Yields (1-based line number, row).
fn read_rows<T: DeserializeOwned>(input: impl Read, columns: &[&str]) -> Result<Vec<(u64, T)>, DataError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let got: BTreeSet<&str> = headers.iter().collect();
    let want: BTreeSet<&str> = columns.iter().copied().collect();
    if got != want || headers.len() != columns.len() {
        let missing: Vec<_> = want.difference(&got).collect();
        let extra: Vec<_> = got.difference(&want).collect();
        return Err(DataError::Parse {
            line: 1,
            message: format!("header mismatch: missing {missing:?}, unexpected {extra:?}"),
        });
    }
    let mut rows = Vec::new();
    for result in reader.deserialize::<T>() {
        let row = result.map_err(csv_error)?;
        // the header is line 1, so the n-th data row is line n + 1
        rows.push((rows.len() as u64 + 2, row));
    }
    Ok(rows)
}

#[derive(Deserialize)]
struct FlightRow {
    flight_id: String,
    origin: String,
    dest: String,
    sched_dep: Quarter,
    sched_arr: Quarter,
    actual_dep: Option<Quarter>,
    enroute_quarters: u32,
    origin_center: String,
    origin_distance_nm: f64,
}

pub fn parse_flights(input: impl Read) -> Result<Vec<FlightRecord>, DataError> {
    read_rows::<FlightRow>(input, &FLIGHT_COLUMNS)?
        .into_iter()
        .map(|(line, r)| {
            let rec = FlightRecord {
                flight_id: r.flight_id,
                origin: r.origin,
                dest: r.dest,
                sched_dep: r.sched_dep,
                sched_arr: r.sched_arr,
                actual_dep: r.actual_dep,
                enroute_quarters: r.enroute_quarters,
                origin_center: r.origin_center,
                origin_distance_nm: r.origin_distance_nm,
            };
            rec.check()
                .map_err(|(field, message)| DataError::Validation { line, field, message })?;
            Ok(rec)
        })
        .collect()
}

pub fn parse_airport_quarters(input: impl Read) -> Result<Vec<AirportQuarter>, DataError> {
    let mut by_t: BTreeMap<Quarter, AirportQuarter> = BTreeMap::new();
    for (line, q) in read_rows::<AirportQuarter>(input, &QUARTER_COLUMNS)? {
        q.check()
            .map_err(|(field, message)| DataError::Validation { line, field, message })?;
        if by_t.contains_key(&q.t) {
            return Err(DataError::Validation {
                line,
                field: "t",
                message: format!("duplicate quarter index {}", q.t),
            });
        }
        by_t.insert(q.t, q);
    }
    Ok(by_t.into_values().collect())
}

#[derive(Deserialize)]
struct AdvisoryRow {
    airport: String,
    release_t: Quarter,
    start_t: Quarter,
    end_t: Quarter,
    scope_kind: ScopeKind,
    scope_distance_nm: Option<f64>,
    scope_centers: Option<String>,
}

pub fn parse_gdp_advisories(input: impl Read) -> Result<Vec<GdpAdvisory>, DataError> {
    read_rows::<AdvisoryRow>(input, &ADVISORY_COLUMNS)?
        .into_iter()
        .map(|(line, r)| {
            let centers = r.scope_centers.filter(|s| !s.is_empty());
            let scope = match (r.scope_kind, r.scope_distance_nm, centers) {
                (ScopeKind::Distance, Some(d), None) => Scope::Distance(d),
                (ScopeKind::Centers, None, Some(c)) => Scope::Centers(
                    c.split(';')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect(),
                ),
                (kind, d, c) => {
                    return Err(DataError::Validation {
                        line,
                        field: "scope_kind",
                        message: format!(
                            "{kind:?} scope needs exactly its own field populated \
                             (distance present: {}, centers present: {})",
                            d.is_some(),
                            c.is_some()
                        ),
                    })
                }
            };
            let adv = GdpAdvisory {
                airport: r.airport,
                release_t: r.release_t,
                start_t: r.start_t,
                end_t: r.end_t,
                scope,
            };
            adv.check()
                .map_err(|(field, message)| DataError::Validation { line, field, message })?;
            Ok(adv)
        })
        .collect()
}

fn writer(out: impl Write) -> csv::Writer<impl Write> {
    csv::WriterBuilder::new().from_writer(out)
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<(), DataError> {
    w.flush()?;
    Ok(())
}

fn write_err(e: csv::Error) -> DataError {
    DataError::Io(std::io::Error::other(e))
}

/// Writes flights in canonical column order.
pub fn write_flights(out: impl Write, flights: &[FlightRecord]) -> Result<(), DataError> {
    let mut w = writer(out);
    w.write_record(FLIGHT_COLUMNS).map_err(write_err)?;
    for f in flights {
        w.write_record([
            f.flight_id.clone(),
            f.origin.clone(),
            f.dest.clone(),
            f.sched_dep.to_string(),
            f.sched_arr.to_string(),
            f.actual_dep.map(|d| d.to_string()).unwrap_or_default(),
            f.enroute_quarters.to_string(),
            f.origin_center.clone(),
            f.origin_distance_nm.to_string(),
        ])
        .map_err(write_err)?;
    }
    finish(w)
}

pub fn write_airport_quarters(out: impl Write, quarters: &[AirportQuarter]) -> Result<(), DataError> {
    let mut w = writer(out);
    w.write_record(QUARTER_COLUMNS).map_err(write_err)?;
    for q in quarters {
        w.write_record([
            q.t.to_string(),
            q.arr_rate.to_string(),
            q.ceiling_100ft.to_string(),
            q.wind_angle_deg.to_string(),
            q.wind_speed.to_string(),
            q.visibility_sm.to_string(),
            q.runway_count.to_string(),
            q.sched_arr_demand.to_string(),
            q.sched_dep_demand.to_string(),
        ])
        .map_err(write_err)?;
    }
    finish(w)
}

pub fn write_gdp_advisories(out: impl Write, advisories: &[GdpAdvisory]) -> Result<(), DataError> {
    let mut w = writer(out);
    w.write_record(ADVISORY_COLUMNS).map_err(write_err)?;
    for a in advisories {
        let (kind, dist, centers) = match &a.scope {
            Scope::Distance(d) => ("DISTANCE", d.to_string(), String::new()),
            Scope::Centers(c) => (
                "CENTERS",
                String::new(),
                c.iter().cloned().collect::<Vec<_>>().join(";"),
            ),
        };
        w.write_record([
            a.airport.clone(),
            a.release_t.to_string(),
            a.start_t.to_string(),
            a.end_t.to_string(),
            kind.to_string(),
            dist,
            centers,
        ])
        .map_err(write_err)?;
    }
    finish(w)
}
