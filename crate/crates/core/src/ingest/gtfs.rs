//! GTFS subset loader.
//!
//! Each consecutive stop pair of a trip contributes one event to the hop
//! keyed by `(route, from stop, to stop)`. Service days are expanded over
//! the configured horizon and local times are converted to UTC here, once.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, Weekday};
use serde::Deserialize;

use crate::error::{invalid, Error, Result};
use crate::network::{
    DepartureList, LatLon, Mode, Network, NetworkBuilder, RouteId, Schedule, StationId,
    UtcOffsets, WALK_DETOUR,
};

const DAY: i64 = 86_400;

#[derive(Debug, Clone)]
pub struct FeedConfig {
    pub path: PathBuf,
    /// First local service date of the horizon.
    pub start_date: NaiveDate,
    pub utc_offset_seconds: i32,
    /// `(switch_utc, new_offset)` pairs, ascending.
    pub dst_rules: Vec<(i64, i32)>,
    pub service_horizon_days: u32,
}

impl FeedConfig {
    pub fn new(path: impl Into<PathBuf>, start_date: NaiveDate, utc_offset_seconds: i32) -> Self {
        Self {
            path: path.into(),
            start_date,
            utc_offset_seconds,
            dst_rules: Vec::new(),
            service_horizon_days: 14,
        }
    }

    fn offsets(&self) -> UtcOffsets {
        UtcOffsets {
            base: self.utc_offset_seconds,
            switches: self.dst_rules.clone(),
        }
    }

    fn local_midnight(&self, d: NaiveDate) -> i64 {
        d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp()
    }

    /// UTC horizon covered by this feed. Trips may run up to two days past
    /// the last service date (GTFS times beyond 24:00:00).
    pub fn horizon(&self) -> (i64, i64) {
        let tz = self.offsets();
        let start = tz.to_utc(self.local_midnight(self.start_date));
        let end = start + i64::from(self.service_horizon_days) * DAY + 2 * DAY;
        (start, end)
    }
}

/// Outcome of loading one feed.
#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub feed: PathBuf,
    pub stations: usize,
    pub hops: usize,
    pub events: usize,
    /// Record-level problems; the feed continues past them.
    pub record_errors: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct StopRow {
    stop_id: String,
    #[serde(default)]
    stop_name: String,
    stop_lat: Option<f64>,
    stop_lon: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct AgencyRow {
    #[serde(default)]
    agency_id: String,
    agency_name: String,
}

#[derive(Debug, Deserialize)]
struct RouteRow {
    route_id: String,
    #[serde(default)]
    agency_id: String,
    #[serde(default)]
    route_short_name: String,
    #[serde(default)]
    route_long_name: String,
    route_type: i32,
}

#[derive(Debug, Deserialize)]
struct TripRow {
    route_id: String,
    service_id: String,
    trip_id: String,
}

#[derive(Debug, Deserialize)]
struct StopTimeRow {
    trip_id: String,
    #[serde(default)]
    arrival_time: String,
    #[serde(default)]
    departure_time: String,
    stop_id: String,
    stop_sequence: u32,
}

#[derive(Debug, Deserialize)]
struct CalendarRow {
    service_id: String,
    monday: u8,
    tuesday: u8,
    wednesday: u8,
    thursday: u8,
    friday: u8,
    saturday: u8,
    sunday: u8,
    start_date: String,
    end_date: String,
}

#[derive(Debug, Deserialize)]
struct CalendarDateRow {
    service_id: String,
    date: String,
    exception_type: u8,
}

#[derive(Debug, Deserialize)]
struct TransferRow {
    from_stop_id: String,
    to_stop_id: String,
    #[serde(default)]
    transfer_type: Option<u8>,
    #[serde(default)]
    min_transfer_time: Option<u32>,
}

#[derive(Debug, Deserialize)]
struct FrequencyRow {
    trip_id: String,
    start_time: String,
    end_time: String,
    headway_secs: u32,
}

/// Parses `H:MM:SS` allowing hours of 24 and more.
pub fn parse_gtfs_time(s: &str) -> Option<i64> {
    let mut it = s.trim().split(':');
    let h: i64 = it.next()?.parse().ok()?;
    let m: i64 = it.next()?.parse().ok()?;
    let sec: i64 = it.next()?.parse().ok()?;
    if it.next().is_some() || !(0..60).contains(&m) || !(0..60).contains(&sec) || h < 0 {
        return None;
    }
    Some(h * 3600 + m * 60 + sec)
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y%m%d").ok()
}

/// GTFS `route_type`, including the extended hierarchy, to a mode.
pub fn mode_for_route_type(t: i32) -> Mode {
    match t {
        0 | 1 | 2 | 5 | 6 | 7 | 12 => Mode::Train,
        100..=199 | 400..=599 | 900..=999 | 1400..=1499 => Mode::Train,
        1100..=1199 => Mode::Plane,
        1500..=1599 => Mode::Taxi,
        _ => Mode::Bus,
    }
}

fn open(dir: &Path, name: &str, required: bool) -> Result<Option<csv::Reader<File>>> {
    let p = dir.join(name);
    if !p.exists() {
        if required {
            return Err(Error::MissingFile(p));
        }
        return Ok(None);
    }
    let rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(&p)?;
    Ok(Some(rdr))
}

fn rows<T: for<'de> Deserialize<'de>>(
    rdr: Option<csv::Reader<File>>,
    name: &str,
    errors: &mut Vec<String>,
) -> Vec<T> {
    let Some(mut rdr) = rdr else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (i, r) in rdr.deserialize::<T>().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(e) => errors.push(format!("{name}:{}: {e}", i + 2)),
        }
    }
    out
}

/// Loads one feed into a fresh network.
pub fn load_gtfs(config: &FeedConfig) -> Result<(Network, LoadReport)> {
    let mut b = NetworkBuilder::new(config.horizon());
    let report = load_gtfs_into(&mut b, config)?;
    Ok((b.build()?, report))
}

/// Loads several feeds into one network whose horizon covers all of them.
pub fn load_feeds(configs: &[FeedConfig]) -> Result<(Network, Vec<LoadReport>)> {
    if configs.is_empty() {
        return invalid("no feeds given");
    }
    let start = configs.iter().map(|c| c.horizon().0).min().unwrap();
    let end = configs.iter().map(|c| c.horizon().1).max().unwrap();
    let mut b = NetworkBuilder::new((start, end));
    let mut reports = Vec::new();
    for c in configs {
        reports.push(load_gtfs_into(&mut b, c)?);
    }
    Ok((b.build()?, reports))
}

/// Appends one feed's stations, routes and hops to `b`.
pub fn load_gtfs_into(b: &mut NetworkBuilder, config: &FeedConfig) -> Result<LoadReport> {
    if config.service_horizon_days == 0 {
        return invalid("service horizon must be at least one day");
    }
    let dir = config.path.as_path();
    let stops_r = open(dir, "stops.txt", true)?;
    let routes_r = open(dir, "routes.txt", true)?;
    let agency_r = open(dir, "agency.txt", false)?;
    let trips_r = open(dir, "trips.txt", true)?;
    let times_r = open(dir, "stop_times.txt", true)?;
    let cal_r = open(dir, "calendar.txt", true)?;
    let dates_r = open(dir, "calendar_dates.txt", false)?;
    let xfer_r = open(dir, "transfers.txt", false)?;
    let freq_r = open(dir, "frequencies.txt", false)?;

    let mut report = LoadReport {
        feed: config.path.clone(),
        ..LoadReport::default()
    };
    let errors = &mut report.record_errors;
    let tz = config.offsets();
    let tz_idx = b.add_timezone(tz.clone());

    let mut stop_ids: HashMap<String, StationId> = HashMap::new();
    for row in rows::<StopRow>(stops_r, "stops.txt", errors) {
        let (Some(lat), Some(lon)) = (row.stop_lat, row.stop_lon) else {
            errors.push(format!("stops.txt: stop {} has no coordinates", row.stop_id));
            continue;
        };
        let pos = LatLon::new(lat, lon);
        if !pos.is_valid() {
            errors.push(format!("stops.txt: stop {} has invalid coordinates", row.stop_id));
            continue;
        }
        let name = if row.stop_name.is_empty() {
            row.stop_id.clone()
        } else {
            row.stop_name
        };
        let id = b.add_station(name, pos, tz_idx);
        stop_ids.insert(row.stop_id, id);
    }
    report.stations = stop_ids.len();

    let agencies: HashMap<String, String> = rows::<AgencyRow>(agency_r, "agency.txt", errors)
        .into_iter()
        .map(|a| (a.agency_id, a.agency_name))
        .collect();
    // A feed with a single agency may leave agency_id out of routes.txt.
    let sole_agency = (agencies.len() == 1).then(|| agencies.values().next().cloned()).flatten();

    let mut route_ids: HashMap<String, RouteId> = HashMap::new();
    for row in rows::<RouteRow>(routes_r, "routes.txt", errors) {
        let name = [row.route_short_name.as_str(), row.route_long_name.as_str()]
            .iter()
            .filter(|s| !s.is_empty())
            .copied()
            .collect::<Vec<_>>()
            .join(" ");
        let agency = match agencies.get(&row.agency_id) {
            Some(a) => a.clone(),
            None if row.agency_id.is_empty() => sole_agency.clone().unwrap_or_default(),
            None => row.agency_id,
        };
        let id = b.add_route(name, agency, mode_for_route_type(row.route_type));
        route_ids.insert(row.route_id, id);
    }

    // Active local service dates per service_id, restricted to the horizon.
    let first = config.start_date;
    let days: Vec<NaiveDate> = (0..config.service_horizon_days)
        .map(|i| first + chrono::Days::new(u64::from(i)))
        .collect();
    let mut active: HashMap<String, Vec<NaiveDate>> = HashMap::new();
    for row in rows::<CalendarRow>(cal_r, "calendar.txt", errors) {
        let (Some(from), Some(to)) = (parse_date(&row.start_date), parse_date(&row.end_date)) else {
            errors.push(format!("calendar.txt: bad dates for {}", row.service_id));
            continue;
        };
        let on = |w: Weekday| match w {
            Weekday::Mon => row.monday,
            Weekday::Tue => row.tuesday,
            Weekday::Wed => row.wednesday,
            Weekday::Thu => row.thursday,
            Weekday::Fri => row.friday,
            Weekday::Sat => row.saturday,
            Weekday::Sun => row.sunday,
        } == 1;
        let v: Vec<NaiveDate> = days
            .iter()
            .copied()
            .filter(|d| *d >= from && *d <= to && on(d.weekday()))
            .collect();
        active.insert(row.service_id, v);
    }
    for row in rows::<CalendarDateRow>(dates_r, "calendar_dates.txt", errors) {
        let Some(d) = parse_date(&row.date) else {
            errors.push(format!("calendar_dates.txt: bad date {}", row.date));
            continue;
        };
        let v = active.entry(row.service_id).or_default();
        match row.exception_type {
            1 if days.contains(&d) && !v.contains(&d) => {
                v.push(d);
                v.sort();
            }
            2 => v.retain(|x| *x != d),
            _ => {}
        }
    }

    let trips: HashMap<String, TripRow> = rows::<TripRow>(trips_r, "trips.txt", errors)
        .into_iter()
        .map(|t| (t.trip_id.clone(), t))
        .collect();

    let mut by_trip: BTreeMap<String, Vec<StopTimeRow>> = BTreeMap::new();
    for row in rows::<StopTimeRow>(times_r, "stop_times.txt", errors) {
        if !stop_ids.contains_key(&row.stop_id) {
            errors.push(format!(
                "stop_times.txt: trip {} references unknown stop {}",
                row.trip_id, row.stop_id
            ));
            continue;
        }
        by_trip.entry(row.trip_id.clone()).or_default().push(row);
    }

    let mut freqs: HashMap<String, Vec<FrequencyRow>> = HashMap::new();
    for f in rows::<FrequencyRow>(freq_r, "frequencies.txt", errors) {
        freqs.entry(f.trip_id.clone()).or_default().push(f);
    }

    let mut hop_events: BTreeMap<(RouteId, StationId, StationId), Vec<(i64, u32)>> = BTreeMap::new();
    for (trip_id, mut st) in by_trip {
        let Some(trip) = trips.get(&trip_id) else {
            errors.push(format!("stop_times.txt: unknown trip {trip_id}"));
            continue;
        };
        let Some(&route) = route_ids.get(&trip.route_id) else {
            errors.push(format!("trips.txt: trip {trip_id} has unknown route {}", trip.route_id));
            continue;
        };
        let Some(dates) = active.get(&trip.service_id) else {
            errors.push(format!("trips.txt: trip {trip_id} has unknown service {}", trip.service_id));
            continue;
        };
        st.sort_by_key(|r| r.stop_sequence);

        // (from, to, dep seconds of day, arr seconds of day)
        let mut legs = Vec::new();
        for w in st.windows(2) {
            let dep = parse_gtfs_time(&w[0].departure_time)
                .or_else(|| parse_gtfs_time(&w[0].arrival_time));
            let arr = parse_gtfs_time(&w[1].arrival_time)
                .or_else(|| parse_gtfs_time(&w[1].departure_time));
            let (Some(dep), Some(arr)) = (dep, arr) else {
                errors.push(format!("stop_times.txt: trip {trip_id} has an untimed stop"));
                continue;
            };
            if arr < dep {
                errors.push(format!("stop_times.txt: trip {trip_id} runs backwards in time"));
                continue;
            }
            let (from, to) = (stop_ids[&w[0].stop_id], stop_ids[&w[1].stop_id]);
            if from != to {
                legs.push((from, to, dep, arr));
            }
        }
        if legs.is_empty() {
            continue;
        }

        // Departure shifts of the trip template: one for a plain trip, a
        // series for frequency-based trips.
        let mut shifts = vec![0i64];
        if let Some(fs) = freqs.get(&trip_id) {
            shifts.clear();
            let t0 = legs[0].2;
            for f in fs {
                let (Some(s), Some(e)) = (parse_gtfs_time(&f.start_time), parse_gtfs_time(&f.end_time)) else {
                    errors.push(format!("frequencies.txt: bad times for {trip_id}"));
                    continue;
                };
                if f.headway_secs == 0 {
                    errors.push(format!("frequencies.txt: zero headway for {trip_id}"));
                    continue;
                }
                let mut t = s;
                while t < e {
                    shifts.push(t - t0);
                    t += i64::from(f.headway_secs);
                }
            }
        }

        for d in dates {
            let midnight = config.local_midnight(*d);
            for shift in &shifts {
                for &(from, to, dep, arr) in &legs {
                    let dep_utc = tz.to_utc(midnight + dep + shift);
                    let arr_utc = tz.to_utc(midnight + arr + shift);
                    let dur = (arr_utc - dep_utc).max(1) as u32;
                    hop_events
                        .entry((route, from, to))
                        .or_default()
                        .push((dep_utc, dur));
                }
            }
        }
    }

    for ((route, from, to), mut ev) in hop_events {
        ev.sort();
        // Same route, same stop pair, same minute: keep the fastest.
        ev.dedup_by_key(|e| e.0);
        report.events += ev.len();
        let list = DepartureList::encode(&ev)?;
        b.add_hop(from, to, route, Schedule::Timed(list), None);
        report.hops += 1;
    }

    let walk = b.shared_route("walk", Mode::Walk);
    for row in rows::<TransferRow>(xfer_r, "transfers.txt", errors) {
        let (Some(&a), Some(&c)) = (stop_ids.get(&row.from_stop_id), stop_ids.get(&row.to_stop_id)) else {
            errors.push(format!(
                "transfers.txt: unknown stop in {} -> {}",
                row.from_stop_id, row.to_stop_id
            ));
            continue;
        };
        let Some(secs) = row.min_transfer_time else {
            continue;
        };
        if a == c {
            b.transfers.station_override.insert(a, secs);
        } else if row.transfer_type == Some(2) {
            let exists = b
                .hops
                .iter()
                .any(|h| h.mode == Mode::Walk && h.from == a && h.to == c);
            if !exists {
                let gc = crate::network::great_circle_m(b.station_pos(a), b.station_pos(c));
                let dist = (gc * WALK_DETOUR).round() as u32;
                b.add_hop(a, c, walk, Schedule::Fixed { duration_s: secs.max(1) }, Some(dist));
                report.hops += 1;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    pub(crate) fn write_feed(dir: &Path, files: &[(&str, &str)]) {
        for (name, body) in files {
            fs::write(dir.join(name), body).unwrap();
        }
    }

    const STOPS: &str = "stop_id,stop_name,stop_lat,stop_lon\nA,Alpha,40.0,-74.0\nB,Beta,40.1,-74.0\n";
    const ROUTES: &str = "route_id,route_short_name,route_long_name,route_type\nR1,1,One,3\n";

    fn monday() -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 1, 1).unwrap()
    }

    #[test]
    fn parses_times_beyond_midnight() {
        assert_eq!(parse_gtfs_time("25:10:00"), Some(25 * 3600 + 600));
        assert_eq!(parse_gtfs_time("7:05:09"), Some(7 * 3600 + 309));
        assert_eq!(parse_gtfs_time("7:65:00"), None);
        assert_eq!(parse_gtfs_time(""), None);
    }

    #[test]
    fn monday_service_with_offset() {
        let dir = tempfile::tempdir().unwrap();
        write_feed(
            dir.path(),
            &[
                ("stops.txt", STOPS),
                ("routes.txt", ROUTES),
                ("trips.txt", "route_id,service_id,trip_id\nR1,MON,T1\n"),
                (
                    "stop_times.txt",
                    "trip_id,arrival_time,departure_time,stop_id,stop_sequence\nT1,10:00:00,10:00:00,A,1\nT1,10:30:00,10:30:00,B,2\n",
                ),
                (
                    "calendar.txt",
                    "service_id,monday,tuesday,wednesday,thursday,friday,saturday,sunday,start_date,end_date\nMON,1,0,0,0,0,0,0,20240101,20241231\n",
                ),
            ],
        );
        let cfg = FeedConfig::new(dir.path(), monday(), -5 * 3600);
        let (net, report) = load_gtfs(&cfg).unwrap();
        assert_eq!(report.hops, 1);
        let deps = net.hop(0).departures().unwrap().decode();
        let mon = monday().and_hms_opt(15, 0, 0).unwrap().and_utc().timestamp();
        assert_eq!(deps, vec![(mon, 1800), (mon + 7 * DAY, 1800)]);
        let (h0, h1) = net.horizon();
        assert!(deps.iter().all(|(d, _)| *d >= h0 && *d < h1));
    }

    #[test]
    fn over_midnight_rolls_to_next_day_and_trips_merge() {
        let dir = tempfile::tempdir().unwrap();
        write_feed(
            dir.path(),
            &[
                ("stops.txt", STOPS),
                ("routes.txt", ROUTES),
                ("trips.txt", "route_id,service_id,trip_id\nR1,D,T1\nR1,D,T2\nR1,D,T3\n"),
                (
                    "stop_times.txt",
                    "trip_id,arrival_time,departure_time,stop_id,stop_sequence\n\
                     T1,10:00:00,10:00:00,A,1\nT1,10:30:00,10:30:00,B,2\n\
                     T2,10:20:00,10:20:00,A,1\nT2,10:50:00,10:50:00,B,2\n\
                     T3,25:10:00,25:10:00,A,1\nT3,25:40:00,25:40:00,B,2\n\
                     T3,25:50:00,25:50:00,NOPE,3\n",
                ),
                (
                    "calendar.txt",
                    "service_id,monday,tuesday,wednesday,thursday,friday,saturday,sunday,start_date,end_date\nD,1,1,1,1,1,1,1,20240101,20240101\n",
                ),
            ],
        );
        let mut cfg = FeedConfig::new(dir.path(), monday(), 0);
        cfg.service_horizon_days = 1;
        let (net, report) = load_gtfs(&cfg).unwrap();
        assert_eq!(net.hops().len(), 1, "one hop per route and stop pair");
        let deps: Vec<i64> = net.hop(0).departures().unwrap().decode().iter().map(|e| e.0).collect();
        let day = monday().and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp();
        assert_eq!(deps, vec![day + 36_000, day + 37_200, day + DAY + 4200]);
        assert_eq!(report.record_errors.len(), 1);
        assert!(report.record_errors[0].contains("NOPE"));
    }

    #[test]
    fn missing_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write_feed(dir.path(), &[("stops.txt", STOPS)]);
        let err = load_gtfs(&FeedConfig::new(dir.path(), monday(), 0)).unwrap_err();
        assert!(err.to_string().contains("routes.txt"), "{err}");
    }

    #[test]
    fn transfers_and_frequencies() {
        let dir = tempfile::tempdir().unwrap();
        write_feed(
            dir.path(),
            &[
                ("stops.txt", STOPS),
                ("routes.txt", ROUTES),
                ("trips.txt", "route_id,service_id,trip_id\nR1,D,T1\n"),
                (
                    "stop_times.txt",
                    "trip_id,arrival_time,departure_time,stop_id,stop_sequence\nT1,06:00:00,06:00:00,A,1\nT1,06:20:00,06:20:00,B,2\n",
                ),
                (
                    "calendar.txt",
                    "service_id,monday,tuesday,wednesday,thursday,friday,saturday,sunday,start_date,end_date\nD,1,1,1,1,1,1,1,20240101,20241231\n",
                ),
                ("frequencies.txt", "trip_id,start_time,end_time,headway_secs\nT1,06:00:00,08:00:00,600\n"),
                (
                    "transfers.txt",
                    "from_stop_id,to_stop_id,transfer_type,min_transfer_time\nB,B,2,120\nA,B,2,900\n",
                ),
            ],
        );
        let mut cfg = FeedConfig::new(dir.path(), monday(), 0);
        cfg.service_horizon_days = 7;
        let (net, _) = load_gtfs(&cfg).unwrap();
        let d = net.hop(0).departures().unwrap();
        assert_eq!(d.len(), 12 * 7);
        assert!(d.blocks().len() <= 7);
        assert_eq!(net.transfer_rules().station_override.get(&1), Some(&120));
        let walk = net.hops().iter().find(|h| h.mode == Mode::Walk).unwrap();
        assert_eq!(walk.fixed_duration(), Some(900));
    }
}
