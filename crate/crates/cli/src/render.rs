//! Human-readable itineraries in the style of the original trip listings:
//! numbered legs, local `YYYYMMDD.HMM` times, transfer waits, a summary
//! line and an evaluation footer.

use std::fmt::Write;

use bbtime::network::{great_circle_m, Mode, Network, StationId};
use bbtime::search::{Itinerary, SearchStats};
use chrono::DateTime;

use crate::plan::{PlanReport, StationRef};

/// Local wall-clock time at station `s`, e.g. `20151213.936`.
pub fn local_stamp(net: &Network, s: StationId, utc: i64) -> String {
    let local = net.tz_of(s).to_local(utc);
    match DateTime::from_timestamp(local, 0) {
        Some(t) => {
            let t = t.naive_utc();
            format!("{}.{}{}", t.format("%Y%m%d"), t.format("%-H"), t.format("%M"))
        }
        None => format!("@{utc}"),
    }
}

pub fn duration(secs: i64) -> String {
    let m = (secs.max(0) + 30) / 60;
    let (h, m) = (m / 60, m % 60);
    match (h, m) {
        (0, m) => format!("{m} min"),
        (1, 0) => "1 hour".into(),
        (h, 0) => format!("{h} hours"),
        (1, m) => format!("1 hour {m} min"),
        (h, m) => format!("{h} hours {m} min"),
    }
}

pub fn distance(m: f64) -> String {
    if m < 1000.0 {
        format!("{} m", m.round() as i64)
    } else if m < 10_000.0 {
        let s = format!("{:.2}", m / 1000.0);
        format!("{} Km", s.trim_end_matches('0').trim_end_matches('.'))
    } else {
        format!("{:.1} Km", m / 1000.0)
    }
}

fn count(n: u64) -> String {
    if n < 1000 {
        n.to_string()
    } else if n < 1_000_000 {
        format!("{:.2} K", n as f64 / 1e3)
    } else {
        format!("{:.2} M", n as f64 / 1e6)
    }
}

fn coords(lat: f64, lon: f64) -> String {
    format!("{lat:.7},{lon:.7}")
}

fn place(net: &Network, s: StationId) -> String {
    let st = net.station(s);
    format!("{} {}", st.name, coords(st.lat, st.lon))
}

fn apart(net: &Network, a: StationId, b: StationId) -> String {
    let d = great_circle_m(net.station(a).pos(), net.station(b).pos());
    format!("within {} m", d.round() as i64)
}

/// `B`, `T`, `P`, `W`, `X` per leg.
pub fn signature(it: &Itinerary) -> String {
    it.legs.iter().map(|l| l.mode.letter()).collect()
}

pub fn footer(stats: &SearchStats, timing: bool) -> String {
    let mut s = format!(
        "evaluated {} alternatives with {} departure times",
        count(stats.alternatives_evaluated),
        count(stats.departures_scanned)
    );
    if timing {
        let _ = write!(s, " in {} milliseconds", stats.elapsed_ms);
    }
    if stats.time_limited {
        s.push_str(" (time limit reached)");
    }
    s
}

fn header(out: &mut String, from: &StationRef, to: &StationRef) {
    let _ = writeln!(out, "From: {}\n{:.6},{:.6}\n", from.name, from.lat, from.lon);
    let _ = writeln!(out, "To: {}\n{:.6},{:.6}\n", to.name, to.lat, to.lon);
}

/// Renders a report. `timing` controls the milliseconds in the footer.
pub fn render(net: &Network, r: &PlanReport, timing: bool) -> String {
    let mut out = String::new();
    header(&mut out, &r.from, &r.to);
    match &r.itinerary {
        Some(it) => itinerary(&mut out, net, r, it),
        None => {
            let _ = writeln!(out, "no route: {}\n", explain(r));
        }
    }
    out.push_str(&footer(&r.stats, timing));
    out.push('\n');
    out
}

fn itinerary(out: &mut String, net: &Network, r: &PlanReport, it: &Itinerary) {
    let total_m: f64 = it.legs.iter().map(|l| f64::from(l.distance_m)).sum();
    let _ = write!(
        out,
        "summary: {} {} {} stops {}",
        duration(it.arrive_utc - it.depart_utc),
        distance(total_m),
        it.legs.len().saturating_sub(1),
        signature(it)
    );
    if let Some(alt) = &r.alternative {
        if alt.depart_utc > it.depart_utc {
            let _ = write!(out, " next in {}", duration(alt.depart_utc - it.depart_utc));
        }
    }
    out.push_str("\n\n");

    for (i, leg) in it.legs.iter().enumerate() {
        let n = i + 1;
        if i == 0 {
            let _ = write!(out, "{n}. {} {}", local_stamp(net, leg.from, leg.dep_utc), place(net, leg.from));
            if leg.from != r.from.id {
                let _ = write!(out, " {}", apart(net, r.from.id, leg.from));
            }
            out.push('\n');
        } else {
            let prev = &it.legs[i - 1];
            if leg.from != prev.to {
                let _ = writeln!(out, "\n{} {}", place(net, leg.from), apart(net, prev.to, leg.from));
            }
            let stamp = local_stamp(net, leg.from, leg.dep_utc);
            if leg.wait_before_s > 0 {
                let _ = writeln!(out, "{n}. {stamp} continue with {} transfer time", duration(leg.wait_before_s));
            } else {
                let _ = writeln!(out, "{n}. {stamp} continue");
            }
        }

        let took = duration(leg.arr_utc - leg.dep_utc);
        let dist = distance(f64::from(leg.distance_m));
        let direct = distance(great_circle_m(net.station(leg.from).pos(), net.station(leg.to).pos()));
        match leg.mode {
            Mode::Walk => {
                let _ = writeln!(out, "walk {took} {dist} (direct {direct})");
            }
            Mode::Taxi => {
                let _ = writeln!(out, "taxi {took} {dist} # (direct {direct})");
            }
            m => {
                let route = net.route(leg.route);
                let mut line = format!("{} {}", m.label(), route.name);
                if !route.agency.is_empty() {
                    let _ = write!(line, " {}", route.agency);
                }
                let _ = writeln!(out, "{line} {took} {dist}");
            }
        }
        let _ = writeln!(out, "{} {}", local_stamp(net, leg.to, leg.arr_utc), place(net, leg.to));
    }
    if let Some(last) = it.legs.last() {
        if last.to != r.to.id {
            let _ = writeln!(out, "\n{} {}", place(net, r.to.id), apart(net, last.to, r.to.id));
        }
    }
    out.push('\n');
}

/// Why nothing was found, from the schedule-free reachability check.
pub fn explain(r: &PlanReport) -> String {
    let tmax = u32::from(r.query.max_transfers);
    let Some(nr) = &r.no_route else {
        return "no trip found".into();
    };
    match nr.min_transfers {
        None => "the destination cannot be reached from the origin in this network".into(),
        Some(m) if m > tmax => {
            format!("the destination needs at least {m} transfers, more than the limit of {tmax}")
        }
        Some(_) => format!(
            "no trip of at most {} legs (one per hop between consecutive stops) departs within the {} window",
            tmax + 1,
            duration(r.stats.window_s)
        ),
    }
}
