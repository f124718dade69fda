//! Test-side oracles and fixtures. Nothing here calls into the search,
//! precompute or connectivity code; only the network data model is shared.

#![allow(dead_code)]

use std::collections::HashMap;

use bbtime::ingest::{add_walk_edges, generate_synthetic, GeneratorSpec, MultimodalConfig, Topology};
use bbtime::network::{cluster_stations, great_circle_m, HopId, Mode, Network, Schedule, StationId};
use bbtime::overlay::{Annotation, AnnotationKind};
use bbtime::search::{Itinerary, Query};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FAMILIES: [&str; 5] = ["line", "grid", "hub-and-spoke", "random-geometric", "air-ground"];

pub fn family(name: &str) -> Network {
    let mut spec = GeneratorSpec {
        headway_min_s: 900,
        headway_max_s: 2700,
        irregularity: 0.2,
        ..GeneratorSpec::default()
    };
    let (seed, walks, cluster) = match name {
        "line" => {
            spec.topology = Topology::Line;
            spec.stations = 14;
            (11, false, None)
        }
        "grid" => {
            spec.topology = Topology::Grid;
            spec.stations = 25;
            spec.spacing_m = 1200.0;
            (12, false, None)
        }
        "hub-and-spoke" => {
            spec.topology = Topology::HubAndSpoke;
            spec.stations = 21;
            (13, false, None)
        }
        "random-geometric" => {
            spec.topology = Topology::RandomGeometric;
            spec.stations = 40;
            (14, true, None)
        }
        "air-ground" => {
            spec.topology = Topology::AirGround;
            spec.stations = 60;
            spec.cities = 3;
            spec.spacing_m = 1500.0;
            (15, true, Some(250.0))
        }
        other => panic!("unknown family {other}"),
    };
    let mut net = generate_synthetic(&spec, seed).unwrap();
    if walks {
        net = add_walk_edges(net, &MultimodalConfig::default()).unwrap();
    }
    if let Some(r) = cluster {
        net = cluster_stations(net, r).unwrap();
    }
    net
}

/// Random query endpoints in distinct search nodes, earliest departure
/// somewhere in the first two days of the horizon.
pub fn random_queries(net: &Network, n: usize, seed: u64) -> Vec<Query> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h0, _) = net.horizon();
    let count = net.station_count() as u32;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let a = rng.gen_range(0..count);
        let b = rng.gen_range(0..count);
        if net.node_of(a) == net.node_of(b) {
            continue;
        }
        let t = h0 + rng.gen_range(0..2 * 86_400 / 60) * 60;
        out.push(Query::new(a, b, t));
    }
    out
}

// -- exhaustive trip oracle -------------------------------------------------

/// Effective event times after annotations: `None` means rejected.
pub type Adjust = HashMap<(HopId, u32), Option<(i64, i64)>>;

/// Active delay/cancel/seat annotations at `t`, resolved to event times.
pub fn adjust_from(net: &Network, anns: &[Annotation], t: i64) -> Adjust {
    let mut out = Adjust::new();
    for a in anns.iter().filter(|a| a.valid_from_utc <= t && t < a.valid_to_utc) {
        let list = net.hop(a.hop).departures().unwrap().decode();
        let (dep, dur) = list[a.ordinal as usize];
        let base = (dep, dep + i64::from(dur));
        let cur = out.entry((a.hop, a.ordinal)).or_insert(Some(base));
        match &a.kind {
            AnnotationKind::Delay { dep_delta_s, arr_delta_s } => {
                if cur.is_some() {
                    *cur = Some((base.0 + i64::from(*dep_delta_s), base.1 + i64::from(*arr_delta_s)));
                }
            }
            AnnotationKind::Cancelled | AnnotationKind::Seats { available: false } => *cur = None,
            _ => {}
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrip {
    pub cost: i64,
    pub hops: Vec<HopId>,
    pub depart: i64,
    pub arrive: i64,
}

pub struct Oracle<'a> {
    net: &'a Network,
    /// Outgoing hops per search node.
    out: Vec<Vec<HopId>>,
    /// Per hop, events as `(ordinal, dep, arr)` sorted by departure.
    events: Vec<Vec<(u32, i64, i64)>>,
}

fn walk_disp(net: &Network, a: StationId, b: StationId) -> (i64, u64) {
    if a == b {
        return (0, 0);
    }
    let m = great_circle_m(net.station(a).pos(), net.station(b).pos()) * 1.3;
    ((m / 1.34).ceil() as i64, m.round() as u64)
}

fn min_transfer(net: &Network, a: HopId, b: HopId) -> i64 {
    let (x, y) = (net.hop(a), net.hop(b));
    let timed = |h: &bbtime::network::Hop| matches!(h.schedule, Schedule::Timed(_));
    if !timed(y) {
        0
    } else if timed(x) && x.route == y.route && x.to == y.from {
        0
    } else if let Some(&s) = net.transfer_rules().station_override.get(&y.from) {
        i64::from(s)
    } else if x.mode == Mode::Plane || y.mode == Mode::Plane {
        i64::from(net.transfer_rules().air_s)
    } else {
        i64::from(net.transfer_rules().ground_s)
    }
}

impl<'a> Oracle<'a> {
    pub fn new(net: &'a Network) -> Self {
        let mut out = vec![Vec::new(); net.station_count()];
        let mut events = Vec::new();
        for h in net.hops() {
            out[net.node_of(h.from) as usize].push(h.id);
            events.push(match &h.schedule {
                Schedule::Timed(l) => l
                    .decode()
                    .into_iter()
                    .enumerate()
                    .map(|(i, (d, dur))| (i as u32, d, d + i64::from(dur)))
                    .collect(),
                Schedule::Fixed { .. } => Vec::new(),
            });
        }
        Self { net, out, events }
    }

    /// Cheapest trip over every simple path of at most `max_transfers + 1`
    /// legs whose traveller leaves the origin in `[e, e + window)`.
    pub fn best(&self, q: &Query, window: i64, adj: &Adjust) -> Option<OracleTrip> {
        let mut best: Option<OracleTrip> = None;
        let mut seen = vec![false; self.net.station_count()];
        let start = self.net.node_of(q.dep);
        seen[start as usize] = true;
        self.walk(q, window, adj, start, &mut seen, &mut Vec::new(), &mut best);
        best
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(&self, q: &Query, window: i64, adj: &Adjust, v: StationId, seen: &mut Vec<bool>, path: &mut Vec<HopId>, best: &mut Option<OracleTrip>) {
        let net = self.net;
        let target = net.node_of(q.arr);
        for &h in &self.out[v as usize] {
            let hop = net.hop(h);
            let w = net.node_of(hop.to);
            let mode_ok = match hop.mode {
                Mode::Plane => q.allow_air,
                Mode::Taxi => q.allow_taxi,
                _ => true,
            };
            if !mode_ok || w == v || seen[w as usize] {
                continue;
            }
            path.push(h);
            if w == target {
                if let Some(t) = self.evaluate(q, window, adj, path) {
                    if best.as_ref().is_none_or(|b| t.cost < b.cost) {
                        *best = Some(t);
                    }
                }
            } else if path.len() <= q.max_transfers as usize {
                seen[w as usize] = true;
                self.walk(q, window, adj, w, seen, path, best);
                seen[w as usize] = false;
            }
            path.pop();
        }
    }

    fn event(&self, adj: &Adjust, h: HopId, e: &(u32, i64, i64)) -> Option<(i64, i64)> {
        match adj.get(&(h, e.0)) {
            Some(x) => *x,
            None => Some((e.1, e.2)),
        }
    }

    /// Earliest arrival over all events of `h` leaving at or after `ready`.
    fn earliest_arrival(&self, adj: &Adjust, h: HopId, ready: i64) -> Option<i64> {
        self.events[h as usize]
            .iter()
            .filter_map(|e| self.event(adj, h, e))
            .filter(|&(d, _)| d >= ready)
            .map(|(_, a)| a)
            .min()
    }

    fn evaluate(&self, q: &Query, window: i64, adj: &Adjust, hops: &[HopId]) -> Option<OracleTrip> {
        let net = self.net;
        let w = &q.weights;
        let e = q.earliest_dep_utc;
        let mut walk_m = 0u64;
        let mut taxi_m = 0u64;
        let mut boardings = 0i64;
        let mut gaps = Vec::with_capacity(hops.len());
        for (i, &h) in hops.iter().enumerate() {
            let hop = net.hop(h);
            let (from_st, gap) = if i == 0 {
                (q.dep, 0)
            } else {
                (net.hop(hops[i - 1]).to, min_transfer(net, hops[i - 1], h))
            };
            let (ds, dm) = walk_disp(net, from_st, hop.from);
            walk_m += dm;
            gaps.push(ds + gap);
            match hop.mode {
                Mode::Walk => walk_m += u64::from(hop.route_distance_m),
                Mode::Taxi => {
                    taxi_m += u64::from(hop.route_distance_m);
                    boardings += 1;
                }
                _ => boardings += 1,
            }
        }
        let (tail_s, tail_m) = walk_disp(net, net.hop(*hops.last().unwrap()).to, q.arr);
        walk_m += tail_m;
        if walk_m > u64::from(q.max_walk_m) {
            return None;
        }
        let pen = (w.transfer_s * (boardings - 1).max(0) as f64 + w.walk_s_per_m * walk_m as f64 + w.taxi_s_per_km * taxi_m as f64 / 1000.0).round() as i64;
        let trip = |depart: i64, arrive: i64| OracleTrip {
            cost: arrive - depart + pen + (w.wait_initial * (depart - e) as f64).round() as i64,
            hops: hops.to_vec(),
            depart,
            arrive,
        };

        let first = hops.iter().position(|&h| net.hop(h).is_scheduled());
        let Some(k) = first else {
            let total: i64 = hops
                .iter()
                .zip(&gaps)
                .map(|(&h, g)| g + i64::from(net.hop(h).fixed_duration().unwrap()))
                .sum();
            return Some(trip(e, e + total + tail_s));
        };
        let lead: i64 = hops[..k]
            .iter()
            .zip(&gaps)
            .map(|(&h, g)| g + i64::from(net.hop(h).fixed_duration().unwrap()))
            .sum::<i64>()
            + gaps[k];
        let mut best: Option<OracleTrip> = None;
        for ev in &self.events[hops[k] as usize] {
            let Some((dep, arr)) = self.event(adj, hops[k], ev) else { continue };
            let depart = dep - lead;
            if depart < e || depart >= e + window {
                continue;
            }
            let mut ready = arr;
            let mut ok = true;
            for i in k + 1..hops.len() {
                let h = hops[i];
                ready += gaps[i];
                match net.hop(h).fixed_duration() {
                    Some(d) => ready += i64::from(d),
                    None => match self.earliest_arrival(adj, h, ready) {
                        Some(a) => ready = a,
                        None => {
                            ok = false;
                            break;
                        }
                    },
                }
            }
            if !ok {
                continue;
            }
            let t = trip(depart, ready + tail_s);
            if best.as_ref().is_none_or(|b| t.cost < b.cost) {
                best = Some(t);
            }
        }
        best
    }
}

/// Checks that an itinerary is a real trip for `q` and that its reported
/// cost follows from its legs. Returns a reason on failure.
pub fn check_feasible(net: &Network, q: &Query, adj: &Adjust, it: &Itinerary) -> Result<(), String> {
    let w = &q.weights;
    if it.legs.is_empty() {
        return Err("no legs".into());
    }
    if net.node_of(it.legs[0].from) != net.node_of(q.dep) || net.node_of(it.legs.last().unwrap().to) != net.node_of(q.arr) {
        return Err("endpoints do not match the query".into());
    }
    if it.depart_utc < q.earliest_dep_utc {
        return Err("departs before the earliest departure".into());
    }
    let mut nodes = vec![net.node_of(q.dep)];
    let mut ready = it.depart_utc;
    let mut walk_m = 0u64;
    let mut taxi_m = 0u64;
    let mut boardings = 0i64;
    for (i, leg) in it.legs.iter().enumerate() {
        let hop = net.hop(leg.hop);
        if hop.from != leg.from || hop.to != leg.to {
            return Err(format!("leg {i} endpoints differ from hop {}", leg.hop));
        }
        let n = net.node_of(hop.to);
        if nodes.contains(&n) || net.node_of(hop.from) != *nodes.last().unwrap() {
            return Err(format!("leg {i} breaks the simple path"));
        }
        nodes.push(n);
        let (from_st, gap) = if i == 0 {
            (q.dep, 0)
        } else {
            (it.legs[i - 1].to, min_transfer(net, it.legs[i - 1].hop, leg.hop))
        };
        let (ds, dm) = walk_disp(net, from_st, hop.from);
        walk_m += dm;
        ready += ds + gap;
        if leg.dep_utc < ready {
            return Err(format!("leg {i} departs at {} before ready time {ready}", leg.dep_utc));
        }
        match hop.fixed_duration() {
            Some(d) => {
                if leg.arr_utc != leg.dep_utc + i64::from(d) {
                    return Err(format!("leg {i} fixed duration mismatch"));
                }
                if i > 0 && leg.dep_utc != ready {
                    return Err(format!("leg {i} unscheduled but not started when ready"));
                }
            }
            None => {
                let ord = leg.ordinal.ok_or(format!("leg {i} has no ordinal"))?;
                let (d, dur) = *hop.departures().unwrap().decode().get(ord as usize).ok_or("bad ordinal")?;
                let times = match adj.get(&(leg.hop, ord)) {
                    Some(x) => *x,
                    None => Some((d, d + i64::from(dur))),
                };
                if times != Some((leg.dep_utc, leg.arr_utc)) {
                    return Err(format!("leg {i} times do not match event {ord}"));
                }
            }
        }
        match hop.mode {
            Mode::Walk => walk_m += u64::from(hop.route_distance_m),
            Mode::Taxi => {
                taxi_m += u64::from(hop.route_distance_m);
                boardings += 1;
            }
            _ => boardings += 1,
        }
        ready = leg.arr_utc;
    }
    let (tail_s, tail_m) = walk_disp(net, it.legs.last().unwrap().to, q.arr);
    walk_m += tail_m;
    if it.arrive_utc != ready + tail_s {
        return Err("arrival does not follow from the last leg".into());
    }
    if walk_m > u64::from(q.max_walk_m) || walk_m != it.total_walk_m {
        return Err(format!("walk {walk_m} m exceeds the limit or differs from the report"));
    }
    let pen = (w.transfer_s * (boardings - 1).max(0) as f64 + w.walk_s_per_m * walk_m as f64 + w.taxi_s_per_km * taxi_m as f64 / 1000.0).round() as i64;
    let cost = it.arrive_utc - it.depart_utc + pen + (w.wait_initial * (it.depart_utc - q.earliest_dep_utc) as f64).round() as i64;
    if cost != it.cost_s {
        return Err(format!("reported cost {} but legs give {cost}", it.cost_s));
    }
    Ok(())
}

// -- estimator oracle ---------------------------------------------------------

/// Earliest-feasible chaining from `t` over decoded lists, then the
/// outlier-trimmed average of the sample trip times.
pub fn estimator_oracle(net: &Network, legs: &[HopId], samples: &[i64], span: i64, floor: f64, frac: f64) -> Option<(u32, u32)> {
    let lists: Vec<Option<Vec<(i64, u32)>>> = legs.iter().map(|&h| net.hop(h).departures().map(|d| d.decode())).collect();
    let mut accu = Vec::new();
    for &t in samples {
        let limit = t + span;
        let mut ready = t;
        let mut board = None;
        let mut ok = true;
        for (i, &h) in legs.iter().enumerate() {
            if i > 0 {
                let (ds, _) = walk_disp(net, net.hop(legs[i - 1]).to, net.hop(h).from);
                ready += ds + min_transfer(net, legs[i - 1], h);
            }
            match &lists[i] {
                None => ready += i64::from(net.hop(h).fixed_duration().unwrap()),
                Some(list) => {
                    let mut found = None;
                    for &(d, dur) in list {
                        if d >= ready {
                            found = Some((d, dur));
                            break;
                        }
                    }
                    match found {
                        Some((d, dur)) if d < limit => {
                            if board.is_none() {
                                board = Some(d - (ready - t));
                            }
                            ready = d + i64::from(dur);
                        }
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
            }
        }
        if ok {
            accu.push(ready - board.unwrap_or(t));
        }
    }
    if accu.is_empty() {
        return None;
    }
    let avg = |xs: &[i64]| xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64;
    let avgtt = avg(&accu);
    let threshold = floor.max(frac * avgtt);
    let kept: Vec<i64> = accu.iter().copied().filter(|&x| (x as f64 - avgtt).abs() <= threshold).collect();
    let typ = if kept.is_empty() { avgtt } else { avg(&kept) };
    Some((typ.round() as u32, *accu.iter().min().unwrap() as u32))
}

// -- reachability oracle --------------------------------------------------------

/// All-pairs least boardings over a dense matrix: boarding a non-walk hop
/// costs one, walking and moving inside a cluster cost nothing. Relaxed
/// until nothing changes.
pub fn min_boardings_matrix(net: &Network) -> Vec<Vec<u32>> {
    let n = net.station_count();
    let inf = u32::MAX;
    let mut edge = vec![vec![inf; n]; n];
    for i in 0..n {
        edge[i][i] = 0;
    }
    for h in net.hops() {
        let c = u32::from(h.mode != Mode::Walk);
        let (a, b) = (h.from as usize, h.to as usize);
        edge[a][b] = edge[a][b].min(c);
    }
    for a in 0..n {
        for b in 0..n {
            if net.node_of(a as u32) == net.node_of(b as u32) {
                edge[a][b] = 0;
            }
        }
    }
    let mut dist = edge.clone();
    loop {
        let mut changed = false;
        for a in 0..n {
            for m in 0..n {
                let dm = dist[a][m];
                if dm == inf {
                    continue;
                }
                for b in 0..n {
                    let e = edge[m][b];
                    if e != inf && dm + e < dist[a][b] {
                        dist[a][b] = dm + e;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return dist;
        }
    }
}
