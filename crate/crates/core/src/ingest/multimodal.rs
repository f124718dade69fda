//! Unscheduled edges: walking between nearby stations and a restricted set
//! of taxi connections.

use std::collections::HashSet;

use crate::error::{invalid, Error, Result};
use crate::network::geo::GridIndex;
use crate::network::{great_circle_m, LatLon, Mode, Network, Schedule, StationId};

#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalConfig {
    pub max_walk_pair_m: f64,
    pub walk_speed_mps: f64,
    pub walk_detour_factor: f64,
    pub taxi_pairs: Vec<TaxiPair>,
    pub generated_taxi: Option<TaxiRules>,
}

impl Default for MultimodalConfig {
    fn default() -> Self {
        Self {
            max_walk_pair_m: 1500.0,
            walk_speed_mps: 1.34,
            walk_detour_factor: 1.3,
            taxi_pairs: Vec::new(),
            generated_taxi: None,
        }
    }
}

impl MultimodalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2000.0).contains(&self.max_walk_pair_m) {
            return invalid("max_walk_pair_m must be within 0..=2000");
        }
        if self.walk_speed_mps <= 0.0 {
            return invalid("walk speed must be positive");
        }
        if self.walk_detour_factor < 1.0 {
            return invalid("walk detour factor must be at least 1");
        }
        Ok(())
    }
}

/// Endpoint of an explicit taxi connection.
#[derive(Debug, Clone, PartialEq)]
pub enum TaxiEnd {
    Station(StationId),
    /// A location without public transport; becomes a new node.
    Location { name: String, pos: LatLon },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaxiPair {
    pub a: TaxiEnd,
    pub b: TaxiEnd,
    pub duration_s: u32,
    pub fare_estimate: f64,
}

/// Rules for generated taxi edges: airport pairs within `airport_radius_m`,
/// and a link from every isolated station to its nearest hub.
#[derive(Debug, Clone, PartialEq)]
pub struct TaxiRules {
    pub airport_radius_m: f64,
    pub hub_min_degree: usize,
    pub speed_mps: f64,
    pub detour_factor: f64,
}

impl Default for TaxiRules {
    fn default() -> Self {
        Self {
            airport_radius_m: 80_000.0,
            hub_min_degree: 4,
            speed_mps: 13.9,
            detour_factor: 1.3,
        }
    }
}

/// Adds a pair of walk hops for every station pair within
/// `max_walk_pair_m`, skipping directions that already have one.
pub fn add_walk_edges(net: Network, config: &MultimodalConfig) -> Result<Network> {
    config.validate()?;
    let pts: Vec<LatLon> = net.stations().iter().map(|s| s.pos()).collect();
    let existing: HashSet<(StationId, StationId)> = net
        .hops()
        .iter()
        .filter(|h| h.mode == Mode::Walk)
        .map(|h| (h.from, h.to))
        .collect();
    let grid = GridIndex::new(&pts, config.max_walk_pair_m);
    let pairs = grid.pairs_within(config.max_walk_pair_m);
    let mut b = net.into_builder();
    let walk = b.shared_route("walk", Mode::Walk);
    for (i, j) in pairs {
        let gc = great_circle_m(pts[i as usize], pts[j as usize]);
        let dist = gc * config.walk_detour_factor;
        let secs = ((dist / config.walk_speed_mps).round() as u32).max(1);
        let route_m = dist.round() as u32;
        for (from, to) in [(i, j), (j, i)] {
            if !existing.contains(&(from, to)) {
                b.add_hop(from, to, walk, Schedule::Fixed { duration_s: secs }, Some(route_m));
            }
        }
    }
    b.build()
}

fn resolve(b: &mut crate::network::NetworkBuilder, end: &TaxiEnd) -> Result<StationId> {
    match end {
        TaxiEnd::Station(s) => {
            if (*s as usize) < b.stations.len() {
                Ok(*s)
            } else {
                Err(Error::Validation(format!("taxi pair references unknown station {s}")))
            }
        }
        TaxiEnd::Location { name, pos } => {
            if !pos.is_valid() {
                return invalid(format!("taxi location {name} has invalid coordinates"));
            }
            let tz = nearest_tz(b, *pos);
            Ok(b.add_station(name.clone(), *pos, tz))
        }
    }
}

fn nearest_tz(b: &crate::network::NetworkBuilder, p: LatLon) -> u16 {
    b.stations
        .iter()
        .min_by(|x, y| {
            great_circle_m(p, x.pos())
                .partial_cmp(&great_circle_m(p, y.pos()))
                .unwrap()
        })
        .map_or(0, |s| s.tz)
}

/// Adds explicit and generated taxi hops (both directions).
pub fn add_taxi_edges(net: Network, config: &MultimodalConfig) -> Result<Network> {
    if config.taxi_pairs.is_empty() && config.generated_taxi.is_none() {
        return Ok(net);
    }
    let degree: Vec<usize> = (0..net.station_count() as u32).map(|s| net.degree(s)).collect();
    let airports: Vec<StationId> = (0..net.station_count() as u32)
        .filter(|&s| {
            net.out_hops(s)
                .iter()
                .chain(net.in_hops(s))
                .any(|&h| net.hop(h).mode == Mode::Plane)
        })
        .collect();
    let mut existing: HashSet<(StationId, StationId)> = net
        .hops()
        .iter()
        .filter(|h| h.mode == Mode::Taxi)
        .map(|h| (h.from, h.to))
        .collect();
    let mut b = net.into_builder();
    let taxi = b.shared_route("taxi", Mode::Taxi);

    let mut add = |b: &mut crate::network::NetworkBuilder, a: StationId, c: StationId, secs: u32, fare: f64, dist: Option<u32>| {
        for (from, to) in [(a, c), (c, a)] {
            if from != to && existing.insert((from, to)) {
                let h = b.add_hop(from, to, taxi, Schedule::Fixed { duration_s: secs.max(1) }, dist);
                b.hops[h as usize].fare_estimate = Some(fare);
            }
        }
    };

    for p in &config.taxi_pairs {
        let a = resolve(&mut b, &p.a)?;
        let c = resolve(&mut b, &p.b)?;
        if a == c {
            return invalid("taxi pair joins a station to itself");
        }
        let gc = great_circle_m(b.station_pos(a), b.station_pos(c));
        add(&mut b, a, c, p.duration_s, p.fare_estimate, Some((gc * 1.3).round() as u32));
    }

    if let Some(rules) = &config.generated_taxi {
        let road = |b: &crate::network::NetworkBuilder, a: StationId, c: StationId| {
            let m = great_circle_m(b.station_pos(a), b.station_pos(c)) * rules.detour_factor;
            ((m / rules.speed_mps).round() as u32, m / 1000.0, m.round() as u32)
        };
        for (i, &a) in airports.iter().enumerate() {
            for &c in &airports[i + 1..] {
                if great_circle_m(b.station_pos(a), b.station_pos(c)) <= rules.airport_radius_m {
                    let (secs, km, m) = road(&b, a, c);
                    add(&mut b, a, c, secs, km, Some(m));
                }
            }
        }
        let pts: Vec<LatLon> = b.stations[..degree.len()].iter().map(|s| s.pos()).collect();
        let grid = GridIndex::new(&pts, 1000.0);
        for s in 0..degree.len() as u32 {
            if degree[s as usize] != 0 {
                continue;
            }
            let hub = grid
                .nearest_by(pts[s as usize], |i| i != s && degree[i as usize] >= rules.hub_min_degree)
                .or_else(|| grid.nearest_by(pts[s as usize], |i| i != s && degree[i as usize] > 0));
            if let Some(h) = hub {
                let (secs, km, m) = road(&b, s, h);
                add(&mut b, s, h, secs, km, Some(m));
            }
        }
    }
    b.build()
}
