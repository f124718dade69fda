//! Deterministic synthetic networks used as test substrate and for
//! benchmarking.

use std::collections::BTreeSet;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::connectivity::profile_search;
use crate::error::{invalid, Error, Result};
use crate::network::geo::offset_m;
use crate::network::{
    great_circle_m, DepartureList, LatLon, Mode, Network, NetworkBuilder, Schedule, StationId,
    UtcOffsets,
};

const DAY: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Line,
    Grid,
    HubAndSpoke,
    RandomGeometric,
    /// Dense neighbourhoods served by several overlapping lines, joined by
    /// a ring of trunk trains.
    Clustered,
    /// Random-geometric cities joined by flights.
    AirGround,
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "line" => Topology::Line,
            "grid" => Topology::Grid,
            "hub-and-spoke" => Topology::HubAndSpoke,
            "random-geometric" => Topology::RandomGeometric,
            "clustered" => Topology::Clustered,
            "air-ground" => Topology::AirGround,
            other => return invalid(format!("unknown topology {other}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub stations: usize,
    pub topology: Topology,
    pub spacing_m: f64,
    pub headway_min_s: u32,
    pub headway_max_s: u32,
    /// Probability that a trip's departure is jittered off its timetable slot.
    pub irregularity: f64,
    pub horizon_days: u32,
    pub start_utc: i64,
    pub speed_mps: f64,
    pub origin: LatLon,
    pub utc_offset_s: i32,
    pub cities: usize,
    pub flights_min: u32,
    pub flights_max: u32,
    pub clusters: usize,
    pub routes_per_cluster: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            stations: 50,
            topology: Topology::RandomGeometric,
            spacing_m: 800.0,
            headway_min_s: 1800,
            headway_max_s: 3600,
            irregularity: 0.0,
            horizon_days: 3,
            start_utc: 1_704_067_200,
            speed_mps: 10.0,
            origin: LatLon::new(45.0, 7.0),
            utc_offset_s: 0,
            cities: 4,
            flights_min: 1,
            flights_max: 3,
            clusters: 10,
            routes_per_cluster: 3,
        }
    }
}

impl GeneratorSpec {
    /// Parses `key = value` lines; `#` starts a comment. Unknown keys are
    /// rejected. Returns the spec and an optional `seed` key.
    pub fn parse(text: &str) -> Result<(Self, Option<u64>)> {
        let mut spec = Self::default();
        let mut seed = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return invalid(format!("line {}: expected key = value", n + 1));
            };
            let (k, v) = (k.trim(), v.trim());
            let bad = |_: std::num::ParseIntError| Error::Validation(format!("line {}: bad value for {k}", n + 1));
            let badf = |_: std::num::ParseFloatError| Error::Validation(format!("line {}: bad value for {k}", n + 1));
            match k {
                "stations" => spec.stations = v.parse().map_err(bad)?,
                "topology" => spec.topology = v.parse()?,
                "spacing_m" => spec.spacing_m = v.parse().map_err(badf)?,
                "headway_min_s" => spec.headway_min_s = v.parse().map_err(bad)?,
                "headway_max_s" => spec.headway_max_s = v.parse().map_err(bad)?,
                "irregularity" => spec.irregularity = v.parse().map_err(badf)?,
                "horizon_days" => spec.horizon_days = v.parse().map_err(bad)?,
                "start_utc" => spec.start_utc = v.parse().map_err(bad)?,
                "speed_mps" => spec.speed_mps = v.parse().map_err(badf)?,
                "origin_lat" => spec.origin.lat = v.parse().map_err(badf)?,
                "origin_lon" => spec.origin.lon = v.parse().map_err(badf)?,
                "utc_offset_s" => spec.utc_offset_s = v.parse().map_err(bad)?,
                "cities" => spec.cities = v.parse().map_err(bad)?,
                "flights_min" => spec.flights_min = v.parse().map_err(bad)?,
                "flights_max" => spec.flights_max = v.parse().map_err(bad)?,
                "clusters" => spec.clusters = v.parse().map_err(bad)?,
                "routes_per_cluster" => spec.routes_per_cluster = v.parse().map_err(bad)?,
                "seed" => seed = Some(v.parse().map_err(bad)?),
                _ => return invalid(format!("line {}: unknown key {k}", n + 1)),
            }
        }
        Ok((spec, seed))
    }

    fn validate(&self) -> Result<()> {
        if self.stations == 0 {
            return invalid("generator needs at least one station");
        }
        if self.horizon_days == 0 {
            return invalid("horizon must be at least one day");
        }
        if self.headway_min_s < 60 || self.headway_max_s < self.headway_min_s {
            return invalid("headways must satisfy 60 <= min <= max");
        }
        if !(0.0..=1.0).contains(&self.irregularity) {
            return invalid("irregularity must be within 0..=1");
        }
        if self.speed_mps <= 0.0 || self.spacing_m <= 0.0 {
            return invalid("speed and spacing must be positive");
        }
        if !self.origin.is_valid() {
            return invalid("origin has invalid coordinates");
        }
        match self.topology {
            Topology::AirGround if self.cities < 2 || self.stations < 2 * self.cities => {
                invalid("air-ground needs >= 2 cities and >= 2 stations per city")
            }
            Topology::Clustered if self.clusters == 0 || self.stations < self.clusters => {
                invalid("clustered topology needs at least one station per cluster")
            }
            Topology::AirGround if self.flights_min == 0 || self.flights_max < self.flights_min => {
                invalid("flights per day must satisfy 1 <= min <= max")
            }
            _ => Ok(()),
        }
    }
}

struct Gen<'a> {
    spec: &'a GeneratorSpec,
    rng: ChaCha8Rng,
    b: NetworkBuilder,
}

impl Gen<'_> {
    fn headway(&mut self) -> u32 {
        let (lo, hi) = (self.spec.headway_min_s / 60, self.spec.headway_max_s / 60);
        self.rng.gen_range(lo..=hi) * 60
    }

    /// Adds a route serving `stops` in order with the given headway, and
    /// returns nothing; one hop per consecutive stop pair.
    fn service(&mut self, name: String, mode: Mode, stops: &[StationId], headway: u32, run_time: &dyn Fn(f64) -> u32) {
        let route = self.b.add_route(name, "Synthetic", mode);
        let span = i64::from(self.spec.horizon_days) * DAY;
        let t0 = self.spec.start_utc;
        let h = i64::from(headway);
        let first = i64::from(self.rng.gen_range(0..headway / 60)) * 60;

        let mut starts: Vec<i64> = Vec::new();
        let mut jittered: Vec<bool> = Vec::new();
        let mut t = first;
        while t < span {
            let j = self.spec.irregularity > 0.0 && self.rng.gen_bool(self.spec.irregularity);
            let s = if j {
                let amp = (h / 3).max(1);
                t + self.rng.gen_range(-amp..=amp)
            } else {
                t
            };
            starts.push(s.clamp(0, span - 1));
            jittered.push(j);
            t += h;
        }
        for i in 1..starts.len() {
            if starts[i] <= starts[i - 1] {
                starts[i] = starts[i - 1] + 1;
            }
            if i >= 2 && jittered[i] && starts[i] - starts[i - 1] == starts[i - 1] - starts[i - 2] {
                starts[i] += 1;
            }
        }
        starts.retain(|&s| s < span);

        let mut offset = 0i64;
        for w in stops.windows(2) {
            let d = great_circle_m(self.b.station_pos(w[0]), self.b.station_pos(w[1]));
            let run = run_time(d);
            let events: Vec<(i64, u32)> = starts.iter().map(|s| (t0 + s + offset, run)).collect();
            let list = DepartureList::encode(&events).expect("ascending by construction");
            self.b.add_hop(w[0], w[1], route, Schedule::Timed(list), None);
            offset += i64::from(run);
        }
    }

    fn ground_run(speed: f64) -> impl Fn(f64) -> u32 {
        move |d| (((d / speed) / 60.0).round() as u32).max(1) * 60
    }

    /// Both directions of a stop sequence as separate routes.
    fn bidirectional(&mut self, name: &str, mode: Mode, stops: &[StationId]) {
        let headway = self.headway();
        let speed = if mode == Mode::Train {
            self.spec.speed_mps * 2.0
        } else {
            self.spec.speed_mps
        };
        let run = Self::ground_run(speed);
        self.service(name.to_string(), mode, stops, headway, &run);
        let rev: Vec<StationId> = stops.iter().rev().copied().collect();
        self.service(format!("{name}r"), mode, &rev, headway, &run);
    }

    fn random_points(&mut self, n: usize, center: LatLon, spacing: f64) -> Vec<LatLon> {
        let side = spacing * (n as f64).sqrt();
        (0..n)
            .map(|_| {
                let x = self.rng.gen_range(-side / 2.0..side / 2.0);
                let y = self.rng.gen_range(-side / 2.0..side / 2.0);
                offset_m(center, x, y)
            })
            .collect()
    }

    /// Links each station to its two nearest neighbours, then joins
    /// components by their closest pair. Returns undirected edges.
    fn geometric_edges(&self, ids: &[StationId]) -> Vec<(StationId, StationId)> {
        let pos = |s: StationId| self.b.station_pos(s);
        let mut edges: BTreeSet<(StationId, StationId)> = BTreeSet::new();
        for &a in ids {
            let mut near: Vec<(f64, StationId)> = ids
                .iter()
                .filter(|&&c| c != a)
                .map(|&c| (great_circle_m(pos(a), pos(c)), c))
                .collect();
            near.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for &(_, c) in near.iter().take(2) {
                edges.insert((a.min(c), a.max(c)));
            }
        }
        let mut comp: Vec<usize> = (0..ids.len()).collect();
        let idx = |s: StationId| ids.iter().position(|&x| x == s).unwrap();
        let root = |comp: &mut Vec<usize>, mut x: usize| {
            while comp[x] != x {
                comp[x] = comp[comp[x]];
                x = comp[x];
            }
            x
        };
        for &(a, c) in &edges {
            let (ra, rc) = (root(&mut comp, idx(a)), root(&mut comp, idx(c)));
            comp[ra.max(rc)] = ra.min(rc);
        }
        loop {
            let r0 = root(&mut comp, 0);
            let mut best: Option<(f64, StationId, StationId)> = None;
            for i in 0..ids.len() {
                if root(&mut comp, i) != r0 {
                    continue;
                }
                for j in 0..ids.len() {
                    if root(&mut comp, j) == r0 {
                        continue;
                    }
                    let d = great_circle_m(pos(ids[i]), pos(ids[j]));
                    if best.is_none_or(|b| d < b.0) {
                        best = Some((d, ids[i], ids[j]));
                    }
                }
            }
            let Some((_, a, c)) = best else { break };
            edges.insert((a.min(c), a.max(c)));
            let (ra, rc) = (root(&mut comp, idx(a)), root(&mut comp, idx(c)));
            comp[ra.max(rc)] = ra.min(rc);
        }
        edges.into_iter().collect()
    }
}

/// Builds a synthetic network. Identical `(spec, seed)` give identical
/// networks.
pub fn generate_synthetic(spec: &GeneratorSpec, seed: u64) -> Result<Network> {
    spec.validate()?;
    let horizon = (
        spec.start_utc,
        spec.start_utc + i64::from(spec.horizon_days + 1) * DAY,
    );
    let mut g = Gen {
        spec,
        rng: ChaCha8Rng::seed_from_u64(seed),
        b: NetworkBuilder::new(horizon),
    };
    let tz = g.b.add_timezone(UtcOffsets::fixed(spec.utc_offset_s));
    let n = spec.stations;
    let o = spec.origin;
    let s = spec.spacing_m;

    match spec.topology {
        Topology::Line => {
            let ids: Vec<StationId> = (0..n)
                .map(|i| g.b.add_station(format!("L{i}"), offset_m(o, i as f64 * s, 0.0), tz))
                .collect();
            if n > 1 {
                g.bidirectional("L", Mode::Bus, &ids);
            }
        }
        Topology::Grid => {
            let side = (n as f64).sqrt().ceil() as usize;
            let ids: Vec<StationId> = (0..n)
                .map(|i| {
                    let (r, c) = (i / side, i % side);
                    g.b.add_station(format!("G{r}.{c}"), offset_m(o, c as f64 * s, r as f64 * s), tz)
                })
                .collect();
            for r in 0..side {
                let row: Vec<StationId> = ids.iter().copied().skip(r * side).take(side).collect();
                if row.len() > 1 {
                    g.bidirectional(&format!("R{r}"), Mode::Bus, &row);
                }
            }
            for c in 0..side {
                let col: Vec<StationId> = ids.iter().copied().skip(c).step_by(side).collect();
                if col.len() > 1 {
                    g.bidirectional(&format!("C{c}"), Mode::Train, &col);
                }
            }
        }
        Topology::HubAndSpoke => {
            let hub = g.b.add_station("Hub", o, tz);
            let spokes = ((n - 1) / 4).max(3).min(n.saturating_sub(1).max(1));
            let mut arms: Vec<Vec<StationId>> = vec![vec![hub]; spokes];
            for i in 1..n {
                let arm = (i - 1) % spokes;
                let k = arms[arm].len() as f64;
                let ang = arm as f64 / spokes as f64 * std::f64::consts::TAU;
                let p = offset_m(o, ang.cos() * k * s, ang.sin() * k * s);
                let id = g.b.add_station(format!("S{arm}.{}", k as usize), p, tz);
                arms[arm].push(id);
            }
            for (a, arm) in arms.iter().enumerate() {
                if arm.len() > 1 {
                    g.bidirectional(&format!("S{a}"), Mode::Bus, arm);
                }
            }
        }
        Topology::RandomGeometric => {
            let pts = g.random_points(n, o, s);
            let ids: Vec<StationId> = pts
                .iter()
                .enumerate()
                .map(|(i, p)| g.b.add_station(format!("R{i}"), *p, tz))
                .collect();
            for (k, (a, c)) in g.geometric_edges(&ids).into_iter().enumerate() {
                let mode = if k % 3 == 0 { Mode::Train } else { Mode::Bus };
                g.bidirectional(&format!("E{k}"), mode, &[a, c]);
            }
        }
        Topology::Clustered => {
            let k = spec.clusters;
            let per = n / k;
            let mut hubs = Vec::new();
            for c in 0..k {
                let ang = c as f64 / k as f64 * std::f64::consts::TAU;
                let ring = s * 12.0 * k as f64 / std::f64::consts::TAU;
                let center = offset_m(o, ang.cos() * ring, ang.sin() * ring);
                let count = if c == k - 1 { n - per * (k - 1) } else { per };
                let cols = count.div_ceil(2);
                let ids: Vec<StationId> = (0..count)
                    .map(|i| {
                        let (r, col) = (i / cols, i % cols);
                        let p = offset_m(center, col as f64 * s, r as f64 * s);
                        g.b.add_station(format!("N{c}.{i}"), p, tz)
                    })
                    .collect();
                hubs.push(ids[0]);
                for r in 0..spec.routes_per_cluster {
                    let mut order = ids.clone();
                    let keep = (count * 2 / 3).max(2).min(count);
                    for i in (1..order.len()).rev() {
                        let j = g.rng.gen_range(0..=i);
                        order.swap(i, j);
                    }
                    order.truncate(keep);
                    if !order.contains(&ids[0]) {
                        order[0] = ids[0];
                    }
                    if order.len() > 1 {
                        g.bidirectional(&format!("N{c}.{r}"), Mode::Bus, &order);
                    }
                }
                // Every stop must be served.
                let mut line = ids.clone();
                line.sort_by(|a, c| {
                    let (pa, pc) = (g.b.station_pos(*a), g.b.station_pos(*c));
                    (pa.lon, pa.lat).partial_cmp(&(pc.lon, pc.lat)).unwrap()
                });
                if line.len() > 1 {
                    g.bidirectional(&format!("N{c}.L"), Mode::Bus, &line);
                }
            }
            if k > 1 {
                let mut ring = hubs.clone();
                if k > 2 {
                    ring.push(hubs[0]);
                }
                for w in ring.windows(2).enumerate() {
                    g.bidirectional(&format!("K{}", w.0), Mode::Train, w.1);
                }
            }
        }
        Topology::AirGround => {
            let cities = spec.cities;
            let per = n / cities;
            let radius = 400_000.0;
            let mut airports = Vec::new();
            for c in 0..cities {
                let ang = c as f64 / cities as f64 * std::f64::consts::TAU;
                let center = offset_m(o, ang.cos() * radius, ang.sin() * radius);
                let ctz = g.b.add_timezone(UtcOffsets::fixed(spec.utc_offset_s + (c % 2) as i32 * 3600));
                let count = if c == cities - 1 { n - per * (cities - 1) } else { per };
                let airport = g.b.add_station(format!("Airport {c}"), offset_m(center, 8000.0, 0.0), ctz);
                let pts = g.random_points(count - 1, center, s);
                let mut ids = vec![airport];
                for (i, p) in pts.iter().enumerate() {
                    ids.push(g.b.add_station(format!("C{c}.{i}"), *p, ctz));
                }
                for (k, (a, b2)) in g.geometric_edges(&ids).into_iter().enumerate() {
                    let mode = if a == airport || b2 == airport { Mode::Train } else { Mode::Bus };
                    g.bidirectional(&format!("C{c}E{k}"), mode, &[a, b2]);
                }
                airports.push(airport);
            }
            let mut flight = 100;
            for i in 0..cities {
                for j in 0..cities {
                    if i == j {
                        continue;
                    }
                    let per_day = g.rng.gen_range(spec.flights_min..=spec.flights_max);
                    for _ in 0..per_day {
                        let d = great_circle_m(g.b.station_pos(airports[i]), g.b.station_pos(airports[j]));
                        let run = move |_: f64| (((d / 220.0 + 1800.0) / 300.0).round() as u32) * 300;
                        g.service(format!("F{flight}"), Mode::Plane, &[airports[i], airports[j]], 86_400, &run);
                        flight += 1;
                    }
                }
            }
        }
    }

    let net = g.b.build()?;
    if net.station_count() > 1 && profile_search(&net, 0).reachable_count + 1 != net.station_count() {
        return invalid("generated network is not connected");
    }
    Ok(net)
}
