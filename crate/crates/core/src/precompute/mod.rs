//! Per-transfer-count triplet matrices.
//!
//! For each `T` in `0..=2` a sparse map `(dep node, arr node)` holds a short
//! list of hop sequences with `T + 1` legs, sorted by their typical
//! end-to-end time. `T = 0` lists the direct hops; `T = 1` is enumerated
//! by composing hops at a via node; `T = 2` extends the stored `T = 1`
//! lists by one more hop.

pub mod estimator;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::format::{triplet_tag, Container, Reader, Writer};
use crate::network::{HopId, Mode, Network, StationId};
use crate::par::{self, Parallelism};
use crate::search::gate::GeoGate;

pub use estimator::{estimate_typical_time, min_trip_time, Estimate, Estimator, EstimatorConfig};

pub const MAX_T: u8 = 2;
pub const N_MIN: usize = 4;
pub const N_MAX: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triplet {
    pub hops: Vec<HopId>,
    pub typical_s: u32,
    pub min_s: u32,
    pub route_m: u64,
}

impl Triplet {
    /// Intermediate nodes, in order.
    pub fn via(&self, net: &Network) -> Vec<StationId> {
        self.hops[..self.hops.len() - 1]
            .iter()
            .map(|&h| net.node_of(net.hop(h).to))
            .collect()
    }

    pub fn transfers(&self) -> usize {
        self.hops.len() - 1
    }

    fn sort_key(&self) -> (u32, u64, &[HopId]) {
        (self.typical_s, self.route_m, &self.hops)
    }
}

pub type Pair = (StationId, StationId);

/// One sparse matrix.
pub type Level = BTreeMap<Pair, Vec<Triplet>>;

#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputeConfig {
    pub estimator: EstimatorConfig,
    /// `None` disables geo-ratio pre-filtering.
    pub geo_gate: Option<GeoGate>,
    pub max_t: u8,
    pub parallelism: Parallelism,
}

impl Default for PrecomputeConfig {
    fn default() -> Self {
        Self {
            estimator: EstimatorConfig::default(),
            geo_gate: Some(GeoGate::default()),
            max_t: MAX_T,
            parallelism: Parallelism::Auto,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripletStore {
    levels: Vec<Level>,
    /// Seed and sample count the store was built with.
    pub seed: u64,
    pub sample_count: u32,
}

impl TripletStore {
    pub fn max_t(&self) -> Option<u8> {
        self.levels.len().checked_sub(1).map(|t| t as u8)
    }

    pub fn has_level(&self, t: u8) -> bool {
        (t as usize) < self.levels.len()
    }

    pub fn level(&self, t: u8) -> Option<&Level> {
        self.levels.get(t as usize)
    }

    pub fn get(&self, t: u8, dep: StationId, arr: StationId) -> &[Triplet] {
        self.level(t)
            .and_then(|l| l.get(&(dep, arr)))
            .map_or(&[], |v| v.as_slice())
    }

    /// All entries leaving node `dep` at level `t`.
    pub fn row(&self, t: u8, dep: StationId) -> impl Iterator<Item = (StationId, &[Triplet])> + '_ {
        self.level(t)
            .into_iter()
            .flat_map(move |l| l.range((dep, 0)..=(dep, StationId::MAX)))
            .map(|(&(_, a), v)| (a, v.as_slice()))
    }

    pub fn pair_count(&self, t: u8) -> usize {
        self.level(t).map_or(0, |l| l.len())
    }

    pub fn triplet_count(&self, t: u8) -> usize {
        self.level(t).map_or(0, |l| l.values().map(Vec::len).sum())
    }

    pub fn level_to_bytes(&self, t: u8) -> Vec<u8> {
        let mut w = Writer::new();
        w.u64(self.seed);
        w.u32(self.sample_count);
        let level = &self.levels[t as usize];
        w.u32(level.len() as u32);
        for (&(d, a), list) in level {
            w.u32(d);
            w.u32(a);
            w.u16(list.len() as u16);
            for tr in list {
                w.u8(tr.hops.len() as u8);
                for &h in &tr.hops {
                    w.u32(h);
                }
                w.u32(tr.typical_s);
                w.u32(tr.min_s);
                w.u64(tr.route_m);
            }
        }
        w.0
    }

    fn level_from_bytes(bytes: &[u8]) -> Result<(u64, u32, Level)> {
        let mut r = Reader::new(bytes);
        let seed = r.u64()?;
        let samples = r.u32()?;
        let mut level = Level::new();
        for _ in 0..r.u32()? {
            let key = (r.u32()?, r.u32()?);
            let n = r.u16()?;
            let mut list = Vec::with_capacity(n as usize);
            for _ in 0..n {
                let k = r.u8()?;
                let hops = (0..k).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
                list.push(Triplet {
                    hops,
                    typical_s: r.u32()?,
                    min_s: r.u32()?,
                    route_m: r.u64()?,
                });
            }
            level.insert(key, list);
        }
        if !r.is_done() {
            return Err(Error::Format("trailing bytes in triplet section".into()));
        }
        Ok((seed, samples, level))
    }

    /// Writes one section per level, removing stale higher levels.
    pub fn write_to(&self, c: &mut Container) {
        for t in 0..=MAX_T {
            if self.has_level(t) {
                c.set(triplet_tag(t), self.level_to_bytes(t));
            } else {
                c.remove(triplet_tag(t));
            }
        }
    }

    /// Reads levels `0..` until the first missing section. An empty store
    /// means the file was never precomputed.
    pub fn read_from(c: &Container, net: &Network) -> Result<Self> {
        let mut store = TripletStore::default();
        for t in 0..=MAX_T {
            let Some(bytes) = c.get(triplet_tag(t)) else { break };
            let (seed, samples, level) = Self::level_from_bytes(bytes)?;
            for (&(d, a), list) in &level {
                for tr in list {
                    if tr.hops.len() != t as usize + 1 || tr.hops.iter().any(|&h| h as usize >= net.hops().len()) {
                        return Err(Error::Format(format!("bad triplet for pair ({d}, {a}) at T={t}")));
                    }
                }
            }
            store.seed = seed;
            store.sample_count = samples;
            store.levels.push(level);
        }
        Ok(store)
    }
}

/// Node-level hop degree, used to size per-pair lists.
pub fn node_degree(net: &Network, n: StationId) -> usize {
    net.node_out(n).len() + net.node_in(n).len()
}

/// `clamp(4 + floor(log2(max degree)), 4, 16)` over the two endpoints.
pub fn list_capacity(net: &Network, dep: StationId, arr: StationId) -> usize {
    let deg = node_degree(net, dep).max(node_degree(net, arr)).max(1);
    (N_MIN + deg.ilog2() as usize).clamp(N_MIN, N_MAX)
}

/// Minimum connection seconds for every in/out hop pair meeting at a node.
pub fn min_transfer_pair_table(net: &Network) -> BTreeMap<(HopId, HopId), u32> {
    let mut out = BTreeMap::new();
    for n in search_nodes(net) {
        for &hi in net.node_in(n) {
            for &ho in net.node_out(n) {
                out.insert((hi, ho), net.connection_gap(hi, ho));
            }
        }
    }
    out
}

/// Cluster representatives (every station when unclustered).
pub fn search_nodes(net: &Network) -> Vec<StationId> {
    (0..net.station_count() as StationId)
        .filter(|&s| net.node_of(s) == s)
        .collect()
}

fn node_distance(net: &Network, a: StationId, b: StationId) -> f64 {
    crate::network::geo::great_circle_m(net.station(a).pos(), net.station(b).pos())
}

struct Ctx<'a> {
    net: &'a Network,
    est: &'a Estimator,
    gate: Option<GeoGate>,
}

impl Ctx<'_> {
    fn candidate(&self, dep: StationId, arr: StationId, hops: Vec<HopId>) -> Option<Triplet> {
        let route_m: u64 = hops.iter().map(|&h| u64::from(self.net.hop(h).route_distance_m)).sum();
        if let Some(g) = &self.gate {
            let air = hops.iter().any(|&h| self.net.hop(h).mode == Mode::Plane);
            if !g.keep(air, route_m as f64, node_distance(self.net, dep, arr)) {
                return None;
            }
        }
        let e = self.est.estimate_unchecked(self.net, &hops)?;
        Some(Triplet {
            hops,
            typical_s: e.typical_s,
            min_s: e.min_s,
            route_m,
        })
    }

    fn finish_row(&self, dep: StationId, row: BTreeMap<StationId, Vec<Triplet>>, cap: Option<usize>) -> Vec<(Pair, Vec<Triplet>)> {
        row.into_iter()
            .map(|(arr, mut list)| {
                list.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
                list.dedup_by(|a, b| a.hops == b.hops);
                list.truncate(cap.unwrap_or_else(|| list_capacity(self.net, dep, arr)));
                ((dep, arr), list)
            })
            .collect()
    }
}

fn collect_rows(rows: Vec<Vec<(Pair, Vec<Triplet>)>>) -> Level {
    rows.into_iter().flatten().filter(|(_, l)| !l.is_empty()).collect()
}

/// `T = 0`: one entry per direct hop between distinct nodes, capped at
/// `N_MAX` per pair.
pub fn build_direct_matrix(net: &Network, est: &Estimator, mode: Parallelism) -> Level {
    let ctx = Ctx { net, est, gate: None };
    let nodes = search_nodes(net);
    collect_rows(par::map_collect(mode, &nodes, |&d| {
        let mut row: BTreeMap<StationId, Vec<Triplet>> = BTreeMap::new();
        for &h in net.node_out(d) {
            let a = net.node_of(net.hop(h).to);
            if a == d {
                continue;
            }
            if let Some(t) = ctx.candidate(d, a, vec![h]) {
                row.entry(a).or_default().push(t);
            }
        }
        ctx.finish_row(d, row, Some(N_MAX))
    }))
}

/// `T = 1` by composing hops at a via node, or `T = 2` by extending the
/// stored `T = 1` lists with one more hop. Only simple node paths are
/// enumerated.
pub fn build_triplets(net: &Network, t: u8, est: &Estimator, gate: Option<GeoGate>, prev: Option<&Level>, mode: Parallelism) -> Result<Level> {
    let ctx = Ctx { net, est, gate };
    let nodes = search_nodes(net);
    let level = match t {
        1 => collect_rows(par::map_collect(mode, &nodes, |&d| {
            let mut row: BTreeMap<StationId, Vec<Triplet>> = BTreeMap::new();
            for &h1 in net.node_out(d) {
                let v = net.node_of(net.hop(h1).to);
                if v == d {
                    continue;
                }
                for &h2 in net.node_out(v) {
                    let a = net.node_of(net.hop(h2).to);
                    if a == d || a == v {
                        continue;
                    }
                    if let Some(tr) = ctx.candidate(d, a, vec![h1, h2]) {
                        row.entry(a).or_default().push(tr);
                    }
                }
            }
            ctx.finish_row(d, row, None)
        })),
        2 => {
            let prev = prev.ok_or_else(|| Error::Contract("T=2 needs the T=1 level".into()))?;
            collect_rows(par::map_collect(mode, &nodes, |&d| {
                let mut row: BTreeMap<StationId, Vec<Triplet>> = BTreeMap::new();
                let mut seen = HashSet::new();
                for (&(_, v2), list) in prev.range((d, 0)..=(d, StationId::MAX)) {
                    for base in list {
                        let v1 = net.node_of(net.hop(base.hops[0]).to);
                        for &h3 in net.node_out(v2) {
                            let a = net.node_of(net.hop(h3).to);
                            if a == d || a == v1 || a == v2 {
                                continue;
                            }
                            let hops = vec![base.hops[0], base.hops[1], h3];
                            if !seen.insert(hops.clone()) {
                                continue;
                            }
                            if let Some(tr) = ctx.candidate(d, a, hops) {
                                row.entry(a).or_default().push(tr);
                            }
                        }
                    }
                }
                ctx.finish_row(d, row, None)
            }))
        }
        _ => return Err(Error::Validation(format!("triplets are built for T=1 or T=2, not {t}"))),
    };
    Ok(level)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub t: u8,
    pub pairs: usize,
    pub triplets: usize,
    pub wall_ms: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputeReport {
    pub stations: usize,
    pub nodes: usize,
    pub levels: Vec<LevelReport>,
}

impl fmt::Display for PrecomputeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} stations, {} search nodes", self.stations, self.nodes)?;
        for l in &self.levels {
            writeln!(f, "T={}: {} triplets for {} pairs in {} ms", l.t, l.triplets, l.pairs, l.wall_ms)?;
        }
        Ok(())
    }
}

/// Builds levels `0..=config.max_t`.
pub fn precompute(net: &Network, config: &PrecomputeConfig) -> Result<(TripletStore, PrecomputeReport)> {
    if config.max_t > MAX_T {
        return Err(Error::Validation(format!("triplets are stored up to T={MAX_T}")));
    }
    let est = Estimator::new(net, config.estimator.clone())?;
    let mut store = TripletStore {
        levels: Vec::new(),
        seed: config.estimator.seed,
        sample_count: config.estimator.sample_count,
    };
    let mut report = PrecomputeReport {
        stations: net.station_count(),
        nodes: search_nodes(net).len(),
        levels: Vec::new(),
    };
    for t in 0..=config.max_t {
        let start = Instant::now();
        let level = if t == 0 {
            build_direct_matrix(net, &est, config.parallelism)
        } else {
            build_triplets(net, t, &est, config.geo_gate, store.levels.last(), config.parallelism)?
        };
        store.levels.push(level);
        report.levels.push(LevelReport {
            t,
            pairs: store.pair_count(t),
            triplets: store.triplet_count(t),
            wall_ms: start.elapsed().as_millis(),
        });
    }
    Ok((store, report))
}
