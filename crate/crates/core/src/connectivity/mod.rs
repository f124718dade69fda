//! Schedule-free reachability: per-station profile search, the mesh table
//! of minimum-transfer lower bounds, and a diagnostics report.
//!
//! Reachability is a 0-1 breadth-first search over stations. Boarding a
//! hop costs one, walking (and moving inside a cluster) costs nothing, so
//! the level of a station is the least number of boardings needed to get
//! there. Transfers are boardings minus one.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::format::{Reader, Writer};
use crate::network::{Mode, Network, StationId};
use crate::par::{self, Parallelism};

pub const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachProfile {
    pub station: StationId,
    /// Stations reachable from `station`, excluding itself.
    pub reachable_count: usize,
    /// `histogram[k]` counts stations whose minimum transfer count is `k`.
    pub min_transfers_histogram: Vec<u32>,
    /// Edges relaxed during the search.
    pub edges_scanned: usize,
}

/// Least boardings from `origin` to every station (`UNREACHABLE` if none),
/// and the number of relaxed edges.
pub fn boardings_from(net: &Network, origin: StationId) -> (Vec<u32>, usize) {
    let n = net.station_count();
    let mut dist = vec![UNREACHABLE; n];
    let mut dq = VecDeque::new();
    dist[origin as usize] = 0;
    dq.push_back(origin);
    let mut scanned = 0usize;
    let clustered = net.is_clustered();
    while let Some(s) = dq.pop_front() {
        let d = dist[s as usize];
        let relax = |to: StationId, w: u32, dist: &mut Vec<u32>, dq: &mut VecDeque<StationId>| {
            let nd = d + w;
            if nd < dist[to as usize] {
                dist[to as usize] = nd;
                if w == 0 {
                    dq.push_front(to);
                } else {
                    dq.push_back(to);
                }
            }
        };
        for &h in net.out_hops(s) {
            scanned += 1;
            let hop = net.hop(h);
            let w = u32::from(hop.mode != Mode::Walk);
            relax(hop.to, w, &mut dist, &mut dq);
        }
        if clustered {
            for &m in net.members(net.node_of(s)) {
                scanned += 1;
                relax(m, 0, &mut dist, &mut dq);
            }
        }
    }
    (dist, scanned)
}

/// Minimum transfers for a boarding count.
#[inline]
pub fn transfers_for(boardings: u32) -> u32 {
    boardings.saturating_sub(1)
}

pub fn profile_search(net: &Network, origin: StationId) -> ReachProfile {
    let (dist, scanned) = boardings_from(net, origin);
    let mut hist: Vec<u32> = Vec::new();
    let mut count = 0;
    for (s, &d) in dist.iter().enumerate() {
        if s as StationId == origin || d == UNREACHABLE {
            continue;
        }
        let k = transfers_for(d) as usize;
        if hist.len() <= k {
            hist.resize(k + 1, 0);
        }
        hist[k] += 1;
        count += 1;
    }
    ReachProfile {
        station: origin,
        reachable_count: count,
        min_transfers_histogram: hist,
        edges_scanned: scanned,
    }
}

pub type Cell = (i32, i32);

/// Sparse lower bounds on minimum transfers between geographic mesh cells,
/// keyed by ordered `(origin cell, destination cell)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshTable {
    pub cell_deg: f64,
    entries: BTreeMap<(Cell, Cell), u8>,
}

impl MeshTable {
    pub fn cell(&self, net: &Network, s: StationId) -> Cell {
        cell_of(net, s, self.cell_deg)
    }

    /// Lower bound on transfers from `a` to `b`, if known.
    pub fn bound(&self, net: &Network, a: StationId, b: StationId) -> Option<u8> {
        self.entries.get(&(self.cell(net, a), self.cell(net, b))).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = ((Cell, Cell), u8)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.f64(self.cell_deg);
        w.u32(self.entries.len() as u32);
        for (&((a0, a1), (b0, b1)), &v) in &self.entries {
            w.i32(a0);
            w.i32(a1);
            w.i32(b0);
            w.i32(b1);
            w.u8(v);
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let cell_deg = r.f64()?;
        let mut entries = BTreeMap::new();
        for _ in 0..r.u32()? {
            let key = ((r.i32()?, r.i32()?), (r.i32()?, r.i32()?));
            entries.insert(key, r.u8()?);
        }
        if !r.is_done() {
            return Err(Error::Format("trailing bytes in mesh section".into()));
        }
        Ok(Self { cell_deg, entries })
    }
}

fn cell_of(net: &Network, s: StationId, deg: f64) -> Cell {
    let st = net.station(s);
    ((st.lat / deg).floor() as i32, (st.lon / deg).floor() as i32)
}

/// Folds the minimum transfer count of every reachable station pair into
/// its ordered cell pair.
pub fn build_mesh_table(net: &Network, cell_deg: f64, mode: Parallelism) -> MeshTable {
    let origins: Vec<StationId> = (0..net.station_count() as StationId).collect();
    let cells: Vec<Cell> = origins.iter().map(|&s| cell_of(net, s, cell_deg)).collect();
    let partial: Vec<BTreeMap<(Cell, Cell), u8>> = par::map_collect(mode, &origins, |&o| {
        let (dist, _) = boardings_from(net, o);
        let mut m: BTreeMap<(Cell, Cell), u8> = BTreeMap::new();
        for (d, &b) in dist.iter().enumerate() {
            if d as StationId == o || b == UNREACHABLE {
                continue;
            }
            let t = transfers_for(b).min(u32::from(u8::MAX)) as u8;
            let e = m.entry((cells[o as usize], cells[d])).or_insert(t);
            *e = (*e).min(t);
        }
        m
    });
    let mut entries: BTreeMap<(Cell, Cell), u8> = BTreeMap::new();
    for m in partial {
        for (k, v) in m {
            let e = entries.entry(k).or_insert(v);
            *e = (*e).min(v);
        }
    }
    MeshTable { cell_deg, entries }
}

/// Weakly connected components, each sorted, ordered by size then first id.
pub fn components(net: &Network) -> Vec<Vec<StationId>> {
    let n = net.station_count();
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![start as StationId];
        comp[start] = id;
        let mut i = 0;
        while i < members.len() {
            let s = members[i];
            i += 1;
            let next = net
                .out_hops(s)
                .iter()
                .map(|&h| net.hop(h).to)
                .chain(net.in_hops(s).iter().map(|&h| net.hop(h).from))
                .chain(net.members(net.node_of(s)).iter().copied());
            for t in next {
                if comp[t as usize] == usize::MAX {
                    comp[t as usize] = id;
                    members.push(t);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    out
}

/// Plain-text connectivity diagnostics.
pub fn connectivity_report(net: &Network, mode: Parallelism) -> String {
    let n = net.station_count();
    let origins: Vec<StationId> = (0..n as StationId).collect();
    let profiles = par::map_collect(mode, &origins, |&o| profile_search(net, o));
    let comps = components(net);

    let mut out = String::new();
    let _ = writeln!(out, "stations: {n}");
    let _ = writeln!(out, "hops: {}", net.hops().len());
    let noun = if comps.len() == 1 { "component" } else { "components" };
    let _ = writeln!(out, "{} {noun}", comps.len());
    for (i, c) in comps.iter().enumerate() {
        let _ = write!(out, "component {}: {} stations", i + 1, c.len());
        if i > 0 {
            let names: Vec<&str> = c.iter().take(20).map(|&s| net.station(s).name.as_str()).collect();
            let _ = write!(out, ": {}", names.join(", "));
            if c.len() > 20 {
                let _ = write!(out, ", ...");
            }
        }
        out.push('\n');
    }
    let reachable: usize = profiles.iter().map(|p| p.reachable_count).sum();
    let pairs = n * n.saturating_sub(1);
    let _ = writeln!(out, "unreachable ordered pairs: {} of {pairs}", pairs - reachable);
    let isolated: Vec<&str> = profiles
        .iter()
        .filter(|p| p.reachable_count == 0)
        .map(|p| net.station(p.station).name.as_str())
        .collect();
    if !isolated.is_empty() {
        let _ = writeln!(out, "stations reaching nothing: {}", isolated.join(", "));
    }
    let mut hist: Vec<u64> = Vec::new();
    for p in &profiles {
        if hist.len() < p.min_transfers_histogram.len() {
            hist.resize(p.min_transfers_histogram.len(), 0);
        }
        for (k, &c) in p.min_transfers_histogram.iter().enumerate() {
            hist[k] += u64::from(c);
        }
    }
    let _ = writeln!(out, "minimum transfers over all pairs:");
    for (k, c) in hist.iter().enumerate() {
        let _ = writeln!(out, "  {k}: {c}");
    }
    if n > 0 {
        let _ = writeln!(out, "mean reachable per station: {:.1}", reachable as f64 / n as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::geo::offset_m;
    use crate::network::{DepartureList, LatLon, NetworkBuilder, Schedule};

    fn line(n: usize, extra_island: bool) -> Network {
        let o = LatLon::new(10.0, 10.0);
        let mut b = NetworkBuilder::new((0, 10_000));
        for i in 0..n {
            b.add_station(format!("S{i}"), offset_m(o, i as f64 * 2000.0, 0.0), 0);
        }
        let t = || Schedule::Timed(DepartureList::encode(&[(100, 60)]).unwrap());
        for i in 0..n as u32 - 1 {
            let r = b.add_route(format!("r{i}"), "", Mode::Bus);
            b.add_hop(i, i + 1, r, t(), None);
            let r = b.add_route(format!("q{i}"), "", Mode::Bus);
            b.add_hop(i + 1, i, r, t(), None);
        }
        if extra_island {
            let x = b.add_station("Island X", offset_m(o, 0.0, 90_000.0), 0);
            let y = b.add_station("Island Y", offset_m(o, 500.0, 90_000.0), 0);
            let r = b.add_route("i", "", Mode::Bus);
            b.add_hop(x, y, r, t(), None);
        }
        b.build().unwrap()
    }

    #[test]
    fn line_levels() {
        let p = profile_search(&line(3, false), 0);
        assert_eq!(p.reachable_count, 2);
        assert_eq!(p.min_transfers_histogram, vec![1, 1]);
    }

    #[test]
    fn island_absent_from_profile() {
        let net = line(3, true);
        let p = profile_search(&net, 0);
        assert_eq!(p.reachable_count, 2);
        let (d, _) = boardings_from(&net, 0);
        assert_eq!(d[3], UNREACHABLE);
    }

    #[test]
    fn walk_is_free() {
        let mut b = line(3, false).into_builder();
        let w = b.shared_route("walk", Mode::Walk);
        b.add_hop(2, 0, w, Schedule::Fixed { duration_s: 100 }, Some(5200));
        let net = b.build().unwrap();
        let (d, _) = boardings_from(&net, 2);
        assert_eq!(d[0], 0);
        assert_eq!(d[1], 1);
    }

    #[test]
    fn mesh_single_cell_and_coarsening() {
        let net = line(4, false);
        let fine = build_mesh_table(&net, 0.01, Parallelism::Sequential);
        let coarse = build_mesh_table(&net, 5.0, Parallelism::Sequential);
        assert_eq!(coarse.len(), 1);
        assert_eq!(coarse.bound(&net, 0, 3), Some(0));
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    assert!(coarse.bound(&net, a, b).unwrap() <= fine.bound(&net, a, b).unwrap());
                }
            }
        }
        let par = build_mesh_table(&net, 0.01, Parallelism::Parallel(2));
        assert_eq!(par, fine);
        assert_eq!(MeshTable::from_bytes(&fine.to_bytes()).unwrap(), fine);
    }

    #[test]
    fn report_lists_islands() {
        let r = connectivity_report(&line(4, false), Parallelism::Sequential);
        assert!(r.contains("1 component\n"), "{r}");
        let r = connectivity_report(&line(4, true), Parallelism::Sequential);
        assert!(r.contains("2 components"));
        assert!(r.contains("Island X, Island Y"), "{r}");
        assert_eq!(r, connectivity_report(&line(4, true), Parallelism::Auto));
    }
}
