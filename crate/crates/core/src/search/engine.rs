//! Branch-and-bound internals.
//!
//! A path prefix carries either a free offset (only unscheduled legs so
//! far, so its departure time is not fixed yet) or a set of labels, one per
//! surviving boarding of the first scheduled leg: `(depart, arrival at the
//! prefix end, fare so far)`. Labels whose optimistic completion cannot
//! beat the bound are dropped, as are labels dominated by one that leaves
//! later and arrives no later for no more fare.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use super::{Itinerary, Leg, Query, SearchStats};
use crate::network::{HopId, Mode, Network, Schedule, StationId};
use crate::overlay::{ActiveOverlay, Effective};
use crate::precompute::TripletStore;

const NO_TRACE: u32 = u32::MAX;
const NO_ORDINAL: u32 = u32::MAX;
/// Upper limit on composed candidates for `T > 2` per sweep.
const COMPOSE_CAP: usize = 4096;
/// Events considered per leg when fares make the earliest arrival not
/// necessarily the cheapest.
const FARE_DEPTH: usize = 4;
/// How far past the ready time fare enumeration keeps looking.
const FARE_SCAN_S: i64 = 86_400;
const INF: f64 = f64::INFINITY;

#[derive(Debug, Clone, Copy)]
struct Trace {
    parent: u32,
    dep: i64,
    arr: i64,
    ordinal: u32,
    fare: f64,
}

#[derive(Debug, Clone, Copy)]
struct Label {
    depart: i64,
    arr: i64,
    fare: f64,
    trace: u32,
}

#[derive(Debug, Clone)]
enum Prefix {
    Free(i64),
    Anchored(Vec<Label>),
}

impl Prefix {
    fn is_dead(&self) -> bool {
        matches!(self, Prefix::Anchored(l) if l.is_empty())
    }
}

/// Structural totals of a path prefix.
#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    boardings: usize,
    walk_m: u64,
    taxi_m: u64,
    route_m: u64,
    air: bool,
    /// Per-leg penalty lower bound (transfer penalty counted per boarding).
    pen: f64,
}

pub(super) struct Engine<'a> {
    net: &'a Network,
    store: &'a TripletStore,
    ov: &'a ActiveOverlay,
    q: &'a Query,
    dep_node: StationId,
    arr_node: StationId,
    d_geo: f64,
    /// `lb[k][v]`: lower bound on duration plus penalties over exactly `k`
    /// legs from node `v` to the destination.
    lb: Vec<Vec<f64>>,
    ldist: Vec<Vec<f64>>,
    lwalk: Vec<Vec<f64>>,
    mindur: Vec<i64>,
    hop_pen: Vec<f64>,
    allowed: Vec<bool>,
    arena: Vec<Trace>,
    visited: Vec<bool>,
    path: Vec<HopId>,
    evaluated: HashSet<Vec<HopId>>,
    slice: (i64, i64),
    first_slice: bool,
    bound: i64,
    best: Option<Itinerary>,
    alt: Option<Itinerary>,
    stats: SearchStats,
    start: Instant,
    deadline: Option<Instant>,
    ticks: u32,
    timed_out: bool,
}

impl<'a> Engine<'a> {
    pub fn new(net: &'a Network, store: &'a TripletStore, ov: &'a ActiveOverlay, q: &'a Query) -> Self {
        let start = Instant::now();
        let w = &q.weights;
        let nh = net.hops().len();
        let mut mindur = Vec::with_capacity(nh);
        let mut hop_pen = Vec::with_capacity(nh);
        let mut allowed = Vec::with_capacity(nh);
        for h in net.hops() {
            mindur.push(i64::from(h.min_duration().unwrap_or(u32::MAX)));
            let d = f64::from(h.route_distance_m);
            hop_pen.push(match h.mode {
                Mode::Walk => w.walk_s_per_m * d,
                Mode::Taxi => w.transfer_s + w.taxi_s_per_km * d / 1000.0,
                _ => w.transfer_s,
            });
            allowed.push(q.allows(h.mode) && net.node_of(h.from) != net.node_of(h.to));
        }
        for (h, o, dd, da) in ov.delays() {
            if let Some(ev) = net.hop(h).event_at(o) {
                let d = (ev.arr_utc + da) - (ev.dep_utc + dd);
                mindur[h as usize] = mindur[h as usize].min(d);
            }
        }
        let dep_node = net.node_of(q.dep);
        let arr_node = net.node_of(q.arr);
        let n = net.station_count();
        let k_max = q.max_transfers as usize + 1;
        let mut lb = vec![vec![INF; n]; k_max + 1];
        let mut ldist = lb.clone();
        let mut lwalk = lb.clone();
        lb[0][arr_node as usize] = 0.0;
        ldist[0][arr_node as usize] = 0.0;
        lwalk[0][arr_node as usize] = 0.0;
        for k in 1..=k_max {
            for h in net.hops() {
                if !allowed[h.id as usize] {
                    continue;
                }
                let (u, v) = (net.node_of(h.from) as usize, net.node_of(h.to) as usize);
                let rest = lb[k - 1][v];
                if rest == INF {
                    continue;
                }
                let t = mindur[h.id as usize] as f64 + hop_pen[h.id as usize] + rest;
                if t < lb[k][u] {
                    lb[k][u] = t;
                }
                let d = f64::from(h.route_distance_m) + ldist[k - 1][v];
                if d < ldist[k][u] {
                    ldist[k][u] = d;
                }
                let wm = if h.mode == Mode::Walk { f64::from(h.route_distance_m) } else { 0.0 };
                if wm + lwalk[k - 1][v] < lwalk[k][u] {
                    lwalk[k][u] = wm + lwalk[k - 1][v];
                }
            }
        }
        let d_geo = crate::network::geo::great_circle_m(net.station(q.dep).pos(), net.station(q.arr).pos());
        Self {
            net,
            store,
            ov,
            q,
            dep_node,
            arr_node,
            d_geo,
            lb,
            ldist,
            lwalk,
            mindur,
            hop_pen,
            allowed,
            arena: Vec::new(),
            visited: vec![false; n],
            path: Vec::new(),
            evaluated: HashSet::new(),
            slice: (0, 0),
            first_slice: true,
            bound: i64::MAX,
            best: None,
            alt: None,
            stats: SearchStats::default(),
            start,
            deadline: q.budget_ms.map(|ms| start + Duration::from_millis(ms)),
            ticks: 0,
            timed_out: false,
        }
    }

    pub fn finish(mut self) -> (Option<Itinerary>, Option<Itinerary>, SearchStats) {
        self.stats.elapsed_ms = self.start.elapsed().as_millis() as u64;
        self.stats.time_limited = self.timed_out;
        (self.best, self.alt, self.stats)
    }

    fn tick(&mut self) -> bool {
        if self.timed_out {
            return true;
        }
        if let Some(d) = self.deadline {
            if self.ticks.is_multiple_of(32) && Instant::now() >= d {
                self.timed_out = true;
            }
            self.ticks = self.ticks.wrapping_add(1);
        }
        self.timed_out
    }

    pub fn run(&mut self, mesh_bound: Option<u8>) {
        let e = self.q.earliest_dep_utc;
        let mut len = self.q.initial_window_s;
        self.slice = (e, e + len);
        self.first_slice = true;
        loop {
            self.sweep(mesh_bound);
            if self.timed_out || !self.q.flexible_window || len >= self.q.max_window_s {
                break;
            }
            if self.best.as_ref().is_some_and(|b| !b.has_long_wait()) {
                break;
            }
            let next = (len * 2).min(self.q.max_window_s);
            self.slice = (e + len, e + next);
            self.first_slice = false;
            len = next;
        }
        self.stats.window_s = len;
    }

    fn sweep(&mut self, mesh_bound: Option<u8>) {
        for t in 0..=self.q.max_transfers {
            if !super::transfer_lower_bound_gate(mesh_bound, t) {
                self.stats.mesh_skipped += 1;
                continue;
            }
            let root = self.lb[t as usize + 1][self.dep_node as usize];
            if root == INF {
                continue;
            }
            if (root - self.q.weights.transfer_s).floor() as i64 >= self.bound {
                self.stats.bound_pruned += 1;
                continue;
            }
            self.evaluated.clear();
            self.branch_for_t(t);
            if self.timed_out {
                return;
            }
        }
    }

    /// Stored or composed triplets first, in priority order, then a
    /// complete depth-first enumeration of the remaining simple paths.
    fn branch_for_t(&mut self, t: u8) {
        let mut cands = self.triplet_candidates(t);
        cands.sort();
        for (_, _, hops) in cands {
            if self.tick() {
                return;
            }
            if self.evaluated.insert(hops.clone()) {
                self.evaluate_candidate(&hops);
            }
        }
        self.path.clear();
        self.visited[self.dep_node as usize] = true;
        self.dfs(self.dep_node, t as usize + 1, Prefix::Free(0), Acc::default(), None);
        self.visited[self.dep_node as usize] = false;
    }

    fn triplet_candidates(&mut self, t: u8) -> Vec<(u64, u64, Vec<HopId>)> {
        let (d, a) = (self.dep_node, self.arr_node);
        let as_cand = |tr: &crate::precompute::Triplet| (u64::from(tr.typical_s), tr.route_m, tr.hops.clone());
        if t <= 2 {
            return self.store.get(t, d, a).iter().map(as_cand).collect();
        }
        let mut out = Vec::new();
        self.compose(d, t as usize + 1, &mut Vec::new(), 0, 0, &mut out);
        out
    }

    /// Chains stored fragments from `from` to the destination using `legs`
    /// more legs: a `T = 2` fragment while more than three legs remain,
    /// then one stored fragment of the exact remaining length.
    fn compose(&self, from: StationId, legs: usize, acc: &mut Vec<HopId>, typ: u64, dist: u64, out: &mut Vec<(u64, u64, Vec<HopId>)>) {
        if out.len() >= COMPOSE_CAP {
            return;
        }
        if legs <= 3 {
            for tr in self.store.get(legs as u8 - 1, from, self.arr_node) {
                if out.len() >= COMPOSE_CAP {
                    return;
                }
                let mut hops = acc.clone();
                hops.extend_from_slice(&tr.hops);
                out.push((typ + u64::from(tr.typical_s), dist + tr.route_m, hops));
            }
            return;
        }
        for (j, list) in self.store.row(2, from) {
            if j == self.arr_node {
                continue;
            }
            for tr in list {
                let n = acc.len();
                acc.extend_from_slice(&tr.hops);
                self.compose(j, legs - 3, acc, typ + u64::from(tr.typical_s), dist + tr.route_m, out);
                acc.truncate(n);
            }
        }
    }

    fn gap(&self, prev: Option<HopId>, h: HopId) -> i64 {
        i64::from(match prev {
            Some(p) => self.net.connection_gap(p, h),
            None => self.net.displacement(self.q.dep, self.net.hop(h).from).0,
        })
    }

    fn junction_walk_m(&self, prev: Option<HopId>, h: HopId) -> u64 {
        let (a, b) = match prev {
            Some(p) => (self.net.hop(p).to, self.net.hop(h).from),
            None => (self.q.dep, self.net.hop(h).from),
        };
        u64::from(self.net.displacement(a, b).1)
    }

    fn add_leg(&self, acc: &Acc, prev: Option<HopId>, h: HopId) -> Acc {
        let hop = self.net.hop(h);
        let mut a = *acc;
        let disp = self.junction_walk_m(prev, h);
        a.walk_m += disp;
        a.pen += self.hop_pen[h as usize] + self.q.weights.walk_s_per_m * disp as f64;
        a.route_m += u64::from(hop.route_distance_m);
        match hop.mode {
            Mode::Walk => a.walk_m += u64::from(hop.route_distance_m),
            Mode::Taxi => {
                a.taxi_m += u64::from(hop.route_distance_m);
                a.boardings += 1;
            }
            Mode::Plane => {
                a.air = true;
                a.boardings += 1;
            }
            _ => a.boardings += 1,
        }
        a
    }

    fn max_route(&self, air: bool) -> f64 {
        match &self.q.geo_gate {
            Some(g) => g.max_route_m(air, self.d_geo),
            None => INF,
        }
    }

    /// Integer lower bound on whatever a label's cost does not yet include.
    fn rest_bound(&self, rest: f64, acc: &Acc) -> i64 {
        ((rest + acc.pen - self.q.weights.transfer_s - 1e-6).floor() as i64).max(0)
    }

    fn label_cost(&self, l: &Label) -> i64 {
        let w = &self.q.weights;
        (l.arr - l.depart) + w.initial_wait(l.depart - self.q.earliest_dep_utc) + w.fare(l.fare)
    }

    fn prefix_cost(&self, p: &Prefix) -> i64 {
        match p {
            Prefix::Free(o) => *o,
            Prefix::Anchored(ls) => ls.iter().map(|l| self.label_cost(l)).min().unwrap_or(i64::MAX),
        }
    }

    fn push_trace(&mut self, t: Trace) -> u32 {
        self.arena.push(t);
        (self.arena.len() - 1) as u32
    }

    fn effective(&self, h: HopId, dep: i64, dur: u32, ordinal: u32) -> Effective {
        self.ov.effective(h, ordinal, dep, dep + i64::from(dur))
    }

    /// Extends `prefix` by leg `h`. `extra` is a lower bound on the cost
    /// still to come after `h`.
    fn extend(&mut self, prefix: &Prefix, prev: Option<HopId>, h: HopId, extra: i64) -> Prefix {
        let gap = self.gap(prev, h);
        let net = self.net;
        let hop = net.hop(h);
        let (smin, smax) = self.ov.shift(h);
        let mut out = Vec::new();
        match (prefix, &hop.schedule) {
            (Prefix::Free(o), Schedule::Fixed { duration_s }) => return Prefix::Free(o + gap + i64::from(*duration_s)),
            (Prefix::Free(o), Schedule::Timed(list)) => {
                let lo = self.slice.0 + o + gap;
                let hi = self.slice.1 + o + gap;
                for d in list.iter_from(lo - smax) {
                    if d.dep_utc + smin >= hi {
                        break;
                    }
                    self.stats.departures_scanned += 1;
                    if let Effective::Ok { dep_utc, arr_utc, fare } = self.effective(h, d.dep_utc, d.duration, d.ordinal) {
                        if dep_utc < lo || dep_utc >= hi {
                            continue;
                        }
                        let fare = fare.unwrap_or(0.0);
                        let trace = self.push_trace(Trace {
                            parent: NO_TRACE,
                            dep: dep_utc,
                            arr: arr_utc,
                            ordinal: d.ordinal,
                            fare,
                        });
                        out.push(Label {
                            depart: dep_utc - o - gap,
                            arr: arr_utc,
                            fare,
                            trace,
                        });
                    }
                }
            }
            (Prefix::Anchored(ls), Schedule::Fixed { duration_s }) => {
                for l in ls {
                    let dep = l.arr + gap;
                    let arr = dep + i64::from(*duration_s);
                    let trace = self.push_trace(Trace {
                        parent: l.trace,
                        dep,
                        arr,
                        ordinal: NO_ORDINAL,
                        fare: 0.0,
                    });
                    out.push(Label { arr, trace, ..*l });
                }
            }
            (Prefix::Anchored(ls), Schedule::Timed(list)) => {
                let fares = self.q.weights.fare_s_per_unit > 0.0 && self.ov.has_fares(h);
                let md = self.mindur[h as usize];
                for l in ls {
                    let ready = l.arr + gap;
                    let mut best: Option<(i64, i64, u32, f64)> = None;
                    let mut extra_events: Vec<(i64, i64, u32, f64)> = Vec::new();
                    for d in list.iter_from(ready - smax) {
                        let cutoff = best.map_or(i64::MAX, |b| b.1);
                        if d.dep_utc + smin + md >= cutoff
                            && (!fares || extra_events.len() >= FARE_DEPTH || d.dep_utc - ready > FARE_SCAN_S)
                        {
                            break;
                        }
                        self.stats.departures_scanned += 1;
                        let Effective::Ok { dep_utc, arr_utc, fare } = self.effective(h, d.dep_utc, d.duration, d.ordinal) else {
                            continue;
                        };
                        if dep_utc < ready {
                            continue;
                        }
                        let ev = (dep_utc, arr_utc, d.ordinal, fare.unwrap_or(0.0));
                        if best.is_none_or(|b| arr_utc < b.1) {
                            best = Some(ev);
                        }
                        if fares && extra_events.len() < FARE_DEPTH {
                            extra_events.push(ev);
                        }
                    }
                    if let Some(b) = best {
                        if !extra_events.iter().any(|e| e.2 == b.2) {
                            extra_events.push(b);
                        }
                    }
                    for (dep, arr, ordinal, fare) in extra_events {
                        let trace = self.push_trace(Trace {
                            parent: l.trace,
                            dep,
                            arr,
                            ordinal,
                            fare,
                        });
                        out.push(Label {
                            depart: l.depart,
                            arr,
                            fare: l.fare + fare,
                            trace,
                        });
                    }
                }
            }
        }
        self.prune_labels(&mut out, extra);
        Prefix::Anchored(out)
    }

    fn prune_labels(&mut self, ls: &mut Vec<Label>, extra: i64) {
        let bound = self.bound;
        let before = ls.len();
        ls.retain(|l| self.label_cost(l).saturating_add(extra) < bound);
        if ls.len() < before && ls.is_empty() {
            self.stats.bound_pruned += 1;
        }
        // Later departure, no later arrival, no more fare dominates while
        // waiting at the origin costs at most as much as riding.
        let same_depart_only = self.q.weights.wait_initial > 1.0;
        ls.sort_by(|a, b| b.depart.cmp(&a.depart).then(a.arr.cmp(&b.arr)).then(a.fare.total_cmp(&b.fare)));
        let mut kept: Vec<Label> = Vec::with_capacity(ls.len());
        if !same_depart_only && ls.iter().all(|l| l.fare == 0.0) {
            let mut min_arr = i64::MAX;
            for l in ls.iter() {
                if l.arr < min_arr {
                    min_arr = l.arr;
                    kept.push(*l);
                }
            }
            *ls = kept;
            return;
        }
        for l in ls.iter() {
            let dominated = kept.iter().any(|k| {
                (k.depart == l.depart || !same_depart_only) && k.depart >= l.depart && k.arr <= l.arr && k.fare <= l.fare
            });
            if !dominated {
                kept.push(*l);
            }
        }
        *ls = kept;
    }

    /// Evaluates a fixed hop sequence over the current window slice.
    fn evaluate_candidate(&mut self, hops: &[HopId]) {
        let net = self.net;
        // static checks
        let mut seen = vec![self.dep_node];
        let mut acc = Acc::default();
        let mut prev = None;
        let mut fixed_time = 0i64;
        for &h in hops {
            if !self.allowed[h as usize] {
                return;
            }
            let to = net.node_of(net.hop(h).to);
            if seen.contains(&to) {
                return;
            }
            seen.push(to);
            acc = self.add_leg(&acc, prev, h);
            fixed_time += self.gap(prev, h) + self.mindur[h as usize];
            prev = Some(h);
        }
        if *seen.last().unwrap() != self.arr_node || net.node_of(net.hop(hops[0]).from) != self.dep_node {
            return;
        }
        let last = net.hop(*hops.last().unwrap());
        let (tail_t, tail_m) = net.displacement(last.to, self.q.arr);
        if acc.walk_m + u64::from(tail_m) > u64::from(self.q.max_walk_m) {
            return;
        }
        if acc.route_m as f64 > self.max_route(acc.air) {
            self.stats.geo_pruned += 1;
            return;
        }
        let pen = self.q.weights.structural(acc.boardings, acc.walk_m + u64::from(tail_m), acc.taxi_m);
        if fixed_time + i64::from(tail_t) + pen >= self.bound {
            self.stats.bound_pruned += 1;
            return;
        }
        // suffix lower bounds for label pruning
        let mut suffix = vec![0i64; hops.len() + 1];
        suffix[hops.len()] = i64::from(tail_t) + pen;
        for i in (1..hops.len()).rev() {
            suffix[i] = suffix[i + 1] + self.gap(Some(hops[i - 1]), hops[i]) + self.mindur[hops[i] as usize];
        }
        let mark = self.arena.len();
        let mut prefix = Prefix::Free(0);
        let mut prev = None;
        self.path.clear();
        for (i, &h) in hops.iter().enumerate() {
            prefix = self.extend(&prefix, prev, h, suffix[i + 1]);
            if prefix.is_dead() {
                self.arena.truncate(mark);
                return;
            }
            self.path.push(h);
            prev = Some(h);
        }
        self.tip(&prefix, &acc);
        self.arena.truncate(mark);
    }

    fn dfs(&mut self, v: StationId, rem: usize, prefix: Prefix, acc: Acc, prev: Option<HopId>) {
        if rem == 0 {
            if self.evaluated.insert(self.path.clone()) {
                self.tip(&prefix, &acc);
            }
            return;
        }
        if self.tick() {
            return;
        }
        let net = self.net;
        let mut children: Vec<(f64, f64, HopId)> = Vec::new();
        for &h in net.node_out(v) {
            if !self.allowed[h as usize] {
                continue;
            }
            let w = net.node_of(net.hop(h).to) as usize;
            if self.visited[w] || (w == self.arr_node as usize) != (rem == 1) {
                continue;
            }
            let rest = self.lb[rem - 1][w];
            if rest == INF {
                continue;
            }
            let key = self.mindur[h as usize] as f64 + self.hop_pen[h as usize] + rest;
            let dist = f64::from(net.hop(h).route_distance_m) + self.ldist[rem - 1][w];
            children.push((key, dist, h));
        }
        children.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
        let base = self.prefix_cost(&prefix);
        for (_, _, h) in children {
            let w = net.node_of(net.hop(h).to);
            let acc2 = self.add_leg(&acc, prev, h);
            if acc2.route_m as f64 + self.ldist[rem - 1][w as usize] > self.max_route(acc2.air || self.q.allow_air) {
                self.stats.geo_pruned += 1;
                continue;
            }
            if acc2.walk_m as f64 + self.lwalk[rem - 1][w as usize] > f64::from(self.q.max_walk_m) {
                continue;
            }
            let extra = self.rest_bound(self.lb[rem - 1][w as usize], &acc2);
            let optimistic = base.saturating_add(self.gap(prev, h) + self.mindur[h as usize]);
            if optimistic.saturating_add(extra) >= self.bound {
                self.stats.bound_pruned += 1;
                continue;
            }
            let mark = self.arena.len();
            let next = self.extend(&prefix, prev, h, extra);
            if !next.is_dead() {
                self.visited[w as usize] = true;
                self.path.push(h);
                self.dfs(w, rem - 1, next, acc2, Some(h));
                self.path.pop();
                self.visited[w as usize] = false;
            }
            self.arena.truncate(mark);
            if self.timed_out {
                return;
            }
        }
    }

    /// Costs every label of a complete path and keeps the best.
    fn tip(&mut self, prefix: &Prefix, acc: &Acc) {
        let net = self.net;
        let last = net.hop(*self.path.last().unwrap());
        let (tail_t, tail_m) = net.displacement(last.to, self.q.arr);
        let walk = acc.walk_m + u64::from(tail_m);
        if walk > u64::from(self.q.max_walk_m) {
            return;
        }
        if acc.route_m as f64 > self.max_route(acc.air) {
            self.stats.geo_pruned += 1;
            return;
        }
        self.stats.alternatives_evaluated += 1;
        let pen = self.q.weights.structural(acc.boardings, walk, acc.taxi_m);
        let e = self.q.earliest_dep_utc;
        let choice = match prefix {
            Prefix::Free(o) => {
                if !self.first_slice {
                    return;
                }
                Some((o + i64::from(tail_t) + pen, e + o + i64::from(tail_t), e, None))
            }
            Prefix::Anchored(ls) => ls
                .iter()
                .map(|l| {
                    let arrive = l.arr + i64::from(tail_t);
                    let w = &self.q.weights;
                    let cost = arrive - l.depart + pen + w.initial_wait(l.depart - e) + w.fare(l.fare);
                    (cost, arrive, l.depart, Some(*l))
                })
                .min_by(|a, b| (a.0, a.1, std::cmp::Reverse(a.2)).cmp(&(b.0, b.1, std::cmp::Reverse(b.2)))),
        };
        let Some((cost, _arrive, depart, label)) = choice else { return };
        if cost > self.bound {
            return;
        }
        let it = self.build(cost, depart, label, walk, tail_t);
        let better = match &self.best {
            None => true,
            Some(b) => it.tie_key() < b.tie_key(),
        };
        if better {
            if cost < self.bound {
                self.stats.bound_trace.push(cost);
            }
            self.bound = cost;
            let old = self.best.replace(it);
            if let Some(o) = old {
                if Some(o.hops()) != self.best.as_ref().map(|b| b.hops()) {
                    self.alt = Some(o);
                }
            }
        }
    }

    fn build(&self, cost: i64, depart: i64, label: Option<Label>, walk: u64, tail_t: u32) -> Itinerary {
        let net = self.net;
        let mut traced = Vec::new();
        if let Some(l) = label {
            let mut i = l.trace;
            while i != NO_TRACE {
                traced.push(self.arena[i as usize]);
                i = self.arena[i as usize].parent;
            }
            traced.reverse();
        }
        let n_lead = self.path.len() - traced.len();
        let mut legs = Vec::with_capacity(self.path.len());
        let mut t = depart;
        let mut prev: Option<HopId> = None;
        let mut prev_arr = depart;
        for (i, &h) in self.path.iter().enumerate() {
            let hop = net.hop(h);
            let (dep, arr, ordinal, fare) = if i < n_lead {
                let dep = t + self.gap(prev, h);
                (dep, dep + i64::from(hop.fixed_duration().unwrap_or(0)), None, None)
            } else {
                let tr = traced[i - n_lead];
                let ord = (tr.ordinal != NO_ORDINAL).then_some(tr.ordinal);
                (tr.dep, tr.arr, ord, ord.filter(|_| tr.fare > 0.0).map(|_| tr.fare))
            };
            legs.push(Leg {
                hop: h,
                route: hop.route,
                mode: hop.mode,
                from: hop.from,
                to: hop.to,
                dep_utc: dep,
                arr_utc: arr,
                ordinal,
                wait_before_s: dep - prev_arr,
                distance_m: hop.route_distance_m,
                fare,
            });
            prev_arr = arr;
            t = arr;
            prev = Some(h);
        }
        let arrive = prev_arr + i64::from(tail_t);
        Itinerary {
            transfers: legs.len() - 1,
            legs,
            depart_utc: depart,
            arrive_utc: arrive,
            elapsed_s: arrive - depart,
            initial_wait_s: depart - self.q.earliest_dep_utc,
            cost_s: cost,
            total_walk_m: walk,
        }
    }
}
