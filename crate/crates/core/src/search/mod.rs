//! The query engine: branch-and-bound over transfer counts `T = 0..=T_max`
//! with a shared bound, triplet-seeded candidates, geo-ratio pruning, a
//! time budget and an expanding departure window.
//!
//! `T` counts legs minus one, walk legs included; the transfer penalty only
//! counts boardings of non-walk legs. A trip departs when its traveller
//! leaves the origin: leading unscheduled legs start as late as the first
//! scheduled boarding allows.

mod engine;
pub mod gate;

use serde::{Deserialize, Serialize};

use crate::connectivity::{boardings_from, transfers_for, MeshTable, UNREACHABLE};
use crate::error::{Error, Result};
use crate::network::{HopId, Mode, Network, RouteId, StationId};
use crate::overlay::Overlay;
use crate::par::{self, Parallelism};
use crate::precompute::TripletStore;

pub use gate::{geo_ratio_gate, GeoGate};

pub const MAX_TRANSFERS: u8 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    /// Seconds per boarding after the first (walk legs excluded).
    pub transfer_s: f64,
    pub walk_s_per_m: f64,
    pub taxi_s_per_km: f64,
    /// Weight on the wait between the earliest departure and leaving.
    pub wait_initial: f64,
    /// Seconds per fare unit from overlay fare annotations.
    pub fare_s_per_unit: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            transfer_s: 600.0,
            walk_s_per_m: 0.5,
            taxi_s_per_km: 120.0,
            wait_initial: 0.0,
            fare_s_per_unit: 0.0,
        }
    }
}

impl CostWeights {
    fn validate(&self) -> Result<()> {
        let all = [
            self.transfer_s,
            self.walk_s_per_m,
            self.taxi_s_per_km,
            self.wait_initial,
            self.fare_s_per_unit,
        ];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::Validation("cost weights must be finite and non-negative".into()))
        }
    }

    /// Cost of a hop sequence's structure: transfers, walking, taxi.
    pub fn structural(&self, boardings: usize, walk_m: u64, taxi_m: u64) -> i64 {
        let x = self.transfer_s * boardings.saturating_sub(1) as f64
            + self.walk_s_per_m * walk_m as f64
            + self.taxi_s_per_km * taxi_m as f64 / 1000.0;
        x.round() as i64
    }

    pub fn initial_wait(&self, wait_s: i64) -> i64 {
        (self.wait_initial * wait_s as f64).round() as i64
    }

    pub fn fare(&self, fare: f64) -> i64 {
        (self.fare_s_per_unit * fare).round() as i64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub dep: StationId,
    pub arr: StationId,
    pub earliest_dep_utc: i64,
    pub initial_window_s: i64,
    pub max_window_s: i64,
    pub max_transfers: u8,
    pub max_walk_m: u32,
    /// `None` means unlimited.
    pub budget_ms: Option<u64>,
    pub weights: CostWeights,
    pub allow_air: bool,
    pub allow_taxi: bool,
    pub flexible_window: bool,
    /// `None` disables geo-ratio pruning.
    pub geo_gate: Option<GeoGate>,
    /// Skip transfer counts below the mesh lower bound.
    pub use_mesh: bool,
}

impl Query {
    pub fn new(dep: StationId, arr: StationId, earliest_dep_utc: i64) -> Self {
        Self {
            dep,
            arr,
            earliest_dep_utc,
            initial_window_s: 7200,
            max_window_s: 3 * 86_400,
            max_transfers: 5,
            max_walk_m: 2500,
            budget_ms: Some(500),
            weights: CostWeights::default(),
            allow_air: true,
            allow_taxi: true,
            flexible_window: true,
            geo_gate: Some(GeoGate::default()),
            use_mesh: true,
        }
    }

    /// No geo pruning, no time limit, fixed window: the result is optimal
    /// over all simple paths with at most `max_transfers + 1` legs.
    pub fn exact(mut self) -> Self {
        self.geo_gate = None;
        self.budget_ms = None;
        self.flexible_window = false;
        self
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        for s in [self.dep, self.arr] {
            if s as usize >= net.station_count() {
                return Err(Error::UnknownStation(s.to_string()));
            }
        }
        if net.node_of(self.dep) == net.node_of(self.arr) {
            return Err(Error::Validation("origin and destination are the same place".into()));
        }
        let (h0, h1) = net.horizon();
        if !(h0..h1).contains(&self.earliest_dep_utc) {
            return Err(Error::Validation(format!(
                "earliest departure {} outside network horizon [{h0}, {h1})",
                self.earliest_dep_utc
            )));
        }
        if self.max_transfers > MAX_TRANSFERS {
            return Err(Error::Validation(format!("max transfers is at most {MAX_TRANSFERS}")));
        }
        if self.initial_window_s <= 0 || self.max_window_s < self.initial_window_s {
            return Err(Error::Validation("window must be positive and within the maximum".into()));
        }
        self.weights.validate()
    }

    pub(crate) fn allows(&self, mode: Mode) -> bool {
        match mode {
            Mode::Plane => self.allow_air,
            Mode::Taxi => self.allow_taxi,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub hop: HopId,
    pub route: RouteId,
    pub mode: Mode,
    pub from: StationId,
    pub to: StationId,
    pub dep_utc: i64,
    pub arr_utc: i64,
    /// Event ordinal on the hop; `None` for unscheduled legs.
    pub ordinal: Option<u32>,
    pub wait_before_s: i64,
    pub distance_m: u32,
    pub fare: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Itinerary {
    pub legs: Vec<Leg>,
    pub depart_utc: i64,
    pub arrive_utc: i64,
    pub elapsed_s: i64,
    pub initial_wait_s: i64,
    pub cost_s: i64,
    /// Legs minus one, walk legs included.
    pub transfers: usize,
    pub total_walk_m: u64,
}

impl Itinerary {
    pub fn hops(&self) -> Vec<HopId> {
        self.legs.iter().map(|l| l.hop).collect()
    }

    /// Longest wait between consecutive legs.
    pub fn max_transfer_wait_s(&self) -> i64 {
        self.legs.iter().skip(1).map(|l| l.wait_before_s).max().unwrap_or(0)
    }

    /// Waits long enough to justify looking at a wider window.
    pub fn has_long_wait(&self) -> bool {
        let limit = 3600f64.max(0.25 * self.elapsed_s as f64);
        self.initial_wait_s as f64 > limit || self.max_transfer_wait_s() as f64 > limit
    }

    fn tie_key(&self) -> (i64, usize, i64, Vec<HopId>, i64) {
        (self.cost_s, self.transfers, self.arrive_utc, self.hops(), self.depart_utc)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Complete candidate trips whose departures were evaluated.
    pub alternatives_evaluated: u64,
    pub departures_scanned: u64,
    /// Candidates or branches dropped by the lower bound.
    pub bound_pruned: u64,
    /// Candidates or branches dropped by the geo-ratio gate.
    pub geo_pruned: u64,
    /// Transfer counts skipped by the mesh lower bound.
    pub mesh_skipped: u64,
    pub window_s: i64,
    pub elapsed_ms: u64,
    pub time_limited: bool,
    /// Successive best costs.
    pub bound_trace: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoRoute {
    /// Transfer lower bound from the mesh table, if one was consulted.
    pub mesh_min_transfers: Option<u8>,
    /// Minimum transfers ignoring schedules; `None` if unreachable.
    pub min_transfers: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub itinerary: Option<Itinerary>,
    /// The previous best, when it used different hops. No guarantees.
    pub alternative: Option<Itinerary>,
    pub no_route: Option<NoRoute>,
    pub stats: SearchStats,
}

/// Plans one query over an overlay snapshot.
pub fn plan(net: &Network, store: &TripletStore, mesh: Option<&MeshTable>, overlay: &Overlay, q: &Query) -> Result<PlanOutcome> {
    q.validate(net)?;
    let active = overlay.active_at(q.earliest_dep_utc);
    let mut eng = engine::Engine::new(net, store, &active, q);
    let mesh_bound = mesh.filter(|_| q.use_mesh).and_then(|m| m.bound(net, net.node_of(q.dep), net.node_of(q.arr)));
    eng.run(mesh_bound);
    let (best, alternative, stats) = eng.finish();
    let no_route = best.is_none().then(|| {
        let (dist, _) = boardings_from(net, q.dep);
        let d = dist[q.arr as usize];
        NoRoute {
            mesh_min_transfers: mesh_bound,
            min_transfers: (d != UNREACHABLE).then(|| transfers_for(d)),
        }
    });
    Ok(PlanOutcome {
        itinerary: best,
        alternative,
        no_route,
        stats,
    })
}

/// How an itinerary's cost adds up. The structural terms are rounded
/// together, so `total_s = elapsed_s + structural_s + initial_wait_s + fare_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub elapsed_s: i64,
    pub boardings: usize,
    pub transfer_penalty_s: f64,
    pub walk_penalty_s: f64,
    pub taxi_penalty_s: f64,
    pub structural_s: i64,
    pub initial_wait_s: i64,
    pub fare_total: f64,
    pub fare_s: i64,
    pub total_s: i64,
}

pub fn cost_breakdown(w: &CostWeights, it: &Itinerary) -> CostBreakdown {
    let boardings = it.legs.iter().filter(|l| l.mode != Mode::Walk).count();
    let taxi_m: u64 = it.legs.iter().filter(|l| l.mode == Mode::Taxi).map(|l| u64::from(l.distance_m)).sum();
    let fare_total: f64 = it.legs.iter().filter_map(|l| l.fare).sum();
    let structural_s = w.structural(boardings, it.total_walk_m, taxi_m);
    let initial_wait_s = w.initial_wait(it.initial_wait_s);
    let fare_s = w.fare(fare_total);
    CostBreakdown {
        elapsed_s: it.elapsed_s,
        boardings,
        transfer_penalty_s: w.transfer_s * boardings.saturating_sub(1) as f64,
        walk_penalty_s: w.walk_s_per_m * it.total_walk_m as f64,
        taxi_penalty_s: w.taxi_s_per_km * taxi_m as f64 / 1000.0,
        structural_s,
        initial_wait_s,
        fare_total,
        fare_s,
        total_s: it.elapsed_s + structural_s + initial_wait_s + fare_s,
    }
}

/// Plans independent queries, in parallel when `mode` allows. Results come
/// back in query order; each query is still single-threaded.
pub fn plan_batch(
    net: &Network,
    store: &TripletStore,
    mesh: Option<&MeshTable>,
    overlay: &Overlay,
    queries: &[Query],
    mode: Parallelism,
) -> Vec<Result<PlanOutcome>> {
    par::map_collect(mode, queries, |q| plan(net, store, mesh, overlay, q))
}

/// `true` when the mesh bound allows trips with `t` transfers.
pub fn transfer_lower_bound_gate(mesh_bound: Option<u8>, t: u8) -> bool {
    mesh_bound.is_none_or(|b| t >= b)
}

/// Candidate visiting order: typical time, then route distance.
pub fn priority_key(typical_s: u64, route_m: u64) -> (u64, u64) {
    (typical_s, route_m)
}
