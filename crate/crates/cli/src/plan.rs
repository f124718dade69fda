//! The plan request and report shared by `plan` and `serve`.

use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};
use bbtime::connectivity::MeshTable;
use bbtime::format::{self, Container, MESH};
use bbtime::network::{Network, StationId};
use bbtime::overlay::Overlay;
use bbtime::precompute::TripletStore;
use bbtime::search::{self, CostBreakdown, CostWeights, Itinerary, NoRoute, Query, SearchStats};
use bbtime::Error;
use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::resolve::resolve_station;

pub const REPORT_FORMAT: &str = "bbtime-plan/1";

/// A network file with whatever precomputed sections it carries.
pub struct Loaded {
    pub net: Network,
    pub store: TripletStore,
    pub mesh: Option<MeshTable>,
}

impl Loaded {
    pub fn read(path: &Path) -> Result<Self> {
        let c = Container::read(path).with_context(|| format!("reading {}", path.display()))?;
        let net = format::read_network(&c)?;
        let store = TripletStore::read_from(&c, &net)?;
        let mesh = c.get(MESH).map(MeshTable::from_bytes).transpose()?;
        Ok(Self { net, store, mesh })
    }
}

/// Query flags. The same struct is filled from the command line and from
/// server requests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(default, deny_unknown_fields)]
pub struct PlanRequest {
    /// Origin: station id, name substring, or "lat,lon".
    #[arg(long)]
    pub from: String,
    #[arg(long)]
    pub to: String,
    /// ISO 8601 time. Without an offset it is read in the origin's local time.
    #[arg(long)]
    pub dep_after: Option<String>,
    /// Walking allowance per trip, in metres.
    #[arg(long)]
    pub max_walk: Option<u32>,
    #[arg(long, conflicts_with = "no_budget")]
    pub budget_ms: Option<u64>,
    /// Search until the optimum is proven.
    #[arg(long)]
    pub no_budget: bool,
    /// Highest transfer count searched.
    #[arg(long)]
    pub tmax: Option<u8>,
    /// Widen the departure window when nothing good is found (default).
    #[arg(long, overrides_with = "no_flex")]
    pub flex: bool,
    #[arg(long)]
    pub no_flex: bool,
    /// Cost weights, e.g. `transfer=600,walk=0.5,taxi=120,wait=0,fare=0`.
    #[arg(long)]
    pub weights: Option<String>,
    /// Disable every heuristic: no geo pruning, no budget, fixed window.
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub no_air: bool,
    #[arg(long)]
    pub no_taxi: bool,
    /// Refuse to run unless the triplets were precomputed with this seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationRef {
    pub id: StationId,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

impl StationRef {
    pub fn new(net: &Network, id: StationId) -> Self {
        let s = net.station(id);
        Self {
            id,
            name: s.name.clone(),
            lat: s.lat,
            lon: s.lon,
        }
    }
}

/// Machine-readable plan output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub format: String,
    pub from: StationRef,
    pub to: StationRef,
    pub query: Query,
    pub overlay_epoch: u64,
    pub itinerary: Option<Itinerary>,
    pub cost: Option<CostBreakdown>,
    pub alternative: Option<Itinerary>,
    pub no_route: Option<NoRoute>,
    pub stats: SearchStats,
}

/// Raised when the search finishes without a trip.
#[derive(Debug)]
pub struct NoRouteFound;

impl fmt::Display for NoRouteFound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("no route")
    }
}

impl std::error::Error for NoRouteFound {}

pub fn parse_weights(s: &str) -> Result<CostWeights, Error> {
    let mut w = CostWeights::default();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("weight {part:?}: expected key=value")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Validation(format!("weight {part:?}: bad number")))?;
        match k.trim() {
            "transfer" => w.transfer_s = v,
            "walk" => w.walk_s_per_m = v,
            "taxi" => w.taxi_s_per_km = v,
            "wait" => w.wait_initial = v,
            "fare" => w.fare_s_per_unit = v,
            other => return Err(Error::Validation(format!("unknown weight {other:?}"))),
        }
    }
    Ok(w)
}

/// Reads a departure time. Naive times are local to `origin`.
pub fn parse_dep_after(net: &Network, origin: StationId, s: &str) -> Result<i64, Error> {
    let s = s.trim();
    if let Ok(t) = s.parse::<i64>() {
        return Ok(t);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.timestamp());
    }
    let local = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().and_then(|d| d.and_hms_opt(0, 0, 0)))
        .ok_or_else(|| Error::Validation(format!("bad departure time {s:?}")))?;
    Ok(net.tz_of(origin).to_utc(local.and_utc().timestamp()))
}

pub fn build_query(loaded: &Loaded, req: &PlanRequest) -> Result<Query, Error> {
    let net = &loaded.net;
    let dep = resolve_station(net, &req.from)?;
    let arr = resolve_station(net, &req.to)?;
    let t = match &req.dep_after {
        Some(s) => parse_dep_after(net, dep, s)?,
        None => net.horizon().0,
    };
    if let Some(seed) = req.seed {
        if loaded.store.max_t().is_some() && loaded.store.seed != seed {
            return Err(Error::Validation(format!(
                "triplets were precomputed with seed {}, not {seed}",
                loaded.store.seed
            )));
        }
    }
    let mut q = Query::new(dep, arr, t);
    if req.exact {
        q = q.exact();
    }
    if let Some(m) = req.max_walk {
        q.max_walk_m = m;
    }
    if req.no_budget {
        q.budget_ms = None;
    } else if let Some(b) = req.budget_ms {
        q.budget_ms = Some(b);
    }
    if let Some(t) = req.tmax {
        q.max_transfers = t;
    }
    if req.no_flex {
        q.flexible_window = false;
    } else if req.flex {
        q.flexible_window = true;
    }
    if let Some(w) = &req.weights {
        q.weights = parse_weights(w)?;
    }
    q.allow_air = !req.no_air;
    q.allow_taxi = !req.no_taxi;
    Ok(q)
}

/// Runs one request against an overlay snapshot.
pub fn run(loaded: &Loaded, overlay: &Overlay, req: &PlanRequest) -> Result<PlanReport> {
    let q = build_query(loaded, req)?;
    let out = search::plan(&loaded.net, &loaded.store, loaded.mesh.as_ref(), overlay, &q)?;
    let cost = out.itinerary.as_ref().map(|it| search::cost_breakdown(&q.weights, it));
    Ok(PlanReport {
        format: REPORT_FORMAT.to_string(),
        from: StationRef::new(&loaded.net, q.dep),
        to: StationRef::new(&loaded.net, q.arr),
        overlay_epoch: overlay.epoch(),
        itinerary: out.itinerary,
        cost,
        alternative: out.alternative,
        no_route: out.no_route,
        stats: out.stats,
        query: q,
    })
}
