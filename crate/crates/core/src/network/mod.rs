//! Time-dependent network: stations, hops and compressed UTC departure lists.

mod cluster;
pub mod departures;
pub mod geo;
pub mod time;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use cluster::cluster_stations;
pub use departures::{Block, Departure, DepartureList};
pub use geo::{great_circle_m, LatLon};
pub use time::UtcOffsets;

use crate::error::{invalid, Error, Result};

pub type StationId = u32;
pub type HopId = u32;
pub type RouteId = u32;

/// Walking speed used for intra-cluster displacement.
pub const WALK_SPEED_MPS: f64 = 1.34;
/// Ratio between walked and straight-line distance.
pub const WALK_DETOUR: f64 = 1.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Bus,
    Train,
    Plane,
    Walk,
    Taxi,
    Bicycle,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Bus,
        Mode::Train,
        Mode::Plane,
        Mode::Walk,
        Mode::Taxi,
        Mode::Bicycle,
    ];

    /// Single-letter trip signature code.
    pub fn letter(self) -> char {
        match self {
            Mode::Bus => 'B',
            Mode::Train => 'T',
            Mode::Plane => 'P',
            Mode::Walk => 'W',
            Mode::Taxi => 'X',
            Mode::Bicycle => 'C',
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::Bus => "bus",
            Mode::Train => "train",
            Mode::Plane => "plane",
            Mode::Walk => "walk",
            Mode::Taxi => "taxi",
            Mode::Bicycle => "bicycle",
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }

    /// Modes that run to a timetable.
    pub fn is_timetabled(self) -> bool {
        matches!(self, Mode::Bus | Mode::Train | Mode::Plane)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: StationId,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    /// Index into [`Network::timezones`].
    pub tz: u16,
    /// Representative station of the cluster this station belongs to.
    pub cluster: Option<StationId>,
}

impl Station {
    pub fn pos(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub name: String,
    pub agency: String,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schedule {
    Timed(DepartureList),
    /// Unscheduled edge usable at any time.
    Fixed { duration_s: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hop {
    pub id: HopId,
    pub from: StationId,
    pub to: StationId,
    pub route: RouteId,
    pub mode: Mode,
    pub schedule: Schedule,
    pub route_distance_m: u32,
    pub fare_estimate: Option<f64>,
}

impl Hop {
    pub fn is_scheduled(&self) -> bool {
        matches!(self.schedule, Schedule::Timed(_))
    }

    pub fn departures(&self) -> Option<&DepartureList> {
        match &self.schedule {
            Schedule::Timed(d) => Some(d),
            Schedule::Fixed { .. } => None,
        }
    }

    pub fn fixed_duration(&self) -> Option<u32> {
        match self.schedule {
            Schedule::Fixed { duration_s } => Some(duration_s),
            Schedule::Timed(_) => None,
        }
    }

    pub fn min_duration(&self) -> Result<u32> {
        match &self.schedule {
            Schedule::Fixed { duration_s } => Ok(*duration_s),
            Schedule::Timed(d) => d
                .min_duration()
                .ok_or_else(|| Error::Validation(format!("hop {} has no departures", self.id))),
        }
    }

    fn timed(&self) -> Result<&DepartureList> {
        self.departures()
            .ok_or_else(|| Error::Contract(format!("hop {} is unscheduled", self.id)))
    }

    fn event(&self, d: Departure) -> Event {
        Event {
            dep_utc: d.dep_utc,
            arr_utc: d.arr_utc(),
            hop: self.id,
            ordinal: d.ordinal,
        }
    }

    pub fn next_event_at_or_after(&self, t: i64) -> Result<Option<Event>> {
        Ok(self.timed()?.next_at_or_after(t).map(|d| self.event(d)))
    }

    pub fn events_in_window(&self, t0: i64, t1: i64) -> Result<Vec<Event>> {
        Ok(self
            .timed()?
            .in_window(t0, t1)
            .map(|d| self.event(d))
            .collect())
    }

    pub fn event_at(&self, ordinal: u32) -> Option<Event> {
        self.departures()?.get(ordinal).map(|d| self.event(d))
    }
}

/// A single departure on a hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub dep_utc: i64,
    pub arr_utc: i64,
    pub hop: HopId,
    pub ordinal: u32,
}

/// Minimum transfer times: mode defaults plus per-station overrides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferRules {
    pub ground_s: u32,
    pub air_s: u32,
    pub station_override: BTreeMap<StationId, u32>,
}

impl Default for TransferRules {
    fn default() -> Self {
        Self {
            ground_s: 300,
            air_s: 2700,
            station_override: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct NetworkBuilder {
    pub stations: Vec<Station>,
    pub routes: Vec<Route>,
    pub hops: Vec<Hop>,
    pub timezones: Vec<UtcOffsets>,
    pub transfers: TransferRules,
    pub horizon: (i64, i64),
}

impl NetworkBuilder {
    pub fn new(horizon: (i64, i64)) -> Self {
        Self {
            horizon,
            timezones: vec![UtcOffsets::fixed(0)],
            ..Self::default()
        }
    }

    pub fn add_timezone(&mut self, tz: UtcOffsets) -> u16 {
        if let Some(i) = self.timezones.iter().position(|z| *z == tz) {
            return i as u16;
        }
        self.timezones.push(tz);
        (self.timezones.len() - 1) as u16
    }

    pub fn add_station(&mut self, name: impl Into<String>, pos: LatLon, tz: u16) -> StationId {
        let id = self.stations.len() as StationId;
        self.stations.push(Station {
            id,
            name: name.into(),
            lat: pos.lat,
            lon: pos.lon,
            tz,
            cluster: None,
        });
        id
    }

    pub fn add_route(&mut self, name: impl Into<String>, agency: impl Into<String>, mode: Mode) -> RouteId {
        self.routes.push(Route {
            name: name.into(),
            agency: agency.into(),
            mode,
        });
        (self.routes.len() - 1) as RouteId
    }

    /// Like [`add_route`](Self::add_route) but reuses an identical route.
    pub fn shared_route(&mut self, name: &str, mode: Mode) -> RouteId {
        match self
            .routes
            .iter()
            .position(|r| r.name == name && r.agency.is_empty() && r.mode == mode)
        {
            Some(i) => i as RouteId,
            None => self.add_route(name, "", mode),
        }
    }

    pub fn station_pos(&self, s: StationId) -> LatLon {
        self.stations[s as usize].pos()
    }

    /// Adds a hop whose route distance defaults to the great-circle distance.
    pub fn add_hop(
        &mut self,
        from: StationId,
        to: StationId,
        route: RouteId,
        schedule: Schedule,
        route_distance_m: Option<u32>,
    ) -> HopId {
        let id = self.hops.len() as HopId;
        let gc = great_circle_m(self.station_pos(from), self.station_pos(to)).ceil() as u32;
        let mode = self.routes[route as usize].mode;
        self.hops.push(Hop {
            id,
            from,
            to,
            route,
            mode,
            schedule,
            route_distance_m: route_distance_m.unwrap_or(gc).max(gc),
            fare_estimate: None,
        });
        id
    }

    pub fn build(self) -> Result<Network> {
        Network::from_parts(self)
    }
}

/// Immutable time-dependent graph.
#[derive(Debug, Clone)]
pub struct Network {
    stations: Vec<Station>,
    routes: Vec<Route>,
    hops: Vec<Hop>,
    timezones: Vec<UtcOffsets>,
    transfers: TransferRules,
    horizon: (i64, i64),
    out_hops: Vec<Vec<HopId>>,
    in_hops: Vec<Vec<HopId>>,
    node_of: Vec<StationId>,
    node_out: Vec<Vec<HopId>>,
    node_in: Vec<Vec<HopId>>,
    members: Vec<Vec<StationId>>,
}

impl Network {
    fn from_parts(b: NetworkBuilder) -> Result<Self> {
        let NetworkBuilder {
            stations,
            routes,
            hops,
            timezones,
            transfers,
            horizon,
        } = b;
        if horizon.1 < horizon.0 {
            return invalid("horizon end before start");
        }
        let n = stations.len();
        for (i, s) in stations.iter().enumerate() {
            if s.id as usize != i {
                return invalid(format!("station id {} at index {i}", s.id));
            }
            if !s.pos().is_valid() {
                return invalid(format!("station {} has invalid coordinates", s.id));
            }
            if s.tz as usize >= timezones.len() {
                return invalid(format!("station {} references unknown timezone", s.id));
            }
            if let Some(c) = s.cluster {
                if c as usize >= n {
                    return invalid(format!("station {} in unknown cluster {c}", s.id));
                }
            }
        }
        let mut out_hops = vec![Vec::new(); n];
        let mut in_hops = vec![Vec::new(); n];
        for (i, h) in hops.iter().enumerate() {
            if h.id as usize != i {
                return invalid(format!("hop id {} at index {i}", h.id));
            }
            if h.from as usize >= n || h.to as usize >= n {
                return invalid(format!("hop {} references unknown station", h.id));
            }
            if h.from == h.to {
                return invalid(format!("hop {} is a self loop", h.id));
            }
            let route = routes
                .get(h.route as usize)
                .ok_or_else(|| Error::Validation(format!("hop {} has unknown route", h.id)))?;
            if route.mode != h.mode {
                return invalid(format!("hop {} mode differs from its route", h.id));
            }
            let gc = great_circle_m(stations[h.from as usize].pos(), stations[h.to as usize].pos());
            if f64::from(h.route_distance_m) + 1.0 < gc {
                return invalid(format!("hop {} route distance below great-circle", h.id));
            }
            match &h.schedule {
                Schedule::Timed(d) => {
                    if !h.mode.is_timetabled() {
                        return invalid(format!("hop {}: {} cannot be timetabled", h.id, h.mode.label()));
                    }
                    let (Some(first), Some(last)) = (d.first_dep(), d.last_dep()) else {
                        return invalid(format!("scheduled hop {} has no departures", h.id));
                    };
                    if first < horizon.0 || last >= horizon.1 {
                        return invalid(format!("hop {} has departures outside the horizon", h.id));
                    }
                }
                Schedule::Fixed { duration_s } => {
                    if *duration_s == 0 {
                        return invalid(format!("hop {} has zero duration", h.id));
                    }
                }
            }
            out_hops[h.from as usize].push(h.id);
            in_hops[h.to as usize].push(h.id);
        }
        let node_of: Vec<StationId> = stations
            .iter()
            .map(|s| s.cluster.unwrap_or(s.id))
            .collect();
        let mut members = vec![Vec::new(); n];
        for (s, &c) in node_of.iter().enumerate() {
            members[c as usize].push(s as StationId);
        }
        for (s, &c) in node_of.iter().enumerate() {
            if node_of[c as usize] != c {
                return invalid(format!("station {s} clustered under non-representative {c}"));
            }
        }
        let mut node_out = vec![Vec::new(); n];
        let mut node_in = vec![Vec::new(); n];
        for h in &hops {
            node_out[node_of[h.from as usize] as usize].push(h.id);
            node_in[node_of[h.to as usize] as usize].push(h.id);
        }
        Ok(Self {
            stations,
            routes,
            hops,
            timezones,
            transfers,
            horizon,
            out_hops,
            in_hops,
            node_of,
            node_out,
            node_in,
            members,
        })
    }

    pub fn into_builder(self) -> NetworkBuilder {
        NetworkBuilder {
            stations: self.stations,
            routes: self.routes,
            hops: self.hops,
            timezones: self.timezones,
            transfers: self.transfers,
            horizon: self.horizon,
        }
    }

    pub fn to_builder(&self) -> NetworkBuilder {
        self.clone().into_builder()
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn station(&self, id: StationId) -> &Station {
        &self.stations[id as usize]
    }

    pub fn station_count(&self) -> usize {
        self.stations.len()
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn route(&self, id: RouteId) -> &Route {
        &self.routes[id as usize]
    }

    pub fn hops(&self) -> &[Hop] {
        &self.hops
    }

    pub fn hop(&self, id: HopId) -> &Hop {
        &self.hops[id as usize]
    }

    pub fn timezones(&self) -> &[UtcOffsets] {
        &self.timezones
    }

    pub fn tz_of(&self, s: StationId) -> &UtcOffsets {
        &self.timezones[self.station(s).tz as usize]
    }

    pub fn transfer_rules(&self) -> &TransferRules {
        &self.transfers
    }

    pub fn horizon(&self) -> (i64, i64) {
        self.horizon
    }

    pub fn out_hops(&self, s: StationId) -> &[HopId] {
        &self.out_hops[s as usize]
    }

    pub fn in_hops(&self, s: StationId) -> &[HopId] {
        &self.in_hops[s as usize]
    }

    pub fn degree(&self, s: StationId) -> usize {
        self.out_hops[s as usize].len() + self.in_hops[s as usize].len()
    }

    pub fn event_count(&self) -> usize {
        self.hops
            .iter()
            .filter_map(Hop::departures)
            .map(DepartureList::len)
            .sum()
    }

    pub fn find_station(&self, id: StationId) -> Result<&Station> {
        self.stations
            .get(id as usize)
            .ok_or_else(|| Error::UnknownStation(id.to_string()))
    }

    // -- cluster view --------------------------------------------------------

    /// Search node of a station: its cluster representative, or itself.
    #[inline]
    pub fn node_of(&self, s: StationId) -> StationId {
        self.node_of[s as usize]
    }

    pub fn is_clustered(&self) -> bool {
        self.stations.iter().any(|s| s.cluster.is_some_and(|c| c != s.id))
    }

    /// Hops leaving any member of node `n`.
    pub fn node_out(&self, n: StationId) -> &[HopId] {
        &self.node_out[n as usize]
    }

    pub fn node_in(&self, n: StationId) -> &[HopId] {
        &self.node_in[n as usize]
    }

    pub fn members(&self, n: StationId) -> &[StationId] {
        &self.members[n as usize]
    }

    /// Implicit walk between two members of the same cluster, as
    /// `(seconds, meters)`. Zero for identical stations.
    pub fn displacement(&self, a: StationId, b: StationId) -> (u32, u32) {
        if a == b {
            return (0, 0);
        }
        let m = great_circle_m(self.station(a).pos(), self.station(b).pos()) * WALK_DETOUR;
        ((m / WALK_SPEED_MPS).ceil() as u32, m.round() as u32)
    }

    /// Minimum time between arriving on `h_in` and departing on `h_out` at
    /// the station `h_out` leaves from.
    pub fn min_transfer(&self, h_in: HopId, h_out: HopId) -> u32 {
        let (a, b) = (self.hop(h_in), self.hop(h_out));
        if !b.is_scheduled() {
            return 0;
        }
        if a.is_scheduled() && a.route == b.route && a.to == b.from {
            return 0;
        }
        if let Some(&s) = self.transfers.station_override.get(&b.from) {
            return s;
        }
        if a.mode == Mode::Plane || b.mode == Mode::Plane {
            self.transfers.air_s
        } else {
            self.transfers.ground_s
        }
    }

    /// Seconds from the arrival of `h_in` until `h_out` can be boarded,
    /// including any intra-cluster displacement.
    #[inline]
    pub fn connection_gap(&self, h_in: HopId, h_out: HopId) -> u32 {
        let (a, b) = (self.hop(h_in), self.hop(h_out));
        self.displacement(a.to, b.from).0 + self.min_transfer(h_in, h_out)
    }
}
