//! Real-time annotations on individual departures: delays, cancellations,
//! fares and seat availability.
//!
//! Annotations live in an index beside the network, keyed by
//! `(hop, ordinal, kind)` where the ordinal is the event's position in the
//! hop's decoded departure list. The network itself is never modified, so
//! clearing the overlay restores baseline results exactly. Queries take an
//! [`ActiveOverlay`] at start; later writes do not affect them.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use chrono::DateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{HopId, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AnnotationKind {
    Delay { dep_delta_s: i32, arr_delta_s: i32 },
    Cancelled,
    Fare { amount: f64, currency: String },
    Seats { available: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KindTag {
    Delay,
    Cancelled,
    Fare,
    Seats,
}

impl AnnotationKind {
    pub fn tag(&self) -> KindTag {
        match self {
            Self::Delay { .. } => KindTag::Delay,
            Self::Cancelled => KindTag::Cancelled,
            Self::Fare { .. } => KindTag::Fare,
            Self::Seats { .. } => KindTag::Seats,
        }
    }
}

impl FromStr for KindTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delay" => Ok(Self::Delay),
            "cancelled" | "canceled" => Ok(Self::Cancelled),
            "fare" => Ok(Self::Fare),
            "seats" => Ok(Self::Seats),
            _ => Err(Error::Validation(format!("unknown annotation kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub hop: HopId,
    pub ordinal: u32,
    #[serde(flatten)]
    pub kind: AnnotationKind,
    pub valid_from_utc: i64,
    pub valid_to_utc: i64,
}

impl Annotation {
    pub fn is_active_at(&self, t: i64) -> bool {
        self.valid_from_utc <= t && t < self.valid_to_utc
    }
}

/// Which annotations [`Overlay::clear`] removes. Empty matches everything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Selector {
    pub hop: Option<HopId>,
    pub ordinal: Option<u32>,
    pub kind: Option<KindTag>,
}

impl Selector {
    fn matches(&self, key: &(HopId, u32, KindTag)) -> bool {
        self.hop.is_none_or(|h| h == key.0)
            && self.ordinal.is_none_or(|o| o == key.1)
            && self.kind.is_none_or(|k| k == key.2)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overlay {
    epoch: u64,
    index: BTreeMap<(HopId, u32, KindTag), Annotation>,
}

impl Overlay {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn annotations(&self) -> impl Iterator<Item = &Annotation> {
        self.index.values()
    }

    /// Adds or replaces the annotation for its `(hop, ordinal, kind)`.
    pub fn apply(&mut self, net: &Network, a: Annotation) -> Result<u64> {
        let hop = net
            .hops()
            .get(a.hop as usize)
            .ok_or_else(|| Error::Validation(format!("unknown hop {}", a.hop)))?;
        let ev = hop
            .event_at(a.ordinal)
            .ok_or_else(|| Error::Validation(format!("hop {} has no event {}", a.hop, a.ordinal)))?;
        if a.valid_from_utc >= a.valid_to_utc {
            return Err(Error::Validation("annotation validity interval is empty".into()));
        }
        match &a.kind {
            AnnotationKind::Delay { dep_delta_s, arr_delta_s } => {
                if ev.arr_utc + i64::from(*arr_delta_s) <= ev.dep_utc + i64::from(*dep_delta_s) {
                    return Err(Error::Validation("delayed arrival must follow delayed departure".into()));
                }
            }
            AnnotationKind::Fare { amount, .. } if !(amount.is_finite() && *amount >= 0.0) => {
                return Err(Error::Validation("fare must be a non-negative number".into()));
            }
            _ => {}
        }
        self.index.insert((a.hop, a.ordinal, a.kind.tag()), a);
        self.epoch += 1;
        Ok(self.epoch)
    }

    pub fn clear(&mut self, selector: &Selector) -> u64 {
        self.index.retain(|k, _| !selector.matches(k));
        self.epoch += 1;
        self.epoch
    }

    /// Annotations in force for a query whose earliest departure is `t`.
    pub fn active_at(&self, t: i64) -> ActiveOverlay {
        let mut out = ActiveOverlay::default();
        for a in self.index.values().filter(|a| a.is_active_at(t)) {
            let adj = out.events.entry((a.hop, a.ordinal)).or_default();
            match &a.kind {
                AnnotationKind::Delay { dep_delta_s, arr_delta_s } => {
                    adj.dep_delta = i64::from(*dep_delta_s);
                    adj.arr_delta = i64::from(*arr_delta_s);
                    let s = out.shifts.entry(a.hop).or_insert((0, 0));
                    s.0 = s.0.min(adj.dep_delta);
                    s.1 = s.1.max(adj.dep_delta);
                }
                AnnotationKind::Cancelled => adj.cancelled = true,
                AnnotationKind::Seats { available } => adj.no_seats = !available,
                AnnotationKind::Fare { amount, .. } => {
                    adj.fare = Some(*amount);
                    *out.fare_hops.entry(a.hop).or_default() += 1;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Adjust {
    dep_delta: i64,
    arr_delta: i64,
    cancelled: bool,
    no_seats: bool,
    fare: Option<f64>,
}

/// Effective times of one departure after annotations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Effective {
    Rejected,
    Ok { dep_utc: i64, arr_utc: i64, fare: Option<f64> },
}

/// Query-time view of an overlay: only annotations valid at the query's
/// earliest departure.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActiveOverlay {
    events: HashMap<(HopId, u32), Adjust>,
    /// Per hop, the most negative and most positive departure shift.
    shifts: HashMap<HopId, (i64, i64)>,
    fare_hops: HashMap<HopId, u32>,
}

impl ActiveOverlay {
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn effective(&self, hop: HopId, ordinal: u32, dep_utc: i64, arr_utc: i64) -> Effective {
        match self.events.get(&(hop, ordinal)) {
            None => Effective::Ok { dep_utc, arr_utc, fare: None },
            Some(a) if a.cancelled || a.no_seats => Effective::Rejected,
            Some(a) => Effective::Ok {
                dep_utc: dep_utc + a.dep_delta,
                arr_utc: arr_utc + a.arr_delta,
                fare: a.fare,
            },
        }
    }

    /// `(earliest, latest)` departure shift applied to any event of `hop`.
    pub fn shift(&self, hop: HopId) -> (i64, i64) {
        self.shifts.get(&hop).copied().unwrap_or((0, 0))
    }

    /// Delayed events as `(hop, ordinal, dep_delta, arr_delta)`.
    pub fn delays(&self) -> impl Iterator<Item = (HopId, u32, i64, i64)> + '_ {
        self.events
            .iter()
            .filter(|(_, a)| a.dep_delta != 0 || a.arr_delta != 0)
            .map(|(&(h, o), a)| (h, o, a.dep_delta, a.arr_delta))
    }

    pub fn has_fares(&self, hop: HopId) -> bool {
        self.fare_hops.contains_key(&hop)
    }
}

/// Effective event for `(hop, ordinal)` in `overlay` at time `t`, or
/// `None` when the event does not exist.
pub fn effective_event(net: &Network, overlay: &Overlay, hop: HopId, ordinal: u32, t: i64) -> Option<Effective> {
    let ev = net.hops().get(hop as usize)?.event_at(ordinal)?;
    Some(overlay.active_at(t).effective(hop, ordinal, ev.dep_utc, ev.arr_utc))
}

/// Shared overlay for concurrent queries. Readers take a snapshot; writers
/// build a new overlay and swap it in.
#[derive(Debug, Default)]
pub struct OverlayHandle {
    inner: RwLock<Arc<Overlay>>,
}

impl OverlayHandle {
    pub fn new(o: Overlay) -> Self {
        Self { inner: RwLock::new(Arc::new(o)) }
    }

    pub fn snapshot(&self) -> Arc<Overlay> {
        self.inner.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn update<R>(&self, f: impl FnOnce(&mut Overlay) -> R) -> R {
        let mut guard = self.inner.write().unwrap_or_else(|e| e.into_inner());
        let mut next = (**guard).clone();
        let r = f(&mut next);
        *guard = Arc::new(next);
        r
    }
}

fn parse_time(s: &str) -> std::result::Result<i64, String> {
    if let Ok(v) = s.parse::<i64>() {
        return Ok(v);
    }
    DateTime::parse_from_rfc3339(s)
        .map(|d| d.timestamp())
        .map_err(|_| format!("bad time {s:?}"))
}

/// Parses one feed record `hop_id ordinal kind args... valid_from valid_to`.
/// Times are UTC seconds or RFC 3339 timestamps.
pub fn parse_annotation(line: &str) -> std::result::Result<Annotation, String> {
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() < 5 {
        return Err("expected: hop_id ordinal kind args... valid_from valid_to".into());
    }
    let num = |s: &str, what: &str| s.parse::<i64>().map_err(|_| format!("bad {what} {s:?}"));
    let hop = num(f[0], "hop id")? as HopId;
    let ordinal = num(f[1], "ordinal")? as u32;
    let args = &f[3..f.len() - 2];
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(format!("{} takes {n} argument(s)", f[2]))
        }
    };
    let kind = match f[2].parse::<KindTag>().map_err(|e| e.to_string())? {
        KindTag::Delay => {
            arity(2)?;
            AnnotationKind::Delay {
                dep_delta_s: num(args[0], "delay")? as i32,
                arr_delta_s: num(args[1], "delay")? as i32,
            }
        }
        KindTag::Cancelled => {
            arity(0)?;
            AnnotationKind::Cancelled
        }
        KindTag::Fare => {
            arity(2)?;
            AnnotationKind::Fare {
                amount: args[0].parse().map_err(|_| format!("bad fare {:?}", args[0]))?,
                currency: args[1].to_string(),
            }
        }
        KindTag::Seats => {
            arity(1)?;
            let available = match args[0] {
                "yes" | "true" | "1" => true,
                "no" | "false" | "0" => false,
                s => return Err(format!("bad seat availability {s:?}")),
            };
            AnnotationKind::Seats { available }
        }
    };
    Ok(Annotation {
        hop,
        ordinal,
        kind,
        valid_from_utc: parse_time(f[f.len() - 2])?,
        valid_to_utc: parse_time(f[f.len() - 1])?,
    })
}

/// Parses a feed, skipping blank lines and `#` comments.
pub fn parse_feed(name: &str, text: &str) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_annotation(line).map_err(|message| Error::Record {
            file: name.to_string(),
            line: i as u64 + 1,
            message,
        })?);
    }
    Ok(out)
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ", self.hop, self.ordinal)?;
        match &self.kind {
            AnnotationKind::Delay { dep_delta_s, arr_delta_s } => write!(f, "delay {dep_delta_s} {arr_delta_s}")?,
            AnnotationKind::Cancelled => write!(f, "cancelled")?,
            AnnotationKind::Fare { amount, currency } => write!(f, "fare {amount} {currency}")?,
            AnnotationKind::Seats { available } => write!(f, "seats {}", if *available { "yes" } else { "no" })?,
        }
        write!(f, " {} {}", self.valid_from_utc, self.valid_to_utc)
    }
}
