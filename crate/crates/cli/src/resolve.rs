//! Station lookup: exact id, then unique name substring, then nearest to a
//! coordinate. An ambiguous name is an error listing the candidates.

use bbtime::network::{great_circle_m, LatLon, Network, StationId};
use bbtime::Error;

const MAX_CANDIDATES: usize = 10;

pub fn resolve_station(net: &Network, s: &str) -> Result<StationId, Error> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Validation("empty station".into()));
    }
    if let Ok(id) = s.parse::<StationId>() {
        if (id as usize) < net.station_count() {
            return Ok(id);
        }
        return Err(Error::UnknownStation(s.to_string()));
    }

    let needle = s.to_lowercase();
    let hits: Vec<StationId> = net
        .stations()
        .iter()
        .filter(|st| st.name.to_lowercase().contains(&needle))
        .map(|st| st.id)
        .collect();
    match hits.len() {
        1 => return Ok(hits[0]),
        0 => {}
        _ => {
            // A full-name match wins over longer names containing it.
            let exact: Vec<StationId> = hits
                .iter()
                .copied()
                .filter(|&id| net.station(id).name.to_lowercase() == needle)
                .collect();
            if exact.len() == 1 {
                return Ok(exact[0]);
            }
            return Err(ambiguous(net, s, &hits));
        }
    }

    if let Some(p) = parse_lat_lon(s) {
        return nearest(net, p).ok_or_else(|| Error::UnknownStation(s.to_string()));
    }
    Err(Error::UnknownStation(s.to_string()))
}

fn parse_lat_lon(s: &str) -> Option<LatLon> {
    let (a, b) = s.split_once(',')?;
    let p = LatLon::new(a.trim().parse().ok()?, b.trim().parse().ok()?);
    p.is_valid().then_some(p)
}

/// Nearest station by great-circle distance; lowest id on ties.
pub fn nearest(net: &Network, p: LatLon) -> Option<StationId> {
    net.stations()
        .iter()
        .map(|st| (great_circle_m(p, st.pos()), st.id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
}

fn ambiguous(net: &Network, s: &str, hits: &[StationId]) -> Error {
    let mut msg = format!("ambiguous station {s:?}, {} candidates:", hits.len());
    for &id in hits.iter().take(MAX_CANDIDATES) {
        let st = net.station(id);
        msg.push_str(&format!("\n  {id} {} {:.6},{:.6}", st.name, st.lat, st.lon));
    }
    if hits.len() > MAX_CANDIDATES {
        msg.push_str("\n  ...");
    }
    Error::Validation(msg)
}
