//! `BBT1` container: a magic header followed by tagged, length-prefixed
//! sections, all little-endian. See `docs/FORMAT.md` for the field layout.

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::network::{
    Block, DepartureList, Hop, Mode, Network, NetworkBuilder, Route, Schedule, Station,
    TransferRules, UtcOffsets,
};

pub const MAGIC: &[u8; 4] = b"BBT1";

pub type Tag = [u8; 4];

pub const HORIZON: Tag = *b"HORZ";
pub const TIMEZONES: Tag = *b"TZON";
pub const STATIONS: Tag = *b"STAT";
pub const ROUTES: Tag = *b"ROUT";
pub const HOPS: Tag = *b"HOPS";
pub const BLOCKS: Tag = *b"DEPB";
pub const TRANSFERS: Tag = *b"XFER";
pub const MESH: Tag = *b"MESH";

/// Triplet section tag for transfer count `t`.
pub fn triplet_tag(t: u8) -> Tag {
    [b'T', b'R', b'P', b'0' + t]
}

const NETWORK_TAGS: [Tag; 7] = [HORIZON, TIMEZONES, STATIONS, ROUTES, HOPS, BLOCKS, TRANSFERS];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Container {
    sections: Vec<(Tag, Vec<u8>)>,
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, tag: Tag) -> Option<&[u8]> {
        self.sections
            .iter()
            .find(|(t, _)| *t == tag)
            .map(|(_, b)| b.as_slice())
    }

    pub fn require(&self, tag: Tag) -> Result<&[u8]> {
        self.get(tag).ok_or_else(|| {
            Error::Format(format!("missing section {}", String::from_utf8_lossy(&tag)))
        })
    }

    /// Inserts or replaces a section. Sections are kept in tag order so the
    /// byte stream does not depend on insertion order.
    pub fn set(&mut self, tag: Tag, bytes: Vec<u8>) {
        match self.sections.binary_search_by(|(t, _)| t.cmp(&tag)) {
            Ok(i) => self.sections[i].1 = bytes,
            Err(i) => self.sections.insert(i, (tag, bytes)),
        }
    }

    pub fn remove(&mut self, tag: Tag) {
        self.sections.retain(|(t, _)| *t != tag);
    }

    pub fn tags(&self) -> impl Iterator<Item = Tag> + '_ {
        self.sections.iter().map(|(t, _)| *t)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        for (tag, body) in &self.sections {
            out.extend_from_slice(tag);
            out.write_u64::<LE>(body.len() as u64).unwrap();
            out.extend_from_slice(body);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(Error::Format("bad magic, expected BBT1".into()));
        }
        let mut rd = Cursor::new(&bytes[4..]);
        let mut c = Container::new();
        while (rd.position() as usize) < bytes.len() - 4 {
            let mut tag = [0u8; 4];
            rd.read_exact(&mut tag).map_err(truncated)?;
            let len = rd.read_u64::<LE>().map_err(truncated)? as usize;
            let start = rd.position() as usize;
            let body = bytes[4..]
                .get(start..start + len)
                .ok_or_else(|| Error::Format("section overruns file".into()))?;
            c.set(tag, body.to_vec());
            rd.set_position((start + len) as u64);
        }
        Ok(c)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }
}

fn truncated(_: std::io::Error) -> Error {
    Error::Format("truncated section".into())
}

// -- primitive helpers shared by section encoders ------------------------------

pub(crate) struct Writer(pub Vec<u8>);

impl Writer {
    pub fn new() -> Self {
        Self(Vec::new())
    }
    pub fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    pub fn u16(&mut self, v: u16) {
        self.0.write_u16::<LE>(v).unwrap();
    }
    pub fn u32(&mut self, v: u32) {
        self.0.write_u32::<LE>(v).unwrap();
    }
    pub fn i32(&mut self, v: i32) {
        self.0.write_i32::<LE>(v).unwrap();
    }
    pub fn u64(&mut self, v: u64) {
        self.0.write_u64::<LE>(v).unwrap();
    }
    pub fn i64(&mut self, v: i64) {
        self.0.write_i64::<LE>(v).unwrap();
    }
    pub fn f64(&mut self, v: f64) {
        self.0.write_f64::<LE>(v).unwrap();
    }
    pub fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

pub(crate) struct Reader<'a>(Cursor<&'a [u8]>);

impl<'a> Reader<'a> {
    pub fn new(b: &'a [u8]) -> Self {
        Self(Cursor::new(b))
    }
    pub fn u8(&mut self) -> Result<u8> {
        self.0.read_u8().map_err(truncated)
    }
    pub fn u16(&mut self) -> Result<u16> {
        self.0.read_u16::<LE>().map_err(truncated)
    }
    pub fn u32(&mut self) -> Result<u32> {
        self.0.read_u32::<LE>().map_err(truncated)
    }
    pub fn i32(&mut self) -> Result<i32> {
        self.0.read_i32::<LE>().map_err(truncated)
    }
    pub fn u64(&mut self) -> Result<u64> {
        self.0.read_u64::<LE>().map_err(truncated)
    }
    pub fn i64(&mut self) -> Result<i64> {
        self.0.read_i64::<LE>().map_err(truncated)
    }
    pub fn f64(&mut self) -> Result<f64> {
        self.0.read_f64::<LE>().map_err(truncated)
    }
    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let mut buf = vec![0u8; n];
        self.0.read_exact(&mut buf).map_err(truncated)?;
        String::from_utf8(buf).map_err(|_| Error::Format("invalid utf-8 string".into()))
    }
    pub fn is_done(&self) -> bool {
        self.0.position() as usize == self.0.get_ref().len()
    }
}

const NO_CLUSTER: u32 = u32::MAX;

/// Writes the network sections into `c`, replacing any existing ones.
pub fn write_network(c: &mut Container, net: &Network) {
    let mut w = Writer::new();
    w.i64(net.horizon().0);
    w.i64(net.horizon().1);
    c.set(HORIZON, w.0);

    let mut w = Writer::new();
    w.u32(net.timezones().len() as u32);
    for tz in net.timezones() {
        w.i32(tz.base);
        w.u32(tz.switches.len() as u32);
        for &(t, off) in &tz.switches {
            w.i64(t);
            w.i32(off);
        }
    }
    c.set(TIMEZONES, w.0);

    let mut w = Writer::new();
    w.u32(net.station_count() as u32);
    for s in net.stations() {
        w.str(&s.name);
        w.f64(s.lat);
        w.f64(s.lon);
        w.u16(s.tz);
        w.u32(s.cluster.unwrap_or(NO_CLUSTER));
    }
    c.set(STATIONS, w.0);

    let mut w = Writer::new();
    w.u32(net.routes().len() as u32);
    for r in net.routes() {
        w.str(&r.name);
        w.str(&r.agency);
        w.u8(r.mode.code());
    }
    c.set(ROUTES, w.0);

    let mut hw = Writer::new();
    let mut bw = Writer::new();
    let mut block_count = 0u32;
    hw.u32(net.hops().len() as u32);
    for h in net.hops() {
        hw.u32(h.from);
        hw.u32(h.to);
        hw.u32(h.route);
        hw.u32(h.route_distance_m);
        match h.fare_estimate {
            Some(f) => {
                hw.u8(1);
                hw.f64(f);
            }
            None => hw.u8(0),
        }
        match &h.schedule {
            Schedule::Timed(d) => {
                hw.u8(0);
                hw.u32(block_count);
                hw.u32(d.blocks().len() as u32);
                for b in d.blocks() {
                    bw.i64(b.base_utc);
                    bw.u32(b.period);
                    bw.u32(b.count);
                    bw.u32(b.duration);
                }
                block_count += d.blocks().len() as u32;
            }
            Schedule::Fixed { duration_s } => {
                hw.u8(1);
                hw.u32(*duration_s);
            }
        }
    }
    c.set(HOPS, hw.0);
    let mut w = Writer::new();
    w.u32(block_count);
    w.0.extend_from_slice(&bw.0);
    c.set(BLOCKS, w.0);

    let mut w = Writer::new();
    let rules = net.transfer_rules();
    w.u32(rules.ground_s);
    w.u32(rules.air_s);
    w.u32(rules.station_override.len() as u32);
    for (&s, &secs) in &rules.station_override {
        w.u32(s);
        w.u32(secs);
    }
    c.set(TRANSFERS, w.0);
}

pub fn read_network(c: &Container) -> Result<Network> {
    let mut r = Reader::new(c.require(HORIZON)?);
    let horizon = (r.i64()?, r.i64()?);
    let mut b = NetworkBuilder::new(horizon);

    let mut r = Reader::new(c.require(TIMEZONES)?);
    b.timezones.clear();
    for _ in 0..r.u32()? {
        let base = r.i32()?;
        let n = r.u32()?;
        let mut switches = Vec::with_capacity(n as usize);
        for _ in 0..n {
            switches.push((r.i64()?, r.i32()?));
        }
        b.timezones.push(UtcOffsets { base, switches });
    }

    let mut r = Reader::new(c.require(STATIONS)?);
    for id in 0..r.u32()? {
        let name = r.str()?;
        let (lat, lon) = (r.f64()?, r.f64()?);
        let tz = r.u16()?;
        let cl = r.u32()?;
        b.stations.push(Station {
            id,
            name,
            lat,
            lon,
            tz,
            cluster: (cl != NO_CLUSTER).then_some(cl),
        });
    }

    let mut r = Reader::new(c.require(ROUTES)?);
    for _ in 0..r.u32()? {
        let name = r.str()?;
        let agency = r.str()?;
        let mode = Mode::from_code(r.u8()?).ok_or_else(|| Error::Format("bad mode".into()))?;
        b.routes.push(Route { name, agency, mode });
    }

    let mut r = Reader::new(c.require(BLOCKS)?);
    let mut blocks = Vec::new();
    for _ in 0..r.u32()? {
        blocks.push(Block {
            base_utc: r.i64()?,
            period: r.u32()?,
            count: r.u32()?,
            duration: r.u32()?,
        });
    }

    let mut r = Reader::new(c.require(HOPS)?);
    for id in 0..r.u32()? {
        let (from, to, route, dist) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
        let fare = match r.u8()? {
            0 => None,
            _ => Some(r.f64()?),
        };
        let schedule = match r.u8()? {
            0 => {
                let (start, n) = (r.u32()? as usize, r.u32()? as usize);
                let slice = blocks
                    .get(start..start + n)
                    .ok_or_else(|| Error::Format("hop block range out of bounds".into()))?;
                Schedule::Timed(DepartureList::from_blocks(slice.to_vec())?)
            }
            _ => Schedule::Fixed {
                duration_s: r.u32()?,
            },
        };
        let mode = b
            .routes
            .get(route as usize)
            .ok_or_else(|| Error::Format("hop route out of bounds".into()))?
            .mode;
        b.hops.push(Hop {
            id,
            from,
            to,
            route,
            mode,
            schedule,
            route_distance_m: dist,
            fare_estimate: fare,
        });
    }

    let mut r = Reader::new(c.require(TRANSFERS)?);
    let mut rules = TransferRules {
        ground_s: r.u32()?,
        air_s: r.u32()?,
        ..TransferRules::default()
    };
    for _ in 0..r.u32()? {
        let s = r.u32()?;
        rules.station_override.insert(s, r.u32()?);
    }
    b.transfers = rules;
    b.build()
}

pub fn has_network(c: &Container) -> bool {
    NETWORK_TAGS.iter().all(|t| c.get(*t).is_some())
}

pub fn network_to_bytes(net: &Network) -> Vec<u8> {
    let mut c = Container::new();
    write_network(&mut c, net);
    c.to_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tests::two_stop;

    #[test]
    fn network_roundtrip_is_byte_stable() {
        let mut b = two_stop(&[(10, 5), (17, 6), (900, 8), (1000, 8), (1100, 8)]).into_builder();
        let w = b.add_route("walk", "", Mode::Walk);
        let h = b.add_hop(1, 0, w, Schedule::Fixed { duration_s: 970 }, Some(1300));
        b.hops[h as usize].fare_estimate = Some(12.5);
        b.transfers.station_override.insert(1, 90);
        let tz = b.add_timezone(UtcOffsets {
            base: -18000,
            switches: vec![(5000, -14400)],
        });
        b.stations[1].tz = tz;
        let net = b.build().unwrap();
        let bytes = network_to_bytes(&net);
        let back = read_network(&Container::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(network_to_bytes(&back), bytes);
        assert_eq!(back.hop(1).fare_estimate, Some(12.5));
        assert_eq!(back.hop(0).departures().unwrap().decode().len(), 5);
    }

    #[test]
    fn rejects_bad_magic_and_missing_sections() {
        assert!(Container::from_bytes(b"XXXX").is_err());
        let c = Container::from_bytes(MAGIC).unwrap();
        assert!(matches!(read_network(&c), Err(Error::Format(_))));
    }

    #[test]
    fn section_order_is_canonical() {
        let mut a = Container::new();
        a.set(*b"ZZZZ", vec![1]);
        a.set(*b"AAAA", vec![2]);
        let mut b = Container::new();
        b.set(*b"AAAA", vec![2]);
        b.set(*b"ZZZZ", vec![1]);
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_eq!(Container::from_bytes(&a.to_bytes()).unwrap(), a);
    }
}
