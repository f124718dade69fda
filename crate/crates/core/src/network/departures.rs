//! Repetition-compressed departure lists.
//!
//! A list is a sequence of blocks. Each block is an arithmetic progression
//! of departure times sharing a single trip duration. Irregular departures
//! end up as blocks of length one, so no periodicity is assumed; it is only
//! exploited where present.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One run of equally spaced departures with a common duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub base_utc: i64,
    /// Gap between consecutive departures; `0` when `count == 1`.
    pub period: u32,
    pub count: u32,
    pub duration: u32,
}

impl Block {
    #[inline]
    fn dep(&self, k: u32) -> i64 {
        self.base_utc + i64::from(self.period) * i64::from(k)
    }

    #[inline]
    fn last_dep(&self) -> i64 {
        self.dep(self.count - 1)
    }
}

/// A departure as stored in a list, before it is attached to a hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Departure {
    pub dep_utc: i64,
    pub duration: u32,
    /// Index within the decoded list.
    pub ordinal: u32,
}

impl Departure {
    #[inline]
    pub fn arr_utc(&self) -> i64 {
        self.dep_utc + i64::from(self.duration)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DepartureList {
    blocks: Vec<Block>,
    /// `starts[i]` is the ordinal of the first departure in `blocks[i]`.
    starts: Vec<u32>,
    total: u32,
}

impl DepartureList {
    /// Greedy run-length encoding over `(gap, duration)`.
    ///
    /// Departures must be strictly ascending and durations positive.
    pub fn encode(events: &[(i64, u32)]) -> Result<Self> {
        for (i, w) in events.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return invalid(format!(
                    "departure {} at {} not after previous {}",
                    i + 1,
                    w[1].0,
                    w[0].0
                ));
            }
        }
        if let Some(&(t, _)) = events.iter().find(|e| e.1 == 0) {
            return invalid(format!("zero duration at departure {t}"));
        }
        let mut blocks = Vec::new();
        let mut i = 0;
        while i < events.len() {
            let (base, dur) = events[i];
            let mut block = Block {
                base_utc: base,
                period: 0,
                count: 1,
                duration: dur,
            };
            if let Some(&(next, next_dur)) = events.get(i + 1) {
                let gap = next - base;
                if next_dur == dur && gap <= i64::from(u32::MAX) {
                    block.period = gap as u32;
                    block.count = 2;
                    while let Some(&(t, d)) = events.get(i + block.count as usize) {
                        if d != dur || t - block.last_dep() != gap {
                            break;
                        }
                        block.count += 1;
                    }
                }
            }
            i += block.count as usize;
            blocks.push(block);
        }
        Ok(Self::from_blocks_unchecked(blocks))
    }

    /// Rebuilds a list from stored blocks, checking ordering.
    pub fn from_blocks(blocks: Vec<Block>) -> Result<Self> {
        let mut prev: Option<i64> = None;
        for b in &blocks {
            if b.count == 0 {
                return invalid("empty departure block");
            }
            if b.count > 1 && b.period == 0 {
                return invalid("multi-departure block with zero period");
            }
            if b.duration == 0 {
                return invalid("zero duration block");
            }
            if prev.is_some_and(|p| b.base_utc <= p) {
                return invalid("departure blocks overlap or are unsorted");
            }
            prev = Some(b.last_dep());
        }
        Ok(Self::from_blocks_unchecked(blocks))
    }

    fn from_blocks_unchecked(blocks: Vec<Block>) -> Self {
        let mut starts = Vec::with_capacity(blocks.len());
        let mut total = 0u32;
        for b in &blocks {
            starts.push(total);
            total += b.count;
        }
        Self {
            blocks,
            starts,
            total,
        }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.total as usize
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn decode(&self) -> Vec<(i64, u32)> {
        self.iter().map(|d| (d.dep_utc, d.duration)).collect()
    }

    pub fn iter(&self) -> Cursor<'_> {
        Cursor {
            list: self,
            block: 0,
            k: 0,
        }
    }

    pub fn first_dep(&self) -> Option<i64> {
        self.blocks.first().map(|b| b.base_utc)
    }

    pub fn last_dep(&self) -> Option<i64> {
        self.blocks.last().map(Block::last_dep)
    }

    /// Iterates departures with `dep_utc >= t`, in ascending order.
    pub fn iter_from(&self, t: i64) -> Cursor<'_> {
        let block = self.blocks.partition_point(|b| b.last_dep() < t);
        let k = match self.blocks.get(block) {
            Some(b) if t > b.base_utc => {
                let off = (t - b.base_utc) as u64;
                let p = u64::from(b.period);
                off.div_ceil(p) as u32
            }
            _ => 0,
        };
        Cursor {
            list: self,
            block,
            k,
        }
    }

    /// Iterates departures with `dep_utc < t` in descending order.
    pub fn iter_before(&self, t: i64) -> RevCursor<'_> {
        let block = self.blocks.partition_point(|b| b.base_utc < t);
        if block == 0 {
            return RevCursor {
                list: self,
                block: 0,
                k: None,
            };
        }
        let b = &self.blocks[block - 1];
        let k = if b.last_dep() < t {
            b.count - 1
        } else {
            // base < t <= last, so period > 0
            let off = (t - 1 - b.base_utc) as u64;
            (off / u64::from(b.period)) as u32
        };
        RevCursor {
            list: self,
            block: block - 1,
            k: Some(k),
        }
    }

    pub fn next_at_or_after(&self, t: i64) -> Option<Departure> {
        self.iter_from(t).next()
    }

    pub fn in_window(&self, t0: i64, t1: i64) -> impl Iterator<Item = Departure> + '_ {
        self.iter_from(t0).take_while(move |d| d.dep_utc < t1)
    }

    pub fn get(&self, ordinal: u32) -> Option<Departure> {
        if ordinal >= self.total {
            return None;
        }
        let bi = self.starts.partition_point(|&s| s <= ordinal) - 1;
        let b = &self.blocks[bi];
        let k = ordinal - self.starts[bi];
        Some(Departure {
            dep_utc: b.dep(k),
            duration: b.duration,
            ordinal,
        })
    }

    pub fn min_duration(&self) -> Option<u32> {
        self.blocks.iter().map(|b| b.duration).min()
    }
}

pub struct Cursor<'a> {
    list: &'a DepartureList,
    block: usize,
    k: u32,
}

impl Iterator for Cursor<'_> {
    type Item = Departure;

    #[inline]
    fn next(&mut self) -> Option<Departure> {
        let b = self.list.blocks.get(self.block)?;
        let d = Departure {
            dep_utc: b.dep(self.k),
            duration: b.duration,
            ordinal: self.list.starts[self.block] + self.k,
        };
        self.k += 1;
        if self.k >= b.count {
            self.block += 1;
            self.k = 0;
        }
        Some(d)
    }
}

pub struct RevCursor<'a> {
    list: &'a DepartureList,
    block: usize,
    k: Option<u32>,
}

impl Iterator for RevCursor<'_> {
    type Item = Departure;

    fn next(&mut self) -> Option<Departure> {
        let k = self.k?;
        let b = &self.list.blocks[self.block];
        let d = Departure {
            dep_utc: b.dep(k),
            duration: b.duration,
            ordinal: self.list.starts[self.block] + k,
        };
        self.k = if k > 0 {
            Some(k - 1)
        } else if self.block > 0 {
            self.block -= 1;
            Some(self.list.blocks[self.block].count - 1)
        } else {
            None
        };
        Some(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn periodic() -> DepartureList {
        DepartureList::encode(&[(600, 50), (1200, 50), (1800, 50), (2400, 50)]).unwrap()
    }

    #[test]
    fn arithmetic_progression_is_one_block() {
        let l = periodic();
        assert_eq!(
            l.blocks(),
            &[Block {
                base_utc: 600,
                period: 600,
                count: 4,
                duration: 50
            }]
        );
    }

    #[test]
    fn empty_list() {
        let l = DepartureList::encode(&[]).unwrap();
        assert!(l.is_empty());
        assert_eq!(l.len(), 0);
        assert!(l.next_at_or_after(0).is_none());
    }

    #[test]
    fn irregular_list_keeps_every_departure() {
        let ev = [(10, 5), (17, 5), (900, 8)];
        let l = DepartureList::encode(&ev).unwrap();
        assert_eq!(l.decode(), ev.to_vec());
        // (10,17) share period and duration, so greedy merges them.
        assert!(l.blocks().len() <= 3);
        let ev = [(10, 5), (17, 6), (900, 8)];
        let l = DepartureList::encode(&ev).unwrap();
        assert_eq!(l.blocks().len(), 3);
        assert_eq!(l.decode(), ev.to_vec());
    }

    #[test]
    fn rejects_unsorted_and_duplicates() {
        assert!(DepartureList::encode(&[(10, 5), (10, 5)]).is_err());
        assert!(DepartureList::encode(&[(20, 5), (10, 5)]).is_err());
        assert!(DepartureList::encode(&[(20, 0)]).is_err());
    }

    #[test]
    fn next_event_lookup() {
        let l = periodic();
        assert_eq!(l.next_at_or_after(700).unwrap().dep_utc, 1200);
        assert_eq!(l.next_at_or_after(2400).unwrap().dep_utc, 2400);
        assert!(l.next_at_or_after(2401).is_none());
        assert_eq!(l.next_at_or_after(-5).unwrap().ordinal, 0);
    }

    #[test]
    fn window_queries() {
        let l = periodic();
        let deps: Vec<i64> = l.in_window(600, 1801).map(|d| d.dep_utc).collect();
        assert_eq!(deps, vec![600, 1200, 1800]);
        assert_eq!(l.in_window(0, 600).count(), 0);
        let irregular = DepartureList::encode(&[(10, 5), (17, 6), (900, 8)]).unwrap();
        assert_eq!(irregular.in_window(0, 10_000).count(), 3);
    }

    #[test]
    fn ordinal_lookup_and_reverse_iteration() {
        let l = DepartureList::encode(&[(10, 5), (20, 5), (30, 5), (95, 7), (400, 9)]).unwrap();
        for (i, (dep, dur)) in l.decode().into_iter().enumerate() {
            let d = l.get(i as u32).unwrap();
            assert_eq!((d.dep_utc, d.duration), (dep, dur));
        }
        assert!(l.get(5).is_none());
        let rev: Vec<i64> = l.iter_before(96).map(|d| d.dep_utc).collect();
        assert_eq!(rev, vec![95, 30, 20, 10]);
        let rev: Vec<i64> = l.iter_before(25).map(|d| d.dep_utc).collect();
        assert_eq!(rev, vec![20, 10]);
        assert_eq!(l.iter_before(10).count(), 0);
    }

    #[test]
    fn week_of_ten_minute_service_compresses() {
        let ev: Vec<(i64, u32)> = (0..7 * 24 * 6).map(|i| (i * 600, 1500)).collect();
        let l = DepartureList::encode(&ev).unwrap();
        assert!(l.blocks().len() * 5 <= ev.len());
    }

    fn ascending() -> impl Strategy<Value = Vec<(i64, u32)>> {
        prop::collection::vec((1i64..2000, 1u32..4), 0..60).prop_map(|v| {
            let mut t = 0;
            v.into_iter()
                .map(|(gap, dur)| {
                    t += gap;
                    (t, dur * 300)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn roundtrip(ev in ascending()) {
            let l = DepartureList::encode(&ev).unwrap();
            prop_assert_eq!(l.decode(), ev.clone());
            let again = DepartureList::from_blocks(l.blocks().to_vec()).unwrap();
            prop_assert_eq!(again, l);
        }

        #[test]
        fn next_event_is_monotone(ev in ascending(), a in 0i64..100_000, b in 0i64..100_000) {
            let l = DepartureList::encode(&ev).unwrap();
            let (t, u) = if a <= b { (a, b) } else { (b, a) };
            if let (Some(x), Some(y)) = (l.next_at_or_after(t), l.next_at_or_after(u)) {
                prop_assert!(x.dep_utc <= y.dep_utc);
            }
            let brute = ev.iter().position(|e| e.0 >= t);
            prop_assert_eq!(l.next_at_or_after(t).map(|d| d.ordinal as usize), brute);
        }

        #[test]
        fn windows_split_disjointly(ev in ascending(), a in 0i64..60_000, b in 0i64..60_000, c in 0i64..60_000) {
            let mut ts = [a, b, c];
            ts.sort();
            let l = DepartureList::encode(&ev).unwrap();
            let left: Vec<_> = l.in_window(ts[0], ts[1]).collect();
            let right: Vec<_> = l.in_window(ts[1], ts[2]).collect();
            let whole: Vec<_> = l.in_window(ts[0], ts[2]).collect();
            prop_assert_eq!([left, right].concat(), whole);
        }

        #[test]
        fn reverse_cursor_matches_decode(ev in ascending(), t in 0i64..100_000) {
            let l = DepartureList::encode(&ev).unwrap();
            let rev: Vec<i64> = l.iter_before(t).map(|d| d.dep_utc).collect();
            let mut brute: Vec<i64> = ev.iter().map(|e| e.0).filter(|&d| d < t).collect();
            brute.reverse();
            prop_assert_eq!(rev, brute);
        }
    }
}
