//! UTC offsets. The engine runs on UTC seconds; these are consulted only at
//! ingest and when rendering local times.

use serde::{Deserialize, Serialize};

/// Piecewise-constant UTC offset: `base` until the first switch, then each
/// `(switch_utc, offset)` from its switch time on.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UtcOffsets {
    pub base: i32,
    pub switches: Vec<(i64, i32)>,
}

impl UtcOffsets {
    pub fn fixed(offset: i32) -> Self {
        Self {
            base: offset,
            switches: Vec::new(),
        }
    }

    pub fn at_utc(&self, utc: i64) -> i32 {
        let i = self.switches.partition_point(|s| s.0 <= utc);
        if i == 0 {
            self.base
        } else {
            self.switches[i - 1].1
        }
    }

    pub fn to_local(&self, utc: i64) -> i64 {
        utc + i64::from(self.at_utc(utc))
    }

    /// Converts a local wall-clock instant to UTC. Around a switch the
    /// offset in force after conversion wins.
    pub fn to_utc(&self, local: i64) -> i64 {
        let guess = local - i64::from(self.base);
        let utc = local - i64::from(self.at_utc(guess));
        local - i64::from(self.at_utc(utc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_offset_roundtrip() {
        let z = UtcOffsets::fixed(-5 * 3600);
        assert_eq!(z.to_utc(10 * 3600), 15 * 3600);
        assert_eq!(z.to_local(15 * 3600), 10 * 3600);
    }

    #[test]
    fn switch_applies_after_its_instant() {
        let z = UtcOffsets {
            base: 3600,
            switches: vec![(1000, 7200)],
        };
        assert_eq!(z.at_utc(999), 3600);
        assert_eq!(z.at_utc(1000), 7200);
        assert_eq!(z.to_utc(100_000), 100_000 - 7200);
    }
}
