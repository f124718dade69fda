//! Geo-ratio pruning: paths whose route distance is too large relative to
//! the straight-line distance between the endpoints are ignored.

use serde::{Deserialize, Serialize};

/// Thresholds on `D_route / D_geo`. The effective threshold grows for short
/// trips: `G_eff = G_base * (1 + D0 / max(D_geo, D0))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoGate {
    pub ground: f64,
    pub air: f64,
    pub d0_m: f64,
}

impl Default for GeoGate {
    fn default() -> Self {
        Self {
            ground: 2.5,
            air: 4.0,
            d0_m: 50_000.0,
        }
    }
}

impl GeoGate {
    pub fn effective(&self, air: bool, d_geo_m: f64) -> f64 {
        let base = if air { self.air } else { self.ground };
        base * (1.0 + self.d0_m / d_geo_m.max(self.d0_m))
    }

    /// Largest admissible route distance, or infinity when the endpoints
    /// coincide.
    pub fn max_route_m(&self, air: bool, d_geo_m: f64) -> f64 {
        if d_geo_m < 1.0 {
            return f64::INFINITY;
        }
        self.effective(air, d_geo_m) * d_geo_m
    }

    pub fn keep(&self, air: bool, d_route_m: f64, d_geo_m: f64) -> bool {
        d_route_m <= self.max_route_m(air, d_geo_m)
    }
}

/// `true` when the path is kept. `None` disables the gate.
pub fn geo_ratio_gate(gate: Option<&GeoGate>, air: bool, d_route_m: f64, d_geo_m: f64) -> bool {
    gate.is_none_or(|g| g.keep(air, d_route_m, d_geo_m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        let g = GeoGate::default();
        assert!(g.keep(false, 150_000.0, 100_000.0));
        assert!(!g.keep(false, 900_000.0, 100_000.0));
        assert_eq!(g.effective(true, 40_000.0), 8.0);
        assert_eq!(g.effective(true, 10_000.0), 8.0);
        assert!(!g.keep(true, 360_000.0, 40_000.0));
        assert!(!g.keep(true, 90_000.0, 10_000.0));
        assert!(g.keep(false, 5_000.0, 0.0));
        assert!(geo_ratio_gate(None, false, 1e9, 1.0));
    }
}
