use std::collections::HashMap;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Haversine distance in meters.
pub fn great_circle_m(a: LatLon, b: LatLon) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Moves `from` by `east_m` / `north_m` meters on the local tangent plane.
pub fn offset_m(from: LatLon, east_m: f64, north_m: f64) -> LatLon {
    let dlat = north_m / EARTH_RADIUS_M;
    let dlon = east_m / (EARTH_RADIUS_M * from.lat.to_radians().cos().max(1e-9));
    LatLon::new(from.lat + dlat.to_degrees(), from.lon + dlon.to_degrees())
}

/// Uniform lat/lon bucketing for radius queries.
///
/// Cells are sized so that any pair within `radius_m` lies in the same or an
/// adjacent cell.
pub struct GridIndex {
    lat_step: f64,
    lon_step: f64,
    cells: HashMap<(i64, i64), Vec<u32>>,
    points: Vec<LatLon>,
}

impl GridIndex {
    pub fn new(points: &[LatLon], radius_m: f64) -> Self {
        let radius_m = radius_m.max(1.0);
        let lat_step = (radius_m / EARTH_RADIUS_M).to_degrees();
        let max_abs_lat = points
            .iter()
            .map(|p| p.lat.abs())
            .fold(0.0f64, f64::max)
            .min(89.0);
        let lon_step = (lat_step / max_abs_lat.to_radians().cos()).min(360.0);
        let mut cells: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            let key = ((p.lat / lat_step).floor() as i64, (p.lon / lon_step).floor() as i64);
            cells.entry(key).or_default().push(i as u32);
        }
        Self {
            lat_step,
            lon_step,
            cells,
            points: points.to_vec(),
        }
    }

    fn key(&self, p: LatLon) -> (i64, i64) {
        (
            (p.lat / self.lat_step).floor() as i64,
            (p.lon / self.lon_step).floor() as i64,
        )
    }

    /// Points within `radius_m` of `p`, ascending by index, excluding none.
    pub fn within(&self, p: LatLon, radius_m: f64) -> Vec<u32> {
        let (ci, cj) = self.key(p);
        let mut out = Vec::new();
        for di in -1..=1 {
            for dj in -1..=1 {
                if let Some(v) = self.cells.get(&(ci + di, cj + dj)) {
                    out.extend(
                        v.iter()
                            .copied()
                            .filter(|&i| great_circle_m(p, self.points[i as usize]) <= radius_m),
                    );
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// All unordered pairs `(i, j)`, `i < j`, within `radius_m`.
    pub fn pairs_within(&self, radius_m: f64) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for (i, p) in self.points.iter().enumerate() {
            for j in self.within(*p, radius_m) {
                if j as usize > i {
                    out.push((i as u32, j));
                }
            }
        }
        out
    }

    /// Nearest point to `p` satisfying `accept`, by brute force over all
    /// points when the grid neighbourhood is empty.
    pub fn nearest_by(&self, p: LatLon, accept: impl Fn(u32) -> bool) -> Option<u32> {
        let mut best: Option<(f64, u32)> = None;
        for (i, q) in self.points.iter().enumerate() {
            let i = i as u32;
            if !accept(i) {
                continue;
            }
            let d = great_circle_m(p, *q);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn haversine_reference_values() {
        let o = LatLon::new(0.0, 0.0);
        assert_eq!(great_circle_m(o, o), 0.0);
        let d = great_circle_m(o, LatLon::new(0.0, 1.0));
        assert!((d - 111_195.0).abs() < 10.0, "{d}");
        let anti = great_circle_m(o, LatLon::new(0.0, 180.0));
        assert!((anti - PI * EARTH_RADIUS_M).abs() < 1000.0);
    }

    #[test]
    fn grid_matches_brute_force() {
        let base = LatLon::new(52.0, 4.0);
        let pts: Vec<LatLon> = (0..200)
            .map(|i| {
                let x = ((i * 7919) % 113) as f64 * 97.0;
                let y = ((i * 104_729) % 127) as f64 * 83.0;
                offset_m(base, x, y)
            })
            .collect();
        let grid = GridIndex::new(&pts, 1500.0);
        let fast = grid.pairs_within(1500.0);
        let mut slow = Vec::new();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if great_circle_m(pts[i], pts[j]) <= 1500.0 {
                    slow.push((i as u32, j as u32));
                }
            }
        }
        assert_eq!(fast, slow);
    }

    #[test]
    fn offset_is_metric() {
        let a = LatLon::new(40.0, -74.0);
        let b = offset_m(a, 300.0, 400.0);
        assert!((great_circle_m(a, b) - 500.0).abs() < 1.0);
    }
}
