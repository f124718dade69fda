use super::geo::GridIndex;
use super::{LatLon, Network, StationId};
use crate::error::{invalid, Result};

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

/// Single-linkage clustering of stations within `radius_m` of each other.
///
/// Each cluster is represented by its member with the highest hop degree
/// (lowest id on ties). Search and precompute then treat the cluster as one
/// node.
pub fn cluster_stations(net: Network, radius_m: f64) -> Result<Network> {
    if radius_m.is_nan() || radius_m < 0.0 {
        return invalid("cluster radius must be non-negative");
    }
    let n = net.station_count();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    if radius_m > 0.0 && n > 1 {
        let pts: Vec<LatLon> = net.stations().iter().map(|s| s.pos()).collect();
        let grid = GridIndex::new(&pts, radius_m);
        for (a, b) in grid.pairs_within(radius_m) {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb) as usize] = ra.min(rb);
            }
        }
    }
    let mut rep: Vec<Option<StationId>> = vec![None; n];
    for s in 0..n as u32 {
        let root = find(&mut parent, s) as usize;
        let better = match rep[root] {
            None => true,
            Some(r) => net.degree(s) > net.degree(r),
        };
        if better {
            rep[root] = Some(s);
        }
    }
    let mut b = net.into_builder();
    for s in 0..n as u32 {
        let root = find(&mut parent, s) as usize;
        b.stations[s as usize].cluster = rep[root];
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::geo::offset_m;
    use crate::network::{DepartureList, Mode, NetworkBuilder, Schedule};

    fn net_with(offsets_m: &[f64]) -> Network {
        let o = LatLon::new(45.0, 7.0);
        let mut b = NetworkBuilder::new((0, 10_000));
        for (i, x) in offsets_m.iter().enumerate() {
            b.add_station(format!("s{i}"), offset_m(o, *x, 0.0), 0);
        }
        b.build().unwrap()
    }

    #[test]
    fn zero_radius_keeps_singletons() {
        let net = cluster_stations(net_with(&[0.0, 50.0, 100.0]), 0.0).unwrap();
        for s in net.stations() {
            assert_eq!(net.node_of(s.id), s.id);
        }
        assert!(!net.is_clustered());
    }

    #[test]
    fn close_pair_merges() {
        let net = cluster_stations(net_with(&[0.0, 50.0, 5000.0]), 100.0).unwrap();
        assert_eq!(net.node_of(0), net.node_of(1));
        assert_ne!(net.node_of(0), net.node_of(2));
    }

    #[test]
    fn single_linkage_chains() {
        let net = cluster_stations(net_with(&[0.0, 80.0, 160.0]), 100.0).unwrap();
        let n = net.node_of(0);
        assert!(net.stations().iter().all(|s| net.node_of(s.id) == n));
        assert_eq!(net.members(n).len(), 3);
    }

    #[test]
    fn representative_has_highest_degree() {
        let mut b = net_with(&[0.0, 50.0, 3000.0]).into_builder();
        let r = b.add_route("r", "", Mode::Bus);
        let t = Schedule::Timed(DepartureList::encode(&[(10, 100)]).unwrap());
        b.add_hop(1, 2, r, t.clone(), None);
        b.add_hop(2, 1, r, t, None);
        let net = cluster_stations(b.build().unwrap(), 100.0).unwrap();
        assert_eq!(net.node_of(0), 1);
        assert_eq!(net.node_out(1), &[0]);
        assert_eq!(net.displacement(0, 1).1, (50.0f64 * 1.3).round() as u32);
    }
}
