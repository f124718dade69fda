mod common;

use bbtime::connectivity::{boardings_from, build_mesh_table, transfers_for, UNREACHABLE};
use bbtime::format::{network_to_bytes, read_network, write_network, Container};
use bbtime::ingest::{add_walk_edges, MultimodalConfig};
use bbtime::network::geo::offset_m;
use bbtime::network::{cluster_stations, DepartureList, LatLon, Mode, Network, NetworkBuilder, Schedule};
use bbtime::overlay::{Annotation, AnnotationKind, Overlay};
use bbtime::par::Parallelism;
use bbtime::precompute::{precompute, PrecomputeConfig, TripletStore};
use bbtime::search::{plan, Query};
use common::{adjust_from, check_feasible, min_boardings_matrix, Adjust, Oracle};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct HopSpec {
    from: u32,
    to: u32,
    mode: u8,
    events: Vec<(i64, u32)>,
    walk_s: u32,
}

fn events() -> impl Strategy<Value = Vec<(i64, u32)>> {
    prop::collection::vec((0i64..40_000, 60u32..6000), 1..12).prop_map(|mut v| {
        v.sort();
        v.dedup_by_key(|e| e.0);
        v
    })
}

fn hop_spec(n: u32) -> impl Strategy<Value = HopSpec> {
    (0..n, 0..n, 0u8..4, events(), 60u32..900).prop_map(|(from, to, mode, events, walk_s)| HopSpec {
        from,
        to,
        mode,
        events,
        walk_s,
    })
}

fn network() -> impl Strategy<Value = Network> {
    (3u32..7).prop_flat_map(|n| {
        (Just(n), prop::collection::vec(hop_spec(n), 2..14), prop::collection::vec((0.0f64..4000.0, 0.0f64..4000.0), n as usize))
            .prop_map(|(n, hops, pos)| {
                let o = LatLon::new(47.0, 8.0);
                let mut b = NetworkBuilder::new((0, 86_400));
                for i in 0..n {
                    let p = pos[i as usize];
                    b.add_station(format!("S{i}"), offset_m(o, p.0, p.1), 0);
                }
                // route 0 is shared so same-route continuations occur
                let shared = b.add_route("shared", "", Mode::Bus);
                for (k, h) in hops.iter().enumerate() {
                    if h.from == h.to {
                        continue;
                    }
                    match h.mode {
                        0 => {
                            let w = b.shared_route("walk", Mode::Walk);
                            b.add_hop(h.from, h.to, w, Schedule::Fixed { duration_s: h.walk_s }, None);
                        }
                        m => {
                            let r = if m == 1 {
                                shared
                            } else {
                                b.add_route(format!("r{k}"), "", if m == 2 { Mode::Bus } else { Mode::Train })
                            };
                            let s = Schedule::Timed(DepartureList::encode(&h.events).unwrap());
                            b.add_hop(h.from, h.to, r, s, None);
                        }
                    }
                }
                b.build().unwrap()
            })
    })
}

/// Two distinct stations out of `n`.
fn ends(n: u32, a: u32, b: u32) -> (u32, u32) {
    let a = a % n;
    (a, (a + 1 + b % (n - 1)) % n)
}

fn store(net: &Network) -> TripletStore {
    precompute(net, &PrecomputeConfig::default()).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 96,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn exact_plan_matches_oracle(net in network(), a in 0u32..7, b in 0u32..7, t in 0i64..30_000, w_wait in 0.0f64..2.0) {
        let n = net.station_count() as u32;
        let (a, b) = ends(n, a, b);
        let mut q = Query::new(a, b, t).exact();
        q.max_walk_m = 20_000;
        q.weights.wait_initial = w_wait;
        let out = plan(&net, &store(&net), None, &Overlay::new(), &q).unwrap();
        let want = Oracle::new(&net).best(&q, q.initial_window_s, &Adjust::new());
        prop_assert_eq!(out.itinerary.as_ref().map(|i| i.cost_s), want.map(|w| w.cost));
        if let Some(it) = &out.itinerary {
            prop_assert!(check_feasible(&net, &q, &Adjust::new(), it).is_ok());
        }
    }

    #[test]
    fn clustered_plan_matches_oracle(net in network(), radius in 300.0f64..2500.0, a in 0u32..7, b in 0u32..7, t in 0i64..30_000) {
        let net = cluster_stations(net, radius).unwrap();
        let n = net.station_count() as u32;
        let (a, b) = ends(n, a, b);
        let mut q = Query::new(a, b, t).exact();
        q.max_walk_m = 20_000;
        if net.node_of(a) == net.node_of(b) {
            prop_assert!(plan(&net, &store(&net), None, &Overlay::new(), &q).is_err());
            return Ok(());
        }
        let out = plan(&net, &store(&net), None, &Overlay::new(), &q).unwrap();
        let want = Oracle::new(&net).best(&q, q.initial_window_s, &Adjust::new());
        prop_assert_eq!(out.itinerary.as_ref().map(|i| i.cost_s), want.map(|w| w.cost));
        if let Some(it) = &out.itinerary {
            prop_assert!(check_feasible(&net, &q, &Adjust::new(), it).is_ok());
        }
    }

    #[test]
    fn annotated_plan_matches_adjusted_oracle(
        net in network(),
        a in 0u32..7,
        b in 0u32..7,
        t in 0i64..30_000,
        raw in prop::collection::vec((0usize..64, 0u32..12, 0u8..3, -600i32..1800, 0i32..900), 0..10),
    ) {
        let n = net.station_count() as u32;
        let (a, b) = ends(n, a, b);
        let timed: Vec<u32> = net.hops().iter().filter(|h| h.is_scheduled()).map(|h| h.id).collect();
        let mut anns = Vec::new();
        if !timed.is_empty() {
            for (h, o, k, dd, extra) in raw {
                let hop = timed[h % timed.len()];
                let list = net.hop(hop).departures().unwrap().decode();
                let ordinal = o % list.len() as u32;
                let dur = list[ordinal as usize].1 as i32;
                let kind = match k {
                    0 => AnnotationKind::Cancelled,
                    // keep the adjusted arrival after the adjusted departure
                    _ => AnnotationKind::Delay { dep_delta_s: dd, arr_delta_s: dd + extra.max(1 - dur) },
                };
                anns.push(Annotation { hop, ordinal, kind, valid_from_utc: 0, valid_to_utc: 86_400 });
            }
        }
        let mut ov = Overlay::new();
        for x in &anns {
            ov.apply(&net, x.clone()).unwrap();
        }
        let mut q = Query::new(a, b, t).exact();
        q.max_walk_m = 20_000;
        let adj = adjust_from(&net, &anns, t);
        let out = plan(&net, &store(&net), None, &ov, &q).unwrap();
        let want = Oracle::new(&net).best(&q, q.initial_window_s, &adj);
        prop_assert_eq!(out.itinerary.as_ref().map(|i| i.cost_s), want.map(|w| w.cost));
        if let Some(it) = &out.itinerary {
            prop_assert!(check_feasible(&net, &q, &adj, it).is_ok());
        }
    }

    #[test]
    fn heuristic_plan_is_feasible_and_never_beats_exact(net in network(), a in 0u32..7, b in 0u32..7, t in 0i64..30_000) {
        let n = net.station_count() as u32;
        let (a, b) = ends(n, a, b);
        let q = Query::new(a, b, t);
        let s = store(&net);
        let out = plan(&net, &s, None, &Overlay::new(), &q).unwrap();
        if let Some(it) = &out.itinerary {
            prop_assert!(check_feasible(&net, &q, &Adjust::new(), it).is_ok());
            let want = Oracle::new(&net).best(&q, out.stats.window_s, &Adjust::new()).unwrap();
            prop_assert!(it.cost_s >= want.cost);
        }
    }

    #[test]
    fn bound_trace_decreases(net in network(), a in 0u32..7, b in 0u32..7) {
        let n = net.station_count() as u32;
        let (a, b) = ends(n, a, b);
        let out = plan(&net, &store(&net), None, &Overlay::new(), &Query::new(a, b, 0).exact()).unwrap();
        prop_assert!(out.stats.bound_trace.windows(2).all(|w| w[1] < w[0]));
        if let Some(it) = &out.itinerary {
            prop_assert_eq!(out.stats.bound_trace.last().copied(), Some(it.cost_s));
        }
    }

    #[test]
    fn mesh_bound_is_sound(net in network(), cell in prop::sample::select(vec![0.001, 0.01, 1.0])) {
        let dist = min_boardings_matrix(&net);
        let mesh = build_mesh_table(&net, cell, Parallelism::Sequential);
        for a in 0..net.station_count() {
            let (bfs, _) = boardings_from(&net, a as u32);
            for b in 0..net.station_count() {
                prop_assert_eq!(bfs[b] == UNREACHABLE, dist[a][b] == u32::MAX);
                if a != b && dist[a][b] != u32::MAX {
                    prop_assert_eq!(bfs[b], dist[a][b]);
                    let lb = mesh.bound(&net, a as u32, b as u32).unwrap();
                    prop_assert!(u32::from(lb) <= transfers_for(dist[a][b]));
                }
            }
        }
    }

    #[test]
    fn triplets_respect_lower_bounds(net in network()) {
        let s = store(&net);
        for t in 0..=2u8 {
            let Some(level) = s.level(t) else { continue };
            for (&(d, a), list) in level {
                prop_assert!(list.windows(2).all(|w| (w[0].typical_s, w[0].route_m) <= (w[1].typical_s, w[1].route_m)));
                for tr in list {
                    prop_assert_eq!(tr.hops.len(), t as usize + 1);
                    prop_assert_eq!(net.node_of(net.hop(tr.hops[0]).from), d);
                    prop_assert_eq!(net.node_of(net.hop(*tr.hops.last().unwrap()).to), a);
                    let mut floor = 0u64;
                    for (i, &h) in tr.hops.iter().enumerate() {
                        floor += u64::from(net.hop(h).min_duration().unwrap());
                        if i > 0 {
                            floor += u64::from(net.connection_gap(tr.hops[i - 1], h));
                        }
                    }
                    prop_assert!(u64::from(tr.min_s) >= floor);
                    prop_assert!(tr.typical_s >= tr.min_s);
                }
            }
        }
    }

    #[test]
    fn network_file_roundtrip(net in network()) {
        let bytes = network_to_bytes(&net);
        let back = read_network(&Container::from_bytes(&bytes).unwrap()).unwrap();
        prop_assert_eq!(network_to_bytes(&back), bytes);
        let s = store(&net);
        let mut c = Container::new();
        write_network(&mut c, &net);
        s.write_to(&mut c);
        let c2 = Container::from_bytes(&c.to_bytes()).unwrap();
        prop_assert_eq!(TripletStore::read_from(&c2, &back).unwrap(), s);
    }

    #[test]
    fn departure_cursors_agree_with_decode(ev in events(), t in -1000i64..45_000) {
        let list = DepartureList::encode(&ev).unwrap();
        prop_assert_eq!(list.decode(), ev.clone());
        let next = ev.iter().position(|e| e.0 >= t);
        prop_assert_eq!(list.next_at_or_after(t).map(|d| d.ordinal as usize), next);
        let from: Vec<i64> = list.iter_from(t).map(|d| d.dep_utc).collect();
        let want: Vec<i64> = ev.iter().filter(|e| e.0 >= t).map(|e| e.0).collect();
        prop_assert_eq!(from, want);
        for (i, e) in ev.iter().enumerate() {
            let d = list.get(i as u32).unwrap();
            prop_assert_eq!((d.dep_utc, d.duration), *e);
        }
        prop_assert!(ev.iter().all(|e| list.min_duration().unwrap() <= e.1));
    }

    #[test]
    fn generated_walk_edges_are_symmetric(net in network()) {
        let before: Vec<(u32, u32)> = net.hops().iter().filter(|h| h.mode == Mode::Walk).map(|h| (h.from, h.to)).collect();
        let touched = |a: u32, b: u32| before.contains(&(a, b)) || before.contains(&(b, a));
        let net = add_walk_edges(net, &MultimodalConfig::default()).unwrap();
        for h in net.hops().iter().filter(|h| h.mode == Mode::Walk && !touched(h.from, h.to)) {
            let back = net.out_hops(h.to).iter().map(|&x| net.hop(x)).find(|x| x.mode == Mode::Walk && x.to == h.from);
            prop_assert!(back.is_some_and(|b| b.fixed_duration() == h.fixed_duration()));
        }
    }
}
