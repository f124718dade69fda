//! Building networks: GTFS feeds, synthetic fixtures, walk and taxi edges.

pub mod gtfs;
pub mod multimodal;
pub mod synthetic;

pub use gtfs::{load_feeds, load_gtfs, FeedConfig, LoadReport};
pub use multimodal::{add_taxi_edges, add_walk_edges, MultimodalConfig, TaxiEnd, TaxiPair, TaxiRules};
pub use synthetic::{generate_synthetic, GeneratorSpec, Topology};
