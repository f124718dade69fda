//! Timed branch-and-bound journey planning for integrated ground and air
//! public transport.
//!
//! The crate is organised bottom-up:
//!
//! * [`network`]: the immutable time-dependent graph with compressed UTC
//!   departure lists,
//! * [`ingest`]: GTFS loading, synthetic networks, walk and taxi edges,
//! * [`precompute`]: per-transfer-count triplet matrices,
//! * [`connectivity`]: schedule-free reachability and the mesh lower bound,
//! * [`overlay`]: real-time annotations consulted at query time,
//! * [`search`]: the query engine itself,
//! * [`format`]: the `BBT1` container file.

pub mod connectivity;
pub mod error;
pub mod format;
pub mod ingest;
pub mod network;
pub mod overlay;
pub mod par;
pub mod precompute;
pub mod search;

pub use error::{Error, Result};
