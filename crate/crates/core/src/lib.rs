//! Deterministic discrete-time simulator for deflection ("hot potato") routing on
//! balanced directed multigraphs.
//!
//! The model: networks are directed multigraphs in which every router has equal
//! in- and out-degree. Each edge carries at most one packet and takes one tick to
//! traverse; a router must forward every resident packet every tick (no queues
//! except explicit self-loop buffer edges), so conflicts are resolved by priority
//! and losers are deflected. The crate provides the network model ([`topology`]),
//! the synchronous step engine ([`sim`]), a family of conflict-resolution schemes
//! ([`schemes`]), and livelock analysis plus epoch-label wrappers that convert any
//! flushable scheme into one with a hard delivery deadline ([`livelock`]).

pub mod fixtures;
pub mod injector;
pub mod livelock;
pub mod metrics;
pub mod scenario;
pub mod schemes;
pub mod sim;
pub mod topology;

mod error;

pub use error::{Error, Result};
