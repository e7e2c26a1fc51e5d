//! Generation, verification and cost simulation of communication schedules
//! for broadcast, scatter and alltoall under the k-ported, k-lane and
//! full-lane machine models.
//!
//! A generator in [`algorithms`] produces a [`Schedule`]: an ordered list of
//! synchronous rounds, each a set of point-to-point transfers whose payloads
//! are origin-tagged element intervals ([`Chunk`]). [`semantics`] executes a
//! schedule on token state to prove it implements its collective, and
//! [`cost`] evaluates it under a linear latency/bandwidth model with per-node
//! lane contention.

pub mod algorithms;
pub mod chunk;
pub mod cost;
pub mod error;
pub mod machine;
pub mod schedule;
pub mod semantics;

pub use algorithms::{Algorithm, CollectiveParams, OpKind};
pub use chunk::ChunkSet;
pub use cost::{time_schedule, CostParams, CostReport};
pub use error::{Error, Result};
pub use machine::{MachineShape, Placement};
pub use schedule::{Chunk, Event, EventKind, Round, Schedule, ScheduleStats};
pub use semantics::{verify, VerifyResult};
