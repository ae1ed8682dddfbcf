//! Quorum bootstrap percolation on random regular graphs.
//!
//! A vertex becomes occupied at time t+1 with probability p when at least
//! theta of its neighbors are occupied at time t, independently of its own
//! state; otherwise it is vacant. The crate bundles the graph sampler
//! (configuration model conditioned on simplicity), the synchronous dynamics,
//! subset expansion statistics, exact small-case enumeration oracles, the
//! analytic constants controlling extinction and persistence, and a scan
//! harness for phase diagrams.

pub mod error;
pub mod rng;

pub mod graph;
pub mod gen;

pub mod bounds;
pub mod dynamics;
pub mod harness;
pub mod isoperimetry;
pub mod oracle;

pub use error::{Error, Result};
