//! Workload recursions for `S` parallel FIFO servers under join-the-shortest
//! workload, join-the-`(p+1)`-th-shortest workload and pure-loss allocation.
//!
//! The crate provides the driving maps, forward trajectories and backward
//! Loynes schemes, the `Z` supremum statistics, Monte Carlo and exact checks
//! of the stability conditions, and an exact rational search for periodic
//! stationary profiles on finite cyclic inputs.

pub mod coalescence;
pub mod error;
pub mod exact;
pub mod loynes;
pub mod maps;
pub mod profile;
pub mod scalar;
pub mod space;
pub mod stability;
pub mod zstat;

pub use error::{Error, Result};
pub use maps::PolicyMap;
pub use profile::{restrict, OrderedProfile};
pub use space::{FiniteCyclicSpace, GiGiModel, Mark, MarkedPath, Model};
