//! A laboratory for random Not-All-Equal K-SAT: instance generation, local
//! decimation rules (unit clause, belief propagation, survey propagation) and
//! experiments on the geometry of the solution space.

pub mod bp;
pub mod decimation;
pub mod error;
pub mod experiment;
pub mod influence;
pub mod instance;
pub mod overlap;
pub mod rng;
pub mod sp;

pub use error::{Error, Result};
