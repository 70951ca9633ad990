//! LogNNet: a classifier whose fixed reservoir matrix is filled from a
//! chaotic map orbit, followed by a small trainable two-layer head.
//!
//! The reservoir can be materialized or regenerated on the fly during
//! projection; both paths give bit-identical outputs, and [`budget`]
//! prices each of them in bytes of microcontroller RAM.

pub mod budget;
pub mod chaos;
pub mod data;
mod error;
pub mod eval;
pub mod head;
pub mod model_io;
pub mod pipeline;
pub mod reservoir;
pub mod search;

pub use chaos::MapKind;
pub use data::{Dataset, Record, Schema};
pub use error::{Error, Result};
pub use eval::{ConfusionMatrix, MetricsReport};
pub use head::{HeadWeights, TrainConfig};
pub use pipeline::{Architecture, Model};
pub use reservoir::{MapSpec, ProjectionMode};
pub use search::{Experiment, MapParams, SwarmConfig};
