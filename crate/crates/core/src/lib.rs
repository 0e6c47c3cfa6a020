//! Grid numerics for p-capacity, uniform fatness, uniform perfectness and
//! Hardy inequalities on discretized Euclidean domains.

pub mod capacity;
pub mod config;
pub mod domain;
pub mod edt;
pub mod cover;
pub mod energy;
pub mod error;
pub mod fatness;
pub mod grid;
pub mod hardy;
pub mod perfectness;
pub mod report;
pub mod run;

pub use domain::Region;
pub use error::{Error, Result};
pub use grid::{ball_mask, annulus_mask, point2, BBox, Lattice, MetricGrid, Point, SetMask, SpaceParams};
