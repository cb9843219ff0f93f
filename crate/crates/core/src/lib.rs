//! Bounded-noise multi-view triangulation.
//!
//! The crate covers pinhole cameras ([`geometry`]), consistency regions of a
//! bounded-noise model ([`consistency`]), linear, Gauss-Newton, LP and
//! minimax triangulators ([`triangulators`]), a Monte-Carlo harness for error
//! decay in the number of cameras ([`sim`]), an exact 2-D pixelised study
//! ([`toy2d`]) and log-log slope fitting ([`analysis`]).

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod consistency;
pub mod error;
pub mod geometry;
pub mod io;
pub mod numerics;
pub mod sim;
pub mod toy2d;
pub mod triangulators;

pub use consistency::{in_consistent_region, Instance, NoiseModel, NormKind, Observation};
pub use error::{Error, Result};
pub use geometry::{Camera, ImagePoint, WorldPoint};
pub use triangulators::{triangulate, Algorithm, TriangulationResult};
