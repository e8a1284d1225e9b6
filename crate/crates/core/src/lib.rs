//! Discretized point–hyperplane incidence experiments in `R^d`.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: points, hyperplanes in the chart `x_d = a_1 x_1 + … + a_{d-1} x_{d-1} + a_d`,
//!   the affine metric, code coordinates, duality and the rotational-curvature determinant.
//! - [`family`]: δ-annotated collections of points or hyperplanes.
//! - [`regularity`]: covering numbers, separation and `(δ, s, C)` regularity constants.
//! - [`incidence`]: exact and accelerated counting of `C·δ`-incidences, dyadic annuli.
//! - [`constructions`]: sharp example families and auxiliary generators.
//! - [`bounds`]: closed-form evaluators for the incidence bounds used in reports.
//! - [`slab_cover`]: box covers of the intersection of two slabs, with sampling checks.
//! - [`io`] and [`harness`]: text formats, experiment configuration and JSON reports.

pub mod bounds;
pub mod constructions;
mod error;
pub mod family;
pub mod geometry;
pub mod harness;
pub mod incidence;
pub mod io;
pub mod regularity;
pub mod slab_cover;
mod spatial;

pub use error::{Error, Result};
pub use family::{Family, FamilyKind};
pub use geometry::{Hyperplane, Point, PredicateMode};
