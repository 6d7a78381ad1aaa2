//! Geodesic simplex maps glued over a nearly-lattice net of a Riemannian
//! manifold, with numerical verifiers for the properties of the glued map.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod directions;
pub mod error;
pub mod gluedmap;
pub mod harness;
pub mod manifold;
pub mod netlattice;
pub mod simplexmap;
pub mod triangulation;

pub use error::{Error, Result};
