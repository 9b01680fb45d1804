//! Enhancement percolation engine.
//!
//! The crate is organized around five areas:
//!
//! * [`lattice`] / [`geometry`] / [`cells`] — the square, triangular and
//!   hexagonal lattices, their matching (`*`) and dual graphs, self-repelling
//!   paths, external boundaries and hierarchical cell partitions.
//! * [`fields`] / [`rng`] — reproducible sampling of site and activation
//!   fields from a counter-based generator.
//! * [`enhance`] — finite-range enhancement rules, the point-rule reduction,
//!   monotonicity checking and the essentiality decision procedure.
//! * [`cluster`] / [`cardy`] — union-find cluster observables (θ, τ, ξ, χ),
//!   rectangle crossings and the Cardy crossing function.
//! * [`interfaces`] / [`curves`] — triangular-lattice interface loops,
//!   protected sites, stable edges, the cell exploration process and the
//!   spherical curve metric with Fréchet/Hausdorff distances.
//!
//! Sampling loops run on rayon when the default `parallel` feature is
//! enabled; disabling it yields a fully sequential build with identical
//! results.

pub mod cardy;
pub mod cells;
pub mod cluster;
pub mod curves;
pub mod enhance;
pub mod fields;
pub mod geometry;
pub mod interfaces;
pub mod lattice;
pub mod rng;
pub mod runtime;
pub mod stats;

use thiserror::Error;

/// Errors shared across the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coordinates: {0}")]
    Coordinates(String),
    #[error("not an edge of the lattice: {0}")]
    NotAnEdge(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("capability exceeded: {0}")]
    Capability(String),
    #[error("unsupported lattice for this operation: {0}")]
    Unsupported(String),
    #[error("window mismatch: {0}")]
    WindowMismatch(String),
    #[error("rule is not monotone; counterexample flips site {site:?}")]
    NotMonotone { site: lattice::Site },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fit is undefined: {0}")]
    UndefinedFit(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
