//! Simulation and analysis of the contact process with random slowdowns.
//!
//! Sites hold wild individuals, sterile individuals, both or neither. Wild
//! individuals breed onto neighbouring sites; sterile individuals are
//! released at rate `r` and slow down the wild breeding rate from `λ1` to
//! `λ2` wherever they share a site.

pub mod coupling;
pub mod dynamics;
pub mod graphical;
pub mod lattice;
pub mod meanfield;
pub mod montecarlo;
pub mod quenched;
pub mod rate;
pub mod rng;
pub mod stats;
pub mod sumtree;

pub use dynamics::{Params, Trajectory, Variant};
pub use lattice::{Boundary, BoxGeometry, Configuration, SiteState};
