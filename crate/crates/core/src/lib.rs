//! Nonlinear shallow-shell energy minimization over a clamped rectangle.
//!
//! The crate evaluates analytic middle surfaces ([`geometry`]), builds the
//! isotropic elasticity tensor on their metric ([`elasticity`]), discretizes
//! the clamped displacement space ([`grid`]), assembles the shallow-shell
//! energy with its exact gradient ([`energy`]), and minimizes it along
//! shell-to-plate families ([`minimizer`]). [`study`] and [`config`] drive the
//! command-line experiments.

pub mod config;
pub mod elasticity;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod lbfgs;
pub mod minimizer;
pub mod study;

pub use elasticity::{ElasticityTensor, Material};
pub use energy::{EnergyAssembly, ForceDensity, ForceSpec, PlateModel};
pub use geometry::{Immersion, Rect, Surface, SurfaceGeometryField};
pub use grid::{DiscreteDisplacement, DiscreteField, Grid};
pub use minimizer::{SolveDiagnostics, SolverConfig};
