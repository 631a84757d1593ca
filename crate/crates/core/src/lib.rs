//! Blended soundproof-compressible vertical-slice flow solver with
//! LETKF ensemble data assimilation.
//!
//! The model integrates the compressible Euler equations for a dry ideal
//! gas on a 2D (x,z) slice with a regime switch to the pseudo-incompressible
//! (Durran) limit, and couples the integrator to a local ensemble transform
//! Kalman filter so that one pseudo-incompressible time-step after each
//! analysis removes acoustic imbalances introduced by the assimilation.

pub mod advect;
pub mod background;
pub mod blend;
pub mod config;
pub mod constants;
pub mod diag;
pub mod elliptic;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod letkf;
pub mod ops;
pub mod output;
pub mod state;
pub mod stepper;

pub use constants::PhysConstants;
pub use error::SimError;
pub use grid::{BoundaryKind, Grid};
pub use state::{ModelState, Regime};
