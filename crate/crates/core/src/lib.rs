//! One-dimensional thermo-acoustic solver: a quasilinear Westervelt equation
//! for the acoustic pressure coupled to Pennes bioheat transfer with
//! Cattaneo (finite-speed) or Fourier heat conduction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acoustics;
pub mod config;
pub mod coupling;
pub mod energy;
pub mod error;
pub mod grid;
pub mod heat;
pub mod model;

pub use error::{Error, Result};
pub use grid::{FaceField, Field, Grid1D, NodeField};
pub use model::{PhysicalParams, SpeedOfSoundModel};
