//! Regulation-aware model predictive contouring control (RA-MPCC) for
//! autonomous surface vessels in urban canals.
//!
//! The crate is organised bottom-up:
//!
//! * [`vessel`]: 3-DOF vessel model, thruster allocation and disc footprint.
//! * [`path`]: cubic-spline reference path with arc-length progress.
//! * [`environment`]: occupancy grid, convex static constraints and
//!   ellipsoidal dynamic obstacles.
//! * [`regulation`]: encounter classification, priority vessels and the
//!   off-center Gaussian regulation costs.
//! * [`solver`]: the receding-horizon contouring optimizer.
//! * [`sim`]: closed-loop scenarios, violation metrics and trace logs.

pub mod environment;
pub mod error;
pub mod geometry;
pub mod path;
pub mod regulation;
pub mod sim;
pub mod solver;
pub mod vessel;

pub use error::{Error, Result};
