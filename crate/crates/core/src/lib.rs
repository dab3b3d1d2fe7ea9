//! Mobility-weighted multiphase Allen-Cahn flows on periodic grids.
//!
//! The crate is organised bottom-up: [`spectral`] (grids, transforms,
//! semi-implicit solves), [`model`] (double well, tensions, mobilities),
//! [`solver`] (stepping and projections), [`nanowire`] (sharp-interface
//! nanowire shapes), [`scenarios`] (initial data, diagnostics, protocols)
//! and [`io`] (configuration and file output).

pub mod io;
pub mod model;
pub mod nanowire;
pub mod par;
pub mod scenarios;
pub mod solver;
pub mod spectral;
