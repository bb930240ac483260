//! Random point clouds whose Voronoi cells follow a target area distribution.
//!
//! The pipeline is: [`fit`] area fractions of a few point densities so that
//! the mixture of their cell-area distributions approximates a power law,
//! [`pointgen`] a point cloud realizing those fractions, [`voronoi`] tessellate
//! it inside the domain rectangle, and [`analysis`] compare the empirical
//! cell-area histogram against the model and the target.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod distributions;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod io;
pub mod pointgen;
pub mod svg;
pub mod voronoi;

pub use error::{Error, Result};
