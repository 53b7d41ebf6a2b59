//! Signal processing for a 5×5 mechanoluminescent whisker tactile array.
//!
//! The crate is organised along the data path:
//!
//! * [`taxel`] turns a tactile camera frame into a 5×5 matrix of normalised
//!   green intensities (and renders synthetic frames back from a matrix).
//! * [`features`] reduces each matrix to ten log row/column sums.
//! * [`detector`] calibrates per-channel baselines and captures fixed-length
//!   samples whenever a windowed sum crosses its trigger threshold.
//! * [`sim`] is a deterministic lumped simulator of the array sliding over
//!   parametric textures, used in place of the physical rig.
//! * [`analysis`] measures event duration, fits the log-speed regression and
//!   identifies slide direction from activation order.
//! * [`learn`] assembles labelled datasets and trains/evaluates the three
//!   classifier families.

pub mod analysis;
pub mod detector;
pub mod error;
pub mod features;
pub mod learn;
pub mod seed;
pub mod sim;
pub mod taxel;

pub use error::{Error, Result};

/// Number of taxel rows and columns in the array.
pub const GRID: usize = 5;
/// Number of feature channels (five row sums followed by five column sums).
pub const CHANNELS: usize = 2 * GRID;
