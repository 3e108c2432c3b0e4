//! Boundary-focused building blocks for semantic segmentation under domain shift.
//!
//! Everything in this crate is a pure function over dense grids and runs
//! without the standard library (an allocator is required). File formats,
//! the command line and batch orchestration live in the `boundarykit` crate.
//!
//! Module map:
//!
//! * [`grid`] dense grid types and [`interp::bilinear_upsample`]
//! * [`edges`] semantic-edge ground truth (label difference or per-class Canny)
//! * [`warp`] displacement-field backward warping with analytic gradients
//! * [`morphology`] and [`augment`] class-wise erosion copy-paste
//! * [`loss`] edge BCE, segmentation cross-entropy and their weighted sum
//! * [`distance`] and [`eval`] confusion matrices, mIoU and trimap bands
//! * [`flow`] displacement color coding and label/edge overlays

#![no_std]
#![forbid(unsafe_code)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod augment;
pub mod distance;
pub mod edges;
mod error;
pub mod eval;
pub mod flow;
pub mod grid;
pub mod interp;
pub mod loss;
pub mod morphology;
pub mod warp;

pub use error::{Error, Result};
pub use grid::{BinaryMask, DisplacementField, FeatureMap, LabelMap, RgbImage, DEFAULT_IGNORE_INDEX};
