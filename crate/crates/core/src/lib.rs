//! Desk-scale robustness pipeline for raster images: adversarial patch
//! training, adaptive multi-scale vector median filtering, deterministic
//! image ablation, and certified accuracy evaluation.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`image`]: the `[0, 1]` raster payload, attention maps, pixel windows.
//! - [`codec`]: bit-exact PPM/PGM interchange plus PNG input.
//! - [`filter`]: the adaptive weighted multi-scale geometric median filter
//!   and the classic vector median baseline.
//! - [`adversary`]: corner-placed patch attacks trained by gradient steps.
//! - [`ablation`]: cyclic block/band ablation families and their
//!   patch-overlap bounds.
//! - [`classifier`]: the pluggable model contract with an affine reference
//!   implementation and a synthetic grating dataset.
//! - [`evaluation`]: ablation-vote clean accuracy, margin certification,
//!   the attack-grid sweep, CSV reports.
//! - [`config`]: the flat key=value configuration format.
//!
//! All numerics are seed-free and deterministic; the only randomness lives
//! in dataset generation, driven by one explicit seed. Per-pixel loops are
//! data-parallel: the `parallel` feature (on by default) runs them through
//! rayon with output bitwise identical to the sequential fallback.

pub mod ablation;
pub mod adversary;
pub mod classifier;
pub mod codec;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod filter;
pub mod image;

pub use error::{Error, Result};
pub use image::{AttentionMap, Image, PixelCoord};
