//! Reconstructed-convolution look-up tables for x4 single-image super-resolution.
//!
//! The crate covers the whole life cycle of a LUT super-resolution model:
//!
//! * [`imagecore`]: PNG I/O, BT.601 colour conversion, bicubic resampling and the
//!   small geometric helpers (padding, rotation) shared by every other module.
//! * [`refnet`]: the float reference network (reconstructed-convolution modules,
//!   2x2 / 1x1 convolution blocks, cascaded multi-branch stages, rotation ensemble)
//!   with hand-written forward and backward passes.
//! * [`trainer`]: dataset preparation, patch sampling, MSE + Adam training and
//!   LUT-aware finetuning of exported tables.
//! * [`lutpack`]: caching the network into sampled tables, the `.rclt` container and
//!   the table-size formulas.
//! * [`lutengine`]: integer-only inference with 1D interpolation, 4D simplex
//!   interpolation and the rotation ensemble.
//! * [`metrics`]: Y-channel PSNR / SSIM and dataset evaluation.

pub mod error;
pub mod imagecore;
pub mod lutengine;
pub mod lutpack;
pub mod metrics;
pub mod presets;
pub mod real;
pub mod refnet;
pub mod synth;
pub mod trainer;

pub use error::{Error, ErrorKind, Result};
pub use imagecore::{ColorSpace, FloatPlane, Image, Plane, QuantPlane};
pub use lutpack::LutPack;
pub use real::Real;
pub use refnet::{NetworkConfig, NetworkParams};
