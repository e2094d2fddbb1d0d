//! Attention-guided dual-layer image compression.
//!
//! An image is coded as a JPEG-like block-DCT base layer plus a small
//! refinement layer of compressive-sensing measurements taken over a set of
//! *critical pixels*: edge pixels inside the salient region that the soft
//! decoder changes noticeably. Encoder and decoder derive the critical set
//! from the decoded base layer alone, so no mask is transmitted. The decoder
//! soft-decodes the base layer and then applies the minimum-norm adjustment
//! that makes the critical pixels reproduce the received measurements exactly.
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the codec
//! pipeline is fixed to `f64` through the aliases below.

pub mod base_codec;
pub mod bench;
pub mod container;
pub mod critical_mask;
pub mod cs_refine;
pub mod error;
pub mod filter;
pub mod raster;
pub mod scalar;
pub mod soft_decoder;

pub use error::{AgdlError, Result};
pub use raster::{Mask, Raster};
pub use scalar::Scalar;

/// Real-valued luminance image used by the codec pipeline.
pub type Image = Raster<f64>;
pub type ImageF32 = Raster<f32>;
/// Per-pixel non-negative scores.
pub type ScoreMap = Raster<f64>;
pub type CsMatrix = cs_refine::SensingMatrix<f64>;
pub type CsMatrixF32 = cs_refine::SensingMatrix<f32>;
pub type CriticalSet = critical_mask::CriticalSet<f64>;
pub type PocsParams = soft_decoder::PocsParams<f64>;
