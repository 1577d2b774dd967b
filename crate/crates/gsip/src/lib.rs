//! Graph spectral image processing.
//!
//! Builds weighted pixel graphs from images and processes image signals in
//! the graph spectral domain: graph Fourier analysis, spectral and
//! polynomial filtering, MAP restoration, block-transform coding with a
//! steerable mode, graph-cut segmentation, and domain-transform smoothing
//! and retargeting.
//!
//! Modules follow the processing pipeline:
//! - [`image`]: multichannel rasters in `[0, 1]`.
//! - [`graph`]: pixel-graph construction and Sinkhorn scaling.
//! - [`operators`]: Laplacian-family variation operators.
//! - [`spectral`]: eigendecomposition, GFT/IGFT, smoothness measures.
//! - [`filters`]: spectral responses, polynomial and Chebyshev fast paths,
//!   the windowed bilateral filter.
//! - [`restore`]: Tikhonov and transform-threshold denoising, deblurring.
//! - [`codec`]: block transform codec with edge-map side information.
//! - [`segment`]: max-flow/min-cut, normalized cuts, two-region
//!   piecewise-constant segmentation.
//! - [`domain_transform`]: warped-axis smoothing and retargeting.

pub mod codec;
pub mod domain_transform;
pub mod error;
pub mod filters;
pub mod graph;
pub mod image;
pub mod linalg;
pub mod operators;
pub mod restore;
pub mod segment;
pub mod spectral;

pub use error::{Error, Result};
pub use image::ImagePlane;
