//! Perspective-aware example-based texture synthesis.
//!
//! An exemplar texture is resynthesized at a new size under a slant/tilt
//! viewing geometry. Each pixel carries a fourth "scale" channel derived
//! from the view, so neighborhood matching prefers exemplar regions of the
//! right apparent texel size. Output is refined by alternating nearest
//! neighborhood search with reweighted least-squares updates, coarse to
//! fine.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common choices.

pub mod ann;
pub mod error;
pub mod io;
pub mod neighborhood;
pub mod optimizer;
pub mod pipeline;
pub mod raster;
pub mod scalar;
pub mod scale_map;

pub use ann::{brute_force_nearest, build_tree, fit_pca, KmTree, PcaModel, QueryBudget, SearchIndex, SearchMethod};
pub use error::{Error, Result};
pub use io::{load_image, save_image};
pub use neighborhood::{containing_anchors, extract_all, GridSpec, NeighborhoodMatrix, PatchSpec, Tile};
pub use optimizer::{optimize_level, EnergyTrace, OptimizerConfig};
pub use pipeline::{compare_modes, synthesize, SynthesisReport, SynthesisRequest};
pub use raster::{attach_scale_channel, Channel, PixelCoord, RasterImage, RgbsImage};
pub use scalar::Scalar;
pub use scale_map::{compute_scale_map, ScaleMap, ViewAngles};

pub type RasterImageF32 = RasterImage<f32>;
pub type RasterImageF64 = RasterImage<f64>;
pub type RgbsImageF32 = RgbsImage<f32>;
pub type RgbsImageF64 = RgbsImage<f64>;
pub type ScaleMapF32 = ScaleMap<f32>;
pub type ScaleMapF64 = ScaleMap<f64>;
pub type ViewAnglesF32 = ViewAngles<f32>;
pub type ViewAnglesF64 = ViewAngles<f64>;
pub type PcaModelF32 = PcaModel<f32>;
pub type PcaModelF64 = PcaModel<f64>;
pub type KmTreeF32 = KmTree<f32>;
pub type KmTreeF64 = KmTree<f64>;
pub type SynthesisRequestF32 = SynthesisRequest<f32>;
pub type SynthesisRequestF64 = SynthesisRequest<f64>;
