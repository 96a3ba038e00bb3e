//! Core representation for UV-bound Gaussian heads: primitives and their
//! covariance math, a tile-based splatting rasterizer with a brute-force
//! reference, the template mesh and its UV atlas, and the on-disk formats.

pub mod camera;
pub mod container;
mod error;
pub mod frame_io;
pub mod gaussian;
pub mod mesh;
pub mod ply;
pub mod raster;
pub mod scene;
pub mod uv;

pub use camera::{project_gaussian, Camera, CameraFields, ProjectedSplat};
pub use container::{NamedTensor, TensorContainer};
pub use error::{CoreError, Result};
pub use gaussian::{build_covariance, evaluate_density, GaussianPrimitive, GaussianSet, TexelIndex};
pub use mesh::{TemplateMesh, TexelBinding};
pub use raster::{
    rasterize, rasterize_reference, rasterize_with_stats, record_contributions, Contribution, ContributionLog,
    PixelContributions, PixelMask, RasterStats, RenderedFrame,
};
pub use uv::{decode_uv_to_gaussians, splat_vertex_features_to_uv, texel_surface_point, UvAttributeMap, UvFeatureMap};
