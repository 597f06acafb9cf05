//! Texture-aware dimensionality reduction for high-dimensional images.
//!
//! Pixels are compared through their spatial neighborhoods instead of their
//! single attribute vectors. The crate provides the image model and I/O,
//! per-pixel texture features (local histograms, covariance and means), the
//! patch distances built on top of them (quadratic-form, Bhattacharyya and the
//! Chamfer/Hausdorff point-cloud family), an exact k-nearest-neighbor graph,
//! an exact t-SNE optimizer, and the evaluation tools used to judge the
//! resulting embeddings (neighbor hit, recoloring).
//!
//! Data-parallel loops go through [`Execution`]; with the `parallel` feature
//! disabled every loop runs sequentially and produces the same results.

pub mod bench;
pub mod distances;
pub mod embedding;
pub mod evaluation;
pub mod exec;
pub mod features;
pub mod image;
pub mod knn;
pub mod pipeline;

pub use distances::{DistanceKind, FeatureCache, PairDistance, QfBinSimilarity, Ridge};
pub use embedding::{Embedding, JointProbabilities, TsneParams};
pub use evaluation::{NeighborHitCurve, SyntheticSpec};
pub use exec::Execution;
pub use features::{CovarianceFeature, HistogramStack};
pub use image::{
    BorderPolicy, HighDimImage, ImageFormat, LabelRaster, NeighborhoodSpec, PixelIndex, PointCloud,
    Weighting,
};
pub use knn::KnnGraph;
