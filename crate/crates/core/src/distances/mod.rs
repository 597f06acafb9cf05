//! Pairwise pixel distances.
//!
//! The baseline compares single attribute vectors with the squared Euclidean
//! distance. The texture-aware kinds compare whole neighborhoods, either
//! through a feature (local histograms with the quadratic-form distance,
//! covariance + means with the Bhattacharyya distance) or directly on the raw
//! neighborhood point clouds (Chamfer, Hausdorff, Hausdorff-median, SSD).
//!
//! [`FeatureCache`] binds a [`DistanceKind`] to an image and implements
//! [`PairDistance`], the opaque callable the kNN builder consumes.

mod cache;
mod covariance;
mod histogram;
mod kind;
mod point_cloud;

use thiserror::Error;

use crate::features::FeatureError;
use crate::image::ImageError;

pub use cache::{pairwise_distance, FeatureCache, FeatureMode, KernelScratch, PairDistance};
pub use covariance::{bhattacharyya_distance, bhattacharyya_with, BhattacharyyaWorkspace};
pub use histogram::{qf_distance, QfBinSimilarity};
pub use kind::{DistanceKind, Ridge};
pub use point_cloud::{
    chamfer_distance, hausdorff_distance, hausdorff_median_distance, ssd_distance, CloudView,
    PointCloudDistance,
};

#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("attribute vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("feature shapes differ: {0}")]
    ShapeMismatch(String),
    #[error("covariance matrix singular after regularization{}", pair_suffix(.pair))]
    Singular { pair: Option<(usize, usize)> },
    #[error("bin similarity matrix for B = {bins} is not positive semi-definite (eigenvalue {eigenvalue:e})")]
    NotPsd { bins: usize, eigenvalue: f64 },
    #[error("feature cache was built for '{cache}', requested '{requested}'")]
    KindMismatch { cache: String, requested: String },
    #[error("invalid distance parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

fn pair_suffix(pair: &Option<(usize, usize)>) -> String {
    match pair {
        Some((i, j)) => format!(" for pixel pair ({i}, {j})"),
        None => String::new(),
    }
}

/// `sum_c (a_c - b_c)^2`.
pub fn euclidean_sq(a: &[f64], b: &[f64]) -> Result<f64, DistanceError> {
    if a.len() != b.len() {
        return Err(DistanceError::LengthMismatch(a.len(), b.len()));
    }
    Ok(sq_dist(a, b))
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
