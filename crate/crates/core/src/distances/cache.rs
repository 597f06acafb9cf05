use std::sync::Arc;

use crate::exec::Execution;
use crate::features::{
    covariance_feature, histogram_feature, image_bin_edges, BinEdges, CovarianceFeature,
    HistogramStack,
};
use crate::image::{extract_patch, HighDimImage, NeighborhoodSpec, PixelIndex};

use super::{
    bhattacharyya_with, qf_distance, sq_dist, BhattacharyyaWorkspace, CloudView, DistanceError,
    DistanceKind, PointCloudDistance, QfBinSimilarity, Ridge,
};

/// Distance between items `0..len()`, usable from many threads at once.
pub trait PairDistance: Sync {
    type Scratch: Send;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn scratch(&self) -> Self::Scratch;

    fn distance_with(
        &self,
        scratch: &mut Self::Scratch,
        i: usize,
        j: usize,
    ) -> Result<f64, DistanceError>;

    fn distance(&self, i: usize, j: usize) -> Result<f64, DistanceError> {
        self.distance_with(&mut self.scratch(), i, j)
    }
}

/// Whether per-pixel features are computed up front or on every call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FeatureMode {
    #[default]
    Precompute,
    Lazy,
}

/// Per-worker buffers for the distance kernels.
#[derive(Debug, Default)]
pub struct KernelScratch {
    bhattacharyya: BhattacharyyaWorkspace,
    row_min: Vec<f64>,
    col_min: Vec<f64>,
    cloud_a: Vec<f64>,
    cloud_b: Vec<f64>,
}

#[derive(Debug)]
enum Store {
    Raw,
    Histograms {
        edges: Arc<[BinEdges]>,
        similarity: QfBinSimilarity,
        stacks: Option<Vec<HistogramStack>>,
    },
    Covariances {
        ridge: Ridge,
        features: Option<Vec<CovarianceFeature>>,
    },
    Clouds {
        kernel: PointCloudDistance,
        weights: Vec<f64>,
        members: Option<Vec<Vec<usize>>>,
    },
}

/// A distance kind bound to an image, with its per-pixel features.
#[derive(Debug)]
pub struct FeatureCache<'a> {
    image: &'a HighDimImage,
    kind: DistanceKind,
    store: Store,
}

impl<'a> FeatureCache<'a> {
    pub fn build(
        image: &'a HighDimImage,
        kind: DistanceKind,
        mode: FeatureMode,
        exec: Execution,
    ) -> Result<Self, DistanceError> {
        kind.validate()?;
        let n = image.len();
        let neighborhood = kind.neighborhood().copied().unwrap_or_default();
        let center = |id: usize| image.index_of(id);
        let store = match kind {
            DistanceKind::EuclideanSq => Store::Raw,
            DistanceKind::QfHistogram { .. } => {
                let bins = kind.bins().expect("qf kind has bins");
                let similarity = QfBinSimilarity::new(bins)?;
                let edges = image_bin_edges(image, bins)?;
                let stacks = match mode {
                    FeatureMode::Precompute => Some(exec.try_map(n, |id| {
                        histogram_feature(&extract_patch(image, center(id), &neighborhood), &edges)
                    })?),
                    FeatureMode::Lazy => None,
                };
                Store::Histograms {
                    edges,
                    similarity,
                    stacks,
                }
            }
            DistanceKind::Bhattacharyya { ridge, .. } => Store::Covariances {
                ridge,
                features: match mode {
                    FeatureMode::Precompute => Some(exec.map(n, |id| {
                        covariance_feature(&extract_patch(image, center(id), &neighborhood))
                    })),
                    FeatureMode::Lazy => None,
                },
            },
            DistanceKind::Chamfer { .. }
            | DistanceKind::Hausdorff { .. }
            | DistanceKind::HausdorffMedian { .. }
            | DistanceKind::Ssd { .. } => Store::Clouds {
                kernel: match kind {
                    DistanceKind::Chamfer { .. } => PointCloudDistance::Chamfer,
                    DistanceKind::Hausdorff { .. } => PointCloudDistance::Hausdorff,
                    DistanceKind::HausdorffMedian { .. } => PointCloudDistance::HausdorffMedian,
                    _ => PointCloudDistance::Ssd,
                },
                weights: neighborhood.weights(),
                members: match mode {
                    FeatureMode::Precompute => {
                        Some(exec.map(n, |id| neighborhood.member_ids(image, center(id))))
                    }
                    FeatureMode::Lazy => None,
                },
            },
        };
        Ok(FeatureCache { image, kind, store })
    }

    pub fn kind(&self) -> &DistanceKind {
        &self.kind
    }

    pub fn image(&self) -> &HighDimImage {
        self.image
    }

    fn neighborhood(&self) -> NeighborhoodSpec {
        self.kind.neighborhood().copied().unwrap_or_default()
    }

    /// Histogram feature of pixel `id` (QF kind only).
    pub fn histogram(&self, id: usize) -> Option<std::borrow::Cow<'_, HistogramStack>> {
        match &self.store {
            Store::Histograms { stacks: Some(s), .. } => Some(std::borrow::Cow::Borrowed(&s[id])),
            Store::Histograms { edges, .. } => {
                let patch = extract_patch(self.image, self.image.index_of(id), &self.neighborhood());
                histogram_feature(&patch, edges).ok().map(std::borrow::Cow::Owned)
            }
            _ => None,
        }
    }

    /// Covariance feature of pixel `id` (Bhattacharyya kind only).
    pub fn covariance(&self, id: usize) -> Option<std::borrow::Cow<'_, CovarianceFeature>> {
        match &self.store {
            Store::Covariances { features: Some(f), .. } => Some(std::borrow::Cow::Borrowed(&f[id])),
            Store::Covariances { .. } => {
                let patch = extract_patch(self.image, self.image.index_of(id), &self.neighborhood());
                Some(std::borrow::Cow::Owned(covariance_feature(&patch)))
            }
            _ => None,
        }
    }

    fn gather(&self, id: usize, members: &Option<Vec<Vec<usize>>>, out: &mut Vec<f64>) {
        out.clear();
        let lazy;
        let ids = match members {
            Some(m) => &m[id],
            None => {
                lazy = self.neighborhood().member_ids(self.image, self.image.index_of(id));
                &lazy
            }
        };
        for &m in ids {
            out.extend_from_slice(self.image.pixel(m));
        }
    }

    /// Writes the per-pixel features as a flat f64le payload plus JSON header.
    ///
    /// Debugging aid only; the layout is not stable.
    pub fn dump(&self, path: &std::path::Path) -> std::io::Result<()> {
        let n = self.image.len();
        let mut payload: Vec<f64> = Vec::new();
        let per_pixel = match &self.store {
            Store::Raw => {
                payload.extend_from_slice(self.image.data());
                self.image.channels()
            }
            Store::Histograms { .. } => {
                for id in 0..n {
                    payload.extend_from_slice(self.histogram(id).expect("qf").values());
                }
                self.image.channels() * self.kind.bins().unwrap_or(0)
            }
            Store::Covariances { .. } => {
                for id in 0..n {
                    let f = self.covariance(id).expect("cov");
                    payload.extend_from_slice(f.mean());
                    payload.extend_from_slice(f.covariance());
                }
                let c = self.image.channels();
                c + c * c
            }
            Store::Clouds { members, .. } => {
                let mut buf = Vec::new();
                for id in 0..n {
                    self.gather(id, members, &mut buf);
                    payload.extend_from_slice(&buf);
                }
                self.image.channels() * self.neighborhood().size()
            }
        };
        let header = format!(
            "{{\"kind\": \"{}\", \"pixels\": {n}, \"channels\": {}, \"bins\": {}, \"eta\": {}, \"values_per_pixel\": {per_pixel}, \"dtype\": \"f64le\"}}",
            self.kind.tag(),
            self.image.channels(),
            self.kind.bins().unwrap_or(0),
            self.neighborhood().radius,
        );
        std::fs::write(crate::image::sidecar_path(path), header)?;
        let bytes: Vec<u8> = payload.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(path, bytes)
    }
}

impl PairDistance for FeatureCache<'_> {
    type Scratch = KernelScratch;

    fn len(&self) -> usize {
        self.image.len()
    }

    fn scratch(&self) -> KernelScratch {
        KernelScratch::default()
    }

    fn distance_with(
        &self,
        scratch: &mut KernelScratch,
        i: usize,
        j: usize,
    ) -> Result<f64, DistanceError> {
        match &self.store {
            Store::Raw => Ok(sq_dist(self.image.pixel(i), self.image.pixel(j))),
            Store::Histograms { similarity, .. } => {
                let (a, b) = (self.histogram(i), self.histogram(j));
                let (a, b) = a.zip(b).ok_or_else(|| {
                    DistanceError::ShapeMismatch("histogram extraction failed".into())
                })?;
                qf_distance(&a, &b, similarity)
            }
            Store::Covariances { ridge, .. } => {
                let a = self.covariance(i).expect("covariance store");
                let b = self.covariance(j).expect("covariance store");
                bhattacharyya_with(&mut scratch.bhattacharyya, &a, &b, *ridge).map_err(|e| match e {
                    DistanceError::Singular { .. } => DistanceError::Singular { pair: Some((i, j)) },
                    other => other,
                })
            }
            Store::Clouds {
                kernel,
                weights,
                members,
            } => {
                let mut a = std::mem::take(&mut scratch.cloud_a);
                let mut b = std::mem::take(&mut scratch.cloud_b);
                self.gather(i, members, &mut a);
                self.gather(j, members, &mut b);
                let channels = self.image.channels();
                let result = kernel.eval_with(
                    CloudView {
                        channels,
                        points: &a,
                        weights,
                    },
                    CloudView {
                        channels,
                        points: &b,
                        weights,
                    },
                    &mut scratch.row_min,
                    &mut scratch.col_min,
                );
                scratch.cloud_a = a;
                scratch.cloud_b = b;
                result
            }
        }
    }
}

/// Distance between two pixels under `kind`, checked against the cache.
pub fn pairwise_distance(
    image: &HighDimImage,
    p_i: PixelIndex,
    p_j: PixelIndex,
    kind: &DistanceKind,
    cache: &FeatureCache<'_>,
) -> Result<f64, DistanceError> {
    if cache.kind() != kind {
        return Err(DistanceError::KindMismatch {
            cache: cache.kind().to_string(),
            requested: kind.to_string(),
        });
    }
    if !std::ptr::eq(cache.image(), image) && cache.image() != image {
        return Err(DistanceError::ShapeMismatch(
            "feature cache was built for a different image".into(),
        ));
    }
    for p in [p_i, p_j] {
        if !image.contains(p) {
            return Err(DistanceError::InvalidParameter(format!(
                "pixel ({}, {}) outside {}x{} image",
                p.x,
                p.y,
                image.width(),
                image.height()
            )));
        }
    }
    cache.distance(image.id_of(p_i), image.id_of(p_j))
}
