//! Per-pixel texture features: local histograms and covariance + means.
//!
//! Both features take the (possibly weighted) neighborhood point cloud of a
//! pixel. Weights act as probability mass: a histogram bin receives the
//! weights of the pixels that fall into it, and the covariance is the
//! weighted population covariance around the weighted mean.

use std::sync::Arc;

use thiserror::Error;

use crate::image::{HighDimImage, PointCloud};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("bin edges must be strictly increasing and finite with at least one bin")]
    BadEdges,
    #[error("expected bin edges for {expected} channels, got {found}")]
    ChannelMismatch { expected: usize, found: usize },
}

/// Rice rule bin count: the smallest `B` with `B >= 2 * cbrt(M)`.
///
/// Evaluated as `B^3 >= 8M` in integers so exact cubes do not round up.
pub fn rice_bins(m: usize) -> usize {
    assert!(m >= 1, "neighborhood size must be positive");
    let target = 8 * m as u128;
    let mut b = (2.0 * (m as f64).cbrt()).ceil() as u128;
    while b > 1 && (b - 1).pow(3) >= target {
        b -= 1;
    }
    while b.pow(3) < target {
        b += 1;
    }
    b as usize
}

/// Bin boundaries for one channel: `B + 1` strictly increasing edges.
#[derive(Clone, Debug, PartialEq)]
pub struct BinEdges {
    edges: Vec<f64>,
}

impl BinEdges {
    pub fn new(edges: Vec<f64>) -> Result<Self, FeatureError> {
        let ok = edges.len() >= 2
            && edges.iter().all(|e| e.is_finite())
            && edges.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(BinEdges { edges })
        } else {
            Err(FeatureError::BadEdges)
        }
    }

    /// `bins` equal-width bins over `[lo, hi]`; a degenerate range becomes `[lo, lo + 1]`.
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self, FeatureError> {
        if bins == 0 || !lo.is_finite() || !hi.is_finite() {
            return Err(FeatureError::BadEdges);
        }
        let hi = if hi > lo { hi } else { lo + 1.0 };
        let step = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|b| lo + step * b as f64).collect();
        edges.push(hi);
        Self::new(edges)
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Bin of `v`: `edges[b] <= v < edges[b+1]`, last bin closed, out-of-range clamped.
    pub fn bin_of(&self, v: f64) -> usize {
        let above = self.edges.partition_point(|&e| e <= v);
        above.saturating_sub(1).min(self.bins() - 1)
    }
}

/// Shared bin space for every pixel: per-channel uniform bins over the image range.
pub fn image_bin_edges(image: &HighDimImage, bins: usize) -> Result<Arc<[BinEdges]>, FeatureError> {
    image
        .channel_ranges()
        .into_iter()
        .map(|(lo, hi)| BinEdges::uniform(lo, hi, bins))
        .collect::<Result<Vec<_>, _>>()
        .map(Arc::from)
}

/// Normalized local histograms, one row of `B` bins per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct HistogramStack {
    channels: usize,
    bins: usize,
    values: Vec<f64>,
    edges: Arc<[BinEdges]>,
}

impl HistogramStack {
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.values[c * self.bins..(c + 1) * self.bins]
    }

    pub fn edges(&self) -> &Arc<[BinEdges]> {
        &self.edges
    }

    /// True when both stacks live in the same bin space.
    pub fn same_bins(&self, other: &HistogramStack) -> bool {
        self.channels == other.channels
            && self.bins == other.bins
            && (Arc::ptr_eq(&self.edges, &other.edges) || self.edges == other.edges)
    }
}

/// Weighted local histogram of each channel of `patch`.
pub fn histogram_feature(
    patch: &PointCloud,
    edges: &Arc<[BinEdges]>,
) -> Result<HistogramStack, FeatureError> {
    let channels = patch.channels();
    if edges.len() != channels {
        return Err(FeatureError::ChannelMismatch {
            expected: channels,
            found: edges.len(),
        });
    }
    let bins = edges[0].bins();
    if edges.iter().any(|e| e.bins() != bins) {
        return Err(FeatureError::BadEdges);
    }
    let mut values = vec![0.0; channels * bins];
    for (row, &w) in patch.rows().zip(patch.weights()) {
        for (c, &v) in row.iter().enumerate() {
            values[c * bins + edges[c].bin_of(v)] += w;
        }
    }
    let total: f64 = patch.weights().iter().sum();
    if total > 0.0 && total != 1.0 {
        values.iter_mut().for_each(|v| *v /= total);
    }
    Ok(HistogramStack {
        channels,
        bins,
        values,
        edges: Arc::clone(edges),
    })
}

/// Weighted channel means and population covariance of a neighborhood.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceFeature {
    mean: Vec<f64>,
    covariance: Vec<f64>,
}

impl CovarianceFeature {
    /// Builds a feature from explicit parts; `covariance` is row-major `C x C`.
    pub fn new(mean: Vec<f64>, covariance: Vec<f64>) -> Self {
        assert_eq!(mean.len() * mean.len(), covariance.len(), "covariance must be C x C");
        CovarianceFeature { mean, covariance }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    pub fn cov(&self, j: usize, k: usize) -> f64 {
        self.covariance[j * self.mean.len() + k]
    }

    pub fn trace(&self) -> f64 {
        (0..self.channels()).map(|c| self.cov(c, c)).sum()
    }
}

/// `mu_c = sum_q w_q g_qc`, `sigma_jk = sum_q w_q (g_qj - mu_j)(g_qk - mu_k)`.
///
/// Weights are used as given; they are expected to sum to one.
pub fn covariance_feature(patch: &PointCloud) -> CovarianceFeature {
    let c = patch.channels();
    let mut mean = vec![0.0; c];
    for (row, &w) in patch.rows().zip(patch.weights()) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += w * v;
        }
    }
    let mut covariance = vec![0.0; c * c];
    let mut centered = vec![0.0; c];
    for (row, &w) in patch.rows().zip(patch.weights()) {
        for ((d, &v), &m) in centered.iter_mut().zip(row).zip(&mean) {
            *d = v - m;
        }
        for j in 0..c {
            let wj = w * centered[j];
            for k in j..c {
                covariance[j * c + k] += wj * centered[k];
            }
        }
    }
    for j in 0..c {
        for k in 0..j {
            covariance[j * c + k] = covariance[k * c + j];
        }
    }
    CovarianceFeature { mean, covariance }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::PointCloud;

    #[test]
    fn rice_rule_values() {
        assert_eq!(rice_bins(9), 5);
        assert_eq!(rice_bins(25), 6);
        assert_eq!(rice_bins(49), 8);
        assert_eq!(rice_bins(81), 9);
        assert_eq!(rice_bins(1), 2);
        // Exact cubes: 2 * cbrt(27) = 6, 2 * cbrt(64) = 8.
        assert_eq!(rice_bins(27), 6);
        assert_eq!(rice_bins(64), 8);
        for m in 1..5000usize {
            let b = rice_bins(m) as u128;
            assert!(b.pow(3) >= 8 * m as u128 && (b - 1).pow(3) < 8 * m as u128);
        }
    }

    #[test]
    fn bin_assignment_edges() {
        let e = BinEdges::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(e.bin_of(0.0), 0);
        assert_eq!(e.bin_of(0.999), 0);
        assert_eq!(e.bin_of(1.0), 1);
        assert_eq!(e.bin_of(3.0), 2);
        assert_eq!(e.bin_of(7.0), 2);
        assert_eq!(e.bin_of(-4.0), 0);
        assert_eq!(BinEdges::new(vec![0.0, 1.0, 1.0]), Err(FeatureError::BadEdges));
        assert_eq!(BinEdges::new(vec![0.0]), Err(FeatureError::BadEdges));
        assert_eq!(BinEdges::uniform(2.0, 2.0, 4).unwrap().edges(), &[2.0, 2.25, 2.5, 2.75, 3.0]);
    }

    fn edges(c: usize, bins: usize) -> Arc<[BinEdges]> {
        (0..c).map(|_| BinEdges::uniform(0.0, 1.0, bins).unwrap()).collect()
    }

    #[test]
    fn identical_values_fill_one_bin() {
        let patch = PointCloud::uniform(1, vec![0.42; 9]).unwrap();
        let h = histogram_feature(&patch, &edges(1, 5)).unwrap();
        assert_eq!(h.row(0), &[0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn two_and_two_split() {
        let patch = PointCloud::uniform(1, vec![0.1, 0.05, 0.3, 0.35]).unwrap();
        let h = histogram_feature(&patch, &edges(1, 4)).unwrap();
        assert_eq!(h.row(0), &[0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn gaussian_weighted_center_mass() {
        use crate::image::NeighborhoodSpec;
        let w = NeighborhoodSpec::gaussian(1, None).weights();
        // Center value in bin 2, ring values in bin 0.
        let mut values = vec![0.05; 9];
        values[4] = 0.5;
        let patch = PointCloud::new(1, values, w.clone()).unwrap();
        let h = histogram_feature(&patch, &edges(1, 5)).unwrap();
        assert!((h.row(0)[2] - w[4]).abs() < 1e-15);
        assert!((h.row(0)[0] - (1.0 - w[4])).abs() < 1e-12);
    }

    #[test]
    fn histogram_channel_mismatch() {
        let patch = PointCloud::uniform(2, vec![0.0; 4]).unwrap();
        assert!(matches!(
            histogram_feature(&patch, &edges(1, 3)),
            Err(FeatureError::ChannelMismatch { .. })
        ));
    }

    #[test]
    fn covariance_examples() {
        let constant = PointCloud::uniform(2, vec![1.5, -2.0, 1.5, -2.0, 1.5, -2.0]).unwrap();
        let f = covariance_feature(&constant);
        assert_eq!(f.mean(), &[1.5, -2.0]);
        assert!(f.covariance().iter().all(|&v| v == 0.0));

        let pair = PointCloud::uniform(1, vec![0.0, 2.0]).unwrap();
        let f = covariance_feature(&pair);
        assert_eq!(f.mean(), &[1.0]);
        assert_eq!(f.covariance(), &[1.0]);

        let linear = PointCloud::uniform(2, vec![0.0, 0.0, 1.0, 2.0, 3.0, 6.0, -1.0, -2.0]).unwrap();
        let f = covariance_feature(&linear);
        assert!((f.cov(0, 1) - 2.0 * f.cov(0, 0)).abs() < 1e-12);
        let det = f.cov(0, 0) * f.cov(1, 1) - f.cov(0, 1) * f.cov(1, 0);
        assert!(det.abs() < 1e-12);
    }
}
