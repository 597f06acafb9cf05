//! Timing harness for the distance kernels.
//!
//! Each measurement samples seeded random pixel pairs and times the two
//! phases of a texture-aware distance separately: feature extraction for
//! every distinct pixel of the sample (reported per pixel), then the distance
//! between the extracted features of every pair (reported per pair). Scaling
//! behavior is summarized by a log-log least-squares exponent.

use std::hint::black_box;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distances::{
    bhattacharyya_with, qf_distance, BhattacharyyaWorkspace, CloudView, DistanceError,
    DistanceKind, PointCloudDistance, QfBinSimilarity,
};
use crate::features::{covariance_feature, histogram_feature, image_bin_edges, BinEdges};
use crate::image::{extract_patch, HighDimImage, ImageError};

/// Timing summary of one phase, in nanoseconds per item.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseStats {
    pub mean_ns: f64,
    pub sd_ns: f64,
    pub min_ns: f64,
}

impl PhaseStats {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        PhaseStats {
            mean_ns: mean,
            sd_ns: var.sqrt(),
            min_ns: samples.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub kind: String,
    pub eta: usize,
    pub channels: usize,
    pub bins: usize,
    pub n_pairs: usize,
    /// Distinct pixels whose features were extracted.
    pub n_pixels: usize,
    pub repetitions: usize,
    /// Nanoseconds per extracted pixel.
    pub feature: PhaseStats,
    /// Nanoseconds per pair.
    pub distance: PhaseStats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub threads: usize,
    pub profile: &'static str,
    pub parallel_feature: bool,
}

impl BenchReport {
    pub fn new(rows: Vec<BenchRow>) -> Self {
        BenchReport {
            rows,
            threads: 1,
            profile: if cfg!(debug_assertions) { "debug" } else { "release" },
            parallel_feature: cfg!(feature = "parallel"),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "# threads={} profile={} parallel_feature={}",
            self.threads, self.profile, self.parallel_feature
        )?;
        writeln!(
            out,
            "kind,eta,channels,bins,n_pairs,n_pixels,repetitions,feature_mean_ns_per_pixel,feature_sd_ns,feature_min_ns,distance_mean_ns_per_pair,distance_sd_ns,distance_min_ns"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}",
                r.kind,
                r.eta,
                r.channels,
                r.bins,
                r.n_pairs,
                r.n_pixels,
                r.repetitions,
                r.feature.mean_ns,
                r.feature.sd_ns,
                r.feature.min_ns,
                r.distance.mean_ns,
                r.distance.sd_ns,
                r.distance.min_ns
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut out)?;
        out.flush()
    }
}

/// Image with values drawn uniformly from `[0, 1)`.
pub fn random_image(
    width: usize,
    height: usize,
    channels: usize,
    seed: u64,
) -> Result<HighDimImage, ImageError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width * height * channels).map(|_| rng.gen::<f64>()).collect();
    HighDimImage::new(width, height, channels, data)
}

/// `n` distinct-pixel pairs drawn with a seeded generator.
pub fn sample_pairs(n_pixels: usize, n: usize, seed: u64) -> Vec<(usize, usize)> {
    assert!(n_pixels >= 2, "need at least two pixels to form a pair");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| loop {
            let (i, j) = (rng.gen_range(0..n_pixels), rng.gen_range(0..n_pixels));
            if i != j {
                break (i, j);
            }
        })
        .collect()
}

enum Extracted {
    Raw(Vec<Vec<f64>>),
    Hist(Vec<crate::features::HistogramStack>),
    Cov(Vec<crate::features::CovarianceFeature>),
    Cloud(Vec<crate::image::PointCloud>),
}

struct Kernel {
    kind: DistanceKind,
    edges: Option<Arc<[BinEdges]>>,
    similarity: Option<QfBinSimilarity>,
}

impl Kernel {
    fn new(kind: &DistanceKind, image: &HighDimImage) -> Result<Self, DistanceError> {
        kind.validate()?;
        let (edges, similarity) = match kind.bins() {
            Some(b) => (Some(image_bin_edges(image, b)?), Some(QfBinSimilarity::new(b)?)),
            None => (None, None),
        };
        Ok(Kernel {
            kind: *kind,
            edges,
            similarity,
        })
    }

    fn extract(&self, image: &HighDimImage, ids: &[usize]) -> Result<Extracted, DistanceError> {
        let nb = self.kind.neighborhood().copied().unwrap_or_default();
        let center = |id: usize| image.index_of(id);
        Ok(match self.kind {
            DistanceKind::EuclideanSq => {
                Extracted::Raw(ids.iter().map(|&id| image.pixel(id).to_vec()).collect())
            }
            DistanceKind::QfHistogram { .. } => {
                let edges = self.edges.as_ref().expect("qf edges");
                Extracted::Hist(
                    ids.iter()
                        .map(|&id| histogram_feature(&extract_patch(image, center(id), &nb), edges))
                        .collect::<Result<_, _>>()?,
                )
            }
            DistanceKind::Bhattacharyya { .. } => Extracted::Cov(
                ids.iter()
                    .map(|&id| covariance_feature(&extract_patch(image, center(id), &nb)))
                    .collect(),
            ),
            _ => Extracted::Cloud(
                ids.iter()
                    .map(|&id| extract_patch(image, center(id), &nb))
                    .collect(),
            ),
        })
    }

    fn distances(&self, features: &Extracted, pairs: &[(usize, usize)]) -> Result<f64, DistanceError> {
        let mut acc = 0.0;
        match features {
            Extracted::Raw(v) => {
                for &(i, j) in pairs {
                    acc += crate::distances::euclidean_sq(&v[i], &v[j])?;
                }
            }
            Extracted::Hist(v) => {
                let sim = self.similarity.as_ref().expect("qf similarity");
                for &(i, j) in pairs {
                    acc += qf_distance(&v[i], &v[j], sim)?;
                }
            }
            Extracted::Cov(v) => {
                let ridge = match self.kind {
                    DistanceKind::Bhattacharyya { ridge, .. } => ridge,
                    _ => unreachable!(),
                };
                let mut ws = BhattacharyyaWorkspace::new();
                for &(i, j) in pairs {
                    acc += bhattacharyya_with(&mut ws, &v[i], &v[j], ridge)?;
                }
            }
            Extracted::Cloud(v) => {
                let kernel = match self.kind {
                    DistanceKind::Chamfer { .. } => PointCloudDistance::Chamfer,
                    DistanceKind::Hausdorff { .. } => PointCloudDistance::Hausdorff,
                    DistanceKind::HausdorffMedian { .. } => PointCloudDistance::HausdorffMedian,
                    _ => PointCloudDistance::Ssd,
                };
                let (mut rows, mut cols) = (Vec::new(), Vec::new());
                for &(i, j) in pairs {
                    let (a, b) = (CloudView::from(&v[i]), CloudView::from(&v[j]));
                    acc += kernel.eval_with(a, b, &mut rows, &mut cols)?;
                }
            }
        }
        Ok(acc)
    }
}

struct Case<'a> {
    kind: DistanceKind,
    image: &'a HighDimImage,
    kernel: Kernel,
    ids: Vec<usize>,
    slots: Vec<(usize, usize)>,
    feature_ns: Vec<f64>,
    distance_ns: Vec<f64>,
}

impl<'a> Case<'a> {
    fn new(
        kind: &DistanceKind,
        image: &'a HighDimImage,
        n_pairs: usize,
        seed: u64,
    ) -> Result<Self, DistanceError> {
        let kernel = Kernel::new(kind, image)?;
        let pairs = sample_pairs(image.len(), n_pairs, seed);
        let mut ids: Vec<usize> = pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
        ids.sort_unstable();
        ids.dedup();
        let slot = |id: usize| ids.binary_search(&id).expect("sampled id");
        let slots = pairs.iter().map(|&(i, j)| (slot(i), slot(j))).collect();
        Ok(Case {
            kind: *kind,
            image,
            kernel,
            ids,
            slots,
            feature_ns: Vec::new(),
            distance_ns: Vec::new(),
        })
    }

    fn pass(&mut self, record: bool) -> Result<(), DistanceError> {
        let start = Instant::now();
        let features = black_box(self.kernel.extract(self.image, black_box(&self.ids))?);
        let extract = start.elapsed();
        let start = Instant::now();
        black_box(self.kernel.distances(black_box(&features), &self.slots)?);
        let dist = start.elapsed();
        if record {
            self.feature_ns.push(extract.as_nanos() as f64 / self.ids.len() as f64);
            self.distance_ns.push(dist.as_nanos() as f64 / self.slots.len() as f64);
        }
        Ok(())
    }

    fn row(&self) -> BenchRow {
        BenchRow {
            kind: self.kind.tag().to_string(),
            eta: self.kind.neighborhood().map_or(0, |n| n.radius),
            channels: self.image.channels(),
            bins: self.kind.bins().unwrap_or(0),
            n_pairs: self.slots.len(),
            n_pixels: self.ids.len(),
            repetitions: self.distance_ns.len(),
            feature: PhaseStats::from_samples(&self.feature_ns),
            distance: PhaseStats::from_samples(&self.distance_ns),
        }
    }
}

/// Times feature extraction and distance evaluation of `kind` over
/// `n_pairs` seeded random pixel pairs of `image`.
///
/// Features are extracted once per distinct pixel of the sample, so small
/// images keep the distance phase cache-resident.
///
/// One untimed warm-up pass precedes `repetitions` timed passes.
pub fn bench_kernel(
    kind: &DistanceKind,
    image: &HighDimImage,
    n_pairs: usize,
    repetitions: usize,
    seed: u64,
) -> Result<BenchRow, DistanceError> {
    let mut rows = bench_sweep(&[(*kind, image)], n_pairs, repetitions, seed)?;
    Ok(rows.remove(0))
}

/// Times several cases in interleaved rounds.
///
/// Every round runs one pass of each case in order, so slow drift in
/// machine load affects all cases alike. Rows come back in case order;
/// each case gets one untimed warm-up pass.
pub fn bench_sweep(
    cases: &[(DistanceKind, &HighDimImage)],
    n_pairs: usize,
    rounds: usize,
    seed: u64,
) -> Result<Vec<BenchRow>, DistanceError> {
    if n_pairs == 0 || rounds == 0 {
        return Err(DistanceError::InvalidParameter(
            "n_pairs and repetitions must be positive".into(),
        ));
    }
    let mut prepared = cases
        .iter()
        .map(|(kind, image)| Case::new(kind, image, n_pairs, seed))
        .collect::<Result<Vec<_>, _>>()?;
    for round in 0..=rounds {
        for case in &mut prepared {
            case.pass(round > 0)?;
        }
    }
    Ok(prepared.iter().map(Case::row).collect())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_exponent(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
