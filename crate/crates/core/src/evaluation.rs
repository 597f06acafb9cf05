//! Synthetic benchmark data, the neighbor-hit quality metric and recoloring
//! of embeddings back onto the image grid.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::Embedding;
use crate::exec::Execution;
use crate::image::{HighDimImage, ImageError, LabelRaster};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("k_max must lie in [1, {n}), got {k_max}")]
    InvalidK { k_max: usize, n: usize },
    #[error("no labeled points to probe")]
    NoLabeledPoints,
    #[error("malformed image file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("png encoding failed: {0}")]
    Png(#[from] png::EncodingError),
}

/// Parameters of the four-class synthetic texture image.
///
/// The central half of the image holds four homogeneous squares, one per
/// class, ordered top-left, top-right, bottom-left, bottom-right. Each
/// quadrant of the surrounding frame is a checkerboard of `block x block`
/// tiles alternating between two classes given by [`SyntheticSpec::checker_pairs`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub side: usize,
    pub block: usize,
    pub class_means: [[f64; 2]; 4],
    pub noise_sd: f64,
    /// Class pairs of the checkerboard in each quadrant (TL, TR, BL, BR).
    /// The first class of a pair fills tiles with even parity.
    pub checker_pairs: [[usize; 2]; 4],
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            side: 32,
            block: 2,
            class_means: [[0.2, 0.2], [0.2, 0.8], [0.8, 0.2], [0.8, 0.8]],
            noise_sd: 0.05,
            checker_pairs: [[0, 1], [1, 3], [2, 0], [3, 2]],
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub const CHANNELS: usize = 2;
    pub const CLASSES: usize = 4;

    pub fn validate(&self) -> Result<(), EvaluationError> {
        let bad = |m: String| Err(EvaluationError::InvalidSpec(m));
        if self.block == 0 {
            return bad("block must be positive".into());
        }
        if self.side == 0 || self.side % (4 * self.block) != 0 {
            return bad(format!(
                "side {} must be a positive multiple of 4 * block = {}",
                self.side,
                4 * self.block
            ));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return bad(format!("noise_sd must be non-negative, got {}", self.noise_sd));
        }
        if self.class_means.iter().flatten().any(|v| !v.is_finite()) {
            return bad("class means must be finite".into());
        }
        if self.checker_pairs.iter().flatten().any(|&c| c >= Self::CLASSES) {
            return bad("checker pairs must reference classes 0..4".into());
        }
        Ok(())
    }

    /// Label of the homogeneous square of class/quadrant `q` (1..=4).
    pub fn homogeneous_label(q: usize) -> u32 {
        q as u32 + 1
    }

    /// Label of the checkerboard in quadrant `q` (5..=8).
    pub fn checker_label(q: usize) -> u32 {
        q as u32 + 5
    }

    /// Class and evaluation label at pixel `(x, y)`.
    pub fn class_at(&self, x: usize, y: usize) -> (usize, u32) {
        let s = self.side;
        let quadrant = usize::from(y >= s / 2) * 2 + usize::from(x >= s / 2);
        let central = (s / 4..3 * s / 4).contains(&x) && (s / 4..3 * s / 4).contains(&y);
        if central {
            (quadrant, Self::homogeneous_label(quadrant))
        } else {
            let parity = (x / self.block + y / self.block) % 2;
            (self.checker_pairs[quadrant][parity], Self::checker_label(quadrant))
        }
    }
}

/// Draws the synthetic image and its 8-region ground truth.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(HighDimImage, LabelRaster), EvaluationError> {
    spec.validate()?;
    let s = spec.side;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = (spec.noise_sd > 0.0)
        .then(|| Normal::new(0.0, spec.noise_sd).expect("validated sd"));
    let mut data = Vec::with_capacity(s * s * SyntheticSpec::CHANNELS);
    let mut labels = Vec::with_capacity(s * s);
    for y in 0..s {
        for x in 0..s {
            let (class, label) = spec.class_at(x, y);
            for &m in &spec.class_means[class] {
                data.push(m + noise.map_or(0.0, |d| d.sample(&mut rng)));
            }
            labels.push(label);
        }
    }
    Ok((
        HighDimImage::new(s, s, SyntheticSpec::CHANNELS, data)?,
        LabelRaster::new(s, s, labels)?,
    ))
}

/// Neighbor hit for `k = 1..=k_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborHitCurve {
    hits: Vec<f64>,
}

impl NeighborHitCurve {
    pub fn k_max(&self) -> usize {
        self.hits.len()
    }

    pub fn hits(&self) -> &[f64] {
        &self.hits
    }

    /// Hit rate at `k` (1-based).
    pub fn at(&self, k: usize) -> f64 {
        self.hits[k - 1]
    }

    /// CSV with a `k,hit` header.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "k,hit")?;
        for (k, h) in self.hits.iter().enumerate() {
            writeln!(out, "{},{h:?}", k + 1)?;
        }
        out.flush()
    }
}

/// Average fraction of each labeled point's `k` nearest embedding neighbors
/// (probe excluded, ties to the smaller index) that share its label.
///
/// Unlabeled points are never probes; as neighbors they count as misses.
pub fn neighbor_hit(
    embedding: &Embedding,
    labels: &LabelRaster,
    k_max: usize,
    exec: Execution,
) -> Result<NeighborHitCurve, EvaluationError> {
    let n = embedding.len();
    if labels.len() != n {
        return Err(EvaluationError::SizeMismatch(format!(
            "embedding has {n} points, labels have {}",
            labels.len()
        )));
    }
    if k_max == 0 || k_max >= n {
        return Err(EvaluationError::InvalidK { k_max, n });
    }
    let lab = labels.labels();
    let per_probe = exec.map_init(
        n,
        || Vec::with_capacity(n),
        |cand: &mut Vec<(f64, usize)>, i| {
            if lab[i] == LabelRaster::UNLABELED {
                return None;
            }
            let p = embedding.point(i);
            cand.clear();
            cand.extend((0..n).filter(|&j| j != i).map(|j| {
                let q = embedding.point(j);
                let (dx, dy) = (p[0] - q[0], p[1] - q[1]);
                (dx * dx + dy * dy, j)
            }));
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k_max < cand.len() {
                cand.select_nth_unstable_by(k_max - 1, cmp);
                cand.truncate(k_max);
            }
            cand.sort_unstable_by(cmp);
            let mut same = 0usize;
            Some(
                cand.iter()
                    .enumerate()
                    .map(|(r, &(_, j))| {
                        same += usize::from(lab[j] == lab[i]);
                        same as f64 / (r + 1) as f64
                    })
                    .collect::<Vec<f64>>(),
            )
        },
    );
    let mut sums = vec![0.0; k_max];
    let mut probes = 0usize;
    for row in per_probe.into_iter().flatten() {
        probes += 1;
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    if probes == 0 {
        return Err(EvaluationError::NoLabeledPoints);
    }
    Ok(NeighborHitCurve {
        hits: sums.into_iter().map(|s| s / probes as f64).collect(),
    })
}

/// 8-bit RGB raster in pixel order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, EvaluationError> {
        if width == 0 || height == 0 || data.len() != 3 * width * height {
            return Err(EvaluationError::SizeMismatch(format!(
                "{} bytes for a {width}x{height} RGB image",
                data.len()
            )));
        }
        Ok(RgbImage { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, id: usize) -> [u8; 3] {
        [self.data[3 * id], self.data[3 * id + 1], self.data[3 * id + 2]]
    }

    /// Binary PPM (P6, maxval 255).
    pub fn write_ppm(&self, path: &Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.data)?;
        out.flush()
    }

    pub fn read_ppm(path: &Path) -> Result<Self, EvaluationError> {
        let bytes = std::fs::read(path)?;
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(EvaluationError::Malformed("truncated PPM header".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if fields[0] != "P6" || fields[3] != "255" {
            return Err(EvaluationError::Malformed("expected P6 with maxval 255".into()));
        }
        let dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| EvaluationError::Malformed(format!("bad dimension '{s}': {e}")))
        };
        let (w, h) = (dim(&fields[1])?, dim(&fields[2])?);
        Self::new(w, h, bytes.get(pos + 1..).unwrap_or_default().to_vec())
    }

    pub fn write_png(&self, path: &Path) -> Result<(), EvaluationError> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut encoder = png::Encoder::new(file, self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header()?;
        writer.write_image_data(&self.data)?;
        writer.finish()?;
        Ok(())
    }
}

/// Corner colors of the 2D colormap at normalized `(0,0)`, `(1,0)`, `(0,1)`, `(1,1)`.
pub const DEFAULT_CORNERS: [[u8; 3]; 4] = [[230, 25, 75], [60, 180, 75], [0, 130, 200], [255, 225, 25]];

/// Colors each pixel by the bilinear blend of `corners` at its min-max
/// normalized embedding coordinate. A constant axis maps to 0.5.
pub fn recolor(
    embedding: &Embedding,
    width: usize,
    height: usize,
    corners: [[u8; 3]; 4],
) -> Result<RgbImage, EvaluationError> {
    let n = embedding.len();
    if n != width * height {
        return Err(EvaluationError::SizeMismatch(format!(
            "embedding has {n} points for a {width}x{height} image"
        )));
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in embedding.coords().chunks_exact(2) {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let norm = |v: f64, d: usize| {
        if hi[d] > lo[d] {
            (v - lo[d]) / (hi[d] - lo[d])
        } else {
            0.5
        }
    };
    let mut data = Vec::with_capacity(3 * n);
    for p in embedding.coords().chunks_exact(2) {
        let (u, v) = (norm(p[0], 0), norm(p[1], 1));
        let w = [(1.0 - u) * (1.0 - v), u * (1.0 - v), (1.0 - u) * v, u * v];
        for c in 0..3 {
            let value: f64 = w.iter().zip(&corners).map(|(wi, corner)| wi * f64::from(corner[c])).sum();
            data.push(value.round().clamp(0.0, 255.0) as u8);
        }
    }
    RgbImage::new(width, height, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_label_counts() {
        let (img, labels) = generate_synthetic(&SyntheticSpec::default()).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (32, 32, 2));
        let counts = labels.counts();
        for q in 0..4 {
            assert_eq!(counts[&SyntheticSpec::homogeneous_label(q)], 64);
            assert_eq!(counts[&SyntheticSpec::checker_label(q)], 192);
        }
        assert_eq!(counts.len(), 8);
    }

    #[test]
    fn checkerboards_are_balanced() {
        let spec = SyntheticSpec::default();
        for q in 0..4 {
            let mut per_class = [0usize; 4];
            for y in 0..32 {
                for x in 0..32 {
                    let (class, label) = spec.class_at(x, y);
                    if label == SyntheticSpec::checker_label(q) {
                        per_class[class] += 1;
                    }
                }
            }
            let [a, b] = spec.checker_pairs[q];
            assert_eq!(per_class[a], 96);
            assert_eq!(per_class[b], 96);
        }
    }

    #[test]
    fn low_low_class_sits_in_both_left_checkerboards() {
        let spec = SyntheticSpec::default();
        assert!(spec.checker_pairs[0].contains(&0));
        assert!(spec.checker_pairs[2].contains(&0));
    }

    #[test]
    fn noiseless_image_has_four_values() {
        let spec = SyntheticSpec {
            noise_sd: 0.0,
            ..SyntheticSpec::default()
        };
        let (img, _) = generate_synthetic(&spec).unwrap();
        let mut distinct: Vec<Vec<u64>> = (0..img.len())
            .map(|i| img.pixel(i).iter().map(|v| v.to_bits()).collect())
            .collect();
        distinct.sort();
        distinct.dedup();
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn generation_is_reproducible() {
        let spec = SyntheticSpec {
            seed: 7,
            ..SyntheticSpec::default()
        };
        assert_eq!(generate_synthetic(&spec).unwrap().0, generate_synthetic(&spec).unwrap().0);
    }

    #[test]
    fn invalid_side_is_rejected() {
        let spec = SyntheticSpec {
            side: 30,
            ..SyntheticSpec::default()
        };
        assert!(generate_synthetic(&spec).is_err());
    }

    #[test]
    fn single_label_gives_full_hits() {
        let e = Embedding::new((0..40).map(|v| (v as f64).sin()).collect()).unwrap();
        let l = LabelRaster::new(4, 5, vec![3; 20]).unwrap();
        let c = neighbor_hit(&e, &l, 10, Execution::Sequential).unwrap();
        assert!(c.hits().iter().all(|&h| h == 1.0));
    }

    #[test]
    fn unlabeled_neighbors_are_misses() {
        let e = Embedding::new(vec![0.0, 0.0, 1.0, 0.0, 10.0, 0.0]).unwrap();
        let l = LabelRaster::new(3, 1, vec![1, 0, 1]).unwrap();
        let c = neighbor_hit(&e, &l, 1, Execution::Sequential).unwrap();
        assert_eq!(c.at(1), 0.0);
        assert!(neighbor_hit(&e, &l, 3, Execution::Sequential).is_err());
    }

    #[test]
    fn recolor_corners_and_center() {
        let e = Embedding::new(vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.5]).unwrap();
        let img = recolor(&e, 3, 2, DEFAULT_CORNERS).unwrap();
        for q in 0..4 {
            assert_eq!(img.pixel(q), DEFAULT_CORNERS[q]);
        }
        let mean: Vec<u8> = (0..3)
            .map(|c| {
                (DEFAULT_CORNERS.iter().map(|k| f64::from(k[c])).sum::<f64>() / 4.0).round() as u8
            })
            .collect();
        assert_eq!(img.pixel(4).to_vec(), mean);
        assert_eq!(img.pixel(4), img.pixel(5));
    }

    #[test]
    fn ppm_round_trip() {
        let img = RgbImage::new(2, 1, vec![1, 2, 3, 250, 10, 32]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ppm");
        img.write_ppm(&path).unwrap();
        assert_eq!(RgbImage::read_ppm(&path).unwrap(), img);
        img.write_png(&dir.path().join("a.png")).unwrap();
    }
}
