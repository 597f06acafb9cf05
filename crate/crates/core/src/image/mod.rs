//! High-dimensional image model, neighborhoods, file formats and filters.
//!
//! A [`HighDimImage`] is a raster where each pixel carries a `channels`-long
//! attribute vector. Storage is row-major by pixel with the channels of one
//! pixel contiguous, so `pixel(i)` is a plain slice. Pixel ids are 0-based and
//! `id = y * width + x`.

mod filter;
mod io;
mod neighborhood;

use thiserror::Error;

pub use filter::{gaussian_filter, gaussian_kernel, normalize_channels, NormalizeMode};
pub use io::{load_image, load_labels, save_image, save_labels, sidecar_path, ImageFormat};
pub use neighborhood::{
    extract_patch, neighborhood_members, BorderPolicy, NeighborhoodSpec, PointCloud, Weighting,
};

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions must be positive, got {width}x{height}x{channels}")]
    EmptyImage {
        width: usize,
        height: usize,
        channels: usize,
    },
    #[error("expected {expected} values for the declared dimensions, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite attribute value at pixel {pixel}, channel {channel}")]
    NonFinite { pixel: usize, channel: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// 0-based pixel coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PixelIndex {
    pub x: usize,
    pub y: usize,
}

impl PixelIndex {
    pub fn new(x: usize, y: usize) -> Self {
        PixelIndex { x, y }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HighDimImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl HighDimImage {
    /// Builds an image, checking the size and finiteness invariants.
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(ImageError::EmptyImage {
                width,
                height,
                channels,
            });
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(ImageError::DimensionMismatch {
                expected,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(ImageError::NonFinite {
                pixel: pos / channels,
                channel: pos % channels,
            });
        }
        Ok(HighDimImage {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image with every pixel set to `value`.
    pub fn constant(
        width: usize,
        height: usize,
        value: &[f64],
    ) -> Result<Self, ImageError> {
        let data = value
            .iter()
            .copied()
            .cycle()
            .take(width * height * value.len())
            .collect();
        Self::new(width, height, value.len(), data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of pixels `n`.
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Attribute vector of pixel `id`.
    pub fn pixel(&self, id: usize) -> &[f64] {
        &self.data[id * self.channels..(id + 1) * self.channels]
    }

    pub fn pixel_at(&self, p: PixelIndex) -> &[f64] {
        self.pixel(self.id_of(p))
    }

    pub fn id_of(&self, p: PixelIndex) -> usize {
        debug_assert!(self.contains(p));
        p.y * self.width + p.x
    }

    pub fn index_of(&self, id: usize) -> PixelIndex {
        PixelIndex::new(id % self.width, id / self.width)
    }

    pub fn contains(&self, p: PixelIndex) -> bool {
        p.x < self.width && p.y < self.height
    }

    /// Values of channel `c` for all pixels, in pixel order.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    /// Per-channel (min, max) over all pixels.
    pub fn channel_ranges(&self) -> Vec<(f64, f64)> {
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); self.channels];
        for px in self.data.chunks_exact(self.channels) {
            for (r, &v) in ranges.iter_mut().zip(px) {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        ranges
    }

    /// New image holding the listed channels, in the listed order.
    pub fn select_channels(&self, channels: &[usize]) -> Result<Self, ImageError> {
        if let Some(&bad) = channels.iter().find(|&&c| c >= self.channels) {
            return Err(ImageError::InvalidParameter(format!(
                "channel {bad} out of range for {} channels",
                self.channels
            )));
        }
        let mut data = Vec::with_capacity(self.len() * channels.len());
        for px in self.data.chunks_exact(self.channels) {
            data.extend(channels.iter().map(|&c| px[c]));
        }
        Self::new(self.width, self.height, channels.len(), data)
    }

    /// Rectangular crop starting at `origin`.
    pub fn crop(&self, origin: PixelIndex, width: usize, height: usize) -> Result<Self, ImageError> {
        if origin.x + width > self.width || origin.y + height > self.height {
            return Err(ImageError::InvalidParameter(format!(
                "crop {width}x{height} at ({}, {}) exceeds {}x{} image",
                origin.x, origin.y, self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(width * height * self.channels);
        for y in origin.y..origin.y + height {
            let start = (y * self.width + origin.x) * self.channels;
            data.extend_from_slice(&self.data[start..start + width * self.channels]);
        }
        Self::new(width, height, self.channels, data)
    }
}

/// Integer class id per pixel; [`LabelRaster::UNLABELED`] marks background.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelRaster {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl LabelRaster {
    pub const UNLABELED: u32 = 0;

    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage {
                width,
                height,
                channels: 1,
            });
        }
        if labels.len() != width * height {
            return Err(ImageError::DimensionMismatch {
                expected: width * height,
                found: labels.len(),
            });
        }
        Ok(LabelRaster {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn crop(&self, origin: PixelIndex, width: usize, height: usize) -> Result<Self, ImageError> {
        if origin.x + width > self.width || origin.y + height > self.height {
            return Err(ImageError::InvalidParameter("label crop out of range".into()));
        }
        let labels = (origin.y..origin.y + height)
            .flat_map(|y| {
                let start = y * self.width + origin.x;
                self.labels[start..start + width].iter().copied()
            })
            .collect();
        Self::new(width, height, labels)
    }

    /// Pixel count per label id.
    pub fn counts(&self) -> std::collections::BTreeMap<u32, usize> {
        let mut counts = std::collections::BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }
}
