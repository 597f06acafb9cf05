use super::{HighDimImage, ImageError, PixelIndex};

/// How neighborhood offsets that leave the image are resolved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BorderPolicy {
    /// Repeat the nearest edge pixel.
    #[default]
    Clamp,
    /// Reflect about the edge pixel without repeating it (`-1 -> 1`).
    Mirror,
}

impl BorderPolicy {
    /// Resolves a possibly out-of-range coordinate on an axis of length `len`.
    pub fn resolve(self, coord: isize, len: usize) -> usize {
        let last = len as isize - 1;
        match self {
            BorderPolicy::Clamp => coord.clamp(0, last) as usize,
            BorderPolicy::Mirror => {
                if last == 0 {
                    return 0;
                }
                let period = 2 * last;
                let mut c = coord.rem_euclid(period);
                if c > last {
                    c = period - c;
                }
                c as usize
            }
        }
    }
}

/// Spatial weighting over the neighborhood window.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Weighting {
    #[default]
    Uniform,
    /// Normalized 2D Gaussian of the offset. `None` uses `sigma = radius / 2`.
    Gaussian { sigma: Option<f64> },
}

/// Square `(2η+1)²` window around a pixel with its weights and border policy.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NeighborhoodSpec {
    pub radius: usize,
    pub weighting: Weighting,
    pub border: BorderPolicy,
}

impl NeighborhoodSpec {
    pub fn uniform(radius: usize) -> Self {
        NeighborhoodSpec {
            radius,
            weighting: Weighting::Uniform,
            border: BorderPolicy::Clamp,
        }
    }

    pub fn gaussian(radius: usize, sigma: Option<f64>) -> Self {
        NeighborhoodSpec {
            radius,
            weighting: Weighting::Gaussian { sigma },
            border: BorderPolicy::Clamp,
        }
    }

    pub fn with_border(mut self, border: BorderPolicy) -> Self {
        self.border = border;
        self
    }

    /// Window pixel count `M`.
    pub fn size(&self) -> usize {
        let side = 2 * self.radius + 1;
        side * side
    }

    pub fn validate(&self) -> Result<(), ImageError> {
        if let Weighting::Gaussian { sigma: Some(s) } = self.weighting {
            if !(s.is_finite() && s > 0.0) {
                return Err(ImageError::InvalidParameter(format!(
                    "gaussian weighting sigma must be positive, got {s}"
                )));
            }
        }
        Ok(())
    }

    /// Sigma actually used for Gaussian weighting.
    pub fn effective_sigma(&self) -> Option<f64> {
        match self.weighting {
            Weighting::Uniform => None,
            Weighting::Gaussian { sigma } => Some(sigma.unwrap_or(self.radius as f64 / 2.0)),
        }
    }

    /// Offsets `(dx, dy)` in row-major order: `dy` outer, `dx` inner.
    pub fn offsets(&self) -> impl Iterator<Item = (isize, isize)> {
        let r = self.radius as isize;
        (-r..=r).flat_map(move |dy| (-r..=r).map(move |dx| (dx, dy)))
    }

    /// Weights in offset order; non-negative and summing to one.
    pub fn weights(&self) -> Vec<f64> {
        let m = self.size();
        match self.effective_sigma() {
            Some(sigma) if self.radius > 0 => {
                let two_s2 = 2.0 * sigma * sigma;
                let raw: Vec<f64> = self
                    .offsets()
                    .map(|(dx, dy)| (-((dx * dx + dy * dy) as f64) / two_s2).exp())
                    .collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|w| w / total).collect()
            }
            _ => vec![1.0 / m as f64; m],
        }
    }

    /// Pixel ids of the window around `center`, in offset order.
    pub fn member_ids(&self, image: &HighDimImage, center: PixelIndex) -> Vec<usize> {
        let (w, h) = (image.width(), image.height());
        self.offsets()
            .map(|(dx, dy)| {
                let x = self.border.resolve(center.x as isize + dx, w);
                let y = self.border.resolve(center.y as isize + dy, h);
                y * w + x
            })
            .collect()
    }
}

/// Window members of `center` with their weights; always exactly `M` entries.
pub fn neighborhood_members(
    image: &HighDimImage,
    center: PixelIndex,
    spec: &NeighborhoodSpec,
) -> Vec<(PixelIndex, f64)> {
    assert!(image.contains(center), "center {center:?} outside image");
    spec.member_ids(image, center)
        .into_iter()
        .zip(spec.weights())
        .map(|(id, w)| (image.index_of(id), w))
        .collect()
}

/// Raw attribute vectors of a window (`M` rows of `C` values) plus weights.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    channels: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl PointCloud {
    pub fn new(channels: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self, ImageError> {
        if channels == 0 || points.is_empty() {
            return Err(ImageError::InvalidParameter("empty point cloud".into()));
        }
        if points.len() != channels * weights.len() {
            return Err(ImageError::DimensionMismatch {
                expected: channels * weights.len(),
                found: points.len(),
            });
        }
        Ok(PointCloud {
            channels,
            points,
            weights,
        })
    }

    /// Cloud with uniform weights `1/M`.
    pub fn uniform(channels: usize, points: Vec<f64>) -> Result<Self, ImageError> {
        let m = points.len() / channels.max(1);
        Self::new(channels, points, vec![1.0 / m.max(1) as f64; m])
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of points `M`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, q: usize) -> &[f64] {
        &self.points[q * self.channels..(q + 1) * self.channels]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.channels)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Window around `center` as a point cloud, rows in offset order.
pub fn extract_patch(
    image: &HighDimImage,
    center: PixelIndex,
    spec: &NeighborhoodSpec,
) -> PointCloud {
    assert!(image.contains(center), "center {center:?} outside image");
    let ids = spec.member_ids(image, center);
    let mut points = Vec::with_capacity(ids.len() * image.channels());
    for id in ids {
        points.extend_from_slice(image.pixel(id));
    }
    PointCloud {
        channels: image.channels(),
        points,
        weights: spec.weights(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> HighDimImage {
        HighDimImage::new(w, h, 1, (0..w * h).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn radius_zero_is_the_center() {
        let img = ramp(4, 4);
        let c = PixelIndex::new(2, 1);
        for spec in [NeighborhoodSpec::uniform(0), NeighborhoodSpec::gaussian(0, None)] {
            assert_eq!(neighborhood_members(&img, c, &spec), vec![(c, 1.0)]);
        }
    }

    #[test]
    fn interior_uniform_three_by_three() {
        let img = ramp(5, 5);
        let members = neighborhood_members(&img, PixelIndex::new(2, 2), &NeighborhoodSpec::uniform(1));
        assert_eq!(members.len(), 9);
        assert!(members.iter().all(|&(_, w)| w == 1.0 / 9.0));
        assert_eq!(members[0].0, PixelIndex::new(1, 1));
        assert_eq!(members[8].0, PixelIndex::new(3, 3));
    }

    #[test]
    fn clamp_at_corner_repeats_corner_four_times() {
        let img = ramp(32, 32);
        let members = neighborhood_members(&img, PixelIndex::new(0, 0), &NeighborhoodSpec::uniform(1));
        // Offsets enumerated under clamp: x in {0,0,1}, y in {0,0,1}.
        let expected: Vec<PixelIndex> = [0, 0, 1]
            .iter()
            .flat_map(|&y| [0, 0, 1].iter().map(move |&x| PixelIndex::new(x, y)))
            .collect();
        let got: Vec<PixelIndex> = members.iter().map(|m| m.0).collect();
        assert_eq!(got, expected);
        let corner = got.iter().filter(|&&p| p == PixelIndex::new(0, 0)).count();
        assert_eq!(corner, 4);
    }

    #[test]
    fn mirror_reflects_without_repeating_edge() {
        assert_eq!(BorderPolicy::Mirror.resolve(-1, 5), 1);
        assert_eq!(BorderPolicy::Mirror.resolve(-2, 5), 2);
        assert_eq!(BorderPolicy::Mirror.resolve(5, 5), 3);
        assert_eq!(BorderPolicy::Mirror.resolve(-3, 1), 0);
        assert_eq!(BorderPolicy::Clamp.resolve(7, 5), 4);
    }

    #[test]
    fn gaussian_weights_normalized_and_peaked() {
        for radius in 1..=4 {
            let w = NeighborhoodSpec::gaussian(radius, None).weights();
            assert_eq!(w.len(), (2 * radius + 1).pow(2));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let center = w[w.len() / 2];
            assert!(w.iter().all(|&x| x > 0.0 && x <= center));
        }
    }

    #[test]
    fn patch_rows_follow_members() {
        let img = HighDimImage::new(3, 3, 2, (0..18).map(f64::from).collect()).unwrap();
        let spec = NeighborhoodSpec::uniform(1);
        let c = PixelIndex::new(0, 2);
        let patch = extract_patch(&img, c, &spec);
        let members = neighborhood_members(&img, c, &spec);
        assert_eq!(patch.len(), 9);
        for (q, (p, w)) in members.iter().enumerate() {
            assert_eq!(patch.point(q), img.pixel_at(*p));
            assert_eq!(patch.weights()[q], *w);
        }
    }

    #[test]
    fn constant_image_patch_rows_identical() {
        let img = HighDimImage::constant(6, 6, &[0.3, -1.0]).unwrap();
        let patch = extract_patch(&img, PixelIndex::new(3, 3), &NeighborhoodSpec::uniform(1));
        assert!(patch.rows().all(|r| r == [0.3, -1.0]));
        let single = extract_patch(&img, PixelIndex::new(0, 0), &NeighborhoodSpec::uniform(0));
        assert_eq!(single.points(), img.pixel(0));
    }
}
