use super::{BorderPolicy, HighDimImage, ImageError};

/// Normalized `ksize x ksize` Gaussian kernel, row-major.
pub fn gaussian_kernel(sigma: f64, ksize: usize) -> Result<Vec<f64>, ImageError> {
    if ksize % 2 == 0 {
        return Err(ImageError::InvalidParameter(format!(
            "gaussian filter ksize must be odd, got {ksize}"
        )));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(ImageError::InvalidParameter(format!(
            "gaussian filter sigma must be positive, got {sigma}"
        )));
    }
    let r = (ksize / 2) as isize;
    let two_s2 = 2.0 * sigma * sigma;
    let raw: Vec<f64> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (-((dx * dx + dy * dy) as f64) / two_s2).exp()))
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Per-channel 2D Gaussian smoothing with clamp-to-edge borders.
pub fn gaussian_filter(
    image: &HighDimImage,
    sigma: f64,
    ksize: usize,
) -> Result<HighDimImage, ImageError> {
    let kernel = gaussian_kernel(sigma, ksize)?;
    let (w, h, c) = (image.width(), image.height(), image.channels());
    let r = (ksize / 2) as isize;
    let mut out = vec![0.0; image.data().len()];
    for y in 0..h {
        for x in 0..w {
            let dst = &mut out[(y * w + x) * c..(y * w + x + 1) * c];
            let mut k = 0;
            for dy in -r..=r {
                let sy = BorderPolicy::Clamp.resolve(y as isize + dy, h);
                for dx in -r..=r {
                    let sx = BorderPolicy::Clamp.resolve(x as isize + dx, w);
                    let weight = kernel[k];
                    k += 1;
                    for (d, &s) in dst.iter_mut().zip(image.pixel(sy * w + sx)) {
                        *d += weight * s;
                    }
                }
            }
        }
    }
    HighDimImage::new(w, h, c, out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NormalizeMode {
    #[default]
    None,
    MinMax,
    ZScore,
}

/// Per-channel rescaling. Constant channels map to zero in both modes.
pub fn normalize_channels(image: &HighDimImage, mode: NormalizeMode) -> HighDimImage {
    let c = image.channels();
    let n = image.len() as f64;
    let transforms: Vec<(f64, f64)> = match mode {
        NormalizeMode::None => return image.clone(),
        NormalizeMode::MinMax => image
            .channel_ranges()
            .into_iter()
            .map(|(lo, hi)| {
                if hi > lo {
                    (lo, 1.0 / (hi - lo))
                } else {
                    (lo, 0.0)
                }
            })
            .collect(),
        NormalizeMode::ZScore => (0..c)
            .map(|ch| {
                let values = image.channel(ch);
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    (mean, 1.0 / var.sqrt())
                } else {
                    (mean, 0.0)
                }
            })
            .collect(),
    };
    let data = image
        .data()
        .chunks_exact(c)
        .flat_map(|px| {
            px.iter()
                .zip(&transforms)
                .map(|(v, (shift, scale))| (v - shift) * scale)
        })
        .collect();
    HighDimImage::new(image.width(), image.height(), c, data)
        .expect("normalization preserves shape and finiteness")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_ksize_rejected() {
        let img = HighDimImage::constant(4, 4, &[1.0]).unwrap();
        assert!(gaussian_filter(&img, 5.0, 4).is_err());
        assert!(gaussian_filter(&img, 0.0, 3).is_err());
    }

    #[test]
    fn constant_image_unchanged() {
        let img = HighDimImage::constant(7, 5, &[2.5, -3.0, 0.125]).unwrap();
        let out = gaussian_filter(&img, 5.0, 3).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_reproduces_kernel() {
        let mut data = vec![0.0; 9 * 9];
        data[4 * 9 + 4] = 1.0;
        let img = HighDimImage::new(9, 9, 1, data).unwrap();
        let out = gaussian_filter(&img, 5.0, 3).unwrap();
        // Direct evaluation: center weight 1, edge exp(-1/50), corner exp(-2/50).
        let (e, d) = ((-1.0f64 / 50.0).exp(), (-2.0f64 / 50.0).exp());
        let total = 1.0 + 4.0 * e + 4.0 * d;
        let expected = [d, e, d, e, 1.0, e, d, e, d].map(|v| v / total);
        for dy in 0..3 {
            for dx in 0..3 {
                let got = out.pixel((3 + dy) * 9 + 3 + dx)[0];
                assert!((got - expected[dy * 3 + dx]).abs() < 1e-15);
            }
        }
        assert!((out.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(out.pixel(0)[0], 0.0);
    }

    #[test]
    fn normalize_modes() {
        let img = HighDimImage::new(3, 1, 2, vec![0.0, 4.0, 10.0, 4.0, 5.0, 4.0]).unwrap();
        let mm = normalize_channels(&img, NormalizeMode::MinMax);
        assert_eq!(mm.channel(0), vec![0.0, 1.0, 0.5]);
        assert_eq!(mm.channel(1), vec![0.0, 0.0, 0.0]);

        let z = HighDimImage::new(3, 1, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let zs = normalize_channels(&z, NormalizeMode::ZScore).channel(0);
        let mean = zs.iter().sum::<f64>() / 3.0;
        let sd = (zs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!(mean.abs() < 1e-12);
        assert!((sd - 1.0).abs() < 1e-12);
        assert_eq!(normalize_channels(&img, NormalizeMode::None), img);
    }
}
