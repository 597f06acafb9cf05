use proptest::prelude::*;

use texdr::image::{
    extract_patch,
    gaussian_filter, gaussian_kernel, load_image, load_labels, neighborhood_members,
    normalize_channels, save_image, save_labels, sidecar_path, NormalizeMode,
};
use texdr::{HighDimImage, ImageFormat, LabelRaster, NeighborhoodSpec, PixelIndex};

fn image_strategy() -> impl Strategy<Value = HighDimImage> {
    (1usize..6, 1usize..6, 1usize..5).prop_flat_map(|(w, h, c)| {
        prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, w * h * c)
            .prop_map(move |data| HighDimImage::new(w, h, c, data).unwrap())
    })
}

proptest! {
    #[test]
    fn flat_binary_round_trip_is_bit_exact(image in image_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.bin");
        save_image(&image, &path, ImageFormat::FlatBinary).unwrap();
        prop_assert!(sidecar_path(&path).is_file());
        let back = load_image(&path, ImageFormat::FlatBinary).unwrap();
        prop_assert_eq!(back.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        image.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!((back.width(), back.height(), back.channels()),
                        (image.width(), image.height(), image.channels()));
    }

    #[test]
    fn csv_round_trip(image in image_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.csv");
        save_image(&image, &path, ImageFormat::Csv).unwrap();
        prop_assert_eq!(load_image(&path, ImageFormat::Csv).unwrap(), image);
    }

    #[test]
    fn filter_commutes_with_channel_permutation(image in image_strategy(), ksize in prop::sample::select(vec![1usize, 3, 5])) {
        let order: Vec<usize> = (0..image.channels()).rev().collect();
        let a = gaussian_filter(&image.select_channels(&order).unwrap(), 1.3, ksize).unwrap();
        let b = gaussian_filter(&image, 1.3, ksize).unwrap().select_channels(&order).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn windows_always_have_full_size(w in 1usize..7, h in 1usize..7, eta in 0usize..4, x in 0usize..7, y in 0usize..7) {
        let image = HighDimImage::constant(w, h, &[0.0]).unwrap();
        let center = PixelIndex::new(x % w, y % h);
        for nb in [NeighborhoodSpec::uniform(eta), NeighborhoodSpec::gaussian(eta, None)] {
            let members = neighborhood_members(&image, center, &nb);
            prop_assert_eq!(members.len(), (2 * eta + 1) * (2 * eta + 1));
            let total: f64 = nb.weights().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn labels_round_trip_and_crop() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gt.csv");
    let labels = LabelRaster::new(4, 3, (0..12).map(|v| v % 5).collect()).unwrap();
    save_labels(&labels, &path).unwrap();
    assert_eq!(load_labels(&path).unwrap(), labels);
    let crop = labels.crop(PixelIndex::new(1, 1), 2, 2).unwrap();
    assert_eq!(crop.labels(), &[0, 1, 4, 0]);
    assert!(labels.crop(PixelIndex::new(3, 0), 2, 1).is_err());
}

#[test]
fn ragged_csv_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gt.csv");
    std::fs::write(&path, "1,2,3\n4,5\n").unwrap();
    assert!(load_labels(&path).is_err());
}

#[test]
fn filter_on_constant_image_is_identity() {
    let image = HighDimImage::constant(6, 5, &[0.7, -1.25, 3.0]).unwrap();
    let out = gaussian_filter(&image, 5.0, 3).unwrap();
    for (a, b) in out.data().iter().zip(image.data()) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn filter_spreads_an_impulse_into_the_kernel() {
    let mut data = vec![0.0; 7 * 7];
    data[3 * 7 + 3] = 1.0;
    let image = HighDimImage::new(7, 7, 1, data).unwrap();
    let out = gaussian_filter(&image, 5.0, 3).unwrap();

    // Direct evaluation of exp(-(dx^2 + dy^2) / (2 sigma^2)), normalized.
    let raw: Vec<f64> = (-1i32..=1)
        .flat_map(|dy| (-1i32..=1).map(move |dx| (-f64::from(dx * dx + dy * dy) / 50.0).exp()))
        .collect();
    let total: f64 = raw.iter().sum();
    let kernel = gaussian_kernel(5.0, 3).unwrap();
    for (k, r) in kernel.iter().zip(&raw) {
        assert!((k - r / total).abs() <= 1e-15);
    }
    for dy in 0..3 {
        for dx in 0..3 {
            let v = out.pixel((2 + dy) * 7 + 2 + dx)[0];
            assert!((v - kernel[dy * 3 + dx]).abs() <= 1e-15);
        }
    }
    assert!((out.data().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    assert!(gaussian_filter(&image, 5.0, 4).is_err());
}

#[test]
fn normalization_modes() {
    let image = HighDimImage::new(3, 1, 2, vec![0.0, 4.0, 5.0, 4.0, 10.0, 4.0]).unwrap();
    let mm = normalize_channels(&image, NormalizeMode::MinMax);
    assert_eq!(mm.channel(0), vec![0.0, 0.5, 1.0]);
    assert_eq!(mm.channel(1), vec![0.0, 0.0, 0.0]);

    let z = normalize_channels(&HighDimImage::new(3, 1, 1, vec![1.0, 2.0, 3.0]).unwrap(), NormalizeMode::ZScore);
    let v = z.channel(0);
    let mean = v.iter().sum::<f64>() / 3.0;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
    assert!(mean.abs() <= 1e-12 && (sd - 1.0).abs() <= 1e-12);
}

#[test]
fn corner_patch_repeats_clamped_pixels() {
    let image = HighDimImage::new(3, 3, 1, (0..9).map(f64::from).collect()).unwrap();
    let patch = extract_patch(&image, PixelIndex::new(0, 0), &NeighborhoodSpec::uniform(1));
    assert_eq!(patch.points(), &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 3.0, 3.0, 4.0]);
}
