use proptest::prelude::*;
use texdr::distances::FeatureMode;
use texdr::{
    DistanceKind, Execution, FeatureCache, HighDimImage, NeighborhoodSpec, PairDistance,
};

const TAGS: [&str; 7] = [
    "euclidean-sq",
    "qf-histogram",
    "bhattacharyya",
    "chamfer",
    "hausdorff",
    "hausdorff-median",
    "ssd",
];

fn cache<'a>(image: &'a HighDimImage, tag: &str, nb: NeighborhoodSpec) -> FeatureCache<'a> {
    let kind = DistanceKind::from_tag(tag, nb).unwrap();
    FeatureCache::build(image, kind, FeatureMode::Precompute, Execution::Sequential).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn image_strategy(max_side: usize, max_channels: usize) -> impl Strategy<Value = HighDimImage> {
    (3..=max_side, 3..=max_side, 1..=max_channels).prop_flat_map(|(w, h, c)| {
        prop::collection::vec(-5.0f64..5.0, w * h * c)
            .prop_map(move |data| HighDimImage::new(w, h, c, data).unwrap())
    })
}

fn neighborhood_strategy() -> impl Strategy<Value = NeighborhoodSpec> {
    (0usize..=2, any::<bool>()).prop_map(|(eta, gaussian)| {
        if gaussian && eta > 0 {
            NeighborhoodSpec::gaussian(eta, None)
        } else {
            NeighborhoodSpec::uniform(eta)
        }
    })
}

#[test]
fn single_pixel_windows_reduce_to_the_baseline() {
    let (w, h, c) = (40, 25, 5);
    let data: Vec<f64> = (0..w * h * c)
        .map(|i| ((i as f64 * 0.618_033_988_7).fract() - 0.5) * 3.0)
        .collect();
    let image = HighDimImage::new(w, h, c, data).unwrap();
    let nb = NeighborhoodSpec::uniform(0);
    let base = cache(&image, "euclidean-sq", nb);
    let caches: Vec<_> = ["chamfer", "ssd", "hausdorff", "hausdorff-median"]
        .iter()
        .map(|t| cache(&image, t, nb))
        .collect();
    let pairs = texdr::bench::sample_pairs(image.len(), 1000, 7);
    for (i, j) in pairs {
        let d = base.distance(i, j).unwrap();
        let got: Vec<f64> = caches.iter().map(|c| c.distance(i, j).unwrap()).collect();
        assert!(close(got[0], 2.0 * d, 1e-12), "chamfer {} vs {}", got[0], 2.0 * d);
        assert!(close(got[1], 2.0 * d, 1e-12), "ssd {} vs {}", got[1], 2.0 * d);
        assert!(close(got[2], d, 1e-12), "hausdorff {} vs {d}", got[2]);
        assert!(close(got[3], d, 1e-12), "hausdorff-median {} vs {d}", got[3]);
    }
}

#[test]
fn uniform_gaussian_limit_matches_uniform_weights() {
    // A very wide Gaussian is numerically uniform over a 3x3 window.
    let image = texdr::bench::random_image(9, 7, 3, 11).unwrap();
    for tag in ["chamfer", "bhattacharyya", "qf-histogram"] {
        let u = cache(&image, tag, NeighborhoodSpec::uniform(1));
        let g = cache(&image, tag, NeighborhoodSpec::gaussian(1, Some(1e9)));
        for (i, j) in texdr::bench::sample_pairs(image.len(), 50, 3) {
            let (a, b) = (u.distance(i, j).unwrap(), g.distance(i, j).unwrap());
            assert!(close(a, b, 1e-9), "{tag}: {a} vs {b}");
        }
    }
}

#[test]
fn ssd_averages_all_cross_pairs() {
    use texdr::distances::ssd_distance;
    use texdr::PointCloud;
    let spread = PointCloud::uniform(1, vec![0.0, 2.0]).unwrap();
    assert_eq!(ssd_distance(&spread, &spread).unwrap(), 4.0);
    let flat = PointCloud::uniform(2, vec![1.5, -1.0, 1.5, -1.0, 1.5, -1.0]).unwrap();
    assert_eq!(ssd_distance(&flat, &flat).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn symmetric_nonnegative_and_zero_on_self(
        image in image_strategy(7, 4),
        nb in neighborhood_strategy(),
        seed in any::<u64>(),
    ) {
        for tag in TAGS {
            let c = cache(&image, tag, nb);
            for (i, j) in texdr::bench::sample_pairs(image.len(), 10, seed) {
                let dij = c.distance(i, j).unwrap();
                let dji = c.distance(j, i).unwrap();
                prop_assert!(close(dij, dji, 1e-12), "{tag}: {dij} vs {dji}");
                prop_assert!(dij >= 0.0, "{tag}: negative {dij}");
                if tag != "ssd" {
                    prop_assert!(c.distance(i, i).unwrap().abs() <= 1e-12, "{tag}: self distance");
                }
            }
        }
    }

    #[test]
    fn channel_order_does_not_matter(
        image in image_strategy(6, 4),
        nb in neighborhood_strategy(),
        seed in any::<u64>(),
    ) {
        let c = image.channels();
        let order: Vec<usize> = (0..c).rev().collect();
        let permuted = image.select_channels(&order).unwrap();
        for tag in TAGS {
            let (a, b) = (cache(&image, tag, nb), cache(&permuted, tag, nb));
            for (i, j) in texdr::bench::sample_pairs(image.len(), 8, seed) {
                let (x, y) = (a.distance(i, j).unwrap(), b.distance(i, j).unwrap());
                prop_assert!(close(x, y, 1e-9), "{tag}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn affine_rescaling_behaves_as_expected(
        image in image_strategy(6, 3),
        nb in neighborhood_strategy(),
        scale in prop::sample::select(vec![0.25f64, 0.5, 2.0, 4.0]),
        shift in prop::sample::select(vec![-2.0f64, 0.0, 1.0, 8.0]),
        seed in any::<u64>(),
    ) {
        // Power-of-two scales and small integer shifts keep the comparison
        // clear of rounding noise in the histogram bin assignment.
        let moved = HighDimImage::new(
            image.width(),
            image.height(),
            image.channels(),
            image.data().iter().map(|v| v * scale + shift).collect(),
        )
        .unwrap();
        for tag in TAGS {
            let (a, b) = (cache(&image, tag, nb), cache(&moved, tag, nb));
            // A single-pixel window has zero covariance, where the ridge falls
            // back to an absolute amount.
            if tag == "bhattacharyya" && nb.radius == 0 {
                continue;
            }
            let factor = match tag {
                "qf-histogram" | "bhattacharyya" => 1.0,
                _ => scale * scale,
            };
            for (i, j) in texdr::bench::sample_pairs(image.len(), 8, seed) {
                let (x, y) = (a.distance(i, j).unwrap(), b.distance(i, j).unwrap());
                prop_assert!(close(x * factor, y, 1e-8), "{tag}: {} vs {y}", x * factor);
            }
        }
    }

    #[test]
    fn chamfer_bounds_hausdorff_family(
        image in image_strategy(6, 3),
        nb in neighborhood_strategy(),
        seed in any::<u64>(),
    ) {
        let ch = cache(&image, "chamfer", nb);
        let hd = cache(&image, "hausdorff", nb);
        let hm = cache(&image, "hausdorff-median", nb);
        for (i, j) in texdr::bench::sample_pairs(image.len(), 8, seed) {
            let (c, h, m) = (ch.distance(i, j).unwrap(), hd.distance(i, j).unwrap(), hm.distance(i, j).unwrap());
            // Each directional mean is at most the directional max.
            prop_assert!(c <= 2.0 * h * (1.0 + 1e-12) + 1e-15);
            prop_assert!(m <= h * (1.0 + 1e-12) + 1e-15);
        }
    }
}
