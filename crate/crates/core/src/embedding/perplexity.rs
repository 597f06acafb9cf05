use super::EmbeddingError;

/// Result of fitting one point's Gaussian bandwidth.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    /// Bandwidth in the units of the input distances (`exp(-d / (2 sigma^2))`).
    pub sigma: f64,
    /// Conditional neighbor probabilities, same order as the input row.
    pub probabilities: Vec<f64>,
    /// Achieved perplexity `2^H`.
    pub perplexity: f64,
}

const MAX_STEPS: usize = 200;

/// Conditionals `exp(-beta r_j) / Z` and their natural-log entropy.
fn conditionals(r: &[f64], beta: f64, out: &mut [f64]) -> f64 {
    let mut z = 0.0;
    for (o, &rj) in out.iter_mut().zip(r) {
        *o = if rj.is_finite() { (-beta * rj).exp() } else { 0.0 };
        z += *o;
    }
    let mut weighted = 0.0;
    for (o, &rj) in out.iter_mut().zip(r) {
        *o /= z;
        if *o > 0.0 {
            weighted += *o * rj;
        }
    }
    z.ln() + beta * weighted
}

/// Binary search for the bandwidth whose conditional distribution over the
/// row has perplexity `perplexity`.
///
/// Distances are shifted by their minimum and divided by their range before
/// the search, so the result does not depend on the distance scale. Rows
/// whose finite distances are all equal get uniform conditionals and
/// `sigma = 1`. When ties at the minimum distance already exceed the target
/// perplexity, the limit `sigma -> 0` (uniform over the ties) is returned.
pub fn calibrate_sigma(distances: &[f64], perplexity: f64) -> Result<Calibration, EmbeddingError> {
    let k = distances.len();
    if k < 2 {
        return Err(EmbeddingError::InvalidDistances(format!(
            "need at least 2 neighbors, got {k}"
        )));
    }
    if distances.iter().any(|d| d.is_nan() || *d < 0.0) {
        return Err(EmbeddingError::InvalidDistances(
            "distances must be non-negative".into(),
        ));
    }
    let finite: Vec<f64> = distances.iter().copied().filter(|d| d.is_finite()).collect();
    if finite.is_empty() {
        return Err(EmbeddingError::InvalidDistances("all distances are infinite".into()));
    }
    if !(perplexity.is_finite() && perplexity > 1.0 && perplexity < finite.len() as f64) {
        return Err(EmbeddingError::UnreachablePerplexity {
            perplexity,
            k: finite.len(),
        });
    }

    let lo_d = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_d = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi_d - lo_d;
    let mut probabilities = vec![0.0; k];
    if range == 0.0 {
        let u = 1.0 / finite.len() as f64;
        for (p, d) in probabilities.iter_mut().zip(distances) {
            *p = if d.is_finite() { u } else { 0.0 };
        }
        return Ok(Calibration {
            sigma: 1.0,
            probabilities,
            perplexity: finite.len() as f64,
        });
    }

    let r: Vec<f64> = distances.iter().map(|d| (d - lo_d) / range).collect();
    let target = perplexity.ln();
    let ties = r.iter().filter(|&&v| v == 0.0).count();
    if (ties as f64).ln() >= target {
        let u = 1.0 / ties as f64;
        for (p, &rj) in probabilities.iter_mut().zip(&r) {
            *p = if rj == 0.0 { u } else { 0.0 };
        }
        return Ok(Calibration {
            sigma: 0.0,
            probabilities,
            perplexity: ties as f64,
        });
    }

    // Entropy decreases monotonically in beta; bracket, then bisect.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut steps = 0;
    while conditionals(&r, hi, &mut probabilities) > target && steps < MAX_STEPS {
        lo = hi;
        hi *= 2.0;
        steps += 1;
    }
    let mut beta = hi;
    let mut entropy = conditionals(&r, beta, &mut probabilities);
    while steps < MAX_STEPS {
        beta = 0.5 * (lo + hi);
        entropy = conditionals(&r, beta, &mut probabilities);
        if (entropy - target).abs() < 1e-13 || hi - lo <= f64::EPSILON * hi {
            break;
        }
        if entropy > target {
            lo = beta;
        } else {
            hi = beta;
        }
        steps += 1;
    }
    let achieved = entropy.exp();
    if (achieved - perplexity).abs() > 1e-4 {
        return Err(EmbeddingError::UnreachablePerplexity { perplexity, k });
    }
    Ok(Calibration {
        sigma: (range / (2.0 * beta)).sqrt(),
        probabilities,
        perplexity: achieved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perplexity_of(p: &[f64]) -> f64 {
        let h: f64 = p.iter().filter(|&&v| v > 0.0).map(|v| -v * v.log2()).sum();
        2f64.powf(h)
    }

    #[test]
    fn equal_distances_are_uniform() {
        let c = calibrate_sigma(&[3.0; 6], 5.5).unwrap();
        assert!(c.probabilities.iter().all(|&p| (p - 1.0 / 6.0).abs() < 1e-15));
        assert_eq!(c.sigma, 1.0);
        let z = calibrate_sigma(&[0.0; 4], 2.0).unwrap();
        assert_eq!(z.probabilities, vec![0.25; 4]);
    }

    #[test]
    fn unreachable_perplexity() {
        assert!(matches!(
            calibrate_sigma(&[0.0, 1.0, 2.0], 3.0),
            Err(EmbeddingError::UnreachablePerplexity { .. })
        ));
        assert!(calibrate_sigma(&[1.0], 0.5).is_err());
        assert!(calibrate_sigma(&[1.0, -1.0], 1.5).is_err());
    }

    #[test]
    fn two_neighbors_unique_sigma() {
        let d = [0.0, 2.0];
        let c = calibrate_sigma(&d, 1.5).unwrap();
        assert!((perplexity_of(&c.probabilities) - 1.5).abs() < 1e-10);
        // Dense sigma sweep: perplexity increases monotonically from ~1 to ~2
        // and crosses 1.5 exactly once, next to the calibrated sigma.
        let perp = |s: f64| {
            let w1 = (-2.0 / (2.0 * s * s)).exp();
            perplexity_of(&[1.0 / (1.0 + w1), w1 / (1.0 + w1)])
        };
        let sigmas: Vec<f64> = (1..4000).map(|i| i as f64 * 1e-3).collect();
        let values: Vec<f64> = sigmas.iter().map(|&s| perp(s)).collect();
        assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        assert!(values[0] < 1.0001 && *values.last().unwrap() > 1.9);
        let crossings: Vec<usize> = (1..values.len())
            .filter(|&i| (values[i - 1] - 1.5) * (values[i] - 1.5) <= 0.0)
            .collect();
        assert_eq!(crossings.len(), 1);
        assert!((sigmas[crossings[0]] - c.sigma).abs() < 2e-3);
    }

    #[test]
    fn matches_target_on_random_rows() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let row: Vec<f64> = (0..60).map(|_| next() * 10.0).collect();
            let c = calibrate_sigma(&row, 20.0).unwrap();
            assert!((perplexity_of(&c.probabilities) - 20.0).abs() < 1e-4);
            assert!((c.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scale_invariant_conditionals() {
        let row = [0.3, 0.9, 1.7, 2.0, 2.2, 4.5, 5.0];
        let a = calibrate_sigma(&row, 3.0).unwrap();
        let scaled: Vec<f64> = row.iter().map(|d| d * 37.5).collect();
        let b = calibrate_sigma(&scaled, 3.0).unwrap();
        for (p, q) in a.probabilities.iter().zip(&b.probabilities) {
            assert!((p - q).abs() < 1e-8);
        }
        assert!((b.sigma / a.sigma - 37.5f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn ties_beyond_target_take_the_limit() {
        let c = calibrate_sigma(&[0.0, 0.0, 0.0, 1.0], 2.0).unwrap();
        assert_eq!(c.probabilities, vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]);
    }
}
