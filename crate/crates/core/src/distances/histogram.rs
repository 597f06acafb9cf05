use nalgebra::DMatrix;

use crate::features::HistogramStack;

use super::DistanceError;

/// Bin similarity matrix `a_bk = 1 - |b - k| / B`.
#[derive(Clone, Debug, PartialEq)]
pub struct QfBinSimilarity {
    bins: usize,
    matrix: Vec<f64>,
}

impl QfBinSimilarity {
    /// Builds the matrix and rejects it if any eigenvalue is below `-1e-10`.
    pub fn new(bins: usize) -> Result<Self, DistanceError> {
        if bins == 0 {
            return Err(DistanceError::InvalidParameter("bin count must be positive".into()));
        }
        let b = bins as f64;
        let matrix: Vec<f64> = (0..bins)
            .flat_map(|i| (0..bins).map(move |k| 1.0 - (i as f64 - k as f64).abs() / b))
            .collect();
        let sim = QfBinSimilarity { bins, matrix };
        let min_eig = sim.min_eigenvalue();
        if min_eig < -1e-10 {
            return Err(DistanceError::NotPsd {
                bins,
                eigenvalue: min_eig,
            });
        }
        Ok(sim)
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn get(&self, b: usize, k: usize) -> f64 {
        self.matrix[b * self.bins + k]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = DMatrix::from_row_slice(self.bins, self.bins, &self.matrix);
        m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `(x - y)^T A (x - y)` for one channel's pair of histograms.
    #[inline]
    fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.bins;
        let mut acc = 0.0;
        for (b, (xb, yb)) in x.iter().zip(y).enumerate() {
            let row = &self.matrix[b * n..(b + 1) * n];
            let mut inner = 0.0;
            for ((a, xk), yk) in row.iter().zip(x).zip(y) {
                inner += a * (xk - yk);
            }
            acc += (xb - yb) * inner;
        }
        acc
    }
}

/// Sum over channels of `(h_i - h_j)^T A (h_i - h_j)`.
pub fn qf_distance(
    a: &HistogramStack,
    b: &HistogramStack,
    similarity: &QfBinSimilarity,
) -> Result<f64, DistanceError> {
    if !a.same_bins(b) {
        return Err(DistanceError::ShapeMismatch(format!(
            "histogram stacks {}x{} and {}x{} do not share a bin space",
            a.channels(),
            a.bins(),
            b.channels(),
            b.bins()
        )));
    }
    if a.bins() != similarity.bins() {
        return Err(DistanceError::ShapeMismatch(format!(
            "histograms have {} bins, similarity matrix {}",
            a.bins(),
            similarity.bins()
        )));
    }
    let bins = a.bins();
    let mut total = 0.0;
    for (ra, rb) in a.values().chunks_exact(bins).zip(b.values().chunks_exact(bins)) {
        total += similarity.quadratic_form(ra, rb);
    }
    Ok(total.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equitz_entries() {
        let a = QfBinSimilarity::new(5).unwrap();
        // 1-based (1,1), (1,5), (2,4) in the usual notation.
        assert_eq!(a.get(0, 0), 1.0);
        assert!((a.get(0, 4) - 0.2).abs() < 1e-15);
        assert!((a.get(1, 3) - 0.6).abs() < 1e-15);
        assert_eq!(QfBinSimilarity::new(1).unwrap().matrix(), &[1.0]);
        assert!(QfBinSimilarity::new(0).is_err());
    }

    #[test]
    fn symmetric_unit_diagonal_psd() {
        for b in 1..=64 {
            let a = QfBinSimilarity::new(b).unwrap();
            for i in 0..b {
                assert_eq!(a.get(i, i), 1.0);
                for k in 0..b {
                    assert_eq!(a.get(i, k), a.get(k, i));
                    assert!((0.0..=1.0).contains(&a.get(i, k)));
                }
            }
            assert!(a.min_eigenvalue() >= -1e-10, "B = {b}");
        }
    }
}
