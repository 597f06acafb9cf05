use crate::features::CovarianceFeature;

use super::{DistanceError, Ridge};

/// Reusable buffers for [`bhattacharyya_with`].
#[derive(Clone, Debug, Default)]
pub struct BhattacharyyaWorkspace {
    matrix: Vec<f64>,
    delta: Vec<f64>,
}

impl BhattacharyyaWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn reset(&mut self, c: usize) {
        if self.delta.len() != c {
            self.matrix.resize(c * c, 0.0);
            self.delta.resize(c, 0.0);
        }
    }
}

/// Positive determinant kept as `mantissa * exp(log_offset)`, so several
/// can be combined before taking a single logarithm.
#[derive(Clone, Copy, Debug)]
struct ScaledDet {
    mantissa: f64,
    log_offset: f64,
}

impl ScaledDet {
    const ONE: ScaledDet = ScaledDet {
        mantissa: 1.0,
        log_offset: 0.0,
    };

    #[inline]
    fn mul(&mut self, v: f64) {
        if (1e-100..=1e100).contains(&v) {
            self.mantissa *= v;
        } else {
            self.log_offset += v.ln();
        }
        if !(1e-150..=1e150).contains(&self.mantissa) {
            self.log_offset += self.mantissa.ln();
            self.mantissa = 1.0;
        }
    }

    #[cfg(test)]
    fn ln(self) -> f64 {
        self.log_offset + self.mantissa.ln()
    }
}

/// In-place Cholesky factorization `A = L L^T` of a symmetric `n x n`
/// matrix; only the lower triangle is read and `L` overwrites it. Returns
/// `det A` when `A` is positive definite.
fn cholesky_det(m: &mut [f64], n: usize) -> Option<ScaledDet> {
    let m = &mut m[..n * n];
    let mut det = ScaledDet::ONE;
    for i in 0..n {
        let (done, rest) = m.split_at_mut(i * n);
        let row_i = &mut rest[..n];
        for (j, row_j) in done.chunks_exact(n).enumerate() {
            let dot: f64 = row_i[..j].iter().zip(&row_j[..j]).map(|(x, y)| x * y).sum();
            row_i[j] = (row_i[j] - dot) / row_j[j];
        }
        let pivot = row_i[i] - row_i[..i].iter().map(|x| x * x).sum::<f64>();
        if !(pivot > 0.0 && pivot.is_finite()) {
            return None;
        }
        det.mul(pivot);
        row_i[i] = pivot.sqrt();
    }
    Some(det)
}

/// `|L^-1 b|^2 = b^T A^-1 b` for the factor from [`cholesky_det`];
/// `b` is overwritten with `L^-1 b`.
fn cholesky_quadratic(l: &[f64], n: usize, b: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for (i, row) in l.chunks_exact(n).enumerate() {
        let (solved, rest) = b.split_at_mut(i);
        let dot: f64 = row[..i].iter().zip(solved.iter()).map(|(x, y)| x * y).sum();
        let y = (rest[0] - dot) / row[i];
        rest[0] = y;
        total += y * y;
    }
    total
}

/// Bhattacharyya distance between two Gaussian neighborhood models.
///
/// `1/8 d^T S^-1 d + 1/2 ln(det S / sqrt(det S_i det S_j))` with
/// `S = (S_i + S_j) / 2` and the same ridge added to all three matrices.
pub fn bhattacharyya_distance(
    a: &CovarianceFeature,
    b: &CovarianceFeature,
    ridge: Ridge,
) -> Result<f64, DistanceError> {
    bhattacharyya_with(&mut BhattacharyyaWorkspace::new(), a, b, ridge)
}

pub fn bhattacharyya_with(
    ws: &mut BhattacharyyaWorkspace,
    a: &CovarianceFeature,
    b: &CovarianceFeature,
    ridge: Ridge,
) -> Result<f64, DistanceError> {
    let c = a.channels();
    if b.channels() != c {
        return Err(DistanceError::ShapeMismatch(format!(
            "covariance features with {c} and {} channels",
            b.channels()
        )));
    }
    ws.reset(c);
    let singular = || DistanceError::Singular { pair: None };

    let (ca, cb) = (a.covariance(), b.covariance());
    for ((m, x), y) in ws.matrix.iter_mut().zip(ca).zip(cb) {
        *m = 0.5 * (x + y);
    }
    let trace: f64 = ws.matrix.iter().step_by(c + 1).sum();
    let eps = ridge.amount(trace, c);
    for v in ws.matrix.iter_mut().step_by(c + 1) {
        *v += eps;
    }
    let det_pooled = cholesky_det(&mut ws.matrix, c).ok_or_else(singular)?;
    for ((d, p), q) in ws.delta.iter_mut().zip(a.mean()).zip(b.mean()) {
        *d = p - q;
    }
    let mahalanobis = cholesky_quadratic(&ws.matrix, c, &mut ws.delta);

    let mut dets = [det_pooled; 2];
    for (slot, cov) in dets.iter_mut().zip([ca, cb]) {
        ws.matrix.copy_from_slice(cov);
        for v in ws.matrix.iter_mut().step_by(c + 1) {
            *v += eps;
        }
        *slot = cholesky_det(&mut ws.matrix, c).ok_or_else(singular)?;
    }

    // ln(det S / sqrt(det S_i det S_j)) with one logarithm.
    let log_ratio = det_pooled.log_offset - 0.5 * (dets[0].log_offset + dets[1].log_offset)
        + (det_pooled.mantissa / (dets[0].mantissa * dets[1].mantissa).sqrt()).ln();
    let d = mahalanobis / 8.0 + 0.5 * log_ratio;
    if !d.is_finite() {
        return Err(singular());
    }
    // Rounding can leave a tiny negative value for near-identical features.
    Ok(if d < 0.0 && d > -1e-12 { 0.0 } else { d })
}
