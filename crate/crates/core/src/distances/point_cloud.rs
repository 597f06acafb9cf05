//! Point-cloud distances over raw neighborhood attribute vectors.
//!
//! All four kinds start from the directional minima: for every point of one
//! cloud, the squared Euclidean distance to its closest point in the other.
//! Weighted variants scale each minimum by the relative weight `M * w_q` of
//! its point, so uniform weights (`w = 1/M`) reproduce the unweighted forms.

use crate::image::PointCloud;

use super::{sq_dist, DistanceError};

/// Borrowed point cloud: `M` rows of `channels` values plus `M` weights.
#[derive(Clone, Copy, Debug)]
pub struct CloudView<'a> {
    pub channels: usize,
    pub points: &'a [f64],
    pub weights: &'a [f64],
}

impl<'a> CloudView<'a> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn point(&self, q: usize) -> &'a [f64] {
        &self.points[q * self.channels..(q + 1) * self.channels]
    }
}

impl<'a> From<&'a PointCloud> for CloudView<'a> {
    fn from(c: &'a PointCloud) -> Self {
        CloudView {
            channels: c.channels(),
            points: c.points(),
            weights: c.weights(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointCloudDistance {
    Chamfer,
    Hausdorff,
    HausdorffMedian,
    Ssd,
}

fn check(a: &CloudView, b: &CloudView) -> Result<(), DistanceError> {
    if a.channels != b.channels {
        return Err(DistanceError::LengthMismatch(a.channels, b.channels));
    }
    if a.len() != b.len() || a.is_empty() {
        return Err(DistanceError::ShapeMismatch(format!(
            "point clouds with {} and {} points",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Fills `row_min[q] = min_p |a_q - b_p|^2` and `col_min[p] = min_q |a_q - b_p|^2`.
fn directional_minima(a: &CloudView, b: &CloudView, row_min: &mut Vec<f64>, col_min: &mut Vec<f64>) {
    row_min.clear();
    row_min.resize(a.len(), f64::INFINITY);
    col_min.clear();
    col_min.resize(b.len(), f64::INFINITY);
    for (q, rm) in row_min.iter_mut().enumerate() {
        let pa = a.point(q);
        for (p, cm) in col_min.iter_mut().enumerate() {
            let d = sq_dist(pa, b.point(p));
            *rm = rm.min(d);
            *cm = cm.min(d);
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

impl PointCloudDistance {
    /// Evaluates the distance reusing `row_min` / `col_min` as scratch.
    pub fn eval_with(
        self,
        a: CloudView,
        b: CloudView,
        row_min: &mut Vec<f64>,
        col_min: &mut Vec<f64>,
    ) -> Result<f64, DistanceError> {
        check(&a, &b)?;
        if self == PointCloudDistance::Ssd {
            return Ok(ssd(&a, &b));
        }
        directional_minima(&a, &b, row_min, col_min);
        let (ma, mb) = (a.len() as f64, b.len() as f64);
        Ok(match self {
            PointCloudDistance::Chamfer => {
                let fwd: f64 = row_min.iter().zip(a.weights).map(|(m, w)| w * m).sum();
                let bwd: f64 = col_min.iter().zip(b.weights).map(|(m, w)| w * m).sum();
                fwd + bwd
            }
            PointCloudDistance::Hausdorff => {
                let fwd = row_min
                    .iter()
                    .zip(a.weights)
                    .map(|(m, w)| ma * w * m)
                    .fold(0.0, f64::max);
                let bwd = col_min
                    .iter()
                    .zip(b.weights)
                    .map(|(m, w)| mb * w * m)
                    .fold(0.0, f64::max);
                fwd.max(bwd)
            }
            PointCloudDistance::HausdorffMedian => {
                for (m, w) in row_min.iter_mut().zip(a.weights) {
                    *m *= ma * w;
                }
                for (m, w) in col_min.iter_mut().zip(b.weights) {
                    *m *= mb * w;
                }
                0.5 * (median(row_min) + median(col_min))
            }
            PointCloudDistance::Ssd => unreachable!(),
        })
    }

    pub fn eval(self, a: CloudView, b: CloudView) -> Result<f64, DistanceError> {
        self.eval_with(a, b, &mut Vec::new(), &mut Vec::new())
    }
}

/// `2 / (M_i M_j) * sum_qp (M_i w_q + M_j w_p) / 2 * |g_q - g_p|^2`.
fn ssd(a: &CloudView, b: &CloudView) -> f64 {
    let (ma, mb) = (a.len() as f64, b.len() as f64);
    let mut total = 0.0;
    for q in 0..a.len() {
        let pa = a.point(q);
        let wq = ma * a.weights[q];
        for p in 0..b.len() {
            let wp = mb * b.weights[p];
            total += 0.5 * (wq + wp) * sq_dist(pa, b.point(p));
        }
    }
    2.0 * total / (ma * mb)
}

/// Weighted average of nearest-point squared distances, summed over both directions.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<f64, DistanceError> {
    PointCloudDistance::Chamfer.eval(a.into(), b.into())
}

/// Largest (weighted) nearest-point squared distance over both directions.
pub fn hausdorff_distance(a: &PointCloud, b: &PointCloud) -> Result<f64, DistanceError> {
    PointCloudDistance::Hausdorff.eval(a.into(), b.into())
}

/// Mean of the two directional medians of (weighted) nearest-point distances.
pub fn hausdorff_median_distance(a: &PointCloud, b: &PointCloud) -> Result<f64, DistanceError> {
    PointCloudDistance::HausdorffMedian.eval(a.into(), b.into())
}

/// Average of all cross-cloud squared distances, counted in both directions.
pub fn ssd_distance(a: &PointCloud, b: &PointCloud) -> Result<f64, DistanceError> {
    PointCloudDistance::Ssd.eval(a.into(), b.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(values: &[f64]) -> PointCloud {
        PointCloud::uniform(1, values.to_vec()).unwrap()
    }

    #[test]
    fn chamfer_examples() {
        let a = cloud(&[0.0, 0.0]);
        let b = cloud(&[0.0, 1.0]);
        assert!((chamfer_distance(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(chamfer_distance(&b, &b).unwrap(), 0.0);
        let p = PointCloud::uniform(2, vec![1.0, 2.0]).unwrap();
        let q = PointCloud::uniform(2, vec![4.0, -2.0]).unwrap();
        assert_eq!(chamfer_distance(&p, &q).unwrap(), 50.0);
    }

    #[test]
    fn hausdorff_examples() {
        let a = cloud(&[0.0, 0.0]);
        let b = cloud(&[0.0, 10.0]);
        assert_eq!(hausdorff_distance(&a, &b).unwrap(), 100.0);
        assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        let p = PointCloud::uniform(2, vec![1.0, 2.0]).unwrap();
        let q = PointCloud::uniform(2, vec![4.0, -2.0]).unwrap();
        assert_eq!(hausdorff_distance(&p, &q).unwrap(), 25.0);
    }

    #[test]
    fn median_examples() {
        // Direction minima {0, 0, 0, 100} both ways.
        let a = cloud(&[0.0, 0.0, 0.0, 10.0]);
        let b = cloud(&[0.0, 0.0, 0.0, -10.0]);
        assert_eq!(hausdorff_median_distance(&a, &b).unwrap(), 0.0);
        let mut v = [3.0, 1.0, 4.0, 2.0];
        assert_eq!(median(&mut v), 2.5);
        let mut v = [3.0, 1.0, 2.0];
        assert_eq!(median(&mut v), 2.0);
    }

    #[test]
    fn ssd_examples() {
        let a = cloud(&[0.0, 2.0]);
        assert_eq!(ssd_distance(&a, &a).unwrap(), 4.0);
        let c = cloud(&[0.7, 0.7, 0.7]);
        assert_eq!(ssd_distance(&c, &c).unwrap(), 0.0);
        let p = PointCloud::uniform(2, vec![1.0, 2.0]).unwrap();
        let q = PointCloud::uniform(2, vec![4.0, -2.0]).unwrap();
        assert_eq!(ssd_distance(&p, &q).unwrap(), 50.0);
    }

    #[test]
    fn weighted_forms() {
        // Weights (0.75, 0.25) over two points; relative weights (1.5, 0.5).
        let a = PointCloud::new(1, vec![0.0, 3.0], vec![0.75, 0.25]).unwrap();
        let b = PointCloud::new(1, vec![1.0, 3.0], vec![0.75, 0.25]).unwrap();
        // Minima a->b: {1, 0}; b->a: {1, 0}.
        assert!((chamfer_distance(&a, &b).unwrap() - 1.5).abs() < 1e-15);
        assert!((hausdorff_distance(&a, &b).unwrap() - 1.5).abs() < 1e-15);
        assert!((hausdorff_median_distance(&a, &b).unwrap() - 0.75).abs() < 1e-15);
        // Pair terms: (0,1):1 w=1.5, (0,3):9 w=1.0, (3,1):4 w=1.0, (3,3):0.
        let expected = 2.0 / 4.0 * (1.5 * 1.0 + 1.0 * 9.0 + 1.0 * 4.0);
        assert!((ssd_distance(&a, &b).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn size_mismatch() {
        let a = cloud(&[0.0, 1.0]);
        let b = cloud(&[0.0, 1.0, 2.0]);
        for k in [
            PointCloudDistance::Chamfer,
            PointCloudDistance::Hausdorff,
            PointCloudDistance::HausdorffMedian,
            PointCloudDistance::Ssd,
        ] {
            assert!(k.eval((&a).into(), (&b).into()).is_err());
        }
        let c2 = PointCloud::uniform(2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            chamfer_distance(&a, &c2),
            Err(DistanceError::LengthMismatch(1, 2))
        ));
    }
}
