//! Exact k-nearest-neighbor graph under any [`PairDistance`].
//!
//! Every query row is independent: the builder scans all other points, keeps
//! the `k` smallest distances and breaks ties by the smaller point id. The
//! result is identical at any worker count.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::distances::{DistanceError, DistanceKind, FeatureCache, FeatureMode, PairDistance};
use crate::exec::Execution;
use crate::image::HighDimImage;

#[derive(Debug, Error)]
pub enum KnnError {
    #[error("k = {k} out of range for {n} points (need 1 <= k < n)")]
    KOutOfRange { k: usize, n: usize },
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnnGraph {
    n: usize,
    k: usize,
    indices: Vec<usize>,
    distances: Vec<f64>,
}

impl KnnGraph {
    /// Assembles a graph from row-major `n x k` neighbor ids and distances.
    pub fn from_parts(n: usize, k: usize, indices: Vec<usize>, distances: Vec<f64>) -> Self {
        assert_eq!(indices.len(), n * k);
        assert_eq!(distances.len(), n * k);
        KnnGraph {
            n,
            k,
            indices,
            distances,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }

    /// Rows `i, j_1..j_k, d_1..d_k`.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for i in 0..self.n {
            write!(out, "{i}")?;
            for j in self.neighbors(i) {
                write!(out, ",{j}")?;
            }
            for d in self.distances(i) {
                write!(out, ",{d:?}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    }
}

/// `k` smallest `(distance, id)` pairs, sorted ascending with id tie-break.
fn select_k(candidates: &mut Vec<(f64, usize)>, k: usize) {
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, cmp);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(cmp);
}

/// Exact kNN graph over the points of `metric`.
pub fn build_knn_with<D: PairDistance>(
    metric: &D,
    k: usize,
    exec: Execution,
) -> Result<KnnGraph, KnnError> {
    let n = metric.len();
    if k == 0 || k >= n {
        return Err(KnnError::KOutOfRange { k, n });
    }
    let rows = exec.map_init(
        n,
        || (metric.scratch(), Vec::with_capacity(n)),
        |(scratch, candidates), i| -> Result<Vec<(f64, usize)>, DistanceError> {
            candidates.clear();
            for j in (0..n).filter(|&j| j != i) {
                candidates.push((metric.distance_with(scratch, i, j)?, j));
            }
            select_k(candidates, k);
            Ok(candidates.clone())
        },
    );
    let mut indices = Vec::with_capacity(n * k);
    let mut distances = Vec::with_capacity(n * k);
    for row in rows {
        for (d, j) in row? {
            indices.push(j);
            distances.push(d);
        }
    }
    Ok(KnnGraph::from_parts(n, k, indices, distances))
}

/// Exact kNN graph of the image pixels under `kind`.
pub fn build_knn(
    image: &HighDimImage,
    kind: DistanceKind,
    k: usize,
    exec: Execution,
) -> Result<KnnGraph, KnnError> {
    let cache = FeatureCache::build(image, kind, FeatureMode::Precompute, exec)?;
    build_knn_with(&cache, k, exec)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Line(Vec<f64>);

    impl PairDistance for Line {
        type Scratch = ();
        fn len(&self) -> usize {
            self.0.len()
        }
        fn scratch(&self) {}
        fn distance_with(&self, _: &mut (), i: usize, j: usize) -> Result<f64, DistanceError> {
            Ok((self.0[i] - self.0[j]).abs())
        }
    }

    #[test]
    fn two_points() {
        let g = build_knn_with(&Line(vec![0.0, 5.0]), 1, Execution::Sequential).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        assert_eq!(g.distances(0), &[5.0]);
    }

    #[test]
    fn ties_go_to_smaller_id() {
        // Point 2 sits between 1 and 3 at equal distance.
        let g = build_knn_with(&Line(vec![9.0, 1.0, 2.0, 3.0]), 2, Execution::Sequential).unwrap();
        assert_eq!(g.neighbors(2), &[1, 3]);
        assert_eq!(g.neighbors(0), &[3, 2]);
    }

    #[test]
    fn k_range_checked() {
        let line = Line(vec![0.0, 1.0, 2.0]);
        assert!(matches!(
            build_knn_with(&line, 0, Execution::Sequential),
            Err(KnnError::KOutOfRange { .. })
        ));
        assert!(matches!(
            build_knn_with(&line, 3, Execution::Sequential),
            Err(KnnError::KOutOfRange { k: 3, n: 3 })
        ));
    }

    #[test]
    fn csv_dump() {
        let g = build_knn_with(&Line(vec![0.0, 1.0, 3.0]), 1, Execution::Sequential).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        g.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text, "0,1,1.0\n1,0,1.0\n2,1,2.0\n");
    }
}
