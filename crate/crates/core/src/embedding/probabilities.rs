use std::collections::BTreeMap;

use crate::exec::Execution;
use crate::knn::KnnGraph;

use super::{calibrate_sigma, Calibration, EmbeddingError};

/// Symmetric sparse joint probabilities, stored in both directions (CSR).
#[derive(Clone, Debug, PartialEq)]
pub struct JointProbabilities {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl JointProbabilities {
    /// Builds `P` from unordered pairs `(i, j, p_ij)` with `i != j`; each
    /// pair is stored in both directions. Duplicate pairs are summed.
    pub fn from_pairs(
        n: usize,
        pairs: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, EmbeddingError> {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, p) in pairs {
            if i >= n || j >= n || i == j {
                return Err(EmbeddingError::ShapeMismatch(format!(
                    "invalid pair ({i}, {j}) for {n} points"
                )));
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(EmbeddingError::ShapeMismatch(format!(
                    "probability {p} for pair ({i}, {j})"
                )));
            }
            *map.entry((i.min(j), i.max(j))).or_insert(0.0) += p;
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(i, j), &p) in &map {
            rows[i].push((j, p));
            rows[j].push((i, p));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            for (j, p) in row {
                cols.push(j);
                vals.push(p);
            }
            row_ptr.push(cols.len());
        }
        Ok(JointProbabilities {
            n,
            row_ptr,
            cols,
            vals,
        })
    }

    /// Builds `P` from a dense symmetric matrix, normalizing it to sum to one.
    pub fn from_dense(n: usize, matrix: &[f64]) -> Result<Self, EmbeddingError> {
        if matrix.len() != n * n {
            return Err(EmbeddingError::ShapeMismatch("dense matrix must be n x n".into()));
        }
        let total: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| matrix[i * n + j])
            .sum();
        if total <= 0.0 {
            return Err(EmbeddingError::ShapeMismatch("matrix has no mass".into()));
        }
        let pairs = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter_map(|(i, j)| {
            let v = 0.5 * (matrix[i * n + j] + matrix[j * n + i]);
            (v > 0.0).then_some((i, j, v / total))
        });
        Self::from_pairs(n, pairs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Neighbors and probabilities of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    /// All stored `(i, j, p_ij)`, both directions.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &p)| (i, j, p))
        })
    }

    /// Number of stored directed entries.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `sum_{i != j} p_ij`.
    pub fn total(&self) -> f64 {
        self.vals.iter().sum()
    }

    /// Same matrix with points relabeled: new id of old point `i` is `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let pairs = self
            .entries()
            .filter(|(i, j, _)| i < j)
            .map(|(i, j, p)| (perm[i], perm[j], p));
        Self::from_pairs(self.n, pairs).expect("permutation keeps pairs valid")
    }
}

/// Per-point bandwidth calibration over each kNN row.
///
/// A single-neighbor row puts all its mass on that neighbor.
pub fn conditional_probabilities(
    graph: &KnnGraph,
    perplexity: f64,
    exec: Execution,
) -> Result<Vec<Calibration>, EmbeddingError> {
    exec.try_map(graph.n(), |i| {
        if graph.k() == 1 {
            return Ok(Calibration {
                sigma: 1.0,
                probabilities: vec![1.0],
                perplexity: 1.0,
            });
        }
        calibrate_sigma(graph.distances(i), perplexity).map_err(|e| EmbeddingError::Calibration {
            row: i,
            source: Box::new(e),
        })
    })
}

/// `p_ij = (p_{j|i} + p_{i|j}) / (2n)` over the kNN graph.
pub fn joint_probabilities(
    graph: &KnnGraph,
    perplexity: f64,
    exec: Execution,
) -> Result<JointProbabilities, EmbeddingError> {
    let rows = conditional_probabilities(graph, perplexity, exec)?;
    let n = graph.n();
    // (lo, hi) -> (p_{hi|lo}, p_{lo|hi})
    let mut pairs: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for (i, cal) in rows.iter().enumerate() {
        for (&j, &p) in graph.neighbors(i).iter().zip(&cal.probabilities) {
            let entry = pairs.entry((i.min(j), i.max(j))).or_insert((0.0, 0.0));
            if i < j {
                entry.0 = p;
            } else {
                entry.1 = p;
            }
        }
    }
    let scale = 2.0 * n as f64;
    JointProbabilities::from_pairs(
        n,
        pairs
            .into_iter()
            .map(|((i, j), (a, b))| (i, j, (a + b) / scale))
            .filter(|&(_, _, p)| p > 0.0),
    )
}
