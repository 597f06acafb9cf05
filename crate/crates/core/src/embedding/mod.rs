//! Exact t-SNE over a sparse kNN affinity graph.
//!
//! [`calibrate_sigma`] fits a Gaussian bandwidth per point so the conditional
//! neighbor distribution has the requested perplexity, [`joint_probabilities`]
//! symmetrizes those conditionals into `P`, and [`run_tsne`] optimizes a 2D
//! layout against `P` with the Student-t kernel over all pairs.

mod perplexity;
mod probabilities;
mod tsne;

use std::io::{BufRead, Write};
use std::path::Path;

use thiserror::Error;

pub use perplexity::{calibrate_sigma, Calibration};
pub use probabilities::{conditional_probabilities, joint_probabilities, JointProbabilities};
pub use tsne::{
    exaggeration_at, kl_cost, kl_gradient, run_tsne, run_tsne_with_init, write_cost_trace,
    GradientState, TsneOutput, TsneParams,
};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("invalid t-SNE parameters: {0}")]
    InvalidParams(String),
    #[error("perplexity {perplexity} is unreachable with {k} neighbors")]
    UnreachablePerplexity { perplexity: f64, k: usize },
    #[error("perplexity calibration failed for point {row}: {source}")]
    Calibration {
        row: usize,
        #[source]
        source: Box<EmbeddingError>,
    },
    #[error("invalid distance row: {0}")]
    InvalidDistances(String),
    #[error("gradient became non-finite at iteration {iter}")]
    Diverged { iter: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("malformed embedding file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `n x 2` layout coordinates, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    coords: Vec<f64>,
}

impl Embedding {
    pub fn new(coords: Vec<f64>) -> Result<Self, EmbeddingError> {
        if coords.len() % 2 != 0 {
            return Err(EmbeddingError::ShapeMismatch(format!(
                "{} coordinates is not a multiple of 2",
                coords.len()
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::Malformed("non-finite coordinate".into()));
        }
        Ok(Embedding { coords })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        [self.coords[2 * i], self.coords[2 * i + 1]]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// CSV with an `x,y` header and one row per point.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "x,y")?;
        for p in self.coords.chunks_exact(2) {
            writeln!(out, "{:?},{:?}", p[0], p[1])?;
        }
        out.flush()
    }

    pub fn read_csv(path: &Path) -> Result<Self, EmbeddingError> {
        let file = std::fs::File::open(path)?;
        let mut coords = Vec::new();
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (lineno == 0 && line.starts_with('x')) {
                continue;
            }
            let mut fields = line.split(',');
            for _ in 0..2 {
                let v = fields
                    .next()
                    .ok_or_else(|| EmbeddingError::Malformed(format!("line {}: missing column", lineno + 1)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| EmbeddingError::Malformed(format!("line {}: {e}", lineno + 1)))?;
                coords.push(v);
            }
        }
        Self::new(coords)
    }
}
