use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::exec::Execution;

use super::{Embedding, EmbeddingError, JointProbabilities};

const INIT_SD: f64 = 1e-4;
const GAIN_STEP: f64 = 0.2;
const GAIN_DECAY: f64 = 0.8;

/// Optimizer settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub exaggeration_factor: f64,
    pub exaggeration_iters: usize,
    pub exaggeration_decay_iters: usize,
    pub learning_rate: f64,
    pub momentum_initial: f64,
    pub momentum_final: f64,
    pub momentum_switch_iter: usize,
    pub seed: u64,
    /// Per-coordinate step gains that grow while the gradient keeps its sign
    /// and shrink when it flips.
    pub adaptive_gains: bool,
    pub min_gain: f64,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            perplexity: 30.0,
            iterations: 1000,
            exaggeration_factor: 4.0,
            exaggeration_iters: 250,
            exaggeration_decay_iters: 40,
            learning_rate: 200.0,
            momentum_initial: 0.5,
            momentum_final: 0.8,
            momentum_switch_iter: 250,
            seed: 0,
            adaptive_gains: true,
            min_gain: 0.01,
        }
    }
}

impl TsneParams {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let bad = |msg: String| Err(EmbeddingError::InvalidParams(msg));
        if !(self.perplexity.is_finite() && self.perplexity >= 2.0) {
            return bad(format!("perplexity must be at least 2, got {}", self.perplexity));
        }
        if self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        if self.iterations < self.exaggeration_iters + self.exaggeration_decay_iters {
            return bad(format!(
                "iterations ({}) must cover exaggeration ({}) plus decay ({})",
                self.iterations, self.exaggeration_iters, self.exaggeration_decay_iters
            ));
        }
        if !(self.exaggeration_factor.is_finite() && self.exaggeration_factor > 0.0) {
            return bad(format!("exaggeration factor must be positive, got {}", self.exaggeration_factor));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        for (name, m) in [("initial", self.momentum_initial), ("final", self.momentum_final)] {
            if !(0.0..1.0).contains(&m) {
                return bad(format!("{name} momentum must lie in [0, 1), got {m}"));
            }
        }
        if !(self.min_gain.is_finite() && self.min_gain > 0.0) {
            return bad(format!("minimum gain must be positive, got {}", self.min_gain));
        }
        Ok(())
    }

    /// Neighbor count used to build the kNN graph, `3 * ceil(perplexity)`.
    pub fn default_k(&self) -> usize {
        3 * self.perplexity.ceil() as usize
    }
}

/// Multiplier applied to `P` at iteration `iter` (0-based).
///
/// Constant for the first `exaggeration_iters` iterations, then decays
/// exponentially to 1 over `exaggeration_decay_iters` iterations.
pub fn exaggeration_at(params: &TsneParams, iter: usize) -> f64 {
    let e = params.exaggeration_iters;
    let d = params.exaggeration_decay_iters;
    if iter < e {
        params.exaggeration_factor
    } else if iter < e + d {
        let frac = (iter - e) as f64 / d as f64;
        params.exaggeration_factor.powf(1.0 - frac)
    } else {
        1.0
    }
}

/// Per-row partial sums of one gradient evaluation.
#[derive(Clone, Copy, Default)]
struct RowSums {
    q_sum: f64,
    rep: [f64; 2],
    attr: [f64; 2],
    p_log_q: f64,
}

/// Buffers and by-products of the most recent gradient evaluation.
#[derive(Clone, Debug)]
pub struct GradientState {
    gradient: Vec<f64>,
    z: f64,
    kl: f64,
    p_log_p: f64,
    p_total: f64,
}

impl GradientState {
    pub fn new(p: &JointProbabilities) -> Self {
        let (p_log_p, p_total) = p
            .entries()
            .filter(|e| e.2 > 0.0)
            .fold((0.0, 0.0), |(a, t), (_, _, v)| (a + v * v.ln(), t + v));
        GradientState {
            gradient: vec![0.0; 2 * p.n()],
            z: 0.0,
            kl: 0.0,
            p_log_p,
            p_total,
        }
    }

    /// Gradient of the (exaggerated) cost, `n x 2` row-major.
    pub fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    /// Normalizer `sum_{i != j} (1 + |y_i - y_j|^2)^-1`.
    pub fn z(&self) -> f64 {
        self.z
    }

    /// KL divergence of the unexaggerated `P` from `Q` at the evaluated layout.
    pub fn kl(&self) -> f64 {
        self.kl
    }

    /// Evaluates the gradient at `coords` with `P` scaled by `exaggeration`.
    pub fn evaluate(
        &mut self,
        p: &JointProbabilities,
        coords: &[f64],
        exaggeration: f64,
        exec: Execution,
    ) -> Result<(), EmbeddingError> {
        let n = p.n();
        if coords.len() != 2 * n || self.gradient.len() != 2 * n {
            return Err(EmbeddingError::ShapeMismatch(format!(
                "{} coordinates for {n} points",
                coords.len()
            )));
        }
        let rows = exec.map(n, |i| {
            let (xi, yi) = (coords[2 * i], coords[2 * i + 1]);
            let mut s = RowSums::default();
            for j in 0..n {
                if j == i {
                    continue;
                }
                let dx = xi - coords[2 * j];
                let dy = yi - coords[2 * j + 1];
                let q = 1.0 / (1.0 + dx * dx + dy * dy);
                s.q_sum += q;
                let q2 = q * q;
                s.rep[0] += q2 * dx;
                s.rep[1] += q2 * dy;
            }
            let (cols, vals) = p.row(i);
            for (&j, &pij) in cols.iter().zip(vals) {
                let dx = xi - coords[2 * j];
                let dy = yi - coords[2 * j + 1];
                let q = 1.0 / (1.0 + dx * dx + dy * dy);
                let w = exaggeration * pij * q;
                s.attr[0] += w * dx;
                s.attr[1] += w * dy;
                if pij > 0.0 {
                    s.p_log_q += pij * q.ln();
                }
            }
            s
        });
        let z: f64 = rows.iter().map(|s| s.q_sum).sum();
        let p_log_q: f64 = rows.iter().map(|s| s.p_log_q).sum();
        for (i, s) in rows.iter().enumerate() {
            for d in 0..2 {
                self.gradient[2 * i + d] = 4.0 * (s.attr[d] - s.rep[d] / z);
            }
        }
        self.z = z;
        self.kl = self.p_log_p - p_log_q + self.p_total * z.ln();
        Ok(())
    }
}

/// Gradient of the KL cost at `coords` and the (unexaggerated) cost itself.
pub fn kl_gradient(
    p: &JointProbabilities,
    coords: &[f64],
    exaggeration: f64,
    exec: Execution,
) -> Result<(Vec<f64>, f64), EmbeddingError> {
    let mut state = GradientState::new(p);
    state.evaluate(p, coords, exaggeration, exec)?;
    Ok((state.gradient, state.kl))
}

/// `sum p_ij ln(p_ij / q_ij)` with `q` the Student-t kernel normalized over
/// all ordered pairs.
pub fn kl_cost(p: &JointProbabilities, embedding: &Embedding) -> Result<f64, EmbeddingError> {
    let n = p.n();
    if embedding.len() != n {
        return Err(EmbeddingError::ShapeMismatch(format!(
            "embedding has {} points, P has {n}",
            embedding.len()
        )));
    }
    let kernel = |i: usize, j: usize| {
        let (a, b) = (embedding.point(i), embedding.point(j));
        let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
        1.0 / (1.0 + dx * dx + dy * dy)
    };
    let mut z = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                z += kernel(i, j);
            }
        }
    }
    Ok(p
        .entries()
        .filter(|e| e.2 > 0.0)
        .map(|(i, j, pij)| pij * (pij / (kernel(i, j) / z)).ln())
        .sum())
}

/// Final layout plus the KL cost recorded at every iteration.
#[derive(Clone, Debug)]
pub struct TsneOutput {
    pub embedding: Embedding,
    /// `(iteration, kl)` evaluated before each update step.
    pub cost_trace: Vec<(usize, f64)>,
}

/// Optimizes a 2D layout from a seeded Gaussian start.
pub fn run_tsne(
    p: &JointProbabilities,
    params: &TsneParams,
    exec: Execution,
) -> Result<TsneOutput, EmbeddingError> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let normal = Normal::new(0.0, INIT_SD).expect("valid sd");
    let init: Vec<f64> = (0..2 * p.n()).map(|_| normal.sample(&mut rng)).collect();
    run_tsne_with_init(p, params, init, exec)
}

/// Optimizes a 2D layout starting from `init` (`n x 2`, row-major).
pub fn run_tsne_with_init(
    p: &JointProbabilities,
    params: &TsneParams,
    init: Vec<f64>,
    exec: Execution,
) -> Result<TsneOutput, EmbeddingError> {
    params.validate()?;
    let n = p.n();
    if init.len() != 2 * n {
        return Err(EmbeddingError::ShapeMismatch(format!(
            "initial layout has {} coordinates for {n} points",
            init.len()
        )));
    }
    let mut y = init;
    let mut update = vec![0.0; 2 * n];
    let mut gains = vec![1.0; 2 * n];
    let mut state = GradientState::new(p);
    let mut cost_trace = Vec::with_capacity(params.iterations);

    for iter in 0..params.iterations {
        state.evaluate(p, &y, exaggeration_at(params, iter), exec)?;
        if state.gradient.iter().any(|g| !g.is_finite()) || !state.kl.is_finite() {
            return Err(EmbeddingError::Diverged { iter });
        }
        cost_trace.push((iter, state.kl));

        let momentum = if iter < params.momentum_switch_iter {
            params.momentum_initial
        } else {
            params.momentum_final
        };
        for ((yv, (u, g)), grad) in y
            .iter_mut()
            .zip(update.iter_mut().zip(gains.iter_mut()))
            .zip(&state.gradient)
        {
            if params.adaptive_gains {
                *g = if (*grad > 0.0) != (*u > 0.0) {
                    *g + GAIN_STEP
                } else {
                    *g * GAIN_DECAY
                };
                *g = g.max(params.min_gain);
            }
            *u = momentum * *u - params.learning_rate * *g * grad;
            *yv += *u;
        }
        recenter(&mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::Diverged { iter });
        }
    }
    Ok(TsneOutput {
        embedding: Embedding::new(y)?,
        cost_trace,
    })
}

fn recenter(y: &mut [f64]) {
    let n = (y.len() / 2).max(1) as f64;
    let mut mean = [0.0; 2];
    for p in y.chunks_exact(2) {
        mean[0] += p[0];
        mean[1] += p[1];
    }
    for p in y.chunks_exact_mut(2) {
        p[0] -= mean[0] / n;
        p[1] -= mean[1] / n;
    }
}

/// CSV with an `iter,kl` header.
pub fn write_cost_trace(trace: &[(usize, f64)], path: &Path) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "iter,kl")?;
    for (iter, kl) in trace {
        writeln!(out, "{iter},{kl:?}")?;
    }
    out.flush()
}
