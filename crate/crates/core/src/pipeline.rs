//! End-to-end runs described by a config file.
//!
//! A config is a TOML document with the sections `[input]`, `[preprocess]`,
//! `[distance]`, `[tsne]`, `[evaluation]` and `[outputs]`. Relative paths are
//! resolved against the directory containing the config. See the repository
//! README for the full key reference.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distances::{DistanceError, DistanceKind, Ridge};
use crate::embedding::{joint_probabilities, run_tsne, write_cost_trace, EmbeddingError, TsneParams};
use crate::evaluation::{
    generate_synthetic, neighbor_hit, recolor, EvaluationError, NeighborHitCurve, SyntheticSpec,
    DEFAULT_CORNERS,
};
use crate::exec::Execution;
use crate::image::{
    gaussian_filter, load_image, load_labels, normalize_channels, BorderPolicy, HighDimImage,
    ImageError, ImageFormat, LabelRaster, NeighborhoodSpec, NormalizeMode, PixelIndex, Weighting,
};
use crate::knn::{build_knn, KnnError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{stage}: {message}")]
    Data { stage: &'static str, message: String },
    #[error("{stage}: {message}")]
    Numerical { stage: &'static str, message: String },
}

impl PipelineError {
    /// Process exit status: 2 config, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data { .. } => 3,
            PipelineError::Numerical { .. } => 4,
        }
    }

    fn data(stage: &'static str, e: impl std::fmt::Display) -> Self {
        PipelineError::Data {
            stage,
            message: e.to_string(),
        }
    }

    fn numerical(stage: &'static str, e: impl std::fmt::Display) -> Self {
        PipelineError::Numerical {
            stage,
            message: e.to_string(),
        }
    }

    fn from_image(stage: &'static str, e: ImageError) -> Self {
        match e {
            ImageError::InvalidParameter(m) => PipelineError::Config(format!("{stage}: {m}")),
            other => Self::data(stage, other),
        }
    }

    fn from_distance(stage: &'static str, e: DistanceError) -> Self {
        match e {
            DistanceError::Singular { .. } | DistanceError::NotPsd { .. } => Self::numerical(stage, e),
            DistanceError::InvalidParameter(m) => PipelineError::Config(format!("{stage}: {m}")),
            other => Self::data(stage, other),
        }
    }

    fn from_knn(e: KnnError) -> Self {
        match e {
            KnnError::Distance(d) => Self::from_distance("knn", d),
            KnnError::KOutOfRange { .. } => PipelineError::Config(format!("knn: {e}")),
            other => Self::data("knn", other),
        }
    }

    fn from_embedding(stage: &'static str, e: EmbeddingError) -> Self {
        match e {
            EmbeddingError::InvalidParams(m) => PipelineError::Config(format!("{stage}: {m}")),
            EmbeddingError::Io(_) | EmbeddingError::Malformed(_) | EmbeddingError::ShapeMismatch(_) => {
                Self::data(stage, e)
            }
            other => Self::numerical(stage, other),
        }
    }

    fn from_evaluation(stage: &'static str, e: EvaluationError) -> Self {
        match e {
            EvaluationError::InvalidSpec(m) => PipelineError::Config(format!("{stage}: {m}")),
            EvaluationError::InvalidK { .. } => PipelineError::Config(format!("{stage}: {e}")),
            other => Self::data(stage, other),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CropConfig {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// Image file; mutually exclusive with `synthetic`.
    pub path: Option<PathBuf>,
    /// Defaults to the format implied by the file extension.
    pub format: Option<ImageFormat>,
    pub synthetic: Option<SyntheticSpec>,
    pub crop: Option<CropConfig>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizeSetting {
    #[default]
    None,
    MinMax,
    ZScore,
}

impl From<NormalizeSetting> for NormalizeMode {
    fn from(s: NormalizeSetting) -> Self {
        match s {
            NormalizeSetting::None => NormalizeMode::None,
            NormalizeSetting::MinMax => NormalizeMode::MinMax,
            NormalizeSetting::ZScore => NormalizeMode::ZScore,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub sigma: f64,
    pub ksize: usize,
}

/// Channel normalization runs first, then the optional Gaussian filter.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub normalize: NormalizeSetting,
    pub gaussian_filter: Option<FilterConfig>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingSetting {
    #[default]
    Uniform,
    Gaussian,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BorderSetting {
    #[default]
    Clamp,
    Mirror,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RidgeMode {
    #[default]
    Relative,
    Absolute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceConfig {
    pub kind: String,
    pub eta: usize,
    pub weighting: WeightingSetting,
    /// Gaussian weighting sigma; defaults to `eta / 2`.
    pub sigma: Option<f64>,
    pub border: BorderSetting,
    /// Histogram bins; defaults to the Rice rule for the window size.
    pub bins: Option<usize>,
    pub ridge: f64,
    pub ridge_mode: RidgeMode,
    /// kNN size; defaults to `3 * ceil(perplexity)`.
    pub k: Option<usize>,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig {
            kind: "euclidean-sq".into(),
            eta: 1,
            weighting: WeightingSetting::Uniform,
            sigma: None,
            border: BorderSetting::Clamp,
            bins: None,
            ridge: 1e-6,
            ridge_mode: RidgeMode::Relative,
            k: None,
        }
    }
}

impl DistanceConfig {
    pub fn neighborhood(&self) -> NeighborhoodSpec {
        NeighborhoodSpec {
            radius: self.eta,
            weighting: match self.weighting {
                WeightingSetting::Uniform => Weighting::Uniform,
                WeightingSetting::Gaussian => Weighting::Gaussian { sigma: self.sigma },
            },
            border: match self.border {
                BorderSetting::Clamp => BorderPolicy::Clamp,
                BorderSetting::Mirror => BorderPolicy::Mirror,
            },
        }
    }

    pub fn to_kind(&self) -> Result<DistanceKind, PipelineError> {
        let mut kind = DistanceKind::from_tag(&self.kind, self.neighborhood())
            .map_err(|e| PipelineError::Config(format!("distance: {e}")))?;
        match &mut kind {
            DistanceKind::QfHistogram { bins, .. } => *bins = self.bins,
            DistanceKind::Bhattacharyya { ridge, .. } => {
                *ridge = match self.ridge_mode {
                    RidgeMode::Relative => Ridge::Relative(self.ridge),
                    RidgeMode::Absolute => Ridge::Absolute(self.ridge),
                }
            }
            _ => {}
        }
        kind.validate()
            .map_err(|e| PipelineError::Config(format!("distance: {e}")))?;
        Ok(kind)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Label CSV; synthetic inputs use their generated ground truth when unset.
    pub labels: Option<PathBuf>,
    pub k_max: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            labels: None,
            k_max: 63,
        }
    }
}

/// Artifact file names inside `dir`. An empty name skips that artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub embedding: String,
    pub recolor_png: String,
    pub recolor_ppm: String,
    pub neighbor_hit: String,
    pub cost_trace: String,
    pub knn: String,
    /// Colormap corners at normalized (0,0), (1,0), (0,1), (1,1).
    pub corners: [[u8; 3]; 4],
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            embedding: "embedding.csv".into(),
            recolor_png: "recolor.png".into(),
            recolor_ppm: "recolor.ppm".into(),
            neighbor_hit: "neighbor_hit.csv".into(),
            cost_trace: "cost_trace.csv".into(),
            knn: String::new(),
            corners: DEFAULT_CORNERS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub distance: DistanceConfig,
    #[serde(default)]
    pub tsne: TsneParams,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Reads a config and resolves its relative paths against its directory.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.input.path.as_mut() {
            join(p);
        }
        if let Some(p) = self.evaluation.labels.as_mut() {
            join(p);
        }
        join(&mut self.outputs.dir);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// kNN size actually used.
    pub fn k(&self) -> usize {
        self.distance.k.unwrap_or_else(|| self.tsne.default_k())
    }

    /// Checks everything that can be checked without loading pixel data.
    pub fn validate(&self) -> Result<(), PipelineError> {
        match (&self.input.path, &self.input.synthetic) {
            (Some(_), Some(_)) => {
                return Err(PipelineError::Config(
                    "input: set either `path` or `synthetic`, not both".into(),
                ))
            }
            (None, None) => {
                return Err(PipelineError::Config("input: set `path` or `synthetic`".into()))
            }
            (Some(p), None) if !p.is_file() => {
                return Err(PipelineError::data(
                    "input",
                    format!("image file {} does not exist", p.display()),
                ))
            }
            (None, Some(spec)) => spec
                .validate()
                .map_err(|e| PipelineError::Config(format!("input: {e}")))?,
            _ => {}
        }
        if let Some(labels) = &self.evaluation.labels {
            if !labels.is_file() {
                return Err(PipelineError::data(
                    "evaluation",
                    format!("label file {} does not exist", labels.display()),
                ));
            }
        }
        if let Some(f) = &self.preprocess.gaussian_filter {
            crate::image::gaussian_kernel(f.sigma, f.ksize)
                .map_err(|e| PipelineError::Config(format!("preprocess: {e}")))?;
        }
        self.distance.to_kind()?;
        self.tsne
            .validate()
            .map_err(|e| PipelineError::Config(format!("tsne: {e}")))?;
        if self.k() < 2 {
            return Err(PipelineError::Config(format!("distance: k must be at least 2, got {}", self.k())));
        }
        if self.tsne.perplexity >= self.k() as f64 {
            return Err(PipelineError::Config(format!(
                "perplexity {} is unreachable with k = {}",
                self.tsne.perplexity,
                self.k()
            )));
        }
        if let Some(spec) = &self.input.synthetic {
            let n = spec.side * spec.side;
            if self.k() >= n {
                return Err(PipelineError::Config(format!(
                    "k = {} must be smaller than the {n} pixels",
                    self.k()
                )));
            }
        }
        if self.evaluation.k_max == 0 {
            return Err(PipelineError::Config("evaluation: k_max must be positive".into()));
        }
        if self.outputs.embedding.is_empty() {
            return Err(PipelineError::Config("outputs: embedding file name is required".into()));
        }
        Ok(())
    }
}

/// Summary of a completed run.
#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub pixels: usize,
    pub k: usize,
    pub final_kl: f64,
    pub neighbor_hit: Option<NeighborHitCurve>,
    pub artifacts: Vec<PathBuf>,
    pub stage_seconds: Vec<(&'static str, f64)>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    threads: usize,
    k: usize,
    pixels: usize,
    distance: String,
    artifacts: Vec<String>,
    config: &'a PipelineConfig,
}

struct Artifacts {
    written: Vec<PathBuf>,
    keep: bool,
}

impl Drop for Artifacts {
    fn drop(&mut self) {
        if !self.keep {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

fn load_input(config: &PipelineConfig) -> Result<(HighDimImage, Option<LabelRaster>), PipelineError> {
    let (mut image, mut labels) = match (&config.input.path, &config.input.synthetic) {
        (Some(path), None) => {
            let format = config.input.format.unwrap_or_else(|| ImageFormat::from_path(path));
            (load_image(path, format).map_err(|e| PipelineError::from_image("load", e))?, None)
        }
        (None, Some(spec)) => {
            let (img, lab) = generate_synthetic(spec).map_err(|e| PipelineError::from_evaluation("synth", e))?;
            (img, Some(lab))
        }
        _ => return Err(PipelineError::Config("input: set exactly one of `path` or `synthetic`".into())),
    };
    if let Some(path) = &config.evaluation.labels {
        labels = Some(load_labels(path).map_err(|e| PipelineError::from_image("labels", e))?);
    }
    if let Some(crop) = &config.input.crop {
        let origin = PixelIndex::new(crop.x, crop.y);
        image = image
            .crop(origin, crop.width, crop.height)
            .map_err(|e| PipelineError::Config(format!("input.crop: {e}")))?;
        if let Some(l) = labels.as_mut() {
            *l = l
                .crop(origin, crop.width, crop.height)
                .map_err(|e| PipelineError::Config(format!("input.crop: {e}")))?;
        }
    }
    if let Some(l) = &labels {
        if (l.width(), l.height()) != (image.width(), image.height()) {
            return Err(PipelineError::data(
                "labels",
                format!(
                    "label raster is {}x{}, image is {}x{}",
                    l.width(),
                    l.height(),
                    image.width(),
                    image.height()
                ),
            ));
        }
    }
    Ok((image, labels))
}

/// Runs every stage of `config`, writing artifacts and a `manifest.json`
/// into the output directory. On failure, files written so far are removed.
pub fn run_pipeline(config: &PipelineConfig, exec: Execution) -> Result<PipelineReport, PipelineError> {
    config.validate()?;
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |stage: &'static str, timings: &mut Vec<(&'static str, f64)>| {
        timings.push((stage, clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let (mut image, labels) = load_input(config)?;
    if config.preprocess.normalize != NormalizeSetting::None {
        image = normalize_channels(&image, config.preprocess.normalize.into());
    }
    if let Some(f) = &config.preprocess.gaussian_filter {
        image = gaussian_filter(&image, f.sigma, f.ksize).map_err(|e| PipelineError::from_image("preprocess", e))?;
    }
    lap("load", &mut timings);

    let n = image.len();
    let k = config.k();
    if k >= n {
        return Err(PipelineError::Config(format!("k = {k} must be smaller than the {n} pixels")));
    }
    if labels.is_some() && config.evaluation.k_max >= n {
        return Err(PipelineError::Config(format!(
            "evaluation: k_max = {} must be smaller than the {n} pixels",
            config.evaluation.k_max
        )));
    }
    let kind = config.distance.to_kind()?;
    let graph = build_knn(&image, kind, k, exec).map_err(PipelineError::from_knn)?;
    lap("knn", &mut timings);

    let p = joint_probabilities(&graph, config.tsne.perplexity, exec)
        .map_err(|e| PipelineError::from_embedding("probabilities", e))?;
    let output = run_tsne(&p, &config.tsne, exec).map_err(|e| PipelineError::from_embedding("tsne", e))?;
    lap("tsne", &mut timings);

    let dir = &config.outputs.dir;
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::data("outputs", format!("{}: {e}", dir.display())))?;
    let mut artifacts = Artifacts {
        written: Vec::new(),
        keep: false,
    };
    let out = &config.outputs;
    let io_err = |path: &Path, e: &dyn std::fmt::Display| PipelineError::data("outputs", format!("{}: {e}", path.display()));
    let target = |name: &str, artifacts: &mut Artifacts| -> Option<PathBuf> {
        (!name.is_empty()).then(|| {
            let path = dir.join(name);
            artifacts.written.push(path.clone());
            path
        })
    };

    if let Some(path) = target(&out.knn, &mut artifacts) {
        graph.write_csv(&path).map_err(|e| io_err(&path, &e))?;
    }
    if let Some(path) = target(&out.embedding, &mut artifacts) {
        output.embedding.write_csv(&path).map_err(|e| io_err(&path, &e))?;
    }
    if let Some(path) = target(&out.cost_trace, &mut artifacts) {
        write_cost_trace(&output.cost_trace, &path).map_err(|e| io_err(&path, &e))?;
    }
    if !out.recolor_png.is_empty() || !out.recolor_ppm.is_empty() {
        let rgb = recolor(&output.embedding, image.width(), image.height(), out.corners)
            .map_err(|e| PipelineError::from_evaluation("recolor", e))?;
        if let Some(path) = target(&out.recolor_ppm, &mut artifacts) {
            rgb.write_ppm(&path).map_err(|e| io_err(&path, &e))?;
        }
        if let Some(path) = target(&out.recolor_png, &mut artifacts) {
            rgb.write_png(&path).map_err(|e| io_err(&path, &e))?;
        }
    }
    let curve = match &labels {
        Some(l) => {
            let curve = neighbor_hit(&output.embedding, l, config.evaluation.k_max, exec)
                .map_err(|e| PipelineError::from_evaluation("evaluation", e))?;
            if let Some(path) = target(&out.neighbor_hit, &mut artifacts) {
                curve.write_csv(&path).map_err(|e| io_err(&path, &e))?;
            }
            Some(curve)
        }
        None => None,
    };
    lap("outputs", &mut timings);

    let manifest_path = dir.join("manifest.json");
    artifacts.written.push(manifest_path.clone());
    let manifest = Manifest {
        tool: "texdr",
        version: env!("CARGO_PKG_VERSION"),
        seed: config.tsne.seed,
        threads: exec.threads(),
        k,
        pixels: n,
        distance: kind.to_string(),
        artifacts: artifacts
            .written
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
        config,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, json).map_err(|e| io_err(&manifest_path, &e))?;

    artifacts.keep = true;
    Ok(PipelineReport {
        pixels: n,
        k,
        final_kl: output.cost_trace.last().map_or(f64::NAN, |t| t.1),
        neighbor_hit: curve,
        artifacts: artifacts.written.clone(),
        stage_seconds: timings,
    })
}
