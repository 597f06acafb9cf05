use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use texdr::bench::{bench_sweep, fit_exponent, random_image, BenchReport};
use texdr::evaluation::{generate_synthetic, neighbor_hit, recolor, RgbImage, DEFAULT_CORNERS};
use texdr::image::{load_labels, save_image, save_labels, ImageFormat};
use texdr::pipeline::{run_pipeline, PipelineConfig, PipelineError};
use texdr::{DistanceKind, Embedding, Execution, NeighborhoodSpec, SyntheticSpec};

#[derive(Parser, Debug)]
#[command(name = "texdr", version, about = "Texture-aware embeddings of high-dimensional images")]
struct Cli {
    /// Worker threads for data-parallel stages (default: all cores).
    #[arg(long, global = true, env = "TEXDR_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full pipeline described by a config file.
    Embed {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `outputs.dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Parse and check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the four-quadrant synthetic image and its labels.
    Synth(SynthArgs),
    /// Neighbor-hit curve of an embedding against a label raster.
    Eval {
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 63)]
        k_max: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Map embedding coordinates back onto the pixel grid as colors.
    Recolor {
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        /// `.png` or `.ppm`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Time a distance kernel over a grid of parameters.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    side: usize,
    #[arg(long, default_value_t = 2)]
    block: usize,
    #[arg(long, default_value_t = 0.05)]
    noise_sd: f64,
    /// Image path; `.csv` or flat binary.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    kind: String,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    eta: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "4")]
    channels: Vec<usize>,
    /// Histogram bins; the Rice rule applies when omitted.
    #[arg(long, value_delimiter = ',')]
    bins: Vec<usize>,
    /// Side length of the random test image.
    #[arg(long, default_value_t = 16)]
    size: usize,
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    #[arg(long, default_value_t = 15)]
    rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Pipeline(e) => e.exit_code() as u8,
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

fn data_err(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{context}: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads(cli.threads)?;
    let exec = Execution::Parallel;
    match cli.command {
        Command::Embed { config, out_dir } => embed(&config, out_dir, exec),
        Command::Validate { config } => {
            let cfg = PipelineConfig::from_file(&config)?;
            cfg.validate()?;
            println!("{}: ok (k = {})", config.display(), cfg.k());
            Ok(())
        }
        Command::Synth(args) => synth(args),
        Command::Eval {
            embedding,
            labels,
            k_max,
            out,
        } => {
            let emb = Embedding::read_csv(&embedding).map_err(|e| data_err("embedding", e))?;
            let lab = load_labels(&labels).map_err(|e| data_err("labels", e))?;
            let curve = neighbor_hit(&emb, &lab, k_max, exec).map_err(|e| data_err("eval", e))?;
            curve.write_csv(&out).map_err(|e| data_err("eval", e))?;
            println!("neighbor hit @{k_max}: {:.4}", curve.at(k_max));
            Ok(())
        }
        Command::Recolor {
            embedding,
            width,
            height,
            out,
        } => {
            let emb = Embedding::read_csv(&embedding).map_err(|e| data_err("embedding", e))?;
            let rgb = recolor(&emb, width, height, DEFAULT_CORNERS).map_err(|e| data_err("recolor", e))?;
            write_rgb(&rgb, &out)
        }
        Command::Bench(args) => bench(args),
    }
}

fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    Ok(())
}

fn embed(config: &Path, out_dir: Option<PathBuf>, exec: Execution) -> Result<(), CliError> {
    let mut cfg = PipelineConfig::from_file(config)?;
    if let Some(dir) = out_dir {
        cfg.outputs.dir = dir;
    }
    let report = run_pipeline(&cfg, exec)?;
    println!("pixels: {}  k: {}  final KL: {:.6}", report.pixels, report.k, report.final_kl);
    if let Some(curve) = &report.neighbor_hit {
        let k = curve.k_max();
        println!("neighbor hit @{k}: {:.4}", curve.at(k));
    }
    for (stage, secs) in &report.stage_seconds {
        println!("  {stage:<10} {secs:8.3} s");
    }
    for path in &report.artifacts {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<(), CliError> {
    let spec = SyntheticSpec {
        side: args.side,
        block: args.block,
        noise_sd: args.noise_sd,
        seed: args.seed,
        ..SyntheticSpec::default()
    };
    let (image, labels) = generate_synthetic(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    save_image(&image, &args.out, ImageFormat::from_path(&args.out)).map_err(|e| data_err("synth", e))?;
    println!("wrote {}", args.out.display());
    if let Some(path) = args.labels {
        save_labels(&labels, &path).map_err(|e| data_err("synth", e))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn write_rgb(rgb: &RgbImage, out: &Path) -> Result<(), CliError> {
    match out.extension().and_then(|e| e.to_str()) {
        Some("png") => rgb.write_png(out).map_err(|e| data_err("recolor", e))?,
        Some("ppm") => rgb.write_ppm(out).map_err(|e| data_err("recolor", e))?,
        _ => return Err(CliError::Usage(format!("{}: expected a .png or .ppm path", out.display()))),
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), CliError> {
    let usage = |e: &dyn std::fmt::Display| CliError::Usage(format!("bench: {e}"));
    let max_c = args.channels.iter().copied().max().unwrap_or(0);
    if args.eta.is_empty() || max_c == 0 || args.channels.contains(&0) {
        return Err(usage(&"--eta and --channels need positive values"));
    }
    let full = random_image(args.size, args.size, max_c, args.seed).map_err(|e| usage(&e))?;
    let images = args
        .channels
        .iter()
        .map(|&c| full.select_channels(&(0..c).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| usage(&e))?;
    let bins: Vec<Option<usize>> = if args.bins.is_empty() {
        vec![None]
    } else {
        args.bins.iter().map(|&b| Some(b)).collect()
    };

    let mut cases = Vec::new();
    for &eta in &args.eta {
        for image in &images {
            for &b in &bins {
                let mut kind = DistanceKind::from_tag(&args.kind, NeighborhoodSpec::uniform(eta))
                    .map_err(|e| usage(&e))?;
                if let DistanceKind::QfHistogram { bins, .. } = &mut kind {
                    *bins = b;
                }
                cases.push((kind, image));
            }
        }
    }
    let rows = bench_sweep(&cases, args.pairs, args.rounds, args.seed).map_err(|e| usage(&e))?;
    let mut report = BenchReport::new(rows);
    report.threads = Execution::Parallel.threads();
    report.write_csv(std::io::stdout().lock()).map_err(|e| data_err("bench", e))?;
    if let Some(out) = &args.out {
        report.save_csv(out).map_err(|e| data_err("bench", e))?;
    }

    let ys: Vec<f64> = report.rows.iter().map(|r| r.distance.min_ns).collect();
    let axis = if args.eta.len() > 1 && args.channels.len() == 1 && bins.len() == 1 {
        Some(("M", report.rows.iter().map(|r| ((2 * r.eta + 1) * (2 * r.eta + 1)) as f64).collect::<Vec<_>>()))
    } else if args.channels.len() > 1 && args.eta.len() == 1 && bins.len() == 1 {
        Some(("C", report.rows.iter().map(|r| r.channels as f64).collect()))
    } else if bins.len() > 1 && args.eta.len() == 1 && args.channels.len() == 1 {
        Some(("B", report.rows.iter().map(|r| r.bins as f64).collect()))
    } else {
        None
    };
    if let Some((name, xs)) = axis {
        if let Some(slope) = fit_exponent(&xs, &ys) {
            println!("# fitted exponent of distance time in {name}: {slope:.3}");
        }
    }
    Ok(())
}
