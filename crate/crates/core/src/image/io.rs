//! Flat-binary and CSV image files, CSV label rasters.
//!
//! Flat-binary: a JSON sidecar `<file>.json` holding
//! `{"width": X, "height": Y, "channels": C, "dtype": "f64le"}` next to a raw
//! payload of `X*Y*C` little-endian f64 values, pixel-major.
//!
//! CSV: a `# X,Y,C` comment line, then one line per pixel in row-major order
//! with `C` comma-separated values.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{HighDimImage, ImageError, LabelRaster};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageFormat {
    #[default]
    FlatBinary,
    Csv,
}

impl ImageFormat {
    /// `.csv` files are CSV, everything else flat-binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => ImageFormat::Csv,
            _ => ImageFormat::FlatBinary,
        }
    }
}

impl FromStr for ImageFormat {
    type Err = ImageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flat-binary" | "bin" => Ok(ImageFormat::FlatBinary),
            "csv" => Ok(ImageFormat::Csv),
            other => Err(ImageError::InvalidParameter(format!(
                "unknown image format '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FlatHeader {
    width: usize,
    height: usize,
    channels: usize,
    dtype: String,
}

const DTYPE: &str = "f64le";

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ImageError + '_ {
    move |source| ImageError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn load_image(path: &Path, format: ImageFormat) -> Result<HighDimImage, ImageError> {
    match format {
        ImageFormat::FlatBinary => load_flat(path),
        ImageFormat::Csv => load_csv(path),
    }
}

pub fn save_image(image: &HighDimImage, path: &Path, format: ImageFormat) -> Result<(), ImageError> {
    match format {
        ImageFormat::FlatBinary => save_flat(image, path),
        ImageFormat::Csv => save_csv(image, path),
    }
}

fn load_flat(path: &Path) -> Result<HighDimImage, ImageError> {
    let header_path = sidecar_path(path);
    let header_text = fs::read_to_string(&header_path).map_err(io_err(&header_path))?;
    let header: FlatHeader =
        serde_json::from_str(&header_text).map_err(|e| ImageError::Malformed {
            what: "flat-binary header",
            detail: e.to_string(),
        })?;
    if header.dtype != DTYPE {
        return Err(ImageError::Malformed {
            what: "flat-binary header",
            detail: format!("unsupported dtype '{}'", header.dtype),
        });
    }
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() % 8 != 0 {
        return Err(ImageError::Malformed {
            what: "flat-binary payload",
            detail: format!("{} bytes is not a multiple of 8", bytes.len()),
        });
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    HighDimImage::new(header.width, header.height, header.channels, data)
}

fn save_flat(image: &HighDimImage, path: &Path) -> Result<(), ImageError> {
    let header = FlatHeader {
        width: image.width(),
        height: image.height(),
        channels: image.channels(),
        dtype: DTYPE.to_string(),
    };
    let header_path = sidecar_path(path);
    let text = serde_json::to_string(&header).expect("header serializes");
    fs::write(&header_path, text).map_err(io_err(&header_path))?;
    let mut bytes = Vec::with_capacity(image.data().len() * 8);
    for v in image.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(io_err(path))
}

fn parse_dims(line: &str) -> Option<(usize, usize, usize)> {
    let mut it = line.split(',').map(|t| t.trim().parse::<usize>());
    match (it.next(), it.next(), it.next(), it.next()) {
        (Some(Ok(w)), Some(Ok(h)), Some(Ok(c)), None) => Some((w, h, c)),
        _ => None,
    }
}

fn load_csv(path: &Path) -> Result<HighDimImage, ImageError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut dims = None;
    let mut data = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if dims.is_none() {
                dims = parse_dims(comment);
            }
            continue;
        }
        for token in line.split(',') {
            let v = token.trim().parse::<f64>().map_err(|e| ImageError::Malformed {
                what: "csv image",
                detail: format!("line {}: '{}': {e}", lineno + 1, token.trim()),
            })?;
            data.push(v);
        }
    }
    let (w, h, c) = dims.ok_or_else(|| ImageError::Malformed {
        what: "csv image",
        detail: "missing '# width,height,channels' line".into(),
    })?;
    HighDimImage::new(w, h, c, data)
}

fn save_csv(image: &HighDimImage, path: &Path) -> Result<(), ImageError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(out, "# {},{},{}", image.width(), image.height(), image.channels())?;
        for px in image.data().chunks_exact(image.channels()) {
            let row: Vec<String> = px.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()
    };
    write(&mut out).map_err(io_err(path))
}

/// Reads a label raster: one CSV row per image row, `0` = unlabeled.
pub fn load_labels(path: &Path) -> Result<LabelRaster, ImageError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut width = None;
    let mut labels = Vec::new();
    let mut height = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<u32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ImageError::Malformed {
                what: "label csv",
                detail: format!("line {}: {e}", lineno + 1),
            })?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(ImageError::Malformed {
                    what: "label csv",
                    detail: format!("line {} has {} columns, expected {w}", lineno + 1, row.len()),
                })
            }
            _ => {}
        }
        labels.extend(row);
        height += 1;
    }
    LabelRaster::new(width.unwrap_or(0), height, labels)
}

pub fn save_labels(labels: &LabelRaster, path: &Path) -> Result<(), ImageError> {
    let mut text = String::with_capacity(labels.len() * 3);
    for row in labels.labels().chunks_exact(labels.width()) {
        let cells: Vec<String> = row.iter().map(u32::to_string).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(io_err(path))
}
