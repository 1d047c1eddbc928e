//! Loading marked samples: CSV catalogs, grayscale PGM images, and the
//! magnitude-based mass proxy for galaxy catalogs.
//!
//! CSV dialect: comma separated, `.` decimal point, lines starting with `#`
//! are comments, header row optional. A comment of the form
//! `# records: N` documents the number of data rows.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageReader};
use serde::Serialize;

use crate::artifact::{fmt_f64, write_atomic};
use crate::error::{GdfError, Result};
use crate::gdf::WeightedSample;

/// A CSV column, by zero-based position or by header name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl ColumnRef {
    /// Integers are positions, anything else is a header name.
    pub fn parse(s: &str) -> Self {
        match s.trim().parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.trim().to_string()),
        }
    }

    fn resolve(&self, header: Option<&csv::StringRecord>) -> Result<usize> {
        match self {
            ColumnRef::Index(i) => Ok(*i),
            ColumnRef::Name(name) => header
                .and_then(|h| h.iter().position(|c| c == name))
                .ok_or_else(|| GdfError::Ingest(format!("column {name:?} not found in header"))),
        }
    }
}

/// Where each record's mark comes from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum WeightSpec {
    Column(ColumnRef),
    /// Every mark is one.
    Unit,
    /// Mass proxy from Petrosian magnitude `r` and redshift `z`; with
    /// `luminosity` set the mark is `10^(-0.4 * MASS)` instead of the proxy itself.
    SdssMass { r: ColumnRef, z: ColumnRef, luminosity: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogSpec {
    pub coords: Vec<ColumnRef>,
    pub weight: WeightSpec,
    pub has_header: bool,
    /// Malformed rows tolerated before loading fails.
    pub rejection_budget: usize,
}

impl CatalogSpec {
    pub fn new(coords: Vec<ColumnRef>, weight: WeightSpec) -> Self {
        Self { coords, weight, has_header: false, rejection_budget: 0 }
    }

    pub fn with_header(mut self, has_header: bool) -> Self {
        self.has_header = has_header;
        self
    }
}

/// One coordinate/mark record.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogRecord {
    pub coordinates: Vec<f64>,
    pub weight: f64,
}

/// A dropped row with its 1-based line number in the file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowRejection {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Catalog {
    pub sample: WeightedSample,
    /// Rows dropped for a non-positive or non-finite mark.
    pub rejected: Vec<RowRejection>,
    /// Rows that could not be parsed (within the rejection budget).
    pub malformed: Vec<RowRejection>,
    /// Record count stated in a `# records: N` comment, if any.
    pub declared_records: Option<usize>,
}

impl Catalog {
    pub fn rejection_summary(&self) -> String {
        format!(
            "{} rows loaded, {} rejected for their mark, {} malformed",
            self.sample.len(),
            self.rejected.len(),
            self.malformed.len()
        )
    }
}

/// Mass proxy `r - 5 log10(4.28e8 * z)`.
pub fn sdss_mass(r: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() || !r.is_finite() {
        return Err(GdfError::InvalidInput(format!("mass proxy needs finite r and z > 0 (r={r}, z={z})")));
    }
    Ok(r - 5.0 * (4.28e8 * z).log10())
}

/// Linear-scale mark `10^(-0.4 * mass)` for a magnitude-like mass proxy.
pub fn luminosity_weight(mass: f64) -> f64 {
    10f64.powf(-0.4 * mass)
}

fn declared_records(text: &str) -> Option<usize> {
    text.lines()
        .filter_map(|l| l.trim_start().strip_prefix('#'))
        .find_map(|c| c.trim().strip_prefix("records:").and_then(|v| v.trim().parse().ok()))
}

/// Parse a catalog from CSV text.
pub fn parse_catalog(text: &str, spec: &CatalogSpec) -> Result<Catalog> {
    if spec.coords.is_empty() {
        return Err(GdfError::Ingest("at least one coordinate column is required".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(spec.has_header)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = if spec.has_header {
        Some(reader.headers().map_err(|e| GdfError::Ingest(e.to_string()))?.clone())
    } else {
        None
    };
    let coord_cols = spec.coords.iter().map(|c| c.resolve(header.as_ref())).collect::<Result<Vec<_>>>()?;
    enum Mark {
        Column(usize),
        Unit,
        Mass { r: usize, z: usize, luminosity: bool },
    }
    let mark = match &spec.weight {
        WeightSpec::Column(c) => Mark::Column(c.resolve(header.as_ref())?),
        WeightSpec::Unit => Mark::Unit,
        WeightSpec::SdssMass { r, z, luminosity } => Mark::Mass {
            r: r.resolve(header.as_ref())?,
            z: z.resolve(header.as_ref())?,
            luminosity: *luminosity,
        },
    };

    let mut coords = Vec::new();
    let mut weights = Vec::new();
    let mut rejected = Vec::new();
    let mut malformed = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                malformed.push(RowRejection { line, reason: e.to_string() });
                if malformed.len() > spec.rejection_budget {
                    break;
                }
                continue;
            }
        };
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| -> std::result::Result<f64, String> {
            let raw = record.get(i).ok_or_else(|| format!("missing column {i}"))?;
            raw.parse::<f64>().map_err(|_| format!("column {i} value {raw:?} is not a number"))
        };
        let parsed: std::result::Result<Vec<f64>, String> = coord_cols
            .iter()
            .map(|&c| field(c).and_then(|v| if v.is_finite() { Ok(v) } else { Err(format!("column {c} is not finite")) }))
            .collect();
        let weight = match &mark {
            Mark::Column(c) => field(*c).map(Ok),
            Mark::Unit => Ok(Ok(1.0)),
            Mark::Mass { r, z, luminosity } => field(*r).and_then(|r| {
                field(*z).map(|z| {
                    sdss_mass(r, z)
                        .map(|m| if *luminosity { luminosity_weight(m) } else { m })
                        .map_err(|e| e.to_string())
                })
            }),
        };
        match (parsed, weight) {
            (Err(reason), _) | (_, Err(reason)) => {
                malformed.push(RowRejection { line, reason });
                if malformed.len() > spec.rejection_budget {
                    break;
                }
            }
            (Ok(_), Ok(Err(reason))) => rejected.push(RowRejection { line, reason }),
            (Ok(_), Ok(Ok(w))) if !(w.is_finite() && w > 0.0) => {
                rejected.push(RowRejection { line, reason: format!("weight {w} is not finite and positive") })
            }
            (Ok(p), Ok(Ok(w))) => {
                coords.extend(p);
                weights.push(w);
            }
        }
    }
    if malformed.len() > spec.rejection_budget {
        let first = &malformed[0];
        return Err(GdfError::Ingest(format!(
            "{} malformed row(s) exceed the rejection budget of {}; first at line {}: {}",
            malformed.len(),
            spec.rejection_budget,
            first.line,
            first.reason
        )));
    }
    if weights.is_empty() {
        let detail = rejected.first().map(|r| format!("; first rejection at line {}: {}", r.line, r.reason)).unwrap_or_default();
        return Err(GdfError::Ingest(format!("no usable rows ({} rejected){detail}", rejected.len())));
    }
    let sample = WeightedSample::from_flat(coords, coord_cols.len(), weights)?;
    Ok(Catalog { sample, rejected, malformed, declared_records: declared_records(text) })
}

/// Read and parse a catalog file.
pub fn load_catalog(path: &Path, spec: &CatalogSpec) -> Result<Catalog> {
    let text = fs::read_to_string(path)
        .map_err(|e| GdfError::Ingest(format!("cannot read {}: {e}", path.display())))?;
    parse_catalog(&text, spec)
}

/// CSV text with header `x0,...,x{d-1},weight`, one row per point.
pub fn catalog_csv(sample: &WeightedSample) -> String {
    let mut out: String = (0..sample.dim()).map(|k| format!("x{k},")).collect();
    out.push_str("weight\n");
    for (p, w) in sample.points().zip(sample.weights()) {
        for v in p {
            out.push_str(&fmt_f64(*v));
            out.push(',');
        }
        out.push_str(&fmt_f64(*w));
        out.push('\n');
    }
    out
}

pub fn write_catalog(path: &Path, sample: &WeightedSample) -> Result<()> {
    write_atomic(path, catalog_csv(sample).as_bytes())
}

/// Column spec matching [`catalog_csv`] output.
pub fn written_catalog_spec(dim: usize) -> CatalogSpec {
    CatalogSpec::new((0..dim).map(ColumnRef::Index).collect(), WeightSpec::Column(ColumnRef::Index(dim)))
        .with_header(true)
}

/// Row-major grayscale raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub width: usize,
    pub height: usize,
    /// `height` rows of `width` values, top row first.
    pub intensities: Vec<f64>,
    pub normalized: bool,
}

/// How pixel rows map to the second coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageOrientation {
    /// `y = row + 0.5`, increasing downward.
    #[default]
    Raster,
    /// `y = height - row - 0.5`, increasing upward.
    Cartesian,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, intensities: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(GdfError::InvalidInput("image must have positive width and height".into()));
        }
        if intensities.len() != width * height {
            return Err(GdfError::InvalidInput(format!(
                "{} intensities for a {width}x{height} image",
                intensities.len()
            )));
        }
        if intensities.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(GdfError::InvalidInput("intensities must be finite and nonnegative".into()));
        }
        Ok(Self { width, height, intensities, normalized: false })
    }

    pub fn max_intensity(&self) -> f64 {
        self.intensities.iter().copied().fold(0.0, f64::max)
    }

    /// Divide by the maximum so the brightest pixel is one.
    pub fn normalize(&self) -> Result<Self> {
        let max = self.max_intensity();
        if max <= 0.0 {
            return Err(GdfError::EmptyResult("image is entirely dark".into()));
        }
        Ok(Self {
            intensities: self.intensities.iter().map(|v| v / max).collect(),
            normalized: true,
            ..*self
        })
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.intensities[row * self.width + col]
    }
}

/// One sample point per pixel whose normalized intensity exceeds `threshold`,
/// located at the pixel centre and marked with that intensity.
pub fn image_to_sample(img: &ImageGrid, threshold: f64) -> Result<WeightedSample> {
    image_to_sample_oriented(img, threshold, ImageOrientation::Raster)
}

pub fn image_to_sample_oriented(img: &ImageGrid, threshold: f64, orientation: ImageOrientation) -> Result<WeightedSample> {
    if !threshold.is_finite() {
        return Err(GdfError::InvalidInput("threshold must be finite".into()));
    }
    let norm = if img.normalized { img.clone() } else { img.normalize()? };
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for row in 0..norm.height {
        for col in 0..norm.width {
            let v = norm.get(col, row);
            if v > threshold && v > 0.0 {
                let y = match orientation {
                    ImageOrientation::Raster => row as f64 + 0.5,
                    ImageOrientation::Cartesian => (norm.height - row) as f64 - 0.5,
                };
                coords.extend([col as f64 + 0.5, y]);
                weights.push(v);
            }
        }
    }
    if weights.is_empty() {
        return Err(GdfError::EmptyResult(format!("no pixel exceeds threshold {threshold}")));
    }
    WeightedSample::from_flat(coords, 2, weights)
}

/// Decode an 8- or 16-bit grayscale PGM (plain `P2` or raw `P5`).
pub fn decode_pgm(bytes: &[u8]) -> Result<ImageGrid> {
    let img = ImageReader::with_format(Cursor::new(bytes), image::ImageFormat::Pnm)
        .decode()
        .map_err(|e| GdfError::Ingest(format!("cannot decode PGM: {e}")))?;
    let (w, h, data): (u32, u32, Vec<f64>) = match img {
        DynamicImage::ImageLuma8(b) => (b.width(), b.height(), b.into_raw().into_iter().map(f64::from).collect()),
        DynamicImage::ImageLuma16(b) => (b.width(), b.height(), b.into_raw().into_iter().map(f64::from).collect()),
        other => {
            return Err(GdfError::Ingest(format!(
                "expected a grayscale PGM, got {:?}",
                other.color()
            )))
        }
    };
    ImageGrid::new(w as usize, h as usize, data)
}

pub fn load_pgm(path: &Path) -> Result<ImageGrid> {
    let bytes = fs::read(path).map_err(|e| GdfError::Ingest(format!("cannot read {}: {e}", path.display())))?;
    decode_pgm(&bytes)
}

/// Encode as raw 16-bit PGM (`P5`, big-endian samples) after scaling the maximum to 65535.
pub fn encode_pgm16(img: &ImageGrid) -> Vec<u8> {
    let max = img.max_intensity();
    let scale = if max > 0.0 { 65535.0 / max } else { 0.0 };
    let mut out = format!("P5\n{} {}\n65535\n", img.width, img.height).into_bytes();
    for v in &img.intensities {
        out.extend(((v * scale).round() as u16).to_be_bytes());
    }
    out
}
