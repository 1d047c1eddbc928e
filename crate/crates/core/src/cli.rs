//! Run configuration and the command orchestration behind the `gdf` binary.
//!
//! Every command writes its tables into the output directory and finishes with
//! `manifest.json`, which holds the full configuration and the checksums of all
//! inputs and outputs. [`replay`] re-runs a manifest.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifact::{csv_table, fmt_f64, write_atomic};
use crate::clustering::{cluster, ClusterAssignment};
use crate::connectivity::{absorb, build_chain_capped, connectivity_matrix, DEFAULT_MAX_POINTS};
use crate::error::{GdfError, Result};
use crate::eval::{rate_experiment, ModelKind, RateOptions, RateTarget, Schedule, SyntheticModel};
use crate::gdf::{GdfModel, WeightedSample};
use crate::ingest::{
    image_to_sample_oriented, load_catalog, load_pgm, ColumnRef, CatalogSpec, ImageOrientation, RowRejection,
    WeightSpec,
};
use crate::linalg::descending_eigen;
use crate::modes::{grid_seeds, search_modes, AscentConfig, SeedOutcome};
use crate::ridges::{trace_ridge_with, RidgeOptions, DEFAULT_RIDGE_TOL};

pub const MANIFEST: &str = "manifest.json";

/// Pixel threshold applied to max-normalized images unless overridden.
pub const DEFAULT_IMAGE_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Estimate,
    Modes,
    Ridges,
    Cluster,
    Connectivity,
    Simulate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Estimate => "estimate",
            Command::Modes => "modes",
            Command::Ridges => "ridges",
            Command::Cluster => "cluster",
            Command::Connectivity => "connectivity",
            Command::Simulate => "simulate",
        }
    }
}

/// Mass-proxy marks computed from magnitude and redshift columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdssColumns {
    pub r: String,
    pub z: String,
    pub luminosity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpec {
    Catalog {
        path: PathBuf,
        /// Column names or zero-based positions.
        coords: Vec<String>,
        /// Mark column; unit marks when absent and `sdss` is unset.
        weight: Option<String>,
        sdss: Option<SdssColumns>,
        header: bool,
        rejection_budget: usize,
    },
    Image {
        path: PathBuf,
        threshold: f64,
        /// Put the origin at the bottom-left with y pointing up.
        cartesian: bool,
    },
}

impl InputSpec {
    pub fn path(&self) -> &Path {
        match self {
            InputSpec::Catalog { path, .. } | InputSpec::Image { path, .. } => path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSpec {
    pub model: String,
    /// `mise0`, `mise1`, `mise2`, `mode` or `ridge`.
    pub target: String,
    pub sizes: Vec<usize>,
    /// Bandwidth schedule `h = c * n^(-gamma)`.
    pub c: f64,
    pub gamma: f64,
    pub replicates: usize,
    pub max_seeds: usize,
    pub quadrature: usize,
    pub mode_floor: f64,
    pub ridge_mesh: usize,
    pub ridge_floor: f64,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        let o = RateOptions::default();
        Self {
            model: "gaussian1d".into(),
            target: "mise0".into(),
            sizes: vec![250, 1000, 4000, 16000],
            c: 1.0,
            gamma: 0.2,
            replicates: o.replicates,
            max_seeds: o.max_seeds,
            quadrature: o.quadrature_per_axis,
            mode_floor: o.mode_floor,
            ridge_mesh: o.ridge_mesh,
            ridge_floor: o.ridge_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<InputSpec>,
    pub bandwidth: Option<f64>,
    pub step_tol: f64,
    /// Relative ridge tolerance (multiplies the largest seed gradient norm).
    pub ridge_tol: f64,
    pub merge_radius: f64,
    pub max_iters: usize,
    pub density_floor: f64,
    /// Nodes per axis: the `estimate` grid, or a seed mesh for `modes` and `ridges`.
    pub grid: Option<usize>,
    /// Largest sample accepted by `connectivity`.
    pub max_points: usize,
    pub seed: u64,
    pub simulate: Option<SimulateSpec>,
    /// Not recorded in the manifest, so runs into different directories stay comparable.
    #[serde(skip)]
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(command: Command, out: impl Into<PathBuf>) -> Self {
        let a = AscentConfig::default();
        Self {
            command,
            input: None,
            bandwidth: None,
            step_tol: a.step_tol,
            ridge_tol: DEFAULT_RIDGE_TOL,
            merge_radius: a.merge_radius,
            max_iters: a.max_iters,
            density_floor: 0.0,
            grid: None,
            max_points: DEFAULT_MAX_POINTS,
            seed: 0,
            simulate: None,
            out: out.into(),
        }
    }

    pub fn ascent(&self) -> AscentConfig {
        AscentConfig { step_tol: self.step_tol, max_iters: self.max_iters, merge_radius: self.merge_radius }
    }

    pub fn validate(&self) -> Result<()> {
        self.ascent().validate()?;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(GdfError::InvalidInput(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("ridge_tol", self.ridge_tol)?;
        if !(self.density_floor.is_finite() && self.density_floor >= 0.0) {
            return Err(GdfError::InvalidInput(format!("density_floor must be >= 0, got {}", self.density_floor)));
        }
        if self.grid == Some(0) {
            return Err(GdfError::InvalidInput("grid needs at least one node per axis".into()));
        }
        if self.command == Command::Simulate {
            if self.simulate.is_none() {
                return Err(GdfError::InvalidInput("simulate needs an experiment specification".into()));
            }
            return Ok(());
        }
        match self.bandwidth {
            Some(h) => positive("bandwidth", h)?,
            None => return Err(GdfError::InvalidInput(format!("{} requires --bandwidth", self.command.name()))),
        }
        if self.input.is_none() {
            return Err(GdfError::InvalidInput(format!("{} requires an input file", self.command.name())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestReport {
    pub points: usize,
    pub dim: usize,
    pub rejected: Vec<String>,
    pub malformed: Vec<String>,
    pub declared_records: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    pub ingest: Option<IngestReport>,
    pub outputs: Vec<FileDigest>,
}

/// Files written by a run, in order, with the manifest last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn load_input(spec: &InputSpec) -> Result<(WeightedSample, IngestReport)> {
    let lines = |v: &[RowRejection]| v.iter().map(|r| format!("line {}: {}", r.line, r.reason)).collect();
    match spec {
        InputSpec::Catalog { path, coords, weight, sdss, header, rejection_budget } => {
            let weight = match (weight, sdss) {
                (Some(_), Some(_)) => {
                    return Err(GdfError::InvalidInput("give either a weight column or mass-proxy columns".into()))
                }
                (Some(w), None) => WeightSpec::Column(ColumnRef::parse(w)),
                (None, Some(s)) => {
                    WeightSpec::SdssMass { r: ColumnRef::parse(&s.r), z: ColumnRef::parse(&s.z), luminosity: s.luminosity }
                }
                (None, None) => WeightSpec::Unit,
            };
            let mut cs = CatalogSpec::new(coords.iter().map(|c| ColumnRef::parse(c)).collect(), weight)
                .with_header(*header);
            cs.rejection_budget = *rejection_budget;
            let cat = load_catalog(path, &cs)?;
            let report = IngestReport {
                points: cat.sample.len(),
                dim: cat.sample.dim(),
                rejected: lines(&cat.rejected),
                malformed: lines(&cat.malformed),
                declared_records: cat.declared_records,
            };
            Ok((cat.sample, report))
        }
        InputSpec::Image { path, threshold, cartesian } => {
            let orientation = if *cartesian { ImageOrientation::Cartesian } else { ImageOrientation::Raster };
            let sample = image_to_sample_oriented(&load_pgm(path)?, *threshold, orientation)?;
            let report = IngestReport {
                points: sample.len(),
                dim: sample.dim(),
                rejected: vec![],
                malformed: vec![],
                declared_records: None,
            };
            Ok((sample, report))
        }
    }
}

struct Outputs {
    dir: PathBuf,
    written: Vec<(String, String)>,
}

impl Outputs {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        write_atomic(&self.dir.join(name), contents.as_bytes())?;
        self.written.push((name.to_string(), sha256_hex(contents.as_bytes())));
        Ok(())
    }
}

fn coord_header(d: usize) -> Vec<String> {
    (1..=d).map(|k| format!("x{k}")).collect()
}

fn with_header(mut head: Vec<String>, tail: &[&str]) -> Vec<String> {
    head.extend(tail.iter().map(|s| s.to_string()));
    head
}

fn table(header: Vec<String>, rows: Vec<Vec<String>>) -> String {
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_table(&h, rows)
}

fn coords(x: &[f64]) -> impl Iterator<Item = String> + '_ {
    x.iter().map(|v| fmt_f64(*v))
}

fn matrix_csv(m: &nalgebra::DMatrix<f64>, prefix: &str) -> String {
    let header = (0..m.ncols()).map(|j| format!("{prefix}{j}")).collect();
    let rows = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect()).collect();
    table(header, rows)
}

fn outcome_code(o: &SeedOutcome) -> &'static str {
    match o {
        SeedOutcome::Mode(_) => "mode",
        SeedOutcome::Failed(s) => s.code(),
        SeedOutcome::Saddle => "saddle",
    }
}

/// Nodes of a regular `per_axis^d` grid over the sample's bounding box padded by `3h`.
fn estimate_grid(model: &GdfModel, per_axis: usize) -> Vec<Vec<f64>> {
    let s = model.sample();
    let d = s.dim();
    let pad = 3.0 * model.bandwidth();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in s.points() {
        for k in 0..d {
            lo[k] = lo[k].min(p[k] - pad);
            hi[k] = hi[k].max(p[k] + pad);
        }
    }
    let axis = |k: usize, i: usize| {
        if per_axis == 1 {
            0.5 * (lo[k] + hi[k])
        } else {
            lo[k] + (hi[k] - lo[k]) * i as f64 / (per_axis - 1) as f64
        }
    };
    (0..per_axis.pow(d as u32))
        .map(|mut idx| {
            (0..d)
                .map(|k| {
                    let i = idx % per_axis;
                    idx /= per_axis;
                    axis(k, i)
                })
                .collect()
        })
        .collect()
}

fn run_estimate(model: &GdfModel, per_axis: usize, out: &mut Outputs) -> Result<()> {
    let d = model.dim();
    let nodes = estimate_grid(model, per_axis);
    let rows = nodes
        .par_iter()
        .map(|x| {
            let der = model.derivatives(x)?;
            let (eig, _) = descending_eigen(&der.hessian)?;
            let mut row: Vec<String> = coords(x).collect();
            row.push(fmt_f64(der.value));
            row.push(fmt_f64(der.gradient.norm()));
            row.push(fmt_f64(eig[0]));
            row.push(if d > 1 { fmt_f64(eig[1]) } else { String::new() });
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    out.write(
        "estimate.csv",
        &table(with_header(coord_header(d), &["value", "grad_norm", "lambda1", "lambda2"]), rows),
    )
}

fn modes_table(modes: &crate::modes::ModeSet, d: usize) -> String {
    let rows = (0..modes.len())
        .map(|j| {
            let mut row = vec![j.to_string()];
            row.extend(coords(&modes.modes[j]));
            row.push(fmt_f64(modes.values[j]));
            row.push(fmt_f64(modes.top_eigenvalues[j]));
            row.push(modes.basin_counts[j].to_string());
            row
        })
        .collect();
    table(
        with_header(with_header(vec![], &["mode"]).into_iter().chain(coord_header(d)).collect(), &[
            "value",
            "lambda1",
            "basin_count",
        ]),
        rows,
    )
}

fn data_seeds(model: &GdfModel, grid: Option<usize>) -> Vec<Vec<f64>> {
    match grid {
        Some(m) => grid_seeds(model, m),
        None => model.sample().points().map(<[f64]>::to_vec).collect(),
    }
}

fn labels_table(a: &ClusterAssignment) -> String {
    let mut reasons = a.unassigned.iter().zip(&a.unassigned_reasons);
    let mut next = reasons.next();
    let rows = a
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| match l {
            Some(j) => vec![i.to_string(), j.to_string(), "mode".into()],
            None => {
                let reason = match next {
                    Some((&idx, r)) if idx == i => {
                        next = reasons.next();
                        outcome_code(r)
                    }
                    _ => "unassigned",
                };
                vec![i.to_string(), String::new(), reason.into()]
            }
        })
        .collect();
    table(vec!["point".into(), "label".into(), "status".into()], rows)
}

fn run_simulate(spec: &SimulateSpec, cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let model = SyntheticModel::new(ModelKind::parse(&spec.model)?);
    let target = RateTarget::parse(&spec.target)?;
    let opts = RateOptions {
        replicates: spec.replicates,
        seed: cfg.seed,
        ascent: cfg.ascent(),
        max_seeds: spec.max_seeds,
        quadrature_per_axis: spec.quadrature,
        mode_floor: spec.mode_floor,
        ridge_mesh: spec.ridge_mesh,
        ridge_floor: spec.ridge_floor,
        ..RateOptions::default()
    };
    let report = rate_experiment(&model, target, &Schedule::power_law(&spec.sizes, spec.c, spec.gamma), &opts)?;
    out.write("rate_report.json", &(report.to_json() + "\n"))?;
    out.write("rate_report.csv", &report.to_csv())
}

/// Execute a validated configuration.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    let mut out = Outputs { dir: cfg.out.clone(), written: vec![] };
    let mut inputs = vec![];
    let mut ingest = None;

    if let (Command::Simulate, Some(spec)) = (cfg.command, &cfg.simulate) {
        run_simulate(spec, cfg, &mut out)?;
    } else {
        let input = cfg.input.as_ref().expect("validated");
        let raw = fs::read(input.path())?;
        inputs.push(FileDigest { path: input.path().display().to_string(), sha256: sha256_hex(&raw) });
        let (sample, report) = load_input(input)?;
        ingest = Some(report);
        let model = GdfModel::new(sample, cfg.bandwidth.expect("validated"))?;
        let d = model.dim();
        let ascent = cfg.ascent();
        match cfg.command {
            Command::Estimate => run_estimate(&model, cfg.grid.unwrap_or(64), &mut out)?,
            Command::Modes => {
                let search = search_modes(&model, &data_seeds(&model, cfg.grid), &ascent)?;
                out.write("modes.csv", &modes_table(&search.modes, d))?;
            }
            Command::Ridges => {
                let opts =
                    RidgeOptions { ascent, density_floor: cfg.density_floor, relative_ridge_tol: cfg.ridge_tol };
                let search = trace_ridge_with(&model, &data_seeds(&model, cfg.grid), &opts)?;
                let r = &search.ridge;
                let rows = (0..r.len())
                    .map(|i| {
                        let mut row: Vec<String> = coords(&r.points[i]).collect();
                        row.push(fmt_f64(r.values[i]));
                        row.push(fmt_f64(r.projected_grad_norms[i]));
                        row.push(fmt_f64(r.second_eigenvalues[i]));
                        row
                    })
                    .collect();
                out.write(
                    "ridges.csv",
                    &table(with_header(coord_header(d), &["value", "projected_grad_norm", "lambda2"]), rows),
                )?;
                let outcomes =
                    search.outcomes.iter().enumerate().map(|(i, o)| vec![i.to_string(), o.code().into()]).collect();
                out.write("ridge_seeds.csv", &table(vec!["seed".into(), "status".into()], outcomes))?;
            }
            Command::Cluster | Command::Connectivity => {
                if cfg.command == Command::Connectivity && model.sample().len() > cfg.max_points {
                    return Err(GdfError::CapacityExceeded { n: model.sample().len(), cap: cfg.max_points });
                }
                let assignment = cluster(&model, &ascent)?;
                out.write("modes.csv", &modes_table(&assignment.modes, d))?;
                out.write("labels.csv", &labels_table(&assignment))?;
                if cfg.command == Command::Connectivity {
                    let blocks = build_chain_capped(&model, &assignment.modes, cfg.max_points)?;
                    let a = absorb(&blocks)?;
                    let (omega, self_conn) = connectivity_matrix(&a, &assignment, model.sample())?;
                    out.write("S.csv", &matrix_csv(&blocks.s, "mode"))?;
                    out.write("T.csv", &matrix_csv(&blocks.t, "point"))?;
                    out.write("A.csv", &matrix_csv(&a, "mode"))?;
                    let k = omega.nrows();
                    let rows = (0..k)
                        .map(|i| {
                            let mut row = vec![i.to_string()];
                            row.extend((0..k).map(|j| fmt_f64(omega[(i, j)])));
                            row.push(fmt_f64(self_conn[i]));
                            row.push(fmt_f64(blocks.mode_weights[i]));
                            row
                        })
                        .collect();
                    let mut header = vec!["cluster".to_string()];
                    header.extend((0..k).map(|j| format!("omega{j}")));
                    header.push("self".into());
                    header.push("mode_weight".into());
                    out.write("omega.csv", &table(header, rows))?;
                }
            }
            Command::Simulate => unreachable!("handled above"),
        }
    }

    let manifest = Manifest {
        tool: "gdf".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cfg.command,
        seed: cfg.seed,
        config: cfg.clone(),
        inputs,
        ingest,
        outputs: out.written.iter().map(|(p, h)| FileDigest { path: p.clone(), sha256: h.clone() }).collect(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| GdfError::Numeric(e.to_string()))? + "\n";
    write_atomic(&cfg.out.join(MANIFEST), text.as_bytes())?;
    let mut files: Vec<PathBuf> = out.written.iter().map(|(p, _)| cfg.out.join(p)).collect();
    files.push(cfg.out.join(MANIFEST));
    Ok(RunSummary { files })
}

/// Load a manifest, check that its inputs are unchanged, and run it again into `out`.
pub fn replay(manifest: &Path, out: &Path) -> Result<RunSummary> {
    let text = fs::read_to_string(manifest)?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| GdfError::InvalidInput(format!("unreadable manifest: {e}")))?;
    for input in &m.inputs {
        let digest = sha256_hex(&fs::read(&input.path)?);
        if digest != input.sha256 {
            return Err(GdfError::InvalidInput(format!("input {} changed since the manifest was written", input.path)));
        }
    }
    let mut cfg = m.config;
    cfg.out = out.to_path_buf();
    run(&cfg)
}
