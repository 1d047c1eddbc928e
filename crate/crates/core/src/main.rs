use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gdf::cli::{self, Command, InputSpec, RunConfig, SdssColumns, SimulateSpec, DEFAULT_IMAGE_THRESHOLD};
use gdf::GdfError;

/// Weighted kernel density estimation, modes, ridges, clusters and connectivity.
///
/// Set GDF_THREADS to bound the worker thread count.
#[derive(Parser)]
#[command(name = "gdf", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Estimate, gradient norm and Hessian eigenvalues on a regular grid.
    Estimate(DataArgs),
    /// Modes found by weighted mean shift.
    Modes(DataArgs),
    /// Ridge points found by subspace-constrained mean shift.
    Ridges(DataArgs),
    /// Mode clustering of the sample.
    Cluster(DataArgs),
    /// Clustering plus the absorbing chain and cluster connectivity.
    Connectivity(DataArgs),
    /// Convergence-rate experiment on a synthetic model.
    Simulate(SimArgs),
    /// Re-run the configuration recorded in a manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Tuning {
    #[arg(long, allow_negative_numbers = true, default_value_t = 1e-7)]
    step_tol: f64,
    /// Relative to the largest gradient norm over the seeds.
    #[arg(long, allow_negative_numbers = true, default_value_t = 1e-6)]
    ridge_tol: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.5)]
    merge_radius: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DataArgs {
    /// CSV catalog.
    #[arg(long, conflicts_with = "image", required_unless_present = "image")]
    input: Option<PathBuf>,
    /// Grayscale PGM image (P2 or P5).
    #[arg(long)]
    image: Option<PathBuf>,
    /// Coordinate columns, by header name or zero-based position.
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    coords: Vec<String>,
    /// Mark column; all marks are one when omitted.
    #[arg(long)]
    weight: Option<String>,
    /// Marks from the mass proxy of these magnitude and redshift columns.
    #[arg(long, num_args = 2, value_names = ["R", "Z"], conflicts_with = "weight")]
    sdss_mass: Option<Vec<String>>,
    /// Use 10^(-0.4 * MASS) instead of the mass proxy itself.
    #[arg(long, requires = "sdss_mass")]
    luminosity: bool,
    #[arg(long)]
    header: bool,
    /// Malformed rows tolerated before loading fails.
    #[arg(long, default_value_t = 0)]
    rejection_budget: usize,
    /// Pixels at or below this normalized intensity are dropped.
    #[arg(long, allow_negative_numbers = true, default_value_t = DEFAULT_IMAGE_THRESHOLD)]
    threshold: f64,
    /// Image y axis points up from the bottom row.
    #[arg(long)]
    cartesian: bool,
    #[arg(long, allow_negative_numbers = true)]
    bandwidth: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    density_floor: f64,
    /// Nodes per axis of the estimate grid, or of the seed mesh for modes and ridges.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value_t = gdf::connectivity::DEFAULT_MAX_POINTS)]
    max_points: usize,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
struct SimArgs {
    /// gaussian1d, mixture2d or circle2d.
    #[arg(long)]
    model: String,
    /// mise0, mise1, mise2, mode or ridge.
    #[arg(long)]
    target: String,
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Bandwidth h = c * n^(-gamma).
    #[arg(long, allow_negative_numbers = true)]
    c: f64,
    #[arg(long, allow_negative_numbers = true)]
    gamma: f64,
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    #[arg(long, default_value_t = 400)]
    max_seeds: usize,
    #[arg(long, default_value_t = 256)]
    quadrature: usize,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.05)]
    mode_floor: f64,
    #[arg(long, default_value_t = 60)]
    ridge_mesh: usize,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.75)]
    ridge_floor: f64,
    #[command(flatten)]
    tuning: Tuning,
}

fn base(command: Command, t: Tuning) -> RunConfig {
    let mut cfg = RunConfig::new(command, t.out);
    cfg.step_tol = t.step_tol;
    cfg.ridge_tol = t.ridge_tol;
    cfg.merge_radius = t.merge_radius;
    cfg.max_iters = t.max_iters;
    cfg.seed = t.seed;
    cfg
}

fn data_config(command: Command, a: DataArgs) -> RunConfig {
    let input = match (a.input, a.image) {
        (_, Some(path)) => InputSpec::Image { path, threshold: a.threshold, cartesian: a.cartesian },
        (Some(path), None) => InputSpec::Catalog {
            path,
            coords: a.coords,
            weight: a.weight,
            sdss: a.sdss_mass.map(|v| SdssColumns { r: v[0].clone(), z: v[1].clone(), luminosity: a.luminosity }),
            header: a.header,
            rejection_budget: a.rejection_budget,
        },
        (None, None) => unreachable!("clap requires one input"),
    };
    let mut cfg = base(command, a.tuning);
    cfg.input = Some(input);
    cfg.bandwidth = Some(a.bandwidth);
    cfg.density_floor = a.density_floor;
    cfg.grid = a.grid;
    cfg.max_points = a.max_points;
    cfg
}

fn execute(cli: Cli) -> Result<cli::RunSummary, GdfError> {
    let cfg = match cli.command {
        Sub::Replay { manifest, out } => return cli::replay(&manifest, &out),
        Sub::Estimate(a) => data_config(Command::Estimate, a),
        Sub::Modes(a) => data_config(Command::Modes, a),
        Sub::Ridges(a) => data_config(Command::Ridges, a),
        Sub::Cluster(a) => data_config(Command::Cluster, a),
        Sub::Connectivity(a) => data_config(Command::Connectivity, a),
        Sub::Simulate(s) => {
            let mut cfg = base(Command::Simulate, s.tuning);
            cfg.simulate = Some(SimulateSpec {
                model: s.model,
                target: s.target,
                sizes: s.sizes,
                c: s.c,
                gamma: s.gamma,
                replicates: s.replicates,
                max_seeds: s.max_seeds,
                quadrature: s.quadrature,
                mode_floor: s.mode_floor,
                ridge_mesh: s.ridge_mesh,
                ridge_floor: s.ridge_floor,
            });
            cfg
        }
    };
    cli::run(&cfg)
}

fn configure_threads() -> Result<(), GdfError> {
    if let Ok(v) = std::env::var("GDF_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| GdfError::InvalidInput(format!("GDF_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| GdfError::InvalidInput(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|_| execute(cli)) {
        Ok(summary) => {
            for f in summary.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let message = serde_json::to_string(&e.to_string()).expect("strings serialize");
            eprintln!("error code={} kind={} message={message}", e.exit_code(), e.kind());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
