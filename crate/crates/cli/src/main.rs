mod commands;
mod csv;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wavescat::numerics::Boundary;
use wavescat::scattering::Alpha;

/// Thread count fallback when `--threads` is absent.
const THREADS_ENV: &str = "WAVESCAT_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "wavescat",
    version,
    about = "Wavelet scattering transforms, texture statistics and PCA classification"
)]
struct Cli {
    /// Worker threads (default: $WAVESCAT_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a Morlet filter bank, audit its frame bound and save it.
    BuildFilters(BuildFilters),
    /// Scatter a dataset with a saved bank.
    Transform(Transform),
    /// Per-order energy table of a coefficient batch.
    EnergyReport(EnergyReport),
    /// Fit affine PCA models, choosing d on a holdout.
    Train(Train),
    /// Classify a coefficient batch with trained models.
    Evaluate(Evaluate),
    /// Scattering distance between two texture ensembles.
    TextureCompare(TextureCompare),
    /// Render the order-1/order-2 frequency tiling of one coefficient position.
    Display(Display),
}

#[derive(Args, Debug)]
struct BuildFilters {
    /// Image size, `N` or `WxH`.
    #[arg(long, value_parser = parse_size)]
    size: (usize, usize),
    /// J: number of scales.
    #[arg(long)]
    scales: usize,
    /// C: orientations over [0, π).
    #[arg(long, default_value_t = wavescat::filterbank::DEFAULT_ORIENTATIONS)]
    orientations: usize,
    #[arg(long, default_value_t = wavescat::filterbank::DEFAULT_SIGMA)]
    sigma: f64,
    #[arg(long, default_value_t = wavescat::filterbank::DEFAULT_XI)]
    xi: f64,
    #[arg(long, default_value_t = wavescat::filterbank::DEFAULT_SIGMA0)]
    sigma0: f64,
    /// `mirror` or `periodic`.
    #[arg(long, default_value = "mirror")]
    boundary: Boundary,
    /// Also write |ψ̂| of every filter as PGM into this directory.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct Transform {
    /// IDX image file (optionally gzipped), image directory or single image.
    #[arg(long)]
    input: PathBuf,
    /// IDX label file for IDX inputs.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    bank: PathBuf,
    #[arg(long, default_value_t = 2)]
    max_order: usize,
    /// 1 or 0.5.
    #[arg(long, default_value = "0.5")]
    alpha: Alpha,
    /// Store cosine-scattering coefficients instead of raw paths.
    #[arg(long)]
    cosine: bool,
    /// Fraction of cosine indices kept per order.
    #[arg(long, requires = "cosine")]
    keep: Option<f64>,
    /// Standardize each image to zero mean and unit variance.
    #[arg(long)]
    normalize: bool,
    /// Skip this many leading items.
    #[arg(long, default_value_t = 0)]
    skip: usize,
    /// Keep at most this many items.
    #[arg(long)]
    take: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EnergyReport {
    #[arg(long)]
    coeffs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Labels for a coefficient batch: an IDX label file sliced like the batch.
#[derive(Args, Debug)]
struct LabelSource {
    /// IDX label file; overrides labels stored in the batch.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Offset of the batch's first item in the label file.
    #[arg(long, default_value_t = 0)]
    label_skip: usize,
}

#[derive(Args, Debug)]
struct Train {
    #[arg(long)]
    coeffs: PathBuf,
    #[command(flatten)]
    labels: LabelSource,
    /// Candidate dimensions, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = wavescat::classifier::DEFAULT_D_GRID.to_vec())]
    d_grid: Vec<usize>,
    #[arg(long, default_value_t = wavescat::classifier::DEFAULT_HOLDOUT)]
    holdout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cross-validation and diagnostics CSV (default: stdout).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct Evaluate {
    #[arg(long)]
    coeffs: PathBuf,
    #[command(flatten)]
    labels: LabelSource,
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TextureCompare {
    /// Directory of realizations of the first process.
    #[arg(long)]
    a: PathBuf,
    /// Directory of realizations of the reference process.
    #[arg(
        long,
        required_unless_present = "phase_randomize",
        conflicts_with = "phase_randomize"
    )]
    b: Option<PathBuf>,
    /// Use phase-randomized copies of `--a` as the reference process.
    #[arg(long)]
    phase_randomize: bool,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2])]
    orders: Vec<usize>,
    /// J (default: log2 of the image width).
    #[arg(long)]
    scales: Option<usize>,
    #[arg(long, default_value_t = wavescat::filterbank::DEFAULT_ORIENTATIONS)]
    orientations: usize,
    #[arg(long, default_value = "0.5")]
    alpha: Alpha,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct Display {
    #[arg(long)]
    coeffs: PathBuf,
    /// Item of the batch to display.
    #[arg(long, default_value_t = 0)]
    item: usize,
    /// Coefficient grid position `col,row`.
    #[arg(long, value_parser = parse_position, default_value = "0,0")]
    position: (usize, usize),
    /// Side of each panel in pixels.
    #[arg(long, default_value_t = 128)]
    panel: usize,
    #[arg(long)]
    out: PathBuf,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let dims = match s.split_once(['x', 'X']) {
        Some((w, h)) => (w.parse(), h.parse()),
        None => (s.parse(), s.parse()),
    };
    match dims {
        (Ok(w), Ok(h)) => Ok((w, h)),
        _ => Err(format!("expected N or WxH, got '{s}'")),
    }
}

fn parse_position(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected col,row, got '{s}'"))?;
    match (a.trim().parse(), b.trim().parse()) {
        (Ok(c), Ok(r)) => Ok((c, r)),
        _ => Err(format!("expected col,row, got '{s}'")),
    }
}

fn thread_count(flag: Option<usize>) -> anyhow::Result<Option<usize>> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .map_err(|_| anyhow::anyhow!("{THREADS_ENV}='{v}' is not a thread count"))?,
            ),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        anyhow::bail!("thread count must be positive");
    }
    Ok(n)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = thread_count(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.command {
        Command::BuildFilters(a) => commands::build_filters(a),
        Command::Transform(a) => commands::transform(a),
        Command::EnergyReport(a) => commands::energy_report(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::TextureCompare(a) => commands::texture_compare(a),
        Command::Display(a) => commands::display(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
