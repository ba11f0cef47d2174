use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use idsmark::decoder::{self, DecoderKind};
use idsmark::experiment::{
    derive_rng, error_level_analysis, plots, ps_effect_analysis, read_constant_csv,
    read_matrix_file, read_overall_csv, replay_run, simulate, sweep_constant, sweep_overall,
    write_constant_csv, write_error_level_csv, write_matrix_file, write_overall_csv,
    write_ps_effect_csv, ConstantRow, ExperimentConfig, MatrixFile, Stream,
};
use idsmark::markov::{band_by_id, band_for_target, generate_matrix_for_entropy};
use idsmark::Error;

#[derive(Parser)]
#[command(
    name = "idsmark",
    version,
    about = "Watermark-code simulation over an insertion/deletion/substitution channel"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a transition matrix pinned to an entropy target and save it
    /// as JSON.
    GenMatrix(GenMatrixArgs),
    /// Run repeated transmissions of a stored matrix, writing per-run rows
    /// to constant.csv.
    Simulate(SimulateArgs),
    /// Sweep the entropy grid with fresh matrices and watermarks per run,
    /// writing metric means to overall.csv.
    SweepOverall(SweepOverallArgs),
    /// Sweep the entropy grid with one matrix and one watermark per target,
    /// writing per-run rows to constant.csv.
    SweepConstant(SweepConstantArgs),
    /// Count decoder wins per realized error level from constant.csv,
    /// writing errors.csv.
    AnalyzeErrors(AnalyzeArgs),
    /// Average decoder error fractions per realized substitution count from
    /// constant.csv, writing ps_effect.csv.
    AnalyzePs(AnalyzeArgs),
    /// Render SVG charts of overall.csv.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Full-scale sweep: 30 entropy targets, 20 matrices of 100 runs.
    Paper,
    /// Reduced sweep: 4 targets, 5 matrices of 50 runs.
    Desk,
}

#[derive(Args)]
struct CommonOpts {
    /// Starting configuration.
    #[arg(long, value_enum, default_value_t = Preset::Paper)]
    preset: Preset,
    /// JSON file whose top-level fields override the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configuration's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configuration's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the decoder list, comma separated (dm1, dm2, fsmc).
    #[arg(long, value_delimiter = ',', value_parser = parse_decoder)]
    decoders: Option<Vec<DecoderKind>>,
}

#[derive(Args)]
struct GenMatrixArgs {
    /// Average-entropy target in bits per step.
    #[arg(long)]
    target: f64,
    /// Acceptable distance from the target.
    #[arg(long, default_value_t = 0.001)]
    tol: f64,
    /// Band to draw entries from (1-3); inferred from the target when
    /// omitted.
    #[arg(long)]
    band: Option<u8>,
    /// Seed for the generation stream.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Rejection-sampling budget.
    #[arg(long, default_value_t = 100_000)]
    max_attempts: usize,
    /// Output path for the matrix file.
    #[arg(long, default_value = "matrix.json")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Matrix file produced by gen-matrix.
    #[arg(long)]
    matrix: PathBuf,
    /// Number of independent transmissions.
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Also dump the first run's lattices to lattice_<decoder>.csv.
    #[arg(long)]
    dump_lattice: bool,
    /// Exit with an error when the fraction of failed runs exceeds this.
    #[arg(long, default_value_t = 1.0)]
    max_failure_rate: f64,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct SweepOverallArgs {
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct SweepConstantArgs {
    /// Exit with an error when the fraction of failed runs exceeds this.
    #[arg(long, default_value_t = 1.0)]
    max_failure_rate: f64,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Constant-sweep CSV to analyze; defaults to <out>/constant.csv.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct PlotArgs {
    /// Overall-sweep CSV to plot; defaults to <out>/overall.csv.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOpts,
}

fn parse_decoder(s: &str) -> Result<DecoderKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failures split by exit code: usage errors exit 1, runtime errors exit 2.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenMatrix(args) => gen_matrix(args),
        Command::Simulate(args) => simulate_cmd(args),
        Command::SweepOverall(args) => sweep_overall_cmd(args),
        Command::SweepConstant(args) => sweep_constant_cmd(args),
        Command::AnalyzeErrors(args) => analyze_errors_cmd(args),
        Command::AnalyzePs(args) => analyze_ps_cmd(args),
        Command::Plot(args) => plot_cmd(args),
    }
}

/// Preset, then JSON overrides, then individual flags; validated last.
fn resolve_config(common: &CommonOpts) -> Result<ExperimentConfig, Failure> {
    let base = match common.preset {
        Preset::Paper => ExperimentConfig::paper(),
        Preset::Desk => ExperimentConfig::desk(),
    };
    let mut merged = serde_json::to_value(&base).map_err(Error::from)?;
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let overlay: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
            Failure::Usage(format!("config {} is not valid JSON: {e}", path.display()))
        })?;
        let serde_json::Value::Object(overlay) = overlay else {
            return Err(Failure::Usage(format!(
                "config {} must be a JSON object",
                path.display()
            )));
        };
        let target = merged
            .as_object_mut()
            .expect("config serializes to an object");
        for (key, value) in overlay {
            target.insert(key, value);
        }
    }
    let mut cfg: ExperimentConfig = serde_json::from_value(merged)
        .map_err(|e| Failure::Usage(format!("invalid config: {e}")))?;
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(decoders) = &common.decoders {
        cfg.decoders = decoders.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn gen_matrix(args: GenMatrixArgs) -> Result<(), Failure> {
    let band = match args.band {
        Some(id) => band_by_id(id)
            .ok_or_else(|| Failure::Usage(format!("unknown band {id}; bands are 1-3")))?,
        None => band_for_target(args.target).ok_or_else(|| {
            Failure::Usage(format!(
                "target {} is outside every band; pass --band to force one",
                args.target
            ))
        })?,
    };
    let mut rng = derive_rng(args.seed, 0, 0, Stream::Matrix, 0);
    let (matrix, _, entropy) =
        generate_matrix_for_entropy(args.target, args.tol, &band, &mut rng, args.max_attempts)?;
    let file = MatrixFile {
        matrix,
        entropy,
        target: args.target,
        band: band.id,
    };
    write_matrix_file(&args.out, &file)?;
    println!(
        "wrote {} (entropy {entropy:.6}, band {})",
        args.out.display(),
        band.id
    );
    Ok(())
}

fn failure_rate(rows: &[ConstantRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| r.failed).count() as f64 / rows.len() as f64
}

fn check_failure_rate(rows: &[ConstantRow], max: f64) -> Result<(), Failure> {
    let rate = failure_rate(rows);
    if rate > max {
        return Err(Failure::Runtime(format!(
            "decoder failure rate {rate:.4} exceeds the allowed {max}"
        )));
    }
    Ok(())
}

fn simulate_cmd(args: SimulateArgs) -> Result<(), Failure> {
    let cfg = resolve_config(&args.common)?;
    let file = read_matrix_file(&args.matrix)?;
    let rows = simulate(
        &file,
        args.runs,
        cfg.base_seed,
        cfg.message_bits,
        cfg.i_m,
        &cfg.decoders,
    )?;
    let path = write_constant_csv(&cfg.out_dir, &rows)?;
    println!(
        "wrote {} ({} rows, failure rate {:.4})",
        path.display(),
        rows.len(),
        failure_rate(&rows)
    );
    if args.dump_lattice {
        dump_lattices(&cfg, &file)?;
    }
    check_failure_rate(&rows, args.max_failure_rate)
}

/// Writes the first run's filled lattice per decoder, for inspection.
fn dump_lattices(cfg: &ExperimentConfig, file: &MatrixFile) -> Result<(), Failure> {
    let (bundle, watermark, record) =
        replay_run(file, cfg.base_seed, cfg.message_bits, cfg.i_m, 0)?;
    for &kind in &cfg.decoders {
        let lattice = match decoder::decode(
            kind,
            &bundle.params,
            &bundle.a3,
            &record.received,
            &watermark,
        ) {
            Ok(lattice) => lattice,
            Err(Error::DecoderFailure { pass, column }) => {
                eprintln!("warning: {kind} failed in the {pass} pass at column {column}; no dump");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let path = cfg.out_dir.join(format!("lattice_{kind}.csv"));
        let mut out = fs::File::create(&path).map_err(Error::from)?;
        lattice.dump_csv(&mut out)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn sweep_overall_cmd(args: SweepOverallArgs) -> Result<(), Failure> {
    let cfg = resolve_config(&args.common)?;
    let rows = sweep_overall(&cfg)?;
    let path = write_overall_csv(&cfg.out_dir, &rows)?;
    println!("wrote {} ({} rows)", path.display(), rows.len());
    Ok(())
}

fn sweep_constant_cmd(args: SweepConstantArgs) -> Result<(), Failure> {
    let cfg = resolve_config(&args.common)?;
    let rows = sweep_constant(&cfg)?;
    let path = write_constant_csv(&cfg.out_dir, &rows)?;
    println!(
        "wrote {} ({} rows, failure rate {:.4})",
        path.display(),
        rows.len(),
        failure_rate(&rows)
    );
    check_failure_rate(&rows, args.max_failure_rate)
}

fn analyze_errors_cmd(args: AnalyzeArgs) -> Result<(), Failure> {
    let cfg = resolve_config(&args.common)?;
    let input = args
        .input
        .unwrap_or_else(|| cfg.out_dir.join("constant.csv"));
    let rows = read_constant_csv(&input)?;
    let table = error_level_analysis(&cfg, &rows)?;
    let path = write_error_level_csv(&cfg.out_dir, &table)?;
    println!("wrote {} ({} rows)", path.display(), table.len());
    Ok(())
}

fn analyze_ps_cmd(args: AnalyzeArgs) -> Result<(), Failure> {
    let cfg = resolve_config(&args.common)?;
    let input = args
        .input
        .unwrap_or_else(|| cfg.out_dir.join("constant.csv"));
    let rows = read_constant_csv(&input)?;
    let table = ps_effect_analysis(&cfg, &rows)?;
    let path = write_ps_effect_csv(&cfg.out_dir, &table)?;
    println!("wrote {} ({} rows)", path.display(), table.len());
    Ok(())
}

fn plot_cmd(args: PlotArgs) -> Result<(), Failure> {
    let cfg = resolve_config(&args.common)?;
    let input = args
        .input
        .unwrap_or_else(|| cfg.out_dir.join("overall.csv"));
    let rows = read_overall_csv(&input)?;
    let paths = plots::emit_plots(&rows, &cfg.out_dir)?;
    let names: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    println!("wrote {}", names.join(", "));
    Ok(())
}
