//! Command-line front end: generate prefractals, compute spectra, classify
//! modes, evaluate Green's functions and emit dimension reports.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fractal_drum::diaperiodic::classify_spectrum;
use fractal_drum::dimension::{dimension_report, DimensionReport, ReportParams, SpectralMode};
use fractal_drum::green::{green_renormalized, GreenEvaluator, GreenQuery};
use fractal_drum::grid::{rasterize_prefractal, refine_to_grid, GridDomain};
use fractal_drum::ifs::{load_ifs, IteratedFunctionSystem};
use fractal_drum::presets;
use fractal_drum::spectrum::{
    assemble_dirichlet_laplacian, full_spectrum, partial_spectrum_with, LanczosOptions,
    MagnitudeConvention, RawSpectrum, Spectrum,
};
use fractal_drum::Error;

#[derive(Parser)]
#[command(name = "fractal-drum", version, about = "Prefractal Laplacian spectra and dimensions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize a prefractal and write its cell set
    Gen(GenArgs),
    /// Compute a Dirichlet spectrum with multiplicities and plateau data
    Spectrum(SpectrumArgs),
    /// Split a spectrum into diaperiodic and interconnective parts
    Classify(ClassifyArgs),
    /// Evaluate Green's function values over a batch of points
    Green(GreenArgs),
    /// Report spectral, box-counting and similarity dimensions
    Dims(DimsArgs),
}

#[derive(Args)]
struct IfsArgs {
    /// Preset name (interval, cantor, carpet, gasket) or an IFS file path
    #[arg(long)]
    ifs: String,
    /// Lattice base; defaults to the preset's natural base
    #[arg(long)]
    base: Option<u32>,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    ifs: IfsArgs,
    /// Prefractal level N
    #[arg(long, default_value_t = 1)]
    level: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    /// kappa = sqrt(-lambda)
    Wavenumber,
    /// kappa = |lambda|
    EigenvalueModulus,
}

impl From<ConventionArg> for MagnitudeConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Wavenumber => MagnitudeConvention::Wavenumber,
            ConventionArg::EigenvalueModulus => MagnitudeConvention::EigenvalueModulus,
        }
    }
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    ifs: IfsArgs,
    /// Prefractal level N
    #[arg(long, default_value_t = 1)]
    level: u32,
    /// Grid refinement per cell side
    #[arg(long, default_value_t = 8)]
    refine: u32,
    /// Keep only the k smallest-magnitude eigenpairs (iterative solver)
    #[arg(long)]
    partial: Option<usize>,
    /// Clustering tolerance for multiplicities
    #[arg(long, default_value_t = 1e-3)]
    cluster_tol: f64,
    /// Magnitude convention
    #[arg(long, value_enum, default_value_t = ConventionArg::Wavenumber)]
    convention: ConventionArg,
    /// Seed for iterative-solver start vectors
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    ifs: IfsArgs,
    /// Child prefractal level N (parent is N-1)
    #[arg(long, default_value_t = 1)]
    level: u32,
    /// Grid refinement per cell side
    #[arg(long, default_value_t = 8)]
    refine: u32,
    /// Clustering tolerance for multiplicities
    #[arg(long, default_value_t = 1e-3)]
    cluster_tol: f64,
    /// Relative tolerance for matching rescaled parent magnitudes
    #[arg(long, default_value_t = 5e-2)]
    match_tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum GreenKind {
    Modal,
    Renormalized,
}

#[derive(Args)]
struct GreenArgs {
    #[command(flatten)]
    ifs: IfsArgs,
    /// Prefractal level N
    #[arg(long, default_value_t = 1)]
    level: u32,
    /// Grid refinement per cell side
    #[arg(long, default_value_t = 8)]
    refine: u32,
    /// Batch CSV with rows x...,x'...,lambda
    #[arg(long)]
    batch: PathBuf,
    /// Evaluator: modal sum on level N, or renormalized from level N-1
    #[arg(long, value_enum, default_value_t = GreenKind::Modal)]
    kind: GreenKind,
    /// Modal truncation (defaults to the full computed spectrum)
    #[arg(long)]
    trunc: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Analytic,
    Numeric,
}

#[derive(Args)]
struct DimsArgs {
    #[command(flatten)]
    ifs: IfsArgs,
    /// Spectral estimate: analytic predicted spectrum or numeric eigensolve
    #[arg(long, value_enum, default_value_t = ModeArg::Analytic)]
    mode: ModeArg,
    /// Recursion depth (analytic) or prefractal level (numeric)
    #[arg(long)]
    level: Option<u32>,
    /// Grid refinement per cell side (numeric mode)
    #[arg(long, default_value_t = 8)]
    refine: u32,
    /// Truncation window: number of distinct magnitudes
    #[arg(long, default_value_t = 100)]
    trunc: usize,
    /// Clustering tolerance (numeric mode)
    #[arg(long, default_value_t = 1e-3)]
    cluster_tol: f64,
    /// Deepest box-counting scale, counting k = 1..box-depth
    #[arg(long, default_value_t = 4)]
    box_depth: u32,
    /// Emit the report as JSON instead of key: value text
    #[arg(long)]
    json: bool,
}

fn resolve_ifs(spec: &str, base: Option<u32>) -> Result<(IteratedFunctionSystem, u32), Error> {
    if let Some((ifs, natural_base)) = presets::by_name(spec) {
        return Ok((ifs, base.unwrap_or(natural_base)));
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Error::InvalidArgument(format!(
            "--ifs `{spec}` is neither a preset (interval, cantor, carpet, gasket) \
             nor an existing file"
        )));
    }
    let ifs = load_ifs(path)?;
    let base = base.ok_or_else(|| {
        Error::InvalidArgument("--base is required for file-defined systems".into())
    })?;
    Ok((ifs, base))
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Error> {
    fs::create_dir_all(dir).map_err(|e| {
        Error::InvalidArgument(format!("cannot create --out {}: {e}", dir.display()))
    })?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn computed_spectrum(
    ifs: &IteratedFunctionSystem,
    base: u32,
    level: u32,
    refine: u32,
    partial: Option<usize>,
    seed: u64,
    want_vectors: bool,
) -> Result<(GridDomain, RawSpectrum), Error> {
    let cells = rasterize_prefractal(ifs, level, base)?;
    let grid = refine_to_grid(&cells, refine)?;
    let lap = assemble_dirichlet_laplacian(&grid)?;
    let raw = match partial {
        Some(k) => {
            let opts = LanczosOptions { seed, ..Default::default() };
            partial_spectrum_with(&lap, k, &opts)?
        }
        None => full_spectrum(&lap, want_vectors)?,
    };
    Ok((grid, raw))
}

fn cmd_gen(args: &GenArgs) -> Result<(), Error> {
    let (ifs, base) = resolve_ifs(&args.ifs.ifs, args.ifs.base)?;
    let cells = rasterize_prefractal(&ifs, args.level, base)?;
    let path = write_out(&args.ifs.out, "cells.txt", &cells.to_text())?;
    let expected = (ifs.map_count() as u64).pow(args.level);
    let verdict = if cells.len() as u64 == expected { "ok" } else { "collisions" };
    println!(
        "cells {} expected p^N = {} {} -> {}",
        cells.len(),
        expected,
        verdict,
        path.display()
    );
    Ok(())
}

fn cmd_spectrum(args: &SpectrumArgs) -> Result<(), Error> {
    let (ifs, base) = resolve_ifs(&args.ifs.ifs, args.ifs.base)?;
    let (grid, raw) = computed_spectrum(
        &ifs,
        base,
        args.level,
        args.refine,
        args.partial,
        args.seed,
        false,
    )?;
    let spectrum = Spectrum::from_raw(
        &raw,
        args.convention.into(),
        args.cluster_tol,
        Some(args.level),
        Some(grid.spacing()),
    )?;
    let csv_path = write_out(&args.ifs.out, "spectrum.csv", &spectrum.to_csv())?;

    let mut plateau = String::from("# cumulative_count magnitude\n");
    let mut cum = 0usize;
    for (mag, mul) in spectrum.magnitudes().iter().zip(spectrum.multiplicities()) {
        cum += mul;
        plateau.push_str(&format!("{cum} {mag:.12e}\n"));
    }
    let plateau_path = write_out(&args.ifs.out, "plateau.dat", &plateau)?;
    println!(
        "modes {} clusters {} -> {} and {}",
        spectrum.total_multiplicity(),
        spectrum.len(),
        csv_path.display(),
        plateau_path.display()
    );
    Ok(())
}

fn cmd_classify(args: &ClassifyArgs) -> Result<(), Error> {
    if args.level == 0 {
        return Err(Error::InvalidArgument(
            "classify needs --level >= 1 (the parent is level - 1)".into(),
        ));
    }
    let (ifs, base) = resolve_ifs(&args.ifs.ifs, args.ifs.base)?;
    let build = |level: u32| -> Result<Spectrum, Error> {
        let (grid, raw) = computed_spectrum(&ifs, base, level, args.refine, None, 7, false)?;
        Spectrum::from_raw(
            &raw,
            MagnitudeConvention::Wavenumber,
            args.cluster_tol,
            Some(level),
            Some(grid.spacing()),
        )
    };
    let parent = build(args.level - 1)?;
    let child = build(args.level)?;
    let partition = classify_spectrum(&child, &parent, &ifs.ratios(), args.match_tol);
    let path = write_out(&args.ifs.out, "classification.csv", &partition.to_csv())?;
    println!(
        "diaperiodic {} interconnective {} -> {}",
        partition.diaperiodic_count(),
        partition.interconnective_count(),
        path.display()
    );
    Ok(())
}

fn parse_batch(path: &Path, dim: usize) -> Result<(Vec<String>, Vec<GreenQuery>), Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields[0].parse::<f64>().is_err() && idx == 0 {
            continue; // header row
        }
        if fields.len() != 2 * dim + 1 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!(
                    "expected {} comma-separated fields (x..., x'..., lambda), found {}",
                    2 * dim + 1,
                    fields.len()
                ),
            });
        }
        let values: Result<Vec<f64>, Error> = fields
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: format!("expected a real number, found `{f}`"),
                })
            })
            .collect();
        let values = values?;
        rows.push(GreenQuery {
            x: values[..dim].to_vec(),
            x_prime: values[dim..2 * dim].to_vec(),
            lambda: values[2 * dim],
        });
        lines.push(line.to_string());
    }
    Ok((lines, rows))
}

fn cmd_green(args: &GreenArgs) -> Result<(), Error> {
    let (ifs, base) = resolve_ifs(&args.ifs.ifs, args.ifs.base)?;
    let (lines, queries) = parse_batch(&args.batch, ifs.dim())?;
    let values = match args.kind {
        GreenKind::Modal => {
            let (grid, raw) =
                computed_spectrum(&ifs, base, args.level, args.refine, None, 7, true)?;
            let ev = GreenEvaluator::new(&grid, &raw, args.trunc)?;
            ev.eval_batch(&queries)?
        }
        GreenKind::Renormalized => {
            if args.level == 0 {
                return Err(Error::InvalidArgument(
                    "renormalized evaluation needs --level >= 1 (the parent is level - 1)".into(),
                ));
            }
            let (grid, raw) =
                computed_spectrum(&ifs, base, args.level - 1, args.refine, None, 7, true)?;
            let ev = GreenEvaluator::new(&grid, &raw, args.trunc)?;
            queries
                .iter()
                .map(|q| green_renormalized(&ev, &ifs, &q.x, &q.x_prime, q.lambda))
                .collect::<Result<Vec<f64>, Error>>()?
        }
    };
    let d = ifs.dim();
    let mut out = String::new();
    let coords = |prefix: &str| -> String {
        (0..d).map(|a| format!("{prefix}{a}")).collect::<Vec<_>>().join(",")
    };
    out.push_str(&format!("{},{},lambda,value\n", coords("x"), coords("xp")));
    for (line, value) in lines.iter().zip(&values) {
        out.push_str(&format!("{line},{value:.12e}\n"));
    }
    let path = write_out(&args.ifs.out, "green.csv", &out)?;
    println!("evaluated {} rows -> {}", values.len(), path.display());
    Ok(())
}

fn report_json(report: &DimensionReport) -> String {
    serde_json::json!({
        "spectral_dim": report.spectral_dim,
        "box_dim": report.box_dim,
        "moran_dim": report.moran_dim,
        "levels_used": report.levels_used,
        "truncation": report.truncation,
        "convention": report.convention,
        "mode": report.mode,
        "gaps": {
            "spectral_box": report.gaps.spectral_box,
            "spectral_moran": report.gaps.spectral_moran,
            "box_moran": report.gaps.box_moran,
        },
    })
    .to_string()
}

fn cmd_dims(args: &DimsArgs) -> Result<(), Error> {
    let (ifs, base) = resolve_ifs(&args.ifs.ifs, args.ifs.base)?;
    let mode = match args.mode {
        ModeArg::Analytic => SpectralMode::Analytic { level: args.level.unwrap_or(1000) },
        ModeArg::Numeric => SpectralMode::Numeric {
            level: args.level.unwrap_or(1),
            refine: args.refine,
            cluster_tol: args.cluster_tol,
        },
    };
    let params = ReportParams {
        mode,
        truncation: args.trunc,
        box_depth: args.box_depth,
        initiator_modes: args.trunc.max(120),
    };
    let report = dimension_report(&ifs, base, &params)?;
    let csv = format!("{}\n{}\n", DimensionReport::csv_header(), report.to_csv_row());
    let path = write_out(&args.ifs.out, "dimensions.csv", &csv)?;
    let cells = rasterize_prefractal(&ifs, args.box_depth, base)?;
    let ks: Vec<u32> = (1..=args.box_depth).collect();
    let counts = fractal_drum::grid::box_counts(&cells, &ks)?;
    write_out(&args.ifs.out, "box_counts.csv", &fractal_drum::grid::box_counts_csv(&counts))?;
    if args.json {
        println!("{}", report_json(&report));
    } else {
        print!("{}", report.to_text());
    }
    eprintln!("report -> {}", path.display());
    Ok(())
}

fn run() -> Result<(), Error> {
    match Cli::parse().command {
        Command::Gen(args) => cmd_gen(&args),
        Command::Spectrum(args) => cmd_spectrum(&args),
        Command::Classify(args) => cmd_classify(&args),
        Command::Green(args) => cmd_green(&args),
        Command::Dims(args) => cmd_dims(&args),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
