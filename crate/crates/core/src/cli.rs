//! Command line interface with four subcommands: `condition`, `ccdf`,
//! `tailfit`, and `perturb`.
//!
//! Exit codes: 0 on success, 2 for invalid usage or unreadable input, 3
//! when a statistic is undefined (empty distribution or too few points in
//! the fitting window).

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::condition::{condition_number, terracini_matrix};
use crate::error::{Error, Result};
use crate::experiments::{
    default_window, estimate_ccdf, fit_tail_points, perturbation_sweep, read_ccdf_csv,
    sample_condition_numbers, write_ccdf_csv, write_ccdf_sidecar, write_perturb_csv,
    write_tailfit_json,
};
use crate::sampling::{
    derive_stream, illposed_shared_first_factor, illposed_shared_third_factor,
    random_rank1_tuple, SampleSpec, DOMAIN_ANCHOR,
};
use crate::tensor::{Rank1Tensor, Rank1Tuple, TensorFormat};

#[derive(Parser)]
#[command(
    name = "cpdlab",
    version,
    about = "Geometric condition numbers of tensor rank decompositions"
)]
struct Cli {
    /// Worker threads (default: CPDLAB_THREADS, then all cores). Results
    /// do not depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Condition number of one rank-1 tuple
    Condition(ConditionArgs),
    /// Monte Carlo ccdf of kappa^power over random tuples
    Ccdf(CcdfArgs),
    /// Power-law fit of a ccdf tail
    Tailfit(TailfitArgs),
    /// Perturbation sweep around ill-posed anchors
    Perturb(PerturbArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum IllposedKind {
    /// Last term reuses the first term's mode-1 factor
    SharedFirst,
    /// Last term reuses the first term's mode-3 factor
    SharedThird,
}

#[derive(Clone, Copy)]
enum PowerArg {
    Auto,
    Fixed(u32),
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["random", "illposed", "input"])))]
struct ConditionArgs {
    /// Tensor format as comma-separated dimensions, e.g. 7,7,2
    #[arg(long, value_parser = parse_format, default_value = "7,7,2")]
    format: TensorFormat,
    /// Number of rank-1 terms
    #[arg(long, default_value_t = 7)]
    r: usize,
    /// Draw the tuple from seeded Gaussian factors
    #[arg(long)]
    random: bool,
    /// Build an ill-posed tuple with a shared factor
    #[arg(long, value_enum)]
    illposed: Option<IllposedKind>,
    /// Read factors from a CSV file: r * d rows, one factor per row, terms
    /// in order with modes 1..d inside each term
    #[arg(long = "in", value_name = "PATH")]
    input: Option<PathBuf>,
    /// Master seed, decimal or 0x-prefixed hex
    #[arg(long, value_parser = parse_seed, default_value = "42")]
    seed: u64,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dump the Terracini matrix as CSV
    #[arg(long, value_name = "PATH")]
    dump_terracini: Option<PathBuf>,
}

#[derive(Args)]
struct CcdfArgs {
    /// Tensor format as comma-separated dimensions
    #[arg(long, value_parser = parse_format, default_value = "7,7,2")]
    format: TensorFormat,
    /// Number of rank-1 terms
    #[arg(long, default_value_t = 7)]
    r: usize,
    /// Number of Monte Carlo samples (at least 100)
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(100..))]
    count: u64,
    /// Master seed, decimal or 0x-prefixed hex
    #[arg(long, value_parser = parse_seed, default_value = "42")]
    seed: u64,
    /// Exponent applied to kappa; "auto" means the last dimension minus 1
    #[arg(long, default_value = "auto", value_parser = parse_power)]
    power: PowerArg,
    /// Output CSV path; a JSON sidecar lands next to it
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TailfitArgs {
    /// Fit an existing ccdf CSV (with its JSON sidecar next to it);
    /// otherwise a ccdf is generated in memory from the sampling flags
    #[arg(long = "in", value_name = "PATH")]
    input: Option<PathBuf>,
    /// Ccdf window as low,high; defaults to a window derived from the
    /// sample count
    #[arg(long, value_parser = parse_window)]
    window: Option<(f64, f64)>,
    /// Tensor format as comma-separated dimensions
    #[arg(long, value_parser = parse_format, default_value = "7,7,2")]
    format: TensorFormat,
    /// Number of rank-1 terms
    #[arg(long, default_value_t = 7)]
    r: usize,
    /// Number of Monte Carlo samples (at least 100)
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(100..))]
    count: u64,
    /// Master seed, decimal or 0x-prefixed hex
    #[arg(long, value_parser = parse_seed, default_value = "42")]
    seed: u64,
    /// Exponent applied to kappa; "auto" means the last dimension minus 1
    #[arg(long, default_value = "auto", value_parser = parse_power)]
    power: PowerArg,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PerturbArgs {
    /// Tensor format as comma-separated dimensions (order 3 only)
    #[arg(long, value_parser = parse_format, default_value = "7,7,2")]
    format: TensorFormat,
    /// Number of rank-1 terms (at least 2)
    #[arg(long, default_value_t = 7)]
    r: usize,
    /// Number of ill-posed anchor tuples
    #[arg(long, default_value_t = 20)]
    anchors: usize,
    /// Perturbations per anchor
    #[arg(long, default_value_t = 50)]
    perturbs: usize,
    /// Perturbation scale
    #[arg(long, default_value_t = 1e-2)]
    scale: f64,
    /// Master seed, decimal or 0x-prefixed hex
    #[arg(long, value_parser = parse_seed, default_value = "42")]
    seed: u64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

fn parse_format(s: &str) -> std::result::Result<TensorFormat, String> {
    let dims = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| format!("invalid dimension `{p}`"))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    TensorFormat::new(dims).map_err(|e| e.to_string())
}

fn parse_seed(s: &str) -> std::result::Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|_| format!("invalid seed `{s}`; expected decimal or 0x-prefixed hex"))
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected `low,high`, got `{s}`"));
    }
    let low: f64 = parts[0].trim().parse().map_err(|_| format!("invalid window bound `{}`", parts[0]))?;
    let high: f64 = parts[1].trim().parse().map_err(|_| format!("invalid window bound `{}`", parts[1]))?;
    if !(low > 0.0 && low <= high && high <= 1.0) {
        return Err(format!("window must satisfy 0 < low <= high <= 1, got ({low}, {high})"));
    }
    Ok((low, high))
}

fn parse_power(s: &str) -> std::result::Result<PowerArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(PowerArg::Auto);
    }
    match s.parse::<u32>() {
        Ok(k) if k >= 1 => Ok(PowerArg::Fixed(k)),
        _ => Err(format!("invalid power `{s}`; expected `auto` or an integer >= 1")),
    }
}

fn resolve_power(p: PowerArg, format: &TensorFormat) -> u32 {
    match p {
        PowerArg::Fixed(k) => k,
        PowerArg::Auto => {
            let last = *format.dims().last().expect("formats are nonempty");
            last.saturating_sub(1).max(1) as u32
        }
    }
}

fn file_err(action: &str, path: &Path, e: impl std::fmt::Display) -> Error {
    Error::InvalidArgument(format!("failed to {action} {}: {e}", path.display()))
}

fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("CPDLAB_THREADS") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| {
                Error::InvalidArgument(format!(
                    "CPDLAB_THREADS must be a positive integer, got `{s}`"
                ))
            }),
        Err(_) => Ok(None),
    }
}

#[derive(Serialize)]
struct ConditionJson {
    /// Finite condition number, or null when infinite.
    kappa: Option<f64>,
    sigma_min: f64,
    rows: usize,
    cols: usize,
    infinite: bool,
    shape_forced_infinite: bool,
}

fn write_json_report<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let f = File::create(path).map_err(|e| file_err("create", path, e))?;
            let mut w = BufWriter::new(f);
            serde_json::to_writer_pretty(&mut w, value)
                .map_err(|e| file_err("write", path, e))?;
            writeln!(w).map_err(|e| file_err("write", path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, value)
                .map_err(|e| Error::InvalidArgument(format!("failed to write report: {e}")))?;
            writeln!(w)
                .map_err(|e| Error::InvalidArgument(format!("failed to write report: {e}")))
        }
    }
}

fn read_factor_csv(path: &Path, format: &TensorFormat, r: usize) -> Result<Rank1Tuple> {
    let f = File::open(path).map_err(|e| file_err("open", path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(BufReader::new(f));
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| file_err("read", path, e))?;
        if rec.iter().all(|s| s.trim().is_empty()) {
            continue;
        }
        let row = rec
            .iter()
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| {
                    Error::UnsupportedFormat(format!(
                        "non-numeric entry `{s}` in factor file {}",
                        path.display()
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let d = format.order();
    if rows.len() != r * d {
        return Err(Error::UnsupportedFormat(format!(
            "factor file {} has {} rows, expected r * d = {}",
            path.display(),
            rows.len(),
            r * d
        )));
    }
    let dims = format.dims();
    let mut terms = Vec::with_capacity(r);
    for t in 0..r {
        let mut factors = Vec::with_capacity(d);
        for (k, &m) in dims.iter().enumerate() {
            let row = &rows[t * d + k];
            if row.len() != m {
                return Err(Error::UnsupportedFormat(format!(
                    "row {} of {} has {} entries, expected {} for mode {}",
                    t * d + k + 1,
                    path.display(),
                    row.len(),
                    m,
                    k + 1
                )));
            }
            factors.push(row.clone());
        }
        terms.push(Rank1Tensor::new(factors)?);
    }
    Rank1Tuple::new(format.clone(), terms)
}

fn cmd_condition(args: ConditionArgs) -> Result<()> {
    let tuple = if args.random {
        let spec = SampleSpec::new(args.format.clone(), args.r, args.seed, 1)?;
        random_rank1_tuple(&spec, 0)?
    } else if let Some(kind) = args.illposed {
        let mut rng = derive_stream(args.seed, DOMAIN_ANCHOR, 0, 0, 0);
        match kind {
            IllposedKind::SharedFirst => {
                illposed_shared_first_factor(&args.format, args.r, &mut rng)?
            }
            IllposedKind::SharedThird => {
                illposed_shared_third_factor(&args.format, args.r, &mut rng)?
            }
        }
    } else {
        let path = args.input.as_ref().expect("clap enforces one source");
        read_factor_csv(path, &args.format, args.r)?
    };
    let result = condition_number(&tuple)?;
    if let Some(path) = &args.dump_terracini {
        let tm = terracini_matrix(&tuple)?;
        let f = File::create(path).map_err(|e| file_err("create", path, e))?;
        tm.write_csv(BufWriter::new(f))
            .map_err(|e| file_err("write", path, e))?;
    }
    let report = ConditionJson {
        kappa: result.kappa.finite(),
        sigma_min: result.sigma_min,
        rows: result.rows,
        cols: result.cols,
        infinite: result.is_infinite(),
        shape_forced_infinite: result.shape_forced_infinite,
    };
    write_json_report(&report, args.out.as_deref())
}

fn cmd_ccdf(args: CcdfArgs) -> Result<()> {
    let power = resolve_power(args.power, &args.format);
    let spec = SampleSpec::new(args.format, args.r, args.seed, args.count as usize)?;
    let samples = sample_condition_numbers(&spec)?;
    let table = estimate_ccdf(&samples, power)?;
    let csv_file = File::create(&args.out).map_err(|e| file_err("create", &args.out, e))?;
    write_ccdf_csv(&table, BufWriter::new(csv_file))?;
    let sidecar_path = args.out.with_extension("json");
    let sidecar_file =
        File::create(&sidecar_path).map_err(|e| file_err("create", &sidecar_path, e))?;
    write_ccdf_sidecar(&table, &spec, BufWriter::new(sidecar_file))?;
    eprintln!(
        "ccdf: {} samples, {} infinite; mean kappa^{} over finite samples = {:.6e}",
        table.total(),
        table.infinite_count(),
        power,
        table.finite_mean()
    );
    Ok(())
}

#[derive(Deserialize)]
struct SidecarIn {
    total: usize,
    power: u32,
}

fn read_sidecar(path: &Path) -> Option<SidecarIn> {
    let f = File::open(path).ok()?;
    serde_json::from_reader(BufReader::new(f)).ok()
}

/// Below 10^4 samples the generalized default window is empty (discarding
/// the 100 largest values already reaches past the ccdf = 1e-2 cutoff), so
/// the 10-point fit minimum is unreachable without an explicit window.
fn derived_window(total: usize) -> Result<(f64, f64)> {
    let (lo, hi) = default_window(total);
    if lo > hi {
        eprintln!("tailfit: {total} samples leave no default tail window; pass --window lo,hi");
        return Err(Error::InsufficientData { need: 10, got: 0 });
    }
    Ok((lo, hi))
}

fn cmd_tailfit(args: TailfitArgs) -> Result<()> {
    let (xs, ccdf, window, power) = match &args.input {
        Some(path) => {
            let f = File::open(path).map_err(|e| file_err("open", path, e))?;
            let (xs, ccdf) = read_ccdf_csv(BufReader::new(f))?;
            let sidecar_path = path.with_extension("json");
            let sidecar = read_sidecar(&sidecar_path);
            let window = match (args.window, &sidecar) {
                (Some(w), _) => w,
                (None, Some(s)) => derived_window(s.total)?,
                (None, None) => {
                    return Err(Error::InvalidArgument(format!(
                        "no sidecar found at {}; pass an explicit --window",
                        sidecar_path.display()
                    )))
                }
            };
            (xs, ccdf, window, sidecar.map(|s| s.power))
        }
        None => {
            let power = resolve_power(args.power, &args.format);
            let spec =
                SampleSpec::new(args.format.clone(), args.r, args.seed, args.count as usize)?;
            let samples = sample_condition_numbers(&spec)?;
            let table = estimate_ccdf(&samples, power)?;
            let window = match args.window {
                Some(w) => w,
                None => derived_window(table.total())?,
            };
            (table.xs().to_vec(), table.ccdf().to_vec(), window, Some(power))
        }
    };
    let fit = fit_tail_points(&xs, &ccdf, window)?;
    match power {
        Some(k) => eprintln!(
            "tail fit: b = {:.5} +/- {:.5}; E[kappa^j] finite for j < {:.3}",
            fit.b,
            fit.b_stderr,
            k as f64 * fit.b
        ),
        None => eprintln!("tail fit: b = {:.5} +/- {:.5}", fit.b, fit.b_stderr),
    }
    match args.out.as_deref() {
        Some(path) => {
            let f = File::create(path).map_err(|e| file_err("create", path, e))?;
            write_tailfit_json(&fit, BufWriter::new(f))
        }
        None => {
            let stdout = io::stdout();
            write_tailfit_json(&fit, stdout.lock())
        }
    }
}

fn cmd_perturb(args: PerturbArgs) -> Result<()> {
    let records = perturbation_sweep(
        &args.format,
        args.r,
        args.anchors,
        args.perturbs,
        args.scale,
        args.seed,
    )?;
    for rec in &records {
        if rec.inv_kappa > rec.dist_w + 1e-10 {
            eprintln!(
                "internal error: distance bound violated at anchor {} perturbation {}: \
                 1/kappa = {} exceeds dist_w = {}",
                rec.anchor_index, rec.perturb_index, rec.inv_kappa, rec.dist_w
            );
            std::process::exit(1);
        }
    }
    let f = File::create(&args.out).map_err(|e| file_err("create", &args.out, e))?;
    write_perturb_csv(&records, BufWriter::new(f))?;
    eprintln!(
        "perturb: {} rows ({} anchors x {} perturbations), scale {}",
        records.len(),
        args.anchors,
        args.perturbs,
        args.scale
    );
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(t) = resolve_threads(cli.threads)? {
        if t == 0 {
            return Err(Error::InvalidArgument("thread count must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| {
                Error::InvalidArgument(format!("failed to configure thread pool: {e}"))
            })?;
    }
    match cli.command {
        Command::Condition(a) => cmd_condition(a),
        Command::Ccdf(a) => cmd_ccdf(a),
        Command::Tailfit(a) => cmd_tailfit(a),
        Command::Perturb(a) => cmd_perturb(a),
    }
}

/// Parses arguments, runs the selected subcommand, and returns the process
/// exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::EmptyDistribution | Error::InsufficientData { .. } => 3,
                _ => 2,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_parser_accepts_decimal_and_hex() {
        assert_eq!(parse_seed("42").unwrap(), 42);
        assert_eq!(parse_seed("0x2a").unwrap(), 42);
        assert_eq!(parse_seed("0X2A").unwrap(), 42);
        assert!(parse_seed("forty-two").is_err());
        assert!(parse_seed("-3").is_err());
    }

    #[test]
    fn format_parser_validates_dimensions() {
        assert_eq!(parse_format("7,7,2").unwrap().dims(), &[7, 7, 2]);
        assert!(parse_format("7,0,2").is_err());
        assert!(parse_format("7,x").is_err());
    }

    #[test]
    fn window_parser_checks_bounds() {
        assert_eq!(parse_window("1e-5,1e-2").unwrap(), (1e-5, 1e-2));
        assert!(parse_window("0,0.5").is_err());
        assert!(parse_window("0.5,0.1").is_err());
        assert!(parse_window("0.1").is_err());
    }

    #[test]
    fn power_parser_handles_auto() {
        assert!(matches!(parse_power("auto").unwrap(), PowerArg::Auto));
        assert!(matches!(parse_power("3").unwrap(), PowerArg::Fixed(3)));
        assert!(parse_power("0").is_err());
        let format = TensorFormat::new(vec![7, 7, 5]).unwrap();
        assert_eq!(resolve_power(PowerArg::Auto, &format), 4);
        assert_eq!(resolve_power(PowerArg::Fixed(2), &format), 2);
    }

    #[test]
    fn cli_declaration_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
