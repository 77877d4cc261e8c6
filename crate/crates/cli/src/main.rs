//! `polya` — build generator spectra, run the extremal dynamic program,
//! and evaluate the conjecture diagnostics.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O, 3 numerical failure,
//! 4 invariant-audit violation.

mod config;

use clap::{Args, Parser, Subcommand};
use polya_core::diagnostics::{diagnostics_report, weyl_fit, DiagnosticsReport, WeylFit};
use polya_core::extremal::{build_table, BuildOptions, ExtremalTable};
use polya_core::spectrum::{
    build_spectrum, disk_zero_lists, save_spectrum_csv, save_spectrum_to, Bc, GeneratorKind,
    GeneratorSpec, Ratio, Spectrum,
};
use polya_core::table_io::{read_table, write_table};
use polya_core::{Error, Result};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "polya",
    version,
    about = "Extremal eigenvalue tables over unions of scaled generator copies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build generator spectra and write them to disk.
    Spectrum(RunArgs),
    /// Build spectra as needed and write the extremal table.
    Optimize(RunArgs),
    /// Evaluate diagnostics on an existing table file.
    Diagnose(DiagnoseArgs),
    /// Run spectrum, optimize and diagnose in one pipeline.
    Report(RunArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Generator description: square | rect:P:Q | box:R1:...:RD |
    /// disk | file:PATH. Repeatable for multi-generator families.
    #[arg(long = "generator")]
    generators: Vec<String>,

    /// Boundary condition: dirichlet | neumann.
    #[arg(long)]
    bc: Option<String>,

    /// Dimension (boxes only; square, rect and disk are planar).
    #[arg(long)]
    d: Option<u32>,

    /// Number of eigenvalues per spectrum (spectrum subcommand).
    #[arg(long)]
    count: Option<usize>,

    /// Largest rank of the extremal table (optimize/report).
    #[arg(long)]
    kmax: Option<usize>,

    /// Arithmetic mode: auto | exact | float.
    #[arg(long)]
    mode: Option<String>,

    /// Worker threads for the parallel sections (default: all cores).
    #[arg(long)]
    threads: Option<usize>,

    /// Seed for the sampled additivity audit.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (created if missing). For `spectrum` with a
    /// single generator a path ending in .csv is treated as the target
    /// file of the CSV export.
    #[arg(long)]
    out: Option<PathBuf>,

    /// key=value configuration file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Also dump Bessel zero lists (disk generators) as nu,k,zero CSV.
    #[arg(long, default_value_t = false)]
    dump_zeros: bool,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Extremal table CSV (the JSON sidecar must sit next to it).
    #[arg(long)]
    table: PathBuf,

    /// Generator spectrum file used for the Weyl fit (optional).
    #[arg(long)]
    spectrum: Option<PathBuf>,

    /// Seed for the sampled additivity audit.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Fully resolved run settings (flags over config file over defaults).
struct Resolved {
    generators: Vec<String>,
    bc: Bc,
    dimension: u32,
    count: Option<usize>,
    kmax: Option<usize>,
    mode: Mode,
    seed: u64,
    out: PathBuf,
    dump_zeros: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Auto,
    Exact,
    Float,
}

fn resolve(args: &RunArgs) -> Result<Resolved> {
    let file = match &args.config {
        Some(path) => config::load_config(path)?,
        None => config::FileConfig::default(),
    };
    if let Some(threads) = args.threads.or(file.threads) {
        // Ignore failures: the global pool can only be installed once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let generators = if args.generators.is_empty() {
        file.generators.clone()
    } else {
        args.generators.clone()
    };
    if generators.is_empty() {
        return Err(Error::invalid("at least one --generator is required"));
    }
    let bc: Bc = args
        .bc
        .clone()
        .or(file.bc)
        .unwrap_or_else(|| "dirichlet".into())
        .parse()?;
    let mode = match args
        .mode
        .clone()
        .or(file.mode)
        .unwrap_or_else(|| "auto".into())
        .as_str()
    {
        "auto" => Mode::Auto,
        "exact" => Mode::Exact,
        "float" => Mode::Float,
        other => {
            return Err(Error::invalid(format!(
                "unknown mode '{other}' (expected auto, exact or float)"
            )))
        }
    };
    Ok(Resolved {
        generators,
        bc,
        dimension: args.d.or(file.d).unwrap_or(2),
        count: args.count.or(file.count),
        kmax: args.kmax.or(file.kmax),
        mode,
        seed: args.seed.or(file.seed).unwrap_or(0),
        out: args.out.clone().or(file.out).unwrap_or_else(|| ".".into()),
        dump_zeros: args.dump_zeros,
    })
}

fn parse_rational(token: &str) -> Result<(u64, u64)> {
    let (num, den) = match token.split_once('/') {
        Some((a, b)) => (a, b),
        None => (token, "1"),
    };
    let parse = |s: &str| -> Result<u64> {
        s.parse::<u64>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::invalid(format!("'{token}' is not a positive rational")))
    };
    Ok((parse(num)?, parse(den)?))
}

fn parse_generator(token: &str, bc: Bc, dimension: u32) -> Result<GeneratorSpec> {
    if token == "square" {
        if dimension != 2 {
            return Err(Error::invalid("the square generator is planar; use box:... for d > 2"));
        }
        return Ok(GeneratorSpec::square(bc));
    }
    if token == "disk" {
        if dimension != 2 {
            return Err(Error::invalid("the disk generator requires d = 2"));
        }
        return Ok(GeneratorSpec::disk(bc));
    }
    if let Some(rest) = token.strip_prefix("rect:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 2 || dimension != 2 {
            return Err(Error::invalid(format!(
                "rect generator must be rect:<p>:<q> in d = 2, got '{token}'"
            )));
        }
        let p: u64 = parts[0]
            .parse()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::invalid(format!("bad rectangle side '{}'", parts[0])))?;
        let q: u64 = parts[1]
            .parse()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::invalid(format!("bad rectangle side '{}'", parts[1])))?;
        return GeneratorSpec::rectangle(p, q, bc);
    }
    if let Some(rest) = token.strip_prefix("box:") {
        let sides: Vec<&str> = rest.split(':').collect();
        if sides.len() != dimension as usize {
            return Err(Error::invalid(format!(
                "box generator needs {dimension} side ratios, got {}",
                sides.len()
            )));
        }
        let mut side_ratios = Vec::with_capacity(sides.len());
        let mut label = String::from("box");
        for s in &sides {
            let (a, b) = parse_rational(s)?;
            let overflow = || Error::invalid("side ratio overflows the exact key width");
            side_ratios.push(Ratio::new(
                a.checked_mul(a).ok_or_else(overflow)?,
                b.checked_mul(b).ok_or_else(overflow)?,
            )?);
            label.push('_');
            label.push_str(&s.replace('/', "over"));
        }
        return Ok(GeneratorSpec {
            kind: GeneratorKind::Box { side_ratios },
            bc,
            dimension,
            label,
        });
    }
    if let Some(path) = token.strip_prefix("file:") {
        let path = PathBuf::from(path);
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "explicit".into());
        return Ok(GeneratorSpec {
            kind: GeneratorKind::Explicit { path },
            bc,
            dimension,
            label,
        });
    }
    Err(Error::invalid(format!(
        "unknown generator '{token}' (expected square, rect:<p>:<q>, box:..., disk or file:<path>)"
    )))
}

fn parse_generators(resolved: &Resolved) -> Result<Vec<GeneratorSpec>> {
    resolved
        .generators
        .iter()
        .map(|g| parse_generator(g, resolved.bc, resolved.dimension))
        .collect()
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn run_stem(specs: &[GeneratorSpec], bc: Bc) -> String {
    let labels: Vec<&str> = specs.iter().map(|s| s.label.as_str()).collect();
    format!("{}_{bc}", labels.join("+"))
}

fn build_spectra(specs: &[GeneratorSpec], bc: Bc, min_count: usize) -> Result<Vec<Spectrum>> {
    specs
        .iter()
        .map(|spec| {
            let s = build_spectrum(spec, min_count)?;
            if s.len() < min_count {
                return Err(Error::invalid(format!(
                    "spectrum '{}' provides {} eigenvalues but this run requires {min_count}",
                    spec.label,
                    s.len()
                )));
            }
            let _ = bc;
            Ok(s)
        })
        .collect()
}

fn write_spectrum_files(spectrum: &Spectrum, out: &Path) -> Result<()> {
    let base = out.join(format!(
        "{}_{}",
        spectrum.generator.label, spectrum.generator.bc
    ));
    let spec_path = base.with_extension("spectrum");
    save_spectrum_to(spectrum, &spec_path)?;
    let csv_path = base.with_extension("spectrum.csv");
    let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    save_spectrum_csv(spectrum, std::io::BufWriter::new(file)).map_err(|e| Error::io(&csv_path, e))
}

fn cmd_spectrum(resolved: &Resolved) -> Result<()> {
    let count = resolved
        .count
        .or(resolved.kmax)
        .ok_or_else(|| Error::invalid("--count is required for the spectrum command"))?;
    if count == 0 {
        return Err(Error::invalid("--count must be at least 1"));
    }
    let specs = parse_generators(resolved)?;

    // A .csv target with a single generator means "write the CSV export
    // exactly here".
    let single_csv = resolved.out.extension().is_some_and(|e| e == "csv");
    if single_csv {
        if specs.len() != 1 {
            return Err(Error::invalid(
                "a .csv --out target works with exactly one generator; pass a directory instead",
            ));
        }
        let spectrum = build_spectra(&specs, resolved.bc, count)?.remove(0);
        if let Some(parent) = resolved.out.parent().filter(|p| !p.as_os_str().is_empty()) {
            ensure_out_dir(parent)?;
        }
        let file =
            std::fs::File::create(&resolved.out).map_err(|e| Error::io(&resolved.out, e))?;
        save_spectrum_csv(&spectrum, std::io::BufWriter::new(file))
            .map_err(|e| Error::io(&resolved.out, e))?;
        return Ok(());
    }

    ensure_out_dir(&resolved.out)?;
    let spectra = build_spectra(&specs, resolved.bc, count)?;
    for spectrum in &spectra {
        write_spectrum_files(spectrum, &resolved.out)?;
    }
    if resolved.dump_zeros {
        for spec in &specs {
            if matches!(spec.kind, GeneratorKind::Disk) {
                let lists = disk_zero_lists(resolved.bc, count)?;
                let path = resolved
                    .out
                    .join(format!("disk_{}_zeros.csv", resolved.bc));
                let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                let mut w = std::io::BufWriter::new(file);
                writeln!(w, "nu,k,zero").map_err(|e| Error::io(&path, e))?;
                for list in &lists {
                    list.write_csv(&mut w).map_err(|e| Error::io(&path, e))?;
                }
            }
        }
    }
    Ok(())
}

fn required_count(bc: Bc, kmax: usize) -> usize {
    match bc {
        Bc::Dirichlet => kmax,
        Bc::Neumann => kmax + 1,
    }
}

fn build_run_table(resolved: &Resolved, spectra: &[Spectrum]) -> Result<ExtremalTable> {
    let kmax = resolved
        .kmax
        .ok_or_else(|| Error::invalid("--kmax is required"))?;
    if kmax == 0 {
        return Err(Error::invalid("--kmax must be at least 1"));
    }
    if resolved.mode == Mode::Exact {
        let all_boxes = spectra
            .iter()
            .all(|s| matches!(s.generator.kind, GeneratorKind::Box { .. }));
        if !all_boxes || resolved.dimension != 2 {
            return Err(Error::invalid(
                "exact mode requires box generators in d = 2; use --mode float",
            ));
        }
    }

    let mut last_percent = 0usize;
    let mut progress = |done: usize, total: usize| {
        let percent = done * 100 / total;
        if percent > last_percent {
            last_percent = percent;
            eprint!("\roptimize: {percent:3}%");
            if percent == 100 {
                eprintln!();
            }
            let _ = std::io::stderr().flush();
        }
    };
    let table = build_table(
        spectra,
        kmax,
        BuildOptions {
            force_float: resolved.mode == Mode::Float,
            progress: Some(&mut progress),
        },
    )?;
    if resolved.mode == Mode::Exact && table.exact_powers.is_none() {
        return Err(Error::invalid(
            "exact mode was requested but no common integer scale exists; use --mode float",
        ));
    }
    Ok(table)
}

fn cmd_optimize(resolved: &Resolved) -> Result<()> {
    let specs = parse_generators(resolved)?;
    ensure_out_dir(&resolved.out)?;
    let kmax = resolved
        .kmax
        .ok_or_else(|| Error::invalid("--kmax is required for the optimize command"))?;
    let spectra = build_spectra(&specs, resolved.bc, required_count(resolved.bc, kmax))?;
    let table = build_run_table(resolved, &spectra)?;
    let stem = run_stem(&specs, resolved.bc);
    let csv = resolved.out.join(format!("{stem}.table.csv"));
    write_table(&table, &csv)?;
    println!("{}", csv.display());
    Ok(())
}

/// Weyl fit over the top half of the first generator spectrum, when the
/// range is long enough to be meaningful.
fn pipeline_weyl_fit(spectra: &[Spectrum], kmax: usize) -> Option<WeylFit> {
    let first = spectra.first()?;
    let hi = kmax;
    let lo = (kmax / 2).max(1);
    if hi - lo + 1 < 100 {
        return None;
    }
    weyl_fit(first, lo, hi).ok()
}

fn write_diagnostics(report: &DiagnosticsReport, out: &Path, stem: &str) -> Result<PathBuf> {
    ensure_out_dir(out)?;
    let json_path = out.join(format!("{stem}.diagnostics.json"));
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::numerical(format!("diagnostics serialization failed: {e}")))?;
    std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;

    let write_csv = |name: &str, f: &dyn Fn(&mut dyn Write) -> std::io::Result<()>| -> Result<()> {
        let path = out.join(format!("{stem}.{name}.csv"));
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = std::io::BufWriter::new(file);
        f(&mut w).map_err(|e| Error::io(&path, e))
    };
    write_csv("per_k", &|w| report.write_per_k_csv(w))?;
    write_csv("logdensity", &|w| report.write_log_density_csv(w))?;
    write_csv("histogram", &|w| report.write_histogram_csv(w))?;
    Ok(json_path)
}

/// Returns true when an invariant audit flagged violations.
fn diagnose_table(
    table: &ExtremalTable,
    weyl: Option<WeylFit>,
    seed: u64,
    out: &Path,
    stem: &str,
) -> Result<bool> {
    let report = diagnostics_report(table, weyl, seed);
    let json_path = write_diagnostics(&report, out, stem)?;
    println!("{}", json_path.display());
    if report.has_audit_violations() {
        eprintln!(
            "audit violations: {} bound, {} additivity (see {})",
            report.bounds_audit.violation_count,
            report.additivity_audit.violation_count,
            json_path.display()
        );
        for v in report.additivity_audit.violations.iter().take(5) {
            eprintln!(
                "  additivity violated at (j={}, k={}): {} vs {}",
                v.j,
                v.k,
                v.split_power,
                v.table_power
            );
        }
        return Ok(true);
    }
    Ok(false)
}

fn cmd_diagnose(args: &DiagnoseArgs) -> Result<bool> {
    let table = read_table(&args.table)?;
    let weyl = match &args.spectrum {
        Some(path) => {
            let s = polya_core::spectrum::load_spectrum(path, Some((table.bc, table.dimension)))?;
            pipeline_weyl_fit(std::slice::from_ref(&s), table.k_max().min(s.len()))
        }
        None => None,
    };
    let stem = args
        .table
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "table".into());
    let stem = stem.strip_suffix(".table").unwrap_or(&stem).to_string();
    diagnose_table(&table, weyl, args.seed, &args.out, &stem)
}

fn cmd_report(resolved: &Resolved) -> Result<bool> {
    let specs = parse_generators(resolved)?;
    ensure_out_dir(&resolved.out)?;
    let kmax = resolved
        .kmax
        .ok_or_else(|| Error::invalid("--kmax is required for the report command"))?;
    let min_count = required_count(resolved.bc, kmax).max(resolved.count.unwrap_or(0));
    let spectra = build_spectra(&specs, resolved.bc, min_count)?;
    for spectrum in &spectra {
        write_spectrum_files(spectrum, &resolved.out)?;
    }
    let table = build_run_table(resolved, &spectra)?;
    let stem = run_stem(&specs, resolved.bc);
    let csv = resolved.out.join(format!("{stem}.table.csv"));
    write_table(&table, &csv)?;
    println!("{}", csv.display());
    let weyl = pipeline_weyl_fit(&spectra, kmax);
    diagnose_table(&table, weyl, resolved.seed, &resolved.out, &stem)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Invalid(_) => 1,
        Error::Io { .. } | Error::Format { .. } => 2,
        Error::Numerical(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    let outcome: Result<bool> = match &cli.command {
        Command::Spectrum(args) => resolve(args).and_then(|r| cmd_spectrum(&r).map(|_| false)),
        Command::Optimize(args) => resolve(args).and_then(|r| cmd_optimize(&r).map(|_| false)),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Report(args) => resolve(args).and_then(|r| cmd_report(&r)),
    };

    match outcome {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
