//! The `netforge` command line.
//!
//! Exit codes: 0 success, 1 a hard constraint failed verification, 2 the
//! profile is infeasible, 3 an input file could not be parsed or does not
//! match, 4 usage or I/O error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::builder::{build, parse_matrices, BuildError, BuildOptions, GeneratorSet};
use crate::gfield::PrimeBase;
use crate::gfsolve::{export_lp, DEFAULT_BUDGET};
use crate::profile::{format_weight, parse_profile, Profile};
use crate::quality::{discrepancy_sweep, summarize, sweep_csv, SweepOptions};
use crate::sampler::{format_digits, format_points, generate, parse_points};
use crate::verify::verify_profile;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_USAGE: i32 = 4;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "NETFORGE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "netforge", version, about = "Build, sample, verify and measure digital nets from constraint profiles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build generator matrices for a profile.
    Build(BuildArgs),
    /// Generate points from a matrix file.
    Sample(SampleArgs),
    /// Check a matrix file against a profile.
    Verify(VerifyArgs),
    /// Generalized L2 discrepancy of a matrix or point file, as CSV.
    Discrepancy(DiscrepancyArgs),
}

#[derive(Debug, Args)]
struct BuildArgs {
    profile: PathBuf,
    /// Matrix file to write; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Whole-build retries with successive seeds.
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    /// Solver node budget per column.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Directory receiving one LP file per column.
    #[arg(long)]
    emit_lp: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    matrices: PathBuf,
    /// Number of points; all `b^m` when absent.
    #[arg(short, long)]
    n: Option<u64>,
    /// Print the digits of each coordinate instead of decimals.
    #[arg(long)]
    digits: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    matrices: PathBuf,
    profile: PathBuf,
    /// Aligned blocks checked per prefix size; all blocks up to 3^8 points by default, else 64.
    #[arg(long)]
    blocks: Option<u64>,
    /// Also write the per-prefix table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DiscrepancyArgs {
    /// Matrix file (header `b=.. s=.. m=..`) or point file (one point per line).
    input: PathBuf,
    /// One row per pair of dimensions.
    #[arg(long)]
    pairs: bool,
    /// Rows for the leading `b^1, b^2, ...` points.
    #[arg(long)]
    prefix_sweep: bool,
    /// Uniform random sets per row.
    #[arg(long, default_value_t = 64)]
    baselines: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Points used without a sweep; all by default.
    #[arg(short, long)]
    n: Option<usize>,
    /// Base of the prefix sweep for point files.
    #[arg(long, default_value_t = 2)]
    base: u32,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// A failure carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn write_to(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(|e| Failure::new(EXIT_USAGE, format!("write failed: {e}")))
}

fn load_profile(path: &Path) -> Result<Profile, Failure> {
    parse_profile(&read(path)?).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn load_matrices(path: &Path) -> Result<GeneratorSet, Failure> {
    parse_matrices(&read(path)?).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())))
}

/// Runs the command line with `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                EXIT_USAGE
            } else {
                let _ = out.write_all(text.as_bytes());
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::Build(a) => cmd_build(a, out, err),
        Command::Sample(a) => cmd_sample(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Discrepancy(a) => cmd_discrepancy(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

/// Caps the global thread pool from [`THREADS_ENV`] when set.
pub fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn build_summary(g: &GeneratorSet) -> String {
    let mut s = String::new();
    if let Some(p) = &g.provenance {
        s += &format!(
            "# profile sha256 {} seed {} (base seed {}, attempt {})\n",
            p.profile_hash, p.seed, p.base_seed, p.attempts
        );
        for c in &p.columns {
            s += &format!(
                "column {:>2}: hard rows {}, weak satisfied {}/{}, objective {}{}, nodes {}\n",
                c.column,
                c.hard_rows,
                c.weak_satisfied,
                c.weak_total,
                format_weight(&c.objective),
                if c.suboptimal { " (suboptimal)" } else { "" },
                c.nodes
            );
        }
    }
    s
}

fn cmd_build(a: BuildArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let profile = load_profile(&a.profile)?;
    if let Some(dir) = &a.emit_lp {
        fs::create_dir_all(dir).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", dir.display())))?;
    }
    let opts = BuildOptions { seed: a.seed, restarts: a.restarts, budget: a.budget, keep_models: a.emit_lp.is_some() };
    let g = match build(&profile, &opts) {
        Ok(g) => g,
        Err(e @ (BuildError::Infeasible(_) | BuildError::Exhausted { .. })) => {
            return Err(Failure::new(EXIT_INFEASIBLE, e.to_string()));
        }
        Err(e) => return Err(Failure::new(EXIT_PARSE, e.to_string())),
    };
    if let (Some(dir), Some(p)) = (&a.emit_lp, &g.provenance) {
        for (i, model) in p.models.iter().enumerate() {
            write_to(&dir.join(format!("column_{}.lp", i + 1)), &export_lp(model))?;
        }
    }
    let summary = build_summary(&g);
    match &a.output {
        Some(path) => {
            write_to(path, &g.to_string())?;
            emit(out, &summary)?;
        }
        None => {
            emit(out, &g.to_string())?;
            err.write_all(summary.as_bytes()).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_sample(a: SampleArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let g = load_matrices(&a.matrices)?;
    let cap = g.capacity().ok_or_else(|| Failure::new(EXIT_USAGE, "b^m does not fit in 64 bits"))?;
    let n = a.n.unwrap_or(cap);
    if n > cap {
        return Err(Failure::new(EXIT_USAGE, format!("-n {n} exceeds the {cap} points these matrices produce")));
    }
    let p = generate(&g, n).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let text = if a.digits { format_digits(&p) } else { format_points(&p) };
    match &a.output {
        Some(path) => write_to(path, &text)?,
        None => emit(out, &text)?,
    }
    Ok(EXIT_OK)
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let g = load_matrices(&a.matrices)?;
    let profile = load_profile(&a.profile)?;
    if profile.base != g.base || profile.dimensions > g.s || profile.size > g.m {
        return Err(Failure::new(
            EXIT_PARSE,
            format!(
                "profile (b={} s={} m={}) does not fit the matrices (b={} s={} m={})",
                profile.base, profile.dimensions, profile.size, g.base, g.s, g.m
            ),
        ));
    }
    let g = g.leading(profile.size);
    let report = verify_profile(&g, &profile, a.blocks).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    emit(out, &report.to_text())?;
    if let Some(path) = &a.csv {
        write_to(path, &report.to_csv())?;
    }
    Ok(if report.hard_passed() { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn cmd_discrepancy(a: DiscrepancyArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let text = read(&a.input)?;
    let parse_err = |e: String| Failure::new(EXIT_PARSE, format!("{}: {e}", a.input.display()));
    let (points, base): (Vec<Vec<f64>>, PrimeBase) = if text.trim_start().starts_with("b=") {
        let g = parse_matrices(&text).map_err(|e| parse_err(e.to_string()))?;
        let cap = g.capacity().ok_or_else(|| Failure::new(EXIT_USAGE, "b^m does not fit in 64 bits"))?;
        let p = generate(&g, cap).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
        (p.points().map(<[f64]>::to_vec).collect(), g.base)
    } else {
        let pts = parse_points(&text).map_err(|e| parse_err(e.to_string()))?;
        let base = PrimeBase::new(a.base).map_err(|e| Failure::new(EXIT_USAGE, format!("--base: {e}")))?;
        (pts, base)
    };
    if points.is_empty() {
        return Err(parse_err("no points".into()));
    }
    let sizes: Vec<usize> = if a.prefix_sweep {
        let b = base.get() as usize;
        std::iter::successors(Some(b), |&n| n.checked_mul(b)).take_while(|&n| n <= points.len()).collect()
    } else {
        let n = a.n.unwrap_or(points.len());
        if n == 0 || n > points.len() {
            return Err(Failure::new(EXIT_USAGE, format!("-n {n} outside 1..={}", points.len())));
        }
        vec![n]
    };
    let opts = SweepOptions { pairs: a.pairs, baselines: a.baselines, seed: a.seed };
    let rows = discrepancy_sweep(&points, &sizes, &opts).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let mut csv = sweep_csv(&rows, &opts);
    if a.pairs {
        for s in summarize(&rows) {
            csv += &format!("# N={} pairs min {:.12e} median {:.12e} max {:.12e}\n", s.n, s.min, s.median, s.max);
        }
    }
    match &a.output {
        Some(path) => write_to(path, &csv)?,
        None => emit(out, &csv)?,
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("netforge").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_and_help() {
        assert_eq!(run_args(&[]).0, EXIT_USAGE);
        assert_eq!(run_args(&["frobnicate"]).0, EXIT_USAGE);
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("build"));
        assert_eq!(run_args(&["build", "/nonexistent/profile.txt"]).0, EXIT_USAGE);
    }

    #[test]
    fn pipeline_in_a_temp_dir() {
        let dir = tempfile::tempdir().unwrap();
        let profile = dir.path().join("p.txt");
        fs::write(&profile, "s=2\nm=3\nb=3\nnet 0 1\n").unwrap();
        let mats = dir.path().join("m.txt");
        let (code, out, _) = run_args(&["build", profile.to_str().unwrap(), "-o", mats.to_str().unwrap(), "--seed", "4"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("seed 4"));
        assert_eq!(out.lines().filter(|l| l.starts_with("column")).count(), 3);

        let (code, out, _) = run_args(&["verify", mats.to_str().unwrap(), profile.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK, "{out}");

        let (code, out, _) = run_args(&["sample", mats.to_str().unwrap(), "-n", "9"]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out.lines().count(), 9);
        assert_eq!(run_args(&["sample", mats.to_str().unwrap(), "-n", "28"]).0, EXIT_USAGE);

        let (code, out, _) = run_args(&["discrepancy", mats.to_str().unwrap(), "--prefix-sweep", "--baselines", "4"]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out.lines().filter(|l| !l.starts_with('#')).count(), 1 + 3);
    }
}
