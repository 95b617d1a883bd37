//! The `fbs` command line: validate complexes, compile constraints, generate patches,
//! measure amplitudes and verify them against the constraints.
//!
//! Exit codes: 0 success, 1 domain failure (invalid complex, failed verification, species
//! mismatch), 2 input error (unreadable or malformed files, bad flags).

pub mod formats;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fbs_core::cycles::{constraint_count_at_k, degeneracy_check, Analysis, DEFAULT_TOL};
use fbs_core::diffraction::{
    bragg_candidates, estimate_amplitudes, strongest_peaks, verify_cycle_condition_all, verify_intensity, verify_span,
    AmplitudeVector, CellOccurrences, Enumeration, Estimator, FourierModule, PeakRecord, PeakSearch, SpanResult,
    SpanStatus, VerificationReport, WaveVector,
};
use fbs_core::fbs::FbsComplex;
use fbs_core::tilings::{
    generate_binary, generate_canonical, generate_square_triangle, square_triangle_steps, BinaryScheme,
    DecoratedPattern, StSeed,
};
use fbs_core::{presets, Error};
use formats::{AmplitudeTable, ConstraintReport};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Intensity regrouping is an algebraic identity; anything above this is a bug, not noise.
pub const INTENSITY_GAP_LIMIT: f64 = 1e-10;
pub const DEFAULT_VERIFY_TOL: f64 = 1e-2;

#[derive(Parser, Debug)]
#[command(name = "fbs", version, about = "Constraints on partial diffraction amplitudes of decorated tilings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a complex: simplicial identities, connectivity, edge-vector closure, top cells.
    Validate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compile the cycle generators into exponential sums and write the constraint report.
    Constraints {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a decorated patch in a ball.
    Tile {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        patch: PatchArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Estimate partial amplitudes at the strongest peaks or on a box of the Fourier module.
    Amplitudes {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        patch: PatchArgs,
        #[command(flatten)]
        peaks: PeakArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check measured amplitudes against the constraints and print PASS or FAIL.
    Verify {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        patch: PatchArgs,
        #[command(flatten)]
        peaks: PeakArgs,
        /// Constraint report to check against instead of recompiling.
        #[arg(long)]
        constraints: Option<PathBuf>,
        /// Amplitude table to check instead of measuring a patch.
        #[arg(long)]
        amplitudes: Option<PathBuf>,
        /// Residual threshold for span and cycle-condition checks.
        #[arg(long, default_value_t = DEFAULT_VERIFY_TOL)]
        tol: f64,
        /// Skip the local cycle condition.
        #[arg(long)]
        no_cycle: bool,
        /// Text report; the structured report goes next to it with a .json extension.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Source {
    /// Complex definition file (JSON).
    #[arg(long, conflicts_with = "preset")]
    pub input: Option<PathBuf>,
    /// Built-in complex: binary-fib, binary-comm, canonical-N-D, square-triangle.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    Auto,
    /// Fibonacci substitution fixed point (binary complexes).
    Fibonacci,
    /// Mechanical word with a seeded intercept (binary complexes).
    CutProject,
    /// Dual-method canonical projection with a seeded offset.
    Canonical,
    /// Square-triangle inflation from a dodecagon.
    Inflation,
}

#[derive(Args, Debug, Clone)]
pub struct PatchArgs {
    /// Existing pattern file; otherwise a patch is generated.
    #[arg(long)]
    pub pattern: Option<PathBuf>,
    /// Ball radius of a generated patch [default: 10000 in 1D, 100 in 2D, 10 above].
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, value_enum, default_value_t = Scheme::Auto)]
    pub scheme: Scheme,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct PeakArgs {
    /// Integer ranges over the dual basis, e.g. `-3..3,-3..3`; default is the strongest peaks.
    #[arg(long, value_parser = parse_k_box)]
    pub k_box: Option<KBox>,
    /// Largest |k| kept from a k-box.
    #[arg(long, default_value_t = 6.0)]
    pub kmax: f64,
    /// Number of strongest peaks.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Smooth (1 − r²/R²)³ window instead of the hard ball.
    #[arg(long)]
    pub taper: bool,
    /// Numerical rank and degeneracy tolerance.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub rank_tol: f64,
    /// Worker threads for amplitude sums [default: available cores].
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KBox(pub Vec<(i64, i64)>);

pub fn parse_k_box(s: &str) -> std::result::Result<KBox, String> {
    s.split(',')
        .map(|r| {
            let (a, b) = r.trim().split_once("..").ok_or_else(|| format!("range '{r}' is not of the form m..M"))?;
            let a: i64 = a.trim().parse().map_err(|_| format!("bad lower bound in '{r}'"))?;
            let b: i64 = b.trim().parse().map_err(|_| format!("bad upper bound in '{r}'"))?;
            if a > b {
                return Err(format!("empty range '{r}'"));
            }
            Ok((a, b))
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(KBox)
}

/// A failed run: exit code and message.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(m: impl Into<String>) -> Self {
        Failure { code: 2, message: m.into() }
    }

    fn domain(m: impl Into<String>) -> Self {
        Failure { code: 1, message: m.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: if e.is_input_error() { 2 } else { 1 }, message: e.to_string() }
    }
}

type Run<T> = std::result::Result<T, Failure>;

/// What a subcommand prints; files are written by the subcommand itself.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let sink: &mut dyn Write = if code == 0 { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(o) => {
            let _ = out.write_all(o.stdout.as_bytes());
            let _ = err.write_all(o.stderr.as_bytes());
            o.code
        }
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

pub fn execute(cmd: &Command) -> Run<Outcome> {
    let threads = match cmd {
        Command::Amplitudes { peaks, .. } | Command::Verify { peaks, .. } => peaks.threads,
        _ => None,
    };
    match threads {
        Some(0) => Err(Failure::input("--threads must be positive")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Failure::input(e.to_string()))?;
            pool.install(|| dispatch(cmd))
        }
        None => dispatch(cmd),
    }
}

fn dispatch(cmd: &Command) -> Run<Outcome> {
    match cmd {
        Command::Validate { source, output } => cmd_validate(source, output.as_deref()),
        Command::Constraints { source, output } => cmd_constraints(source, output.as_deref()),
        Command::Tile { source, patch, output } => cmd_tile(source, patch, output.as_deref()),
        Command::Amplitudes { source, patch, peaks, output } => cmd_amplitudes(source, patch, peaks, output.as_deref()),
        Command::Verify { source, patch, peaks, constraints, amplitudes, tol, no_cycle, output } => cmd_verify(
            source,
            patch,
            peaks,
            VerifyFiles { constraints: constraints.as_deref(), amplitudes: amplitudes.as_deref() },
            *tol,
            !no_cycle,
            output.as_deref(),
        ),
    }
}

// ---------------------------------------------------------------------------------------------
// loading

fn read(path: &Path) -> Run<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Run<()> {
    std::fs::write(path, text).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

/// The complex and, for presets, its name.
pub fn load_complex(src: &Source) -> Run<(FbsComplex, Option<String>)> {
    match (&src.input, &src.preset) {
        (Some(path), None) => Ok((FbsComplex::from_json_str(&read(path)?)?, None)),
        (None, Some(name)) => Ok((presets::preset(name)?, Some(name.clone()))),
        _ => Err(Failure::input("give exactly one of --input and --preset")),
    }
}

fn valid_complex(src: &Source) -> Run<(FbsComplex, Option<String>)> {
    let (f, name) = load_complex(src)?;
    let rep = f.validate();
    if !rep.is_ok() {
        return Err(Failure::domain(format!("invalid complex:\n  {}", rep.lines().join("\n  "))));
    }
    Ok((f, name))
}

pub fn default_radius(dim: usize) -> f64 {
    match dim {
        1 => 1e4,
        2 => 100.0,
        _ => 10.0,
    }
}

/// Generate a patch of `f` following `scheme`; seeded choices come from `seed`.
pub fn generate_patch(f: &FbsComplex, preset: Option<&str>, radius: f64, scheme: Scheme, seed: u64) -> Run<DecoratedPattern> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Failure::input("--radius must be positive"));
    }
    let scheme = match scheme {
        Scheme::Auto => match preset {
            Some("binary-fib") => Scheme::Fibonacci,
            Some("square-triangle") => Scheme::Inflation,
            Some(name) if name.starts_with("canonical-") => Scheme::Canonical,
            _ if f.dim() == 1 && f.effective_prototiles().len() == 2 => Scheme::CutProject,
            _ => Scheme::Canonical,
        },
        s => s,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = match scheme {
        Scheme::Fibonacci => generate_binary(f, &BinaryScheme::fibonacci(), radius)?,
        Scheme::CutProject => generate_binary(f, &BinaryScheme::CutProject { rho: rng.gen::<f64>() }, radius)?,
        Scheme::Canonical => {
            let offset: Vec<f64> = (0..f.rank().saturating_sub(f.dim())).map(|_| rng.gen::<f64>()).collect();
            generate_canonical(f, &offset, radius)?
        }
        Scheme::Inflation => generate_square_triangle(f, square_triangle_steps(radius), StSeed::Dodecagon, radius)?,
        Scheme::Auto => unreachable!("resolved above"),
    };
    Ok(p)
}

/// A pattern from file (resolved against `f`) or freshly generated.
fn patch(f: &FbsComplex, preset: Option<&str>, a: &PatchArgs) -> Run<DecoratedPattern> {
    let p = match &a.pattern {
        Some(path) => {
            let mut p = DecoratedPattern::from_text(&read(path)?)?;
            if p.dim != f.dim() {
                return Err(Failure::domain(format!("pattern is {}-dimensional, complex is {}-dimensional", p.dim, f.dim())));
            }
            p.resolve(f).map_err(|e| Failure::domain(format!("pattern does not match the complex: {e}")))?;
            p
        }
        None => generate_patch(f, preset, a.radius.unwrap_or_else(|| default_radius(f.dim())), a.scheme, a.seed)?,
    };
    check_species("pattern", &p.species, &f.species())?;
    Ok(p)
}

fn check_species(what: &str, got: &[String], want: &[String]) -> Run<()> {
    if got != want {
        return Err(Failure::domain(format!("species mismatch: {what} has {got:?}, constraints have {want:?}")));
    }
    Ok(())
}

fn module(f: &FbsComplex, preset: Option<&str>) -> Run<FourierModule> {
    Ok(FourierModule::for_preset(preset.unwrap_or(""), f)?)
}

fn estimator(taper: bool) -> Estimator {
    if taper {
        Estimator::Taper
    } else {
        Estimator::HardBall
    }
}

/// Wave vectors with their amplitudes: the strongest peaks, or every module point in the box.
fn measure(
    f: &FbsComplex,
    preset: Option<&str>,
    an: &Analysis,
    p: &DecoratedPattern,
    a: &PeakArgs,
) -> Run<Vec<(WaveVector, AmplitudeVector)>> {
    if !(a.rank_tol > 0.0) {
        return Err(Failure::input("--rank-tol must be positive"));
    }
    let m = module(f, preset)?;
    let est = estimator(a.taper);
    let ks: Vec<WaveVector> = match &a.k_box {
        Some(KBox(ranges)) => {
            let e = Enumeration { dual: m.dual()?, ranges: ranges.clone(), kmax: a.kmax };
            bragg_candidates(Some(&e), None, p)?
        }
        None => {
            let search = PeakSearch { count: a.count, tol: a.rank_tol, ..PeakSearch::default() };
            let found = strongest_peaks(f, an, p, &m, &search)?;
            if est == Estimator::HardBall {
                return Ok(found);
            }
            found.into_iter().map(|(w, _)| w).collect()
        }
    };
    ks.into_iter()
        .map(|w| {
            let amp = estimate_amplitudes(p, &w.k, est)?;
            Ok((w, amp))
        })
        .collect()
}

// ---------------------------------------------------------------------------------------------
// subcommands

fn cmd_validate(src: &Source, output: Option<&Path>) -> Run<Outcome> {
    let (f, _) = load_complex(src)?;
    let rep = f.validate();
    let b = f.set();
    let counts: Vec<String> = (0..=f.dim()).map(|n| b.count(n).to_string()).collect();
    let mut text = format!(
        "dimension {}\ncells per degree {}\nfrequency rank {}\ndecorations {}\n",
        f.dim(),
        counts.join(" "),
        f.rank(),
        f.decorations.len()
    );
    if rep.is_ok() {
        text.push_str("valid\n");
    } else {
        for l in rep.lines() {
            text.push_str(&l);
            text.push('\n');
        }
        text.push_str("invalid\n");
    }
    if let Some(path) = output {
        write(path, &text)?;
    }
    Ok(Outcome { stdout: text, stderr: String::new(), code: if rep.is_ok() { 0 } else { 1 } })
}

fn cmd_constraints(src: &Source, output: Option<&Path>) -> Run<Outcome> {
    let (f, _) = valid_complex(src)?;
    let an = Analysis::new(&f)?;
    let rep = ConstraintReport::new(&f, &an);
    let json = rep.to_json();
    Ok(match output {
        Some(path) => {
            write(path, &json)?;
            Outcome { stdout: rep.summary(), ..Outcome::default() }
        }
        None => Outcome { stdout: json, stderr: rep.summary(), code: 0 },
    })
}

fn cmd_tile(src: &Source, a: &PatchArgs, output: Option<&Path>) -> Run<Outcome> {
    let (f, name) = valid_complex(src)?;
    if a.pattern.is_some() {
        return Err(Failure::input("tile generates a pattern; --pattern is not accepted"));
    }
    let p = patch(&f, name.as_deref(), a)?;
    let counts: Vec<String> = (0..p.species.len()).map(|s| format!("{} {}", p.species[s], p.count(s))).collect();
    let summary = format!("radius {}\ntiles {}\npoints {}\n", p.radius, p.tiles.len(), counts.join(", "));
    let text = p.to_text();
    Ok(match output {
        Some(path) => {
            write(path, &text)?;
            Outcome { stdout: summary, ..Outcome::default() }
        }
        None => Outcome { stdout: text, stderr: summary, code: 0 },
    })
}

fn cmd_amplitudes(src: &Source, pa: &PatchArgs, peaks: &PeakArgs, output: Option<&Path>) -> Run<Outcome> {
    let (f, name) = valid_complex(src)?;
    let an = Analysis::new(&f)?;
    let p = patch(&f, name.as_deref(), pa)?;
    let rows = measure(&f, name.as_deref(), &an, &p, peaks)?;
    let table = AmplitudeTable::new(&p, estimator(peaks.taper), &rows);
    let json = table.to_json();
    let summary = format!("wave vectors {}\nradius {}\n", rows.len(), p.radius);
    Ok(match output {
        Some(path) => {
            write(path, &json)?;
            Outcome { stdout: summary, ..Outcome::default() }
        }
        None => Outcome { stdout: json, stderr: summary, code: 0 },
    })
}

struct VerifyFiles<'a> {
    constraints: Option<&'a Path>,
    amplitudes: Option<&'a Path>,
}

/// Per-peak records and the PASS/FAIL decision.
pub struct Verdict {
    pub report: VerificationReport,
    pub pass: bool,
    pub summary: String,
}

fn cmd_verify(
    src: &Source,
    pa: &PatchArgs,
    peaks: &PeakArgs,
    files: VerifyFiles,
    tol: f64,
    cycle: bool,
    output: Option<&Path>,
) -> Run<Outcome> {
    if !(tol > 0.0) {
        return Err(Failure::input("--tol must be positive"));
    }
    let (f, name) = valid_complex(src)?;
    let an = Analysis::new(&f)?;
    let species = f.species();
    let report = match files.constraints {
        Some(path) => {
            let r = ConstraintReport::from_json(&read(path)?)?;
            check_species("complex", &species, &r.species)?;
            Some(r)
        }
        None => None,
    };
    let gens = |k: &[f64]| -> DMatrix<Complex64> {
        match &report {
            Some(r) => r.generator_matrix(k),
            None => an.generator_matrix(species.len(), k),
        }
    };
    let (rows, pattern, floor, radius) = match files.amplitudes {
        Some(path) => {
            let t = AmplitudeTable::from_json(&read(path)?)?;
            check_species("amplitude table", &t.species, &species)?;
            if t.dimension != f.dim() {
                return Err(Failure::domain("amplitude table dimension differs from the complex"));
            }
            let p = match &pa.pattern {
                Some(_) => Some(patch(&f, name.as_deref(), pa)?),
                None => None,
            };
            (t.entries()?, p, t.noise_floor, t.radius)
        }
        None => {
            let p = patch(&f, name.as_deref(), pa)?;
            let rows = measure(&f, name.as_deref(), &an, &p, peaks)?;
            let floor = fbs_core::diffraction::noise_floor(&p);
            let r = p.radius;
            (rows, Some(p), floor, r)
        }
    };
    let v = verdict(&f, &an, &gens, &rows, pattern.as_ref(), floor, radius, tol, cycle, peaks.rank_tol)?;
    let text = v.report.to_text() + &v.summary;
    if let Some(path) = output {
        if path.extension().is_some_and(|e| e == "json") {
            write(path, &v.report.to_json())?;
        } else {
            write(path, &text)?;
            write(&path.with_extension("json"), &v.report.to_json())?;
        }
    }
    Ok(Outcome { stdout: text, stderr: String::new(), code: if v.pass { 0 } else { 1 } })
}

/// Check every row: degeneracy, span residual against `gens`, and with a pattern the cycle
/// condition and intensity regrouping.
#[allow(clippy::too_many_arguments)]
pub fn verdict(
    f: &FbsComplex,
    an: &Analysis,
    gens: &dyn Fn(&[f64]) -> DMatrix<Complex64>,
    rows: &[(WaveVector, AmplitudeVector)],
    pattern: Option<&DecoratedPattern>,
    floor: f64,
    radius: f64,
    tol: f64,
    cycle: bool,
    rank_tol: f64,
) -> Run<Verdict> {
    let occ = match pattern {
        Some(p) if cycle => Some(CellOccurrences::new(f, p)?),
        _ => None,
    };
    let mut records = Vec::with_capacity(rows.len());
    for (w, a) in rows {
        let dg = degeneracy_check(f, &an.gv, &an.basis, &w.k, rank_tol);
        let span = if dg.degenerate {
            SpanResult { status: SpanStatus::Skipped, residual: None }
        } else {
            verify_span(&gens(&w.k), a, floor)?
        };
        let cyc = match &occ {
            Some(o) => Some(verify_cycle_condition_all(f, o, &w.k, a.estimator)?.iter().map(|r| r.max()).fold(0.0, f64::max)),
            None => None,
        };
        let intensity = match pattern {
            Some(p) => Some(verify_intensity(p, &w.k, &p.weights)?),
            None => None,
        };
        records.push(PeakRecord {
            k: w.clone(),
            magnitudes: a.values.iter().map(|z| z.norm()).collect(),
            degenerate: dg.degenerate,
            constraint_count: constraint_count_at_k(f, &w.k, rank_tol),
            span,
            intensity,
            cycle: cyc,
        });
    }
    let report = VerificationReport { species: f.species(), radius, tol, records };
    let checked = report.records.iter().filter(|r| r.span.status == SpanStatus::Checked).count();
    let span = report.worst_span();
    let cyc = report.worst_cycle();
    let gap = report.records.iter().filter_map(|r| r.intensity.as_ref().map(|i| i.gap)).reduce(f64::max);
    let pass = checked > 0
        && span.is_some_and(|x| x <= tol)
        && cyc.is_none_or(|x| x <= tol)
        && gap.is_none_or(|x| x <= INTENSITY_GAP_LIMIT);
    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |x| format!("{x:.3e}"));
    let summary = format!(
        "summary: {}  peaks {}  checked {}  worst span {}  worst cycle {}  worst intensity gap {}  tol {:e}\n",
        if pass { "PASS" } else { "FAIL" },
        report.records.len(),
        checked,
        fmt(span),
        fmt(cyc),
        fmt(gap),
        tol
    );
    Ok(Verdict { report, pass, summary })
}
