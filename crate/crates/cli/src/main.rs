//! `expsum`: evaluate exponential-sum kernels over finite fields, transform them
//! over all multiplicative characters, and test how the results distribute.
//!
//! Exit codes: 0 success, 1 bound or range violations (or failed sweep rows),
//! 2 configuration or input errors, 3 cost-guard refusals.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use expsum::characters::AdditiveCharacter;
use expsum::equidist::{
    build_report, default_measure, histogram, measure_coordinates, EquidistError, EquidistReport, ReferenceMeasure,
    ReportInput, ReportOptions,
};
use expsum::ffield::{is_prime, primes_in_range, Field, FieldError};
use expsum::formats::{
    read_complex_columns, read_trace_csv, write_histogram_csv, write_report_csv, write_samples_csv,
    write_spectrum_csv, write_trace_csv, FormatError,
};
use expsum::haar::{trace_samples, GroupSpec};
use expsum::kernels::{make_kernel_with, KernelError, KernelName, KernelPath, KernelSpec, TraceFunction};
use expsum::mellin::{mellin_fast, mellin_naive, MellinSpectrum};
use expsum::ramification::{builtin_profile, builtin_profiles, RamificationError, RamificationProfile};
use rayon::prelude::*;

mod sweep;

#[derive(Parser, Debug)]
#[command(name = "expsum", version, about = "Exponential sums over finite fields and their equidistribution")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Characteristic of the field.
    #[arg(long, global = true)]
    p: Option<u64>,
    /// Degree of the field over F_p.
    #[arg(long, global = true, default_value_t = 1)]
    k: u32,
    /// Additive twist b as coefficients, low degree first (e.g. `1` or `0,1`).
    #[arg(long, global = true, value_parser = parse_coeffs)]
    psi: Option<Coeffs>,
    /// Seed for Monte-Carlo references and samplers.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; `1` gives byte-identical reruns.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write outputs into this directory instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON instead of CSV or text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Debug, Clone)]
struct Coeffs(Vec<u64>);

fn parse_coeffs(s: &str) -> std::result::Result<Coeffs, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u64>().map_err(|_| format!("`{t}` is not a coefficient")))
        .collect::<std::result::Result<Vec<_>, _>>()
        .and_then(|v| if v.is_empty() { Err("empty coefficient vector".into()) } else { Ok(Coeffs(v)) })
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Describe F_q: modulus, generator, optionally the full log table.
    Field {
        /// Print `m, g^m` for every m.
        #[arg(long)]
        table: bool,
    },
    /// Gauss sums g(psi, chi) for every chi.
    Gauss(KernelArgs),
    /// Kloosterman sums Kl_n(a, q) for every a.
    Kloosterman {
        #[arg(long, default_value_t = 2)]
        n: u32,
        #[arg(long, value_enum, default_value_t = PathArg::Auto)]
        path: PathArg,
        #[command(flatten)]
        args: KernelArgs,
    },
    /// Evans sums, from the kernel psi(x - 1/x).
    Evans(KernelArgs),
    /// Rudnick sums, from the kernel psi((x+1)/(x-1)); odd p only.
    Rudnick(KernelArgs),
    /// Transform a trace table (or a named kernel) over all characters.
    Mellin {
        /// Trace CSV as written by the kernel commands.
        #[arg(long, conflicts_with = "kernel")]
        input: Option<PathBuf>,
        /// gauss, evans, rudnick, kl<n>.
        #[arg(long)]
        kernel: Option<String>,
        #[arg(long)]
        raw: bool,
        /// Quadratic-time DFT instead of the chirp-z transform.
        #[arg(long)]
        naive: bool,
    },
    /// Weyl sums, moments and KS distance against a limit law.
    Equidist(EquidistArgs),
    /// Traces of Haar-random matrices.
    HaarSample {
        /// su2, u1, sun:N or uspn:N.
        #[arg(long)]
        group: String,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Euler characteristic, bad-character bound and Deligne constant of a profile.
    Ramify {
        /// Profile JSON file.
        #[arg(long, conflicts_with = "name")]
        profile: Option<PathBuf>,
        /// Built-in profile: gauss, evans, rudnick, kloosterman(n).
        #[arg(long)]
        name: Option<String>,
    },
    /// Run one statistic over a family of fields.
    Sweep(sweep::SweepArgs),
}

#[derive(Args, Debug, Clone)]
struct KernelArgs {
    /// Unnormalized values.
    #[arg(long)]
    raw: bool,
    /// Which table goes to stdout when `--out` is not given.
    #[arg(long, value_enum)]
    show: Option<Show>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Show {
    Trace,
    Spectrum,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum PathArg {
    Auto,
    Naive,
    Fast,
}

impl From<PathArg> for KernelPath {
    fn from(p: PathArg) -> Self {
        match p {
            PathArg::Auto => KernelPath::Auto,
            PathArg::Naive => KernelPath::Naive,
            PathArg::Fast => KernelPath::Fast,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct EquidistArgs {
    /// gauss, evans, rudnick, kl<n>.
    #[arg(long, conflicts_with = "input")]
    kernel: Option<String>,
    /// Sample CSV (haar-sample output, or any CSV with `re`/`im` columns).
    #[arg(long)]
    input: Option<PathBuf>,
    /// haar-circle, sato-tate, semicircle or haar:<group>; defaults by kernel.
    #[arg(long)]
    measure: Option<String>,
    /// Highest Weyl-sum order.
    #[arg(long, default_value_t = 10)]
    weyl: u32,
    /// Highest moment order.
    #[arg(long, default_value_t = 8)]
    moments: u32,
    /// Compute the KS distance (on by default).
    #[arg(long, conflicts_with = "no_ks")]
    ks: bool,
    #[arg(long)]
    no_ks: bool,
    /// Also write a histogram with this many bins.
    #[arg(long)]
    hist: Option<usize>,
    /// Flag moments further than this from the reference.
    #[arg(long)]
    moment_tol: Option<f64>,
    /// Flag a KS distance above this.
    #[arg(long)]
    ks_max: Option<f64>,
    /// Monte-Carlo size for group references.
    #[arg(long, default_value_t = 200_000)]
    haar_samples: usize,
}

/// A failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Cost(String),
    Violations(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Violations(_) | Failure::Runtime(_) => 1,
            Failure::Config(_) => 2,
            Failure::Cost(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Cost(m) | Failure::Violations(m) | Failure::Runtime(m) => m,
        }
    }

    pub fn message_owned(self) -> String {
        match self {
            Failure::Config(m) | Failure::Cost(m) | Failure::Violations(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<KernelError> for Failure {
    fn from(e: KernelError) -> Self {
        match e {
            KernelError::CostGuard { .. } => Failure::Cost(e.to_string()),
            e => Failure::Config(e.to_string()),
        }
    }
}

impl From<FieldError> for Failure {
    fn from(e: FieldError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Kernel(k) => k.into(),
            e => Failure::Config(e.to_string()),
        }
    }
}

impl From<EquidistError> for Failure {
    fn from(e: EquidistError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<RamificationError> for Failure {
    fn from(e: RamificationError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("expsum: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::Field { table } => run_field(g, *table),
        Command::Gauss(a) => run_kernel(g, KernelSpec::gauss(), a, KernelPath::Auto),
        Command::Kloosterman { n, path, args } => run_kernel(g, KernelSpec::kloosterman(*n), args, (*path).into()),
        Command::Evans(a) => run_kernel(g, KernelSpec::evans(), a, KernelPath::Auto),
        Command::Rudnick(a) => run_kernel(g, KernelSpec::rudnick(), a, KernelPath::Auto),
        Command::Mellin { input, kernel, raw, naive } => run_mellin(g, input.as_deref(), kernel.as_deref(), *raw, *naive),
        Command::Equidist(a) => run_equidist(g, a),
        Command::HaarSample { group, samples } => run_haar(g, group, *samples),
        Command::Ramify { profile, name } => run_ramify(g, profile.as_deref(), name.as_deref()),
        Command::Sweep(a) => sweep::run_sweep(g.p, g.seed, g.psi.as_ref().map(|c| c.0.as_slice()), g.out.as_deref(), g.json, a),
    }
}

pub fn field_from(p: Option<u64>, k: u32) -> Result<Field> {
    let p = p.ok_or_else(|| Failure::Config("--p is required".into()))?;
    Ok(Field::new(p, k)?)
}

pub fn psi_for(field: &Field, psi: Option<&[u64]>) -> Result<AdditiveCharacter> {
    match psi {
        None => Ok(AdditiveCharacter::standard(field)),
        Some(c) => {
            let b = field.element(c).map_err(|_| Failure::Config(format!("--psi {c:?} is not an element of F_{}", field.q())))?;
            AdditiveCharacter::new(field, b).map_err(|e| Failure::Config(e.to_string()))
        }
    }
}

/// `gauss`, `evans`, `rudnick`, `kl<n>` / `kloosterman<n>` / `kloosterman(n)`.
pub fn parse_kernel(name: &str) -> Result<KernelSpec> {
    let s = name.trim().to_ascii_lowercase();
    let bad = || Failure::Config(format!("unknown kernel `{name}`"));
    match s.as_str() {
        "gauss" => return Ok(KernelSpec::gauss()),
        "evans" => return Ok(KernelSpec::evans()),
        "rudnick" => return Ok(KernelSpec::rudnick()),
        "kloosterman" | "kl" => return Ok(KernelSpec::kloosterman(2)),
        _ => {}
    }
    let digits = s
        .strip_prefix("kloosterman")
        .or_else(|| s.strip_prefix("kl"))
        .ok_or_else(bad)?
        .trim_matches(|c| c == '(' || c == ')' || c == ':' || c == '_');
    let n: u32 = digits.parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(bad());
    }
    Ok(KernelSpec::kloosterman(n))
}

/// Writes `content` to `<out>/<name>`, or to stdout without `--out`.
pub fn emit(out: Option<&Path>, name: &str, content: &[u8]) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            fs::write(&path, content)?;
            eprintln!("wrote {}", path.display());
        }
        None => io::stdout().lock().write_all(content)?,
    }
    Ok(())
}

fn stem(label: &str, field: &Field) -> String {
    format!("{label}_q{}", field.q())
}

fn run_field(g: &Global, table: bool) -> Result<()> {
    let field = field_from(g.p, g.k)?;
    let d = field.descriptor();
    let mut buf = Vec::new();
    if g.json {
        serde_json::to_writer_pretty(&mut buf, &d).map_err(|e| Failure::Runtime(e.to_string()))?;
        writeln!(buf)?;
    } else {
        let modulus = field.modulus().map(|m| format!("{m:?}")).unwrap_or_else(|| "-".into());
        writeln!(buf, "# p={} k={} q={} modulus={} generator={:?}", field.p(), field.k(), field.q(), modulus, field.generator().coeffs())?;
    }
    if table {
        writeln!(buf, "m,element")?;
        for m in 0..field.q() - 1 {
            writeln!(buf, "{m},{}", field.exp(m))?;
        }
    }
    emit(g.out.as_deref(), &format!("field_q{}.txt", field.q()), &buf)
}

fn spectrum_json(s: &MellinSpectrum) -> serde_json::Value {
    serde_json::json!({
        "meta": s.meta(),
        "provenance": s.provenance().as_str(),
        "values": s.values().iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
    })
}

fn trace_json(t: &TraceFunction) -> serde_json::Value {
    serde_json::json!({
        "meta": t.meta(),
        "values": t.values().iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
    })
}

fn to_json_bytes(v: &serde_json::Value) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(v).map_err(|e| Failure::Runtime(e.to_string()))?;
    buf.push(b'\n');
    Ok(buf)
}

fn run_kernel(g: &Global, spec: KernelSpec, args: &KernelArgs, path: KernelPath) -> Result<()> {
    let field = field_from(g.p, g.k)?;
    let psi = psi_for(&field, g.psi.as_ref().map(|c| c.0.as_slice()))?;
    let spec = if args.raw { spec.raw() } else { spec };
    let t = make_kernel_with(&field, &psi, spec, path)?;
    let s = mellin_fast(&t);
    let label = t.meta().label();
    let show = args.show.unwrap_or(if spec.name == KernelName::Kloosterman { Show::Trace } else { Show::Spectrum });

    let (trace_bytes, spectrum_bytes) = if g.json {
        (to_json_bytes(&trace_json(&t))?, to_json_bytes(&spectrum_json(&s))?)
    } else {
        let mut tb = Vec::new();
        write_trace_csv(&t, &mut tb)?;
        let mut sb = Vec::new();
        write_spectrum_csv(&s, &mut sb)?;
        (tb, sb)
    };
    let ext = if g.json { "json" } else { "csv" };
    match g.out.as_deref() {
        Some(dir) => {
            emit(Some(dir), &format!("{}_trace.{ext}", stem(&label, &field)), &trace_bytes)?;
            emit(Some(dir), &format!("{}_spectrum.{ext}", stem(&label, &field)), &spectrum_bytes)
        }
        None => emit(None, "", if show == Show::Trace { &trace_bytes } else { &spectrum_bytes }),
    }
}

fn run_mellin(g: &Global, input: Option<&Path>, kernel: Option<&str>, raw: bool, naive: bool) -> Result<()> {
    let t = match (input, kernel) {
        (Some(path), _) => {
            let file = fs::File::open(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            read_trace_csv(file)?
        }
        (None, Some(name)) => {
            let field = field_from(g.p, g.k)?;
            let psi = psi_for(&field, g.psi.as_ref().map(|c| c.0.as_slice()))?;
            let spec = parse_kernel(name)?;
            make_kernel_with(&field, &psi, if raw { spec.raw() } else { spec }, KernelPath::Auto)?
        }
        (None, None) => return Err(Failure::Config("mellin needs --input or --kernel".into())),
    };
    let s = if naive { mellin_naive(&t) } else { mellin_fast(&t) };
    let bytes = if g.json {
        to_json_bytes(&spectrum_json(&s))?
    } else {
        let mut b = Vec::new();
        write_spectrum_csv(&s, &mut b)?;
        b
    };
    let ext = if g.json { "json" } else { "csv" };
    emit(g.out.as_deref(), &format!("{}_spectrum.{ext}", stem(&t.meta().label(), t.field())), &bytes)
}

/// Kernel families studied through their values (Kloosterman) or through their
/// character sums (everything else).
pub enum Family {
    Trace(TraceFunction),
    Spectrum(MellinSpectrum),
}

impl Family {
    pub fn build(field: &Field, psi: &AdditiveCharacter, spec: KernelSpec) -> Result<Self> {
        let t = make_kernel_with(field, psi, spec, KernelPath::Auto)?;
        Ok(if spec.name == KernelName::Kloosterman { Family::Trace(t) } else { Family::Spectrum(mellin_fast(&t)) })
    }

    pub fn input(&self) -> ReportInput<'_> {
        match self {
            Family::Trace(t) => ReportInput::Kernel(t),
            Family::Spectrum(s) => ReportInput::Spectrum(s),
        }
    }

    pub fn samples(&self) -> Vec<num_complex::Complex64> {
        match self {
            Family::Trace(t) => t.values().to_vec(),
            Family::Spectrum(s) => s.good_values().map(|(_, z)| z).collect(),
        }
    }
}

pub fn parse_measure(name: &str, samples: usize, seed: u64) -> Result<ReferenceMeasure> {
    ReferenceMeasure::parse(name, samples, seed).ok_or_else(|| Failure::Config(format!("unknown measure `{name}`")))
}

pub fn report_options(weyl: u32, moments: u32, ks: bool, moment_tol: Option<f64>, ks_max: Option<f64>) -> ReportOptions {
    ReportOptions { max_weyl_order: weyl, moment_orders: (1..=moments).collect(), ks, moment_tol, ks_max }
}

fn run_equidist(g: &Global, a: &EquidistArgs) -> Result<()> {
    let options = report_options(a.weyl, a.moments, !a.no_ks, a.moment_tol, a.ks_max);
    let (report, values, measure, file_stem): (EquidistReport, Vec<num_complex::Complex64>, ReferenceMeasure, String) =
        match (&a.kernel, &a.input) {
            (Some(name), _) => {
                let field = field_from(g.p, g.k)?;
                let psi = psi_for(&field, g.psi.as_ref().map(|c| c.0.as_slice()))?;
                let family = Family::build(&field, &psi, parse_kernel(name)?)?;
                let meta = match &family {
                    Family::Trace(t) => t.meta().clone(),
                    Family::Spectrum(s) => s.meta().clone(),
                };
                let measure = match &a.measure {
                    Some(m) => parse_measure(m, a.haar_samples, g.seed)?,
                    None => default_measure(&meta, a.haar_samples, g.seed),
                };
                let report = build_report(family.input(), &measure, &options)?;
                (report, family.samples(), measure, stem(&meta.label(), &field))
            }
            (None, Some(path)) => {
                let text = fs::read(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
                let values = read_complex_columns(&text[..])?;
                let measure = parse_measure(a.measure.as_deref().unwrap_or("semicircle"), a.haar_samples, g.seed)?;
                let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into());
                let report = build_report(ReportInput::Samples { label: label.clone(), values: values.clone() }, &measure, &options)?;
                (report, values, measure, label)
            }
            (None, None) => return Err(Failure::Config("equidist needs --kernel or --input".into())),
        };

    let mut json = serde_json::to_vec_pretty(&report).map_err(|e| Failure::Runtime(e.to_string()))?;
    json.push(b'\n');
    emit(g.out.as_deref(), &format!("{file_stem}_report.json"), &json)?;
    if let Some(dir) = g.out.as_deref() {
        let mut csv = Vec::new();
        write_report_csv(&report, &mut csv)?;
        emit(Some(dir), &format!("{file_stem}_report.csv"), &csv)?;
    }
    if let Some(bins) = a.hist {
        let coords = measure_coordinates(&values, &measure);
        let rows = histogram(&coords, bins, &measure)?;
        let mut csv = Vec::new();
        write_histogram_csv(&rows, &mut csv)?;
        let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("."));
        emit(Some(&dir), &format!("{file_stem}_hist.csv"), &csv)?;
    }
    if report.violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violations(format!("{} violation(s): {}", report.violations.len(), report.violations.join("; "))))
    }
}

fn run_haar(g: &Global, group: &str, samples: usize) -> Result<()> {
    let spec = GroupSpec::parse(group).ok_or_else(|| Failure::Config(format!("unknown group `{group}`")))?;
    if samples == 0 {
        return Err(Failure::Config("--samples must be positive".into()));
    }
    let traces = trace_samples(spec, samples, g.seed).to_complex();
    let mut buf = Vec::new();
    let header = [("group", spec.to_string()), ("samples", samples.to_string()), ("seed", g.seed.to_string()), ("rng", "chacha20".to_string())];
    write_samples_csv(&traces, &header, &mut buf)?;
    emit(g.out.as_deref(), &format!("haar_{}.csv", spec.to_string().replace(':', "")), &buf)
}

fn run_ramify(g: &Global, profile: Option<&Path>, name: Option<&str>) -> Result<()> {
    let profiles: Vec<RamificationProfile> = match (profile, name) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            vec![RamificationProfile::from_json(&text)?]
        }
        (None, Some(n)) => vec![builtin_profile(n)?],
        (None, None) => builtin_profiles().into_values().collect(),
    };
    let reports = profiles.iter().map(|p| p.report()).collect::<std::result::Result<Vec<_>, _>>()?;
    let mut buf = Vec::new();
    if g.json || profile.is_some() {
        let value = if reports.len() == 1 {
            serde_json::to_value(&reports[0])
        } else {
            serde_json::to_value(&reports)
        }
        .map_err(|e| Failure::Runtime(e.to_string()))?;
        buf = to_json_bytes(&value)?;
    } else {
        for r in &reports {
            writeln!(buf, "{r}")?;
        }
    }
    emit(g.out.as_deref(), "ramification.json", &buf)
}

/// Primes in `[a, b]`, or a configuration error when there are none.
pub fn prime_range(a: u64, b: u64) -> Result<Vec<u64>> {
    let primes = if a <= b { primes_in_range(a, b) } else { Vec::new() };
    if primes.is_empty() {
        Err(Failure::Config(format!("no primes in [{a}, {b}]")))
    } else {
        Ok(primes)
    }
}

pub fn require_prime(p: u64) -> Result<()> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(Failure::Config(format!("{p} is not prime")))
    }
}

/// Runs `f` over `items` on the current pool, keeping input order.
pub fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    items.par_iter().map(f).collect()
}
