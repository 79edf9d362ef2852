//! Statistics for equidistribution: Weyl sums, moments, Kolmogorov-Smirnov
//! distances against the limit laws, and the explicit error bounds.
//!
//! Angles and values are related by `x = 2 cos(theta)`. The Sato-Tate law lives
//! on `theta in [0, pi]` with density `(2/pi) sin^2`, the semicircle law on
//! `x in [-2, 2]` with density `sqrt(4 - x^2) / (2 pi)`, and both have the
//! Catalan numbers as even moments of `x`.

use std::cmp::Ordering;
use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::haar::{trace_samples, GroupSpec};
use crate::kernels::{angle_from_real, KernelMeta, KernelName, TraceFunction};
use crate::mellin::MellinSpectrum;
use crate::ramification::builtin_profile;
use crate::sum::{sum_complex, sum_f64, CompensatedSum};

/// Slack for floating-point noise when comparing an observation with a proven bound.
pub const BOUND_SLACK: f64 = 1e-9;
/// Unit-circle and range checks tolerate this much rounding.
pub const VALUE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquidistError {
    #[error("no samples")]
    EmptySamples,
    #[error("missing parameter `{0}` for the bound")]
    MissingParam(&'static str),
    #[error("measure {0} has no closed-form CDF")]
    NoClosedForm(String),
    #[error("samples incompatible with the measure: {0}")]
    Incompatible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceMeasure {
    /// Uniform on the unit circle, samples taken as angles in `[0, 2 pi)`.
    HaarCircle,
    /// `(2/pi) sin^2(theta)` on `[0, pi]`.
    SatoTate,
    /// `sqrt(4 - x^2) / (2 pi)` on `[-2, 2]`.
    Semicircle,
    /// Trace law of a compact group, estimated by Monte Carlo.
    EmpiricalHaarGroup { group: GroupSpec, samples: usize, seed: u64 },
}

impl fmt::Display for ReferenceMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceMeasure::HaarCircle => write!(f, "haar-circle"),
            ReferenceMeasure::SatoTate => write!(f, "sato-tate"),
            ReferenceMeasure::Semicircle => write!(f, "semicircle"),
            ReferenceMeasure::EmpiricalHaarGroup { group, .. } => write!(f, "haar:{group}"),
        }
    }
}

impl ReferenceMeasure {
    /// Parses `haar-circle`, `sato-tate`, `semicircle` or `haar:<group>`.
    pub fn parse(s: &str, samples: usize, seed: u64) -> Option<Self> {
        match s {
            "haar-circle" | "haar_circle" | "circle" => Some(ReferenceMeasure::HaarCircle),
            "sato-tate" | "sato_tate" => Some(ReferenceMeasure::SatoTate),
            "semicircle" => Some(ReferenceMeasure::Semicircle),
            other => {
                let group = GroupSpec::parse(other.strip_prefix("haar:")?)?;
                Some(ReferenceMeasure::EmpiricalHaarGroup { group, samples, seed })
            }
        }
    }

    /// Interval carrying the measure, in the coordinate its samples use.
    pub fn support(&self) -> (f64, f64) {
        match self {
            ReferenceMeasure::HaarCircle => (0.0, TAU),
            ReferenceMeasure::SatoTate => (0.0, PI),
            ReferenceMeasure::Semicircle => (-2.0, 2.0),
            ReferenceMeasure::EmpiricalHaarGroup { group, .. } => {
                let d = group.trace_dim() as f64;
                (-d, d)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> Option<f64> {
        match self {
            ReferenceMeasure::HaarCircle => Some((x / TAU).clamp(0.0, 1.0)),
            ReferenceMeasure::SatoTate => Some(sato_tate_cdf(x)),
            ReferenceMeasure::Semicircle => Some(semicircle_cdf(x)),
            ReferenceMeasure::EmpiricalHaarGroup { .. } => None,
        }
    }

    pub fn density(&self, x: f64) -> Option<f64> {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return Some(0.0);
        }
        match self {
            ReferenceMeasure::HaarCircle => Some(1.0 / TAU),
            ReferenceMeasure::SatoTate => Some(2.0 / PI * x.sin().powi(2)),
            ReferenceMeasure::Semicircle => Some((4.0 - x * x).max(0.0).sqrt() / TAU),
            ReferenceMeasure::EmpiricalHaarGroup { .. } => None,
        }
    }

    pub fn quantile(&self, u: f64) -> Option<f64> {
        match self {
            ReferenceMeasure::HaarCircle => Some(TAU * u),
            ReferenceMeasure::SatoTate => Some(sato_tate_quantile(u)),
            ReferenceMeasure::Semicircle => Some(2.0 * sato_tate_quantile(1.0 - u).cos()),
            ReferenceMeasure::EmpiricalHaarGroup { .. } => None,
        }
    }

    /// Monte-Carlo trace samples for the empirical group measure.
    pub fn reference_samples(&self) -> Option<Vec<f64>> {
        match *self {
            ReferenceMeasure::EmpiricalHaarGroup { group, samples, seed } => {
                Some(trace_samples(group, samples, seed).real_parts())
            }
            _ => None,
        }
    }
}

/// `F(theta) = (theta - sin(theta) cos(theta)) / pi`, clamped to `[0, pi]`.
pub fn sato_tate_cdf(theta: f64) -> f64 {
    let t = theta.clamp(0.0, PI);
    ((t - t.sin() * t.cos()) / PI).clamp(0.0, 1.0)
}

pub fn semicircle_cdf(x: f64) -> f64 {
    let x = x.clamp(-2.0, 2.0);
    (0.5 + x * (4.0 - x * x).max(0.0).sqrt() / (4.0 * PI) + (x / 2.0).asin() / PI).clamp(0.0, 1.0)
}

/// Inverse of [`sato_tate_cdf`] by safeguarded Newton iteration
/// (`F' = (2/pi) sin^2`), falling back to bisection near the endpoints.
pub fn sato_tate_quantile(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return PI;
    }
    let (mut lo, mut hi) = (0.0f64, PI);
    let mut theta = PI * u;
    for _ in 0..200 {
        let f = sato_tate_cdf(theta) - u;
        if f.abs() <= 1e-12 * 0.5 {
            return theta;
        }
        if f > 0.0 {
            hi = theta;
        } else {
            lo = theta;
        }
        let deriv = 2.0 / PI * theta.sin().powi(2);
        let step = if deriv > 1e-300 { theta - f / deriv } else { f64::NAN };
        theta = if step.is_finite() && step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 {
            break;
        }
    }
    theta
}

/// Catalan numbers `C_0 ..= C_8`: even moments of order up to 16.
const CATALAN: [u64; 9] = [1, 1, 2, 5, 14, 42, 132, 429, 1430];

/// `C_m`, from the table when `m <= 8`.
pub fn catalan(m: u32) -> f64 {
    match CATALAN.get(m as usize) {
        Some(&c) => c as f64,
        None => semicircle_moment_quadrature(2 * m),
    }
}

/// `int x^r dmu_semicircle` by Gauss-Chebyshev quadrature of the second kind,
/// which is exact for polynomials of degree below twice the node count.
pub fn semicircle_moment_quadrature(r: u32) -> f64 {
    let nodes = r as usize / 2 + 8;
    let h = PI / (nodes as f64 + 1.0);
    let weighted = sum_f64((1..=nodes).map(|i| {
        let theta = i as f64 * h;
        (2.0 * theta.cos()).powi(r as i32) * theta.sin().powi(2)
    }));
    2.0 / PI * h * weighted
}

/// Moments of the semicircle (or Sato-Tate trace) law.
pub fn semicircle_moment(r: u32) -> f64 {
    if r % 2 == 1 {
        0.0
    } else if r <= 16 {
        catalan(r / 2)
    } else {
        semicircle_moment_quadrature(r)
    }
}

fn require_nonempty<T>(xs: &[T]) -> Result<(), EquidistError> {
    if xs.is_empty() {
        Err(EquidistError::EmptySamples)
    } else {
        Ok(())
    }
}

/// Signed Weyl sums `W_n = (1/|S|) sum z^n`, `n = 1..=max_order`.
pub fn weyl_sums_complex(samples: &[Complex64], max_order: u32) -> Result<Vec<Complex64>, EquidistError> {
    require_nonempty(samples)?;
    let len = samples.len() as f64;
    Ok((1..=max_order)
        .map(|n| sum_complex(samples.iter().map(|z| z.powu(n))) / len)
        .collect())
}

/// `|W_n|` for `n = 1..=max_order`.
pub fn weyl_sums(samples: &[Complex64], max_order: u32) -> Result<Vec<f64>, EquidistError> {
    Ok(weyl_sums_complex(samples, max_order)?.into_iter().map(|w| w.norm()).collect())
}

/// `|mean U_m(x/2)|` for `m = 1..=max_order`: averages of the SU(2) characters
/// `tr Sym^m`, with `U_m` the Chebyshev polynomials of the second kind.
pub fn su2_weyl_sums(xs: &[f64], max_order: u32) -> Result<Vec<f64>, EquidistError> {
    require_nonempty(xs)?;
    let mut sums = vec![CompensatedSum::default(); max_order as usize];
    for &x in xs {
        let t = x / 2.0;
        // U_0 = 1, U_1 = 2t, U_{m+1} = 2t U_m - U_{m-1}
        let (mut prev, mut cur) = (1.0, 2.0 * t);
        for slot in sums.iter_mut() {
            *slot += cur;
            let next = 2.0 * t * cur - prev;
            prev = cur;
            cur = next;
        }
    }
    Ok(sums.into_iter().map(|s| (s.value() / xs.len() as f64).abs()).collect())
}

/// `(r, mean of s^r)` with compensated sums.
pub fn empirical_moments(samples: &[f64], orders: &[u32]) -> Result<Vec<(u32, f64)>, EquidistError> {
    require_nonempty(samples)?;
    let len = samples.len() as f64;
    Ok(orders
        .iter()
        .map(|&r| (r, sum_f64(samples.iter().map(|x| x.powi(r as i32))) / len))
        .collect())
}

/// Mixed moments `mean tr^a conj(tr)^b` for `a + b <= max_total`.
pub fn mixed_moments(samples: &[Complex64], max_total: u32) -> Result<Vec<((u32, u32), Complex64)>, EquidistError> {
    require_nonempty(samples)?;
    let len = samples.len() as f64;
    let mut out = Vec::new();
    for total in 1..=max_total {
        for a in 0..=total {
            let b = total - a;
            let m = sum_complex(samples.iter().map(|z| z.powu(a) * z.conj().powu(b))) / len;
            out.push(((a, b), m));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMoment {
    pub order: u32,
    pub value: f64,
    /// Monte-Carlo standard error, for estimated moments.
    pub std_err: Option<f64>,
}

/// Reference moments: of `2 cos(theta)` for Sato-Tate, of `x` for the semicircle,
/// of `z^n` for the circle, and of the (real) trace for group measures.
pub fn reference_moments(measure: &ReferenceMeasure, orders: &[u32]) -> Vec<ReferenceMoment> {
    match measure {
        ReferenceMeasure::SatoTate | ReferenceMeasure::Semicircle => orders
            .iter()
            .map(|&r| ReferenceMoment { order: r, value: semicircle_moment(r), std_err: None })
            .collect(),
        ReferenceMeasure::HaarCircle => orders
            .iter()
            .map(|&r| ReferenceMoment { order: r, value: if r == 0 { 1.0 } else { 0.0 }, std_err: None })
            .collect(),
        ReferenceMeasure::EmpiricalHaarGroup { .. } => {
            let xs = measure.reference_samples().expect("group measure");
            monte_carlo_moments(&xs, orders)
        }
    }
}

/// Sample means of `x^r` with their standard errors.
pub fn monte_carlo_moments(xs: &[f64], orders: &[u32]) -> Vec<ReferenceMoment> {
    let n = xs.len() as f64;
    orders
        .iter()
        .map(|&r| {
            let mean = sum_f64(xs.iter().map(|x| x.powi(r as i32))) / n;
            let var = sum_f64(xs.iter().map(|x| (x.powi(r as i32) - mean).powi(2))) / (n - 1.0).max(1.0);
            ReferenceMoment { order: r, value: mean, std_err: Some((var / n).sqrt()) }
        })
        .collect()
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    v
}

/// One-sample Kolmogorov-Smirnov distance against a closed-form CDF.
pub fn ks_against_cdf(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64, EquidistError> {
    require_nonempty(samples)?;
    let xs = sorted(samples);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// KS distance of samples (in the measure's coordinate) from the measure.
pub fn ks_statistic(samples: &[f64], measure: &ReferenceMeasure) -> Result<f64, EquidistError> {
    require_nonempty(samples)?;
    match measure {
        ReferenceMeasure::EmpiricalHaarGroup { .. } => {
            let reference = measure.reference_samples().expect("group measure");
            Ok(two_sample_ks(samples, &reference))
        }
        m => ks_against_cdf(samples, |x| m.cdf(x).expect("closed form")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `(2n + 1) / sqrt(q)` for Weyl sums of normalized Gauss sums.
    GaussWeyl,
    /// `(dim Lambda / n) sqrt(q) / (q - 1)` for Kloosterman averages of `tr Lambda`.
    KloostermanWeyl,
    /// `2 (rank + tannakian dim) / sqrt(q)` for means over good characters.
    TannakianMean,
}

impl BoundKind {
    pub fn formula(self) -> &'static str {
        match self {
            BoundKind::GaussWeyl => "(2n+1)/sqrt(q)",
            BoundKind::KloostermanWeyl => "(dim(Lambda)/n)*sqrt(q)/(q-1)",
            BoundKind::TannakianMean => "2*(rank+dim_omega)/sqrt(q)",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub q: Option<u64>,
    pub n: Option<u32>,
    pub dim_lambda: Option<u32>,
    pub rank: Option<u32>,
    pub tannakian_dim: Option<u32>,
}

pub fn predicted_bound(kind: BoundKind, params: &BoundParams) -> Result<f64, EquidistError> {
    let q = params.q.ok_or(EquidistError::MissingParam("q"))? as f64;
    match kind {
        BoundKind::GaussWeyl => {
            let n = params.n.ok_or(EquidistError::MissingParam("n"))? as f64;
            Ok((2.0 * n + 1.0) / q.sqrt())
        }
        BoundKind::KloostermanWeyl => {
            let n = params.n.ok_or(EquidistError::MissingParam("n"))? as f64;
            let dim = params.dim_lambda.ok_or(EquidistError::MissingParam("dim_lambda"))? as f64;
            Ok(dim / n * q.sqrt() / (q - 1.0))
        }
        BoundKind::TannakianMean => {
            let rank = params.rank.ok_or(EquidistError::MissingParam("rank"))? as f64;
            let dim = params.tannakian_dim.ok_or(EquidistError::MissingParam("tannakian_dim"))? as f64;
            Ok(2.0 * (rank + dim) / q.sqrt())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub density: f64,
    pub reference_density: f64,
}

/// `bins` equal-width bins over the measure's support, with the reference mass
/// of each bin divided by its width.
pub fn histogram(samples: &[f64], bins: usize, measure: &ReferenceMeasure) -> Result<Vec<HistogramRow>, EquidistError> {
    require_nonempty(samples)?;
    if bins == 0 {
        return Err(EquidistError::Incompatible("histogram needs at least one bin".into()));
    }
    let (lo, hi) = measure.support();
    let width = (hi - lo) / bins as f64;
    let bin_of = |x: f64| (((x - lo) / width).floor().max(0.0) as usize).min(bins - 1);
    let mut counts = vec![0usize; bins];
    for &x in samples {
        counts[bin_of(x)] += 1;
    }
    let reference_mass: Vec<f64> = match measure.reference_samples() {
        Some(ref_xs) => {
            let mut c = vec![0usize; bins];
            for &x in &ref_xs {
                c[bin_of(x)] += 1;
            }
            c.into_iter().map(|k| k as f64 / ref_xs.len() as f64).collect()
        }
        None => (0..bins)
            .map(|b| {
                let a = lo + b as f64 * width;
                measure.cdf(a + width).unwrap() - measure.cdf(a).unwrap()
            })
            .collect(),
    };
    let n = samples.len() as f64;
    Ok((0..bins)
        .map(|b| HistogramRow {
            lo: lo + b as f64 * width,
            hi: lo + (b + 1) as f64 * width,
            count: counts[b],
            density: counts[b] as f64 / n / width,
            reference_density: reference_mass[b] / width,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylRow {
    pub order: u32,
    pub value: f64,
    pub bound: Option<f64>,
    pub formula: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub value: f64,
    pub bound: f64,
    pub formula: String,
    /// Whether `sqrt(q) >= |bad| + 1`, the hypothesis under which the bound holds.
    pub applicable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub order: u32,
    pub empirical: f64,
    pub reference: f64,
    pub diff: f64,
    pub std_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedMomentRow {
    pub a: u32,
    pub b: u32,
    pub empirical: Complex64,
    pub reference: Complex64,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsRow {
    pub statistic: f64,
    pub measure: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremes {
    pub max_abs: f64,
    pub min_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquidistReport {
    pub kernel: String,
    pub meta: Option<KernelMeta>,
    pub q: Option<u64>,
    pub count: usize,
    pub measure: String,
    pub weyl: Vec<WeylRow>,
    pub mean: Option<MeanRow>,
    pub moments: Vec<MomentRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mixed_moments: Vec<MixedMomentRow>,
    pub ks: Option<KsRow>,
    pub extremes: Extremes,
    pub violations: Vec<String>,
}

impl EquidistReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn moment(&self, order: u32) -> Option<&MomentRow> {
        self.moments.iter().find(|m| m.order == order)
    }

    pub fn max_weyl(&self) -> Option<&WeylRow> {
        self.weyl.iter().max_by(|a, b| a.value.partial_cmp(&b.value).unwrap_or(Ordering::Equal))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub max_weyl_order: u32,
    pub moment_orders: Vec<u32>,
    pub ks: bool,
    /// Flag moments further than this from the reference.
    pub moment_tol: Option<f64>,
    /// Flag a KS distance above this.
    pub ks_max: Option<f64>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { max_weyl_order: 10, moment_orders: (1..=8).collect(), ks: true, moment_tol: None, ks_max: None }
    }
}

/// What a report is computed from.
#[derive(Debug, Clone)]
pub enum ReportInput<'a> {
    /// Values of a trace function over `F_q^x` (Kloosterman families).
    Kernel(&'a TraceFunction),
    /// Character sums over the good characters of a spectrum.
    Spectrum(&'a MellinSpectrum),
    /// Free-standing samples, e.g. read from a file.
    Samples { label: String, values: Vec<Complex64> },
}

/// The measure a kernel family is compared with by default.
pub fn default_measure(meta: &KernelMeta, samples: usize, seed: u64) -> ReferenceMeasure {
    match meta.name {
        KernelName::Gauss => ReferenceMeasure::HaarCircle,
        KernelName::Evans | KernelName::Rudnick => ReferenceMeasure::Semicircle,
        KernelName::Kloosterman if meta.n == 2 => ReferenceMeasure::SatoTate,
        KernelName::Kloosterman if meta.n % 2 == 0 => {
            ReferenceMeasure::EmpiricalHaarGroup { group: GroupSpec::USp2n(meta.n as usize / 2), samples, seed }
        }
        KernelName::Kloosterman => {
            ReferenceMeasure::EmpiricalHaarGroup { group: GroupSpec::SUn(meta.n as usize), samples, seed }
        }
        KernelName::Custom => ReferenceMeasure::Semicircle,
    }
}

fn su2_like(measure: &ReferenceMeasure) -> bool {
    matches!(
        measure,
        ReferenceMeasure::SatoTate
            | ReferenceMeasure::Semicircle
            | ReferenceMeasure::EmpiricalHaarGroup { group: GroupSpec::SU2 | GroupSpec::SUn(2) | GroupSpec::USp2n(1), .. }
    )
}

pub fn build_report(
    input: ReportInput<'_>,
    measure: &ReferenceMeasure,
    options: &ReportOptions,
) -> Result<EquidistReport, EquidistError> {
    let (label, meta, samples): (String, Option<KernelMeta>, Vec<Complex64>) = match &input {
        ReportInput::Kernel(t) => {
            if t.meta().name != KernelName::Custom && !t.meta().normalized {
                return Err(EquidistError::Incompatible("kernel values must be normalized".into()));
            }
            (t.meta().label(), Some(t.meta().clone()), t.values().to_vec())
        }
        ReportInput::Spectrum(s) => {
            if s.meta().name != KernelName::Custom && !s.meta().normalized {
                return Err(EquidistError::Incompatible("spectrum must come from a normalized kernel".into()));
            }
            (s.meta().label(), Some(s.meta().clone()), s.good_values().map(|(_, v)| v).collect())
        }
        ReportInput::Samples { label, values } => (label.clone(), None, values.clone()),
    };
    require_nonempty(&samples)?;
    let q = meta.as_ref().map(|m| m.q());
    let mut violations = Vec::new();

    let norms: Vec<f64> = samples.iter().map(|z| z.norm()).collect();
    let extremes = Extremes {
        max_abs: norms.iter().cloned().fold(0.0, f64::max),
        min_abs: norms.iter().cloned().fold(f64::INFINITY, f64::min),
    };

    // Range checks that are theorems for the built-in families.
    if let Some(m) = &meta {
        match (m.name, &input) {
            (KernelName::Gauss, ReportInput::Spectrum(_)) => {
                for (i, r) in norms.iter().enumerate() {
                    if (r - 1.0).abs() > VALUE_TOL {
                        violations.push(format!("gauss: |S| = {r} != 1 at good character #{i}"));
                    }
                }
            }
            (KernelName::Evans | KernelName::Rudnick, ReportInput::Spectrum(s)) => {
                for (j, v) in s.good_values() {
                    if v.norm() > 2.0 + VALUE_TOL {
                        violations.push(format!("{}: |S(chi_{j})| = {} > 2", m.label(), v.norm()));
                    }
                }
            }
            (KernelName::Kloosterman, ReportInput::Kernel(_)) => {
                let bound = m.n as f64;
                for (i, r) in norms.iter().enumerate() {
                    if *r > bound + VALUE_TOL {
                        violations.push(format!("deligne: |t(g^{i})| = {r} > {bound}"));
                    }
                }
            }
            _ => {}
        }
    }

    let real_measure = !matches!(measure, ReferenceMeasure::HaarCircle);
    let complex_group = matches!(measure, ReferenceMeasure::EmpiricalHaarGroup { group, .. } if !group.real_traces());
    let reals: Vec<f64> = samples.iter().map(|z| z.re).collect();
    if real_measure && !complex_group {
        let scale = extremes.max_abs.max(1.0);
        if let Some(z) = samples.iter().find(|z| z.im.abs() > VALUE_TOL * scale) {
            violations.push(format!("value {z} is not real"));
        }
    }

    // Weyl rows.
    let mut weyl = Vec::new();
    match measure {
        ReferenceMeasure::HaarCircle => {
            let sums = weyl_sums(&samples, options.max_weyl_order)?;
            for (i, w) in sums.into_iter().enumerate() {
                let order = i as u32 + 1;
                let bound = match (&meta, q) {
                    (Some(m), Some(q)) if m.name == KernelName::Gauss && q > 2 => {
                        Some(predicted_bound(BoundKind::GaussWeyl, &BoundParams { q: Some(q), n: Some(order), ..Default::default() })?)
                    }
                    _ => None,
                };
                weyl.push(WeylRow {
                    order,
                    value: w,
                    bound,
                    formula: bound.map(|_| BoundKind::GaussWeyl.formula().to_string()),
                });
            }
        }
        m if su2_like(m) => {
            let sums = su2_weyl_sums(&reals, options.max_weyl_order)?;
            for (i, w) in sums.into_iter().enumerate() {
                let order = i as u32 + 1;
                let bound = match (&meta, q, &input) {
                    (Some(km), Some(q), ReportInput::Kernel(_)) if km.name == KernelName::Kloosterman && km.n == 2 => {
                        Some(predicted_bound(
                            BoundKind::KloostermanWeyl,
                            &BoundParams { q: Some(q), n: Some(2), dim_lambda: Some(order + 1), ..Default::default() },
                        )?)
                    }
                    _ => None,
                };
                weyl.push(WeylRow {
                    order,
                    value: w,
                    bound,
                    formula: bound.map(|_| BoundKind::KloostermanWeyl.formula().to_string()),
                });
            }
        }
        _ => {
            // Standard representation only: the mean trace.
            let w = sum_complex(samples.iter().copied()).norm() / samples.len() as f64;
            let bound = match (&meta, q, &input) {
                (Some(km), Some(q), ReportInput::Kernel(_)) if km.name == KernelName::Kloosterman => {
                    Some(predicted_bound(
                        BoundKind::KloostermanWeyl,
                        &BoundParams { q: Some(q), n: Some(km.n), dim_lambda: Some(km.n), ..Default::default() },
                    )?)
                }
                _ => None,
            };
            weyl.push(WeylRow {
                order: 1,
                value: w,
                bound,
                formula: bound.map(|_| BoundKind::KloostermanWeyl.formula().to_string()),
            });
        }
    }
    for row in &weyl {
        if let Some(b) = row.bound {
            if row.value > b + BOUND_SLACK {
                violations.push(format!("weyl order {}: {} > {} = {}", row.order, row.value, row.formula.as_deref().unwrap_or(""), b));
            }
        }
    }

    // Mean over good characters against the tannakian bound.
    let mean = match (&meta, q, &input) {
        (Some(m), Some(q), ReportInput::Spectrum(_))
            if matches!(m.name, KernelName::Gauss | KernelName::Evans | KernelName::Rudnick) =>
        {
            let profile = builtin_profile(m.name.as_str()).expect("builtin profile");
            let bound = predicted_bound(
                BoundKind::TannakianMean,
                &BoundParams {
                    q: Some(q),
                    rank: Some(profile.generic_rank),
                    tannakian_dim: Some(profile.euler_characteristic() as u32),
                    ..Default::default()
                },
            )?;
            let value = sum_complex(samples.iter().copied()).norm() / samples.len() as f64;
            let bad = m.goodness_rule.excluded() as f64;
            let applicable = (q as f64).sqrt() >= bad + 1.0;
            if applicable && value > bound + BOUND_SLACK {
                violations.push(format!("mean over good characters {value} > {bound}"));
            }
            Some(MeanRow { value, bound, formula: BoundKind::TannakianMean.formula().to_string(), applicable })
        }
        _ => None,
    };

    // Moments, and the coordinate used for KS.
    let mut moments = Vec::new();
    let mut mixed = Vec::new();
    let ks_samples: Vec<f64>;
    match measure {
        ReferenceMeasure::HaarCircle => {
            let signed = weyl_sums_complex(&samples, options.moment_orders.iter().copied().max().unwrap_or(0))?;
            for &r in &options.moment_orders {
                let empirical = if r == 0 { 1.0 } else { signed[r as usize - 1].norm() };
                let reference = if r == 0 { 1.0 } else { 0.0 };
                moments.push(MomentRow { order: r, empirical, reference, diff: (empirical - reference).abs(), std_err: None });
            }
            ks_samples = samples.iter().map(|z| z.arg().rem_euclid(TAU)).collect();
        }
        ReferenceMeasure::SatoTate => {
            let mut thetas = Vec::with_capacity(reals.len());
            for &x in &reals {
                match angle_from_real(x, 2.0) {
                    Ok(t) => thetas.push(t),
                    Err(_) => violations.push(format!("value {x} outside [-2, 2]")),
                }
            }
            moments = moment_rows(&reals, &reference_moments(measure, &options.moment_orders))?;
            ks_samples = thetas;
        }
        ReferenceMeasure::Semicircle => {
            for &x in &reals {
                if x.abs() > 2.0 * (1.0 + VALUE_TOL) {
                    violations.push(format!("value {x} outside [-2, 2]"));
                }
            }
            moments = moment_rows(&reals, &reference_moments(measure, &options.moment_orders))?;
            ks_samples = reals.clone();
        }
        ReferenceMeasure::EmpiricalHaarGroup { group, .. } => {
            let reference = trace_samples(*group, measure_samples(measure), measure_seed(measure));
            moments = moment_rows(&reals, &monte_carlo_moments(&reference.real_parts(), &options.moment_orders))?;
            if complex_group {
                let emp = mixed_moments(&samples, 6)?;
                let refm = mixed_moments(&reference.to_complex(), 6)?;
                mixed = emp
                    .into_iter()
                    .zip(refm)
                    .map(|(((a, b), e), (_, r))| MixedMomentRow { a, b, empirical: e, reference: r, diff: (e - r).norm() })
                    .collect();
            }
            ks_samples = reals.clone();
        }
    }
    if let Some(tol) = options.moment_tol {
        for m in &moments {
            if m.diff > tol {
                violations.push(format!("moment {}: |{} - {}| > {tol}", m.order, m.empirical, m.reference));
            }
        }
        for m in &mixed {
            if m.diff > tol {
                violations.push(format!("mixed moment ({}, {}): diff {} > {tol}", m.a, m.b, m.diff));
            }
        }
    }

    let ks = if options.ks && !ks_samples.is_empty() {
        let statistic = ks_statistic(&ks_samples, measure)?;
        if let Some(max) = options.ks_max {
            if statistic > max {
                violations.push(format!("ks {statistic} > {max}"));
            }
        }
        Some(KsRow { statistic, measure: measure.to_string() })
    } else {
        None
    };

    Ok(EquidistReport {
        kernel: label,
        meta,
        q,
        count: samples.len(),
        measure: measure.to_string(),
        weyl,
        mean,
        moments,
        mixed_moments: mixed,
        ks,
        extremes,
        violations,
    })
}

fn measure_samples(m: &ReferenceMeasure) -> usize {
    match m {
        ReferenceMeasure::EmpiricalHaarGroup { samples, .. } => *samples,
        _ => 0,
    }
}

fn measure_seed(m: &ReferenceMeasure) -> u64 {
    match m {
        ReferenceMeasure::EmpiricalHaarGroup { seed, .. } => *seed,
        _ => 0,
    }
}

fn moment_rows(xs: &[f64], reference: &[ReferenceMoment]) -> Result<Vec<MomentRow>, EquidistError> {
    let orders: Vec<u32> = reference.iter().map(|r| r.order).collect();
    let emp = empirical_moments(xs, &orders)?;
    Ok(emp
        .into_iter()
        .zip(reference)
        .map(|((order, e), r)| MomentRow { order, empirical: e, reference: r.value, diff: (e - r.value).abs(), std_err: r.std_err })
        .collect())
}

/// The coordinate a measure's KS test and histogram use for real samples
/// (angles for Sato-Tate, values otherwise).
pub fn measure_coordinates(values: &[Complex64], measure: &ReferenceMeasure) -> Vec<f64> {
    match measure {
        ReferenceMeasure::HaarCircle => values.iter().map(|z| z.arg().rem_euclid(TAU)).collect(),
        ReferenceMeasure::SatoTate => values.iter().filter_map(|z| angle_from_real(z.re, 2.0).ok()).collect(),
        _ => values.iter().map(|z| z.re).collect(),
    }
}
