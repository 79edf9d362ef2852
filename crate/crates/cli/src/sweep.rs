//! Vertical (`F_{p^k}`, `k = 1..K`) and horizontal (`F_p`, `p` in a range) sweeps.

use std::fmt::Write as _;
use std::path::Path;

use clap::{Args, ValueEnum};
use expsum::equidist::{build_report, default_measure, EquidistReport};
use expsum::ffield::Field;
use expsum::formats::fmt_f64;
use expsum::kernels::KernelName;

use crate::{emit, par_map, parse_kernel, parse_measure, prime_range, psi_for, report_options, require_prime, Failure, Family, Result};

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Fixed p, k = 1..kmax.
    Vertical,
    /// k = 1, p over the primes in [from, to].
    Horizontal,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    /// gauss, evans, rudnick, kl<n>.
    #[arg(long, default_value = "gauss")]
    kernel: String,
    /// Largest degree in vertical mode.
    #[arg(long)]
    kmax: Option<u32>,
    /// Smallest prime in horizontal mode.
    #[arg(long)]
    from: Option<u64>,
    /// Largest prime in horizontal mode.
    #[arg(long)]
    to: Option<u64>,
    #[arg(long)]
    measure: Option<String>,
    #[arg(long, default_value_t = 10)]
    weyl: u32,
    #[arg(long, default_value_t = 4)]
    moments: u32,
    #[arg(long)]
    no_ks: bool,
    #[arg(long, default_value_t = 100_000)]
    haar_samples: usize,
}

struct Row {
    p: u64,
    k: u32,
    q: u64,
    outcome: std::result::Result<EquidistReport, String>,
}

pub fn run_sweep(p: Option<u64>, seed: u64, psi: Option<&[u64]>, out: Option<&Path>, json: bool, a: &SweepArgs) -> Result<()> {
    let spec = parse_kernel(&a.kernel)?;
    let fields: Vec<(u64, u32)> = match a.mode {
        Mode::Vertical => {
            let p = p.ok_or_else(|| Failure::Config("vertical sweeps need --p".into()))?;
            require_prime(p)?;
            let kmax = a.kmax.ok_or_else(|| Failure::Config("vertical sweeps need --kmax".into()))?;
            (1..=kmax).map(|k| (p, k)).collect()
        }
        Mode::Horizontal => {
            let (from, to) = match (a.from, a.to) {
                (Some(f), Some(t)) => (f, t),
                _ => return Err(Failure::Config("horizontal sweeps need --from and --to".into())),
            };
            prime_range(from, to)?.into_iter().map(|p| (p, 1)).collect()
        }
    };
    if fields.len() < 2 {
        return Err(Failure::Config(format!("a sweep needs at least two fields, got {}", fields.len())));
    }
    if spec.name == KernelName::Rudnick && fields.iter().any(|&(p, _)| p == 2) {
        return Err(Failure::Config("rudnick sums need odd characteristic; the range contains p = 2".into()));
    }
    // Fail fast on configurations no field could satisfy.
    let first = Field::new(fields[0].0, fields[0].1)?;
    psi_for(&first, psi)?;
    if let Some(m) = &a.measure {
        parse_measure(m, a.haar_samples, seed)?;
    }

    let options = report_options(a.weyl, a.moments, !a.no_ks, None, None);
    let mut rows: Vec<Row> = par_map(&fields, |&(p, k)| {
        let outcome = (|| -> Result<EquidistReport> {
            let field = Field::new(p, k)?;
            let psi = psi_for(&field, psi)?;
            let family = Family::build(&field, &psi, spec)?;
            let meta = match &family {
                Family::Trace(t) => t.meta().clone(),
                Family::Spectrum(s) => s.meta().clone(),
            };
            let measure = match &a.measure {
                Some(m) => parse_measure(m, a.haar_samples, seed)?,
                None => default_measure(&meta, a.haar_samples, seed),
            };
            Ok(build_report(family.input(), &measure, &options)?)
        })();
        Row { p, k, q: p.pow(k), outcome: outcome.map_err(|f| f.message_owned()) }
    });
    rows.sort_by_key(|r| r.q);

    let bytes = if json { rows_json(&rows)? } else { rows_csv(&rows).into_bytes() };
    let ext = if json { "json" } else { "csv" };
    let mode = match a.mode {
        Mode::Vertical => "vertical",
        Mode::Horizontal => "horizontal",
    };
    emit(out, &format!("sweep_{}_{mode}.{ext}", a.kernel), &bytes)?;

    let failed = rows.iter().filter(|r| r.outcome.as_ref().map(|rep| !rep.violations.is_empty()).unwrap_or(true)).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Violations(format!("{failed} of {} rows failed or had violations", rows.len())))
    }
}

fn trend(prev: Option<f64>, cur: Option<f64>) -> &'static str {
    match (prev, cur) {
        (Some(a), Some(b)) if b < a => "down",
        (Some(a), Some(b)) if b > a => "up",
        (Some(_), Some(_)) => "flat",
        _ => "",
    }
}

fn ks_of(r: &Row) -> Option<f64> {
    r.outcome.as_ref().ok().and_then(|rep| rep.ks.as_ref()).map(|k| k.statistic)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn rows_csv(rows: &[Row]) -> String {
    let mut s = String::from(
        "q,p,k,count,ks,ks_trend,moment2,moment4,max_weyl,max_weyl_order,weyl_bound,mean,mean_bound,max_abs,violations,status\n",
    );
    let mut prev = None;
    for r in rows {
        let ks = ks_of(r);
        let t = trend(prev, ks);
        prev = ks.or(prev);
        match &r.outcome {
            Ok(rep) => {
                let m = |o: u32| rep.moment(o).map(|m| m.empirical);
                let w = rep.max_weyl();
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{t},{},{},{},{},{},{},{},{},{},{}",
                    r.q,
                    r.p,
                    r.k,
                    rep.count,
                    opt(ks),
                    opt(m(2)),
                    opt(m(4)),
                    opt(w.map(|w| w.value)),
                    w.map(|w| w.order.to_string()).unwrap_or_default(),
                    opt(w.and_then(|w| w.bound)),
                    opt(rep.mean.as_ref().map(|m| m.value)),
                    opt(rep.mean.as_ref().map(|m| m.bound)),
                    fmt_f64(rep.extremes.max_abs),
                    rep.violations.len(),
                    if rep.violations.is_empty() { "ok" } else { "violation" }
                );
            }
            Err(e) => {
                let _ = writeln!(s, "{},{},{},,,{t},,,,,,,,,,error: {}", r.q, r.p, r.k, e.replace(',', ";"));
            }
        }
    }
    s
}

fn rows_json(rows: &[Row]) -> Result<Vec<u8>> {
    let mut prev = None;
    let values: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            let ks = ks_of(r);
            let t = trend(prev, ks);
            prev = ks.or(prev);
            match &r.outcome {
                Ok(rep) => serde_json::json!({ "q": r.q, "p": r.p, "k": r.k, "ks_trend": t, "report": rep }),
                Err(e) => serde_json::json!({ "q": r.q, "p": r.p, "k": r.k, "ks_trend": t, "error": e }),
            }
        })
        .collect();
    let mut buf = serde_json::to_vec_pretty(&values).map_err(|e| Failure::Runtime(e.to_string()))?;
    buf.push(b'\n');
    Ok(buf)
}
