//! CSV and JSON layouts for trace tables, spectra, samples, histograms and reports.
//!
//! Floats are written with 17 significant digits so every value reads back
//! bit-exactly. Header lines start with `#` and hold `key=value` pairs.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::characters::gcd;
use crate::equidist::{EquidistReport, HistogramRow};
use crate::ffield::{Field, FieldError};
use crate::kernels::{GoodnessRule, KernelError, KernelMeta, KernelName, TraceFunction};
use crate::mellin::MellinSpectrum;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Shortest form that round-trips: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn psi_string(psi: &[u64]) -> String {
    if psi.is_empty() {
        "-".to_string()
    } else {
        psi.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
    }
}

fn goodness_str(rule: GoodnessRule) -> &'static str {
    match rule {
        GoodnessRule::All => "all",
        GoodnessRule::NontrivialOnly => "nontrivial",
    }
}

/// `# kernel=kloosterman p=7 k=1 n=2 normalized=true goodness=all psi=1`
pub fn meta_header(meta: &KernelMeta) -> String {
    format!(
        "# kernel={} p={} k={} n={} normalized={} goodness={} psi={}",
        meta.name.as_str(),
        meta.p,
        meta.k,
        meta.n,
        meta.normalized,
        goodness_str(meta.goodness_rule),
        psi_string(&meta.psi).replace(' ', ":")
    )
}

/// Parses the `key=value` pairs of every `#` line.
pub fn parse_header(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.trim_start().strip_prefix('#'))
        .flat_map(|l| l.split_whitespace())
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn meta_from_header(h: &BTreeMap<String, String>) -> Result<KernelMeta, FormatError> {
    let get = |key: &str| h.get(key).ok_or_else(|| FormatError::Parse(format!("header is missing `{key}`")));
    let num = |key: &str| -> Result<u64, FormatError> {
        get(key)?.parse().map_err(|_| FormatError::Parse(format!("bad `{key}` in header")))
    };
    let name = KernelName::parse(get("kernel")?).ok_or_else(|| FormatError::Parse("unknown kernel in header".into()))?;
    let psi = match h.get("psi").map(String::as_str) {
        None | Some("-") => Vec::new(),
        Some(s) => s
            .split(':')
            .map(|c| c.parse().map_err(|_| FormatError::Parse("bad `psi` in header".into())))
            .collect::<Result<_, _>>()?,
    };
    let goodness_rule = match h.get("goodness").map(String::as_str) {
        Some("nontrivial") => GoodnessRule::NontrivialOnly,
        _ => GoodnessRule::All,
    };
    let p = num("p")?;
    let k = num("k")? as u32;
    let n = h.get("n").map(|s| s.parse().unwrap_or(1)).unwrap_or(1);
    let normalized = h.get("normalized").map(|s| s == "true").unwrap_or(false);
    let mut meta = KernelMeta { name, n, normalized, goodness_rule, p, k, psi, bound: None };
    meta.bound = meta.spec().value_bound(meta.q());
    Ok(meta)
}

/// Columns `m, element, re, im` with `element = g^m` as its coefficient vector.
pub fn write_trace_csv<W: Write>(t: &TraceFunction, mut w: W) -> io::Result<()> {
    writeln!(w, "{}", meta_header(t.meta()))?;
    writeln!(w, "m,element,re,im")?;
    let field = t.field();
    for (m, z) in t.values().iter().enumerate() {
        writeln!(w, "{m},{},{},{}", field.exp(m as u64), fmt_f64(z.re), fmt_f64(z.im))?;
    }
    Ok(())
}

/// Reads a trace table back, rebuilding its field from the header.
pub fn read_trace_csv<R: Read>(mut r: R) -> Result<TraceFunction, FormatError> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let meta = meta_from_header(&parse_header(&text))?;
    let field = Field::new(meta.p, meta.k)?;
    let values = read_complex_columns(text.as_bytes())?;
    Ok(TraceFunction::custom(&field, values)?.with_meta(meta))
}

/// Columns `j, order, re, im, abs`; `order` is the order of `chi_j`.
pub fn write_spectrum_csv<W: Write>(s: &MellinSpectrum, mut w: W) -> io::Result<()> {
    writeln!(w, "{} provenance={}", meta_header(s.meta()), s.provenance().as_str())?;
    writeln!(w, "j,order,re,im,abs")?;
    let n = s.values().len() as u64;
    for (j, z) in s.values().iter().enumerate() {
        let order = n / gcd(j as u64, n);
        writeln!(w, "{j},{order},{},{},{}", fmt_f64(z.re), fmt_f64(z.im), fmt_f64(z.norm()))?;
    }
    Ok(())
}

/// Columns `index, re, im`, preceded by free-form header pairs.
pub fn write_samples_csv<W: Write>(values: &[Complex64], header: &[(&str, String)], mut w: W) -> io::Result<()> {
    if !header.is_empty() {
        let pairs: Vec<String> = header.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(w, "# {}", pairs.join(" "))?;
    }
    writeln!(w, "index,re,im")?;
    for (i, z) in values.iter().enumerate() {
        writeln!(w, "{i},{},{}", fmt_f64(z.re), fmt_f64(z.im))?;
    }
    Ok(())
}

/// Reads the `re` (and `im`, if present) columns of any of the CSV layouts here,
/// or a single unnamed numeric column.
pub fn read_complex_columns<R: Read>(r: R) -> Result<Vec<Complex64>, FormatError> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
    let headers = reader.headers()?.clone();
    let pos = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let parse = |s: &str| s.parse::<f64>().map_err(|_| FormatError::Parse(format!("not a number: `{s}`")));
    let (re_col, im_col, skip_header) = match (pos("re"), pos("im")) {
        (Some(re), im) => (re, im, false),
        (None, _) if headers.len() == 1 && parse(&headers[0]).is_ok() => (0, None, true),
        (None, _) if headers.len() == 1 => (0, None, false),
        _ => return Err(FormatError::Parse("no `re` column".into())),
    };
    let mut out = Vec::new();
    if skip_header {
        out.push(Complex64::new(parse(&headers[0])?, 0.0));
    }
    for record in reader.records() {
        let record = record?;
        let field = |c: usize| record.get(c).ok_or_else(|| FormatError::Parse("short row".into()));
        let re = parse(field(re_col)?)?;
        let im = match im_col {
            Some(c) => parse(field(c)?)?,
            None => 0.0,
        };
        out.push(Complex64::new(re, im));
    }
    Ok(out)
}

/// Columns `lo, hi, count, density, reference_density`.
pub fn write_histogram_csv<W: Write>(rows: &[HistogramRow], mut w: W) -> io::Result<()> {
    writeln!(w, "lo,hi,count,density,reference_density")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", fmt_f64(r.lo), fmt_f64(r.hi), r.count, fmt_f64(r.density), fmt_f64(r.reference_density))?;
    }
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// One row per statistic: `section, order, value, reference, bound, formula`.
pub fn write_report_csv<W: Write>(report: &EquidistReport, mut w: W) -> io::Result<()> {
    writeln!(w, "# kernel={} count={} measure={}", report.kernel, report.count, report.measure)?;
    writeln!(w, "section,order,value,reference,bound,formula")?;
    for row in &report.weyl {
        writeln!(w, "weyl,{},{},,{},{}", row.order, fmt_f64(row.value), opt(row.bound), row.formula.as_deref().unwrap_or(""))?;
    }
    for m in &report.moments {
        writeln!(w, "moment,{},{},{},,", m.order, fmt_f64(m.empirical), fmt_f64(m.reference))?;
    }
    if let Some(mean) = &report.mean {
        writeln!(w, "mean,,{},,{},{}", fmt_f64(mean.value), fmt_f64(mean.bound), mean.formula)?;
    }
    if let Some(ks) = &report.ks {
        writeln!(w, "ks,,{},,,", fmt_f64(ks.statistic))?;
    }
    writeln!(w, "max_abs,,{},,,", fmt_f64(report.extremes.max_abs))?;
    writeln!(w, "min_abs,,{},,,", fmt_f64(report.extremes.min_abs))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characters::AdditiveCharacter;
    use crate::equidist::{build_report, histogram, ReferenceMeasure, ReportInput, ReportOptions};
    use crate::kernels::{make_kernel, KernelSpec};
    use crate::mellin::mellin_fast;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, std::f64::consts::PI, 1e-300, -2.5e17, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn trace_round_trip() {
        let f = Field::new(3, 2).unwrap();
        let psi = AdditiveCharacter::standard(&f);
        let t = make_kernel(&f, &psi, KernelSpec::kloosterman(2)).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# kernel=kloosterman p=3 k=2 n=2 normalized=true"));
        assert_eq!(text.lines().nth(2).unwrap().split(',').nth(1).unwrap(), "1 0");
        let back = read_trace_csv(text.as_bytes()).unwrap();
        assert_eq!(back.values(), t.values());
        assert_eq!(back.meta(), t.meta());
    }

    #[test]
    fn raw_kloosterman_rows_at_three() {
        let f = Field::new(3, 1).unwrap();
        let psi = AdditiveCharacter::standard(&f);
        let t = make_kernel(&f, &psi, KernelSpec::kloosterman(2).raw()).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&t, &mut buf).unwrap();
        let values = read_complex_columns(&buf[..]).unwrap();
        assert_eq!(values.len(), 2);
        assert!((values[0].re + 1.0).abs() < 1e-12 && (values[1].re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_columns() {
        let f = Field::new(7, 1).unwrap();
        let psi = AdditiveCharacter::standard(&f);
        let s = mellin_fast(&make_kernel(&f, &psi, KernelSpec::gauss()).unwrap());
        let mut buf = Vec::new();
        write_spectrum_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().skip(2).collect();
        assert_eq!(rows.len(), 6);
        let orders: Vec<&str> = rows.iter().map(|r| r.split(',').nth(1).unwrap()).collect();
        assert_eq!(orders, ["1", "6", "3", "2", "3", "6"]);
        assert!(parse_header(&text).get("provenance").is_some());
        let values = read_complex_columns(text.as_bytes()).unwrap();
        assert_eq!(values.as_slice(), s.values());
    }

    #[test]
    fn samples_and_plain_columns() {
        let v = vec![Complex64::new(0.5, -0.25), Complex64::new(-1.0, 0.0)];
        let mut buf = Vec::new();
        write_samples_csv(&v, &[("group", "su2".into())], &mut buf).unwrap();
        assert_eq!(read_complex_columns(&buf[..]).unwrap(), v);
        assert_eq!(read_complex_columns("1.5\n-2\n".as_bytes()).unwrap(), vec![Complex64::new(1.5, 0.0), Complex64::new(-2.0, 0.0)]);
        assert_eq!(read_complex_columns("value\n3\n".as_bytes()).unwrap(), vec![Complex64::new(3.0, 0.0)]);
        assert!(read_complex_columns("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_complex_columns("re\nx\n".as_bytes()).is_err());
    }

    #[test]
    fn report_and_histogram_csv() {
        let f = Field::new(101, 1).unwrap();
        let psi = AdditiveCharacter::standard(&f);
        let s = mellin_fast(&make_kernel(&f, &psi, KernelSpec::evans()).unwrap());
        let report = build_report(ReportInput::Spectrum(&s), &ReferenceMeasure::Semicircle, &ReportOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_report_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().any(|l| l.starts_with("mean,,") && l.ends_with("2*(rank+dim_omega)/sqrt(q)")));
        let xs: Vec<f64> = s.values().iter().map(|z| z.re).collect();
        let rows = histogram(&xs, 40, &ReferenceMeasure::Semicircle).unwrap();
        let mut buf = Vec::new();
        write_histogram_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 41);
    }
}
