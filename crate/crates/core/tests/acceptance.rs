//! Acceptance criteria, one line per criterion. Runs as a plain binary
//! (`harness = false`) so the summary prints in order and the exit code
//! reflects any failure.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use expsum::characters::AdditiveCharacter;
use expsum::equidist::{
    build_report, empirical_moments, ks_statistic, predicted_bound, semicircle_moment, weyl_sums, BoundKind,
    BoundParams, ReferenceMeasure, ReportInput, ReportOptions,
};
use expsum::ffield::{primes_in_range, Field};
use expsum::haar::{sample_unitary, trace_samples, GroupSpec, SeededRng};
use expsum::kernels::{kloosterman_all_naive, make_kernel, KernelError, KernelSpec};
use expsum::mellin::{gauss_spectrum, kloosterman_all_fast, mellin_fast};
use expsum::ramification::{builtin_profile, Rational};
use expsum::sum::sum_f64;
use num_complex::Complex64;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn field(p: u64, k: u32) -> Field {
    Field::new(p, k).unwrap_or_else(|e| panic!("F_{p}^{k}: {e}"))
}

/// Every prime power `p^k <= limit`, as `(p, k)` sorted by `q`.
fn prime_powers(limit: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    for p in primes_in_range(2, limit) {
        let (mut q, mut k) = (p, 1u32);
        while q <= limit {
            out.push((p, k));
            q *= p;
            k += 1;
        }
    }
    out.sort_by_key(|&(p, k)| p.pow(k));
    out
}

fn gauss_set() -> Vec<(u64, u32)> {
    let mut set: Vec<(u64, u32)> = primes_in_range(2, 500).into_iter().map(|p| (p, 1)).collect();
    set.extend([(2, 2), (2, 3), (3, 2), (2, 4), (5, 2), (3, 3), (2, 5), (7, 2), (2, 6), (3, 4), (11, 2), (2, 7)]);
    set
}

fn c1_gauss_magnitudes() -> Outcome {
    let set = gauss_set();
    let mut worst_rel = 0.0f64;
    let mut worst_trivial = 0.0f64;
    for &(p, k) in &set {
        let f = field(p, k);
        let q = f.q() as f64;
        let g = gauss_spectrum(&f, &AdditiveCharacter::standard(&f));
        let trivial = (g.values()[0] - Complex64::new(-1.0, 0.0)).norm();
        ensure(trivial <= 1e-8, || format!("q = {q}: g(psi, chi_0) = {}", g.values()[0]))?;
        worst_trivial = worst_trivial.max(trivial);
        for (j, z) in g.values().iter().enumerate().skip(1) {
            let rel = (z.norm() - q.sqrt()).abs() / q.sqrt();
            ensure(rel <= 1e-6, || format!("q = {q}, j = {j}: |g| = {}", z.norm()))?;
            worst_rel = worst_rel.max(rel);
        }
    }
    Ok(format!("{} fields, max ||g|-sqrt q|/sqrt q = {worst_rel:.2e}, max |g0+1| = {worst_trivial:.2e}", set.len()))
}

fn c2_fourth_moment() -> Outcome {
    let mut worst = 0.0f64;
    for q in [3u64, 7, 101, 1009, 10007] {
        let f = field(q, 1);
        let t = make_kernel(&f, &AdditiveCharacter::standard(&f), KernelSpec::kloosterman(2).raw()).map_err(|e| e.to_string())?;
        let s = sum_f64(t.values().iter().map(|z| z.re.powi(4)));
        let qf = q as f64;
        let expected = 2.0 * qf.powi(3) - 3.0 * qf * qf - 3.0 * qf - 1.0;
        let rel = (s - expected).abs() / expected;
        ensure(rel <= 1e-8, || format!("q = {q}: sum = {s}, expected {expected}"))?;
        if q == 3 {
            ensure(s == 17.0, || format!("q = 3: sum = {s:?}, expected exactly 17"))?;
        }
        worst = worst.max(rel);
    }
    Ok(format!("q in {{3, 7, 101, 1009, 10007}}, max rel err = {worst:.2e}, q = 3 gives 17"))
}

fn c3_oracle_equivalence() -> Outcome {
    let fields = prime_powers(101);
    let mut worst = 0.0f64;
    for &(p, k) in &fields {
        let f = field(p, k);
        let psi = AdditiveCharacter::standard(&f);
        for n in 1..=4u32 {
            let naive = kloosterman_all_naive(&f, &psi, n).map_err(|e| format!("q = {}, n = {n}: {e}", f.q()))?;
            let fast = kloosterman_all_fast(&f, &psi, n);
            let scale = (f.q() as f64).powf((n as f64 - 1.0) / 2.0);
            let diff = naive.iter().zip(fast.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            ensure(diff <= 1e-6 * scale, || format!("q = {}, n = {n}: max diff {diff:.3e}", f.q()))?;
            worst = worst.max(diff / scale);
        }
    }
    Ok(format!("{} fields q <= 101, n = 1..4, max diff / q^((n-1)/2) = {worst:.2e}", fields.len()))
}

fn c4_deligne_bound() -> Outcome {
    let fields = prime_powers(10007);
    let worst = fields
        .par_iter()
        .map(|&(p, k)| -> Result<f64, String> {
            let f = field(p, k);
            let psi = AdditiveCharacter::standard(&f);
            let mut worst = 0.0f64;
            for n in 2..=4u32 {
                let t = kloosterman_all_fast(&f, &psi, n);
                let bound = n as f64 * (f.q() as f64).powf((n as f64 - 1.0) / 2.0);
                let max = t.max_abs();
                ensure(max <= bound * (1.0 + 1e-6), || format!("q = {}, n = {n}: max |Kl| = {max} > {bound}", f.q()))?;
                worst = worst.max(max / bound);
            }
            Ok(worst)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
    Ok(format!("{} fields q <= 10007, n = 2..4, max |Kl_n| / (n q^((n-1)/2)) = {worst:.6}", fields.len()))
}

fn c5_gauss_weyl() -> Outcome {
    let mut checked = 0;
    let mut worst = 0.0f64;
    for (p, k) in gauss_set() {
        let f = field(p, k);
        let q = f.q();
        if q <= 2 {
            // No nontrivial characters.
            continue;
        }
        let g = gauss_spectrum(&f, &AdditiveCharacter::standard(&f));
        let angles: Vec<Complex64> = g.values()[1..].iter().map(|z| z / (q as f64).sqrt()).collect();
        let w = weyl_sums(&angles, 10).map_err(|e| e.to_string())?;
        for (i, wn) in w.iter().enumerate() {
            let n = i as u32 + 1;
            let bound = predicted_bound(BoundKind::GaussWeyl, &BoundParams { q: Some(q), n: Some(n), ..Default::default() })
                .map_err(|e| e.to_string())?;
            ensure(*wn <= bound + 1e-12, || format!("q = {q}, n = {n}: |W_n| = {wn} > {bound}"))?;
            worst = worst.max(wn / bound);
        }
        checked += 1;
    }
    Ok(format!("{checked} fields (q = 2 vacuous), n = 1..10, max |W_n| / bound = {worst:.4}"))
}

fn kl2_report(q: u64) -> Result<expsum::EquidistReport, String> {
    let f = field(q, 1);
    let t = make_kernel(&f, &AdditiveCharacter::standard(&f), KernelSpec::kloosterman(2)).map_err(|e| e.to_string())?;
    build_report(ReportInput::Kernel(&t), &ReferenceMeasure::SatoTate, &ReportOptions::default()).map_err(|e| e.to_string())
}

/// Averaged odd Chebyshev characters `U_m(x/2)`, scaled by `sqrt(q)`, shown when an odd moment misses.
fn odd_moment_diagnostic(q: u64, r: u32) -> String {
    let f = field(q, 1);
    let t = match make_kernel(&f, &AdditiveCharacter::standard(&f), KernelSpec::kloosterman(2)) {
        Ok(t) => t,
        Err(e) => return e.to_string(),
    };
    let xs: Vec<f64> = t.values().iter().map(|z| z.re).collect();
    let u = expsum::equidist::su2_weyl_sums(&xs, r).unwrap_or_default();
    let scaled: Vec<String> = u.iter().enumerate().step_by(2).map(|(i, w)| format!("U_{}: {:.3}", i + 1, w * (q as f64).sqrt())).collect();
    format!("; |mean U_m| * sqrt(q) = [{}]", scaled.join(", "))
}

fn c6_sato_tate() -> Outcome {
    let big = kl2_report(10007)?;
    let small = kl2_report(101)?;
    ensure(big.is_clean(), || format!("violations: {:?}", big.violations))?;
    let expected = [0.0, 1.0, 0.0, 2.0, 0.0, 5.0, 0.0, 14.0];
    let mut worst = 0.0f64;
    for (r, e) in (1..=8u32).zip(expected) {
        let m = big.moment(r).ok_or("missing moment")?;
        ensure((m.empirical - e).abs() <= 0.1, || {
            format!("order {r}: {} vs {e}{}", m.empirical, if r % 2 == 1 { odd_moment_diagnostic(10007, r) } else { String::new() })
        })?;
        worst = worst.max((m.empirical - e).abs());
    }
    let ks_big = big.ks.as_ref().ok_or("missing ks")?.statistic;
    let ks_small = small.ks.as_ref().ok_or("missing ks")?.statistic;
    ensure(ks_big < 0.05, || format!("KS(10007) = {ks_big}"))?;
    ensure(ks_big < ks_small, || format!("KS(10007) = {ks_big} >= KS(101) = {ks_small}"))?;
    Ok(format!("max moment diff = {worst:.4}, KS(10007) = {ks_big:.4} < KS(101) = {ks_small:.4}"))
}

fn c7_evans_rudnick() -> Outcome {
    let f = field(10007, 1);
    let psi = AdditiveCharacter::standard(&f);
    let mut parts = Vec::new();
    for spec in [KernelSpec::evans(), KernelSpec::rudnick()] {
        let s = mellin_fast(&make_kernel(&f, &psi, spec).map_err(|e| e.to_string())?);
        let good: Vec<(u64, Complex64)> = s.good_values().collect();
        let max = good.iter().map(|(_, z)| z.norm()).fold(0.0, f64::max);
        ensure(max <= 2.0 + 1e-6, || format!("{}: max |S| = {max}", spec.name.as_str()))?;
        let xs: Vec<f64> = good.iter().map(|(_, z)| z.re).collect();
        let moments = empirical_moments(&xs, &[2, 4, 6]).map_err(|e| e.to_string())?;
        for (r, m) in moments {
            let c = semicircle_moment(r);
            ensure((m - c).abs() <= 0.1, || format!("{}: moment {r} = {m} vs {c}", spec.name.as_str()))?;
        }
        parts.push(format!("{} {} good chars, max |S| = {max:.6}", spec.name.as_str(), good.len()));
    }
    let rudnick = mellin_fast(&make_kernel(&f, &psi, KernelSpec::rudnick()).map_err(|e| e.to_string())?);
    ensure(rudnick.good_values().all(|(j, _)| j != 0), || "rudnick kept chi_0".into())?;
    ensure(rudnick.good_values().count() as u64 == f.q() - 2, || "rudnick good count".into())?;
    let f2 = field(2, 3);
    let even = make_kernel(&f2, &AdditiveCharacter::standard(&f2), KernelSpec::rudnick());
    ensure(matches!(even, Err(KernelError::RudnickEvenChar(2))), || format!("even p accepted: {:?}", even.err()))?;
    Ok(format!("{}; chi_0 and p = 2 excluded", parts.join("; ")))
}

fn c8_mean_bound() -> Outcome {
    let primes = primes_in_range(101, 10007);
    let kernels = [(KernelSpec::gauss(), 1u32), (KernelSpec::evans(), 2), (KernelSpec::rudnick(), 2)];
    let worst = primes
        .par_iter()
        .map(|&p| -> Result<f64, String> {
            let f = field(p, 1);
            let psi = AdditiveCharacter::standard(&f);
            let mut worst = 0.0f64;
            for (spec, dim) in kernels {
                let s = mellin_fast(&make_kernel(&f, &psi, spec).map_err(|e| e.to_string())?);
                let good: Vec<Complex64> = s.good_values().map(|(_, z)| z).collect();
                let mean = good.iter().sum::<Complex64>().norm() / good.len() as f64;
                let bound = 2.0 * (1.0 + dim as f64) / (p as f64).sqrt();
                ensure(mean <= bound, || format!("{} at p = {p}: |mean| = {mean} > {bound}", spec.name.as_str()))?;
                worst = worst.max(mean / bound);
            }
            Ok(worst)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
    Ok(format!("{} primes in [101, 10007] x 3 kernels, max |mean| / bound = {worst:.4}", primes.len()))
}

fn c9_ramification() -> Outcome {
    for (name, euler) in [("gauss", 1u64), ("evans", 2), ("rudnick", 2)] {
        let rep = builtin_profile(name).and_then(|p| p.report()).map_err(|e| e.to_string())?;
        ensure(rep.euler_char == euler && rep.tannakian_dim == euler, || format!("{name}: {rep}"))?;
        ensure(rep.bad_char_bound == 2, || format!("{name}: {rep}"))?;
        ensure(rep.deligne_constant.is_none(), || format!("{name}: {rep}"))?;
    }
    for n in 1..=8u32 {
        let rep = builtin_profile(&format!("kloosterman({n})")).and_then(|p| p.report()).map_err(|e| e.to_string())?;
        ensure(rep.euler_char == 1 && rep.tannakian_dim == 1, || rep.to_string())?;
        ensure(rep.bad_char_bound == 2 * n as u64, || rep.to_string())?;
        ensure(rep.deligne_constant == Some(Rational::new(1, n as i64)), || rep.to_string())?;
    }
    Ok("dims (1, 2, 2, 1), bad bounds (2, 2, 2, 2n), Deligne 1/n for n = 1..8".into())
}

fn c10_haar() -> Outcome {
    let xs = trace_samples(GroupSpec::SU2, 1_000_000, 20240601).real_parts();
    let n = xs.len() as f64;
    let mut worst = 0.0f64;
    for (m, c) in [(1u32, 1.0), (2, 2.0), (3, 5.0), (4, 14.0)] {
        let r = 2 * m as i32;
        let mean = sum_f64(xs.iter().map(|x| x.powi(r))) / n;
        let var = sum_f64(xs.iter().map(|x| (x.powi(r) - mean).powi(2))) / (n - 1.0);
        let se = (var / n).sqrt();
        ensure((mean - c).abs() <= 3.0 * se, || format!("order {r}: {mean} vs {c}, se {se}"))?;
        worst = worst.max((mean - c).abs() / se);
    }
    let angle = trace_samples(GroupSpec::SU2, 100_000, 7).real_parts();
    let mut rng = SeededRng::stream(7, 1);
    let matrix: Vec<f64> = (0..100_000).map(|_| sample_unitary(GroupSpec::SUn(2), &mut rng).trace().re).collect();
    let ks = expsum::equidist::two_sample_ks(&angle, &matrix);
    ensure(ks < 0.01, || format!("two-sample KS = {ks}"))?;
    Ok(format!("even moments within {worst:.2} SE, angle vs QR two-sample KS = {ks:.4}"))
}

fn c11_cross_validation() -> Outcome {
    let kl = kl2_report(10007)?;
    let xs = trace_samples(GroupSpec::SU2, 1_000_000, 31337).real_parts();
    let orders: Vec<u32> = (1..=8).collect();
    let haar = empirical_moments(&xs, &orders).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (r, h) in haar {
        let m = kl.moment(r).ok_or("missing moment")?.empirical;
        ensure((m - h).abs() <= 0.1, || {
            format!("order {r}: Kl2 {m} vs Haar {h}{}", if r % 2 == 1 { odd_moment_diagnostic(10007, r) } else { String::new() })
        })?;
        worst = worst.max((m - h).abs());
    }
    let ks = ks_statistic(&xs.iter().map(|x| (x / 2.0).acos()).collect::<Vec<_>>(), &ReferenceMeasure::SatoTate)
        .map_err(|e| e.to_string())?;
    Ok(format!("orders 1..8, max |Kl2 - Haar| = {worst:.4} (Haar sample KS vs Sato-Tate = {ks:.4})"))
}

fn c12_performance() -> Outcome {
    let f = field(1_000_003, 1);
    let psi = AdditiveCharacter::standard(&f);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let t = pool.install(|| kloosterman_all_fast(&f, &psi, 2));
    let elapsed = start.elapsed();
    ensure(t.len() as u64 == f.q() - 1, || "wrong length".into())?;
    let bound = 2.0 * (f.q() as f64).sqrt();
    ensure(t.max_abs() <= bound * (1.0 + 1e-6), || format!("max |Kl2| = {}", t.max_abs()))?;
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:.2?}"))?;
    let naive = kloosterman_all_naive(&f, &psi, 2);
    ensure(matches!(naive, Err(KernelError::CostGuard { .. })), || "naive path was not rejected".into())?;
    Ok(format!("fast all-a Kl2 at q = 1000003 in {elapsed:.2?} on one thread; naive rejected by cost guard"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 12] = [
        ("gauss magnitudes", c1_gauss_magnitudes, Some(Duration::from_secs(30))),
        ("fourth moment of Kl2", c2_fourth_moment, None),
        ("fast vs naive Kloosterman", c3_oracle_equivalence, Some(Duration::from_secs(60))),
        ("Deligne bound", c4_deligne_bound, None),
        ("Gauss Weyl bound", c5_gauss_weyl, None),
        ("Sato-Tate for Kl2", c6_sato_tate, None),
        ("Evans and Rudnick", c7_evans_rudnick, None),
        ("mean over good characters", c8_mean_bound, None),
        ("ramification calculator", c9_ramification, None),
        ("Haar samplers", c10_haar, None),
        ("Kl2 vs SU(2) moments", c11_cross_validation, None),
        ("performance", c12_performance, None),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| *f == id.to_string() || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(limit)) if elapsed > *limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            (o, _) => o,
        };
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {id:>2} {tag} {name}: {detail} [{elapsed:.2?}]");
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
