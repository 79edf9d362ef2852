//! Multiplicative Fourier (Mellin) transforms on `F_q^x`.
//!
//! In generator-log coordinates the character sums of a trace function are a
//! length-`(q-1)` DFT with a positive exponent:
//!
//! ```text
//! S_j = sum_m t_m exp(2 pi i j m / (q-1))
//! t_m = (1/(q-1)) sum_j S_j exp(-2 pi i j m / (q-1))
//! ```
//!
//! `q - 1` is an arbitrary length (often twice a prime), so the fast path is a
//! chirp-z transform over a power-of-two convolution.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::characters::AdditiveCharacter;
use crate::ffield::Field;
use crate::kernels::{GoodnessRule, KernelMeta, KernelName, TraceFunction};
use crate::sum::{sum_complex, unit_root, CompensatedSum, ComplexSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Naive,
    Fast,
    GaussPower,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Naive => "naive",
            Provenance::Fast => "fast",
            Provenance::GaussPower => "gauss-power",
        }
    }
}

/// All `q - 1` character sums of a trace function, indexed by `j`.
#[derive(Debug, Clone)]
pub struct MellinSpectrum {
    field: Field,
    values: Vec<Complex64>,
    provenance: Provenance,
    meta: KernelMeta,
}

impl MellinSpectrum {
    pub fn new(field: &Field, values: Vec<Complex64>, provenance: Provenance, meta: KernelMeta) -> Self {
        assert_eq!(values.len() as u64, field.q() - 1, "spectrum length must be q - 1");
        MellinSpectrum { field: field.clone(), values, provenance, meta }
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn meta(&self) -> &KernelMeta {
        &self.meta
    }

    /// `(j, S_j)` for the characters the kernel's goodness rule keeps.
    pub fn good_values(&self) -> impl Iterator<Item = (u64, Complex64)> + '_ {
        let rule = self.meta.goodness_rule;
        self.values
            .iter()
            .enumerate()
            .map(|(j, &s)| (j as u64, s))
            .filter(move |&(j, _)| rule.is_good(j))
    }

    /// Relative defect of `sum |S_j|^2 = (q-1) sum |t_m|^2`.
    pub fn parseval_defect(&self, t: &TraceFunction) -> f64 {
        let mut lhs = CompensatedSum::default();
        for s in &self.values {
            lhs += s.norm_sqr();
        }
        let mut rhs = CompensatedSum::default();
        for z in t.values() {
            rhs += z.norm_sqr();
        }
        let rhs = rhs.value() * self.values.len() as f64;
        let denom = rhs.abs().max(f64::MIN_POSITIVE);
        if rhs == 0.0 {
            lhs.value().abs()
        } else {
            (lhs.value() - rhs).abs() / denom
        }
    }
}

/// Reusable chirp-z plan for DFTs of a fixed length `n`.
pub struct ChirpZ {
    n: usize,
    len: usize,
    /// `exp(pi i k^2 / n)`.
    chirp: Vec<Complex64>,
    /// FFT of the conjugate chirp laid out for circular convolution.
    kernel: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl ChirpZ {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let len = (2 * n - 1).next_power_of_two();
        let two_n = 2 * n as u64;
        // k^2 mod 2n keeps the phase exact for any k.
        let chirp: Vec<Complex64> = (0..n as u64)
            .map(|k| unit_root(((k as u128 * k as u128) % two_n as u128) as u64, two_n))
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut kernel = vec![Complex64::new(0.0, 0.0); len];
        kernel[0] = chirp[0].conj();
        for k in 1..n {
            kernel[k] = chirp[k].conj();
            kernel[len - k] = chirp[k].conj();
        }
        forward.process(&mut kernel);
        ChirpZ { n, len, chirp, kernel, forward, inverse }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `out_j = sum_m x_m exp(2 pi i j m / n)`.
    pub fn transform(&self, input: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(input.len(), self.n);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (slot, (x, c)) in buf.iter_mut().zip(input.iter().zip(&self.chirp)) {
            *slot = x * c;
        }
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        buf.truncate(self.n);
        buf.iter().zip(&self.chirp).map(|(b, c)| b * c * scale).collect()
    }

    /// `out_m = (1/n) sum_j x_j exp(-2 pi i j m / n)`.
    pub fn inverse_transform(&self, input: &[Complex64]) -> Vec<Complex64> {
        let conj: Vec<Complex64> = input.iter().map(|z| z.conj()).collect();
        let scale = 1.0 / self.n as f64;
        self.transform(&conj).into_iter().map(|z| z.conj() * scale).collect()
    }
}

/// Direct `O(n^2)` DFT with compensated accumulation and exact phases.
pub fn dft_naive(input: &[Complex64]) -> Vec<Complex64> {
    let n = input.len() as u64;
    (0..n)
        .map(|j| {
            let mut acc = ComplexSum::default();
            for (m, &x) in input.iter().enumerate() {
                let e = ((j as u128 * m as u128) % n as u128) as u64;
                acc += x * unit_root(e, n);
            }
            acc.value()
        })
        .collect()
}

pub fn mellin_naive(t: &TraceFunction) -> MellinSpectrum {
    MellinSpectrum::new(t.field(), dft_naive(t.values()), Provenance::Naive, t.meta().clone())
}

pub fn mellin_fast(t: &TraceFunction) -> MellinSpectrum {
    let plan = ChirpZ::new(t.len());
    MellinSpectrum::new(t.field(), plan.transform(t.values()), Provenance::Fast, t.meta().clone())
}

/// Recovers `t` from its character sums: `t(a) = (1/(q-1)) sum_j conj(chi_j(a)) S_j`.
pub fn inverse_mellin(s: &MellinSpectrum) -> TraceFunction {
    let plan = ChirpZ::new(s.values().len());
    TraceFunction::from_parts(s.field(), plan.inverse_transform(s.values()), s.meta().clone())
}

/// `G_j = g(psi, chi_j)` for every `j`, from one fast transform of `psi` on `F_q^x`.
pub fn gauss_spectrum(field: &Field, psi: &AdditiveCharacter) -> MellinSpectrum {
    let logs = field.logs();
    let values: Vec<Complex64> = (0..field.q() - 1).map(|m| psi.eval_index(logs.exp_index(m))).collect();
    let meta = KernelMeta {
        name: KernelName::Gauss,
        n: 1,
        normalized: false,
        goodness_rule: GoodnessRule::NontrivialOnly,
        p: field.p(),
        k: field.k(),
        psi: psi.b().coeffs().to_vec(),
        bound: Some(1.0),
    };
    let plan = ChirpZ::new(values.len());
    MellinSpectrum::new(field, plan.transform(&values), Provenance::Fast, meta)
}

/// Unnormalized `Kl_n(g^m, q)` for every `m`: the spectrum of `a -> Kl_n(a, q)` is
/// `chi -> g(psi, chi)^n`, so one forward and one inverse transform suffice.
pub fn kloosterman_all_fast(field: &Field, psi: &AdditiveCharacter, n: u32) -> TraceFunction {
    let gauss = gauss_spectrum(field, psi);
    let powered: Vec<Complex64> = gauss.values().iter().map(|g| g.powu(n)).collect();
    let plan = ChirpZ::new(powered.len());
    let values = plan.inverse_transform(&powered);
    let meta = KernelMeta {
        name: KernelName::Kloosterman,
        n,
        normalized: false,
        goodness_rule: GoodnessRule::All,
        p: field.p(),
        k: field.k(),
        psi: psi.b().coeffs().to_vec(),
        bound: Some(n as f64 * (field.q() as f64).powf((n as f64 - 1.0) / 2.0)),
    };
    TraceFunction::from_parts(field, values, meta)
}

/// Both sides of `sum_{chi != 1} g(psi, chi)^n = (-1)^(n+1) + (q-1) Kl_n(1, q)`.
pub fn gauss_power_sum_identity(gauss: &MellinSpectrum, kl_at_one: Complex64, n: u32) -> (Complex64, Complex64) {
    let lhs = sum_complex(gauss.values().iter().skip(1).map(|g| g.powu(n)));
    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
    let rhs = Complex64::new(sign, 0.0) + kl_at_one * (gauss.values().len() as f64);
    (lhs, rhs)
}
