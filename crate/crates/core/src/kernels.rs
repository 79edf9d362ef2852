//! Trace functions on `F_q^x` and the scalar sums they come from.
//!
//! A [`TraceFunction`] stores `t(g^m)` for `m = 0..q-1` in generator-log order,
//! so its character sums are a DFT of length `q - 1` (see [`crate::mellin`]).
//! Normalized kernels carry the sign and half-twist that make their character
//! sums the unit-scale quantities studied for equidistribution:
//!
//! | kernel        | `t(x)` (normalized)                       |
//! |---------------|-------------------------------------------|
//! | gauss         | `-psi(x) / sqrt(q)`                       |
//! | evans         | `-psi(x - 1/x) / sqrt(q)`                 |
//! | rudnick       | `-psi((x+1)/(x-1)) / sqrt(q)`, `t(1) = 0` |
//! | kloosterman n | `(-1)^(n-1) Kl_n(x, q) / q^((n-1)/2)`     |

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::characters::{AdditiveCharacter, MultiplicativeCharacter};
use crate::ffield::{Field, FieldElement};
use crate::mellin;
use crate::sum::{sum_complex, unit_root, ComplexSum};

/// Per-argument enumeration limit for the definitional Kloosterman sum.
pub const NAIVE_KL_LIMIT: f64 = 1e8;
/// Limit on `(q-1)^n`, the cost of the definitional sum at every argument.
pub const NAIVE_KL_ALL_LIMIT: f64 = 1e8;
/// `make_kernel` switches from the definitional sums to the Gauss-power path above this.
pub const KERNEL_NAIVE_BUDGET: f64 = 1e6;
pub const MAX_NAIVE_KL_N: u32 = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("the additive character is trivial")]
    TrivialPsi,
    #[error("Kloosterman sums need a nonzero argument")]
    ZeroArgument,
    #[error("naive evaluation costs {cost:.3e} terms, above the limit {limit:.0e}")]
    CostGuard { cost: f64, limit: f64 },
    #[error("Rudnick sums need odd characteristic, got p = {0}")]
    RudnickEvenChar(u64),
    #[error("invalid kernel: {0}")]
    InvalidSpec(String),
    #[error("value {value} lies outside [-{halfwidth}, {halfwidth}]")]
    OutOfRange { value: f64, halfwidth: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelName {
    Gauss,
    Kloosterman,
    Evans,
    Rudnick,
    Custom,
}

impl KernelName {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelName::Gauss => "gauss",
            KernelName::Kloosterman => "kloosterman",
            KernelName::Evans => "evans",
            KernelName::Rudnick => "rudnick",
            KernelName::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gauss" => Some(KernelName::Gauss),
            "kloosterman" => Some(KernelName::Kloosterman),
            "evans" => Some(KernelName::Evans),
            "rudnick" => Some(KernelName::Rudnick),
            "custom" => Some(KernelName::Custom),
            _ => None,
        }
    }
}

/// Which multiplicative characters are good for a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoodnessRule {
    All,
    NontrivialOnly,
}

impl GoodnessRule {
    pub fn is_good(self, chi_index: u64) -> bool {
        match self {
            GoodnessRule::All => true,
            GoodnessRule::NontrivialOnly => chi_index != 0,
        }
    }

    /// Number of characters the rule excludes.
    pub fn excluded(self) -> usize {
        match self {
            GoodnessRule::All => 0,
            GoodnessRule::NontrivialOnly => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub name: KernelName,
    /// Number of variables; only meaningful for Kloosterman sums.
    pub n: u32,
    pub normalized: bool,
    pub goodness_rule: GoodnessRule,
}

impl KernelSpec {
    pub fn gauss() -> Self {
        KernelSpec {
            name: KernelName::Gauss,
            n: 1,
            normalized: true,
            goodness_rule: GoodnessRule::NontrivialOnly,
        }
    }

    pub fn evans() -> Self {
        KernelSpec { name: KernelName::Evans, n: 1, normalized: true, goodness_rule: GoodnessRule::All }
    }

    pub fn rudnick() -> Self {
        KernelSpec {
            name: KernelName::Rudnick,
            n: 1,
            normalized: true,
            goodness_rule: GoodnessRule::NontrivialOnly,
        }
    }

    pub fn kloosterman(n: u32) -> Self {
        KernelSpec { name: KernelName::Kloosterman, n, normalized: true, goodness_rule: GoodnessRule::All }
    }

    pub fn custom() -> Self {
        KernelSpec { name: KernelName::Custom, n: 1, normalized: false, goodness_rule: GoodnessRule::All }
    }

    pub fn raw(mut self) -> Self {
        self.normalized = false;
        self
    }

    /// Sup-norm bound on the normalized values, or `None` when no bound is known.
    pub fn value_bound(&self, q: u64) -> Option<f64> {
        let q = q as f64;
        let scale = |normalized: f64, raw: f64| Some(if self.normalized { normalized } else { raw });
        match self.name {
            KernelName::Gauss | KernelName::Evans | KernelName::Rudnick => scale(1.0 / q.sqrt(), 1.0),
            KernelName::Kloosterman => {
                let n = self.n as f64;
                scale(n, n * q.powf((n - 1.0) / 2.0))
            }
            KernelName::Custom => None,
        }
    }

    pub fn validate(&self, field: &Field) -> Result<(), KernelError> {
        match self.name {
            KernelName::Kloosterman if self.n == 0 => {
                Err(KernelError::InvalidSpec("Kloosterman sums need n >= 1".into()))
            }
            KernelName::Rudnick if field.p() == 2 => Err(KernelError::RudnickEvenChar(2)),
            KernelName::Custom => {
                Err(KernelError::InvalidSpec("custom kernels are built with TraceFunction::custom".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Provenance recorded alongside every trace function and spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub name: KernelName,
    pub n: u32,
    pub normalized: bool,
    pub goodness_rule: GoodnessRule,
    pub p: u64,
    pub k: u32,
    /// Coefficients of the additive twist `b`; empty for custom data.
    pub psi: Vec<u64>,
    pub bound: Option<f64>,
}

impl KernelMeta {
    pub fn spec(&self) -> KernelSpec {
        KernelSpec {
            name: self.name,
            n: self.n,
            normalized: self.normalized,
            goodness_rule: self.goodness_rule,
        }
    }

    pub fn q(&self) -> u64 {
        self.p.pow(self.k)
    }

    /// Short label such as `kl2` or `evans`.
    pub fn label(&self) -> String {
        match self.name {
            KernelName::Kloosterman => format!("kl{}", self.n),
            other => other.as_str().to_string(),
        }
    }
}

/// A complex function on `F_q^x`, stored by discrete logarithm.
#[derive(Debug, Clone)]
pub struct TraceFunction {
    field: Field,
    values: Vec<Complex64>,
    meta: KernelMeta,
}

impl TraceFunction {
    pub(crate) fn from_parts(field: &Field, values: Vec<Complex64>, meta: KernelMeta) -> Self {
        debug_assert_eq!(values.len() as u64, field.q() - 1);
        TraceFunction { field: field.clone(), values, meta }
    }

    /// Wraps caller-supplied values `t(g^m)`.
    pub fn custom(field: &Field, values: Vec<Complex64>) -> Result<Self, KernelError> {
        if values.len() as u64 != field.q() - 1 {
            return Err(KernelError::InvalidSpec(format!(
                "expected {} values, got {}",
                field.q() - 1,
                values.len()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(KernelError::InvalidSpec("values must be finite".into()));
        }
        let meta = KernelMeta {
            name: KernelName::Custom,
            n: 1,
            normalized: false,
            goodness_rule: GoodnessRule::All,
            p: field.p(),
            k: field.k(),
            psi: Vec::new(),
            bound: None,
        };
        Ok(TraceFunction { field: field.clone(), values, meta })
    }

    pub fn with_meta(mut self, meta: KernelMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn meta(&self) -> &KernelMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `t(x)` for nonzero `x`.
    pub fn at(&self, x: &FieldElement) -> Option<Complex64> {
        self.field.log(x).map(|m| self.values[m as usize])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn require_nontrivial(psi: &AdditiveCharacter) -> Result<(), KernelError> {
    if psi.is_trivial() {
        Err(KernelError::TrivialPsi)
    } else {
        Ok(())
    }
}

/// `g(psi, chi) = sum_{x != 0} psi(x) chi(x)`, summed directly.
pub fn gauss_sum(
    field: &Field,
    psi: &AdditiveCharacter,
    chi: &MultiplicativeCharacter,
) -> Result<Complex64, KernelError> {
    require_nontrivial(psi)?;
    let logs = field.logs();
    Ok(sum_complex(
        (0..field.q() - 1).map(|m| psi.eval_index(logs.exp_index(m)) * chi.eval_log(m)),
    ))
}

/// Definitional Kloosterman sums. Solutions of `x_1 ... x_n = a` are enumerated
/// over the first `n - 1` logarithms, and the phases `Tr(b(x_1 + ... + x_n))` are
/// tallied exactly per residue class before the final `p`-term sum.
struct NaiveKloosterman {
    p: u64,
    order: u64,
    /// `Tr(b g^m)` for each `m`.
    phases: Vec<u32>,
    n: u32,
}

impl NaiveKloosterman {
    fn new(field: &Field, psi: &AdditiveCharacter, n: u32) -> Self {
        let logs = field.logs();
        let phases = (0..field.q() - 1)
            .map(|m| psi.phase_index(logs.exp_index(m)) as u32)
            .collect();
        NaiveKloosterman { p: field.p(), order: field.q() - 1, phases, n }
    }

    fn eval(&self, log_a: u64, counts: &mut [u64]) -> Complex64 {
        let (p, order) = (self.p, self.order);
        if self.n == 1 {
            return unit_root(self.phases[log_a as usize] as u64, p);
        }
        counts.iter_mut().for_each(|c| *c = 0);
        // Odometer over m_1 .. m_{n-2}; innermost loop runs over m_{n-1}.
        let outer = (self.n - 2) as usize;
        let mut digits = vec![0u64; outer];
        loop {
            let phase0: u64 = digits.iter().map(|&m| self.phases[m as usize] as u64).sum::<u64>() % p;
            let log0: u64 = digits.iter().sum::<u64>() % order;
            // Last variable has log (log_a - log0 - m) mod order.
            let mut last = (log_a + order - log0) % order;
            for m in 0..order as usize {
                let r = (phase0 + self.phases[m] as u64 + self.phases[last as usize] as u64) % p;
                counts[r as usize] += 1;
                last = if last == 0 { order - 1 } else { last - 1 };
            }
            let mut i = 0;
            loop {
                if i == outer {
                    return self.fold(counts);
                }
                digits[i] += 1;
                if digits[i] < order {
                    break;
                }
                digits[i] = 0;
                i += 1;
            }
        }
    }

    fn fold(&self, counts: &[u64]) -> Complex64 {
        let mut acc = ComplexSum::default();
        for (r, &c) in counts.iter().enumerate() {
            if c != 0 {
                acc += unit_root(r as u64, self.p) * c as f64;
            }
        }
        acc.value()
    }
}

fn naive_guard(q: u64, n: u32) -> Result<(), KernelError> {
    if n == 0 {
        return Err(KernelError::InvalidSpec("Kloosterman sums need n >= 1".into()));
    }
    let cost = (q as f64).powi(n as i32 - 1);
    if n > MAX_NAIVE_KL_N || cost > NAIVE_KL_LIMIT {
        return Err(KernelError::CostGuard { cost, limit: NAIVE_KL_LIMIT });
    }
    Ok(())
}

/// `Kl_n(a, q) = sum_{x_1 ... x_n = a} psi(x_1 + ... + x_n)` by enumeration.
pub fn kloosterman_naive(
    field: &Field,
    psi: &AdditiveCharacter,
    n: u32,
    a: &FieldElement,
) -> Result<Complex64, KernelError> {
    naive_guard(field.q(), n)?;
    let log_a = field.log(a).ok_or(KernelError::ZeroArgument)?;
    let kl = NaiveKloosterman::new(field, psi, n);
    let mut counts = vec![0u64; field.p() as usize];
    Ok(kl.eval(log_a, &mut counts))
}

/// Definitional `Kl_n(g^m, q)` for every `m`, guarded on the total `(q-1)^n` terms.
pub fn kloosterman_all_naive(
    field: &Field,
    psi: &AdditiveCharacter,
    n: u32,
) -> Result<Vec<Complex64>, KernelError> {
    naive_guard(field.q(), n)?;
    let cost = ((field.q() - 1) as f64).powi(n as i32);
    if cost > NAIVE_KL_ALL_LIMIT {
        return Err(KernelError::CostGuard { cost, limit: NAIVE_KL_ALL_LIMIT });
    }
    let kl = NaiveKloosterman::new(field, psi, n);
    let p = field.p() as usize;
    Ok((0..field.q() - 1)
        .into_par_iter()
        .map_init(|| vec![0u64; p], |counts, m| kl.eval(m, counts))
        .collect())
}

/// Builds the trace function of a built-in kernel.
/// How Kloosterman values are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelPath {
    /// Definitional sums while `(q-1)^n` is within [`KERNEL_NAIVE_BUDGET`], Gauss powers beyond.
    #[default]
    Auto,
    Naive,
    Fast,
}

pub fn make_kernel(
    field: &Field,
    psi: &AdditiveCharacter,
    spec: KernelSpec,
) -> Result<TraceFunction, KernelError> {
    make_kernel_with(field, psi, spec, KernelPath::Auto)
}

pub fn make_kernel_with(
    field: &Field,
    psi: &AdditiveCharacter,
    spec: KernelSpec,
    path: KernelPath,
) -> Result<TraceFunction, KernelError> {
    spec.validate(field)?;
    require_nontrivial(psi)?;
    let q = field.q();
    let sqrt_q = (q as f64).sqrt();
    let logs = field.logs();
    let order = q - 1;

    let values: Vec<Complex64> = match spec.name {
        KernelName::Gauss => (0..order)
            .into_par_iter()
            .map(|m| psi.eval_index(logs.exp_index(m)))
            .collect(),
        KernelName::Evans => (0..order)
            .into_par_iter()
            .map(|m| {
                let x = logs.exp_index(m);
                let x_inv = logs.exp_index(order - m);
                psi.eval_index(field.sub_index(x, x_inv))
            })
            .collect(),
        KernelName::Rudnick => (0..order)
            .into_par_iter()
            .map(|m| {
                if m == 0 {
                    return Complex64::new(0.0, 0.0);
                }
                let x = logs.exp_index(m);
                let num = field.add_index(x, 1);
                let den = field.sub_index(x, 1);
                let ratio = field.mul_index(num, field.inv_index(den).expect("x != 1"));
                psi.eval_index(ratio)
            })
            .collect(),
        KernelName::Kloosterman => {
            let n = spec.n;
            let naive = match path {
                KernelPath::Auto => (order as f64).powi(n as i32) <= KERNEL_NAIVE_BUDGET && n <= MAX_NAIVE_KL_N,
                KernelPath::Naive => true,
                KernelPath::Fast => false,
            };
            if naive {
                kloosterman_all_naive(field, psi, n)?
            } else {
                mellin::kloosterman_all_fast(field, psi, n).values().to_vec()
            }
        }
        KernelName::Custom => unreachable!("rejected by validate"),
    };

    let scale = if !spec.normalized {
        1.0
    } else if spec.name == KernelName::Kloosterman {
        let sign = if spec.n % 2 == 0 { -1.0 } else { 1.0 };
        sign / (q as f64).powf((spec.n as f64 - 1.0) / 2.0)
    } else {
        -1.0 / sqrt_q
    };
    let values = if scale == 1.0 { values } else { values.into_iter().map(|z| z * scale).collect() };

    let meta = KernelMeta {
        name: spec.name,
        n: spec.n,
        normalized: spec.normalized,
        goodness_rule: spec.goodness_rule,
        p: field.p(),
        k: field.k(),
        psi: psi.b().coeffs().to_vec(),
        bound: spec.value_bound(q),
    };
    Ok(TraceFunction::from_parts(field, values, meta))
}

/// Angle `theta` in `[0, pi]` with `v = halfwidth * cos(theta)`; values within
/// a relative `1e-6` of the interval are clamped.
pub fn angle_from_real(v: f64, halfwidth: f64) -> Result<f64, KernelError> {
    if !v.is_finite() || v.abs() > halfwidth * (1.0 + 1e-6) {
        return Err(KernelError::OutOfRange { value: v, halfwidth });
    }
    Ok((v / halfwidth).clamp(-1.0, 1.0).acos())
}
