//! Arithmetic in prime fields and their extensions.
//!
//! An element of `F_{p^k}` is a residue vector of length `k` (low degree first)
//! modulo a fixed monic irreducible polynomial. Hot loops elsewhere in the crate
//! use the packed *index* encoding `c_0 + c_1 p + ... + c_{k-1} p^{k-1}`, which is
//! a bijection between field elements and `0..q`.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest field size accepted by [`FieldSpec::build`]. The log table is `O(q)`.
pub const DEFAULT_CEILING: u64 = 1 << 26;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("extension degree must be at least 1")]
    DegreeZero,
    #[error("field size {p}^{k} exceeds the ceiling {ceiling}")]
    CeilingExceeded { p: u64, k: u32, ceiling: u64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("element does not belong to this field")]
    ForeignElement,
    #[error("invalid field descriptor: {0}")]
    InvalidDescriptor(String),
}

/// A field element as a vector of residues modulo `p`, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement {
    coeffs: Vec<u64>,
}

impl FieldElement {
    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    /// Inverse of the first operand; the second is ignored.
    Inv,
    /// Power of the first operand; the second is ignored.
    Pow(u64),
}

/// A model of `F_q`, `q = p^k`, with a fixed modulus and primitive element.
#[derive(Debug, Clone)]
pub struct FieldSpec {
    p: u64,
    k: u32,
    q: u64,
    /// Monic modulus of degree `k`, `k + 1` coefficients low degree first. `None` when `k = 1`.
    modulus: Option<Vec<u64>>,
    generator: FieldElement,
    /// `Tr(X^i)` for the power basis, so the trace is a dot product.
    basis_traces: Vec<u64>,
}

impl PartialEq for FieldSpec {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.k == other.k && self.modulus == other.modulus
    }
}

impl Eq for FieldSpec {}

/// JSON form of a field: `{"p":7,"k":1,"generator":[3]}`, with `"modulus"` when `k > 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDescriptor {
    pub p: u64,
    pub k: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<Vec<u64>>,
    pub generator: Vec<u64>,
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// Distinct prime factors in increasing order.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Primes in `[lo, hi]` by a sieve of Eratosthenes.
pub fn primes_in_range(lo: u64, hi: u64) -> Vec<u64> {
    if hi < 2 || lo > hi {
        return Vec::new();
    }
    let n = hi as usize;
    let mut composite = vec![false; n + 1];
    let mut i = 2usize;
    while i * i <= n {
        if !composite[i] {
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
        i += 1;
    }
    (lo.max(2) as usize..=n)
        .filter(|&m| !composite[m])
        .map(|m| m as u64)
        .collect()
}

#[inline]
fn mulmod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn powmod(mut base: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    base %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(acc, base, p);
        }
        base = mulmod(base, base, p);
        e >>= 1;
    }
    acc
}

fn invmod(a: u64, p: u64) -> u64 {
    powmod(a, p - 2, p)
}

/// Coefficients for lexicographic rank `r`, comparing `c_0` first.
fn lex_coeffs(mut r: u64, p: u64, k: u32) -> Vec<u64> {
    let mut c = vec![0u64; k as usize];
    for slot in c.iter_mut().rev() {
        *slot = r % p;
        r /= p;
    }
    c
}

/// Remainder of `num` modulo the monic `den` (both low degree first) over `F_p`.
fn poly_rem(num: &[u64], den: &[u64], p: u64) -> Vec<u64> {
    let mut r = num.to_vec();
    let d = den.len() - 1;
    while r.len() > d {
        let lead = *r.last().unwrap();
        let shift = r.len() - 1 - d;
        if lead != 0 {
            for (i, &c) in den.iter().enumerate() {
                let sub = mulmod(lead, c, p);
                r[shift + i] = (r[shift + i] + p - sub) % p;
            }
        }
        r.pop();
    }
    r
}

/// Irreducibility of a monic polynomial by trial division with every monic
/// polynomial of degree up to half its own.
pub fn is_irreducible(monic: &[u64], p: u64) -> bool {
    let deg = monic.len() - 1;
    if deg <= 1 {
        return deg == 1;
    }
    for d in 1..=deg / 2 {
        let count = p.pow(d as u32);
        for r in 0..count {
            let mut divisor = lex_coeffs(r, p, d as u32);
            divisor.push(1);
            if poly_rem(monic, &divisor, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

impl FieldSpec {
    /// Builds `F_{p^k}` with the default size ceiling.
    pub fn build(p: u64, k: u32) -> Result<Self, FieldError> {
        Self::build_with_ceiling(p, k, DEFAULT_CEILING)
    }

    pub fn build_with_ceiling(p: u64, k: u32, ceiling: u64) -> Result<Self, FieldError> {
        if k == 0 {
            return Err(FieldError::DegreeZero);
        }
        if p < 2 {
            return Err(FieldError::NotPrime(p));
        }
        let exceeded = FieldError::CeilingExceeded { p, k, ceiling };
        if p > ceiling {
            return Err(exceeded);
        }
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        let q = p.checked_pow(k).filter(|&q| q <= ceiling).ok_or(exceeded)?;

        let modulus = if k == 1 {
            None
        } else {
            // c_0 = 0 is divisible by X, so start at rank p^(k-1).
            let start = p.pow(k - 1);
            let found = (start..q)
                .map(|r| {
                    let mut c = lex_coeffs(r, p, k);
                    c.push(1);
                    c
                })
                .find(|c| is_irreducible(c, p))
                .expect("an irreducible polynomial exists in every degree");
            Some(found)
        };

        let mut spec = FieldSpec {
            p,
            k,
            q,
            modulus,
            generator: FieldElement { coeffs: vec![0; k as usize] },
            basis_traces: Vec::new(),
        };
        spec.basis_traces = spec.compute_basis_traces();
        let factors = prime_factors(q - 1);
        spec.generator = (1..q)
            .map(|r| FieldElement { coeffs: lex_coeffs(r, p, k) })
            .find(|g| spec.has_full_order(g, &factors))
            .expect("the multiplicative group of a finite field is cyclic");
        Ok(spec)
    }

    /// Rebuilds a field from its JSON descriptor, validating the modulus and generator.
    pub fn from_descriptor(d: &FieldDescriptor) -> Result<Self, FieldError> {
        let invalid = |msg: &str| FieldError::InvalidDescriptor(msg.to_string());
        if d.k == 0 {
            return Err(FieldError::DegreeZero);
        }
        if !is_prime(d.p) {
            return Err(FieldError::NotPrime(d.p));
        }
        let q = d
            .p
            .checked_pow(d.k)
            .filter(|&q| q <= DEFAULT_CEILING)
            .ok_or(FieldError::CeilingExceeded { p: d.p, k: d.k, ceiling: DEFAULT_CEILING })?;
        let modulus = match (&d.modulus, d.k) {
            (None, 1) => None,
            (Some(m), 1) if m.is_empty() => None,
            (Some(m), k) if k > 1 => {
                if m.len() != k as usize + 1 || m[k as usize] != 1 || m.iter().any(|&c| c >= d.p) {
                    return Err(invalid("modulus must be monic of degree k with residues mod p"));
                }
                if !is_irreducible(m, d.p) {
                    return Err(invalid("modulus is reducible"));
                }
                Some(m.clone())
            }
            _ => return Err(invalid("modulus must be present exactly when k > 1")),
        };
        let mut spec = FieldSpec {
            p: d.p,
            k: d.k,
            q,
            modulus,
            generator: FieldElement { coeffs: vec![0; d.k as usize] },
            basis_traces: Vec::new(),
        };
        spec.basis_traces = spec.compute_basis_traces();
        let g = spec.element(&d.generator)?;
        if !spec.has_full_order(&g, &prime_factors(q - 1)) {
            return Err(invalid("generator is not primitive"));
        }
        spec.generator = g;
        Ok(spec)
    }

    pub fn descriptor(&self) -> FieldDescriptor {
        FieldDescriptor {
            p: self.p,
            k: self.k,
            modulus: self.modulus.clone(),
            generator: self.generator.coeffs.clone(),
        }
    }

    fn has_full_order(&self, g: &FieldElement, factors: &[u64]) -> bool {
        if g.is_zero() {
            return false;
        }
        let n = self.q - 1;
        self.pow(g, n) == self.one() && factors.iter().all(|&r| self.pow(g, n / r) != self.one())
    }

    fn compute_basis_traces(&self) -> Vec<u64> {
        (0..self.k as usize)
            .map(|i| {
                let mut c = vec![0u64; self.k as usize];
                c[i] = 1;
                let t = self.frobenius_trace(&FieldElement { coeffs: c });
                debug_assert!(t.coeffs[1..].iter().all(|&x| x == 0));
                t.coeffs[0]
            })
            .collect()
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn modulus(&self) -> Option<&[u64]> {
        self.modulus.as_deref()
    }

    pub fn generator(&self) -> &FieldElement {
        &self.generator
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement { coeffs: vec![0; self.k as usize] }
    }

    pub fn one(&self) -> FieldElement {
        let mut c = vec![0; self.k as usize];
        c[0] = 1;
        FieldElement { coeffs: c }
    }

    /// Element from a coefficient vector; shorter vectors are zero-padded.
    pub fn element(&self, coeffs: &[u64]) -> Result<FieldElement, FieldError> {
        if coeffs.len() > self.k as usize || coeffs.iter().any(|&c| c >= self.p) {
            return Err(FieldError::ForeignElement);
        }
        let mut c = coeffs.to_vec();
        c.resize(self.k as usize, 0);
        Ok(FieldElement { coeffs: c })
    }

    /// Embeds an integer through the prime subfield (`n mod p`).
    pub fn from_int(&self, n: i64) -> FieldElement {
        let mut c = vec![0; self.k as usize];
        c[0] = n.rem_euclid(self.p as i64) as u64;
        FieldElement { coeffs: c }
    }

    pub fn index_of(&self, x: &FieldElement) -> u64 {
        x.coeffs.iter().rev().fold(0u64, |acc, &c| acc * self.p + c)
    }

    pub fn from_index(&self, mut idx: u64) -> FieldElement {
        debug_assert!(idx < self.q);
        let mut c = vec![0u64; self.k as usize];
        for slot in c.iter_mut() {
            *slot = idx % self.p;
            idx /= self.p;
        }
        FieldElement { coeffs: c }
    }

    /// All elements in index order.
    pub fn elements(&self) -> impl Iterator<Item = FieldElement> + '_ {
        (0..self.q).map(move |i| self.from_index(i))
    }

    fn check(&self, x: &FieldElement) -> Result<(), FieldError> {
        if x.coeffs.len() != self.k as usize || x.coeffs.iter().any(|&c| c >= self.p) {
            Err(FieldError::ForeignElement)
        } else {
            Ok(())
        }
    }

    pub fn add(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        let p = self.p;
        FieldElement {
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(&x, &y)| (x + y) % p).collect(),
        }
    }

    pub fn neg(&self, a: &FieldElement) -> FieldElement {
        let p = self.p;
        FieldElement { coeffs: a.coeffs.iter().map(|&x| (p - x) % p).collect() }
    }

    pub fn sub(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        self.add(a, &self.neg(b))
    }

    pub fn mul(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        let p = self.p;
        match &self.modulus {
            None => FieldElement { coeffs: vec![mulmod(a.coeffs[0], b.coeffs[0], p)] },
            Some(m) => {
                let k = self.k as usize;
                let mut prod = vec![0u64; 2 * k - 1];
                for (i, &x) in a.coeffs.iter().enumerate() {
                    if x == 0 {
                        continue;
                    }
                    for (j, &y) in b.coeffs.iter().enumerate() {
                        prod[i + j] = (prod[i + j] + mulmod(x, y, p)) % p;
                    }
                }
                let mut r = poly_rem(&prod, m, p);
                r.resize(k, 0);
                FieldElement { coeffs: r }
            }
        }
    }

    /// Square-and-multiply.
    pub fn pow(&self, a: &FieldElement, mut e: u64) -> FieldElement {
        if self.k == 1 {
            return FieldElement { coeffs: vec![powmod(a.coeffs[0], e, self.p)] };
        }
        let mut acc = self.one();
        let mut base = a.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: &FieldElement) -> Result<FieldElement, FieldError> {
        if a.is_zero() {
            return Err(FieldError::DivisionByZero);
        }
        if self.k == 1 {
            return Ok(FieldElement { coeffs: vec![invmod(a.coeffs[0], self.p)] });
        }
        Ok(self.pow(a, self.q - 2))
    }

    pub fn div(&self, a: &FieldElement, b: &FieldElement) -> Result<FieldElement, FieldError> {
        Ok(self.mul(a, &self.inv(b)?))
    }

    /// Checked dispatch over the field operations.
    pub fn arith(
        &self,
        a: &FieldElement,
        b: &FieldElement,
        op: ArithOp,
    ) -> Result<FieldElement, FieldError> {
        self.check(a)?;
        self.check(b)?;
        match op {
            ArithOp::Add => Ok(self.add(a, b)),
            ArithOp::Sub => Ok(self.sub(a, b)),
            ArithOp::Mul => Ok(self.mul(a, b)),
            ArithOp::Div => self.div(a, b),
            ArithOp::Inv => self.inv(a),
            ArithOp::Pow(e) => Ok(self.pow(a, e)),
        }
    }

    /// `x^p`.
    pub fn frobenius(&self, x: &FieldElement) -> FieldElement {
        self.pow(x, self.p)
    }

    fn frobenius_trace(&self, x: &FieldElement) -> FieldElement {
        let mut acc = self.zero();
        let mut conj = x.clone();
        for _ in 0..self.k {
            acc = self.add(&acc, &conj);
            conj = self.frobenius(&conj);
        }
        acc
    }

    /// Absolute trace and norm to `F_p`, as the sum and product of the `k`
    /// Frobenius conjugates.
    pub fn trace_and_norm(&self, x: &FieldElement) -> (u64, u64) {
        let mut sum = self.zero();
        let mut prod = self.one();
        let mut conj = x.clone();
        for _ in 0..self.k {
            sum = self.add(&sum, &conj);
            prod = self.mul(&prod, &conj);
            conj = self.frobenius(&conj);
        }
        (sum.coeffs[0], prod.coeffs[0])
    }

    /// Absolute trace through the precomputed basis traces.
    pub fn trace(&self, x: &FieldElement) -> u64 {
        x.coeffs
            .iter()
            .zip(&self.basis_traces)
            .fold(0u64, |acc, (&c, &t)| (acc + mulmod(c, t, self.p)) % self.p)
    }

    pub fn norm(&self, x: &FieldElement) -> u64 {
        if x.is_zero() {
            return 0;
        }
        self.pow(x, (self.q - 1) / (self.p - 1)).coeffs[0]
    }

    #[inline]
    pub fn neg_index(&self, a: u64) -> u64 {
        if self.k == 1 {
            return if a == 0 { 0 } else { self.p - a };
        }
        let mut a = a;
        let mut out = 0u64;
        let mut place = 1u64;
        for _ in 0..self.k {
            out += ((self.p - a % self.p) % self.p) * place;
            place *= self.p;
            a /= self.p;
        }
        out
    }

    #[inline]
    pub fn sub_index(&self, a: u64, b: u64) -> u64 {
        self.add_index(a, self.neg_index(b))
    }

    /// Sum of two packed indices.
    #[inline]
    pub fn add_index(&self, a: u64, b: u64) -> u64 {
        if self.k == 1 {
            let s = a + b;
            return if s >= self.p { s - self.p } else { s };
        }
        let (mut a, mut b) = (a, b);
        let mut out = 0u64;
        let mut place = 1u64;
        for _ in 0..self.k {
            let d = (a % self.p + b % self.p) % self.p;
            out += d * place;
            place *= self.p;
            a /= self.p;
            b /= self.p;
        }
        out
    }
}

/// Discrete logarithms with respect to the field's generator.
#[derive(Debug, Clone)]
pub struct LogTable {
    /// `exp[m]` is the packed index of `generator^m`, `m` in `0..q-1`.
    exp: Vec<u32>,
    /// `log[index]`; entry 0 is unused.
    log: Vec<u32>,
}

impl LogTable {
    pub fn build(field: &FieldSpec) -> Self {
        let n = (field.q - 1) as usize;
        let mut exp = Vec::with_capacity(n);
        let mut log = vec![u32::MAX; field.q as usize];
        let mut x = field.one();
        if field.k == 1 {
            let g = field.generator.coeffs[0];
            let mut v = 1u64;
            for m in 0..n {
                exp.push(v as u32);
                log[v as usize] = m as u32;
                v = mulmod(v, g, field.p);
            }
        } else {
            for m in 0..n {
                let idx = field.index_of(&x);
                exp.push(idx as u32);
                log[idx as usize] = m as u32;
                x = field.mul(&x, &field.generator);
            }
        }
        LogTable { exp, log }
    }

    /// Order of the multiplicative group, `q - 1`.
    pub fn order(&self) -> u64 {
        self.exp.len() as u64
    }

    #[inline]
    pub fn exp_index(&self, m: u64) -> u64 {
        self.exp[(m % self.order()) as usize] as u64
    }

    #[inline]
    pub fn log_index(&self, idx: u64) -> Option<u64> {
        match self.log.get(idx as usize) {
            Some(&l) if l != u32::MAX => Some(l as u64),
            _ => None,
        }
    }

    pub fn exp_table(&self) -> &[u32] {
        &self.exp
    }
}

struct FieldInner {
    spec: FieldSpec,
    logs: LogTable,
}

/// A shared, immutable field together with its log table.
#[derive(Clone)]
pub struct Field(Arc<FieldInner>);

impl Field {
    pub fn new(p: u64, k: u32) -> Result<Self, FieldError> {
        Ok(Self::from_spec(FieldSpec::build(p, k)?))
    }

    pub fn from_spec(spec: FieldSpec) -> Self {
        let logs = LogTable::build(&spec);
        Field(Arc::new(FieldInner { spec, logs }))
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.0.spec
    }

    pub fn logs(&self) -> &LogTable {
        &self.0.logs
    }

    /// `generator^m`.
    pub fn exp(&self, m: u64) -> FieldElement {
        self.from_index(self.0.logs.exp_index(m))
    }

    pub fn log(&self, x: &FieldElement) -> Option<u64> {
        self.0.logs.log_index(self.index_of(x))
    }

    /// Packed index of the inverse of a nonzero packed index.
    #[inline]
    pub fn inv_index(&self, idx: u64) -> Option<u64> {
        let n = self.0.logs.order();
        self.0.logs.log_index(idx).map(|m| self.0.logs.exp_index((n - m) % n))
    }

    #[inline]
    pub fn mul_index(&self, a: u64, b: u64) -> u64 {
        match (self.0.logs.log_index(a), self.0.logs.log_index(b)) {
            (Some(x), Some(y)) => self.0.logs.exp_index(x + y),
            _ => 0,
        }
    }
}

impl Deref for Field {
    type Target = FieldSpec;

    fn deref(&self) -> &FieldSpec {
        &self.0.spec
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.spec == other.0.spec
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Field(F_{}^{})", self.p, self.k)
    }
}
