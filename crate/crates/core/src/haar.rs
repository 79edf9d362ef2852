//! Seeded Haar samplers for U(1), SU(2), SU(n) and USp(2n).
//!
//! Unitary groups use the QR decomposition of a complex Ginibre matrix with the
//! diagonal of `R` rotated to be positive; SU(n) then divides out an `n`-th root
//! of the determinant. USp(2n) runs Gram-Schmidt over the quaternions, which is
//! equivariant under the group, and embeds the result in `U(2n)`. SU(2) also has
//! an exact class sampler through the inverse Sato-Tate CDF.
//!
//! Streams: `SeededRng::stream(seed, i)` is ChaCha20 keyed by `seed` on stream `i`,
//! so parallel workers draw from disjoint, reproducible sequences.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::equidist::sato_tate_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupSpec {
    U1,
    SU2,
    SUn(usize),
    /// Compact symplectic group of `2n x 2n` matrices.
    USp2n(usize),
}

impl GroupSpec {
    /// Parses `u1`, `su2`, `sun:N` or `uspn:N`.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "u1" => return Some(GroupSpec::U1),
            "su2" => return Some(GroupSpec::SU2),
            _ => {}
        }
        let (kind, n) = s.split_once(':')?;
        let n: usize = n.parse().ok().filter(|&n| n >= 1)?;
        match kind {
            "sun" => Some(GroupSpec::SUn(n)),
            "uspn" => Some(GroupSpec::USp2n(n)),
            _ => None,
        }
    }

    /// Dimension of the defining representation.
    pub fn trace_dim(&self) -> usize {
        match *self {
            GroupSpec::U1 => 1,
            GroupSpec::SU2 => 2,
            GroupSpec::SUn(n) => n,
            GroupSpec::USp2n(n) => 2 * n,
        }
    }

    pub fn real_traces(&self) -> bool {
        matches!(self, GroupSpec::SU2 | GroupSpec::USp2n(_) | GroupSpec::SUn(1) | GroupSpec::SUn(2))
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::U1 => write!(f, "u1"),
            GroupSpec::SU2 => write!(f, "su2"),
            GroupSpec::SUn(n) => write!(f, "sun:{n}"),
            GroupSpec::USp2n(n) => write!(f, "uspn:{n}"),
        }
    }
}

/// A reproducible random stream.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha20Rng,
}

impl SeededRng {
    pub const ALGORITHM: &'static str = "chacha20";

    pub fn new(seed: u64) -> Self {
        Self::stream(seed, 0)
    }

    pub fn stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SeededRng { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// Class angle of a Haar-random SU(2) element, with density `(2/pi) sin^2`.
pub fn sample_su2_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    sato_tate_quantile(rng.gen::<f64>())
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    let z = DMatrix::from_fn(n, n, |_, _| complex_gaussian(rng));
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Quaternion `a + b j` with complex `a`, `b`.
#[derive(Debug, Clone, Copy)]
struct Quaternion {
    a: Complex64,
    b: Complex64,
}

impl Quaternion {
    fn zero() -> Self {
        Quaternion { a: Complex64::new(0.0, 0.0), b: Complex64::new(0.0, 0.0) }
    }

    fn mul(self, o: Quaternion) -> Quaternion {
        Quaternion {
            a: self.a * o.a - self.b * o.b.conj(),
            b: self.a * o.b + self.b * o.a.conj(),
        }
    }

    fn conj(self) -> Quaternion {
        Quaternion { a: self.a.conj(), b: -self.b }
    }

    fn add(self, o: Quaternion) -> Quaternion {
        Quaternion { a: self.a + o.a, b: self.b + o.b }
    }

    fn sub(self, o: Quaternion) -> Quaternion {
        Quaternion { a: self.a - o.a, b: self.b - o.b }
    }

    fn scale(self, s: f64) -> Quaternion {
        Quaternion { a: self.a * s, b: self.b * s }
    }

    fn norm_sqr(self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr()
    }
}

fn haar_symplectic<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    // Columns of a quaternionic Gaussian matrix, orthonormalized on the right.
    let mut cols: Vec<Vec<Quaternion>> = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| Quaternion { a: complex_gaussian(rng), b: complex_gaussian(rng) })
                .collect()
        })
        .collect();
    for k in 0..n {
        for i in 0..k {
            let (done, rest) = cols.split_at_mut(k);
            let e = &done[i];
            let v = &mut rest[0];
            let coeff = e.iter().zip(v.iter()).fold(Quaternion::zero(), |acc, (x, y)| acc.add(x.conj().mul(*y)));
            for (vi, ei) in v.iter_mut().zip(e) {
                *vi = vi.sub(ei.mul(coeff));
            }
        }
        let norm = cols[k].iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for x in cols[k].iter_mut() {
            *x = x.scale(1.0 / norm);
        }
    }
    // a + b j  ->  [[a, b], [-conj(b), conj(a)]]
    let mut m = DMatrix::from_element(2 * n, 2 * n, Complex64::new(0.0, 0.0));
    for (c, col) in cols.iter().enumerate() {
        for (r, x) in col.iter().enumerate() {
            m[(2 * r, 2 * c)] = x.a;
            m[(2 * r, 2 * c + 1)] = x.b;
            m[(2 * r + 1, 2 * c)] = -x.b.conj();
            m[(2 * r + 1, 2 * c + 1)] = x.a.conj();
        }
    }
    m
}

/// The symplectic form preserved by [`GroupSpec::USp2n`] samples: `g^T J g = J`.
pub fn symplectic_form(n: usize) -> DMatrix<Complex64> {
    let mut j = DMatrix::from_element(2 * n, 2 * n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        j[(2 * i, 2 * i + 1)] = Complex64::new(1.0, 0.0);
        j[(2 * i + 1, 2 * i)] = Complex64::new(-1.0, 0.0);
    }
    j
}

/// One Haar-distributed element in the defining representation.
pub fn sample_unitary<R: Rng + ?Sized>(group: GroupSpec, rng: &mut R) -> DMatrix<Complex64> {
    match group {
        GroupSpec::U1 => {
            let phi: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            DMatrix::from_element(1, 1, Complex64::from_polar(1.0, phi))
        }
        GroupSpec::SU2 => sample_unitary(GroupSpec::SUn(2), rng),
        GroupSpec::SUn(n) => {
            let mut u = haar_unitary(n, rng);
            let det = u.determinant();
            let correction = Complex64::from_polar(1.0, -det.arg() / n as f64);
            u *= correction;
            u
        }
        GroupSpec::USp2n(n) => haar_symplectic(n, rng),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceSamples {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl TraceSamples {
    pub fn len(&self) -> usize {
        match self {
            TraceSamples::Real(v) => v.len(),
            TraceSamples::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        match self {
            TraceSamples::Real(v) => v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            TraceSamples::Complex(v) => v.clone(),
        }
    }

    /// Real parts (the traces themselves for groups with real traces).
    pub fn real_parts(&self) -> Vec<f64> {
        match self {
            TraceSamples::Real(v) => v.clone(),
            TraceSamples::Complex(v) => v.iter().map(|z| z.re).collect(),
        }
    }
}

/// Traces of `count` independent Haar samples from stream 0 of `seed`.
/// SU(2) uses the exact class sampler, every other group the matrix sampler.
pub fn trace_samples(group: GroupSpec, count: usize, seed: u64) -> TraceSamples {
    let mut rng = SeededRng::new(seed);
    match group {
        GroupSpec::SU2 => {
            TraceSamples::Real((0..count).map(|_| 2.0 * sample_su2_angle(&mut rng).cos()).collect())
        }
        g if g.real_traces() => {
            TraceSamples::Real((0..count).map(|_| sample_unitary(g, &mut rng).trace().re).collect())
        }
        g => TraceSamples::Complex((0..count).map(|_| sample_unitary(g, &mut rng).trace()).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equidist::{sato_tate_cdf, two_sample_ks};
    use std::f64::consts::PI;

    fn max_abs(m: &DMatrix<Complex64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn angle_sampler_endpoints() {
        assert!((sato_tate_quantile(0.5) - PI / 2.0).abs() < 1e-12);
        assert_eq!(sato_tate_quantile(0.0), 0.0);
        assert!((sato_tate_quantile(1.0) - PI).abs() < 1e-12);
        for u in [1e-9, 0.01, 0.3, 0.77, 0.999999] {
            assert!((sato_tate_cdf(sato_tate_quantile(u)) - u).abs() <= 1e-12);
        }
    }

    #[test]
    fn unitary_invariants() {
        let mut rng = SeededRng::new(7);
        for group in [GroupSpec::U1, GroupSpec::SU2, GroupSpec::SUn(3), GroupSpec::SUn(5), GroupSpec::USp2n(1), GroupSpec::USp2n(3)] {
            for _ in 0..20 {
                let g = sample_unitary(group, &mut rng);
                let d = group.trace_dim();
                assert_eq!(g.nrows(), d);
                let gram = g.adjoint() * &g;
                assert!(max_abs(&(gram.clone() - DMatrix::identity(d, d))) < 1e-10);
                assert!(((&g * g.adjoint()).trace().re - d as f64).abs() < 1e-9);
                assert!(g.trace().norm() <= d as f64 + 1e-9);
                match group {
                    GroupSpec::SU2 | GroupSpec::SUn(_) => {
                        assert!((g.determinant() - 1.0).norm() < 1e-10);
                    }
                    GroupSpec::USp2n(n) => {
                        let j = symplectic_form(n);
                        assert!(max_abs(&(g.transpose() * &j * &g - &j)) < 1e-10);
                        assert!(g.trace().im.abs() < 1e-12);
                    }
                    GroupSpec::U1 => assert!((g[(0, 0)].norm() - 1.0).abs() < 1e-15),
                }
            }
        }
    }

    #[test]
    fn determinism() {
        let a = trace_samples(GroupSpec::SUn(3), 50, 11);
        let b = trace_samples(GroupSpec::SUn(3), 50, 11);
        let c = trace_samples(GroupSpec::SUn(3), 50, 12);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(trace_samples(GroupSpec::SU2, 10, 3), trace_samples(GroupSpec::SU2, 10, 3));
        let s0 = SeededRng::stream(5, 0).next_u64();
        let s1 = SeededRng::stream(5, 1).next_u64();
        assert_ne!(s0, s1);
    }

    #[test]
    fn parse_groups() {
        assert_eq!(GroupSpec::parse("su2"), Some(GroupSpec::SU2));
        assert_eq!(GroupSpec::parse("sun:3"), Some(GroupSpec::SUn(3)));
        assert_eq!(GroupSpec::parse("uspn:2"), Some(GroupSpec::USp2n(2)));
        assert_eq!(GroupSpec::parse("U1"), Some(GroupSpec::U1));
        assert_eq!(GroupSpec::parse("sun:0"), None);
        assert_eq!(GroupSpec::parse("so:3"), None);
        assert_eq!(GroupSpec::USp2n(2).to_string(), "uspn:2");
    }

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn trace_means() {
        let su2 = trace_samples(GroupSpec::SU2, 1_000_000, 2024).real_parts();
        let (m, se) = mean_and_se(&su2);
        assert!(m.abs() <= 3.0 * se);
        let squares: Vec<f64> = su2.iter().map(|x| x * x).collect();
        let (m2, se2) = mean_and_se(&squares);
        assert!((m2 - 1.0).abs() <= 3.0 * se2);

        let usp = trace_samples(GroupSpec::USp2n(1), 1_000_000, 2025).real_parts();
        let squares: Vec<f64> = usp.iter().map(|x| x * x).collect();
        let (m2, se2) = mean_and_se(&squares);
        assert!((m2 - 1.0).abs() <= 3.0 * se2);

        let u1 = trace_samples(GroupSpec::U1, 200_000, 9).to_complex();
        let re: Vec<f64> = u1.iter().map(|z| z.re).collect();
        let im: Vec<f64> = u1.iter().map(|z| z.im).collect();
        let (mr, ser) = mean_and_se(&re);
        let (mi, sei) = mean_and_se(&im);
        assert!(mr.abs() <= 3.0 * ser && mi.abs() <= 3.0 * sei);
    }

    #[test]
    fn left_invariance() {
        let mut rng = SeededRng::stream(77, 1);
        let h = sample_unitary(GroupSpec::SUn(2), &mut rng);
        let mut a = SeededRng::stream(77, 2);
        let mut b = SeededRng::stream(77, 3);
        let plain: Vec<f64> = (0..100_000).map(|_| sample_unitary(GroupSpec::SU2, &mut a).trace().re).collect();
        let shifted: Vec<f64> =
            (0..100_000).map(|_| (&h * sample_unitary(GroupSpec::SU2, &mut b)).trace().re).collect();
        assert!(two_sample_ks(&plain, &shifted) < 0.01);
    }
}
