//! Additive characters `psi_b` and multiplicative characters `chi_j` of `F_q`.
//!
//! `psi_b(x) = exp(2 pi i Tr(b x) / p)` with the absolute trace, and
//! `chi_j(g^m) = exp(2 pi i j m / (q - 1))` for the field's fixed generator `g`.

use num_complex::Complex64;
use thiserror::Error;

use crate::ffield::{Field, FieldElement};
use crate::sum::{sum_complex, unit_root};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CharacterError {
    #[error("multiplicative characters are not evaluated at zero")]
    ZeroArgument,
    #[error("element does not belong to the character's field")]
    ForeignElement,
}

#[derive(Debug, Clone)]
pub struct AdditiveCharacter {
    field: Field,
    b: FieldElement,
    /// `Tr(b X^i)` mod p: the F_p-linear functional `x -> Tr(b x)` on the power basis.
    functional: Vec<u64>,
}

impl PartialEq for AdditiveCharacter {
    fn eq(&self, other: &Self) -> bool {
        self.field == other.field && self.b == other.b
    }
}

impl AdditiveCharacter {
    pub fn new(field: &Field, b: FieldElement) -> Result<Self, CharacterError> {
        if b.coeffs().len() != field.k() as usize || b.coeffs().iter().any(|&c| c >= field.p()) {
            return Err(CharacterError::ForeignElement);
        }
        let functional = (0..field.k() as usize)
            .map(|i| {
                let mut basis = vec![0u64; field.k() as usize];
                basis[i] = 1;
                let x = field.element(&basis).expect("basis vector");
                field.trace(&field.mul(&b, &x))
            })
            .collect();
        Ok(AdditiveCharacter { field: field.clone(), b, functional })
    }

    /// The default character `psi_1`.
    pub fn standard(field: &Field) -> Self {
        Self::new(field, field.one()).expect("one belongs to its field")
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn b(&self) -> &FieldElement {
        &self.b
    }

    pub fn is_trivial(&self) -> bool {
        self.b.is_zero()
    }

    /// `Tr(b x)` as a residue mod p, for a packed index `x`.
    #[inline]
    pub fn phase_index(&self, mut idx: u64) -> u64 {
        let p = self.field.p();
        if self.functional.len() == 1 {
            return ((idx as u128 * self.functional[0] as u128) % p as u128) as u64;
        }
        let mut acc = 0u64;
        for &t in &self.functional {
            acc = (acc + (idx % p) * t) % p;
            idx /= p;
        }
        acc
    }

    #[inline]
    pub fn eval_index(&self, idx: u64) -> Complex64 {
        unit_root(self.phase_index(idx), self.field.p())
    }

    pub fn eval(&self, x: &FieldElement) -> Complex64 {
        self.eval_index(self.field.index_of(x))
    }
}

#[derive(Debug, Clone)]
pub struct MultiplicativeCharacter {
    field: Field,
    j: u64,
}

impl PartialEq for MultiplicativeCharacter {
    fn eq(&self, other: &Self) -> bool {
        self.field == other.field && self.j == other.j
    }
}

impl MultiplicativeCharacter {
    /// `chi_j`; the index is reduced mod `q - 1`, negative values allowed.
    pub fn new(field: &Field, j: i64) -> Self {
        let n = (field.q() - 1) as i64;
        MultiplicativeCharacter { field: field.clone(), j: j.rem_euclid(n) as u64 }
    }

    pub fn trivial(field: &Field) -> Self {
        Self::new(field, 0)
    }

    /// Quadratic character, present when `q` is odd.
    pub fn legendre(field: &Field) -> Option<Self> {
        let n = field.q() - 1;
        (n % 2 == 0).then(|| Self::new(field, (n / 2) as i64))
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn index(&self) -> u64 {
        self.j
    }

    pub fn is_trivial(&self) -> bool {
        self.j == 0
    }

    pub fn order(&self) -> u64 {
        let n = self.field.q() - 1;
        n / gcd(self.j, n)
    }

    pub fn conj(&self) -> Self {
        Self::new(&self.field, -(self.j as i64))
    }

    /// Value at `generator^m`.
    #[inline]
    pub fn eval_log(&self, m: u64) -> Complex64 {
        let n = self.field.q() - 1;
        let e = ((self.j as u128 * m as u128) % n as u128) as u64;
        unit_root(e, n)
    }

    pub fn eval_index(&self, idx: u64) -> Result<Complex64, CharacterError> {
        let m = self.field.logs().log_index(idx).ok_or(CharacterError::ZeroArgument)?;
        Ok(self.eval_log(m))
    }

    pub fn eval(&self, x: &FieldElement) -> Result<Complex64, CharacterError> {
        if x.coeffs().len() != self.field.k() as usize {
            return Err(CharacterError::ForeignElement);
        }
        self.eval_index(self.field.index_of(x))
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `sum_{x != 0} chi(x)`: `q - 1` for the trivial character, else 0.
pub fn orthogonality_sum(chi: &MultiplicativeCharacter) -> Complex64 {
    let n = chi.field().q() - 1;
    sum_complex((0..n).map(|m| chi.eval_log(m)))
}

/// Dual form: `sum_j chi_j(a)`, which is `q - 1` at `a = 1` and 0 elsewhere.
pub fn dual_orthogonality_sum(field: &Field, a: &FieldElement) -> Result<Complex64, CharacterError> {
    let mut out = Vec::with_capacity((field.q() - 1) as usize);
    for chi in multiplicative_characters(field) {
        out.push(chi.eval(a)?);
    }
    Ok(sum_complex(out))
}

/// All `q` additive characters, ordered by the packed index of `b`.
pub fn additive_characters(field: &Field) -> impl Iterator<Item = AdditiveCharacter> + '_ {
    field
        .elements()
        .map(move |b| AdditiveCharacter::new(field, b).expect("element of the field"))
}

/// All `q - 1` multiplicative characters, `chi_0` first.
pub fn multiplicative_characters(field: &Field) -> impl Iterator<Item = MultiplicativeCharacter> + '_ {
    (0..field.q() - 1).map(move |j| MultiplicativeCharacter::new(field, j as i64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharacterKind {
    Additive,
    Multiplicative,
}

pub fn character_count(field: &Field, kind: CharacterKind) -> u64 {
    match kind {
        CharacterKind::Additive => field.q(),
        CharacterKind::Multiplicative => field.q() - 1,
    }
}
