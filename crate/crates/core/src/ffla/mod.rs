//! Arithmetic over `F_p`, dense square matrices, nullspaces, and the
//! commutative matrix group `C = F_p(κ)`.
//!
//! Entries are stored as `u64` residues; moduli are restricted to primes below
//! `2^32` so that a product of two residues fits in a `u64`.

mod factor;
mod poly;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use factor::{factor_biguint, is_prime_u64};
pub use poly::{
    companion_matrix, is_irreducible, is_primitive, make_kappa, multiplicative_order_factors, Kappa,
    KappaMode, Poly,
};

/// Largest supported modulus (exclusive).
pub const MAX_MODULUS: u64 = 1 << 32;

#[inline]
pub fn add_mod(a: u64, b: u64, p: u64) -> u64 {
    let s = a + b;
    if s >= p {
        s - p
    } else {
        s
    }
}

#[inline]
pub fn sub_mod(a: u64, b: u64, p: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + p - b
    }
}

#[inline]
pub fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    a * b % p
}

pub fn pow_mod(mut base: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    base %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        e >>= 1;
    }
    acc
}

/// Inverse of a nonzero residue modulo a prime.
pub fn inv_mod(a: u64, p: u64) -> Result<u64> {
    if a % p == 0 {
        return Err(Error::Singular);
    }
    Ok(pow_mod(a, p - 2, p))
}

pub(crate) fn check_modulus(p: u64) -> Result<()> {
    if p < 2 || p >= MAX_MODULUS || !is_prime_u64(p) {
        return Err(Error::NotPrime(p));
    }
    Ok(())
}

/// An `n × n` matrix over `F_p`, row-major.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct FpMatrix {
    p: u64,
    n: usize,
    entries: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    p: u64,
    n: usize,
    entries: Vec<u64>,
}

impl TryFrom<RawMatrix> for FpMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        FpMatrix::from_entries(raw.p, raw.n, raw.entries)
    }
}

impl From<FpMatrix> for RawMatrix {
    fn from(m: FpMatrix) -> Self {
        RawMatrix {
            p: m.p,
            n: m.n,
            entries: m.entries,
        }
    }
}

impl std::fmt::Debug for FpMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FpMatrix(p={}, ", self.p)?;
        f.debug_list().entries(self.rows()).finish()?;
        f.write_str(")")
    }
}

impl FpMatrix {
    pub fn zero(p: u64, n: usize) -> Self {
        FpMatrix {
            p,
            n,
            entries: vec![0; n * n],
        }
    }

    pub fn identity(p: u64, n: usize) -> Self {
        let mut m = Self::zero(p, n);
        for i in 0..n {
            m.entries[i * n + i] = 1 % p;
        }
        m
    }

    /// Validates that `entries` is `n²` residues below `p`.
    pub fn from_entries(p: u64, n: usize, entries: Vec<u64>) -> Result<Self> {
        check_modulus(p)?;
        if entries.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for n = {n}, found {}",
                n * n,
                entries.len()
            )));
        }
        if let Some((i, &e)) = entries.iter().enumerate().find(|(_, &e)| e >= p) {
            return Err(Error::InvalidMatrix(format!(
                "entry {i} = {e} is not reduced modulo {p}"
            )));
        }
        Ok(FpMatrix { p, n, entries })
    }

    /// Reduces arbitrary signed rows modulo `p`.
    pub fn from_rows(p: u64, rows: &[Vec<i64>]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::InvalidMatrix("matrix is not square".into()));
            }
            entries.extend(row.iter().map(|&x| x.rem_euclid(p as i64) as u64));
        }
        Self::from_entries(p, n, entries)
    }

    pub fn random<R: Rng + ?Sized>(p: u64, n: usize, rng: &mut R) -> Self {
        FpMatrix {
            p,
            n,
            entries: (0..n * n).map(|_| rng.gen_range(0..p)).collect(),
        }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        self.entries[i * self.n + j] = v % self.p;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.entries.chunks(self.n.max(1)).take(self.n)
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [u64] {
        &mut self.entries
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.p, self.n)
    }

    fn check_compatible(&self, other: &FpMatrix) -> Result<()> {
        if self.p != other.p {
            return Err(Error::ModulusMismatch(self.p, other.p));
        }
        if self.n != other.n {
            return Err(Error::SizeMismatch(self.n, other.n));
        }
        Ok(())
    }

    pub fn mat_mul(&self, other: &FpMatrix) -> Result<FpMatrix> {
        self.check_compatible(other)?;
        let (n, p) = (self.n, self.p);
        let mut out = vec![0u64; n * n];
        for i in 0..n {
            let row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == 0 {
                    continue;
                }
                let other_row = &other.entries[k * n..(k + 1) * n];
                for (o, &b) in row.iter_mut().zip(other_row) {
                    *o = (*o + a * b) % p;
                }
            }
        }
        Ok(FpMatrix { p, n, entries: out })
    }

    pub fn mat_add(&self, other: &FpMatrix) -> Result<FpMatrix> {
        self.check_compatible(other)?;
        let p = self.p;
        Ok(FpMatrix {
            p,
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| add_mod(a, b, p))
                .collect(),
        })
    }

    pub fn scale(&self, s: u64) -> FpMatrix {
        let p = self.p;
        let s = s % p;
        FpMatrix {
            p,
            n: self.n,
            entries: self.entries.iter().map(|&a| mul_mod(a, s, p)).collect(),
        }
    }

    /// Two-sided inverse by Gauss-Jordan elimination.
    pub fn mat_inv(&self) -> Result<FpMatrix> {
        let (n, p) = (self.n, self.p);
        let w = 2 * n;
        let mut aug = vec![0u64; n * w];
        for i in 0..n {
            aug[i * w..i * w + n].copy_from_slice(&self.entries[i * n..(i + 1) * n]);
            aug[i * w + n + i] = 1 % p;
        }
        for col in 0..n {
            let pivot = (col..n)
                .find(|&r| aug[r * w + col] != 0)
                .ok_or(Error::Singular)?;
            if pivot != col {
                for j in 0..w {
                    aug.swap(pivot * w + j, col * w + j);
                }
            }
            let inv = inv_mod(aug[col * w + col], p)?;
            for j in 0..w {
                aug[col * w + j] = mul_mod(aug[col * w + j], inv, p);
            }
            let (head, tail) = aug.split_at_mut(col * w);
            let (pivot_row, tail) = tail.split_at_mut(w);
            for row in head.chunks_mut(w).chain(tail.chunks_mut(w)) {
                let f = row[col];
                if f == 0 {
                    continue;
                }
                let neg = p - f;
                for (x, &y) in row.iter_mut().zip(pivot_row.iter()) {
                    *x = (*x + neg * y) % p;
                }
            }
        }
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            entries.extend_from_slice(&aug[i * w + n..(i + 1) * w]);
        }
        Ok(FpMatrix { p, n, entries })
    }

    pub fn is_invertible(&self) -> bool {
        self.rank() == self.n
    }

    pub fn rank(&self) -> usize {
        let mut ech = EchelonForm::new(self.p, self.n);
        for row in self.rows() {
            ech.push_row(row.to_vec());
        }
        ech.rank()
    }

    /// `self^e` by square-and-multiply.
    pub fn pow(&self, mut e: u64) -> FpMatrix {
        let mut acc = Self::identity(self.p, self.n);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mat_mul(&base).expect("same shape");
            }
            e >>= 1;
            if e > 0 {
                base = base.mat_mul(&base).expect("same shape");
            }
        }
        acc
    }

    pub fn transpose(&self) -> FpMatrix {
        let n = self.n;
        let mut out = Self::zero(self.p, n);
        for i in 0..n {
            for j in 0..n {
                out.entries[j * n + i] = self.entries[i * n + j];
            }
        }
        out
    }
}

/// Incrementally maintained reduced row echelon form over `F_p`.
///
/// Rows are reduced against the current pivots as they arrive, so callers can
/// interleave `push_row` with kernel-dimension queries.
#[derive(Clone, Debug)]
pub struct EchelonForm {
    p: u64,
    width: usize,
    rows: Vec<Vec<u64>>,
    pivots: Vec<usize>,
    /// `pivot_of[col]` is the index into `rows` owning that pivot column.
    pivot_of: Vec<Option<usize>>,
}

impl EchelonForm {
    pub fn new(p: u64, width: usize) -> Self {
        EchelonForm {
            p,
            width,
            rows: Vec::new(),
            pivots: Vec::new(),
            pivot_of: vec![None; width],
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn kernel_dimension(&self) -> usize {
        self.width - self.rows.len()
    }

    /// Adds a row; returns `true` if it increased the rank.
    pub fn push_row(&mut self, mut row: Vec<u64>) -> bool {
        assert_eq!(row.len(), self.width, "row width mismatch");
        let p = self.p;
        if self.rows.len() == self.width {
            return false;
        }
        for (r, &pc) in self.pivots.iter().enumerate() {
            let f = row[pc];
            if f == 0 {
                continue;
            }
            let neg = p - f;
            let prow = &self.rows[r];
            for (x, &y) in row.iter_mut().zip(prow) {
                if y != 0 {
                    *x = (*x + neg * y) % p;
                }
            }
        }
        let Some(col) = row.iter().position(|&x| x != 0) else {
            return false;
        };
        let inv = inv_mod(row[col], p).expect("nonzero pivot");
        for x in row.iter_mut() {
            *x = mul_mod(*x, inv, p);
        }
        // Keep the form fully reduced: clear the new pivot column elsewhere.
        for prow in self.rows.iter_mut() {
            let f = prow[col];
            if f == 0 {
                continue;
            }
            let neg = p - f;
            for (x, &y) in prow.iter_mut().zip(&row) {
                if y != 0 {
                    *x = (*x + neg * y) % p;
                }
            }
        }
        self.pivot_of[col] = Some(self.rows.len());
        self.pivots.push(col);
        self.rows.push(row);
        true
    }

    /// Basis of the right kernel, one vector per free column, each with a 1
    /// in its free column (reduced echelon form of the kernel).
    pub fn kernel_basis(&self) -> Vec<Vec<u64>> {
        let p = self.p;
        let mut basis = Vec::new();
        for free in 0..self.width {
            if self.pivot_of[free].is_some() {
                continue;
            }
            let mut v = vec![0u64; self.width];
            v[free] = 1 % p;
            for (r, &pc) in self.pivots.iter().enumerate() {
                let a = self.rows[r][free];
                if a != 0 {
                    v[pc] = p - a;
                }
            }
            basis.push(v);
        }
        basis
    }
}

/// Basis of `{v : R v = 0}` for the given rows of width `m`.
///
/// An empty result means the kernel is trivial.
pub fn nullspace_basis(p: u64, m: usize, rows: &[Vec<u64>]) -> Result<Vec<Vec<u64>>> {
    check_modulus(p)?;
    let mut ech = EchelonForm::new(p, m);
    for row in rows {
        if row.len() != m {
            return Err(Error::InvalidMatrix(format!(
                "row of length {} in a system of width {m}",
                row.len()
            )));
        }
        ech.push_row(row.iter().map(|&x| x % p).collect());
    }
    Ok(ech.kernel_basis())
}

/// An element `ℓ₁κ^{j₁} + … + ℓ_rκ^{j_r}` of the commutative group `C`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CElement {
    pub coefficients: Vec<u64>,
    pub exponents: Vec<u64>,
    pub realized: FpMatrix,
}

impl CElement {
    /// Evaluates the linear combination of powers of `kappa`.
    pub fn realize(kappa: &FpMatrix, coefficients: &[u64], exponents: &[u64]) -> FpMatrix {
        let mut acc = FpMatrix::zero(kappa.p(), kappa.n());
        for (&l, &j) in coefficients.iter().zip(exponents) {
            let term = kappa.pow(j).scale(l);
            acc = acc.mat_add(&term).expect("same shape");
        }
        acc
    }
}

/// Default range for the exponents `j_i`: `p^n - 1`, capped at `2^31`.
pub fn default_exponent_bound(p: u64, n: usize) -> u64 {
    const CAP: u64 = 1 << 31;
    let mut acc: u64 = 1;
    for _ in 0..n {
        match acc.checked_mul(p) {
            Some(v) if v <= CAP => acc = v,
            _ => return CAP,
        }
    }
    (acc - 1).max(1)
}

const C_ELEMENT_RETRIES: usize = 64;

/// Samples an invertible element of `C` with `r` terms.
pub fn sample_c_element<R: Rng + ?Sized>(
    kappa: &FpMatrix,
    r: usize,
    exponent_bound: u64,
    rng: &mut R,
) -> Result<CElement> {
    if r == 0 {
        return Err(Error::InfeasibleParameters("r must be at least 1".into()));
    }
    let p = kappa.p();
    for _ in 0..C_ELEMENT_RETRIES {
        let coefficients: Vec<u64> = (0..r).map(|_| rng.gen_range(0..p)).collect();
        let exponents: Vec<u64> = (0..r).map(|_| rng.gen_range(0..exponent_bound.max(1))).collect();
        let realized = CElement::realize(kappa, &coefficients, &exponents);
        if realized.is_invertible() {
            return Ok(CElement {
                coefficients,
                exponents,
                realized,
            });
        }
    }
    Err(Error::RetryLimit(format!(
        "no invertible element of C after {C_ELEMENT_RETRIES} samples"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent rank: plain row reduction, no incremental bookkeeping.
    fn oracle_rank(p: u64, mut a: Vec<Vec<u64>>) -> usize {
        let rows = a.len();
        let cols = a.first().map_or(0, Vec::len);
        let mut rank = 0;
        for c in 0..cols {
            let Some(piv) = (rank..rows).find(|&r| a[r][c] % p != 0) else {
                continue;
            };
            a.swap(rank, piv);
            let inv = pow_mod(a[rank][c], p - 2, p);
            for r in 0..rows {
                if r != rank && a[r][c] != 0 {
                    let f = a[r][c] * inv % p;
                    for j in 0..cols {
                        a[r][j] = (a[r][j] + p * p - f * a[rank][j]) % p;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn identity_is_neutral() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = FpMatrix::random(13, 5, &mut rng);
        assert_eq!(FpMatrix::identity(13, 5).mat_mul(&a).unwrap(), a);
        assert_eq!(a.mat_mul(&FpMatrix::identity(13, 5)).unwrap(), a);
    }

    #[test]
    fn small_inverse() {
        let a = FpMatrix::from_rows(5, &[vec![1, 1], vec![0, 1]]).unwrap();
        let inv = a.mat_inv().unwrap();
        assert_eq!(inv, FpMatrix::from_rows(5, &[vec![1, 4], vec![0, 1]]).unwrap());
        assert!(a.mat_mul(&inv).unwrap().is_identity());
    }

    #[test]
    fn zero_matrix_is_singular() {
        assert!(matches!(FpMatrix::zero(7, 3).mat_inv(), Err(Error::Singular)));
    }

    #[test]
    fn random_inverses_and_associativity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a = FpMatrix::random(251, 6, &mut rng);
            let b = FpMatrix::random(251, 6, &mut rng);
            let c = FpMatrix::random(251, 6, &mut rng);
            assert_eq!(
                a.mat_mul(&b).unwrap().mat_mul(&c).unwrap(),
                a.mat_mul(&b.mat_mul(&c).unwrap()).unwrap()
            );
            if let Ok(inv) = a.mat_inv() {
                assert!(inv.mat_mul(&a).unwrap().is_identity());
                assert!(a.mat_mul(&inv).unwrap().is_identity());
            }
        }
    }

    #[test]
    fn incompatible_shapes() {
        let a = FpMatrix::identity(5, 2);
        assert!(matches!(
            a.mat_mul(&FpMatrix::identity(7, 2)),
            Err(Error::ModulusMismatch(5, 7))
        ));
        assert!(matches!(
            a.mat_mul(&FpMatrix::identity(5, 3)),
            Err(Error::SizeMismatch(2, 3))
        ));
    }

    #[test]
    fn validation_rejects_unreduced_entries() {
        assert!(FpMatrix::from_entries(5, 2, vec![0, 1, 5, 0]).is_err());
        assert!(FpMatrix::from_entries(6, 1, vec![0]).is_err());
        assert!(FpMatrix::from_entries(5, 2, vec![0, 1, 2]).is_err());
    }

    #[test]
    fn nullspace_examples() {
        assert!(nullspace_basis(5, 2, &[vec![1, 0], vec![0, 1]]).unwrap().is_empty());
        assert_eq!(nullspace_basis(5, 2, &[vec![1, 0]]).unwrap(), vec![vec![0, 1]]);
    }

    #[test]
    fn rank_three_system_has_one_dimensional_kernel() {
        let p = 251;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // 6 rows spanning a rank-3 space in F_p^4.
        let gens: Vec<Vec<u64>> = (0..3)
            .map(|_| (0..4).map(|_| rng.gen_range(0..p)).collect())
            .collect();
        let rows: Vec<Vec<u64>> = (0..6)
            .map(|_| {
                let coeffs: Vec<u64> = (0..3).map(|_| rng.gen_range(0..p)).collect();
                (0..4)
                    .map(|j| (0..3).map(|i| coeffs[i] * gens[i][j]).sum::<u64>() % p)
                    .collect()
            })
            .collect();
        let basis = nullspace_basis(p, 4, &rows).unwrap();
        assert_eq!(basis.len(), 1);
        for row in &rows {
            let dot: u64 = row.iter().zip(&basis[0]).map(|(a, b)| a * b % p).sum::<u64>() % p;
            assert_eq!(dot, 0);
        }
    }

    #[test]
    fn rank_nullity_against_transpose_rank() {
        let p = 13;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..60 {
            let rows_n = rng.gen_range(1..8);
            let m = rng.gen_range(1..8);
            let sparse = rng.gen_bool(0.5);
            let rows: Vec<Vec<u64>> = (0..rows_n)
                .map(|_| {
                    (0..m)
                        .map(|_| if sparse && rng.gen_bool(0.7) { 0 } else { rng.gen_range(0..p) })
                        .collect()
                })
                .collect();
            let basis = nullspace_basis(p, m, &rows).unwrap();
            for v in &basis {
                for row in &rows {
                    let dot: u64 = row.iter().zip(v).map(|(a, b)| a * b % p).sum::<u64>() % p;
                    assert_eq!(dot, 0);
                }
            }
            let transpose: Vec<Vec<u64>> = (0..m).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
            assert_eq!(oracle_rank(p, transpose) + basis.len(), m);
        }
    }

    #[test]
    fn c_elements_commute_and_are_invertible() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let kappa = make_kappa(251, 8, KappaMode::Irreducible, &mut rng).unwrap();
        let bound = default_exponent_bound(251, 8);
        let mut prev: Option<CElement> = None;
        for _ in 0..100 {
            let c = sample_c_element(&kappa.matrix, 3, bound, &mut rng).unwrap();
            assert!(c.realized.is_invertible());
            if let Some(d) = &prev {
                assert_eq!(
                    c.realized.mat_mul(&d.realized).unwrap(),
                    d.realized.mat_mul(&c.realized).unwrap()
                );
            }
            prev = Some(c);
        }
    }

    #[test]
    fn trivial_c_element_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let kappa = make_kappa(13, 4, KappaMode::Irreducible, &mut rng).unwrap();
        assert!(CElement::realize(&kappa.matrix, &[1], &[0]).is_identity());
    }

    #[test]
    fn exponent_bound_caps() {
        assert_eq!(default_exponent_bound(2, 3), 7);
        assert_eq!(default_exponent_bound(251, 16), 1 << 31);
    }
}
