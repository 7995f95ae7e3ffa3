//! Univariate polynomials over `F_p` and construction of the matrix `κ`.

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::factor::factor_order;
use super::{check_modulus, inv_mod, FpMatrix};
use crate::{Error, Result};

/// Coefficients, lowest degree first, with no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Poly {
    pub p: u64,
    pub coeffs: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaMode {
    /// Companion of a primitive polynomial: order exactly `p^n - 1`.
    Primitive,
    /// Companion of an irreducible polynomial: order divides `p^n - 1`.
    Irreducible,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Kappa {
    pub matrix: FpMatrix,
    /// Monic defining polynomial, lowest degree first (length `n + 1`).
    pub polynomial: Vec<u64>,
    pub mode: KappaMode,
}

impl Poly {
    pub fn new(p: u64, mut coeffs: Vec<u64>) -> Self {
        for c in coeffs.iter_mut() {
            *c %= p;
        }
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        Poly { p, coeffs }
    }

    pub fn x(p: u64) -> Self {
        Poly::new(p, vec![0, 1])
    }

    pub fn one(p: u64) -> Self {
        Poly::new(p, vec![1])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let p = self.p;
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len)
            .map(|i| {
                let a = self.coeffs.get(i).copied().unwrap_or(0);
                let b = other.coeffs.get(i).copied().unwrap_or(0);
                (a + p - b) % p
            })
            .collect();
        Poly::new(p, coeffs)
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::new(self.p, vec![]);
        }
        let p = self.p;
        let mut out = vec![0u64; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] = (out[i + j] + a * b) % p;
            }
        }
        Poly::new(p, out)
    }

    /// Remainder of division by a nonzero polynomial.
    pub fn rem(&self, modulus: &Poly) -> Poly {
        let p = self.p;
        let dm = modulus.degree().expect("division by zero polynomial");
        let lead_inv = inv_mod(modulus.coeffs[dm], p).expect("nonzero leading coefficient");
        let mut r = self.coeffs.clone();
        while r.len() > dm {
            let top = r.len() - 1;
            let f = r[top] * lead_inv % p;
            if f != 0 {
                let shift = top - dm;
                for (i, &m) in modulus.coeffs.iter().enumerate() {
                    r[shift + i] = (r[shift + i] + p - f * m % p) % p;
                }
            }
            r.pop();
            while r.last() == Some(&0) {
                r.pop();
            }
        }
        Poly::new(p, r)
    }

    pub fn mul_mod(&self, other: &Poly, modulus: &Poly) -> Poly {
        self.mul(other).rem(modulus)
    }

    pub fn pow_mod(&self, e: &BigUint, modulus: &Poly) -> Poly {
        let mut acc = Poly::one(self.p).rem(modulus);
        let base = self.rem(modulus);
        for i in (0..e.bits()).rev() {
            acc = acc.mul_mod(&acc, modulus);
            if e.bit(i) {
                acc = acc.mul_mod(&base, modulus);
            }
        }
        acc
    }

    pub fn gcd(&self, other: &Poly) -> Poly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        if let Some(d) = a.degree() {
            let inv = inv_mod(a.coeffs[d], a.p).expect("nonzero");
            for c in a.coeffs.iter_mut() {
                *c = *c * inv % a.p;
            }
        }
        a
    }
}

fn prime_divisors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut q = 2;
    while q * q <= n {
        if n % q == 0 {
            out.push(q);
            while n % q == 0 {
                n /= q;
            }
        }
        q += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// `x^(p^k) mod f` by `k` successive `p`-th powers.
fn frobenius_power(f: &Poly, k: usize) -> Poly {
    let pb = BigUint::from(f.p);
    let mut acc = Poly::x(f.p).rem(f);
    for _ in 0..k {
        acc = acc.pow_mod(&pb, f);
    }
    acc
}

/// Rabin's test: `f` of degree `n` is irreducible iff `x^(p^n) = x mod f` and
/// `gcd(x^(p^(n/q)) - x, f) = 1` for every prime `q | n`.
pub fn is_irreducible(f: &Poly) -> bool {
    let Some(n) = f.degree() else {
        return false;
    };
    if n == 0 {
        return false;
    }
    if n == 1 {
        return true;
    }
    let x = Poly::x(f.p).rem(f);
    if frobenius_power(f, n) != x {
        return false;
    }
    prime_divisors(n).into_iter().all(|q| {
        let h = frobenius_power(f, n / q).sub(&x);
        f.gcd(&h).degree() == Some(0)
    })
}

/// Distinct prime factors of `p^n - 1`, if obtainable within the search budget.
pub fn multiplicative_order_factors(p: u64, n: usize) -> Option<Vec<BigUint>> {
    factor_order(p, n)
}

/// Whether an irreducible `f` of degree `n` has `x` of order exactly `p^n - 1`.
pub fn is_primitive(f: &Poly, order_primes: &[BigUint]) -> bool {
    let Some(n) = f.degree() else {
        return false;
    };
    let order = BigUint::from(f.p).pow(n as u32) - 1u32;
    let x = Poly::x(f.p);
    let one = Poly::one(f.p);
    order_primes
        .iter()
        .all(|q| x.pow_mod(&(&order / q), f) != one)
}

/// Companion matrix of a monic polynomial `x^n + c_{n-1}x^{n-1} + … + c_0`:
/// ones on the subdiagonal and `-c_i` down the last column.
pub fn companion_matrix(p: u64, monic: &[u64]) -> Result<FpMatrix> {
    let n = monic.len().checked_sub(1).filter(|&n| n >= 1).ok_or_else(|| {
        Error::InvalidMatrix("companion matrix needs degree at least 1".into())
    })?;
    if monic[n] % p != 1 {
        return Err(Error::InvalidMatrix("polynomial is not monic".into()));
    }
    let mut m = FpMatrix::zero(p, n);
    for i in 1..n {
        m.set(i, i - 1, 1);
    }
    for (i, &c) in monic[..n].iter().enumerate() {
        m.set(i, n - 1, (p - c % p) % p);
    }
    Ok(m)
}

const KAPPA_TRIES: usize = 200_000;

/// Samples a random monic irreducible (optionally primitive) polynomial of
/// degree `n` and returns its companion matrix.
pub fn make_kappa<R: Rng + ?Sized>(p: u64, n: usize, mode: KappaMode, rng: &mut R) -> Result<Kappa> {
    check_modulus(p)?;
    if n < 2 {
        return Err(Error::InfeasibleParameters(format!("kappa needs n >= 2, got {n}")));
    }
    let order_primes = match mode {
        KappaMode::Primitive => {
            Some(factor_order(p, n).ok_or(Error::FactorizationUnavailable { p, n })?)
        }
        KappaMode::Irreducible => None,
    };
    for _ in 0..KAPPA_TRIES {
        let mut coeffs: Vec<u64> = (0..n).map(|_| rng.gen_range(0..p)).collect();
        if coeffs[0] == 0 {
            continue;
        }
        coeffs.push(1);
        let f = Poly::new(p, coeffs.clone());
        if !is_irreducible(&f) {
            continue;
        }
        if let Some(primes) = &order_primes {
            if !is_primitive(&f, primes) {
                continue;
            }
        }
        return Ok(Kappa {
            matrix: companion_matrix(p, &coeffs)?,
            polynomial: coeffs,
            mode,
        });
    }
    Err(Error::RetryLimit(format!(
        "no suitable polynomial of degree {n} over F_{p}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Order of a matrix by walking its powers.
    fn brute_order(m: &FpMatrix, limit: u64) -> Option<u64> {
        let mut acc = m.clone();
        for d in 1..=limit {
            if acc.is_identity() {
                return Some(d);
            }
            acc = acc.mat_mul(m).unwrap();
        }
        None
    }

    /// Irreducible iff no monic factor of degree 1..=n/2 divides it.
    fn brute_irreducible(f: &Poly) -> bool {
        let n = f.degree().unwrap();
        if n == 0 {
            return false;
        }
        let p = f.p;
        for d in 1..=n / 2 {
            let count = p.pow(d as u32);
            for idx in 0..count {
                let mut coeffs = Vec::with_capacity(d + 1);
                let mut v = idx;
                for _ in 0..d {
                    coeffs.push(v % p);
                    v /= p;
                }
                coeffs.push(1);
                if f.rem(&Poly::new(p, coeffs)).is_zero() {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn x3_plus_x_plus_1_is_primitive_over_f2() {
        let f = Poly::new(2, vec![1, 1, 0, 1]);
        assert!(is_irreducible(&f));
        let primes = multiplicative_order_factors(2, 3).unwrap();
        assert!(is_primitive(&f, &primes));
        let k = companion_matrix(2, &[1, 1, 0, 1]).unwrap();
        assert!(k.pow(7).is_identity());
        for d in 1..7 {
            assert!(!k.pow(d).is_identity());
        }
    }

    #[test]
    fn primitive_kappa_over_f3_has_order_8() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let k = make_kappa(3, 2, KappaMode::Primitive, &mut rng).unwrap();
            assert_eq!(brute_order(&k.matrix, 20), Some(8));
        }
    }

    #[test]
    fn reducible_candidates_rejected() {
        // (x + 1)^2 over F_3 and x^2 + x over F_5
        assert!(!is_irreducible(&Poly::new(3, vec![1, 2, 1])));
        assert!(!is_irreducible(&Poly::new(5, vec![0, 1, 1])));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let k = make_kappa(5, 4, KappaMode::Irreducible, &mut rng).unwrap();
            assert!(brute_irreducible(&Poly::new(5, k.polynomial.clone())));
        }
    }

    #[test]
    fn rabin_agrees_with_brute_force() {
        for p in [2u64, 3, 5] {
            for n in 1..=4usize {
                for idx in 0..p.pow(n as u32) {
                    let mut coeffs = Vec::new();
                    let mut v = idx;
                    for _ in 0..n {
                        coeffs.push(v % p);
                        v /= p;
                    }
                    coeffs.push(1);
                    let f = Poly::new(p, coeffs);
                    assert_eq!(is_irreducible(&f), brute_irreducible(&f), "p={p} f={:?}", f.coeffs);
                }
            }
        }
    }

    #[test]
    fn companion_order_divides_field_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = make_kappa(7, 3, KappaMode::Irreducible, &mut rng).unwrap();
        assert!(k.matrix.pow(7u64.pow(3) - 1).is_identity());
    }

    #[test]
    fn primitive_default_parameters_are_factorable() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let k = make_kappa(251, 16, KappaMode::Primitive, &mut rng).unwrap();
        assert_eq!(k.mode, KappaMode::Primitive);
        assert_eq!(k.matrix.n(), 16);
    }
}
