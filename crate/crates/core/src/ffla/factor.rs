//! Primality testing and integer factorization for orders of `F_{p^n}^*`.
//!
//! Trial division up to 10⁶ followed by Pollard-Brent rho with an iteration
//! budget. The caller treats `None` as "factorization unavailable".

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

const TRIAL_LIMIT: u32 = 1_000_000;
const RHO_BUDGET: u64 = 1 << 18;

fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod_u64(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod_u64(acc, b, m);
        }
        b = mul_mod_u64(b, b, m);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for q in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % q == 0 {
            return n == q;
        }
    }
    let (mut d, mut s) = (n - 1, 0);
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn is_probable_prime(n: &BigUint) -> bool {
    if let Some(small) = n.to_u64() {
        return is_prime_u64(small);
    }
    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    'witness: for a in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47] {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn small_primes(limit: u32) -> Vec<u32> {
    let mut sieve = vec![true; limit as usize + 1];
    sieve[0] = false;
    if limit >= 1 {
        sieve[1] = false;
    }
    let mut i = 2usize;
    while i * i <= limit as usize {
        if sieve[i] {
            let mut j = i * i;
            while j <= limit as usize {
                sieve[j] = false;
                j += i;
            }
        }
        i += 1;
    }
    sieve
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| i as u32)
        .collect()
}

/// Pollard-Brent rho; returns a non-trivial factor of composite `n`.
fn pollard_brent(n: &BigUint, seed: u64) -> Option<BigUint> {
    let one = BigUint::one();
    let c = BigUint::from(seed % 1000 + 1);
    let f = |x: &BigUint| (x * x + &c) % n;
    let m = 128u64;
    let mut y = BigUint::from(seed % 97 + 2);
    let mut r = 1u64;
    let mut q = BigUint::one();
    let mut g = BigUint::one();
    let mut x = y.clone();
    let mut ys = y.clone();
    let mut spent = 0u64;
    while g == one {
        x = y.clone();
        for _ in 0..r {
            y = f(&y);
        }
        let mut k = 0;
        while k < r && g == one {
            ys = y.clone();
            for _ in 0..m.min(r - k) {
                y = f(&y);
                let diff = if x > y { &x - &y } else { &y - &x };
                q = (q * diff) % n;
            }
            g = q.gcd(n);
            k += m;
        }
        r *= 2;
        spent += r;
        if spent > RHO_BUDGET {
            return None;
        }
    }
    if &g == n {
        loop {
            ys = f(&ys);
            let diff = if x > ys { &x - &ys } else { &ys - &x };
            g = diff.gcd(n);
            if g != one {
                break;
            }
        }
    }
    (&g != n).then_some(g)
}

/// Distinct prime factors of `n`, or `None` when the budget runs out.
pub fn factor_biguint(n: &BigUint) -> Option<Vec<BigUint>> {
    let mut primes = Vec::new();
    let mut rest = n.clone();
    if rest.is_zero() {
        return None;
    }
    for q in small_primes(TRIAL_LIMIT) {
        let qb = BigUint::from(q);
        if (&rest % &qb).is_zero() {
            primes.push(qb.clone());
            while (&rest % &qb).is_zero() {
                rest /= &qb;
            }
        }
        if rest.is_one() {
            break;
        }
    }
    let mut stack = vec![rest];
    while let Some(m) = stack.pop() {
        if m.is_one() {
            continue;
        }
        if is_probable_prime(&m) {
            primes.push(m);
            continue;
        }
        let factor = (1..8).find_map(|seed| pollard_brent(&m, seed))?;
        let other = &m / &factor;
        stack.push(factor);
        stack.push(other);
    }
    primes.sort();
    primes.dedup();
    Some(primes)
}

/// Distinct prime factors of `p^n - 1`, factoring each cyclotomic value
/// `Φ_d(p)` (for `d | n`) separately.
pub(crate) fn factor_order(p: u64, n: usize) -> Option<Vec<BigUint>> {
    let pb = BigUint::from(p);
    let divisors: Vec<usize> = (1..=n).filter(|d| n % d == 0).collect();
    let mut cyclo: Vec<(usize, BigUint)> = Vec::new();
    for &d in &divisors {
        let mut value = pb.pow(d as u32) - BigUint::one();
        for (e, phi) in &cyclo {
            if d % e == 0 {
                value /= phi;
            }
        }
        cyclo.push((d, value));
    }
    let mut primes = Vec::new();
    for (_, value) in &cyclo {
        primes.extend(factor_biguint(value)?);
    }
    primes.sort();
    primes.dedup();
    Some(primes)
}
