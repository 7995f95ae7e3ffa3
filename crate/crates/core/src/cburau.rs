//! Evaluated colored Burau folding.
//!
//! A state is a pair `(m, σ)` of a matrix over `F_p` and a permutation. Folding
//! a letter `±i` multiplies `m` on the right by the generator matrix `x_i^{±1}`
//! whose variable is evaluated at `τ_{σ⁻¹(i)}`, then advances `σ` by `(i i+1)`.
//! For an inverse letter the permutation moves first, so that `σ_i` followed by
//! `σ_i⁻¹` cancels exactly.
//!
//! `x_i` differs from the identity only in row `i`: `(t, -t, 1)` at columns
//! `(i-1, i, i+1)` for `i ≥ 2`, `(-t, 1)` at columns `(1, 2)` for `i = 1`.

use serde::{Deserialize, Serialize};

use crate::braid::BraidWord;
use crate::ffla::{check_modulus, inv_mod, FpMatrix};
use crate::perm::{Permutation, Point};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawEval", into = "RawEval")]
pub struct EvalPoints {
    p: u64,
    taus: Vec<u64>,
    inv_taus: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEval {
    p: u64,
    taus: Vec<u64>,
}

impl TryFrom<RawEval> for EvalPoints {
    type Error = Error;
    fn try_from(raw: RawEval) -> Result<Self> {
        EvalPoints::new(raw.p, raw.taus)
    }
}

impl From<EvalPoints> for RawEval {
    fn from(ev: EvalPoints) -> Self {
        RawEval {
            p: ev.p,
            taus: ev.taus,
        }
    }
}

impl EvalPoints {
    pub fn new(p: u64, taus: Vec<u64>) -> Result<Self> {
        check_modulus(p)?;
        if let Some(bad) = taus.iter().find(|&&t| t == 0 || t >= p) {
            return Err(Error::InvalidEvalPoints(format!(
                "τ = {bad} is not a nonzero residue mod {p}"
            )));
        }
        let inv_taus = taus.iter().map(|&t| inv_mod(t, p)).collect::<Result<_>>()?;
        Ok(EvalPoints { p, taus, inv_taus })
    }

    pub fn random<R: rand::Rng + ?Sized>(p: u64, n: usize, rng: &mut R) -> Result<Self> {
        check_modulus(p)?;
        Self::new(p, (0..n).map(|_| rng.gen_range(1..p)).collect())
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.taus.len()
    }

    pub fn taus(&self) -> &[u64] {
        &self.taus
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarState {
    pub m: FpMatrix,
    pub sigma: Permutation,
}

impl StarState {
    pub fn identity(p: u64, n: usize) -> Self {
        StarState {
            m: FpMatrix::identity(p, n),
            sigma: Permutation::identity(n),
        }
    }

    pub fn new(m: FpMatrix, sigma: Permutation) -> Result<Self> {
        if m.n() != sigma.degree_n() {
            return Err(Error::SizeMismatch(m.n(), sigma.degree_n()));
        }
        Ok(StarState { m, sigma })
    }
}

/// `x_i` (sign `+1`) or `x_i⁻¹` (sign `-1`) with its variable evaluated at
/// `τ_{σ⁻¹(i)}`. `i` is 1-based.
pub fn generator_matrix(i: usize, sign: i32, sigma: &Permutation, ev: &EvalPoints) -> Result<FpMatrix> {
    let n = ev.n();
    if i == 0 || i >= n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    if sigma.degree_n() != n {
        return Err(Error::SizeMismatch(sigma.degree_n(), n));
    }
    let p = ev.p;
    let r = i - 1;
    let color = sigma.inverse().apply(r as Point) as usize;
    let mut m = FpMatrix::identity(p, n);
    let (t, ti) = (ev.taus[color], ev.inv_taus[color]);
    let neg = |x: u64| (p - x) % p;
    match (sign > 0, r) {
        (true, 0) => {
            m.set(0, 0, neg(t));
            m.set(0, 1, 1);
        }
        (true, _) => {
            m.set(r, r - 1, t);
            m.set(r, r, neg(t));
            m.set(r, r + 1, 1);
        }
        (false, 0) => {
            m.set(0, 0, neg(ti));
            m.set(0, 1, ti);
        }
        (false, _) => {
            m.set(r, r - 1, 1);
            m.set(r, r, neg(ti));
            m.set(r, r + 1, ti);
        }
    }
    Ok(m)
}

/// In-place fold. `inv` must hold the inverse of `state.sigma`.
fn fold_letters(m: &mut FpMatrix, sigma_images: &mut [Point], inv: &mut [Point], letters: &[i32], ev: &EvalPoints) {
    let n = ev.n();
    let p = ev.p;
    let entries = m.entries_mut();
    for &e in letters {
        let r = e.unsigned_abs() as usize - 1;
        // Right multiplication by (r r+1) swaps the values r and r+1.
        let advance = |sigma_images: &mut [Point], inv: &mut [Point]| {
            let (a, b) = (inv[r] as usize, inv[r + 1] as usize);
            sigma_images.swap(a, b);
            inv.swap(r, r + 1);
        };
        if e < 0 {
            advance(sigma_images, inv);
        }
        let color = inv[r] as usize;
        if e > 0 {
            let t = ev.taus[color];
            let mt = p - t;
            for row in entries.chunks_exact_mut(n) {
                let v = row[r];
                if r > 0 {
                    row[r - 1] = (row[r - 1] + t * v) % p;
                }
                row[r] = mt * v % p;
                row[r + 1] = (row[r + 1] + v) % p;
            }
        } else {
            let ti = ev.inv_taus[color];
            let mti = p - ti;
            for row in entries.chunks_exact_mut(n) {
                let v = row[r];
                if r > 0 {
                    row[r - 1] = (row[r - 1] + v) % p;
                }
                row[r] = mti * v % p;
                row[r + 1] = (row[r + 1] + ti * v) % p;
            }
        }
        if e > 0 {
            advance(sigma_images, inv);
        }
    }
}

/// `start ⋆ w`: folds the letters of `w` left to right.
pub fn star_fold(start: &StarState, w: &BraidWord, ev: &EvalPoints) -> Result<StarState> {
    let n = w.n();
    if start.m.n() != n || start.sigma.degree_n() != n || ev.n() != n {
        return Err(Error::SizeMismatch(start.m.n(), n));
    }
    if start.m.p() != ev.p {
        return Err(Error::ModulusMismatch(start.m.p(), ev.p));
    }
    let mut m = start.m.clone();
    let mut images = start.sigma.images().to_vec();
    let mut inv = start.sigma.inverse().images().to_vec();
    fold_letters(&mut m, &mut images, &mut inv, w.letters(), ev);
    Ok(StarState {
        m,
        sigma: Permutation::from_images(images).expect("fold keeps a bijection"),
    })
}

/// `φ(w)`: matrix part of `(I, id) ⋆ w`.
pub fn phi_of(w: &BraidWord, ev: &EvalPoints) -> Result<FpMatrix> {
    Ok(star_fold(&StarState::identity(ev.p, ev.n()), w, ev)?.m)
}

/// `φ(^h w)`: matrix part of `(I, h) ⋆ w`.
pub fn phi_twisted(w: &BraidWord, h: &Permutation, ev: &EvalPoints) -> Result<FpMatrix> {
    let start = StarState::new(FpMatrix::identity(ev.p, ev.n()), h.clone())?;
    Ok(star_fold(&start, w, ev)?.m)
}
