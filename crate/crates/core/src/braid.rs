//! Braid words on `n` strands.
//!
//! A letter `+i` is the Artin generator `σ_i`, `-i` its inverse. Words are
//! only ever freely reduced; no normal form is computed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::perm::{Permutation, Point};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawWord", into = "RawWord")]
pub struct BraidWord {
    n: usize,
    letters: Vec<i32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWord {
    n: usize,
    letters: Vec<i32>,
}

impl TryFrom<RawWord> for BraidWord {
    type Error = Error;
    fn try_from(raw: RawWord) -> Result<Self> {
        BraidWord::new(raw.n, raw.letters)
    }
}

impl From<BraidWord> for RawWord {
    fn from(w: BraidWord) -> Self {
        RawWord {
            n: w.n,
            letters: w.letters,
        }
    }
}

impl BraidWord {
    pub fn new(n: usize, letters: Vec<i32>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidBraid(format!("need at least 2 strands, got {n}")));
        }
        if let Some(&bad) = letters
            .iter()
            .find(|&&e| e == 0 || e.unsigned_abs() as usize >= n)
        {
            return Err(Error::InvalidBraid(format!("letter {bad} outside ±[1, {}]", n - 1)));
        }
        Ok(BraidWord { n, letters })
    }

    pub fn empty(n: usize) -> Self {
        BraidWord { n, letters: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn letters(&self) -> &[i32] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Cancels adjacent `e, -e` pairs until none remain.
    pub fn free_reduce(&self) -> BraidWord {
        let mut stack: Vec<i32> = Vec::with_capacity(self.letters.len());
        for &e in &self.letters {
            if stack.last() == Some(&-e) {
                stack.pop();
            } else {
                stack.push(e);
            }
        }
        BraidWord {
            n: self.n,
            letters: stack,
        }
    }

    /// Image in `S_n`: the left-to-right product of `(i, i+1)` over letters `±i`.
    pub fn permutation_of(&self) -> Permutation {
        let mut images: Vec<Point> = (0..self.n as Point).collect();
        // Composing on the right with (i i+1) swaps the values i and i+1.
        let mut inv: Vec<usize> = (0..self.n).collect();
        for &e in &self.letters {
            let r = e.unsigned_abs() as usize - 1;
            let (a, b) = (inv[r], inv[r + 1]);
            images.swap(a, b);
            inv.swap(r, r + 1);
        }
        Permutation::from_images(images).expect("swaps preserve bijectivity")
    }

    /// Letters reversed and negated.
    pub fn inverse_word(&self) -> BraidWord {
        BraidWord {
            n: self.n,
            letters: self.letters.iter().rev().map(|&e| -e).collect(),
        }
    }

    pub fn concat(&self, other: &BraidWord) -> Result<BraidWord> {
        if self.n != other.n {
            return Err(Error::SizeMismatch(self.n, other.n));
        }
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Ok(BraidWord { n: self.n, letters })
    }

    /// `self` repeated `m` times, unreduced.
    pub fn power(&self, m: usize) -> BraidWord {
        BraidWord {
            n: self.n,
            letters: self.letters.repeat(m),
        }
    }

    /// A uniform word of length `len` over the given generator indices and
    /// their inverses (not reduced).
    pub fn random<R: Rng + ?Sized>(n: usize, indices: &[usize], len: usize, rng: &mut R) -> Result<BraidWord> {
        if indices.is_empty() && len > 0 {
            return Err(Error::InvalidBraid("no generators to sample from".into()));
        }
        let letters = (0..len)
            .map(|_| {
                let i = indices[rng.gen_range(0..indices.len())] as i32;
                if rng.gen_bool(0.5) {
                    i
                } else {
                    -i
                }
            })
            .collect();
        BraidWord::new(n, letters)
    }

    /// A uniform freely reduced word of length exactly `len` over all `n - 1`
    /// generators.
    pub fn random_reduced<R: Rng + ?Sized>(n: usize, len: usize, rng: &mut R) -> Result<BraidWord> {
        if n < 2 {
            return Err(Error::InvalidBraid(format!("need at least 2 strands, got {n}")));
        }
        let mut letters: Vec<i32> = Vec::with_capacity(len);
        while letters.len() < len {
            let i = rng.gen_range(1..n as i32);
            let e = if rng.gen_bool(0.5) { i } else { -i };
            if letters.last() != Some(&-e) {
                letters.push(e);
            }
        }
        BraidWord::new(n, letters)
    }
}

/// The positive half twist `(σ₁)(σ₂σ₁)⋯(σ_{n-1}⋯σ₁)`.
pub fn delta_word(n: usize) -> Result<BraidWord> {
    let mut letters = Vec::with_capacity(n * (n - 1) / 2);
    for top in 1..n as i32 {
        letters.extend((1..=top).rev());
    }
    BraidWord::new(n, letters)
}

/// `Δ²`, the generator of the centre.
pub fn full_twist(n: usize) -> Result<BraidWord> {
    Ok(delta_word(n)?.power(2))
}
