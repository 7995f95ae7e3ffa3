//! Permutations of `{1..n}`.
//!
//! Composition is left to right: `s.compose(&t)` first applies `s`, then `t`,
//! so `s.compose(&t)(x) = t(s(x))`. This matches the left-to-right order of
//! `⋆` products and of braid words. For example `(1 2)` followed by `(1 3)` is
//! the 3-cycle `1 -> 2 -> 3 -> 1`, i.e. the image array `[2, 3, 1]`.
//!
//! Points are 0-based in the API (`Point`), 1-based in every serialized form
//! and in `Display`.

use std::fmt;
use std::ops::Mul;

use num_integer::Integer;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A 0-based point of `{0..n}`.
pub type Point = u32;

/// A transposition `(a b)`.
pub type TwoCycle = [Point; 2];

/// A 3-cycle `[a, b, c]` mapping `a -> b -> c -> a`.
pub type ThreeCycle = [Point; 3];

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Permutation {
    images: Vec<Point>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Restriction on the parity of sampled permutations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParityConstraint {
    Any,
    Even,
    Odd,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleData {
    /// Lengths of the non-trivial cycles, in order of their minimal point.
    pub structure: Vec<usize>,
    pub degree: usize,
    /// Saturates at `u128::MAX`.
    pub order: u128,
    pub parity: Parity,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            images: (0..n as Point).collect(),
        }
    }

    /// Builds a permutation from 0-based images, checking bijectivity.
    pub fn from_images(images: Vec<Point>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &x in &images {
            let x = x as usize;
            if x >= n {
                return Err(Error::InvalidPermutation(format!(
                    "image {} out of range for degree {n}",
                    x + 1
                )));
            }
            if std::mem::replace(&mut seen[x], true) {
                return Err(Error::InvalidPermutation(format!(
                    "image {} repeated",
                    x + 1
                )));
            }
        }
        Ok(Permutation { images })
    }

    /// Builds a permutation from the 1-based image array used in files.
    pub fn from_one_based(images: &[u32]) -> Result<Self> {
        let zero = images
            .iter()
            .map(|&x| {
                x.checked_sub(1)
                    .ok_or_else(|| Error::InvalidPermutation("symbol 0 in 1-based array".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_images(zero)
    }

    pub fn to_one_based(&self) -> Vec<u32> {
        self.images.iter().map(|&x| x + 1).collect()
    }

    pub fn transposition(n: usize, a: Point, b: Point) -> Self {
        let mut p = Self::identity(n);
        p.images.swap(a as usize, b as usize);
        p
    }

    /// The cycle `points[0] -> points[1] -> ... -> points[0]`.
    pub fn cycle(n: usize, points: &[Point]) -> Self {
        let mut p = Self::identity(n);
        for (i, &a) in points.iter().enumerate() {
            p.images[a as usize] = points[(i + 1) % points.len()];
        }
        p
    }

    pub fn three_cycle(n: usize, c: ThreeCycle) -> Self {
        Self::cycle(n, &c)
    }

    pub fn degree_n(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[Point] {
        &self.images
    }

    #[inline]
    pub fn apply(&self, x: Point) -> Point {
        self.images[x as usize]
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &x)| i as Point == x)
    }

    /// Left-to-right product: `self` first, then `other`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.images.len() != other.images.len() {
            return Err(Error::SizeMismatch(self.images.len(), other.images.len()));
        }
        Ok(self.then(other))
    }

    pub(crate) fn then(&self, other: &Permutation) -> Permutation {
        debug_assert_eq!(self.images.len(), other.images.len());
        Permutation {
            images: self.images.iter().map(|&x| other.images[x as usize]).collect(),
        }
    }

    /// Writes `self` followed by `other` into `out` without allocating.
    #[inline]
    pub(crate) fn then_into(&self, other: &Permutation, out: &mut Permutation) {
        for (o, &x) in out.images.iter_mut().zip(&self.images) {
            *o = other.images[x as usize];
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.images.len()];
        for (i, &x) in self.images.iter().enumerate() {
            inv[x as usize] = i as Point;
        }
        Permutation { images: inv }
    }

    pub fn power(&self, m: u64) -> Permutation {
        let n = self.images.len();
        if m <= n as u64 {
            let mut acc = Self::identity(n);
            for _ in 0..m {
                acc = acc.then(self);
            }
            return acc;
        }
        let mut acc = Self::identity(n);
        let mut base = self.clone();
        let mut e = m;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.then(&base);
            }
            base = base.then(&base);
            e >>= 1;
        }
        acc
    }

    /// `t⁻¹ · self · t`, which relabels every cycle `(a b ..)` as `(t(a) t(b) ..)`.
    pub fn conjugate(&self, t: &Permutation) -> Result<Permutation> {
        if self.images.len() != t.images.len() {
            return Err(Error::SizeMismatch(self.images.len(), t.images.len()));
        }
        let mut out = vec![0; self.images.len()];
        for (a, &b) in self.images.iter().enumerate() {
            out[t.images[a] as usize] = t.images[b as usize];
        }
        Ok(Permutation { images: out })
    }

    /// Number of moved points.
    pub fn degree(&self) -> usize {
        self.images
            .iter()
            .enumerate()
            .filter(|&(i, &x)| i as Point != x)
            .count()
    }

    pub fn support(&self) -> Vec<Point> {
        self.images
            .iter()
            .enumerate()
            .filter(|&(i, &x)| i as Point != x)
            .map(|(i, _)| i as Point)
            .collect()
    }

    /// Non-trivial cycles, each starting at its minimal point, ordered by that point.
    pub fn cycles(&self) -> Vec<Vec<Point>> {
        let n = self.images.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] || self.images[start] as usize == start {
                continue;
            }
            let mut cyc = Vec::new();
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                cyc.push(x as Point);
                x = self.images[x] as usize;
            }
            out.push(cyc);
        }
        out
    }

    /// Cycle lengths (fixed points excluded), written into a reusable buffer.
    pub(crate) fn cycle_lengths_into(&self, seen: &mut Vec<bool>, out: &mut Vec<(usize, Point)>) {
        let n = self.images.len();
        seen.clear();
        seen.resize(n, false);
        out.clear();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                len += 1;
                x = self.images[x] as usize;
            }
            if len > 1 {
                out.push((len, start as Point));
            }
        }
    }

    pub fn cycle_data(&self) -> CycleData {
        let structure: Vec<usize> = self.cycles().iter().map(Vec::len).collect();
        let degree = structure.iter().sum();
        let order = structure
            .iter()
            .fold(1u128, |acc, &l| lcm_saturating(acc, l as u128));
        let transpositions: usize = structure.iter().map(|l| l - 1).sum();
        let parity = if transpositions % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        };
        CycleData {
            structure,
            degree,
            order,
            parity,
        }
    }

    pub fn parity(&self) -> Parity {
        self.cycle_data().parity
    }

    /// Uniform sample from `S_n`, `A_n` or `S_n \ A_n`.
    pub fn sample<R: Rng + ?Sized>(n: usize, constraint: ParityConstraint, rng: &mut R) -> Self {
        let mut images: Vec<Point> = (0..n as Point).collect();
        images.shuffle(rng);
        let mut p = Permutation { images };
        let want = match constraint {
            ParityConstraint::Any => return p,
            ParityConstraint::Even => Parity::Even,
            ParityConstraint::Odd => Parity::Odd,
        };
        if n >= 2 && p.parity() != want {
            // Composing with a fixed transposition is a bijection between the cosets.
            p.images.swap(0, 1);
        }
        p
    }

    /// Canonical product of at most `n - 1` transpositions equal to `self`.
    ///
    /// Each cycle `a1 -> a2 -> .. -> am` (with `a1` minimal) is emitted as
    /// `(a1 a2), (a1 a3), .., (a1 am)`; cycles are taken in order of `a1`.
    pub fn decompose_transpositions(&self) -> Vec<TwoCycle> {
        let mut out = Vec::new();
        for cyc in self.cycles() {
            let head = cyc[0];
            out.extend(cyc[1..].iter().map(|&a| [head, a]));
        }
        out
    }

    /// Canonical product of 3-cycles equal to an even permutation.
    ///
    /// Consecutive transpositions of [`Self::decompose_transpositions`] are
    /// paired; each pair becomes one 3-cycle when it shares a point and two
    /// 3-cycles when disjoint.
    pub fn decompose_three_cycles(&self) -> Result<Vec<ThreeCycle>> {
        let ts = self.decompose_transpositions();
        if ts.len() % 2 == 1 {
            return Err(Error::OddPermutation);
        }
        let mut out = Vec::with_capacity(ts.len());
        for pair in ts.chunks_exact(2) {
            pair_to_three_cycles(pair[0], pair[1], &mut out);
        }
        Ok(out)
    }
}

/// Rewrites the left-to-right product `(a b)(c d)` as 3-cycles.
fn pair_to_three_cycles(t1: TwoCycle, t2: TwoCycle, out: &mut Vec<ThreeCycle>) {
    let [a, b] = t1;
    let shared = if t2.contains(&a) {
        Some(a)
    } else if t2.contains(&b) {
        Some(b)
    } else {
        None
    };
    match shared {
        // (x y)(x z) maps x -> y -> z -> x.
        Some(x) => {
            let y = if x == a { b } else { a };
            let z = if t2[0] == x { t2[1] } else { t2[0] };
            debug_assert_ne!(y, z);
            out.push([x, y, z]);
        }
        // (a b)(c d) = (a b)(b c) . (b c)(c d) = [a, c, b] . [b, d, c].
        None => {
            let [c, d] = t2;
            out.push([a, c, b]);
            out.push([b, d, c]);
        }
    }
}

fn lcm_saturating(a: u128, b: u128) -> u128 {
    let g = a.gcd(&b);
    (a / g).checked_mul(b).unwrap_or(u128::MAX)
}

impl Mul<&Permutation> for &Permutation {
    type Output = Permutation;

    /// Left-to-right product; panics on a size mismatch.
    fn mul(self, rhs: &Permutation) -> Permutation {
        assert_eq!(self.images.len(), rhs.images.len(), "permutation size mismatch");
        self.then(rhs)
    }
}

impl TryFrom<Vec<u32>> for Permutation {
    type Error = Error;

    fn try_from(images: Vec<u32>) -> Result<Self> {
        Permutation::from_one_based(&images)
    }
}

impl From<Permutation> for Vec<u32> {
    fn from(p: Permutation) -> Self {
        p.to_one_based()
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.to_one_based())
    }
}

impl fmt::Display for Permutation {
    /// Cycle notation with 1-based symbols, `()` for the identity.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles = self.cycles();
        if cycles.is_empty() {
            return f.write_str("()");
        }
        for cyc in cycles {
            f.write_str("(")?;
            for (i, x) in cyc.iter().enumerate() {
                if i > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{}", x + 1)?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(v: &[u32]) -> Permutation {
        Permutation::from_one_based(v).unwrap()
    }

    fn product_of(n: usize, perms: impl IntoIterator<Item = Permutation>) -> Permutation {
        perms
            .into_iter()
            .fold(Permutation::identity(n), |acc, q| acc.then(&q))
    }

    #[test]
    fn compose_is_left_to_right() {
        assert_eq!(p(&[2, 3, 1]).compose(&p(&[2, 1, 3])).unwrap(), p(&[1, 3, 2]));
        assert_eq!(
            Permutation::identity(3).compose(&p(&[2, 1, 3])).unwrap(),
            p(&[2, 1, 3])
        );
        assert!(p(&[2, 1, 3]).compose(&p(&[2, 1, 3])).unwrap().is_identity());
        // (1 2) then (1 3) is the cycle 1 -> 2 -> 3 -> 1.
        let t12 = Permutation::transposition(3, 0, 1);
        let t13 = Permutation::transposition(3, 0, 2);
        assert_eq!(&t12 * &t13, p(&[2, 3, 1]));
    }

    #[test]
    fn compose_size_mismatch() {
        assert!(matches!(
            p(&[1, 2]).compose(&p(&[1, 2, 3])),
            Err(Error::SizeMismatch(2, 3))
        ));
    }

    #[test]
    fn inverse_and_power() {
        assert_eq!(p(&[2, 3, 1]).inverse(), p(&[3, 1, 2]));
        assert!(p(&[2, 3, 1]).power(3).is_identity());
        assert_eq!(p(&[2, 1, 3]).power(5), p(&[2, 1, 3]));
        assert!(p(&[2, 1, 3]).power(0).is_identity());
        // squaring branch
        let c = Permutation::cycle(5, &[0, 1, 2, 3, 4]);
        assert_eq!(c.power(17), c.power(2));
    }

    #[test]
    fn cycle_data_examples() {
        let d = p(&[2, 3, 1, 4]).cycle_data();
        assert_eq!(d.structure, vec![3]);
        assert_eq!((d.degree, d.order, d.parity), (3, 3, Parity::Even));

        let d = Permutation::identity(5).cycle_data();
        assert!(d.structure.is_empty());
        assert_eq!((d.degree, d.order, d.parity), (0, 1, Parity::Even));

        let d = p(&[2, 1, 4, 3]).cycle_data();
        assert_eq!(d.structure, vec![2, 2]);
        assert_eq!((d.degree, d.order, d.parity), (4, 2, Parity::Even));
    }

    #[test]
    fn conjugate_relabels() {
        let s = Permutation::transposition(3, 0, 1);
        assert_eq!(s.conjugate(&p(&[3, 2, 1])).unwrap(), p(&[1, 3, 2]));
        let s = p(&[3, 1, 2]);
        assert_eq!(s.conjugate(&Permutation::identity(3)).unwrap(), s);
    }

    #[test]
    fn conjugate_preserves_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let s = Permutation::sample(8, ParityConstraint::Any, &mut rng);
            let t = Permutation::sample(8, ParityConstraint::Any, &mut rng);
            let c = s.conjugate(&t).unwrap();
            assert_eq!(c, t.inverse().then(&s).then(&t));
            let mut a = s.cycle_data().structure;
            let mut b = c.cycle_data().structure;
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn sample_is_uniform_on_s5() {
        // Pearson chi-square over 120 cells, 12000 draws (df = 119).
        // The 0.999 quantile of chi2(119) is about 173.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut counts = std::collections::HashMap::new();
        let draws = 12_000;
        for _ in 0..draws {
            *counts
                .entry(Permutation::sample(5, ParityConstraint::Any, &mut rng))
                .or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 120);
        let expected = draws as f64 / 120.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 173.0, "chi2 = {chi2}");
    }

    #[test]
    fn sample_respects_parity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            assert_eq!(
                Permutation::sample(4, ParityConstraint::Even, &mut rng).parity(),
                Parity::Even
            );
            assert_eq!(
                Permutation::sample(2, ParityConstraint::Odd, &mut rng),
                p(&[2, 1])
            );
        }
    }

    #[test]
    fn transposition_decomposition_examples() {
        assert_eq!(p(&[2, 3, 1]).decompose_transpositions(), vec![[0, 1], [0, 2]]);
        assert!(Permutation::identity(4).decompose_transpositions().is_empty());
        assert_eq!(
            p(&[2, 1, 4, 3]).decompose_transpositions(),
            vec![[0, 1], [2, 3]]
        );
    }

    #[test]
    fn three_cycle_decomposition_examples() {
        let c = p(&[2, 3, 1]);
        assert_eq!(c.decompose_three_cycles().unwrap(), vec![[0, 1, 2]]);
        assert!(Permutation::identity(5)
            .decompose_three_cycles()
            .unwrap()
            .is_empty());
        assert!(matches!(
            p(&[2, 1, 3]).decompose_three_cycles(),
            Err(Error::OddPermutation)
        ));
    }

    #[test]
    fn double_transposition_matches_brute_force() {
        // Oracle: every ordered pair of 3-cycles of S_4 whose product is (1 2)(3 4).
        let target = p(&[2, 1, 4, 3]);
        let mut three_cycles = Vec::new();
        for a in 0..4u32 {
            for b in 0..4u32 {
                for c in 0..4u32 {
                    if a != b && b != c && a != c && a < b.min(c) {
                        three_cycles.push(Permutation::cycle(4, &[a, b, c]));
                    }
                }
            }
        }
        assert_eq!(three_cycles.len(), 8);
        let mut oracle = Vec::new();
        for x in &three_cycles {
            for y in &three_cycles {
                if &x.then(y) == &target {
                    oracle.push((x.clone(), y.clone()));
                }
            }
        }
        assert!(!oracle.is_empty());
        let got = target.decompose_three_cycles().unwrap();
        assert_eq!(got.len(), 2);
        let pair = (
            Permutation::three_cycle(4, got[0]),
            Permutation::three_cycle(4, got[1]),
        );
        assert!(oracle.contains(&pair));
    }

    #[test]
    fn parity_matches_inversion_count() {
        fn heap(k: usize, a: &mut Vec<u32>, f: &mut impl FnMut(&[u32])) {
            if k == 1 {
                f(a);
                return;
            }
            for i in 0..k {
                heap(k - 1, a, f);
                if k % 2 == 0 {
                    a.swap(i, k - 1);
                } else {
                    a.swap(0, k - 1);
                }
            }
        }
        for n in 1..=6 {
            let mut a: Vec<u32> = (0..n).collect();
            let mut count = 0;
            heap(n as usize, &mut a, &mut |imgs| {
                count += 1;
                let inversions = (0..imgs.len())
                    .flat_map(|i| (i + 1..imgs.len()).map(move |j| (i, j)))
                    .filter(|&(i, j)| imgs[i] > imgs[j])
                    .count();
                let q = Permutation::from_images(imgs.to_vec()).unwrap();
                let want = if inversions % 2 == 0 {
                    Parity::Even
                } else {
                    Parity::Odd
                };
                assert_eq!(q.parity(), want);
            });
            assert_eq!(count, (1..=n as usize).product::<usize>());
        }
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(Permutation::from_one_based(&[1, 1, 2]).is_err());
        assert!(Permutation::from_one_based(&[1, 4, 2]).is_err());
        assert!(Permutation::from_one_based(&[0, 1]).is_err());
    }

    #[test]
    fn display_and_serde() {
        assert_eq!(p(&[2, 3, 1, 4]).to_string(), "(1 2 3)");
        assert_eq!(Permutation::identity(2).to_string(), "()");
        let json = serde_json::to_string(&p(&[2, 3, 1])).unwrap();
        assert_eq!(json, "[2,3,1]");
        let back: Permutation = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p(&[2, 3, 1]));
        assert!(serde_json::from_str::<Permutation>("[1,1]").is_err());
    }

    fn arb_perm(n: usize) -> impl Strategy<Value = Permutation> {
        Just((0..n as u32).collect::<Vec<_>>())
            .prop_shuffle()
            .prop_map(|v| Permutation::from_images(v).unwrap())
    }

    proptest! {
        #[test]
        fn compose_associative(s in arb_perm(9), t in arb_perm(9), u in arb_perm(9)) {
            prop_assert_eq!(s.then(&t).then(&u), s.then(&t.then(&u)));
        }

        #[test]
        fn inverse_cancels(s in arb_perm(12)) {
            prop_assert!(s.then(&s.inverse()).is_identity());
        }

        #[test]
        fn order_is_exact(s in arb_perm(10)) {
            let order = s.cycle_data().order as u64;
            prop_assert!(s.power(order).is_identity());
            for m in 1..order {
                prop_assert!(!s.power(m).is_identity());
            }
        }

        #[test]
        fn power_branches_agree(s in arb_perm(7), m in 0u64..60) {
            let mut acc = Permutation::identity(7);
            for _ in 0..m {
                acc = acc.then(&s);
            }
            prop_assert_eq!(s.power(m), acc);
        }

        #[test]
        fn transpositions_multiply_back(s in arb_perm(11)) {
            let ts = s.decompose_transpositions();
            prop_assert!(ts.len() <= 10);
            let prod = product_of(11, ts.iter().map(|t| Permutation::transposition(11, t[0], t[1])));
            prop_assert_eq!(prod, s);
        }

        #[test]
        fn three_cycles_multiply_back(s in arb_perm(11)) {
            let s = if s.parity() == Parity::Odd { s.then(&Permutation::transposition(11, 0, 1)) } else { s };
            let cs = s.decompose_three_cycles().unwrap();
            prop_assert!(cs.len() <= 11 / 2 + 1);
            for c in &cs {
                prop_assert_eq!(Permutation::three_cycle(11, *c).degree(), 3);
            }
            let prod = product_of(11, cs.iter().map(|c| Permutation::three_cycle(11, *c)));
            prop_assert_eq!(prod, s);
        }
    }
}
