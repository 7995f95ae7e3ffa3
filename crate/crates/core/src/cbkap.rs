//! Colored Burau key agreement: trusted-party setup, transmissions and the
//! shared key.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::braid::{full_twist, BraidWord};
use crate::cburau::{star_fold, EvalPoints, StarState};
use crate::ffla::{default_exponent_bound, make_kappa, sample_c_element, CElement, FpMatrix, Kappa, KappaMode};
use crate::perm::Permutation;
use crate::{Error, Result};

/// How `κ` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KappaChoice {
    Primitive,
    Irreducible,
    /// Primitive when `p^n - 1` can be factored, irreducible otherwise.
    #[default]
    Auto,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub n: usize,
    pub p: u64,
    /// Public words per side.
    pub k: usize,
    /// Letters in each conjugated core `u`.
    pub t: usize,
    pub z_len: usize,
    /// Explicit index sets; both `None` selects the two half intervals.
    #[serde(default)]
    pub i1: Option<Vec<usize>>,
    #[serde(default)]
    pub i2: Option<Vec<usize>>,
    /// Public-word factors per private braid.
    pub ell: usize,
    /// Terms per element of `C`.
    pub r: usize,
    #[serde(default)]
    pub kappa: KappaChoice,
}

impl Default for Params {
    fn default() -> Self {
        Params::with_size(16, 251)
    }
}

impl Params {
    /// Defaults for a given size: `k = 4`, `t = 10`, `zLen = 2n`, `ℓ = 8`, `r = 3`.
    pub fn with_size(n: usize, p: u64) -> Self {
        Params {
            n,
            p,
            k: 4,
            t: 10,
            z_len: 2 * n,
            i1: None,
            i2: None,
            ell: 8,
            r: 3,
            kappa: KappaChoice::Auto,
        }
    }

    fn index_sets(&self) -> Result<(Vec<usize>, Vec<usize>)> {
        let (i1, i2) = match (&self.i1, &self.i2) {
            (None, None) => {
                let h = self.n / 2;
                ((1..h).collect(), (h + 1..self.n).collect())
            }
            (Some(a), Some(b)) => (a.clone(), b.clone()),
            _ => {
                return Err(Error::InfeasibleParameters(
                    "give both index sets or neither".into(),
                ))
            }
        };
        check_index_sets(self.n, &i1, &i2)?;
        Ok((i1, i2))
    }

    fn check(&self) -> Result<()> {
        if self.n < 8 || self.n % 2 == 1 {
            return Err(Error::InfeasibleParameters(format!("n must be even and at least 8, got {}", self.n)));
        }
        if self.k < 2 {
            return Err(Error::InfeasibleParameters("k must be at least 2".into()));
        }
        if self.t < 1 || self.ell < 1 || self.r < 1 {
            return Err(Error::InfeasibleParameters("t, ell and r must be positive".into()));
        }
        Ok(())
    }
}

fn check_index_sets(n: usize, i1: &[usize], i2: &[usize]) -> Result<()> {
    let bad = |msg: String| Err(Error::InfeasibleParameters(msg));
    if i1.is_empty() || i2.is_empty() {
        return bad("index sets must be nonempty".into());
    }
    if i1.len() > n / 2 || i2.len() > n / 2 {
        return bad("index sets may hold at most n/2 indices".into());
    }
    if let Some(&i) = i1.iter().chain(i2).find(|&&i| i == 0 || i >= n) {
        return bad(format!("index {i} outside [1, {}]", n - 1));
    }
    for &i in i1 {
        for &j in i2 {
            if i.abs_diff(j) < 2 {
                return bad(format!("indices {i} and {j} are closer than 2"));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub seed: Option<u64>,
    pub params: Params,
    pub kappa_mode: KappaMode,
    pub notes: Vec<String>,
}

const REDUCTION_NOTE: &str =
    "public words are freely reduced only; no Garside normal form is applied";

/// Public data of one key-agreement instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub n: usize,
    pub p: u64,
    pub ev: EvalPoints,
    pub kappa: Kappa,
    pub i1: Vec<usize>,
    pub i2: Vec<usize>,
    pub z: BraidWord,
    pub w_words: Vec<BraidWord>,
    pub v_words: Vec<BraidWord>,
    pub metadata: Metadata,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Alice,
    Bob,
}

/// One party's secret: its braid and its element of `C`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivateKey {
    pub word: BraidWord,
    pub c: CElement,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Secrets {
    pub alice: PrivateKey,
    pub bob: PrivateKey,
    pub shared: FpMatrix,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transcript {
    pub alice_pub: StarState,
    pub bob_pub: StarState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secrets: Option<Secrets>,
}

impl Transcript {
    pub fn without_secrets(&self) -> Transcript {
        Transcript {
            secrets: None,
            ..self.clone()
        }
    }
}

fn conjugated_word<R: Rng + ?Sized>(
    n: usize,
    z: &BraidWord,
    indices: &[usize],
    t: usize,
    twist: &BraidWord,
    rng: &mut R,
) -> Result<BraidWord> {
    let mut core = BraidWord::random(n, indices, t, rng)?;
    if rng.gen_bool(0.5) {
        core = twist.concat(&core)?;
    }
    Ok(z.concat(&core)?.concat(&z.inverse_word())?.free_reduce())
}

fn choose_kappa<R: Rng + ?Sized>(p: u64, n: usize, choice: KappaChoice, rng: &mut R) -> Result<Kappa> {
    match choice {
        KappaChoice::Primitive => make_kappa(p, n, KappaMode::Primitive, rng),
        KappaChoice::Irreducible => make_kappa(p, n, KappaMode::Irreducible, rng),
        KappaChoice::Auto => match make_kappa(p, n, KappaMode::Primitive, rng) {
            Err(Error::FactorizationUnavailable { .. }) => make_kappa(p, n, KappaMode::Irreducible, rng),
            other => other,
        },
    }
}

/// Trusted-party instance generation.
pub fn ttp_keygen<R: Rng + ?Sized>(params: &Params, rng: &mut R) -> Result<Instance> {
    params.check()?;
    let (i1, i2) = params.index_sets()?;
    let n = params.n;
    let ev = EvalPoints::random(params.p, n, rng)?;
    let kappa = choose_kappa(params.p, n, params.kappa, rng)?;
    let z = BraidWord::random_reduced(n, params.z_len, rng)?;
    let twist = full_twist(n)?;
    let w_words = (0..params.k)
        .map(|_| conjugated_word(n, &z, &i1, params.t, &twist, rng))
        .collect::<Result<Vec<_>>>()?;
    let v_words = (0..params.k)
        .map(|_| conjugated_word(n, &z, &i2, params.t, &twist, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(Instance {
        n,
        p: params.p,
        metadata: Metadata {
            seed: None,
            params: params.clone(),
            kappa_mode: kappa.mode,
            notes: vec![REDUCTION_NOTE.to_string()],
        },
        ev,
        kappa,
        i1,
        i2,
        z,
        w_words,
        v_words,
    })
}

/// Deterministic instance from a seed, recorded in the metadata.
pub fn ttp_keygen_seeded(params: &Params, seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inst = ttp_keygen(params, &mut rng)?;
    inst.metadata.seed = Some(seed);
    Ok(inst)
}

impl Instance {
    pub fn words(&self, side: Side) -> &[BraidWord] {
        match side {
            Side::Alice => &self.w_words,
            Side::Bob => &self.v_words,
        }
    }

    /// Structural checks used after deserialization.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.ev.n() != n || self.kappa.matrix.n() != n {
            return Err(Error::Malformed("evaluation points or kappa have the wrong size".into()));
        }
        if self.ev.p() != self.p || self.kappa.matrix.p() != self.p {
            return Err(Error::ModulusMismatch(self.ev.p(), self.p));
        }
        check_index_sets(n, &self.i1, &self.i2)?;
        let words = std::iter::once(&self.z).chain(&self.w_words).chain(&self.v_words);
        for w in words {
            if w.n() != n {
                return Err(Error::SizeMismatch(w.n(), n));
            }
        }
        if self.w_words.is_empty() || self.v_words.is_empty() {
            return Err(Error::Malformed("public word lists must be nonempty".into()));
        }
        Ok(())
    }
}

/// A random product of `ell` public words or their inverses, freely reduced.
pub fn random_product<R: Rng + ?Sized>(words: &[BraidWord], ell: usize, rng: &mut R) -> Result<BraidWord> {
    let n = words.first().ok_or(Error::TrivialGenerators)?.n();
    let mut letters = Vec::new();
    for _ in 0..ell {
        let w = &words[rng.gen_range(0..words.len())];
        if rng.gen_bool(0.5) {
            letters.extend_from_slice(w.letters());
        } else {
            letters.extend(w.letters().iter().rev().map(|&e| -e));
        }
    }
    Ok(BraidWord::new(n, letters)?.free_reduce())
}

/// One party's transmission `(c, id) ⋆ word = (c·φ(word), π(word))`.
pub fn party_transmit<R: Rng + ?Sized>(
    inst: &Instance,
    side: Side,
    ell: usize,
    r: usize,
    rng: &mut R,
) -> Result<(StarState, PrivateKey)> {
    if ell < 1 {
        return Err(Error::InfeasibleParameters("ell must be at least 1".into()));
    }
    let word = random_product(inst.words(side), ell, rng)?;
    let bound = default_exponent_bound(inst.p, inst.n);
    let c = sample_c_element(&inst.kappa.matrix, r, bound, rng)?;
    let public = transmit_with(inst, &word, &c.realized)?;
    Ok((public, PrivateKey { word, c }))
}

/// `(c, id) ⋆ word` for a given matrix `c`.
pub fn transmit_with(inst: &Instance, word: &BraidWord, c: &FpMatrix) -> Result<StarState> {
    let start = StarState::new(c.clone(), Permutation::identity(inst.n))?;
    star_fold(&start, word, &inst.ev)
}

/// `(c·q, h) ⋆ a`, the matrix part of which is the shared key.
pub fn shared_key(inst: &Instance, mine: &PrivateKey, other: &StarState) -> Result<FpMatrix> {
    let start = StarState::new(mine.c.realized.mat_mul(&other.m)?, other.sigma.clone())?;
    Ok(star_fold(&start, &mine.word, &inst.ev)?.m)
}

/// Runs both parties and checks that their keys agree.
pub fn run_protocol<R: Rng + ?Sized>(inst: &Instance, ell: usize, r: usize, rng: &mut R) -> Result<Transcript> {
    let (alice_pub, alice) = party_transmit(inst, Side::Alice, ell, r, rng)?;
    let (bob_pub, bob) = party_transmit(inst, Side::Bob, ell, r, rng)?;
    let ka = shared_key(inst, &alice, &bob_pub)?;
    let kb = shared_key(inst, &bob, &alice_pub)?;
    if ka != kb {
        return Err(Error::VerificationFailed);
    }
    Ok(Transcript {
        alice_pub,
        bob_pub,
        secrets: Some(Secrets {
            alice,
            bob,
            shared: ka,
        }),
    })
}
