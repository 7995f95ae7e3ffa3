//! Key recovery from public data.
//!
//! Phase 1 finds `x·d` and `x⁻¹·φ(b)` for an unknown scalar `x` by solving
//! linear equations coming from pure braids in Alice's group and from elements
//! of `C`. Phase 2 builds a braid in Alice's group with the same permutation as
//! her public key and cancels `x`.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::braid::BraidWord;
use crate::cbkap::{random_product, Instance, Transcript};
use crate::cburau::{phi_of, phi_twisted, EvalPoints, StarState};
use crate::express::{express, Expression, GenSet, SearchConfig, SearchStats};
use crate::ffla::{default_exponent_bound, sample_c_element, EchelonForm, FpMatrix};
use crate::{Error, Result};

/// Everything the attacker sees: Alice's public words, both transmissions, the
/// evaluation points and `κ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackInput {
    pub n: usize,
    pub p: u64,
    pub ev: EvalPoints,
    pub kappa: FpMatrix,
    pub w_words: Vec<BraidWord>,
    pub alice_pub: StarState,
    pub bob_pub: StarState,
}

impl AttackInput {
    pub fn from_public(inst: &Instance, transcript: &Transcript) -> Self {
        AttackInput {
            n: inst.n,
            p: inst.p,
            ev: inst.ev.clone(),
            kappa: inst.kappa.matrix.clone(),
            w_words: inst.w_words.clone(),
            alice_pub: transcript.alice_pub.clone(),
            bob_pub: transcript.bob_pub.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Public-word factors per candidate in [`find_alpha`].
    pub alpha_len: usize,
    pub alpha_max_tries: usize,
    pub max_alphas: usize,
    pub max_gammas: usize,
    /// Terms per sampled element of `C`.
    pub gamma_terms: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            alpha_len: 8,
            alpha_max_tries: 1000,
            max_alphas: 5,
            max_gammas: 5,
            gamma_terms: 3,
        }
    }
}

/// A pure braid `α` in Alice's group, with the number of candidates drawn.
#[derive(Clone, Debug)]
pub struct Alpha {
    pub word: BraidWord,
    pub tries: usize,
}

/// Draws random products of public words until one has permutation order
/// `o ≤ n`, then returns its `o`-th power if that has a nontrivial image.
pub fn find_alpha<R: Rng + ?Sized>(input: &AttackInput, len: usize, max_tries: usize, rng: &mut R) -> Result<Alpha> {
    let identity = FpMatrix::identity(input.p, input.n);
    for tries in 1..=max_tries {
        let w = random_product(&input.w_words, len, rng)?;
        let order = w.permutation_of().cycle_data().order;
        if order > input.n as u128 {
            continue;
        }
        let alpha = w.power(order as usize).free_reduce();
        debug_assert!(alpha.permutation_of().is_identity());
        if phi_of(&alpha, &input.ev)? != identity {
            return Ok(Alpha { word: alpha, tries });
        }
    }
    Err(Error::RetryLimit(format!("no pure braid found in {max_tries} tries")))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase1Result {
    pub xd: FpMatrix,
    pub x_inv_phi_b: FpMatrix,
    /// Kernel dimension after each batch of equations.
    pub kernel_history: Vec<usize>,
    pub alphas: usize,
    pub gammas: usize,
    pub alpha_tries: usize,
}

/// Rows of `D·left − right·D = 0` in the unknowns `D[a][b]` at index `a·n + b`.
fn push_sylvester_rows(ech: &mut EchelonForm, left: &FpMatrix, right: &FpMatrix) {
    let n = left.n();
    let p = left.p();
    for i in 0..n {
        for j in 0..n {
            if ech.kernel_dimension() <= 1 {
                return;
            }
            let mut row = vec![0u64; n * n];
            for k in 0..n {
                let a = &mut row[i * n + k];
                *a = (*a + left.get(k, j)) % p;
                let b = &mut row[k * n + j];
                *b = (*b + p - right.get(i, k)) % p;
            }
            ech.push_row(row);
        }
    }
}

/// Solves for `x·d` and `x⁻¹·φ(b)`.
pub fn phase1<R: Rng + ?Sized>(input: &AttackInput, config: &AttackConfig, rng: &mut R) -> Result<Phase1Result> {
    let n = input.n;
    let p = input.p;
    let q = &input.bob_pub.m;
    let h = &input.bob_pub.sigma;
    let q_inv = q.mat_inv()?;
    let bound = default_exponent_bound(p, n);
    let mut ech = EchelonForm::new(p, n * n);
    let mut history = Vec::new();
    let (mut alphas, mut gammas, mut alpha_tries) = (0, 0, 0);

    let add_alpha = |ech: &mut EchelonForm, rng: &mut R| -> Result<usize> {
        let alpha = find_alpha(input, config.alpha_len, config.alpha_max_tries, rng)?;
        let nu1 = phi_of(&alpha.word, &input.ev)?;
        let nu2 = phi_twisted(&alpha.word, h, &input.ev)?;
        let nu3 = q.mat_mul(&nu2)?.mat_mul(&q_inv)?;
        push_sylvester_rows(ech, &nu1, &nu3);
        Ok(alpha.tries)
    };
    let add_gamma = |ech: &mut EchelonForm, rng: &mut R| -> Result<()> {
        let gamma = sample_c_element(&input.kappa, config.gamma_terms, bound, rng)?;
        push_sylvester_rows(ech, &gamma.realized, &gamma.realized);
        Ok(())
    };

    alpha_tries += add_alpha(&mut ech, rng)?;
    alphas += 1;
    history.push(ech.kernel_dimension());
    add_gamma(&mut ech, rng)?;
    gammas += 1;
    history.push(ech.kernel_dimension());
    let mut next_is_gamma = true;
    while ech.kernel_dimension() > 1 {
        let can_gamma = gammas < config.max_gammas;
        let can_alpha = alphas < config.max_alphas;
        match (next_is_gamma, can_gamma, can_alpha) {
            (_, false, false) => break,
            (true, true, _) | (false, true, false) => {
                add_gamma(&mut ech, rng)?;
                gammas += 1;
            }
            _ => {
                alpha_tries += add_alpha(&mut ech, rng)?;
                alphas += 1;
            }
        }
        next_is_gamma = !next_is_gamma;
        history.push(ech.kernel_dimension());
    }
    let dimension = ech.kernel_dimension();
    assert!(dimension >= 1, "the secret d always solves the system");
    if dimension != 1 {
        return Err(Error::KernelNotOneDimensional {
            dimension,
            alphas,
            gammas,
        });
    }
    let v = ech.kernel_basis().remove(0);
    let xd = FpMatrix::from_entries(p, n, v)?;
    let x_inv_phi_b = xd.mat_inv()?.mat_mul(q)?;
    Ok(Phase1Result {
        xd,
        x_inv_phi_b,
        kernel_history: history,
        alphas,
        gammas,
        alpha_tries,
    })
}

/// The braid `α′` spelled by an expression over Alice's public words.
pub fn realize_expression(input: &AttackInput, expr: &Expression) -> Result<BraidWord> {
    let mut letters = Vec::new();
    for &e in expr.letters() {
        let j = e.unsigned_abs() as usize;
        let w = input
            .w_words
            .get(j.wrapping_sub(1))
            .ok_or(Error::IndexOutOfRange { index: j, n: input.w_words.len() })?;
        if e > 0 {
            letters.extend_from_slice(w.letters());
        } else {
            letters.extend(w.letters().iter().rev().map(|&l| -l));
        }
    }
    Ok(BraidWord::new(input.n, letters)?.free_reduce())
}

/// The permutation images of Alice's public words.
pub fn public_gens(input: &AttackInput) -> Result<GenSet> {
    GenSet::new(input.n, input.w_words.iter().map(BraidWord::permutation_of).collect())
}

/// `xd · p · φ(α′)⁻¹ · x⁻¹φ(b) · φ(^h α′)`, where `α′` projects to Alice's `g`.
pub fn phase2(input: &AttackInput, ph1: &Phase1Result, expr: &Expression) -> Result<FpMatrix> {
    let alpha = realize_expression(input, expr)?;
    if alpha.permutation_of() != input.alice_pub.sigma {
        return Err(Error::ProjectionMismatch);
    }
    let phi = phi_of(&alpha, &input.ev)?;
    let phi_h = phi_twisted(&alpha, &input.bob_pub.sigma, &input.ev)?;
    ph1.xd
        .mat_mul(&input.alice_pub.m)?
        .mat_mul(&phi.mat_inv()?)?
        .mat_mul(&ph1.x_inv_phi_b)?
        .mat_mul(&phi_h)
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackReport {
    pub key: FpMatrix,
    pub phase1: Phase1Result,
    pub expression_length: usize,
    pub braid_length: usize,
    pub search: SearchStats,
    pub phase1_ms: f64,
    pub express_ms: f64,
    pub phase2_ms: f64,
}

/// Runs both phases end to end.
pub fn recover_key<R: Rng + ?Sized>(
    input: &AttackInput,
    config: &AttackConfig,
    search: &SearchConfig,
    rng: &mut R,
) -> Result<AttackReport> {
    let t0 = Instant::now();
    let ph1 = phase1(input, config, rng)?;
    let t1 = Instant::now();
    let gens = public_gens(input)?;
    let (expr, stats) = express(&gens, &input.alice_pub.sigma, search)?;
    let t2 = Instant::now();
    let braid_length = realize_expression(input, &expr)?.len();
    let key = phase2(input, &ph1, &expr)?;
    let t3 = Instant::now();
    let ms = |a: Instant, b: Instant| (b - a).as_secs_f64() * 1e3;
    Ok(AttackReport {
        key,
        phase1: ph1,
        expression_length: expr.len(),
        braid_length,
        search: stats,
        phase1_ms: ms(t0, t1),
        express_ms: ms(t1, t2),
        phase2_ms: ms(t2, t3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cbkap::{run_protocol, ttp_keygen_seeded, Params};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture(n: usize, p: u64, seed: u64) -> (Instance, Transcript, AttackInput) {
        let inst = ttp_keygen_seeded(&Params::with_size(n, p), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let tr = run_protocol(&inst, 8, 3, &mut rng).unwrap();
        let input = AttackInput::from_public(&inst, &tr);
        (inst, tr, input)
    }

    /// The scalar `x` with `a = x·b`, if any.
    fn scalar_multiple(a: &FpMatrix, b: &FpMatrix) -> Option<u64> {
        let p = a.p();
        let idx = b.entries().iter().position(|&v| v != 0)?;
        let x = a.entries()[idx] * crate::ffla::inv_mod(b.entries()[idx], p).ok()? % p;
        (b.scale(x) == *a).then_some(x)
    }

    #[test]
    fn alpha_is_pure_and_nontrivial() {
        let (_, _, input) = fixture(8, 251, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let a = find_alpha(&input, 8, 1000, &mut rng).unwrap();
            assert!(a.word.permutation_of().is_identity());
            assert!(!phi_of(&a.word, &input.ev).unwrap().is_identity());
        }
    }

    #[test]
    fn phase1_recovers_d_up_to_scalar() {
        for seed in 0..5 {
            let (_, tr, input) = fixture(8, 251, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ph1 = phase1(&input, &AttackConfig::default(), &mut rng).unwrap();
            let s = tr.secrets.as_ref().unwrap();
            let x = scalar_multiple(&ph1.xd, &s.bob.c.realized).expect("xd = x·d");
            let phi_b = phi_of(&s.bob.word, &input.ev).unwrap();
            let x_inv = crate::ffla::inv_mod(x, 251).unwrap();
            assert_eq!(ph1.x_inv_phi_b, phi_b.scale(x_inv));
            assert_eq!(*ph1.kernel_history.last().unwrap(), 1);
        }
    }

    #[test]
    fn full_attack_matches_shared_key() {
        for seed in 0..5 {
            let (_, tr, input) = fixture(8, 251, 100 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let report = recover_key(&input, &AttackConfig::default(), &SearchConfig::default(), &mut rng).unwrap();
            assert_eq!(report.key, tr.secrets.as_ref().unwrap().shared);
        }
    }

    #[test]
    fn identity_permutation_uses_empty_expression() {
        let (_, tr, mut input) = fixture(8, 13, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ph1 = phase1(&input, &AttackConfig::default(), &mut rng).unwrap();
        input.alice_pub.sigma = crate::perm::Permutation::identity(8);
        let key = phase2(&input, &ph1, &Expression::empty()).unwrap();
        let expect = ph1.xd.mat_mul(&input.alice_pub.m).unwrap().mat_mul(&ph1.x_inv_phi_b).unwrap();
        assert_eq!(key, expect);
        let _ = tr;
    }

    #[test]
    fn scalar_independence() {
        let (_, tr, input) = fixture(8, 251, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ph1 = phase1(&input, &AttackConfig::default(), &mut rng).unwrap();
        let (expr, _) = express(&public_gens(&input).unwrap(), &input.alice_pub.sigma, &SearchConfig::default()).unwrap();
        let base = phase2(&input, &ph1, &expr).unwrap();
        let scaled = Phase1Result {
            xd: ph1.xd.scale(17),
            x_inv_phi_b: ph1.x_inv_phi_b.scale(crate::ffla::inv_mod(17, 251).unwrap()),
            ..ph1.clone()
        };
        assert_eq!(phase2(&input, &scaled, &expr).unwrap(), base);
        assert_eq!(base, tr.secrets.unwrap().shared);
    }

    #[test]
    fn wrong_projection_is_rejected() {
        let (_, _, input) = fixture(8, 13, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ph1 = phase1(&input, &AttackConfig::default(), &mut rng).unwrap();
        if !input.alice_pub.sigma.is_identity() {
            assert!(matches!(
                phase2(&input, &ph1, &Expression::empty()),
                Err(Error::ProjectionMismatch)
            ));
        }
    }

    #[test]
    fn star_commutativity_used_in_phase2() {
        let (_, tr, input) = fixture(8, 251, 5);
        let s = tr.secrets.unwrap();
        let g = &input.alice_pub.sigma;
        let h = &input.bob_pub.sigma;
        let a = &s.alice.word;
        let b = &s.bob.word;
        let lhs = phi_of(b, &input.ev).unwrap().mat_mul(&phi_twisted(a, h, &input.ev).unwrap()).unwrap();
        let rhs = phi_of(a, &input.ev).unwrap().mat_mul(&phi_twisted(b, g, &input.ev).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
    }
}
