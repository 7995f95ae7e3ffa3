//! Closed-form estimators for the membership search.

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The group generated by a generator set, up to conjugation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "S")]
    Symmetric,
    #[serde(rename = "A")]
    Alternating,
}

impl Group {
    /// Length of the cycles harvested by the search: 2 in `S_n`, 3 in `A_n`.
    pub fn c(self) -> usize {
        match self {
            Group::Symmetric => 2,
            Group::Alternating => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Group::Symmetric => "S",
            Group::Alternating => "A",
        }
    }
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Group {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S" | "s" | "sym" | "symmetric" => Ok(Group::Symmetric),
            "A" | "a" | "alt" | "alternating" => Ok(Group::Alternating),
            _ => Err(Error::InvalidEstimatorInput(format!("unknown group {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EstimateKind {
    ExactCount,
    LowerBoundProb,
    UpperBoundMean,
    UpperBoundProb,
    Prediction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub kind: EstimateKind,
    pub value: f64,
    /// Exact value as `[numerator, denominator]` when rational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<[u64; 2]>,
}

impl Estimate {
    fn float(kind: EstimateKind, value: f64) -> Self {
        Estimate { kind, value, exact: None }
    }

    fn rational(kind: EstimateKind, r: Ratio<u64>) -> Self {
        Estimate {
            kind,
            value: *r.numer() as f64 / *r.denom() as f64,
            exact: Some([*r.numer(), *r.denom()]),
        }
    }
}

/// Number of permutations of `{1..n}` whose non-trivial cycles have exactly
/// the given lengths.
///
/// `n! / ((n - Σ n_i)! · Π n_i · Π m_j!)` where `m_j` counts repeated lengths.
pub fn cycle_structure_count(n: usize, structure: &[usize]) -> Result<BigUint> {
    if structure.iter().any(|&l| l < 2) {
        return Err(Error::InvalidEstimatorInput("cycle lengths must be at least 2".into()));
    }
    let moved: usize = structure.iter().sum();
    if moved > n {
        return Err(Error::InvalidEstimatorInput(format!(
            "structure moves {moved} points but n = {n}"
        )));
    }
    let mut count = BigUint::one();
    for x in (n - moved + 1)..=n {
        count *= x;
    }
    for &l in structure {
        count /= l;
    }
    let mut sorted = structure.to_vec();
    sorted.sort_unstable();
    for run in sorted.chunk_by(|a, b| a == b) {
        for m in 2..=run.len() {
            count /= m;
        }
    }
    Ok(count)
}

/// The tabulated cycle structures for a residue class, as
/// `(long cycle length, remaining lengths)`.
fn table_structures(n: usize, group: Group) -> (Ratio<u64>, Vec<Vec<usize>>) {
    let r = |a: u64, b: u64| Ratio::new(a, b * n as u64);
    let s = |k: usize| n.wrapping_sub(k);
    match group {
        Group::Symmetric if n % 2 == 0 => (r(7, 12), vec![vec![s(3), 2], vec![s(5), 2]]),
        Group::Symmetric => (r(3, 4), vec![vec![s(2), 2], vec![s(4), 2]]),
        Group::Alternating => match n % 6 {
            0 => (r(1, 3), vec![vec![s(5), 3]]),
            1 => (r(4, 9), vec![vec![s(5), 2, 3], vec![s(6), 3]]),
            2 => (r(1, 1), vec![vec![s(3), 3], vec![s(6), 2, 3]]),
            3 => (r(7, 6), vec![vec![s(4), 3], vec![s(5), 2, 3], vec![s(7), 2, 3]]),
            4 => (r(4, 3), vec![vec![s(3), 3], vec![s(5), 3], vec![s(6), 2, 3]]),
            _ => (r(17, 18), vec![vec![s(4), 3], vec![s(6), 3], vec![s(7), 2, 3]]),
        },
    }
}

/// Exact lower bound on `Pr[τ^d is a c-cycle for some d ≤ n]` for uniform `τ`.
///
/// Uses the residue table when all of its structures are well formed at this
/// `n` (lengths at least 2 and pairwise distinct), and `1/(cn)` otherwise.
pub fn c_cycle_power_prob_bound_exact(n: usize, group: Group) -> Result<Ratio<u64>> {
    if n < 7 {
        return Err(Error::InvalidEstimatorInput(format!("needs n >= 7, got {n}")));
    }
    let (value, structures) = table_structures(n, group);
    let admissible = structures.iter().all(|st| {
        let mut sorted = st.clone();
        sorted.sort_unstable();
        sorted[0] >= 2 && sorted.windows(2).all(|w| w[0] != w[1])
    });
    if admissible {
        Ok(value)
    } else {
        Ok(Ratio::new(1, (group.c() * n) as u64))
    }
}

pub fn c_cycle_power_prob_bound(n: usize, group: Group) -> Result<Estimate> {
    Ok(Estimate::rational(
        EstimateKind::LowerBoundProb,
        c_cycle_power_prob_bound_exact(n, group)?,
    ))
}

/// Mean Step-1 sample count in the idealized model is below `cn`.
pub fn expected_step1(n: usize, group: Group) -> Estimate {
    Estimate::rational(EstimateKind::UpperBoundMean, Ratio::from_integer((group.c() * n) as u64))
}

/// Mean Step-2 sample count in the idealized model is below `(n^c/c)(ln n + 2)`.
pub fn expected_step2(n: usize, _k: usize, group: Group) -> Estimate {
    let c = group.c() as i32;
    let nf = n as f64;
    Estimate::float(EstimateKind::UpperBoundMean, nf.powi(c) / c as f64 * (nf.ln() + 2.0))
}

/// Predicted mean expression length `(n²/(c-1)) · (log(cn)/log(2k-1) + 2)`.
pub fn predicted_length(n: usize, k: usize, group: Group) -> Result<Estimate> {
    if k < 2 {
        return Err(Error::InvalidEstimatorInput(
            "length prediction needs at least two generators".into(),
        ));
    }
    let c = group.c() as f64;
    let nf = n as f64;
    let v = nf * nf / (c - 1.0) * ((c * nf).ln() / (2.0 * k as f64 - 1.0).ln() + 2.0);
    Ok(Estimate::float(EstimateKind::Prediction, v))
}

/// `e^{-λ/c}`: bound on the probability that idealized Step 1 needs more than
/// `λn` samples.
pub fn step1_tail_bound(_n: usize, lambda: f64, group: Group) -> Result<Estimate> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidEstimatorInput("lambda must be positive".into()));
    }
    Ok(Estimate::float(
        EstimateKind::UpperBoundProb,
        (-lambda / group.c() as f64).exp(),
    ))
}

/// Every estimator for one `(n, k, group)`, as emitted by the CLI.
#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub n: usize,
    pub k: usize,
    pub group: Group,
    pub c: usize,
    pub c_cycle_power_prob_bound: Option<Estimate>,
    pub expected_step1: Estimate,
    pub expected_step2: Estimate,
    pub predicted_length: Option<Estimate>,
    pub step1_tail_bound_lambda_2c: Estimate,
}

pub fn report(n: usize, k: usize, group: Group) -> Result<EstimateReport> {
    if n < 2 {
        return Err(Error::InvalidEstimatorInput("n must be at least 2".into()));
    }
    Ok(EstimateReport {
        n,
        k,
        group,
        c: group.c(),
        c_cycle_power_prob_bound: c_cycle_power_prob_bound(n, group).ok(),
        expected_step1: expected_step1(n, group),
        expected_step2: expected_step2(n, k, group),
        predicted_length: predicted_length(n, k, group).ok(),
        step1_tail_bound_lambda_2c: step1_tail_bound(n, 2.0 * group.c() as f64, group)?,
    })
}

/// `ratio` as `f64`, for tests and reports.
pub fn ratio_to_f64(r: &Ratio<BigUint>) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}
