//! Reproducible experiment suites writing CSV rows.
//!
//! Every trial draws its randomness from `trial_seed(master, index)`, so a row
//! depends only on the master seed and the suite parameters. Trials run in parallel.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{expected_step1, expected_step2, predicted_length, Group};
use crate::attack::{recover_key, AttackConfig, AttackInput};
use crate::cbkap::{run_protocol, ttp_keygen, Params};
use crate::express::{classify, express, idealized_baseline, GenSet, SearchConfig, SearchStats};
use crate::perm::{ParityConstraint, Permutation};
use crate::{Error, Result};

/// SplitMix64 finalizer applied to the master seed and trial index.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpressSpec {
    pub n_list: Vec<usize>,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    /// Draws to make: `Symmetric` samples generators uniformly from `S_n`,
    /// `Alternating` from `A_n`. Rows are split by the group detected.
    pub groups: Vec<Group>,
    /// Also run the idealized model on each trial.
    pub density: bool,
    pub time_budget: Option<Duration>,
}

impl ExpressSpec {
    pub fn new(n_list: Vec<usize>, trials: usize, seed: u64) -> Self {
        ExpressSpec {
            n_list,
            k: 2,
            trials,
            seed,
            groups: vec![Group::Symmetric],
            density: false,
            time_budget: None,
        }
    }
}

/// Outcome of one express trial.
#[derive(Clone, Debug, Serialize)]
pub struct ExpressTrial {
    pub n: usize,
    pub group: Group,
    pub index: usize,
    pub seed: u64,
    pub real: SearchStats,
    pub idealized: Option<SearchStats>,
}

/// Draws generators and a target, or `None` when the generators are not
/// transitive (they then generate neither `S_n` nor `A_n`).
fn draw_trial(n: usize, k: usize, group: Group, rng: &mut ChaCha8Rng) -> Result<Option<(GenSet, Group, Permutation)>> {
    let constraint = match group {
        Group::Symmetric => ParityConstraint::Any,
        Group::Alternating => ParityConstraint::Even,
    };
    let gs = GenSet::random(n, k, constraint, rng)?;
    let cls = match classify(&gs) {
        Ok(c) => c,
        Err(Error::TrivialGenerators) => return Ok(None),
        Err(e) => return Err(e),
    };
    if cls.orbits.len() != 1 || cls.orbits[0].len() != n {
        return Ok(None);
    }
    let target = Permutation::sample(
        n,
        if cls.c == 2 { ParityConstraint::Any } else { ParityConstraint::Even },
        rng,
    );
    Ok(Some((gs, cls.group, target)))
}

fn search_config(spec: &ExpressSpec) -> SearchConfig {
    SearchConfig {
        time_budget: spec.time_budget,
        ..SearchConfig::default()
    }
}

/// Runs one express trial; `None` marks a dropped trial.
pub fn run_express_trial(spec: &ExpressSpec, n: usize, group: Group, index: usize) -> Result<Option<ExpressTrial>> {
    let gi = spec.groups.iter().position(|&g| g == group).unwrap_or(0) as u64;
    let seed = trial_seed(spec.seed, ((n as u64) << 40) ^ (gi << 32) ^ index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Some((gs, detected, target)) = draw_trial(n, spec.k, group, &mut rng)? else {
        return Ok(None);
    };
    let config = search_config(spec);
    let real = match express(&gs, &target, &config) {
        Ok((_, stats)) => stats,
        Err(Error::CapExceeded { .. } | Error::TimeBudget(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let idealized = if spec.density {
        let cfg = SearchConfig {
            seed: trial_seed(seed, 1),
            ..config
        };
        match idealized_baseline(&gs, &target, &cfg) {
            Ok(s) => Some(s),
            Err(Error::CapExceeded { .. } | Error::TimeBudget(_)) => return Ok(None),
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(Some(ExpressTrial {
        n,
        group: detected,
        index,
        seed,
        real,
        idealized,
    }))
}

/// Aggregated statistics for one `(n, group)`.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub k: usize,
    pub group: Group,
    pub trials: usize,
    /// Trials at this degree dropped for either group.
    pub dropped: usize,
    pub seed: u64,
    pub step1_min: u64,
    pub step1_mean: f64,
    pub step1_max: u64,
    pub step2_min: u64,
    pub step2_mean: f64,
    pub step2_max: u64,
    pub length_min: usize,
    pub length_mean: f64,
    pub length_max: usize,
    pub predicted_length: f64,
    pub length_ratio_min: f64,
    pub length_ratio_mean: f64,
    pub length_ratio_max: f64,
    pub step1_ratio: f64,
    pub step2_ratio: f64,
    pub ideal_step1_mean: Option<f64>,
    pub ideal_step2_mean: Option<f64>,
    pub inv_alpha_step1: Option<f64>,
    pub inv_alpha_step2: Option<f64>,
    pub elapsed_ms_mean: f64,
}

fn mean<T: Copy + Into<f64>>(xs: impl Iterator<Item = T>) -> f64 {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x.into(), c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Aggregates trials of one `(n, group)`.
pub fn aggregate(spec: &ExpressSpec, n: usize, group: Group, trials: &[ExpressTrial], dropped: usize) -> Result<BenchRow> {
    if trials.is_empty() {
        return Err(Error::InfeasibleParameters(format!("no successful trials for n={n}")));
    }
    let predicted = predicted_length(n, spec.k, group)?.value;
    let s1 = || trials.iter().map(|t| t.real.step1_count);
    let s2 = || trials.iter().map(|t| t.real.step2_count);
    let len = || trials.iter().map(|t| t.real.final_length);
    let ratio = || len().map(|l| l as f64 / predicted);
    let step1_mean = mean(s1().map(|x| x as f64));
    let step2_mean = mean(s2().map(|x| x as f64));
    let ideal: Vec<&SearchStats> = trials.iter().filter_map(|t| t.idealized.as_ref()).collect();
    let (ideal1, ideal2) = if ideal.is_empty() {
        (None, None)
    } else {
        (
            Some(mean(ideal.iter().map(|s| s.step1_count as f64))),
            Some(mean(ideal.iter().map(|s| s.step2_count as f64))),
        )
    };
    Ok(BenchRow {
        n,
        k: spec.k,
        group,
        trials: trials.len(),
        dropped,
        seed: spec.seed,
        step1_min: s1().min().unwrap_or(0),
        step1_mean,
        step1_max: s1().max().unwrap_or(0),
        step2_min: s2().min().unwrap_or(0),
        step2_mean,
        step2_max: s2().max().unwrap_or(0),
        length_min: len().min().unwrap_or(0),
        length_mean: mean(len().map(|x| x as f64)),
        length_max: len().max().unwrap_or(0),
        predicted_length: predicted,
        length_ratio_min: ratio().fold(f64::INFINITY, f64::min),
        length_ratio_mean: mean(ratio()),
        length_ratio_max: ratio().fold(0.0, f64::max),
        step1_ratio: step1_mean / expected_step1(n, group).value,
        step2_ratio: step2_mean / expected_step2(n, spec.k, group).value,
        ideal_step1_mean: ideal1,
        ideal_step2_mean: ideal2,
        inv_alpha_step1: ideal1.map(|i| step1_mean / i),
        inv_alpha_step2: ideal2.map(|i| step2_mean / i),
        elapsed_ms_mean: mean(trials.iter().map(|t| t.real.elapsed_ms)),
    })
}

/// All trials for one degree, in deterministic order, with the number dropped.
pub fn express_trials(spec: &ExpressSpec, n: usize) -> Result<(Vec<ExpressTrial>, usize)> {
    if spec.trials == 0 {
        return Err(Error::InfeasibleParameters("trials must be at least 1".into()));
    }
    let jobs: Vec<(Group, usize)> = spec
        .groups
        .iter()
        .flat_map(|&g| (0..spec.trials).map(move |i| (g, i)))
        .collect();
    let results: Vec<Result<Option<ExpressTrial>>> = jobs
        .into_par_iter()
        .map(|(g, i)| run_express_trial(spec, n, g, i))
        .collect();
    let mut ok = Vec::new();
    let mut dropped = 0;
    for r in results {
        match r? {
            Some(t) => ok.push(t),
            None => dropped += 1,
        }
    }
    Ok((ok, dropped))
}

/// Runs the express benchmark; one row per degree and detected group.
pub fn bench_express(spec: &ExpressSpec) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &n in &spec.n_list {
        let (trials, dropped) = express_trials(spec, n)?;
        for group in [Group::Symmetric, Group::Alternating] {
            let subset: Vec<ExpressTrial> = trials.iter().filter(|t| t.group == group).cloned().collect();
            if !subset.is_empty() {
                rows.push(aggregate(spec, n, group, &subset, dropped)?);
            }
        }
    }
    Ok(rows)
}

/// Real against idealized counts per trial.
pub fn bench_density(spec: &ExpressSpec) -> Result<Vec<BenchRow>> {
    let spec = ExpressSpec {
        density: true,
        ..spec.clone()
    };
    bench_express(&spec)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttackSpec {
    pub n_list: Vec<usize>,
    pub p: u64,
    pub trials: usize,
    pub seed: u64,
    pub k: usize,
    pub t: usize,
    pub ell: usize,
    pub r: usize,
    /// Extra attempts (fresh attack randomness) after a failed run.
    pub retries: usize,
}

impl AttackSpec {
    pub fn new(n_list: Vec<usize>, p: u64, trials: usize, seed: u64) -> Self {
        let d = Params::default();
        AttackSpec {
            n_list,
            p,
            trials,
            seed,
            k: d.k,
            t: d.t,
            ell: d.ell,
            r: d.r,
            retries: 2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackRow {
    pub n: usize,
    pub p: u64,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub attempts: usize,
    /// Kernel dimensions after each batch, joined by `>`.
    pub kernel_history: String,
    pub alphas: usize,
    pub gammas: usize,
    pub alpha_tries: usize,
    pub expression_length: usize,
    pub braid_length: usize,
    pub phase1_ms: f64,
    pub express_ms: f64,
    pub phase2_ms: f64,
    pub total_ms: f64,
    pub error: String,
}

/// One end-to-end attack trial against an honest protocol run.
pub fn run_attack_trial(spec: &AttackSpec, n: usize, index: usize) -> Result<AttackRow> {
    let seed = trial_seed(spec.seed, ((n as u64) << 32) ^ index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = Params {
        k: spec.k,
        t: spec.t,
        ell: spec.ell,
        r: spec.r,
        ..Params::with_size(n, spec.p)
    };
    let mut inst = ttp_keygen(&params, &mut rng)?;
    inst.metadata.seed = Some(seed);
    let transcript = run_protocol(&inst, spec.ell, spec.r, &mut rng)?;
    let shared = transcript.secrets.as_ref().expect("honest run keeps secrets").shared.clone();
    let input = AttackInput::from_public(&inst, &transcript);
    let started = Instant::now();
    let mut row = AttackRow {
        n,
        p: spec.p,
        trial: index,
        seed,
        success: false,
        attempts: 0,
        kernel_history: String::new(),
        alphas: 0,
        gammas: 0,
        alpha_tries: 0,
        expression_length: 0,
        braid_length: 0,
        phase1_ms: 0.0,
        express_ms: 0.0,
        phase2_ms: 0.0,
        total_ms: 0.0,
        error: String::new(),
    };
    for attempt in 0..=spec.retries {
        row.attempts = attempt + 1;
        let mut arng = ChaCha8Rng::seed_from_u64(trial_seed(seed, attempt as u64 + 1));
        // Retries also let the search fall back from word enumeration.
        let search = SearchConfig {
            fallback: attempt > 0,
            ..SearchConfig::default()
        };
        match recover_key(&input, &AttackConfig::default(), &search, &mut arng) {
            Ok(report) => {
                row.kernel_history = report
                    .phase1
                    .kernel_history
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(">");
                row.alphas = report.phase1.alphas;
                row.gammas = report.phase1.gammas;
                row.alpha_tries = report.phase1.alpha_tries;
                row.expression_length = report.expression_length;
                row.braid_length = report.braid_length;
                row.phase1_ms = report.phase1_ms;
                row.express_ms = report.express_ms;
                row.phase2_ms = report.phase2_ms;
                row.success = report.key == shared;
                row.error = if row.success { String::new() } else { "key mismatch".into() };
                if row.success {
                    break;
                }
            }
            Err(e) => row.error = e.to_string(),
        }
    }
    row.total_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(row)
}

pub fn bench_attack(spec: &AttackSpec) -> Result<Vec<AttackRow>> {
    if spec.trials == 0 {
        return Err(Error::InfeasibleParameters("trials must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for &n in &spec.n_list {
        let batch: Vec<Result<AttackRow>> = (0..spec.trials)
            .into_par_iter()
            .map(|i| run_attack_trial(spec, n, i))
            .collect();
        for r in batch {
            rows.push(r?);
        }
    }
    Ok(rows)
}

/// Writes rows as CSV with a header line.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_and_repeat() {
        assert_eq!(trial_seed(1, 2), trial_seed(1, 2));
        assert_ne!(trial_seed(1, 2), trial_seed(1, 3));
        assert_ne!(trial_seed(1, 2), trial_seed(2, 2));
    }

    #[test]
    fn express_bench_is_deterministic() {
        let spec = ExpressSpec::new(vec![8], 12, 5);
        let a = bench_express(&spec).unwrap();
        let b = bench_express(&spec).unwrap();
        let strip = |rows: &[BenchRow]| {
            let mut buf = Vec::new();
            let rows: Vec<BenchRow> = rows
                .iter()
                .cloned()
                .map(|mut r| {
                    r.elapsed_ms_mean = 0.0;
                    r
                })
                .collect();
            write_csv(&rows, &mut buf).unwrap();
            String::from_utf8(buf).unwrap()
        };
        assert_eq!(strip(&a), strip(&b));
        for r in &a {
            assert!(r.step1_min as f64 <= r.step1_mean && r.step1_mean <= r.step1_max as f64);
            assert!(r.length_min as f64 <= r.length_mean && r.length_mean <= r.length_max as f64);
        }
    }

    #[test]
    fn attack_rows_have_history() {
        let spec = AttackSpec::new(vec![8], 251, 2, 3);
        let rows = bench_attack(&spec).unwrap();
        assert_eq!(rows.len(), 2);
        for r in rows {
            assert!(r.success, "{}", r.error);
            assert!(r.kernel_history.ends_with(">1"));
        }
    }
}
