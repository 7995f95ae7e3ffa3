//! Short expressions of permutations as words in random generators.
//!
//! The search enumerates freely reduced words breadth first (by iterative
//! deepening, so memory stays proportional to the word length). Step 1 looks
//! for a word whose power is a single `c`-cycle `μ`; Step 2 conjugates `μ` by
//! further words until every cycle of a canonical decomposition of the target
//! has been seen. The final word is verified by evaluation.
//!
//! Generator sets with several orbits are handled orbit by orbit within the
//! same two enumerations. Whether an orbit admits transpositions is decided by
//! a parity computation over `F_2`.
//!
//! With `SearchConfig::fallback` set, a search that hits its cap is finished
//! by breadth-first search over group elements, or over the images of the
//! points of `μ`. Small or imprimitive groups, which the two steps cannot
//! handle, are covered this way.

use std::collections::{HashMap, HashSet};
use std::ops::ControlFlow;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{expected_step2, Group};
use crate::perm::{ParityConstraint, Permutation, Point};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGenSet", into = "RawGenSet")]
pub struct GenSet {
    n: usize,
    gens: Vec<Permutation>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenSet {
    n: usize,
    gens: Vec<Permutation>,
}

impl TryFrom<RawGenSet> for GenSet {
    type Error = Error;
    fn try_from(raw: RawGenSet) -> Result<Self> {
        GenSet::new(raw.n, raw.gens)
    }
}

impl From<GenSet> for RawGenSet {
    fn from(g: GenSet) -> Self {
        RawGenSet { n: g.n, gens: g.gens }
    }
}

impl GenSet {
    pub fn new(n: usize, gens: Vec<Permutation>) -> Result<Self> {
        if gens.is_empty() {
            return Err(Error::TrivialGenerators);
        }
        if gens.len() > 100 {
            return Err(Error::InfeasibleParameters("at most 100 generators are supported".into()));
        }
        if let Some(g) = gens.iter().find(|g| g.degree_n() != n) {
            return Err(Error::SizeMismatch(g.degree_n(), n));
        }
        Ok(GenSet { n, gens })
    }

    /// `k` independent uniform elements of `S_n` (or `A_n`).
    pub fn random<R: Rng + ?Sized>(n: usize, k: usize, constraint: ParityConstraint, rng: &mut R) -> Result<Self> {
        GenSet::new(n, (0..k).map(|_| Permutation::sample(n, constraint, rng)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.gens.len()
    }

    pub fn gens(&self) -> &[Permutation] {
        &self.gens
    }

    /// `g₁, g₁⁻¹, g₂, g₂⁻¹, …`; letter code `2·j + inverted`.
    fn alphabet(&self) -> Vec<Permutation> {
        self.gens.iter().flat_map(|g| [g.clone(), g.inverse()]).collect()
    }
}

/// A freely reduced word in the generators: `+j` is `g_j`, `-j` is `g_j⁻¹`
/// (1-based).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i32>", into = "Vec<i32>")]
pub struct Expression {
    letters: Vec<i32>,
}

impl TryFrom<Vec<i32>> for Expression {
    type Error = Error;
    fn try_from(letters: Vec<i32>) -> Result<Self> {
        if letters.contains(&0) {
            return Err(Error::Malformed("expression letters must be nonzero".into()));
        }
        Ok(Expression::reduced(letters))
    }
}

impl From<Expression> for Vec<i32> {
    fn from(e: Expression) -> Self {
        e.letters
    }
}

fn code_to_letter(code: u8) -> i32 {
    let j = (code / 2) as i32 + 1;
    if code & 1 == 1 {
        -j
    } else {
        j
    }
}

impl Expression {
    pub fn empty() -> Self {
        Expression::default()
    }

    /// Builds a freely reduced expression from arbitrary nonzero letters.
    pub fn reduced(letters: Vec<i32>) -> Self {
        let mut stack: Vec<i32> = Vec::with_capacity(letters.len());
        for e in letters {
            if stack.last() == Some(&-e) {
                stack.pop();
            } else {
                stack.push(e);
            }
        }
        Expression { letters: stack }
    }

    fn from_codes(codes: &[u8]) -> Self {
        Expression::reduced(codes.iter().map(|&c| code_to_letter(c)).collect())
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

    pub fn inverse(&self) -> Expression {
        Expression {
            letters: self.letters.iter().rev().map(|&e| -e).collect(),
        }
    }

    pub fn concat(&self, other: &Expression) -> Expression {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Expression::reduced(letters)
    }

    pub fn power(&self, m: usize) -> Expression {
        Expression::reduced(self.letters.repeat(m))
    }

    /// Left-to-right product of the named generators.
    pub fn evaluate(&self, gs: &GenSet) -> Result<Permutation> {
        let mut acc = Permutation::identity(gs.n);
        for &e in &self.letters {
            let j = e.unsigned_abs() as usize;
            if j == 0 || j > gs.k() {
                return Err(Error::IndexOutOfRange { index: j, n: gs.k() });
            }
            let g = &gs.gens[j - 1];
            acc = if e > 0 { acc.then(g) } else { acc.then(&g.inverse()) };
        }
        Ok(acc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Real,
    Idealized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Largest power tried in Step 1; `None` means `n`.
    pub max_power: Option<usize>,
    pub mode: Mode,
    /// Word-count caps per step; `None` picks a size-dependent default.
    pub step1_cap: Option<u64>,
    pub step2_cap: Option<u64>,
    pub time_budget: Option<Duration>,
    /// Seed for idealized sampling.
    pub seed: u64,
    /// On a cap-out, retry by breadth-first search over group elements and
    /// then over orbits of the tracked points.
    #[serde(default)]
    pub fallback: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_power: None,
            mode: Mode::Real,
            step1_cap: None,
            step2_cap: None,
            time_budget: None,
            seed: 0,
            fallback: false,
        }
    }
}

impl SearchConfig {
    pub fn idealized(seed: u64) -> Self {
        SearchConfig {
            mode: Mode::Idealized,
            seed,
            ..Self::default()
        }
    }

    fn power_limit(&self, n: usize) -> Result<usize> {
        match self.max_power {
            Some(0) => Err(Error::InfeasibleParameters("max power must be at least 1".into())),
            Some(l) => Ok(l),
            None => Ok(n),
        }
    }

    fn caps(&self, n: usize, c: usize, multi_orbit: bool) -> (u64, u64) {
        let scale = if multi_orbit { 4 } else { 1 };
        let group = if c == 2 { Group::Symmetric } else { Group::Alternating };
        let s1 = self.step1_cap.unwrap_or(scale * (200 * (c * n) as u64 + 10_000));
        let s2 = self
            .step2_cap
            .unwrap_or(scale * (50.0 * expected_step2(n, 2, group).value) as u64 + scale * 100_000);
        (s1, s2)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    /// 2 if some generator is odd, 3 otherwise.
    pub c: usize,
    pub group: Group,
    /// Moved points of the generators (0-based).
    pub support: Vec<Point>,
    /// Non-trivial orbits, each sorted.
    pub orbits: Vec<Vec<Point>>,
    /// Cycle length harvested on each orbit.
    pub orbit_c: Vec<usize>,
    pub caveats: Vec<String>,
}

/// Solves `Σ x_i v_i = target` over `F_2`; returns the chosen indices.
fn solve_f2(vectors: &[Vec<bool>], target: &[bool]) -> Option<Vec<usize>> {
    let width = target.len();
    // Each row carries its combination of input vectors.
    let mut rows: Vec<(Vec<bool>, Vec<bool>)> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut tag = vec![false; vectors.len()];
            tag[i] = true;
            (v.clone(), tag)
        })
        .collect();
    let mut goal = (target.to_vec(), vec![false; vectors.len()]);
    let mut rank = 0;
    for col in 0..width {
        let Some(piv) = (rank..rows.len()).find(|&r| rows[r].0[col]) else {
            continue;
        };
        rows.swap(rank, piv);
        let (pv, pt) = rows[rank].clone();
        let xor = |row: &mut (Vec<bool>, Vec<bool>)| {
            for (a, b) in row.0.iter_mut().zip(&pv) {
                *a ^= b;
            }
            for (a, b) in row.1.iter_mut().zip(&pt) {
                *a ^= b;
            }
        };
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row.0[col] {
                xor(row);
            }
        }
        if goal.0[col] {
            xor(&mut goal);
        }
        rank += 1;
    }
    if goal.0.iter().any(|&b| b) {
        return None;
    }
    Some((0..vectors.len()).filter(|&i| goal.1[i]).collect())
}

struct OrbitData {
    orbit_of: Vec<Option<usize>>,
    /// Per generator, parity on each orbit.
    parity: Vec<Vec<bool>>,
}

fn orbit_data(gs: &GenSet) -> (Vec<Vec<Point>>, OrbitData) {
    let n = gs.n;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for g in &gs.gens {
        for x in 0..n {
            let (a, b) = (find(&mut parent, x), find(&mut parent, g.apply(x as Point) as usize));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut by_root: Vec<Vec<Point>> = vec![Vec::new(); n];
    for x in 0..n {
        let r = find(&mut parent, x);
        by_root[r].push(x as Point);
    }
    let orbits: Vec<Vec<Point>> = by_root.into_iter().filter(|o| o.len() > 1).collect();
    let mut orbit_of = vec![None; n];
    for (j, o) in orbits.iter().enumerate() {
        for &x in o {
            orbit_of[x as usize] = Some(j);
        }
    }
    let parity = gs
        .gens
        .iter()
        .map(|g| {
            let mut v = vec![false; orbits.len()];
            for cyc in g.cycles() {
                if let Some(j) = orbit_of[cyc[0] as usize] {
                    v[j] ^= (cyc.len() - 1) % 2 == 1;
                }
            }
            v
        })
        .collect();
    (orbits, OrbitData { orbit_of, parity })
}

pub fn classify(gs: &GenSet) -> Result<Classification> {
    if gs.gens.iter().all(Permutation::is_identity) {
        return Err(Error::TrivialGenerators);
    }
    let (orbits, data) = orbit_data(gs);
    let odd = data.parity.iter().any(|v| v.iter().filter(|&&b| b).count() % 2 == 1);
    let c = if odd { 2 } else { 3 };
    let orbit_c = (0..orbits.len())
        .map(|j| {
            let unit: Vec<bool> = (0..orbits.len()).map(|i| i == j).collect();
            if solve_f2(&data.parity, &unit).is_some() {
                2
            } else {
                3
            }
        })
        .collect();
    let mut support: Vec<Point> = gs.gens.iter().flat_map(|g| g.support()).collect();
    support.sort_unstable();
    support.dedup();
    let mut caveats = Vec::new();
    if orbits.len() > 1 {
        caveats.push(format!(
            "{} non-trivial orbits: searched orbit by orbit with raised caps",
            orbits.len()
        ));
    }
    Ok(Classification {
        c,
        group: if c == 2 { Group::Symmetric } else { Group::Alternating },
        support,
        orbits,
        orbit_c,
        caveats,
    })
}

/// One enumerated element. `letters` are alphabet codes (`2·j + inverted`,
/// 0-based `j`) and are absent in idealized mode.
pub struct Visited<'a> {
    pub letters: Option<&'a [u8]>,
    pub perm: &'a Permutation,
}

impl Visited<'_> {
    pub fn expression(&self) -> Option<Expression> {
        self.letters.map(Expression::from_codes)
    }
}

/// Depth-limited enumeration over freely reduced words, re-run for each
/// length. `extend` writes the state of `word + letter` into its last argument.
struct Deepening<S, E> {
    k2: u8,
    extend: E,
    states: Vec<S>,
    codes: Vec<u8>,
}

impl<S: Clone, E: FnMut(&S, u8, &mut S)> Deepening<S, E> {
    fn new(k2: usize, root: S, extend: E) -> Self {
        Deepening {
            k2: k2 as u8,
            extend,
            states: vec![root],
            codes: Vec::new(),
        }
    }

    fn run<V: FnMut(&[u8], &S) -> ControlFlow<()>>(&mut self, visit: &mut V) {
        for depth in 1.. {
            while self.states.len() <= depth {
                let s = self.states[0].clone();
                self.states.push(s);
            }
            if self.descend(0, depth, visit).is_break() {
                return;
            }
        }
    }

    fn descend<V: FnMut(&[u8], &S) -> ControlFlow<()>>(
        &mut self,
        level: usize,
        depth: usize,
        visit: &mut V,
    ) -> ControlFlow<()> {
        let forbidden = self.codes.last().map(|&c| c ^ 1);
        for code in 0..self.k2 {
            if Some(code) == forbidden {
                continue;
            }
            let (head, tail) = self.states.split_at_mut(level + 1);
            (self.extend)(&head[level], code, &mut tail[0]);
            self.codes.push(code);
            let flow = if level + 1 == depth {
                visit(&self.codes, &self.states[level + 1])
            } else {
                self.descend(level + 1, depth, visit)
            };
            self.codes.pop();
            flow?;
        }
        ControlFlow::Continue(())
    }
}

fn idealized_sample<R: Rng + ?Sized>(n: usize, cls: &Classification, rng: &mut R) -> Permutation {
    let mut images: Vec<Point> = (0..n as Point).collect();
    for (orbit, &c) in cls.orbits.iter().zip(&cls.orbit_c) {
        let constraint = if c == 3 { ParityConstraint::Even } else { ParityConstraint::Any };
        let local = Permutation::sample(orbit.len(), constraint, rng);
        for (i, &x) in orbit.iter().enumerate() {
            images[x as usize] = orbit[local.apply(i as Point) as usize];
        }
    }
    Permutation::from_images(images).expect("orbit-wise bijection")
}

/// Visits free-reduced words in breadth-first order (real mode) or uniform
/// random group elements (idealized mode) until the visitor stops or `cap`
/// elements have been visited. Returns the number visited.
pub fn enumerate_words<F>(gs: &GenSet, config: &SearchConfig, cap: u64, mut visit: F) -> Result<u64>
where
    F: FnMut(&Visited) -> ControlFlow<()>,
{
    let deadline = config.time_budget.map(|b| Instant::now() + b);
    let mut count = 0u64;
    let mut outcome: Result<()> = Ok(());
    let guard = |count: &mut u64, outcome: &mut Result<()>| -> ControlFlow<()> {
        *count += 1;
        if *count > cap {
            *count = cap;
            *outcome = Err(Error::CapExceeded { step: "enumeration", cap, missing: 1 });
            return ControlFlow::Break(());
        }
        if let Some(d) = deadline {
            if *count % 1024 == 0 && Instant::now() > d {
                *outcome = Err(Error::TimeBudget("enumeration"));
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    };
    match config.mode {
        Mode::Real => {
            let alphabet = gs.alphabet();
            let mut dfs = Deepening::new(
                alphabet.len(),
                Permutation::identity(gs.n),
                |s: &Permutation, code: u8, out: &mut Permutation| s.then_into(&alphabet[code as usize], out),
            );
            dfs.run(&mut |codes: &[u8], perm: &Permutation| {
                guard(&mut count, &mut outcome)?;
                visit(&Visited { letters: Some(codes), perm })
            });
        }
        Mode::Idealized => {
            let cls = classify(gs)?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            loop {
                if guard(&mut count, &mut outcome).is_break() {
                    break;
                }
                let perm = idealized_sample(gs.n, &cls, &mut rng);
                if visit(&Visited { letters: None, perm: &perm }).is_break() {
                    break;
                }
            }
        }
    }
    outcome.map(|_| count)
}

/// A harvested cycle with its expression (absent in idealized mode).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoundCycle {
    /// 1-based points `a -> b (-> c) -> a`.
    pub cycle: Vec<u32>,
    pub expression: Option<Expression>,
    /// Power of the Step-1 word that produced it.
    pub power: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub step1_count: u64,
    pub step2_count: u64,
    /// The `c`-cycle found in Step 1 for each orbit that needed one.
    pub mu: Vec<FoundCycle>,
    pub final_length: usize,
    pub c: usize,
    pub elapsed_ms: f64,
    pub caveats: Vec<String>,
}

/// The unique `c`-cycle power of `perm` within `limit`, as `(m, start point)`.
fn c_cycle_power(lengths: &[(usize, Point)], c: usize, limit: usize) -> Option<(usize, Point)> {
    let mut hit = None;
    let mut m: usize = 1;
    for &(len, start) in lengths {
        if len == c {
            if hit.is_some() {
                return None;
            }
            hit = Some(start);
        } else {
            m = m / gcd(m, len) * len;
            if m > limit {
                return None;
            }
        }
    }
    let start = hit?;
    (m % c != 0).then_some((m, start))
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Step 1 for the orbits listed in `wanted` (orbit index, cycle length).
fn find_mus(
    gs: &GenSet,
    wanted: &[(usize, usize)],
    config: &SearchConfig,
    cap: u64,
) -> Result<(Vec<(Permutation, FoundCycle)>, u64)> {
    let limit = config.power_limit(gs.n)?;
    let (_, data) = orbit_data(gs);
    let mut found: Vec<Option<(Permutation, FoundCycle)>> = vec![None; wanted.len()];
    let mut remaining = wanted.len();
    if remaining == 0 {
        return Ok((Vec::new(), 0));
    }
    let mut seen = Vec::new();
    let mut lengths = Vec::new();
    let cs: Vec<usize> = {
        let mut v: Vec<usize> = wanted.iter().map(|w| w.1).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let result = enumerate_words(gs, config, cap, |visited| {
        visited.perm.cycle_lengths_into(&mut seen, &mut lengths);
        for &c in &cs {
            let Some((m, start)) = c_cycle_power(&lengths, c, limit) else {
                continue;
            };
            let Some(orbit) = data.orbit_of[start as usize] else {
                continue;
            };
            let Some(slot) = wanted.iter().position(|&(j, wc)| j == orbit && wc == c) else {
                continue;
            };
            if found[slot].is_some() {
                continue;
            }
            let mu = visited.perm.power(m as u64);
            let cycle = mu.cycles().remove(0);
            let expression = visited.expression().map(|e| e.power(m));
            found[slot] = Some((
                mu,
                FoundCycle {
                    cycle: cycle.iter().map(|&x| x + 1).collect(),
                    expression,
                    power: m,
                },
            ));
            remaining -= 1;
        }
        if remaining == 0 {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    match result {
        Ok(count) if remaining == 0 => Ok((found.into_iter().map(Option::unwrap).collect(), count)),
        Ok(_) => unreachable!("enumeration only stops early on success"),
        Err(Error::CapExceeded { cap, .. }) => Err(Error::CapExceeded {
            step: "step1",
            cap,
            missing: remaining,
        }),
        Err(Error::TimeBudget(_)) => Err(Error::TimeBudget("step1")),
        Err(e) => Err(e),
    }
}

/// Canonical key of a 2- or 3-cycle: 2-cycles sorted, 3-cycles rotated so the
/// smallest point comes first.
fn cycle_key(points: &[Point]) -> [Point; 3] {
    match *points {
        [a, b] => [a.min(b), a.max(b), Point::MAX],
        [a, b, c] => {
            if a < b && a < c {
                [a, b, c]
            } else if b < c {
                [b, c, a]
            } else {
                [c, a, b]
            }
        }
        _ => unreachable!("only 2- and 3-cycles are harvested"),
    }
}

fn key_points(key: &[Point; 3]) -> Vec<Point> {
    key.iter().copied().filter(|&x| x != Point::MAX).collect()
}

struct Needed {
    /// Canonical decomposition, in product order.
    order: Vec<[Point; 3]>,
    /// Expressions found so far (`None` in idealized mode).
    found: HashMap<[Point; 3], Option<Expression>>,
}

impl Needed {
    fn missing(&self) -> usize {
        let mut keys: Vec<_> = self.order.iter().filter(|k| !self.found.contains_key(*k)).collect();
        keys.sort();
        keys.dedup();
        keys.len()
    }
}

/// Plan for one target: a parity-fixing prefix and the needed cycles per orbit.
struct Plan {
    prefix: Expression,
    /// `(orbit index, cycle length)` for each orbit that the target moves.
    wanted: Vec<(usize, usize)>,
    needed: Vec<[Point; 3]>,
}

fn plan(gs: &GenSet, cls: &Classification, target: &Permutation) -> Result<Plan> {
    let (_, data) = orbit_data(gs);
    for x in target.support() {
        if data.orbit_of[x as usize].is_none() {
            return Err(Error::NotInGroup(format!(
                "target moves point {} which no generator moves",
                x + 1
            )));
        }
    }
    for x in 0..gs.n as Point {
        if data.orbit_of[x as usize] != data.orbit_of[target.apply(x) as usize] {
            return Err(Error::NotInGroup("target does not preserve the orbits".into()));
        }
    }
    // Parity on orbits that only admit 3-cycles must be matched by a prefix.
    let three: Vec<usize> = (0..cls.orbits.len()).filter(|&j| cls.orbit_c[j] == 3).collect();
    let mut target_parity = vec![false; cls.orbits.len()];
    for cyc in target.cycles() {
        let j = data.orbit_of[cyc[0] as usize].expect("checked above");
        target_parity[j] ^= (cyc.len() - 1) % 2 == 1;
    }
    let project = |v: &[bool]| three.iter().map(|&j| v[j]).collect::<Vec<bool>>();
    let vectors: Vec<Vec<bool>> = data.parity.iter().map(|v| project(v)).collect();
    let chosen = solve_f2(&vectors, &project(&target_parity)).ok_or_else(|| {
        Error::NotInGroup("target parity is not reachable by the generators".into())
    })?;
    let prefix_word = Expression::reduced(chosen.iter().map(|&i| i as i32 + 1).collect());
    let surrogate = prefix_word.evaluate(gs)?.then(target);
    let mut wanted = Vec::new();
    let mut needed = Vec::new();
    for (j, orbit) in cls.orbits.iter().enumerate() {
        let mut local: Vec<Point> = (0..gs.n as Point).collect();
        let mut moved = false;
        for &x in orbit {
            local[x as usize] = surrogate.apply(x);
            moved |= surrogate.apply(x) != x;
        }
        if !moved {
            continue;
        }
        let local = Permutation::from_images(local)?;
        let c = cls.orbit_c[j];
        wanted.push((j, c));
        if c == 2 {
            needed.extend(local.decompose_transpositions().iter().map(|t| cycle_key(t)));
        } else {
            needed.extend(local.decompose_three_cycles()?.iter().map(|t| cycle_key(t)));
        }
    }
    Ok(Plan {
        prefix: prefix_word.inverse(),
        wanted,
        needed,
    })
}

/// Step 2 over all orbits at once. `mus` pairs each wanted orbit with its
/// `c`-cycle as an ordered point list and expression.
fn collect_cycles(
    gs: &GenSet,
    mus: &[(Vec<Point>, Option<Expression>)],
    needed: &mut Needed,
    config: &SearchConfig,
    cap: u64,
) -> Result<u64> {
    let mut tracked: Vec<Point> = Vec::new();
    let mut ranges = Vec::new();
    for (pts, _) in mus {
        ranges.push(tracked.len()..tracked.len() + pts.len());
        tracked.extend_from_slice(pts);
    }
    let mut missing = needed.missing();
    if missing == 0 {
        return Ok(0);
    }
    let mut harvest = |images: &[Point], word: Option<&[u8]>, needed: &mut Needed| -> bool {
        for ((_, mu_expr), range) in mus.iter().zip(&ranges) {
            let pts = &images[range.clone()];
            let key = cycle_key(pts);
            let (hit, inverted) = if needed.order.contains(&key) && !needed.found.contains_key(&key) {
                (Some(key), false)
            } else if pts.len() == 3 {
                let inv = cycle_key(&[pts[0], pts[2], pts[1]]);
                if needed.order.contains(&inv) && !needed.found.contains_key(&inv) {
                    (Some(inv), true)
                } else {
                    (None, false)
                }
            } else {
                (None, false)
            };
            let Some(k) = hit else { continue };
            let expr = match (word, mu_expr) {
                (Some(codes), Some(mu_expr)) => {
                    let w = Expression::from_codes(codes);
                    let e = w.inverse().concat(mu_expr).concat(&w);
                    Some(if inverted { e.inverse() } else { e })
                }
                _ => None,
            };
            needed.found.insert(k, expr);
            missing -= 1;
        }
        missing == 0
    };
    // The empty word conjugates μ to itself.
    if harvest(&tracked, Some(&[]), needed) {
        return Ok(1);
    }
    let deadline = config.time_budget.map(|b| Instant::now() + b);
    let mut count = 1u64;
    let mut outcome: Result<()> = Ok(());
    let step = |count: &mut u64, outcome: &mut Result<()>| -> bool {
        *count += 1;
        if *count > cap {
            *count = cap;
            *outcome = Err(Error::CapExceeded { step: "step2", cap, missing: 0 });
            return false;
        }
        if let Some(d) = deadline {
            if *count % 1024 == 0 && Instant::now() > d {
                *outcome = Err(Error::TimeBudget("step2"));
                return false;
            }
        }
        true
    };
    match config.mode {
        Mode::Real => {
            let alphabet = gs.alphabet();
            let mut dfs = Deepening::new(alphabet.len(), tracked.clone(), |s: &Vec<Point>, code: u8, out: &mut Vec<Point>| {
                let g = &alphabet[code as usize];
                for (o, &x) in out.iter_mut().zip(s) {
                    *o = g.apply(x);
                }
            });
            dfs.run(&mut |codes: &[u8], images: &Vec<Point>| {
                if !step(&mut count, &mut outcome) || harvest(images, Some(codes), needed) {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            });
        }
        Mode::Idealized => {
            let cls = classify(gs)?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0002);
            let orbit_of_range: Vec<usize> = mus
                .iter()
                .map(|(pts, _)| cls.orbits.iter().position(|o| o.contains(&pts[0])).expect("orbit"))
                .collect();
            let mut images = tracked.clone();
            loop {
                if !step(&mut count, &mut outcome) {
                    break;
                }
                for (range, &j) in ranges.iter().zip(&orbit_of_range) {
                    let orbit = &cls.orbits[j];
                    let c = range.len();
                    if orbit.len() >= c + 2 {
                        let chosen: Vec<Point> = orbit.choose_multiple(&mut rng, c).copied().collect();
                        let mut chosen = chosen;
                        chosen.shuffle(&mut rng);
                        images[range.clone()].copy_from_slice(&chosen);
                    } else {
                        let constraint = if cls.orbit_c[j] == 3 { ParityConstraint::Even } else { ParityConstraint::Any };
                        let local = Permutation::sample(orbit.len(), constraint, &mut rng);
                        for (slot, &x) in range.clone().zip(&tracked[range.clone()]) {
                            let i = orbit.iter().position(|&y| y == x).expect("orbit point");
                            images[slot] = orbit[local.apply(i as Point) as usize];
                        }
                    }
                }
                if harvest(&images, None, needed) {
                    break;
                }
            }
        }
    }
    match outcome {
        Ok(()) => Ok(count),
        Err(Error::CapExceeded { cap, .. }) => Err(Error::CapExceeded {
            step: "step2",
            cap,
            missing: needed.missing(),
        }),
        Err(e) => Err(e),
    }
}

fn run_search(
    gs: &GenSet,
    target: &Permutation,
    config: &SearchConfig,
    by_orbit: bool,
) -> Result<(Option<Expression>, SearchStats)> {
    let started = Instant::now();
    if target.degree_n() != gs.n {
        return Err(Error::SizeMismatch(target.degree_n(), gs.n));
    }
    let cls = classify(gs)?;
    let mut stats = SearchStats {
        c: cls.c,
        caveats: cls.caveats.clone(),
        ..SearchStats::default()
    };
    let plan = plan(gs, &cls, target)?;
    let multi = cls.orbits.len() > 1;
    let (cap1, cap2) = config.caps(gs.n, cls.c, multi);
    let (mus, step1_count) = find_mus(gs, &plan.wanted, config, cap1)?;
    stats.step1_count = step1_count;
    let mu_points: Vec<(Vec<Point>, Option<Expression>)> = mus
        .iter()
        .map(|(_, f)| (f.cycle.iter().map(|&x| x - 1).collect(), f.expression.clone()))
        .collect();
    stats.mu = mus.into_iter().map(|(_, f)| f).collect();
    let mut needed = Needed {
        order: plan.needed.clone(),
        found: HashMap::new(),
    };
    stats.step2_count = if by_orbit {
        collect_by_orbit(gs, &mu_points, &mut needed)?
    } else {
        collect_cycles(gs, &mu_points, &mut needed, config, cap2)?
    };
    let expression = match config.mode {
        Mode::Idealized => None,
        Mode::Real => {
            let mut letters = plan.prefix.letters().to_vec();
            for key in &needed.order {
                let e = needed.found[key].as_ref().expect("real mode keeps expressions");
                letters.extend_from_slice(e.letters());
            }
            let expr = Expression::reduced(letters);
            Some(expr)
        }
    };
    stats.final_length = expression.as_ref().map_or(0, Expression::len);
    stats.elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok((expression, stats))
}

/// Step 1 alone: a `c`-cycle `μ` on the first orbit, with its expression.
pub fn step1_find_mu(gs: &GenSet, config: &SearchConfig) -> Result<(Permutation, FoundCycle, SearchStats)> {
    let started = Instant::now();
    let cls = classify(gs)?;
    let wanted = [(0, cls.orbit_c[0])];
    let (cap1, _) = config.caps(gs.n, cls.c, cls.orbits.len() > 1);
    let (mut mus, count) = find_mus(gs, &wanted, config, cap1)?;
    let (mu, found) = mus.remove(0);
    let stats = SearchStats {
        step1_count: count,
        mu: vec![found.clone()],
        c: cls.c,
        caveats: cls.caveats,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        ..SearchStats::default()
    };
    Ok((mu, found, stats))
}

/// Step 2 alone: expressions for every cycle in the canonical decomposition of
/// `target`, by conjugating a given `c`-cycle `mu`.
pub fn step2_collect(
    gs: &GenSet,
    mu: &Permutation,
    mu_expr: &Expression,
    target: &Permutation,
    config: &SearchConfig,
) -> Result<(HashMap<Vec<u32>, Expression>, u64)> {
    let cycles = mu.cycles();
    if cycles.len() != 1 || !(2..=3).contains(&cycles[0].len()) {
        return Err(Error::InvalidPermutation("mu must be a single 2- or 3-cycle".into()));
    }
    let c = cycles[0].len();
    let needed_keys: Vec<[Point; 3]> = if c == 2 {
        target.decompose_transpositions().iter().map(|t| cycle_key(t)).collect()
    } else {
        target.decompose_three_cycles()?.iter().map(|t| cycle_key(t)).collect()
    };
    let mut needed = Needed {
        order: needed_keys,
        found: HashMap::new(),
    };
    let (_, cap2) = config.caps(gs.n, c, false);
    let count = collect_cycles(gs, &[(cycles[0].clone(), Some(mu_expr.clone()))], &mut needed, config, cap2)?;
    let map = needed
        .found
        .into_iter()
        .filter_map(|(k, e)| Some((key_points(&k).iter().map(|&x| x + 1).collect(), e?)))
        .collect();
    Ok((map, count))
}

/// Finds a verified expression for `target` in the generators.
pub fn express(gs: &GenSet, target: &Permutation, config: &SearchConfig) -> Result<(Expression, SearchStats)> {
    if target.degree_n() != gs.n {
        return Err(Error::SizeMismatch(target.degree_n(), gs.n));
    }
    let trivial = |expr: Expression| {
        let stats = SearchStats {
            final_length: expr.len(),
            c: classify(gs).map(|c| c.c).unwrap_or(2),
            ..SearchStats::default()
        };
        (expr, stats)
    };
    if target.is_identity() {
        return Ok(trivial(Expression::empty()));
    }
    for (j, g) in gs.gens.iter().enumerate() {
        if g == target {
            return Ok(trivial(Expression::reduced(vec![j as i32 + 1])));
        }
        if &g.inverse() == target {
            return Ok(trivial(Expression::reduced(vec![-(j as i32) - 1])));
        }
    }
    let config = SearchConfig {
        mode: Mode::Real,
        ..config.clone()
    };
    let (expr, stats) = match run_search(gs, target, &config, false) {
        Err(Error::CapExceeded { .. }) if config.fallback => fallback_search(gs, target, &config)?,
        other => {
            let (expr, stats) = other?;
            (expr.expect("real mode produces an expression"), stats)
        }
    };
    if &expr.evaluate(gs)? != target {
        return Err(Error::VerificationFailed);
    }
    Ok((expr, stats))
}

/// Steps 1 and 2 with uniform random group elements in place of words.
pub fn idealized_baseline(gs: &GenSet, target: &Permutation, config: &SearchConfig) -> Result<SearchStats> {
    let config = SearchConfig {
        mode: Mode::Idealized,
        ..config.clone()
    };
    Ok(run_search(gs, target, &config, false)?.1)
}

/// Elements visited by the group search before it gives way to Step 1 plus
/// the orbit search.
const GROUP_SEARCH_LIMIT: usize = 200_000;

fn fallback_search(gs: &GenSet, target: &Permutation, config: &SearchConfig) -> Result<(Expression, SearchStats)> {
    let started = Instant::now();
    let cls = classify(gs)?;
    let mut stats = SearchStats {
        c: cls.c,
        caveats: cls.caveats.clone(),
        ..SearchStats::default()
    };
    if let Some((expr, count)) = group_search(gs, target, GROUP_SEARCH_LIMIT)? {
        stats.caveats.push("word search capped; shortest word found by group search".into());
        stats.step2_count = count;
        stats.final_length = expr.len();
        stats.elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
        return Ok((expr, stats));
    }
    let (expr, mut stats) = run_search(gs, target, config, true)?;
    stats.caveats.push("word search capped; Step 2 finished by orbit search".into());
    Ok((expr.expect("real mode produces an expression"), stats))
}

/// Breadth-first search over group elements, acting on the support only.
/// `Ok(None)` means the limit was reached first.
fn group_search(gs: &GenSet, target: &Permutation, limit: usize) -> Result<Option<(Expression, u64)>> {
    let support = classify(gs)?.support;
    if support.len() > u8::MAX as usize {
        return Ok(None);
    }
    let mut local = vec![u8::MAX; gs.n];
    for (i, &x) in support.iter().enumerate() {
        local[x as usize] = i as u8;
    }
    let restrict = |p: &Permutation| -> Option<Vec<u8>> {
        support.iter().map(|&x| Some(local[p.apply(x) as usize]).filter(|&v| v != u8::MAX)).collect()
    };
    let Some(goal) = restrict(target) else {
        return Err(Error::NotInGroup("target leaves the support of the generators".into()));
    };
    if target.support().iter().any(|&x| local[x as usize] == u8::MAX) {
        return Err(Error::NotInGroup("target moves a point no generator moves".into()));
    }
    let alphabet: Vec<Vec<u8>> = gs.alphabet().iter().map(|g| restrict(g).expect("generator")).collect();
    let root: Vec<u8> = (0..support.len() as u8).collect();
    let mut states: Vec<(Vec<u8>, usize, u8)> = vec![(root.clone(), usize::MAX, 0)];
    let mut seen: HashMap<Vec<u8>, usize> = HashMap::from([(root, 0)]);
    let mut head = 0;
    while head < states.len() {
        if states[head].0 == goal {
            let mut codes = Vec::new();
            let mut at = head;
            while states[at].1 != usize::MAX {
                codes.push(states[at].2);
                at = states[at].1;
            }
            codes.reverse();
            return Ok(Some((Expression::from_codes(&codes), states.len() as u64)));
        }
        for (code, g) in alphabet.iter().enumerate() {
            let next: Vec<u8> = states[head].0.iter().map(|&x| g[x as usize]).collect();
            if !seen.contains_key(&next) {
                if states.len() >= limit {
                    return Ok(None);
                }
                seen.insert(next.clone(), states.len());
                states.push((next, head, code as u8));
            }
        }
        head += 1;
    }
    Err(Error::NotInGroup("target is not in the group generated".into()))
}

/// Step 2 by breadth-first search over the images of each `μ`'s points,
/// which reaches every conjugate of `μ` within the orbit.
fn collect_by_orbit(gs: &GenSet, mus: &[(Vec<Point>, Option<Expression>)], needed: &mut Needed) -> Result<u64> {
    let alphabet = gs.alphabet();
    let mut count = 0u64;
    for (pts, mu_expr) in mus {
        if needed.missing() == 0 {
            break;
        }
        let mu_expr = mu_expr.as_ref().expect("real mode keeps expressions");
        let mut states: Vec<(Vec<Point>, usize, u8)> = vec![(pts.clone(), usize::MAX, 0)];
        let mut seen: HashSet<Vec<Point>> = HashSet::from([pts.clone()]);
        let mut head = 0;
        while head < states.len() && needed.missing() > 0 {
            count += 1;
            let images = &states[head].0;
            let key = cycle_key(images);
            let hit = if needed.order.contains(&key) && !needed.found.contains_key(&key) {
                Some((key, false))
            } else if images.len() == 3 {
                let inv = cycle_key(&[images[0], images[2], images[1]]);
                (needed.order.contains(&inv) && !needed.found.contains_key(&inv)).then_some((inv, true))
            } else {
                None
            };
            if let Some((k, inverted)) = hit {
                let mut codes = Vec::new();
                let mut at = head;
                while states[at].1 != usize::MAX {
                    codes.push(states[at].2);
                    at = states[at].1;
                }
                codes.reverse();
                let w = Expression::from_codes(&codes);
                let e = w.inverse().concat(mu_expr).concat(&w);
                needed.found.insert(k, Some(if inverted { e.inverse() } else { e }));
            }
            for (code, g) in alphabet.iter().enumerate() {
                let next: Vec<Point> = states[head].0.iter().map(|&x| g.apply(x)).collect();
                if seen.insert(next.clone()) {
                    states.push((next, head, code as u8));
                }
            }
            head += 1;
        }
    }
    match needed.missing() {
        0 => Ok(count),
        _ => Err(Error::NotInGroup(
            "some cycles of the target are not conjugate to the cycle found".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perm(img: &[u32]) -> Permutation {
        Permutation::from_one_based(img).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn classification_examples() {
        let gs = GenSet::new(3, vec![perm(&[2, 1, 3]), perm(&[2, 3, 1])]).unwrap();
        let cls = classify(&gs).unwrap();
        assert_eq!(cls.c, 2);
        assert_eq!(cls.support, vec![0, 1, 2]);
        let gs = GenSet::random(8, 2, ParityConstraint::Even, &mut rng(1)).unwrap();
        assert_eq!(classify(&gs).unwrap().c, 3);
        // A block on {5..8} of S_8.
        let gs = GenSet::new(8, vec![perm(&[1, 2, 3, 4, 6, 5, 7, 8]), perm(&[1, 2, 3, 4, 6, 7, 8, 5])]).unwrap();
        let cls = classify(&gs).unwrap();
        assert_eq!(cls.support, vec![4, 5, 6, 7]);
        assert!(cls.caveats.is_empty());
        let trivial = GenSet::new(4, vec![Permutation::identity(4)]).unwrap();
        assert!(matches!(classify(&trivial), Err(Error::TrivialGenerators)));
    }

    #[test]
    fn single_generator_words() {
        let gs = GenSet::new(3, vec![perm(&[2, 1, 3])]).unwrap();
        let mut seen = Vec::new();
        enumerate_words(&gs, &SearchConfig::default(), 4, |v| {
            seen.push(v.expression().unwrap().letters().to_vec());
            ControlFlow::Continue(())
        })
        .unwrap_err();
        assert_eq!(seen, vec![vec![1], vec![-1], vec![1, 1], vec![-1, -1]]);
    }

    #[test]
    fn breadth_first_counts() {
        let gs = GenSet::random(6, 2, ParityConstraint::Any, &mut rng(2)).unwrap();
        let mut per_len = vec![0u64; 8];
        let mut last_len = 0;
        let total: u64 = (1..=6).map(|d| 4 * 3u64.pow(d - 1)).sum();
        let count = enumerate_words(&gs, &SearchConfig::default(), u64::MAX, |v| {
            let l = v.letters.unwrap().len();
            assert!(l >= last_len);
            last_len = l;
            per_len[l] += 1;
            let e = v.expression().unwrap();
            assert_eq!(e.len(), l, "enumerated words are reduced");
            assert_eq!(&e.evaluate(&gs).unwrap(), v.perm);
            if per_len[1..=6].iter().sum::<u64>() == total {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .unwrap();
        assert_eq!(count, total);
        for d in 1..=6 {
            assert_eq!(per_len[d], 4 * 3u64.pow(d as u32 - 1));
        }
    }

    #[test]
    fn closed_form_power_matches_iteration() {
        let mut r = rng(3);
        let mut seen = Vec::new();
        let mut lengths = Vec::new();
        for _ in 0..2000 {
            let n = r.gen_range(2..10);
            let t = Permutation::sample(n, ParityConstraint::Any, &mut r);
            t.cycle_lengths_into(&mut seen, &mut lengths);
            for c in [2, 3] {
                let brute = (1..=n).find(|&m| {
                    let d = t.power(m as u64).cycle_data();
                    d.structure == vec![c]
                });
                let fast = c_cycle_power(&lengths, c, n).map(|x| x.0);
                assert_eq!(fast, brute, "{t} c={c}");
            }
        }
    }

    #[test]
    fn step1_examples() {
        let gs = GenSet::new(5, vec![perm(&[2, 1, 3, 4, 5]), perm(&[2, 3, 4, 5, 1])]).unwrap();
        let (mu, found, stats) = step1_find_mu(&gs, &SearchConfig::default()).unwrap();
        assert_eq!(stats.step1_count, 1);
        assert_eq!(found.power, 1);
        assert_eq!(mu.degree(), 2);
        assert_eq!(found.expression.unwrap().evaluate(&gs).unwrap(), mu);
    }

    #[test]
    fn step2_on_mu_itself() {
        let gs = GenSet::random(8, 2, ParityConstraint::Any, &mut rng(4)).unwrap();
        let (mu, found, _) = step1_find_mu(&gs, &SearchConfig::default()).unwrap();
        let expr = found.expression.unwrap();
        let (map, count) = step2_collect(&gs, &mu, &expr, &mu, &SearchConfig::default()).unwrap();
        assert_eq!(count, 1);
        assert_eq!(map.len(), 1);
        for e in map.values() {
            assert_eq!(e.evaluate(&gs).unwrap(), mu);
        }
    }

    #[test]
    fn step2_expressions_evaluate_to_their_cycles() {
        let gs = GenSet::random(8, 2, ParityConstraint::Even, &mut rng(5)).unwrap();
        let (mu, found, _) = step1_find_mu(&gs, &SearchConfig::default()).unwrap();
        assert_eq!(mu.degree(), 3);
        let target = Permutation::sample(8, ParityConstraint::Even, &mut rng(6));
        let (map, _) = step2_collect(&gs, &mu, &found.expression.unwrap(), &target, &SearchConfig::default()).unwrap();
        for (cycle, e) in map {
            let pts: Vec<Point> = cycle.iter().map(|&x| x - 1).collect();
            assert_eq!(e.evaluate(&gs).unwrap(), Permutation::cycle(8, &pts));
        }
    }

    #[test]
    fn trivial_targets() {
        let gs = GenSet::random(8, 2, ParityConstraint::Any, &mut rng(7)).unwrap();
        let cfg = SearchConfig::default();
        assert!(express(&gs, &Permutation::identity(8), &cfg).unwrap().0.is_empty());
        let (e, _) = express(&gs, &gs.gens()[1], &cfg).unwrap();
        assert_eq!(e.letters(), &[2]);
        let (e, _) = express(&gs, &gs.gens()[0].inverse(), &cfg).unwrap();
        assert_eq!(e.letters(), &[-1]);
    }

    #[test]
    fn express_symmetric_and_alternating() {
        let mut r = rng(8);
        for trial in 0..40 {
            let n = [8, 10, 12][trial % 3];
            let constraint = if trial % 2 == 0 { ParityConstraint::Any } else { ParityConstraint::Even };
            let gs = GenSet::random(n, 2, constraint, &mut r).unwrap();
            let cls = classify(&gs).unwrap();
            if cls.orbits.len() != 1 || cls.orbits[0].len() != n {
                continue;
            }
            let tc = if cls.c == 3 { ParityConstraint::Even } else { ParityConstraint::Any };
            let target = Permutation::sample(n, tc, &mut r);
            match express(&gs, &target, &SearchConfig::default()) {
                Ok((e, stats)) => {
                    assert_eq!(e.evaluate(&gs).unwrap(), target);
                    assert_eq!(stats.final_length, e.len());
                    assert_eq!(Expression::reduced(e.letters().to_vec()), e);
                }
                // Primitive but proper subgroups are possible at small n.
                Err(Error::CapExceeded { .. }) => {}
                Err(other) => panic!("unexpected {other}"),
            }
        }
    }

    #[test]
    fn odd_target_in_alternating_group_is_rejected() {
        let gs = GenSet::random(8, 2, ParityConstraint::Even, &mut rng(9)).unwrap();
        let t = perm(&[2, 1, 3, 4, 5, 6, 7, 8]);
        assert!(matches!(express(&gs, &t, &SearchConfig::default()), Err(Error::NotInGroup(_))));
    }

    #[test]
    fn embedded_block_never_moves_fixed_points() {
        let mut r = rng(10);
        let block = [2u32, 4, 5, 7, 9, 10];
        for _ in 0..10 {
            let gens: Vec<Permutation> = (0..2)
                .map(|_| {
                    let local = Permutation::sample(block.len(), ParityConstraint::Any, &mut r);
                    let mut img: Vec<Point> = (0..12).collect();
                    for (i, &x) in block.iter().enumerate() {
                        img[x as usize] = block[local.apply(i as Point) as usize];
                    }
                    Permutation::from_images(img).unwrap()
                })
                .collect();
            let gs = GenSet::new(12, gens).unwrap();
            let cls = classify(&gs).unwrap();
            if cls.orbits.len() != 1 || cls.orbits[0].len() != block.len() {
                continue;
            }
            let local = Permutation::sample(block.len(), if cls.c == 2 { ParityConstraint::Any } else { ParityConstraint::Even }, &mut r);
            let mut img: Vec<Point> = (0..12).collect();
            for (i, &x) in block.iter().enumerate() {
                img[x as usize] = block[local.apply(i as Point) as usize];
            }
            let target = Permutation::from_images(img).unwrap();
            if let Ok((e, _)) = express(&gs, &target, &SearchConfig::default()) {
                assert_eq!(e.evaluate(&gs).unwrap(), target);
            }
            let outside = Permutation::transposition(12, 0, 1);
            assert!(matches!(express(&gs, &outside, &SearchConfig::default()), Err(Error::NotInGroup(_))));
        }
    }

    #[test]
    fn two_orbits() {
        // S_4 on {1..4} and A_5 on {5..9}, independent.
        let mut img_a: Vec<u32> = vec![2, 1, 3, 4];
        img_a.extend([6, 7, 5, 8, 9]);
        let mut img_b: Vec<u32> = vec![2, 3, 4, 1];
        img_b.extend([5, 6, 8, 9, 7]);
        let gs = GenSet::new(9, vec![perm(&img_a), perm(&img_b)]).unwrap();
        let cls = classify(&gs).unwrap();
        assert_eq!(cls.orbits.len(), 2);
        assert_eq!(cls.orbit_c, vec![2, 3]);
        assert!(!cls.caveats.is_empty());
        let target = perm(&[1, 2, 4, 3, 9, 6, 7, 8, 5]);
        // (3 4) is odd on the first orbit, (5 9) is odd on the second: unreachable.
        assert!(matches!(express(&gs, &target, &SearchConfig::default()), Err(Error::NotInGroup(_))));
        let target = perm(&[1, 2, 4, 3, 6, 5, 8, 7, 9]);
        let (e, _) = express(&gs, &target, &SearchConfig::default()).unwrap();
        assert_eq!(e.evaluate(&gs).unwrap(), target);
    }

    #[test]
    fn deterministic() {
        let gs = GenSet::random(10, 2, ParityConstraint::Any, &mut rng(11)).unwrap();
        let target = Permutation::sample(10, ParityConstraint::Any, &mut rng(12));
        let a = express(&gs, &target, &SearchConfig::default());
        let b = express(&gs, &target, &SearchConfig::default());
        match (a, b) {
            (Ok((ea, sa)), Ok((eb, sb))) => {
                assert_eq!(ea, eb);
                assert_eq!(sa.step1_count, sb.step1_count);
                assert_eq!(sa.step2_count, sb.step2_count);
            }
            (a, b) => assert_eq!(a.is_ok(), b.is_ok()),
        }
    }

    fn transitive(n: usize, constraint: ParityConstraint, r: &mut ChaCha8Rng) -> GenSet {
        loop {
            let gs = GenSet::random(n, 2, constraint, r).unwrap();
            let cls = classify(&gs).unwrap();
            if cls.orbits.len() == 1 && cls.orbits[0].len() == n {
                return gs;
            }
        }
    }

    #[test]
    fn idealized_runs() {
        let gs = transitive(8, ParityConstraint::Any, &mut rng(13));
        let target = Permutation::sample(8, ParityConstraint::Any, &mut rng(14));
        let s = idealized_baseline(&gs, &target, &SearchConfig::idealized(3)).unwrap();
        assert!(s.step1_count >= 1);
        assert_eq!(s.final_length, 0);
        let again = idealized_baseline(&gs, &target, &SearchConfig::idealized(3)).unwrap();
        assert_eq!((s.step1_count, s.step2_count, &s.mu), (again.step1_count, again.step2_count, &again.mu));
    }

    #[test]
    fn caps_are_reported() {
        // A dihedral group of order 10 never yields the transpositions of S_5.
        let gs = GenSet::new(5, vec![perm(&[2, 3, 4, 5, 1]), perm(&[1, 5, 4, 3, 2])]).unwrap();
        let target = perm(&[1, 3, 2, 5, 4]);
        let cfg = SearchConfig {
            step1_cap: Some(500),
            step2_cap: Some(500),
            ..SearchConfig::default()
        };
        let got = express(&gs, &target, &cfg);
        assert!(matches!(got, Err(Error::CapExceeded { .. })), "{got:?}");
    }

    #[test]
    fn fallback_covers_small_groups() {
        let gs = GenSet::new(5, vec![perm(&[2, 3, 4, 5, 1]), perm(&[1, 5, 4, 3, 2])]).unwrap();
        let cfg = SearchConfig {
            step1_cap: Some(500),
            step2_cap: Some(500),
            fallback: true,
            ..SearchConfig::default()
        };
        // The reflection fixing 3: a word of length 2 at least.
        let target = perm(&[5, 4, 3, 2, 1]);
        let (e, stats) = express(&gs, &target, &cfg).unwrap();
        assert_eq!(e.evaluate(&gs).unwrap(), target);
        assert!(e.len() <= 2);
        assert!(stats.caveats.iter().any(|c| c.contains("group search")));
        let outside = perm(&[1, 3, 2, 5, 4]);
        assert!(matches!(express(&gs, &outside, &cfg), Err(Error::NotInGroup(_))));
    }

    #[test]
    fn fallback_finishes_step2_by_orbit() {
        let gs = transitive(12, ParityConstraint::Any, &mut rng(4));
        let target = Permutation::sample(12, ParityConstraint::Any, &mut rng(5));
        let cfg = SearchConfig {
            step2_cap: Some(3),
            fallback: true,
            ..SearchConfig::default()
        };
        let (e, stats) = express(&gs, &target, &cfg).unwrap();
        assert_eq!(e.evaluate(&gs).unwrap(), target);
        assert!(stats.caveats.iter().any(|c| c.contains("orbit search")), "{:?}", stats.caveats);
    }

    #[test]
    fn expression_serde() {
        let e: Expression = serde_json::from_str("[1,-2,2,3]").unwrap();
        assert_eq!(e.letters(), &[1, 3]);
        assert!(serde_json::from_str::<Expression>("[0]").is_err());
        let gs = GenSet::new(3, vec![perm(&[2, 1, 3])]).unwrap();
        let text = serde_json::to_string(&gs).unwrap();
        assert_eq!(text, r#"{"n":3,"gens":[[2,1,3]]}"#);
        assert_eq!(serde_json::from_str::<GenSet>(&text).unwrap(), gs);
    }

    #[test]
    fn f2_solver() {
        let v = vec![vec![true, false, true], vec![false, true, true]];
        assert_eq!(solve_f2(&v, &[true, true, false]), Some(vec![0, 1]));
        assert_eq!(solve_f2(&v, &[true, false, false]), None);
        assert_eq!(solve_f2(&v, &[false, false, false]), Some(vec![]));
    }
}
