//! Random families `B^n -> B^m` and the half-subfamily covering check.
//!
//! For a line `b`, point `a` is uncovered by a kept subfamily when no kept
//! member maps `a` to `b`, i.e. when its hit set `H(a, b)` lies inside the
//! removed set `D`. The worst case over kept halves is the worst case over
//! removed sets of size exactly `floor(count / 2)`, since enlarging `D` can only
//! uncover more points.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::Serialize;
use thiserror::Error;

use crate::bits::{Family, FunctionTable, UniverseError};
use crate::bitset::{subset_words, words_for};
use crate::rng::{rng_for, tag};

/// Largest number of cells a generator will allocate.
pub const MAX_CELLS: u64 = 1 << 28;
pub const DEFAULT_EXACT_LIMIT: usize = 20;
pub const DEFAULT_TRIALS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoveringError {
    #[error("family of {cells} cells exceeds the budget of {budget}")]
    TooLarge { cells: u128, budget: u64 },
    #[error("exact mode handles at most {limit} members, family has {count}; use sampled mode")]
    ExactLimit { count: usize, limit: usize },
    #[error("invalid parameter: {0}")]
    InvalidParams(&'static str),
    #[error(transparent)]
    Universe(#[from] UniverseError),
}

/// `count` independent uniform total tables `B^n -> B^m`. Member `i` draws
/// from its own sub-stream, so members do not depend on generation order.
pub fn generate_random_family(n: u32, m: u32, count: usize, seed: u64, stream: u64) -> Result<Family, CoveringError> {
    if n > FunctionTable::MAX_DOMAIN_BITS || m == 0 || m > FunctionTable::MAX_CODOMAIN_BITS {
        return Err(UniverseError::Shape {
            domain_bits: n,
            codomain_bits: m,
        }
        .into());
    }
    let cells = (count as u128) << n;
    if cells > MAX_CELLS as u128 {
        return Err(CoveringError::TooLarge {
            cells,
            budget: MAX_CELLS,
        });
    }
    let mask = if m == 32 { u32::MAX } else { (1u32 << m) - 1 };
    let mut members = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = rng_for(seed, &[stream, i as u64]);
        let values = (0..1usize << n).map(|_| rng.next_u32() & mask).collect();
        members.push(FunctionTable::total(n, m, values)?);
    }
    Ok(Family::from_members(n, m, members)?)
}

/// A family of `2^t` random tables `B^n -> B^m`.
pub fn generate_covering_family(m: u32, n: u32, t: u32, seed: u64) -> Result<Family, CoveringError> {
    if m == 0 || n == 0 || t == 0 {
        return Err(CoveringError::InvalidParams("m, n, t must all be at least 1"));
    }
    if t >= 64 {
        return Err(CoveringError::TooLarge {
            cells: u128::MAX,
            budget: MAX_CELLS,
        });
    }
    generate_random_family(n, m, 1usize << t, seed, tag::COVERING_FAMILY)
}

/// Hit sets `H(a, b)` for one line `b`, one bitmask over member indices per point.
#[derive(Clone, Debug)]
pub struct HitIndex {
    b: u32,
    count: usize,
    words: usize,
    points: usize,
    masks: Vec<u64>,
}

impl HitIndex {
    pub fn new(family: &Family, b: u32) -> Self {
        let count = family.len();
        let words = words_for(count);
        let points = 1usize << family.domain_bits();
        let mut masks = vec![0u64; points * words];
        for (i, member) in family.iter().enumerate() {
            for (a, cell) in member.cells().iter().enumerate() {
                if *cell == Some(b) {
                    masks[a * words + i / 64] |= 1 << (i % 64);
                }
            }
        }
        HitIndex {
            b,
            count,
            words,
            points,
            masks,
        }
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn words(&self) -> usize {
        self.words
    }

    /// `H(a, b)` as words.
    #[inline]
    pub fn mask(&self, a: usize) -> &[u64] {
        &self.masks[a * self.words..(a + 1) * self.words]
    }

    pub fn contains(&self, a: usize, i: usize) -> bool {
        self.mask(a)[i / 64] >> (i % 64) & 1 == 1
    }

    /// Number of points with `H(a, b) ⊆ removed`.
    pub fn uncovered(&self, removed: &[u64]) -> usize {
        (0..self.points)
            .filter(|&a| subset_words(self.mask(a), removed))
            .count()
    }
}

/// Removed set given as member indices, ascending.
pub type Removed = Vec<usize>;

fn indices_of(words: &[u64]) -> Removed {
    let mut out = Vec::new();
    for (wi, &w) in words.iter().enumerate() {
        let mut w = w;
        while w != 0 {
            out.push(wi * 64 + w.trailing_zeros() as usize);
            w &= w - 1;
        }
    }
    out
}

/// Worst uncovered count on line `b` over all removed sets of size
/// `floor(count / 2)`, with the first maximizing set in colex order.
pub fn worst_uncovered_exact(family: &Family, b: u32, limit: usize) -> Result<(usize, Removed), CoveringError> {
    let count = family.len();
    if count > limit || count > 63 {
        return Err(CoveringError::ExactLimit { count, limit });
    }
    let hits = HitIndex::new(family, b);
    // Collapse points to a multiset of masks; duplicates are common.
    let mut masks: Vec<u64> = (0..hits.points()).map(|a| hits.mask(a)[0]).collect();
    masks.sort_unstable();
    let mut groups: Vec<(u64, usize)> = Vec::new();
    for m in masks {
        match groups.last_mut() {
            Some((v, c)) if *v == m => *c += 1,
            _ => groups.push((m, 1)),
        }
    }
    let half = count / 2;
    let mut best = (0usize, 0u64);
    let mut first = true;
    let mut d: u64 = if half == 0 { 0 } else { (1u64 << half) - 1 };
    let end = 1u64 << count;
    loop {
        let unc: usize = groups.iter().filter(|(m, _)| m & !d == 0).map(|(_, c)| c).sum();
        if first || unc > best.0 {
            best = (unc, d);
            first = false;
        }
        if half == 0 {
            break;
        }
        // Gosper's hack: next larger integer with the same popcount
        let c = d & d.wrapping_neg();
        let r = d + c;
        d = (((r ^ d) >> 2) / c) | r;
        if d >= end {
            break;
        }
    }
    Ok((best.0, indices_of(&[best.1])))
}

/// Outcome of the randomized search on one line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SampledOutcome {
    pub sampled: usize,
    pub sampled_removed: Removed,
    pub greedy: usize,
    pub greedy_removed: Removed,
}

impl SampledOutcome {
    pub fn worst(&self) -> (usize, &Removed) {
        if self.greedy > self.sampled {
            (self.greedy, &self.greedy_removed)
        } else {
            (self.sampled, &self.sampled_removed)
        }
    }
}

/// Greedy removal: repeatedly add the member whose removal uncovers the most
/// new points (points whose remaining hit set is exactly that member).
pub fn greedy_removed(hits: &HitIndex) -> (usize, Removed) {
    let count = hits.count();
    let words = hits.words();
    let half = count / 2;
    let mut removed = vec![0u64; words];
    let mut gain = vec![0usize; count];
    let mut rest = vec![0u64; words];
    for _ in 0..half {
        gain.iter_mut().for_each(|g| *g = 0);
        for a in 0..hits.points() {
            let mut ones = 0u32;
            let mut at = 0usize;
            for (w, (h, d)) in hits.mask(a).iter().zip(&removed).enumerate() {
                rest[w] = h & !d;
                let c = rest[w].count_ones();
                if c == 1 && ones == 0 {
                    at = w * 64 + rest[w].trailing_zeros() as usize;
                }
                ones += c;
            }
            if ones == 1 {
                gain[at] += 1;
            }
        }
        let mut pick = None;
        for (i, &g) in gain.iter().enumerate() {
            if removed[i / 64] >> (i % 64) & 1 == 1 {
                continue;
            }
            if pick.is_none_or(|(_, best)| g > best) {
                pick = Some((i, g));
            }
        }
        let (i, _) = pick.expect("half never exceeds count");
        removed[i / 64] |= 1 << (i % 64);
    }
    (hits.uncovered(&removed), indices_of(&removed))
}

/// Uniform random removed set of size `half` via a partial Fisher-Yates shuffle.
fn random_removed(rng: &mut impl Rng, perm: &mut [usize], half: usize, out: &mut [u64]) {
    for (i, p) in perm.iter_mut().enumerate() {
        *p = i;
    }
    out.iter_mut().for_each(|w| *w = 0);
    let n = perm.len();
    for i in 0..half {
        let j = rng.random_range(i..n);
        perm.swap(i, j);
        out[perm[i] / 64] |= 1 << (perm[i] % 64);
    }
}

/// Random and greedy lower bounds on the worst uncovered count of line `b`.
/// Trial `k` on line `b` uses sub-stream `(seed, b, k)`.
pub fn worst_uncovered_sampled(family: &Family, b: u32, trials: usize, seed: u64) -> SampledOutcome {
    let hits = HitIndex::new(family, b);
    let count = family.len();
    let half = count / 2;
    let mut perm = vec![0usize; count];
    let mut d = vec![0u64; hits.words()];
    let mut best: Option<(usize, Vec<u64>)> = None;
    for k in 0..trials.max(1) {
        let mut rng = rng_for(seed, &[tag::COVERING_TRIALS, b as u64, k as u64]);
        random_removed(&mut rng, &mut perm, half, &mut d);
        let unc = hits.uncovered(&d);
        if best.as_ref().is_none_or(|(u, _)| unc > *u) {
            best = Some((unc, d.clone()));
        }
    }
    let (sampled, sd) = best.expect("at least one trial");
    let (greedy, greedy_removed) = greedy_removed(&hits);
    SampledOutcome {
        sampled,
        sampled_removed: indices_of(&sd),
        greedy,
        greedy_removed,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

/// How [`verify_covering_property`] explores removed sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyConfig {
    /// `None` picks exact mode when the family fits under `exact_limit`.
    pub mode: Option<Mode>,
    pub exact_limit: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            mode: None,
            exact_limit: DEFAULT_EXACT_LIMIT,
            trials: DEFAULT_TRIALS,
            seed: 0,
        }
    }
}

impl VerifyConfig {
    pub fn resolve_mode(&self, count: usize) -> Mode {
        self.mode.unwrap_or(if count <= self.exact_limit {
            Mode::Exact
        } else {
            Mode::Sampled
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LineResult {
    pub b: u32,
    pub worst: usize,
    pub removed: Removed,
}

/// Worst uncovered count on one line under the chosen mode.
pub fn verify_line(family: &Family, b: u32, mode: Mode, config: &VerifyConfig) -> Result<LineResult, CoveringError> {
    let (worst, removed) = match mode {
        Mode::Exact => worst_uncovered_exact(family, b, config.exact_limit)?,
        Mode::Sampled => {
            let out = worst_uncovered_sampled(family, b, config.trials, config.seed);
            let (w, d) = out.worst();
            (w, d.clone())
        }
    };
    Ok(LineResult { b, worst, removed })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoveringReport {
    pub mode: Mode,
    pub s: u64,
    pub threshold: u64,
    pub per_b: Vec<LineResult>,
    pub worst: usize,
    pub witness_b: u32,
    #[serde(rename = "witness_D")]
    pub witness_removed: Removed,
    pub verdict: Verdict,
}

/// Combines per-line results; the witness is the first line attaining the worst count.
pub fn assemble_report(mode: Mode, s: u64, codomain_bits: u32, mut per_b: Vec<LineResult>) -> CoveringReport {
    per_b.sort_by_key(|l| l.b);
    let threshold = s.saturating_mul(1u64 << codomain_bits);
    let mut worst_line: Option<&LineResult> = None;
    for l in &per_b {
        if worst_line.is_none_or(|w| l.worst > w.worst) {
            worst_line = Some(l);
        }
    }
    let (worst, witness_b, witness_removed) =
        worst_line.map_or((0, 0, Vec::new()), |l| (l.worst, l.b, l.removed.clone()));
    CoveringReport {
        mode,
        s,
        threshold,
        worst,
        witness_b,
        witness_removed,
        verdict: Verdict::from_pass((worst as u64) < threshold),
        per_b,
    }
}

/// Checks every line `b` of the family against the threshold `s * 2^m`.
pub fn verify_covering_property(
    family: &Family,
    s: u64,
    config: &VerifyConfig,
) -> Result<CoveringReport, CoveringError> {
    if family.codomain_bits() > 20 {
        return Err(CoveringError::InvalidParams(
            "line scan supports at most 20 codomain bits",
        ));
    }
    let mode = config.resolve_mode(family.len());
    let per_b = (0..1u32 << family.codomain_bits())
        .map(|b| verify_line(family, b, mode, config))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble_report(mode, s, family.codomain_bits(), per_b))
}
