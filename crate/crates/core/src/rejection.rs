//! Rejection and pair-covering over families `A -> B` with `A = B^n`, `B = B^m`.
//!
//! A family `F` rejects `c` when some member agrees with `c` on more than
//! `4|A|/|B|` points. `c` covers `(a, b)` when `c(a) = b`, `c` is not rejected
//! and `c` is not listed in `h(b)`. Partial tables are completed with zeros
//! before any agreement count.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::{Rng, RngCore};
use serde::Serialize;
use thiserror::Error;

use crate::bits::{BitPlanes, BitString, Family, FunctionTable, UniverseError};
use crate::bounds::{rejection_family_size, BoundsError};
use crate::covering::{generate_random_family, CoveringError, Verdict};
use crate::ratio::Rational;
use crate::rng::{rng_for, tag};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RejectionError {
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Universe(#[from] UniverseError),
    #[error(transparent)]
    Generation(#[from] CoveringError),
    #[error("{what} = {value} is not a power of two")]
    NotPowerOfTwo { what: &'static str, value: u64 },
    #[error("|h(b)| <= floor(|C|/4) fails for b = {b}: {size} > {max}")]
    HMapBudget { b: u32, size: usize, max: usize },
    #[error("h(b) for b = {b} lists index {index} outside a family of {count}")]
    HMapIndex { b: u32, index: usize, count: usize },
    #[error("h has {found} lines, expected {expected}")]
    HMapShape { expected: usize, found: usize },
    #[error("|F| <= Phi fails: {len} > {phi}")]
    PhiExceeded { len: usize, phi: u64 },
}

/// The rejection threshold `4|A|/|B|`, compared exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RejectionThreshold {
    a_size: u64,
    b_size: u64,
}

impl RejectionThreshold {
    pub fn new(a_size: u64, b_size: u64) -> Self {
        assert!(b_size > 0, "empty codomain");
        RejectionThreshold { a_size, b_size }
    }

    pub fn for_signature(domain_bits: u32, codomain_bits: u32) -> Self {
        Self::new(1 << domain_bits, 1 << codomain_bits)
    }

    pub fn value(&self) -> Rational {
        Rational::new(4 * self.a_size, self.b_size).expect("positive denominator")
    }

    /// Strict excess: `overlap > 4|A|/|B|`.
    #[inline]
    pub fn exceeded_by(&self, overlap: usize) -> bool {
        overlap as u128 * self.b_size as u128 > 4 * self.a_size as u128
    }

    /// Largest overlap that does not reject.
    pub fn max_allowed(&self) -> u64 {
        4 * self.a_size / self.b_size
    }
}

fn check_signature(x: &FunctionTable, y: &FunctionTable) -> Result<(), UniverseError> {
    if x.signature() != y.signature() {
        return Err(UniverseError::Signature {
            expected: x.signature(),
            found: y.signature(),
        });
    }
    Ok(())
}

/// `|{a : c(a) = f(a)}|` after completing both tables with zeros.
pub fn overlap_count(c: &FunctionTable, f: &FunctionTable) -> Result<usize, UniverseError> {
    check_signature(c, f)?;
    Ok(c.values_completed()
        .zip(f.values_completed())
        .filter(|(x, y)| x == y)
        .count())
}

/// Index of the first member of `f` that rejects `c`, if any.
pub fn is_rejected(c: &FunctionTable, f: &Family) -> Result<Option<usize>, UniverseError> {
    let th = RejectionThreshold::for_signature(c.domain_bits(), c.codomain_bits());
    for (i, member) in f.iter().enumerate() {
        if th.exceeded_by(overlap_count(c, member)?) {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

/// The per-line exclusion map `h`: for each `b`, a set of member indices of `C`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct HMap {
    lines: Vec<Vec<usize>>,
}

impl HMap {
    pub fn empty(b_count: usize) -> Self {
        HMap {
            lines: vec![Vec::new(); b_count],
        }
    }

    /// Builds from explicit lines; each line is sorted and deduplicated.
    pub fn from_lines(lines: Vec<Vec<usize>>) -> Self {
        let lines = lines
            .into_iter()
            .map(|mut l| {
                l.sort_unstable();
                l.dedup();
                l
            })
            .collect();
        HMap { lines }
    }

    pub fn b_count(&self) -> usize {
        self.lines.len()
    }

    pub fn line(&self, b: u32) -> &[usize] {
        &self.lines[b as usize]
    }

    pub fn lines(&self) -> &[Vec<usize>] {
        &self.lines
    }

    pub fn contains(&self, b: u32, index: usize) -> bool {
        self.lines[b as usize].binary_search(&index).is_ok()
    }

    /// Checks the line count, index range and `|h(b)| <= floor(|C|/4)`.
    pub fn validate(&self, b_count: usize, c_count: usize) -> Result<(), RejectionError> {
        if self.lines.len() != b_count {
            return Err(RejectionError::HMapShape {
                expected: b_count,
                found: self.lines.len(),
            });
        }
        let max = c_count / 4;
        for (b, line) in self.lines.iter().enumerate() {
            if line.len() > max {
                return Err(RejectionError::HMapBudget {
                    b: b as u32,
                    size: line.len(),
                    max,
                });
            }
            if let Some(&index) = line.iter().find(|&&i| i >= c_count) {
                return Err(RejectionError::HMapIndex {
                    b: b as u32,
                    index,
                    count: c_count,
                });
            }
        }
        Ok(())
    }
}

/// Clauses (1)-(3): `c(a) = b`, `c` not rejected by `f`, `c_index` not in `h(b)`.
pub fn covers(
    c: &FunctionTable,
    a: &BitString,
    b: &BitString,
    f: &Family,
    h: &HMap,
    c_index: usize,
) -> Result<bool, UniverseError> {
    if c.eval(a)? != Some(*b) {
        return Ok(false);
    }
    if is_rejected(c, f)?.is_some() {
        return Ok(false);
    }
    Ok(!h.contains(b.value() as u32, c_index))
}

fn log2_exact(what: &'static str, value: u64) -> Result<u32, RejectionError> {
    if !value.is_power_of_two() {
        return Err(RejectionError::NotPowerOfTwo { what, value });
    }
    Ok(value.trailing_zeros())
}

/// A random family `C` of the lemma's size with cube domain and codomain.
pub fn generate_rejection_family(
    a_size: u64,
    b_size: u64,
    epsilon: Rational,
    phi: u64,
    seed: u64,
) -> Result<Family, RejectionError> {
    let n = log2_exact("|A|", a_size)?;
    let m = log2_exact("|B|", b_size)?;
    let size = rejection_family_size(a_size, b_size, epsilon, phi)?;
    Ok(generate_random_family(
        n,
        m,
        size as usize,
        seed,
        tag::REJECTION_FAMILY,
    )?)
}

/// Flags every member of `c` that some member of `f` rejects.
pub fn rejected_members(c: &Family, f: &Family) -> Result<Vec<bool>, UniverseError> {
    if !f.is_empty() && c.signature() != f.signature() {
        return Err(UniverseError::Signature {
            expected: c.signature(),
            found: f.signature(),
        });
    }
    let th = RejectionThreshold::for_signature(c.domain_bits(), c.codomain_bits());
    let size = 1usize << c.domain_bits();
    let f_planes: Vec<BitPlanes> = f.iter().map(BitPlanes::new).collect();
    let mut buf = Vec::new();
    Ok(c.iter()
        .map(|member| {
            let p = BitPlanes::new(member);
            buf.resize(p.words(), 0);
            f_planes.iter().any(|q| {
                p.agreement_into(q, size, &mut buf);
                th.exceeded_by(buf.iter().map(|w| w.count_ones() as usize).sum())
            })
        })
        .collect())
}

/// Covered points of line `b` as a bitset over `A`.
pub fn covered_line(c: &Family, planes: &[BitPlanes], rejected: &[bool], h: &HMap, b: u32) -> Vec<u64> {
    let size = 1usize << c.domain_bits();
    let words = size.div_ceil(64);
    let mut acc = vec![0u64; words];
    let mut buf = vec![0u64; words];
    for (i, p) in planes.iter().enumerate() {
        if rejected[i] || h.contains(b, i) {
            continue;
        }
        p.preimage_into(b, size, &mut buf);
        for (x, y) in acc.iter_mut().zip(&buf) {
            *x |= y;
        }
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoveragePairReport {
    pub uncovered: u64,
    pub pairs: u64,
    pub fraction: f64,
    pub epsilon: Rational,
    pub verdict: Verdict,
    pub rejected_members: Vec<usize>,
    pub f_count: usize,
    pub h_sizes: Vec<usize>,
}

/// Exhaustive scan of all `|A| |B|` pairs.
pub fn uncovered_pairs(
    c: &Family,
    f: &Family,
    h: &HMap,
    epsilon: Rational,
    phi: u64,
) -> Result<CoveragePairReport, RejectionError> {
    let b_count = 1usize << c.codomain_bits();
    h.validate(b_count, c.len())?;
    if f.len() as u64 > phi {
        return Err(RejectionError::PhiExceeded { len: f.len(), phi });
    }
    let rejected = rejected_members(c, f)?;
    let planes: Vec<BitPlanes> = c.iter().map(BitPlanes::new).collect();
    let a_size = 1u64 << c.domain_bits();
    let covered: u64 = (0..b_count as u32)
        .map(|b| {
            covered_line(c, &planes, &rejected, h, b)
                .iter()
                .map(|w| w.count_ones() as u64)
                .sum::<u64>()
        })
        .sum();
    let pairs = a_size * b_count as u64;
    Ok(pair_report(pairs - covered, pairs, epsilon, &rejected, f.len(), h))
}

/// Builds the report from a count; `uncovered / pairs <= epsilon` is decided exactly.
pub fn pair_report(
    uncovered: u64,
    pairs: u64,
    epsilon: Rational,
    rejected: &[bool],
    f_count: usize,
    h: &HMap,
) -> CoveragePairReport {
    let pass = uncovered as u128 * epsilon.den() as u128 <= epsilon.num() as u128 * pairs as u128;
    CoveragePairReport {
        uncovered,
        pairs,
        fraction: uncovered as f64 / pairs as f64,
        epsilon,
        verdict: Verdict::from_pass(pass),
        rejected_members: rejected
            .iter()
            .enumerate()
            .filter(|(_, r)| **r)
            .map(|(i, _)| i)
            .collect(),
        f_count,
        h_sizes: h.lines().iter().map(Vec::len).collect(),
    }
}

/// For each `b`, the `budget` non-rejected members with the largest preimage
/// of `b` (ties to the lowest index).
pub fn adversarial_h(c: &Family, f: &Family, budget: usize) -> Result<HMap, RejectionError> {
    let b_count = 1usize << c.codomain_bits();
    let max = c.len() / 4;
    if budget > max {
        return Err(RejectionError::HMapBudget {
            b: 0,
            size: budget,
            max,
        });
    }
    let rejected = rejected_members(c, f)?;
    let mut lines = Vec::with_capacity(b_count);
    for b in 0..b_count as u32 {
        let mut scored: Vec<(usize, usize)> = c
            .iter()
            .enumerate()
            .filter(|(i, _)| !rejected[*i])
            .map(|(i, t)| (t.values_completed().filter(|&v| v == b).count(), i))
            .collect();
        scored.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
        lines.push(scored.into_iter().take(budget).map(|(_, i)| i).collect());
    }
    Ok(HMap::from_lines(lines))
}

/// Uniform random `budget`-subsets of `0..c_count`, one per line.
pub fn random_h(c_count: usize, b_count: usize, budget: usize, seed: u64) -> Result<HMap, RejectionError> {
    let max = c_count / 4;
    if budget > max {
        return Err(RejectionError::HMapBudget {
            b: 0,
            size: budget,
            max,
        });
    }
    let lines = (0..b_count)
        .map(|b| {
            let mut rng = rng_for(seed, &[tag::RANDOM_H, b as u64]);
            sample(&mut rng, c_count, budget).into_vec()
        })
        .collect();
    Ok(HMap::from_lines(lines))
}

/// `count` uniform random total tables `B^n -> B^m`.
pub fn random_f(n: u32, m: u32, count: usize, seed: u64) -> Result<Family, RejectionError> {
    Ok(generate_random_family(n, m, count, seed, tag::RANDOM_F)?)
}

/// `count` tables each built from a random member of `c`: it keeps exactly the
/// largest non-rejecting overlap with its source and differs everywhere else,
/// so it sits right at the rejection threshold for that source.
pub fn adversarial_f(c: &Family, count: usize, seed: u64) -> Result<Family, RejectionError> {
    let (n, m) = c.signature();
    let mut out = Family::new(n, m)?;
    if c.is_empty() {
        return Ok(out);
    }
    let size = 1usize << n;
    let b_count = 1u64 << m;
    let keep = (RejectionThreshold::for_signature(n, m).max_allowed() as usize).min(size);
    for k in 0..count {
        let mut rng = rng_for(seed, &[tag::ADVERSARIAL_F, k as u64]);
        let src = c.get(rng.random_range(0..c.len())).expect("index in range");
        let mut agree = vec![false; size];
        for a in sample(&mut rng, size, keep) {
            agree[a] = true;
        }
        let values = src
            .values_completed()
            .zip(agree)
            .map(|(v, same)| {
                if same || b_count == 1 {
                    v
                } else {
                    // uniform over the other |B| - 1 values
                    let r = (rng.next_u64() % (b_count - 1)) as u32;
                    if r >= v {
                        r + 1
                    } else {
                        r
                    }
                }
            })
            .collect();
        out.push(FunctionTable::total(n, m, values)?)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(v: u128, len: usize) -> BitString {
        BitString::from_value(v, len).unwrap()
    }

    /// Second pass through the public `covers` predicate, pair by pair.
    fn naive_uncovered(c: &Family, f: &Family, h: &HMap) -> u64 {
        let (n, m) = c.signature();
        let mut count = 0;
        for b in 0..1u128 << m {
            for a in 0..1u128 << n {
                let covered = c
                    .iter()
                    .enumerate()
                    .any(|(i, t)| covers(t, &bs(a, n as usize), &bs(b, m as usize), f, h, i).unwrap());
                if !covered {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn threshold_is_exact() {
        let th = RejectionThreshold::new(128, 8);
        assert_eq!(th.value(), Rational::integer(64));
        assert!(!th.exceeded_by(64));
        assert!(th.exceeded_by(65));
        let odd = RejectionThreshold::new(10, 3);
        // 40/3 = 13.33
        assert!(!odd.exceeded_by(13) && odd.exceeded_by(14));
        assert_eq!(odd.max_allowed(), 13);
    }

    #[test]
    fn overlap_examples() {
        let c = FunctionTable::constant(7, 3, 5).unwrap();
        assert_eq!(overlap_count(&c, &c).unwrap(), 128);
        assert_eq!(
            overlap_count(&c, &FunctionTable::constant(7, 3, 4).unwrap()).unwrap(),
            0
        );
        // partial f is completed with zeros
        let z = FunctionTable::constant(7, 3, 0).unwrap();
        let u = FunctionTable::undefined(7, 3).unwrap();
        assert_eq!(overlap_count(&z, &u).unwrap(), 128);
        assert!(overlap_count(&c, &FunctionTable::constant(6, 3, 0).unwrap()).is_err());
    }

    #[test]
    fn rejection_examples() {
        let c = random_f(7, 3, 1, 3).unwrap();
        let t = c.get(0).unwrap();
        assert_eq!(is_rejected(t, &c).unwrap(), Some(0));
        assert_eq!(is_rejected(t, &Family::new(7, 3).unwrap()).unwrap(), None);
        // |A| = 32, |B| = 2: threshold 64 exceeds any overlap
        let small = random_f(5, 1, 8, 1).unwrap();
        for member in small.iter() {
            assert_eq!(is_rejected(member, &small).unwrap(), None);
        }
    }

    #[test]
    fn covers_clauses() {
        let t = FunctionTable::constant(3, 1, 1).unwrap();
        let empty = Family::new(3, 1).unwrap();
        let a = bs(5, 3);
        assert!(covers(&t, &a, &bs(1, 1), &empty, &HMap::empty(2), 0).unwrap());
        assert!(!covers(&t, &a, &bs(0, 1), &empty, &HMap::empty(2), 0).unwrap());
        let h = HMap::from_lines(vec![vec![], vec![0]]);
        assert!(!covers(&t, &a, &bs(1, 1), &empty, &h, 0).unwrap());
    }

    #[test]
    fn family_sizes() {
        let fam = generate_rejection_family(128, 8, Rational::new(1, 4).unwrap(), 16, 0).unwrap();
        assert_eq!(fam.len(), 2304);
        assert_eq!(fam.signature(), (7, 3));
        assert!(matches!(
            generate_rejection_family(96, 2, Rational::new(1, 4).unwrap(), 1, 0),
            Err(RejectionError::NotPowerOfTwo { .. })
        ));
        assert!(matches!(
            generate_rejection_family(16, 2, Rational::new(1, 2).unwrap(), 1, 0),
            Err(RejectionError::Bounds(BoundsError::Precondition(_)))
        ));
    }

    #[test]
    fn constants_cover_everything() {
        let members = (0..4).map(|b| FunctionTable::constant(4, 2, b).unwrap()).collect();
        let c = Family::from_members(4, 2, members).unwrap();
        let rep = uncovered_pairs(
            &c,
            &Family::new(4, 2).unwrap(),
            &HMap::empty(4),
            Rational::integer(1),
            1,
        )
        .unwrap();
        assert_eq!(rep.uncovered, 0);
        // budget 1 adversary knocks out each line's constant
        let h = adversarial_h(&c, &Family::new(4, 2).unwrap(), 1).unwrap();
        for b in 0..4 {
            assert_eq!(h.line(b), &[b as usize]);
        }
        let rep = uncovered_pairs(&c, &Family::new(4, 2).unwrap(), &h, Rational::integer(1), 1).unwrap();
        assert_eq!(rep.uncovered, 64);
        assert_eq!(
            adversarial_h(&c, &Family::new(4, 2).unwrap(), 0).unwrap(),
            HMap::from_lines(vec![vec![]; 4])
        );
    }

    #[test]
    fn empty_c_leaves_everything_uncovered() {
        let c = Family::new(4, 2).unwrap();
        let rep = uncovered_pairs(
            &c,
            &Family::new(4, 2).unwrap(),
            &HMap::empty(4),
            Rational::integer(1),
            0,
        )
        .unwrap();
        assert_eq!(rep.uncovered, 64);
        assert_eq!(rep.verdict, Verdict::Pass);
        assert_eq!(rep.fraction, 1.0);
    }

    #[test]
    fn hmap_invariants_enforced() {
        let c = random_f(4, 1, 8, 0).unwrap();
        let h = HMap::from_lines(vec![vec![0, 1, 2], vec![]]);
        let e = uncovered_pairs(&c, &Family::new(4, 1).unwrap(), &h, Rational::integer(1), 1).unwrap_err();
        assert!(matches!(e, RejectionError::HMapBudget { b: 0, size: 3, max: 2 }));
        let h = HMap::from_lines(vec![vec![9], vec![]]);
        assert!(matches!(h.validate(2, 8), Err(RejectionError::HMapIndex { .. })));
        let f = random_f(4, 1, 3, 0).unwrap();
        assert!(matches!(
            uncovered_pairs(&c, &f, &HMap::empty(2), Rational::integer(1), 2),
            Err(RejectionError::PhiExceeded { .. })
        ));
    }

    #[test]
    fn scan_matches_naive_second_pass() {
        for seed in 0..8 {
            // |A| = 32, |B| = 8: threshold 16, rejection can fire
            let c = random_f(5, 3, 24, seed).unwrap();
            let f = adversarial_f(&c, 3, seed).unwrap();
            for h in [
                HMap::empty(8),
                random_h(24, 8, 6, seed).unwrap(),
                adversarial_h(&c, &f, 6).unwrap(),
            ] {
                let rep = uncovered_pairs(&c, &f, &h, Rational::new(1, 2).unwrap(), 4).unwrap();
                assert_eq!(rep.uncovered, naive_uncovered(&c, &f, &h), "seed {seed}");
            }
        }
    }

    #[test]
    fn adversarial_f_sits_at_threshold() {
        let c = random_f(6, 2, 10, 1).unwrap();
        let f = adversarial_f(&c, 5, 2).unwrap();
        let th = RejectionThreshold::for_signature(6, 2);
        for member in f.iter() {
            let best = c.iter().map(|t| overlap_count(t, member).unwrap()).max().unwrap();
            assert!(best as u64 >= th.max_allowed());
        }
    }

    #[test]
    fn rejection_is_monotone_in_f() {
        let c = random_f(5, 3, 30, 4).unwrap();
        // adversarial members stay at the threshold; copies of C members exceed it
        let f = adversarial_f(&c, 6, 4).unwrap();
        let mut grown = Family::new(5, 3).unwrap();
        let mut prev = rejected_members(&c, &grown).unwrap();
        for t in f.iter().chain(c.iter().take(3)) {
            grown.push(t.clone()).unwrap();
            let now = rejected_members(&c, &grown).unwrap();
            assert!(prev.iter().zip(&now).all(|(p, n)| !p || *n));
            prev = now;
        }
        assert!(prev.iter().any(|&r| r));
    }

    #[test]
    fn overlap_mean_secondary_instance() {
        let a = random_f(7, 3, 1000, 1).unwrap();
        let b = random_f(7, 3, 1000, 2).unwrap();
        let total: usize = a.iter().zip(b.iter()).map(|(x, y)| overlap_count(x, y).unwrap()).sum();
        let mean = total as f64 / 1000.0;
        assert!((12.0..=20.0).contains(&mean), "{mean}");
    }
}
