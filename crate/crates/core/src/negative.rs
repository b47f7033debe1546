//! The negative-result pipeline: preconditions, the label-indexed family,
//! the per-line exclusion `h(b)`, counterexample conditions and the
//! eavesdropper's decode.
//!
//! Strings `a` have `m` bits and `b` have `n` bits, so the families here map
//! `B^m -> B^n`. Messages `f` are `l`-bit labels.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;
use thiserror::Error;

use crate::bits::{BitString, Family, FunctionTable, UniverseError};
use crate::bounds::{rejection_family_size, BoundsError};
use crate::oracle::{pair, ComplexitySource, OracleError};
use crate::ratio::Rational;
use crate::rejection::{generate_rejection_family, rejected_members, HMap, RejectionError, RejectionThreshold};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NegativeError {
    #[error("preconditions fail: {0}")]
    Preconditions(String),
    #[error("parameters out of desk range: {0}")]
    Range(&'static str),
    #[error("no fresh index left for label {label} (all {phi} indices in use)")]
    FreshIndexExhausted { label: BitString, phi: usize },
    #[error("no index labeled {label} maps {a} to {b}")]
    NotRealized {
        label: BitString,
        a: BitString,
        b: BitString,
    },
    #[error("{solutions} solutions exceed the bound {bound}")]
    SolutionBound { solutions: usize, bound: u64 },
    #[error("h needs |C| >= 8, got {0}")]
    SmallFamily(usize),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Universe(#[from] UniverseError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Rejection(#[from] RejectionError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NegativeParams {
    pub m: u32,
    pub n: u32,
    pub l: u32,
    pub alpha: u32,
}

impl NegativeParams {
    pub fn new(m: u32, n: u32, l: u32, alpha: u32) -> Self {
        NegativeParams { m, n, l, alpha }
    }

    pub fn big_n(&self) -> u32 {
        self.m.max(self.l)
    }

    /// `eps = 1 / m^alpha`.
    pub fn epsilon(&self) -> Result<Rational, NegativeError> {
        let den = (self.m as u64)
            .checked_pow(self.alpha)
            .ok_or(NegativeError::Range("m^alpha overflows"))?;
        Rational::new(1, den).map_err(|_| NegativeError::Range("m must be positive"))
    }

    /// `Phi = 2^(l+1) (l+1)`.
    pub fn phi(&self) -> Result<u64, NegativeError> {
        if self.l > 56 {
            return Err(NegativeError::Range("Phi overflows for l > 56"));
        }
        Ok((1u64 << (self.l + 1)) * (self.l as u64 + 1))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PreconditionItem {
    pub inequality: &'static str,
    pub holds: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PreconditionReport {
    pub items: Vec<PreconditionItem>,
    pub pass: bool,
}

impl PreconditionReport {
    pub fn failures(&self) -> String {
        let v: Vec<&str> = self.items.iter().filter(|i| !i.holds).map(|i| i.inequality).collect();
        v.join("; ")
    }
}

/// Evaluates `n >= 1`, `m >= n + 4`, `m - alpha log2 m >= n + 2` and
/// `l + 1 + log2(l + 1) <= 2^(m-n-2)` in integer arithmetic.
pub fn check_negative_preconditions(p: &NegativeParams) -> PreconditionReport {
    let (m, n, l, alpha) = (p.m as i128, p.n as i128, p.l as i128, p.alpha);
    let mut items = Vec::new();
    let mut push = |inequality, holds, detail: String| {
        items.push(PreconditionItem {
            inequality,
            holds,
            detail,
        })
    };
    push("n >= 1", n >= 1, format!("n = {n}"));
    push("m >= n + 4", m >= n + 4, format!("{m} >= {}", n + 4));
    // m - n - 2 >= alpha log2 m  <=>  2^(m-n-2) >= m^alpha
    let gap = m - n - 2;
    let third = if p.m == 0 || alpha == 0 || gap < 0 {
        false
    } else if gap >= 127 {
        true
    } else {
        match (m as u128).checked_pow(alpha) {
            Some(pw) => 1u128 << gap >= pw,
            None => false,
        }
    };
    push("m - alpha log2 m >= n + 2", third, format!("2^{gap} >= {m}^{alpha}"));
    // log2(l+1) <= 2^(m-n-2) - l - 1 =: r  <=>  l + 1 <= 2^r
    let fourth = if gap < 0 {
        false
    } else if gap >= 120 {
        true
    } else {
        let r = (1i128 << gap) - l - 1;
        r >= 0 && (r >= 120 || l < 1i128 << r)
    };
    push(
        "l + 1 + log2(l + 1) <= 2^(m-n-2)",
        fourth,
        format!("l = {l}, 2^(m-n-2) = 2^{gap}"),
    );
    let pass = items.iter().all(|i| i.holds);
    PreconditionReport { items, pass }
}

/// One enumerated triple and the index realizing it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LabeledTriple {
    pub a: BitString,
    pub b: BitString,
    pub f: BitString,
    pub k_f: usize,
    pub k_b: usize,
    pub index: usize,
}

impl LabeledTriple {
    pub fn cost(&self) -> usize {
        self.k_f + self.k_b
    }
}

/// `Phi` tables `B^m -> B^n` with optional `l`-bit labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledFamily {
    params: NegativeParams,
    partial: Vec<FunctionTable>,
    completed: Family,
    labels: Vec<Option<BitString>>,
    label_k: BTreeMap<BitString, usize>,
    triples: Vec<LabeledTriple>,
}

impl LabeledFamily {
    pub fn params(&self) -> &NegativeParams {
        &self.params
    }

    /// The completed tables (undefined cells set to zero).
    pub fn family(&self) -> &Family {
        &self.completed
    }

    /// The tables as built, before completion.
    pub fn partial(&self) -> &[FunctionTable] {
        &self.partial
    }

    pub fn labels(&self) -> &[Option<BitString>] {
        &self.labels
    }

    pub fn triples(&self) -> &[LabeledTriple] {
        &self.triples
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }

    /// Indices labeled `f`, in construction order.
    pub fn indices_labeled(&self, f: &BitString) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.as_ref() == Some(f))
            .map(|(i, _)| i)
            .collect()
    }

    /// Whether the built (pre-completion) table `index` maps `a` to `b`.
    pub fn realizes(&self, index: usize, a: &BitString, b: &BitString) -> bool {
        self.partial[index].get(a.index()) == Some(b.value() as u32)
    }

    pub fn invariants(&self) -> Result<LabelInvariants, NegativeError> {
        let l = self.params.l as usize;
        let phi = self.params.phi()? as usize;
        let mut per_label = Vec::new();
        for (f, &k) in &self.label_k {
            let used = self.indices_labeled(f).len();
            let cap = if k > l + 1 { 0 } else { 1u64 << (l + 1 - k) };
            per_label.push(LabelUsage {
                label: *f,
                k_f: k,
                used,
                cap,
            });
        }
        let labeled = self.labeled_count();
        let realized = self
            .triples
            .iter()
            .all(|t| self.labels[t.index] == Some(t.f) && self.realizes(t.index, &t.a, &t.b));
        let holds = realized && labeled <= phi && per_label.iter().all(|u| u.used as u64 <= u.cap);
        Ok(LabelInvariants {
            per_label,
            labeled,
            phi,
            all_realized: realized,
            holds,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LabelUsage {
    pub label: BitString,
    pub k_f: usize,
    pub used: usize,
    /// `2^(l - K(f) + 1)`.
    pub cap: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LabelInvariants {
    pub per_label: Vec<LabelUsage>,
    pub labeled: usize,
    pub phi: usize,
    pub all_realized: bool,
    pub holds: bool,
}

/// Enumerates triples `(a, b, f)` with `K(f) + K(b | <a, f>) <= l`, orders
/// them by cost then `(a, b, f)`, and assigns each to the first index labeled
/// `f` that is free or already correct at `a`, or else to a fresh index.
pub fn build_label_family<S: ComplexitySource>(
    p: &NegativeParams,
    source: &mut S,
) -> Result<LabeledFamily, NegativeError> {
    let report = check_negative_preconditions(p);
    if !report.pass {
        return Err(NegativeError::Preconditions(report.failures()));
    }
    if p.m > 12 || p.l > 8 || p.n > 8 {
        return Err(NegativeError::Range("desk scale needs m <= 12, n <= 8, l <= 8"));
    }
    let phi = p.phi()? as usize;
    let l = p.l as usize;
    let mut label_k = BTreeMap::new();
    let mut triples = Vec::new();
    for f in BitString::all_of_len(l) {
        let Some(k_f) = source.plain_within(&f, l)? else {
            continue;
        };
        for a in BitString::all_of_len(p.m as usize) {
            let cond = pair(&a, &f)?;
            for b in BitString::all_of_len(p.n as usize) {
                if let Some(k_b) = source.conditional_within(&b, &cond, l - k_f)? {
                    label_k.insert(f, k_f);
                    triples.push(LabeledTriple {
                        a,
                        b,
                        f,
                        k_f,
                        k_b,
                        index: usize::MAX,
                    });
                }
            }
        }
    }
    triples.sort_by_key(|x| (x.cost(), x.a, x.b, x.f));

    let mut partial = vec![FunctionTable::undefined(p.m, p.n)?; phi];
    let mut labels: Vec<Option<BitString>> = vec![None; phi];
    let mut by_label: BTreeMap<BitString, Vec<usize>> = BTreeMap::new();
    let mut fresh = 0usize;
    for t in triples.iter_mut() {
        let (ai, bv) = (t.a.index(), t.b.value() as u32);
        let slot = by_label.get(&t.f).and_then(|ids| {
            ids.iter()
                .copied()
                .find(|&i| partial[i].get(ai).is_none_or(|v| v == bv))
        });
        let index = match slot {
            Some(i) => i,
            None => {
                if fresh == phi {
                    return Err(NegativeError::FreshIndexExhausted { label: t.f, phi });
                }
                labels[fresh] = Some(t.f);
                by_label.entry(t.f).or_default().push(fresh);
                fresh += 1;
                fresh - 1
            }
        };
        partial[index].set(ai, bv)?;
        t.index = index;
    }
    let completed = Family::from_members(p.m, p.n, partial.iter().map(FunctionTable::completed).collect())?;
    Ok(LabeledFamily {
        params: *p,
        partial,
        completed,
        labels,
        label_k,
        triples,
    })
}

fn ceil_log2(x: usize) -> usize {
    if x <= 1 {
        0
    } else {
        (usize::BITS - (x - 1).leading_zeros()) as usize
    }
}

/// `{i : K(enc(i) | b) < log2|C| - 2}` with `enc(i)` the `ceil(log2 |C|)`-bit
/// binary of `i`. The threshold is decided exactly as `2^(K+2) < |C|`.
pub fn h_of_b<S: ComplexitySource>(c_count: usize, b: &BitString, source: &mut S) -> Result<Vec<usize>, NegativeError> {
    if c_count < 8 {
        return Err(NegativeError::SmallFamily(c_count));
    }
    let width = ceil_log2(c_count);
    // largest K with 2^(K+2) <= |C| - 1
    let k_max = (usize::BITS - 1 - (c_count - 1).leading_zeros()) as usize - 2;
    let mut out: Vec<usize> = source
        .describable_within(b, width, k_max)?
        .into_iter()
        .map(|s| s.value() as usize)
        .filter(|&i| i < c_count)
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// Lowest-index covering members, with the rejected set precomputed.
pub struct CounterexampleSearch<'a> {
    c: &'a Family,
    h: &'a HMap,
    rejected: Vec<bool>,
}

impl<'a> CounterexampleSearch<'a> {
    pub fn new(c: &'a Family, f: &Family, h: &'a HMap) -> Result<Self, NegativeError> {
        h.validate(1 << c.codomain_bits(), c.len())?;
        Ok(CounterexampleSearch {
            c,
            h,
            rejected: rejected_members(c, f)?,
        })
    }

    pub fn rejected(&self) -> &[bool] {
        &self.rejected
    }

    /// First member `c` with `c(a) = b`, not rejected and not in `h(b)`.
    pub fn find(&self, a: &BitString, b: &BitString) -> Option<usize> {
        let (ai, bv) = (a.index(), b.value() as u32);
        self.c
            .iter()
            .enumerate()
            .position(|(i, t)| t.get(ai).unwrap_or(0) == bv && !self.rejected[i] && !self.h.contains(bv, i))
    }
}

/// Single-shot form of [`CounterexampleSearch::find`].
pub fn find_counterexample_c(
    a: &BitString,
    b: &BitString,
    c: &Family,
    f: &Family,
    h: &HMap,
) -> Result<Option<usize>, NegativeError> {
    Ok(CounterexampleSearch::new(c, f, h)?.find(a, b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Eavesdrop {
    pub b: BitString,
    pub index: usize,
    pub label_ordinal: usize,
    pub label_count: usize,
    pub solutions: usize,
    pub solution_ordinal: usize,
    /// `ceil(log2 label_count) + ceil(log2 solutions)`.
    pub bits_used: usize,
}

/// Knowing `c` and the label, names the realizing index by its ordinal among
/// indices with that label and `a` by its ordinal among solutions of
/// `c(x) = f~(x)`, then reads `b = f~(a)`.
pub fn eavesdrop_decode(
    c: &FunctionTable,
    label: &BitString,
    family: &LabeledFamily,
    a_true: &BitString,
    b_true: &BitString,
    solution_bound: Option<u64>,
) -> Result<Eavesdrop, NegativeError> {
    let ids = family.indices_labeled(label);
    let not_realized = || NegativeError::NotRealized {
        label: *label,
        a: *a_true,
        b: *b_true,
    };
    let label_ordinal = ids
        .iter()
        .position(|&i| family.realizes(i, a_true, b_true))
        .ok_or_else(not_realized)?;
    let index = ids[label_ordinal];
    let ft = family.family().get(index).expect("labeled index in range");
    let solutions: Vec<usize> = c
        .values_completed()
        .zip(ft.values_completed())
        .enumerate()
        .filter(|(_, (x, y))| x == y)
        .map(|(a, _)| a)
        .collect();
    if let Some(bound) = solution_bound {
        if solutions.len() as u64 > bound {
            return Err(NegativeError::SolutionBound {
                solutions: solutions.len(),
                bound,
            });
        }
    }
    let solution_ordinal = solutions
        .iter()
        .position(|&a| a == a_true.index())
        .ok_or_else(not_realized)?;
    let b = BitString::from_value(
        ft.get(solutions[solution_ordinal]).unwrap_or(0) as u128,
        family.params.n as usize,
    )?;
    Ok(Eavesdrop {
        b,
        index,
        label_ordinal,
        label_count: ids.len(),
        solutions: solutions.len(),
        solution_ordinal,
        bits_used: ceil_log2(ids.len()) + ceil_log2(solutions.len()),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NegativeReport {
    pub params: NegativeParams,
    pub big_n: u32,
    pub epsilon: Rational,
    pub phi: u64,
    pub c_size: u64,
    pub seed: u64,
    pub preconditions: PreconditionReport,
    pub triples: usize,
    pub labels: LabelInvariants,
    pub h_sizes: Vec<usize>,
    pub h_budget: usize,
    pub h_ok: bool,
    pub rejected_members: usize,
    pub pairs: u64,
    pub covered: u64,
    pub covered_rate: f64,
    pub covered_ok: bool,
    pub counterexamples: usize,
    pub max_overlap: usize,
    pub overlap_bound: u64,
    pub overlap_ok: bool,
    pub eavesdrop_attempts: usize,
    pub eavesdrop_exact: usize,
    pub eavesdrop_max_bits: usize,
    pub eavesdrop_ok: bool,
    pub pass: bool,
}

/// Full run: family `C`, labeled family, `h`, the covered-pair scan, the
/// overlap bound for every counterexample, and the eavesdropper on every
/// covered pair that some label realizes.
pub fn run_negative_pipeline<S: ComplexitySource>(
    p: &NegativeParams,
    seed: u64,
    source: &mut S,
) -> Result<NegativeReport, NegativeError> {
    let preconditions = check_negative_preconditions(p);
    if !preconditions.pass {
        return Err(NegativeError::Preconditions(preconditions.failures()));
    }
    let epsilon = p.epsilon()?;
    let phi = p.phi()?;
    let (a_size, b_size) = (1u64 << p.m, 1u64 << p.n);
    let c_size = rejection_family_size(a_size, b_size, epsilon, phi)?;
    let c = generate_rejection_family(a_size, b_size, epsilon, phi, seed)?;
    let labeled = build_label_family(p, source)?;
    let labels = labeled.invariants()?;

    let mut lines = Vec::new();
    for b in BitString::all_of_len(p.n as usize) {
        lines.push(h_of_b(c.len(), &b, source)?);
    }
    let h = HMap::from_lines(lines);
    let h_budget = c.len() / 4;
    let h_sizes: Vec<usize> = h.lines().iter().map(Vec::len).collect();
    let h_ok = h_sizes.iter().all(|&s| s <= h_budget);

    let search = CounterexampleSearch::new(&c, labeled.family(), &h)?;
    let mut cover: BTreeMap<(usize, u32), usize> = BTreeMap::new();
    for a in BitString::all_of_len(p.m as usize) {
        for b in BitString::all_of_len(p.n as usize) {
            if let Some(i) = search.find(&a, &b) {
                cover.insert((a.index(), b.value() as u32), i);
            }
        }
    }
    let pairs = a_size * b_size;
    let covered = cover.len() as u64;
    // uncovered <= eps * pairs
    let uncovered = pairs - covered;
    let covered_ok = uncovered as u128 * epsilon.den() as u128 <= epsilon.num() as u128 * pairs as u128;

    let mut distinct: Vec<usize> = cover.values().copied().collect();
    distinct.sort_unstable();
    distinct.dedup();
    let overlap_bound = 1u64 << (p.m + 2 - p.n);
    let threshold = RejectionThreshold::new(a_size, b_size);
    let mut max_overlap = 0;
    for &ci in &distinct {
        let t = c.get(ci).expect("index in range");
        for member in labeled.family().iter() {
            let o = t
                .values_completed()
                .zip(member.values_completed())
                .filter(|(x, y)| x == y)
                .count();
            max_overlap = max_overlap.max(o);
        }
    }
    let overlap_ok = max_overlap as u64 <= overlap_bound && !threshold.exceeded_by(max_overlap);

    let mut attempts = 0;
    let mut exact = 0;
    let mut max_bits = 0;
    for t in labeled.triples() {
        let Some(&ci) = cover.get(&(t.a.index(), t.b.value() as u32)) else {
            continue;
        };
        attempts += 1;
        let e = eavesdrop_decode(c.get(ci).unwrap(), &t.f, &labeled, &t.a, &t.b, Some(overlap_bound))?;
        if e.b == t.b {
            exact += 1;
        }
        max_bits = max_bits.max(e.bits_used);
    }
    let eavesdrop_ok = exact == attempts;
    let pass = labels.holds && h_ok && covered_ok && overlap_ok && eavesdrop_ok;
    Ok(NegativeReport {
        params: *p,
        big_n: p.big_n(),
        epsilon,
        phi,
        c_size,
        seed,
        preconditions,
        triples: labeled.triples().len(),
        labels,
        h_sizes,
        h_budget,
        h_ok,
        rejected_members: search.rejected().iter().filter(|r| **r).count(),
        pairs,
        covered,
        covered_rate: covered as f64 / pairs as f64,
        covered_ok,
        counterexamples: distinct.len(),
        max_overlap,
        overlap_bound,
        overlap_ok,
        eavesdrop_attempts: attempts,
        eavesdrop_exact: exact,
        eavesdrop_max_bits: max_bits,
        eavesdrop_ok,
        pass,
    })
}
