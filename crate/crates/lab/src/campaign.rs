//! Parallel campaign drivers. Every unit of work draws from its own seeded
//! sub-stream, so results do not depend on the thread count.

use std::collections::BTreeMap;

use muchnik_core::bits::{BitString, Family};
use muchnik_core::covering::{
    assemble_report, generate_covering_family, verify_line, CoveringError, CoveringReport, Verdict, VerifyConfig,
};
use muchnik_core::messaging::{
    build_message, message_advice, replay_candidates, secrecy_report, xor_encode, MessagingError, SecrecyReport,
    C_MACHINE,
};
use muchnik_core::oracle::Oracle;
use muchnik_core::ratio::Rational;
use muchnik_core::rejection::{
    adversarial_f, adversarial_h, generate_rejection_family, random_f, random_h, uncovered_pairs, HMap, RejectionError,
};
use rayon::prelude::*;
use serde::Serialize;

/// Runs `f` on a pool of `threads` workers, or the global pool for `None`.
pub fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, rayon::ThreadPoolBuildError> {
    match threads {
        None => Ok(f()),
        Some(k) => Ok(rayon::ThreadPoolBuilder::new().num_threads(k).build()?.install(f)),
    }
}

/// [`muchnik_core::covering::verify_covering_property`] with lines checked in parallel.
pub fn verify_covering_parallel(
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
        .into_par_iter()
        .map(|b| verify_line(family, b, mode, config))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble_report(mode, s, family.codomain_bits(), per_b))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FamilyOutcome {
    pub seed: u64,
    pub worst: usize,
    pub witness_b: u32,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoveringCampaign {
    pub m: u32,
    pub n: u32,
    pub s: u64,
    pub t: u32,
    pub threshold: u64,
    pub families: Vec<FamilyOutcome>,
    pub failures: usize,
}

/// Family `i` uses seed `seed + i` for both generation and sampling.
pub fn covering_campaign(
    m: u32,
    n: u32,
    s: u64,
    t: u32,
    count: usize,
    seed: u64,
    config: &VerifyConfig,
) -> Result<CoveringCampaign, CoveringError> {
    let families = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let fseed = seed.wrapping_add(i);
            let family = generate_covering_family(m, n, t, fseed)?;
            let cfg = VerifyConfig { seed: fseed, ..*config };
            let r = verify_covering_parallel(&family, s, &cfg)?;
            Ok(FamilyOutcome {
                seed: fseed,
                worst: r.worst,
                witness_b: r.witness_b,
                verdict: r.verdict,
            })
        })
        .collect::<Result<Vec<_>, CoveringError>>()?;
    let failures = families.iter().filter(|f| !f.verdict.is_pass()).count();
    Ok(CoveringCampaign {
        m,
        n,
        s,
        t,
        threshold: s.saturating_mul(1 << m),
        families,
        failures,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FKind {
    Random,
    Adversarial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HKind {
    Empty,
    Random,
    Adversarial,
}

pub fn make_f(kind: FKind, c: &Family, count: usize, seed: u64) -> Result<Family, RejectionError> {
    match kind {
        FKind::Random => random_f(c.domain_bits(), c.codomain_bits(), count, seed),
        FKind::Adversarial => adversarial_f(c, count, seed),
    }
}

pub fn make_h(kind: HKind, c: &Family, f: &Family, budget: usize, seed: u64) -> Result<HMap, RejectionError> {
    let b_count = 1usize << c.codomain_bits();
    match kind {
        HKind::Empty => Ok(HMap::empty(b_count)),
        HKind::Random => random_h(c.len(), b_count, budget, seed),
        HKind::Adversarial => adversarial_h(c, f, budget),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RejectionRun {
    pub seed: u64,
    pub uncovered: u64,
    pub fraction: f64,
    pub rejected: usize,
    pub verdict: Verdict,
    /// Uncovered count with a random `h` of the same budget, for comparison.
    pub uncovered_random_h: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RejectionCampaign {
    pub a_size: u64,
    pub b_size: u64,
    pub epsilon: Rational,
    pub phi: u64,
    pub c_size: usize,
    pub f_kind: FKind,
    pub h_kind: HKind,
    pub h_budget: usize,
    pub runs: Vec<RejectionRun>,
    pub passes: usize,
}

/// Run `i` draws `C`, `F` and `h` from seed `seed + i`.
#[allow(clippy::too_many_arguments)]
pub fn rejection_campaign(
    a_size: u64,
    b_size: u64,
    epsilon: Rational,
    phi: u64,
    f_kind: FKind,
    h_kind: HKind,
    runs: usize,
    seed: u64,
) -> Result<RejectionCampaign, RejectionError> {
    let out = (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i);
            let c = generate_rejection_family(a_size, b_size, epsilon, phi, s)?;
            let budget = c.len() / 4;
            let f = make_f(f_kind, &c, phi as usize, s)?;
            let h = make_h(h_kind, &c, &f, budget, s)?;
            let r = uncovered_pairs(&c, &f, &h, epsilon, phi)?;
            let hr = random_h(c.len(), b_size as usize, budget, s)?;
            let rr = uncovered_pairs(&c, &f, &hr, epsilon, phi)?;
            Ok((
                c.len(),
                RejectionRun {
                    seed: s,
                    uncovered: r.uncovered,
                    fraction: r.fraction,
                    rejected: r.rejected_members.len(),
                    verdict: r.verdict,
                    uncovered_random_h: rr.uncovered,
                },
            ))
        })
        .collect::<Result<Vec<_>, RejectionError>>()?;
    let c_size = out.first().map_or(0, |(c, _)| *c);
    let runs: Vec<RejectionRun> = out.into_iter().map(|(_, r)| r).collect();
    let passes = runs.iter().filter(|r| r.verdict.is_pass()).count();
    Ok(RejectionCampaign {
        a_size,
        b_size,
        epsilon,
        phi,
        c_size,
        f_kind,
        h_kind,
        h_budget: c_size / 4,
        runs,
        passes,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MessageRow {
    pub a: BitString,
    pub b: BitString,
    pub f: BitString,
    pub ordinal: usize,
    pub candidates: usize,
    pub secrecy: SecrecyReport,
    /// `K(b | a ^ b)` for the one-time-pad message.
    pub k_b_given_xor: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MessageSummary {
    pub pairs: usize,
    pub ambiguous: usize,
    pub max_candidates: usize,
    pub max_excess: i64,
    pub c_machine: i64,
    pub upper_holds: bool,
    /// `min(K(a), K(b)) - K(b | f)` -> number of pairs.
    pub slack_histogram: BTreeMap<i64, usize>,
    /// Pairs with `a` not constant, and how many of them keep `K(b | a ^ b)` within 2 of `K(b)`.
    pub xor_pairs: usize,
    pub xor_within_2: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MessageCampaign {
    pub summary: MessageSummary,
    pub rows: Vec<MessageRow>,
}

fn message_row(a: &BitString, b: &BitString, oracle: &mut Oracle) -> Result<MessageRow, MessagingError> {
    let msg = build_message(a, b, oracle)?;
    let candidates = replay_candidates(&msg.f, a, b.len(), oracle)?.len();
    let advice = message_advice(&msg.f, a, b, oracle)?;
    let secrecy = secrecy_report(a, b, &msg.f, oracle)?;
    let x = xor_encode(a, b)?;
    let l_max = oracle.config().l_max;
    let k_b_given_xor = oracle
        .search_within(b, &x, l_max)
        .ok_or(MessagingError::NotFound(*b))?
        .k;
    Ok(MessageRow {
        a: *a,
        b: *b,
        f: msg.f,
        ordinal: advice.ordinal,
        candidates,
        secrecy,
        k_b_given_xor,
    })
}

/// Builds, replays and measures the message for every listed pair.
/// Each worker starts from a clone of `oracle`.
pub fn message_campaign(pairs: &[(BitString, BitString)], oracle: &Oracle) -> Result<MessageCampaign, MessagingError> {
    let rows = pairs
        .par_iter()
        .map_init(|| oracle.clone(), |o, (a, b)| message_row(a, b, o))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MessageCampaign {
        summary: summarize(&rows),
        rows,
    })
}

/// All pairs of `len`-bit strings in `(a, b)` order.
pub fn all_pairs(len: usize) -> Vec<(BitString, BitString)> {
    BitString::all_of_len(len)
        .flat_map(|a| BitString::all_of_len(len).map(move |b| (a, b)))
        .collect()
}

fn summarize(rows: &[MessageRow]) -> MessageSummary {
    let mut slack_histogram = BTreeMap::new();
    let mut max_excess = i64::MIN;
    let (mut xor_pairs, mut xor_within_2) = (0, 0);
    for r in rows {
        *slack_histogram.entry(r.secrecy.slack).or_insert(0) += 1;
        max_excess = max_excess.max(-r.secrecy.slack);
        let a_const = r.a == BitString::zeros(r.a.len()) || r.a == BitString::ones(r.a.len());
        if !a_const {
            xor_pairs += 1;
            if r.k_b_given_xor + 2 >= r.secrecy.k_b {
                xor_within_2 += 1;
            }
        }
    }
    MessageSummary {
        pairs: rows.len(),
        ambiguous: rows.iter().filter(|r| r.candidates > 1).count(),
        max_candidates: rows.iter().map(|r| r.candidates).max().unwrap_or(0),
        max_excess: if rows.is_empty() { 0 } else { max_excess },
        c_machine: C_MACHINE,
        upper_holds: rows.iter().all(|r| r.secrecy.upper_holds),
        slack_histogram,
        xor_pairs,
        xor_within_2,
    }
}
