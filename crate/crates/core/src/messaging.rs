//! Secret messages: the fresh-pair filter, the XOR message `f = a'' ^ b'`,
//! its decoder, secrecy measurements and the two explicit XOR counterexamples.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::Serialize;
use thiserror::Error;

use crate::bits::{BitString, UniverseError};
use crate::oracle::{pair, programs_of_len, run, Oracle, OracleError, Outcome};

/// Frozen upper-bound slack: `K(b | f) <= min(K(a), K(b)) + C_MACHINE` for
/// every message `f` mapping `a` to `b`. Measured over all 256 pairs of 4-bit
/// strings, where the largest excess is 0.
pub const C_MACHINE: i64 = 0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MessagingError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Universe(#[from] UniverseError),
    #[error("no program within the search budget prints {0}")]
    NotFound(BitString),
    #[error("no candidate of {len} bits replays to the given message")]
    ReplayFailure { len: usize },
    #[error("split needs an even length, got {0}")]
    OddLength(usize),
}

/// The kept pairs of the fresh-pair filter: the graph of a partial bijection.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FreshBijection {
    kept: Vec<(BitString, BitString)>,
    firsts: BTreeSet<BitString>,
    seconds: BTreeSet<BitString>,
}

impl FreshBijection {
    pub fn new() -> Self {
        Self::default()
    }

    /// Keeps `(a, b)` iff neither coordinate occurs among kept pairs.
    pub fn offer(&mut self, a: BitString, b: BitString) -> bool {
        if self.firsts.contains(&a) || self.seconds.contains(&b) {
            return false;
        }
        self.firsts.insert(a);
        self.seconds.insert(b);
        self.kept.push((a, b));
        true
    }

    pub fn pairs(&self) -> &[(BitString, BitString)] {
        &self.kept
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn has_first(&self, a: &BitString) -> bool {
        self.firsts.contains(a)
    }

    pub fn has_second(&self, b: &BitString) -> bool {
        self.seconds.contains(b)
    }
}

pub fn fresh_filter<I: IntoIterator<Item = (BitString, BitString)>>(pairs: I) -> FreshBijection {
    let mut out = FreshBijection::new();
    for (a, b) in pairs {
        out.offer(a, b);
    }
    out
}

/// A shortest description of `b` given `a`, chosen to be simple given `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MuchnikCode {
    pub code: BitString,
    /// `|code| = K(b | a)`.
    pub k_given_a: usize,
    /// `K(code | b)`, if found within the budget.
    pub k_code_given_b: Option<usize>,
    /// Number of shortest witnesses compared.
    pub candidates: usize,
}

/// Among all shortest programs printing `b` on `a`, the one minimizing
/// `K(p | b)`, ties to the lexicographically first.
pub fn muchnik_code(b: &BitString, a: &BitString, oracle: &mut Oracle) -> Result<MuchnikCode, MessagingError> {
    let k = oracle.cond_complexity(b, a)?.ok_or(MessagingError::NotFound(*b))?.k;
    let steps = oracle.config().steps;
    let l_max = oracle.config().l_max;
    let witnesses: Vec<BitString> = programs_of_len(k)
        .filter(|p| run(p, a, steps) == Outcome::Halted(*b))
        .collect();
    let mut best: Option<(usize, BitString, Option<usize>)> = None;
    for p in &witnesses {
        let kp = oracle.search_within(p, b, l_max).map(|w| w.k);
        let key = kp.unwrap_or(usize::MAX);
        if best.as_ref().is_none_or(|(bk, _, _)| key < *bk) {
            best = Some((key, *p, kp));
        }
    }
    let (_, code, k_code_given_b) = best.expect("the search witness is among them");
    Ok(MuchnikCode {
        code,
        k_given_a: k,
        k_code_given_b,
        candidates: witnesses.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Message {
    pub f: BitString,
    /// `b'`, a shortest description of `b` given `a`.
    pub b_code: BitString,
    /// `a'`, a shortest description of `a` given `b`.
    pub a_code: BitString,
    /// `a'` fitted to `|b'|` bits.
    pub a_fit: BitString,
}

/// `f = fit(a', |b'|) ^ b'` with `b' = code(b | a)` and `a' = code(a | b)`.
pub fn build_message(a: &BitString, b: &BitString, oracle: &mut Oracle) -> Result<Message, MessagingError> {
    let b_code = muchnik_code(b, a, oracle)?.code;
    let a_code = muchnik_code(a, b, oracle)?.code;
    let a_fit = a_code.fit_length(b_code.len());
    Ok(Message {
        f: a_fit.xor(&b_code)?,
        b_code,
        a_code,
        a_fit,
    })
}

/// Side information for the decoder: the length of `b` and the ordinal of
/// `b` among the candidates that replay to the same message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Advice {
    pub b_len: usize,
    pub ordinal: usize,
}

impl Advice {
    /// Bits needed to name the ordinal among `count` candidates.
    pub fn ordinal_bits(count: usize) -> usize {
        if count <= 1 {
            0
        } else {
            (usize::BITS - (count - 1).leading_zeros()) as usize
        }
    }
}

/// Every `b_len`-bit candidate whose encoder replay reproduces `f` and whose
/// `b' = f ^ a''` prints it on `a`, in enumeration order.
pub fn replay_candidates(
    f: &BitString,
    a: &BitString,
    b_len: usize,
    oracle: &mut Oracle,
) -> Result<Vec<BitString>, MessagingError> {
    let steps = oracle.config().steps;
    let mut found = Vec::new();
    for cand in BitString::all_of_len(b_len) {
        let msg = build_message(a, &cand, oracle)?;
        if msg.f != *f {
            continue;
        }
        let b_code = f.xor(&msg.a_fit)?;
        if run(&b_code, a, steps) == Outcome::Halted(cand) {
            found.push(cand);
        }
    }
    Ok(found)
}

/// The advice that lets [`decode_message`] single out `b`.
pub fn message_advice(
    f: &BitString,
    a: &BitString,
    b: &BitString,
    oracle: &mut Oracle,
) -> Result<Advice, MessagingError> {
    let found = replay_candidates(f, a, b.len(), oracle)?;
    let ordinal = found
        .iter()
        .position(|c| c == b)
        .ok_or(MessagingError::ReplayFailure { len: b.len() })?;
    Ok(Advice {
        b_len: b.len(),
        ordinal,
    })
}

/// Recovers `b` from `f` and `a` by replaying the encoder on every candidate
/// of `advice.b_len` bits and taking the `advice.ordinal`-th match.
pub fn decode_message(
    f: &BitString,
    a: &BitString,
    advice: &Advice,
    oracle: &mut Oracle,
) -> Result<BitString, MessagingError> {
    replay_candidates(f, a, advice.b_len, oracle)?
        .get(advice.ordinal)
        .copied()
        .ok_or(MessagingError::ReplayFailure { len: advice.b_len })
}

/// The one-time-pad fallback `f = a ^ b`.
pub fn xor_encode(a: &BitString, b: &BitString) -> Result<BitString, MessagingError> {
    Ok(a.xor(b)?)
}

pub fn xor_decode(a: &BitString, f: &BitString) -> Result<BitString, MessagingError> {
    Ok(a.xor(f)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SecrecyReport {
    pub k_a: usize,
    pub k_b: usize,
    pub k_b_given_a: usize,
    pub f_len: usize,
    pub k_b_given_f: usize,
    /// `K(b | <a, f>)` under the pairing `1^|a| 0 a f`.
    pub k_b_given_af: usize,
    pub min_ab: usize,
    /// `min(K(a), K(b)) - K(b | f)`.
    pub slack: i64,
    /// Whether `K(b | f) <= min(K(a), K(b)) + C_MACHINE`.
    pub upper_holds: bool,
}

fn k(oracle: &mut Oracle, y: &BitString, x: &BitString) -> Result<usize, MessagingError> {
    let l_max = oracle.config().l_max;
    Ok(oracle.search_within(y, x, l_max).ok_or(MessagingError::NotFound(*y))?.k)
}

pub fn secrecy_report(
    a: &BitString,
    b: &BitString,
    f: &BitString,
    oracle: &mut Oracle,
) -> Result<SecrecyReport, MessagingError> {
    let empty = BitString::empty();
    let k_a = k(oracle, a, &empty)?;
    let k_b = k(oracle, b, &empty)?;
    let k_b_given_a = k(oracle, b, a)?;
    let k_b_given_f = k(oracle, b, f)?;
    let k_b_given_af = k(oracle, b, &pair(a, f)?)?;
    let min_ab = k_a.min(k_b);
    Ok(SecrecyReport {
        k_a,
        k_b,
        k_b_given_a,
        f_len: f.len(),
        k_b_given_f,
        k_b_given_af,
        min_ab,
        slack: min_ab as i64 - k_b_given_f as i64,
        upper_holds: k_b_given_f as i64 <= min_ab as i64 + C_MACHINE,
    })
}

fn halves(s: &BitString) -> Result<(BitString, BitString), MessagingError> {
    if !s.len().is_multiple_of(2) {
        return Err(MessagingError::OddLength(s.len()));
    }
    let h = s.len() / 2;
    Ok((s.slice(0, h), s.slice(h, s.len())))
}

fn x3(p: &BitString, q: &BitString, r: &BitString) -> BitString {
    p.xor(q).and_then(|t| t.xor(r)).expect("equal halves")
}

/// `c = (a1 ^ a2 ^ b1)(a2 ^ b1 ^ b2)` on half-strings.
pub fn bad_condition(a: &BitString, b: &BitString) -> Result<BitString, MessagingError> {
    if a.len() != b.len() {
        return Err(UniverseError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        }
        .into());
    }
    let (a1, a2) = halves(a)?;
    let (b1, b2) = halves(b)?;
    Ok(x3(&a1, &a2, &b1).concat(&x3(&a2, &b1, &b2))?)
}

/// Recovers `(a, b)` from `c` and `x = a ^ b`.
pub fn bad_condition_decode(c: &BitString, x: &BitString) -> Result<(BitString, BitString), MessagingError> {
    if c.len() != x.len() {
        return Err(UniverseError::LengthMismatch {
            left: c.len(),
            right: x.len(),
        }
        .into());
    }
    let (c1, c2) = halves(c)?;
    let (x1, x2) = halves(x)?;
    let a2 = c1.xor(&x1)?;
    let b2 = x2.xor(&a2)?;
    let b1 = x3(&c2, &a2, &b2);
    let a1 = x1.xor(&b1)?;
    Ok((a1.concat(&a2)?, b1.concat(&b2)?))
}
