//! Log2-domain failure bounds for the two probabilistic constructions, and
//! scans for the smallest parameters that make them drop below one.
//!
//! Every expression is evaluated in double-double arithmetic. The factor
//! `log2(1 - 2^-m)` uses the dedicated small-argument routine so large `m`
//! does not cancel to zero.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;
use thiserror::Error;

use crate::ddouble::DoubleDouble;
use crate::ratio::Rational;

/// Integers entering a bound must stay below this to be exact in double-double.
const EXACT_LIMIT: u128 = 1 << 104;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundsError {
    #[error("invalid parameter: {0}")]
    InvalidParams(&'static str),
    #[error("{0} overflows the exact double-double range")]
    Range(&'static str),
    #[error("precondition violated: {0}")]
    Precondition(#[from] PreconditionViolation),
}

/// A failed inequality from the rejection lemma's hypotheses.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{inequality} fails ({detail})")]
pub struct PreconditionViolation {
    pub inequality: &'static str,
    pub detail: String,
}

/// Parameters of the half-subfamily covering bound: codomain bits `m`,
/// domain bits `n`, overlap constant `s`, family exponent `t` (size `2^t`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CoveringParams {
    pub m: u32,
    pub n: u32,
    pub s: u32,
    pub t: u32,
}

impl CoveringParams {
    pub fn new(m: u32, n: u32, s: u32, t: u32) -> Result<Self, BoundsError> {
        if m == 0 || n == 0 || s == 0 || t == 0 {
            return Err(BoundsError::InvalidParams("m, n, s, t must all be at least 1"));
        }
        Ok(CoveringParams { m, n, s, t })
    }
}

fn pow2_checked(e: u32, what: &'static str) -> Result<u128, BoundsError> {
    if e >= 104 {
        return Err(BoundsError::Range(what));
    }
    Ok(1u128 << e)
}

fn exact(x: Option<u128>, what: &'static str) -> Result<DoubleDouble, BoundsError> {
    match x {
        Some(v) if v < EXACT_LIMIT => Ok(DoubleDouble::from_u128(v)),
        _ => Err(BoundsError::Range(what)),
    }
}

/// `log2` of `2^m * 2^(2^t) * 2^(n s 2^m) * (1 - 2^-m)^(2^(t-1) s 2^m)`.
pub fn log2_covering_failure(p: &CoveringParams) -> Result<DoubleDouble, BoundsError> {
    let family = pow2_checked(p.t, "2^t")?;
    let line = pow2_checked(p.m, "2^m")?;
    let counting = (p.m as u128).checked_add(family).and_then(|v| {
        (p.n as u128)
            .checked_mul(p.s as u128)?
            .checked_mul(line)?
            .checked_add(v)
    });
    let exponent = (family / 2).checked_mul(p.s as u128).and_then(|v| v.checked_mul(line));
    let counting = exact(counting, "counting term")?;
    let exponent = exact(exponent, "miss exponent")?;
    Ok(counting + exponent * DoubleDouble::log2_one_minus_pow2(p.m))
}

/// One evaluated point of a parameter scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub value: u32,
    pub log2_bound: DoubleDouble,
    pub feasible: bool,
}

pub const DEFAULT_T_MAX: u32 = 24;
pub const DEFAULT_S_MAX: u32 = 64;

/// Evaluates the covering bound at `t = lo..=hi`. Each point is independent.
pub fn scan_family_exponent(m: u32, n: u32, s: u32, lo: u32, hi: u32) -> Result<Vec<ScanPoint>, BoundsError> {
    (lo.max(1)..=hi)
        .map(|t| {
            let v = log2_covering_failure(&CoveringParams::new(m, n, s, t)?)?;
            Ok(ScanPoint {
                value: t,
                log2_bound: v,
                feasible: v.is_negative(),
            })
        })
        .collect()
}

/// Evaluates the covering bound at `s = lo..=hi`.
pub fn scan_overlap_constant(m: u32, n: u32, t: u32, lo: u32, hi: u32) -> Result<Vec<ScanPoint>, BoundsError> {
    (lo.max(1)..=hi)
        .map(|s| {
            let v = log2_covering_failure(&CoveringParams::new(m, n, s, t)?)?;
            Ok(ScanPoint {
                value: s,
                log2_bound: v,
                feasible: v.is_negative(),
            })
        })
        .collect()
}

/// Smallest `t` in `1..=t_max` with a negative bound; `None` means infeasible
/// up to `t_max`.
pub fn min_family_exponent(m: u32, n: u32, s: u32, t_max: u32) -> Result<Option<u32>, BoundsError> {
    for t in 1..=t_max {
        if log2_covering_failure(&CoveringParams::new(m, n, s, t)?)?.is_negative() {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// Smallest `s` in `1..=s_max` with a negative bound.
pub fn min_overlap_constant(m: u32, n: u32, t: u32, s_max: u32) -> Result<Option<u32>, BoundsError> {
    for s in 1..=s_max {
        if log2_covering_failure(&CoveringParams::new(m, n, s, t)?)?.is_negative() {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

/// Sizes and tolerances of the rejection lemma: `|A|`, `|B|`, `epsilon`,
/// `Phi` (bound on `|F|`) and `|C|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RejectionParams {
    pub a_size: u64,
    pub b_size: u64,
    pub epsilon: Rational,
    pub phi: u64,
    pub c_size: u64,
}

impl RejectionParams {
    /// Validates the lemma hypotheses; `c_size` itself is unconstrained.
    pub fn new(a_size: u64, b_size: u64, epsilon: Rational, phi: u64, c_size: u64) -> Result<Self, BoundsError> {
        check_lemma_preconditions(a_size, b_size, epsilon, phi)?;
        if c_size == 0 {
            return Err(BoundsError::InvalidParams("|C| must be positive"));
        }
        Ok(RejectionParams {
            a_size,
            b_size,
            epsilon,
            phi,
            c_size,
        })
    }

    /// Same parameters with `|C|` set to the lemma's family size.
    pub fn with_lemma_size(a_size: u64, b_size: u64, epsilon: Rational, phi: u64) -> Result<Self, BoundsError> {
        let c = rejection_family_size(a_size, b_size, epsilon, phi)?;
        Self::new(a_size, b_size, epsilon, phi, c)
    }
}

/// Checks `|B| >= 2`, `|A| >= 16|B|`, `eps >= 4|B|/|A|`, `Phi <= 2^(|A|/(4|B|))`,
/// all non-strict, plus `0 < eps <= 1` and `Phi >= 1`.
pub fn check_lemma_preconditions(
    a_size: u64,
    b_size: u64,
    epsilon: Rational,
    phi: u64,
) -> Result<(), PreconditionViolation> {
    let fail = |inequality: &'static str, detail: String| Err(PreconditionViolation { inequality, detail });
    if b_size < 2 {
        return fail("|B| >= 2", format!("|B| = {b_size}"));
    }
    if (a_size as u128) < 16 * b_size as u128 {
        return fail("|A| >= 16|B|", format!("{a_size} < {}", 16 * b_size as u128));
    }
    if epsilon.num() == 0 || epsilon > Rational::integer(1) {
        return fail("0 < epsilon <= 1", format!("epsilon = {epsilon}"));
    }
    // eps * |A| >= 4 |B|
    if epsilon.scaled_cmp(a_size as u128, 4 * b_size as u128).is_lt() {
        return fail("epsilon >= 4|B|/|A|", format!("{epsilon} < 4*{b_size}/{a_size}"));
    }
    if phi == 0 {
        return fail("Phi >= 1", String::from("Phi = 0"));
    }
    // 4|B| log2(Phi) <= |A|
    let ok = if phi.is_power_of_two() {
        4 * b_size as u128 * phi.trailing_zeros() as u128 <= a_size as u128
    } else {
        // log2(Phi) is irrational here, so equality cannot occur
        DoubleDouble::from_u64(phi).log2() * DoubleDouble::from_u64(4 * b_size) <= DoubleDouble::from_u64(a_size)
    };
    if !ok {
        return fail(
            "Phi <= 2^(|A|/(4|B|))",
            format!("Phi = {phi}, |A|/(4|B|) = {a_size}/{}", 4 * b_size as u128),
        );
    }
    Ok(())
}

/// The three candidate sizes `20|B|/eps`, `6 Phi log2|B| / eps`, `6 Phi |B| log2|B|`.
pub fn rejection_family_terms(b_size: u64, epsilon: Rational, phi: u64) -> [DoubleDouble; 3] {
    let eps = epsilon.to_dd();
    let b = DoubleDouble::from_u64(b_size);
    let lb = DoubleDouble::log2_u64(b_size);
    let six_phi = DoubleDouble::from_u64(6) * DoubleDouble::from_u64(phi);
    [
        DoubleDouble::from_u64(20) * b / eps,
        six_phi * lb / eps,
        six_phi * b * lb,
    ]
}

/// `ceil(max{20|B|/eps, 6 Phi log2|B| / eps, 6 Phi |B| log2|B|})`.
pub fn rejection_family_size(a_size: u64, b_size: u64, epsilon: Rational, phi: u64) -> Result<u64, BoundsError> {
    check_lemma_preconditions(a_size, b_size, epsilon, phi)?;
    let size = if b_size.is_power_of_two() {
        let k = b_size.trailing_zeros() as u128;
        let t1 = epsilon.ceil_div_into(20 * b_size as u128);
        let t2 = epsilon.ceil_div_into(6 * phi as u128 * k);
        let t3 = 6 * phi as u128 * b_size as u128 * k;
        t1.max(t2).max(t3)
    } else {
        let terms = rejection_family_terms(b_size, epsilon, phi);
        let max = terms
            .iter()
            .copied()
            .fold(DoubleDouble::ZERO, |a, b| if b > a { b } else { a });
        max.ceil() as u128
    };
    u64::try_from(size).map_err(|_| BoundsError::Range("family size"))
}

/// `log2` of `(2 Phi^(1/4) (3/4)^(|A|/|B|))^|C|` times `|B|^(|A| Phi)`.
pub fn log2_first_event(r: &RejectionParams) -> DoubleDouble {
    let a = DoubleDouble::from_u64(r.a_size);
    let b = DoubleDouble::from_u64(r.b_size);
    let c = DoubleDouble::from_u64(r.c_size);
    let phi = DoubleDouble::from_u64(r.phi);
    let log2_three_quarters = DoubleDouble::from_u64(3).log2() - DoubleDouble::from_u64(2);
    let per_member = DoubleDouble::ONE + DoubleDouble::log2_u64(r.phi).mul_pow2(-2) + a / b * log2_three_quarters;
    c * per_member + a * phi * DoubleDouble::log2_u64(r.b_size)
}

/// `log2` of `2^(-eps|A||C|/2) * 2^(|A||B|) * 2^(|C||B|) * |B|^(|A| Phi)`.
pub fn log2_second_event(r: &RejectionParams) -> DoubleDouble {
    let a = DoubleDouble::from_u64(r.a_size);
    let b = DoubleDouble::from_u64(r.b_size);
    let c = DoubleDouble::from_u64(r.c_size);
    let phi = DoubleDouble::from_u64(r.phi);
    -(r.epsilon.to_dd() * a * c).mul_pow2(-1) + a * b + c * b + a * phi * DoubleDouble::log2_u64(r.b_size)
}

/// Exact `log2 C(q, r)` next to the estimate `log2 (3q/r)^r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinomialBound {
    pub q: u64,
    pub r: u64,
    pub log2_exact: DoubleDouble,
    pub log2_estimate: DoubleDouble,
}

pub fn binomial_upper(q: u64, r: u64) -> Result<BinomialBound, BoundsError> {
    if r == 0 || r > q {
        return Err(BoundsError::InvalidParams("binomial bound needs 1 <= r <= q"));
    }
    let r_eff = r.min(q - r);
    let mut exact = DoubleDouble::ZERO;
    for i in 0..r_eff {
        exact = exact + (DoubleDouble::from_u64(q - i) / DoubleDouble::from_u64(i + 1)).log2();
    }
    let estimate = DoubleDouble::from_u64(r)
        * (DoubleDouble::from_u64(3) * DoubleDouble::from_u64(q) / DoubleDouble::from_u64(r)).log2();
    Ok(BinomialBound {
        q,
        r,
        log2_exact: exact,
        log2_estimate: estimate,
    })
}
