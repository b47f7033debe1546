//! Resource-bounded plain and conditional complexity by exhaustive search
//! over programs of the reference [`machine`].
//!
//! Programs are tried by length, then lexicographically; the first program
//! that prints `y` is the witness. Per-condition memo tables grow one program
//! length at a time and keep every output up to `max_output_len` bits, so a
//! stored entry is always minimal.

pub mod machine;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
pub use machine::{run, MachineConstants, Outcome, CONSTANTS, MACHINE_ID};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{what} = {value} exceeds the supported maximum {max}")]
    Range {
        what: &'static str,
        value: usize,
        max: usize,
    },
}

fn range(what: &'static str, value: usize, max: usize) -> Result<(), OracleError> {
    if value > max {
        Err(OracleError::Range { what, value, max })
    } else {
        Ok(())
    }
}

/// Longest program length the search will ever enumerate.
pub const HARD_L_MAX: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Longest program tried.
    pub l_max: usize,
    /// Step bound `T` per run.
    pub steps: u64,
    /// Longest output kept in memo tables.
    pub max_output_len: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            l_max: 16,
            steps: 1 << 16,
            max_output_len: 10,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        range("l_max", self.l_max, HARD_L_MAX)?;
        range("max_output_len", self.max_output_len, BitString::MAX_LEN)?;
        if self.steps == 0 {
            return Err(OracleError::Range {
                what: "steps (must be >= 1)",
                value: 0,
                max: 0,
            });
        }
        Ok(())
    }
}

/// A complexity value together with a program attaining it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witnessed {
    pub k: usize,
    pub witness: BitString,
}

impl Witnessed {
    fn of(p: BitString) -> Self {
        Witnessed { k: p.len(), witness: p }
    }
}

/// All programs of exactly `len` bits, in lexicographic order.
pub fn programs_of_len(len: usize) -> impl Iterator<Item = BitString> {
    BitString::all_of_len(len)
}

/// `1^|u| 0 u v`, the pairing used for two-part conditions.
pub fn pair(u: &BitString, v: &BitString) -> Result<BitString, OracleError> {
    let len = 2 * u.len() + 1 + v.len();
    range("paired condition length", len, BitString::MAX_LEN)?;
    let head = BitString::ones(u.len())
        .concat(&BitString::zeros(1))
        .expect("checked length");
    Ok(head.concat(u).and_then(|h| h.concat(v)).expect("checked length"))
}

/// Memo table for one condition.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSnapshot {
    pub condition: BitString,
    /// Programs of every length below this have been run.
    pub explored: usize,
    /// Output -> first witness, for outputs up to the configured length.
    pub entries: BTreeMap<BitString, BitString>,
}

/// Memoizing search front end.
#[derive(Clone, Debug)]
pub struct Oracle {
    config: OracleConfig,
    tables: BTreeMap<BitString, TableSnapshot>,
}

impl Oracle {
    pub fn new(config: OracleConfig) -> Result<Self, OracleError> {
        config.validate()?;
        Ok(Oracle {
            config,
            tables: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn machine_id(&self) -> &'static str {
        MACHINE_ID
    }

    fn extend(config: &OracleConfig, table: &mut TableSnapshot) {
        let len = table.explored;
        for p in programs_of_len(len) {
            if let Outcome::Halted(y) = run(&p, &table.condition, config.steps) {
                if y.len() <= config.max_output_len {
                    table.entries.entry(y).or_insert(p);
                }
            }
        }
        table.explored += 1;
    }

    fn table(&mut self, x: &BitString) -> &mut TableSnapshot {
        self.tables.entry(*x).or_insert_with(|| TableSnapshot {
            condition: *x,
            ..TableSnapshot::default()
        })
    }

    /// Memo lookup, growing the table up to programs of `limit` bits.
    fn memo_within(&mut self, y: &BitString, x: &BitString, limit: usize) -> Option<Witnessed> {
        let config = self.config;
        let table = self.table(x);
        loop {
            if let Some(p) = table.entries.get(y) {
                return (p.len() <= limit).then(|| Witnessed::of(*p));
            }
            if table.explored > limit {
                return None;
            }
            Self::extend(&config, table);
        }
    }

    /// `K_T(y | x)` with its witness; `None` if no program of at most
    /// `l_max` bits prints `y`.
    pub fn cond_complexity(&mut self, y: &BitString, x: &BitString) -> Result<Option<Witnessed>, OracleError> {
        range("output length", y.len(), self.config.max_output_len)?;
        let limit = self.config.l_max;
        Ok(self.memo_within(y, x, limit))
    }

    /// `K_T(x)`, i.e. complexity given the empty condition.
    pub fn plain_complexity(&mut self, x: &BitString) -> Result<Option<Witnessed>, OracleError> {
        self.cond_complexity(x, &BitString::empty())
    }

    /// Shortest program of at most `budget` bits printing `y` on `x`; uses the
    /// memo when `y` is short enough, a direct bounded search otherwise.
    pub fn search_within(&mut self, y: &BitString, x: &BitString, budget: usize) -> Option<Witnessed> {
        let budget = budget.min(self.config.l_max);
        if y.len() <= self.config.max_output_len {
            self.memo_within(y, x, budget)
        } else {
            bounded_search(y, x, budget, self.config.steps)
        }
    }

    /// Every output of exactly `out_len` bits (any length when `None`) printed
    /// on `x` by a program of at most `budget` bits, with its first witness.
    pub fn outputs_within(
        &self,
        x: &BitString,
        out_len: Option<usize>,
        budget: usize,
    ) -> BTreeMap<BitString, BitString> {
        let mut out = BTreeMap::new();
        for len in 0..=budget.min(self.config.l_max) {
            for p in programs_of_len(len) {
                if let Outcome::Halted(y) = run(&p, x, self.config.steps) {
                    if out_len.is_none_or(|l| y.len() == l) {
                        out.entry(y).or_insert(p);
                    }
                }
            }
        }
        out
    }

    /// `{x : |x| <= max_cond_len, K_T(y | x) < bound}` in length-lex order.
    pub fn condition_set(
        &mut self,
        y: &BitString,
        bound: usize,
        max_cond_len: usize,
    ) -> Result<Vec<BitString>, OracleError> {
        range("condition length", max_cond_len, 14)?;
        if bound == 0 {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for x in BitString::all_up_to(max_cond_len) {
            if bounded_search(y, &x, bound - 1, self.config.steps).is_some() {
                out.push(x);
            }
        }
        Ok(out)
    }

    /// Shortest single program printing `y` on every condition in `xs`.
    pub fn uniform_complexity(&self, xs: &[BitString], y: &BitString) -> Option<Witnessed> {
        for len in 0..=self.config.l_max {
            for p in programs_of_len(len) {
                if xs.iter().all(|x| run(&p, x, self.config.steps) == Outcome::Halted(*y)) {
                    return Some(Witnessed::of(p));
                }
            }
        }
        None
    }

    /// Memoized entries as `(condition, output, witness)`.
    pub fn memo_entries(&self) -> impl Iterator<Item = (BitString, BitString, Witnessed)> + '_ {
        self.tables
            .values()
            .flat_map(|t| t.entries.iter().map(move |(y, p)| (t.condition, *y, Witnessed::of(*p))))
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &TableSnapshot> {
        self.tables.values()
    }

    /// Installs a previously exported table, keeping whichever copy explored further.
    pub fn import(&mut self, snapshot: TableSnapshot) {
        match self.tables.get(&snapshot.condition) {
            Some(t) if t.explored >= snapshot.explored => {}
            _ => {
                self.tables.insert(snapshot.condition, snapshot);
            }
        }
    }
}

/// Memo-free search for the first program of at most `budget` bits printing `y` on `x`.
pub fn bounded_search(y: &BitString, x: &BitString, budget: usize, steps: u64) -> Option<Witnessed> {
    (0..=budget)
        .flat_map(programs_of_len)
        .find(|p| run(p, x, steps) == Outcome::Halted(*y))
        .map(Witnessed::of)
}

/// Complexity measurements consumed by the constructions; lets tests swap the
/// oracle for a scripted measure.
pub trait ComplexitySource {
    /// `Some(K(x))` when `K(x) <= budget`.
    fn plain_within(&mut self, x: &BitString, budget: usize) -> Result<Option<usize>, OracleError>;

    /// `Some(K(y | x))` when `K(y | x) <= budget`.
    fn conditional_within(&mut self, y: &BitString, x: &BitString, budget: usize)
        -> Result<Option<usize>, OracleError>;

    /// Strings of `out_len` bits with `K(. | x) <= budget`, ascending.
    fn describable_within(
        &mut self,
        x: &BitString,
        out_len: usize,
        budget: usize,
    ) -> Result<Vec<BitString>, OracleError> {
        range("output length", out_len, 24)?;
        let mut out = Vec::new();
        for y in BitString::all_of_len(out_len) {
            if self.conditional_within(&y, x, budget)?.is_some() {
                out.push(y);
            }
        }
        Ok(out)
    }
}

impl ComplexitySource for Oracle {
    fn plain_within(&mut self, x: &BitString, budget: usize) -> Result<Option<usize>, OracleError> {
        self.conditional_within(x, &BitString::empty(), budget)
    }

    fn conditional_within(
        &mut self,
        y: &BitString,
        x: &BitString,
        budget: usize,
    ) -> Result<Option<usize>, OracleError> {
        Ok(self.search_within(y, x, budget).map(|w| w.k))
    }

    fn describable_within(
        &mut self,
        x: &BitString,
        out_len: usize,
        budget: usize,
    ) -> Result<Vec<BitString>, OracleError> {
        Ok(self.outputs_within(x, Some(out_len), budget).into_keys().collect())
    }
}

/// Measured capability maxima, to be compared with the design [`CONSTANTS`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MeasuredConstants {
    /// `max K(y) - |y|` over `|y| <= len`.
    pub c_lit: i64,
    /// `max K(x | x)` over `|x| <= len`.
    pub c_copy: i64,
    /// `max K(x ^ m | x) - |m|` over `|x| = |m| <= len / 2`.
    pub c_xor: i64,
    /// `K(empty)`.
    pub c_stop: i64,
    /// `max K(y | x) - K(y)` over `|x|, |y| <= len / 2`.
    pub c_ignore: i64,
}

fn k_of(o: &mut Oracle, y: &BitString, x: &BitString) -> Result<i64, OracleError> {
    o.cond_complexity(y, x)?.map(|w| w.k as i64).ok_or(OracleError::Range {
        what: "program length needed",
        value: o.config.l_max + 1,
        max: o.config.l_max,
    })
}

/// Measures the capability constants over all strings up to `len` bits.
pub fn measure_constants(oracle: &mut Oracle, len: usize) -> Result<MeasuredConstants, OracleError> {
    range(
        "measurement length",
        len,
        oracle.config.max_output_len.min(oracle.config.l_max.saturating_sub(2)),
    )?;
    let empty = BitString::empty();
    let mut m = MeasuredConstants {
        c_lit: i64::MIN,
        c_copy: i64::MIN,
        c_xor: i64::MIN,
        c_stop: k_of(oracle, &empty, &empty)?,
        c_ignore: i64::MIN,
    };
    for y in BitString::all_up_to(len) {
        m.c_lit = m.c_lit.max(k_of(oracle, &y, &empty)? - y.len() as i64);
        m.c_copy = m.c_copy.max(k_of(oracle, &y, &y)?);
    }
    let half = len / 2;
    for l in 0..=half {
        for x in BitString::all_of_len(l) {
            for mask in BitString::all_of_len(l) {
                let target = x.xor(&mask).expect("equal lengths");
                m.c_xor = m.c_xor.max(k_of(oracle, &target, &x)? - l as i64);
            }
        }
    }
    for y in BitString::all_up_to(half) {
        let plain = k_of(oracle, &y, &empty)?;
        for x in BitString::all_up_to(half) {
            m.c_ignore = m.c_ignore.max(k_of(oracle, &y, &x)? - plain);
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::machine::templates;
    use super::*;
    use crate::rng::rng_for;
    use alloc::vec;
    use rand::RngCore;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn oracle() -> Oracle {
        Oracle::new(OracleConfig::default()).unwrap()
    }

    #[test]
    fn capability_bounds() {
        let mut o = oracle();
        for x in BitString::all_up_to(8) {
            assert!(o.cond_complexity(&x, &x).unwrap().unwrap().k <= CONSTANTS.c_copy);
            assert!(o.plain_complexity(&x).unwrap().unwrap().k <= x.len() + CONSTANTS.c_lit);
        }
        assert_eq!(
            o.plain_complexity(&BitString::empty()).unwrap().unwrap().k,
            CONSTANTS.c_stop
        );
        assert!(matches!(
            o.plain_complexity(&BitString::zeros(11)),
            Err(OracleError::Range { .. })
        ));
    }

    #[test]
    fn witnesses_replay_and_are_first_in_order() {
        let mut o = oracle();
        let x = bs("1101");
        for y in BitString::all_up_to(5) {
            let w = o.cond_complexity(&y, &x).unwrap().unwrap();
            assert_eq!(run(&w.witness, &x, o.config().steps), Outcome::Halted(y));
            assert_eq!(Some(w), bounded_search(&y, &x, 16, o.config().steps));
        }
        for (x, y, w) in o.memo_entries() {
            assert_eq!(run(&w.witness, &x, o.config().steps), Outcome::Halted(y));
        }
    }

    #[test]
    fn memo_equals_fresh_search_in_any_query_order() {
        let mut a = oracle();
        let mut b = oracle();
        let x = bs("011");
        let ys: Vec<_> = BitString::all_up_to(6).collect();
        for y in &ys {
            a.cond_complexity(y, &x).unwrap();
        }
        for y in ys.iter().rev() {
            let got = b.cond_complexity(y, &x).unwrap();
            assert_eq!(got, a.cond_complexity(y, &x).unwrap());
            assert_eq!(got, bounded_search(y, &x, 16, 1 << 16));
        }
    }

    #[test]
    fn incompressible_majority_of_bytes() {
        let o = oracle();
        let table = o.outputs_within(&BitString::empty(), Some(8), 16);
        let high = table.values().filter(|p| p.len() >= 7).count();
        assert_eq!(table.len(), 256);
        assert!(high >= 128);
        let mut o = oracle();
        let zeros = o.plain_complexity(&BitString::zeros(8)).unwrap().unwrap().k;
        for y in BitString::all_of_len(8) {
            assert!(zeros <= o.plain_complexity(&y).unwrap().unwrap().k);
        }
    }

    #[test]
    fn counting_bound() {
        let o = oracle();
        let table = o.outputs_within(&BitString::empty(), None, 9);
        for k in 0..=10usize {
            let below = table.values().filter(|p| p.len() < k).count();
            assert!(below < 1 << k, "k = {k}");
        }
    }

    #[test]
    fn monotone_in_steps() {
        let mut rng = rng_for(5, &[77]);
        for _ in 0..100 {
            let len = (rng.next_u32() % 9) as usize;
            let y = BitString::from_value((rng.next_u64() & ((1 << len) - 1)) as u128, len).unwrap();
            let mut prev = usize::MAX;
            for steps in [1u64, 2, 4, 16, 1 << 16] {
                let mut o = Oracle::new(OracleConfig {
                    steps,
                    ..Default::default()
                })
                .unwrap();
                let k = o.plain_complexity(&y).unwrap().map_or(usize::MAX, |w| w.k);
                assert!(k <= prev);
                prev = k;
            }
        }
    }

    #[test]
    fn conditioning_never_hurts_beyond_constant() {
        let mut o = oracle();
        for y in BitString::all_up_to(4) {
            let plain = o.plain_complexity(&y).unwrap().unwrap().k;
            for x in BitString::all_up_to(4) {
                let k = o.cond_complexity(&y, &x).unwrap().unwrap().k;
                assert!(k <= plain + CONSTANTS.c_ignore);
            }
        }
    }

    #[test]
    fn condition_set_examples() {
        let mut o = oracle();
        let y = bs("101100");
        assert!(o.condition_set(&y, 0, 8).unwrap().is_empty());
        let all = o.condition_set(&bs("10"), 2 + CONSTANTS.c_lit + 1, 4).unwrap();
        assert_eq!(all.len(), 31);
        let xs = o.condition_set(&y, 3, 8).unwrap();
        assert_eq!(xs, vec![y.complement(), y]);
        for x in &xs {
            let w = o.cond_complexity(&y, x).unwrap().unwrap();
            assert!(w.k <= 2);
            assert_eq!(run(&w.witness, x, 1 << 16), Outcome::Halted(y));
        }
        assert!(o.condition_set(&y, 3, 15).is_err());
    }

    #[test]
    fn uniform_complexity_examples() {
        let mut o = oracle();
        let y = bs("101100");
        let x0 = bs("0110");
        assert_eq!(o.uniform_complexity(&[x0], &y), o.cond_complexity(&y, &x0).unwrap());
        assert_eq!(o.uniform_complexity(&[], &y).unwrap().k, CONSTANTS.c_stop);
        let xs = [y, y.complement()];
        let u = o.uniform_complexity(&xs, &y).unwrap();
        assert_eq!(u.k, 8);
        assert_eq!(u.witness, templates::literal(&y));
    }

    #[test]
    fn pair_encoding() {
        assert_eq!(
            pair(&bs("10"), &bs("111")).unwrap(),
            bs("110 10 111".replace(' ', "").as_str())
        );
        assert_eq!(pair(&BitString::empty(), &bs("1")).unwrap(), bs("01"));
        assert!(pair(&BitString::ones(64), &bs("1")).is_err());
    }

    #[test]
    fn constants_within_design() {
        let mut o = oracle();
        let m = measure_constants(&mut o, 6).unwrap();
        assert_eq!(m.c_stop, 0);
        assert!(m.c_lit <= CONSTANTS.c_lit as i64);
        assert!(m.c_copy <= CONSTANTS.c_copy as i64);
        assert!(m.c_xor <= CONSTANTS.c_xor as i64);
        assert!(m.c_ignore <= CONSTANTS.c_ignore as i64);
    }

    #[test]
    fn describable_matches_default_impl() {
        struct Plain(Oracle);
        impl ComplexitySource for Plain {
            fn plain_within(&mut self, x: &BitString, budget: usize) -> Result<Option<usize>, OracleError> {
                self.0.plain_within(x, budget)
            }
            fn conditional_within(
                &mut self,
                y: &BitString,
                x: &BitString,
                budget: usize,
            ) -> Result<Option<usize>, OracleError> {
                self.0.conditional_within(y, x, budget)
            }
        }
        let mut fast = oracle();
        let mut slow = Plain(oracle());
        for b in [bs("0"), bs("1")] {
            assert_eq!(
                fast.describable_within(&b, 6, 7).unwrap(),
                slow.describable_within(&b, 6, 7).unwrap()
            );
        }
    }

    #[test]
    fn snapshots_round_trip() {
        let mut a = oracle();
        a.cond_complexity(&bs("0110"), &bs("01")).unwrap();
        let mut b = oracle();
        for s in a.snapshots() {
            b.import(s.clone());
        }
        assert_eq!(
            a.memo_entries().collect::<Vec<_>>(),
            b.memo_entries().collect::<Vec<_>>()
        );
    }
}
