//! Bit strings, extensional function tables and indexed families.
//!
//! Index convention: a bit string of length `n` addresses table cell
//! `value()`, i.e. its bits read most-significant first. Every report and file
//! format in the workspace relies on this.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UniverseError {
    #[error("length mismatch: {left} vs {right} bits")]
    LengthMismatch { left: usize, right: usize },
    #[error("bit string of {len} bits exceeds the {max}-bit capacity")]
    TooLong { len: usize, max: usize },
    #[error("value {value:#x} does not fit in {bits} bits")]
    ValueOutOfRange { value: u128, bits: usize },
    #[error("invalid bit character {0:?}")]
    InvalidBit(char),
    #[error("invalid hex digit {0:?}")]
    InvalidHex(char),
    #[error("signature mismatch: expected {expected:?}, found {found:?}")]
    Signature { expected: (u32, u32), found: (u32, u32) },
    #[error("table has {found} cells, expected {expected}")]
    TableSize { expected: usize, found: usize },
    #[error("unsupported table shape: {domain_bits} -> {codomain_bits} bits")]
    Shape { domain_bits: u32, codomain_bits: u32 },
}

/// A binary word of at most [`BitString::MAX_LEN`] bits.
///
/// Ordering is by length first, then lexicographic; this is also the order in
/// which the oracle enumerates programs.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitString {
    // field order matters for the derived ordering
    len: u8,
    value: u128,
}

impl BitString {
    pub const MAX_LEN: usize = 128;

    pub const fn empty() -> Self {
        BitString { len: 0, value: 0 }
    }

    /// Builds a string of `len` bits whose most-significant-first reading is `value`.
    pub fn from_value(value: u128, len: usize) -> Result<Self, UniverseError> {
        if len > Self::MAX_LEN {
            return Err(UniverseError::TooLong {
                len,
                max: Self::MAX_LEN,
            });
        }
        if len < 128 && value >> len != 0 {
            return Err(UniverseError::ValueOutOfRange { value, bits: len });
        }
        Ok(BitString { len: len as u8, value })
    }

    pub fn zeros(len: usize) -> Self {
        Self::from_value(0, len).expect("length within capacity")
    }

    pub fn ones(len: usize) -> Self {
        Self::from_value(mask(len), len).expect("length within capacity")
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Result<Self, UniverseError> {
        let mut out = BitString::empty();
        for b in bits {
            out.push(b)?;
        }
        Ok(out)
    }

    /// Parses a hex string holding `len` bits (zero-padded on the left).
    pub fn from_hex(hex: &str, len: usize) -> Result<Self, UniverseError> {
        let mut value: u128 = 0;
        for ch in hex.chars() {
            let d = ch.to_digit(16).ok_or(UniverseError::InvalidHex(ch))?;
            if value >> 124 != 0 {
                return Err(UniverseError::TooLong {
                    len: hex.len() * 4,
                    max: Self::MAX_LEN,
                });
            }
            value = (value << 4) | d as u128;
        }
        Self::from_value(value, len)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn value(&self) -> u128 {
        self.value
    }

    /// Table index addressed by this string.
    #[inline]
    pub fn index(&self) -> usize {
        self.value as usize
    }

    /// Bit `i`, counted from the first (most significant) bit.
    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        debug_assert!(i < self.len());
        (self.value >> (self.len() - 1 - i)) & 1 == 1
    }

    pub fn push(&mut self, bit: bool) -> Result<(), UniverseError> {
        if self.len() == Self::MAX_LEN {
            return Err(UniverseError::TooLong {
                len: Self::MAX_LEN + 1,
                max: Self::MAX_LEN,
            });
        }
        self.value = (self.value << 1) | bit as u128;
        self.len += 1;
        Ok(())
    }

    pub fn concat(&self, other: &BitString) -> Result<BitString, UniverseError> {
        let len = self.len() + other.len();
        if len > Self::MAX_LEN {
            return Err(UniverseError::TooLong {
                len,
                max: Self::MAX_LEN,
            });
        }
        let value = if other.len() == 128 {
            other.value
        } else {
            (self.value << other.len()) | other.value
        };
        Ok(BitString { len: len as u8, value })
    }

    /// Bits `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> BitString {
        assert!(start <= end && end <= self.len(), "slice out of range");
        let width = end - start;
        let shifted = if self.len() - end == 128 {
            0
        } else {
            self.value >> (self.len() - end)
        };
        BitString {
            len: width as u8,
            value: shifted & mask(width),
        }
    }

    pub fn complement(&self) -> BitString {
        BitString {
            len: self.len,
            value: !self.value & mask(self.len()),
        }
    }

    /// Bitwise sum modulo 2 of two equal-length strings.
    pub fn xor(&self, other: &BitString) -> Result<BitString, UniverseError> {
        if self.len != other.len {
            return Err(UniverseError::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(BitString {
            len: self.len,
            value: self.value ^ other.value,
        })
    }

    /// Truncates to `target` bits or pads with trailing zeros.
    ///
    /// # Panics
    ///
    /// If `target` exceeds [`BitString::MAX_LEN`].
    pub fn fit_length(&self, target: usize) -> BitString {
        assert!(target <= Self::MAX_LEN, "target length exceeds capacity");
        if self.len() >= target {
            self.slice(0, target)
        } else {
            let pad = target - self.len();
            BitString {
                len: target as u8,
                value: if pad == 128 { 0 } else { self.value << pad },
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(move |i| self.bit(i))
    }

    /// Hex digits of `value()`, zero-padded to `ceil(len / 4)` digits.
    pub fn to_hex(&self) -> String {
        let digits = self.len().div_ceil(4);
        let mut out = String::with_capacity(digits);
        for d in (0..digits).rev() {
            let nib = ((self.value >> (4 * d)) & 0xf) as u32;
            out.push(core::char::from_digit(nib, 16).unwrap());
        }
        out
    }

    /// All strings of exactly `len` bits in lexicographic order.
    pub fn all_of_len(len: usize) -> impl Iterator<Item = BitString> {
        assert!(len < 64, "enumeration limited to lengths below 64");
        (0..(1u64 << len)).map(move |v| BitString {
            len: len as u8,
            value: v as u128,
        })
    }

    /// All strings of length at most `max_len`, length-lexicographic.
    pub fn all_up_to(max_len: usize) -> impl Iterator<Item = BitString> {
        (0..=max_len).flat_map(BitString::all_of_len)
    }
}

#[inline]
fn mask(len: usize) -> u128 {
    if len >= 128 {
        u128::MAX
    } else {
        (1u128 << len) - 1
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString(\"{self}\")")
    }
}

impl FromStr for BitString {
    type Err = UniverseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = BitString::empty();
        for ch in s.chars() {
            match ch {
                '0' => out.push(false)?,
                '1' => out.push(true)?,
                other => return Err(UniverseError::InvalidBit(other)),
            }
        }
        Ok(out)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A total or partial function `B^n -> B^m` stored cell by cell.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FunctionTable {
    domain_bits: u32,
    codomain_bits: u32,
    cells: Vec<Option<u32>>,
}

impl FunctionTable {
    pub const MAX_DOMAIN_BITS: u32 = 30;
    pub const MAX_CODOMAIN_BITS: u32 = 32;

    fn check_shape(domain_bits: u32, codomain_bits: u32) -> Result<(), UniverseError> {
        if domain_bits > Self::MAX_DOMAIN_BITS || codomain_bits == 0 || codomain_bits > Self::MAX_CODOMAIN_BITS {
            return Err(UniverseError::Shape {
                domain_bits,
                codomain_bits,
            });
        }
        Ok(())
    }

    fn check_value(codomain_bits: u32, v: u32) -> Result<(), UniverseError> {
        if codomain_bits < 32 && v >> codomain_bits != 0 {
            return Err(UniverseError::ValueOutOfRange {
                value: v as u128,
                bits: codomain_bits as usize,
            });
        }
        Ok(())
    }

    /// Table with every cell undefined.
    pub fn undefined(domain_bits: u32, codomain_bits: u32) -> Result<Self, UniverseError> {
        Self::check_shape(domain_bits, codomain_bits)?;
        Ok(FunctionTable {
            domain_bits,
            codomain_bits,
            cells: alloc::vec![None; 1usize << domain_bits],
        })
    }

    pub fn constant(domain_bits: u32, codomain_bits: u32, value: u32) -> Result<Self, UniverseError> {
        Self::check_shape(domain_bits, codomain_bits)?;
        Self::check_value(codomain_bits, value)?;
        Ok(FunctionTable {
            domain_bits,
            codomain_bits,
            cells: alloc::vec![Some(value); 1usize << domain_bits],
        })
    }

    pub fn total(domain_bits: u32, codomain_bits: u32, values: Vec<u32>) -> Result<Self, UniverseError> {
        Self::partial(domain_bits, codomain_bits, values.into_iter().map(Some).collect())
    }

    pub fn partial(domain_bits: u32, codomain_bits: u32, cells: Vec<Option<u32>>) -> Result<Self, UniverseError> {
        Self::check_shape(domain_bits, codomain_bits)?;
        let expected = 1usize << domain_bits;
        if cells.len() != expected {
            return Err(UniverseError::TableSize {
                expected,
                found: cells.len(),
            });
        }
        for v in cells.iter().flatten() {
            Self::check_value(codomain_bits, *v)?;
        }
        Ok(FunctionTable {
            domain_bits,
            codomain_bits,
            cells,
        })
    }

    #[inline]
    pub fn domain_bits(&self) -> u32 {
        self.domain_bits
    }

    #[inline]
    pub fn codomain_bits(&self) -> u32 {
        self.codomain_bits
    }

    #[inline]
    pub fn signature(&self) -> (u32, u32) {
        (self.domain_bits, self.codomain_bits)
    }

    /// Number of cells, `2^domain_bits`.
    #[inline]
    pub fn size(&self) -> usize {
        self.cells.len()
    }

    #[inline]
    pub fn get(&self, index: usize) -> Option<u32> {
        self.cells[index]
    }

    pub fn cells(&self) -> &[Option<u32>] {
        &self.cells
    }

    pub fn set(&mut self, index: usize, value: u32) -> Result<(), UniverseError> {
        Self::check_value(self.codomain_bits, value)?;
        self.cells[index] = Some(value);
        Ok(())
    }

    pub fn is_total(&self) -> bool {
        self.cells.iter().all(Option::is_some)
    }

    /// Looks up the cell addressed by `a`; `Ok(None)` marks an undefined cell.
    pub fn eval(&self, a: &BitString) -> Result<Option<BitString>, UniverseError> {
        if a.len() != self.domain_bits as usize {
            return Err(UniverseError::LengthMismatch {
                left: a.len(),
                right: self.domain_bits as usize,
            });
        }
        Ok(self.cells[a.index()].map(|v| BitString::from_value(v as u128, self.codomain_bits as usize).unwrap()))
    }

    /// Copy with every undefined cell set to the all-zeros value.
    pub fn completed(&self) -> FunctionTable {
        FunctionTable {
            domain_bits: self.domain_bits,
            codomain_bits: self.codomain_bits,
            cells: self.cells.iter().map(|c| Some(c.unwrap_or(0))).collect(),
        }
    }

    /// Cell values with undefined cells read as zero.
    pub fn values_completed(&self) -> impl Iterator<Item = u32> + '_ {
        self.cells.iter().map(|c| c.unwrap_or(0))
    }
}

/// An ordered family of tables sharing one signature. Members are addressed
/// by their zero-based position, which never changes.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Family {
    domain_bits: u32,
    codomain_bits: u32,
    members: Vec<FunctionTable>,
}

impl Family {
    pub fn new(domain_bits: u32, codomain_bits: u32) -> Result<Self, UniverseError> {
        FunctionTable::check_shape(domain_bits, codomain_bits)?;
        Ok(Family {
            domain_bits,
            codomain_bits,
            members: Vec::new(),
        })
    }

    pub fn from_members(
        domain_bits: u32,
        codomain_bits: u32,
        members: Vec<FunctionTable>,
    ) -> Result<Self, UniverseError> {
        let mut family = Family::new(domain_bits, codomain_bits)?;
        family.members.reserve(members.len());
        for m in members {
            family.push(m)?;
        }
        Ok(family)
    }

    pub fn push(&mut self, table: FunctionTable) -> Result<(), UniverseError> {
        if table.signature() != self.signature() {
            return Err(UniverseError::Signature {
                expected: self.signature(),
                found: table.signature(),
            });
        }
        self.members.push(table);
        Ok(())
    }

    #[inline]
    pub fn signature(&self) -> (u32, u32) {
        (self.domain_bits, self.codomain_bits)
    }

    #[inline]
    pub fn domain_bits(&self) -> u32 {
        self.domain_bits
    }

    #[inline]
    pub fn codomain_bits(&self) -> u32 {
        self.codomain_bits
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.members.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&FunctionTable> {
        self.members.get(index)
    }

    pub fn members(&self) -> &[FunctionTable] {
        &self.members
    }

    pub fn iter(&self) -> core::slice::Iter<'_, FunctionTable> {
        self.members.iter()
    }
}

/// Per-bit-plane view of a total table: plane `j` holds bit `j` of every cell
/// as a bitset over the domain. Used for fast agreement counts.
#[derive(Clone, Debug)]
pub struct BitPlanes {
    words: usize,
    planes: Vec<u64>,
    codomain_bits: u32,
}

impl BitPlanes {
    /// Builds planes from `table`, reading undefined cells as zero.
    pub fn new(table: &FunctionTable) -> Self {
        let size = table.size();
        let words = size.div_ceil(64);
        let m = table.codomain_bits() as usize;
        let mut planes = alloc::vec![0u64; words * m];
        for (a, v) in table.values_completed().enumerate() {
            for j in 0..m {
                if (v >> j) & 1 == 1 {
                    planes[j * words + a / 64] |= 1u64 << (a % 64);
                }
            }
        }
        BitPlanes {
            words,
            planes,
            codomain_bits: table.codomain_bits(),
        }
    }

    fn plane(&self, j: usize) -> &[u64] {
        &self.planes[j * self.words..(j + 1) * self.words]
    }

    pub fn words(&self) -> usize {
        self.words
    }

    /// Writes into `out` the set of points where this table equals `other`.
    pub fn agreement_into(&self, other: &BitPlanes, domain_size: usize, out: &mut [u64]) {
        out.iter_mut().for_each(|w| *w = !0);
        for j in 0..self.codomain_bits as usize {
            let (p, q) = (self.plane(j), other.plane(j));
            for w in 0..self.words {
                out[w] &= !(p[w] ^ q[w]);
            }
        }
        trim(out, domain_size);
    }

    /// Number of points where the two tables agree.
    pub fn agreement(&self, other: &BitPlanes, domain_size: usize) -> usize {
        let mut buf = alloc::vec![0u64; self.words];
        self.agreement_into(other, domain_size, &mut buf);
        buf.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Writes into `out` the set of points mapped to `value`.
    pub fn preimage_into(&self, value: u32, domain_size: usize, out: &mut [u64]) {
        out.iter_mut().for_each(|w| *w = !0);
        for j in 0..self.codomain_bits as usize {
            let p = self.plane(j);
            let want = (value >> j) & 1 == 1;
            for w in 0..self.words {
                out[w] &= if want { p[w] } else { !p[w] };
            }
        }
        trim(out, domain_size);
    }
}

fn trim(out: &mut [u64], domain_size: usize) {
    let rem = domain_size % 64;
    if rem != 0 {
        if let Some(last) = out.last_mut() {
            *last &= (1u64 << rem) - 1;
        }
    }
}
