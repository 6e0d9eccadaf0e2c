//! Bit strings and the small amount of bit-level serialization the codecs
//! need for their parameter blobs.

use std::fmt;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{parse, range, Result};

/// A finite string over {0,1}. Bit 0 is the first character.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        self.0[i] = bit;
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn extend(&mut self, other: &BitString) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn slice(&self, start: usize, end: usize) -> BitString {
        BitString(self.0[start..end].to_vec())
    }

    /// Appends `value` as a fixed-width big-endian field.
    pub fn push_uint(&mut self, value: u64, width: usize) {
        debug_assert!(width >= 64 || value < (1u64 << width));
        for k in (0..width).rev() {
            self.0.push(k < 64 && (value >> k) & 1 == 1);
        }
    }

    /// Appends `value` as a fixed-width big-endian field.
    pub fn push_big(&mut self, value: &BigUint, width: usize) {
        debug_assert!(value.bits() as usize <= width);
        for k in (0..width).rev() {
            self.0.push(value.bit(k as u64));
        }
    }

    /// Appends `value` with the Elias gamma code of `value + 1`, so that
    /// zero is encodable. Self-delimiting; costs `2⌊log₂(v+1)⌋ + 1` bits.
    pub fn push_gamma(&mut self, value: u64) {
        let v = value + 1;
        let width = 64 - v.leading_zeros() as usize;
        for _ in 1..width {
            self.0.push(false);
        }
        self.push_uint(v, width);
    }

    /// Reads the whole string as a big-endian integer.
    pub fn to_biguint(&self) -> BigUint {
        let mut out = BigUint::zero();
        for (k, bit) in self.0.iter().rev().enumerate() {
            if *bit {
                out.set_bit(k as u64, true);
            }
        }
        out
    }

    pub fn reader(&self) -> BitReader<'_> {
        BitReader { bits: self, pos: 0 }
    }

    /// Parses a string of '0'/'1' characters; whitespace is ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut bits = Vec::new();
        for ch in text.chars() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                c if c.is_whitespace() => {}
                c => return Err(parse(1, format!("unexpected character {c:?} in bit string"))),
            }
        }
        Ok(Self(bits))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for bit in &self.0 {
            f.write_str(if *bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Sequential reader over a [`BitString`].
pub struct BitReader<'a> {
    bits: &'a BitString,
    pos: usize,
}

impl BitReader<'_> {
    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        if self.pos >= self.bits.len() {
            return Err(range("bit string exhausted"));
        }
        self.pos += 1;
        Ok(self.bits.get(self.pos - 1))
    }

    pub fn read_uint(&mut self, width: usize) -> Result<u64> {
        if width > 64 {
            return Err(range(format!("field width {width} exceeds 64 bits")));
        }
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn read_big(&mut self, width: usize) -> Result<BigUint> {
        if self.remaining() < width {
            return Err(range("bit string exhausted"));
        }
        let out = self.bits.slice(self.pos, self.pos + width).to_biguint();
        self.pos += width;
        Ok(out)
    }

    pub fn read_gamma(&mut self) -> Result<u64> {
        let mut zeros = 0;
        while !self.read_bit()? {
            zeros += 1;
            if zeros >= 64 {
                return Err(range("gamma code too long"));
            }
        }
        let mut v = 1u64;
        for _ in 0..zeros {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v - 1)
    }
}

/// Number of bits needed to write every integer in `[0, range)`, i.e.
/// `⌈log₂ range⌉` (zero for ranges of size 0 or 1).
pub fn index_width(range: &BigUint) -> usize {
    if range <= &BigUint::from(1u8) {
        0
    } else {
        (range - 1u8).bits() as usize
    }
}

/// Bits needed for a value below `bound` (a `u64` convenience wrapper).
pub fn width_for(bound: u64) -> usize {
    index_width(&BigUint::from(bound))
}
