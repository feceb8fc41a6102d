//! Fixed-length bit strings for keys, broadcasts, and extractor seeds.

use std::fmt;
use std::ops::{BitXor, BitXorAssign};

use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;

/// A bit string of fixed length. Bit `k` lives in block `k / 64` at position
/// `k % 64`. Hex encoding packs bits big-endian within each byte (bit 0 is
/// the most significant bit of the first byte), padding the last byte with
/// zeros.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "BitsWire", try_from = "BitsWire")]
pub struct Bits {
    len: usize,
    blocks: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct BitsWire {
    len: usize,
    hex: String,
}

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            blocks: vec![0; len.div_ceil(64)],
        }
    }

    /// Draws `len` uniform bits from the generator.
    pub fn random(rng: &mut SplitMix64, len: usize) -> Self {
        let mut out = Self::zeros(len);
        for block in &mut out.blocks {
            *block = rng.next_u64();
        }
        out.clear_padding();
        out
    }

    /// Builds a bit string from the low `len` bits of `value` (bit 0 of the
    /// string is bit 0 of `value`). Requires `len <= 64`.
    pub fn from_u64(len: usize, value: u64) -> Self {
        assert!(len <= 64, "from_u64 supports at most 64 bits");
        let mut out = Self::zeros(len);
        if len > 0 {
            out.blocks[0] = if len == 64 {
                value
            } else {
                value & ((1 << len) - 1)
            };
        }
        out
    }

    /// The low `min(len, 64)` bits as an integer, bit 0 least significant.
    pub fn low_u64(&self) -> u64 {
        if self.blocks.is_empty() {
            0
        } else {
            self.blocks[0]
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, index: usize) -> bool {
        debug_assert!(index < self.len);
        self.blocks[index / 64] >> (index % 64) & 1 == 1
    }

    pub fn set(&mut self, index: usize, value: bool) {
        debug_assert!(index < self.len);
        let mask = 1u64 << (index % 64);
        if value {
            self.blocks[index / 64] |= mask;
        } else {
            self.blocks[index / 64] &= !mask;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().all(|&b| b == 0)
    }

    fn clear_padding(&mut self) {
        let used = self.len % 64;
        if used != 0 {
            let last = self.blocks.len() - 1;
            self.blocks[last] &= (1u64 << used) - 1;
        }
        if self.len == 0 {
            self.blocks.clear();
        }
    }

    pub fn to_hex(&self) -> String {
        let n_bytes = self.len.div_ceil(8);
        let mut out = String::with_capacity(n_bytes * 2);
        for byte_idx in 0..n_bytes {
            let mut byte = 0u8;
            for bit in 0..8 {
                let k = byte_idx * 8 + bit;
                if k < self.len && self.get(k) {
                    byte |= 0x80 >> bit;
                }
            }
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    pub fn from_hex(len: usize, hex: &str) -> Result<Self, BitsDecodeError> {
        let n_bytes = len.div_ceil(8);
        if hex.len() != n_bytes * 2 {
            return Err(BitsDecodeError::BadLength {
                expected: n_bytes * 2,
                found: hex.len(),
            });
        }
        let mut out = Self::zeros(len);
        for byte_idx in 0..n_bytes {
            let byte = u8::from_str_radix(&hex[byte_idx * 2..byte_idx * 2 + 2], 16)
                .map_err(|_| BitsDecodeError::BadDigit)?;
            for bit in 0..8 {
                let k = byte_idx * 8 + bit;
                let set = byte & (0x80 >> bit) != 0;
                if k < len {
                    out.set(k, set);
                } else if set {
                    return Err(BitsDecodeError::NonzeroPadding);
                }
            }
        }
        Ok(out)
    }
}

impl BitXorAssign<&Bits> for Bits {
    fn bitxor_assign(&mut self, rhs: &Bits) {
        assert_eq!(self.len, rhs.len, "xor of bit strings of unequal length");
        for (a, b) in self.blocks.iter_mut().zip(&rhs.blocks) {
            *a ^= b;
        }
    }
}

impl BitXor for &Bits {
    type Output = Bits;

    fn bitxor(self, rhs: &Bits) -> Bits {
        let mut out = self.clone();
        out ^= rhs;
        out
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({}:{})", self.len, self.to_hex())
    }
}

impl From<Bits> for BitsWire {
    fn from(bits: Bits) -> Self {
        BitsWire {
            len: bits.len,
            hex: bits.to_hex(),
        }
    }
}

impl TryFrom<BitsWire> for Bits {
    type Error = BitsDecodeError;

    fn try_from(wire: BitsWire) -> Result<Self, Self::Error> {
        Bits::from_hex(wire.len, &wire.hex)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BitsDecodeError {
    #[error("hex string has {found} characters, expected {expected}")]
    BadLength { expected: usize, found: usize },
    #[error("hex string contains a non-hex digit")]
    BadDigit,
    #[error("hex string sets padding bits beyond the declared length")]
    NonzeroPadding,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hex_round_trip_known_values() {
        let mut b = Bits::zeros(9);
        b.set(0, true);
        b.set(8, true);
        assert_eq!(b.to_hex(), "8080");
        assert_eq!(Bits::from_hex(9, "8080").unwrap(), b);
    }

    #[test]
    fn from_hex_rejects_padding_bits() {
        assert_eq!(
            Bits::from_hex(4, "0f"),
            Err(BitsDecodeError::NonzeroPadding)
        );
    }

    #[test]
    fn xor_is_involutive() {
        let mut rng = SplitMix64::new(3);
        let a = Bits::random(&mut rng, 130);
        let b = Bits::random(&mut rng, 130);
        let c = &(&a ^ &b) ^ &b;
        assert_eq!(a, c);
    }

    proptest! {
        #[test]
        fn hex_round_trip(seed in any::<u64>(), len in 0usize..200) {
            let mut rng = SplitMix64::new(seed);
            let bits = Bits::random(&mut rng, len);
            let back = Bits::from_hex(len, &bits.to_hex()).unwrap();
            prop_assert_eq!(bits, back);
        }

        #[test]
        fn from_u64_round_trips_low_bits(value in any::<u64>(), len in 1usize..=64) {
            let bits = Bits::from_u64(len, value);
            let masked = if len == 64 { value } else { value & ((1 << len) - 1) };
            prop_assert_eq!(bits.low_u64(), masked);
        }
    }
}
