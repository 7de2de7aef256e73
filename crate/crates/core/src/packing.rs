//! Hex packing of per-element state indices, shared by the codebook file
//! format and the feedback wire protocol.
//!
//! Element `i` (row-major, `i = m·N + n`) occupies bits `[i·k, (i+1)·k)` of
//! the bit stream, least-significant bit first within each byte. The stream
//! is zero-padded to a byte boundary and written as upper-case hex.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PackError {
    #[error("payload has {got} hex digits, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("invalid hex digit at position {0}")]
    BadDigit(usize),
    #[error("padding bits are not zero")]
    NonZeroPadding,
    #[error("state index {index} at element {element} out of range")]
    IndexOutOfRange { element: usize, index: usize },
}

/// Number of hex digits for `count` elements at `bits` bits each.
pub fn packed_hex_len(count: usize, bits: u32) -> usize {
    (count * bits as usize).div_ceil(8) * 2
}

pub fn pack_hex(indices: &[usize], bits: u32) -> String {
    let total_bits = indices.len() * bits as usize;
    let mut bytes = vec![0u8; total_bits.div_ceil(8)];
    for (i, &v) in indices.iter().enumerate() {
        for b in 0..bits as usize {
            if (v >> b) & 1 == 1 {
                let pos = i * bits as usize + b;
                bytes[pos / 8] |= 1 << (pos % 8);
            }
        }
    }
    let mut s = String::with_capacity(bytes.len() * 2);
    for byte in bytes {
        s.push_str(&format!("{byte:02X}"));
    }
    s
}

/// Inverse of [`pack_hex`]; accepts either hex case. `limit` bounds each index.
pub fn unpack_hex(hex: &str, count: usize, bits: u32, limit: usize) -> Result<Vec<usize>, PackError> {
    let expected = packed_hex_len(count, bits);
    if hex.len() != expected {
        return Err(PackError::Length {
            expected,
            got: hex.len(),
        });
    }
    let digits = hex.as_bytes();
    let mut bytes = Vec::with_capacity(expected / 2);
    for (i, pair) in digits.chunks(2).enumerate() {
        let hi = hex_val(pair[0]).ok_or(PackError::BadDigit(2 * i))?;
        let lo = hex_val(pair[1]).ok_or(PackError::BadDigit(2 * i + 1))?;
        bytes.push(hi << 4 | lo);
    }
    let bit = |pos: usize| (bytes[pos / 8] >> (pos % 8)) & 1;
    let used = count * bits as usize;
    if (used..bytes.len() * 8).any(|p| bit(p) != 0) {
        return Err(PackError::NonZeroPadding);
    }
    (0..count)
        .map(|i| {
            let v = (0..bits as usize).fold(0usize, |acc, b| acc | (bit(i * bits as usize + b) as usize) << b);
            if v >= limit {
                Err(PackError::IndexOutOfRange { element: i, index: v })
            } else {
                Ok(v)
            }
        })
        .collect()
}

fn hex_val(c: u8) -> Option<u8> {
    match c {
        b'0'..=b'9' => Some(c - b'0'),
        b'a'..=b'f' => Some(c - b'a' + 10),
        b'A'..=b'F' => Some(c - b'A' + 10),
        _ => None,
    }
}

/// Reorders a Kronecker-order vector (`k = n·M + m`) into row-major (`m·N + n`).
pub fn to_row_major<V: Copy>(kron: &[V], rows: usize, cols: usize) -> Vec<V> {
    let mut out = Vec::with_capacity(kron.len());
    for m in 0..rows {
        for n in 0..cols {
            out.push(kron[n * rows + m]);
        }
    }
    out
}

/// Inverse of [`to_row_major`].
pub fn from_row_major<V: Copy>(row_major: &[V], rows: usize, cols: usize) -> Vec<V> {
    let mut out = Vec::with_capacity(row_major.len());
    for n in 0..cols {
        for m in 0..rows {
            out.push(row_major[m * cols + n]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn documented_example() {
        // 2x2 row-major states [[0, 1], [1, 1]] → bits 0,1,1,1 → 0b0000_1110.
        assert_eq!(pack_hex(&[0, 1, 1, 1], 1), "0E");
        assert_eq!(pack_hex(&[1; 64], 1), "FFFFFFFFFFFFFFFF");
        assert_eq!(unpack_hex("0e", 4, 1, 2).unwrap(), vec![0, 1, 1, 1]);
    }

    #[test]
    fn rejects_bad_payloads() {
        assert_eq!(unpack_hex("0E0", 4, 1, 2), Err(PackError::Length { expected: 2, got: 3 }));
        assert_eq!(unpack_hex("0G", 4, 1, 2), Err(PackError::BadDigit(1)));
        assert_eq!(unpack_hex("1E", 4, 1, 2), Err(PackError::NonZeroPadding));
        assert!(matches!(unpack_hex("03", 1, 2, 3), Err(PackError::IndexOutOfRange { .. })));
    }

    #[test]
    fn reorder_round_trip() {
        let kron: Vec<usize> = (0..12).collect();
        let rm = to_row_major(&kron, 3, 4);
        assert_eq!(&rm[..4], &[0, 3, 6, 9]);
        assert_eq!(from_row_major(&rm, 3, 4), kron);
    }

    proptest! {
        #[test]
        fn pack_unpack_lossless(bits in 1u32..=4, raw in proptest::collection::vec(any::<usize>(), 1..80)) {
            let limit = 1usize << bits;
            let idx: Vec<usize> = raw.iter().map(|v| v % limit).collect();
            let hex = pack_hex(&idx, bits);
            prop_assert_eq!(hex.len(), packed_hex_len(idx.len(), bits));
            prop_assert_eq!(unpack_hex(&hex, idx.len(), bits, limit).unwrap(), idx);
        }
    }
}
