//! Zero-run-length + Exp-Golomb coding of quantized coefficient blocks.
//!
//! Each block is scanned in zigzag order and written as a sequence of
//! `(ue(run), se(level))` pairs, where `run` counts the zeros preceding a
//! non-zero `level`. A pair with level 0 is the end-of-block symbol. Bits are
//! packed most-significant first and the stream is zero-padded to a byte
//! boundary.

use super::quant::ZIGZAG;
use crate::error::{AgdlError, Result};

/// Longest accepted Exp-Golomb prefix; values are at most 32 bits wide.
const MAX_PREFIX: u32 = 32;

#[derive(Default, Debug)]
pub struct BitWriter {
    bytes: Vec<u8>,
    acc: u8,
    filled: u8,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn put_bit(&mut self, bit: bool) {
        self.acc = (self.acc << 1) | bit as u8;
        self.filled += 1;
        if self.filled == 8 {
            self.bytes.push(self.acc);
            self.acc = 0;
            self.filled = 0;
        }
    }

    /// Write the low `count` bits of `value`, MSB first.
    pub fn put_bits(&mut self, value: u64, count: u32) {
        for i in (0..count).rev() {
            self.put_bit((value >> i) & 1 == 1);
        }
    }

    /// Unsigned Exp-Golomb.
    pub fn put_ue(&mut self, value: u32) {
        let v = value as u64 + 1;
        let len = 64 - v.leading_zeros();
        self.put_bits(0, len - 1);
        self.put_bits(v, len);
    }

    /// Signed Exp-Golomb: n > 0 maps to 2n - 1, n <= 0 to -2n.
    pub fn put_se(&mut self, value: i32) {
        let mapped = if value > 0 {
            2 * value as i64 - 1
        } else {
            -2 * value as i64
        };
        // |level| never approaches 2^31 for 8-bit input
        self.put_ue(mapped as u32);
    }

    pub fn bit_len(&self) -> usize {
        self.bytes.len() * 8 + self.filled as usize
    }

    pub fn finish(mut self) -> Vec<u8> {
        if self.filled > 0 {
            self.acc <<= 8 - self.filled;
            self.bytes.push(self.acc);
        }
        self.bytes
    }
}

pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    #[inline]
    pub fn byte_offset(&self) -> usize {
        self.pos / 8
    }

    pub fn get_bit(&mut self) -> Result<bool> {
        let byte = self
            .bytes
            .get(self.pos / 8)
            .ok_or_else(|| AgdlError::payload(self.pos / 8, "codeword overruns buffer"))?;
        let bit = (byte >> (7 - (self.pos % 8))) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn get_bits(&mut self, count: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..count {
            v = (v << 1) | self.get_bit()? as u64;
        }
        Ok(v)
    }

    pub fn get_ue(&mut self) -> Result<u32> {
        let start = self.byte_offset();
        let mut zeros = 0u32;
        while !self.get_bit()? {
            zeros += 1;
            if zeros > MAX_PREFIX {
                return Err(AgdlError::payload(start, "Exp-Golomb prefix too long"));
            }
        }
        let rest = self.get_bits(zeros)?;
        let v = ((1u64 << zeros) | rest) - 1;
        u32::try_from(v).map_err(|_| AgdlError::payload(start, "Exp-Golomb value out of range"))
    }

    pub fn get_se(&mut self) -> Result<i32> {
        let start = self.byte_offset();
        let m = self.get_ue()? as i64;
        let v = if m % 2 == 1 { (m + 1) / 2 } else { -(m / 2) };
        i32::try_from(v).map_err(|_| AgdlError::payload(start, "signed value out of range"))
    }

    /// Remaining bits must be the zero padding of the final byte.
    pub fn expect_end(&mut self) -> Result<()> {
        let end = self.bytes.len() * 8;
        if end - self.pos >= 8 {
            return Err(AgdlError::payload(
                self.byte_offset(),
                "trailing data after last block",
            ));
        }
        while self.pos < end {
            if self.get_bit()? {
                return Err(AgdlError::payload(
                    self.byte_offset(),
                    "non-zero padding bits",
                ));
            }
        }
        Ok(())
    }
}

/// Append one natural-order coefficient block.
pub fn write_block(w: &mut BitWriter, block: &[i32; 64]) {
    let mut run = 0u32;
    for &n in ZIGZAG.iter() {
        let level = block[n];
        if level == 0 {
            run += 1;
        } else {
            w.put_ue(run);
            w.put_se(level);
            run = 0;
        }
    }
    // end of block
    w.put_ue(0);
    w.put_se(0);
}

pub fn read_block(r: &mut BitReader<'_>) -> Result<[i32; 64]> {
    let mut block = [0i32; 64];
    let mut pos = 0usize;
    loop {
        let at = r.byte_offset();
        let run = r.get_ue()? as usize;
        let level = r.get_se()?;
        if level == 0 {
            if run != 0 {
                return Err(AgdlError::payload(
                    at,
                    "end-of-block symbol with non-zero run",
                ));
            }
            return Ok(block);
        }
        pos += run;
        if pos >= 64 {
            return Err(AgdlError::payload(at, "run length overflows block"));
        }
        block[ZIGZAG[pos]] = level;
        pos += 1;
    }
}

/// Entropy-code a sequence of natural-order blocks.
pub fn entropy_encode(blocks: &[[i32; 64]]) -> Vec<u8> {
    let mut w = BitWriter::new();
    for b in blocks {
        write_block(&mut w, b);
    }
    w.finish()
}

/// Decode exactly `count` blocks; the stream must end right after them.
pub fn entropy_decode(bytes: &[u8], count: usize) -> Result<Vec<[i32; 64]>> {
    let mut r = BitReader::new(bytes);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(read_block(&mut r)?);
    }
    r.expect_end()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits_of(f: impl FnOnce(&mut BitWriter)) -> String {
        let mut w = BitWriter::new();
        f(&mut w);
        let n = w.bit_len();
        let bytes = w.finish();
        (0..n)
            .map(|i| {
                if (bytes[i / 8] >> (7 - i % 8)) & 1 == 1 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }

    #[test]
    fn unsigned_codewords() {
        assert_eq!(bits_of(|w| w.put_ue(0)), "1");
        assert_eq!(bits_of(|w| w.put_ue(1)), "010");
        assert_eq!(bits_of(|w| w.put_ue(2)), "011");
        assert_eq!(bits_of(|w| w.put_ue(3)), "00100");
        assert_eq!(bits_of(|w| w.put_ue(7)), "0001000");
    }

    #[test]
    fn signed_mapping() {
        // 1 -> 1, -1 -> 2, 2 -> 3, 0 -> 0
        assert_eq!(bits_of(|w| w.put_se(0)), "1");
        assert_eq!(bits_of(|w| w.put_se(1)), "010");
        assert_eq!(bits_of(|w| w.put_se(-1)), "011");
        assert_eq!(bits_of(|w| w.put_se(2)), "00100");
    }

    #[test]
    fn empty_block_is_two_bits() {
        let bytes = entropy_encode(&[[0; 64]]);
        assert_eq!(bytes, vec![0b1100_0000]);
        assert_eq!(entropy_decode(&bytes, 1).unwrap(), vec![[0; 64]]);
    }

    #[test]
    fn last_coefficient_set() {
        let mut b = [0i32; 64];
        b[63] = -5;
        b[0] = 1016;
        let bytes = entropy_encode(&[b]);
        assert_eq!(entropy_decode(&bytes, 1).unwrap(), vec![b]);
    }

    #[test]
    fn truncated_stream_is_malformed() {
        let mut b = [0i32; 64];
        for (i, v) in b.iter_mut().enumerate() {
            *v = i as i32 - 30;
        }
        let bytes = entropy_encode(&[b, b]);
        for cut in 0..bytes.len() {
            assert!(matches!(
                entropy_decode(&bytes[..cut], 2),
                Err(AgdlError::MalformedPayload { .. })
            ));
        }
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        let mut bytes = entropy_encode(&[[0; 64]]);
        bytes.push(0);
        assert!(entropy_decode(&bytes, 1).is_err());
        assert!(entropy_decode(&[0b1110_0000], 1).is_err());
    }

    #[test]
    fn run_overflow_is_rejected() {
        let mut w = BitWriter::new();
        w.put_ue(64);
        w.put_se(3);
        assert!(entropy_decode(&w.finish(), 1).is_err());
    }

    #[test]
    fn long_prefix_is_rejected() {
        assert!(entropy_decode(&[0u8; 8], 1).is_err());
    }

    fn sparse_block() -> impl Strategy<Value = [i32; 64]> {
        prop::collection::vec((0usize..64, -2048i32..2048), 0..20).prop_map(|entries| {
            let mut b = [0i32; 64];
            for (i, v) in entries {
                b[i] = v;
            }
            b
        })
    }

    proptest! {
        #[test]
        fn block_sequences_round_trip(blocks in prop::collection::vec(sparse_block(), 0..12)) {
            let bytes = entropy_encode(&blocks);
            prop_assert_eq!(entropy_decode(&bytes, blocks.len()).unwrap(), blocks);
        }

        #[test]
        fn exp_golomb_round_trip(vals in prop::collection::vec(any::<i32>().prop_map(|v| v / 2), 1..50),
                                 uvals in prop::collection::vec(0u32..u32::MAX, 1..50)) {
            let mut w = BitWriter::new();
            for &v in &vals { w.put_se(v); }
            for &u in &uvals { w.put_ue(u); }
            let bytes = w.finish();
            let mut r = BitReader::new(&bytes);
            for &v in &vals { prop_assert_eq!(r.get_se().unwrap(), v); }
            for &u in &uvals { prop_assert_eq!(r.get_ue().unwrap(), u); }
        }
    }
}
