use crate::error::{AgdlError, Result};

/// Natural (row-major) index of the i-th coefficient in zigzag order.
pub const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27, 20,
    13, 6, 7, 14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58, 59,
    52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
];

/// Annex K luminance table, natural order.
const BASE_LUMA: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// 64 quantizer divisors, stored in zigzag order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantTable {
    zigzag: [u16; 64],
}

impl QuantTable {
    /// The unscaled base table (quality 50).
    pub fn base() -> Self {
        let mut zigzag = [0u16; 64];
        for (i, &n) in ZIGZAG.iter().enumerate() {
            zigzag[i] = BASE_LUMA[n];
        }
        QuantTable { zigzag }
    }

    pub fn from_zigzag(entries: [u16; 64]) -> Result<Self> {
        if entries.iter().any(|&e| !(1..=255).contains(&e)) {
            return Err(AgdlError::invalid("quantizer entries must lie in 1..=255"));
        }
        Ok(QuantTable { zigzag: entries })
    }

    #[inline]
    pub fn zigzag(&self) -> &[u16; 64] {
        &self.zigzag
    }

    /// Divisor for the coefficient at natural (row-major) position.
    pub fn natural(&self) -> [u16; 64] {
        let mut out = [0u16; 64];
        for (i, &n) in ZIGZAG.iter().enumerate() {
            out[n] = self.zigzag[i];
        }
        out
    }
}

/// IJG-style quality scaling of the base table.
pub fn scale_quant_table(quality: u8) -> Result<QuantTable> {
    if !(1..=100).contains(&quality) {
        return Err(AgdlError::invalid(format!(
            "quality must be within 1..=100, got {quality}"
        )));
    }
    let q = quality as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut zigzag = QuantTable::base().zigzag;
    for e in zigzag.iter_mut() {
        *e = ((*e as u32 * scale + 50) / 100).clamp(1, 255) as u16;
    }
    Ok(QuantTable { zigzag })
}
