//! Compressive sensing of the critical pixels and least-norm refinement.
//!
//! The encoder takes `M` measurements `y = H·c` of the `N_c` critical pixels
//! with a seeded Bernoulli matrix `H` (entries ±1/√M). The decoder, holding the
//! soft-decoded values `c_g`, applies the smallest correction that makes them
//! consistent with `y`:
//!
//! ```text
//! δ* = Hᵀ (H Hᵀ)⁻¹ (y − H c_g)
//! ```
//!
//! `H Hᵀ` is factored with Cholesky and solved with two triangular sweeps.

use crate::critical_mask::CriticalSet;
use crate::error::{AgdlError, Result};
use crate::raster::Raster;
use crate::scalar::Scalar;

pub const PIVOT_TOLERANCE: f64 = 1e-9;
pub const MAX_SEED_ATTEMPTS: u64 = 16;
pub const MIN_STEP: f64 = 1e-6;
pub const CODE_LEVELS: f64 = 65535.0;

/// SplitMix64 (Steele, Lea & Flood), the sign source for `H`.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// Dense row-major `rows`×`cols` sampling matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SensingMatrix<T> {
    rows: usize,
    cols: usize,
    entries: Vec<T>,
    /// Seed that actually produced the entries (after rank retries).
    seed: u64,
}

impl<T: Scalar> SensingMatrix<T> {
    /// Wrap explicit entries; used for hand-built systems.
    pub fn from_rows(rows: usize, cols: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(AgdlError::invalid(
                "matrix entry count does not match shape",
            ));
        }
        if rows > cols {
            return Err(AgdlError::invalid("sampling matrix must not be tall"));
        }
        Ok(SensingMatrix {
            rows,
            cols,
            entries,
            seed: 0,
        })
    }

    fn bernoulli(seed: u64, rows: usize, cols: usize) -> Self {
        let mut rng = SplitMix64::new(seed);
        let mag = T::one() / T::lit(rows as f64).sqrt();
        let entries = (0..rows * cols)
            .map(|_| if rng.next_u64() & 1 == 1 { mag } else { -mag })
            .collect();
        SensingMatrix {
            rows,
            cols,
            entries,
            seed,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.entries[i * self.cols + j]
    }

    fn row(&self, i: usize) -> &[T] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// H·v
    pub fn apply(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(AgdlError::invalid(format!(
                "vector of length {} for a matrix with {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&h, &x)| h * x).sum())
            .collect())
    }

    /// Hᵀ·w
    pub fn apply_transpose(&self, w: &[T]) -> Result<Vec<T>> {
        if w.len() != self.rows {
            return Err(AgdlError::invalid(
                "vector length does not match matrix rows",
            ));
        }
        let mut out = vec![T::zero(); self.cols];
        for (i, &wi) in w.iter().enumerate() {
            for (o, &h) in out.iter_mut().zip(self.row(i)) {
                *o += h * wi;
            }
        }
        Ok(out)
    }

    /// Lower Cholesky factor of H·Hᵀ, row-major `rows`×`rows`.
    pub fn gram_cholesky(&self) -> Result<Vec<T>> {
        let m = self.rows;
        let mut gram = vec![T::zero(); m * m];
        for i in 0..m {
            for j in 0..=i {
                let g: T = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(&a, &b)| a * b)
                    .sum();
                gram[i * m + j] = g;
                gram[j * m + i] = g;
            }
        }
        cholesky(&gram, m, T::lit(PIVOT_TOLERANCE))
    }
}

/// In-place style Cholesky of a symmetric `n`×`n` matrix; returns L.
pub fn cholesky<T: Scalar>(a: &[T], n: usize, pivot_tol: T) -> Result<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d.is_nan() || d <= pivot_tol {
            return Err(AgdlError::RankFailure(format!(
                "pivot {j} is {} (tolerance {pivot_tol})",
                d
            )));
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(l)
}

/// Solve (L Lᵀ) x = b.
pub fn cholesky_solve<T: Scalar>(l: &[T], n: usize, b: &[T]) -> Vec<T> {
    let mut z = b.to_vec();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[k * n + i] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    z
}

/// Seeded `m`×`n` Bernoulli matrix with full row rank.
///
/// Seeds `seed, seed+1, …` are tried until H·Hᵀ factors; the effective seed is
/// recorded on the matrix.
pub fn build_matrix<T: Scalar>(seed: u64, m: usize, n: usize) -> Result<SensingMatrix<T>> {
    if m > n {
        return Err(AgdlError::invalid(format!(
            "cannot take {m} measurements of {n} values"
        )));
    }
    if m == 0 {
        return Ok(SensingMatrix {
            rows: 0,
            cols: n,
            entries: Vec::new(),
            seed,
        });
    }
    for attempt in 0..MAX_SEED_ATTEMPTS {
        let h = SensingMatrix::bernoulli(seed.wrapping_add(attempt), m, n);
        if h.gram_cholesky().is_ok() {
            return Ok(h);
        }
    }
    Err(AgdlError::RankFailure(format!(
        "no full-rank {m}x{n} matrix within {MAX_SEED_ATTEMPTS} seeds from {seed}"
    )))
}

/// y = H·c
pub fn sample<T: Scalar>(h: &SensingMatrix<T>, c: &[T]) -> Result<Vec<T>> {
    h.apply(c)
}

/// Minimum-norm δ with H·(c_g + δ) = y.
pub fn least_norm_adjust<T: Scalar>(h: &SensingMatrix<T>, y: &[T], c_g: &[T]) -> Result<Vec<T>> {
    if y.len() != h.rows() {
        return Err(AgdlError::invalid(format!(
            "{} measurements for a matrix with {} rows",
            y.len(),
            h.rows()
        )));
    }
    let hc = h.apply(c_g)?;
    if h.rows() == 0 {
        return Ok(vec![T::zero(); h.cols()]);
    }
    let residual: Vec<T> = y.iter().zip(&hc).map(|(&a, &b)| a - b).collect();
    let l = h.gram_cholesky()?;
    let w = cholesky_solve(&l, h.rows(), &residual);
    h.apply_transpose(&w)
}

/// Add `delta[i]` to the pixel at the i-th critical coordinate.
pub fn apply_adjustment<T: Scalar>(
    img: &Raster<T>,
    set: &CriticalSet<T>,
    delta: &[T],
) -> Result<Raster<T>> {
    if delta.len() != set.len() {
        return Err(AgdlError::invalid(format!(
            "{} adjustments for {} critical pixels",
            delta.len(),
            set.len()
        )));
    }
    if img.width() != set.width || img.height() != set.height {
        return Err(AgdlError::invalid(
            "image does not match critical set dimensions",
        ));
    }
    let mut out = img.clone();
    for (&(r, c), &d) in set.coords.iter().zip(delta) {
        out.set(c, r, img.get(c, r) + d);
    }
    Ok(out)
}

/// Uniformly quantized measurement vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurements {
    pub codes: Vec<u16>,
    pub offset: f64,
    pub step: f64,
}

impl Measurements {
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Wire size in bytes.
    pub fn encoded_len(&self) -> usize {
        4 + 8 + 8 + 2 * self.codes.len()
    }

    /// `M: u32 | offset: f64 | step: f64 | M × u16`, big-endian.
    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.codes.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.offset.to_be_bytes());
        out.extend_from_slice(&self.step.to_be_bytes());
        for c in &self.codes {
            out.extend_from_slice(&c.to_be_bytes());
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = Vec::with_capacity(self.encoded_len());
        self.write_to(&mut v);
        v
    }

    /// Parse from the front of `bytes`; `base` is the absolute offset used in
    /// error reports. Returns the measurements and bytes consumed.
    pub fn read_from(bytes: &[u8], base: usize) -> Result<(Self, usize)> {
        let need = |n: usize, what: &str| -> Result<()> {
            if bytes.len() < n {
                Err(AgdlError::bitstream(
                    base + bytes.len(),
                    format!("truncated {what}"),
                ))
            } else {
                Ok(())
            }
        };
        need(20, "measurement header")?;
        let m = u32::from_be_bytes(bytes[0..4].try_into().expect("4 bytes")) as usize;
        let offset = f64::from_be_bytes(bytes[4..12].try_into().expect("8 bytes"));
        let step = f64::from_be_bytes(bytes[12..20].try_into().expect("8 bytes"));
        if !offset.is_finite() || !step.is_finite() || step < 0.0 || (m > 0 && step <= 0.0) {
            return Err(AgdlError::bitstream(
                base + 4,
                "invalid measurement offset/step",
            ));
        }
        let total = m
            .checked_mul(2)
            .and_then(|b| b.checked_add(20))
            .ok_or_else(|| AgdlError::bitstream(base, "measurement count overflows"))?;
        need(total, "measurement codes")?;
        let codes = bytes[20..total]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        Ok((
            Measurements {
                codes,
                offset,
                step,
            },
            total,
        ))
    }
}

/// 16-bit uniform quantization over [min, max] of the raw samples.
pub fn quantize(raw: &[f64]) -> Result<Measurements> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(AgdlError::invalid("measurements must be finite"));
    }
    if raw.is_empty() {
        return Ok(Measurements {
            codes: Vec::new(),
            offset: 0.0,
            step: 0.0,
        });
    }
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let step = ((hi - lo) / CODE_LEVELS).max(MIN_STEP);
    let codes = raw
        .iter()
        .map(|&v| ((v - lo) / step).round().clamp(0.0, CODE_LEVELS) as u16)
        .collect();
    Ok(Measurements {
        codes,
        offset: lo,
        step,
    })
}

pub fn dequantize(m: &Measurements) -> Vec<f64> {
    m.codes
        .iter()
        .map(|&c| m.offset + c as f64 * m.step)
        .collect()
}
