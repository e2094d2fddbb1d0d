//! Orthonormal 8×8 DCT-II and its inverse.

use crate::scalar::Scalar;

pub type Block<T> = [T; 64];

/// Separable orthonormal 8-point DCT with a precomputed basis.
#[derive(Clone, Debug)]
pub struct Dct8<T> {
    // basis[u][x] = a(u) cos((2x + 1) u pi / 16)
    basis: [[T; 8]; 8],
}

impl<T: Scalar> Default for Dct8<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Dct8<T> {
    pub fn new() -> Self {
        let mut basis = [[T::zero(); 8]; 8];
        for (u, row) in basis.iter_mut().enumerate() {
            let a = if u == 0 {
                (1.0f64 / 8.0).sqrt()
            } else {
                (2.0f64 / 8.0).sqrt()
            };
            for (x, b) in row.iter_mut().enumerate() {
                *b =
                    T::lit(a * ((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0).cos());
            }
        }
        Dct8 { basis }
    }

    /// Spatial block (row-major) to coefficients (row-major, `[v*8 + u]`).
    pub fn forward(&self, block: &Block<T>) -> Block<T> {
        let mut tmp = [T::zero(); 64];
        // rows
        for y in 0..8 {
            for u in 0..8 {
                let mut acc = T::zero();
                for x in 0..8 {
                    acc += self.basis[u][x] * block[y * 8 + x];
                }
                tmp[y * 8 + u] = acc;
            }
        }
        let mut out = [T::zero(); 64];
        // columns
        for u in 0..8 {
            for v in 0..8 {
                let mut acc = T::zero();
                for y in 0..8 {
                    acc += self.basis[v][y] * tmp[y * 8 + u];
                }
                out[v * 8 + u] = acc;
            }
        }
        out
    }

    pub fn inverse(&self, coeffs: &Block<T>) -> Block<T> {
        let mut tmp = [T::zero(); 64];
        for u in 0..8 {
            for y in 0..8 {
                let mut acc = T::zero();
                for v in 0..8 {
                    acc += self.basis[v][y] * coeffs[v * 8 + u];
                }
                tmp[y * 8 + u] = acc;
            }
        }
        let mut out = [T::zero(); 64];
        for y in 0..8 {
            for x in 0..8 {
                let mut acc = T::zero();
                for u in 0..8 {
                    acc += self.basis[u][x] * tmp[y * 8 + u];
                }
                out[y * 8 + x] = acc;
            }
        }
        out
    }
}
