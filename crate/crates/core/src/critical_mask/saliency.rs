//! Spectral-residual saliency.
//!
//! The image is shrunk to a fixed 64×64 grid. The log-amplitude spectrum minus
//! its 3×3 local mean (the spectral residual) is recombined with the original
//! phase; the squared magnitude of the inverse transform, blurred and scaled
//! back up, is the saliency score.

use num_traits::Zero;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::filter::{dilate_disk, gaussian_blur, resize_bilinear};
use crate::raster::{Mask, Raster};
use crate::scalar::Scalar;

pub const SALIENCY_GRID: usize = 64;
pub const SALIENCY_BLUR_SIGMA: f64 = 2.5;
const SALIENCY_BLUR_RADIUS: usize = 8;

/// In-place 2-D DFT of a square `n`×`n` row-major buffer.
fn fft_2d<T: Scalar>(buf: &mut [Complex<T>], n: usize, inverse: bool) {
    let mut planner = FftPlanner::<T>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    fft.process(buf);
    transpose(buf, n);
    fft.process(buf);
    transpose(buf, n);
}

fn transpose<T: Copy>(buf: &mut [T], n: usize) {
    for r in 0..n {
        for c in r + 1..n {
            buf.swap(r * n + c, c * n + r);
        }
    }
}

/// Raw saliency on the reduced grid (squared magnitude, unblurred).
fn residual_map<T: Scalar>(small: &Raster<T>) -> Raster<T> {
    let n = SALIENCY_GRID;
    let mean = small.data().iter().copied().sum::<T>() / T::lit((n * n) as f64);
    let (lo, hi) = small
        .data()
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    // no contrast, no residual
    if (hi - lo).is_nan() || hi - lo <= T::lit(1e-9) {
        return Raster::filled(n, n, T::zero());
    }

    let mut spectrum: Vec<Complex<T>> = small
        .data()
        .iter()
        .map(|&v| Complex::new(v - mean, T::zero()))
        .collect();
    fft_2d(&mut spectrum, n, false);

    let amps: Vec<T> = spectrum.iter().map(|c| c.norm()).collect();
    let peak = amps.iter().copied().fold(T::zero(), T::max);
    let floor = peak * T::lit(1e-12);
    let live: Vec<bool> = amps.iter().map(|&a| a > floor).collect();
    let log_amp: Vec<T> = amps
        .iter()
        .zip(&live)
        .map(|(&a, &ok)| if ok { a.ln() } else { T::zero() })
        .collect();

    for i in 0..n * n {
        if !live[i] {
            spectrum[i] = Complex::zero();
            continue;
        }
        // 3x3 mean over live bins, wrapping around the periodic spectrum
        let (r, c) = (i / n, i % n);
        let (mut sum, mut cnt) = (T::zero(), 0usize);
        for dr in [n - 1, 0, 1] {
            for dc in [n - 1, 0, 1] {
                let j = ((r + dr) % n) * n + (c + dc) % n;
                if live[j] {
                    sum += log_amp[j];
                    cnt += 1;
                }
            }
        }
        let residual = (log_amp[i] - sum / T::lit(cnt as f64)).exp();
        spectrum[i] = spectrum[i] / amps[i] * residual;
    }
    fft_2d(&mut spectrum, n, true);
    let norm = T::lit((n * n) as f64);
    Raster::new(
        n,
        n,
        spectrum.iter().map(|c| (c / norm).norm_sqr()).collect(),
    )
    .expect("n x n")
}

/// Saliency scores at full resolution, and the thresholded, dilated ROI mask.
pub fn spectral_saliency<T: Scalar>(
    img: &Raster<T>,
    threshold_ratio: T,
    dilation_radius: usize,
) -> (Raster<T>, Mask) {
    let small = resize_bilinear(img, SALIENCY_GRID, SALIENCY_GRID);
    let raw = residual_map(&small);
    let blurred = gaussian_blur(&raw, T::lit(SALIENCY_BLUR_SIGMA), SALIENCY_BLUR_RADIUS)
        .map(|v| v.max(T::zero()));
    let score = resize_bilinear(&blurred, img.width(), img.height());
    let peak = score.max_value();
    let mask = if peak > T::zero() {
        let cut = threshold_ratio * peak;
        let thresholded = Mask::new(
            img.width(),
            img.height(),
            score.data().iter().map(|&s| s >= cut).collect(),
        )
        .expect("same shape");
        dilate_disk(&thresholded, dilation_radius)
    } else {
        Mask::empty(img.width(), img.height())
    };
    (score, mask)
}
