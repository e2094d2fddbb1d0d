//! Small spatial filters shared by the detectors. All use edge replication.

use crate::raster::{Mask, Raster};
use crate::scalar::Scalar;

/// Normalized 1-D Gaussian taps for offsets `-radius..=radius`.
pub fn gaussian_kernel<T: Scalar>(sigma: T, radius: usize) -> Vec<T> {
    let two_s2 = T::lit(2.0) * sigma * sigma;
    let taps: Vec<T> = (-(radius as isize)..=radius as isize)
        .map(|d| {
            let d = T::lit(d as f64);
            (-(d * d) / two_s2).exp()
        })
        .collect();
    let sum: T = taps.iter().copied().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Separable convolution with a symmetric odd-length kernel.
pub fn convolve_separable<T: Scalar>(img: &Raster<T>, kernel: &[T]) -> Raster<T> {
    let r = (kernel.len() / 2) as isize;
    let horiz = Raster::from_fn(img.width(), img.height(), |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, &w)| w * img.get_clamped(x as isize + k as isize - r, y as isize))
            .sum()
    });
    Raster::from_fn(img.width(), img.height(), |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, &w)| w * horiz.get_clamped(x as isize, y as isize + k as isize - r))
            .sum()
    })
}

pub fn gaussian_blur<T: Scalar>(img: &Raster<T>, sigma: T, radius: usize) -> Raster<T> {
    convolve_separable(img, &gaussian_kernel(sigma, radius))
}

/// Mean over a `(2r+1)`² window.
pub fn box_filter<T: Scalar>(img: &Raster<T>, radius: usize) -> Raster<T> {
    let n = 2 * radius + 1;
    let w = T::one() / T::lit(n as f64);
    convolve_separable(img, &vec![w; n])
}

/// Bilinear resampling with pixel-center alignment.
pub fn resize_bilinear<T: Scalar>(img: &Raster<T>, width: usize, height: usize) -> Raster<T> {
    let sx = img.width() as f64 / width as f64;
    let sy = img.height() as f64 / height as f64;
    let coord = |o: usize, scale: f64, len: usize| -> (usize, usize, T) {
        let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, T::lit(s - i0 as f64))
    };
    Raster::from_fn(width, height, |x, y| {
        let (x0, x1, fx) = coord(x, sx, img.width());
        let (y0, y1, fy) = coord(y, sy, img.height());
        let top = img.get(x0, y0) * (T::one() - fx) + img.get(x1, y0) * fx;
        let bot = img.get(x0, y1) * (T::one() - fx) + img.get(x1, y1) * fx;
        top * (T::one() - fy) + bot * fy
    })
}

/// Binary dilation with a disk of the given radius.
pub fn dilate_disk(mask: &Mask, radius: usize) -> Mask {
    let r = radius as isize;
    let offsets: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
        .collect();
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    Mask::from_fn(mask.width(), mask.height(), |x, y| {
        offsets.iter().any(|&(dx, dy)| {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            nx >= 0 && ny >= 0 && nx < w && ny < h && mask.get(nx as usize, ny as usize)
        })
    })
}
