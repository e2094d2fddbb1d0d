//! Canny edge detection: Gaussian blur, Sobel, non-maximum suppression along
//! four quantized directions, hysteresis relative to the peak gradient.

use std::collections::VecDeque;

use crate::filter::gaussian_blur;
use crate::raster::{Mask, Raster};
use crate::scalar::Scalar;

/// Edge map and the (pre-suppression) gradient magnitude it came from.
#[derive(Clone, Debug)]
pub struct CannyOutput<T> {
    pub edges: Mask,
    pub magnitude: Raster<T>,
}

/// Sobel responses with edge replication; `gy` grows downwards.
pub fn sobel<T: Scalar>(img: &Raster<T>) -> (Raster<T>, Raster<T>) {
    let two = T::lit(2.0);
    let p = |x: usize, y: usize, dx: isize, dy: isize| {
        img.get_clamped(x as isize + dx, y as isize + dy)
    };
    let gx = Raster::from_fn(img.width(), img.height(), |x, y| {
        (p(x, y, 1, -1) + two * p(x, y, 1, 0) + p(x, y, 1, 1))
            - (p(x, y, -1, -1) + two * p(x, y, -1, 0) + p(x, y, -1, 1))
    });
    let gy = Raster::from_fn(img.width(), img.height(), |x, y| {
        (p(x, y, -1, 1) + two * p(x, y, 0, 1) + p(x, y, 1, 1))
            - (p(x, y, -1, -1) + two * p(x, y, 0, -1) + p(x, y, 1, -1))
    });
    (gx, gy)
}

/// Neighbour offsets (behind, ahead) across the edge for a gradient direction.
fn across<T: Scalar>(gx: T, gy: T) -> ((isize, isize), (isize, isize)) {
    let mut angle = gy.atan2(gx).as_f64().to_degrees();
    if angle < 0.0 {
        angle += 180.0;
    }
    if !(22.5..157.5).contains(&angle) {
        ((-1, 0), (1, 0))
    } else if angle < 67.5 {
        ((-1, -1), (1, 1))
    } else if angle < 112.5 {
        ((0, -1), (0, 1))
    } else {
        ((1, -1), (-1, 1))
    }
}

pub fn canny<T: Scalar>(img: &Raster<T>, sigma: T, low_ratio: T, high_ratio: T) -> CannyOutput<T> {
    let (w, h) = (img.width(), img.height());
    let blurred = gaussian_blur(img, sigma, 2);
    let (gx, gy) = sobel(&blurred);
    let magnitude = Raster::from_fn(w, h, |x, y| gx.get(x, y).hypot(gy.get(x, y)));
    let peak = magnitude.max_value();
    if peak.is_nan() || peak <= T::zero() {
        return CannyOutput {
            edges: Mask::empty(w, h),
            magnitude,
        };
    }

    let mag_at = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            T::zero()
        } else {
            magnitude.get(x as usize, y as usize)
        }
    };
    // Strictly greater than the neighbour behind, at least the one ahead: a
    // plateau two pixels wide keeps only its first pixel.
    let thin = Raster::from_fn(w, h, |x, y| {
        let m = magnitude.get(x, y);
        let ((bx, by), (ax, ay)) = across(gx.get(x, y), gy.get(x, y));
        let (xi, yi) = (x as isize, y as isize);
        if m > mag_at(xi + bx, yi + by) && m >= mag_at(xi + ax, yi + ay) {
            m
        } else {
            T::zero()
        }
    });

    let low = low_ratio * peak;
    let high = high_ratio * peak;
    let mut edges = Mask::empty(w, h);
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if thin.get(x, y) >= high && !edges.get(x, y) {
                edges.set(x, y, true);
                queue.push_back((x, y));
                while let Some((cx, cy)) = queue.pop_front() {
                    for dy in -1isize..=1 {
                        for dx in -1isize..=1 {
                            let (nx, ny) = (cx as isize + dx, cy as isize + dy);
                            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                                continue;
                            }
                            let (nx, ny) = (nx as usize, ny as usize);
                            if !edges.get(nx, ny)
                                && thin.get(nx, ny) >= low
                                && thin.get(nx, ny) > T::zero()
                            {
                                edges.set(nx, ny, true);
                                queue.push_back((nx, ny));
                            }
                        }
                    }
                }
            }
        }
    }
    CannyOutput { edges, magnitude }
}
