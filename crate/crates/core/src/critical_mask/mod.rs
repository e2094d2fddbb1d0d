//! Critical pixel detection.
//!
//! The critical set is the intersection of three masks computed from data the
//! decoder also has:
//!
//! * edge skeleton: Canny edges of the decoded base layer,
//! * region of interest: thresholded spectral-residual saliency,
//! * restoration uncertainty: pixels the soft decoder moved by at least
//!   `error_threshold` intensity levels.
//!
//! Candidates are ranked by the product of their normalized gradient,
//! saliency and change scores (ties by raster index) and the top
//! `⌈critical_fraction·W·H⌉` are kept.

pub mod canny;
pub mod saliency;

use std::cmp::Ordering;

pub use canny::{canny, CannyOutput};
pub use saliency::spectral_saliency;

use crate::error::{AgdlError, Result};
use crate::raster::{Mask, Raster};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct MaskParams<T> {
    pub canny_sigma: T,
    pub canny_low: T,
    pub canny_high: T,
    pub saliency_threshold: T,
    pub saliency_dilation: usize,
    /// τ_e, in intensity levels.
    pub error_threshold: T,
    /// ρ, fraction of all pixels.
    pub critical_fraction: T,
}

impl<T: Scalar> Default for MaskParams<T> {
    fn default() -> Self {
        MaskParams {
            canny_sigma: T::lit(1.4),
            canny_low: T::lit(0.1),
            canny_high: T::lit(0.3),
            saliency_threshold: T::lit(0.25),
            saliency_dilation: 2,
            error_threshold: T::lit(4.0),
            critical_fraction: T::lit(0.02),
        }
    }
}

impl<T: Scalar> MaskParams<T> {
    pub fn validate(&self) -> Result<()> {
        let z = T::zero();
        if !(z < self.canny_low && self.canny_low < self.canny_high && self.canny_high <= T::one())
        {
            return Err(AgdlError::invalid("need 0 < canny_low < canny_high <= 1"));
        }
        if !(z < self.critical_fraction && self.critical_fraction <= T::one()) {
            return Err(AgdlError::invalid("critical fraction must lie in (0, 1]"));
        }
        if !(self.canny_sigma > z && self.saliency_threshold > z && self.error_threshold >= z) {
            return Err(AgdlError::invalid("detector thresholds must be positive"));
        }
        Ok(())
    }

    /// Upper bound on the critical set size for a `width`×`height` image.
    pub fn max_critical(&self, width: usize, height: usize) -> usize {
        (self.critical_fraction * T::lit((width * height) as f64))
            .ceil()
            .to_usize()
            .unwrap_or(0)
    }
}

/// Ranked critical pixels: `coords[i]` is `(row, col)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalSet<T> {
    pub width: usize,
    pub height: usize,
    pub coords: Vec<(usize, usize)>,
    pub values: Vec<T>,
    pub scores: Vec<T>,
}

impl<T: Scalar> CriticalSet<T> {
    pub fn empty(width: usize, height: usize) -> Self {
        CriticalSet {
            width,
            height,
            coords: Vec::new(),
            values: Vec::new(),
            scores: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn raster_indices(&self) -> Vec<usize> {
        self.coords
            .iter()
            .map(|&(r, c)| r * self.width + c)
            .collect()
    }

    /// Pixel values of `img` at the set coordinates, in set order.
    pub fn gather(&self, img: &Raster<T>) -> Result<Vec<T>> {
        if img.width() != self.width || img.height() != self.height {
            return Err(AgdlError::invalid(
                "image does not match critical set dimensions",
            ));
        }
        Ok(self.coords.iter().map(|&(r, c)| img.get(c, r)).collect())
    }

    pub fn to_mask(&self) -> Mask {
        let mut m = Mask::empty(self.width, self.height);
        for &(r, c) in &self.coords {
            m.set(c, r, true);
        }
        m
    }
}

/// Per-pixel |soft − base|.
pub fn change_map<T: Scalar>(base: &Raster<T>, soft: &Raster<T>) -> Result<Raster<T>> {
    if !base.same_shape(soft) {
        return Err(AgdlError::invalid(format!(
            "change map of {}x{} against {}x{}",
            base.width(),
            base.height(),
            soft.width(),
            soft.height()
        )));
    }
    Raster::new(
        base.width(),
        base.height(),
        base.data()
            .iter()
            .zip(soft.data())
            .map(|(&b, &s)| (s - b).abs())
            .collect(),
    )
}

pub fn canny_edges<T: Scalar>(img: &Raster<T>, params: &MaskParams<T>) -> Mask {
    canny(img, params.canny_sigma, params.canny_low, params.canny_high).edges
}

/// All intermediate maps of one detection run.
#[derive(Clone, Debug)]
pub struct Detection<T> {
    pub edges: Mask,
    pub gradient: Raster<T>,
    pub saliency: Raster<T>,
    pub roi: Mask,
    pub change: Raster<T>,
    pub uncertain: Mask,
    pub set: CriticalSet<T>,
}

pub fn analyze<T: Scalar>(
    base: &Raster<T>,
    soft: &Raster<T>,
    params: &MaskParams<T>,
) -> Result<Detection<T>> {
    params.validate()?;
    let change = change_map(base, soft)?;
    let CannyOutput {
        edges,
        magnitude: gradient,
    } = canny(
        base,
        params.canny_sigma,
        params.canny_low,
        params.canny_high,
    );
    let (saliency, roi) =
        spectral_saliency(base, params.saliency_threshold, params.saliency_dilation);
    let uncertain = Mask::new(
        base.width(),
        base.height(),
        change
            .data()
            .iter()
            .map(|&c| c >= params.error_threshold)
            .collect(),
    )?;

    let candidates: Vec<usize> = edges
        .intersect(&roi)
        .intersect(&uncertain)
        .indices()
        .collect();

    // normalizers over the candidates; an all-zero factor is left out
    let factor = |map: &Raster<T>| -> Option<T> {
        let m = candidates
            .iter()
            .map(|&i| map.data()[i])
            .fold(T::zero(), T::max);
        (m > T::zero()).then_some(m)
    };
    let norms = [factor(&gradient), factor(&saliency), factor(&change)];
    let maps = [&gradient, &saliency, &change];

    let mut ranked: Vec<(T, usize)> = candidates
        .iter()
        .map(|&i| {
            let s = maps
                .iter()
                .zip(&norms)
                .filter_map(|(map, n)| n.map(|n| map.data()[i] / n))
                .fold(T::one(), |acc, v| acc * v);
            (s, i)
        })
        .collect();
    ranked.sort_by(|a, b| match b.0.partial_cmp(&a.0) {
        Some(Ordering::Equal) | None => a.1.cmp(&b.1),
        Some(o) => o,
    });
    ranked.truncate(params.max_critical(base.width(), base.height()));

    let w = base.width();
    let coords: Vec<(usize, usize)> = ranked.iter().map(|&(_, i)| (i / w, i % w)).collect();
    let set = CriticalSet {
        width: w,
        height: base.height(),
        values: coords.iter().map(|&(r, c)| soft.get(c, r)).collect(),
        scores: ranked.iter().map(|&(s, _)| s).collect(),
        coords,
    };
    Ok(Detection {
        edges,
        gradient,
        saliency,
        roi,
        change,
        uncertain,
        set,
    })
}

/// Ranked critical set; values are read from `soft`.
pub fn detect_critical<T: Scalar>(
    base: &Raster<T>,
    soft: &Raster<T>,
    params: &MaskParams<T>,
) -> Result<CriticalSet<T>> {
    Ok(analyze(base, soft, params)?.set)
}
