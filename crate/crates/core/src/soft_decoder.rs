//! Dual-domain soft decoding of the base layer.
//!
//! Alternates a pixel-domain bilateral smoothing step with a projection onto
//! the set of images whose block-DCT coefficients fall inside the transmitted
//! quantization bins. The iteration always ends on the projection, so the
//! output never contradicts the base layer.

use rayon::prelude::*;

use crate::base_codec::{read_block, write_block, Dct8, DctGrid, QuantTable, BLOCK};
use crate::error::{AgdlError, Result};
use crate::raster::Raster;
use crate::scalar::Scalar;

/// Upper bound on bin/box alternations inside one projection.
const MAX_BOX_ROUNDS: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct PocsParams<T> {
    pub iterations: u32,
    pub spatial_sigma: T,
    pub range_sigma: T,
    /// Half-width of the square smoothing window (2 gives 5×5).
    pub radius: usize,
}

impl<T: Scalar> Default for PocsParams<T> {
    fn default() -> Self {
        PocsParams {
            iterations: 8,
            spatial_sigma: T::lit(2.0),
            range_sigma: T::lit(20.0),
            radius: 2,
        }
    }
}

impl<T: Scalar> PocsParams<T> {
    pub fn with_iterations(iterations: u32) -> Self {
        PocsParams {
            iterations,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(AgdlError::invalid("POCS needs at least one iteration"));
        }
        if !(self.spatial_sigma > T::zero() && self.range_sigma > T::zero()) {
            return Err(AgdlError::invalid("bilateral sigmas must be positive"));
        }
        Ok(())
    }
}

/// Anything that turns a decoded base layer into a restored image.
pub trait Restorer<T: Scalar> {
    fn restore(&self, base: &Raster<T>, grid: &DctGrid, table: &QuantTable) -> Result<Raster<T>>;
}

/// The POCS restorer used by the codec.
#[derive(Clone, Debug, Default)]
pub struct PocsRestorer<T: Scalar> {
    pub params: PocsParams<T>,
}

impl<T: Scalar> Restorer<T> for PocsRestorer<T> {
    fn restore(&self, base: &Raster<T>, grid: &DctGrid, table: &QuantTable) -> Result<Raster<T>> {
        soft_decode(base, grid, table, &self.params)
    }
}

/// Bilateral filter over a `(2r+1)`² window with edge replication.
pub fn smooth_pixels<T: Scalar>(img: &Raster<T>, params: &PocsParams<T>) -> Raster<T> {
    let r = params.radius as isize;
    let two_ss = T::lit(2.0) * params.spatial_sigma * params.spatial_sigma;
    let two_rs = T::lit(2.0) * params.range_sigma * params.range_sigma;
    let spatial: Vec<(isize, isize, T)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .map(|(dx, dy)| (dx, dy, T::lit((dx * dx + dy * dy) as f64) / two_ss))
        .collect();
    let w = img.width();
    let data: Vec<T> = (0..img.len())
        .into_par_iter()
        .map(|i| {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            let center = img.get_clamped(x, y);
            let mut num = T::zero();
            let mut den = T::zero();
            for &(dx, dy, ds) in &spatial {
                let v = img.get_clamped(x + dx, y + dy);
                let d = v - center;
                let wt = (-(ds + d * d / two_rs)).exp();
                num += wt * v;
                den += wt;
            }
            num / den
        })
        .collect();
    Raster::new(img.width(), img.height(), data).expect("same shape")
}

fn check_dims<T>(img: &Raster<T>, grid: &DctGrid) -> Result<bool> {
    let dims = (img.width(), img.height());
    if dims == grid.canvas_dims() {
        Ok(true)
    } else if dims == grid.image_dims() {
        Ok(false)
    } else {
        Err(AgdlError::invalid(format!(
            "image is {}x{} but grid covers {:?} (canvas {:?})",
            dims.0,
            dims.1,
            grid.image_dims(),
            grid.canvas_dims()
        )))
    }
}

/// Clamp every coefficient into its bin, block by block, in place.
fn clamp_coefficients<T: Scalar>(canvas: &mut Raster<T>, grid: &DctGrid, divisors: &[u16; 64]) {
    let dct = Dct8::<T>::new();
    let shift = T::lit(128.0);
    let half = T::lit(0.5);
    let blocks: Vec<[T; 64]> = (0..grid.blocks_x() * grid.blocks_y())
        .into_par_iter()
        .map(|b| {
            let (bx, by) = (b % grid.blocks_x(), b / grid.blocks_x());
            let mut c = dct.forward(&read_block(canvas, bx, by).map(|v| v - shift));
            let k = grid.block(bx, by);
            for n in 0..64 {
                let q = T::lit(divisors[n] as f64);
                let center = T::lit(k[n] as f64) * q;
                c[n] = c[n].max(center - half * q).min(center + half * q);
            }
            dct.inverse(&c).map(|v| v + shift)
        })
        .collect();
    for (b, block) in blocks.iter().enumerate() {
        write_block(canvas, b % grid.blocks_x(), b / grid.blocks_x(), block);
    }
}

/// Projection of a full canvas onto (quantization bins) ∩ ([0, 255] box).
///
/// The box clamp can push coefficients back out of their bins, so the two
/// projections alternate until the clamp no longer moves any pixel. The last
/// step is always the bin clamp; if the rounds run out, pixels may sit
/// marginally outside the box but never outside a bin.
fn project_canvas<T: Scalar>(canvas: &mut Raster<T>, grid: &DctGrid, table: &QuantTable) {
    let divisors = table.natural();
    let hi = T::lit(255.0);
    let tol = T::lit(1e-10);
    clamp_coefficients(canvas, grid, &divisors);
    for _ in 0..MAX_BOX_ROUNDS {
        let mut moved = T::zero();
        for v in canvas.data_mut() {
            let c = v.max(T::zero()).min(hi);
            moved = moved.max((c - *v).abs());
            *v = c;
        }
        if moved <= tol {
            break;
        }
        clamp_coefficients(canvas, grid, &divisors);
    }
}

/// Project onto the quantization constraint set of `grid`.
///
/// `img` may be either the coded image size or the padded block canvas; image
/// sized input is edge-replicated before and cropped after.
pub fn project_dct_bins<T: Scalar>(
    img: &Raster<T>,
    grid: &DctGrid,
    table: &QuantTable,
) -> Result<Raster<T>> {
    let is_canvas = check_dims(img, grid)?;
    let (cw, ch) = grid.canvas_dims();
    let mut canvas = if is_canvas {
        img.clone()
    } else {
        img.pad_replicate(cw, ch)
    };
    project_canvas(&mut canvas, grid, table);
    Ok(if is_canvas {
        canvas
    } else {
        canvas.crop(img.width(), img.height())
    })
}

/// Soft decode on the padded canvas; the returned raster has canvas dims.
pub fn soft_decode_canvas<T: Scalar>(
    base: &Raster<T>,
    grid: &DctGrid,
    table: &QuantTable,
    params: &PocsParams<T>,
) -> Result<Raster<T>> {
    params.validate()?;
    let is_canvas = check_dims(base, grid)?;
    let (cw, ch) = grid.canvas_dims();
    let mut canvas = if is_canvas {
        base.clone()
    } else {
        base.pad_replicate(cw, ch)
    };
    for _ in 0..params.iterations {
        canvas = smooth_pixels(&canvas, params);
        project_canvas(&mut canvas, grid, table);
    }
    Ok(canvas)
}

/// Soft decode `base` with `iterations` rounds of smoothing + projection.
pub fn soft_decode<T: Scalar>(
    base: &Raster<T>,
    grid: &DctGrid,
    table: &QuantTable,
    params: &PocsParams<T>,
) -> Result<Raster<T>> {
    let (w, h) = grid.image_dims();
    Ok(soft_decode_canvas(base, grid, table, params)?.crop(w, h))
}

/// Largest distance of any block coefficient outside its bin.
///
/// `img` must have canvas dimensions, or image dimensions when those coincide.
pub fn max_bin_violation<T: Scalar>(
    img: &Raster<T>,
    grid: &DctGrid,
    table: &QuantTable,
) -> Result<T> {
    if (img.width(), img.height()) != grid.canvas_dims() {
        return Err(AgdlError::invalid("bin check needs the full block canvas"));
    }
    let dct = Dct8::<T>::new();
    let divisors = table.natural();
    let half = T::lit(0.5);
    let mut worst = T::zero();
    for by in 0..grid.blocks_y() {
        for bx in 0..grid.blocks_x() {
            let c = dct.forward(&read_block(img, bx, by).map(|v| v - T::lit(128.0)));
            let k = grid.block(bx, by);
            for n in 0..64 {
                let q = T::lit(divisors[n] as f64);
                let center = T::lit(k[n] as f64) * q;
                let excess = (c[n] - center).abs() - half * q;
                worst = worst.max(excess);
            }
        }
    }
    Ok(worst)
}

// The block size is part of the grid contract.
const _: () = assert!(BLOCK == 8);
