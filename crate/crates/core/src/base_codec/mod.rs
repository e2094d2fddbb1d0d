//! JPEG-like block-DCT base layer.
//!
//! The image is edge-replicated to a multiple of 8 in each direction, level
//! shifted by −128, transformed with an orthonormal 8×8 DCT-II, quantized with
//! round-half-away-from-zero and entropy coded (see [`entropy`]). Decoding
//! returns the quantized [`DctGrid`] alongside the pixels so that the soft
//! decoder can project onto the quantization bins.

pub mod dct;
pub mod entropy;
pub mod quant;

pub use dct::Dct8;
pub use entropy::{entropy_decode, entropy_encode, BitReader, BitWriter};
pub use quant::{scale_quant_table, QuantTable, ZIGZAG};

use crate::error::{AgdlError, Result};
use crate::raster::Raster;
use crate::scalar::Scalar;

pub const BLOCK: usize = 8;
const LEVEL_SHIFT: f64 = 128.0;

/// Quantized coefficient indices for every 8×8 block of the padded image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DctGrid {
    width: usize,
    height: usize,
    blocks_x: usize,
    blocks_y: usize,
    /// Natural (row-major) coefficient order, blocks in raster order.
    blocks: Vec<[i32; 64]>,
}

impl DctGrid {
    pub fn new(width: usize, height: usize, blocks: Vec<[i32; 64]>) -> Result<Self> {
        let (bx, by) = block_dims(width, height);
        if blocks.len() != bx * by {
            return Err(AgdlError::invalid(format!(
                "grid for {width}x{height} needs {} blocks, got {}",
                bx * by,
                blocks.len()
            )));
        }
        Ok(DctGrid {
            width,
            height,
            blocks_x: bx,
            blocks_y: by,
            blocks,
        })
    }

    /// Image dimensions the grid was coded from.
    pub fn image_dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Dimensions of the padded canvas the blocks tile exactly.
    pub fn canvas_dims(&self) -> (usize, usize) {
        (self.blocks_x * BLOCK, self.blocks_y * BLOCK)
    }

    pub fn blocks_x(&self) -> usize {
        self.blocks_x
    }

    pub fn blocks_y(&self) -> usize {
        self.blocks_y
    }

    pub fn blocks(&self) -> &[[i32; 64]] {
        &self.blocks
    }

    pub fn block(&self, bx: usize, by: usize) -> &[i32; 64] {
        &self.blocks[by * self.blocks_x + bx]
    }
}

/// Entropy-coded base layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaseLayerPayload {
    pub quality: u8,
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

pub fn block_dims(width: usize, height: usize) -> (usize, usize) {
    (width.div_ceil(BLOCK), height.div_ceil(BLOCK))
}

pub(crate) fn read_block<T: Scalar>(canvas: &Raster<T>, bx: usize, by: usize) -> [T; 64] {
    std::array::from_fn(|i| canvas.get(bx * BLOCK + i % BLOCK, by * BLOCK + i / BLOCK))
}

pub(crate) fn write_block<T: Scalar>(
    canvas: &mut Raster<T>,
    bx: usize,
    by: usize,
    block: &[T; 64],
) {
    for (i, &v) in block.iter().enumerate() {
        canvas.set(bx * BLOCK + i % BLOCK, by * BLOCK + i / BLOCK, v);
    }
}

/// Quantize the blocks of an image without entropy coding.
pub fn quantize_image<T: Scalar>(img: &Raster<T>, table: &QuantTable) -> Result<DctGrid> {
    if img.is_empty() {
        return Err(AgdlError::invalid("image has no pixels"));
    }
    let (bx, by) = block_dims(img.width(), img.height());
    let canvas = img.pad_replicate(bx * BLOCK, by * BLOCK);
    let dct = Dct8::<T>::new();
    let divisors = table.natural();
    let shift = T::lit(LEVEL_SHIFT);
    let mut blocks = Vec::with_capacity(bx * by);
    for j in 0..by {
        for i in 0..bx {
            let spatial = read_block(&canvas, i, j).map(|v| v - shift);
            let coeffs = dct.forward(&spatial);
            blocks.push(std::array::from_fn(|k| {
                let q = (coeffs[k] / T::lit(divisors[k] as f64)).round();
                q.to_i32().unwrap_or(0)
            }));
        }
    }
    DctGrid::new(img.width(), img.height(), blocks)
}

pub fn encode_base<T: Scalar>(img: &Raster<T>, quality: u8) -> Result<(BaseLayerPayload, DctGrid)> {
    let table = scale_quant_table(quality)?;
    let grid = quantize_image(img, &table)?;
    let payload = BaseLayerPayload {
        quality,
        width: img.width(),
        height: img.height(),
        data: entropy_encode(grid.blocks()),
    };
    Ok((payload, grid))
}

/// Dequantize and inverse-transform onto the padded canvas, without rounding.
pub fn reconstruct_canvas<T: Scalar>(grid: &DctGrid, table: &QuantTable) -> Raster<T> {
    let (cw, ch) = grid.canvas_dims();
    let mut canvas = Raster::filled(cw, ch, T::zero());
    let dct = Dct8::<T>::new();
    let divisors = table.natural();
    let shift = T::lit(LEVEL_SHIFT);
    for j in 0..grid.blocks_y() {
        for i in 0..grid.blocks_x() {
            let k = grid.block(i, j);
            let coeffs: [T; 64] = std::array::from_fn(|n| T::lit(k[n] as f64 * divisors[n] as f64));
            let spatial = dct.inverse(&coeffs).map(|v| v + shift);
            write_block(&mut canvas, i, j, &spatial);
        }
    }
    canvas
}

/// Decode the base layer to rounded, clamped pixels.
pub fn decode_base<T: Scalar>(
    payload: &BaseLayerPayload,
) -> Result<(Raster<T>, DctGrid, QuantTable)> {
    if payload.width == 0 || payload.height == 0 {
        return Err(AgdlError::payload(0, "zero image dimension"));
    }
    let table = scale_quant_table(payload.quality)
        .map_err(|_| AgdlError::payload(0, format!("bad quality {}", payload.quality)))?;
    let (bx, by) = block_dims(payload.width, payload.height);
    let blocks = entropy_decode(&payload.data, bx * by)?;
    let grid = DctGrid::new(payload.width, payload.height, blocks)?;
    let img = reconstruct_canvas::<T>(&grid, &table)
        .crop(payload.width, payload.height)
        .quantized();
    Ok((img, grid, table))
}
