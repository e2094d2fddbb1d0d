//! Single-channel rasters, binary masks and PGM (P5) I/O.

use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ColorType, ExtendedColorType, ImageEncoder, ImageFormat};

use crate::error::{AgdlError, Result};
use crate::scalar::Scalar;

/// Row-major single-channel raster of real intensities.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T> Raster<T> {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn same_shape<U>(&self, other: &Raster<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

impl<T: Scalar> Raster<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(AgdlError::invalid(format!(
                "raster data has {} samples, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Raster {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Raster {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Raster {
            width,
            height,
            data,
        }
    }

    pub fn from_u8(width: usize, height: usize, pixels: &[u8]) -> Result<Self> {
        Self::new(
            width,
            height,
            pixels.iter().map(|&p| T::lit(p as f64)).collect(),
        )
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    /// Sample with edge replication for out-of-range coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> T {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Extend to `width`×`height` by replicating the last column and row.
    pub fn pad_replicate(&self, width: usize, height: usize) -> Self {
        debug_assert!(width >= self.width && height >= self.height);
        Raster::from_fn(width, height, |x, y| {
            self.get(x.min(self.width - 1), y.min(self.height - 1))
        })
    }

    /// Top-left `width`×`height` window.
    pub fn crop(&self, width: usize, height: usize) -> Self {
        debug_assert!(width <= self.width && height <= self.height);
        Raster::from_fn(width, height, |x, y| self.get(x, y))
    }

    pub fn flip_horizontal(&self) -> Self {
        Raster::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }

    pub fn max_value(&self) -> T {
        self.data
            .iter()
            .copied()
            .fold(T::neg_infinity(), |a, b| a.max(b))
    }

    /// Export rounding: half away from zero, then clamp to [0, 255].
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| {
                v.round()
                    .max(T::zero())
                    .min(T::lit(255.0))
                    .to_u8()
                    .unwrap_or(0)
            })
            .collect()
    }

    /// Round and clamp every sample, keeping the real-valued representation.
    pub fn quantized(&self) -> Self {
        self.map(|v| v.round().max(T::zero()).min(T::lit(255.0)))
    }
}

/// Row-major binary mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(AgdlError::invalid(format!(
                "mask has {} bits, expected {}x{}",
                bits.len(),
                width,
                height
            )));
        }
        Ok(Mask {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Mask {
            width,
            height,
            bits,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_clear(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Raster indices of set bits, ascending.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn intersect(&self, other: &Mask) -> Mask {
        debug_assert!(self.width == other.width && self.height == other.height);
        Mask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| a && b)
                .collect(),
        }
    }

    pub fn flip_horizontal(&self) -> Mask {
        Mask::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }

    /// 0 / 255 grayscale rendering for debugging.
    pub fn to_u8(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect()
    }
}

/// Decode a binary 8-bit single-channel PGM (P5).
pub fn decode_pgm<T: Scalar>(bytes: &[u8]) -> Result<Raster<T>> {
    if !bytes.starts_with(b"P5") {
        return Err(AgdlError::invalid("not a binary PGM (P5) file"));
    }
    let img = image::load(Cursor::new(bytes), ImageFormat::Pnm)?;
    if img.color() != ColorType::L8 {
        return Err(AgdlError::invalid(format!(
            "expected 8-bit grayscale PGM, found {:?}",
            img.color()
        )));
    }
    let gray = img.into_luma8();
    let (w, h) = gray.dimensions();
    Raster::from_u8(w as usize, h as usize, gray.as_raw())
}

/// Encode 8-bit samples as a binary PGM (P5).
pub fn encode_pgm_u8(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(AgdlError::invalid("pixel count does not match dimensions"));
    }
    let mut out = Vec::with_capacity(pixels.len() + 32);
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(pixels, width as u32, height as u32, ExtendedColorType::L8)?;
    Ok(out)
}

/// Encode a raster with export rounding.
pub fn encode_pgm<T: Scalar>(img: &Raster<T>) -> Result<Vec<u8>> {
    encode_pgm_u8(img.width(), img.height(), &img.to_u8())
}

pub fn read_pgm<T: Scalar>(path: impl AsRef<Path>) -> Result<Raster<T>> {
    decode_pgm(&std::fs::read(path)?)
}

pub fn write_pgm<T: Scalar>(path: impl AsRef<Path>, img: &Raster<T>) -> Result<()> {
    std::fs::write(path, encode_pgm(img)?)?;
    Ok(())
}

pub fn write_mask_pgm(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    std::fs::write(
        path,
        encode_pgm_u8(mask.width(), mask.height(), &mask.to_u8())?,
    )?;
    Ok(())
}
