//! The `.agdl` bitstream and the end-to-end encode / decode pipeline.
//!
//! Layout, big-endian throughout:
//!
//! ```text
//! offset size field
//!      0    4 magic "AGDL"
//!      4    1 version (1)
//!      5    2 width
//!      7    2 height
//!      9    1 quality (1..=100)
//!     10    8 effective sampling-matrix seed
//!     18    2 critical fraction ρ, in units of 1/10000
//!     20    2 measurement ratio M/N_c, in units of 1/10000
//!     22    2 change threshold τ_e × 16
//!     24    1 POCS iterations
//!     25    4 base payload length L
//!     29    L base payload (entropy-coded blocks)
//!   29+L   20 measurement count M (u32), offset (f64), step (f64)
//!   49+L   2M measurement codes (u16)
//! ```
//!
//! Every parameter that influences the critical set travels in the header, so
//! the decoder's detection never depends on build defaults.

use crate::base_codec::{decode_base, encode_base, BaseLayerPayload, DctGrid, QuantTable};
use crate::critical_mask::{analyze, MaskParams};
use crate::cs_refine::{
    apply_adjustment, build_matrix, dequantize, least_norm_adjust, quantize, sample, Measurements,
};
use crate::error::{AgdlError, Result};
use crate::soft_decoder::{soft_decode, PocsParams};
use crate::{CriticalSet, CsMatrix, Image};

pub const MAGIC: [u8; 4] = *b"AGDL";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 25;
const FRACTION_UNIT: u32 = 10_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgdlHeader {
    pub version: u8,
    pub width: u16,
    pub height: u16,
    pub quality: u8,
    pub seed: u64,
    pub critical_per_10k: u16,
    pub m_ratio_per_10k: u16,
    pub tau_x16: u16,
    pub pocs_iterations: u8,
}

impl AgdlHeader {
    pub fn mask_params(&self) -> MaskParams<f64> {
        MaskParams {
            error_threshold: self.tau_x16 as f64 / 16.0,
            critical_fraction: self.critical_per_10k as f64 / FRACTION_UNIT as f64,
            ..MaskParams::default()
        }
    }

    pub fn pocs_params(&self) -> PocsParams<f64> {
        PocsParams::with_iterations(self.pocs_iterations as u32)
    }

    /// M for a critical set of `n_c` pixels: ⌈ratio·N_c⌉.
    pub fn measurement_count(&self, n_c: usize) -> usize {
        measurement_count(n_c, self.m_ratio_per_10k)
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.push(self.version);
        out.extend_from_slice(&self.width.to_be_bytes());
        out.extend_from_slice(&self.height.to_be_bytes());
        out.push(self.quality);
        out.extend_from_slice(&self.seed.to_be_bytes());
        out.extend_from_slice(&self.critical_per_10k.to_be_bytes());
        out.extend_from_slice(&self.m_ratio_per_10k.to_be_bytes());
        out.extend_from_slice(&self.tau_x16.to_be_bytes());
        out.push(self.pocs_iterations);
    }

    fn read_from(b: &[u8]) -> Result<Self> {
        if b.len() < HEADER_LEN {
            return Err(AgdlError::bitstream(b.len(), "truncated header"));
        }
        if b[0..4] != MAGIC {
            return Err(AgdlError::bitstream(0, "bad magic"));
        }
        let u16_at = |o: usize| u16::from_be_bytes([b[o], b[o + 1]]);
        let h = AgdlHeader {
            version: b[4],
            width: u16_at(5),
            height: u16_at(7),
            quality: b[9],
            seed: u64::from_be_bytes(b[10..18].try_into().expect("8 bytes")),
            critical_per_10k: u16_at(18),
            m_ratio_per_10k: u16_at(20),
            tau_x16: u16_at(22),
            pocs_iterations: b[24],
        };
        h.check()?;
        Ok(h)
    }

    fn check(&self) -> Result<()> {
        let fail = |o, r: &str| Err(AgdlError::bitstream(o, r));
        if self.version != VERSION {
            return fail(4, "unsupported version");
        }
        if self.width == 0 {
            return fail(5, "zero width");
        }
        if self.height == 0 {
            return fail(7, "zero height");
        }
        if !(1..=100).contains(&self.quality) {
            return fail(9, "quality out of range");
        }
        if self.critical_per_10k == 0 || self.critical_per_10k as u32 > FRACTION_UNIT {
            return fail(18, "critical fraction out of range");
        }
        if self.m_ratio_per_10k as u32 > FRACTION_UNIT {
            return fail(20, "measurement ratio out of range");
        }
        if self.pocs_iterations == 0 {
            return fail(24, "zero POCS iterations");
        }
        Ok(())
    }
}

pub fn measurement_count(n_c: usize, m_ratio_per_10k: u16) -> usize {
    let unit = FRACTION_UNIT as usize;
    ((n_c * m_ratio_per_10k as usize).div_ceil(unit)).min(n_c)
}

/// Byte sizes of each part of a serialized bitstream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSizes {
    pub header: usize,
    /// Length prefix plus entropy-coded blocks.
    pub base: usize,
    pub measurements: usize,
}

impl LayerSizes {
    pub fn total(&self) -> usize {
        self.header + self.base + self.measurements
    }

    /// Bits per pixel of header + base layer.
    pub fn base_bpp(&self, pixels: usize) -> f64 {
        ((self.header + self.base) * 8) as f64 / pixels as f64
    }

    pub fn measurement_bpp(&self, pixels: usize) -> f64 {
        (self.measurements * 8) as f64 / pixels as f64
    }

    pub fn total_bpp(&self, pixels: usize) -> f64 {
        (self.total() * 8) as f64 / pixels as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgdlBitstream {
    pub header: AgdlHeader,
    pub base: Vec<u8>,
    pub measurements: Measurements,
}

impl AgdlBitstream {
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.sizes().total());
        self.header.write_to(&mut out);
        out.extend_from_slice(&(self.base.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.base);
        self.measurements.write_to(&mut out);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let header = AgdlHeader::read_from(bytes)?;
        let mut pos = HEADER_LEN;
        if bytes.len() < pos + 4 {
            return Err(AgdlError::bitstream(bytes.len(), "truncated base length"));
        }
        let len = u32::from_be_bytes(bytes[pos..pos + 4].try_into().expect("4 bytes")) as usize;
        pos += 4;
        if bytes.len() - pos < len {
            return Err(AgdlError::bitstream(bytes.len(), "truncated base payload"));
        }
        let base = bytes[pos..pos + len].to_vec();
        pos += len;
        let (measurements, used) = Measurements::read_from(&bytes[pos..], pos)?;
        pos += used;
        if pos != bytes.len() {
            return Err(AgdlError::bitstream(
                pos,
                "trailing bytes after measurements",
            ));
        }
        Ok(AgdlBitstream {
            header,
            base,
            measurements,
        })
    }

    pub fn sizes(&self) -> LayerSizes {
        LayerSizes {
            header: HEADER_LEN,
            base: 4 + self.base.len(),
            measurements: self.measurements.encoded_len(),
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.header.width as usize * self.header.height as usize
    }

    /// Total bits over pixel count.
    pub fn bpp(&self) -> f64 {
        self.sizes().total_bpp(self.pixel_count())
    }

    pub fn base_payload(&self) -> BaseLayerPayload {
        BaseLayerPayload {
            quality: self.header.quality,
            width: self.header.width as usize,
            height: self.header.height as usize,
            data: self.base.clone(),
        }
    }
}

/// Encoder settings; fractions are stored in the header's fixed-point units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncoderConfig {
    pub quality: u8,
    pub critical_per_10k: u16,
    pub m_ratio_per_10k: u16,
    pub tau_x16: u16,
    pub pocs_iterations: u8,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            quality: 50,
            critical_per_10k: 200,
            m_ratio_per_10k: 5000,
            tau_x16: 64,
            pocs_iterations: 8,
            seed: 0x4147_444C,
        }
    }
}

fn to_fraction_units(v: f64, what: &str) -> Result<u16> {
    if !(0.0..=1.0).contains(&v) {
        return Err(AgdlError::invalid(format!(
            "{what} must lie in [0, 1], got {v}"
        )));
    }
    Ok((v * FRACTION_UNIT as f64).round() as u16)
}

impl EncoderConfig {
    pub fn with_quality(mut self, quality: u8) -> Self {
        self.quality = quality;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// ρ as a fraction of all pixels, rounded to 1/10000.
    pub fn with_critical_fraction(mut self, rho: f64) -> Result<Self> {
        self.critical_per_10k = to_fraction_units(rho, "critical fraction")?;
        Ok(self)
    }

    /// M/N_c, rounded to 1/10000.
    pub fn with_measurement_ratio(mut self, ratio: f64) -> Result<Self> {
        self.m_ratio_per_10k = to_fraction_units(ratio, "measurement ratio")?;
        Ok(self)
    }

    /// τ_e in intensity levels, rounded to 1/16.
    pub fn with_error_threshold(mut self, tau: f64) -> Result<Self> {
        if !(0.0..=4095.0).contains(&tau) {
            return Err(AgdlError::invalid("change threshold must lie in [0, 4095]"));
        }
        self.tau_x16 = (tau * 16.0).round() as u16;
        Ok(self)
    }

    pub fn with_pocs_iterations(mut self, n: u8) -> Self {
        self.pocs_iterations = n;
        self
    }

    fn header(&self, width: usize, height: usize, seed: u64) -> Result<AgdlHeader> {
        let dim = |v: usize, what| {
            u16::try_from(v)
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| AgdlError::invalid(format!("{what} {v} outside 1..=65535")))
        };
        let h = AgdlHeader {
            version: VERSION,
            width: dim(width, "width")?,
            height: dim(height, "height")?,
            quality: self.quality,
            seed,
            critical_per_10k: self.critical_per_10k,
            m_ratio_per_10k: self.m_ratio_per_10k,
            tau_x16: self.tau_x16,
            pocs_iterations: self.pocs_iterations,
        };
        h.check().map_err(|e| AgdlError::invalid(e.to_string()))?;
        Ok(h)
    }
}

/// Shared front half of encoding and decoding: base, soft decode, detection.
#[derive(Clone, Debug)]
pub struct LayerState {
    pub base: Image,
    pub grid: DctGrid,
    pub table: QuantTable,
    pub soft: Image,
    pub roi: crate::Mask,
    pub set: CriticalSet,
}

fn derive_layers(
    header: &AgdlHeader,
    payload: &BaseLayerPayload,
    detect: bool,
) -> Result<LayerState> {
    let (base, grid, table) = decode_base::<f64>(payload)?;
    let soft = soft_decode(&base, &grid, &table, &header.pocs_params())?;
    let (roi, set) = if detect {
        let det = analyze(&base, &soft, &header.mask_params())?;
        (det.roi, det.set)
    } else {
        (
            crate::Mask::empty(base.width(), base.height()),
            CriticalSet::empty(base.width(), base.height()),
        )
    };
    Ok(LayerState {
        base,
        grid,
        table,
        soft,
        roi,
        set,
    })
}

/// Everything the encoder computed, for inspection and testing.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub bitstream: AgdlBitstream,
    pub layers: LayerState,
    /// Original pixel values at the critical coordinates (c).
    pub originals: Vec<f64>,
    pub matrix: CsMatrix,
    /// Unquantized H·c.
    pub raw_measurements: Vec<f64>,
}

pub fn encode_detailed(img: &Image, config: &EncoderConfig) -> Result<Encoded> {
    let provisional = config.header(img.width(), img.height(), config.seed)?;
    if img.data().iter().any(|v| !(0.0..=255.0).contains(v)) {
        return Err(AgdlError::invalid("pixel values must lie in [0, 255]"));
    }
    let (payload, _) = encode_base(img, config.quality)?;
    let layers = derive_layers(&provisional, &payload, true)?;

    let n_c = layers.set.len();
    let m = provisional.measurement_count(n_c);
    // c comes from the original image, not the decoded one
    let originals = layers.set.gather(img)?;
    let matrix: CsMatrix = build_matrix(config.seed, m, n_c)?;
    let raw_measurements = sample(&matrix, &originals)?;
    let measurements = quantize(&raw_measurements)?;

    let header = AgdlHeader {
        seed: matrix.seed(),
        ..provisional
    };
    Ok(Encoded {
        bitstream: AgdlBitstream {
            header,
            base: payload.data,
            measurements,
        },
        layers,
        originals,
        matrix,
        raw_measurements,
    })
}

pub fn encode(img: &Image, config: &EncoderConfig) -> Result<AgdlBitstream> {
    Ok(encode_detailed(img, config)?.bitstream)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DecodeMode {
    Base,
    Soft,
    #[default]
    Full,
}

impl std::str::FromStr for DecodeMode {
    type Err = AgdlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(DecodeMode::Base),
            "soft" => Ok(DecodeMode::Soft),
            "full" => Ok(DecodeMode::Full),
            other => Err(AgdlError::invalid(format!("unknown decode mode {other:?}"))),
        }
    }
}

/// Decoder output plus the intermediate state used to produce it.
#[derive(Clone, Debug)]
pub struct Decoded {
    pub mode: DecodeMode,
    /// Real-valued output before export rounding.
    pub image: Image,
    pub layers: Option<LayerState>,
    pub matrix: Option<CsMatrix>,
    /// Dequantized measurements.
    pub measurements: Vec<f64>,
    /// ĉ = c_g + δ*.
    pub refined: Vec<f64>,
}

pub fn decode_detailed(b: &AgdlBitstream, mode: DecodeMode) -> Result<Decoded> {
    b.header.check()?;
    let payload = b.base_payload();
    if mode == DecodeMode::Base {
        let (image, _, _) = decode_base::<f64>(&payload)?;
        return Ok(Decoded {
            mode,
            image,
            layers: None,
            matrix: None,
            measurements: Vec::new(),
            refined: Vec::new(),
        });
    }
    let layers = derive_layers(&b.header, &payload, mode == DecodeMode::Full)?;
    if mode == DecodeMode::Soft {
        return Ok(Decoded {
            mode,
            image: layers.soft.clone(),
            layers: Some(layers),
            matrix: None,
            measurements: Vec::new(),
            refined: Vec::new(),
        });
    }

    let n_c = layers.set.len();
    let m = b.measurements.len();
    if b.header.measurement_count(n_c) != m {
        return Err(AgdlError::Integrity(format!(
            "decoder found {n_c} critical pixels implying {} measurements, stream carries {m}",
            b.header.measurement_count(n_c)
        )));
    }
    let matrix: CsMatrix = build_matrix(b.header.seed, m, n_c)?;
    if matrix.seed() != b.header.seed {
        return Err(AgdlError::Integrity(format!(
            "seed {} does not give a full-rank matrix",
            b.header.seed
        )));
    }
    let y = dequantize(&b.measurements);
    let delta = least_norm_adjust(&matrix, &y, &layers.set.values)?;
    let image = apply_adjustment(&layers.soft, &layers.set, &delta)?;
    let refined = layers
        .set
        .values
        .iter()
        .zip(&delta)
        .map(|(c, d)| c + d)
        .collect();
    Ok(Decoded {
        mode,
        image,
        layers: Some(layers),
        matrix: Some(matrix),
        measurements: y,
        refined,
    })
}

/// Decode to a real-valued image; export with [`crate::raster::encode_pgm`].
pub fn decode(b: &AgdlBitstream, mode: DecodeMode) -> Result<Image> {
    Ok(decode_detailed(b, mode)?.image)
}
