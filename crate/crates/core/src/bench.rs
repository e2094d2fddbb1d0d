//! Rate-distortion harness.
//!
//! Every image is encoded once per quality and decoded three ways (base only,
//! soft decoded, full refinement). Rows report total bpp, PSNR over the whole
//! image, over the detector's ROI and over the critical pixels.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::container::{decode_detailed, encode_detailed, DecodeMode, EncoderConfig};
use crate::error::{AgdlError, Result};
use crate::raster::{read_pgm, Mask};
use crate::Image;

pub const PSNR_CAP: f64 = 99.0;
pub const CSV_HEADER: [&str; 9] = [
    "image",
    "quality",
    "variant",
    "bpp",
    "psnr",
    "roi_psnr",
    "crit_psnr",
    "n_c",
    "m",
];

fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (20.0 * (255.0 / mse.sqrt()).log10()).min(PSNR_CAP)
    }
}

/// PSNR in dB over all pixels, or over the set bits of `mask`.
pub fn psnr(a: &Image, b: &Image, mask: Option<&Mask>) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(AgdlError::invalid("PSNR of images with different shapes"));
    }
    match mask {
        None => {
            let mse = a
                .data()
                .iter()
                .zip(b.data())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                / a.len() as f64;
            Ok(psnr_from_mse(mse))
        }
        Some(m) => {
            if m.width() != a.width() || m.height() != a.height() {
                return Err(AgdlError::invalid("mask shape differs from image"));
            }
            psnr_at(a, b, &m.indices().collect::<Vec<_>>())
        }
    }
}

/// PSNR over the given raster indices.
pub fn psnr_at(a: &Image, b: &Image, indices: &[usize]) -> Result<f64> {
    if indices.is_empty() {
        return Err(AgdlError::invalid("PSNR over an empty pixel set"));
    }
    let mse = indices
        .iter()
        .map(|&i| (a.data()[i] - b.data()[i]).powi(2))
        .sum::<f64>()
        / indices.len() as f64;
    Ok(psnr_from_mse(mse))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Base,
    Soft,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Base, Variant::Soft, Variant::Full];

    fn mode(self) -> DecodeMode {
        match self {
            Variant::Base => DecodeMode::Base,
            Variant::Soft => DecodeMode::Soft,
            Variant::Full => DecodeMode::Full,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Base => "base",
            Variant::Soft => "soft",
            Variant::Full => "full",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RdPoint {
    pub image: String,
    pub quality: u8,
    pub variant: Variant,
    pub bpp: f64,
    pub psnr: f64,
    /// `None` when the ROI mask is empty.
    pub roi_psnr: Option<f64>,
    /// `None` when there are no critical pixels.
    pub crit_psnr: Option<f64>,
    pub n_c: usize,
    pub m: usize,
    /// Bits per pixel spent on the measurement layer (0 for base and soft).
    pub measurement_bpp: f64,
}

#[derive(Clone, Debug)]
pub struct RowError {
    pub image: String,
    pub quality: Option<u8>,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct RdReport {
    pub rows: Vec<RdPoint>,
    pub errors: Vec<RowError>,
}

/// Parse `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_ladder(text: &str) -> Result<Vec<u8>> {
    let bad = || AgdlError::invalid(format!("bad quality ladder {text:?}"));
    let q = |s: &str| -> Result<u8> {
        let v: u8 = s.trim().parse().map_err(|_| bad())?;
        if (1..=100).contains(&v) {
            Ok(v)
        } else {
            Err(bad())
        }
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [a, b, s] => {
            let (a, b) = (q(a)?, q(b)?);
            let s: usize = s.trim().parse().map_err(|_| bad())?;
            if s == 0 || a > b {
                return Err(bad());
            }
            Ok((a..=b).step_by(s).collect())
        }
        [list] => list.split(',').map(q).collect(),
        _ => Err(bad()),
    }
}

/// The evaluation ladder {10, 20, …, 100}.
pub fn default_ladder() -> Vec<u8> {
    (1..=10).map(|i| i * 10).collect()
}

/// Rate-distortion rows for one image at one quality, in variant order.
pub fn measure(
    name: &str,
    img: &Image,
    quality: u8,
    config: &EncoderConfig,
) -> Result<Vec<RdPoint>> {
    let cfg = config.clone().with_quality(quality);
    let enc = encode_detailed(img, &cfg)?;
    let b = &enc.bitstream;
    let sizes = b.sizes();
    let px = b.pixel_count();
    let roi: Vec<usize> = enc.layers.roi.indices().collect();
    let crit = enc.layers.set.raster_indices();
    let n_c = enc.layers.set.len();
    let m = b.measurements.len();

    let mut rows = Vec::with_capacity(3);
    for variant in Variant::ALL {
        let dec = decode_detailed(b, variant.mode())?;
        let out = dec.image.quantized();
        let measurement_bpp = if variant == Variant::Full {
            sizes.measurement_bpp(px)
        } else {
            0.0
        };
        rows.push(RdPoint {
            image: name.to_string(),
            quality,
            variant,
            bpp: sizes.base_bpp(px) + measurement_bpp,
            psnr: psnr(&out, img, None)?,
            roi_psnr: (!roi.is_empty())
                .then(|| psnr_at(&out, img, &roi))
                .transpose()?,
            crit_psnr: (!crit.is_empty())
                .then(|| psnr_at(&out, img, &crit))
                .transpose()?,
            n_c,
            m,
            measurement_bpp,
        });
    }
    Ok(rows)
}

fn list_pgms(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Run the ladder over every `.pgm` in `dir`.
///
/// Failures on one image or quality are collected and the run continues.
/// Rows are ordered by image name, quality, then variant.
pub fn run_rd(dir: &Path, qualities: &[u8], config: &EncoderConfig) -> Result<RdReport> {
    let mut report = RdReport::default();
    let mut images = Vec::new();
    for path in list_pgms(dir)? {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        match read_pgm::<f64>(&path) {
            Ok(img) => images.push((name, img)),
            Err(e) => report.errors.push(RowError {
                image: name,
                quality: None,
                message: e.to_string(),
            }),
        }
    }

    let jobs: Vec<(usize, u8)> = (0..images.len())
        .flat_map(|i| qualities.iter().map(move |&q| (i, q)))
        .collect();
    let results: Vec<(usize, u8, Result<Vec<RdPoint>>)> = jobs
        .par_iter()
        .map(|&(i, q)| (i, q, measure(&images[i].0, &images[i].1, q, config)))
        .collect();
    for (i, q, r) in results {
        match r {
            Ok(rows) => report.rows.extend(rows),
            Err(e) => report.errors.push(RowError {
                image: images[i].0.clone(),
                quality: Some(q),
                message: e.to_string(),
            }),
        }
    }
    report
        .rows
        .sort_by(|a, b| (&a.image, a.quality, a.variant).cmp(&(&b.image, b.quality, b.variant)));
    Ok(report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn write_csv<W: Write>(out: W, rows: &[RdPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| AgdlError::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.image.clone(),
            r.quality.to_string(),
            r.variant.to_string(),
            format!("{:.6}", r.bpp),
            format!("{:.6}", r.psnr),
            fmt_opt(r.roi_psnr),
            fmt_opt(r.crit_psnr),
            r.n_c.to_string(),
            r.m.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Critical-pixel gain of the full decode over the soft decode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DirectionalSummary {
    /// (image, quality) pairs with a non-empty critical set.
    pub eligible: usize,
    pub wins: usize,
    pub mean_margin_db: f64,
    pub min_margin_db: f64,
    /// Largest deviation of full bpp from soft bpp + measurement bpp.
    pub accounting_error: f64,
}

impl DirectionalSummary {
    pub fn win_rate(&self) -> f64 {
        if self.eligible == 0 {
            0.0
        } else {
            self.wins as f64 / self.eligible as f64
        }
    }
}

pub fn directional_summary(rows: &[RdPoint]) -> DirectionalSummary {
    let mut s = DirectionalSummary {
        min_margin_db: f64::INFINITY,
        ..Default::default()
    };
    let mut total = 0.0;
    for soft in rows.iter().filter(|r| r.variant == Variant::Soft) {
        let Some(full) = rows.iter().find(|r| {
            r.variant == Variant::Full && r.image == soft.image && r.quality == soft.quality
        }) else {
            continue;
        };
        s.accounting_error = s
            .accounting_error
            .max((full.bpp - (soft.bpp + full.measurement_bpp)).abs());
        if let (Some(f), Some(g)) = (full.crit_psnr, soft.crit_psnr) {
            let margin = f - g;
            s.eligible += 1;
            if margin > 0.0 {
                s.wins += 1;
            }
            total += margin;
            s.min_margin_db = s.min_margin_db.min(margin);
        }
    }
    if s.eligible > 0 {
        s.mean_margin_db = total / s.eligible as f64;
    } else {
        s.min_margin_db = 0.0;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_images_hit_the_cap() {
        let a = Image::from_fn(8, 8, |x, y| (x * y) as f64);
        assert_eq!(psnr(&a, &a, None).unwrap(), PSNR_CAP);
    }

    #[test]
    fn uniform_difference_of_five() {
        let a = Image::filled(10, 10, 100.0);
        let b = Image::filled(10, 10, 105.0);
        // 20 log10(255 / 5) = 20 log10(51)
        let p = psnr(&a, &b, None).unwrap();
        assert!((p - 34.151_403_521_958_85).abs() < 1e-9, "{p}");
    }

    #[test]
    fn full_mask_equals_unmasked() {
        let a = Image::from_fn(9, 7, |x, y| (x * 13 + y * 7) as f64 % 255.0);
        let b = a.map(|v| (v + 3.0) % 255.0);
        let m = Mask::full(9, 7);
        assert_eq!(psnr(&a, &b, Some(&m)).unwrap(), psnr(&a, &b, None).unwrap());
        assert!(psnr(&a, &b, Some(&Mask::empty(9, 7))).is_err());
        assert!(psnr(&a, &Image::filled(2, 2, 0.0), None).is_err());
    }

    #[test]
    fn ladder_parsing() {
        assert_eq!(parse_ladder("10:100:10").unwrap(), default_ladder());
        assert_eq!(parse_ladder("30:50:10").unwrap(), vec![30, 40, 50]);
        assert_eq!(parse_ladder("5,25").unwrap(), vec![5, 25]);
        assert!(parse_ladder("0:100:10").is_err());
        assert!(parse_ladder("10:100:0").is_err());
        assert!(parse_ladder("50:10:10").is_err());
        assert!(parse_ladder("a").is_err());
    }

    #[test]
    fn csv_header_only_for_no_rows() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "image,quality,variant,bpp,psnr,roi_psnr,crit_psnr,n_c,m\n"
        );
    }
}
