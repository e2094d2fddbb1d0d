#![allow(dead_code)]

use std::path::PathBuf;

use agdl::raster::read_pgm;
use agdl::Image;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn hash(x: usize, y: usize, salt: u64) -> f64 {
    let mut z = (x as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F))
        .wrapping_add(salt);
    z ^= z >> 29;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 32;
    (z % 1000) as f64 / 1000.0
}

/// Eight synthetic scenes of varying size and content.
pub fn synthetic() -> Vec<(String, Image)> {
    let disc = Image::from_fn(96, 96, |x, y| {
        let d = ((x as f64 - 50.0).powi(2) + (y as f64 - 44.0).powi(2)).sqrt();
        if d < 22.0 {
            200.0
        } else {
            40.0 + 20.0 * hash(x, y, 1)
        }
    });
    let ramp = Image::from_fn(80, 64, |x, y| (x as f64 * 3.0 + y as f64).min(255.0));
    let checker = Image::from_fn(64, 64, |x, y| {
        if (x / 8 + y / 8) % 2 == 0 {
            30.0
        } else {
            220.0
        }
    });
    let rings = Image::from_fn(100, 100, |x, y| {
        let r = ((x as f64 - 50.0).powi(2) + (y as f64 - 50.0).powi(2)).sqrt();
        127.5 + 110.0 * (r * 0.45).sin()
    });
    let bars = Image::from_fn(72, 56, |x, y| {
        let inside = (16..56).contains(&x) && (12..44).contains(&y);
        match (inside, (x / 3) % 2) {
            (true, 0) => 10.0,
            (true, _) => 245.0,
            _ => 128.0 + 10.0 * hash(x, y, 2),
        }
    });
    let texture = Image::from_fn(64, 80, |x, y| {
        let base = 90.0 + 60.0 * ((x as f64) * 0.3).sin() * ((y as f64) * 0.2).cos();
        base + 40.0 * hash(x, y, 3)
    });
    // dimensions that are not multiples of the block size
    let odd = Image::from_fn(61, 43, |x, y| {
        let v = if x * 43 > y * 61 { 180.0 } else { 60.0 };
        v + 15.0 * hash(x, y, 4)
    });
    let flat = Image::filled(48, 40, 113.0);
    vec![
        ("synthetic_disc".into(), disc),
        ("synthetic_ramp".into(), ramp),
        ("synthetic_checker".into(), checker),
        ("synthetic_rings".into(), rings),
        ("synthetic_bars".into(), bars),
        ("synthetic_texture".into(), texture),
        ("synthetic_odd".into(), odd),
        ("synthetic_flat".into(), flat),
    ]
}

/// The five natural test photographs shipped with the tests.
pub fn natural() -> Vec<(String, Image)> {
    ["astronaut", "camera", "chelsea", "coins", "moon"]
        .iter()
        .map(|n| {
            let path = data_dir().join(format!("natural_{n}.pgm"));
            let img = read_pgm(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            (format!("natural_{n}"), img)
        })
        .collect()
}

pub fn corpus() -> Vec<(String, Image)> {
    let mut all = synthetic();
    all.extend(natural());
    all
}

pub fn ladder() -> Vec<u8> {
    (1..=10).map(|i| i * 10).collect()
}
