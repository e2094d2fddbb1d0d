//! `agdl`: encode, decode, inspect and benchmark `.agdl` bitstreams.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use agdl::bench::{directional_summary, parse_ladder, run_rd, write_csv};
use agdl::container::{decode_detailed, encode_detailed, AgdlBitstream, DecodeMode, EncoderConfig};
use agdl::raster::{read_pgm, write_mask_pgm, write_pgm};
use agdl::{AgdlError, Image};

#[derive(Parser, Debug)]
#[command(
    name = "agdl",
    version,
    about = "Attention-guided dual-layer image codec"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct RefineArgs {
    /// Critical pixel budget as a fraction of all pixels.
    #[arg(long = "ncrit", default_value_t = 0.02)]
    ncrit: f64,
    /// Measurements per critical pixel.
    #[arg(long = "mrate", default_value_t = 0.5)]
    mrate: f64,
    /// Sampling-matrix seed.
    #[arg(long, default_value_t = EncoderConfig::default().seed)]
    seed: u64,
    /// Soft-decoder change threshold, intensity levels.
    #[arg(long, default_value_t = 4.0)]
    tau: f64,
    /// POCS iterations.
    #[arg(long, default_value_t = 8)]
    iterations: u8,
}

impl RefineArgs {
    fn config(&self, quality: u8) -> Result<EncoderConfig, AgdlError> {
        EncoderConfig::default()
            .with_quality(quality)
            .with_seed(self.seed)
            .with_pocs_iterations(self.iterations)
            .with_critical_fraction(self.ncrit)?
            .with_measurement_ratio(self.mrate)?
            .with_error_threshold(self.tau)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encode a PGM (P5) image.
    Encode {
        /// Binary PGM (P5) input.
        #[arg(long)]
        input: PathBuf,
        /// Base-layer quality, 1 to 100.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=100))]
        quality: u8,
        #[command(flatten)]
        refine: RefineArgs,
        /// Destination .agdl file.
        #[arg(long)]
        output: PathBuf,
    },
    /// Decode a .agdl file to PGM.
    Decode {
        file: PathBuf,
        #[arg(long, default_value = "full", value_parser = ["base", "soft", "full"])]
        mode: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Print header fields and per-layer sizes.
    Inspect {
        file: PathBuf,
        /// Write the decoder's critical pixel mask as PGM.
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Rate-distortion sweep over a directory of PGM images.
    Bench {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value = "10:100:10")]
        qualities: String,
        #[arg(long)]
        csv: PathBuf,
        #[command(flatten)]
        refine: RefineArgs,
    },
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<AgdlError> for Failure {
    fn from(e: AgdlError) -> Self {
        match e {
            AgdlError::InvalidParameter(m) => Failure::Usage(m),
            other => Failure::Data(other.to_string()),
        }
    }
}

fn read_stream(path: &PathBuf) -> Result<AgdlBitstream, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok(AgdlBitstream::parse(&bytes)?)
}

fn load_image(path: &PathBuf) -> Result<Image, Failure> {
    read_pgm(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Encode {
            input,
            quality,
            refine,
            output,
        } => {
            let config = refine.config(quality)?;
            let img = load_image(&input)?;
            let enc = encode_detailed(&img, &config)?;
            let bytes = enc.bitstream.serialize();
            fs::write(&output, &bytes).map_err(|e| Failure::Data(e.to_string()))?;
            eprintln!(
                "encoded {}x{} q={} n_c={} m={} bytes={} bpp={:.4}",
                img.width(),
                img.height(),
                quality,
                enc.layers.set.len(),
                enc.bitstream.measurements.len(),
                bytes.len(),
                enc.bitstream.bpp()
            );
        }
        Command::Decode { file, mode, output } => {
            let b = read_stream(&file)?;
            let mode: DecodeMode = mode.parse()?;
            let img = decode_detailed(&b, mode)?.image;
            write_pgm(&output, &img).map_err(|e| Failure::Data(e.to_string()))?;
        }
        Command::Inspect { file, mask } => {
            let b = read_stream(&file)?;
            let h = &b.header;
            let sizes = b.sizes();
            let px = b.pixel_count();
            let dec = decode_detailed(&b, DecodeMode::Full)?;
            let layers = dec.layers.expect("full decode keeps its layers");
            println!("version     {}", h.version);
            println!("size        {}x{}", h.width, h.height);
            println!("quality     {}", h.quality);
            println!("seed        {}", h.seed);
            println!("ncrit       {:.4}", h.critical_per_10k as f64 / 1e4);
            println!("mrate       {:.4}", h.m_ratio_per_10k as f64 / 1e4);
            println!("tau         {}", h.tau_x16 as f64 / 16.0);
            println!("iterations  {}", h.pocs_iterations);
            println!("n_c         {}", layers.set.len());
            println!("m           {}", b.measurements.len());
            println!("header      {} bytes", sizes.header);
            println!(
                "base        {} bytes  {:.4} bpp",
                sizes.base,
                (sizes.base * 8) as f64 / px as f64
            );
            println!(
                "refinement  {} bytes  {:.4} bpp",
                sizes.measurements,
                sizes.measurement_bpp(px)
            );
            println!(
                "total       {} bytes  {:.4} bpp",
                sizes.total(),
                sizes.total_bpp(px)
            );
            if let Some(path) = mask {
                write_mask_pgm(&path, &layers.set.to_mask())
                    .map_err(|e| Failure::Data(e.to_string()))?;
            }
        }
        Command::Bench {
            dir,
            qualities,
            csv,
            refine,
        } => {
            let ladder = parse_ladder(&qualities)?;
            let config = refine.config(ladder[0])?;
            if !dir.is_dir() {
                return Err(Failure::Data(format!(
                    "{} is not a directory",
                    dir.display()
                )));
            }
            let report = run_rd(&dir, &ladder, &config)?;
            for e in &report.errors {
                match e.quality {
                    Some(q) => eprintln!("error: {} q={q}: {}", e.image, e.message),
                    None => eprintln!("error: {}: {}", e.image, e.message),
                }
            }
            let file = fs::File::create(&csv).map_err(|e| Failure::Data(e.to_string()))?;
            write_csv(file, &report.rows)?;
            let s = directional_summary(&report.rows);
            eprintln!(
                "{} rows; full beats soft on critical pixels in {}/{} cases, mean margin {:.3} dB",
                report.rows.len(),
                s.wins,
                s.eligible,
                s.mean_margin_db
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
