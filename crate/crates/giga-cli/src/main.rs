//! `giga` — drive the virtual multi-device runtime from the command line.
//!
//! Per-operation subcommands run one operation on files or generated data;
//! `bench` runs the sweep suites, writes CSV logs (and spectra or trace files
//! where relevant) and prints a human-readable summary.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime errors,
//! including out-of-device-memory and failed in-run verification.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use giga::bench::{self, SuiteSpec};
use giga::image::ImageRgb8;
use giga::io;
use giga::ops::{self, MiningJob, SignalKind};
use giga::rng::SplitMix64;
use giga::{GigaConfig, GigaGpu};

#[derive(Parser)]
#[command(
    name = "giga",
    version,
    about = "Multi-device compute over a virtual accelerator runtime",
    disable_help_subcommand = true
)]
struct Cli {
    /// Number of virtual devices.
    #[arg(long, global = true, default_value_t = 2)]
    devices: usize,

    /// Per-device memory capacity in bytes.
    #[arg(long, global = true, value_name = "BYTES")]
    device_mem: Option<u64>,

    /// Seed for generated inputs.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Write the runtime activity trace to this file after the command.
    #[arg(long, global = true, value_name = "PATH")]
    trace: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

const DEFAULT_DEVICE_MEM: u64 = 256 << 20;

#[derive(Subcommand)]
enum Command {
    /// Convert a PPM image to grayscale (writes `<name>_grayscale.pgm`).
    Gray {
        /// Input image, binary PPM (P6).
        input: PathBuf,
        /// Output path; defaults to the `_grayscale.pgm` convention.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Upsample a PPM image by an integer scale factor.
    Upsample {
        input: PathBuf,
        /// Integer scale factor (>= 1).
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        scale: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sharpen a PPM image with the 3x3 Laplacian stencil.
    Sharpen {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a signal, transform it, and write the spectrum.
    Fft {
        /// Signal kind: sine, sawtooth, square or chirp.
        #[arg(long, default_value = "sine")]
        kind: SignalKind,
        #[arg(long, default_value_t = 1.0)]
        freq: f64,
        #[arg(long, default_value_t = 1024.0)]
        rate: f64,
        #[arg(long, default_value_t = 1.0)]
        dur: f64,
        /// Chunked multi-device transform instead of the single-device one.
        #[arg(long)]
        chunked: bool,
        /// Spectrum output file.
        #[arg(long, default_value = "spectrum.txt")]
        out: PathBuf,
        /// Also write the generated samples, one per line.
        #[arg(long)]
        signal_out: Option<PathBuf>,
    },
    /// Multiply two seeded random N x N matrices and print a checksum.
    Matmul {
        #[arg(long)]
        size: usize,
    },
    /// Reduce a seeded random vector and print the result.
    Vector {
        /// dot or l2.
        #[arg(long)]
        op: VectorOp,
        #[arg(long)]
        size: usize,
    },
    /// Scan a nonce range for a hash below the target.
    Mine {
        /// Block data the nonce is appended to.
        #[arg(long, default_value = "blockdata")]
        data: String,
        #[arg(long)]
        target: u64,
        #[arg(long, default_value_t = 0)]
        start: u64,
        #[arg(long, default_value_t = 100_000)]
        count: u64,
    },
    /// Run a benchmark suite and write its CSV log.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum VectorOp {
    Dot,
    L2,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Evidence,
    Fft,
    Matmul,
    Vector,
    Upsample,
    Sharpen,
    Grayscale,
}

#[derive(Args)]
struct BenchArgs {
    /// Which suite to run.
    #[arg(long, value_enum)]
    suite: Suite,
    /// CSV output path; defaults to `bench_<suite>.csv`.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Largest exponent for the matmul/vector sweeps (sizes are powers of two).
    #[arg(long)]
    max_exp: Option<u32>,
    /// Smallest exponent for the matmul/vector sweeps.
    #[arg(long)]
    min_exp: Option<u32>,
    /// Scale range for the image sweeps.
    #[arg(long)]
    scale_min: Option<usize>,
    #[arg(long)]
    scale_max: Option<usize>,
    /// Base image for the image suites (PPM); synthesized when omitted.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Synthesized base image size, WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_dims)]
    base: Option<(usize, usize)>,
    /// Directory for FFT spectrum files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Busy-kernel duration for the evidence suite, in milliseconds.
    #[arg(long)]
    sleep_ms: Option<u64>,
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once('x')
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
    let w = w.parse().map_err(|_| format!("bad width `{w}`"))?;
    let h = h.parse().map_err(|_| format!("bad height `{h}`"))?;
    Ok((w, h))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_image(path: &Path) -> giga::Result<ImageRgb8> {
    io::read_ppm(path)
}

struct Globals {
    devices: usize,
    device_mem: Option<u64>,
    seed: u64,
    trace: Option<PathBuf>,
}

fn run(cli: Cli) -> giga::Result<()> {
    let Cli {
        devices,
        device_mem,
        seed,
        trace,
        command,
    } = cli;
    let globals = Globals {
        devices,
        device_mem,
        seed,
        trace,
    };

    let gpu = || -> giga::Result<GigaGpu> {
        GigaGpu::new(GigaConfig {
            device_count: globals.devices,
            device_memory: globals.device_mem.unwrap_or(DEFAULT_DEVICE_MEM),
            rng_seed: globals.seed,
        })
    };

    let trace_from = |gpu: &GigaGpu| -> giga::Result<()> {
        if let Some(path) = &globals.trace {
            io::write_trace(path, &gpu.runtime().trace_snapshot())?;
            println!("trace written to {}", path.display());
        }
        Ok(())
    };

    match command {
        Command::Gray { input, out } => {
            let gpu = gpu()?;
            let img = load_image(&input)?;
            let gray = gpu.convert_to_grayscale(&img)?;
            let out = out.unwrap_or_else(|| io::grayscale_output_path(&input));
            io::write_pgm(&out, &gray)?;
            println!("{}", out.display());
            trace_from(&gpu)
        }
        Command::Upsample { input, scale, out } => {
            let gpu = gpu()?;
            let img = load_image(&input)?;
            let up = gpu.upsample_image(&img, scale as usize)?;
            let out = out.unwrap_or_else(|| suffixed(&input, &format!("_x{scale}")));
            io::write_ppm(&out, &up)?;
            println!("{}", out.display());
            trace_from(&gpu)
        }
        Command::Sharpen { input, out } => {
            let gpu = gpu()?;
            let img = load_image(&input)?;
            let sharp = gpu.sharpen_image(&img)?;
            let out = out.unwrap_or_else(|| suffixed(&input, "_sharpened"));
            io::write_ppm(&out, &sharp)?;
            println!("{}", out.display());
            trace_from(&gpu)
        }
        Command::Fft {
            kind,
            freq,
            rate,
            dur,
            chunked,
            out,
            signal_out,
        } => {
            let gpu = gpu()?;
            let signal = gpu.generate_signal(kind, freq, rate, dur)?;
            if let Some(path) = &signal_out {
                io::write_samples(path, &signal.samples)?;
            }
            let spectrum = if chunked {
                gpu.perform_fft_chunked(&signal)?
            } else {
                gpu.perform_fft(&signal)?
            };
            ops::write_spectrum(&out, &spectrum)?;
            println!(
                "wrote {} bins ({} chunk{}) to {}",
                spectrum.bins().len(),
                spectrum.num_chunks(),
                if spectrum.num_chunks() == 1 { "" } else { "s" },
                out.display()
            );
            trace_from(&gpu)
        }
        Command::Matmul { size } => {
            let gpu = gpu()?;
            let mut rng = SplitMix64::new(globals.seed);
            let a = ops::MatrixF32::new(size, size, rng.fill_uniform_f32(size * size, -10.0, 10.0))?;
            let b = ops::MatrixF32::new(size, size, rng.fill_uniform_f32(size * size, -10.0, 10.0))?;
            let c = gpu.perform_matrix_multiplication(&a, &b)?;
            let frobenius: f64 = c
                .data()
                .iter()
                .map(|&v| v as f64 * v as f64)
                .sum::<f64>()
                .sqrt();
            println!("{frobenius}");
            trace_from(&gpu)
        }
        Command::Vector { op, size } => {
            let gpu = gpu()?;
            let mut rng = SplitMix64::new(globals.seed);
            let x = rng.fill_uniform_f32(size, -10.0, 10.0);
            let value = match op {
                VectorOp::Dot => {
                    let y = rng.fill_uniform_f32(size, -10.0, 10.0);
                    gpu.compute_dot_product(&x, &y)?
                }
                VectorOp::L2 => gpu.compute_l2_norm(&x)?,
            };
            println!("{value}");
            trace_from(&gpu)
        }
        Command::Mine {
            data,
            target,
            start,
            count,
        } => {
            let gpu = gpu()?;
            let job = MiningJob {
                block_data: data.into_bytes(),
                target,
                nonce_start: start,
                nonce_count: count,
            };
            match gpu.mine(&job)? {
                Some(nonce) => println!("{nonce}"),
                None => println!("none"),
            }
            trace_from(&gpu)
        }
        Command::Bench(args) => run_bench(&globals, args),
    }
}

fn suffixed(input: &Path, suffix: &str) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    input.with_file_name(format!("{stem}{suffix}.ppm"))
}

fn run_bench(globals: &Globals, args: BenchArgs) -> giga::Result<()> {
    let mut spec = match args.suite {
        Suite::Matmul => SuiteSpec::matmul_defaults(),
        Suite::Vector => SuiteSpec::vector_defaults(),
        Suite::Fft => SuiteSpec::fft_defaults(),
        Suite::Upsample => SuiteSpec::upsample_demo(),
        Suite::Sharpen => SuiteSpec::sharpen_defaults(),
        Suite::Grayscale => SuiteSpec::grayscale_defaults(),
        Suite::Evidence => SuiteSpec::evidence_defaults(),
    };
    spec.device_count = globals.devices;
    spec.seed = globals.seed;
    if let Some(mem) = globals.device_mem {
        spec.device_mem = mem;
    }
    if let Some(v) = args.min_exp {
        spec.min_exp = v;
    }
    if let Some(v) = args.max_exp {
        spec.max_exp = v;
    }
    if let Some(v) = args.scale_min {
        spec.scale_min = v;
    }
    if let Some(v) = args.scale_max {
        spec.scale_max = v;
    }
    if let Some((w, h)) = args.base {
        spec.base_width = w;
        spec.base_height = h;
    }
    if let Some(path) = &args.image {
        spec.base_image = Some(load_image(path)?);
    }
    spec.out_dir = args.out_dir.clone();
    if let Some(ms) = args.sleep_ms {
        spec.sleep_ms = ms;
    }

    let suite_name = match args.suite {
        Suite::Evidence => "evidence",
        Suite::Fft => "fft",
        Suite::Matmul => "matmul",
        Suite::Vector => "vector",
        Suite::Upsample => "upsample",
        Suite::Sharpen => "sharpen",
        Suite::Grayscale => "grayscale",
    };

    if let Suite::Evidence = args.suite {
        let report = bench::suite_evidence(&spec)?;
        let trace_path = globals
            .trace
            .clone()
            .unwrap_or_else(|| PathBuf::from("evidence_trace.tsv"));
        io::write_trace(&trace_path, &report.trace)?;
        match report.overlap_ns {
            Some(ns) => println!(
                "evidence: PASS — kernel intervals on {} devices overlap by {ns} ns",
                report.device_count
            ),
            None => println!(
                "evidence: FAIL — no cross-device kernel overlap on {} device(s)",
                report.device_count
            ),
        }
        println!("trace written to {}", trace_path.display());
        if report.device_count >= 2 && !report.pass {
            return Err(giga::GigaError::Verification(
                "expected overlapping kernel intervals on 2+ devices".into(),
            ));
        }
        return Ok(());
    }

    let csv_path = args
        .csv
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("bench_{suite_name}.csv")));

    let records = match args.suite {
        Suite::Matmul => bench::suite_matmul(&spec)?,
        Suite::Vector => bench::suite_vector(&spec)?,
        Suite::Fft => bench::suite_fft(&spec)?,
        Suite::Sharpen => bench::suite_sharpen(&spec)?,
        Suite::Grayscale => bench::suite_grayscale(&spec)?,
        Suite::Upsample => {
            let report = bench::suite_upsample(&spec)?;
            match report.single_first_oom {
                Some(s) => println!("single device: first out-of-memory at scale {s}"),
                None => println!("single device: completed every scale"),
            }
            match report.multi_first_oom {
                Some(s) => println!(
                    "{} devices: first out-of-memory at scale {s}",
                    spec.device_count
                ),
                None => println!("{} devices: completed every scale", spec.device_count),
            }
            report.records
        }
        Suite::Evidence => unreachable!(),
    };

    io::write_bench_csv(&csv_path, &records)?;
    let ok = records
        .iter()
        .filter(|r| r.status == io::BenchStatus::Ok)
        .count();
    println!(
        "{suite_name}: {} rows ({} ok, {} oom) -> {}",
        records.len(),
        ok,
        records.len() - ok,
        csv_path.display()
    );
    Ok(())
}
