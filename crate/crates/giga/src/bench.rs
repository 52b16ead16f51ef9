//! Benchmark suites: deterministic sweeps over the operation set with in-run
//! verification, producing `BenchRecord` rows for the CSV log.
//!
//! Every suite builds its own runtime from the [`SuiteSpec`], fills inputs
//! from the seed, and cross-checks numerical results while it runs — against
//! an independent host-side oracle or by comparing the single-device and
//! multi-device paths. A suite that produces wrong numbers fails with a
//! [`GigaError::Verification`] instead of logging timings. Given the same
//! (seed, device count, device memory) everything except the `elapsed_ms`
//! column is reproducible.
//!
//! Timings are wall-clock milliseconds measured around the blocking operation
//! calls. Out-of-memory results are not failures: the sweep records an `oom`
//! row and continues — the upsample suite exists precisely to show where the
//! single-device sweep dies while the split one keeps going.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use crate::error::{GigaError, Result};
use crate::image::{self, upsample_peak_device_bytes, ImageRgb8};
use crate::io::{BenchImpl, BenchRecord};
use crate::ops::{self, MatrixF32, SignalKind};
use crate::rng::SplitMix64;
use crate::runtime::{ActivityTrace, BufGuard, ElementKind, Runtime};

/// Largest matrix exponent the sweep accepts (`n = 2^15 = 32768`).
pub const MATMUL_MAX_EXP: u32 = 15;
/// Largest vector length the sweep accepts.
pub const VECTOR_MAX_LEN: usize = 67_108_864;

/// Device memory for the upsample demo: tuned against the allocation model so
/// a 64×36 base image runs out of single-device memory going to scale 24
/// while two devices carry on through scale 32.
pub const UPSAMPLE_DEMO_MEM: u64 = 3_711_744;
pub const UPSAMPLE_DEMO_BASE: (usize, usize) = (64, 36);

/// Configuration shared by all suites. Use the per-suite constructors for
/// sensible defaults and override fields as needed.
#[derive(Debug, Clone)]
pub struct SuiteSpec {
    pub device_count: usize,
    pub device_mem: u64,
    pub seed: u64,
    /// Sweep start for matmul/vector, as an exponent of two.
    pub min_exp: u32,
    /// Sweep end for matmul/vector, as an exponent of two.
    pub max_exp: u32,
    pub scale_min: usize,
    pub scale_max: usize,
    /// Base image for the image suites; synthesized when absent.
    pub base_image: Option<ImageRgb8>,
    pub base_width: usize,
    pub base_height: usize,
    /// Where the FFT suite writes spectrum files, if anywhere.
    pub out_dir: Option<PathBuf>,
    /// Busy-kernel duration for the evidence suite.
    pub sleep_ms: u64,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self {
            device_count: 2,
            device_mem: 256 << 20,
            seed: 42,
            min_exp: 1,
            max_exp: 10,
            scale_min: 2,
            scale_max: 40,
            base_image: None,
            base_width: 960,
            base_height: 540,
            out_dir: None,
            sleep_ms: 50,
        }
    }
}

impl SuiteSpec {
    /// Matrix sweep `2^1 ..= 2^10` by default; the flag ceiling is `2^15`.
    pub fn matmul_defaults() -> Self {
        Self::default()
    }

    /// Vector sweep `2^1 ..= 2^20` by default; sizes are capped at 67108864
    /// elements.
    pub fn vector_defaults() -> Self {
        Self {
            max_exp: 20,
            ..Self::default()
        }
    }

    /// The four reference signals at 1 Hz / 1024 Hz / 1 s.
    pub fn fft_defaults() -> Self {
        Self::default()
    }

    /// The memory-crossover demonstration: tiny base image, capacity tuned so
    /// the single-device sweep first fails at scale 24 and the two-device
    /// sweep at scale 33.
    pub fn upsample_demo() -> Self {
        Self {
            device_mem: UPSAMPLE_DEMO_MEM,
            base_width: UPSAMPLE_DEMO_BASE.0,
            base_height: UPSAMPLE_DEMO_BASE.1,
            ..Self::default()
        }
    }

    /// Upsample-then-sharpen sweep, scales 2..=20.
    pub fn sharpen_defaults() -> Self {
        Self {
            scale_max: 20,
            device_mem: 64 << 20,
            base_width: 64,
            base_height: 36,
            ..Self::default()
        }
    }

    pub fn grayscale_defaults() -> Self {
        Self::default()
    }

    pub fn evidence_defaults() -> Self {
        Self::default()
    }

    fn runtime(&self) -> Result<Runtime> {
        Runtime::with_uniform_devices(self.device_count, self.device_mem)
    }

    fn base_image(&self) -> ImageRgb8 {
        self.base_image
            .clone()
            .unwrap_or_else(|| synth_base_image(self.base_width, self.base_height, self.seed))
    }
}

/// Seeded gradient-plus-noise test image, so the image suites are
/// self-contained when no base image is supplied.
pub fn synth_base_image(width: usize, height: usize, seed: u64) -> ImageRgb8 {
    let mut rng = SplitMix64::new(seed);
    let clamp = |v: i64| v.clamp(0, 255) as u8;
    ImageRgb8::from_fn(width, height, |x, y| {
        let gx = if width > 1 {
            (255 * x / (width - 1)) as i64
        } else {
            128
        };
        let gy = if height > 1 {
            (255 * y / (height - 1)) as i64
        } else {
            128
        };
        let mut noise = || rng.next_below(33) as i64 - 16;
        [
            clamp(gx + noise()),
            clamp(gy + noise()),
            clamp((gx + gy) / 2 + noise()),
        ]
    })
    .expect("synthesized image dimensions are valid")
}

fn time_ms<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let value = f();
    (value, start.elapsed().as_secs_f64() * 1000.0)
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}

/// Matrix multiplication sweep: seeded random `n × n` matrices for
/// `n = 2^min_exp ..= 2^max_exp`, timing the single-device and multi-device
/// paths and verifying that they agree to a relative 1e-6 per element.
pub fn suite_matmul(spec: &SuiteSpec) -> Result<Vec<BenchRecord>> {
    if spec.max_exp > MATMUL_MAX_EXP {
        return Err(GigaError::Config(format!(
            "matmul sweep is capped at 2^{MATMUL_MAX_EXP}"
        )));
    }
    let rt = spec.runtime()?;
    let mut records = Vec::new();
    for exp in spec.min_exp..=spec.max_exp {
        let n = 1usize << exp;
        let mut rng = SplitMix64::new(spec.seed.wrapping_add(exp as u64));
        let a = MatrixF32::new(n, n, rng.fill_uniform_f32(n * n, -10.0, 10.0))?;
        let b = MatrixF32::new(n, n, rng.fill_uniform_f32(n * n, -10.0, 10.0))?;

        let mut results = Vec::new();
        for (impl_kind, devices) in [(BenchImpl::Single, 1), (BenchImpl::Multi, spec.device_count)]
        {
            let (result, ms) = time_ms(|| ops::matmul(&rt, &a, &b, devices));
            match result {
                Ok(c) => {
                    records.push(BenchRecord::ok("matmul", impl_kind, n, ms));
                    results.push(c);
                }
                Err(e) if e.is_oom() => records.push(BenchRecord::oom("matmul", impl_kind, n)),
                Err(e) => return Err(e),
            }
        }
        if let [single, multi] = results.as_slice() {
            for (i, (s, m)) in single.data().iter().zip(multi.data()).enumerate() {
                if rel_err(*m as f64, *s as f64) > 1e-6 {
                    return Err(GigaError::Verification(format!(
                        "matmul n={n}: single and multi disagree at element {i}: {s} vs {m}"
                    )));
                }
            }
        }
    }
    Ok(records)
}

/// Vector sweep: dot product and L2 norm over seeded uniform [−10, 10)
/// vectors, single and multi device, each result checked against a
/// sequential f64 oracle to a relative 1e-5.
pub fn suite_vector(spec: &SuiteSpec) -> Result<Vec<BenchRecord>> {
    if spec.max_exp >= 32 || (1usize << spec.max_exp) > VECTOR_MAX_LEN {
        return Err(GigaError::Config(format!(
            "vector sweep is capped at {VECTOR_MAX_LEN} elements"
        )));
    }
    let rt = spec.runtime()?;
    let mut records = Vec::new();
    for exp in spec.min_exp..=spec.max_exp {
        let len = 1usize << exp;
        let mut rng = SplitMix64::new(spec.seed.wrapping_add(exp as u64));
        let x = rng.fill_uniform_f32(len, -10.0, 10.0);
        let y = rng.fill_uniform_f32(len, -10.0, 10.0);
        let dot_oracle: f64 = x.iter().zip(&y).map(|(&a, &b)| a as f64 * b as f64).sum();
        let l2_oracle: f64 = x
            .iter()
            .map(|&a| a as f64 * a as f64)
            .sum::<f64>()
            .sqrt();

        for (impl_kind, devices) in [(BenchImpl::Single, 1), (BenchImpl::Multi, spec.device_count)]
        {
            let (dot, ms) = time_ms(|| ops::dot(&rt, &x, &y, devices));
            let dot = dot?;
            if rel_err(dot, dot_oracle) > 1e-5 {
                return Err(GigaError::Verification(format!(
                    "dot len={len} ({impl_kind}): got {dot}, oracle {dot_oracle}"
                )));
            }
            records.push(BenchRecord::ok("dot", impl_kind, len, ms));

            let (l2, ms) = time_ms(|| ops::l2_norm(&rt, &x, devices));
            let l2 = l2?;
            if rel_err(l2, l2_oracle) > 1e-5 {
                return Err(GigaError::Verification(format!(
                    "l2 len={len} ({impl_kind}): got {l2}, oracle {l2_oracle}"
                )));
            }
            records.push(BenchRecord::ok("l2", impl_kind, len, ms));
        }
    }
    Ok(records)
}

/// FFT suite: the four reference signals at the 1 Hz / 1024 Hz / 1 s
/// parameters, timing the single-device transform against the chunked
/// multi-device one and verifying chunk consistency. Spectrum files land in
/// `out_dir` when it is set.
pub fn suite_fft(spec: &SuiteSpec) -> Result<Vec<BenchRecord>> {
    let rt = spec.runtime()?;
    let mut records = Vec::new();
    for kind in SignalKind::ALL {
        let signal = ops::generate_signal(kind, 1.0, 1024.0, 1.0)?;
        debug_assert_eq!(signal.samples.len(), 1024);

        let (single, ms) = time_ms(|| ops::fft_single(&rt, 0, &signal.samples));
        let single = single?;
        records.push(BenchRecord::ok("fft", BenchImpl::Single, kind, ms));

        let (chunked, ms) = time_ms(|| ops::fft_chunked(&rt, &signal.samples, spec.device_count));
        let chunked = chunked?;
        records.push(BenchRecord::ok("fft", BenchImpl::Multi, kind, ms));

        // Each output block must be the transform of its own input chunk.
        let chunk_len = signal.samples.len() / spec.device_count;
        for k in 0..spec.device_count {
            let sub = &signal.samples[k * chunk_len..(k + 1) * chunk_len];
            let reference = ops::fft_single(&rt, 0, sub)?;
            for (i, (got, want)) in chunked.chunk(k).iter().zip(reference.bins()).enumerate() {
                if (got - want).norm() > 1e-4 {
                    return Err(GigaError::Verification(format!(
                        "fft {kind}: chunk {k} bin {i} differs from the single transform"
                    )));
                }
            }
        }

        if kind == SignalKind::Sine {
            let mag = single.bins()[1].norm();
            if (mag - 512.0).abs() > 0.1 {
                return Err(GigaError::Verification(format!(
                    "sine spectrum: |bin 1| = {mag}, expected 512"
                )));
            }
        }

        if let Some(dir) = &spec.out_dir {
            std::fs::create_dir_all(dir)?;
            ops::write_spectrum(dir.join(format!("{kind}_single.txt")), &single)?;
            ops::write_spectrum(dir.join(format!("{kind}_chunked.txt")), &chunked)?;
        }
    }
    Ok(records)
}

/// Outcome of the upsample sweep, including where each path first ran out of
/// device memory.
#[derive(Debug)]
pub struct UpsampleReport {
    pub records: Vec<BenchRecord>,
    pub single_first_oom: Option<usize>,
    pub multi_first_oom: Option<usize>,
}

/// Upsample sweep over integer scales. For every scale the allocation model
/// predicts whether each path fits device memory; the actual outcome must
/// match the prediction, ok results must be byte-identical across paths, and
/// `oom` rows are recorded without stopping the sweep.
pub fn suite_upsample(spec: &SuiteSpec) -> Result<UpsampleReport> {
    let rt = spec.runtime()?;
    let base = spec.base_image();
    let (w, h) = (base.width(), base.height());
    let mut records = Vec::new();
    let mut single_first_oom = None;
    let mut multi_first_oom = None;

    for scale in spec.scale_min..=spec.scale_max {
        let mut outputs = Vec::new();
        for (impl_kind, devices) in [(BenchImpl::Single, 1), (BenchImpl::Multi, spec.device_count)]
        {
            let predicted_fit = upsample_peak_device_bytes(w, h, scale, devices) <= spec.device_mem;
            let (result, ms) = time_ms(|| image::upsample_nn(&rt, &base, scale, devices));
            match result {
                Ok(img) => {
                    if !predicted_fit {
                        return Err(GigaError::Verification(format!(
                            "upsample scale {scale} ({impl_kind}) succeeded but the \
                             allocation model predicted OOM"
                        )));
                    }
                    records.push(BenchRecord::ok("upsample", impl_kind, scale, ms));
                    outputs.push(img);
                }
                Err(e) if e.is_oom() => {
                    if predicted_fit {
                        return Err(GigaError::Verification(format!(
                            "upsample scale {scale} ({impl_kind}) hit OOM but the \
                             allocation model predicted a fit"
                        )));
                    }
                    records.push(BenchRecord::oom("upsample", impl_kind, scale));
                    let first = match impl_kind {
                        BenchImpl::Single => &mut single_first_oom,
                        BenchImpl::Multi => &mut multi_first_oom,
                    };
                    first.get_or_insert(scale);
                }
                Err(e) => return Err(e),
            }
        }
        if let [single, multi] = outputs.as_slice() {
            if single != multi {
                return Err(GigaError::Verification(format!(
                    "upsample scale {scale}: single and multi outputs differ"
                )));
            }
        }
    }
    Ok(UpsampleReport {
        records,
        single_first_oom,
        multi_first_oom,
    })
}

/// Upsample-then-sharpen sweep, byte-comparing the single- and multi-device
/// paths at every scale.
pub fn suite_sharpen(spec: &SuiteSpec) -> Result<Vec<BenchRecord>> {
    let rt = spec.runtime()?;
    let base = spec.base_image();
    let mut records = Vec::new();
    for scale in spec.scale_min..=spec.scale_max {
        let mut outputs = Vec::new();
        for (impl_kind, devices) in [(BenchImpl::Single, 1), (BenchImpl::Multi, spec.device_count)]
        {
            let (result, ms) = time_ms(|| image::upsample_then_sharpen(&rt, &base, scale, devices));
            match result {
                Ok(img) => {
                    records.push(BenchRecord::ok("sharpen", impl_kind, scale, ms));
                    outputs.push(img);
                }
                Err(e) if e.is_oom() => {
                    records.push(BenchRecord::oom("sharpen", impl_kind, scale))
                }
                Err(e) => return Err(e),
            }
        }
        if let [single, multi] = outputs.as_slice() {
            if single != multi {
                return Err(GigaError::Verification(format!(
                    "sharpen scale {scale}: single and multi outputs differ"
                )));
            }
        }
    }
    Ok(records)
}

/// Grayscale conversion timing, single vs multi device, byte-compared.
pub fn suite_grayscale(spec: &SuiteSpec) -> Result<Vec<BenchRecord>> {
    let rt = spec.runtime()?;
    let base = spec.base_image();
    let size = format!("{}x{}", base.width(), base.height());
    let mut records = Vec::new();
    let mut outputs = Vec::new();
    for (impl_kind, devices) in [(BenchImpl::Single, 1), (BenchImpl::Multi, spec.device_count)] {
        let (result, ms) = time_ms(|| image::grayscale(&rt, &base, devices));
        match result {
            Ok(img) => {
                records.push(BenchRecord::ok("grayscale", impl_kind, &size, ms));
                outputs.push(img);
            }
            Err(e) if e.is_oom() => records.push(BenchRecord::oom("grayscale", impl_kind, &size)),
            Err(e) => return Err(e),
        }
    }
    if let [single, multi] = outputs.as_slice() {
        if single != multi {
            return Err(GigaError::Verification(
                "grayscale: single and multi outputs differ".into(),
            ));
        }
    }
    Ok(records)
}

/// Result of the parallelism-evidence run.
#[derive(Debug)]
pub struct EvidenceReport {
    pub device_count: usize,
    /// Largest cross-device kernel overlap observed, if any.
    pub overlap_ns: Option<u64>,
    pub pass: bool,
    pub trace: ActivityTrace,
}

/// Launch a deliberately slow kernel on every device at once and inspect the
/// trace for kernel intervals that overlap in wall time across devices.
/// With one device the report is always FAIL — the negative control.
pub fn suite_evidence(spec: &SuiteSpec) -> Result<EvidenceReport> {
    let rt = spec.runtime()?;
    let mut guard = BufGuard::new(&rt);
    let mut streams = Vec::new();
    for device_id in 0..spec.device_count {
        let stream = rt.create_stream(device_id)?;
        let buf = guard.alloc(device_id, 4096, ElementKind::F32)?;
        let handle = buf.clone();
        let sleep = Duration::from_millis(spec.sleep_ms);
        rt.launch(&stream, "busy", &[&buf], move |ctx| {
            let mut v = ctx.f32_mut(&handle)?;
            std::thread::sleep(sleep);
            v[0] = 1.0;
            Ok(())
        })?;
        streams.push(stream);
    }
    for stream in &streams {
        rt.synchronize_stream(stream)?;
    }
    drop(guard);
    let trace = rt.trace_snapshot();
    let overlap_ns = trace.cross_device_kernel_overlap_ns();
    Ok(EvidenceReport {
        device_count: spec.device_count,
        overlap_ns,
        pass: overlap_ns.is_some(),
        trace,
    })
}
