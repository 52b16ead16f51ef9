//! Real-to-complex FFT on the virtual devices.
//!
//! The transform is an iterative radix-2 decimation-in-time FFT: a bit-reversal
//! permutation kernel followed by `log2(N)` butterfly-stage kernels, all
//! enqueued on the owning device's stream. Input lengths must be powers of
//! two. A real input of length `N` yields `N/2 + 1` complex bins.
//!
//! The chunked variant splits the input into one contiguous chunk per device
//! and transforms each chunk independently, concatenating the per-chunk
//! spectra in device order. Note that this is *not* the FFT of the full
//! signal — each block is the spectrum of its own chunk only. The layout is
//! preserved as-is because that is the operation the multi-device split
//! performs; callers who need the full-length transform should use
//! [`fft_single`].

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub use num_complex::Complex32;

use crate::error::{GigaError, Result};
use crate::kernel::{self, IndexSpace2D};
use crate::runtime::{BufGuard, DeviceBuffer, ElementKind, Runtime, Stream};

/// How the bins of a [`ComplexSpectrum`] are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumLayout {
    /// `N/2 + 1` bins of one full-length transform.
    Full,
    /// `num_chunks` blocks of `L/2 + 1` bins each, concatenated in device order.
    Chunked { num_chunks: usize },
}

/// FFT output: complex bins plus their layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    bins: Vec<Complex32>,
    layout: SpectrumLayout,
}

impl ComplexSpectrum {
    pub fn new(bins: Vec<Complex32>, layout: SpectrumLayout) -> Result<Self> {
        if let SpectrumLayout::Chunked { num_chunks } = layout {
            if num_chunks == 0 {
                return Err(GigaError::Size("chunked layout needs at least one chunk".into()));
            }
            if !bins.len().is_multiple_of(num_chunks) {
                return Err(GigaError::Size(format!(
                    "{} bins cannot split into {num_chunks} equal chunks",
                    bins.len()
                )));
            }
        }
        Ok(Self { bins, layout })
    }

    pub fn bins(&self) -> &[Complex32] {
        &self.bins
    }

    pub fn layout(&self) -> SpectrumLayout {
        self.layout
    }

    /// Bins of one chunk; the whole spectrum counts as a single chunk when
    /// the layout is `Full`.
    pub fn chunk(&self, index: usize) -> &[Complex32] {
        match self.layout {
            SpectrumLayout::Full => {
                assert_eq!(index, 0, "full spectrum has a single chunk");
                &self.bins
            }
            SpectrumLayout::Chunked { num_chunks } => {
                let len = self.bins.len() / num_chunks;
                &self.bins[index * len..(index + 1) * len]
            }
        }
    }

    pub fn num_chunks(&self) -> usize {
        match self.layout {
            SpectrumLayout::Full => 1,
            SpectrumLayout::Chunked { num_chunks } => num_chunks,
        }
    }
}

fn bit_reverse(mut value: usize, bits: u32) -> usize {
    let mut out = 0;
    for _ in 0..bits {
        out = (out << 1) | (value & 1);
        value >>= 1;
    }
    out
}

/// Enqueue the in-place radix-2 FFT of a length-`n` complex buffer:
/// bit-reversal permutation, then one butterfly kernel per stage.
fn enqueue_fft_kernels(
    runtime: &Runtime,
    stream: &Stream,
    buffer: &DeviceBuffer,
    n: usize,
) -> Result<()> {
    debug_assert!(n.is_power_of_two());
    let bits = n.trailing_zeros();

    let handle = buffer.clone();
    let space = IndexSpace2D::covering_linear(n)?;
    runtime.launch(stream, "fft_bitrev", &[buffer], move |ctx| {
        let mut data = ctx.c32_mut(&handle)?;
        let data: &mut [Complex32] = &mut data;
        kernel::dispatch(&space, |t, _| {
            let i = t.global_linear();
            if i < n {
                let j = bit_reverse(i, bits);
                if i < j {
                    data.swap(i, j);
                }
            }
        })
    })?;

    for stage in 1..=bits {
        let half = 1usize << (stage - 1);
        let span = 1usize << stage;
        let butterflies = n / 2;
        let handle = buffer.clone();
        let space = IndexSpace2D::covering_linear(butterflies)?;
        runtime.launch(stream, "fft_stage", &[buffer], move |ctx| {
            let mut data = ctx.c32_mut(&handle)?;
            let data: &mut [Complex32] = &mut data;
            kernel::dispatch(&space, |t, _| {
                let k = t.global_linear();
                if k < butterflies {
                    let group = k / half;
                    let j = k % half;
                    let idx = group * span + j;
                    let angle = -2.0 * std::f64::consts::PI * j as f64 / span as f64;
                    let w = Complex32::new(angle.cos() as f32, angle.sin() as f32);
                    let u = data[idx];
                    let v = w * data[idx + half];
                    data[idx] = u + v;
                    data[idx + half] = u - v;
                }
            })
        })?;
    }
    Ok(())
}

fn check_power_of_two(n: usize) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(GigaError::Size(format!(
            "FFT length must be a non-zero power of two, got {n}"
        )));
    }
    Ok(())
}

/// Real-to-complex FFT of `samples` on one device.
pub fn fft_single(runtime: &Runtime, device_id: usize, samples: &[f32]) -> Result<ComplexSpectrum> {
    let n = samples.len();
    check_power_of_two(n)?;

    let mut guard = BufGuard::new(runtime);
    let stream = runtime.create_stream(device_id)?;
    let buffer = guard.alloc(device_id, (n * 8) as u64, ElementKind::C32)?;
    let complex: Vec<Complex32> = samples.iter().map(|&s| Complex32::new(s, 0.0)).collect();
    runtime.h2d_c32(&buffer, &complex)?;
    enqueue_fft_kernels(runtime, &stream, &buffer, n)?;
    runtime.synchronize_stream(&stream)?;
    let full = runtime.d2h_c32(&buffer)?;
    let bins = full[..n / 2 + 1].to_vec();
    ComplexSpectrum::new(bins, SpectrumLayout::Full)
}

/// Chunked multi-device FFT: each device transforms its contiguous chunk of
/// the input concurrently with the others. Output is the concatenation of the
/// per-chunk spectra, `L/2 + 1` bins each — see the module docs for why this
/// differs from the full-length transform.
pub fn fft_chunked(
    runtime: &Runtime,
    samples: &[f32],
    num_devices: usize,
) -> Result<ComplexSpectrum> {
    super::check_device_request(runtime, num_devices)?;
    let n = samples.len();
    if n == 0 || !n.is_multiple_of(num_devices) {
        return Err(GigaError::Size(format!(
            "signal length {n} does not divide evenly across {num_devices} devices"
        )));
    }
    let chunk_len = n / num_devices;
    check_power_of_two(chunk_len)?;

    let mut guard = BufGuard::new(runtime);
    let mut per_device = Vec::with_capacity(num_devices);
    for device_id in 0..num_devices {
        let chunk = &samples[device_id * chunk_len..(device_id + 1) * chunk_len];
        let stream = runtime.create_stream(device_id)?;
        let buffer = guard.alloc(device_id, (chunk_len * 8) as u64, ElementKind::C32)?;
        let complex: Vec<Complex32> = chunk.iter().map(|&s| Complex32::new(s, 0.0)).collect();
        runtime.h2d_c32(&buffer, &complex)?;
        enqueue_fft_kernels(runtime, &stream, &buffer, chunk_len)?;
        per_device.push((stream, buffer));
    }

    let mut bins = Vec::with_capacity(num_devices * (chunk_len / 2 + 1));
    for (stream, buffer) in &per_device {
        runtime.synchronize_stream(stream)?;
        let full = runtime.d2h_c32(buffer)?;
        bins.extend_from_slice(&full[..chunk_len / 2 + 1]);
    }
    ComplexSpectrum::new(
        bins,
        SpectrumLayout::Chunked {
            num_chunks: num_devices,
        },
    )
}

/// Write a spectrum as text: one `<re> <im>` pair per line with six fractional
/// digits. Chunked spectra get a `# chunk <k>` comment line before each block.
pub fn write_spectrum_to<W: Write>(mut writer: W, spectrum: &ComplexSpectrum) -> Result<()> {
    match spectrum.layout() {
        SpectrumLayout::Full => {
            for bin in spectrum.bins() {
                writeln!(writer, "{:.6} {:.6}", bin.re, bin.im)?;
            }
        }
        SpectrumLayout::Chunked { num_chunks } => {
            for k in 0..num_chunks {
                writeln!(writer, "# chunk {k}")?;
                for bin in spectrum.chunk(k) {
                    writeln!(writer, "{:.6} {:.6}", bin.re, bin.im)?;
                }
            }
        }
    }
    Ok(())
}

pub fn write_spectrum<P: AsRef<Path>>(path: P, spectrum: &ComplexSpectrum) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_spectrum_to(&mut writer, spectrum)?;
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::signal::{generate_signal, SignalKind};
    use crate::rng::SplitMix64;

    fn runtime() -> Runtime {
        Runtime::with_uniform_devices(3, 1 << 24).unwrap()
    }

    /// Naive O(N²) discrete Fourier transform in f64, the independent oracle.
    fn dft_oracle(samples: &[f32]) -> Vec<Complex32> {
        let n = samples.len();
        (0..=n / 2)
            .map(|k| {
                let mut re = 0.0f64;
                let mut im = 0.0f64;
                for (i, &x) in samples.iter().enumerate() {
                    let angle = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                    re += x as f64 * angle.cos();
                    im += x as f64 * angle.sin();
                }
                Complex32::new(re as f32, im as f32)
            })
            .collect()
    }

    fn max_abs_diff(a: &[Complex32], b: &[Complex32]) -> f32 {
        assert_eq!(a.len(), b.len());
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0f32, f32::max)
    }

    #[test]
    fn constant_signal_is_dc_only() {
        let rt = runtime();
        let spec = fft_single(&rt, 0, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(spec.bins().len(), 3);
        assert!((spec.bins()[0].re - 4.0).abs() < 1e-6);
        assert!(spec.bins()[0].im.abs() < 1e-6);
        for bin in &spec.bins()[1..] {
            assert!(bin.norm() < 1e-6);
        }
    }

    #[test]
    fn zero_signal_gives_zero_bins() {
        let rt = runtime();
        let spec = fft_single(&rt, 0, &[0.0; 64]).unwrap();
        assert!(spec.bins().iter().all(|b| b.norm() == 0.0));
    }

    #[test]
    fn pure_sine_concentrates_in_bin_one() {
        let rt = runtime();
        let signal = generate_signal(SignalKind::Sine, 1.0, 1024.0, 1.0).unwrap();
        let spec = fft_single(&rt, 0, &signal.samples).unwrap();
        assert!((spec.bins()[1].norm() - 512.0).abs() < 0.1);
        for (k, bin) in spec.bins().iter().enumerate() {
            if k != 1 {
                assert!(bin.norm() < 0.1, "bin {k} has magnitude {}", bin.norm());
            }
        }
    }

    #[test]
    fn matches_dft_oracle_on_random_signals() {
        let rt = runtime();
        let mut rng = SplitMix64::new(11);
        for n in [2usize, 8, 64, 512, 1024] {
            let samples = rng.fill_uniform_f32(n, -1.0, 1.0);
            let spec = fft_single(&rt, 0, &samples).unwrap();
            let oracle = dft_oracle(&samples);
            let diff = max_abs_diff(spec.bins(), &oracle);
            assert!(diff < 1e-2, "n={n}: max |diff| = {diff}");
        }
    }

    #[test]
    fn non_power_of_two_length_is_a_size_error() {
        let rt = runtime();
        assert!(matches!(
            fft_single(&rt, 0, &[1.0; 12]),
            Err(GigaError::Size(_))
        ));
        assert!(matches!(fft_single(&rt, 0, &[]), Err(GigaError::Size(_))));
    }

    #[test]
    fn length_one_transform_is_the_sample_itself() {
        let rt = runtime();
        let spec = fft_single(&rt, 0, &[2.5]).unwrap();
        assert_eq!(spec.bins().len(), 1);
        assert_eq!(spec.bins()[0], Complex32::new(2.5, 0.0));
    }

    #[test]
    fn linearity_within_f32_tolerance() {
        let rt = runtime();
        let mut rng = SplitMix64::new(5);
        let n = 256;
        let x = rng.fill_uniform_f32(n, -1.0, 1.0);
        let y = rng.fill_uniform_f32(n, -1.0, 1.0);
        let (a, b) = (1.5f32, -0.75f32);
        let combined: Vec<f32> = x.iter().zip(&y).map(|(&xi, &yi)| a * xi + b * yi).collect();
        let fx = fft_single(&rt, 0, &x).unwrap();
        let fy = fft_single(&rt, 0, &y).unwrap();
        let fc = fft_single(&rt, 0, &combined).unwrap();
        for (k, bin) in fc.bins().iter().enumerate() {
            let expect = fx.bins()[k] * a + fy.bins()[k] * b;
            assert!((bin - expect).norm() < 1e-3, "bin {k}");
        }
    }

    #[test]
    fn parseval_holds_at_desk_scale() {
        let rt = runtime();
        let mut rng = SplitMix64::new(21);
        for n in [64usize, 1024, 4096] {
            let samples = rng.fill_uniform_f32(n, -1.0, 1.0);
            let spec = fft_single(&rt, 0, &samples).unwrap();
            let time_energy: f64 = samples.iter().map(|&x| (x as f64) * (x as f64)).sum();
            let bins = spec.bins();
            let mut freq_energy = bins[0].norm_sqr() as f64 + bins[n / 2].norm_sqr() as f64;
            for bin in &bins[1..n / 2] {
                freq_energy += 2.0 * bin.norm_sqr() as f64;
            }
            freq_energy /= n as f64;
            let rel = (time_energy - freq_energy).abs() / time_energy;
            assert!(rel < 1e-3, "n={n}: rel={rel}");
        }
    }

    #[test]
    fn chunked_on_one_device_equals_single() {
        let rt = runtime();
        let signal = generate_signal(SignalKind::Sawtooth, 1.0, 1024.0, 1.0).unwrap();
        let single = fft_single(&rt, 0, &signal.samples).unwrap();
        let chunked = fft_chunked(&rt, &signal.samples, 1).unwrap();
        assert_eq!(chunked.num_chunks(), 1);
        assert_eq!(single.bins(), chunked.bins());
    }

    #[test]
    fn constant_chunks_transform_independently() {
        let rt = runtime();
        let spec = fft_chunked(&rt, &[1.0f32; 8], 2).unwrap();
        assert_eq!(spec.num_chunks(), 2);
        for k in 0..2 {
            let chunk = spec.chunk(k);
            assert_eq!(chunk.len(), 3);
            assert!((chunk[0].re - 4.0).abs() < 1e-6);
            assert!(chunk[1].norm() < 1e-6);
            assert!(chunk[2].norm() < 1e-6);
        }
    }

    #[test]
    fn each_chunk_matches_single_fft_of_that_chunk() {
        let rt = runtime();
        let mut rng = SplitMix64::new(33);
        let samples = rng.fill_uniform_f32(1024, -1.0, 1.0);
        let chunked = fft_chunked(&rt, &samples, 2).unwrap();
        for k in 0..2 {
            let sub = &samples[k * 512..(k + 1) * 512];
            let single = fft_single(&rt, 0, sub).unwrap();
            let diff = max_abs_diff(chunked.chunk(k), single.bins());
            assert!(diff <= 1e-4, "chunk {k}: {diff}");
        }
    }

    #[test]
    fn chunked_rejects_bad_lengths() {
        let rt = runtime();
        // Not divisible by the device count.
        assert!(matches!(
            fft_chunked(&rt, &[0.0; 10], 3),
            Err(GigaError::Size(_))
        ));
        // Chunks not a power of two.
        assert!(matches!(
            fft_chunked(&rt, &[0.0; 12], 2),
            Err(GigaError::Size(_))
        ));
    }

    #[test]
    fn spectrum_file_format() {
        let spec = ComplexSpectrum::new(vec![Complex32::new(4.0, 0.0)], SpectrumLayout::Full)
            .unwrap();
        let mut out = Vec::new();
        write_spectrum_to(&mut out, &spec).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "4.000000 0.000000\n");

        let empty = ComplexSpectrum::new(Vec::new(), SpectrumLayout::Full).unwrap();
        let mut out = Vec::new();
        write_spectrum_to(&mut out, &empty).unwrap();
        assert!(out.is_empty());

        let two = ComplexSpectrum::new(
            vec![Complex32::new(1.0, 2.0); 6],
            SpectrumLayout::Chunked { num_chunks: 2 },
        )
        .unwrap();
        let mut out = Vec::new();
        write_spectrum_to(&mut out, &two).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with('#')).count(), 2);
    }

    #[test]
    fn no_device_memory_leaks() {
        let rt = runtime();
        let signal = generate_signal(SignalKind::Chirp, 1.0, 1024.0, 1.0).unwrap();
        fft_single(&rt, 0, &signal.samples).unwrap();
        fft_chunked(&rt, &signal.samples, 2).unwrap();
        for d in 0..rt.device_count() {
            assert_eq!(rt.allocated_bytes(d).unwrap(), 0);
        }
    }
}
