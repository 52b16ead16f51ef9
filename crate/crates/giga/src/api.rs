//! The user-facing facade: one `GigaGpu` handle owning the runtime and
//! exposing every operation.

use crate::error::{GigaError, Result};
use crate::image::{self, ImageGray8, ImageRgb8};
use crate::ops::{self, ComplexSpectrum, MatrixF32, MiningJob, Signal, SignalKind};
use crate::runtime::Runtime;

/// Construction parameters for a [`GigaGpu`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GigaConfig {
    /// How many virtual devices to create. Operations split across all of them.
    pub device_count: usize,
    /// Per-device memory capacity in bytes.
    pub device_memory: u64,
    /// Seed used by callers that fill benchmark inputs.
    pub rng_seed: u64,
}

impl Default for GigaConfig {
    fn default() -> Self {
        Self {
            device_count: 2,
            device_memory: 256 << 20,
            rng_seed: 42,
        }
    }
}

/// Handle to the whole API: owns the runtime, routes every operation through
/// it, and splits work across the configured device count. The handle may be
/// shared across threads; concurrent calls serialize only on per-device
/// stream order.
pub struct GigaGpu {
    runtime: Runtime,
    config: GigaConfig,
}

impl GigaGpu {
    pub fn new(config: GigaConfig) -> Result<Self> {
        if config.device_count == 0 {
            return Err(GigaError::Config(
                "device_count must be at least 1".into(),
            ));
        }
        let runtime = Runtime::with_uniform_devices(config.device_count, config.device_memory)?;
        Ok(Self { runtime, config })
    }

    pub fn config(&self) -> &GigaConfig {
        &self.config
    }

    pub fn runtime(&self) -> &Runtime {
        &self.runtime
    }

    pub fn device_count(&self) -> usize {
        self.config.device_count
    }

    pub fn generate_signal(
        &self,
        kind: SignalKind,
        frequency: f64,
        sample_rate: f64,
        duration: f64,
    ) -> Result<Signal> {
        ops::generate_signal(kind, frequency, sample_rate, duration)
    }

    /// Full-length real-to-complex FFT on device 0.
    pub fn perform_fft(&self, signal: &Signal) -> Result<ComplexSpectrum> {
        ops::fft_single(&self.runtime, 0, &signal.samples)
    }

    /// Chunked FFT: one contiguous chunk per device, transformed concurrently.
    pub fn perform_fft_chunked(&self, signal: &Signal) -> Result<ComplexSpectrum> {
        ops::fft_chunked(&self.runtime, &signal.samples, self.config.device_count)
    }

    pub fn perform_matrix_multiplication(
        &self,
        a: &MatrixF32,
        b: &MatrixF32,
    ) -> Result<MatrixF32> {
        ops::matmul(&self.runtime, a, b, self.config.device_count)
    }

    pub fn compute_dot_product(&self, x: &[f32], y: &[f32]) -> Result<f64> {
        ops::dot(&self.runtime, x, y, self.config.device_count)
    }

    pub fn compute_l2_norm(&self, x: &[f32]) -> Result<f64> {
        ops::l2_norm(&self.runtime, x, self.config.device_count)
    }

    pub fn mine(&self, job: &MiningJob) -> Result<Option<u64>> {
        ops::mine_simulated(&self.runtime, job, self.config.device_count)
    }

    pub fn convert_to_grayscale(&self, img: &ImageRgb8) -> Result<ImageGray8> {
        image::grayscale(&self.runtime, img, self.config.device_count)
    }

    pub fn upsample_image(&self, img: &ImageRgb8, scale: usize) -> Result<ImageRgb8> {
        image::upsample_nn(&self.runtime, img, scale, self.config.device_count)
    }

    pub fn sharpen_image(&self, img: &ImageRgb8) -> Result<ImageRgb8> {
        image::sharpen(&self.runtime, img, self.config.device_count)
    }

    pub fn upsample_then_sharpen(&self, img: &ImageRgb8, scale: usize) -> Result<ImageRgb8> {
        image::upsample_then_sharpen(&self.runtime, img, scale, self.config.device_count)
    }
}
