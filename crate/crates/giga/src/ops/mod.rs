//! Fundamental operations: signal generation, FFT, matrix multiplication,
//! vector reductions, and the simulated mining scan.
//!
//! Every operation is a blocking call: it enqueues work on per-device streams,
//! lets the devices run concurrently, synchronizes, and returns the assembled
//! result. All device scratch memory is released before returning, on success
//! and on error alike.

pub mod fft;
pub mod matmul;
pub mod mining;
pub mod signal;
pub mod vector;

pub use fft::{fft_chunked, fft_single, write_spectrum, Complex32, ComplexSpectrum, SpectrumLayout};
pub use matmul::{matmul, MatrixF32};
pub use mining::{fnv1a64, mine_simulated, MiningJob};
pub use signal::{generate_signal, Signal, SignalKind};
pub use vector::{dot, l2_norm};

use crate::error::{GigaError, Result};
use crate::runtime::Runtime;

/// Every split operation takes `num_devices` and uses devices `0..num_devices`.
pub(crate) fn check_device_request(runtime: &Runtime, num_devices: usize) -> Result<()> {
    if num_devices == 0 {
        return Err(GigaError::Config("num_devices must be at least 1".into()));
    }
    if num_devices > runtime.device_count() {
        return Err(GigaError::Config(format!(
            "operation requested {num_devices} devices but the runtime has {}",
            runtime.device_count()
        )));
    }
    Ok(())
}
