//! GigaAPI: a user-space multi-device compute API over a virtual accelerator
//! runtime.
//!
//! The crate simulates N accelerator devices — explicit memory with capacity
//! accounting, FIFO streams, timing events and an activity trace — and builds
//! a full operation suite on top of the classic alloc / copy-in / launch /
//! synchronize / copy-out / free workflow:
//!
//! - **Fundamental operations** ([`ops`]): real-to-complex FFT (single-device
//!   and chunked across devices), split matrix multiplication, dot product and
//!   L2 norm via block-level halving reductions, signal generation, and a
//!   simulated proof-of-work scan.
//! - **Image operations** ([`image`]): grayscale conversion, nearest-neighbor
//!   upsampling and Laplacian sharpening, split across devices by rows with
//!   halo handling that keeps the split results bit-identical to unsplit runs.
//! - **Facade** ([`api::GigaGpu`]): one handle that owns the runtime and
//!   exposes every operation.
//! - **Benchmarks** ([`mod@bench`]): deterministic sweep suites with in-run
//!   verification, CSV logs and a parallelism-evidence report, packaged for
//!   the `giga` command-line tool.
//!
//! Devices execute kernels truly in parallel (one executor thread each), which
//! is what the activity trace demonstrates; kernels on one stream run strictly
//! in order. Within a kernel, work is dispatched over a grid of 16×16 thread
//! blocks with bounds guards, a 256-slot per-block shared cache and barrier
//! synchronization — see [`kernel`].
//!
//! ```
//! use giga::{GigaConfig, GigaGpu};
//!
//! let gpu = GigaGpu::new(GigaConfig::default())?;
//! let norm = gpu.compute_l2_norm(&[3.0, 4.0])?;
//! assert_eq!(norm, 5.0);
//! # Ok::<(), giga::GigaError>(())
//! ```

pub mod api;
pub mod bench;
pub mod error;
pub mod image;
pub mod io;
pub mod kernel;
pub mod ops;
pub mod rng;
pub mod runtime;
pub mod split;

pub use api::{GigaConfig, GigaGpu};
pub use error::{GigaError, Result};
pub use runtime::{
    elapsed_ms, ActivityTrace, DeviceBuffer, DeviceSpec, ElementKind, Event, Runtime, Stream,
    TraceKind, TraceRecord,
};

#[cfg(doctest)]
pub mod book;
