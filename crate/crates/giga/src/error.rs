//! Error types shared by every module of the crate.

use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, GigaError>;

/// Every way an operation on the virtual runtime can fail.
#[derive(Debug)]
pub enum GigaError {
    /// Invalid configuration (device counts, dispatch domains, signal parameters).
    Config(String),
    /// A device allocation would exceed the device's memory capacity.
    OutOfDeviceMemory {
        device_id: usize,
        requested: u64,
        in_use: u64,
        capacity: u64,
    },
    /// A buffer handle that is unknown, already freed, or misused.
    InvalidHandle(String),
    /// A buffer was passed to a stream on a different device.
    DeviceAffinity {
        buffer_device: usize,
        stream_device: usize,
    },
    /// Mismatched lengths, dimensions, or unsupported sizes.
    Size(String),
    /// Event pair passed to `elapsed_ms` in the wrong order.
    EventOrdering(String),
    /// Event queried before the device stamped it.
    EventNotReady,
    /// A block barrier was reached by only a subset of the block's threads.
    BarrierDivergence { block_x: usize, block_y: usize },
    /// In-run verification of a benchmark suite failed.
    Verification(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
    /// Malformed file contents.
    Format { line: Option<usize>, message: String },
}

impl fmt::Display for GigaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GigaError::Config(msg) => write!(f, "configuration error: {msg}"),
            GigaError::OutOfDeviceMemory {
                device_id,
                requested,
                in_use,
                capacity,
            } => write!(
                f,
                "out of device memory on device {device_id}: \
                 requested {requested} bytes with {in_use}/{capacity} in use"
            ),
            GigaError::InvalidHandle(msg) => write!(f, "invalid buffer handle: {msg}"),
            GigaError::DeviceAffinity {
                buffer_device,
                stream_device,
            } => write!(
                f,
                "device affinity violation: buffer lives on device {buffer_device} \
                 but the stream targets device {stream_device}"
            ),
            GigaError::Size(msg) => write!(f, "size error: {msg}"),
            GigaError::EventOrdering(msg) => write!(f, "event ordering error: {msg}"),
            GigaError::EventNotReady => write!(f, "event has not completed yet"),
            GigaError::BarrierDivergence { block_x, block_y } => write!(
                f,
                "barrier divergence in block ({block_x}, {block_y}): \
                 a barrier was reached by only a subset of the block's threads"
            ),
            GigaError::Verification(msg) => write!(f, "verification failure: {msg}"),
            GigaError::Io(e) => write!(f, "I/O error: {e}"),
            GigaError::Format { line, message } => match line {
                Some(n) => write!(f, "format error at line {n}: {message}"),
                None => write!(f, "format error: {message}"),
            },
        }
    }
}

impl std::error::Error for GigaError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            GigaError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for GigaError {
    fn from(e: std::io::Error) -> Self {
        GigaError::Io(e)
    }
}

impl GigaError {
    /// True for the allocation-failure variant that capacity sweeps probe for.
    pub fn is_oom(&self) -> bool {
        matches!(self, GigaError::OutOfDeviceMemory { .. })
    }
}
