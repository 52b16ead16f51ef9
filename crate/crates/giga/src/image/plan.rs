//! Row-split planning for the image operations.
//!
//! Output rows are partitioned across devices with any remainder handed to the
//! first devices (device 0 takes the odd row). Each device's input range is
//! exactly the source rows its output rows read: identical for grayscale, the
//! floor-mapped range for upsampling (a one-row overlap can appear at the
//! seam), and one halo row on each side for the 3×3 sharpening stencil so the
//! split result is bit-identical to the unsplit one.

use std::ops::Range;

use crate::split::split_front_heavy;

/// One device's share of an image operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceSlice {
    pub device_id: usize,
    /// Rows of the output image this device produces.
    pub out_rows: Range<usize>,
    /// Rows of the input image this device needs (halo/overlap included).
    pub in_rows: Range<usize>,
}

impl DeviceSlice {
    pub fn is_empty(&self) -> bool {
        self.out_rows.is_empty()
    }
}

/// Full split plan: output ranges partition the output height, input ranges
/// cover every source row any output pixel reads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub slices: Vec<DeviceSlice>,
}

impl SplitPlan {
    pub fn active_slices(&self) -> impl Iterator<Item = &DeviceSlice> {
        self.slices.iter().filter(|s| !s.is_empty())
    }
}

/// Grayscale reads exactly the rows it writes.
pub fn grayscale_plan(height: usize, num_devices: usize) -> SplitPlan {
    let slices = split_front_heavy(height, num_devices)
        .into_iter()
        .enumerate()
        .map(|(device_id, rows)| DeviceSlice {
            device_id,
            out_rows: rows.clone(),
            in_rows: rows,
        })
        .collect();
    SplitPlan { slices }
}

/// Nearest-neighbor upsampling: output row `r` reads input row `r / scale`.
pub fn upsample_plan(height: usize, scale: usize, num_devices: usize) -> SplitPlan {
    debug_assert!(scale >= 1);
    let out_height = height * scale;
    let slices = split_front_heavy(out_height, num_devices)
        .into_iter()
        .enumerate()
        .map(|(device_id, out_rows)| {
            let in_rows = if out_rows.is_empty() {
                0..0
            } else {
                (out_rows.start / scale)..((out_rows.end - 1) / scale + 1)
            };
            DeviceSlice {
                device_id,
                out_rows,
                in_rows,
            }
        })
        .collect();
    SplitPlan { slices }
}

/// 3×3 sharpening: one halo row above and below each device's output rows,
/// clamped to the image.
pub fn sharpen_plan(height: usize, num_devices: usize) -> SplitPlan {
    let slices = split_front_heavy(height, num_devices)
        .into_iter()
        .enumerate()
        .map(|(device_id, out_rows)| {
            let in_rows = if out_rows.is_empty() {
                0..0
            } else {
                out_rows.start.saturating_sub(1)..(out_rows.end + 1).min(height)
            };
            DeviceSlice {
                device_id,
                out_rows,
                in_rows,
            }
        })
        .collect();
    SplitPlan { slices }
}

/// Device memory each device must allocate for `upsample_nn` on a
/// `width × height` RGB image at the given scale: input row slice plus output
/// row slice, 3 bytes per pixel. This is the closed form behind the
/// out-of-memory crossover between single- and multi-device sweeps.
pub fn upsample_device_bytes(
    width: usize,
    height: usize,
    scale: usize,
    num_devices: usize,
) -> Vec<u64> {
    upsample_plan(height, scale, num_devices)
        .slices
        .iter()
        .map(|s| {
            let input = 3 * width * s.in_rows.len();
            let output = 3 * width * scale * s.out_rows.len();
            (input + output) as u64
        })
        .collect()
}

/// Largest per-device allocation the upsample needs; feasible iff this fits
/// the device capacity.
pub fn upsample_peak_device_bytes(
    width: usize,
    height: usize,
    scale: usize,
    num_devices: usize,
) -> u64 {
    upsample_device_bytes(width, height, scale, num_devices)
        .into_iter()
        .max()
        .unwrap_or(0)
}
