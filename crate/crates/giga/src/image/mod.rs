//! The image pipeline: grayscale conversion, nearest-neighbor upsampling and
//! Laplacian sharpening, each split across devices by output rows.
//!
//! All three operations produce byte-identical results for any device count —
//! the split plans ship exactly the input rows each device's output depends
//! on, including the one-row halo the 3×3 sharpening stencil needs across the
//! seam.

pub mod plan;

pub use plan::{
    grayscale_plan, sharpen_plan, upsample_device_bytes, upsample_peak_device_bytes,
    upsample_plan, DeviceSlice, SplitPlan,
};

use crate::error::{GigaError, Result};
use crate::kernel::{self, IndexSpace2D};
use crate::runtime::{BufGuard, ElementKind, Runtime};

/// Interleaved 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRgb8 {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

fn checked_area(width: usize, height: usize, channels: usize) -> Result<usize> {
    width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(channels))
        .ok_or_else(|| GigaError::Size(format!("image dimensions {width}x{height} overflow")))
}

impl ImageRgb8 {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(GigaError::Size("image dimensions must be non-zero".into()));
        }
        let expected = checked_area(width, height, 3)?;
        if data.len() != expected {
            return Err(GigaError::Size(format!(
                "RGB image data holds {} bytes, expected 3*{width}*{height} = {expected}",
                data.len(),
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(3 * width * height);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::from_fn(width, height, |_, _| rgb)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    fn row_bytes(&self, rows: std::ops::Range<usize>) -> &[u8] {
        &self.data[3 * self.width * rows.start..3 * self.width * rows.end]
    }
}

/// Single-channel 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageGray8 {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ImageGray8 {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(GigaError::Size("image dimensions must be non-zero".into()));
        }
        let expected = checked_area(width, height, 1)?;
        if data.len() != expected {
            return Err(GigaError::Size(format!(
                "grayscale image data holds {} bytes, expected {width}*{height} = {expected}",
                data.len(),
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }
}

/// Weighted RGB-to-luma conversion: `round(0.299 R + 0.587 G + 0.114 B)`,
/// rounding half away from zero, clamped to `[0, 255]`.
pub fn grayscale(runtime: &Runtime, img: &ImageRgb8, num_devices: usize) -> Result<ImageGray8> {
    crate::ops::check_device_request(runtime, num_devices)?;
    let w = img.width;
    let plan = grayscale_plan(img.height, num_devices);

    let mut guard = BufGuard::new(runtime);
    let mut pending = Vec::new();
    for slice in plan.active_slices() {
        let rows = slice.out_rows.len();
        let stream = runtime.create_stream(slice.device_id)?;
        let ib = guard.alloc(slice.device_id, (3 * w * rows) as u64, ElementKind::U8)?;
        runtime.memcpy_h2d(&ib, img.row_bytes(slice.in_rows.clone()))?;
        let ob = guard.alloc(slice.device_id, (w * rows) as u64, ElementKind::U8)?;

        let space = IndexSpace2D::covering(w, rows)?;
        let (ih, oh) = (ib.clone(), ob.clone());
        runtime.launch(&stream, "grayscale", &[&ib, &ob], move |ctx| {
            let input = ctx.u8(&ih)?;
            let input: &[u8] = &input;
            let mut output = ctx.u8_mut(&oh)?;
            let output: &mut [u8] = &mut output;
            kernel::dispatch(&space, |t, _| {
                let (x, y) = (t.global_x(), t.global_y());
                if x < w && y < rows {
                    let i = 3 * (y * w + x);
                    let luma = 0.299f32 * input[i] as f32
                        + 0.587f32 * input[i + 1] as f32
                        + 0.114f32 * input[i + 2] as f32;
                    output[y * w + x] = luma.round().clamp(0.0, 255.0) as u8;
                }
            })
        })?;
        pending.push((stream, ob, slice.out_rows.clone()));
    }

    let mut data = vec![0u8; w * img.height];
    for (stream, ob, rows) in &pending {
        runtime.synchronize_stream(stream)?;
        let part = runtime.memcpy_d2h(ob)?;
        data[w * rows.start..w * rows.end].copy_from_slice(&part);
    }
    ImageGray8::new(w, img.height, data)
}

/// Nearest-neighbor upsampling by an integer scale factor: output pixel
/// `(x, y)` copies input pixel `(x / s, y / s)`, all three channels.
#[allow(clippy::manual_memcpy)] // channels copied one at a time, like the other kernels
pub fn upsample_nn(
    runtime: &Runtime,
    img: &ImageRgb8,
    scale: usize,
    num_devices: usize,
) -> Result<ImageRgb8> {
    crate::ops::check_device_request(runtime, num_devices)?;
    if scale == 0 {
        return Err(GigaError::Config("scale factor must be at least 1".into()));
    }
    let w = img.width;
    let w_out = w * scale;
    let plan = upsample_plan(img.height, scale, num_devices);

    let mut guard = BufGuard::new(runtime);
    let mut pending = Vec::new();
    for slice in plan.active_slices() {
        let out_rows = slice.out_rows.len();
        let in_start = slice.in_rows.start;
        let in_rows = slice.in_rows.len();
        let out_start = slice.out_rows.start;
        let stream = runtime.create_stream(slice.device_id)?;
        let ib = guard.alloc(slice.device_id, (3 * w * in_rows) as u64, ElementKind::U8)?;
        runtime.memcpy_h2d(&ib, img.row_bytes(slice.in_rows.clone()))?;
        let ob = guard.alloc(
            slice.device_id,
            (3 * w_out * out_rows) as u64,
            ElementKind::U8,
        )?;

        let space = IndexSpace2D::covering(w_out, out_rows)?;
        let (ih, oh) = (ib.clone(), ob.clone());
        runtime.launch(&stream, "upsample_nn", &[&ib, &ob], move |ctx| {
            let input = ctx.u8(&ih)?;
            let input: &[u8] = &input;
            let mut output = ctx.u8_mut(&oh)?;
            let output: &mut [u8] = &mut output;
            kernel::dispatch(&space, |t, _| {
                let (x, y) = (t.global_x(), t.global_y());
                if x < w_out && y < out_rows {
                    let src_x = x / scale;
                    let src_y = (out_start + y) / scale - in_start;
                    let src = 3 * (src_y * w + src_x);
                    let dst = 3 * (y * w_out + x);
                    for c in 0..3 {
                        output[dst + c] = input[src + c];
                    }
                }
            })
        })?;
        pending.push((stream, ob, slice.out_rows.clone()));
    }

    let mut data = vec![0u8; 3 * w_out * img.height * scale];
    for (stream, ob, rows) in &pending {
        runtime.synchronize_stream(stream)?;
        let part = runtime.memcpy_d2h(ob)?;
        data[3 * w_out * rows.start..3 * w_out * rows.end].copy_from_slice(&part);
    }
    ImageRgb8::new(w_out, img.height * scale, data)
}

/// Laplacian sharpening: each channel of each pixel is the 3×3 stencil
/// (center 8, neighbors −1) over its in-image neighbors, clamped to
/// `[0, 255]`. Out-of-bounds neighbors are skipped, not clamped or reflected.
pub fn sharpen(runtime: &Runtime, img: &ImageRgb8, num_devices: usize) -> Result<ImageRgb8> {
    crate::ops::check_device_request(runtime, num_devices)?;
    let (w, h) = (img.width, img.height);
    let plan = sharpen_plan(h, num_devices);

    let mut guard = BufGuard::new(runtime);
    let mut pending = Vec::new();
    for slice in plan.active_slices() {
        let out_rows = slice.out_rows.len();
        let out_start = slice.out_rows.start;
        let in_start = slice.in_rows.start;
        let in_rows = slice.in_rows.len();
        let stream = runtime.create_stream(slice.device_id)?;
        let ib = guard.alloc(slice.device_id, (3 * w * in_rows) as u64, ElementKind::U8)?;
        runtime.memcpy_h2d(&ib, img.row_bytes(slice.in_rows.clone()))?;
        let ob = guard.alloc(slice.device_id, (3 * w * out_rows) as u64, ElementKind::U8)?;

        let space = IndexSpace2D::covering(w, out_rows)?;
        let (ih, oh) = (ib.clone(), ob.clone());
        runtime.launch(&stream, "sharpen", &[&ib, &ob], move |ctx| {
            let input = ctx.u8(&ih)?;
            let input: &[u8] = &input;
            let mut output = ctx.u8_mut(&oh)?;
            let output: &mut [u8] = &mut output;
            kernel::dispatch(&space, |t, _| {
                let (x, y) = (t.global_x(), t.global_y());
                if x < w && y < out_rows {
                    let y_img = out_start + y;
                    // Channels run sequentially within the thread.
                    for c in 0..3 {
                        let mut sum = 0.0f32;
                        for dy in -1i64..=1 {
                            for dx in -1i64..=1 {
                                let ny = y_img as i64 + dy;
                                let nx = x as i64 + dx;
                                if ny < 0 || ny >= h as i64 || nx < 0 || nx >= w as i64 {
                                    continue;
                                }
                                let weight = if dy == 0 && dx == 0 { 8.0f32 } else { -1.0f32 };
                                let local = (ny as usize - in_start) * w + nx as usize;
                                sum += weight * input[3 * local + c] as f32;
                            }
                        }
                        output[3 * (y * w + x) + c] = sum.clamp(0.0, 255.0) as u8;
                    }
                }
            })
        })?;
        pending.push((stream, ob, slice.out_rows.clone()));
    }

    let mut data = vec![0u8; 3 * w * h];
    for (stream, ob, rows) in &pending {
        runtime.synchronize_stream(stream)?;
        let part = runtime.memcpy_d2h(ob)?;
        data[3 * w * rows.start..3 * w * rows.end].copy_from_slice(&part);
    }
    ImageRgb8::new(w, h, data)
}

/// Upsample, then sharpen the upscaled image.
pub fn upsample_then_sharpen(
    runtime: &Runtime,
    img: &ImageRgb8,
    scale: usize,
    num_devices: usize,
) -> Result<ImageRgb8> {
    let upscaled = upsample_nn(runtime, img, scale, num_devices)?;
    sharpen(runtime, &upscaled, num_devices)
}
