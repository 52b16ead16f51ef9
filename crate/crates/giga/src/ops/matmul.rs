//! Split matrix multiplication.
//!
//! `C = A · B` with the rows of `C` partitioned contiguously across devices.
//! Each device receives its slice of `A`'s rows plus a full copy of `B`, runs
//! the 16×16 dot-product kernel over its sub-grid, and the host stitches the
//! row slices back together.

use crate::error::{GigaError, Result};
use crate::kernel::{self, IndexSpace2D};
use crate::runtime::{BufGuard, ElementKind, Runtime};
use crate::split::split_balanced;

/// Dense row-major f32 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixF32 {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl MatrixF32 {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        let expected = rows.checked_mul(cols).ok_or_else(|| {
            GigaError::Size(format!("matrix dimensions {rows}x{cols} overflow"))
        })?;
        if data.len() != expected {
            return Err(GigaError::Size(format!(
                "matrix data holds {} values, expected {rows}x{cols} = {expected}",
                data.len(),
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let data = (0..rows * cols)
            .map(|i| f(i / cols, i % cols))
            .collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.cols + col]
    }
}

/// Multiply `a · b`, splitting `a`'s rows across `num_devices` devices.
pub fn matmul(
    runtime: &Runtime,
    a: &MatrixF32,
    b: &MatrixF32,
    num_devices: usize,
) -> Result<MatrixF32> {
    super::check_device_request(runtime, num_devices)?;
    if a.cols != b.rows {
        return Err(GigaError::Size(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || k == 0 || n == 0 {
        return Err(GigaError::Size("matrix dimensions must be non-zero".into()));
    }

    let mut guard = BufGuard::new(runtime);
    let mut pending = Vec::new();
    for (device_id, range) in split_balanced(m, num_devices).into_iter().enumerate() {
        if range.is_empty() {
            continue;
        }
        let rows_d = range.len();
        let stream = runtime.create_stream(device_id)?;
        let ab = guard.alloc(device_id, (rows_d * k * 4) as u64, ElementKind::F32)?;
        runtime.h2d_f32(&ab, &a.data[range.start * k..range.end * k])?;
        let bb = guard.alloc(device_id, (k * n * 4) as u64, ElementKind::F32)?;
        runtime.h2d_f32(&bb, &b.data)?;
        let cb = guard.alloc(device_id, (rows_d * n * 4) as u64, ElementKind::F32)?;

        let space = IndexSpace2D::covering(n, rows_d)?;
        let (ah, bh, ch) = (ab.clone(), bb.clone(), cb.clone());
        runtime.launch(&stream, "matmul", &[&ab, &bb, &cb], move |ctx| {
            let av = ctx.f32(&ah)?;
            let av: &[f32] = &av;
            let bv = ctx.f32(&bh)?;
            let bv: &[f32] = &bv;
            let mut cv = ctx.f32_mut(&ch)?;
            let cv: &mut [f32] = &mut cv;
            kernel::dispatch(&space, |t, _| {
                let col = t.global_x();
                let row = t.global_y();
                if row < rows_d && col < n {
                    let mut acc = 0.0f32;
                    for i in 0..k {
                        acc += av[row * k + i] * bv[i * n + col];
                    }
                    cv[row * n + col] = acc;
                }
            })
        })?;
        pending.push((stream, cb, range));
    }

    let mut c = MatrixF32::zeros(m, n);
    for (stream, cb, range) in &pending {
        runtime.synchronize_stream(stream)?;
        let slice = runtime.d2h_f32(cb)?;
        c.data[range.start * n..range.end * n].copy_from_slice(&slice);
    }
    Ok(c)
}
