//! Vector reductions: dot product and L2 norm.
//!
//! The input is split into one contiguous chunk per device. On each device a
//! fixed grid of 256-thread blocks covers the chunk with a grid-stride loop:
//! every thread folds its strided elements into a running f32 sum, parks the
//! sum in its shared-cache slot, and the block collapses the 256 partials with
//! the barrier-separated halving reduction. Thread 0 of each block writes the
//! block partial to a results buffer; the host accumulates block partials and
//! device subtotals in f64.

use crate::error::{GigaError, Result};
use crate::kernel::{self, IndexSpace2D};
use crate::runtime::{BufGuard, Runtime};
use crate::split::split_balanced;
use crate::sync_threads;

/// Cap on blocks per device; the grid-stride loop covers anything larger.
const MAX_BLOCKS: usize = 32;

fn partial_sums_kernel_name(squared: bool) -> &'static str {
    if squared {
        "l2_partial"
    } else {
        "dot_partial"
    }
}

/// Per-device partial-product reduction shared by `dot` and `l2_norm`.
/// With `squared` set, `y` is ignored and each element is squared instead,
/// using a single device buffer.
fn reduce_products(
    runtime: &Runtime,
    x: &[f32],
    y: &[f32],
    num_devices: usize,
    squared: bool,
) -> Result<f64> {
    super::check_device_request(runtime, num_devices)?;
    if x.len() != y.len() {
        return Err(GigaError::Size(format!(
            "vector lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(GigaError::Size("vectors must have at least one element".into()));
    }

    let mut guard = BufGuard::new(runtime);
    let mut pending = Vec::new();
    for (device_id, range) in split_balanced(x.len(), num_devices).into_iter().enumerate() {
        if range.is_empty() {
            continue;
        }
        let m = range.len();
        let stream = runtime.create_stream(device_id)?;
        let xb = guard.alloc(device_id, (m * 4) as u64, crate::runtime::ElementKind::F32)?;
        runtime.h2d_f32(&xb, &x[range.clone()])?;
        let yb = if squared {
            xb.clone()
        } else {
            let yb = guard.alloc(device_id, (m * 4) as u64, crate::runtime::ElementKind::F32)?;
            runtime.h2d_f32(&yb, &y[range])?;
            yb
        };

        let blocks = m.div_ceil(256).clamp(1, MAX_BLOCKS);
        let pb = guard.alloc(device_id, (blocks * 4) as u64, crate::runtime::ElementKind::F32)?;

        let space = IndexSpace2D::new(blocks, 1, 16, 16)?;
        let total_threads = space.total_threads();
        let (xh, yh, ph) = (xb.clone(), yb.clone(), pb.clone());
        runtime.launch(
            &stream,
            partial_sums_kernel_name(squared),
            &[&xb, &yb, &pb],
            move |ctx| {
                let xv = ctx.f32(&xh)?;
                let xv: &[f32] = &xv;
                let yv = ctx.f32(&yh)?;
                let yv: &[f32] = &yv;
                let mut pv = ctx.f32_mut(&ph)?;
                let pv: &mut [f32] = &mut pv;
                kernel::dispatch(&space, |t, block| {
                    let tid = t.linear_in_block();
                    let mut acc = 0.0f32;
                    let mut i = t.global_linear();
                    while i < m {
                        acc += xv[i] * yv[i];
                        i += total_threads;
                    }
                    block.cache_set(tid, acc);
                    sync_threads!(block);
                    let mut stride = 128;
                    while stride >= 1 {
                        if tid < stride {
                            let v = block.cache_get(tid) + block.cache_get(tid + stride);
                            block.cache_set(tid, v);
                        }
                        sync_threads!(block);
                        stride /= 2;
                    }
                    if tid == 0 {
                        pv[t.block_linear()] = block.cache_get(0);
                    }
                })
            },
        )?;
        pending.push((stream, pb));
    }

    let mut total = 0.0f64;
    for (stream, pb) in &pending {
        runtime.synchronize_stream(stream)?;
        let partials = runtime.d2h_f32(pb)?;
        let subtotal: f64 = partials.iter().map(|&p| p as f64).sum();
        total += subtotal;
    }
    Ok(total)
}

/// Dot product of `x` and `y`, split across `num_devices` devices.
pub fn dot(runtime: &Runtime, x: &[f32], y: &[f32], num_devices: usize) -> Result<f64> {
    reduce_products(runtime, x, y, num_devices, false)
}

/// L2 norm of `x`: the square root is applied on the host exactly once, after
/// the per-device subtotals are combined.
pub fn l2_norm(runtime: &Runtime, x: &[f32], num_devices: usize) -> Result<f64> {
    Ok(reduce_products(runtime, x, x, num_devices, true)?.sqrt())
}
