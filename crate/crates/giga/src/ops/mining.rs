//! Simulated proof-of-work scan.
//!
//! Each nonce in the job's range is appended to the block data as decimal
//! ASCII, hashed with 64-bit FNV-1a, and compared against the target as a
//! strict upper bound. The range is split contiguously across devices; every
//! device fills a results buffer with one flag per nonce, and the host scans
//! the buffers in device order so the returned hit is the smallest valid
//! nonce regardless of how many devices participated.

use crate::error::{GigaError, Result};
use crate::kernel::{self, IndexSpace2D};
use crate::runtime::{BufGuard, ElementKind, Runtime};
use crate::split::split_balanced_u64;

/// One mining work order.
#[derive(Debug, Clone)]
pub struct MiningJob {
    pub block_data: Vec<u8>,
    /// A candidate is valid iff `fnv1a64(data ++ nonce) < target`.
    pub target: u64,
    pub nonce_start: u64,
    pub nonce_count: u64,
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// 64-bit FNV-1a over a byte slice.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

fn fnv1a64_step(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Hash of `data ++ decimal-ascii(nonce)` without building the candidate.
pub fn candidate_hash(data: &[u8], nonce: u64) -> u64 {
    let mut digits = [0u8; 20];
    let mut i = digits.len();
    let mut n = nonce;
    loop {
        i -= 1;
        digits[i] = b'0' + (n % 10) as u8;
        n /= 10;
        if n == 0 {
            break;
        }
    }
    fnv1a64_step(fnv1a64_step(FNV_OFFSET, data), &digits[i..])
}

/// Scan the job's nonce range across `num_devices` devices and return the
/// smallest valid nonce, if any.
pub fn mine_simulated(
    runtime: &Runtime,
    job: &MiningJob,
    num_devices: usize,
) -> Result<Option<u64>> {
    super::check_device_request(runtime, num_devices)?;
    if job.nonce_count == 0 {
        return Err(GigaError::Config("nonce_count must be at least 1".into()));
    }

    let mut guard = BufGuard::new(runtime);
    let mut pending = Vec::new();
    let ranges = split_balanced_u64(job.nonce_start, job.nonce_count, num_devices as u64);
    for (device_id, range) in ranges.into_iter().enumerate() {
        if range.is_empty() {
            continue;
        }
        let count = (range.end - range.start) as usize;
        let stream = runtime.create_stream(device_id)?;
        let db = guard.alloc(
            device_id,
            job.block_data.len().max(1) as u64,
            ElementKind::U8,
        )?;
        if !job.block_data.is_empty() {
            runtime.memcpy_h2d(&db, &job.block_data)?;
        }
        let rb = guard.alloc(device_id, count as u64, ElementKind::U8)?;

        let space = IndexSpace2D::covering_linear(count)?;
        let (dh, rh) = (db.clone(), rb.clone());
        let data_len = job.block_data.len();
        let (lo, target) = (range.start, job.target);
        runtime.launch(&stream, "mine", &[&db, &rb], move |ctx| {
            let data = ctx.u8(&dh)?;
            let data: &[u8] = &data[..data_len];
            let mut results = ctx.u8_mut(&rh)?;
            let results: &mut [u8] = &mut results;
            kernel::dispatch(&space, |t, _| {
                let idx = t.global_linear();
                if idx < count {
                    let nonce = lo + idx as u64;
                    results[idx] = u8::from(candidate_hash(data, nonce) < target);
                }
            })
        })?;
        pending.push((stream, rb, range.start));
    }

    for (stream, _, _) in &pending {
        runtime.synchronize_stream(stream)?;
    }
    // Devices are scanned in order, so the first flag is the smallest nonce.
    for (_, rb, lo) in &pending {
        let flags = runtime.memcpy_d2h(rb)?;
        if let Some(i) = flags.iter().position(|&f| f == 1) {
            return Ok(Some(lo + i as u64));
        }
    }
    Ok(None)
}
