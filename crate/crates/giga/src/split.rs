//! Contiguous work splitting across devices.
//!
//! Two conventions are used in the crate. Fundamental operations (matrix
//! rows, vector chunks, nonce ranges) use the balanced split whose remainder
//! lands on the last device. Image operations hand any extra rows to the
//! first devices, so device 0 takes the odd row.

use std::ops::Range;

/// Split `0..total` into `parts` contiguous ranges with boundaries at
/// `floor(d * total / parts)`. Sizes differ by at most one; the larger ones
/// sit at the tail.
pub fn split_balanced(total: usize, parts: usize) -> Vec<Range<usize>> {
    assert!(parts >= 1, "need at least one part");
    (0..parts)
        .map(|d| (d * total / parts)..((d + 1) * total / parts))
        .collect()
}

/// Split `0..total` into `parts` contiguous ranges where the first
/// `total % parts` ranges take the extra element.
pub fn split_front_heavy(total: usize, parts: usize) -> Vec<Range<usize>> {
    assert!(parts >= 1, "need at least one part");
    let base = total / parts;
    let extra = total % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for d in 0..parts {
        let len = base + usize::from(d < extra);
        out.push(start..start + len);
        start += len;
    }
    out
}

/// Balanced split over a u64 range, for nonce sweeps.
pub fn split_balanced_u64(start: u64, count: u64, parts: u64) -> Vec<Range<u64>> {
    assert!(parts >= 1);
    (0..parts)
        .map(|d| (start + d * count / parts)..(start + (d + 1) * count / parts))
        .collect()
}
