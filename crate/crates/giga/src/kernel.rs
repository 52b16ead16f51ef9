//! The grid/block/thread dispatch model.
//!
//! Work is described by a 2-D grid of blocks, each block a 16×16 group of 256
//! threads by default. A kernel body runs once per (block, thread) coordinate
//! and guards itself against coordinates past the edge of the data. Threads of
//! one block share a 256-slot cache and may synchronize at barriers; blocks are
//! independent of one another.
//!
//! Execution is deterministic: blocks run in row-major order and, within each
//! barrier interval, threads run in row-major order. Cache reads observe the
//! state the cache had when the interval started; writes become visible to
//! other threads at the next barrier (a thread always sees its own writes).
//! Kernels that use barriers must confine writes to captured host-visible
//! state to the final interval, after the last barrier — the scheduler replays
//! earlier intervals of a thread to resume it, and only cache effects are
//! suppressed during replay.
//!
//! A barrier reached by a strict subset of a block's threads would deadlock on
//! real hardware; here it is detected and reported as a typed error.

use crate::error::{GigaError, Result};

/// Default block edge. 16×16 gives 256 threads per block.
pub const DEFAULT_BLOCK_W: usize = 16;
pub const DEFAULT_BLOCK_H: usize = 16;

/// Slots in the per-block shared cache, one per thread of a default block.
pub const BLOCK_CACHE_SLOTS: usize = 256;

/// Ceil-division grid size so `grid × block` covers a `width × height` domain.
pub fn grid_cover(width: usize, height: usize, block_w: usize, block_h: usize) -> (usize, usize) {
    debug_assert!(width >= 1 && height >= 1 && block_w >= 1 && block_h >= 1);
    (width.div_ceil(block_w), height.div_ceil(block_h))
}

/// A 2-D dispatch shape: grid dimensions in blocks, block dimensions in threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexSpace2D {
    pub grid_w: usize,
    pub grid_h: usize,
    pub block_w: usize,
    pub block_h: usize,
}

impl IndexSpace2D {
    pub fn new(grid_w: usize, grid_h: usize, block_w: usize, block_h: usize) -> Result<Self> {
        if grid_w == 0 || grid_h == 0 {
            return Err(GigaError::Config(format!(
                "grid dimensions must be at least 1x1, got {grid_w}x{grid_h}"
            )));
        }
        if block_w == 0 || block_h == 0 {
            return Err(GigaError::Config(format!(
                "block dimensions must be at least 1x1, got {block_w}x{block_h}"
            )));
        }
        Ok(Self {
            grid_w,
            grid_h,
            block_w,
            block_h,
        })
    }

    /// Default 16×16 blocks covering a `width × height` element domain.
    pub fn covering(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(GigaError::Config(format!(
                "dispatch domain must be non-empty, got {width}x{height}"
            )));
        }
        let (gw, gh) = grid_cover(width, height, DEFAULT_BLOCK_W, DEFAULT_BLOCK_H);
        Self::new(gw, gh, DEFAULT_BLOCK_W, DEFAULT_BLOCK_H)
    }

    /// 256×1 blocks covering a 1-D domain of `len` elements.
    pub fn covering_linear(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(GigaError::Config(
                "dispatch domain must be non-empty".into(),
            ));
        }
        let (gw, gh) = grid_cover(len, 1, BLOCK_CACHE_SLOTS, 1);
        Self::new(gw, gh, BLOCK_CACHE_SLOTS, 1)
    }

    pub fn block_threads(&self) -> usize {
        self.block_w * self.block_h
    }

    pub fn block_count(&self) -> usize {
        self.grid_w * self.grid_h
    }

    pub fn total_threads(&self) -> usize {
        self.block_count() * self.block_threads()
    }
}

/// Identity of one thread within a dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThreadCoord {
    pub block_x: usize,
    pub block_y: usize,
    pub thread_x: usize,
    pub thread_y: usize,
    pub block_w: usize,
    pub block_h: usize,
    pub grid_w: usize,
    pub grid_h: usize,
}

impl ThreadCoord {
    /// Column in the global element domain.
    pub fn global_x(&self) -> usize {
        self.block_x * self.block_w + self.thread_x
    }

    /// Row in the global element domain.
    pub fn global_y(&self) -> usize {
        self.block_y * self.block_h + self.thread_y
    }

    /// Row-major thread index within the block, `0..block_threads`.
    pub fn linear_in_block(&self) -> usize {
        self.thread_y * self.block_w + self.thread_x
    }

    /// Row-major block index within the grid.
    pub fn block_linear(&self) -> usize {
        self.block_y * self.grid_w + self.block_x
    }

    /// Row-major global thread index, for 1-D grid-stride loops.
    pub fn global_linear(&self) -> usize {
        self.block_linear() * (self.block_w * self.block_h) + self.linear_in_block()
    }
}

/// The 256-slot f32 cache shared by the threads of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSharedCache {
    slots: [f32; BLOCK_CACHE_SLOTS],
}

impl Default for BlockSharedCache {
    fn default() -> Self {
        Self::new()
    }
}

impl BlockSharedCache {
    pub fn new() -> Self {
        Self {
            slots: [0.0; BLOCK_CACHE_SLOTS],
        }
    }

    pub fn get(&self, slot: usize) -> f32 {
        assert!(slot < BLOCK_CACHE_SLOTS, "cache slot {slot} out of range");
        self.slots[slot]
    }

    pub fn set(&mut self, slot: usize, value: f32) {
        assert!(slot < BLOCK_CACHE_SLOTS, "cache slot {slot} out of range");
        self.slots[slot] = value;
    }

    pub fn slots(&self) -> &[f32] {
        &self.slots
    }

    fn reset(&mut self) {
        self.slots = [0.0; BLOCK_CACHE_SLOTS];
    }

    /// Pairwise halving reduction over slots `0..active_count`.
    ///
    /// The stride starts at half the active count and halves each step, with
    /// the (conceptual) barrier between steps; the running sums collapse into
    /// slot 0, which is also returned. Counts that are not a power of two are
    /// zero-padded up to the next one, so the result is the plain sum of the
    /// active slots.
    pub fn reduce_sum(&mut self, active_count: usize) -> f32 {
        assert!(
            active_count <= BLOCK_CACHE_SLOTS,
            "active count {active_count} exceeds cache size"
        );
        if active_count == 0 {
            return 0.0;
        }
        let padded = active_count.next_power_of_two();
        for slot in active_count..padded {
            self.slots[slot] = 0.0;
        }
        let mut stride = padded / 2;
        while stride >= 1 {
            for i in 0..stride {
                self.slots[i] += self.slots[i + stride];
            }
            stride /= 2;
        }
        self.slots[0]
    }
}

/// Outcome of a barrier call, consumed by [`sync_threads!`](crate::sync_threads).
#[must_use]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierControl {
    Continue,
    Yield,
}

impl BarrierControl {
    pub fn is_yield(self) -> bool {
        matches!(self, BarrierControl::Yield)
    }
}

/// Block barrier. Expands to a `return` that yields the current thread until
/// every thread of the block has reached the same barrier.
#[macro_export]
macro_rules! sync_threads {
    ($ctx:expr) => {
        if $ctx.barrier().is_yield() {
            return;
        }
    };
}

/// Per-block execution context handed to kernel bodies.
///
/// Provides shared-cache access and the barrier. One instance is reused across
/// the whole dispatch; the scheduler resets it per block and per thread.
pub struct BlockCtx {
    round: usize,
    thread_phase: usize,
    yielded: bool,
    cache_touched: bool,
    front: BlockSharedCache,
    history: Vec<BlockSharedCache>,
    pending: Vec<(usize, f32)>,
}

impl BlockCtx {
    fn new() -> Self {
        Self {
            round: 0,
            thread_phase: 0,
            yielded: false,
            cache_touched: false,
            front: BlockSharedCache::new(),
            history: Vec::new(),
            pending: Vec::new(),
        }
    }

    fn reset_block(&mut self) {
        self.round = 0;
        self.history.clear();
        if self.cache_touched {
            self.front.reset();
            self.cache_touched = false;
        }
    }

    fn begin_thread(&mut self) {
        self.thread_phase = 0;
        self.yielded = false;
        self.pending.clear();
    }

    fn advance_round(&mut self) {
        self.round += 1;
        // history[p] holds the cache as of the start of barrier interval p.
        while self.history.len() < self.round {
            self.history.push(BlockSharedCache::new());
        }
        self.history.push(self.front.clone());
    }

    fn check_not_past_yield(&self) {
        assert!(
            self.thread_phase <= self.round,
            "kernel continued past an unheeded barrier yield; \
             barriers must go through sync_threads! (or honor BarrierControl::Yield)"
        );
    }

    /// Read a shared-cache slot as of the start of the current barrier interval.
    /// A thread's own writes from this interval are visible to it.
    pub fn cache_get(&self, slot: usize) -> f32 {
        assert!(slot < BLOCK_CACHE_SLOTS, "cache slot {slot} out of range");
        self.check_not_past_yield();
        for &(s, v) in self.pending.iter().rev() {
            if s == slot {
                return v;
            }
        }
        match self.history.get(self.thread_phase) {
            Some(snapshot) => snapshot.get(slot),
            // Only reachable in interval 0, before any snapshot exists.
            None => 0.0,
        }
    }

    /// Write a shared-cache slot. Visible to other threads at the next barrier.
    pub fn cache_set(&mut self, slot: usize, value: f32) {
        assert!(slot < BLOCK_CACHE_SLOTS, "cache slot {slot} out of range");
        self.check_not_past_yield();
        self.cache_touched = true;
        if self.thread_phase == self.round {
            self.front.set(slot, value);
        }
        self.pending.push((slot, value));
    }

    /// Raw barrier; prefer [`sync_threads!`](crate::sync_threads) which handles the yield.
    pub fn barrier(&mut self) -> BarrierControl {
        self.thread_phase += 1;
        self.pending.clear();
        if self.thread_phase > self.round {
            self.yielded = true;
            BarrierControl::Yield
        } else {
            BarrierControl::Continue
        }
    }
}

/// Run `body` once per (block, thread) coordinate of `space`.
///
/// Blocks execute one after another; each starts with a zeroed shared cache.
/// Returns a [`GigaError::BarrierDivergence`] if, in any barrier interval,
/// some threads of a block reach a barrier while others run to completion.
pub fn dispatch<F>(space: &IndexSpace2D, mut body: F) -> Result<()>
where
    F: FnMut(ThreadCoord, &mut BlockCtx),
{
    let threads = space.block_threads();
    let mut done = vec![false; threads];
    let mut ctx = BlockCtx::new();

    for block_y in 0..space.grid_h {
        for block_x in 0..space.grid_w {
            ctx.reset_block();
            done.fill(false);
            let mut finished = 0usize;
            loop {
                let mut hit_barrier = 0usize;
                for thread_y in 0..space.block_h {
                    for thread_x in 0..space.block_w {
                        let t = thread_y * space.block_w + thread_x;
                        if done[t] {
                            continue;
                        }
                        let coord = ThreadCoord {
                            block_x,
                            block_y,
                            thread_x,
                            thread_y,
                            block_w: space.block_w,
                            block_h: space.block_h,
                            grid_w: space.grid_w,
                            grid_h: space.grid_h,
                        };
                        ctx.begin_thread();
                        body(coord, &mut ctx);
                        if ctx.yielded {
                            hit_barrier += 1;
                        } else {
                            done[t] = true;
                            finished += 1;
                        }
                    }
                }
                if hit_barrier == 0 {
                    break;
                }
                if finished > 0 {
                    return Err(GigaError::BarrierDivergence { block_x, block_y });
                }
                ctx.advance_round();
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn grid_cover_examples() {
        assert_eq!(grid_cover(1920, 1080, 16, 16), (120, 68));
        assert_eq!(grid_cover(16, 16, 16, 16), (1, 1));
        assert_eq!(grid_cover(17, 1, 16, 16), (2, 1));
    }

    #[test]
    fn covering_33x17_domain() {
        let space = IndexSpace2D::covering(33, 17).unwrap();
        assert_eq!((space.grid_w, space.grid_h), (3, 2));
        assert_eq!(space.block_count(), 6);
        let mut invocations = 0usize;
        dispatch(&space, |_, _| invocations += 1).unwrap();
        assert_eq!(invocations, 1536);
    }

    #[test]
    fn covering_exact_single_block() {
        let space = IndexSpace2D::covering(16, 16).unwrap();
        assert_eq!(space.block_count(), 1);
    }

    #[test]
    fn empty_domain_is_a_configuration_error() {
        assert!(matches!(
            IndexSpace2D::covering(0, 10),
            Err(GigaError::Config(_))
        ));
        assert!(matches!(
            IndexSpace2D::covering_linear(0),
            Err(GigaError::Config(_))
        ));
    }

    #[test]
    fn coverage_visits_every_in_bounds_coordinate_exactly_once() {
        for (w, h) in [(33, 17), (1, 1), (16, 16), (40, 3)] {
            let space = IndexSpace2D::covering(w, h).unwrap();
            let mut seen = HashSet::new();
            dispatch(&space, |t, _| {
                let (x, y) = (t.global_x(), t.global_y());
                if x < w && y < h {
                    assert!(seen.insert((x, y)), "duplicate visit at ({x}, {y})");
                }
            })
            .unwrap();
            assert_eq!(seen.len(), w * h);
        }
    }

    #[test]
    fn guarded_threads_never_write() {
        let (w, h) = (20, 5);
        let space = IndexSpace2D::covering(w, h).unwrap();
        // Canary buffer sized for the full thread domain; only the w*h prefix
        // region may be written by guarded threads.
        let padded_w = space.grid_w * space.block_w;
        let padded_h = space.grid_h * space.block_h;
        let mut canary = vec![0u8; padded_w * padded_h];
        dispatch(&space, |t, _| {
            let (x, y) = (t.global_x(), t.global_y());
            if x < w && y < h {
                canary[y * padded_w + x] = 1;
            }
        })
        .unwrap();
        for y in 0..padded_h {
            for x in 0..padded_w {
                let expect = u8::from(x < w && y < h);
                assert_eq!(canary[y * padded_w + x], expect, "at ({x}, {y})");
            }
        }
    }

    #[test]
    fn reduce_sum_of_ones_is_256() {
        let mut cache = BlockSharedCache::new();
        for i in 0..256 {
            cache.set(i, 1.0);
        }
        assert_eq!(cache.reduce_sum(256), 256.0);
    }

    #[test]
    fn reduce_sum_of_zeros_is_zero() {
        let mut cache = BlockSharedCache::new();
        assert_eq!(cache.reduce_sum(256), 0.0);
    }

    #[test]
    fn reduce_sum_matches_sequential_sum_for_exact_inputs() {
        let mut cache = BlockSharedCache::new();
        for i in 0..8 {
            cache.set(i, (i + 1) as f32);
        }
        assert_eq!(cache.reduce_sum(8), 36.0);

        // Non-power-of-two active counts are zero-padded.
        let mut cache = BlockSharedCache::new();
        for i in 0..7 {
            cache.set(i, (i + 1) as f32);
        }
        assert_eq!(cache.reduce_sum(7), 28.0);

        // Small integers reduce exactly, halving order or not.
        let mut cache = BlockSharedCache::new();
        let mut expected = 0.0f32;
        for i in 0..256 {
            let v = ((i * 7 + 3) % 17) as f32;
            cache.set(i, v);
            expected += v;
        }
        assert_eq!(cache.reduce_sum(256), expected);
    }

    #[test]
    fn reduce_sum_is_deterministic() {
        let fill = |cache: &mut BlockSharedCache| {
            for i in 0..256 {
                cache.set(i, (i as f32).sin() * 10.0);
            }
        };
        let mut a = BlockSharedCache::new();
        let mut b = BlockSharedCache::new();
        fill(&mut a);
        fill(&mut b);
        assert_eq!(a.reduce_sum(256).to_bits(), b.reduce_sum(256).to_bits());
    }

    #[test]
    fn barrier_separated_reduction_in_thread_code() {
        // The in-kernel idiom: every thread writes its slot, synchronizes,
        // then halves the active range until slot 0 holds the block sum.
        let space = IndexSpace2D::new(3, 1, 16, 16).unwrap();
        let mut block_sums = vec![0.0f32; 3];
        let sums = &mut block_sums;
        dispatch(&space, |t, ctx| {
            let tid = t.linear_in_block();
            ctx.cache_set(tid, (t.global_linear() % 5) as f32);
            sync_threads!(ctx);
            let mut stride = 128;
            while stride >= 1 {
                if tid < stride {
                    let v = ctx.cache_get(tid) + ctx.cache_get(tid + stride);
                    ctx.cache_set(tid, v);
                }
                sync_threads!(ctx);
                stride /= 2;
            }
            if tid == 0 {
                sums[t.block_linear()] = ctx.cache_get(0);
            }
        })
        .unwrap();

        for (b, &sum) in block_sums.iter().enumerate() {
            let expected: f32 = (0..256).map(|i| ((b * 256 + i) % 5) as f32).sum();
            assert_eq!(sum, expected, "block {b}");
        }
    }

    #[test]
    fn in_thread_halving_matches_standalone_reduce() {
        let values: Vec<f32> = (0..256).map(|i| ((i * 31 + 5) % 13) as f32).collect();

        let mut standalone = BlockSharedCache::new();
        for (i, &v) in values.iter().enumerate() {
            standalone.set(i, v);
        }
        let expected = standalone.reduce_sum(256);

        let space = IndexSpace2D::new(1, 1, 16, 16).unwrap();
        let mut got = 0.0f32;
        let out = &mut got;
        let vals = &values;
        dispatch(&space, |t, ctx| {
            let tid = t.linear_in_block();
            ctx.cache_set(tid, vals[tid]);
            sync_threads!(ctx);
            let mut stride = 128;
            while stride >= 1 {
                if tid < stride {
                    let v = ctx.cache_get(tid) + ctx.cache_get(tid + stride);
                    ctx.cache_set(tid, v);
                }
                sync_threads!(ctx);
                stride /= 2;
            }
            if tid == 0 {
                *out = ctx.cache_get(0);
            }
        })
        .unwrap();

        assert_eq!(got.to_bits(), expected.to_bits());
    }

    #[test]
    fn barrier_divergence_is_detected() {
        let space = IndexSpace2D::new(1, 1, 16, 16).unwrap();
        let err = dispatch(&space, |t, ctx| {
            // Thread (0, 0) skips the barrier the rest of the block reaches.
            if t.linear_in_block() != 0 {
                sync_threads!(ctx);
            }
        })
        .unwrap_err();
        assert!(matches!(
            err,
            GigaError::BarrierDivergence {
                block_x: 0,
                block_y: 0
            }
        ));
    }

    #[test]
    fn divergence_in_a_later_block_names_that_block() {
        let space = IndexSpace2D::new(2, 1, 16, 16).unwrap();
        let err = dispatch(&space, |t, ctx| {
            if t.block_x == 1 && t.linear_in_block() == 3 {
                return;
            }
            sync_threads!(ctx);
        })
        .unwrap_err();
        assert!(matches!(
            err,
            GigaError::BarrierDivergence {
                block_x: 1,
                block_y: 0
            }
        ));
    }

    #[test]
    #[should_panic(expected = "unheeded barrier yield")]
    fn ignoring_a_barrier_yield_panics_on_next_cache_access() {
        let space = IndexSpace2D::new(1, 1, 2, 1).unwrap();
        let _ = dispatch(&space, |_, ctx| {
            let _ = ctx.barrier(); // yield ignored on purpose
            ctx.cache_set(0, 1.0);
        });
    }

    #[test]
    fn thread_sees_its_own_write_before_the_barrier() {
        let space = IndexSpace2D::new(1, 1, 16, 16).unwrap();
        dispatch(&space, |t, ctx| {
            let tid = t.linear_in_block();
            ctx.cache_set(tid, 41.0);
            assert_eq!(ctx.cache_get(tid), 41.0);
            // And not other threads' same-interval writes.
            if tid > 0 {
                assert_eq!(ctx.cache_get(tid - 1), 0.0);
            }
        })
        .unwrap();
    }
}
