//! Activity trace: the record of everything the devices did, and the evidence
//! that work on different devices actually overlapped in wall time.

use std::fmt;
use std::str::FromStr;

/// What a trace record describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Alloc,
    Free,
    H2d,
    D2h,
    Kernel,
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TraceKind::Alloc => "alloc",
            TraceKind::Free => "free",
            TraceKind::H2d => "h2d",
            TraceKind::D2h => "d2h",
            TraceKind::Kernel => "kernel",
        };
        f.write_str(s)
    }
}

impl FromStr for TraceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alloc" => Ok(TraceKind::Alloc),
            "free" => Ok(TraceKind::Free),
            "h2d" => Ok(TraceKind::H2d),
            "d2h" => Ok(TraceKind::D2h),
            "kernel" => Ok(TraceKind::Kernel),
            other => Err(format!("unknown trace kind `{other}`")),
        }
    }
}

/// One completed action on a device. Times are nanoseconds since runtime
/// creation; `start_ns <= end_ns` always holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub device_id: usize,
    pub kind: TraceKind,
    pub start_ns: u64,
    pub end_ns: u64,
    /// Kernel name for kernel records, byte count for the rest.
    pub label: String,
}

/// Point-in-time copy of the runtime's activity records, in completion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActivityTrace {
    records: Vec<TraceRecord>,
}

impl ActivityTrace {
    pub fn new(records: Vec<TraceRecord>) -> Self {
        Self { records }
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Kernel records only, for a given device.
    pub fn kernel_records(&self, device_id: usize) -> Vec<&TraceRecord> {
        self.records
            .iter()
            .filter(|r| r.device_id == device_id && r.kind == TraceKind::Kernel)
            .collect()
    }

    /// Device ids that ran at least one kernel.
    pub fn devices_with_kernels(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .records
            .iter()
            .filter(|r| r.kind == TraceKind::Kernel)
            .map(|r| r.device_id)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Largest wall-clock overlap between kernel intervals on two *different*
    /// devices, in nanoseconds. `None` when no such pair overlaps.
    pub fn cross_device_kernel_overlap_ns(&self) -> Option<u64> {
        let kernels: Vec<&TraceRecord> = self
            .records
            .iter()
            .filter(|r| r.kind == TraceKind::Kernel)
            .collect();
        let mut best: Option<u64> = None;
        for (i, a) in kernels.iter().enumerate() {
            for b in &kernels[i + 1..] {
                if a.device_id == b.device_id {
                    continue;
                }
                let start = a.start_ns.max(b.start_ns);
                let end = a.end_ns.min(b.end_ns);
                if start < end {
                    let overlap = end - start;
                    best = Some(best.map_or(overlap, |b| b.max(overlap)));
                }
            }
        }
        best
    }
}
