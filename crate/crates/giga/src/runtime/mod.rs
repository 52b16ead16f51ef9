//! The virtual multi-device runtime.
//!
//! Simulates N accelerator devices, each with a fixed memory capacity, a
//! capacity-accounted buffer store and one independent executor thread. Every
//! operation follows the explicit accelerator workflow: allocate device
//! buffers, copy host data in, launch kernels on a stream, synchronize, copy
//! results back, free.
//!
//! Kernels enqueued on the streams of one device run strictly one after
//! another, in enqueue order. Kernels on different devices run truly in
//! parallel on their own executor threads — that overlap is what the activity
//! trace captures. Transfers and allocations execute immediately on the caller
//! thread and serialize against running kernels through the device's storage
//! lock, so a copy never observes a half-written buffer; synchronize before
//! copying out if the data must reflect previously launched kernels.
//!
//! Errors raised inside an asynchronous kernel body poison the device and are
//! reported by the next synchronize call.

mod trace;

pub use trace::{ActivityTrace, TraceKind, TraceRecord};

use std::cell::{Ref, RefCell, RefMut};
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::Instant;

use num_complex::Complex32;

use crate::error::{GigaError, Result};

/// Description of one simulated device.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeviceSpec {
    /// Dense index, `0..device_count`.
    pub id: usize,
    /// Memory capacity in bytes. Allocations beyond it fail.
    pub memory_capacity: u64,
}

/// Element type stored in a device buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    U8,
    F32,
    C32,
}

impl ElementKind {
    pub fn size_bytes(self) -> u64 {
        match self {
            ElementKind::U8 => 1,
            ElementKind::F32 => 4,
            ElementKind::C32 => 8,
        }
    }
}

/// Handle to device-resident storage. The bytes are only reachable through
/// transfers and kernels on the owning device.
#[derive(Debug, Clone)]
pub struct DeviceBuffer {
    device_id: usize,
    id: u64,
    length_bytes: u64,
    kind: ElementKind,
}

impl DeviceBuffer {
    pub fn device_id(&self) -> usize {
        self.device_id
    }

    pub fn length_bytes(&self) -> u64 {
        self.length_bytes
    }

    pub fn element_kind(&self) -> ElementKind {
        self.kind
    }

    pub fn element_count(&self) -> usize {
        (self.length_bytes / self.kind.size_bytes()) as usize
    }
}

/// FIFO work queue bound to one device. Streams are cheap; operations create
/// one per call by default, but a stream may also be kept and reused.
#[derive(Debug, Clone)]
pub struct Stream {
    device_id: usize,
    #[allow(dead_code)]
    id: u64,
}

impl Stream {
    pub fn device_id(&self) -> usize {
        self.device_id
    }
}

/// Timing marker recorded on a stream. Stamped by the device executor when
/// all work enqueued before it has finished.
#[derive(Debug, Clone)]
pub struct Event {
    inner: Arc<EventInner>,
}

#[derive(Debug)]
struct EventInner {
    stamp_ns: Mutex<Option<u64>>,
    cv: Condvar,
}

impl Event {
    pub fn is_complete(&self) -> bool {
        self.inner.stamp_ns.lock().unwrap().is_some()
    }

    /// Nanoseconds since runtime creation, once stamped.
    pub fn timestamp_ns(&self) -> Option<u64> {
        *self.inner.stamp_ns.lock().unwrap()
    }

    /// Block until the device stamps this event.
    pub fn wait(&self) -> u64 {
        let mut guard = self.inner.stamp_ns.lock().unwrap();
        while guard.is_none() {
            guard = self.inner.cv.wait(guard).unwrap();
        }
        guard.unwrap()
    }
}

/// Milliseconds between two completed events recorded in order.
pub fn elapsed_ms(start: &Event, end: &Event) -> Result<f64> {
    let (s, e) = match (start.timestamp_ns(), end.timestamp_ns()) {
        (Some(s), Some(e)) => (s, e),
        _ => return Err(GigaError::EventNotReady),
    };
    if e < s {
        return Err(GigaError::EventOrdering(format!(
            "end event ({e} ns) precedes start event ({s} ns)"
        )));
    }
    Ok((e - s) as f64 / 1_000_000.0)
}

enum DeviceData {
    U8(Vec<u8>),
    F32(Vec<f32>),
    C32(Vec<Complex32>),
}

impl DeviceData {
    fn zeroed(kind: ElementKind, count: usize) -> Self {
        match kind {
            ElementKind::U8 => DeviceData::U8(vec![0; count]),
            ElementKind::F32 => DeviceData::F32(vec![0.0; count]),
            ElementKind::C32 => DeviceData::C32(vec![Complex32::new(0.0, 0.0); count]),
        }
    }

    fn fill_from_bytes(&mut self, bytes: &[u8]) {
        match self {
            DeviceData::U8(v) => v.copy_from_slice(bytes),
            DeviceData::F32(v) => {
                for (dst, chunk) in v.iter_mut().zip(bytes.chunks_exact(4)) {
                    *dst = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
                }
            }
            DeviceData::C32(v) => {
                for (dst, chunk) in v.iter_mut().zip(bytes.chunks_exact(8)) {
                    let re = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
                    let im = f32::from_le_bytes([chunk[4], chunk[5], chunk[6], chunk[7]]);
                    *dst = Complex32::new(re, im);
                }
            }
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        match self {
            DeviceData::U8(v) => v.clone(),
            DeviceData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            DeviceData::C32(v) => v
                .iter()
                .flat_map(|c| {
                    let mut b = [0u8; 8];
                    b[..4].copy_from_slice(&c.re.to_le_bytes());
                    b[4..].copy_from_slice(&c.im.to_le_bytes());
                    b
                })
                .collect(),
        }
    }
}

struct Storage {
    allocated: u64,
    buffers: HashMap<u64, RefCell<DeviceData>>,
}

struct DeviceState {
    spec: DeviceSpec,
    storage: Mutex<Storage>,
    poison: Mutex<Option<GigaError>>,
}

/// Buffer access inside a kernel body. Hands out typed views of the device's
/// buffers; cross-device handles are rejected.
pub struct DeviceCtx<'a> {
    device_id: usize,
    storage: &'a Storage,
}

macro_rules! typed_view {
    ($name:ident, $name_mut:ident, $variant:ident, $ty:ty, $kind:literal) => {
        pub fn $name(&self, buffer: &DeviceBuffer) -> Result<Ref<'_, [$ty]>> {
            let cell = self.slot(buffer)?;
            let data = cell.try_borrow().map_err(|_| {
                GigaError::InvalidHandle("buffer is mutably borrowed by this kernel".into())
            })?;
            Ref::filter_map(data, |d| match d {
                DeviceData::$variant(v) => Some(v.as_slice()),
                _ => None,
            })
            .map_err(|_| {
                GigaError::InvalidHandle(format!("buffer does not hold {} elements", $kind))
            })
        }

        pub fn $name_mut(&self, buffer: &DeviceBuffer) -> Result<RefMut<'_, [$ty]>> {
            let cell = self.slot(buffer)?;
            let data = cell.try_borrow_mut().map_err(|_| {
                GigaError::InvalidHandle("buffer is already borrowed by this kernel".into())
            })?;
            RefMut::filter_map(data, |d| match d {
                DeviceData::$variant(v) => Some(v.as_mut_slice()),
                _ => None,
            })
            .map_err(|_| {
                GigaError::InvalidHandle(format!("buffer does not hold {} elements", $kind))
            })
        }
    };
}

impl DeviceCtx<'_> {
    fn slot(&self, buffer: &DeviceBuffer) -> Result<&RefCell<DeviceData>> {
        if buffer.device_id != self.device_id {
            return Err(GigaError::DeviceAffinity {
                buffer_device: buffer.device_id,
                stream_device: self.device_id,
            });
        }
        self.storage
            .buffers
            .get(&buffer.id)
            .ok_or_else(|| GigaError::InvalidHandle(format!("buffer {} is not live", buffer.id)))
    }

    pub fn device_id(&self) -> usize {
        self.device_id
    }

    typed_view!(u8, u8_mut, U8, u8, "u8");
    typed_view!(f32, f32_mut, F32, f32, "f32");
    typed_view!(c32, c32_mut, C32, Complex32, "complex-f32");
}

type Task = Box<dyn FnOnce(&WorkerEnv) + Send>;

struct WorkerEnv {
    device: Arc<DeviceState>,
    trace: Arc<Mutex<Vec<TraceRecord>>>,
    epoch: Instant,
}

struct Inner {
    devices: Vec<Arc<DeviceState>>,
    senders: Vec<Sender<Task>>,
    workers: Vec<JoinHandle<()>>,
    trace: Arc<Mutex<Vec<TraceRecord>>>,
    epoch: Instant,
    next_buffer_id: AtomicU64,
    next_stream_id: AtomicU64,
}

impl Drop for Inner {
    fn drop(&mut self) {
        self.senders.clear();
        for handle in self.workers.drain(..) {
            let _ = handle.join();
        }
    }
}

/// Handle to the simulated devices. Cloning is cheap and every clone talks to
/// the same devices; the handle is safe to share across caller threads.
#[derive(Clone)]
pub struct Runtime {
    inner: Arc<Inner>,
}

impl Runtime {
    /// Create a runtime from explicit device specs. Ids must be dense and in
    /// order: `specs[i].id == i`.
    pub fn new(specs: Vec<DeviceSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(GigaError::Config("at least one device is required".into()));
        }
        for (i, spec) in specs.iter().enumerate() {
            if spec.id != i {
                return Err(GigaError::Config(format!(
                    "device ids must be dense 0..{}; position {i} has id {}",
                    specs.len(),
                    spec.id
                )));
            }
            if spec.memory_capacity == 0 {
                return Err(GigaError::Config(format!(
                    "device {i} must have a non-zero memory capacity"
                )));
            }
        }

        let epoch = Instant::now();
        let trace = Arc::new(Mutex::new(Vec::new()));
        let devices: Vec<Arc<DeviceState>> = specs
            .into_iter()
            .map(|spec| {
                Arc::new(DeviceState {
                    spec,
                    storage: Mutex::new(Storage {
                        allocated: 0,
                        buffers: HashMap::new(),
                    }),
                    poison: Mutex::new(None),
                })
            })
            .collect();

        let mut senders = Vec::with_capacity(devices.len());
        let mut workers = Vec::with_capacity(devices.len());
        for device in &devices {
            let (tx, rx) = mpsc::channel::<Task>();
            let env = WorkerEnv {
                device: Arc::clone(device),
                trace: Arc::clone(&trace),
                epoch,
            };
            let handle = std::thread::Builder::new()
                .name(format!("giga-device-{}", device.spec.id))
                .spawn(move || {
                    while let Ok(task) = rx.recv() {
                        task(&env);
                    }
                })
                .expect("failed to spawn device executor");
            senders.push(tx);
            workers.push(handle);
        }

        Ok(Self {
            inner: Arc::new(Inner {
                devices,
                senders,
                workers,
                trace,
                epoch,
                next_buffer_id: AtomicU64::new(1),
                next_stream_id: AtomicU64::new(1),
            }),
        })
    }

    /// N identical devices with the given per-device capacity.
    pub fn with_uniform_devices(count: usize, memory_capacity: u64) -> Result<Self> {
        let specs = (0..count)
            .map(|id| DeviceSpec {
                id,
                memory_capacity,
            })
            .collect();
        Self::new(specs)
    }

    pub fn device_count(&self) -> usize {
        self.inner.devices.len()
    }

    fn device(&self, device_id: usize) -> Result<&Arc<DeviceState>> {
        self.inner
            .devices
            .get(device_id)
            .ok_or_else(|| GigaError::Config(format!("no such device: {device_id}")))
    }

    pub fn memory_capacity(&self, device_id: usize) -> Result<u64> {
        Ok(self.device(device_id)?.spec.memory_capacity)
    }

    /// Bytes currently allocated on a device; always the sum of live buffers.
    pub fn allocated_bytes(&self, device_id: usize) -> Result<u64> {
        Ok(self.device(device_id)?.storage.lock().unwrap().allocated)
    }

    fn now_ns(&self) -> u64 {
        self.inner.epoch.elapsed().as_nanos() as u64
    }

    fn push_record(&self, record: TraceRecord) {
        self.inner.trace.lock().unwrap().push(record);
    }

    pub fn create_stream(&self, device_id: usize) -> Result<Stream> {
        self.device(device_id)?;
        Ok(Stream {
            device_id,
            id: self.inner.next_stream_id.fetch_add(1, Ordering::Relaxed),
        })
    }

    /// Allocate a zero-initialized buffer. Fails with `OutOfDeviceMemory` when
    /// the device's live allocations would exceed its capacity.
    pub fn alloc(
        &self,
        device_id: usize,
        length_bytes: u64,
        kind: ElementKind,
    ) -> Result<DeviceBuffer> {
        if length_bytes == 0 {
            return Err(GigaError::Size("buffer length must be non-zero".into()));
        }
        if !length_bytes.is_multiple_of(kind.size_bytes()) {
            return Err(GigaError::Size(format!(
                "buffer length {length_bytes} is not a multiple of the {}-byte element size",
                kind.size_bytes()
            )));
        }
        let device = self.device(device_id)?;
        let mut storage = device.storage.lock().unwrap();
        if storage.allocated + length_bytes > device.spec.memory_capacity {
            return Err(GigaError::OutOfDeviceMemory {
                device_id,
                requested: length_bytes,
                in_use: storage.allocated,
                capacity: device.spec.memory_capacity,
            });
        }
        let id = self.inner.next_buffer_id.fetch_add(1, Ordering::Relaxed);
        let count = (length_bytes / kind.size_bytes()) as usize;
        storage
            .buffers
            .insert(id, RefCell::new(DeviceData::zeroed(kind, count)));
        storage.allocated += length_bytes;
        debug_assert_eq!(
            storage.allocated,
            live_bytes(&storage.buffers),
            "allocation accounting out of sync"
        );
        let ns = self.now_ns();
        drop(storage);
        self.push_record(TraceRecord {
            device_id,
            kind: TraceKind::Alloc,
            start_ns: ns,
            end_ns: ns,
            label: length_bytes.to_string(),
        });
        Ok(DeviceBuffer {
            device_id,
            id,
            length_bytes,
            kind,
        })
    }

    /// Release a buffer. Freeing an unknown or already-freed handle is an error.
    pub fn free(&self, buffer: &DeviceBuffer) -> Result<()> {
        let device = self.device(buffer.device_id)?;
        let mut storage = device.storage.lock().unwrap();
        if storage.buffers.remove(&buffer.id).is_none() {
            return Err(GigaError::InvalidHandle(format!(
                "buffer {} is not live on device {} (double free?)",
                buffer.id, buffer.device_id
            )));
        }
        storage.allocated -= buffer.length_bytes;
        debug_assert_eq!(storage.allocated, live_bytes(&storage.buffers));
        let ns = self.now_ns();
        drop(storage);
        self.push_record(TraceRecord {
            device_id: buffer.device_id,
            kind: TraceKind::Free,
            start_ns: ns,
            end_ns: ns,
            label: buffer.length_bytes.to_string(),
        });
        Ok(())
    }

    /// Copy host bytes into a device buffer. Lengths must match exactly.
    pub fn memcpy_h2d(&self, buffer: &DeviceBuffer, host: &[u8]) -> Result<()> {
        if host.len() as u64 != buffer.length_bytes {
            return Err(GigaError::Size(format!(
                "host payload is {} bytes but the buffer holds {}",
                host.len(),
                buffer.length_bytes
            )));
        }
        let device = self.device(buffer.device_id)?;
        let storage = device.storage.lock().unwrap();
        let start = self.now_ns();
        let cell = storage
            .buffers
            .get(&buffer.id)
            .ok_or_else(|| GigaError::InvalidHandle(format!("buffer {} is not live", buffer.id)))?;
        cell.borrow_mut().fill_from_bytes(host);
        let end = self.now_ns();
        drop(storage);
        self.push_record(TraceRecord {
            device_id: buffer.device_id,
            kind: TraceKind::H2d,
            start_ns: start,
            end_ns: end,
            label: buffer.length_bytes.to_string(),
        });
        Ok(())
    }

    /// Copy a device buffer back to host bytes.
    pub fn memcpy_d2h(&self, buffer: &DeviceBuffer) -> Result<Vec<u8>> {
        let device = self.device(buffer.device_id)?;
        let storage = device.storage.lock().unwrap();
        let start = self.now_ns();
        let cell = storage
            .buffers
            .get(&buffer.id)
            .ok_or_else(|| GigaError::InvalidHandle(format!("buffer {} is not live", buffer.id)))?;
        let bytes = cell.borrow().to_bytes();
        let end = self.now_ns();
        drop(storage);
        self.push_record(TraceRecord {
            device_id: buffer.device_id,
            kind: TraceKind::D2h,
            start_ns: start,
            end_ns: end,
            label: buffer.length_bytes.to_string(),
        });
        Ok(bytes)
    }

    pub fn h2d_f32(&self, buffer: &DeviceBuffer, values: &[f32]) -> Result<()> {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        self.memcpy_h2d(buffer, &bytes)
    }

    pub fn d2h_f32(&self, buffer: &DeviceBuffer) -> Result<Vec<f32>> {
        let bytes = self.memcpy_d2h(buffer)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub fn h2d_c32(&self, buffer: &DeviceBuffer, values: &[Complex32]) -> Result<()> {
        let mut bytes = Vec::with_capacity(values.len() * 8);
        for c in values {
            bytes.extend_from_slice(&c.re.to_le_bytes());
            bytes.extend_from_slice(&c.im.to_le_bytes());
        }
        self.memcpy_h2d(buffer, &bytes)
    }

    pub fn d2h_c32(&self, buffer: &DeviceBuffer) -> Result<Vec<Complex32>> {
        let bytes = self.memcpy_d2h(buffer)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| {
                Complex32::new(
                    f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                    f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
                )
            })
            .collect())
    }

    /// Enqueue a kernel on a stream. The body runs asynchronously on the
    /// device's executor; buffer arguments must live on the stream's device.
    /// Errors returned by the body poison the device and surface at the next
    /// synchronize call.
    pub fn launch<F>(
        &self,
        stream: &Stream,
        name: &str,
        args: &[&DeviceBuffer],
        body: F,
    ) -> Result<()>
    where
        F: FnOnce(&DeviceCtx) -> Result<()> + Send + 'static,
    {
        for arg in args {
            if arg.device_id != stream.device_id {
                return Err(GigaError::DeviceAffinity {
                    buffer_device: arg.device_id,
                    stream_device: stream.device_id,
                });
            }
        }
        self.device(stream.device_id)?;
        let device_id = stream.device_id;
        let label = name.to_string();
        let task: Task = Box::new(move |env: &WorkerEnv| {
            let storage = env.device.storage.lock().unwrap();
            let start = env.epoch.elapsed().as_nanos() as u64;
            let ctx = DeviceCtx {
                device_id,
                storage: &storage,
            };
            // A panicking kernel body must not take the executor down with it;
            // it becomes a poison error like any other kernel failure.
            let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| body(&ctx)))
                .unwrap_or_else(|payload| {
                    let msg = payload
                        .downcast_ref::<&str>()
                        .map(|s| (*s).to_string())
                        .or_else(|| payload.downcast_ref::<String>().cloned())
                        .unwrap_or_else(|| "kernel panicked".into());
                    Err(GigaError::Config(format!("kernel `{label}` panicked: {msg}")))
                });
            let end = env.epoch.elapsed().as_nanos() as u64;
            drop(storage);
            env.trace.lock().unwrap().push(TraceRecord {
                device_id,
                kind: TraceKind::Kernel,
                start_ns: start,
                end_ns: end,
                label,
            });
            if let Err(e) = result {
                let mut poison = env.device.poison.lock().unwrap();
                if poison.is_none() {
                    *poison = Some(e);
                }
            }
        });
        self.inner.senders[device_id]
            .send(task)
            .map_err(|_| GigaError::Config("device executor has shut down".into()))
    }

    fn sync_device_inner(&self, device_id: usize) -> Result<()> {
        let device = self.device(device_id)?;
        let pair = Arc::new((Mutex::new(false), Condvar::new()));
        let pair_task = Arc::clone(&pair);
        let task: Task = Box::new(move |_| {
            let (lock, cv) = &*pair_task;
            *lock.lock().unwrap() = true;
            cv.notify_all();
        });
        self.inner.senders[device_id]
            .send(task)
            .map_err(|_| GigaError::Config("device executor has shut down".into()))?;
        let (lock, cv) = &*pair;
        let mut done = lock.lock().unwrap();
        while !*done {
            done = cv.wait(done).unwrap();
        }
        drop(done);
        if let Some(err) = device.poison.lock().unwrap().take() {
            return Err(err);
        }
        Ok(())
    }

    /// Return once all work previously enqueued on the stream has completed.
    ///
    /// Streams of one device share its in-order executor, so this is
    /// equivalent to synchronizing the whole device.
    pub fn synchronize_stream(&self, stream: &Stream) -> Result<()> {
        self.sync_device_inner(stream.device_id)
    }

    /// Return once all work previously enqueued on any of the device's
    /// streams has completed.
    pub fn synchronize_device(&self, device_id: usize) -> Result<()> {
        self.sync_device_inner(device_id)
    }

    /// Synchronize every device, reporting the first error encountered.
    pub fn synchronize_all(&self) -> Result<()> {
        let mut first_err = None;
        for id in 0..self.device_count() {
            if let Err(e) = self.sync_device_inner(id) {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
        match first_err {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Record a timing marker behind all work currently enqueued on the stream.
    pub fn record_event(&self, stream: &Stream) -> Result<Event> {
        self.device(stream.device_id)?;
        let event = Event {
            inner: Arc::new(EventInner {
                stamp_ns: Mutex::new(None),
                cv: Condvar::new(),
            }),
        };
        let inner = Arc::clone(&event.inner);
        let task: Task = Box::new(move |env: &WorkerEnv| {
            let ns = env.epoch.elapsed().as_nanos() as u64;
            *inner.stamp_ns.lock().unwrap() = Some(ns);
            inner.cv.notify_all();
        });
        self.inner.senders[stream.device_id]
            .send(task)
            .map_err(|_| GigaError::Config("device executor has shut down".into()))?;
        Ok(event)
    }

    /// Consistent point-in-time copy of the activity records.
    pub fn trace_snapshot(&self) -> ActivityTrace {
        ActivityTrace::new(self.inner.trace.lock().unwrap().clone())
    }
}

fn live_bytes(buffers: &HashMap<u64, RefCell<DeviceData>>) -> u64 {
    buffers
        .values()
        .map(|cell| match &*cell.borrow() {
            DeviceData::U8(v) => v.len() as u64,
            DeviceData::F32(v) => v.len() as u64 * 4,
            DeviceData::C32(v) => v.len() as u64 * 8,
        })
        .sum()
}

/// Frees every tracked buffer when dropped. Operations route their scratch
/// allocations through one of these so error paths cannot leak device memory.
///
/// Dropping first drains the executors of the devices involved, so a buffer
/// is never pulled out from under a still-queued kernel; secondary errors
/// surfaced by that drain are discarded (the caller is already unwinding with
/// the primary one).
pub struct BufGuard<'rt> {
    runtime: &'rt Runtime,
    buffers: Vec<DeviceBuffer>,
}

impl<'rt> BufGuard<'rt> {
    pub fn new(runtime: &'rt Runtime) -> Self {
        Self {
            runtime,
            buffers: Vec::new(),
        }
    }

    /// Track a fresh allocation; returns a handle for kernel use.
    pub fn track(&mut self, buffer: DeviceBuffer) -> DeviceBuffer {
        self.buffers.push(buffer.clone());
        buffer
    }

    pub fn alloc(
        &mut self,
        device_id: usize,
        length_bytes: u64,
        kind: ElementKind,
    ) -> Result<DeviceBuffer> {
        let buffer = self.runtime.alloc(device_id, length_bytes, kind)?;
        Ok(self.track(buffer))
    }
}

impl Drop for BufGuard<'_> {
    fn drop(&mut self) {
        let mut devices: Vec<usize> = self.buffers.iter().map(|b| b.device_id).collect();
        devices.sort_unstable();
        devices.dedup();
        for device_id in devices {
            let _ = self.runtime.synchronize_device(device_id);
        }
        for buffer in &self.buffers {
            let _ = self.runtime.free(buffer);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{self, IndexSpace2D};
    use std::time::Duration;

    fn two_device_runtime() -> Runtime {
        Runtime::with_uniform_devices(2, 1 << 20).unwrap()
    }

    #[test]
    fn construction() {
        let rt = Runtime::with_uniform_devices(2, 24 * (1 << 30)).unwrap();
        assert_eq!(rt.device_count(), 2);
        assert!(rt.trace_snapshot().is_empty());

        assert_eq!(Runtime::with_uniform_devices(1, 1024).unwrap().device_count(), 1);
        assert!(Runtime::new(vec![]).is_err());
        assert!(Runtime::new(vec![
            DeviceSpec { id: 0, memory_capacity: 1 },
            DeviceSpec { id: 0, memory_capacity: 1 },
        ])
        .is_err());
        assert!(Runtime::new(vec![DeviceSpec { id: 1, memory_capacity: 1 }]).is_err());
    }

    #[test]
    fn alloc_capacity_boundary() {
        let rt = Runtime::with_uniform_devices(1, 100).unwrap();
        let b = rt.alloc(0, 100, ElementKind::U8).unwrap();
        assert_eq!(rt.allocated_bytes(0).unwrap(), 100);
        rt.free(&b).unwrap();

        let err = rt.alloc(0, 101, ElementKind::U8).unwrap_err();
        assert!(err.is_oom());

        let first = rt.alloc(0, 60, ElementKind::U8).unwrap();
        assert!(rt.alloc(0, 60, ElementKind::U8).unwrap_err().is_oom());
        assert_eq!(rt.allocated_bytes(0).unwrap(), 60);
        rt.free(&first).unwrap();
        assert_eq!(rt.allocated_bytes(0).unwrap(), 0);
    }

    #[test]
    fn free_then_full_capacity_alloc_succeeds() {
        let rt = Runtime::with_uniform_devices(1, 64).unwrap();
        let b = rt.alloc(0, 50, ElementKind::U8).unwrap();
        rt.free(&b).unwrap();
        assert_eq!(rt.allocated_bytes(0).unwrap(), 0);
        let b2 = rt.alloc(0, 64, ElementKind::U8).unwrap();
        rt.free(&b2).unwrap();
    }

    #[test]
    fn double_free_is_an_invalid_handle() {
        let rt = two_device_runtime();
        let b = rt.alloc(0, 16, ElementKind::F32).unwrap();
        rt.free(&b).unwrap();
        assert!(matches!(rt.free(&b), Err(GigaError::InvalidHandle(_))));
    }

    #[test]
    fn transfer_round_trip_is_bit_exact() {
        let rt = two_device_runtime();
        let mut rng = crate::rng::SplitMix64::new(99);
        let payload = rng.fill_bytes(1024);
        let b = rt.alloc(1, 1024, ElementKind::U8).unwrap();
        rt.memcpy_h2d(&b, &payload).unwrap();
        assert_eq!(rt.memcpy_d2h(&b).unwrap(), payload);
        rt.free(&b).unwrap();
    }

    #[test]
    fn mismatched_transfer_length_is_a_size_error() {
        let rt = two_device_runtime();
        let b = rt.alloc(0, 16, ElementKind::U8).unwrap();
        assert!(matches!(
            rt.memcpy_h2d(&b, &[0u8; 15]),
            Err(GigaError::Size(_))
        ));
        rt.free(&b).unwrap();
    }

    #[test]
    fn fresh_buffers_read_as_zero() {
        let rt = two_device_runtime();
        let b = rt.alloc(0, 256, ElementKind::U8).unwrap();
        assert!(rt.memcpy_d2h(&b).unwrap().iter().all(|&x| x == 0));
        let f = rt.alloc(0, 64, ElementKind::F32).unwrap();
        assert!(rt.d2h_f32(&f).unwrap().iter().all(|&x| x == 0.0));
        rt.free(&b).unwrap();
        rt.free(&f).unwrap();
    }

    #[test]
    fn f32_round_trip_preserves_bits() {
        let rt = two_device_runtime();
        let values = [0.0f32, -0.0, 1.5, f32::MIN_POSITIVE, 3.4e38, -7.25];
        let b = rt.alloc(0, (values.len() * 4) as u64, ElementKind::F32).unwrap();
        rt.h2d_f32(&b, &values).unwrap();
        let back = rt.d2h_f32(&b).unwrap();
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn cross_device_launch_is_rejected() {
        let rt = two_device_runtime();
        let stream = rt.create_stream(0).unwrap();
        let b1 = rt.alloc(1, 16, ElementKind::F32).unwrap();
        let err = rt
            .launch(&stream, "noop", &[&b1], |_| Ok(()))
            .unwrap_err();
        assert!(matches!(err, GigaError::DeviceAffinity { .. }));
        rt.free(&b1).unwrap();
    }

    #[test]
    fn same_stream_kernels_run_in_order_without_overlap() {
        let rt = two_device_runtime();
        let stream = rt.create_stream(0).unwrap();
        for name in ["first", "second"] {
            rt.launch(&stream, name, &[], |_| {
                std::thread::sleep(Duration::from_millis(5));
                Ok(())
            })
            .unwrap();
        }
        rt.synchronize_stream(&stream).unwrap();
        let trace = rt.trace_snapshot();
        let kernels = trace.kernel_records(0);
        assert_eq!(kernels.len(), 2);
        assert_eq!(kernels[0].label, "first");
        assert_eq!(kernels[1].label, "second");
        assert!(kernels[0].end_ns <= kernels[1].start_ns);
    }

    #[test]
    fn kernels_on_two_devices_overlap_in_wall_time() {
        let rt = two_device_runtime();
        for d in 0..2 {
            let stream = rt.create_stream(d).unwrap();
            rt.launch(&stream, "busy", &[], |_| {
                std::thread::sleep(Duration::from_millis(50));
                Ok(())
            })
            .unwrap();
        }
        rt.synchronize_all().unwrap();
        let trace = rt.trace_snapshot();
        assert!(trace.cross_device_kernel_overlap_ns().is_some());
    }

    #[test]
    fn synchronize_empty_stream_returns_immediately() {
        let rt = two_device_runtime();
        let stream = rt.create_stream(0).unwrap();
        rt.synchronize_stream(&stream).unwrap();
    }

    #[test]
    fn synchronize_waits_for_sleeping_kernel() {
        let rt = two_device_runtime();
        let stream = rt.create_stream(0).unwrap();
        let begin = Instant::now();
        rt.launch(&stream, "sleep", &[], |_| {
            std::thread::sleep(Duration::from_millis(50));
            Ok(())
        })
        .unwrap();
        rt.synchronize_stream(&stream).unwrap();
        assert!(begin.elapsed() >= Duration::from_millis(50));
    }

    #[test]
    fn d2h_after_sync_observes_kernel_writes() {
        let rt = two_device_runtime();
        let stream = rt.create_stream(0).unwrap();
        let b = rt.alloc(0, 16, ElementKind::F32).unwrap();
        let handle = b.clone();
        rt.launch(&stream, "fill", &[&b], move |ctx| {
            let mut v = ctx.f32_mut(&handle)?;
            for (i, x) in v.iter_mut().enumerate() {
                *x = i as f32 + 1.0;
            }
            Ok(())
        })
        .unwrap();
        rt.synchronize_stream(&stream).unwrap();
        assert_eq!(rt.d2h_f32(&b).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        rt.free(&b).unwrap();
    }

    #[test]
    fn kernel_errors_poison_the_device_until_synchronize() {
        let rt = two_device_runtime();
        let stream = rt.create_stream(0).unwrap();
        rt.launch(&stream, "boom", &[], |_| {
            Err(GigaError::Size("deliberate".into()))
        })
        .unwrap();
        assert!(matches!(
            rt.synchronize_stream(&stream),
            Err(GigaError::Size(_))
        ));
        // The poison is consumed.
        rt.synchronize_stream(&stream).unwrap();
    }

    #[test]
    fn panicking_kernel_poisons_instead_of_hanging() {
        let rt = two_device_runtime();
        let stream = rt.create_stream(0).unwrap();
        rt.launch(&stream, "explode", &[], |_| panic!("boom"))
            .unwrap();
        let err = rt.synchronize_stream(&stream).unwrap_err();
        assert!(err.to_string().contains("panicked"), "{err}");

        // The executor survives and keeps serving work.
        rt.launch(&stream, "after", &[], |_| Ok(())).unwrap();
        rt.synchronize_stream(&stream).unwrap();
    }

    #[test]
    fn events_bracket_enqueued_work() {
        let rt = two_device_runtime();
        let stream = rt.create_stream(0).unwrap();
        let start = rt.record_event(&stream).unwrap();
        rt.launch(&stream, "sleep", &[], |_| {
            std::thread::sleep(Duration::from_millis(20));
            Ok(())
        })
        .unwrap();
        let end = rt.record_event(&stream).unwrap();
        rt.synchronize_stream(&stream).unwrap();
        assert!(start.is_complete() && end.is_complete());
        let ms = elapsed_ms(&start, &end).unwrap();
        assert!(ms >= 20.0, "elapsed {ms} ms");
        assert!(matches!(
            elapsed_ms(&end, &start),
            Err(GigaError::EventOrdering(_))
        ));
    }

    #[test]
    fn back_to_back_events_have_tiny_nonnegative_elapsed() {
        let rt = two_device_runtime();
        let stream = rt.create_stream(0).unwrap();
        let a = rt.record_event(&stream).unwrap();
        let b = rt.record_event(&stream).unwrap();
        rt.synchronize_stream(&stream).unwrap();
        let ms = elapsed_ms(&a, &b).unwrap();
        assert!((0.0..100.0).contains(&ms));
    }

    #[test]
    fn unstamped_event_is_not_ready() {
        let rt = two_device_runtime();
        let stream = rt.create_stream(0).unwrap();
        rt.launch(&stream, "slow", &[], |_| {
            std::thread::sleep(Duration::from_millis(30));
            Ok(())
        })
        .unwrap();
        let e = rt.record_event(&stream).unwrap();
        let f = rt.record_event(&stream).unwrap();
        // Almost certainly still queued behind the sleep.
        let _ = elapsed_ms(&e, &f);
        rt.synchronize_stream(&stream).unwrap();
        assert!(e.is_complete());
    }

    #[test]
    fn trace_records_alloc_and_transfers() {
        let rt = two_device_runtime();
        let b = rt.alloc(0, 32, ElementKind::U8).unwrap();
        let trace = rt.trace_snapshot();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace.records()[0].kind, TraceKind::Alloc);
        rt.memcpy_h2d(&b, &[7u8; 32]).unwrap();
        rt.memcpy_d2h(&b).unwrap();
        rt.free(&b).unwrap();
        let kinds: Vec<TraceKind> = rt
            .trace_snapshot()
            .records()
            .iter()
            .map(|r| r.kind)
            .collect();
        assert_eq!(
            kinds,
            vec![TraceKind::Alloc, TraceKind::H2d, TraceKind::D2h, TraceKind::Free]
        );
        for r in rt.trace_snapshot().records() {
            assert!(r.start_ns <= r.end_ns);
        }
    }

    #[test]
    fn dispatch_runs_inside_a_kernel() {
        let rt = two_device_runtime();
        let stream = rt.create_stream(0).unwrap();
        let b = rt.alloc(0, 64 * 4, ElementKind::F32).unwrap();
        let handle = b.clone();
        rt.launch(&stream, "iota", &[&b], move |ctx| {
            let mut out = ctx.f32_mut(&handle)?;
            let out: &mut [f32] = &mut out;
            let space = IndexSpace2D::covering_linear(64)?;
            kernel::dispatch(&space, |t, _| {
                let i = t.global_linear();
                if i < 64 {
                    out[i] = i as f32;
                }
            })
        })
        .unwrap();
        rt.synchronize_stream(&stream).unwrap();
        let v = rt.d2h_f32(&b).unwrap();
        assert_eq!(v[63], 63.0);
        rt.free(&b).unwrap();
    }

    #[test]
    fn runtime_handle_is_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<Runtime>();

        let rt = Runtime::with_uniform_devices(2, 1 << 22).unwrap();
        let mut handles = Vec::new();
        for i in 0..4u64 {
            let rt = rt.clone();
            handles.push(std::thread::spawn(move || {
                let x: Vec<f32> = (0..2000).map(|j| ((j + i as usize) % 7) as f32).collect();
                crate::ops::dot(&rt, &x, &x, 2).unwrap()
            }));
        }
        for (i, h) in handles.into_iter().enumerate() {
            let x: Vec<f32> = (0..2000).map(|j| ((j + i) % 7) as f32).collect();
            let expect: f64 = x.iter().map(|&v| (v as f64) * (v as f64)).sum();
            assert_eq!(h.join().unwrap(), expect);
        }
        for d in 0..2 {
            assert_eq!(rt.allocated_bytes(d).unwrap(), 0);
        }
    }

    #[test]
    fn buf_guard_frees_on_drop() {
        let rt = two_device_runtime();
        {
            let mut guard = BufGuard::new(&rt);
            guard.alloc(0, 128, ElementKind::U8).unwrap();
            guard.alloc(1, 128, ElementKind::U8).unwrap();
            assert_eq!(rt.allocated_bytes(0).unwrap(), 128);
        }
        assert_eq!(rt.allocated_bytes(0).unwrap(), 0);
        assert_eq!(rt.allocated_bytes(1).unwrap(), 0);
    }
}
