//! Strategy-parameterized vector reduction for current deposition.
//!
//! Concurrent workers accumulate into a shared vector either through
//! per-worker duplicates that are merged by an explicit [`contribute`]
//! step, or through atomic additions on a single copy. The replicated
//! family differs only in where the duplicates live:
//!
//! * [`Replicated`]: one heap allocation per worker.
//! * [`ReplicatedPadded`]: one allocation, per-worker stride rounded up to a
//!   whole number of cache lines.
//! * [`PooledContiguous`]: one allocation, per-worker blocks back to back.
//! * [`Atomic`]: a single shared vector updated with atomic adds; this is
//!   the accumulation model of GPU-style backends and the only strategy
//!   whose result depends on scheduling (additions reassociate).
//!
//! The merge order of [`contribute`] is fixed (worker 0 first, per slot), so
//! every replicated strategy is bitwise reproducible for a fixed worker
//! count and per-worker deposit order.
//!
//! [`Replicated`]: ScatterStrategy::Replicated
//! [`ReplicatedPadded`]: ScatterStrategy::ReplicatedPadded
//! [`PooledContiguous`]: ScatterStrategy::PooledContiguous
//! [`Atomic`]: ScatterStrategy::Atomic
//! [`contribute`]: ScatterAccumulator::contribute

use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScatterError {
    #[error("accumulator needs at least one slot")]
    ZeroDofs,
    #[error("accumulator needs at least one worker")]
    ZeroWorkers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScatterStrategy {
    Replicated,
    ReplicatedPadded,
    PooledContiguous,
    Atomic,
}

impl ScatterStrategy {
    pub const ALL: [ScatterStrategy; 4] = [
        ScatterStrategy::Replicated,
        ScatterStrategy::ReplicatedPadded,
        ScatterStrategy::PooledContiguous,
        ScatterStrategy::Atomic,
    ];

    /// Whether repeated runs with a fixed worker count reproduce bitwise.
    pub fn is_deterministic(self) -> bool {
        !matches!(self, ScatterStrategy::Atomic)
    }

    pub fn name(self) -> &'static str {
        match self {
            ScatterStrategy::Replicated => "replicated",
            ScatterStrategy::ReplicatedPadded => "padded",
            ScatterStrategy::PooledContiguous => "pooled",
            ScatterStrategy::Atomic => "atomic",
        }
    }
}

const DEFAULT_CACHE_LINE_BYTES: usize = 64;

struct DupSlot(UnsafeCell<f64>);

// Each worker writes only its own stride of the duplicate storage; handles
// are claimed once per worker id.
unsafe impl Sync for DupSlot {}

enum Storage {
    /// Separate allocation per worker.
    Split(Vec<Vec<DupSlot>>),
    /// One allocation, `stride` slots per worker.
    Strided { data: Vec<DupSlot>, stride: usize },
    Atomic(Vec<AtomicU64>),
}

/// Thread-safe deposit target for the current-density reduction.
pub struct ScatterAccumulator {
    strategy: ScatterStrategy,
    n_dofs: usize,
    n_workers: usize,
    storage: Storage,
    claimed: Vec<AtomicBool>,
}

impl ScatterAccumulator {
    pub fn new(
        strategy: ScatterStrategy,
        n_dofs: usize,
        n_workers: usize,
    ) -> Result<Self, ScatterError> {
        Self::with_cache_line(strategy, n_dofs, n_workers, DEFAULT_CACHE_LINE_BYTES)
    }

    /// As [`new`](Self::new) with an explicit cache-line size for the padded
    /// strategy (64 bytes, i.e. 8 slots, by default).
    pub fn with_cache_line(
        strategy: ScatterStrategy,
        n_dofs: usize,
        n_workers: usize,
        cache_line_bytes: usize,
    ) -> Result<Self, ScatterError> {
        if n_dofs == 0 {
            return Err(ScatterError::ZeroDofs);
        }
        if n_workers == 0 {
            return Err(ScatterError::ZeroWorkers);
        }
        let zeroed = |len: usize| {
            let mut v = Vec::with_capacity(len);
            v.resize_with(len, || DupSlot(UnsafeCell::new(0.0)));
            v
        };
        let storage = match strategy {
            ScatterStrategy::Replicated => {
                Storage::Split((0..n_workers).map(|_| zeroed(n_dofs)).collect())
            }
            ScatterStrategy::ReplicatedPadded => {
                let line = (cache_line_bytes / std::mem::size_of::<f64>()).max(1);
                let stride = n_dofs.div_ceil(line) * line;
                Storage::Strided {
                    data: zeroed(stride * n_workers),
                    stride,
                }
            }
            ScatterStrategy::PooledContiguous => Storage::Strided {
                data: zeroed(n_dofs * n_workers),
                stride: n_dofs,
            },
            ScatterStrategy::Atomic => {
                Storage::Atomic((0..n_dofs).map(|_| AtomicU64::new(0.0f64.to_bits())).collect())
            }
        };
        Ok(Self {
            strategy,
            n_dofs,
            n_workers,
            storage,
            claimed: (0..n_workers).map(|_| AtomicBool::new(false)).collect(),
        })
    }

    pub fn strategy(&self) -> ScatterStrategy {
        self.strategy
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_workers(&self) -> usize {
        self.n_workers
    }

    /// Per-worker stride of the padded strategy, in slots; exposed so the
    /// padding arithmetic is testable.
    pub fn worker_stride(&self) -> usize {
        match &self.storage {
            Storage::Strided { stride, .. } => *stride,
            Storage::Split(_) => self.n_dofs,
            Storage::Atomic(_) => 0,
        }
    }

    /// Claims the deposit handle of one worker. Each worker id is claimable
    /// once per accumulator; the handle is `Send` and may deposit
    /// concurrently with the other workers' handles.
    pub fn worker(&self, worker_id: usize) -> WorkerDeposit<'_> {
        assert!(worker_id < self.n_workers, "worker id out of range");
        assert!(
            !self.claimed[worker_id].swap(true, Ordering::AcqRel),
            "worker {worker_id} handle claimed twice"
        );
        let target = match &self.storage {
            Storage::Split(copies) => Target::Own(unsafe { split_mut(&copies[worker_id]) }),
            Storage::Strided { data, stride } => {
                let range = worker_id * stride..worker_id * stride + self.n_dofs;
                Target::Own(unsafe { split_mut(&data[range]) })
            }
            Storage::Atomic(slots) => Target::Shared(slots),
        };
        WorkerDeposit { target }
    }

    /// Merged result once all deposits are done (caller-ordered barrier:
    /// handles must be dropped or idle). Replicated strategies sum the
    /// worker copies per slot, worker 0 first; the atomic strategy returns
    /// the shared vector as is.
    pub fn contribute(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs];
        self.contribute_into(&mut out);
        out
    }

    /// As [`contribute`](Self::contribute), overwriting a caller buffer.
    pub fn contribute_into(&self, out: &mut [f64]) {
        assert_eq!(out.len(), self.n_dofs);
        match &self.storage {
            Storage::Split(copies) => {
                for (i, slot) in out.iter_mut().enumerate() {
                    let mut acc = unsafe { *copies[0][i].0.get() };
                    for copy in &copies[1..] {
                        acc += unsafe { *copy[i].0.get() };
                    }
                    *slot = acc;
                }
            }
            Storage::Strided { data, stride } => {
                for (i, slot) in out.iter_mut().enumerate() {
                    let mut acc = unsafe { *data[i].0.get() };
                    for w in 1..self.n_workers {
                        acc += unsafe { *data[w * stride + i].0.get() };
                    }
                    *slot = acc;
                }
            }
            Storage::Atomic(slots) => {
                for (slot, a) in out.iter_mut().zip(slots) {
                    *slot = f64::from_bits(a.load(Ordering::Acquire));
                }
            }
        }
    }
}

unsafe fn split_mut(slots: &[DupSlot]) -> &mut [f64] {
    unsafe { std::slice::from_raw_parts_mut(slots.as_ptr() as *mut f64, slots.len()) }
}

enum Target<'a> {
    Own(&'a mut [f64]),
    Shared(&'a [AtomicU64]),
}

/// Deposit handle of a single worker.
pub struct WorkerDeposit<'a> {
    target: Target<'a>,
}

impl WorkerDeposit<'_> {
    /// Adds `value` to the slot at `index` (worker copy or shared atomic
    /// slot, depending on the strategy). Out-of-range indices panic.
    #[inline]
    pub fn add(&mut self, index: usize, value: f64) {
        match &mut self.target {
            Target::Own(copy) => copy[index] += value,
            Target::Shared(slots) => atomic_add(&slots[index], value),
        }
    }
}

fn atomic_add(slot: &AtomicU64, value: f64) {
    let mut current = slot.load(Ordering::Relaxed);
    loop {
        let next = (f64::from_bits(current) + value).to_bits();
        match slot.compare_exchange_weak(current, next, Ordering::AcqRel, Ordering::Relaxed) {
            Ok(_) => return,
            Err(actual) => current = actual,
        }
    }
}
