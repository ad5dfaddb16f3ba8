//! Minimal execution layer: a particle index range partitioned over worker
//! threads, each with a private block of scratch memory sized before the
//! dispatch.
//!
//! Scratch for all workers comes from one allocation. In the default
//! [`ScratchLayout::Pooled`] layout a worker's fields sit back to back in its
//! own contiguous region, so no cache line holds data of two workers (beyond
//! a single boundary line). The [`ScratchLayout::Interleaved`] layout instead
//! groups the same field of all workers together, which packs small per-worker
//! fields tightly onto shared cache lines. It exists only to demonstrate the
//! false-sharing penalty in the benchmark harness; nothing else should use it.

use std::cell::UnsafeCell;
use std::ops::Range;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

/// Worker-count override honored by the benchmark harness, in the spirit of
/// `OMP_NUM_THREADS`.
pub const WORKER_ENV_VAR: &str = "PIC_NUM_WORKERS";

/// Reads [`WORKER_ENV_VAR`], ignoring unset, empty or unparsable values.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKER_ENV_VAR)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
}

/// How the particle index range is split across workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    /// One contiguous block per worker, fixed up front. The default: the
    /// per-particle cost of the kernel is uniform, so static splitting
    /// balances well and keeps the assignment a pure function of the range.
    Contiguous,
    /// Fixed-size chunks handed out dynamically.
    Chunked { chunk: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScratchLayout {
    /// All fields of one worker contiguous, strides padded to cache lines.
    Pooled,
    /// Same field of all workers adjacent; false-sharing prone, benchmark
    /// demonstration only.
    Interleaved,
}

/// Execution policy for one parallel dispatch.
#[derive(Debug, Clone)]
pub struct ExecConfig {
    pub n_workers: usize,
    pub partition: Partition,
    pub scratch_layout: ScratchLayout,
    /// Forces static contiguous partitioning (and, at the operator level, a
    /// replicated reduction) so results are bitwise reproducible for a fixed
    /// worker count.
    pub deterministic: bool,
}

impl ExecConfig {
    pub fn new(n_workers: usize) -> Self {
        assert!(n_workers >= 1, "need at least one worker");
        Self {
            n_workers,
            partition: Partition::Contiguous,
            scratch_layout: ScratchLayout::Pooled,
            deterministic: false,
        }
    }

    pub fn serial() -> Self {
        Self::new(1)
    }

    pub fn deterministic(n_workers: usize) -> Self {
        Self {
            deterministic: true,
            ..Self::new(n_workers)
        }
    }

    /// Partition actually used by a dispatch; deterministic mode pins it to
    /// the static contiguous split.
    pub fn effective_partition(&self) -> Partition {
        if self.deterministic {
            Partition::Contiguous
        } else {
            self.partition
        }
    }
}

/// Contiguous block of worker `w` when `len` indices are split over `n`
/// workers: a pure function of its arguments.
pub fn contiguous_block(len: usize, n_workers: usize, worker: usize) -> Range<usize> {
    let start = worker * len / n_workers;
    let end = (worker + 1) * len / n_workers;
    start..end
}

const CACHE_LINE_F64: usize = 8; // 64-byte lines

#[repr(transparent)]
struct Slot(UnsafeCell<f64>);

// Workers only ever touch their own disjoint index ranges; the pool checks
// the ranges at construction and hands each worker's region out once.
unsafe impl Sync for Slot {}

/// One flat allocation providing every worker a private set of scratch
/// fields, zero-initialized, with the placement controlled by
/// [`ScratchLayout`].
pub struct ScratchPool {
    storage: Vec<Slot>,
    field_sizes: Vec<usize>,
    n_workers: usize,
    layout: ScratchLayout,
    padded_stride: usize,
    claimed: Vec<AtomicBool>,
}

impl ScratchPool {
    pub fn new(n_workers: usize, field_sizes: &[usize], layout: ScratchLayout) -> Self {
        assert!(n_workers >= 1);
        let elems: usize = field_sizes.iter().sum();
        let padded_stride = match layout {
            ScratchLayout::Pooled => elems.div_ceil(CACHE_LINE_F64) * CACHE_LINE_F64,
            ScratchLayout::Interleaved => elems,
        };
        let total = match layout {
            ScratchLayout::Pooled => padded_stride * n_workers,
            ScratchLayout::Interleaved => elems * n_workers,
        };
        let mut storage = Vec::with_capacity(total.max(1));
        storage.resize_with(total.max(1), || Slot(UnsafeCell::new(0.0)));
        let pool = Self {
            storage,
            field_sizes: field_sizes.to_vec(),
            n_workers,
            layout,
            padded_stride,
            claimed: (0..n_workers).map(|_| AtomicBool::new(false)).collect(),
        };
        pool.assert_disjoint();
        pool
    }

    /// Total scratch slots per worker, the size that must be known before
    /// the dispatch starts.
    pub fn elements_per_worker(&self) -> usize {
        self.field_sizes.iter().sum()
    }

    fn field_range(&self, worker: usize, field: usize) -> Range<usize> {
        let prefix: usize = self.field_sizes[..field].iter().sum();
        let size = self.field_sizes[field];
        match self.layout {
            ScratchLayout::Pooled => {
                let base = worker * self.padded_stride + prefix;
                base..base + size
            }
            ScratchLayout::Interleaved => {
                let base = prefix * self.n_workers + worker * size;
                base..base + size
            }
        }
    }

    fn assert_disjoint(&self) {
        let mut ranges = Vec::new();
        for w in 0..self.n_workers {
            for f in 0..self.field_sizes.len() {
                let r = self.field_range(w, f);
                if !r.is_empty() {
                    ranges.push(r);
                }
            }
        }
        ranges.sort_by_key(|r| r.start);
        for pair in ranges.windows(2) {
            assert!(
                pair[0].end <= pair[1].start,
                "scratch regions overlap: {:?} and {:?}",
                pair[0],
                pair[1]
            );
        }
    }

    /// Hands out the per-field scratch slices of one worker. Each worker may
    /// be claimed once per pool; a second claim panics, which keeps the
    /// aliasing guarantee a runtime fact rather than a convention.
    pub fn claim_worker(&self, worker: usize) -> WorkerScratch<'_> {
        assert!(worker < self.n_workers);
        assert!(
            !self.claimed[worker].swap(true, Ordering::AcqRel),
            "worker {worker} scratch claimed twice"
        );
        let fields = (0..self.field_sizes.len())
            .map(|f| {
                let r = self.field_range(worker, f);
                let ptr = self.storage[r.start..r.end].as_ptr() as *mut f64;
                // Disjointness is asserted at construction and the claim
                // flag guarantees a single handle per worker.
                unsafe { std::slice::from_raw_parts_mut(ptr, r.len()) }
            })
            .collect();
        WorkerScratch { fields }
    }
}

/// The private scratch fields of one worker, in declaration order.
pub struct WorkerScratch<'a> {
    fields: Vec<&'a mut [f64]>,
}

impl<'a> WorkerScratch<'a> {
    pub fn into_fields(self) -> Vec<&'a mut [f64]> {
        self.fields
    }

    pub fn n_fields(&self) -> usize {
        self.fields.len()
    }
}

/// A body failure, tagged with the particle index it occurred at. With the
/// static partition the reported index is the smallest failing one.
#[derive(Debug)]
pub struct BodyError<E> {
    pub index: usize,
    pub error: E,
}

/// Invokes `body` exactly once for every index in `range`, split over
/// `exec.n_workers` workers. `setup` runs once per worker before its loop
/// and receives the worker's scratch region.
///
/// No assumption may be made about cross-worker execution order; `body` must
/// be race-free given that scratch regions are private and any shared sink
/// is thread-safe.
pub fn parallel_for_particles<'pool, S, E, FSetup, FBody>(
    range: Range<usize>,
    exec: &ExecConfig,
    pool: &'pool ScratchPool,
    setup: FSetup,
    body: FBody,
) -> Result<(), BodyError<E>>
where
    FSetup: Fn(usize, WorkerScratch<'pool>) -> S + Sync,
    FBody: Fn(usize, usize, &mut S) -> Result<(), E> + Sync,
    E: Send,
{
    assert_eq!(pool.n_workers, exec.n_workers, "pool sized for a different worker count");
    let len = range.end.saturating_sub(range.start);
    if len == 0 {
        return Ok(());
    }
    let n = exec.n_workers;
    // In deterministic mode every worker runs until its own first failure,
    // so the minimum over workers is exactly the first failing index; the
    // early-stop flag would let a later failure mask an earlier one.
    let early_stop = !exec.deterministic;
    let stop = AtomicBool::new(false);
    let first_error: Mutex<Option<BodyError<E>>> = Mutex::new(None);

    let record = |index: usize, error: E| {
        let mut slot = first_error.lock().unwrap();
        if slot.as_ref().map_or(true, |held| index < held.index) {
            *slot = Some(BodyError { index, error });
        }
        stop.store(true, Ordering::Release);
    };

    let chunk_budget = match exec.effective_partition() {
        Partition::Contiguous => None,
        Partition::Chunked { chunk } => Some((chunk.max(1), AtomicUsize::new(0))),
    };

    let run_worker = |w: usize| {
        let mut state = setup(w, pool.claim_worker(w));
        match &chunk_budget {
            None => {
                let block = contiguous_block(len, n, w);
                for i in block {
                    if early_stop && stop.load(Ordering::Acquire) {
                        return;
                    }
                    let index = range.start + i;
                    if let Err(e) = body(w, index, &mut state) {
                        record(index, e);
                        return;
                    }
                }
            }
            Some((chunk, next)) => {
                let n_chunks = len.div_ceil(*chunk);
                loop {
                    let c = next.fetch_add(1, Ordering::Relaxed);
                    if c >= n_chunks || (early_stop && stop.load(Ordering::Acquire)) {
                        return;
                    }
                    let lo = c * chunk;
                    let hi = (lo + chunk).min(len);
                    for i in lo..hi {
                        let index = range.start + i;
                        if let Err(e) = body(w, index, &mut state) {
                            record(index, e);
                            return;
                        }
                    }
                }
            }
        }
    };

    if n == 1 {
        run_worker(0);
    } else {
        std::thread::scope(|scope| {
            for w in 0..n {
                let run = &run_worker;
                scope.spawn(move || run(w));
            }
        });
    }

    match first_error.into_inner().unwrap() {
        Some(err) => Err(err),
        None => Ok(()),
    }
}
