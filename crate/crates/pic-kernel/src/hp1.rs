//! The x1 substep of the Hamiltonian-splitting particle push: advance `x1`
//! by `v1`, update `v2` and `v3` from the magnetic field, and deposit the
//! first component of the current density.
//!
//! Along `x1` the field basis enters through its integral over the particle
//! trajectory rather than a point value. With constant `v1` the time
//! integral transforms into a spatial integral from the old to the new
//! position, which is evaluated as a difference of spline primitives. Its
//! support grows with the number of cells crossed, so the inner deposition
//! loop has a variable length of `|cell_new - cell_old| + p` entries.
//!
//! Per tensor direction the update mixes spline degrees: the integrated
//! direction carries degree `p - 1`, and the two point-evaluated directions
//! carry degree `p` or `p - 1` depending on which field component is being
//! gathered. The degree-`(p-1)` basis functions on a cell line up with the
//! degree-`p` ones shifted by one slot, so a single set of flat indices
//! serves the current deposit and both field gathers; the kernel precomputes
//! those indices once per particle and reuses the localization throughout.

use std::time::Instant;

use thiserror::Error;

use crate::exec::{parallel_for_particles, ExecConfig, ScratchLayout, ScratchPool, WorkerScratch};
use crate::grid::Grid3;
use crate::particles::{FieldDofs, Particle, ParticleGroup};
use crate::scatter::{ScatterAccumulator, ScatterError, ScatterStrategy, WorkerDeposit};
use crate::spline::{PPSplineBasis, SplineError};

#[derive(Debug, Error, PartialEq)]
pub enum OperatorError {
    #[error("field spline degree must be at least 1")]
    DegreeTooSmall,
    #[error(transparent)]
    Spline(#[from] SplineError),
}

#[derive(Debug, Error, PartialEq)]
pub enum PushError {
    #[error("trajectory crosses {cells} cells along x1, more than the allowed {max}; dt * v1 exceeds the safety bound")]
    StepTooLarge { cells: usize, max: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum StepError {
    #[error("particle {index}: {source}")]
    Particle {
        index: usize,
        #[source]
        source: PushError,
    },
    #[error(transparent)]
    Scatter(#[from] ScatterError),
    #[error("deterministic mode requires a reproducible reduction, not {strategy:?}")]
    NondeterministicStrategy { strategy: ScatterStrategy },
}

/// Receives per-index current deposits from the push kernel.
pub trait DepositSink {
    fn deposit(&mut self, index: usize, value: f64);
}

/// Serial sink: adds straight into a dense vector.
pub struct SliceSink<'a>(pub &'a mut [f64]);

impl DepositSink for SliceSink<'_> {
    #[inline]
    fn deposit(&mut self, index: usize, value: f64) {
        self.0[index] += value;
    }
}

impl DepositSink for WorkerDeposit<'_> {
    #[inline]
    fn deposit(&mut self, index: usize, value: f64) {
        self.add(index, value);
    }
}

/// The degree-`p` and degree-`(p-1)` bases used by the substep.
#[derive(Debug, Clone)]
pub struct Hp1Bases {
    pub spline_p: PPSplineBasis,
    pub spline_pm1: PPSplineBasis,
}

impl Hp1Bases {
    pub fn new(degree: usize) -> Result<Self, OperatorError> {
        if degree == 0 {
            return Err(OperatorError::DegreeTooSmall);
        }
        Ok(Self {
            spline_p: PPSplineBasis::new(degree)?,
            spline_pm1: PPSplineBasis::new(degree - 1)?,
        })
    }
}

/// Signed integrals of the degree-`(p-1)` basis functions over one axis
/// interval, as primitive differences, in cell units.
///
/// Returns the index of the first contributing basis function and the
/// number of entries written; entry `r` is the integral of basis function
/// `first_dof + r`. The sum of the entries telescopes to the signed
/// displacement in cell units.
pub fn integrated_basis_line(
    basis_pm1: &PPSplineBasis,
    cell_old: i64,
    xi_old: f64,
    cell_new: i64,
    xi_new: f64,
    max_crossing: usize,
) -> Result<(i64, Vec<f64>), PushError> {
    let q = basis_pm1.degree();
    let mut prim_old = vec![0.0; q + 2];
    let mut prim_new = vec![0.0; q + 2];
    let mut j1d = vec![0.0; (cell_new - cell_old).unsigned_abs() as usize + q + 1];
    let (first_dof, local_size) = line_into(
        basis_pm1,
        cell_old,
        xi_old,
        cell_new,
        xi_new,
        max_crossing,
        &mut prim_old,
        &mut prim_new,
        &mut j1d,
    )?;
    j1d.truncate(local_size);
    Ok((first_dof, j1d))
}

#[allow(clippy::too_many_arguments)]
fn line_into(
    basis_pm1: &PPSplineBasis,
    cell_old: i64,
    xi_old: f64,
    cell_new: i64,
    xi_new: f64,
    max_crossing: usize,
    prim_old: &mut [f64],
    prim_new: &mut [f64],
    j1d: &mut [f64],
) -> Result<(i64, usize), PushError> {
    let q = basis_pm1.degree();
    let crossing = (cell_new - cell_old).unsigned_abs() as usize;
    if crossing > max_crossing {
        return Err(PushError::StepTooLarge {
            cells: crossing,
            max: max_crossing,
        });
    }
    basis_pm1.eval_primitive_into(xi_old, prim_old);
    basis_pm1.eval_primitive_into(xi_new, prim_new);
    let first_dof = cell_old.min(cell_new) - q as i64;
    let local_size = crossing + q + 1;
    for r in 0..local_size {
        let start = first_dof + r as i64;
        j1d[r] = primitive_lookup(prim_new, q, cell_new, start)
            - primitive_lookup(prim_old, q, cell_old, start);
    }
    Ok((first_dof, local_size))
}

/// Primitive of the basis function starting at `basis_start`, read from the
/// vector evaluated at `(cell, xi)`: zero ahead of the support, saturated to
/// one behind it.
#[inline]
fn primitive_lookup(prim: &[f64], q: usize, cell: i64, basis_start: i64) -> f64 {
    let piece = cell - basis_start;
    if piece < 0 {
        0.0
    } else if piece > q as i64 {
        1.0
    } else {
        prim[q + 1 - piece as usize]
    }
}

/// Per-worker evaluation workspace, carved out of one scratch pool block
/// before the parallel dispatch; every array is private to its worker and
/// its size is fixed up front.
pub struct ParticleScratch<'a> {
    x_old: &'a mut [f64],
    x_new: &'a mut [f64],
    vi: &'a mut [f64],
    wi: &'a mut [f64],
    spline_p: [&'a mut [f64]; 3],
    spline_pm1: [&'a mut [f64]; 3],
    prim_old: &'a mut [f64],
    prim_new: &'a mut [f64],
    j1d: &'a mut [f64],
    index_x: Vec<usize>,
    startjk: Vec<usize>,
}

impl<'a> ParticleScratch<'a> {
    /// Builds the workspace from the worker's scratch region handed out by
    /// the execution layer. `degree` and `max_crossing` must match the
    /// operator that sized the pool.
    pub fn from_worker_scratch(
        region: WorkerScratch<'a>,
        degree: usize,
        max_crossing: usize,
    ) -> Self {
        let p = degree;
        let max_line = max_crossing + p;
        let mut fields = region.into_fields();
        assert_eq!(fields.len(), 9, "scratch pool not sized by scratch_field_sizes");
        let j1d = fields.pop().unwrap();
        let prim_new = fields.pop().unwrap();
        let prim_old = fields.pop().unwrap();
        let pm1_block = fields.pop().unwrap();
        let p_block = fields.pop().unwrap();
        let wi = fields.pop().unwrap();
        let vi = fields.pop().unwrap();
        let x_new = fields.pop().unwrap();
        let x_old = fields.pop().unwrap();
        assert_eq!(j1d.len(), max_line);
        assert_eq!(p_block.len(), 3 * (p + 1));
        assert_eq!(pm1_block.len(), 3 * p);

        let (p0, rest) = p_block.split_at_mut(p + 1);
        let (p1, p2) = rest.split_at_mut(p + 1);
        let (m0, rest) = pm1_block.split_at_mut(p);
        let (m1, m2) = rest.split_at_mut(p);

        Self {
            x_old,
            x_new,
            vi,
            wi,
            spline_p: [p0, p1, p2],
            spline_pm1: [m0, m1, m2],
            prim_old,
            prim_new,
            j1d,
            index_x: vec![0; max_line],
            startjk: vec![0; (p + 1) * (p + 1)],
        }
    }
}

/// Timing split of one operator application: the particle loop and the
/// reduction that merges per-worker deposits.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepTiming {
    pub compute_seconds: f64,
    pub contribute_seconds: f64,
}

/// The x1 substep operator for one grid and spline degree.
#[derive(Debug, Clone)]
pub struct Hp1Operator {
    grid: Grid3,
    bases: Hp1Bases,
    max_crossing: usize,
}

impl Hp1Operator {
    /// Default maximum per-step crossing is one full period minus a cell;
    /// anything larger means the spatial integral transform no longer sees
    /// a contiguous trajectory, so it is an error rather than a wrap.
    pub fn new(grid: Grid3, degree: usize) -> Result<Self, OperatorError> {
        let max_crossing = grid.n_grid()[0] - 1;
        Self::with_max_crossing(grid, degree, max_crossing)
    }

    pub fn with_max_crossing(
        grid: Grid3,
        degree: usize,
        max_crossing: usize,
    ) -> Result<Self, OperatorError> {
        Ok(Self {
            grid,
            bases: Hp1Bases::new(degree)?,
            max_crossing,
        })
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn bases(&self) -> &Hp1Bases {
        &self.bases
    }

    pub fn degree(&self) -> usize {
        self.bases.spline_p.degree()
    }

    pub fn max_crossing(&self) -> usize {
        self.max_crossing
    }

    /// Sizes of the scratch fields a worker needs, in declaration order;
    /// the pool handed to the dispatch must be built from exactly these.
    pub fn scratch_field_sizes(&self) -> Vec<usize> {
        let p = self.degree();
        let max_line = self.max_crossing + p;
        vec![3, 3, 3, 1, 3 * (p + 1), 3 * p, p + 1, p + 1, max_line]
    }

    /// Total per-worker scratch slots, known before any dispatch.
    pub fn scratch_elements(&self) -> usize {
        self.scratch_field_sizes().iter().sum()
    }

    /// Pushes one particle: advances `x1`, updates `v2`/`v3` from the
    /// magnetic field, and deposits its component-1 current through `sink`.
    ///
    /// `bfield` is the full three-block coefficient vector; `charge_weight`
    /// is species charge times common weight (the per-particle weight
    /// completes the marker charge).
    pub fn push_particle(
        &self,
        particle: &mut Particle,
        dt: f64,
        bfield: &[f64],
        charge_weight: f64,
        q_over_m: f64,
        sink: &mut impl DepositSink,
        scratch: &mut ParticleScratch<'_>,
    ) -> Result<(), PushError> {
        let n_dofs = self.grid.n_dofs();
        assert_eq!(bfield.len(), 3 * n_dofs);
        let b2 = &bfield[n_dofs..2 * n_dofs];
        let b3 = &bfield[2 * n_dofs..];
        self.push_kernel(particle, dt, b2, b3, charge_weight, q_over_m, sink, scratch)
    }

    #[allow(clippy::too_many_arguments)]
    fn push_kernel(
        &self,
        particle: &mut Particle,
        dt: f64,
        b2: &[f64],
        b3: &[f64],
        charge_weight: f64,
        q_over_m: f64,
        sink: &mut impl DepositSink,
        scratch: &mut ParticleScratch<'_>,
    ) -> Result<(), PushError> {
        let p = self.degree();
        let grid = &self.grid;

        scratch.x_old.copy_from_slice(&particle.x);
        scratch.vi.copy_from_slice(&particle.v);
        scratch.wi[0] = particle.w;

        let displacement = dt * scratch.vi[0];
        if displacement == 0.0 {
            // empty trajectory: nothing moves, nothing is deposited
            return Ok(());
        }
        scratch.x_new[0] = scratch.x_old[0] + displacement;
        scratch.x_new[1] = scratch.x_old[1];
        scratch.x_new[2] = scratch.x_old[2];

        // Localize once per particle; every basis evaluation below reuses
        // these cells and offsets. The new x1 stays unwrapped so the
        // primitive difference sees one contiguous interval.
        let (c1_old, xi1_old) = grid.locate_unbounded(scratch.x_old[0], 0);
        let (c1_new, xi1_new) = grid.locate_unbounded(scratch.x_new[0], 0);
        let (c2, xi2) = grid.locate_unbounded(scratch.x_old[1], 1);
        let (c3, xi3) = grid.locate_unbounded(scratch.x_old[2], 2);

        let (first_dof, local_size) = line_into(
            &self.bases.spline_pm1,
            c1_old,
            xi1_old,
            c1_new,
            xi1_new,
            self.max_crossing,
            scratch.prim_old,
            scratch.prim_new,
            scratch.j1d,
        )?;
        // physical cell width enters exactly once, here
        let dx1 = grid.delta_x()[0];
        for v in &mut scratch.j1d[..local_size] {
            *v *= dx1;
        }

        self.bases.spline_p.eval_basis_into(xi2, scratch.spline_p[1]);
        self.bases.spline_p.eval_basis_into(xi3, scratch.spline_p[2]);
        self.bases.spline_pm1.eval_basis_into(xi2, scratch.spline_pm1[1]);
        self.bases.spline_pm1.eval_basis_into(xi3, scratch.spline_pm1[2]);

        // Precompute the flat indices: the x1 contribution and the
        // (x2, x3) base offset combine by addition.
        let n1 = grid.n_grid()[0] as i64;
        for r in 0..local_size {
            scratch.index_x[r] = (first_dof + r as i64).rem_euclid(n1) as usize;
        }
        for k in 0..=p {
            for j in 0..=p {
                scratch.startjk[k * (p + 1) + j] = grid.tensor_index(
                    0,
                    c2 - p as i64 + j as i64,
                    c3 - p as i64 + k as i64,
                );
            }
        }

        let marker_charge = charge_weight * scratch.wi[0];
        let mut dv2 = 0.0;
        let mut dv3 = 0.0;
        for k in 0..=p {
            let mut v2_k = 0.0;
            let mut v3_k = 0.0;
            for j in 0..=p {
                let spline_jk = scratch.spline_p[1][j] * scratch.spline_p[2][k];
                let charge_jk = marker_charge * spline_jk;
                let start = scratch.startjk[k * (p + 1) + j];
                let mut line_b3 = 0.0;
                let mut line_b2 = 0.0;
                for r in 0..local_size {
                    let index = start + scratch.index_x[r];
                    let line = scratch.j1d[r];
                    sink.deposit(index, line * charge_jk);
                    line_b3 += b3[index] * line;
                    line_b2 += b2[index] * line;
                }
                // The degree-(p-1) value in slot j-1 belongs to the same
                // flat index as the degree-p value in slot j.
                if j > 0 {
                    v2_k += line_b3 * scratch.spline_pm1[1][j - 1];
                }
                v3_k += line_b2 * scratch.spline_p[1][j];
            }
            dv2 += v2_k * scratch.spline_p[2][k];
            if k > 0 {
                dv3 += v3_k * scratch.spline_pm1[2][k - 1];
            }
        }
        scratch.vi[1] -= q_over_m * dv2;
        scratch.vi[2] += q_over_m * dv3;

        // wrap the stored position only after deposition
        particle.x[0] = grid.wrap_axis(scratch.x_new[0], 0);
        particle.v[1] = scratch.vi[1];
        particle.v[2] = scratch.vi[2];
        Ok(())
    }

    /// Applies the substep to every particle under the given execution
    /// policy and reduction strategy, leaving the merged current in
    /// `fields.j_dofs_local` (zeroed and rewritten internally).
    pub fn step(
        &self,
        group: &mut ParticleGroup,
        fields: &mut FieldDofs,
        dt: f64,
        exec: &ExecConfig,
        strategy: ScatterStrategy,
    ) -> Result<StepTiming, StepError> {
        if exec.deterministic && !strategy.is_deterministic() {
            return Err(StepError::NondeterministicStrategy { strategy });
        }
        let n_dofs = self.grid.n_dofs();
        assert_eq!(fields.n_dofs(), n_dofs, "fields sized for a different grid");
        let n_particles = group.len();
        let q_over_m = group.q_over_m();
        let charge_weight = group.charge_weight();
        let p = self.degree();
        let max_crossing = self.max_crossing;

        let accumulator = ScatterAccumulator::new(strategy, n_dofs, exec.n_workers)?;
        let pool = ScratchPool::new(exec.n_workers, &self.scratch_field_sizes(), exec.scratch_layout);

        let bfield = &fields.bfield_dofs;
        let b2 = &bfield[n_dofs..2 * n_dofs];
        let b3 = &bfield[2 * n_dofs..];
        let particles = SyncSliceMut::new(group.particles_mut());

        let start = Instant::now();
        parallel_for_particles(
            0..n_particles,
            exec,
            &pool,
            |worker, region| {
                (
                    ParticleScratch::from_worker_scratch(region, p, max_crossing),
                    accumulator.worker(worker),
                )
            },
            |_, index, (scratch, sink)| {
                // The execution layer hands out every index exactly once,
                // so this worker is the sole writer of the particle.
                let particle = unsafe { particles.get_mut(index) };
                self.push_kernel(particle, dt, b2, b3, charge_weight, q_over_m, sink, scratch)
            },
        )
        .map_err(|e| StepError::Particle {
            index: e.index,
            source: e.error,
        })?;
        let compute_seconds = start.elapsed().as_secs_f64();

        let start = Instant::now();
        accumulator.contribute_into(&mut fields.j_dofs_local);
        let contribute_seconds = start.elapsed().as_secs_f64();

        Ok(StepTiming {
            compute_seconds,
            contribute_seconds,
        })
    }

    /// Plain serial loop depositing straight into `fields.j_dofs_local`;
    /// the reference every parallel configuration is verified against.
    pub fn step_serial(
        &self,
        group: &mut ParticleGroup,
        fields: &mut FieldDofs,
        dt: f64,
    ) -> Result<StepTiming, StepError> {
        let n_dofs = self.grid.n_dofs();
        assert_eq!(fields.n_dofs(), n_dofs, "fields sized for a different grid");
        let q_over_m = group.q_over_m();
        let charge_weight = group.charge_weight();

        let pool = ScratchPool::new(1, &self.scratch_field_sizes(), ScratchLayout::Pooled);
        let mut scratch =
            ParticleScratch::from_worker_scratch(pool.claim_worker(0), self.degree(), self.max_crossing);

        let (bfield, j) = fields.split_b_j();
        let b2 = &bfield[n_dofs..2 * n_dofs];
        let b3 = &bfield[2 * n_dofs..];
        j.fill(0.0);
        let mut sink = SliceSink(j);

        let start = Instant::now();
        for (index, particle) in group.particles_mut().iter_mut().enumerate() {
            self.push_kernel(particle, dt, b2, b3, charge_weight, q_over_m, &mut sink, &mut scratch)
                .map_err(|source| StepError::Particle { index, source })?;
        }
        Ok(StepTiming {
            compute_seconds: start.elapsed().as_secs_f64(),
            contribute_seconds: 0.0,
        })
    }
}

/// Shared mutable slice for disjoint-index access from multiple workers.
struct SyncSliceMut<T> {
    ptr: *mut T,
    len: usize,
}

unsafe impl<T: Send> Sync for SyncSliceMut<T> {}
unsafe impl<T: Send> Send for SyncSliceMut<T> {}

impl<T> SyncSliceMut<T> {
    fn new(slice: &mut [T]) -> Self {
        Self {
            ptr: slice.as_mut_ptr(),
            len: slice.len(),
        }
    }

    /// Caller must guarantee no two workers use the same index.
    #[allow(clippy::mut_from_ref)]
    unsafe fn get_mut(&self, index: usize) -> &mut T {
        debug_assert!(index < self.len);
        unsafe { &mut *self.ptr.add(index) }
    }
}
