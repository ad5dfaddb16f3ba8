//! Shared-memory particle-in-cell kernel built on compatible spline finite
//! elements: the x1 substep of the Hamiltonian-splitting particle push
//! (position advance, magnetic velocity updates, and charge-conserving
//! current deposition), with pluggable worker execution and vector-reduction
//! strategies.
//!
//! The crate is organized around the hot loop of the method:
//!
//! * [`spline`] builds uniform B-splines and their primitives in
//!   piecewise-polynomial form, evaluated by Horner's scheme.
//! * [`grid`] and [`particles`] hold the periodic mesh, the
//!   array-of-structures particle ensemble, and field coefficients.
//! * [`hp1`] implements the substep itself, including the variable-length
//!   trajectory-integrated deposition.
//! * [`exec`] partitions particles over workers with pooled per-worker
//!   scratch; [`scatter`] merges concurrent deposits under replicated,
//!   padded, pooled, or atomic reduction strategies.
//! * [`init`] produces seeded, platform-independent benchmark states.
//!
//! The `pic-bench` binary in the same workspace drives timed sweeps and
//! verification runs against the serial reference.

pub mod exec;
pub mod grid;
pub mod hp1;
pub mod init;
pub mod particles;
pub mod scatter;
pub mod spline;

pub use exec::{ExecConfig, Partition, ScratchLayout, ScratchPool, WORKER_ENV_VAR};
pub use grid::{wrap_periodic, Grid3};
pub use hp1::{integrated_basis_line, Hp1Bases, Hp1Operator, ParticleScratch, StepTiming};
pub use init::{init, CounterRng, InitSpec};
pub use particles::{FieldDofs, Particle, ParticleGroup};
pub use scatter::{ScatterAccumulator, ScatterStrategy};
pub use spline::PPSplineBasis;

#[cfg(doctest)]
mod book {
    //! Every code block in the guide compiles and runs as a doctest, so the
    //! book cannot drift from the library.
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/splines.md")]
    mod splines {}
    #[doc = include_str!("../../../book/src/operator.md")]
    mod operator {}
    #[doc = include_str!("../../../book/src/execution.md")]
    mod execution {}
    #[doc = include_str!("../../../book/src/reduction.md")]
    mod reduction {}
    #[doc = include_str!("../../../book/src/benchmarking.md")]
    mod benchmarking {}
}
