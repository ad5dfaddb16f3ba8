//! Structural invariants of the substep: conserved particle fields,
//! charge-flux consistency of the deposition, sign reversal, and
//! grid-translation equivariance.

use pic_kernel::hp1::SliceSink;
use pic_kernel::{
    init, CounterRng, ExecConfig, FieldDofs, Grid3, Hp1Operator, InitSpec, Particle,
    ParticleScratch, ScatterStrategy, ScratchLayout, ScratchPool,
};

const DT: f64 = 0.05;

fn scratch_for(op: &Hp1Operator) -> (ScratchPool, Vec<usize>) {
    (
        ScratchPool::new(1, &op.scratch_field_sizes(), ScratchLayout::Pooled),
        op.scratch_field_sizes(),
    )
}

#[test]
fn deposits_sum_to_the_signed_displacement() {
    // includes multi-cell and backward crossings via the fast preset
    let spec = InitSpec {
        n_particles: 2000,
        charge: -1.0,
        common_weight: 0.5,
        ..InitSpec::fast()
    };
    let (grid, mut group, fields) = init(&spec).unwrap();
    let op = Hp1Operator::new(grid.clone(), spec.degree).unwrap();
    let charge_weight = group.charge_weight();
    let q_over_m = group.q_over_m();
    let (pool, _) = scratch_for(&op);
    let mut scratch =
        ParticleScratch::from_worker_scratch(pool.claim_worker(0), op.degree(), op.max_crossing());
    let mut deposits = vec![0.0; grid.n_dofs()];

    for particle in group.particles_mut() {
        deposits.fill(0.0);
        let marker = charge_weight * particle.w;
        let displacement = DT * particle.v[0];
        op.push_particle(
            particle,
            DT,
            &fields.bfield_dofs,
            charge_weight,
            q_over_m,
            &mut SliceSink(&mut deposits),
            &mut scratch,
        )
        .unwrap();
        let total: f64 = deposits.iter().sum();
        let want = marker * displacement;
        assert!(
            (total - want).abs() <= 1e-12 * want.abs().max(1e-30),
            "deposited {total} vs marker * displacement {want}"
        );
    }
}

#[test]
fn conserved_particle_fields_are_bitwise_invariant() {
    let spec = InitSpec {
        n_particles: 500,
        ..InitSpec::default()
    };
    let (grid, mut group, mut fields) = init(&spec).unwrap();
    let op = Hp1Operator::new(grid, spec.degree).unwrap();
    let before: Vec<Particle> = group.particles().to_vec();
    for _ in 0..3 {
        op.step_serial(&mut group, &mut fields, DT).unwrap();
    }
    for (a, b) in before.iter().zip(group.particles()) {
        assert_eq!(a.v[0], b.v[0]);
        assert_eq!(a.x[1], b.x[1]);
        assert_eq!(a.x[2], b.x[2]);
        assert_eq!(a.w, b.w);
    }
}

#[test]
fn zero_field_still_advects_and_deposits() {
    let spec = InitSpec {
        n_particles: 200,
        ..InitSpec::default()
    };
    let (grid, mut group, _) = init(&spec).unwrap();
    let mut fields = FieldDofs::zeros(grid.n_dofs());
    let op = Hp1Operator::new(grid.clone(), spec.degree).unwrap();
    let before: Vec<Particle> = group.particles().to_vec();
    op.step_serial(&mut group, &mut fields, DT).unwrap();
    for (a, b) in before.iter().zip(group.particles()) {
        assert_eq!(a.v, b.v, "velocities must not move in a zero field");
        let advected = grid.wrap_axis(a.x[0] + DT * a.v[0], 0);
        assert_eq!(b.x[0], advected);
    }
    let current: f64 = fields.j_dofs_local.iter().map(|v| v.abs()).sum();
    assert!(current > 0.0, "current must still be deposited");
}

#[test]
fn stationary_particles_are_untouched() {
    let spec = InitSpec {
        n_particles: 100,
        v_scale: 2.0,
        ..InitSpec::default()
    };
    let (grid, mut group, mut fields) = init(&spec).unwrap();
    for particle in group.particles_mut() {
        particle.v[0] = 0.0;
    }
    let op = Hp1Operator::new(grid, spec.degree).unwrap();
    let before: Vec<Particle> = group.particles().to_vec();
    op.step_serial(&mut group, &mut fields, DT).unwrap();
    assert_eq!(before, group.particles());
    assert!(fields.j_dofs_local.iter().all(|&v| v == 0.0));
}

#[test]
fn reversed_step_negates_deposits_and_velocity_increments() {
    // Dyadic state: positions on a 1/1024 lattice, dt = 1/16 and v1 a
    // multiple of 1/64, so x + dt*v1 and its retrace are exact and the
    // deposits must negate bitwise. Velocity storage rounds once per
    // direction, hence the tolerance there.
    let dt = 0.0625;
    let spec = InitSpec {
        n_particles: 1,
        charge: -1.0,
        ..InitSpec::default()
    };
    let (grid, _, fields) = init(&spec).unwrap();
    let op = Hp1Operator::new(grid.clone(), spec.degree).unwrap();
    let charge_weight = -1.0;
    let q_over_m = -1.0;
    let (pool, _) = scratch_for(&op);
    let mut scratch =
        ParticleScratch::from_worker_scratch(pool.claim_worker(0), op.degree(), op.max_crossing());
    let mut fwd = vec![0.0; grid.n_dofs()];
    let mut bwd = vec![0.0; grid.n_dofs()];
    let rng = CounterRng::new(42);

    for trial in 0..300u64 {
        // x1 in [1/4, 3/4), displacement up to 1/8 either way: no wrap
        let k = 256 + (rng.u64_at(3 * trial) % 512) as i64;
        let m = (rng.u64_at(3 * trial + 1) % 17) as i64 - 8;
        let original = Particle {
            x: [
                k as f64 / 1024.0,
                rng.unit_f64_at(3 * trial + 2),
                rng.unit_f64_at(3 * trial + 2) * 0.9,
            ],
            v: [m as f64 / 64.0, 0.3, -0.2],
            w: 1.0,
        };
        fwd.fill(0.0);
        bwd.fill(0.0);

        let mut particle = original;
        op.push_particle(
            &mut particle,
            dt,
            &fields.bfield_dofs,
            charge_weight,
            q_over_m,
            &mut SliceSink(&mut fwd),
            &mut scratch,
        )
        .unwrap();
        // dt * v1 = (1/16) * (m/64) = m/1024, exactly on the lattice
        assert_eq!(particle.x[0], (k + m) as f64 / 1024.0);
        // retrace from the post state with the time step negated
        op.push_particle(
            &mut particle,
            -dt,
            &fields.bfield_dofs,
            charge_weight,
            q_over_m,
            &mut SliceSink(&mut bwd),
            &mut scratch,
        )
        .unwrap();

        for (f, b) in fwd.iter().zip(&bwd) {
            assert_eq!(*f, -*b, "reverse deposits must negate exactly");
        }
        assert_eq!(particle.x[0], original.x[0]);
        assert!((particle.v[1] - original.v[1]).abs() <= 1e-13 * original.v[1].abs().max(1.0));
        assert!((particle.v[2] - original.v[2]).abs() <= 1e-13 * original.v[2].abs().max(1.0));
    }
}

#[test]
fn translating_particles_and_field_by_one_cell_permutes_the_current() {
    // Unit cell sizes and positions on a 1/1024 lattice keep every shifted
    // coordinate exactly representable, so equality is exact, not
    // approximate.
    let n_grid = [4usize, 3, 2];
    let grid = Grid3::from_lengths(n_grid, [4.0, 3.0, 2.0]).unwrap();
    let op = Hp1Operator::new(grid.clone(), 3).unwrap();
    let rng = CounterRng::new(99);
    let n_dofs = grid.n_dofs();

    let lattice = |counter: u64, cells: usize| -> f64 {
        let cell = (rng.u64_at(counter) % cells as u64) as f64;
        let frac = (rng.u64_at(counter.wrapping_add(1 << 40)) % 1024) as f64 / 1024.0;
        cell + frac
    };

    let particles: Vec<Particle> = (0..400)
        .map(|i| {
            let base = i as u64 * 8;
            Particle {
                x: [lattice(base, 4), lattice(base + 2, 3), lattice(base + 4, 2)],
                v: [
                    // multiples of 1/1024 per dt keep x + dt*v on the lattice
                    ((rng.u64_at(base + 6) % 2048) as f64 - 1024.0) / 1024.0 / DT * (1.0 / 1024.0),
                    rng.symmetric_f64_at(base + 7, 1.0),
                    rng.symmetric_f64_at(base + 7, 1.0),
                ],
                w: 1.0,
            }
        })
        .collect();

    let bfield: Vec<f64> = (0..3 * n_dofs)
        .map(|i| rng.symmetric_f64_at(1_000_000 + i as u64, 1.0))
        .collect();

    // shifted copies: x1 + 1 cell, field blocks cyclically shifted along i1
    let shifted_particles: Vec<Particle> = particles
        .iter()
        .map(|p| {
            let mut s = *p;
            s.x[0] = grid.wrap_axis(p.x[0] + 1.0, 0);
            s
        })
        .collect();
    let mut shifted_bfield = vec![0.0; 3 * n_dofs];
    for block in 0..3 {
        for i3 in 0..n_grid[2] as i64 {
            for i2 in 0..n_grid[1] as i64 {
                for i1 in 0..n_grid[0] as i64 {
                    let from = block * n_dofs + grid.tensor_index(i1, i2, i3);
                    let to = block * n_dofs + grid.tensor_index(i1 + 1, i2, i3);
                    shifted_bfield[to] = bfield[from];
                }
            }
        }
    }

    let run = |particles: Vec<Particle>, bfield: Vec<f64>| {
        let mut group = pic_kernel::ParticleGroup::new(particles, 1.0, -1.0, 1.0);
        let mut fields = FieldDofs::new(bfield, n_dofs).unwrap();
        op.step(
            &mut group,
            &mut fields,
            DT,
            &ExecConfig::serial(),
            ScatterStrategy::Replicated,
        )
        .unwrap();
        (group, fields.j_dofs_local.clone())
    };

    let (group_a, j_a) = run(particles, bfield);
    let (group_b, j_b) = run(shifted_particles, shifted_bfield);

    for (a, b) in group_a.particles().iter().zip(group_b.particles()) {
        assert_eq!(a.v, b.v, "velocity updates must be translation invariant");
        assert_eq!(grid.wrap_axis(a.x[0] + 1.0, 0), b.x[0]);
    }
    for i3 in 0..n_grid[2] as i64 {
        for i2 in 0..n_grid[1] as i64 {
            for i1 in 0..n_grid[0] as i64 {
                let from = grid.tensor_index(i1, i2, i3);
                let to = grid.tensor_index(i1 + 1, i2, i3);
                assert_eq!(j_a[from], j_b[to], "current must shift with the state");
            }
        }
    }
}
