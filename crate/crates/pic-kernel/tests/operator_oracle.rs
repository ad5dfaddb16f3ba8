//! The production substep against the trajectory-quadrature reference: the
//! velocity updates and every current deposit of a particle must match the
//! integrals evaluated directly in the time variable.

use pic_kernel::hp1::SliceSink;
use pic_kernel::{
    init, integrated_basis_line, Hp1Bases, Hp1Operator, InitSpec, ParticleScratch, ScratchLayout,
    ScratchPool,
};
use pic_oracle::{hp1_trajectory_reference, quadrature_integrate, TrajectoryInput};

const DT: f64 = 0.05;

#[test]
fn line_entries_match_quadrature_of_the_integrated_basis() {
    // cubic field splines integrate the degree-2 basis along x1
    let bases = Hp1Bases::new(3).unwrap();
    let (first_dof, j1d) =
        integrated_basis_line(&bases.spline_pm1, 2, 0.8, 4, 0.1, 15).unwrap();
    assert_eq!(first_dof, 0);
    assert_eq!(j1d.len(), 5);
    for (r, &value) in j1d.iter().enumerate() {
        let offset = first_dof + r as i64;
        let want = quadrature_integrate(2, 2.8, 4.1, offset);
        assert!(
            (value - want).abs() <= 1e-12,
            "entry {r}: {value} vs {want}"
        );
    }
}

fn push_one_particle(
    op: &Hp1Operator,
    particle: &mut pic_kernel::Particle,
    bfield: &[f64],
    charge_weight: f64,
    q_over_m: f64,
) -> Vec<f64> {
    let pool = ScratchPool::new(1, &op.scratch_field_sizes(), ScratchLayout::Pooled);
    let mut scratch =
        ParticleScratch::from_worker_scratch(pool.claim_worker(0), op.degree(), op.max_crossing());
    let mut deposits = vec![0.0; op.grid().n_dofs()];
    op.push_particle(
        particle,
        DT,
        bfield,
        charge_weight,
        q_over_m,
        &mut SliceSink(&mut deposits),
        &mut scratch,
    )
    .unwrap();
    deposits
}

#[test]
fn push_matches_trajectory_quadrature() {
    for (label, spec) in [
        (
            "default velocities",
            InitSpec {
                n_particles: 150,
                n_grid: [8, 4, 4],
                charge: -1.0,
                mass: 2.0,
                common_weight: 0.75,
                ..InitSpec::default()
            },
        ),
        (
            "fast velocities with crossings",
            InitSpec {
                n_particles: 150,
                n_grid: [8, 4, 4],
                charge: -1.0,
                mass: 2.0,
                common_weight: 0.75,
                ..InitSpec::fast()
            },
        ),
    ] {
        let (grid, mut group, fields) = init(&spec).unwrap();
        let op = Hp1Operator::new(grid.clone(), spec.degree).unwrap();
        let charge_weight = group.charge_weight();
        let q_over_m = group.q_over_m();
        let n_dofs = grid.n_dofs();

        for idx in 0..group.len() {
            let before = group.particles()[idx];
            let reference = hp1_trajectory_reference(&TrajectoryInput {
                n_grid: grid.n_grid(),
                domain_min: [0.0; 3],
                delta_x: grid.delta_x(),
                degree: spec.degree,
                b2: &fields.bfield_dofs[n_dofs..2 * n_dofs],
                b3: &fields.bfield_dofs[2 * n_dofs..],
                q_over_m,
                marker_charge: charge_weight * before.w,
                dt: DT,
                position: before.x,
                v1: before.v[0],
            });

            let particle = &mut group.particles_mut()[idx];
            let deposits =
                push_one_particle(&op, particle, &fields.bfield_dofs, charge_weight, q_over_m);

            let dv2 = particle.v[1] - before.v[1];
            let dv3 = particle.v[2] - before.v[2];
            assert!(
                (dv2 - reference.delta_v2).abs() <= 1e-11,
                "{label}, particle {idx}: dv2 {dv2} vs {want}",
                want = reference.delta_v2
            );
            assert!(
                (dv3 - reference.delta_v3).abs() <= 1e-11,
                "{label}, particle {idx}: dv3 {dv3} vs {want}",
                want = reference.delta_v3
            );
            for d in 0..n_dofs {
                assert!(
                    (deposits[d] - reference.j[d]).abs() <= 1e-11,
                    "{label}, particle {idx}, dof {d}: {got} vs {want}",
                    got = deposits[d],
                    want = reference.j[d]
                );
            }
        }
    }
}
