//! Particle ensemble and field coefficient storage.
//!
//! Particles are kept as an array of structures: one record per
//! macro-particle holding phase-space position and weight. The weight is
//! constant in time; only `x1`, `v2` and `v3` change under the substep
//! implemented here.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("bfield_dofs length {got} does not match 3 * n_dofs = {want}")]
    BFieldLength { got: usize, want: usize },
}

/// One macro-particle: position, velocity, weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub x: [f64; 3],
    pub v: [f64; 3],
    pub w: f64,
}

/// All macro-particles of one species, with the species charge and mass and
/// a global weight factor shared by every particle.
#[derive(Debug, Clone)]
pub struct ParticleGroup {
    particles: Vec<Particle>,
    pub common_weight: f64,
    pub charge: f64,
    pub mass: f64,
}

impl ParticleGroup {
    pub fn new(particles: Vec<Particle>, common_weight: f64, charge: f64, mass: f64) -> Self {
        assert!(mass != 0.0, "species mass must be nonzero");
        Self {
            particles,
            common_weight,
            charge,
            mass,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn particles_mut(&mut self) -> &mut [Particle] {
        &mut self.particles
    }

    pub fn q_over_m(&self) -> f64 {
        self.charge / self.mass
    }

    /// Charge factor common to all of the species' deposits; the
    /// per-particle weight completes the marker charge.
    pub fn charge_weight(&self) -> f64 {
        self.charge * self.common_weight
    }
}

/// Magnetic-field spline coefficients and the local current accumulation
/// vector.
///
/// `bfield_dofs` holds the three component blocks back to back in the order
/// `[b1 | b2 | b3]`, each `n_dofs` long. `j_dofs_local` is the single
/// component-1 current vector this substep accumulates into.
#[derive(Debug, Clone)]
pub struct FieldDofs {
    pub bfield_dofs: Vec<f64>,
    pub j_dofs_local: Vec<f64>,
    n_dofs: usize,
}

impl FieldDofs {
    pub fn new(bfield_dofs: Vec<f64>, n_dofs: usize) -> Result<Self, FieldError> {
        if bfield_dofs.len() != 3 * n_dofs {
            return Err(FieldError::BFieldLength {
                got: bfield_dofs.len(),
                want: 3 * n_dofs,
            });
        }
        Ok(Self {
            bfield_dofs,
            j_dofs_local: vec![0.0; n_dofs],
            n_dofs,
        })
    }

    pub fn zeros(n_dofs: usize) -> Self {
        Self {
            bfield_dofs: vec![0.0; 3 * n_dofs],
            j_dofs_local: vec![0.0; n_dofs],
            n_dofs,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    /// Coefficient block of one magnetic-field component, `k` in `0..3`.
    pub fn b_component(&self, k: usize) -> &[f64] {
        &self.bfield_dofs[k * self.n_dofs..(k + 1) * self.n_dofs]
    }

    pub fn b_component_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.bfield_dofs[k * self.n_dofs..(k + 1) * self.n_dofs]
    }

    /// Simultaneous read access to the magnetic field and write access to
    /// the current vector.
    pub fn split_b_j(&mut self) -> (&[f64], &mut [f64]) {
        (&self.bfield_dofs, &mut self.j_dofs_local)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_blocks_are_ordered_b1_b2_b3() {
        let n = 4;
        let mut b = vec![0.0; 3 * n];
        for (i, v) in b.iter_mut().enumerate() {
            *v = i as f64;
        }
        let fields = FieldDofs::new(b, n).unwrap();
        assert_eq!(fields.b_component(0), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(fields.b_component(1), &[4.0, 5.0, 6.0, 7.0]);
        assert_eq!(fields.b_component(2), &[8.0, 9.0, 10.0, 11.0]);
        assert_eq!(fields.j_dofs_local.len(), n);
    }

    #[test]
    fn field_length_checked() {
        assert!(FieldDofs::new(vec![0.0; 5], 4).is_err());
    }

    #[test]
    fn charge_weight_combines_species_factors() {
        let group = ParticleGroup::new(Vec::new(), 0.5, -2.0, 1.0);
        assert_eq!(group.charge_weight(), -1.0);
        assert_eq!(group.q_over_m(), -2.0);
        assert!(group.is_empty());
    }
}
