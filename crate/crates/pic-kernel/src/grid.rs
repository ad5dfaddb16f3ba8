//! Periodic tensor-product grid: cell counts, extents, and the flat indexing
//! of spline degrees of freedom.
//!
//! Under periodic boundary conditions every axis carries as many spline
//! degrees of freedom as it has cells, so a scalar field component is a
//! single vector of `n_dofs = n1 * n2 * n3` coefficients. The flat index
//! runs i1 fastest, matching the inner deposition loop along the first axis.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("cells per axis must be positive, got {n:?}")]
    EmptyAxis { n: [usize; 3] },
    #[error("axis {axis} extent [{min}, {max}) is not a finite non-empty interval")]
    BadExtent { axis: usize, min: f64, max: f64 },
    #[error("coordinate {x} on axis {axis} is not finite")]
    NonFiniteCoordinate { axis: usize, x: f64 },
}

/// Wraps `x` into `[0, L)` periodically.
pub fn wrap_periodic(x: f64, length: f64) -> f64 {
    debug_assert!(length > 0.0);
    let mut r = x % length;
    if r < 0.0 {
        r += length;
    }
    // x % L of a slightly negative x can round up to exactly L
    if r >= length {
        r = 0.0;
    }
    r
}

/// Periodic tensor grid in three dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3 {
    n_grid: [usize; 3],
    domain: [[f64; 2]; 3],
    lx: [f64; 3],
    delta_x: [f64; 3],
    rdelta_x: [f64; 3],
    n_dofs: usize,
}

impl Grid3 {
    pub fn new(n_grid: [usize; 3], domain: [[f64; 2]; 3]) -> Result<Self, GridError> {
        if n_grid.iter().any(|&n| n == 0) {
            return Err(GridError::EmptyAxis { n: n_grid });
        }
        let mut lx = [0.0; 3];
        let mut delta_x = [0.0; 3];
        let mut rdelta_x = [0.0; 3];
        for k in 0..3 {
            let [min, max] = domain[k];
            if !min.is_finite() || !max.is_finite() || max <= min {
                return Err(GridError::BadExtent { axis: k, min, max });
            }
            lx[k] = max - min;
            delta_x[k] = lx[k] / n_grid[k] as f64;
            rdelta_x[k] = 1.0 / delta_x[k];
        }
        Ok(Self {
            n_grid,
            domain,
            lx,
            delta_x,
            rdelta_x,
            n_dofs: n_grid[0] * n_grid[1] * n_grid[2],
        })
    }

    /// Grid over `[0, lx_k)` per axis.
    pub fn from_lengths(n_grid: [usize; 3], lx: [f64; 3]) -> Result<Self, GridError> {
        Grid3::new(n_grid, [[0.0, lx[0]], [0.0, lx[1]], [0.0, lx[2]]])
    }

    /// Grid over the unit box `[0, 1)^3`.
    pub fn unit_box(n_grid: [usize; 3]) -> Result<Self, GridError> {
        Grid3::from_lengths(n_grid, [1.0, 1.0, 1.0])
    }

    pub fn n_grid(&self) -> [usize; 3] {
        self.n_grid
    }

    pub fn domain(&self) -> [[f64; 2]; 3] {
        self.domain
    }

    pub fn lx(&self) -> [f64; 3] {
        self.lx
    }

    pub fn delta_x(&self) -> [f64; 3] {
        self.delta_x
    }

    pub fn rdelta_x(&self) -> [f64; 3] {
        self.rdelta_x
    }

    /// Scalar degrees of freedom per field component.
    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    /// Wraps a coordinate into the domain of the given axis.
    pub fn wrap_axis(&self, x: f64, axis: usize) -> f64 {
        self.domain[axis][0] + wrap_periodic(x - self.domain[axis][0], self.lx[axis])
    }

    /// Periodically wraps `x` onto the axis and returns the cell index and
    /// the normalized position `xi` in `[0, 1)` within that cell.
    pub fn locate(&self, x: f64, axis: usize) -> Result<(usize, f64), GridError> {
        if !x.is_finite() {
            return Err(GridError::NonFiniteCoordinate { axis, x });
        }
        let wrapped = wrap_periodic(x - self.domain[axis][0], self.lx[axis]);
        let t = wrapped * self.rdelta_x[axis];
        let mut cell = t.floor();
        let mut xi = t - cell;
        // a coordinate one ulp under the domain edge can scale to exactly n
        if cell as usize >= self.n_grid[axis] {
            cell = 0.0;
            xi = 0.0;
        }
        Ok((cell as usize, xi))
    }

    /// Like [`locate`](Self::locate) but without periodic wrapping: the
    /// cell index may be negative or beyond the axis. Used for trajectory
    /// endpoints, which stay in unwrapped coordinates until deposit time.
    pub fn locate_unbounded(&self, x: f64, axis: usize) -> (i64, f64) {
        debug_assert!(x.is_finite());
        let t = (x - self.domain[axis][0]) * self.rdelta_x[axis];
        let cell = t.floor();
        (cell as i64, t - cell)
    }

    /// Flat degree-of-freedom index from a 3D tensor index, each component
    /// wrapped periodically onto its axis; `i1` runs fastest.
    pub fn tensor_index(&self, i1: i64, i2: i64, i3: i64) -> usize {
        let w1 = i1.rem_euclid(self.n_grid[0] as i64) as usize;
        let w2 = i2.rem_euclid(self.n_grid[1] as i64) as usize;
        let w3 = i3.rem_euclid(self.n_grid[2] as i64) as usize;
        w1 + self.n_grid[0] * (w2 + self.n_grid[1] * w3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paper_grid() -> Grid3 {
        Grid3::unit_box([16, 8, 8]).unwrap()
    }

    #[test]
    fn construction_invariants() {
        let grid = paper_grid();
        for k in 0..3 {
            let lx = grid.lx()[k];
            let rebuilt = grid.n_grid()[k] as f64 * grid.delta_x()[k];
            assert!((rebuilt - lx).abs() <= 1e-14 * lx.abs());
            assert!((grid.rdelta_x()[k] * grid.delta_x()[k] - 1.0).abs() <= 1e-14);
        }
        assert_eq!(grid.n_dofs(), 16 * 8 * 8);
    }

    #[test]
    fn rejects_degenerate_setups() {
        assert!(Grid3::unit_box([0, 4, 4]).is_err());
        assert!(Grid3::new([4, 4, 4], [[0.0, 0.0], [0.0, 1.0], [0.0, 1.0]]).is_err());
        assert!(Grid3::new([4, 4, 4], [[0.0, f64::INFINITY], [0.0, 1.0], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn locate_basic_cases() {
        let grid = Grid3::from_lengths([4, 4, 4], [4.0, 4.0, 4.0]).unwrap();
        assert_eq!(grid.locate(2.5, 0).unwrap(), (2, 0.5));
        assert_eq!(grid.locate(0.0, 0).unwrap(), (0, 0.0));
        // periodic wrap of a coordinate left of the domain
        assert_eq!(grid.locate(-0.5, 0).unwrap(), (3, 0.5));
        assert!(grid.locate(f64::NAN, 0).is_err());
    }

    #[test]
    fn locate_reconstructs_the_wrapped_coordinate() {
        let grid = Grid3::from_lengths([16, 8, 8], [2.0, 1.0, 1.0]).unwrap();
        for i in 0..1000 {
            let x = -3.0 + i as f64 * 0.0093;
            let (cell, xi) = grid.locate(x, 0).unwrap();
            let wrapped = wrap_periodic(x, 2.0);
            let rebuilt = (cell as f64 + xi) * grid.delta_x()[0];
            assert!((rebuilt - wrapped).abs() <= 1e-12 * wrapped.abs().max(1.0));
        }
    }

    #[test]
    fn wrap_boundary_cases() {
        assert!((wrap_periodic(3.9 + 0.2, 4.0) - 0.1).abs() < 1e-12);
        assert!((wrap_periodic(-0.1, 4.0) - 3.9).abs() < 1e-12);
        assert_eq!(wrap_periodic(4.0, 4.0), 0.0);
        assert_eq!(wrap_periodic(-1e-18, 4.0), 0.0);
    }

    #[test]
    fn tensor_index_examples() {
        let grid = paper_grid();
        assert_eq!(grid.tensor_index(0, 0, 0), 0);
        assert_eq!(grid.tensor_index(1, 2, 3), 1 + 16 * (2 + 8 * 3));
        assert_eq!(grid.tensor_index(16, 0, 0), 0);
        assert_eq!(grid.tensor_index(-1, 0, 0), 15);
    }

    #[test]
    fn tensor_index_is_a_bijection_on_small_grids() {
        let grid = Grid3::from_lengths([4, 3, 2], [4.0, 3.0, 2.0]).unwrap();
        let mut seen = vec![false; grid.n_dofs()];
        for i3 in 0..2 {
            for i2 in 0..3 {
                for i1 in 0..4 {
                    let idx = grid.tensor_index(i1, i2, i3);
                    assert!(!seen[idx]);
                    seen[idx] = true;
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    proptest! {
        #[test]
        fn wrap_lands_in_range(x in -1e6f64..1e6, l in 1e-3f64..1e3) {
            let r = wrap_periodic(x, l);
            prop_assert!((0.0..l).contains(&r));
        }

        #[test]
        fn locate_of_wrapped_is_idempotent(x in -50.0f64..50.0) {
            let grid = Grid3::from_lengths([16, 8, 8], [2.0, 1.0, 1.0]).unwrap();
            let (cell, xi) = grid.locate(x, 0).unwrap();
            let wrapped = grid.wrap_axis(x, 0);
            let (cell2, xi2) = grid.locate(wrapped, 0).unwrap();
            prop_assert_eq!(cell, cell2);
            prop_assert_eq!(xi, xi2);
        }
    }
}
