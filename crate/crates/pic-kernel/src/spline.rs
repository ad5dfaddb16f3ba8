//! Uniform B-splines in piecewise-polynomial (pp) form.
//!
//! A uniform B-spline of degree `q` lives on integer knots with support
//! `[0, q + 1)`. On any one grid cell exactly `q + 1` translates of it are
//! nonzero, and each of those is a single polynomial in the normalized cell
//! coordinate `xi` in `[0, 1)`. [`PPSplineBasis`] stores those polynomials
//! (and the polynomials of the antiderivative) so that evaluation is a plain
//! Horner loop with no recursion and no branching.
//!
//! The coefficients are built once, exactly, in rational arithmetic from the
//! Cox-de Boor recursion applied to polynomial pieces, then rendered to
//! `f64`. This supports any degree up to [`MAX_DEGREE`] rather than
//! hard-coding the low-degree tables.
//!
//! Ordering convention used throughout the crate: index `r = 0` is the basis
//! function whose support begins furthest left among those nonzero on the
//! cell. Equivalently, on a cell `c` the slot `r` refers to the basis
//! function starting at knot `c - q + r`.

use num_rational::Ratio;
use thiserror::Error;

type Q = Ratio<i128>;

/// Practical degree cap; rational coefficient construction is exact well
/// beyond it, but nothing in this crate needs more.
pub const MAX_DEGREE: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum SplineError {
    #[error("spline degree {degree} exceeds the supported maximum {max}", max = MAX_DEGREE)]
    DegreeTooLarge { degree: usize },
    #[error("normalized cell coordinate {xi} outside [0, 1)")]
    XiOutOfRange { xi: f64 },
}

/// Piecewise-polynomial form of a uniform B-spline of one degree, together
/// with its primitive (antiderivative).
///
/// `poly_coeffs` is `(q+1) x (q+1)`, row-major: row `r` holds the
/// coefficients, highest power first, of the `r`-th nonzero basis function on
/// a cell as a polynomial in `xi`.
///
/// `poly_coeffs_primitive` is `(q+2) x (q+1)`: column `m` describes the
/// antiderivative of the canonical basis function restricted to the `m`-th
/// cell of its support. Rows `0..=q` hold, highest power first, the
/// coefficients of `H_m` where the running integral over the piece is
/// `xi * H_m(xi)`; row `q+1` holds the integral accumulated over the pieces
/// left of `m`. A fully traversed basis function therefore has primitive
/// value exactly 1 in cell units; the physical cell width is applied by the
/// deposition code, not here.
#[derive(Debug, Clone)]
pub struct PPSplineBasis {
    degree: usize,
    poly_coeffs: Vec<f64>,
    poly_coeffs_primitive: Vec<f64>,
}

impl PPSplineBasis {
    /// Builds the pp-form for the given degree. Degrees above
    /// [`MAX_DEGREE`] are rejected.
    pub fn new(degree: usize) -> Result<Self, SplineError> {
        if degree > MAX_DEGREE {
            return Err(SplineError::DegreeTooLarge { degree });
        }
        let pieces = canonical_pieces(degree);
        let q = degree;

        // Row r = piece q - r: slot 0 belongs to the basis function whose
        // support started furthest left, which is on the last piece of its
        // own support.
        let mut poly_coeffs = vec![0.0; (q + 1) * (q + 1)];
        for r in 0..=q {
            let piece = &pieces[q - r];
            for (k, c) in highest_first(piece).enumerate() {
                poly_coeffs[r * (q + 1) + k] = to_f64(c);
            }
        }

        // Integrate each piece and accumulate the offsets.
        let mut poly_coeffs_primitive = vec![0.0; (q + 2) * (q + 1)];
        let mut accumulated = Q::from_integer(0);
        for m in 0..=q {
            let piece = &pieces[m];
            // integral of sum c_j xi^j is xi * sum (c_j / (j+1)) xi^j
            let h: Vec<Q> = piece
                .iter()
                .enumerate()
                .map(|(j, c)| c / Q::from_integer(j as i128 + 1))
                .collect();
            for (k, c) in highest_first(&h).enumerate() {
                poly_coeffs_primitive[k * (q + 1) + m] = to_f64(c);
            }
            poly_coeffs_primitive[(q + 1) * (q + 1) + m] = to_f64(&accumulated);
            let piece_integral: Q = h.iter().sum();
            accumulated += piece_integral;
        }
        debug_assert_eq!(accumulated, Q::from_integer(1));

        Ok(Self {
            degree,
            poly_coeffs,
            poly_coeffs_primitive,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of cells spanned by one basis function.
    pub fn support_width(&self) -> usize {
        self.degree + 1
    }

    /// Coefficient row of the `r`-th nonzero basis function, highest power
    /// first.
    pub fn coeff_row(&self, r: usize) -> &[f64] {
        let n = self.degree + 1;
        &self.poly_coeffs[r * n..(r + 1) * n]
    }

    /// Values of the `degree + 1` basis functions nonzero on the cell,
    /// evaluated at `xi` by Horner's scheme. The values sum to 1.
    pub fn eval_basis(&self, xi: f64) -> Result<Vec<f64>, SplineError> {
        check_xi(xi)?;
        let mut out = vec![0.0; self.degree + 1];
        self.eval_basis_into(xi, &mut out);
        Ok(out)
    }

    /// Unchecked-in-release variant of [`eval_basis`](Self::eval_basis)
    /// writing into a caller slice of length `degree + 1`.
    pub fn eval_basis_into(&self, xi: f64, out: &mut [f64]) {
        debug_assert!((0.0..1.0).contains(&xi));
        let n = self.degree + 1;
        debug_assert_eq!(out.len(), n);
        for r in 0..n {
            let row = &self.poly_coeffs[r * n..(r + 1) * n];
            let mut acc = row[0];
            for &c in &row[1..] {
                acc = acc * xi + c;
            }
            out[r] = acc;
        }
    }

    /// Primitive values at `xi` for every basis function whose support
    /// intersects or lies left of the cell position, in cell units.
    ///
    /// The returned vector has `degree + 2` entries; slot `r` refers to the
    /// basis function starting at knot `c - q - 1 + r` of the evaluation
    /// cell `c`. Slot 0 is the saturated value 1 of a fully traversed basis
    /// function, and every entry is monotone non-decreasing in `xi`.
    pub fn eval_primitive(&self, xi: f64) -> Result<Vec<f64>, SplineError> {
        check_xi(xi)?;
        let mut out = vec![0.0; self.degree + 2];
        self.eval_primitive_into(xi, &mut out);
        Ok(out)
    }

    /// Unchecked-in-release variant of [`eval_primitive`](Self::eval_primitive)
    /// writing into a caller slice of length `degree + 2`.
    pub fn eval_primitive_into(&self, xi: f64, out: &mut [f64]) {
        debug_assert!((0.0..1.0).contains(&xi));
        let q = self.degree;
        debug_assert_eq!(out.len(), q + 2);
        out[0] = 1.0;
        for r in 1..=q + 1 {
            out[r] = self.primitive_piece(q + 1 - r, xi);
        }
    }

    /// Primitive of the canonical basis function (support `[start, start +
    /// q + 1)` in cell units) evaluated at an arbitrary position: 0 left of
    /// the support, 1 right of it, the genuine antiderivative inside.
    pub fn primitive_value(&self, position: f64, support_start: i64) -> f64 {
        let cell = position.floor();
        let piece = cell as i64 - support_start;
        if piece < 0 {
            0.0
        } else if piece > self.degree as i64 {
            1.0
        } else {
            self.primitive_piece(piece as usize, position - cell)
        }
    }

    fn primitive_piece(&self, m: usize, xi: f64) -> f64 {
        let q = self.degree;
        let stride = q + 1;
        let mut acc = self.poly_coeffs_primitive[m];
        for k in 1..=q {
            acc = acc * xi + self.poly_coeffs_primitive[k * stride + m];
        }
        acc * xi + self.poly_coeffs_primitive[(q + 1) * stride + m]
    }
}

fn check_xi(xi: f64) -> Result<(), SplineError> {
    if (0.0..1.0).contains(&xi) {
        Ok(())
    } else {
        Err(SplineError::XiOutOfRange { xi })
    }
}

/// Polynomial pieces of the canonical degree-q B-spline, lowest power first,
/// piece `m` in the local coordinate of cell `[m, m + 1)`.
///
/// Recursion on pieces: with `x = m + xi`,
/// `N_q{m}(xi) = ((m + xi)/q) N_{q-1}{m}(xi) + ((q + 1 - m - xi)/q) N_{q-1}{m-1}(xi)`.
fn canonical_pieces(degree: usize) -> Vec<Vec<Q>> {
    let mut pieces: Vec<Vec<Q>> = vec![vec![Q::from_integer(1)]];
    for q in 1..=degree as i128 {
        let mut next = Vec::with_capacity(q as usize + 1);
        for m in 0..=q {
            let mut piece = vec![Q::from_integer(0); q as usize + 1];
            if m < q {
                // (m + xi)/q times the piece below
                acc_linear(&mut piece, &pieces[m as usize], Ratio::new(m, q), Ratio::new(1, q));
            }
            if m > 0 {
                // (q + 1 - m - xi)/q times the piece one cell to the left
                acc_linear(
                    &mut piece,
                    &pieces[m as usize - 1],
                    Ratio::new(q + 1 - m, q),
                    Ratio::new(-1, q),
                );
            }
            next.push(piece);
        }
        pieces = next;
    }
    pieces
}

/// `out += (alpha + beta * xi) * poly`, all lowest power first.
fn acc_linear(out: &mut [Q], poly: &[Q], alpha: Q, beta: Q) {
    for (j, c) in poly.iter().enumerate() {
        out[j] += alpha * c;
        out[j + 1] += beta * c;
    }
}

fn highest_first(poly: &[Q]) -> impl Iterator<Item = &Q> {
    poly.iter().rev()
}

fn to_f64(r: &Q) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
