//! Independent reference implementations backing the test suites of the
//! particle-in-cell kernel crates.
//!
//! Everything in here trades speed for transparency: splines are evaluated
//! with the textbook Cox-de Boor recursion instead of piecewise polynomials,
//! integrals are done by Gauss-Legendre quadrature instead of primitive
//! functions, and reductions are replayed with compensated summation. None of
//! this code is shared with the production crates, so agreement between the
//! two is meaningful evidence of correctness.

use std::f64::consts::PI;

/// Value of the uniform B-spline of the given degree at `x`, with support
/// `[0, degree + 1)` on integer knots, via the Cox-de Boor recursion.
pub fn cox_de_boor(degree: usize, x: f64) -> f64 {
    if degree == 0 {
        return if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 };
    }
    let q = degree as f64;
    (x / q) * cox_de_boor(degree - 1, x) + ((q + 1.0 - x) / q) * cox_de_boor(degree - 1, x - 1.0)
}

/// Same spline shifted so its support starts at `offset`.
pub fn cox_de_boor_offset(degree: usize, offset: i64, x: f64) -> f64 {
    cox_de_boor(degree, x - offset as f64)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut rule = Vec::with_capacity(n);
    for k in 0..n {
        // Chebyshev-like initial guess, then Newton.
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Fixed-order Gauss-Legendre integral of `f` over `[a, b]`.
pub fn integrate_gl(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rule: &[(f64, f64)]) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut total = 0.0;
    for &(x, w) in rule {
        total += w * f(mid + half * x);
    }
    total * half
}

/// Integral of the offset uniform B-spline over `[a, b]` by adaptive
/// composite Gauss-Legendre quadrature to 1e-13 absolute accuracy.
///
/// The integrand loses smoothness exactly at the integer knots, where a
/// plain adaptive scheme can misjudge its own error, so the interval is
/// composed over the knots first and the adaptive refinement runs on the
/// polynomial panels in between.
///
/// Signed: `a > b` yields the negated integral.
pub fn quadrature_integrate(degree: usize, a: f64, b: f64, basis_offset: i64) -> f64 {
    if a == b {
        return 0.0;
    }
    if a > b {
        return -quadrature_integrate(degree, b, a, basis_offset);
    }
    let f = move |x: f64| cox_de_boor_offset(degree, basis_offset, x);
    let rule = gauss_legendre(15);
    let mut cuts = vec![a];
    let mut knot = a.floor() + 1.0;
    while knot < b {
        if knot > a {
            cuts.push(knot);
        }
        knot += 1.0;
    }
    cuts.push(b);
    let panel_tol = 1e-13 / (cuts.len() - 1) as f64;
    cuts.windows(2)
        .map(|panel| adaptive(&f, panel[0], panel[1], panel_tol, 48, &rule))
        .sum()
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize, rule: &[(f64, f64)]) -> f64 {
    let whole = integrate_gl(f, a, b, rule);
    let mid = 0.5 * (a + b);
    let left = integrate_gl(f, a, mid, rule);
    let right = integrate_gl(f, mid, b, rule);
    let split = left + right;
    if depth == 0 || (whole - split).abs() <= tol {
        split
    } else {
        adaptive(f, a, mid, 0.5 * tol, depth - 1, rule) + adaptive(f, mid, b, 0.5 * tol, depth - 1, rule)
    }
}

/// Neumaier-compensated sum, used to replay recorded deposit traces with
/// near-exact accumulation.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Inputs for the trajectory-quadrature reference of the x1 substep.
///
/// Field coefficient slices are the per-component blocks, each `n_dofs`
/// long, flat-indexed as `i1 + n1 * (i2 + n2 * i3)` with periodic wrapping.
pub struct TrajectoryInput<'a> {
    pub n_grid: [usize; 3],
    pub domain_min: [f64; 3],
    pub delta_x: [f64; 3],
    /// Spline degree p of the field representation.
    pub degree: usize,
    pub b2: &'a [f64],
    pub b3: &'a [f64],
    pub q_over_m: f64,
    pub marker_charge: f64,
    pub dt: f64,
    pub position: [f64; 3],
    pub v1: f64,
}

/// Reference outputs: velocity increments and the full deposited current
/// vector for a single particle.
pub struct TrajectoryReference {
    pub delta_v2: f64,
    pub delta_v3: f64,
    pub j: Vec<f64>,
}

/// Evaluates the velocity-update and current-deposition integrals of the x1
/// substep directly in the time variable, by 64-point Gauss-Legendre
/// quadrature on every sub-interval between grid-cell crossings of the
/// trajectory. Splitting at the crossings keeps the integrand polynomial on
/// each panel, so the quadrature is exact to rounding.
pub fn hp1_trajectory_reference(input: &TrajectoryInput<'_>) -> TrajectoryReference {
    let p = input.degree;
    assert!(p >= 1);
    let [n1, n2, n3] = input.n_grid;
    let n_dofs = n1 * n2 * n3;
    assert_eq!(input.b2.len(), n_dofs);
    assert_eq!(input.b3.len(), n_dofs);

    let u = |k: usize, x: f64| (x - input.domain_min[k]) / input.delta_x[k];
    let u2 = u(1, input.position[1]);
    let u3 = u(2, input.position[2]);
    let u1_start = u(0, input.position[0]);
    let u1_rate = input.v1 / input.delta_x[0];
    let u1_end = u1_start + input.dt * u1_rate;

    let mut result = TrajectoryReference {
        delta_v2: 0.0,
        delta_v3: 0.0,
        j: vec![0.0; n_dofs],
    };
    if input.dt == 0.0 || input.v1 == 0.0 {
        return result;
    }

    // Times at which the trajectory crosses integer cell boundaries in u1.
    let mut cuts = vec![0.0];
    let (lo, hi) = if u1_start < u1_end { (u1_start, u1_end) } else { (u1_end, u1_start) };
    let mut boundary = lo.floor() + 1.0;
    while boundary < hi {
        let t = (boundary - u1_start) / u1_rate;
        if t > 0.0 && t < input.dt {
            cuts.push(t);
        }
        boundary += 1.0;
    }
    cuts.push(input.dt);
    cuts.sort_by(f64::total_cmp);

    let rule = gauss_legendre(64);
    let flat = |i1: i64, i2: i64, i3: i64| -> usize {
        let w1 = i1.rem_euclid(n1 as i64) as usize;
        let w2 = i2.rem_euclid(n2 as i64) as usize;
        let w3 = i3.rem_euclid(n3 as i64) as usize;
        w1 + n1 * (w2 + n2 * w3)
    };

    let c2 = u2.floor() as i64;
    let c3 = u3.floor() as i64;
    let mut sum_v2 = 0.0;
    let mut sum_v3 = 0.0;

    for seg in cuts.windows(2) {
        let (ta, tb) = (seg[0], seg[1]);
        let half = 0.5 * (tb - ta);
        let mid = 0.5 * (ta + tb);
        for &(node, weight) in &rule {
            let tau = mid + half * node;
            let scale = weight * half * input.v1;
            let u1 = u1_start + tau * u1_rate;
            let c1 = u1.floor() as i64;
            for i1 in (c1 - (p as i64 - 1))..=c1 {
                let n1_pm1 = cox_de_boor(p - 1, u1 - i1 as f64);
                if n1_pm1 == 0.0 {
                    continue;
                }
                for i2 in (c2 - p as i64)..=c2 {
                    let n2_p = cox_de_boor(p, u2 - i2 as f64);
                    let n2_pm1 = cox_de_boor(p - 1, u2 - i2 as f64);
                    for i3 in (c3 - p as i64)..=c3 {
                        let n3_p = cox_de_boor(p, u3 - i3 as f64);
                        let n3_pm1 = cox_de_boor(p - 1, u3 - i3 as f64);
                        let idx = flat(i1, i2, i3);
                        sum_v2 += scale * input.b3[idx] * n1_pm1 * n2_pm1 * n3_p;
                        sum_v3 += scale * input.b2[idx] * n1_pm1 * n2_p * n3_pm1;
                        result.j[idx] += input.marker_charge * scale * n1_pm1 * n2_p * n3_p;
                    }
                }
            }
        }
    }

    result.delta_v2 = -input.q_over_m * sum_v2;
    result.delta_v3 = input.q_over_m * sum_v3;
    result
}
