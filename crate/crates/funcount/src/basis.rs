//! B-spline basis on a time grid plus the integrated squared second
//! derivative penalty.
//!
//! Knots are equally spaced over the grid range with boundary knots repeated
//! `degree + 1` times, so the basis forms a partition of unity on the closed
//! interval. The penalty is computed by exact piecewise-polynomial
//! integration (Gauss-Legendre per knot span), not a difference-matrix
//! approximation.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};

#[derive(Debug, Clone)]
pub struct BasisSystem {
    pub grid: Vec<f64>,
    pub degree: usize,
    /// Number of basis functions.
    pub m: usize,
    /// Full knot vector including repeated boundary knots.
    pub knots: Vec<f64>,
    /// T x M matrix of basis values on the grid.
    pub design: Array2<f64>,
    /// M x M integrated squared second derivative penalty (zero for degree < 2).
    pub penalty: Array2<f64>,
}

/// Build a B-spline basis with `m` functions of the given degree on a
/// strictly increasing grid.
pub fn build_basis(grid: &[f64], m: usize, degree: usize) -> Result<BasisSystem> {
    if grid.len() < 2 {
        return Err(Error::invalid("grid needs at least two points"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("grid must be strictly increasing"));
    }
    if m < degree + 1 {
        return Err(Error::invalid(format!(
            "basis dimension {m} too small for degree {degree}; need at least {}",
            degree + 1
        )));
    }
    let knots = uniform_knots(grid[0], grid[grid.len() - 1], m, degree);
    let mut design = Array2::zeros((grid.len(), m));
    for (j, &t) in grid.iter().enumerate() {
        let row = basis_values(&knots, degree, m, t);
        for i in 0..m {
            design[[j, i]] = row[i];
        }
    }
    let penalty = if degree >= 2 {
        penalty_matrix(&knots, degree, m)
    } else {
        Array2::zeros((m, m))
    };
    Ok(BasisSystem {
        grid: grid.to_vec(),
        degree,
        m,
        knots,
        design,
        penalty,
    })
}

/// Integrated squared second derivative penalty for an existing basis.
pub fn second_derivative_penalty(basis: &BasisSystem) -> Result<Array2<f64>> {
    if basis.degree < 2 {
        return Err(Error::invalid(format!(
            "second derivative penalty requires degree >= 2, got {}",
            basis.degree
        )));
    }
    Ok(penalty_matrix(&basis.knots, basis.degree, basis.m))
}

impl BasisSystem {
    /// Evaluate all basis functions at an arbitrary point inside the range.
    pub fn row_at(&self, t: f64) -> Array1<f64> {
        Array1::from(basis_values(&self.knots, self.degree, self.m, t))
    }

    /// Evaluate the `order`-th derivative of all basis functions at `t`.
    pub fn deriv_row_at(&self, t: f64, order: usize) -> Array1<f64> {
        Array1::from(deriv_values(&self.knots, self.degree, self.m, t, order))
    }
}

fn uniform_knots(a: f64, b: f64, m: usize, degree: usize) -> Vec<f64> {
    let n_interior = m - degree - 1;
    let mut knots = Vec::with_capacity(m + degree + 2);
    for _ in 0..=degree {
        knots.push(a);
    }
    for i in 1..=n_interior {
        knots.push(a + (b - a) * i as f64 / (n_interior + 1) as f64);
    }
    for _ in 0..=degree {
        knots.push(b);
    }
    knots
}

fn ratio(num: f64, den: f64) -> f64 {
    if den.abs() < 1e-300 {
        0.0
    } else {
        num / den
    }
}

/// Values of all `m` basis functions of the given degree at `x`
/// (Cox-de Boor recursion over the full knot vector).
fn basis_values(knots: &[f64], degree: usize, m: usize, x: f64) -> Vec<f64> {
    let nk = knots.len();
    let b = knots[nk - 1];
    let mut vals = vec![0.0; nk - 1];
    if x >= b {
        // Closed right endpoint: indicator of the last nonempty span.
        for i in (0..nk - 1).rev() {
            if knots[i] < knots[i + 1] {
                vals[i] = 1.0;
                break;
            }
        }
    } else {
        for i in 0..nk - 1 {
            if knots[i] <= x && x < knots[i + 1] {
                vals[i] = 1.0;
                break;
            }
        }
    }
    for d in 1..=degree {
        let n_funcs = nk - d - 1;
        let mut next = vec![0.0; n_funcs];
        for (i, slot) in next.iter_mut().enumerate() {
            let left = ratio(x - knots[i], knots[i + d] - knots[i]) * vals[i];
            let right = ratio(knots[i + d + 1] - x, knots[i + d + 1] - knots[i + 1]) * vals[i + 1];
            *slot = left + right;
        }
        vals = next;
    }
    vals.truncate(m);
    vals
}

/// Values of the `order`-th derivative of all `m` basis functions at `x`.
fn deriv_values(knots: &[f64], degree: usize, m: usize, x: f64, order: usize) -> Vec<f64> {
    if order == 0 {
        return basis_values(knots, degree, m, x);
    }
    if order > degree {
        return vec![0.0; m];
    }
    let nk = knots.len();
    // Start from plain values at the reduced degree and climb back up with
    // the B-spline derivative recurrence.
    let low = degree - order;
    let mut vals = {
        let n_low = nk - low - 1;
        basis_values(knots, low, n_low, x)
    };
    for d in (low + 1)..=degree {
        let n_funcs = nk - d - 1;
        let mut next = vec![0.0; n_funcs];
        for (i, slot) in next.iter_mut().enumerate() {
            let left = ratio(d as f64, knots[i + d] - knots[i]) * vals[i];
            let right = ratio(d as f64, knots[i + d + 1] - knots[i + 1]) * vals[i + 1];
            *slot = left - right;
        }
        vals = next;
    }
    vals.truncate(m);
    vals
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre(q: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(q);
    for k in 0..q {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (q as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Evaluate P_q and P_q' at x via the three-term recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for n in 2..=q {
                let p2 = ((2 * n - 1) as f64 * x * p1 - (n - 1) as f64 * p0) / n as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = q as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for n in 2..=q {
            let p2 = ((2 * n - 1) as f64 * x * p1 - (n - 1) as f64 * p0) / n as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = q as f64 * (x * p1 - p0) / (x * x - 1.0);
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Exact integral of B_i'' B_j'' over the basis range. The integrand is a
/// piecewise polynomial of degree 2(degree-2) on each knot span, so
/// Gauss-Legendre with `degree` points per span is exact.
fn penalty_matrix(knots: &[f64], degree: usize, m: usize) -> Array2<f64> {
    let gauss = gauss_legendre(degree.max(2));
    let mut p = Array2::zeros((m, m));
    let nk = knots.len();
    for s in 0..nk - 1 {
        let (lo, hi) = (knots[s], knots[s + 1]);
        if hi <= lo {
            continue;
        }
        let half = (hi - lo) / 2.0;
        let mid = (hi + lo) / 2.0;
        for &(node, weight) in &gauss {
            let t = mid + half * node;
            let d2 = deriv_values(knots, degree, m, t, 2);
            let w = weight * half;
            for i in 0..m {
                if d2[i] == 0.0 {
                    continue;
                }
                for j in 0..m {
                    p[[i, j]] += w * d2[i] * d2[j];
                }
            }
        }
    }
    // Force exact symmetry.
    for i in 0..m {
        for j in 0..i {
            let v = (p[[i, j]] + p[[j, i]]) / 2.0;
            p[[i, j]] = v;
            p[[j, i]] = v;
        }
    }
    p
}

/// Greville abscissae: the coefficients that reproduce the identity function.
pub fn greville_points(basis: &BasisSystem) -> Vec<f64> {
    let d = basis.degree;
    (0..basis.m)
        .map(|i| {
            if d == 0 {
                (basis.knots[i] + basis.knots[i + 1]) / 2.0
            } else {
                basis.knots[i + 1..i + 1 + d].iter().sum::<f64>() / d as f64
            }
        })
        .collect()
}
