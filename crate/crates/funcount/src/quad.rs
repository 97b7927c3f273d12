//! Trapezoid quadrature on a fixed time grid.
//!
//! All inner products between functions evaluated on the grid use these
//! weights, so "orthonormal" throughout the crate means orthonormal with
//! respect to this quadrature.

use ndarray::{Array1, ArrayView1};

/// Trapezoid weights for a strictly increasing grid.
pub fn trapezoid_weights(grid: &[f64]) -> Array1<f64> {
    let t = grid.len();
    assert!(t >= 2, "grid needs at least two points");
    let mut w = Array1::zeros(t);
    w[0] = (grid[1] - grid[0]) / 2.0;
    w[t - 1] = (grid[t - 1] - grid[t - 2]) / 2.0;
    for j in 1..t - 1 {
        w[j] = (grid[j + 1] - grid[j - 1]) / 2.0;
    }
    w
}

/// Quadrature inner product of two grid functions.
pub fn inner(weights: &Array1<f64>, f: ArrayView1<f64>, g: ArrayView1<f64>) -> f64 {
    weights
        .iter()
        .zip(f.iter())
        .zip(g.iter())
        .map(|((w, a), b)| w * a * b)
        .sum()
}

/// Trapezoid integral of a grid function.
pub fn integral(weights: &Array1<f64>, f: ArrayView1<f64>) -> f64 {
    weights.iter().zip(f.iter()).map(|(w, a)| w * a).sum()
}

/// The canonical grid for T five-minute bins: bin midpoints in minutes.
pub fn five_min_grid(t: usize) -> Vec<f64> {
    (0..t).map(|j| 2.5 + 5.0 * j as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn weights_sum_to_range() {
        let grid = vec![0.0, 1.0, 2.0, 4.0];
        let w = trapezoid_weights(&grid);
        let total: f64 = w.sum();
        assert!((total - 4.0).abs() < 1e-12);
    }

    #[test]
    fn integral_of_linear_is_exact() {
        let grid: Vec<f64> = (0..11).map(|j| j as f64 / 10.0).collect();
        let w = trapezoid_weights(&grid);
        let f: Array1<f64> = grid.iter().map(|t| 2.0 * t + 1.0).collect();
        // integral of 2t+1 on [0,1] is 2
        assert!((integral(&w, f.view()) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inner_product_matches_hand_value() {
        let w = array![0.5, 1.0, 0.5];
        let f = array![1.0, 2.0, 3.0];
        let g = array![1.0, 1.0, 1.0];
        assert!((inner(&w, f.view(), g.view()) - 4.0).abs() < 1e-12);
    }
}
