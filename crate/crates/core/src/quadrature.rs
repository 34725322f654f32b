//! Gauss-Legendre quadrature on intervals and rectangles.
//!
//! The mode-overlap integrands are polynomials times Gaussians, for which
//! Gauss-Legendre on a box that contains the support to below machine noise
//! converges superexponentially. Used as an independent check of the
//! closed-form integrals, not in any inner loop.

use crate::error::{Error, Result};

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Newton iteration on the Legendre recurrence; accurate to ~1e-15 for the
/// orders used here (well below 1000).
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || n > 2000 {
        return Err(Error::parameter(format!(
            "Gauss-Legendre order must be in 1..=2000, got {n}"
        )));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi-style initial guess for the i-th root of P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_{n-1} by upward recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Ok((nodes, weights))
}

/// Integrate `f` over [a, b] with an n-point rule.
pub fn integrate_1d(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> Result<f64> {
    let (x, w) = gauss_legendre(n)?;
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (&xi, &wi) in x.iter().zip(&w) {
        acc += wi * f(mid + half * xi);
    }
    Ok(acc * half)
}

/// Tensor-product rule over the rectangle [a1, b1] x [a2, b2].
pub fn integrate_2d(
    f: impl Fn(f64, f64) -> f64,
    a1: f64,
    b1: f64,
    a2: f64,
    b2: f64,
    n1: usize,
    n2: usize,
) -> Result<f64> {
    let (x1, w1) = gauss_legendre(n1)?;
    let (x2, w2) = gauss_legendre(n2)?;
    let mid1 = 0.5 * (a1 + b1);
    let half1 = 0.5 * (b1 - a1);
    let mid2 = 0.5 * (a2 + b2);
    let half2 = 0.5 * (b2 - a2);
    let mut acc = 0.0;
    for (&xi, &wi) in x1.iter().zip(&w1) {
        let u = mid1 + half1 * xi;
        let mut row = 0.0;
        for (&yj, &wj) in x2.iter().zip(&w2) {
            row += wj * f(u, mid2 + half2 * yj);
        }
        acc += wi * row;
    }
    Ok(acc * half1 * half2)
}
