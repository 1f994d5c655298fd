//! Independent reference computations used by unit tests.

/// 1D collocation matrix on `n` cells of size `h`, with every entry integrated
/// exactly over the source cell: `A_ij = c (G(D + h/2) - G(D - h/2))`, where
/// `D = (i - j) h` and `G(t) = sign(t) |t|^α / α`.
pub fn cell_integral_matrix_1d(alpha: f64, c: f64, h: f64, n: usize) -> Vec<f64> {
    let g = |t: f64| t.signum() * t.abs().powf(alpha) / alpha;
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d = (i as f64 - j as f64) * h;
            a[i * n + j] = c * (g(d + h / 2.0) - g(d - h / 2.0));
        }
    }
    a
}

pub fn quadratic(a: &[f64], v: &[f64]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| v[i] * (0..n).map(|j| a[i * n + j] * v[j]).sum::<f64>())
        .sum()
}

/// Largest eigenvalue of a symmetric matrix with a positive top eigenvector,
/// by power iteration from the constant vector.
pub fn top_eigenvalue(a: &[f64], n: usize, iterations: usize) -> f64 {
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[i * n + j] * v[j]).sum()).collect();
        lambda = v.iter().zip(&w).map(|(x, y)| x * y).sum();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.into_iter().map(|x| x / norm).collect();
    }
    lambda
}
