//! Gauss-Legendre quadrature nodes and deterministic pairwise summation.

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1],
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th positive root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative via the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
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
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Nodes and weights mapped onto [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|v| mid + half * v).collect(),
        w.iter().map(|v| half * v).collect(),
    )
}

/// Pairwise (tree) summation; summation order is independent of how the
/// values were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        len => {
            let mid = len / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn small_rules_match_known_values() {
        let (x, w) = gauss_legendre(2);
        assert_relative_eq!(x[1], 1.0 / 3.0f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-14);
        let (x3, w3) = gauss_legendre(3);
        assert_relative_eq!(x3[2], (3.0f64 / 5.0).sqrt(), epsilon = 1e-14);
        assert_relative_eq!(w3[1], 8.0 / 9.0, epsilon = 1e-14);
    }

    #[test]
    fn integrates_polynomials_exactly() {
        // 64-point rule integrates x^k exactly for k <= 127.
        let (x, w) = gauss_legendre_on(64, 0.0, 2.0);
        let int_x5: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(5)).sum();
        assert_relative_eq!(int_x5, 64.0 / 6.0, epsilon = 1e-10);
    }

    #[test]
    fn integrates_smooth_function() {
        let (x, w) = gauss_legendre_on(64, 0.0, 1.0);
        let v: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.exp()).sum();
        assert_relative_eq!(v, std::f64::consts::E - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let vals: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let naive: f64 = vals.iter().sum();
        assert_relative_eq!(pairwise_sum(&vals), naive, epsilon = 1e-12);
    }
}
