//! Gaussian quadrature rules, generated in `f64`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Nodes and weights of an `n`-point rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Applies the rule to `f`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss–Legendre rule on `[-1, 1]`, exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::config("Gauss-Legendre rule needs at least one node"));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(Rule { nodes, weights })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Laguerre rule for `∫₀^∞ e^{-ξ} h(ξ) dξ`.
///
/// Initial nodes come from the Golub–Welsch eigenvalue problem and are then
/// polished by Newton's method on `L_n`; weights use the closed form
/// `ξ / ((n+1)² L_{n+1}(ξ)²)`, which keeps the tiny tail weights relatively
/// accurate (eigenvector components would not).
pub fn gauss_laguerre(n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::config("Gauss-Laguerre rule needs at least one node"));
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * i as f64 + 1.0
        } else if i + 1 == j {
            j as f64
        } else if j + 1 == i {
            i as f64
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::try_new(jacobi, 1e-15, 10_000)
        .ok_or_else(|| Error::numerical("Golub-Welsch eigen-solve did not converge"))?;
    let mut guesses: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    guesses.sort_by(f64::total_cmp);

    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for mut x in guesses {
        for _ in 0..50 {
            let (l_n, l_nm1) = laguerre_pair(n, x);
            let d = n as f64 * (l_n - l_nm1) / x;
            let dx = l_n / d;
            x -= dx;
            if dx.abs() <= 4.0 * f64::EPSILON * x.abs() {
                break;
            }
        }
        let (l_np1, _) = laguerre_pair(n + 1, x);
        let np1 = (n + 1) as f64;
        nodes.push(x);
        weights.push(x / (np1 * np1 * l_np1 * l_np1));
    }
    if nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::numerical("Gauss-Laguerre nodes collapsed during refinement"));
    }
    Ok(Rule { nodes, weights })
}

/// Gauss–Radau–Laguerre rule with a node fixed at `ξ = 0`, exact for
/// `∫₀^∞ e^{-ξ} p(ξ) dξ` with `deg p ≤ 2n − 2` (`n` nodes in total).
///
/// The free nodes are the zeros of the generalized Laguerre polynomial
/// `L_{n-1}^{(1)}`; weights are `1 / (n L_{n-1}(ξ)²)`.
pub fn gauss_radau_laguerre(n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::config("Gauss-Radau-Laguerre rule needs at least one node"));
    }
    let m = n - 1;
    let mut nodes = vec![0.0];
    if m > 0 {
        let jacobi = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                2.0 * i as f64 + 2.0
            } else if i + 1 == j {
                (j as f64 * (j as f64 + 1.0)).sqrt()
            } else if j + 1 == i {
                (i as f64 * (i as f64 + 1.0)).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::try_new(jacobi, 1e-15, 10_000)
            .ok_or_else(|| Error::numerical("Golub-Welsch eigen-solve did not converge"))?;
        let mut guesses: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        guesses.sort_by(f64::total_cmp);
        for mut x in guesses {
            for _ in 0..50 {
                let (l, l_prev) = associated_laguerre_pair(m, x);
                let d = (m as f64 * l - (m as f64 + 1.0) * l_prev) / x;
                let dx = l / d;
                x -= dx;
                if dx.abs() <= 4.0 * f64::EPSILON * x.abs() {
                    break;
                }
            }
            nodes.push(x);
        }
    }
    if nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::numerical("Gauss-Radau-Laguerre nodes collapsed during refinement"));
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let (l, _) = laguerre_pair(m, x);
            1.0 / (n as f64 * l * l)
        })
        .collect();
    Ok(Rule { nodes, weights })
}

/// Returns `(L_n^{(1)}(x), L_{n-1}^{(1)}(x))`.
fn associated_laguerre_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut l0, mut l1) = (1.0, 2.0 - x);
    for k in 1..n {
        let k = k as f64;
        let l2 = ((2.0 * k + 2.0 - x) * l1 - (k + 1.0) * l0) / (k + 1.0);
        l0 = l1;
        l1 = l2;
    }
    (l1, l0)
}

/// Differentiation matrix of the Lagrange interpolant through `nodes`,
/// conjugated by `diag(e^σ)`: `(D f)_i = e^{σ_i} p′(x_i)` where `p`
/// interpolates `f_j e^{−σ_j}`. Pass `σ = 0` for the plain matrix.
///
/// Barycentric weights are handled through their logarithms, so entries of
/// moderate size are produced even when the unscaled matrix would overflow.
pub fn lagrange_differentiation(nodes: &[f64], log_scale: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    assert_eq!(log_scale.len(), n, "one scale per node");
    let (mut log_mag, mut sign) = (vec![0.0; n], vec![1.0; n]);
    for i in 0..n {
        for k in (0..n).filter(|&k| k != i) {
            let d = nodes[i] - nodes[k];
            log_mag[i] += d.abs().ln();
            sign[i] *= d.signum();
        }
    }
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            (0..n).filter(|&k| k != i).map(|k| 1.0 / (nodes[i] - nodes[k])).sum()
        } else {
            let log = log_mag[i] - log_mag[j] + log_scale[i] - log_scale[j];
            sign[i] * sign[j] * log.exp() / (nodes[i] - nodes[j])
        }
    })
}

/// Returns `(L_n(x), L_{n-1}(x))`.
fn laguerre_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut l0, mut l1) = (1.0, 1.0 - x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let k = k as f64;
        let l2 = ((2.0 * k + 1.0 - x) * l1 - k * l0) / (k + 1.0);
        l0 = l1;
        l1 = l2;
    }
    (l1, l0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        for n in 1..=12 {
            let rule = gauss_legendre(n).unwrap();
            for deg in 0..(2 * n) {
                let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
                let got = rule.integrate(|x| x.powi(deg as i32));
                assert!((got - exact).abs() < 1e-14, "n={n} deg={deg}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn laguerre_moments_are_factorials() {
        for n in [1usize, 2, 5, 16, 64] {
            let rule = gauss_laguerre(n).unwrap();
            let mut fact = 1.0_f64;
            for k in 0..(2 * n).min(20) {
                if k > 0 {
                    fact *= k as f64;
                }
                let got = rule.integrate(|x| x.powi(k as i32));
                assert!(((got - fact) / fact).abs() < 1e-12, "n={n} k={k}: {got} vs {fact}");
            }
        }
    }

    #[test]
    fn laguerre_weights_positive_and_nodes_increasing() {
        let rule = gauss_laguerre(64).unwrap();
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(rule.nodes[0] > 0.0);
    }

    #[test]
    fn radau_laguerre_is_exact_to_degree_2n_minus_2() {
        for n in [1usize, 2, 3, 9, 65] {
            let rule = gauss_radau_laguerre(n).unwrap();
            assert_eq!(rule.nodes[0], 0.0);
            assert!((rule.weights[0] - 1.0 / n as f64).abs() < 1e-15);
            let mut fact = 1.0_f64;
            for k in 0..(2 * n - 1).min(20) {
                if k > 0 {
                    fact *= k as f64;
                }
                let got = rule.integrate(|x| x.powi(k as i32));
                assert!(((got - fact) / fact).abs() < 1e-11, "n={n} k={k}: {got} vs {fact}");
            }
        }
    }

    #[test]
    fn differentiation_is_exact_for_polynomials() {
        let rule = gauss_radau_laguerre(12).unwrap();
        let d = lagrange_differentiation(&rule.nodes, &[0.0; 12]);
        let f = DVector::from_iterator(12, rule.nodes.iter().map(|x| x.powi(5) - 3.0 * x));
        let df = &d * f;
        for (i, &x) in rule.nodes.iter().enumerate() {
            let exact = 5.0 * x.powi(4) - 3.0;
            assert!((df[i] - exact).abs() < 1e-9 * (1.0 + exact.abs()), "{} vs {exact}", df[i]);
        }
    }

    #[test]
    fn zero_nodes_rejected() {
        assert!(gauss_legendre(0).is_err());
        assert!(gauss_laguerre(0).is_err());
        assert!(gauss_radau_laguerre(0).is_err());
    }
}
