//! One-dimensional quadrature rules and classical orthogonal polynomials.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Nodes and weights of a one-dimensional rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

/// Jacobi polynomial `P_n^{(a,b)}(x)` by the three-term recurrence.
pub fn jacobi(n: usize, a: f64, b: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut p0 = 1.0;
    let mut p1 = (a + 1.0) + 0.5 * (a + b + 2.0) * (x - 1.0);
    for k in 2..=n {
        let k = k as f64;
        let s = 2.0 * k + a + b;
        let c1 = 2.0 * k * (k + a + b) * (s - 2.0);
        let c2 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b);
        let c3 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * s;
        let p2 = (c2 * p1 - c3 * p0) / c1;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// `P_n^{(a,b)}(1) = binom(n + a, n)`.
pub fn jacobi_at_one(n: usize, a: f64) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * (k as f64 + a) / k as f64)
}

/// `n`-point Gauss–Jacobi rule on `[-1, 1]` for the weight
/// `(1 - x)^a (1 + x)^b`, via the Golub–Welsch eigenproblem.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Result<Rule> {
    if n == 0 || a <= -1.0 || b <= -1.0 {
        return Err(Error::InvalidParameter(format!(
            "Gauss–Jacobi needs n >= 1 and a, b > -1 (got n = {n}, a = {a}, b = {b})"
        )));
    }
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        jm[(k, k)] = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        if k + 1 < n {
            let k1 = kf + 1.0;
            let s1 = 2.0 * k1 + a + b;
            let beta = 4.0 * k1 * (k1 + a) * (k1 + b) * (k1 + a + b) / (s1 * s1 * (s1 + 1.0) * (s1 - 1.0));
            let off = beta.sqrt();
            jm[(k, k + 1)] = off;
            jm[(k + 1, k)] = off;
        }
    }
    let mu0 = ((a + b + 1.0) * std::f64::consts::LN_2 + libm::lgamma(a + 1.0) + libm::lgamma(b + 1.0)
        - libm::lgamma(a + b + 2.0))
    .exp();
    let eig = SymmetricEigen::new(jm);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    })
}

/// Tanh-sinh node on `[-1, 1]`, carrying the distance to the nearer
/// endpoint so integrands with endpoint singularities can be evaluated
/// without cancellation.
#[derive(Debug, Clone, Copy)]
pub struct TanhSinhNode {
    pub x: f64,
    pub edge_distance: f64,
    pub weight: f64,
}

/// Tanh-sinh rule with step `h`, truncated once weights drop below `1e-300`
/// or nodes collide with the endpoints.
pub fn tanh_sinh(h: f64) -> Vec<TanhSinhNode> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut out = vec![TanhSinhNode { x: 0.0, edge_distance: 1.0, weight: h * half_pi }];
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let u = half_pi * t.sinh();
        let cu = u.cosh();
        let weight = h * half_pi * t.cosh() / (cu * cu);
        let edge_distance = 2.0 / (1.0 + (2.0 * u).exp());
        if weight < 1e-300 || edge_distance < 1e-300 {
            break;
        }
        let x = 1.0 - edge_distance;
        out.push(TanhSinhNode { x, edge_distance, weight });
        out.push(TanhSinhNode { x: -x, edge_distance, weight });
        k += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=20 {
            let rule = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let got = rule.integrate(|x| x.powi(deg as i32));
                assert!((got - exact).abs() < 1e-14, "n={n} deg={deg}: {got} vs {exact}");
            }
            assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn gauss_jacobi_matches_beta_integrals() {
        // ∫_{-1}^{1} (1-x)^a (1+x)^b (1+x)^m dx = 2^{a+b+m+1} B(a+1, b+m+1)
        let (a, b) = (0.0, -0.35);
        let rule = gauss_jacobi(12, a, b).unwrap();
        for m in 0..20 {
            let mf = m as f64;
            let exact = ((a + b + mf + 1.0) * std::f64::consts::LN_2 + libm::lgamma(a + 1.0)
                + libm::lgamma(b + mf + 1.0)
                - libm::lgamma(a + b + mf + 2.0))
            .exp();
            let got = rule.integrate(|x| (1.0 + x).powi(m));
            assert!((got - exact).abs() < 1e-12 * exact, "m={m}: {got} vs {exact}");
        }
        assert!(gauss_jacobi(5, -1.0, 0.0).is_err());
    }

    #[test]
    fn jacobi_recurrence_matches_closed_forms() {
        let (a, b) = (0.0, 3.0);
        for &x in &[-0.9, -0.2, 0.4, 1.0] {
            let p1 = (a + 1.0) + 0.5 * (a + b + 2.0) * (x - 1.0);
            assert!((jacobi(1, a, b, x) - p1).abs() < 1e-14);
            // Legendre special case
            let p3 = 0.5 * (5.0 * x * x * x - 3.0 * x);
            assert!((jacobi(3, 0.0, 0.0, x) - p3).abs() < 1e-14);
        }
        assert!((jacobi(4, 0.0, 2.0, 1.0) - jacobi_at_one(4, 0.0)).abs() < 1e-13);
        assert!((jacobi(3, 2.0, 0.0, 1.0) - jacobi_at_one(3, 2.0)).abs() < 1e-13);
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularities() {
        let rule = tanh_sinh(1.0 / 16.0);
        // ∫_{-1}^{1} (1 - x^2)^{-1/2} dx = π
        let got: f64 = rule
            .iter()
            .map(|n| n.weight / (n.edge_distance * (2.0 - n.edge_distance)).sqrt())
            .sum();
        assert!((got - std::f64::consts::PI).abs() < 1e-12, "{got}");
        let smooth: f64 = rule.iter().map(|n| n.weight * n.x.exp()).sum();
        assert!((smooth - (1f64.exp() - (-1f64).exp())).abs() < 1e-13);
    }
}
