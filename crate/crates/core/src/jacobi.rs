//! Orthonormal Jacobi polynomials and one-dimensional Gauss-type rules.
//!
//! Polynomials are normalized so that `∫ P̃_m P̃_n (1-x)^a (1+x)^b dx = δ_mn`
//! on [-1, 1]. All evaluation goes through the three-term recurrence of the
//! orthonormal family; the same recurrence coefficients populate the symmetric
//! tridiagonal (Jacobi) matrix whose eigenvalues are the Gauss nodes.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponents of the weight `(1-x)^a (1+x)^b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiWeight {
    a: f64,
    b: f64,
}

impl JacobiWeight {
    pub const LEGENDRE: JacobiWeight = JacobiWeight { a: 0.0, b: 0.0 };

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > -1.0 && b > -1.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Config(format!(
                "Jacobi weight exponents must exceed -1, got (a, b) = ({a}, {b})"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn is(&self, a: f64, b: f64) -> bool {
        self.a == a && self.b == b
    }

    /// `∫_{-1}^{1} (1-x)^a (1+x)^b dx`, computed through log-gamma.
    pub fn integral(&self) -> f64 {
        let (a, b) = (self.a, self.b);
        ((a + b + 1.0) * std::f64::consts::LN_2 + libm::lgamma(a + 1.0) + libm::lgamma(b + 1.0)
            - libm::lgamma(a + b + 2.0))
        .exp()
    }

    /// `∫ x (1-x)^a (1+x)^b dx`.
    pub fn first_moment(&self) -> f64 {
        self.integral() * (self.b - self.a) / (self.a + self.b + 2.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (1.0 - x).powf(self.a) * (1.0 + x).powf(self.b)
    }

    /// Diagonal entry `β_n` of the Jacobi matrix.
    pub(crate) fn rec_diag(&self, n: usize) -> f64 {
        let (a, b) = (self.a, self.b);
        if n == 0 {
            return (b - a) / (a + b + 2.0);
        }
        let s = 2.0 * n as f64 + a + b;
        (b * b - a * a) / (s * (s + 2.0))
    }

    /// Off-diagonal entry `α_n` (n ≥ 1) of the Jacobi matrix, so that
    /// `x P̃_n = α_{n+1} P̃_{n+1} + β_n P̃_n + α_n P̃_{n-1}`.
    pub(crate) fn rec_offdiag(&self, n: usize) -> f64 {
        debug_assert!(n >= 1);
        let (a, b) = (self.a, self.b);
        if n == 1 {
            return (4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b).powi(2) * (3.0 + a + b))).sqrt();
        }
        let nf = n as f64;
        let s = 2.0 * nf + a + b;
        (4.0 * nf * (nf + a) * (nf + b) * (nf + a + b) / (s * s * (s + 1.0) * (s - 1.0))).sqrt()
    }

    /// Value of the constant orthonormal polynomial.
    pub(crate) fn p0(&self) -> f64 {
        1.0 / self.integral().sqrt()
    }
}

/// Values of `P̃_0 .. P̃_n` at `x`.
pub fn jacobi_eval_all(n: usize, w: JacobiWeight, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let p0 = w.p0();
    out.push(p0);
    if n == 0 {
        return out;
    }
    let mut prev = 0.0;
    let mut cur = p0;
    for k in 0..n {
        let next = if k == 0 {
            (x - w.rec_diag(0)) * cur / w.rec_offdiag(1)
        } else {
            ((x - w.rec_diag(k)) * cur - w.rec_offdiag(k) * prev) / w.rec_offdiag(k + 1)
        };
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

/// Orthonormal Jacobi polynomial `P̃_n^{(a,b)}(x)`.
pub fn jacobi_eval(n: usize, w: JacobiWeight, x: f64) -> f64 {
    *jacobi_eval_all(n, w, x).last().unwrap()
}

/// Derivative of `P̃_n^{(a,b)}` at `x`.
pub fn jacobi_deriv(n: usize, w: JacobiWeight, x: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let shifted = JacobiWeight {
        a: w.a + 1.0,
        b: w.b + 1.0,
    };
    let nf = n as f64;
    (nf * (nf + w.a + w.b + 1.0)).sqrt() * jacobi_eval(n - 1, shifted, x)
}

/// Placement of fixed endpoint nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Gauss,
    /// Gauss-Radau with the fixed node at x = -1.
    GaussRadau,
    GaussLobatto,
}

impl RuleKind {
    /// Exactness degree of an `n`-point rule of this kind.
    pub fn exactness(&self, n: usize) -> i64 {
        let n = n as i64;
        match self {
            RuleKind::Gauss => 2 * n - 1,
            RuleKind::GaussRadau => 2 * n - 2,
            RuleKind::GaussLobatto => 2 * n - 3,
        }
    }
}

/// One-dimensional quadrature rule on [-1, 1] for the weight `(1-x)^a (1+x)^b`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureRule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub weight: JacobiWeight,
    pub kind: RuleKind,
    pub exactness_degree: i64,
}

impl QuadratureRule1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Build an `n`-point rule of the given kind for the weight `w`.
pub fn gauss_rule(n: usize, w: JacobiWeight, kind: RuleKind) -> Result<QuadratureRule1D> {
    let (nodes, weights) = match kind {
        RuleKind::Gauss => {
            if n == 0 {
                return Err(Error::Config("Gauss rule needs at least one node".into()));
            }
            gauss_nodes_weights(n, w)?
        }
        RuleKind::GaussRadau => {
            if n == 0 {
                return Err(Error::Config("Gauss-Radau rule needs at least one node".into()));
            }
            if n == 1 {
                (vec![-1.0], vec![w.integral()])
            } else {
                let shifted = JacobiWeight::new(w.a, w.b + 1.0)?;
                let (inner, inner_w) = gauss_nodes_weights(n - 1, shifted)?;
                let mut nodes = vec![-1.0];
                let mut weights = vec![0.0];
                for (x, wi) in inner.iter().zip(&inner_w) {
                    nodes.push(*x);
                    weights.push(wi / (1.0 + x));
                }
                let interior: f64 = weights[1..].iter().sum();
                weights[0] = w.integral() - interior;
                (nodes, weights)
            }
        }
        RuleKind::GaussLobatto => {
            if n < 2 {
                return Err(Error::Config("Gauss-Lobatto rule needs at least two nodes".into()));
            }
            let mut nodes = vec![-1.0];
            let mut weights = vec![0.0];
            if n > 2 {
                let shifted = JacobiWeight::new(w.a + 1.0, w.b + 1.0)?;
                let (inner, inner_w) = gauss_nodes_weights(n - 2, shifted)?;
                for (x, wi) in inner.iter().zip(&inner_w) {
                    nodes.push(*x);
                    weights.push(wi / ((1.0 - x) * (1.0 + x)));
                }
            }
            nodes.push(1.0);
            weights.push(0.0);
            let m0: f64 = w.integral() - weights.iter().sum::<f64>();
            let m1: f64 = w.first_moment()
                - nodes
                    .iter()
                    .zip(&weights)
                    .map(|(x, wi)| x * wi)
                    .sum::<f64>();
            weights[0] = 0.5 * (m0 - m1);
            weights[n - 1] = 0.5 * (m0 + m1);
            (nodes, weights)
        }
    };

    for pair in nodes.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(Error::Quadrature(format!(
                "nodes not strictly increasing for n = {n}, weight ({}, {})",
                w.a, w.b
            )));
        }
    }
    if weights.iter().any(|&wi| !(wi > 0.0)) {
        return Err(Error::Quadrature(format!(
            "non-positive weight for n = {n}, weight ({}, {})",
            w.a, w.b
        )));
    }

    Ok(QuadratureRule1D {
        nodes,
        weights,
        weight: w,
        kind,
        exactness_degree: kind.exactness(n),
    })
}

/// Golub-Welsch eigenvalues, one Newton polish per node, Christoffel weights.
fn gauss_nodes_weights(n: usize, w: JacobiWeight) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jm[(i, i)] = w.rec_diag(i);
        if i + 1 < n {
            let off = w.rec_offdiag(i + 1);
            jm[(i, i + 1)] = off;
            jm[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::new(jm);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        let p = jacobi_eval(n, w, *x);
        let dp = jacobi_deriv(n, w, *x);
        let step = p / dp;
        if !step.is_finite() || step.abs() > 1e-6 {
            return Err(Error::Quadrature(format!(
                "Newton polish rejected eigenvalue {x} (step {step:e}) for n = {n}"
            )));
        }
        *x -= step;
        if !(-1.0 < *x && *x < 1.0) {
            return Err(Error::Quadrature(format!("node {x} left (-1, 1)")));
        }
        let vals = jacobi_eval_all(n - 1, w, *x);
        let christoffel: f64 = vals.iter().map(|v| v * v).sum();
        weights.push(1.0 / christoffel);
    }
    Ok((nodes, weights))
}

/// Barycentric weights for Lagrange interpolation on `nodes`.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            let prod: f64 = nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &xk)| nodes[j] - xk)
                .product();
            1.0 / prod
        })
        .collect()
}

/// Values `ℓ_j(x)` of all Lagrange polynomials on `nodes`.
pub fn lagrange_eval(nodes: &[f64], x: f64) -> Vec<f64> {
    let n = nodes.len();
    if let Some(i) = nodes.iter().position(|&xi| xi == x) {
        let mut out = vec![0.0; n];
        out[i] = 1.0;
        return out;
    }
    let bw = barycentric_weights(nodes);
    let terms: Vec<f64> = (0..n).map(|j| bw[j] / (x - nodes[j])).collect();
    let denom: f64 = terms.iter().sum();
    terms.iter().map(|t| t / denom).collect()
}

/// Row-major `n × n` matrix with entries `ℓ_j'(x_i)`.
pub fn lagrange_derivative_matrix(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let bw = barycentric_weights(nodes);
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = bw[j] / bw[i] / (nodes[i] - nodes[j]);
                d[i * n + j] = v;
                diag -= v;
            }
        }
        d[i * n + i] = diag;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leg() -> JacobiWeight {
        JacobiWeight::LEGENDRE
    }

    #[test]
    fn constant_and_linear_legendre() {
        assert!((jacobi_eval(0, leg(), 0.3) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((jacobi_eval(1, leg(), 0.5) - 1.5f64.sqrt() * 0.5).abs() < 1e-15);
        assert_eq!(jacobi_deriv(0, JacobiWeight::new(1.0, 0.0).unwrap(), 0.2), 0.0);
        assert!((jacobi_deriv(1, leg(), -0.7) - 1.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn weight_integrals() {
        assert!((leg().integral() - 2.0).abs() < 1e-14);
        assert!((JacobiWeight::new(1.0, 0.0).unwrap().integral() - 2.0).abs() < 1e-14);
        assert!((JacobiWeight::new(2.0, 0.0).unwrap().integral() - 8.0 / 3.0).abs() < 1e-14);
        assert!(JacobiWeight::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn small_gauss_rules() {
        let r = gauss_rule(1, leg(), RuleKind::Gauss).unwrap();
        assert!(r.nodes[0].abs() < 1e-15);
        assert!((r.weights[0] - 2.0).abs() < 1e-14);

        let r = gauss_rule(2, leg(), RuleKind::Gauss).unwrap();
        let x = 1.0 / 3f64.sqrt();
        assert!((r.nodes[0] + x).abs() < 1e-15 && (r.nodes[1] - x).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-14 && (r.weights[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lobatto_and_radau_endpoints() {
        let r = gauss_rule(3, leg(), RuleKind::GaussLobatto).unwrap();
        assert_eq!(r.nodes[0], -1.0);
        assert_eq!(r.nodes[2], 1.0);
        assert!(r.nodes[1].abs() < 1e-15);
        assert!((r.weights[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((r.weights[1] - 4.0 / 3.0).abs() < 1e-14);

        let r = gauss_rule(4, JacobiWeight::new(1.0, 0.0).unwrap(), RuleKind::GaussRadau).unwrap();
        assert_eq!(r.nodes[0], -1.0);
        assert!(r.nodes.iter().all(|&x| x < 1.0));
        assert_eq!(r.exactness_degree, 6);

        assert!(gauss_rule(1, leg(), RuleKind::GaussLobatto).is_err());
        assert!(gauss_rule(0, leg(), RuleKind::Gauss).is_err());
    }

    #[test]
    fn high_degree_rule_is_stable() {
        let r = gauss_rule(50, leg(), RuleKind::Gauss).unwrap();
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        let r = gauss_rule(40, JacobiWeight::new(7.0, 0.0).unwrap(), RuleKind::Gauss).unwrap();
        let total = JacobiWeight::new(7.0, 0.0).unwrap().integral();
        assert!((r.weights.iter().sum::<f64>() - total).abs() < 1e-12 * total);
    }

    #[test]
    fn lagrange_cardinal_and_derivative() {
        let r = gauss_rule(5, leg(), RuleKind::Gauss).unwrap();
        let d = lagrange_derivative_matrix(&r.nodes);
        // derivative of x^3 at the nodes
        for i in 0..5 {
            let s: f64 = (0..5).map(|j| d[i * 5 + j] * r.nodes[j].powi(3)).sum();
            assert!((s - 3.0 * r.nodes[i].powi(2)).abs() < 1e-13);
        }
        let l = lagrange_eval(&r.nodes, 0.37);
        let s: f64 = l.iter().zip(&r.nodes).map(|(li, x)| li * x.powi(4)).sum();
        assert!((s - 0.37f64.powi(4)).abs() < 1e-14);
        assert_eq!(lagrange_eval(&r.nodes, r.nodes[2])[2], 1.0);
    }
}
