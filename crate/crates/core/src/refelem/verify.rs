use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::SbpOperatorSet;
use crate::monomial;

/// Residuals of the defining properties of an SBP operator set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SbpReport {
    pub degree: usize,
    pub sbp_certified: bool,
    pub weights_positive: bool,
    /// `max |Q + Qᵀ - E|` per direction.
    pub sbp_identity: Vec<f64>,
    /// Highest total degree checked for the volume rule.
    pub quadrature_degree: usize,
    pub quadrature: f64,
    /// Monomial differentiation error, scaled by `max(1, |exact|_∞)`.
    pub differentiation: f64,
    pub extrapolation: f64,
    /// `|uᵀ E v - ∫ ∂(uv)/∂ξ_m|` over monomial pairs, per direction.
    pub facet_condition: Vec<f64>,
    pub constant_rows: f64,
    /// Difference between sum-factorized and dense application.
    pub factor_consistency: f64,
}

impl SbpReport {
    pub fn max_sbp_identity(&self) -> f64 {
        self.sbp_identity.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_facet_condition(&self) -> f64 {
        self.facet_condition.iter().copied().fold(0.0, f64::max)
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
}

struct ExactIntegrals {
    dim: usize,
    cache: HashMap<[usize; 3], f64>,
}

impl ExactIntegrals {
    fn get(&mut self, e: [usize; 3]) -> f64 {
        let dim = self.dim;
        *self
            .cache
            .entry(e)
            .or_insert_with(|| monomial::reference_integral(dim, e))
    }
}

/// Checks the SBP identity, quadrature exactness, accuracy of differentiation
/// and extrapolation, and the facet condition against exact monomial integrals.
pub fn verify_sbp(ops: &SbpOperatorSet) -> SbpReport {
    let dim = ops.dim();
    let q = ops.degree();
    let n = ops.num_nodes();
    let mut exact = ExactIntegrals {
        dim,
        cache: HashMap::new(),
    };

    let sbp_identity = (0..dim)
        .map(|m| max_abs(&(&ops.q[m] + ops.q[m].transpose() - &ops.e[m])))
        .collect();

    let quadrature_degree = (2 * q).saturating_sub(1);
    let mut quadrature = 0.0f64;
    for e in monomial::exponents(dim, quadrature_degree) {
        let approx: f64 = ops
            .xi
            .iter()
            .zip(&ops.weights)
            .map(|(&x, &w)| w * monomial::eval(e, x))
            .sum();
        quadrature = quadrature.max((approx - exact.get(e)).abs());
    }

    let monos = monomial::exponents(dim, q);
    let values: Vec<DVector<f64>> = monos
        .iter()
        .map(|&e| DVector::from_iterator(n, ops.xi.iter().map(|&x| monomial::eval(e, x))))
        .collect();

    let mut differentiation = 0.0f64;
    for (e, v) in monos.iter().zip(&values) {
        for m in 0..dim {
            let got = &ops.d[m] * v;
            let want = DVector::from_iterator(n, ops.xi.iter().map(|&x| monomial::eval_derivative(*e, m, x)));
            let scale = want.amax().max(1.0);
            differentiation = differentiation.max((got - want).amax() / scale);
        }
    }

    let mut extrapolation = 0.0f64;
    for (e, v) in monos.iter().zip(&values) {
        for f in &ops.facets {
            let got = &f.r * v;
            for (g, &x) in got.iter().zip(&f.xi) {
                extrapolation = extrapolation.max((g - monomial::eval(*e, x)).abs());
            }
        }
    }

    let mut facet_condition = vec![0.0f64; dim];
    for (m, fc) in facet_condition.iter_mut().enumerate() {
        let ev: Vec<DVector<f64>> = values.iter().map(|v| &ops.e[m] * v).collect();
        for (a, u) in monos.iter().zip(&values) {
            for (b, ebv) in monos.iter().zip(&ev) {
                let s = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
                // divergence theorem: ∮ uv n_m = ∫ ∂(uv)/∂ξ_m
                let want = if s[m] == 0 {
                    0.0
                } else {
                    let mut r = s;
                    r[m] -= 1;
                    s[m] as f64 * exact.get(r)
                };
                let got = u.dot(ebv);
                *fc = fc.max((got - want).abs() / want.abs().max(1.0));
            }
        }
    }

    let ones = DVector::from_element(n, 1.0);
    let constant_rows = (0..dim).map(|m| (&ops.d[m] * &ones).amax()).fold(0.0, f64::max);

    let mut factor_consistency = 0.0f64;
    let mut out = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut bufs = [Vec::new(), Vec::new()];
    for j in 0..n {
        let mut unit = vec![0.0; n];
        unit[j] = 1.0;
        for m in 0..dim {
            ops.apply_d(m, &unit, &mut out, &mut tmp);
            for (i, o) in out.iter().enumerate() {
                factor_consistency = factor_consistency.max((o - ops.d[m][(i, j)]).abs());
            }
        }
        for (z, f) in ops.facets.iter().enumerate() {
            let mut fo = vec![0.0; f.len()];
            ops.apply_r(z, &unit, &mut fo, &mut bufs);
            for (i, o) in fo.iter().enumerate() {
                factor_consistency = factor_consistency.max((o - f.r[(i, j)]).abs());
            }
        }
    }

    SbpReport {
        degree: q,
        sbp_certified: ops.certificate.sbp_certified,
        weights_positive: ops.weights.iter().all(|&w| w > 0.0),
        sbp_identity,
        quadrature_degree,
        quadrature,
        differentiation,
        extrapolation,
        facet_condition,
        constant_rows,
        factor_consistency,
    }
}
