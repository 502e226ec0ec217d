//! Orthonormal Proriol-Koornwinder-Dubiner basis on the reference simplex and
//! its generalized Vandermonde matrix, applied by sum factorization on the
//! collapsed tensor-product node set.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::jacobi::{jacobi_eval_all, JacobiWeight};
use crate::refelem::{ref_to_collapsed, ElementShape, SbpOperatorSet};

/// Multi-indices of total degree `<= p`, graded; within one total degree the
/// key `(α_d, .., α_1)` increases lexicographically.
pub fn multi_indices(shape: ElementShape, p: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for total in 0..=p {
        match shape {
            ElementShape::Triangle => {
                for a2 in 0..=total {
                    out.push([total - a2, a2, 0]);
                }
            }
            ElementShape::Tetrahedron => {
                for a3 in 0..=total {
                    for a2 in 0..=total - a3 {
                        out.push([total - a3 - a2, a2, a3]);
                    }
                }
            }
        }
    }
    out
}

pub fn basis_size(shape: ElementShape, p: usize) -> usize {
    match shape {
        ElementShape::Triangle => (p + 1) * (p + 2) / 2,
        ElementShape::Tetrahedron => (p + 1) * (p + 2) * (p + 3) / 6,
    }
}

fn jw(a: f64) -> JacobiWeight {
    JacobiWeight::new(a, 0.0).expect("nonnegative exponent")
}

/// Principal functions evaluated in collapsed coordinates.
fn psi1(a1: usize, e1: f64) -> f64 {
    std::f64::consts::SQRT_2 * jacobi_eval_all(a1, JacobiWeight::LEGENDRE, e1)[a1]
}

fn psi2(a1: usize, a2: usize, e2: f64) -> f64 {
    (1.0 - e2).powi(a1 as i32) * jacobi_eval_all(a2, jw(2.0 * a1 as f64 + 1.0), e2)[a2]
}

fn psi3(s: usize, a3: usize, e3: f64) -> f64 {
    2.0 * (1.0 - e3).powi(s as i32) * jacobi_eval_all(a3, jw(2.0 * s as f64 + 2.0), e3)[a3]
}

/// PKD function with multi-index `alpha` in collapsed coordinates.
pub fn pkd_eval_collapsed(shape: ElementShape, alpha: [usize; 3], eta: [f64; 3]) -> f64 {
    let [a1, a2, a3] = alpha;
    match shape {
        ElementShape::Triangle => psi1(a1, eta[0]) * psi2(a1, a2, eta[1]),
        ElementShape::Tetrahedron => psi1(a1, eta[0]) * psi2(a1, a2, eta[1]) * psi3(a1 + a2, a3, eta[2]),
    }
}

/// PKD function at a reference point; fails at collapsed singularities.
pub fn pkd_eval(shape: ElementShape, alpha: [usize; 3], xi: [f64; 3]) -> Result<f64> {
    let eta = ref_to_collapsed(shape, xi)?;
    Ok(pkd_eval_collapsed(shape, alpha, eta))
}

/// Dense Vandermonde `V_ij = φ_j(ξ_i)` for an arbitrary node list.
pub fn build_vandermonde(shape: ElementShape, p: usize, nodes: &[[f64; 3]]) -> Result<DMatrix<f64>> {
    let idx = multi_indices(shape, p);
    let mut v = DMatrix::zeros(nodes.len(), idx.len());
    for (i, &x) in nodes.iter().enumerate() {
        let eta = ref_to_collapsed(shape, x)?;
        for (j, &a) in idx.iter().enumerate() {
            v[(i, j)] = pkd_eval_collapsed(shape, a, eta);
        }
    }
    if nodes.len() < idx.len() {
        return Err(Error::Config(format!(
            "{} nodes cannot support {} modes",
            nodes.len(),
            idx.len()
        )));
    }
    let sv = v.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::Config(format!(
            "Vandermonde matrix is rank deficient (singular value ratio {:e})",
            smin / smax
        )));
    }
    Ok(v)
}

/// Degree to which the volume rule of `ops` integrates polynomials in ξ exactly.
pub fn volume_rule_degree(ops: &SbpOperatorSet) -> i64 {
    let tau = |m: usize| ops.volume_rules[m].exactness_degree;
    // the Legendre rules must also absorb the collapse factors (1-η2), (1-η3)²
    let legendre = |m: usize| ops.config.volume_rules[m].weight.is(0.0, 0.0);
    match ops.shape() {
        ElementShape::Triangle => tau(0).min(tau(1) - legendre(1) as i64),
        ElementShape::Tetrahedron => tau(0).min(tau(1) - 1).min(tau(2) - 1 - legendre(2) as i64),
    }
}

#[derive(Debug, Clone)]
pub enum MassMatrix {
    /// `VᵀWV = I` holds because the volume rule has degree `>= 2p`.
    Identity,
    Factored(Cholesky<f64, Dyn>),
}

/// PKD basis of degree `p` tabulated on the volume nodes of an operator set.
#[derive(Debug, Clone)]
pub struct ModalBasis {
    pub shape: ElementShape,
    pub degree: usize,
    pub indices: Vec<[usize; 3]>,
    lookup: Vec<usize>,
    dims: [usize; 3],
    /// `t1[α1][a1] = ψ1`
    t1: Vec<Vec<f64>>,
    /// `t2[α1][α2][a2] = ψ2`
    t2: Vec<Vec<Vec<f64>>>,
    /// `t3[α1+α2][α3][a3] = ψ3`
    t3: Vec<Vec<Vec<f64>>>,
    pub v: DMatrix<f64>,
    pub weights: Vec<f64>,
    pub mass: MassMatrix,
}

impl ModalBasis {
    pub fn new(ops: &SbpOperatorSet, p: usize) -> Result<Self> {
        let shape = ops.shape();
        let q = ops.degree();
        if p > q {
            return Err(Error::Config(format!(
                "basis degree {p} exceeds operator degree {q}"
            )));
        }
        let indices = multi_indices(shape, p);
        let mut lookup = vec![usize::MAX; (p + 1).pow(3)];
        for (k, a) in indices.iter().enumerate() {
            lookup[a[0] + (p + 1) * (a[1] + (p + 1) * a[2])] = k;
        }
        let dims = ops.dims;
        let nodes = |m: usize| &ops.volume_rules[m].nodes;
        let t1 = (0..=p)
            .map(|a1| nodes(0).iter().map(|&x| psi1(a1, x)).collect())
            .collect();
        let t2 = (0..=p)
            .map(|a1| {
                (0..=p - a1)
                    .map(|a2| nodes(1).iter().map(|&x| psi2(a1, a2, x)).collect())
                    .collect()
            })
            .collect();
        let t3 = if shape == ElementShape::Tetrahedron {
            (0..=p)
                .map(|s| {
                    (0..=p - s)
                        .map(|a3| nodes(2).iter().map(|&x| psi3(s, a3, x)).collect())
                        .collect()
                })
                .collect()
        } else {
            Vec::new()
        };
        let mut v = DMatrix::zeros(ops.num_nodes(), indices.len());
        for (i, &eta) in ops.eta.iter().enumerate() {
            for (j, &a) in indices.iter().enumerate() {
                v[(i, j)] = pkd_eval_collapsed(shape, a, eta);
            }
        }
        let w = DMatrix::from_diagonal(&DVector::from_vec(ops.weights.clone()));
        let m = v.transpose() * &w * &v;
        let mass = if volume_rule_degree(ops) >= 2 * p as i64 {
            let dev = (&m - DMatrix::identity(m.nrows(), m.ncols())).amax();
            if dev > 1e-10 {
                return Err(Error::Config(format!(
                    "mass matrix deviates from identity by {dev:e} despite a degree {} rule",
                    volume_rule_degree(ops)
                )));
            }
            MassMatrix::Identity
        } else {
            MassMatrix::Factored(m.cholesky().ok_or_else(|| {
                Error::Config("modal mass matrix is singular on this node set".into())
            })?)
        };
        Ok(Self {
            shape,
            degree: p,
            indices,
            lookup,
            dims,
            t1,
            t2,
            t3,
            v,
            weights: ops.weights.clone(),
            mass,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.weights.len()
    }

    fn pos(&self, a1: usize, a2: usize, a3: usize) -> usize {
        let p = self.degree;
        self.lookup[a1 + (p + 1) * (a2 + (p + 1) * a3)]
    }

    /// Nodal values `V c` by sum factorization.
    pub fn apply_v(&self, c: &[f64], out: &mut [f64]) -> Result<()> {
        if c.len() != self.len() {
            return Err(Error::Dimension { expected: self.len(), got: c.len() });
        }
        if out.len() != self.num_nodes() {
            return Err(Error::Dimension { expected: self.num_nodes(), got: out.len() });
        }
        let p = self.degree;
        let [n1, n2, n3] = self.dims;
        out.fill(0.0);
        match self.shape {
            ElementShape::Triangle => {
                let mut g = vec![0.0; n2];
                for a1 in 0..=p {
                    g.fill(0.0);
                    for a2 in 0..=p - a1 {
                        let ck = c[self.pos(a1, a2, 0)];
                        for (gi, t) in g.iter_mut().zip(&self.t2[a1][a2]) {
                            *gi += ck * t;
                        }
                    }
                    let t1 = &self.t1[a1];
                    for (i2, &gv) in g.iter().enumerate() {
                        let row = &mut out[i2 * n1..(i2 + 1) * n1];
                        for (o, t) in row.iter_mut().zip(t1) {
                            *o += gv * t;
                        }
                    }
                }
            }
            ElementShape::Tetrahedron => {
                let mut h = vec![0.0; n3];
                let mut g = vec![0.0; n2 * n3];
                for a1 in 0..=p {
                    g.fill(0.0);
                    for a2 in 0..=p - a1 {
                        h.fill(0.0);
                        let s = a1 + a2;
                        for a3 in 0..=p - s {
                            let ck = c[self.pos(a1, a2, a3)];
                            for (hi, t) in h.iter_mut().zip(&self.t3[s][a3]) {
                                *hi += ck * t;
                            }
                        }
                        let t2 = &self.t2[a1][a2];
                        for (i3, &hv) in h.iter().enumerate() {
                            let row = &mut g[i3 * n2..(i3 + 1) * n2];
                            for (gi, t) in row.iter_mut().zip(t2) {
                                *gi += hv * t;
                            }
                        }
                    }
                    let t1 = &self.t1[a1];
                    for (j, &gv) in g.iter().enumerate() {
                        let row = &mut out[j * n1..(j + 1) * n1];
                        for (o, t) in row.iter_mut().zip(t1) {
                            *o += gv * t;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `Vᵀ u` by sum factorization.
    pub fn apply_vt(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        if u.len() != self.num_nodes() {
            return Err(Error::Dimension { expected: self.num_nodes(), got: u.len() });
        }
        if out.len() != self.len() {
            return Err(Error::Dimension { expected: self.len(), got: out.len() });
        }
        let p = self.degree;
        let [n1, n2, n3] = self.dims;
        match self.shape {
            ElementShape::Triangle => {
                let mut g = vec![0.0; n2];
                for a1 in 0..=p {
                    let t1 = &self.t1[a1];
                    for (i2, gv) in g.iter_mut().enumerate() {
                        let row = &u[i2 * n1..(i2 + 1) * n1];
                        *gv = row.iter().zip(t1).map(|(x, t)| x * t).sum();
                    }
                    for a2 in 0..=p - a1 {
                        let k = self.pos(a1, a2, 0);
                        out[k] = g.iter().zip(&self.t2[a1][a2]).map(|(x, t)| x * t).sum();
                    }
                }
            }
            ElementShape::Tetrahedron => {
                let mut g = vec![0.0; n2 * n3];
                let mut h = vec![0.0; n3];
                for a1 in 0..=p {
                    let t1 = &self.t1[a1];
                    for (j, gv) in g.iter_mut().enumerate() {
                        let row = &u[j * n1..(j + 1) * n1];
                        *gv = row.iter().zip(t1).map(|(x, t)| x * t).sum();
                    }
                    for a2 in 0..=p - a1 {
                        let t2 = &self.t2[a1][a2];
                        for (i3, hv) in h.iter_mut().enumerate() {
                            let row = &g[i3 * n2..(i3 + 1) * n2];
                            *hv = row.iter().zip(t2).map(|(x, t)| x * t).sum();
                        }
                        let s = a1 + a2;
                        for a3 in 0..=p - s {
                            let k = self.pos(a1, a2, a3);
                            out[k] = h.iter().zip(&self.t3[s][a3]).map(|(x, t)| x * t).sum();
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Solves `M c = b` with the reference mass matrix.
    pub fn solve_mass(&self, b: &mut [f64]) {
        if let MassMatrix::Factored(ch) = &self.mass {
            let x = ch.solve(&DVector::from_column_slice(b));
            b.copy_from_slice(x.as_slice());
        }
    }

    /// Discrete L² projection of nodal values onto the basis.
    pub fn modal_projection(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.num_nodes() {
            return Err(Error::Dimension { expected: self.num_nodes(), got: u.len() });
        }
        let wu: Vec<f64> = u.iter().zip(&self.weights).map(|(x, w)| x * w).collect();
        let mut c = vec![0.0; self.len()];
        self.apply_vt(&wu, &mut c)?;
        self.solve_mass(&mut c);
        Ok(c)
    }
}
