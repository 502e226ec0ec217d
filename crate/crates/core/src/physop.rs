//! Geometric factors on curved elements and the split-form physical SBP
//! operators built from them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{determinant, MappingTable, Mesh};
use crate::pkd::ModalBasis;
use crate::refelem::{ElementShape, SbpOperatorSet};

/// Mapping basis tabulated at the volume and facet nodes of an operator set.
#[derive(Debug, Clone)]
pub struct GeometryTables {
    pub volume: MappingTable,
    pub facets: Vec<MappingTable>,
}

impl GeometryTables {
    pub fn new(shape: ElementShape, mapping_degree: usize, ops: &SbpOperatorSet) -> Self {
        Self {
            volume: MappingTable::new(shape, mapping_degree, &ops.eta),
            facets: ops
                .facets
                .iter()
                .map(|f| MappingTable::new(shape, mapping_degree, &f.eta))
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FacetGeometry {
    pub x: Vec<[f64; 3]>,
    /// Facet area scaling `J^(κ,ζ)`.
    pub j: Vec<f64>,
    /// Outward unit normals in physical space.
    pub normal: Vec<[f64; 3]>,
}

#[derive(Debug, Clone)]
pub struct ElementGeometry {
    pub x: Vec<[f64; 3]>,
    pub j: Vec<f64>,
    /// `lambda[i][l][m] = J ∂ξ_l/∂x_m` at volume node i.
    pub lambda: Vec<[[f64; 3]; 3]>,
    pub facets: Vec<FacetGeometry>,
}

/// `adj(A)` with `A[a][l] = ∂x_a/∂ξ_l`, so that `adj(A) = det(A) A⁻¹`.
pub fn adjugate(dim: usize, a: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut r = [[0.0; 3]; 3];
    if dim == 2 {
        r[0][0] = a[1][1];
        r[0][1] = -a[0][1];
        r[1][0] = -a[1][0];
        r[1][1] = a[0][0];
    } else {
        for i in 0..3 {
            for j in 0..3 {
                // cofactor C_ji placed at (i, j)
                let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                r[i][j] = a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
            }
        }
    }
    r
}

/// Evaluates the mapping of element `k` analytically at every quadrature node.
pub fn compute_geometry(
    mesh: &Mesh,
    k: usize,
    ops: &SbpOperatorSet,
    tables: &GeometryTables,
) -> Result<ElementGeometry> {
    let dim = mesh.dim();
    let x = mesh.map_points(k, &tables.volume);
    let jacs = mesh.map_jacobians(k, &tables.volume);
    let mut j = Vec::with_capacity(jacs.len());
    let mut lambda = Vec::with_capacity(jacs.len());
    for a in &jacs {
        let det = determinant(dim, a);
        if !(det > 0.0) {
            return Err(Error::Geometry {
                element: k,
                msg: format!("nonpositive Jacobian {det:e} at a volume node"),
            });
        }
        j.push(det);
        lambda.push(adjugate(dim, a));
    }
    let mut facets = Vec::with_capacity(ops.facets.len());
    for (z, f) in ops.facets.iter().enumerate() {
        let table = &tables.facets[z];
        let fx = mesh.map_points(k, table);
        let n_hat = f.normal;
        let mut fj = Vec::with_capacity(fx.len());
        let mut normal = Vec::with_capacity(fx.len());
        for a in mesh.map_jacobians(k, table) {
            if !(determinant(dim, &a) > 0.0) {
                return Err(Error::Geometry {
                    element: k,
                    msg: format!("nonpositive Jacobian at a node of facet {z}"),
                });
            }
            let adj = adjugate(dim, &a);
            // Nanson: J^ζ N = J (∇ξ x)^{-T} n̂
            let mut v = [0.0; 3];
            for (m, vm) in v.iter_mut().enumerate().take(dim) {
                *vm = (0..dim).map(|l| adj[l][m] * n_hat[l]).sum();
            }
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            fj.push(norm);
            normal.push([v[0] / norm, v[1] / norm, v[2] / norm]);
        }
        facets.push(FacetGeometry { x: fx, j: fj, normal });
    }
    Ok(ElementGeometry { x, j, lambda, facets })
}

pub fn compute_all_geometry(mesh: &Mesh, ops: &SbpOperatorSet) -> Result<Vec<ElementGeometry>> {
    let tables = GeometryTables::new(mesh.shape, mesh.mapping.degree, ops);
    (0..mesh.num_elements())
        .map(|k| compute_geometry(mesh, k, ops, &tables))
        .collect()
}

/// Whether the mapping degree guarantees the discrete metric identities for
/// operators of degree `p`.
pub fn metric_degree_ok(shape: ElementShape, p: usize, pg: usize) -> bool {
    match shape {
        ElementShape::Triangle => pg <= p + 1,
        ElementShape::Tetrahedron => pg <= p / 2 + 1,
    }
}

pub fn check_metric_degree(shape: ElementShape, p: usize, pg: usize) -> Result<()> {
    if metric_degree_ok(shape, p, pg) {
        Ok(())
    } else {
        let bound = match shape {
            ElementShape::Triangle => format!("p + 1 = {}", p + 1),
            ElementShape::Tetrahedron => format!("floor(p/2) + 1 = {}", p / 2 + 1),
        };
        Err(Error::Config(format!(
            "mapping degree {pg} exceeds {bound}; metric identities are not guaranteed"
        )))
    }
}

/// Dense physical operators `Q^(κ,m)` and `E^(κ,m)` (split form).
#[derive(Debug, Clone)]
pub struct PhysicalSbp {
    pub q: Vec<DMatrix<f64>>,
    pub e: Vec<DMatrix<f64>>,
}

pub fn physical_sbp_matrices(geom: &ElementGeometry, ops: &SbpOperatorSet) -> PhysicalSbp {
    let dim = ops.dim();
    let n = ops.num_nodes();
    let mut e = vec![DMatrix::zeros(n, n); dim];
    for (f, fg) in ops.facets.iter().zip(&geom.facets) {
        for (m, em) in e.iter_mut().enumerate() {
            let diag: Vec<f64> = f
                .weights
                .iter()
                .zip(&fg.j)
                .zip(&fg.normal)
                .map(|((w, j), nrm)| w * j * nrm[m])
                .collect();
            let scaled = DMatrix::from_fn(f.len(), n, |i, c| diag[i] * f.r[(i, c)]);
            *em += f.r.transpose() * scaled;
        }
    }
    let mut q = Vec::with_capacity(dim);
    for (m, em) in e.iter().enumerate() {
        let mut qm = em * 0.5;
        for l in 0..dim {
            let wl: Vec<f64> = (0..n).map(|i| ops.weights[i] * geom.lambda[i][l][m]).collect();
            let a = DMatrix::from_fn(n, n, |i, c| wl[i] * ops.d[l][(i, c)]);
            qm += (&a - a.transpose()) * 0.5;
        }
        q.push(qm);
    }
    PhysicalSbp { q, e }
}

/// `max_m |D^(κ,m) 1|`, evaluated by sum factorization.
pub fn metric_identity_residual(geom: &ElementGeometry, ops: &SbpOperatorSet) -> f64 {
    let dim = ops.dim();
    let n = ops.num_nodes();
    let mut acc = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut bufs = [Vec::new(), Vec::new()];
    let mut worst = 0.0f64;
    for m in 0..dim {
        acc.fill(0.0);
        for (z, (f, fg)) in ops.facets.iter().zip(&geom.facets).enumerate() {
            let bjn: Vec<f64> = f
                .weights
                .iter()
                .zip(&fg.j)
                .zip(&fg.normal)
                .map(|((w, j), nrm)| w * j * nrm[m])
                .collect();
            ops.apply_rt(z, &bjn, &mut tmp, &mut bufs);
            for (a, t) in acc.iter_mut().zip(&tmp) {
                *a += t;
            }
        }
        for l in 0..dim {
            // D^lᵀ (W Λ^{lm}) = Σ_n Dη_nᵀ (g_nl W Λ^{lm})
            for nn in 0..dim {
                for i in 0..n {
                    v[i] = ops.chain[i][nn][l] * ops.weights[i] * geom.lambda[i][l][m];
                }
                ops.apply_deta_t(nn, &v, &mut tmp);
                for (a, t) in acc.iter_mut().zip(&tmp) {
                    *a -= t;
                }
            }
        }
        for i in 0..n {
            worst = worst.max((0.5 * acc[i] / (ops.weights[i] * geom.j[i])).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Sum-factorized reference operators with fused diagonal geometric factors.
    ReferenceFused,
    /// Dense per-element physical operator matrices.
    PhysicalPrecomputed,
}

/// Per-element data consumed by the residual evaluation.
#[derive(Debug, Clone)]
pub enum PhysicalOperators {
    ReferenceFused {
        /// `fused[i][l][m] = ½ ω_i Σ_n Λ^{nm} ∂η_l/∂ξ_n` at node i.
        fused: Vec<[[f64; 3]; 3]>,
        /// `B^(ζ) J^(κ,ζ)` per facet node.
        bj: Vec<Vec<f64>>,
        normals: Vec<Vec<[f64; 3]>>,
    },
    PhysicalPrecomputed {
        /// `(Q^(κ,m))ᵀ`
        qt: Vec<DMatrix<f64>>,
        /// `R^(ζ)ᵀ B^(ζ) J^(κ,ζ)`
        lift: Vec<DMatrix<f64>>,
        normals: Vec<Vec<[f64; 3]>>,
    },
}

pub fn build_physical_operators(
    geom: &ElementGeometry,
    ops: &SbpOperatorSet,
    algorithm: Algorithm,
) -> PhysicalOperators {
    let dim = ops.dim();
    let normals: Vec<Vec<[f64; 3]>> = geom.facets.iter().map(|f| f.normal.clone()).collect();
    match algorithm {
        Algorithm::ReferenceFused => {
            let fused = (0..ops.num_nodes())
                .map(|i| {
                    let g = &ops.chain[i];
                    let lam = &geom.lambda[i];
                    let mut f = [[0.0; 3]; 3];
                    for (l, fl) in f.iter_mut().enumerate().take(dim) {
                        for (m, flm) in fl.iter_mut().enumerate().take(dim) {
                            *flm = 0.5 * ops.weights[i] * (0..dim).map(|n| lam[n][m] * g[l][n]).sum::<f64>();
                        }
                    }
                    f
                })
                .collect();
            let bj = ops
                .facets
                .iter()
                .zip(&geom.facets)
                .map(|(f, fg)| f.weights.iter().zip(&fg.j).map(|(w, j)| w * j).collect())
                .collect();
            PhysicalOperators::ReferenceFused { fused, bj, normals }
        }
        Algorithm::PhysicalPrecomputed => {
            let sbp = physical_sbp_matrices(geom, ops);
            let qt = sbp.q.iter().map(|q| q.transpose()).collect();
            let lift = ops
                .facets
                .iter()
                .zip(&geom.facets)
                .map(|(f, fg)| {
                    let bj: Vec<f64> = f.weights.iter().zip(&fg.j).map(|(w, j)| w * j).collect();
                    DMatrix::from_fn(ops.num_nodes(), f.len(), |i, c| f.r[(c, i)] * bj[c])
                })
                .collect();
            PhysicalOperators::PhysicalPrecomputed { qt, lift, normals }
        }
    }
}

/// Nodal values of the degree-p L² projection of `J`, which must stay positive.
pub fn project_jacobian(geom: &ElementGeometry, basis: &ModalBasis, element: usize) -> Result<Vec<f64>> {
    let c = basis.modal_projection(&geom.j)?;
    let mut out = vec![0.0; basis.num_nodes()];
    basis.apply_v(&c, &mut out)?;
    if let Some(bad) = out.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Geometry {
            element,
            msg: format!("projected Jacobian is nonpositive ({bad:e})"),
        });
    }
    Ok(out)
}

/// `M⁻¹ Vᵀ [W / J] V M⁻¹ r̃` applied by sum factorization; `w_over_j` holds the
/// nodal values of `W J⁻¹`.
pub fn weight_adjusted_apply(
    basis: &ModalBasis,
    w_over_j: &[f64],
    r: &[f64],
    out: &mut [f64],
    nodal: &mut [f64],
) -> Result<()> {
    let mut rr = r.to_vec();
    basis.solve_mass(&mut rr);
    basis.apply_v(&rr, nodal)?;
    for (v, s) in nodal.iter_mut().zip(w_over_j) {
        *v *= s;
    }
    basis.apply_vt(nodal, out)?;
    basis.solve_mass(out);
    Ok(())
}

/// Dense `(M̃^(κ))⁻¹ = M⁻¹ Vᵀ W J⁻¹ V M⁻¹`.
pub fn weight_adjusted_inverse_dense(basis: &ModalBasis, w_over_j: &[f64]) -> DMatrix<f64> {
    let scaled = DMatrix::from_fn(basis.num_nodes(), basis.len(), |i, c| w_over_j[i] * basis.v[(i, c)]);
    let mut a = basis.v.transpose() * scaled;
    if let crate::pkd::MassMatrix::Factored(ch) = &basis.mass {
        let minv = ch.inverse();
        a = &minv * a * &minv;
    }
    a
}

/// Dense physical mass matrix `Vᵀ W J V`.
pub fn physical_mass_dense(basis: &ModalBasis, j: &[f64]) -> DMatrix<f64> {
    let wj = DVector::from_iterator(j.len(), j.iter().zip(&basis.weights).map(|(a, b)| a * b));
    let scaled = DMatrix::from_fn(basis.num_nodes(), basis.len(), |i, c| wj[i] * basis.v[(i, c)]);
    basis.v.transpose() * scaled
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, DEFAULT_WARP};
    use crate::refelem::{build_operators, OperatorConfig};

    #[test]
    fn affine_triangle_jacobian() {
        let mesh = generate_mesh(ElementShape::Triangle, 1, 1, 0.0).unwrap();
        let ops = build_operators(&OperatorConfig::default_for(ElementShape::Triangle, 3)).unwrap();
        let geo = compute_all_geometry(&mesh, &ops).unwrap();
        for g in &geo {
            for &j in &g.j {
                assert!((j - 0.25).abs() < 1e-14);
            }
        }
        // element 0 maps V1,V2,V3 to (0,0),(1,0),(1,1): ∂x/∂ξ = [[1/2, 0],[0, 1/2]] + shear
        let lam = geo[0].lambda[0];
        // x = (λ2 + λ3, λ3) -> ∂x1/∂ξ1 = 1/2, ∂x1/∂ξ2 = 1/2, ∂x2/∂ξ1 = 0, ∂x2/∂ξ2 = 1/2
        let a = [[0.5, 0.5], [0.0, 0.5]];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let inv = [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]];
        for l in 0..2 {
            for m in 0..2 {
                assert!((lam[l][m] - det * inv[l][m]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn curved_sbp_identity_and_metric_identities() {
        for (shape, p, pg) in [(ElementShape::Triangle, 4, 3), (ElementShape::Tetrahedron, 2, 2)] {
            let mesh = generate_mesh(shape, 2, pg, DEFAULT_WARP).unwrap();
            let ops = build_operators(&OperatorConfig::default_for(shape, p)).unwrap();
            let geo = compute_all_geometry(&mesh, &ops).unwrap();
            for g in geo.iter().take(6) {
                let sbp = physical_sbp_matrices(g, &ops);
                for m in 0..shape.dim() {
                    let res = (&sbp.q[m] + sbp.q[m].transpose() - &sbp.e[m]).amax();
                    assert!(res < 1e-12, "{res}");
                }
                assert!(metric_identity_residual(g, &ops) < 1e-11);
            }
        }
    }

    #[test]
    fn metric_identities_fail_for_excessive_mapping_degree() {
        let shape = ElementShape::Tetrahedron;
        let mesh = generate_mesh(shape, 3, 3, DEFAULT_WARP).unwrap();
        let ops = build_operators(&OperatorConfig::default_for(shape, 2)).unwrap();
        assert!(check_metric_degree(shape, 2, 3).is_err());
        let geo = compute_all_geometry(&mesh, &ops).unwrap();
        let worst = geo.iter().map(|g| metric_identity_residual(g, &ops)).fold(0.0, f64::max);
        assert!(worst > 1e-8, "{worst}");
    }
}
