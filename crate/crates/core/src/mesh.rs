//! Periodic simplicial meshes of the unit square/cube with polynomial
//! (optionally warped) element mappings and facet connectivity.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monomial;
use crate::pkd::{multi_indices, pkd_eval_collapsed};
use crate::refelem::{build_operators, chain_factors, ElementShape, OperatorConfig, SbpOperatorSet};
use crate::jacobi::{gauss_rule, jacobi_deriv, jacobi_eval, JacobiWeight, RuleKind};

/// Warp amplitude used for the curvilinear test meshes.
pub const DEFAULT_WARP: f64 = 1.0 / 16.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Element {
    /// Lattice coordinates of the local vertices (in local vertex order).
    pub vertices: Vec<[i64; 3]>,
}

/// Per-element mapping `x(ξ) = Σ_j c_j φ_j(ξ)` in the PKD basis of degree `degree`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshMapping {
    pub degree: usize,
    /// `coefficients[κ][j]` is the physical-coordinate coefficient of mode j.
    pub coefficients: Vec<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mesh {
    pub shape: ElementShape,
    /// Cells per direction.
    pub cells: usize,
    pub epsilon: f64,
    pub elements: Vec<Element>,
    pub mapping: MeshMapping,
}

/// Partner of a facet: `perm[i]` is the node on the partner facet that
/// coincides with node `i` of this facet.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FacetLink {
    pub element: usize,
    pub facet: usize,
    pub perm: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Connectivity {
    pub links: Vec<Vec<FacetLink>>,
}

impl Connectivity {
    pub fn partner(&self, element: usize, facet: usize) -> &FacetLink {
        &self.links[element][facet]
    }
}

/// Sequential warp of the unit square (cube) that keeps it periodic.
pub fn warp(dim: usize, x: [f64; 3], eps: f64) -> [f64; 3] {
    use std::f64::consts::PI;
    let c = |k: f64, v: f64| (k * PI * (v - 0.5)).cos();
    let s = |k: f64, v: f64| (k * PI * (v - 0.5)).sin();
    if eps == 0.0 {
        return x;
    }
    if dim == 2 {
        let x1 = x[0] + eps * c(1.0, x[0]) * c(3.0, x[1]);
        let x2 = x[1] + eps * s(4.0, x1) * c(1.0, x[1]);
        [x1, x2, 0.0]
    } else {
        let x2 = x[1] + eps * c(3.0, x[0]) * c(1.0, x[1]) * c(1.0, x[2]);
        let x1 = x[0] + eps * c(1.0, x[0]) * s(4.0, x2) * c(1.0, x[2]);
        let x3 = x[2] + eps * c(1.0, x1) * c(2.0, x2) * c(1.0, x[2]);
        [x1, x2, x3]
    }
}

/// Barycentric coordinates on the reference element (vertex order V1..V_{d+1}).
pub fn barycentric(shape: ElementShape, xi: [f64; 3]) -> Vec<f64> {
    match shape {
        ElementShape::Triangle => vec![-0.5 * (xi[0] + xi[1]), 0.5 * (1.0 + xi[0]), 0.5 * (1.0 + xi[1])],
        ElementShape::Tetrahedron => vec![
            -0.5 * (1.0 + xi[0] + xi[1] + xi[2]),
            0.5 * (1.0 + xi[0]),
            0.5 * (1.0 + xi[1]),
            0.5 * (1.0 + xi[2]),
        ],
    }
}

/// Barycentric lattice of degree `pg` with the edge nodes moved to the
/// Gauss-Lobatto points; for `pg <= 3` this is the warp-and-blend node set.
pub fn mapping_interpolation_nodes(shape: ElementShape, pg: usize) -> Result<Vec<[f64; 3]>> {
    if pg == 0 || pg > 4 {
        return Err(Error::Config(format!("mapping degree {pg} outside the supported range 1..=4")));
    }
    let gll = gauss_rule(pg + 1, JacobiWeight::LEGENDRE, RuleKind::GaussLobatto)?.nodes;
    let verts = shape.vertices();
    let nv = verts.len();
    let mut lattice = Vec::new();
    let mut k = vec![0usize; nv];
    fn rec(i: usize, left: usize, k: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i + 1 == k.len() {
            k[i] = left;
            out.push(k.clone());
            return;
        }
        for ki in (0..=left).rev() {
            k[i] = ki;
            rec(i + 1, left - ki, k, out);
        }
    }
    rec(0, pg, &mut k, &mut lattice);
    Ok(lattice
        .iter()
        .map(|k| {
            let mut lam: Vec<f64> = k.iter().map(|&kv| kv as f64 / pg as f64).collect();
            let support: Vec<usize> = (0..nv).filter(|&v| k[v] > 0).collect();
            if let [a, b] = support[..] {
                let t = 0.5 * (1.0 + gll[k[b]]);
                lam[a] = 1.0 - t;
                lam[b] = t;
            }
            let mut x = [0.0; 3];
            for (v, l) in verts.iter().zip(&lam) {
                for c in 0..3 {
                    x[c] += l * v[c];
                }
            }
            x
        })
        .collect())
}

/// PKD values and reference gradients of the mapping basis at a node set.
#[derive(Debug, Clone)]
pub struct MappingTable {
    pub phi: Vec<Vec<f64>>,
    /// `grad[i][j][l] = ∂φ_j/∂ξ_l` at node i.
    pub grad: Vec<Vec<[f64; 3]>>,
}

fn jw(a: f64) -> JacobiWeight {
    JacobiWeight::new(a, 0.0).expect("nonnegative exponent")
}

/// Value and collapsed-coordinate gradient of one PKD function.
fn pkd_with_gradient(shape: ElementShape, a: [usize; 3], eta: [f64; 3]) -> (f64, [f64; 3]) {
    let [a1, a2, a3] = a;
    let sq2 = std::f64::consts::SQRT_2;
    let f1 = sq2 * jacobi_eval(a1, JacobiWeight::LEGENDRE, eta[0]);
    let d1 = sq2 * jacobi_deriv(a1, JacobiWeight::LEGENDRE, eta[0]);
    let w2 = jw(2.0 * a1 as f64 + 1.0);
    let p2 = jacobi_eval(a2, w2, eta[1]);
    let dp2 = jacobi_deriv(a2, w2, eta[1]);
    let s2 = 1.0 - eta[1];
    let f2 = s2.powi(a1 as i32) * p2;
    let d2 = s2.powi(a1 as i32) * dp2 - if a1 > 0 { a1 as f64 * s2.powi(a1 as i32 - 1) * p2 } else { 0.0 };
    match shape {
        ElementShape::Triangle => (f1 * f2, [d1 * f2, f1 * d2, 0.0]),
        ElementShape::Tetrahedron => {
            let s = a1 + a2;
            let w3 = jw(2.0 * s as f64 + 2.0);
            let p3 = jacobi_eval(a3, w3, eta[2]);
            let dp3 = jacobi_deriv(a3, w3, eta[2]);
            let s3 = 1.0 - eta[2];
            let f3 = 2.0 * s3.powi(s as i32) * p3;
            let d3 = 2.0 * (s3.powi(s as i32) * dp3 - if s > 0 { s as f64 * s3.powi(s as i32 - 1) * p3 } else { 0.0 });
            (f1 * f2 * f3, [d1 * f2 * f3, f1 * d2 * f3, f1 * f2 * d3])
        }
    }
}

impl MappingTable {
    /// Tabulates the degree-`pg` basis at points given in collapsed coordinates
    /// (which must avoid `η2 = 1`, `η3 = 1`).
    pub fn new(shape: ElementShape, pg: usize, eta: &[[f64; 3]]) -> Self {
        let idx = multi_indices(shape, pg);
        let dim = shape.dim();
        let mut phi = Vec::with_capacity(eta.len());
        let mut grad = Vec::with_capacity(eta.len());
        for &e in eta {
            let g = chain_factors(shape, e);
            let mut prow = Vec::with_capacity(idx.len());
            let mut grow = Vec::with_capacity(idx.len());
            for &a in &idx {
                let (v, de) = pkd_with_gradient(shape, a, e);
                let mut dx = [0.0; 3];
                for (l, dxl) in dx.iter_mut().enumerate().take(dim) {
                    *dxl = (0..dim).map(|n| de[n] * g[n][l]).sum();
                }
                prow.push(v);
                grow.push(dx);
            }
            phi.push(prow);
            grad.push(grow);
        }
        Self { phi, grad }
    }
}

impl Mesh {
    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    /// Physical coordinates at the tabulated nodes of element `k`.
    pub fn map_points(&self, k: usize, table: &MappingTable) -> Vec<[f64; 3]> {
        let c = &self.mapping.coefficients[k];
        table
            .phi
            .iter()
            .map(|row| {
                let mut x = [0.0; 3];
                for (cj, pj) in c.iter().zip(row) {
                    for d in 0..3 {
                        x[d] += cj[d] * pj;
                    }
                }
                x
            })
            .collect()
    }

    /// Jacobian matrices `J[i][a][l] = ∂x_a/∂ξ_l` at the tabulated nodes of element `k`.
    pub fn map_jacobians(&self, k: usize, table: &MappingTable) -> Vec<[[f64; 3]; 3]> {
        let c = &self.mapping.coefficients[k];
        let dim = self.dim();
        table
            .grad
            .iter()
            .map(|row| {
                let mut jac = [[0.0; 3]; 3];
                for (cj, gj) in c.iter().zip(row) {
                    for a in 0..dim {
                        for l in 0..dim {
                            jac[a][l] += cj[a] * gj[l];
                        }
                    }
                }
                jac
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn lattice_elements(shape: ElementShape, m: usize) -> Vec<Element> {
    let m = m as i64;
    let mut out = Vec::new();
    match shape {
        ElementShape::Triangle => {
            for j in 0..m {
                for i in 0..m {
                    let v00 = [i, j, 0];
                    let v10 = [i + 1, j, 0];
                    let v11 = [i + 1, j + 1, 0];
                    let v01 = [i, j + 1, 0];
                    out.push(Element { vertices: vec![v00, v10, v11] });
                    out.push(Element { vertices: vec![v00, v11, v01] });
                }
            }
        }
        ElementShape::Tetrahedron => {
            // Kuhn split: one tetrahedron per monotone lattice path through the cube
            const PERMS: [([usize; 3], bool); 6] = [
                ([0, 1, 2], true),
                ([1, 2, 0], true),
                ([2, 0, 1], true),
                ([0, 2, 1], false),
                ([2, 1, 0], false),
                ([1, 0, 2], false),
            ];
            for k in 0..m {
                for j in 0..m {
                    for i in 0..m {
                        for (perm, even) in PERMS {
                            let mut path = vec![[i, j, k]];
                            let mut cur = [i, j, k];
                            for &ax in &perm {
                                cur[ax] += 1;
                                path.push(cur);
                            }
                            if !even {
                                path.swap(0, 1);
                            }
                            out.push(Element { vertices: path });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Builds the periodic mesh of `(0,1)^d` with `cells` cells per direction,
/// mapping degree `pg`, and warp amplitude `epsilon`.
pub fn generate_mesh(shape: ElementShape, cells: usize, pg: usize, epsilon: f64) -> Result<Mesh> {
    if cells == 0 {
        return Err(Error::Config("mesh needs at least one cell per direction".into()));
    }
    let dim = shape.dim();
    let h = 1.0 / cells as f64;
    let elements = lattice_elements(shape, cells);
    let nodes = mapping_interpolation_nodes(shape, pg)?;
    let exps = monomial::exponents(dim, pg);
    let vmono = DMatrix::from_fn(nodes.len(), exps.len(), |i, j| monomial::eval(exps[j], nodes[i]));
    let lu = vmono.lu();
    // projection onto the PKD basis with a rule exact to degree 2 pg
    let proj = build_operators(&OperatorConfig::default_for(shape, pg))?;
    let pkd = multi_indices(shape, pg);

    let mut coefficients = Vec::with_capacity(elements.len());
    for el in &elements {
        let mut targets = vec![DVector::zeros(nodes.len()); dim];
        for (i, &xi) in nodes.iter().enumerate() {
            let lam = barycentric(shape, xi);
            let mut x = [0.0; 3];
            for (l, v) in lam.iter().zip(&el.vertices) {
                for d in 0..dim {
                    x[d] += l * v[d] as f64 * h;
                }
            }
            let xw = warp(dim, x, epsilon);
            for d in 0..dim {
                targets[d][i] = xw[d];
            }
        }
        let mono: Vec<DVector<f64>> = targets
            .iter()
            .map(|t| lu.solve(t).ok_or_else(|| Error::Mesh("mapping interpolation is singular".into())))
            .collect::<Result<_>>()?;
        let mut c = vec![[0.0; 3]; pkd.len()];
        for (&xi, (&eta, &w)) in proj.xi.iter().zip(proj.eta.iter().zip(&proj.weights)) {
            let vals: Vec<f64> = exps.iter().map(|&e| monomial::eval(e, xi)).collect();
            for (j, &a) in pkd.iter().enumerate() {
                let phi = pkd_eval_collapsed(shape, a, eta);
                for d in 0..dim {
                    let x: f64 = mono[d].iter().zip(&vals).map(|(m, v)| m * v).sum();
                    c[j][d] += w * phi * x;
                }
            }
        }
        coefficients.push(c);
    }
    let mesh = Mesh {
        shape,
        cells,
        epsilon,
        elements,
        mapping: MeshMapping { degree: pg, coefficients },
    };
    // positivity at a representative node set
    let check = build_operators(&OperatorConfig::default_for(shape, pg.max(2) + 1))?;
    let mut pts = check.eta.clone();
    for f in &check.facets {
        pts.extend_from_slice(&f.eta);
    }
    let table = MappingTable::new(shape, pg, &pts);
    for k in 0..mesh.num_elements() {
        for jac in mesh.map_jacobians(k, &table) {
            let det = determinant(dim, &jac);
            if !(det > 0.0) {
                return Err(Error::Mesh(format!(
                    "element {k} has a nonpositive Jacobian ({det:e}) after warping"
                )));
            }
        }
    }
    Ok(mesh)
}

pub fn determinant(dim: usize, a: &[[f64; 3]; 3]) -> f64 {
    if dim == 2 {
        a[0][0] * a[1][1] - a[0][1] * a[1][0]
    } else {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }
}

/// Pairs every facet with its (possibly periodic) neighbour and aligns their
/// quadrature nodes in physical space.
pub fn build_connectivity(mesh: &Mesh, ops: &SbpOperatorSet) -> Result<Connectivity> {
    let shape = mesh.shape;
    let dim = shape.dim();
    let m = mesh.cells as i64;
    let nf = shape.num_facets();
    let mut groups: HashMap<[i64; 3], Vec<(usize, usize)>> = HashMap::new();
    for (k, el) in mesh.elements.iter().enumerate() {
        for z in 0..nf {
            let fv = shape.facet_vertices(z);
            let modulus = fv.len() as i64 * m;
            let mut key = [0i64; 3];
            for &v in fv {
                for d in 0..dim {
                    key[d] += el.vertices[v][d];
                }
            }
            for kd in key.iter_mut().take(dim) {
                *kd = kd.rem_euclid(modulus);
            }
            groups.entry(key).or_default().push((k, z));
        }
    }
    let tables: Vec<MappingTable> = ops
        .facets
        .iter()
        .map(|f| MappingTable::new(shape, mesh.mapping.degree, &f.eta))
        .collect();
    let points = |k: usize, z: usize| mesh.map_points(k, &tables[z]);
    let tol = 1e-10 * mesh.h();
    let mut links: Vec<Vec<Option<FacetLink>>> = vec![vec![None; nf]; mesh.num_elements()];
    for (key, members) in groups {
        if members.len() != 2 {
            return Err(Error::Topology(format!(
                "facet group {key:?} has {} members instead of 2",
                members.len()
            )));
        }
        let (ka, za) = members[0];
        let (kb, zb) = members[1];
        let pa = points(ka, za);
        let pb = points(kb, zb);
        let perm_ab = align(&pa, &pb, dim, tol).ok_or_else(|| {
            Error::Orientation(format!(
                "facet nodes of element {ka} facet {za} do not match element {kb} facet {zb}"
            ))
        })?;
        let mut perm_ba = vec![0; perm_ab.len()];
        for (i, &j) in perm_ab.iter().enumerate() {
            perm_ba[j] = i;
        }
        links[ka][za] = Some(FacetLink { element: kb, facet: zb, perm: perm_ab });
        links[kb][zb] = Some(FacetLink { element: ka, facet: za, perm: perm_ba });
    }
    let links = links
        .into_iter()
        .map(|row| row.into_iter().map(|l| l.expect("every facet grouped")).collect())
        .collect();
    Ok(Connectivity { links })
}

/// For each point of `a`, the index of the point of `b` equal to it modulo
/// integer translations.
fn align(a: &[[f64; 3]], b: &[[f64; 3]], dim: usize, tol: f64) -> Option<Vec<usize>> {
    if a.len() != b.len() {
        return None;
    }
    let mut used = vec![false; b.len()];
    let mut perm = Vec::with_capacity(a.len());
    for pa in a {
        let mut best = None;
        for (j, pb) in b.iter().enumerate() {
            if used[j] {
                continue;
            }
            let dist = (0..dim)
                .map(|d| {
                    let diff = pa[d] - pb[d];
                    (diff - diff.round()).abs()
                })
                .fold(0.0, f64::max);
            if dist <= tol {
                best = Some(j);
                break;
            }
        }
        let j = best?;
        used[j] = true;
        perm.push(j);
    }
    Some(perm)
}
