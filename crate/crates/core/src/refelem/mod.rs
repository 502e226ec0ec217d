//! Tensor-product diagonal-norm SBP operators on the reference triangle and
//! tetrahedron, built on collapsed coordinates.

mod shape;
mod verify;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobi::{gauss_rule, lagrange_derivative_matrix, lagrange_eval, JacobiWeight, QuadratureRule1D, RuleKind};
use crate::tensor::{apply_axis, apply_axis_add, apply_axis_t, apply_axis_t_add, apply_kron, Dense};

pub use shape::{chain_factors, collapsed_to_ref, ref_to_collapsed, ElementShape};
pub use verify::{verify_sbp, SbpReport};

/// Weight and node placement of a one-dimensional rule; the number of nodes
/// is always degree + 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub weight: JacobiWeight,
    pub kind: RuleKind,
}

impl RuleSpec {
    pub const LG: RuleSpec = RuleSpec {
        weight: JacobiWeight::LEGENDRE,
        kind: RuleKind::Gauss,
    };

    /// Gauss rule for the weight `(1 - η)`.
    pub fn jg10() -> RuleSpec {
        RuleSpec {
            weight: JacobiWeight::new(1.0, 0.0).expect("valid weight"),
            kind: RuleKind::Gauss,
        }
    }

    fn is_legendre(&self) -> bool {
        self.weight.is(0.0, 0.0)
    }

    fn is_jacobi10(&self) -> bool {
        self.weight.is(1.0, 0.0)
    }

    fn label(&self) -> String {
        format!("({},{})", self.weight.a(), self.weight.b())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub shape: ElementShape,
    /// Degree per collapsed direction; the rule in direction m has `degrees[m] + 1` nodes.
    pub degrees: Vec<usize>,
    /// `[q_f]` on the triangle, `[q_f1, q_f2]` on the tetrahedron.
    pub facet_degrees: Vec<usize>,
    pub volume_rules: Vec<RuleSpec>,
    pub facet_rules: Vec<RuleSpec>,
}

impl OperatorConfig {
    /// Legendre-Gauss everywhere on the triangle; Legendre-Gauss in η1, η2,
    /// η_f1 and (1,0) Jacobi-Gauss in η3, η_f2 on the tetrahedron.
    pub fn default_for(shape: ElementShape, q: usize) -> Self {
        match shape {
            ElementShape::Triangle => Self {
                shape,
                degrees: vec![q, q],
                facet_degrees: vec![q],
                volume_rules: vec![RuleSpec::LG, RuleSpec::LG],
                facet_rules: vec![RuleSpec::LG],
            },
            ElementShape::Tetrahedron => Self {
                shape,
                degrees: vec![q, q, q],
                facet_degrees: vec![q, q],
                volume_rules: vec![RuleSpec::LG, RuleSpec::LG, RuleSpec::jg10()],
                facet_rules: vec![RuleSpec::LG, RuleSpec::jg10()],
            },
        }
    }

    /// Triangle with a (1,0) Jacobi-Gauss rule in η2. The weight absorbs the
    /// collapse factor, which breaks the SBP property; kept as a negative control.
    pub fn triangle_jacobi_variant(q: usize) -> Self {
        let mut cfg = Self::default_for(ElementShape::Triangle, q);
        cfg.volume_rules[1] = RuleSpec::jg10();
        cfg
    }

    pub fn degree(&self) -> usize {
        self.degrees.iter().copied().min().unwrap_or(0)
    }

    /// Checks the exactness conditions that guarantee the SBP property and
    /// returns which of them were used.
    pub fn check(&self) -> Result<ExactnessCertificate> {
        let d = self.shape.dim();
        if self.degrees.len() != d {
            return Err(Error::Dimension { expected: d, got: self.degrees.len() });
        }
        if self.volume_rules.len() != d {
            return Err(Error::Dimension { expected: d, got: self.volume_rules.len() });
        }
        if self.facet_degrees.len() != d - 1 {
            return Err(Error::Dimension { expected: d - 1, got: self.facet_degrees.len() });
        }
        if self.facet_rules.len() != d - 1 {
            return Err(Error::Dimension { expected: d - 1, got: self.facet_rules.len() });
        }
        let tau = |r: &RuleSpec, q: usize| r.kind.exactness(q + 1);
        let mut conditions = Vec::new();
        let mut require = |ok: bool, msg: String| -> Result<()> {
            if ok {
                conditions.push(msg);
                Ok(())
            } else {
                Err(Error::Config(format!("exactness condition violated: {msg}")))
            }
        };
        let q = &self.degrees;
        let v = &self.volume_rules;
        let f = &self.facet_rules;
        let qf = &self.facet_degrees;
        if !v[0].is_legendre() {
            return Err(Error::Config(format!(
                "rule in η1 must use the Legendre weight, got {}",
                v[0].label()
            )));
        }
        let t1 = tau(&v[0], q[0]);
        require(t1 >= 2 * q[0] as i64, format!("τ1^(0,0) = {t1} ≥ 2q1 = {}", 2 * q[0]))?;
        let mut sbp = true;
        let mut note = None;
        match self.shape {
            ElementShape::Triangle => {
                let t2 = tau(&v[1], q[1]);
                if v[1].is_legendre() {
                    require(t2 >= 2 * q[1] as i64, format!("τ2^(0,0) = {t2} ≥ 2q2 = {}", 2 * q[1]))?;
                } else if v[1].is_jacobi10() {
                    require(t2 >= 2 * q[1] as i64, format!("τ2^(1,0) = {t2} ≥ 2q2 = {}", 2 * q[1]))?;
                    sbp = false;
                    note = Some(
                        "(1,0) rule in η2 on the triangle does not give an SBP operator".to_string(),
                    );
                } else {
                    return Err(Error::Config(format!(
                        "rule in η2 must use the (0,0) or (1,0) weight, got {}",
                        v[1].label()
                    )));
                }
                if !f[0].is_legendre() {
                    return Err(Error::Config(format!(
                        "facet rule must use the Legendre weight, got {}",
                        f[0].label()
                    )));
                }
                let tf = tau(&f[0], qf[0]);
                let need = 2 * q[0].max(q[1]);
                require(tf >= need as i64, format!("τf^(0,0) = {tf} ≥ 2max(q1,q2) = {need}"))?;
            }
            ElementShape::Tetrahedron => {
                if !v[1].is_legendre() {
                    return Err(Error::Config(format!(
                        "rule in η2 must use the Legendre weight, got {}",
                        v[1].label()
                    )));
                }
                let t2 = tau(&v[1], q[1]);
                require(
                    t2 > 2 * q[1] as i64,
                    format!("τ2^(0,0) = {t2} ≥ 2q2 + 1 = {}", 2 * q[1] + 1),
                )?;
                let t3 = tau(&v[2], q[2]);
                if v[2].is_legendre() {
                    require(
                        t3 > 2 * q[2] as i64,
                        format!("τ3^(0,0) = {t3} ≥ 2q3 + 1 = {}", 2 * q[2] + 1),
                    )?;
                } else if v[2].is_jacobi10() {
                    require(t3 >= 2 * q[2] as i64, format!("τ3^(1,0) = {t3} ≥ 2q3 = {}", 2 * q[2]))?;
                } else {
                    return Err(Error::Config(format!(
                        "rule in η3 must use the (0,0) or (1,0) weight, got {}",
                        v[2].label()
                    )));
                }
                if !f[0].is_legendre() {
                    return Err(Error::Config(format!(
                        "facet rule in η_f1 must use the Legendre weight, got {}",
                        f[0].label()
                    )));
                }
                let tf1 = tau(&f[0], qf[0]);
                let need1 = 2 * q[0].max(q[1]);
                require(tf1 >= need1 as i64, format!("τf1^(0,0) = {tf1} ≥ 2max(q1,q2) = {need1}"))?;
                let tf2 = tau(&f[1], qf[1]);
                let need2 = 2 * q[1].max(q[2]);
                if f[1].is_legendre() {
                    require(
                        tf2 > need2 as i64,
                        format!("τf2^(0,0) = {tf2} ≥ 2max(q2,q3) + 1 = {}", need2 + 1),
                    )?;
                } else if f[1].is_jacobi10() {
                    require(tf2 >= need2 as i64, format!("τf2^(1,0) = {tf2} ≥ 2max(q2,q3) = {need2}"))?;
                } else {
                    return Err(Error::Config(format!(
                        "facet rule in η_f2 must use the (0,0) or (1,0) weight, got {}",
                        f[1].label()
                    )));
                }
            }
        }
        Ok(ExactnessCertificate {
            sbp_certified: sbp,
            conditions,
            note,
        })
    }
}

/// Which exactness conditions a configuration satisfied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactnessCertificate {
    pub sbp_certified: bool,
    pub conditions: Vec<String>,
    pub note: Option<String>,
}

/// Facet node set with its extrapolation operator.
#[derive(Debug, Clone)]
pub struct FacetOperator {
    /// Collapsed (volume) coordinates of the facet nodes, ordered with the
    /// first facet index fastest.
    pub eta: Vec<[f64; 3]>,
    pub xi: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub normal: [f64; 3],
    /// Per-axis factors of `R`; `factors[k]` maps volume extent along axis k
    /// to facet extent along the same axis.
    pub factors: [Dense; 3],
    pub out_dims: [usize; 3],
    pub r: DMatrix<f64>,
}

impl FacetOperator {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Reference SBP operator set together with its tensor-product factors.
#[derive(Debug, Clone)]
pub struct SbpOperatorSet {
    pub config: OperatorConfig,
    pub certificate: ExactnessCertificate,
    pub volume_rules: Vec<QuadratureRule1D>,
    pub facet_rules: Vec<QuadratureRule1D>,
    /// Node count per collapsed direction (1 for unused directions).
    pub dims: [usize; 3],
    pub eta: Vec<[f64; 3]>,
    pub xi: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// `chain[i][n][l] = ∂η_n/∂ξ_l` at volume node i.
    pub chain: Vec<[[f64; 3]; 3]>,
    /// One-dimensional differentiation matrices `[ℓ_b'(η_a)]` per direction.
    pub deriv_1d: [Dense; 3],
    pub d: Vec<DMatrix<f64>>,
    pub q: Vec<DMatrix<f64>>,
    pub e: Vec<DMatrix<f64>>,
    pub facets: Vec<FacetOperator>,
}

/// Linear index of a tensor node, first index fastest.
pub fn node_index(dims: [usize; 3], a: [usize; 3]) -> usize {
    a[0] + dims[0] * (a[1] + dims[1] * a[2])
}

fn rule(q: usize, spec: &RuleSpec) -> Result<QuadratureRule1D> {
    gauss_rule(q + 1, spec.weight, spec.kind)
}

/// Collapse-factor multiplier applied to the facet rule in η_f2 (tetrahedron).
fn collapse_weight(spec: &RuleSpec, eta: f64) -> f64 {
    if spec.is_jacobi10() {
        0.5
    } else {
        0.5 * (1.0 - eta)
    }
}

/// Collapsed coordinates and weights of the quadrature on facet `facet`.
pub fn facet_quadrature(cfg: &OperatorConfig, facet: usize) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
    cfg.check()?;
    let rules: Vec<QuadratureRule1D> = cfg
        .facet_degrees
        .iter()
        .zip(&cfg.facet_rules)
        .map(|(&q, s)| rule(q, s))
        .collect::<Result<_>>()?;
    let (eta, w) = facet_nodes(cfg, &rules, facet)?;
    Ok((eta.iter().map(|&e| collapsed_to_ref(cfg.shape, e)).collect(), w))
}

fn facet_nodes(
    cfg: &OperatorConfig,
    rules: &[QuadratureRule1D],
    facet: usize,
) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
    let shape = cfg.shape;
    if facet >= shape.num_facets() {
        return Err(Error::Config(format!("facet index {facet} out of range for {shape:?}")));
    }
    let mut eta = Vec::new();
    let mut w = Vec::new();
    match shape {
        ElementShape::Triangle => {
            let scale = if facet == 1 { 2f64.sqrt() } else { 1.0 };
            for (&x, &wx) in rules[0].nodes.iter().zip(&rules[0].weights) {
                eta.push(match facet {
                    0 => [x, -1.0, 0.0],
                    1 => [1.0, x, 0.0],
                    _ => [-1.0, x, 0.0],
                });
                w.push(scale * wx);
            }
        }
        ElementShape::Tetrahedron => {
            let scale = if facet == 1 { 3f64.sqrt() } else { 1.0 };
            for (&y, &wy) in rules[1].nodes.iter().zip(&rules[1].weights) {
                let cw = collapse_weight(&cfg.facet_rules[1], y);
                for (&x, &wx) in rules[0].nodes.iter().zip(&rules[0].weights) {
                    eta.push(match facet {
                        0 => [x, -1.0, y],
                        1 => [1.0, x, y],
                        2 => [-1.0, x, y],
                        _ => [x, y, -1.0],
                    });
                    w.push(scale * cw * wx * wy);
                }
            }
        }
    }
    Ok((eta, w))
}

/// Assembles the operator set, refusing configurations that violate the
/// exactness conditions or place a node on a collapsed coordinate.
pub fn build_operators(cfg: &OperatorConfig) -> Result<SbpOperatorSet> {
    let certificate = cfg.check()?;
    let shape = cfg.shape;
    let dim = shape.dim();
    let volume_rules: Vec<QuadratureRule1D> = cfg
        .degrees
        .iter()
        .zip(&cfg.volume_rules)
        .map(|(&q, s)| rule(q, s))
        .collect::<Result<_>>()?;
    let facet_rules: Vec<QuadratureRule1D> = cfg
        .facet_degrees
        .iter()
        .zip(&cfg.facet_rules)
        .map(|(&q, s)| rule(q, s))
        .collect::<Result<_>>()?;
    for (m, r) in volume_rules.iter().enumerate().skip(1) {
        if r.nodes.iter().any(|&x| x >= 1.0) {
            return Err(Error::Config(format!(
                "rule in η{} places a node at the collapsed coordinate η = 1",
                m + 1
            )));
        }
    }
    if shape == ElementShape::Tetrahedron && facet_rules[1].nodes.iter().any(|&x| x >= 1.0) {
        return Err(Error::Config(
            "facet rule in η_f2 places a node at the collapsed coordinate η = 1".into(),
        ));
    }

    let mut dims = [1usize; 3];
    for m in 0..dim {
        dims[m] = volume_rules[m].len();
    }
    let node = |m: usize, i: usize| -> (f64, f64) {
        if m < dim {
            (volume_rules[m].nodes[i], volume_rules[m].weights[i])
        } else {
            (0.0, 1.0)
        }
    };
    let n = dims.iter().product::<usize>();
    let mut eta = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for a3 in 0..dims[2] {
        for a2 in 0..dims[1] {
            for a1 in 0..dims[0] {
                let (e1, w1) = node(0, a1);
                let (e2, w2) = node(1, a2);
                let (e3, w3) = node(2, a3);
                let factor = match shape {
                    ElementShape::Triangle => {
                        if cfg.volume_rules[1].is_legendre() {
                            0.5 * (1.0 - e2)
                        } else {
                            0.5
                        }
                    }
                    ElementShape::Tetrahedron => {
                        let f3 = if cfg.volume_rules[2].is_legendre() {
                            0.25 * (1.0 - e3) * (1.0 - e3)
                        } else {
                            0.25 * (1.0 - e3)
                        };
                        0.5 * (1.0 - e2) * f3
                    }
                };
                eta.push([e1, e2, e3]);
                weights.push(factor * w1 * w2 * w3);
            }
        }
    }
    let xi: Vec<[f64; 3]> = eta.iter().map(|&e| collapsed_to_ref(shape, e)).collect();
    let chain: Vec<[[f64; 3]; 3]> = eta.iter().map(|&e| chain_factors(shape, e)).collect();

    let deriv_1d: [Dense; 3] = std::array::from_fn(|m| {
        if m < dim {
            let k = dims[m];
            Dense::from_rows(k, k, lagrange_derivative_matrix(&volume_rules[m].nodes))
        } else {
            Dense::zeros(1, 1)
        }
    });

    // Dense differentiation matrices D^(l) = Σ_n diag(g_nl) Dη_n.
    let mut d = vec![DMatrix::zeros(n, n); dim];
    for a3 in 0..dims[2] {
        for a2 in 0..dims[1] {
            for a1 in 0..dims[0] {
                let a = [a1, a2, a3];
                let i = node_index(dims, a);
                for nn in 0..dim {
                    for b in 0..dims[nn] {
                        let mut bb = a;
                        bb[nn] = b;
                        let j = node_index(dims, bb);
                        let dv = deriv_1d[nn].get(a[nn], b);
                        for (l, dl) in d.iter_mut().enumerate() {
                            let g = chain[i][nn][l];
                            if g != 0.0 {
                                dl[(i, j)] += g * dv;
                            }
                        }
                    }
                }
            }
        }
    }
    let wdiag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(weights.clone()));
    let q: Vec<DMatrix<f64>> = d.iter().map(|dl| &wdiag * dl).collect();

    let mut facets = Vec::with_capacity(shape.num_facets());
    for z in 0..shape.num_facets() {
        let (feta, fw) = facet_nodes(cfg, &facet_rules, z)?;
        let row_at = |m: usize, x: f64| Dense::row(lagrange_eval(&volume_rules[m].nodes, x));
        let interp = |m: usize, r: &QuadratureRule1D| {
            let rows: Vec<f64> = r.nodes.iter().flat_map(|&x| lagrange_eval(&volume_rules[m].nodes, x)).collect();
            Dense::from_rows(r.len(), dims[m], rows)
        };
        let factors: [Dense; 3] = match (shape, z) {
            (ElementShape::Triangle, 0) => [interp(0, &facet_rules[0]), row_at(1, -1.0), Dense::identity(1)],
            (ElementShape::Triangle, 1) => [row_at(0, 1.0), interp(1, &facet_rules[0]), Dense::identity(1)],
            (ElementShape::Triangle, _) => [row_at(0, -1.0), interp(1, &facet_rules[0]), Dense::identity(1)],
            (_, 0) => [interp(0, &facet_rules[0]), row_at(1, -1.0), interp(2, &facet_rules[1])],
            (_, 1) => [row_at(0, 1.0), interp(1, &facet_rules[0]), interp(2, &facet_rules[1])],
            (_, 2) => [row_at(0, -1.0), interp(1, &facet_rules[0]), interp(2, &facet_rules[1])],
            (_, _) => [interp(0, &facet_rules[0]), interp(1, &facet_rules[1]), row_at(2, -1.0)],
        };
        let out_dims = [factors[0].rows, factors[1].rows, factors[2].rows];
        let nf = out_dims.iter().product::<usize>();
        debug_assert_eq!(nf, fw.len());
        let mut r = DMatrix::zeros(nf, n);
        for o3 in 0..out_dims[2] {
            for o2 in 0..out_dims[1] {
                for o1 in 0..out_dims[0] {
                    let i = node_index(out_dims, [o1, o2, o3]);
                    for a3 in 0..dims[2] {
                        for a2 in 0..dims[1] {
                            for a1 in 0..dims[0] {
                                let v = factors[0].get(o1, a1) * factors[1].get(o2, a2) * factors[2].get(o3, a3);
                                r[(i, node_index(dims, [a1, a2, a3]))] = v;
                            }
                        }
                    }
                }
            }
        }
        facets.push(FacetOperator {
            xi: feta.iter().map(|&e| collapsed_to_ref(shape, e)).collect(),
            eta: feta,
            weights: fw,
            normal: shape.normal(z),
            factors,
            out_dims,
            r,
        });
    }

    let mut e = vec![DMatrix::zeros(n, n); dim];
    for f in &facets {
        let bdiag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(f.weights.clone()));
        let rtbr = f.r.transpose() * bdiag * &f.r;
        for (m, em) in e.iter_mut().enumerate() {
            if f.normal[m] != 0.0 {
                *em += &rtbr * f.normal[m];
            }
        }
    }

    Ok(SbpOperatorSet {
        config: cfg.clone(),
        certificate,
        volume_rules,
        facet_rules,
        dims,
        eta,
        xi,
        weights,
        chain,
        deriv_1d,
        d,
        q,
        e,
        facets,
    })
}

impl SbpOperatorSet {
    pub fn shape(&self) -> ElementShape {
        self.config.shape
    }

    pub fn dim(&self) -> usize {
        self.config.shape.dim()
    }

    pub fn num_nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn degree(&self) -> usize {
        self.config.degree()
    }

    /// `out = Dη_n u`, the derivative along collapsed direction `n`.
    pub fn apply_deta(&self, n: usize, u: &[f64], out: &mut [f64]) {
        apply_axis(&self.deriv_1d[n], n, self.dims, u, out);
    }

    pub fn apply_deta_add(&self, n: usize, u: &[f64], out: &mut [f64]) {
        apply_axis_add(&self.deriv_1d[n], n, self.dims, u, out);
    }

    /// `out = Dη_nᵀ v`.
    pub fn apply_deta_t(&self, n: usize, v: &[f64], out: &mut [f64]) {
        apply_axis_t(&self.deriv_1d[n], n, self.dims, v, out);
    }

    pub fn apply_deta_t_add(&self, n: usize, v: &[f64], out: &mut [f64]) {
        apply_axis_t_add(&self.deriv_1d[n], n, self.dims, v, out);
    }

    /// `out = D^(l) u` by sum factorization; `tmp` must hold `num_nodes` entries.
    pub fn apply_d(&self, l: usize, u: &[f64], out: &mut [f64], tmp: &mut [f64]) {
        out.fill(0.0);
        for n in 0..self.dim() {
            if self.chain[0][n][l] == 0.0 && self.chain.iter().all(|g| g[n][l] == 0.0) {
                continue;
            }
            self.apply_deta(n, u, tmp);
            for ((o, t), g) in out.iter_mut().zip(tmp.iter()).zip(&self.chain) {
                *o += g[n][l] * t;
            }
        }
    }

    /// `out = R^(ζ) u` by sum factorization.
    pub fn apply_r(&self, facet: usize, u: &[f64], out: &mut [f64], tmp: &mut [Vec<f64>; 2]) {
        apply_kron(&self.facets[facet].factors, false, self.dims, u, out, tmp);
    }

    /// `out = R^(ζ)ᵀ v` by sum factorization.
    pub fn apply_rt(&self, facet: usize, v: &[f64], out: &mut [f64], tmp: &mut [Vec<f64>; 2]) {
        apply_kron(&self.facets[facet].factors, true, self.facets[facet].out_dims, v, out, tmp);
    }

    pub fn export(&self) -> OperatorExport {
        let mat = |m: &DMatrix<f64>| MatrixExport {
            rows: m.nrows(),
            cols: m.ncols(),
            data: (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect(),
        };
        let dim = self.dim();
        let pt = |p: &[f64; 3]| p[..dim].to_vec();
        OperatorExport {
            config: self.config.clone(),
            certificate: self.certificate.clone(),
            num_nodes: self.num_nodes(),
            tensor_dims: self.dims[..dim].to_vec(),
            ordering: "tensor index (a1, .., ad) -> a1 + n1 (a2 + n2 a3), first index fastest".into(),
            nodes: self.xi.iter().map(pt).collect(),
            collapsed_nodes: self.eta.iter().map(pt).collect(),
            weights: self.weights.clone(),
            d: self.d.iter().map(mat).collect(),
            q: self.q.iter().map(mat).collect(),
            e: self.e.iter().map(mat).collect(),
            facets: self
                .facets
                .iter()
                .map(|f| FacetExport {
                    normal: f.normal[..dim].to_vec(),
                    nodes: f.xi.iter().map(pt).collect(),
                    weights: f.weights.clone(),
                    r: mat(&f.r),
                })
                .collect(),
        }
    }
}

/// Dense row-major matrix in exported form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixExport {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FacetExport {
    pub normal: Vec<f64>,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub r: MatrixExport,
}

/// JSON container for an operator set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorExport {
    pub config: OperatorConfig,
    pub certificate: ExactnessCertificate,
    pub num_nodes: usize,
    pub tensor_dims: Vec<usize>,
    pub ordering: String,
    pub nodes: Vec<Vec<f64>>,
    pub collapsed_nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub d: Vec<MatrixExport>,
    pub q: Vec<MatrixExport>,
    pub e: Vec<MatrixExport>,
    pub facets: Vec<FacetExport>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
    }

    #[test]
    fn degree_zero_triangle() {
        let ops = build_operators(&OperatorConfig::default_for(ElementShape::Triangle, 0)).unwrap();
        assert_eq!(ops.num_nodes(), 1);
        assert!((ops.weights[0] - 2.0).abs() < 1e-15);
        assert_eq!(ops.d[0][(0, 0)], 0.0);
        assert_eq!(ops.d[1][(0, 0)], 0.0);
    }

    #[test]
    fn triangle_sbp_identity_q4() {
        let ops = build_operators(&OperatorConfig::default_for(ElementShape::Triangle, 4)).unwrap();
        for m in 0..2 {
            let res = &ops.q[m] + ops.q[m].transpose() - &ops.e[m];
            assert!(max_abs(&res) <= 1e-12, "m={m}: {}", max_abs(&res));
        }
    }

    #[test]
    fn tetrahedron_volume_and_identity_q3() {
        let ops = build_operators(&OperatorConfig::default_for(ElementShape::Tetrahedron, 3)).unwrap();
        let vol: f64 = ops.weights.iter().sum();
        assert!((vol - 4.0 / 3.0).abs() < 1e-13);
        for m in 0..3 {
            let res = &ops.q[m] + ops.q[m].transpose() - &ops.e[m];
            assert!(max_abs(&res) <= 1e-12, "m={m}: {}", max_abs(&res));
        }
    }

    #[test]
    fn facet_weight_sums() {
        let tri = OperatorConfig::default_for(ElementShape::Triangle, 3);
        let (_, w) = facet_quadrature(&tri, 1).unwrap();
        assert!((w.iter().sum::<f64>() - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        let tet = OperatorConfig::default_for(ElementShape::Tetrahedron, 2);
        for z in 0..4 {
            let (_, w) = facet_quadrature(&tet, z).unwrap();
            let want = ElementShape::Tetrahedron.facet_measure(z);
            assert!((w.iter().sum::<f64>() - want).abs() < 1e-14);
            assert!(w.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn triangle_bottom_edge_two_point_rule() {
        let cfg = OperatorConfig::default_for(ElementShape::Triangle, 1);
        let (nodes, w) = facet_quadrature(&cfg, 0).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!((nodes[0][0] + s).abs() < 1e-15 && nodes[0][1] == -1.0);
        assert!((nodes[1][0] - s).abs() < 1e-15 && nodes[1][1] == -1.0);
        assert!((w[0] - 1.0).abs() < 1e-15 && (w[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_lobatto_in_collapsed_direction() {
        let mut cfg = OperatorConfig::default_for(ElementShape::Triangle, 3);
        cfg.volume_rules[1].kind = RuleKind::GaussLobatto;
        assert!(matches!(build_operators(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_insufficient_tetrahedron_rule() {
        let mut cfg = OperatorConfig::default_for(ElementShape::Tetrahedron, 3);
        cfg.volume_rules[1].kind = RuleKind::GaussRadau;
        let err = build_operators(&cfg).unwrap_err().to_string();
        assert!(err.contains("τ2"), "{err}");
    }

    #[test]
    fn records_route_for_legendre_third_direction() {
        let mut cfg = OperatorConfig::default_for(ElementShape::Tetrahedron, 2);
        cfg.volume_rules[2] = RuleSpec::LG;
        cfg.facet_rules[1] = RuleSpec::LG;
        let ops = build_operators(&cfg).unwrap();
        assert!(ops.certificate.conditions.iter().any(|c| c.starts_with("τ3^(0,0)")));
        assert!(ops.certificate.conditions.iter().any(|c| c.starts_with("τf2^(0,0)")));
        let vol: f64 = ops.weights.iter().sum();
        assert!((vol - 4.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn sum_factorized_application_matches_dense() {
        for shape in [ElementShape::Triangle, ElementShape::Tetrahedron] {
            let ops = build_operators(&OperatorConfig::default_for(shape, 3)).unwrap();
            let n = ops.num_nodes();
            let u: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) as f64).sin()).collect();
            let uv = nalgebra::DVector::from_vec(u.clone());
            let mut out = vec![0.0; n];
            let mut tmp = vec![0.0; n];
            for l in 0..ops.dim() {
                ops.apply_d(l, &u, &mut out, &mut tmp);
                let dense = &ops.d[l] * &uv;
                for i in 0..n {
                    assert!((out[i] - dense[i]).abs() < 1e-12);
                }
            }
            let mut bufs = [Vec::new(), Vec::new()];
            for z in 0..shape.num_facets() {
                let f = &ops.facets[z];
                let mut fo = vec![0.0; f.len()];
                ops.apply_r(z, &u, &mut fo, &mut bufs);
                let dense = &f.r * &uv;
                for i in 0..f.len() {
                    assert!((fo[i] - dense[i]).abs() < 1e-13);
                }
                let v: Vec<f64> = (0..f.len()).map(|i| (i as f64 * 0.3).cos()).collect();
                let mut back = vec![0.0; n];
                ops.apply_rt(z, &v, &mut back, &mut bufs);
                let dense = f.r.transpose() * nalgebra::DVector::from_vec(v);
                for i in 0..n {
                    assert!((back[i] - dense[i]).abs() < 1e-13);
                }
            }
        }
    }
}
