//! Semi-discrete residuals for linear advection on periodic meshes and
//! low-storage Runge-Kutta time integration.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{build_connectivity, generate_mesh, Connectivity, Mesh};
use crate::physop::{
    build_physical_operators, check_metric_degree, compute_all_geometry, physical_mass_dense, project_jacobian,
    weight_adjusted_apply, weight_adjusted_inverse_dense, Algorithm, ElementGeometry, PhysicalOperators,
};
use crate::pkd::ModalBasis;
use crate::refelem::{build_operators, ElementShape, OperatorConfig, SbpOperatorSet};

/// Advection velocity and upwinding parameter of the numerical flux.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxConfig {
    pub velocity: [f64; 3],
    /// 1 gives the upwind flux, 0 the central flux.
    pub lambda: f64,
}

impl FluxConfig {
    pub fn new(velocity: &[f64], lambda: f64) -> Result<Self> {
        if velocity.is_empty() || velocity.len() > 3 {
            return Err(Error::Config(format!("velocity must have 1 to 3 components, got {}", velocity.len())));
        }
        if velocity.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("velocity must be finite".into()));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Config(format!("flux parameter must lie in [0, 1], got {lambda}")));
        }
        let mut v = [0.0; 3];
        v[..velocity.len()].copy_from_slice(velocity);
        Ok(Self { velocity: v, lambda })
    }

    pub fn upwind(velocity: &[f64]) -> Result<Self> {
        Self::new(velocity, 1.0)
    }

    pub fn central(velocity: &[f64]) -> Result<Self> {
        Self::new(velocity, 0.0)
    }

    pub fn speed(&self) -> f64 {
        self.velocity.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn normal_velocity(&self, n: [f64; 3]) -> f64 {
        self.velocity[0] * n[0] + self.velocity[1] * n[1] + self.velocity[2] * n[2]
    }
}

/// Lax-Friedrichs type flux `½(a·n)(u⁻+u⁺) − (λ/2)|a·n|(u⁺−u⁻)`.
pub fn numerical_flux(u_minus: f64, u_plus: f64, n: [f64; 3], cfg: &FluxConfig) -> f64 {
    let an = cfg.normal_velocity(n);
    0.5 * an * (u_minus + u_plus) - 0.5 * cfg.lambda * an.abs() * (u_plus - u_minus)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// Unknowns are values at the volume quadrature nodes.
    Nodal,
    /// Unknowns are PKD coefficients, with the weight-adjusted mass inverse.
    Modal,
}

/// Solution coefficients of all elements, stored contiguously per element.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionState {
    pub formulation: Formulation,
    pub stride: usize,
    pub data: Vec<f64>,
    pub time: f64,
}

impl SolutionState {
    pub fn num_elements(&self) -> usize {
        self.data.len() / self.stride
    }

    pub fn element(&self, k: usize) -> &[f64] {
        &self.data[k * self.stride..(k + 1) * self.stride]
    }

    pub fn element_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.stride..(k + 1) * self.stride]
    }
}

/// Initial data on the unit square or cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialCondition {
    /// `Π_m sin(2π x_m)`
    #[default]
    SineProduct,
    Constant { value: f64 },
}

impl InitialCondition {
    pub fn eval(&self, dim: usize, x: [f64; 3]) -> f64 {
        match *self {
            InitialCondition::SineProduct => (0..dim).map(|m| (2.0 * std::f64::consts::PI * x[m]).sin()).product(),
            InitialCondition::Constant { value } => value,
        }
    }

    /// Exact solution of periodic advection at time `t`.
    pub fn exact(&self, dim: usize, x: [f64; 3], velocity: [f64; 3], t: f64) -> f64 {
        let mut y = [0.0; 3];
        for m in 0..dim {
            y[m] = (x[m] - velocity[m] * t).rem_euclid(1.0);
        }
        self.eval(dim, y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationConfig {
    pub shape: ElementShape,
    pub degree: usize,
    pub mapping_degree: usize,
    pub cells: usize,
    pub warp: f64,
    pub formulation: Formulation,
    pub algorithm: Algorithm,
    pub flux: FluxConfig,
    /// Accept mapping degrees for which the metric identities may fail.
    #[serde(default)]
    pub allow_metric_violation: bool,
    #[serde(default = "one")]
    pub threads: usize,
}

fn one() -> usize {
    1
}

/// Scratch space owned by one worker during residual evaluation.
#[derive(Debug, Clone)]
struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
    facet: Vec<f64>,
    kron: [Vec<f64>; 2],
    modal: Vec<f64>,
}

impl Scratch {
    fn new(n: usize, nf: usize, np: usize) -> Self {
        Self {
            a: vec![0.0; n],
            b: vec![0.0; n],
            facet: vec![0.0; nf],
            kron: [Vec::new(), Vec::new()],
            modal: vec![0.0; np],
        }
    }
}

/// Buffers reused across residual evaluations.
#[derive(Debug, Clone)]
pub struct Workspace {
    nodal: Vec<f64>,
    traces: Vec<f64>,
    fstar: Vec<f64>,
    residual: Vec<f64>,
    scratch: Vec<Scratch>,
}

/// Everything needed to evaluate the semi-discrete operator on one mesh.
#[derive(Debug)]
pub struct Discretization {
    pub config: DiscretizationConfig,
    pub ops: SbpOperatorSet,
    pub basis: Option<ModalBasis>,
    pub mesh: Mesh,
    pub geometry: Vec<ElementGeometry>,
    pub connectivity: Connectivity,
    pub operators: Vec<PhysicalOperators>,
    /// `c_l = Σ_m [½WΛ]_{lm} a_m` per node for the fused path.
    volume_coef: Vec<Vec<[f64; 3]>>,
    inv_wj: Vec<Vec<f64>>,
    /// `W / J̃` with the projected Jacobian, modal formulation only.
    w_over_j: Vec<Vec<f64>>,
    facet_offsets: Vec<usize>,
    facet_total: usize,
    m_tilde: OnceLock<Vec<DMatrix<f64>>>,
}

impl Discretization {
    pub fn new(config: DiscretizationConfig) -> Result<Self> {
        if config.degree == 0 {
            return Err(Error::Config("polynomial degree must be at least 1".into()));
        }
        if config.cells == 0 {
            return Err(Error::Config("mesh must have at least one cell per direction".into()));
        }
        if config.threads == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        if !config.allow_metric_violation {
            check_metric_degree(config.shape, config.degree, config.mapping_degree)?;
        }
        let dim = config.shape.dim();
        if config.flux.velocity[dim..].iter().any(|&v| v != 0.0) {
            return Err(Error::Config(format!("velocity has more than {dim} nonzero components")));
        }
        let ops = build_operators(&OperatorConfig::default_for(config.shape, config.degree))?;
        let mesh = generate_mesh(config.shape, config.cells, config.mapping_degree, config.warp)?;
        Self::from_parts(config, ops, mesh)
    }

    /// Builds a discretization from explicit operators and mesh.
    pub fn from_parts(config: DiscretizationConfig, ops: SbpOperatorSet, mesh: Mesh) -> Result<Self> {
        if !ops.certificate.sbp_certified {
            return Err(Error::Config(
                "operator set does not satisfy the SBP exactness conditions".into(),
            ));
        }
        if mesh.shape != ops.shape() {
            return Err(Error::Config("mesh and operator shapes differ".into()));
        }
        let geometry = compute_all_geometry(&mesh, &ops)?;
        let connectivity = build_connectivity(&mesh, &ops)?;
        let operators: Vec<PhysicalOperators> = geometry
            .iter()
            .map(|g| build_physical_operators(g, &ops, config.algorithm))
            .collect();
        let dim = ops.dim();
        let a = config.flux.velocity;
        let volume_coef = operators
            .iter()
            .map(|op| match op {
                PhysicalOperators::ReferenceFused { fused, .. } => fused
                    .iter()
                    .map(|f| {
                        let mut c = [0.0; 3];
                        for (l, cl) in c.iter_mut().enumerate().take(dim) {
                            *cl = (0..dim).map(|m| f[l][m] * a[m]).sum();
                        }
                        c
                    })
                    .collect(),
                PhysicalOperators::PhysicalPrecomputed { .. } => Vec::new(),
            })
            .collect();
        let inv_wj = geometry
            .iter()
            .map(|g| g.j.iter().zip(&ops.weights).map(|(j, w)| 1.0 / (w * j)).collect())
            .collect();
        let (basis, w_over_j) = match config.formulation {
            Formulation::Nodal => (None, Vec::new()),
            Formulation::Modal => {
                let basis = ModalBasis::new(&ops, config.degree)?;
                let w_over_j = geometry
                    .iter()
                    .enumerate()
                    .map(|(k, g)| {
                        let jt = project_jacobian(g, &basis, k)?;
                        Ok(jt.iter().zip(&ops.weights).map(|(j, w)| w / j).collect())
                    })
                    .collect::<Result<Vec<Vec<f64>>>>()?;
                (Some(basis), w_over_j)
            }
        };
        let mut facet_offsets = Vec::with_capacity(ops.facets.len());
        let mut facet_total = 0;
        for f in &ops.facets {
            facet_offsets.push(facet_total);
            facet_total += f.len();
        }
        Ok(Self {
            config,
            ops,
            basis,
            mesh,
            geometry,
            connectivity,
            operators,
            volume_coef,
            inv_wj,
            w_over_j,
            facet_offsets,
            facet_total,
            m_tilde: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.ops.dim()
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_elements()
    }

    pub fn num_nodes(&self) -> usize {
        self.ops.num_nodes()
    }

    /// Unknowns per element.
    pub fn stride(&self) -> usize {
        match &self.basis {
            Some(b) => b.len(),
            None => self.ops.num_nodes(),
        }
    }

    pub fn num_dofs(&self) -> usize {
        self.stride() * self.num_elements()
    }

    pub fn formulation(&self) -> Formulation {
        self.config.formulation
    }

    pub fn workspace(&self) -> Workspace {
        let n = self.num_nodes();
        let k = self.num_elements();
        let max_facet = self.ops.facets.iter().map(|f| f.len()).max().unwrap_or(0);
        let np = self.basis.as_ref().map_or(0, |b| b.len());
        let workers = self.config.threads.min(k).max(1);
        Workspace {
            nodal: vec![0.0; n * k],
            traces: vec![0.0; self.facet_total * k],
            fstar: vec![0.0; self.facet_total * k],
            residual: vec![0.0; n * k],
            scratch: (0..workers).map(|_| Scratch::new(n, max_facet, np)).collect(),
        }
    }

    pub fn zero_state(&self) -> SolutionState {
        SolutionState {
            formulation: self.config.formulation,
            stride: self.stride(),
            data: vec![0.0; self.num_dofs()],
            time: 0.0,
        }
    }

    fn check_state(&self, data: &[f64]) -> Result<()> {
        if data.len() != self.num_dofs() {
            return Err(Error::Dimension { expected: self.num_dofs(), got: data.len() });
        }
        Ok(())
    }

    /// Nodal values at the volume nodes of element `k`.
    pub fn nodal_values(&self, coeffs: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.basis {
            Some(b) => b.apply_v(coeffs, out),
            None => {
                out.copy_from_slice(coeffs);
                Ok(())
            }
        }
    }

    /// Samples (nodal) or projects with the curved mass matrix (modal).
    pub fn set_initial_condition(&self, ic: &InitialCondition) -> Result<SolutionState> {
        let dim = self.dim();
        let mut state = self.zero_state();
        for (k, g) in self.geometry.iter().enumerate() {
            let u0: Vec<f64> = g.x.iter().map(|&x| ic.eval(dim, x)).collect();
            match &self.basis {
                None => state.element_mut(k).copy_from_slice(&u0),
                Some(basis) => {
                    let wju: Vec<f64> = u0
                        .iter()
                        .zip(&g.j)
                        .zip(&self.ops.weights)
                        .map(|((u, j), w)| u * j * w)
                        .collect();
                    let mut rhs = vec![0.0; basis.len()];
                    basis.apply_vt(&wju, &mut rhs)?;
                    let mass = physical_mass_dense(basis, &g.j);
                    let chol = mass.cholesky().ok_or_else(|| Error::Geometry {
                        element: k,
                        msg: "curved mass matrix is not positive definite".into(),
                    })?;
                    let c = chol.solve(&DVector::from_vec(rhs));
                    state.element_mut(k).copy_from_slice(c.as_slice());
                }
            }
        }
        Ok(state)
    }

    /// Runs `f` on every element, splitting the elements across worker threads.
    fn for_each_element<F>(&self, out: &mut [f64], stride: usize, scratch: &mut [Scratch], f: F) -> Result<()>
    where
        F: Fn(usize, &mut [f64], &mut Scratch) -> Result<()> + Sync,
    {
        let k = self.num_elements();
        if scratch.len() <= 1 {
            let s = &mut scratch[0];
            for (e, chunk) in out.chunks_mut(stride).enumerate().take(k) {
                f(e, chunk, s)?;
            }
            return Ok(());
        }
        let per = k.div_ceil(scratch.len());
        std::thread::scope(|scope| {
            let handles: Vec<_> = out
                .chunks_mut(per * stride)
                .zip(scratch.iter_mut())
                .enumerate()
                .map(|(t, (block, s))| {
                    let f = &f;
                    scope.spawn(move || {
                        for (i, chunk) in block.chunks_mut(stride).enumerate() {
                            f(t * per + i, chunk, s)?;
                        }
                        Ok(())
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker thread panicked"))
                .collect::<Result<()>>()
        })
    }

    /// Nodal residual `r^(h,κ)` of every element for the given state.
    pub fn residual(&self, state: &[f64], out: &mut [f64], ws: &mut Workspace) -> Result<()> {
        self.check_state(state)?;
        let n = self.num_nodes();
        if out.len() != n * self.num_elements() {
            return Err(Error::Dimension { expected: n * self.num_elements(), got: out.len() });
        }
        let stride = self.stride();
        let nft = self.facet_total;

        // nodal values and facet traces
        {
            let Workspace { nodal, traces, scratch, .. } = ws;
            let nodal_ref: &mut [f64] = nodal;
            match &self.basis {
                Some(basis) => self.for_each_element(nodal_ref, n, scratch, |k, u, _| {
                    basis.apply_v(&state[k * stride..(k + 1) * stride], u)
                })?,
                None => nodal_ref.copy_from_slice(state),
            }
            let nodal: &[f64] = nodal;
            self.for_each_element(traces, nft, scratch, |k, tr, s| {
                let u = &nodal[k * n..(k + 1) * n];
                for (z, f) in self.ops.facets.iter().enumerate() {
                    let off = self.facet_offsets[z];
                    self.ops.apply_r(z, u, &mut tr[off..off + f.len()], &mut s.kron);
                }
                Ok(())
            })?;
        }

        // one flux evaluation per interface point, mirrored to the partner
        let flux = &self.config.flux;
        for k in 0..self.num_elements() {
            for z in 0..self.ops.facets.len() {
                let link = self.connectivity.partner(k, z);
                if (link.element, link.facet) < (k, z) {
                    continue;
                }
                let base = k * nft + self.facet_offsets[z];
                let pbase = link.element * nft + self.facet_offsets[link.facet];
                let normals = &self.geometry[k].facets[z].normal;
                for (i, &pi) in link.perm.iter().enumerate() {
                    let f = numerical_flux(ws.traces[base + i], ws.traces[pbase + pi], normals[i], flux);
                    ws.fstar[base + i] = f;
                    ws.fstar[pbase + pi] = -f;
                }
            }
        }

        let nodal: &[f64] = &ws.nodal;
        let traces: &[f64] = &ws.traces;
        let fstar: &[f64] = &ws.fstar;
        let dim = self.dim();
        let a = flux.velocity;
        self.for_each_element(out, n, &mut ws.scratch, |k, r, s| {
            let u = &nodal[k * n..(k + 1) * n];
            let tr = &traces[k * nft..(k + 1) * nft];
            let fs = &fstar[k * nft..(k + 1) * nft];
            match &self.operators[k] {
                PhysicalOperators::ReferenceFused { bj, normals, .. } => {
                    let coef = &self.volume_coef[k];
                    r.fill(0.0);
                    for l in 0..dim {
                        for ((t, c), x) in s.a.iter_mut().zip(coef).zip(u) {
                            *t = c[l] * x;
                        }
                        self.ops.apply_deta_t_add(l, &s.a, r);
                        self.ops.apply_deta(l, u, &mut s.b);
                        for ((ri, c), d) in r.iter_mut().zip(coef).zip(&s.b) {
                            *ri -= c[l] * d;
                        }
                    }
                    for (z, f) in self.ops.facets.iter().enumerate() {
                        let off = self.facet_offsets[z];
                        let g = &mut s.facet[..f.len()];
                        for (i, gi) in g.iter_mut().enumerate() {
                            let an = a[0] * normals[z][i][0] + a[1] * normals[z][i][1] + a[2] * normals[z][i][2];
                            *gi = bj[z][i] * (0.5 * an * tr[off + i] - fs[off + i]);
                        }
                        self.ops.apply_rt(z, g, &mut s.a, &mut s.kron);
                        for (ri, t) in r.iter_mut().zip(&s.a) {
                            *ri += t;
                        }
                    }
                }
                PhysicalOperators::PhysicalPrecomputed { qt, lift, .. } => {
                    let uv = DVector::from_column_slice(u);
                    let mut acc = DVector::zeros(n);
                    for (m, q) in qt.iter().enumerate() {
                        if a[m] != 0.0 {
                            acc.gemv(a[m], q, &uv, 1.0);
                        }
                    }
                    for (z, l) in lift.iter().enumerate() {
                        let off = self.facet_offsets[z];
                        let fv = DVector::from_column_slice(&fs[off..off + l.ncols()]);
                        acc.gemv(-1.0, l, &fv, 1.0);
                    }
                    r.copy_from_slice(acc.as_slice());
                }
            }
            Ok(())
        })
    }

    /// Time derivative of the state; `ws` retains the nodal residual and the
    /// nodal values of the state.
    pub fn rhs(&self, state: &[f64], dudt: &mut [f64], ws: &mut Workspace) -> Result<()> {
        let mut residual = std::mem::take(&mut ws.residual);
        let res = self.residual(state, &mut residual, ws);
        ws.residual = residual;
        res?;
        self.time_derivative(dudt, ws)
    }

    fn time_derivative(&self, dudt: &mut [f64], ws: &mut Workspace) -> Result<()> {
        let n = self.num_nodes();
        let residual: &[f64] = &ws.residual;
        match &self.basis {
            None => {
                for (k, (d, r)) in dudt.chunks_mut(n).zip(residual.chunks(n)).enumerate() {
                    for ((di, ri), s) in d.iter_mut().zip(r).zip(&self.inv_wj[k]) {
                        *di = ri * s;
                    }
                }
                Ok(())
            }
            Some(basis) => {
                let stride = basis.len();
                self.for_each_element(dudt, stride, &mut ws.scratch, |k, d, s| {
                    basis.apply_vt(&residual[k * n..(k + 1) * n], &mut s.modal)?;
                    weight_adjusted_apply(basis, &self.w_over_j[k], &s.modal, d, &mut s.a)
                })
            }
        }
    }

    /// Convenience wrapper allocating its own workspace.
    pub fn evaluate(&self, state: &SolutionState) -> Result<Vec<f64>> {
        let mut ws = self.workspace();
        let mut out = vec![0.0; self.num_dofs()];
        self.rhs(&state.data, &mut out, &mut ws)?;
        Ok(out)
    }

    /// Dense `M̃^(κ)` per element, the inverse of the weight-adjusted inverse.
    pub fn weight_adjusted_mass(&self) -> Option<&[DMatrix<f64>]> {
        let basis = self.basis.as_ref()?;
        Some(self.m_tilde.get_or_init(|| {
            self.w_over_j
                .iter()
                .map(|woj| {
                    weight_adjusted_inverse_dense(basis, woj)
                        .try_inverse()
                        .expect("weight-adjusted inverse is positive definite")
                })
                .collect()
        }))
    }

    /// Conservation residual `Σ_κ 1ᵀ W J du/dt` and energy residual (nodal:
    /// `Σ uᵀ W J du/dt`, modal: `Σ ũᵀ M̃ dũ/dt`) of a state.
    pub fn diagnostics(&self, state: &[f64], ws: &mut Workspace) -> Result<(f64, f64)> {
        let mut dudt = vec![0.0; self.num_dofs()];
        self.rhs(state, &mut dudt, ws)?;
        let n = self.num_nodes();
        let stride = self.stride();
        let mut nodal_dudt = vec![0.0; n];
        let mut conservation = 0.0;
        let mut energy = 0.0;
        for k in 0..self.num_elements() {
            let d = &dudt[k * stride..(k + 1) * stride];
            self.nodal_values(d, &mut nodal_dudt)?;
            let g = &self.geometry[k];
            for i in 0..n {
                conservation += self.ops.weights[i] * g.j[i] * nodal_dudt[i];
            }
            match self.weight_adjusted_mass() {
                None => {
                    let u = &state[k * n..(k + 1) * n];
                    for i in 0..n {
                        energy += u[i] * self.ops.weights[i] * g.j[i] * nodal_dudt[i];
                    }
                }
                Some(mt) => {
                    let u = DVector::from_column_slice(&state[k * stride..(k + 1) * stride]);
                    let dv = DVector::from_column_slice(d);
                    energy += u.dot(&(&mt[k] * dv));
                }
            }
        }
        Ok((conservation, energy))
    }

    /// Discrete L² error against the exact advected initial condition.
    pub fn l2_error(&self, state: &SolutionState, ic: &InitialCondition) -> Result<f64> {
        self.check_state(&state.data)?;
        let dim = self.dim();
        let mut u = vec![0.0; self.num_nodes()];
        let mut sum = 0.0;
        for (k, g) in self.geometry.iter().enumerate() {
            self.nodal_values(state.element(k), &mut u)?;
            for (i, &x) in g.x.iter().enumerate() {
                let e = u[i] - ic.exact(dim, x, self.config.flux.velocity, state.time);
                sum += e * e * self.ops.weights[i] * g.j[i];
            }
        }
        Ok(sum.sqrt())
    }

    /// Advances the state to `t_final` with LSRK5(4). `observer` receives the
    /// step index, time and data after every completed step.
    pub fn integrate<O>(&self, state: &mut SolutionState, t_final: f64, dt: f64, observer: O) -> Result<usize>
    where
        O: FnMut(usize, f64, &[f64]) -> Result<()>,
    {
        self.check_state(&state.data)?;
        let mut ws = self.workspace();
        let mut rhs = |_t: f64, u: &[f64], du: &mut [f64]| self.rhs(u, du, &mut ws);
        let mut scratch = LsrkScratch::new(state.data.len());
        let mut t = state.time;
        let steps = integrate_lsrk(&mut rhs, &mut state.data, &mut t, t_final, dt, &mut scratch, observer);
        state.time = t;
        steps
    }
}

/// Coefficients of the five-stage fourth-order 2N-storage scheme of
/// Carpenter and Kennedy.
pub const LSRK_A: [f64; 5] = [
    0.0,
    -567301805773.0 / 1357537059087.0,
    -2404267990393.0 / 2016746695238.0,
    -3550918686646.0 / 2091501179385.0,
    -1275806237668.0 / 842570457699.0,
];
pub const LSRK_B: [f64; 5] = [
    1432997174477.0 / 9575080441755.0,
    5161836677717.0 / 13612068292357.0,
    1720146321549.0 / 2090206949498.0,
    3134564353537.0 / 4481467310338.0,
    2277821191437.0 / 14882151754819.0,
];
pub const LSRK_C: [f64; 5] = [
    0.0,
    1432997174477.0 / 9575080441755.0,
    2526269341429.0 / 6820363962896.0,
    2006345519317.0 / 3224310063776.0,
    2802321613138.0 / 2924317926251.0,
];

pub struct LsrkScratch {
    k: Vec<f64>,
    l: Vec<f64>,
}

impl LsrkScratch {
    pub fn new(n: usize) -> Self {
        Self { k: vec![0.0; n], l: vec![0.0; n] }
    }
}

/// One LSRK5(4) step of size `dt` from time `t`.
pub fn lsrk_step<F>(rhs: &mut F, u: &mut [f64], t: f64, dt: f64, s: &mut LsrkScratch) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    s.k.fill(0.0);
    for stage in 0..5 {
        rhs(t + LSRK_C[stage] * dt, u, &mut s.l)?;
        let (a, b) = (LSRK_A[stage], LSRK_B[stage]);
        for ((ki, li), ui) in s.k.iter_mut().zip(&s.l).zip(u.iter_mut()) {
            *ki = a * *ki + dt * li;
            *ui += b * *ki;
        }
    }
    Ok(())
}

/// Integrates `u' = rhs(t, u)` from `*t` to `t_final`, shortening the last
/// step to land on `t_final`. Returns the number of steps taken.
pub fn integrate_lsrk<F, O>(
    rhs: &mut F,
    u: &mut [f64],
    t: &mut f64,
    t_final: f64,
    dt: f64,
    scratch: &mut LsrkScratch,
    mut observer: O,
) -> Result<usize>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    O: FnMut(usize, f64, &[f64]) -> Result<()>,
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let mut step = 0;
    while *t < t_final {
        let remaining = t_final - *t;
        // avoid a sliver step from round-off in the accumulated time
        let h = if remaining <= dt * (1.0 + 1e-10) { remaining } else { dt };
        lsrk_step(rhs, u, *t, h, scratch)?;
        step += 1;
        *t = if h == remaining { t_final } else { *t + h };
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step, time: *t });
        }
        observer(step, *t, u)?;
    }
    Ok(step)
}
