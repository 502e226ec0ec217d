//! Experiment configurations, diagnostics, convergence studies and output
//! records.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physop::Algorithm;
use crate::refelem::{build_operators, verify_sbp, ElementShape, OperatorConfig, SbpReport};
use crate::solver::{Discretization, DiscretizationConfig, FluxConfig, Formulation, InitialCondition};

/// Largest global operator the spectral-radius assembly accepts.
pub const MAX_SPECTRAL_DOFS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ResidualTrace,
    HSweep,
    PSweep,
    SpectralRadius,
    OperatorVerify,
}

/// How the time step is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtPolicy {
    /// `C` in `dt = C h / (|a| ρ̂(p))`.
    #[serde(default = "default_courant")]
    pub courant: f64,
    /// Overrides the formula when set.
    #[serde(default)]
    pub fixed: Option<f64>,
    /// Halve `dt` until the relative change of the L² error drops below this.
    #[serde(default)]
    pub halving_tolerance: Option<f64>,
    #[serde(default = "default_max_halvings")]
    pub max_halvings: usize,
}

fn default_courant() -> f64 {
    0.1
}

fn default_max_halvings() -> usize {
    4
}

impl Default for DtPolicy {
    fn default() -> Self {
        Self {
            courant: default_courant(),
            fixed: None,
            halving_tolerance: None,
            max_halvings: default_max_halvings(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub shape: ElementShape,
    #[serde(default = "default_formulation")]
    pub formulation: Formulation,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    /// Polynomial degree of the single run; ignored by p-sweeps.
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// Elements per direction of the single run; ignored by h-sweeps.
    #[serde(default = "default_cells")]
    pub cells: usize,
    /// Defaults to 3 on triangles and 2 on tetrahedra.
    #[serde(default)]
    pub mapping_degree: Option<usize>,
    #[serde(default = "default_warp")]
    pub warp: f64,
    /// 1 upwind, 0 central.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Defaults to all ones.
    #[serde(default)]
    pub velocity: Option<Vec<f64>>,
    #[serde(default = "default_final_time")]
    pub final_time: f64,
    #[serde(default)]
    pub dt: DtPolicy,
    #[serde(default)]
    pub initial_condition: InitialCondition,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    /// Values of M for h-sweeps.
    #[serde(default)]
    pub sweep_cells: Vec<usize>,
    /// Values of p for p-sweeps and operator verification.
    #[serde(default)]
    pub sweep_degrees: Vec<usize>,
    #[serde(default)]
    pub allow_metric_violation: bool,
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_formulation() -> Formulation {
    Formulation::Modal
}
fn default_algorithm() -> Algorithm {
    Algorithm::ReferenceFused
}
fn default_degree() -> usize {
    4
}
fn default_cells() -> usize {
    2
}
fn default_warp() -> f64 {
    crate::mesh::DEFAULT_WARP
}
fn default_lambda() -> f64 {
    1.0
}
fn default_final_time() -> f64 {
    1.0
}
fn default_snapshots() -> usize {
    101
}
fn default_threads() -> usize {
    1
}

impl ExperimentConfig {
    /// A configuration with every optional field at its default.
    pub fn new(kind: ExperimentKind, shape: ElementShape) -> Self {
        Self {
            kind,
            shape,
            formulation: default_formulation(),
            algorithm: default_algorithm(),
            degree: default_degree(),
            cells: default_cells(),
            mapping_degree: None,
            warp: default_warp(),
            lambda: default_lambda(),
            velocity: None,
            final_time: default_final_time(),
            dt: DtPolicy::default(),
            initial_condition: InitialCondition::default(),
            snapshots: default_snapshots(),
            sweep_cells: Vec::new(),
            sweep_degrees: Vec::new(),
            allow_metric_violation: false,
            out_dir: None,
            seed: 0,
            threads: default_threads(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)
            .map_err(|e| Error::Parse(format!("line {} column {}: {e}", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn mapping_degree(&self) -> usize {
        self.mapping_degree.unwrap_or(match self.shape {
            ElementShape::Triangle => 3,
            ElementShape::Tetrahedron => 2,
        })
    }

    pub fn velocity(&self) -> Vec<f64> {
        self.velocity.clone().unwrap_or_else(|| vec![1.0; self.shape.dim()])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("field `{field}`: {msg}")));
        let dim = self.shape.dim();
        if self.degree == 0 || self.degree > 16 {
            return bad("degree", format!("must lie in 1..=16, got {}", self.degree));
        }
        if self.cells == 0 || self.cells > 64 {
            return bad("cells", format!("must lie in 1..=64, got {}", self.cells));
        }
        if !(1..=4).contains(&self.mapping_degree()) {
            return bad("mapping_degree", format!("must lie in 1..=4, got {}", self.mapping_degree()));
        }
        if !(0.0..0.25).contains(&self.warp) {
            return bad("warp", format!("must lie in [0, 0.25), got {}", self.warp));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda", format!("must lie in [0, 1], got {}", self.lambda));
        }
        let v = self.velocity();
        if v.len() != dim || v.iter().any(|x| !x.is_finite()) {
            return bad("velocity", format!("must have {dim} finite components"));
        }
        if !(self.final_time > 0.0) || !self.final_time.is_finite() {
            return bad("final_time", format!("must be positive, got {}", self.final_time));
        }
        if !(self.dt.courant > 0.0) {
            return bad("dt.courant", format!("must be positive, got {}", self.dt.courant));
        }
        if let Some(f) = self.dt.fixed {
            if !(f > 0.0) {
                return bad("dt.fixed", format!("must be positive, got {f}"));
            }
        }
        if self.snapshots < 2 {
            return bad("snapshots", format!("need at least 2, got {}", self.snapshots));
        }
        if self.threads == 0 {
            return bad("threads", "must be positive".into());
        }
        if self.kind == ExperimentKind::HSweep && self.sweep_cells.len() < 2 {
            return bad("sweep_cells", "an h-sweep needs at least two meshes".into());
        }
        if self.kind == ExperimentKind::PSweep && self.sweep_degrees.is_empty() {
            return bad("sweep_degrees", "a p-sweep needs at least one degree".into());
        }
        if self.sweep_cells.iter().any(|&m| m == 0 || m > 64) {
            return bad("sweep_cells", "entries must lie in 1..=64".into());
        }
        if self.sweep_degrees.iter().any(|&p| p == 0 || p > 16) {
            return bad("sweep_degrees", "entries must lie in 1..=16".into());
        }
        Ok(())
    }

    pub fn discretization(&self, degree: usize, cells: usize) -> Result<DiscretizationConfig> {
        Ok(DiscretizationConfig {
            shape: self.shape,
            degree,
            mapping_degree: self.mapping_degree(),
            cells,
            warp: self.warp,
            formulation: self.formulation,
            algorithm: self.algorithm,
            flux: FluxConfig::new(&self.velocity(), self.lambda)?,
            allow_metric_violation: self.allow_metric_violation,
            threads: self.threads,
        })
    }

    pub fn scheme_name(&self) -> String {
        let f = match self.formulation {
            Formulation::Nodal => "nodal",
            Formulation::Modal => "modal",
        };
        let shape = match self.shape {
            ElementShape::Triangle => "triangle",
            ElementShape::Tetrahedron => "tetrahedron",
        };
        let flux = if self.lambda == 1.0 {
            "upwind".to_string()
        } else if self.lambda == 0.0 {
            "central".to_string()
        } else {
            format!("lambda={}", self.lambda)
        };
        format!("{shape}-{f}-{flux}")
    }
}

/// Normalized spectral radius `h ρ / |a|` of the upwind operator on the M=2
/// curved mesh, fitted per shape and formulation as `c (p+1)^e`.
pub fn rho_hat(shape: ElementShape, formulation: Formulation, p: usize) -> f64 {
    let (c, e) = match (shape, formulation) {
        (ElementShape::Triangle, Formulation::Nodal) => (1.13, 3.35),
        (ElementShape::Triangle, Formulation::Modal) => (1.72, 1.76),
        (ElementShape::Tetrahedron, Formulation::Nodal) => (0.97, 4.12),
        (ElementShape::Tetrahedron, Formulation::Modal) => (1.9, 1.76),
    };
    c * ((p + 1) as f64).powf(e)
}

/// Time step from the configured policy.
pub fn time_step(cfg: &ExperimentConfig, disc: &Discretization) -> f64 {
    if let Some(dt) = cfg.dt.fixed {
        return dt;
    }
    let speed = disc.config.flux.speed().max(f64::MIN_POSITIVE);
    cfg.dt.courant * disc.mesh.h() / (speed * rho_hat(cfg.shape, cfg.formulation, disc.config.degree))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub conservation: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub scheme: String,
    pub dofs: usize,
    pub dt: f64,
    pub steps: usize,
    pub snapshots: Vec<Snapshot>,
    pub l2_error: f64,
    pub spectral_radius: Option<f64>,
    pub wall_time_s: f64,
}

/// Integrates one configuration, sampling the conservation and energy
/// residuals at the completed steps nearest to equispaced target times.
pub fn residual_trace(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let disc = Discretization::new(cfg.discretization(cfg.degree, cfg.cells)?)?;
    let dt = time_step(cfg, &disc);
    let mut state = disc.set_initial_condition(&cfg.initial_condition)?;
    let targets: Vec<f64> = (0..cfg.snapshots)
        .map(|j| cfg.final_time * j as f64 / (cfg.snapshots - 1) as f64)
        .collect();
    let mut ws = disc.workspace();
    let mut snapshots = Vec::with_capacity(cfg.snapshots);
    let (c0, e0) = disc.diagnostics(&state.data, &mut ws)?;
    snapshots.push(Snapshot { step: 0, t: 0.0, conservation: c0, energy: e0 });
    let mut next = 1;
    let mut prev = (0usize, 0.0f64, state.data.clone());
    let t_final = cfg.final_time;
    let steps = disc.integrate(&mut state, t_final, dt, |step, t, u| {
        while next < targets.len() && targets[next] <= t {
            let target = targets[next];
            let use_prev = (target - prev.1).abs() < (t - target).abs();
            let (s, ts, data) = if use_prev { (prev.0, prev.1, &prev.2[..]) } else { (step, t, u) };
            let (c, e) = disc.diagnostics(data, &mut ws)?;
            snapshots.push(Snapshot { step: s, t: ts, conservation: c, energy: e });
            next += 1;
        }
        prev.0 = step;
        prev.1 = t;
        prev.2.copy_from_slice(u);
        Ok(())
    })?;
    let l2_error = disc.l2_error(&state, &cfg.initial_condition)?;
    Ok(RunRecord {
        config: cfg.clone(),
        scheme: cfg.scheme_name(),
        dofs: disc.num_dofs(),
        dt,
        steps,
        snapshots,
        l2_error,
        spectral_radius: None,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Outcome of integrating to the final time with a given step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub l2_error: f64,
    pub dt: f64,
    pub steps: usize,
    pub dofs: usize,
}

/// Integrates to the final time and measures the L² error, halving the step
/// as requested by the policy.
pub fn solve_error(cfg: &ExperimentConfig, degree: usize, cells: usize) -> Result<SolveOutcome> {
    let disc = Discretization::new(cfg.discretization(degree, cells)?)?;
    let mut dt = time_step(cfg, &disc);
    let run = |dt: f64| -> Result<(f64, usize)> {
        let mut state = disc.set_initial_condition(&cfg.initial_condition)?;
        let steps = disc.integrate(&mut state, cfg.final_time, dt, |_, _, _| Ok(()))?;
        Ok((disc.l2_error(&state, &cfg.initial_condition)?, steps))
    };
    let (mut err, mut steps) = run(dt)?;
    if let Some(tol) = cfg.dt.halving_tolerance {
        for _ in 0..cfg.dt.max_halvings {
            let (e, s) = run(0.5 * dt)?;
            let change = (e - err).abs() / err.abs().max(f64::MIN_POSITIVE);
            dt *= 0.5;
            err = e;
            steps = s;
            if change < tol {
                break;
            }
        }
    }
    Ok(SolveOutcome { l2_error: err, dt, steps, dofs: disc.num_dofs() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub scheme: String,
    pub p: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub dofs: usize,
    pub l2_error: f64,
    /// Observed order relative to the previous row of an h-sweep.
    pub order: Option<f64>,
    pub dt: f64,
    pub steps: usize,
}

/// Runs an h-sweep (over `sweep_cells` at `degree`) or a p-sweep (over
/// `sweep_degrees` at `cells`).
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRow>> {
    cfg.validate()?;
    let runs: Vec<(usize, usize)> = match cfg.kind {
        ExperimentKind::HSweep => cfg.sweep_cells.iter().map(|&m| (cfg.degree, m)).collect(),
        ExperimentKind::PSweep => cfg.sweep_degrees.iter().map(|&p| (p, cfg.cells)).collect(),
        other => return Err(Error::Config(format!("{other:?} is not a sweep"))),
    };
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(runs.len());
    for (p, m) in runs {
        let out = solve_error(cfg, p, m)?;
        let order = match (cfg.kind, rows.last()) {
            (ExperimentKind::HSweep, Some(prev)) => Some(observed_order(prev.l2_error, out.l2_error, prev.m, m)),
            _ => None,
        };
        rows.push(ConvergenceRow {
            scheme: cfg.scheme_name(),
            p,
            m,
            dofs: out.dofs,
            l2_error: out.l2_error,
            order,
            dt: out.dt,
            steps: out.steps,
        });
    }
    Ok(rows)
}

/// `log(e0/e1) / log(h0/h1)` with `h = 1/M`.
pub fn observed_order(e0: f64, e1: f64, m0: usize, m1: usize) -> f64 {
    (e0 / e1).ln() / (m1 as f64 / m0 as f64).ln()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fitted_exponent(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Global matrix of the semi-discrete operator, assembled column by column.
pub fn assemble_operator(disc: &Discretization) -> Result<DMatrix<f64>> {
    let n = disc.num_dofs();
    if n > MAX_SPECTRAL_DOFS {
        return Err(Error::TooLarge(format!(
            "{n} degrees of freedom exceed the assembly limit of {MAX_SPECTRAL_DOFS}"
        )));
    }
    let mut ws = disc.workspace();
    let mut a = DMatrix::zeros(n, n);
    let mut unit = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        unit[j] = 1.0;
        disc.rhs(&unit, &mut col, &mut ws)?;
        a.set_column(j, &DVector::from_column_slice(&col));
        unit[j] = 0.0;
    }
    Ok(a)
}

/// Largest eigenvalue magnitude of the global semi-discrete operator.
pub fn spectral_radius(disc: &Discretization, seed: u64) -> Result<f64> {
    let a = assemble_operator(disc)?;
    if a.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    match a.clone().try_schur(1e-14, 10_000) {
        Some(schur) => Ok(schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)),
        None => Ok(power_norm(&a, seed)),
    }
}

/// Spectral norm by power iteration on `A Aᵀ`, an upper bound for ρ(A).
fn power_norm(a: &DMatrix<f64>, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DVector::from_fn(a.ncols(), |_, _| rng.random_range(-1.0..1.0));
    let mut sigma2 = 0.0;
    for _ in 0..10_000 {
        x /= x.norm();
        let y = a.transpose() * (a * &x);
        let next = y.norm();
        x = y;
        if (next - sigma2).abs() <= 1e-8 * next {
            sigma2 = next;
            break;
        }
        sigma2 = next;
    }
    sigma2.sqrt()
}

/// Largest deviation between the assembled operator applied to random
/// vectors and direct evaluation.
pub fn assembly_check(disc: &Discretization, a: &DMatrix<f64>, seed: u64, samples: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ws = disc.workspace();
    let n = disc.num_dofs();
    let mut out = vec![0.0; n];
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        disc.rhs(&x, &mut out, &mut ws)?;
        let y = a * DVector::from_column_slice(&x);
        worst = worst.max(y.iter().zip(&out).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralRow {
    pub scheme: String,
    pub p: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub dofs: usize,
    pub spectral_radius: f64,
    /// `h ρ / |a|`
    pub normalized: f64,
}

/// Spectral radii over `sweep_degrees` (or `degree` alone).
pub fn spectral_sweep(cfg: &ExperimentConfig) -> Result<Vec<SpectralRow>> {
    cfg.validate()?;
    let degrees = if cfg.sweep_degrees.is_empty() { vec![cfg.degree] } else { cfg.sweep_degrees.clone() };
    degrees
        .into_iter()
        .map(|p| {
            let disc = Discretization::new(cfg.discretization(p, cfg.cells)?)?;
            let rho = spectral_radius(&disc, cfg.seed)?;
            let speed = disc.config.flux.speed();
            Ok(SpectralRow {
                scheme: cfg.scheme_name(),
                p,
                m: cfg.cells,
                dofs: disc.num_dofs(),
                spectral_radius: rho,
                normalized: if speed > 0.0 { rho * disc.mesh.h() / speed } else { 0.0 },
            })
        })
        .collect()
}

/// Verifies the default operators of each degree in `sweep_degrees` (or
/// `degree` alone).
pub fn verify_operators(shape: ElementShape, degrees: &[usize]) -> Result<Vec<SbpReport>> {
    degrees
        .iter()
        .map(|&q| Ok(verify_sbp(&build_operators(&OperatorConfig::default_for(shape, q))?)))
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let cfg = ExperimentConfig::from_json(r#"{"kind": "residual-trace", "shape": "triangle"}"#).unwrap();
        assert_eq!(cfg.degree, 4);
        assert_eq!(cfg.snapshots, 101);
        assert_eq!(cfg.velocity(), vec![1.0, 1.0]);
        let err = ExperimentConfig::from_json(r#"{"kind": "residual-trace", "shape": "triangle", "lambda": 2}"#);
        assert!(matches!(err, Err(Error::Config(m)) if m.contains("lambda")));
        let err = ExperimentConfig::from_json(r#"{"kind": "residual-trace", "shape": "triangle", "bogus": 1}"#);
        assert!(matches!(err, Err(Error::Parse(_))));
    }

    #[test]
    fn order_of_exact_powers() {
        assert!((observed_order(1.0, 1.0 / 32.0, 2, 4) - 5.0).abs() < 1e-12);
        let x = [2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        assert!((fitted_exponent(&x, &y) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_velocity_has_zero_spectrum() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::SpectralRadius, ElementShape::Triangle);
        cfg.degree = 2;
        cfg.cells = 1;
        cfg.velocity = Some(vec![0.0, 0.0]);
        let disc = Discretization::new(cfg.discretization(2, 1).unwrap()).unwrap();
        assert_eq!(spectral_radius(&disc, 0).unwrap(), 0.0);
    }
}
