use proptest::prelude::*;
use simplex_sbp::mesh::DEFAULT_WARP;
use simplex_sbp::physop::Algorithm;
use simplex_sbp::refelem::ElementShape;
use simplex_sbp::solver::{
    integrate_lsrk, numerical_flux, Discretization, DiscretizationConfig, FluxConfig, Formulation, InitialCondition,
    LsrkScratch,
};
use simplex_sbp::Error;

fn config(shape: ElementShape, p: usize, m: usize, formulation: Formulation, lambda: f64) -> DiscretizationConfig {
    let dim = shape.dim();
    let velocity: Vec<f64> = [1.0, 0.6, -0.4][..dim].to_vec();
    DiscretizationConfig {
        shape,
        degree: p,
        mapping_degree: if dim == 2 { 3 } else { 2 },
        cells: m,
        warp: DEFAULT_WARP,
        formulation,
        algorithm: Algorithm::ReferenceFused,
        flux: FluxConfig::new(&velocity, lambda).unwrap(),
        allow_metric_violation: false,
        threads: 1,
    }
}

fn state(d: &Discretization, seed: u64) -> Vec<f64> {
    (0..d.num_dofs())
        .map(|i| {
            let h = (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ seed;
            (h % 2001) as f64 / 1000.0 - 1.0
        })
        .collect()
}

/// Energy rate from interface jumps alone: `-(λ/2) Σ_faces ∫ |a·n| [u]²`,
/// assembled from dense extrapolation matrices and the facet geometry.
fn jump_dissipation(d: &Discretization, u: &[f64]) -> f64 {
    let n = d.num_nodes();
    let a = d.config.flux.velocity;
    let trace = |k: usize, z: usize| -> Vec<f64> {
        let r = &d.ops.facets[z].r;
        (0..r.nrows()).map(|i| (0..n).map(|c| r[(i, c)] * u[k * n + c]).sum()).collect()
    };
    let mut total = 0.0;
    for k in 0..d.num_elements() {
        for z in 0..d.ops.facets.len() {
            let link = d.connectivity.partner(k, z);
            let (um, up) = (trace(k, z), trace(link.element, link.facet));
            let fg = &d.geometry[k].facets[z];
            for (i, &pi) in link.perm.iter().enumerate() {
                let an = (0..3).map(|c| a[c] * fg.normal[i][c]).sum::<f64>().abs();
                let jump = um[i] - up[pi];
                total += d.ops.facets[z].weights[i] * fg.j[i] * an * jump * jump;
            }
        }
    }
    // every interface was visited from both sides
    -0.25 * d.config.flux.lambda * total
}

#[test]
fn nodal_energy_rate_equals_jump_dissipation() {
    for (shape, p) in [(ElementShape::Triangle, 3), (ElementShape::Tetrahedron, 2)] {
        for lambda in [1.0, 0.5, 0.0] {
            let d = Discretization::new(config(shape, p, 2, Formulation::Nodal, lambda)).unwrap();
            let u = state(&d, 7);
            let mut ws = d.workspace();
            let (cons, energy) = d.diagnostics(&u, &mut ws).unwrap();
            let expect = jump_dissipation(&d, &u);
            assert!((energy - expect).abs() < 1e-11 * expect.abs().max(1.0), "{shape:?} λ={lambda}: {energy} vs {expect}");
            assert!(cons.abs() < 1e-12);
        }
    }
}

#[test]
fn constant_state_is_steady() {
    for formulation in [Formulation::Nodal, Formulation::Modal] {
        let d = Discretization::new(config(ElementShape::Triangle, 4, 2, formulation, 1.0)).unwrap();
        let s = d.set_initial_condition(&InitialCondition::Constant { value: -2.5 }).unwrap();
        let mut u = vec![0.0; d.num_nodes()];
        for k in 0..d.num_elements() {
            d.nodal_values(s.element(k), &mut u).unwrap();
            assert!(u.iter().all(|v| (v + 2.5).abs() < 1e-12));
        }
        let rate = d.evaluate(&s).unwrap().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(rate < 2.5e-11, "{formulation:?} {rate}");
    }
}

#[test]
fn translation_equivariance_on_affine_mesh() {
    let m = 3;
    let mut cfg = config(ElementShape::Triangle, 3, m, Formulation::Modal, 1.0);
    cfg.warp = 0.0;
    cfg.mapping_degree = 1;
    let d = Discretization::new(cfg).unwrap();
    let s = d.stride();
    // element (i, j, t) sits at index 2 (i + M j) + t
    let shift = |u: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for j in 0..m {
            for i in 0..m {
                for t in 0..2 {
                    let from = 2 * (i + m * j) + t;
                    let to = 2 * ((i + 1) % m + m * j) + t;
                    out[to * s..(to + 1) * s].copy_from_slice(&u[from * s..(from + 1) * s]);
                }
            }
        }
        out
    };
    let u = state(&d, 3);
    let mut ws = d.workspace();
    let (mut a, mut b) = (vec![0.0; u.len()], vec![0.0; u.len()]);
    d.rhs(&shift(&u), &mut a, &mut ws).unwrap();
    d.rhs(&u, &mut b, &mut ws).unwrap();
    let err = a.iter().zip(shift(&b)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(err < 1e-11, "{err}");

    let mut s1 = d.zero_state();
    s1.data = shift(&u);
    let mut s2 = d.zero_state();
    s2.data = u;
    d.integrate(&mut s1, 0.05, 0.01, |_, _, _| Ok(())).unwrap();
    d.integrate(&mut s2, 0.05, 0.01, |_, _, _| Ok(())).unwrap();
    let err = s1.data.iter().zip(shift(&s2.data)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(err < 1e-11, "{err}");
}

#[test]
fn discrete_energy_does_not_grow_per_step() {
    for formulation in [Formulation::Nodal, Formulation::Modal] {
        let d = Discretization::new(config(ElementShape::Triangle, 4, 2, formulation, 1.0)).unwrap();
        let mut s = d.set_initial_condition(&InitialCondition::SineProduct).unwrap();
        let mass = d.weight_adjusted_mass().map(|m| m.to_vec());
        let energy = |u: &[f64]| -> f64 {
            let n = d.stride();
            (0..d.num_elements())
                .map(|k| {
                    let uk = &u[k * n..(k + 1) * n];
                    match &mass {
                        None => uk.iter().enumerate().map(|(i, v)| v * v * d.ops.weights[i] * d.geometry[k].j[i]).sum(),
                        Some(mt) => {
                            let v = nalgebra::DVector::from_column_slice(uk);
                            v.dot(&(&mt[k] * &v))
                        }
                    }
                })
                .sum::<f64>()
        };
        let mut prev = energy(&s.data);
        let e0 = prev;
        let dt = 2e-4;
        d.integrate(&mut s, 40.0 * dt, dt, |_, _, u| {
            let e = energy(u);
            assert!(e <= prev * (1.0 + 1e-14), "{formulation:?} energy grew: {prev} -> {e}");
            prev = e;
            Ok(())
        })
        .unwrap();
        assert!(prev < e0);
    }
}

#[test]
fn exact_samples_have_zero_nodal_error() {
    let d = Discretization::new(config(ElementShape::Tetrahedron, 2, 1, Formulation::Nodal, 1.0)).unwrap();
    let s = d.set_initial_condition(&InitialCondition::SineProduct).unwrap();
    assert_eq!(d.l2_error(&s, &InitialCondition::SineProduct).unwrap(), 0.0);
}

#[test]
fn modal_projection_of_polynomial_is_exact_on_affine_elements() {
    let mut cfg = config(ElementShape::Triangle, 3, 2, Formulation::Modal, 1.0);
    cfg.warp = 0.0;
    cfg.mapping_degree = 1;
    let d = Discretization::new(cfg).unwrap();
    let s = d.set_initial_condition(&InitialCondition::Constant { value: 0.75 }).unwrap();
    assert!(d.l2_error(&s, &InitialCondition::Constant { value: 0.75 }).unwrap() < 1e-14);
}

#[test]
fn configuration_errors() {
    let mut cfg = config(ElementShape::Tetrahedron, 2, 2, Formulation::Nodal, 1.0);
    cfg.mapping_degree = 3;
    assert!(matches!(Discretization::new(cfg.clone()), Err(Error::Config(_))));
    cfg.cells = 3;
    cfg.allow_metric_violation = true;
    assert!(Discretization::new(cfg).is_ok());
    let mut cfg = config(ElementShape::Triangle, 0, 2, Formulation::Nodal, 1.0);
    assert!(Discretization::new(cfg.clone()).is_err());
    cfg.degree = 2;
    cfg.threads = 0;
    assert!(Discretization::new(cfg).is_err());
    assert!(FluxConfig::new(&[1.0, 0.0], -0.1).is_err());
    let d = Discretization::new(config(ElementShape::Triangle, 2, 1, Formulation::Nodal, 1.0)).unwrap();
    assert!(matches!(d.rhs(&[0.0; 3], &mut [0.0; 3], &mut d.workspace()), Err(Error::Dimension { .. })));
}

#[test]
fn divergence_is_reported() {
    let mut u = vec![1.0];
    let mut t = 0.0;
    let mut s = LsrkScratch::new(1);
    let mut f = |_t: f64, u: &[f64], d: &mut [f64]| {
        d[0] = 1e200 * u[0];
        Ok(())
    };
    let r = integrate_lsrk(&mut f, &mut u, &mut t, 10.0, 1.0, &mut s, |_, _, _| Ok(()));
    assert!(matches!(r, Err(Error::Divergence { .. })));
}

#[test]
fn final_step_is_shortened() {
    let mut u = vec![0.0];
    let mut t = 0.0;
    let mut s = LsrkScratch::new(1);
    let mut f = |_t: f64, _u: &[f64], d: &mut [f64]| {
        d[0] = 1.0;
        Ok(())
    };
    let steps = integrate_lsrk(&mut f, &mut u, &mut t, 1.0, 0.3, &mut s, |_, _, _| Ok(())).unwrap();
    assert_eq!(steps, 4);
    assert_eq!(t, 1.0);
    assert!((u[0] - 1.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flux_is_consistent_and_antisymmetric(
        u in -5.0f64..5.0, v in -5.0f64..5.0, lambda in 0.0f64..1.0, theta in 0.0f64..6.3,
    ) {
        let cfg = FluxConfig::new(&[0.8, -1.3], lambda).unwrap();
        let n = [theta.cos(), theta.sin(), 0.0];
        let m = [-n[0], -n[1], 0.0];
        let an = 0.8 * n[0] - 1.3 * n[1];
        prop_assert!((numerical_flux(u, u, n, &cfg) - an * u).abs() < 1e-12);
        prop_assert!((numerical_flux(u, v, n, &cfg) + numerical_flux(v, u, m, &cfg)).abs() < 1e-12);
    }

    #[test]
    fn residual_is_linear_conservative_and_stable(
        seed in any::<u64>(), alpha in -2.0f64..2.0, tet in any::<bool>(), modal in any::<bool>(), lambda in 0.0f64..1.0,
    ) {
        let shape = if tet { ElementShape::Tetrahedron } else { ElementShape::Triangle };
        let formulation = if modal { Formulation::Modal } else { Formulation::Nodal };
        let d = Discretization::new(config(shape, 2, 2, formulation, lambda)).unwrap();
        let u = state(&d, seed);
        let v = state(&d, seed.rotate_left(17));
        let mut ws = d.workspace();
        let n = d.num_dofs();
        let (mut ru, mut rv, mut rw) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        d.rhs(&u, &mut ru, &mut ws).unwrap();
        d.rhs(&v, &mut rv, &mut ws).unwrap();
        let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + b).collect();
        d.rhs(&w, &mut rw, &mut ws).unwrap();
        let scale = ru.iter().chain(&rv).fold(1.0f64, |a, x| a.max(x.abs()));
        for i in 0..n {
            prop_assert!((rw[i] - alpha * ru[i] - rv[i]).abs() < 1e-12 * scale);
        }
        let (cons, energy) = d.diagnostics(&u, &mut ws).unwrap();
        prop_assert!(cons.abs() < 1e-12, "conservation {}", cons);
        prop_assert!(energy <= 1e-12, "energy {}", energy);
        if lambda == 0.0 {
            prop_assert!(energy.abs() < 1e-12);
        }
    }
}
