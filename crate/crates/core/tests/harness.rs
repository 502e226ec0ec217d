use simplex_sbp::harness::{
    assemble_operator, assembly_check, observed_order, read_csv, residual_trace, rho_hat, run_convergence,
    spectral_radius, time_step, write_csv, ConvergenceRow, ExperimentConfig, ExperimentKind, Snapshot,
};
use simplex_sbp::refelem::ElementShape;
use simplex_sbp::solver::{Discretization, Formulation};
use simplex_sbp::Error;

fn tmp_dir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("simplex-sbp-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn small(kind: ExperimentKind, shape: ElementShape) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind, shape);
    cfg.degree = 2;
    cfg.cells = 2;
    cfg
}

#[test]
fn trace_has_requested_snapshots_for_any_step() {
    for fixed in [0.013, 0.002, 0.05] {
        let mut cfg = small(ExperimentKind::ResidualTrace, ElementShape::Triangle);
        cfg.final_time = 0.5;
        cfg.dt.fixed = Some(fixed);
        let rec = residual_trace(&cfg).unwrap();
        assert_eq!(rec.snapshots.len(), 101);
        assert_eq!(rec.snapshots[0].step, 0);
        assert!(rec.snapshots.windows(2).all(|w| w[0].step <= w[1].step));
        assert_eq!(rec.snapshots.last().unwrap().t, cfg.final_time);
    }
}

#[test]
fn runs_are_bit_reproducible() {
    let mut cfg = small(ExperimentKind::ResidualTrace, ElementShape::Triangle);
    cfg.final_time = 0.1;
    let a = residual_trace(&cfg).unwrap();
    cfg.threads = 2;
    let b = residual_trace(&cfg).unwrap();
    assert_eq!(a.snapshots, b.snapshots);
    assert_eq!(a.l2_error, b.l2_error);
}

#[test]
fn csv_roundtrip() {
    let dir = tmp_dir("csv");
    let rows = vec![
        Snapshot { step: 0, t: 0.0, conservation: 1e-17, energy: -3.5e-3 },
        Snapshot { step: 7, t: 0.125, conservation: -2e-16, energy: -1.0 / 3.0 },
    ];
    let path = dir.join("trace.csv");
    write_csv(&path, &rows).unwrap();
    let back: Vec<Snapshot> = read_csv(&path).unwrap();
    assert_eq!(back, rows);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("step,t,conservation,energy"));
    let conv = vec![ConvergenceRow {
        scheme: "triangle-modal-upwind".into(),
        p: 2,
        m: 4,
        dofs: 192,
        l2_error: 1.5e-3,
        order: None,
        dt: 0.01,
        steps: 100,
    }];
    write_csv(&dir.join("c.csv"), &conv).unwrap();
    let back: Vec<ConvergenceRow> = read_csv(&dir.join("c.csv")).unwrap();
    assert_eq!(back, conv);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn assembled_operator_matches_matrix_free_evaluation() {
    for (shape, formulation) in [(ElementShape::Triangle, Formulation::Modal), (ElementShape::Tetrahedron, Formulation::Nodal)] {
        let mut cfg = small(ExperimentKind::SpectralRadius, shape);
        cfg.formulation = formulation;
        cfg.cells = 1;
        let d = Discretization::new(cfg.discretization(2, 1).unwrap()).unwrap();
        let a = assemble_operator(&d).unwrap();
        assert!(assembly_check(&d, &a, 5, 4).unwrap() < 1e-12);
    }
}

/// The Schur-based radius can never exceed the spectral norm.
#[test]
fn spectral_radius_is_bounded_by_norm() {
    let mut cfg = small(ExperimentKind::SpectralRadius, ElementShape::Triangle);
    cfg.formulation = Formulation::Nodal;
    cfg.mapping_degree = Some(2);
    let d = Discretization::new(cfg.discretization(1, 2).unwrap()).unwrap();
    let rho = spectral_radius(&d, 0).unwrap();
    let a = assemble_operator(&d).unwrap();
    let norm = a.clone().svd(false, false).singular_values.max();
    assert!(rho > 0.0 && rho <= norm * (1.0 + 1e-12));
}

#[test]
fn size_guard() {
    let cfg = small(ExperimentKind::SpectralRadius, ElementShape::Tetrahedron);
    let d = Discretization::new(cfg.discretization(3, 6).unwrap()).unwrap();
    assert!(matches!(assemble_operator(&d), Err(Error::TooLarge(_))));
}

#[test]
fn time_step_policy() {
    let cfg = small(ExperimentKind::ResidualTrace, ElementShape::Triangle);
    let d = Discretization::new(cfg.discretization(2, 2).unwrap()).unwrap();
    let expect = 0.1 * 0.5 / (2f64.sqrt() * rho_hat(ElementShape::Triangle, Formulation::Modal, 2));
    assert!((time_step(&cfg, &d) - expect).abs() < 1e-15);
    assert!(rho_hat(ElementShape::Triangle, Formulation::Nodal, 8) > 10.0 * rho_hat(ElementShape::Triangle, Formulation::Modal, 8));
}

/// The warped mesh must not cost an order relative to the affine one.
#[test]
fn curved_mesh_keeps_the_affine_order() {
    let mut orders = Vec::new();
    let mut errors = Vec::new();
    for warp in [0.0, 1.0 / 16.0] {
        let mut cfg = small(ExperimentKind::HSweep, ElementShape::Triangle);
        cfg.degree = 3;
        cfg.warp = warp;
        cfg.sweep_cells = vec![8, 16];
        cfg.dt.courant = 1.0;
        cfg.dt.halving_tolerance = Some(1e-3);
        let rows = run_convergence(&cfg).unwrap();
        orders.push(rows[1].order.unwrap());
        errors.push(rows[1].l2_error);
    }
    assert!(orders.iter().all(|&o| o >= 3.6), "{orders:?}");
    assert!(errors[1] <= 10.0 * errors[0], "{errors:?}");
}

#[test]
fn p2_order_is_near_three() {
    let mut cfg = small(ExperimentKind::HSweep, ElementShape::Triangle);
    cfg.sweep_cells = vec![2, 4, 8, 16];
    cfg.dt.courant = 1.0;
    cfg.dt.halving_tolerance = Some(1e-3);
    let rows = run_convergence(&cfg).unwrap();
    let order = rows.last().unwrap().order.unwrap();
    assert!((2.7..=3.5).contains(&order), "{order}");
}

#[test]
fn p_sweep_error_decreases() {
    let mut cfg = small(ExperimentKind::PSweep, ElementShape::Triangle);
    cfg.sweep_degrees = (2..=8).collect();
    cfg.dt.courant = 1.0;
    cfg.dt.halving_tolerance = Some(1e-3);
    let e: Vec<f64> = run_convergence(&cfg).unwrap().iter().map(|r| r.l2_error).collect();
    assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
    assert!(e[0] >= 10.0 * e[6], "{e:?}");
}

#[test]
fn observed_order_of_exact_rates() {
    assert!((observed_order(1e-2, 1e-2 / 16.0, 4, 8) - 4.0).abs() < 1e-12);
}

#[test]
fn config_file_errors_name_the_field() {
    let dir = tmp_dir("cfg");
    let path = dir.join("bad.json");
    std::fs::write(&path, r#"{"kind": "h-sweep", "shape": "triangle", "sweep_cells": [4]}"#).unwrap();
    let err = ExperimentConfig::load(&path).unwrap_err();
    assert!(matches!(&err, Error::Config(m) if m.contains("sweep_cells") && m.contains("bad.json")), "{err}");
    std::fs::write(&path, "{\"kind\": \"h-sweep\",\n \"shape\": tri}").unwrap();
    let err = ExperimentConfig::load(&path).unwrap_err();
    assert!(matches!(&err, Error::Parse(m) if m.contains("line 2")), "{err}");
    assert!(matches!(ExperimentConfig::load(&dir.join("missing.json")), Err(Error::Io(_))));
    std::fs::remove_dir_all(dir).ok();
}
