use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use simplex_sbp::mesh::{determinant, generate_mesh, DEFAULT_WARP};
use simplex_sbp::physop::{
    adjugate, compute_all_geometry, metric_degree_ok, metric_identity_residual, physical_mass_dense,
    physical_sbp_matrices, project_jacobian, weight_adjusted_inverse_dense,
};
use simplex_sbp::pkd::ModalBasis;
use simplex_sbp::refelem::{build_operators, ElementShape, OperatorConfig};

#[test]
fn metric_identities_hold_for_admissible_mapping_degree() {
    for (shape, p, pg) in [(ElementShape::Triangle, 2, 3), (ElementShape::Triangle, 4, 3), (ElementShape::Tetrahedron, 2, 2)] {
        assert!(metric_degree_ok(shape, p, pg));
        let mesh = generate_mesh(shape, 2, pg, DEFAULT_WARP).unwrap();
        let ops = build_operators(&OperatorConfig::default_for(shape, p)).unwrap();
        for g in compute_all_geometry(&mesh, &ops).unwrap() {
            assert!(metric_identity_residual(&g, &ops) < 1e-12);
        }
    }
}

#[test]
fn metric_identities_fail_beyond_the_bound() {
    let shape = ElementShape::Tetrahedron;
    assert!(!metric_degree_ok(shape, 2, 3));
    let mesh = generate_mesh(shape, 3, 3, DEFAULT_WARP).unwrap();
    let ops = build_operators(&OperatorConfig::default_for(shape, 2)).unwrap();
    let worst = compute_all_geometry(&mesh, &ops)
        .unwrap()
        .iter()
        .map(|g| metric_identity_residual(g, &ops))
        .fold(0.0, f64::max);
    assert!(worst > 1e-8, "{worst}");
}

#[test]
fn physical_operators_are_sbp_and_exact_on_affine_elements() {
    for (shape, p) in [(ElementShape::Triangle, 3), (ElementShape::Tetrahedron, 2)] {
        let mesh = generate_mesh(shape, 2, 1, 0.0).unwrap();
        let ops = build_operators(&OperatorConfig::default_for(shape, p)).unwrap();
        let geo = compute_all_geometry(&mesh, &ops).unwrap();
        let d = shape.dim();
        for g in geo.iter().take(4) {
            let sbp = physical_sbp_matrices(g, &ops);
            let one = DVector::from_element(ops.num_nodes(), 1.0);
            for m in 0..d {
                let sym = &sbp.q[m] + sbp.q[m].transpose() - &sbp.e[m];
                assert!(sym.amax() < 1e-13);
                assert!(one.dot(&(&sbp.e[m] * &one)).abs() < 1e-13);
                for l in 0..d {
                    // Q^(m) x_l = W J δ_lm
                    let x = DVector::from_iterator(ops.num_nodes(), g.x.iter().map(|x| x[l] * x[l]));
                    let qx = &sbp.q[m] * x;
                    for i in 0..ops.num_nodes() {
                        let exact = if l == m { 2.0 * g.x[i][l] } else { 0.0 } * ops.weights[i] * g.j[i];
                        assert!((qx[i] - exact).abs() < 1e-12, "{shape:?} m={m} l={l}");
                    }
                }
            }
        }
    }
}

#[test]
fn weight_adjusted_inverse_is_exact_for_constant_jacobian() {
    let shape = ElementShape::Triangle;
    let mesh = generate_mesh(shape, 2, 1, 0.0).unwrap();
    let ops = build_operators(&OperatorConfig::default_for(shape, 3)).unwrap();
    let basis = ModalBasis::new(&ops, 3).unwrap();
    let g = &compute_all_geometry(&mesh, &ops).unwrap()[1];
    let jt = project_jacobian(g, &basis, 1).unwrap();
    let woj: Vec<f64> = jt.iter().zip(&ops.weights).map(|(j, w)| w / j).collect();
    let wa = weight_adjusted_inverse_dense(&basis, &woj);
    let exact = physical_mass_dense(&basis, &g.j).try_inverse().unwrap();
    assert!((wa - exact).amax() < 1e-12);
}

#[test]
fn weight_adjusted_inverse_is_spd_on_curved_elements() {
    let shape = ElementShape::Triangle;
    let mesh = generate_mesh(shape, 2, 3, DEFAULT_WARP).unwrap();
    let ops = build_operators(&OperatorConfig::default_for(shape, 4)).unwrap();
    let basis = ModalBasis::new(&ops, 4).unwrap();
    for (k, g) in compute_all_geometry(&mesh, &ops).unwrap().iter().enumerate() {
        let jt = project_jacobian(g, &basis, k).unwrap();
        let woj: Vec<f64> = jt.iter().zip(&ops.weights).map(|(j, w)| w / j).collect();
        let wa = weight_adjusted_inverse_dense(&basis, &woj);
        assert!((&wa - wa.transpose()).amax() < 1e-12);
        assert!(wa.cholesky().is_some());
    }
}

proptest! {
    #[test]
    fn adjugate_identity(v in proptest::collection::vec(-2.0f64..2.0, 9), dim in 2usize..4) {
        let mut a = [[0.0; 3]; 3];
        for r in 0..dim {
            for c in 0..dim {
                a[r][c] = v[3 * r + c];
            }
        }
        let adj = adjugate(dim, &a);
        let det = determinant(dim, &a);
        let am = DMatrix::from_fn(dim, dim, |r, c| a[r][c]);
        let bm = DMatrix::from_fn(dim, dim, |r, c| adj[r][c]);
        let prod = am * bm;
        for r in 0..dim {
            for c in 0..dim {
                let expect = if r == c { det } else { 0.0 };
                prop_assert!((prod[(r, c)] - expect).abs() < 1e-12);
            }
        }
    }
}
