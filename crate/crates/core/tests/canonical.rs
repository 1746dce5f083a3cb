use brinkmann::canonical::*;
use brinkmann::spaces::*;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

fn sorted_eig(a: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn rot(u: f64) -> DMatrix<f64> {
    let (s, c) = (0.3 * u).sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

#[test]
fn scrambled_plane_wave_round_trip() {
    let spec = fixture("scrambled_cw4_order2").unwrap();
    let data = FlatBlockData::whole_leaf(&spec).unwrap();
    data.validate((-1.0, 1.0), 9, 1e-9).unwrap();
    let t0 = std::time::Instant::now();
    let cf = reconstruct(&data, &CanonicalOptions::new((-1.0, 1.0))).unwrap();
    assert!(t0.elapsed().as_secs_f64() < 10.0);
    assert!(cf.orthogonality_error < 1e-8);
    assert!(cf.max_drift < 1e-10);
    assert!(cf.translation_residual < 1e-6);

    let p = cw4_order2_params();
    for (k, u) in cf.us.iter().enumerate() {
        let got = sorted_eig(&(-&cf.a_of_u[k]));
        let want = sorted_eig(&p.p_at(*u));
        for (x, y) in got.iter().zip(&want) {
            assert!((x - y).abs() < 1e-6, "u={u}: {got:?} vs {want:?}");
        }
        // the scramble moved x by R_s(u) and D_s(u) = (u², 0)
        let r_exp = rot(*u).transpose();
        assert!((&cf.r_of_u[k] - &r_exp).abs().max() < 1e-8);
        let d_exp = -(&r_exp * DVector::from_row_slice(&[u * u, 0.0]));
        assert!((&cf.d_of_u[k] - d_exp).abs().max() < 1e-8);
    }

    let rep = verify_canonical(&cf, 1e-8);
    assert!(rep.affine_residual < 1e-8);
    assert!(rep.second_symmetric && rep.proper);
    assert!((rep.normal_form.a1_diag[0] + 1.0).abs() < 1e-8 && rep.normal_form.a1_diag[1].abs() < 1e-8);
}

#[test]
fn canonical_chart_is_left_alone() {
    let spec = fixture("cw4_order2").unwrap();
    let data = FlatBlockData::whole_leaf(&spec).unwrap();
    let mut opts = CanonicalOptions::new((-1.0, 1.0));
    opts.steps_per_unit = 200;
    let cf = reconstruct(&data, &opts).unwrap();
    for (k, u) in cf.us.iter().enumerate() {
        assert!((&cf.r_of_u[k] - DMatrix::identity(2, 2)).abs().max() < 1e-14);
        assert!(cf.d_of_u[k].abs().max() < 1e-14);
        let want = DMatrix::from_diagonal(&DVector::from_row_slice(&[-u, -1.0]));
        assert!((&cf.a_of_u[k] - want).abs().max() < 1e-13);
    }
}

#[test]
fn order_one_is_not_proper_and_order_three_is_not_affine_in_u() {
    for (name, proper, second) in [("cw4_order1", false, true), ("cw4_order3", false, false)] {
        let spec = fixture(name).unwrap();
        let data = FlatBlockData::whole_leaf(&spec).unwrap();
        let mut opts = CanonicalOptions::new((-1.0, 1.0));
        opts.steps_per_unit = 200;
        let rep = verify_canonical(&reconstruct(&data, &opts).unwrap(), 1e-8);
        assert_eq!((rep.proper, rep.second_symmetric), (proper, second), "{name}");
    }
}

#[test]
fn flat_block_of_a_product() {
    let spec = fixture("cw4_order2_x_sphere").unwrap();
    let data = FlatBlockData::new(&spec, &[2, 3]).unwrap();
    data.validate((-1.0, 1.0), 5, 1e-9).unwrap();
    let mut opts = CanonicalOptions::new((-1.0, 1.0));
    opts.steps_per_unit = 200;
    let cf = reconstruct(&data, &opts).unwrap();
    let p = cw4_order2_params();
    for (u, a) in cf.us.iter().zip(&cf.a_of_u) {
        assert!((-a - p.p_at(*u)).abs().max() < 1e-12);
    }
    // the sphere block is not flat
    let curved = FlatBlockData::new(&spec, &[4, 5]).unwrap();
    assert!(matches!(curved.validate((-1.0, 1.0), 5, 1e-9), Err(CanonicalError::NotEuclidean { .. })));
    assert!(matches!(FlatBlockData::new(&spec, &[6]), Err(CanonicalError::BlockIndex(6))));
}

#[test]
fn bad_inputs() {
    let spec = fixture("cw4_order2").unwrap();
    let data = FlatBlockData::whole_leaf(&spec).unwrap();
    assert!(matches!(reconstruct(&data, &CanonicalOptions::new((1.0, -1.0))), Err(CanonicalError::Interval)));
    let mut opts = CanonicalOptions::new((-1.0, 1.0));
    opts.r0 = Some(DMatrix::from_diagonal_element(2, 2, 2.0));
    assert!(matches!(reconstruct(&data, &opts), Err(CanonicalError::NotOrthogonal(_))));
    opts.r0 = Some(DMatrix::identity(3, 3));
    assert!(matches!(reconstruct(&data, &opts), Err(CanonicalError::InitialSize)));
}

#[test]
fn coarse_steps_are_refused_under_fast_rotation() {
    let spec = apply_chart_change(
        &fixture("cw4_order2").unwrap(),
        &ChartChange::rotation(2, 0, 1, 40.0, 0.0, vec![brinkmann::Expr::num(0.0), brinkmann::Expr::num(0.0)]),
    )
    .unwrap();
    let data = FlatBlockData::whole_leaf(&spec).unwrap();
    let mut opts = CanonicalOptions::new((-1.0, 1.0));
    opts.steps_per_unit = 20;
    assert!(matches!(reconstruct(&data, &opts), Err(CanonicalError::StepsTooFew(_))));
}
