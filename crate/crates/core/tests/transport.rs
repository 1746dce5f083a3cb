use brinkmann::chart::coordinate_metric_at;
use brinkmann::spaces::*;
use brinkmann::transport::*;
use brinkmann::{ChartPoint, MetricSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn wide(name: &str) -> MetricSpec {
    let spec = fixture(name).unwrap();
    let mut dom = vec![(-12.0, 12.0)];
    dom.extend(std::iter::repeat_n((-3.0, 3.0), spec.m()));
    spec.with_domain(dom).unwrap()
}

fn null_growth(name: &str) -> (NullSectional, GeodesicInvariants) {
    let spec = wide(name);
    let (q, v) = central_null_start(&spec, -5.0).unwrap();
    let traj = geodesic_integrate(&spec, &q, &v, 10.0, 1000).unwrap();
    let mut x = vec![0.0; spec.n()];
    x[2] = 1.0;
    let ns = null_sectional_growth(&spec, &traj, &x, 1e-12).unwrap();
    (ns, geodesic_invariants(&spec, &traj).unwrap())
}

#[test]
fn null_sectional_curvature_grows_linearly_on_proper_cw() {
    let (ns, inv) = null_growth("cw4_order2");
    assert!(ns.constancy_residual < 1e-6, "{}", ns.constancy_residual);
    // K = 2·P_22(u) = 2u along u ↦ (u, 0, 0)
    for (tau, k) in ns.taus.iter().zip(&ns.k) {
        assert!((k - 2.0 * (tau - 5.0)).abs() < 1e-8, "{tau} {k}");
    }
    assert!(inv.energy_drift < 1e-7 && inv.killing_drift < 1e-7);
}

#[test]
fn null_sectional_curvature_is_constant_on_symmetric_cw() {
    let (ns, inv) = null_growth("cw4_order1");
    assert!(ns.k_variation < 1e-8);
    assert!((ns.k[0] - 2.0).abs() < 1e-12);
    assert!(inv.energy_drift < 1e-7 && inv.killing_drift < 1e-7);
    let (ns, _) = null_growth("flat");
    assert!(ns.k.iter().all(|k| k.abs() < 1e-14));
}

#[test]
fn central_curve_stays_on_the_axis() {
    let spec = wide("cw4_order2");
    let (q, v) = central_null_start(&spec, -5.0).unwrap();
    let traj = geodesic_integrate(&spec, &q, &v, 10.0, 100).unwrap();
    for (tau, p) in traj.taus.iter().zip(&traj.points) {
        assert!((p[0] - (tau - 5.0)).abs() < 1e-12);
        assert!(p[1].abs() < 1e-12 && p[2].abs() < 1e-14 && p[3].abs() < 1e-14);
    }
}

#[test]
fn flat_geodesics_are_lines() {
    let spec = fixture("flat").unwrap();
    let q = vec![0.1, 0.0, 0.2, -0.1];
    let v = vec![0.3, 0.5, -0.2, 0.4];
    let traj = geodesic_integrate(&spec, &q, &v, 1.0, 50).unwrap();
    for (tau, p) in traj.taus.iter().zip(&traj.points) {
        for i in 0..4 {
            assert!((p[i] - q[i] - tau * v[i]).abs() < 1e-13);
        }
    }
}

#[test]
fn random_cw_geodesics_conserve_invariants() {
    let spec = wide("cw4_order2");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let q: Vec<f64> = vec![rng.random_range(-1.0..1.0), 0.0, rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)];
        let v: Vec<f64> = vec![1.0, rng.random_range(-1.0..1.0), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)];
        let traj = geodesic_integrate(&spec, &q, &v, 10.0, 2000).unwrap();
        let inv = geodesic_invariants(&spec, &traj).unwrap();
        assert!(inv.energy_drift < 1e-7 && inv.killing_drift < 1e-7, "{inv:?}");
    }
}

#[test]
fn leaving_the_box_is_an_error() {
    let spec = fixture("cw4_order1").unwrap();
    let q = vec![0.0, 0.0, 0.0, 0.0];
    let v = vec![1.0, 0.0, 0.0, 0.0];
    assert!(matches!(geodesic_integrate(&spec, &q, &v, 5.0, 100), Err(TransportError::LeftBox { .. })));
    assert!(matches!(geodesic_integrate(&spec, &q[..3], &v, 1.0, 10), Err(TransportError::Dimension { .. })));
}

#[test]
fn parallel_transport_is_an_isometry_and_fixes_k() {
    for name in ["cw4_order2", "rotation_w", "random_1"] {
        let spec = fixture(name).unwrap();
        let n = spec.n();
        let c = spec.center();
        let q0 = { let mut q = vec![c.u, 0.0]; q.extend(c.x.clone()); q };
        let curve = QuadraticCurve {
            q0: q0.clone(),
            a: (0..n).map(|i| 0.1 * (i as f64 - 1.5)).collect(),
            b: (0..n).map(|i| 0.05 * (i as f64 % 2.0 - 0.5)).collect(),
        };
        let mut k = vec![0.0; n];
        k[1] = -1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut vs = vec![k.clone()];
        for _ in 0..3 {
            vs.push((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
        }
        let out = parallel_transport(&spec, &curve, &vs, 1.0, 200).unwrap();
        let g0 = coordinate_metric_at(&spec, &ChartPoint::new(q0[0], q0[2..].to_vec())).unwrap();
        for (j, sample) in out.iter().enumerate() {
            let q = curve.position(j as f64 / 200.0);
            let g = coordinate_metric_at(&spec, &ChartPoint::new(q[0], q[2..].to_vec())).unwrap();
            for a in 0..vs.len() {
                for b in 0..vs.len() {
                    assert!((inner(&g, &sample[a], &sample[b]) - inner(&g0, &vs[a], &vs[b])).abs() < 1e-7);
                }
            }
            for i in 0..n {
                assert!((sample[0][i] - k[i]).abs() < 1e-12, "{name}");
            }
        }
    }
}

#[test]
fn d0_transport_rotates_on_the_rotation_spec() {
    let omega = 0.7;
    let spec = fixture("rotation_w").unwrap();
    let p = ChartPoint::new(-0.5, vec![0.1, 0.2]);
    let out = d0_transport(&spec, &p, &[vec![1.0, 0.0]], 1.0, 200).unwrap();
    for (u, v) in out.us.iter().zip(&out.vectors) {
        let x = &v[0];
        assert!(((x[0] * x[0] + x[1] * x[1]) - 1.0).abs() < 1e-9);
        let ang = x[1].atan2(x[0]);
        // t_23 = W_{2,3} = ω
        assert!((ang.abs() - omega * (u + 0.5)).abs() < 1e-9, "{u} {ang}");
    }
    // t = 0: constant components
    let spec = fixture("cw4_order2").unwrap();
    let out = d0_transport(&spec, &ChartPoint::new(-0.5, vec![0.3, 0.1]), &[vec![0.3, -0.7]], 1.0, 20).unwrap();
    assert!(out.vectors.iter().all(|v| (v[0][0] - 0.3).abs() < 1e-15 && (v[0][1] + 0.7).abs() < 1e-15));
}

#[test]
fn d0_transport_preserves_the_leaf_metric() {
    for name in ["random_1", "random_2", "scrambled_cw4_order2"] {
        let spec = fixture(name).unwrap();
        let m = spec.m();
        let c = spec.center();
        let lo = spec.domain()[0].0;
        let span = spec.domain()[0].1 - lo;
        let p = ChartPoint::new(lo + 0.05 * span, c.x.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let vs: Vec<Vec<f64>> = (0..3).map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let out = d0_transport(&spec, &p, &vs, 0.9 * span, 400).unwrap();
        let g0 = spec.leaf_metric_at(&p).unwrap();
        for (u, sample) in out.us.iter().zip(&out.vectors) {
            let g = spec.leaf_metric_at(&ChartPoint::new(*u, c.x.clone())).unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    assert!((inner(&g, &sample[a], &sample[b]) - inner(&g0, &vs[a], &vs[b])).abs() < 1e-8, "{name}");
                }
            }
        }
    }
}

#[test]
fn transported_nabla_r_is_constant_exactly_when_second_symmetric() {
    for (name, want) in [("cw4_order2", true), ("cw4_order1", true), ("cw4_order3", false), ("scrambled_cw4_order2", true)] {
        let spec = fixture(name).unwrap();
        let chk = second_symmetry_transport_check(&spec, 3, 5, 1e-6).unwrap();
        assert_eq!(chk.pass, want, "{name}: {}", chk.max_variation);
    }
}

#[test]
fn lightlike_velocities_are_null() {
    for name in ["rotation_w", "random_2", "cw4_order2_x_sphere"] {
        let spec = fixture(name).unwrap();
        let c = spec.center();
        let q = { let mut q = vec![c.u, 0.4]; q.extend(c.x.clone()); q };
        let xi: Vec<f64> = (0..spec.m()).map(|i| 0.3 - 0.2 * i as f64).collect();
        let v = lightlike_velocity(&spec, &q, &xi).unwrap();
        let g = coordinate_metric_at(&spec, &c).unwrap();
        assert!(inner(&g, &v, &v).abs() < 1e-14, "{name}");
    }
}
