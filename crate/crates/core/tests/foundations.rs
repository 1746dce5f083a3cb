mod common;

use brinkmann::expr::parse;
use brinkmann::ChartPoint;
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn jets_form_a_commutative_ring(seed in any::<u64>(), nv in 1usize..4, order in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, c) = (random_jet(&mut rng, nv, order), random_jet(&mut rng, nv, order), random_jet(&mut rng, nv, order));
        prop_assert!(ring_axiom_defect(&a, &b, &c) < 1e-13);
    }

    #[test]
    fn printed_expressions_parse_back(seed in any::<u64>(), dim in 3usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_polynomial(&mut rng, dim);
        let back = parse(&e.to_string(), dim).unwrap();
        let vals: Vec<f64> = (0..dim - 1).map(|k| 0.3 - 0.17 * k as f64).collect();
        prop_assert_eq!(e.eval(&vals).unwrap(), back.eval(&vals).unwrap());
        // printing is a fixed point after one round
        let again = parse(&back.to_string(), dim).unwrap();
        prop_assert_eq!(again.to_string(), back.to_string());
    }

    #[test]
    fn jet_partials_match_differences(seed in any::<u64>(), u in -1.0f64..1.0, x in -1.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_polynomial(&mut rng, 4);
        prop_assert!(jet_vs_fd(&e, &ChartPoint::new(u, vec![x, 0.5 * x - 0.2])) < 1e-6);
    }
}

#[test]
fn parse_errors_point_at_the_offending_byte() {
    diagnostics_positioned().unwrap();
}
