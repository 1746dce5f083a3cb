use brinkmann::curvature::analyze;
use brinkmann::oracle::{compare, oracle_packs};
use brinkmann::sampling::default_samples;
use brinkmann::spaces::{fixture, FIXTURES};

#[test]
fn every_fixture_matches_the_oracle() {
    for name in FIXTURES {
        let spec = fixture(name).unwrap();
        for p in default_samples(spec.domain(), 3, 7) {
            let e = analyze(&spec, &p, 2).unwrap();
            let o = oracle_packs(&spec, &p, 2).unwrap();
            for d in compare(&e, &o) {
                assert!(d.rel < 1e-8, "{name} at {p}: {} deviates by {:e}", d.name, d.rel);
            }
        }
    }
}

#[test]
fn block_count() {
    let spec = fixture("random_1").unwrap();
    let p = spec.center();
    let d = compare(&analyze(&spec, &p, 2).unwrap(), &oracle_packs(&spec, &p, 2).unwrap());
    assert_eq!(d.len(), 8 + 6 + 12);
}

#[test]
fn corrupted_engine_is_flagged() {
    let spec = fixture("cw4_order2").unwrap();
    let p = spec.center();
    let mut e = analyze(&spec, &p, 2).unwrap();
    let o = oracle_packs(&spec, &p, 2).unwrap();
    let atil = &mut e.first.as_mut().unwrap().atil;
    let v = atil.get(&[0, 0]);
    atil.set(&[0, 0], v * 1.01);
    let bad: Vec<_> = compare(&e, &o).into_iter().filter(|d| d.rel > 1e-8).collect();
    assert_eq!(bad.len(), 1);
    assert_eq!(bad[0].name, "Atil");
}
