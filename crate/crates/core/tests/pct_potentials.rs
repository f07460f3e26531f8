use nfsusy_core::reference::{compare, pct_cases};

#[test]
fn transformed_potentials_match_closed_forms() {
    let cases = pct_cases().unwrap();
    assert_eq!(cases.len(), 12);
    for c in &cases {
        let r = compare(c, 500);
        assert!(r.max_rel < 1e-9, "{r:?}");
    }
}
