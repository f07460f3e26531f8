use nfsusy_core::gauged::Side;
use nfsusy_core::mass::MassProfile;
use nfsusy_core::models::*;
use nfsusy_core::normalizability::*;
use nfsusy_core::rational::{q, qi, Q};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn params(kv: &[(&str, Q)]) -> BTreeMap<String, Q> {
    kv.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn classify(id: ModelId, n: usize, p: &BTreeMap<String, Q>, opts: ClassifyOptions) -> BreakingReport {
    classify_model(&ModelInstance::new(id, n, p).unwrap(), opts)
}

/// 200 grid values lo + (hi − lo) i/199 as exact rationals.
fn grid(lo: i64, hi: i64) -> Vec<(f64, Q)> {
    (0..200).map(|i| q(lo * 199 + (hi - lo) * i, 199)).map(|b| (nfsusy_core::rational::to_f64(&b), b)).collect()
}

/// Every grid point farther than one step from a threshold must match `want`,
/// and the verdict must change exactly `thresholds.len()` times.
fn check_sweep(pts: &[(f64, Classification)], want: impl Fn(f64) -> Classification, thresholds: &[f64]) {
    let step = pts[1].0 - pts[0].0;
    for &(b, got) in pts {
        if thresholds.iter().all(|t| (b - t).abs() > step) {
            assert_eq!(got, want(b), "b1 = {b}");
        }
    }
    let flips: Vec<f64> = pts.windows(2).filter(|w| w[0].1 != w[1].1).map(|w| 0.5 * (w[0].0 + w[1].0)).collect();
    assert_eq!(flips.len(), thresholds.len(), "flips at {flips:?}");
    for (f, t) in flips.iter().zip(thresholds) {
        assert!((f - t).abs() <= step, "flip at {f}, threshold {t}");
    }
}

#[test]
fn rational_type_b_flips_at_zero_and_k_over_z0() {
    let (k, z0) = (q(3, 2), q(3, 4));
    let pts: Vec<(f64, Classification)> = grid(-1, 3)
        .into_iter()
        .map(|(bf, b)| {
            let r = classify(
                ModelId::BRational,
                2,
                &params(&[("k", k.clone()), ("z0", z0.clone()), ("b1", b)]),
                ClassifyOptions::fast(),
            );
            (bf, r.classification.expect("decisive"))
        })
        .collect();
    let want = |b: f64| if 0.0 < b && b < 2.0 { Classification::Unbroken } else { Classification::Broken };
    check_sweep(&pts, want, &[0.0, 2.0]);
}

#[test]
fn boundary_values_are_not_normalizable() {
    // At b1 = k/z0 the plus sector tail is exactly marginal.
    let r = classify(ModelId::BRational, 2, &params(&[("b1", qi(1))]), ClassifyOptions::default());
    assert_eq!(r.classification, Some(Classification::Broken));
    let marginal = r.verdicts.plus.per_function[0].ends.iter().any(|e| e.exponent == EndSignal::Marginal);
    assert!(marginal);
    // At b1 = 0 the Gaussian factor vanishes: neither full sector is L², but
    // the one-dimensional invariant subspace spanned by z⁻¹ · gauge decays
    // like q^(−3/2) and is.
    let r = classify(ModelId::BRational, 2, &params(&[("b1", qi(0))]), ClassifyOptions::default());
    assert!(!r.verdicts.minus.sector_in_l2 && !r.verdicts.plus.sector_in_l2);
    assert_eq!(r.verdicts.plus.max_normalizable_prefix, 1);
    assert_eq!(r.classification, Some(Classification::PartiallyBroken(1)));
}

#[test]
fn exponential_plus_prefix_window() {
    // ⟨z⁻¹⟩ · gauge is invariant and L² iff −N − 1 < 2 b1 < −N.
    for n in 1..=4usize {
        let nf = n as f64;
        for (b, inside) in [(-(nf + 0.5) / 2.0, true), (-(nf + 1.2) / 2.0, false), (-(nf - 0.2) / 2.0, false)] {
            let b1 = q((b * 1000.0).round() as i64, 1000);
            let r = classify(ModelId::BExp, n, &params(&[("b1", b1)]), ClassifyOptions::default());
            assert_eq!(r.verdicts.plus.max_normalizable_prefix == 1, inside, "N={n} b1={b}");
            assert!(!r.verdicts.plus.sector_in_l2);
        }
    }
}

#[test]
fn trigonometric_thresholds_for_one_fold() {
    // N = 1, a = 1, z0 = 2: unbroken iff 1/6 < b1 < 3/2.
    let pts: Vec<(f64, Classification)> = grid(-1, 3)
        .into_iter()
        .map(|(bf, b)| {
            let r = classify(ModelId::BTrig, 1, &params(&[("b1", b)]), ClassifyOptions::fast());
            (bf, r.classification.expect("decisive"))
        })
        .collect();
    let want = |b: f64| if 1.0 / 6.0 < b && b < 1.5 { Classification::Unbroken } else { Classification::Broken };
    check_sweep(&pts, want, &[1.0 / 6.0, 1.5]);
}

#[test]
fn trigonometric_window_for_higher_fold() {
    // Plus sector L² iff −1/(z0+1) < b1/a² − N/2 < 1/(z0−1); minus never.
    let (n, z0) = (2usize, 2.0);
    let (lo, hi) = (n as f64 / 2.0 - 1.0 / (z0 + 1.0), n as f64 / 2.0 + 1.0 / (z0 - 1.0));
    let pts: Vec<(f64, Classification)> = grid(-1, 3)
        .into_iter()
        .map(|(bf, b)| {
            let r = classify(ModelId::BTrig, n, &params(&[("b1", b)]), ClassifyOptions::fast());
            assert!(!r.verdicts.minus.sector_in_l2);
            (bf, r.classification.expect("decisive"))
        })
        .collect();
    check_sweep(&pts, |b| if lo < b && b < hi { Classification::Unbroken } else { Classification::Broken }, &[lo, hi]);
}

#[test]
fn exponential_partial_breaking_ladder() {
    let n = 4usize;
    let nf = n as f64;
    let step = 6.0 / 199.0;
    let mut thresholds: Vec<f64> = (1..=n).map(|k| (nf + 1.0 - 2.0 * k as f64) / 2.0).collect();
    thresholds.extend([-nf / 2.0, -(nf + 1.0) / 2.0]);
    for (bf, b) in grid(-3, 3) {
        if thresholds.iter().any(|t| (bf - t).abs() < step) {
            continue;
        }
        let r = classify(ModelId::BExp, n, &params(&[("b1", b)]), ClassifyOptions::fast());
        let want = (1..=n).rev().find(|&k| -nf / 2.0 < bf && bf < (nf + 1.0 - 2.0 * k as f64) / 2.0).unwrap_or(0);
        assert_eq!(r.verdicts.minus.max_normalizable_prefix, want, "b1 = {bf}");
        let plus_window = -(nf + 1.0) / 2.0 < bf && bf < -nf / 2.0;
        let expect = match (want, plus_window) {
            (0, false) => Classification::Broken,
            (0, true) => Classification::PartiallyBroken(1),
            (k, _) => Classification::PartiallyBroken(k),
        };
        assert_eq!(r.classification, Some(expect), "b1 = {bf}");
    }
}

#[test]
fn examples_from_the_catalog() {
    let plus = classify(ModelId::BRational, 2, &params(&[]), ClassifyOptions::default());
    assert!(plus.verdicts.plus.sector_in_l2);
    let ex = classify(ModelId::BExp, 3, &params(&[("b1", q(-1, 2))]), ClassifyOptions::default());
    assert!(ex.verdicts.minus.per_function[0].is_l2 == Some(true));
    assert_eq!(ex.verdicts.minus.per_function[0].method, Some(Method::Both));
    let b1 = q(1, 3) - q(1, 10);
    let trig = classify(ModelId::BTrig, 2, &params(&[("b1", b1.clone())]), ClassifyOptions::default());
    assert_eq!(trig.classification, Some(Classification::Broken));
    let base = ModelInstance::new(ModelId::BTrig, 2, &params(&[("b1", b1)])).unwrap();
    let g = pct_map(&base, &MassProfile::from_id("gauss2", &BTreeMap::new()).unwrap()).unwrap();
    let r = classify_model(&g, ClassifyOptions::default());
    assert!(r.verdicts.minus.sector_in_l2 && r.verdicts.plus.sector_in_l2);
    for (sign, want) in [(1, Classification::Unbroken), (-1, Classification::Broken)] {
        let r = classify(ModelId::X2Exp, 2, &params(&[("sign", qi(sign))]), ClassifyOptions::default());
        assert_eq!(r.classification, Some(want));
    }
}

#[test]
fn gauge_factor_dominates_on_gaussian_mass() {
    for row in table1_defaults().iter().filter(|r| r.model.is_type_b()) {
        let base = row.model().unwrap();
        let mass = MassProfile::from_id("gauss2", &BTreeMap::new()).unwrap();
        for t in [base.n + 2, base.n + 4, base.n + 7] {
            let sys = pct_map(&base.with_truncation(t), &mass).unwrap();
            for side in [Side::Minus, Side::Plus] {
                let v = classify_sector(&sys, side, ClassifyOptions::default());
                let first = v.per_function[0].is_l2;
                assert!(first.is_some());
                assert!(v.per_function.iter().all(|f| f.is_l2 == first), "{} T={t} {side:?}", row.model);
            }
        }
    }
}

#[test]
fn table_grid_is_classified_without_disagreement() {
    let reports = table1(&table1_defaults(), 4, ClassifyOptions::default()).unwrap();
    assert_eq!(reports.len(), 26);
    for r in &reports {
        assert_eq!(r.status, Status::Classified, "{} {}", r.model, r.mass);
        for v in r.verdicts.minus.per_function.iter().chain(&r.verdicts.plus.per_function) {
            assert!(!v.disagreement, "{} {} #{}", r.model, r.mass, v.index);
        }
        if let Some(t) = &r.truncation_check {
            assert!(t.stable, "{} {}", r.model, r.mass);
        }
    }
}

fn rational(lo: f64, hi: f64) -> impl Strategy<Value = Q> {
    ((lo * 1000.0) as i64..(hi * 1000.0) as i64).prop_map(|n| q(n, 1000))
}

fn draw(model: ModelId) -> BoxedStrategy<(usize, BTreeMap<String, Q>)> {
    let n = 1usize..=3;
    match model {
        ModelId::BRational => (n, rational(0.2, 3.0), rational(0.2, 3.0), rational(-2.0, 3.0))
            .prop_map(|(n, k, z0, b1)| (n, params(&[("k", k), ("z0", z0), ("b1", b1)])))
            .boxed(),
        ModelId::BTrig => (n, rational(0.3, 2.0), rational(1.2, 4.0), rational(-1.0, 3.0))
            .prop_map(|(n, a, z0, b1)| (n, params(&[("a", a), ("z0", z0), ("b1", b1)])))
            .boxed(),
        ModelId::BExp => (n, rational(0.2, 3.0), rational(-3.0, 3.0))
            .prop_map(|(n, z0, b1)| (n, params(&[("z0", z0), ("b1", b1)])))
            .boxed(),
        _ => (n, rational(1.1, 4.0), prop::bool::ANY)
            .prop_map(move |(n, al, s)| {
                let mut p = params(&[("alpha", al)]);
                if model != ModelId::X2Rational {
                    p.insert("sign".into(), qi(if s { 1 } else { -1 }));
                }
                (n, p)
            })
            .boxed(),
    }
}

fn no_disagreement(model: ModelId, n: usize, p: &BTreeMap<String, Q>, masses: &[String]) -> Result<(), TestCaseError> {
    let base = ModelInstance::new(model, n, p).unwrap();
    for m in masses {
        let sys: Box<dyn Sectors> = if m == "const" {
            Box::new(base.clone())
        } else {
            match pct_map(&base, &MassProfile::from_id(m, &BTreeMap::new()).unwrap()) {
                Ok(s) => Box::new(s),
                Err(_) => continue,
            }
        };
        let opts = ClassifyOptions { quadrature: true, truncation_check: false };
        let r = classify_model(&*sys, opts);
        for v in r.verdicts.minus.per_function.iter().chain(&r.verdicts.plus.per_function) {
            prop_assert!(!v.disagreement, "{model} N={n} {p:?} mass {m} #{}: {:?}", v.index, v.ends);
        }
    }
    Ok(())
}

fn agree_on(model: ModelId) -> impl Strategy<Value = (usize, BTreeMap<String, Q>)> {
    draw(model)
}

fn masses_of(model: ModelId) -> Vec<String> {
    table1_defaults().into_iter().find(|r| r.model == model).unwrap().masses
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 50, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn methods_agree_b_rational((n, p) in agree_on(ModelId::BRational)) {
        no_disagreement(ModelId::BRational, n, &p, &masses_of(ModelId::BRational))?;
    }

    #[test]
    fn methods_agree_b_trig((n, p) in agree_on(ModelId::BTrig)) {
        no_disagreement(ModelId::BTrig, n, &p, &masses_of(ModelId::BTrig))?;
    }

    #[test]
    fn methods_agree_b_exp((n, p) in agree_on(ModelId::BExp)) {
        no_disagreement(ModelId::BExp, n, &p, &masses_of(ModelId::BExp))?;
    }

    #[test]
    fn methods_agree_x2_rational((n, p) in agree_on(ModelId::X2Rational)) {
        no_disagreement(ModelId::X2Rational, n, &p, &masses_of(ModelId::X2Rational))?;
    }

    #[test]
    fn methods_agree_x2_hyper((n, p) in agree_on(ModelId::X2Hyper)) {
        no_disagreement(ModelId::X2Hyper, n, &p, &masses_of(ModelId::X2Hyper))?;
    }

    #[test]
    fn methods_agree_x2_exp((n, p) in agree_on(ModelId::X2Exp)) {
        no_disagreement(ModelId::X2Exp, n, &p, &masses_of(ModelId::X2Exp))?;
    }
}
