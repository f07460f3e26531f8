use nfsusy_core::gauged::{closure_certificate, Side};
use nfsusy_core::mass::MassProfile;
use nfsusy_core::models::*;
use nfsusy_core::probe::Probe;
use nfsusy_core::rational::{q, qi, Q};
use std::collections::BTreeMap;

const D2: [f64; 9] =
    [-1.0 / 560.0, 8.0 / 315.0, -1.0 / 5.0, 8.0 / 5.0, -205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];

fn d2(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (0..9).map(|i| D2[i] * f(x + (i as f64 - 4.0) * h)).sum::<f64>() / (h * h)
}

fn d1(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let c = [1.0 / 280.0, -4.0 / 105.0, 1.0 / 5.0, -4.0 / 5.0, 0.0, 4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    (0..9).map(|i| c[i] * f(x + (i as f64 - 4.0) * h)).sum::<f64>() / h
}

fn params(kv: &[(&str, Q)]) -> BTreeMap<String, Q> {
    kv.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Model, N, parameter overrides, sample points.
type Case = (ModelId, usize, BTreeMap<String, Q>, Vec<f64>);

fn cases() -> Vec<Case> {
    vec![
        (ModelId::BRational, 2, params(&[]), vec![0.4, 0.9, 1.7, 2.6]),
        (ModelId::BRational, 3, params(&[("k", q(3, 2)), ("z0", q(1, 3)), ("b1", q(-2, 5))]), vec![0.5, 1.1, 2.0]),
        (ModelId::BTrig, 2, params(&[]), vec![-1.1, -0.3, 0.4, 1.2]),
        (ModelId::BTrig, 3, params(&[("a", q(3, 2)), ("z0", q(5, 2)), ("b1", q(7, 5))]), vec![-0.8, 0.1, 0.7]),
        (ModelId::BExp, 3, params(&[]), vec![-1.5, -0.2, 0.8, 1.9]),
        (ModelId::BExp, 2, params(&[("z0", q(3, 2)), ("b1", q(1, 3))]), vec![-1.0, 0.5, 1.5]),
        (ModelId::X2Rational, 2, params(&[]), vec![0.5, 1.2, 2.1]),
        (ModelId::X2Rational, 3, params(&[("alpha", q(7, 3))]), vec![0.6, 1.4, 2.5]),
        (ModelId::X2Hyper, 2, params(&[]), vec![-1.4, -0.1, 0.9]),
        (ModelId::X2Hyper, 3, params(&[("alpha", q(5, 2)), ("sign", qi(-1))]), vec![-1.0, 0.3, 1.3]),
        (ModelId::X2Exp, 2, params(&[("alpha", q(5, 4))]), vec![-1.2, 0.0, 1.1]),
        (ModelId::X2Exp, 2, params(&[("alpha", q(5, 4)), ("sign", qi(-1))]), vec![-0.7, 0.4, 1.6]),
        (ModelId::X2Exp, 1, params(&[("alpha", q(9, 8))]), vec![-1.0, 0.2, 1.0]),
    ]
}

/// Checks H ψ_j = Σᵢ M_ij ψᵢ + c ψ_j on sample points for one sector.
fn check_closure(
    m: &ModelInstance,
    side: Side,
    psi: &dyn Fn(&[f64], f64) -> f64,
    hpsi: &dyn Fn(&[f64], f64) -> f64,
    pts: &[f64],
) -> f64 {
    let op = m.gauged_operator(side).expect("rational parameters");
    let space = m.gauged_space(side, None);
    let mat = closure_certificate(&op, &space).unwrap().to_f64();
    let basis: Vec<Vec<f64>> = space.basis.iter().map(|b| b.to_f64_coeffs()).collect();
    let mut c_fit: Option<f64> = None;
    let mut worst = 0.0f64;
    for &x in pts {
        for (j, bj) in basis.iter().enumerate() {
            let lhs = hpsi(bj, x);
            let rhs: f64 = basis.iter().enumerate().map(|(i, bi)| mat[i][j] * psi(bi, x)).sum();
            let pj = psi(bj, x);
            let scale = lhs.abs().max(rhs.abs()).max(pj.abs());
            let c = *c_fit.get_or_insert((lhs - rhs) / pj);
            worst = worst.max((lhs - rhs - c * pj).abs() / scale);
        }
    }
    worst
}

#[test]
fn eigen_closure_at_constant_mass() {
    for (id, n, p, pts) in cases() {
        let m = ModelInstance::new(id, n, &p).unwrap();
        for side in [Side::Minus, Side::Plus] {
            let psi = |c: &[f64], x: f64| {
                let (l, s) = m.ln_with_poly(side, c, Probe::at(x, m.domain0.0, m.domain0.1));
                s * l.exp()
            };
            let hpsi = |c: &[f64], x: f64| -0.5 * d2(&|y| psi(c, y), x, 1e-3) + m.v0(side, x) * psi(c, x);
            let r = check_closure(&m, side, &psi, &hpsi, &pts);
            assert!(r < 1e-6, "{id} N={n} {side:?}: relative residual {r:e}");
        }
    }
}

#[test]
fn eigen_closure_survives_point_canonical_transformation() {
    let masses = ["expdecay", "sech2", "gauss2", "algebraic_pole", "rational_beta"];
    for (id, n, p, _) in cases() {
        let base = ModelInstance::new(id, n, &p).unwrap();
        for mid in masses {
            let mass = MassProfile::from_id(mid, &BTreeMap::new()).unwrap();
            let Ok(pdm) = pct_map(&base, &mass) else { continue };
            let (lo, hi) = pdm.domain;
            let a = if lo.is_finite() { lo } else { -2.0 };
            let b = if hi.is_finite() { hi } else { 2.0 };
            let pts: Vec<f64> = (1..=3).map(|i| a + (b - a) * (0.2 + 0.25 * i as f64)).map(|x| x * 0.9).collect();
            let pts: Vec<f64> = pts.into_iter().filter(|x| pdm.domain.0 < *x && *x < pdm.domain.1).collect();
            for side in [Side::Minus, Side::Plus] {
                let psi = |c: &[f64], x: f64| {
                    let up = pdm.u_probe(Probe::at(x, lo, hi));
                    let (l, s) = base.ln_with_poly(side, c, up);
                    s * (l + 0.25 * mass.ln_m(x)).exp()
                };
                // H = −½ (ψ′/m)′ + U ψ
                let hpsi = |c: &[f64], x: f64| {
                    let flux = |y: f64| d1(&|t| psi(c, t), y, 1e-3) / mass.m(y);
                    -0.5 * d1(&flux, x, 1e-3) + pdm.u_potential(side, x) * psi(c, x)
                };
                let r = check_closure(&base, side, &psi, &hpsi, &pts);
                assert!(r < 1e-6, "{id} N={n} mass {mid} {side:?}: relative residual {r:e}");
            }
        }
    }
}

#[test]
fn potentials_are_finite_on_interior_grid() {
    for (id, n, p, _) in cases() {
        let m = ModelInstance::new(id, n, &p).unwrap();
        let (lo, hi) = m.domain0;
        let (a, b) = (if lo.is_finite() { lo } else { -8.0 }, if hi.is_finite() { hi } else { 8.0 });
        for i in 1..1000 {
            let x = a + (b - a) * i as f64 / 1000.0;
            for side in [Side::Minus, Side::Plus] {
                assert!(m.v0(side, x).is_finite(), "{id} {side:?} at {x}");
            }
        }
    }
}

#[test]
fn constant_mass_pullback_is_identity() {
    for (id, n, p, pts) in cases() {
        let base = ModelInstance::new(id, n, &p).unwrap();
        let pdm = pct_map(&base, &MassProfile::constant()).unwrap();
        assert_eq!(pdm.domain, base.domain0);
        for &x in &pts {
            for side in [Side::Minus, Side::Plus] {
                assert_eq!(pdm.u_potential(side, x), base.v0(side, x));
            }
        }
    }
}

#[test]
fn x1_laguerre_reduction() {
    // k = 1/2, b1 = b²/2, z0 = α/b² with b = 1, α = 3.
    let (b, al) = (1.0f64, 3.0f64);
    let base =
        ModelInstance::new(ModelId::BRational, 2, &params(&[("k", q(1, 2)), ("b1", q(1, 2)), ("z0", qi(3))])).unwrap();
    let pdm = pct_map(&base, &MassProfile::from_id("expdecay", &BTreeMap::new()).unwrap()).unwrap();
    let oracle = |x: f64| {
        let e = (-b * x).exp();
        b * b / 8.0 * (e + (al * al - 1.0) / e) + b * b / 2.0 / (e + al) - al * b * b / (e + al).powi(2)
    };
    let c = pdm.u_potential(Side::Plus, 0.0) - oracle(0.0);
    for i in 0..200 {
        let x = -6.0 + 12.0 * i as f64 / 199.0;
        let d = pdm.u_potential(Side::Plus, x) - oracle(x) - c;
        assert!(d.abs() < 1e-9 * oracle(x).abs().max(1.0), "x={x} diff={d:e}");
    }
}

#[test]
fn half_line_models_reflect_or_cut() {
    let base = ModelInstance::new(ModelId::X2Rational, 2, &BTreeMap::new()).unwrap();
    let e = pct_map(&base, &MassProfile::from_id("expdecay", &BTreeMap::new()).unwrap()).unwrap();
    assert!(e.reflected);
    assert_eq!(e.domain, (f64::NEG_INFINITY, f64::INFINITY));
    let g = pct_map(&base, &MassProfile::from_id("gauss2", &BTreeMap::new()).unwrap()).unwrap();
    assert_eq!(g.domain, (0.0, f64::INFINITY));
    assert!((g.u_domain.1 - 0.5f64.sqrt()).abs() < 1e-15);
    assert_eq!(g.u_end_kinds(), [EndKind::Singular, EndKind::Regular]);
}

#[test]
fn first_pdm_sector_function_of_b_rational() {
    // ∝ exp[−(z0 b1/k − N + 1)(b/2)q + (b1/b²)e^{−bq}] for m = e^{−bq}.
    let base = ModelInstance::new(ModelId::BRational, 2, &BTreeMap::new()).unwrap();
    let pdm = pct_map(&base, &MassProfile::from_id("expdecay", &BTreeMap::new()).unwrap()).unwrap();
    let f = sector_functions(&pdm, Side::Minus, 1).unwrap();
    let (k, z0, b1, n, b) = (1.0, 1.0, 0.5, 2.0, 1.0);
    let want = |x: f64| (-(z0 * b1 / k - n + 1.0) * b / 2.0 * x + b1 / (b * b) * (-b * x).exp()).exp();
    let r0 = f[0].eval(0.0) / want(0.0);
    for x in [-3.0, -1.0, 0.5, 2.0, 5.0] {
        assert!((f[0].eval(x) / want(x) / r0 - 1.0).abs() < 1e-12, "x={x}");
    }
}
