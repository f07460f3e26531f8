//! Closed-form PDM potentials for checking the point canonical transformation.

use crate::gauged::Side;
use crate::mass::MassProfile;
use crate::models::{pct_map, ModelError, ModelId, ModelInstance, PdmModelInstance, Sectors};
use crate::rational::Q;
use serde::Serialize;
use std::collections::BTreeMap;

/// One closed-form potential and the transformed system it should equal up to a constant.
pub struct PctCase {
    pub name: &'static str,
    pub system: PdmModelInstance,
    pub side: Side,
    pub window: (f64, f64),
    pub closed_form: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PctComparison {
    pub name: &'static str,
    pub side: &'static str,
    pub points: usize,
    pub offset: f64,
    /// max |U − c − U_closed| / max(1, |U_closed|)
    pub max_rel: f64,
}

fn model(id: ModelId, n: usize, kv: &[(&str, Q)]) -> Result<ModelInstance, ModelError> {
    let p: BTreeMap<String, Q> = kv.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    ModelInstance::new(id, n, &p)
}

fn f(x: &Q) -> f64 {
    crate::rational::to_f64(x)
}

/// Type B rational on m = e^{−bq}, type B trigonometric on the Gaussian and sech² masses.
pub fn pct_cases() -> Result<Vec<PctCase>, ModelError> {
    use crate::rational::{q, qi};
    let mut out = Vec::new();

    let (k, z0, b1, n) = (qi(1), qi(1), q(1, 2), 2usize);
    for b in [1.0, 0.5] {
        let base = model(ModelId::BRational, n, &[("k", k.clone()), ("z0", z0.clone()), ("b1", b1.clone())])?;
        let mass = MassProfile::from_id("expdecay", &[("b".to_string(), b)].into())?;
        let (kf, z0f, b1f, nf) = (f(&k), f(&z0), f(&b1), n as f64);
        let common = move |x: f64| b1f * b1f / (2.0 * b * b) * (-b * x).exp();
        let minus = move |x: f64| {
            common(x)
                + b * b * ((z0f * b1f - nf * kf).powi(2) - kf * kf) / (8.0 * kf * kf) * (b * x).exp()
                + nf * b1f / 2.0
        };
        let plus = move |x: f64| {
            let d = 2.0 * kf * (-b * x).exp() + z0f * b * b;
            common(x) + b * b * (z0f * z0f * b1f * b1f - kf * kf) / (8.0 * kf * kf) * (b * x).exp() + kf * b * b / d
                - 2.0 * kf * z0f * b.powi(4) / (d * d)
        };
        let sys = pct_map(&base, &mass)?;
        out.push(PctCase {
            name: "rational/expdecay",
            system: sys.clone(),
            side: Side::Minus,
            window: (-3.0, 3.0),
            closed_form: Box::new(minus),
        });
        out.push(PctCase {
            name: "rational/expdecay",
            system: sys,
            side: Side::Plus,
            window: (-3.0, 3.0),
            closed_form: Box::new(plus),
        });
    }

    for (a, z0, b1, n) in [(qi(1), qi(2), q(1, 5), 2usize), (q(3, 2), q(5, 2), q(-1, 3), 3)] {
        let base = model(ModelId::BTrig, n, &[("a", a.clone()), ("z0", z0.clone()), ("b1", b1.clone())])?;
        let (af, z0f, b1f, nf) = (f(&a), f(&z0), f(&b1), n as f64);
        let a2 = af * af;
        let mass_part = |x: f64| -(3.0 * x * x + 1.0) * std::f64::consts::PI * (2.0 * x * x).exp() / 4.0;
        let minus = move |x: f64| {
            let t = af * libm::erf(x);
            let (s, c) = t.sin_cos();
            (4.0 * b1f * b1f - nf * nf * a2 * a2) * z0f / (4.0 * a2) * s / (c * c)
                + mass_part(x)
                + b1f * nf / 2.0
                + ((2.0 * b1f - nf * a2).powi(2) * z0f * z0f + (2.0 * b1f + nf * a2).powi(2) - a2 * a2) / (8.0 * a2)
                    * (s / c).powi(2)
        };
        let plus = move |x: f64| {
            let t = af * libm::erf(x);
            let (s, c) = t.sin_cos();
            (2.0 * b1f - nf * a2).powi(2) * z0f / (4.0 * a2) * s / (c * c) + mass_part(x) - b1f * nf / 2.0
                + a2 * z0f / (s + z0f)
                - a2 * (z0f * z0f - 1.0) / (s + z0f).powi(2)
                + ((2.0 * b1f - nf * a2).powi(2) * (z0f * z0f + 1.0) - a2 * a2) / (8.0 * a2) * (s / c).powi(2)
        };
        let sys = pct_map(&base, &MassProfile::gauss2_erf_convention())?;
        let w = (-2.5, 2.5);
        out.push(PctCase {
            name: "trig/gauss2",
            system: sys.clone(),
            side: Side::Minus,
            window: w,
            closed_form: Box::new(minus),
        });
        out.push(PctCase {
            name: "trig/gauss2",
            system: sys,
            side: Side::Plus,
            window: w,
            closed_form: Box::new(plus),
        });

        let mass = MassProfile::from_id("sech2", &[("a".to_string(), af)].into())?;
        let sys = pct_map(&base, &mass)?;
        for side in [Side::Minus, Side::Plus] {
            let sg = if side == Side::Minus { 1.0 } else { -1.0 };
            let u = move |x: f64| {
                let e = (2.0 * af * x).exp();
                let p = 2.0 * b1f * (z0f + 1.0) - nf * a2 * z0f;
                let r = 2.0 * b1f * (z0f - 1.0) - nf * a2 * z0f;
                let mut v = (p + sg * (nf - 2.0) * a2) * (p + sg * (nf + 2.0) * a2) / (32.0 * a2) * e
                    + (r - sg * (nf - 2.0) * a2) * (r - sg * (nf + 2.0) * a2) / (32.0 * a2) / e
                    + sg * nf * b1f / 4.0;
                if side == Side::Plus {
                    let d = z0f - 1.0 + (z0f + 1.0) * e;
                    v += a2 / (z0f + 1.0) * (1.0 - 2.0 * (z0f - 2.0) / d - 4.0 * (z0f - 1.0) / (d * d));
                }
                v
            };
            out.push(PctCase {
                name: "trig/sech2",
                system: sys.clone(),
                side,
                window: (-4.0 / af, 4.0 / af),
                closed_form: Box::new(u),
            });
        }
    }
    Ok(out)
}

/// Fits one additive constant (the median difference) and reports the worst relative deviation.
pub fn compare(case: &PctCase, points: usize) -> PctComparison {
    let (a, b) = case.window;
    let xs: Vec<f64> = (1..=points).map(|i| a + (b - a) * i as f64 / (points + 1) as f64).collect();
    let ours: Vec<f64> = xs.iter().map(|&x| case.system.potential(case.side, x)).collect();
    let theirs: Vec<f64> = xs.iter().map(|&x| (case.closed_form)(x)).collect();
    let mut diffs: Vec<f64> = ours.iter().zip(&theirs).map(|(u, v)| u - v).collect();
    diffs.sort_by(f64::total_cmp);
    let offset = diffs.get(points / 2).copied().unwrap_or(f64::NAN);
    let max_rel = ours
        .iter()
        .zip(&theirs)
        .map(|(u, v)| (u - offset - v).abs() / v.abs().max(1.0))
        .fold(0.0, |m: f64, r| if r.is_nan() || m.is_nan() { f64::NAN } else { m.max(r) });
    PctComparison { name: case.name, side: case.side.as_str(), points, offset, max_rel }
}
