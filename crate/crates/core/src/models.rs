//! The six worked model pairs on a constant-mass background and their
//! position-dependent-mass pullbacks.
//!
//! Sector functions are evaluated in log space, ln|ψ| and sign, so that
//! endpoint behaviour can be probed far beyond the range of `f64` values.

use crate::gauged::{chibar_poly, f_poly, phi_poly, GaugedOperator, PolySubspace, Side, TypeBParams, X2Params};
use crate::mass::{ln_cosh, MassError, MassProfile};
use crate::poly::RationalPoly;
use crate::probe::Probe;
use crate::rational::{fmt_q, q, qi, sqrt_exact, to_f64, Q};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, LN_2};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    #[serde(rename = "B.rational")]
    BRational,
    #[serde(rename = "B.trig")]
    BTrig,
    #[serde(rename = "B.exp")]
    BExp,
    #[serde(rename = "X2.rational")]
    X2Rational,
    #[serde(rename = "X2.hyper")]
    X2Hyper,
    #[serde(rename = "X2.exp")]
    X2Exp,
}

impl ModelId {
    pub const ALL: [ModelId; 6] =
        [Self::BRational, Self::BTrig, Self::BExp, Self::X2Rational, Self::X2Hyper, Self::X2Exp];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::BRational => "B.rational",
            Self::BTrig => "B.trig",
            Self::BExp => "B.exp",
            Self::X2Rational => "X2.rational",
            Self::X2Hyper => "X2.hyper",
            Self::X2Exp => "X2.exp",
        }
    }

    pub fn is_type_b(self) -> bool {
        matches!(self, Self::BRational | Self::BTrig | Self::BExp)
    }

    /// Models depending on q only through q², defined on the half-line.
    pub fn is_even(self) -> bool {
        matches!(self, Self::BRational | Self::X2Rational)
    }

    /// Parameter names with their defaults.
    pub fn param_defaults(self) -> Vec<(&'static str, Q)> {
        match self {
            Self::BRational => vec![("k", qi(1)), ("z0", qi(1)), ("b1", q(1, 2))],
            Self::BTrig => vec![("a", qi(1)), ("z0", qi(2)), ("b1", q(1, 5))],
            Self::BExp => vec![("z0", qi(1)), ("b1", q(-1, 2))],
            Self::X2Rational => vec![("alpha", qi(2)), ("c0", qi(0))],
            Self::X2Hyper | Self::X2Exp => vec![("alpha", qi(2)), ("sign", qi(1)), ("c0", qi(0))],
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownModel(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown model `{0}` (expected B.rational|B.trig|B.exp|X2.rational|X2.hyper|X2.exp)")]
    UnknownModel(String),
    #[error("model {model} has no parameter `{key}`")]
    UnknownParam { model: ModelId, key: String },
    #[error("parameter constraint violated: {0}")]
    Constraint(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("requested {requested} sector functions but only {available} are available")]
    Range { requested: usize, available: usize },
    #[error(transparent)]
    Mass(#[from] MassError),
}

/// A value of the gauged variable z that may exceed the `f64` range.
#[derive(Clone, Copy, Debug)]
pub struct ZVal {
    /// z itself (may be ±∞ when only the log form is meaningful).
    pub val: f64,
    pub ln_abs: f64,
    pub sign: f64,
}

impl ZVal {
    pub fn of(v: f64) -> Self {
        Self { val: v, ln_abs: v.abs().ln(), sign: if v < 0.0 { -1.0 } else { 1.0 } }
    }

    fn huge(ln_abs: f64, sign: f64) -> Self {
        Self { val: sign * ln_abs.exp(), ln_abs, sign }
    }
}

/// ln|p(z)| and sign for a polynomial with `f64` coefficients (ascending).
pub fn ln_poly(coeffs: &[f64], z: ZVal) -> (f64, f64) {
    let d = match coeffs.iter().rposition(|c| *c != 0.0) {
        Some(d) => d,
        None => return (f64::NEG_INFINITY, 1.0),
    };
    if z.ln_abs <= 1.0 {
        let v = coeffs[..=d].iter().rev().fold(0.0, |acc, c| acc * z.val + c);
        return (v.abs().ln(), v.signum());
    }
    // p(z) = z^d · Σ c_j w^{d−j} with w = 1/z.
    let w = if z.ln_abs > 700.0 { 0.0 } else { 1.0 / z.val };
    let s = coeffs[..=d].iter().fold(0.0, |acc, c| acc * w + c);
    let sign = s.signum() * if d % 2 == 1 { z.sign } else { 1.0 };
    (d as f64 * z.ln_abs + s.abs().ln(), sign)
}

#[derive(Clone, Debug)]
struct Derived {
    n: f64,
    k: f64,
    z0: f64,
    b1: f64,
    a: f64,
    alpha: f64,
    zeta: f64,
}

/// Kind of a domain endpoint of the constant-mass system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EndKind {
    Infinite,
    /// Finite end where the potential is singular.
    Singular,
    /// Finite end introduced by a PDM pullback; the potential is regular there.
    Regular,
}

/// Ordered basis of a solvable sector.
#[derive(Clone, Debug, Serialize)]
pub struct SectorBasis {
    pub side: Side,
    /// Polynomial parts in z, ascending degree.
    pub polys: Vec<String>,
    /// Number of materialized entries of an infinite flag, if the sector is one.
    pub truncation: Option<usize>,
    /// Leading power of |ψ| in the distance to each finite end, or the
    /// logarithmic slope d ln|ψ|/d ln|x| at infinite ends (±∞ for faster laws).
    pub endpoint_exponents: Vec<[f64; 2]>,
}

/// A fully parameterized constant-mass model pair.
#[derive(Clone, Debug)]
pub struct ModelInstance {
    pub id: ModelId,
    pub n: usize,
    pub params: BTreeMap<String, Q>,
    pub domain0: (f64, f64),
    pub truncation: usize,
    d: Derived,
    minus: Vec<RationalPoly>,
    plus: Vec<RationalPoly>,
    minus_f: Vec<Vec<f64>>,
    plus_f: Vec<Vec<f64>>,
    f_alpha: Vec<f64>,
    f_alpha_n: Vec<f64>,
}

fn check(ok: bool, msg: &str) -> Result<(), ModelError> {
    if ok {
        Ok(())
    } else {
        Err(ModelError::Constraint(msg.to_string()))
    }
}

/// Builds a model; missing parameters take their defaults.
pub fn build_model(id: ModelId, n: usize, params: &BTreeMap<String, Q>) -> Result<ModelInstance, ModelError> {
    ModelInstance::new(id, n, params)
}

impl ModelInstance {
    pub fn new(id: ModelId, n: usize, given: &BTreeMap<String, Q>) -> Result<Self, ModelError> {
        check(n >= 1, "N ≥ 1")?;
        let defaults = id.param_defaults();
        let mut params: BTreeMap<String, Q> = defaults.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        let mut zeta_given = None;
        for (k, v) in given {
            if k == "zeta" && matches!(id, ModelId::X2Hyper | ModelId::X2Exp) {
                zeta_given = Some(v.clone());
            } else if params.contains_key(k) {
                params.insert(k.clone(), v.clone());
            } else {
                return Err(ModelError::UnknownParam { model: id, key: k.clone() });
            }
        }
        let g = |k: &str| params.get(k).cloned().unwrap_or_else(Q::zero);
        let nq = qi(n as i64);
        let mut d = Derived { n: n as f64, k: 0.0, z0: 0.0, b1: 0.0, a: 0.0, alpha: 0.0, zeta: 0.0 };
        match id {
            ModelId::BRational => {
                check(g("k").is_positive(), "k > 0")?;
                check(g("z0").is_positive(), "z0 > 0")?;
            }
            ModelId::BTrig => {
                check(g("a").is_positive(), "a > 0")?;
                check(g("z0") > qi(1), "z0 > 1")?;
            }
            ModelId::BExp => check(g("z0").is_positive(), "z0 > 0")?,
            _ => {
                check(g("alpha") > qi(1), "alpha > 1")?;
            }
        }
        if matches!(id, ModelId::X2Hyper | ModelId::X2Exp) {
            let al = params["alpha"].clone();
            let z2 = (&al - qi(1)) * (&al + &nq - qi(1));
            if let Some(z) = zeta_given {
                check(!z.is_zero(), "zeta ≠ 0")?;
                let ok = match sqrt_exact(&z2) {
                    Some(r) => r == z.abs(),
                    None => {
                        let zf = to_f64(&z);
                        (zf * zf - to_f64(&z2)).abs() <= 1e-12 * to_f64(&z2)
                    }
                };
                check(ok, "zeta² = (alpha − 1)(alpha + N − 1)")?;
                params.insert("sign".into(), if z.is_negative() { qi(-1) } else { qi(1) });
            }
            let s = params["sign"].clone();
            check(s == qi(1) || s == qi(-1), "sign ∈ {+1, −1}")?;
            d.zeta = to_f64(&s) * to_f64(&z2).sqrt();
        }
        let g = |k: &str| params.get(k).cloned().unwrap_or_else(Q::zero);
        let f = |k: &str| to_f64(&g(k));
        d.k = f("k");
        d.z0 = f("z0");
        d.b1 = f("b1");
        d.a = f("a");
        d.alpha = f("alpha");
        let inf = f64::INFINITY;
        let domain0 = match id {
            ModelId::BRational | ModelId::X2Rational => (0.0, inf),
            ModelId::BTrig => (-FRAC_PI_2 / d.a, FRAC_PI_2 / d.a),
            _ => (-inf, inf),
        };
        let mut m = Self {
            id,
            n,
            params,
            domain0,
            truncation: n + 2,
            d,
            minus: vec![],
            plus: vec![],
            minus_f: vec![],
            plus_f: vec![],
            f_alpha: vec![],
            f_alpha_n: vec![],
        };
        if !id.is_type_b() {
            let al = m.alpha_q();
            let an = &al + &nq;
            m.f_alpha = f_poly(&al).to_f64_coeffs();
            m.f_alpha_n = f_poly(&an).to_f64_coeffs();
        }
        m.materialize();
        Ok(m)
    }

    fn materialize(&mut self) {
        let t = self.truncation;
        if self.id.is_type_b() {
            self.minus = PolySubspace::type_a(t, self.n).basis;
            self.plus = PolySubspace::type_b_plus(t, self.n).basis;
        } else {
            let al = self.alpha_q();
            let an = &al + qi(self.n as i64);
            self.minus = (1..=self.n).map(|k| phi_poly(k, &al)).collect();
            self.plus = (1..=self.n).map(|k| chibar_poly(k, &an)).collect();
        }
        self.minus_f = self.minus.iter().map(|p| p.to_f64_coeffs()).collect();
        self.plus_f = self.plus.iter().map(|p| p.to_f64_coeffs()).collect();
    }

    /// Same model with `t` materialized entries of each infinite flag.
    pub fn with_truncation(&self, t: usize) -> Self {
        let mut m = self.clone();
        m.truncation = t.max(1);
        m.materialize();
        m
    }

    pub fn param(&self, k: &str) -> Option<&Q> {
        self.params.get(k)
    }

    fn alpha_q(&self) -> Q {
        self.params.get("alpha").cloned().unwrap_or_else(|| qi(2))
    }

    /// Human-readable parameter map, exact values as text.
    pub fn params_text(&self) -> BTreeMap<String, String> {
        let mut m: BTreeMap<String, String> = self.params.iter().map(|(k, v)| (k.clone(), fmt_q(v))).collect();
        if matches!(self.id, ModelId::X2Hyper | ModelId::X2Exp) {
            m.insert("zeta".into(), format!("{}", self.d.zeta));
        }
        m
    }

    pub fn zeta(&self) -> f64 {
        self.d.zeta
    }

    /// Whether every prefix of each sector is itself invariant (a flag).
    pub fn has_flags(&self) -> bool {
        self.id.is_type_b() || self.id == ModelId::X2Rational
    }

    /// Number of materialized sector entries.
    pub fn sector_len(&self, _side: Side) -> usize {
        if self.id.is_type_b() {
            self.truncation
        } else {
            self.n
        }
    }

    pub fn sector_polys(&self, side: Side) -> &[RationalPoly] {
        match side {
            Side::Minus => &self.minus,
            Side::Plus => &self.plus,
        }
    }

    pub fn end_kinds(&self) -> [EndKind; 2] {
        let k = |x: f64| if x.is_finite() { EndKind::Singular } else { EndKind::Infinite };
        [k(self.domain0.0), k(self.domain0.1)]
    }

    /// The gauged variable z at a point of the constant-mass domain.
    pub fn z_at(&self, p: Probe) -> ZVal {
        let d = &self.d;
        let u = p.x;
        match self.id {
            ModelId::BRational => {
                let t = p.from_lo;
                if t < 1e100 {
                    ZVal::of(d.k * t * t / 2.0 + d.z0)
                } else {
                    ZVal::huge((d.k / 2.0).ln() + 2.0 * t.ln(), 1.0)
                }
            }
            ModelId::BTrig => ZVal::of((d.a * u).sin() + d.z0),
            ModelId::BExp => {
                if u < 700.0 {
                    ZVal::of(u.exp() + d.z0)
                } else {
                    ZVal::huge(u + (d.z0 * (-u).exp()).ln_1p(), 1.0)
                }
            }
            ModelId::X2Rational => {
                let t = p.from_lo;
                if t < 1e150 {
                    ZVal::of(t * t)
                } else {
                    ZVal::huge(2.0 * t.ln(), 1.0)
                }
            }
            ModelId::X2Hyper => {
                if u.abs() < 700.0 {
                    ZVal::of(d.zeta * u.sinh())
                } else {
                    ZVal::huge(d.zeta.abs().ln() + u.abs() - LN_2, (d.zeta * u).signum())
                }
            }
            ModelId::X2Exp => {
                if u < 700.0 {
                    ZVal::of(u.exp() - d.zeta)
                } else {
                    ZVal::huge(u + (-d.zeta * (-u).exp()).ln_1p(), 1.0)
                }
            }
        }
    }

    pub fn z_of_u(&self, u: f64) -> f64 {
        self.z_at(Probe::at(u, self.domain0.0, self.domain0.1)).val
    }

    /// ln of the common sector factor (gauge factor and prefactors) at a point.
    pub fn ln_gauge(&self, side: Side, p: Probe) -> f64 {
        let d = &self.d;
        let n = d.n;
        let u = p.x;
        let minus = side == Side::Minus;
        match self.id {
            ModelId::BRational => {
                let t = p.from_lo;
                let (pm, pp) =
                    ((2.0 * d.z0 * d.b1 - 2.0 * n * d.k + d.k) / (2.0 * d.k), -(2.0 * d.z0 * d.b1 - d.k) / (2.0 * d.k));
                if minus {
                    pm * t.ln() + d.b1 * t * t / 4.0
                } else {
                    pp * t.ln() - d.b1 * t * t / 4.0 - self.z_at(p).ln_abs
                }
            }
            ModelId::BTrig => {
                let a = d.a;
                let ln_one_minus = (2.0 * (0.5 * a * p.to_hi).sin().powi(2)).ln();
                let ln_one_plus = (2.0 * (0.5 * a * p.from_lo).sin().powi(2)).ln();
                let ln_cos = 0.5 * (ln_one_minus + ln_one_plus);
                let ln_r = ln_one_plus - ln_one_minus;
                let beta = d.b1 / (a * a);
                let c = (2.0 * beta - n) * d.z0 / 4.0;
                if minus {
                    -((n - 1.0) / 2.0 + beta) * ln_cos + c * ln_r
                } else {
                    (beta - (n - 1.0) / 2.0) * ln_cos - c * ln_r - self.z_at(p).ln_abs
                }
            }
            ModelId::BExp => {
                let e = (2.0 * d.b1 + n) * d.z0 * (-u).exp() / 2.0;
                if minus {
                    -e - (n - 1.0 - 2.0 * d.b1) * u / 2.0
                } else {
                    e - (n - 1.0 + 2.0 * d.b1) * u / 2.0 - self.z_at(p).ln_abs
                }
            }
            ModelId::X2Rational => {
                let t = p.from_lo;
                let z = self.z_at(p);
                if minus {
                    (d.alpha + 0.5) * t.ln() - t * t / 2.0 - ln_poly(&self.f_alpha, z).0
                } else {
                    (-d.alpha - n + 0.5) * t.ln() + t * t / 2.0 - ln_poly(&self.f_alpha_n, z).0
                }
            }
            ModelId::X2Hyper => {
                let z = self.z_at(p);
                let e = d.zeta * u.sinh() / 2.0 + d.zeta * u.sinh().atan();
                if minus {
                    -e - (n / 2.0 - 1.0) * ln_cosh(u) - ln_poly(&self.f_alpha, z).0
                } else {
                    e - (n / 2.0) * ln_cosh(u) - ln_poly(&self.f_alpha_n, z).0
                }
            }
            ModelId::X2Exp => {
                let z = self.z_at(p);
                let c = (2.0 * d.zeta - 2.0 * d.alpha - n + 1.0) / 2.0 * d.zeta;
                let e = -u.exp() / 2.0 + c * (-u).exp();
                if minus {
                    e - (n - 2.0) / 2.0 * u - ln_poly(&self.f_alpha, z).0
                } else {
                    -e - n / 2.0 * u - ln_poly(&self.f_alpha_n, z).0
                }
            }
        }
    }

    /// ln|ψ| and sign of the sector function with polynomial part `coeffs`.
    pub fn ln_with_poly(&self, side: Side, coeffs: &[f64], p: Probe) -> (f64, f64) {
        let z = self.z_at(p);
        let (lp, sp) = ln_poly(coeffs, z);
        let pre_sign = if self.id.is_type_b() && side == Side::Plus { z.sign } else { 1.0 };
        (lp + self.ln_gauge(side, p), sp * pre_sign)
    }

    /// ln|ψ_j| and sign of sector entry `j` at a probe of `domain0`.
    pub fn ln_entry(&self, side: Side, j: usize, p: Probe) -> (f64, f64) {
        let c = match side {
            Side::Minus => &self.minus_f[j],
            Side::Plus => &self.plus_f[j],
        };
        self.ln_with_poly(side, c, p)
    }

    /// Constant-mass partner potential V^{(0)±} (additive constants dropped).
    pub fn v0(&self, side: Side, x: f64) -> f64 {
        let d = &self.d;
        let n = d.n;
        let minus = side == Side::Minus;
        match self.id {
            ModelId::BRational => {
                let (k, z0, b1) = (d.k, d.z0, d.b1);
                let x2 = x * x;
                if minus {
                    b1 * b1 * x2 / 8.0 + (4.0 * (z0 * b1 - n * k).powi(2) - k * k) / (8.0 * k * k * x2) + n * b1 / 2.0
                } else {
                    let den = k * x2 + 2.0 * z0;
                    b1 * b1 * x2 / 8.0 + (4.0 * z0 * z0 * b1 * b1 - k * k) / (8.0 * k * k * x2) + 2.0 * k / den
                        - 8.0 * k * z0 / (den * den)
                }
            }
            ModelId::BTrig => {
                let (a, z0, b1) = (d.a, d.z0, d.b1);
                let (s, c) = (a * x).sin_cos();
                let a2 = a * a;
                let sc = s / (c * c);
                let t2 = (s / c).powi(2);
                let m = 2.0 * b1 - n * a2;
                if minus {
                    (4.0 * b1 * b1 - n * n * a2 * a2) * z0 / (4.0 * a2) * sc
                        + (m * m * z0 * z0 + (2.0 * b1 + n * a2).powi(2) - a2 * a2) / (8.0 * a2) * t2
                        + b1 * n / 2.0
                } else {
                    let w = s + z0;
                    m * m * z0 / (4.0 * a2) * sc + (m * m * (z0 * z0 + 1.0) - a2 * a2) / (8.0 * a2) * t2 + a2 * z0 / w
                        - a2 * (z0 * z0 - 1.0) / (w * w)
                        - b1 * n / 2.0
                }
            }
            ModelId::BExp => {
                let (z0, b1) = (d.z0, d.b1);
                let e = (-x).exp();
                let c2 = (2.0 * b1 + n).powi(2) * z0 * z0 / 8.0 * e * e;
                if minus {
                    c2 + (4.0 * b1 * b1 - n * n) * z0 / 4.0 * e
                } else {
                    let w = 1.0 + z0 * e;
                    c2 + (2.0 * b1 + n).powi(2) * z0 / 4.0 * e - z0 * e / (w * w)
                }
            }
            ModelId::X2Rational => {
                let x2 = x * x;
                let al = if minus { d.alpha } else { d.alpha + n };
                let fz = x2 * x2 + 2.0 * (al - 1.0) * x2 + (al - 1.0) * al;
                x2 / 2.0
                    + (4.0 * al * al - 1.0) / (8.0 * x2)
                    + 4.0 * ((x2 - al + 1.0) / fz - 4.0 * (al - 1.0) * x2 / (fz * fz))
                    - if minus { n } else { 0.0 }
            }
            ModelId::X2Hyper => {
                let (al, zeta) = (d.alpha, d.zeta);
                let (sh, ch) = (x.sinh(), x.cosh());
                let s = zeta * sh;
                let ff = |b: f64| s * s + 2.0 * (b - 1.0) * s + (b - 1.0) * b;
                if minus {
                    let f = ff(al);
                    zeta * zeta * ch * ch / 8.0 - (n + 1.0) / 4.0 * s
                        + (4.0 * (n - 1.0) * s + 4.0 * al * al + 4.0 * (n - 2.0) * al - n * n - 2.0 * n + 4.0)
                            / (8.0 * ch * ch)
                        - 2.0 * (al - 1.0) * ((s - al - n + 3.0) / f - 2.0 * (al - 1.0) * (2.0 * s - n + 1.0) / (f * f))
                } else {
                    let f = ff(al + n);
                    let b = al + n - 1.0;
                    zeta * zeta * ch * ch / 8.0 + (n - 1.0) / 4.0 * s
                        - (4.0 * (n + 1.0) * s - 4.0 * al * al - 4.0 * (n - 2.0) * al + n * n + 6.0 * n - 4.0)
                            / (8.0 * ch * ch)
                        - 2.0 * b * ((s - al + 3.0) / f - 2.0 * b * (2.0 * s + n + 1.0) / (f * f))
                }
            }
            ModelId::X2Exp => {
                let (al, zeta) = (d.alpha, d.zeta);
                let e = x.exp();
                let ei = (-x).exp();
                let z = e - zeta;
                let ff = |b: f64| z * z + 2.0 * (b - 1.0) * z + (b - 1.0) * b;
                let kk = zeta
                    * zeta
                    * (n * n
                        + 2.0 * n * (4.0 * al - 2.0 * zeta - 3.0)
                        + 4.0 * al * (2.0 * al - 2.0 * zeta - 3.0)
                        + 4.0 * zeta
                        + 5.0)
                    / 8.0;
                let g = n + 2.0 * al - 2.0 * zeta - 1.0;
                if minus {
                    let f = ff(al);
                    e * e / 8.0 - (n + 1.0) / 4.0 * e - (n - 1.0) * g * zeta / 4.0 * ei + kk * ei * ei
                        - 2.0 * ((al - zeta - 1.0) * e / f + 2.0 * (al - 1.0) * e * e / (f * f))
                } else {
                    let f = ff(al + n);
                    e * e / 8.0 + (n - 1.0) / 4.0 * e + (n + 1.0) * g * zeta / 4.0 * ei + kk * ei * ei
                        - 2.0 * ((al + n - zeta - 1.0) * e / f + 2.0 * (al + n - 1.0) * e * e / (f * f))
                }
            }
        }
    }

    /// Gauged Hamiltonian of this model, when its parameters are rational.
    pub fn gauged_operator(&self, side: Side) -> Option<GaugedOperator> {
        let g = |k: &str| self.params.get(k).cloned().unwrap_or_else(Q::zero);
        let z = Q::zero;
        let half = q(1, 2);
        let b = |a: [Q; 5]| Some(GaugedOperator::type_b(self.n, &TypeBParams { a, b1: g("b1"), c0: z() }, side));
        match self.id {
            ModelId::BRational => {
                let (k, z0) = (g("k"), g("z0"));
                b([-(&k * &z0), k, z(), z(), z()])
            }
            ModelId::BTrig => {
                let (a2, z0) = (g("a") * g("a"), g("z0"));
                b([&a2 * (Q::one() - &z0 * &z0) / qi(2), &a2 * &z0, -(&a2 / qi(2)), z(), z()])
            }
            ModelId::BExp => {
                let z0 = g("z0");
                b([&z0 * &z0 / qi(2), -z0, half, z(), z()])
            }
            _ => {
                let alpha = self.alpha_q();
                let (a1, a2) = match self.id {
                    ModelId::X2Rational => (qi(2), z()),
                    ModelId::X2Hyper => (z(), half),
                    _ => {
                        let z2 = (&alpha - qi(1)) * (&alpha + qi(self.n as i64) - qi(1));
                        (sqrt_exact(&z2)? * g("sign"), half)
                    }
                };
                GaugedOperator::type_x2(self.n, &X2Params { alpha, a1, a2, c0: g("c0") }, side).ok()
            }
        }
    }

    /// The invariant space matching a sector: the N-fold kernel sector when
    /// `prefix` is `None`, otherwise the first `k` flag entries.
    pub fn gauged_space(&self, side: Side, prefix: Option<usize>) -> PolySubspace {
        let n = self.n;
        let al = self.alpha_q();
        match (self.id.is_type_b(), side, prefix) {
            (true, Side::Minus, None) => PolySubspace::type_b(n),
            (true, Side::Minus, Some(k)) => PolySubspace::type_a(k, n),
            (true, Side::Plus, k) => PolySubspace::type_b_plus(k.unwrap_or(n), n),
            (false, Side::Minus, k) => PolySubspace::x2_minus(k.unwrap_or(n), n, &al),
            (false, Side::Plus, k) => PolySubspace::x2_plus(k.unwrap_or(n), n, &al),
        }
    }

    pub fn sector_basis(&self, side: Side) -> SectorBasis {
        let src: &dyn Sectors = self;
        sector_basis_of(src, side, self.sector_polys(side), self.id.is_type_b().then_some(self.truncation))
    }

    pub fn describe_potential(&self, side: Side) -> &'static str {
        match (self.id, side) {
            (ModelId::X2Hyper, _) => "closed form shifted by −(N/2)ζ sinh q",
            _ => "closed form, additive constant dropped",
        }
    }
}

/// Common read interface of constant-mass and PDM instances.
pub trait Sectors: Send + Sync {
    fn id(&self) -> ModelId;
    fn n(&self) -> usize;
    fn domain(&self) -> (f64, f64);
    fn end_kinds(&self) -> [EndKind; 2];
    fn sector_len(&self, side: Side) -> usize;
    fn ln_entry(&self, side: Side, j: usize, p: Probe) -> (f64, f64);
    fn potential(&self, side: Side, q: f64) -> f64;
    fn has_flags(&self) -> bool;
    fn base(&self) -> &ModelInstance;
    fn mass_id(&self) -> &str;
    /// The same system with `t` materialized entries of each infinite flag.
    fn retruncated(&self, t: usize) -> Box<dyn Sectors>;
    /// ln|ψ| and sign of the sector function with polynomial part `coeffs`.
    fn ln_combination(&self, side: Side, coeffs: &[f64], p: Probe) -> (f64, f64);
    fn ln_mass(&self, _q: f64) -> f64 {
        0.0
    }
    /// Interval of the constant-mass coordinate covered by the system, with its end kinds.
    fn u_interval(&self) -> ((f64, f64), [EndKind; 2]);
    /// The constant-mass probe of a point of `domain()`.
    fn to_u(&self, p: Probe) -> Probe {
        p
    }
    /// (m′/m, m″/m).
    fn mass_log_derivs(&self, _q: f64) -> (f64, f64) {
        (0.0, 0.0)
    }
}

impl Sectors for ModelInstance {
    fn id(&self) -> ModelId {
        self.id
    }
    fn n(&self) -> usize {
        self.n
    }
    fn domain(&self) -> (f64, f64) {
        self.domain0
    }
    fn end_kinds(&self) -> [EndKind; 2] {
        ModelInstance::end_kinds(self)
    }
    fn sector_len(&self, side: Side) -> usize {
        ModelInstance::sector_len(self, side)
    }
    fn ln_entry(&self, side: Side, j: usize, p: Probe) -> (f64, f64) {
        ModelInstance::ln_entry(self, side, j, p)
    }
    fn potential(&self, side: Side, q: f64) -> f64 {
        self.v0(side, q)
    }
    fn has_flags(&self) -> bool {
        ModelInstance::has_flags(self)
    }
    fn base(&self) -> &ModelInstance {
        self
    }
    fn retruncated(&self, t: usize) -> Box<dyn Sectors> {
        Box::new(self.with_truncation(t))
    }
    fn mass_id(&self) -> &str {
        "const"
    }
    fn ln_combination(&self, side: Side, coeffs: &[f64], p: Probe) -> (f64, f64) {
        self.ln_with_poly(side, coeffs, p)
    }
    fn u_interval(&self) -> ((f64, f64), [EndKind; 2]) {
        (self.domain0, ModelInstance::end_kinds(self))
    }
}

/// Leading power (finite end) or log-slope (infinite end) of |ψ_j|.
pub fn endpoint_exponent(src: &dyn Sectors, side: Side, j: usize, hi: bool) -> f64 {
    let (lo, up) = src.domain();
    let end = if hi { up } else { lo };
    let eval = |gap: f64| -> f64 {
        let p = if end.is_finite() {
            if hi {
                Probe::near_hi(lo, up, gap)
            } else {
                Probe::near_lo(lo, up, gap)
            }
        } else {
            let x = if hi { gap } else { -gap };
            Probe::at(x, lo, up)
        };
        src.ln_entry(side, j, p).0
    };
    if end.is_finite() {
        let (t1, t2) = (1e-20, 1e-40);
        (eval(t1) - eval(t2)) / (t1.ln() - t2.ln())
    } else {
        let (x1, x2) = (1e6, 2e6);
        let s = (eval(x2) - eval(x1)) / (x2.ln() - x1.ln());
        if s.abs() > 1e3 {
            s.signum() * f64::INFINITY
        } else {
            s
        }
    }
}

fn sector_basis_of(src: &dyn Sectors, side: Side, polys: &[RationalPoly], truncation: Option<usize>) -> SectorBasis {
    let endpoint_exponents = (0..polys.len())
        .map(|j| [endpoint_exponent(src, side, j, false), endpoint_exponent(src, side, j, true)])
        .collect();
    let prefactor = match (src.id().is_type_b(), side) {
        (true, Side::Plus) => "z^-1 * ",
        _ => "",
    };
    SectorBasis {
        side,
        polys: polys.iter().map(|p| format!("{prefactor}({p})")).collect(),
        truncation,
        endpoint_exponents,
    }
}

/// One evaluable sector basis function.
#[derive(Clone, Copy)]
pub struct SectorFunction<'a> {
    pub src: &'a dyn Sectors,
    pub side: Side,
    pub index: usize,
}

impl<'a> SectorFunction<'a> {
    pub fn ln_abs(&self, p: Probe) -> (f64, f64) {
        self.src.ln_entry(self.side, self.index, p)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.src.domain();
        let (l, s) = self.ln_abs(Probe::at(x, lo, hi));
        s * l.exp()
    }
}

/// The first `count` basis functions of a solvable sector.
pub fn sector_functions(src: &dyn Sectors, side: Side, count: usize) -> Result<Vec<SectorFunction<'_>>, ModelError> {
    let available = src.sector_len(side);
    if count > available {
        return Err(ModelError::Range { requested: count, available });
    }
    Ok((0..count).map(|index| SectorFunction { src, side, index }).collect())
}

/// A model pulled back to a position-dependent mass.
#[derive(Clone, Debug)]
pub struct PdmModelInstance {
    pub base: ModelInstance,
    pub mass: MassProfile,
    /// Interval of q on which the pullback is defined.
    pub domain: (f64, f64),
    /// Corresponding interval of u inside the constant-mass domain.
    pub u_domain: (f64, f64),
    /// Whether u is replaced by −u (half-line models with u < 0).
    pub reflected: bool,
}

/// Point canonical transformation of `base` to the mass `mass`.
pub fn pct_map(base: &ModelInstance, mass: &MassProfile) -> Result<PdmModelInstance, ModelError> {
    PdmModelInstance::new(base.clone(), mass.clone())
}

impl PdmModelInstance {
    pub fn new(base: ModelInstance, mass: MassProfile) -> Result<Self, ModelError> {
        let (mut ulo, mut uhi) = mass.u_range();
        let reflected = base.id.is_even() && uhi <= 0.0;
        if reflected {
            (ulo, uhi) = (-uhi, -ulo);
        }
        let (d0, d1) = base.domain0;
        let lo = ulo.max(d0);
        let hi = uhi.min(d1);
        if !(lo < hi) {
            return Err(ModelError::Geometry(format!(
                "u-range ({ulo}, {uhi}) of mass `{}` does not meet the domain ({d0}, {d1}) of {}",
                mass.id, base.id
            )));
        }
        let q_at = |u: f64, end_is_mass_end: bool, lower: bool| -> Result<f64, ModelError> {
            // `lower` refers to the u ordering; reflection reverses q.
            let mass_end = |low_q: bool| if low_q { mass.domain.0 } else { mass.domain.1 };
            if end_is_mass_end {
                return Ok(mass_end(lower != reflected));
            }
            let uu = if reflected { -u } else { u };
            let qv = mass
                .q_of_u(uu)
                .ok_or_else(|| ModelError::Geometry(format!("cannot invert u = {uu} for mass `{}`", mass.id)))?;
            Ok(if qv.abs() < 1e-14 { 0.0 } else { qv })
        };
        let qa = q_at(lo, lo == ulo, true)?;
        let qb = q_at(hi, hi == uhi, false)?;
        let domain = if reflected { (qb, qa) } else { (qa, qb) };
        Ok(Self { base, mass, domain, u_domain: (lo, hi), reflected })
    }

    /// The u-probe (in constant-mass coordinates) of a q-probe on `self.domain`.
    pub fn u_probe(&self, qp: Probe) -> Probe {
        let mp = self.mass.u_probe(qp.rebase(self.domain, self.mass.domain));
        let (mut r0, mut r1) = self.mass.u_range();
        let mp = if self.reflected {
            (r0, r1) = (-r1, -r0);
            mp.reflect()
        } else {
            mp
        };
        mp.rebase((r0, r1), self.base.domain0)
    }

    pub fn u(&self, q: f64) -> f64 {
        self.u_probe(Probe::at(q, self.domain.0, self.domain.1)).x
    }

    /// U(q) = V⁰(u(q)) + m″/(8m²) − 7m′²/(32m³).
    pub fn u_potential(&self, side: Side, q: f64) -> f64 {
        self.base.v0(side, self.u(q)) + self.mass.mass_term(q)
    }

    pub fn sector_basis(&self, side: Side) -> SectorBasis {
        sector_basis_of(
            self,
            side,
            self.base.sector_polys(side),
            self.base.id.is_type_b().then_some(self.base.truncation),
        )
    }

    pub fn with_truncation(&self, t: usize) -> Self {
        Self { base: self.base.with_truncation(t), ..self.clone() }
    }

    /// End kinds of the u-interval: singular where it reaches a finite end of
    /// the constant-mass domain, regular where the pullback cuts it short.
    pub fn u_end_kinds(&self) -> [EndKind; 2] {
        let (d0, d1) = self.base.domain0;
        let k = |u: f64, d: f64| {
            if !u.is_finite() {
                EndKind::Infinite
            } else if u == d {
                EndKind::Singular
            } else {
                EndKind::Regular
            }
        };
        [k(self.u_domain.0, d0), k(self.u_domain.1, d1)]
    }
}

impl Sectors for PdmModelInstance {
    fn id(&self) -> ModelId {
        self.base.id
    }
    fn n(&self) -> usize {
        self.base.n
    }
    fn domain(&self) -> (f64, f64) {
        self.domain
    }
    fn end_kinds(&self) -> [EndKind; 2] {
        let k = |x: f64| if x.is_finite() { EndKind::Singular } else { EndKind::Infinite };
        [k(self.domain.0), k(self.domain.1)]
    }
    fn sector_len(&self, side: Side) -> usize {
        self.base.sector_len(side)
    }
    fn ln_entry(&self, side: Side, j: usize, p: Probe) -> (f64, f64) {
        let up = self.u_probe(p);
        let (l, s) = self.base.ln_entry(side, j, up);
        let lm = self.mass.ln_m_probe(p.rebase(self.domain, self.mass.domain));
        (l + 0.25 * lm, s)
    }
    fn ln_combination(&self, side: Side, coeffs: &[f64], p: Probe) -> (f64, f64) {
        let (l, s) = self.base.ln_with_poly(side, coeffs, self.u_probe(p));
        let lm = self.mass.ln_m_probe(p.rebase(self.domain, self.mass.domain));
        (l + 0.25 * lm, s)
    }
    fn ln_mass(&self, q: f64) -> f64 {
        self.mass.ln_m(q)
    }
    fn to_u(&self, p: Probe) -> Probe {
        self.u_probe(p)
    }
    fn mass_log_derivs(&self, q: f64) -> (f64, f64) {
        self.mass.log_derivs(q)
    }
    fn u_interval(&self) -> ((f64, f64), [EndKind; 2]) {
        (self.u_domain, self.u_end_kinds())
    }
    fn potential(&self, side: Side, q: f64) -> f64 {
        self.u_potential(side, q)
    }
    fn has_flags(&self) -> bool {
        self.base.has_flags()
    }
    fn base(&self) -> &ModelInstance {
        &self.base
    }
    fn retruncated(&self, t: usize) -> Box<dyn Sectors> {
        Box::new(self.with_truncation(t))
    }
    fn mass_id(&self) -> &str {
        &self.mass.id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(id: ModelId, n: usize, kv: &[(&str, Q)]) -> ModelInstance {
        let p = kv.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        ModelInstance::new(id, n, &p).unwrap()
    }

    #[test]
    fn ids_round_trip() {
        for id in ModelId::ALL {
            assert_eq!(id.as_str().parse::<ModelId>().unwrap(), id);
        }
        assert!("B.cubic".parse::<ModelId>().is_err());
    }

    #[test]
    fn constraints_are_named() {
        let p: BTreeMap<String, Q> = [("z0".to_string(), q(1, 2))].into_iter().collect();
        let e = ModelInstance::new(ModelId::BTrig, 2, &p).unwrap_err();
        assert_eq!(e, ModelError::Constraint("z0 > 1".into()));
        let p: BTreeMap<String, Q> = [("alpha".to_string(), qi(1))].into_iter().collect();
        assert!(ModelInstance::new(ModelId::X2Rational, 2, &p).is_err());
        let p: BTreeMap<String, Q> = [("zeta".to_string(), qi(2))].into_iter().collect();
        assert!(ModelInstance::new(ModelId::X2Exp, 2, &p).is_err());
        let p: BTreeMap<String, Q> = [("bogus".to_string(), qi(2))].into_iter().collect();
        assert!(matches!(ModelInstance::new(ModelId::BExp, 2, &p), Err(ModelError::UnknownParam { .. })));
    }

    #[test]
    fn centrifugal_coefficient_of_x2_rational() {
        let m = model(ModelId::X2Rational, 1, &[("alpha", qi(2))]);
        let x = 1e-5;
        assert!((m.v0(Side::Minus, x) * x * x - 15.0 / 8.0).abs() < 1e-8);
    }

    #[test]
    fn b_exp_minus_potential_at_b1_zero() {
        let m = model(ModelId::BExp, 1, &[("z0", qi(1)), ("b1", qi(0))]);
        for x in [-1.0f64, 0.3, 2.0] {
            let e = (-x).exp();
            assert!((m.v0(Side::Minus, x) - (e * e / 8.0 - e / 4.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn plus_flag_skips_degree_one() {
        let m = model(ModelId::BRational, 2, &[]);
        assert_eq!(m.sector_polys(Side::Plus)[1].degree(), Some(2));
        assert_eq!(m.sector_len(Side::Plus), 4);
    }

    #[test]
    fn log_polynomial_matches_direct_evaluation() {
        let c = [1.0, -3.0, 0.5, 2.0];
        for z in [0.3, -0.7, 5.0, -40.0] {
            let (l, s) = ln_poly(&c, ZVal::of(z));
            let v = 1.0 - 3.0 * z + 0.5 * z * z + 2.0 * z * z * z;
            assert!((s * l.exp() - v).abs() < 1e-12 * v.abs().max(1.0));
        }
        let (l, _) = ln_poly(&c, ZVal::huge(1000.0, 1.0));
        assert!((l - (3000.0 + 2f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn count_overflow_is_a_range_error() {
        let m = model(ModelId::X2Hyper, 2, &[]);
        assert!(sector_functions(&m, Side::Minus, 0).unwrap().is_empty());
        assert!(matches!(sector_functions(&m, Side::Minus, 3), Err(ModelError::Range { requested: 3, available: 2 })));
    }

    #[test]
    fn x2_rational_first_entry_formula() {
        // φ₁(z;2) = z² + 4z + 6 (after the generic formula), q^{5/2} e^{−1/2}/f(1;2).
        let m = model(ModelId::X2Rational, 1, &[("alpha", qi(2))]);
        let f = sector_functions(&m, Side::Minus, 1).unwrap();
        let phi = phi_poly(1, &qi(2)).eval_f64(1.0);
        let fz = f_poly(&qi(2)).eval_f64(1.0);
        let want = phi * (-0.5f64).exp() / fz;
        assert!((f[0].eval(1.0) - want).abs() < 1e-14 * want.abs());
    }
}
