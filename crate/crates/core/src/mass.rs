//! Mass profiles m(q) and the change of variable u(q) = ∫√m dq.

use crate::probe::Probe;
use crate::quadrature;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MassError {
    #[error("unknown mass profile `{0}` (expected const|expdecay|gauss2|sech2|algebraic_pole|rational_beta)")]
    UnknownId(String),
    #[error("mass profile `{id}` has no parameter `{key}`")]
    UnknownParam { id: String, key: String },
    #[error("mass parameter {0}")]
    BadParam(String),
    #[error("q = {q} is outside the domain ({lo}, {hi}) of mass `{id}`")]
    OutOfDomain { id: String, q: f64, lo: f64, hi: f64 },
    #[error("change of variable did not converge: error bound {0:e}")]
    Quadrature(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UKind {
    ClosedForm,
    Quadrature,
}

/// Leading behaviour of m at one end of its domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum MassLaw {
    /// m tends to a positive constant.
    Constant,
    /// ln m ≈ coefficient·|q|^power at an infinite end.
    LogPower { coefficient: f64, power: f64 },
    /// m ≈ t^exponent with t the distance to a finite end.
    DistancePower { exponent: f64 },
    /// No closed-form descriptor (tabulated profiles).
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EndpointBehavior {
    pub m: MassLaw,
    /// lim u(q) at this end.
    pub u_limit: f64,
}

type Fun = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
struct Numeric {
    m: Fun,
    dm: Fun,
    ddm: Fun,
    anchor: f64,
}

#[derive(Clone)]
enum Kind {
    Const,
    ExpDecay { b: f64 },
    Gauss2 { erf_u: bool },
    Sech2 { a: f64 },
    AlgebraicPole,
    RationalBeta { beta: f64 },
    Numeric(Numeric),
}

/// A positive mass function on an open interval with its change of variable.
#[derive(Clone)]
pub struct MassProfile {
    pub id: String,
    pub domain: (f64, f64),
    pub u_kind: UKind,
    pub params: BTreeMap<String, f64>,
    pub endpoint_behavior: [EndpointBehavior; 2],
    u_range: (f64, f64),
    kind: Kind,
}

impl fmt::Debug for MassProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MassProfile")
            .field("id", &self.id)
            .field("domain", &self.domain)
            .field("params", &self.params)
            .finish()
    }
}

pub const BUILTIN_IDS: [&str; 6] = ["const", "expdecay", "gauss2", "sech2", "algebraic_pole", "rational_beta"];

/// The six catalog profiles with default parameters b = 1, a = 1, β = 2.
pub fn builtin_profiles() -> Vec<MassProfile> {
    BUILTIN_IDS.iter().map(|id| MassProfile::from_id(id, &BTreeMap::new()).unwrap()).collect()
}

/// Convenience wrapper around [`MassProfile::u`].
pub fn change_of_variable(profile: &MassProfile, q: f64) -> Result<f64, MassError> {
    profile.u(q)
}

impl MassProfile {
    pub fn constant() -> Self {
        Self::from_id("const", &BTreeMap::new()).unwrap()
    }

    /// Catalog profile by id; unspecified parameters take their defaults.
    pub fn from_id(id: &str, params: &BTreeMap<String, f64>) -> Result<Self, MassError> {
        let allowed: &[&str] = match id {
            "const" | "gauss2" | "gauss2_erf" | "algebraic_pole" => &[],
            "expdecay" => &["b"],
            "sech2" => &["a"],
            "rational_beta" => &["beta"],
            _ => return Err(MassError::UnknownId(id.to_string())),
        };
        for k in params.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(MassError::UnknownParam { id: id.to_string(), key: k.clone() });
            }
        }
        let get = |k: &str, d: f64| -> Result<f64, MassError> {
            let v = params.get(k).copied().unwrap_or(d);
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(MassError::BadParam(format!("{k} = {v} must be positive and finite")))
            }
        };
        let inf = f64::INFINITY;
        let (kind, domain, laws, u_range, used) = match id {
            "const" => (Kind::Const, (-inf, inf), [MassLaw::Constant; 2], (-inf, inf), vec![]),
            "expdecay" => {
                let b = get("b", 1.0)?;
                (
                    Kind::ExpDecay { b },
                    (-inf, inf),
                    [
                        MassLaw::LogPower { coefficient: b, power: 1.0 },
                        MassLaw::LogPower { coefficient: -b, power: 1.0 },
                    ],
                    (-inf, 0.0),
                    vec![("b", b)],
                )
            }
            "gauss2" | "gauss2_erf" => {
                let erf_u = id == "gauss2_erf";
                let s = if erf_u { 1.0 } else { 1.0 / SQRT_2 };
                (
                    Kind::Gauss2 { erf_u },
                    (-inf, inf),
                    [MassLaw::LogPower { coefficient: -2.0, power: 2.0 }; 2],
                    (-s, s),
                    vec![],
                )
            }
            "sech2" => {
                let a = get("a", 1.0)?;
                (
                    Kind::Sech2 { a },
                    (-inf, inf),
                    [MassLaw::LogPower { coefficient: -2.0 * a, power: 1.0 }; 2],
                    (-FRAC_PI_2 / a, FRAC_PI_2 / a),
                    vec![("a", a)],
                )
            }
            "algebraic_pole" => (
                Kind::AlgebraicPole,
                (-1.0, 1.0),
                [MassLaw::DistancePower { exponent: -1.0 }; 2],
                (-FRAC_PI_2, FRAC_PI_2),
                vec![],
            ),
            "rational_beta" => {
                let beta = get("beta", 2.0)?;
                (Kind::RationalBeta { beta }, (-inf, inf), [MassLaw::Constant; 2], (-inf, inf), vec![("beta", beta)])
            }
            _ => unreachable!(),
        };
        Ok(Self {
            id: id.to_string(),
            domain,
            u_kind: UKind::ClosedForm,
            params: used.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            endpoint_behavior: [
                EndpointBehavior { m: laws[0], u_limit: u_range.0 },
                EndpointBehavior { m: laws[1], u_limit: u_range.1 },
            ],
            u_range,
            kind,
        })
    }

    /// Gaussian mass with the alternative u = erf q convention.
    /// Its u′ is 2e^{−q²}/√π = √(2m), not √m; use only for comparisons.
    pub fn gauss2_erf_convention() -> Self {
        Self::from_id("gauss2_erf", &BTreeMap::new()).unwrap()
    }

    /// A tabulated/analytic profile whose u is computed by adaptive quadrature,
    /// anchored so that u vanishes at the domain midpoint.
    pub fn numeric(
        id: &str,
        domain: (f64, f64),
        m: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dm: impl Fn(f64) -> f64 + Send + Sync + 'static,
        ddm: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, MassError> {
        let anchor = match (domain.0.is_finite(), domain.1.is_finite()) {
            (true, true) => 0.5 * (domain.0 + domain.1),
            (true, false) => domain.0 + 1.0,
            (false, true) => domain.1 - 1.0,
            (false, false) => 0.0,
        };
        let num = Numeric { m: Arc::new(m), dm: Arc::new(dm), ddm: Arc::new(ddm), anchor };
        let sm = num.m.clone();
        let end = |e: f64| -> f64 {
            match quadrature::integrate(|x| sm(x).sqrt(), anchor, e, 1e-12) {
                Ok(v) => v,
                Err(_) => e.signum() * f64::INFINITY,
            }
        };
        let u_range = (end(domain.0), end(domain.1));
        Ok(Self {
            id: id.to_string(),
            domain,
            u_kind: UKind::Quadrature,
            params: BTreeMap::new(),
            endpoint_behavior: [
                EndpointBehavior { m: MassLaw::Unknown, u_limit: u_range.0 },
                EndpointBehavior { m: MassLaw::Unknown, u_limit: u_range.1 },
            ],
            u_range,
            kind: Kind::Numeric(num),
        })
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, Kind::Const)
    }

    pub fn contains(&self, q: f64) -> bool {
        q > self.domain.0 && q < self.domain.1
    }

    fn check(&self, q: f64) -> Result<(), MassError> {
        if self.contains(q) {
            Ok(())
        } else {
            Err(MassError::OutOfDomain { id: self.id.clone(), q, lo: self.domain.0, hi: self.domain.1 })
        }
    }

    /// ln m(q), using the gaps in `p` near finite ends.
    pub fn ln_m_probe(&self, p: Probe) -> f64 {
        let q = p.x;
        match &self.kind {
            Kind::Const => 0.0,
            Kind::ExpDecay { b } => -b * q,
            Kind::Gauss2 { .. } => (2.0 / PI).ln() - 2.0 * q * q,
            Kind::Sech2 { a } => -2.0 * ln_cosh(a * q),
            Kind::AlgebraicPole => -(p.from_lo.ln() + p.to_hi.ln()),
            Kind::RationalBeta { beta } => 2.0 * ((beta + q * q).ln() - (1.0 + q * q).ln()),
            Kind::Numeric(n) => (n.m)(q).ln(),
        }
    }

    pub fn ln_m(&self, q: f64) -> f64 {
        self.ln_m_probe(Probe::at(q, self.domain.0, self.domain.1))
    }

    pub fn m(&self, q: f64) -> f64 {
        match &self.kind {
            Kind::Numeric(n) => (n.m)(q),
            Kind::AlgebraicPole => 1.0 / (1.0 - q * q),
            _ => self.ln_m(q).exp(),
        }
    }

    /// (m′/m, m″/m).
    pub fn log_derivs(&self, q: f64) -> (f64, f64) {
        match &self.kind {
            Kind::Const => (0.0, 0.0),
            Kind::ExpDecay { b } => (-b, b * b),
            Kind::Gauss2 { .. } => (-4.0 * q, 16.0 * q * q - 4.0),
            Kind::Sech2 { a } => {
                let t = (a * q).tanh();
                let l1 = -2.0 * a * t;
                (l1, -2.0 * a * a * (1.0 - t * t) + l1 * l1)
            }
            Kind::AlgebraicPole => {
                let s = 1.0 - q * q;
                (2.0 * q / s, 2.0 / s + 8.0 * q * q / (s * s))
            }
            Kind::RationalBeta { beta } => {
                let (bq, oq) = (beta + q * q, 1.0 + q * q);
                let l1 = 4.0 * q / bq - 4.0 * q / oq;
                let l2 = 4.0 * (beta - q * q) / (bq * bq) - 4.0 * (1.0 - q * q) / (oq * oq);
                (l1, l2 + l1 * l1)
            }
            Kind::Numeric(n) => {
                let m = (n.m)(q);
                ((n.dm)(q) / m, (n.ddm)(q) / m)
            }
        }
    }

    pub fn dm(&self, q: f64) -> f64 {
        self.m(q) * self.log_derivs(q).0
    }

    pub fn ddm(&self, q: f64) -> f64 {
        self.m(q) * self.log_derivs(q).1
    }

    /// m″/(8m²) − 7m′²/(32m³), the mass-derivative part of the effective potential.
    pub fn mass_term(&self, q: f64) -> f64 {
        let (l1, l2) = self.log_derivs(q);
        (l2 / 8.0 - 7.0 * l1 * l1 / 32.0) / self.m(q)
    }

    /// Range of u over the domain.
    pub fn u_range(&self) -> (f64, f64) {
        self.u_range
    }

    pub fn u(&self, q: f64) -> Result<f64, MassError> {
        self.check(q)?;
        match &self.kind {
            Kind::Numeric(n) => {
                let sm = n.m.clone();
                quadrature::integrate_with_error(|x| sm(x).sqrt(), n.anchor, q, 1e-12)
                    .map_err(|e| MassError::Quadrature(e.error))
                    .and_then(|(v, e)| if e <= 1e-10 { Ok(v) } else { Err(MassError::Quadrature(e)) })
            }
            _ => Ok(self.u_probe(Probe::at(q, self.domain.0, self.domain.1)).x),
        }
    }

    /// u at a probe of the mass domain, with gaps measured to the ends of [`Self::u_range`].
    pub fn u_probe(&self, p: Probe) -> Probe {
        let q = p.x;
        let (ulo, uhi) = self.u_range;
        match &self.kind {
            Kind::Const => p,
            Kind::ExpDecay { b } => {
                let g = (2.0 / b) * (-b * q / 2.0).exp();
                Probe { x: -g, from_lo: f64::INFINITY, to_hi: g }
            }
            Kind::Gauss2 { erf_u } => {
                let s = if *erf_u { 1.0 } else { 1.0 / SQRT_2 };
                Probe { x: s * libm::erf(q), from_lo: s * libm::erfc(-q), to_hi: s * libm::erfc(q) }
            }
            Kind::Sech2 { a } => {
                let x = (a * q).sinh().atan() / a;
                let hi_gap = if q > 0.0 { (1.0 / (a * q).sinh()).atan() / a } else { uhi - x };
                let lo_gap = if q < 0.0 { (-1.0 / (a * q).sinh()).atan() / a } else { x - ulo };
                Probe { x, from_lo: lo_gap, to_hi: hi_gap }
            }
            Kind::AlgebraicPole => {
                let gap = |t: f64| 2.0 * (0.5 * t).sqrt().asin();
                Probe { x: q.asin(), from_lo: gap(p.from_lo), to_hi: gap(p.to_hi) }
            }
            Kind::RationalBeta { beta } => {
                Probe { x: q + (beta - 1.0) * q.atan(), from_lo: f64::INFINITY, to_hi: f64::INFINITY }
            }
            Kind::Numeric(_) => {
                let x = self.u(q).unwrap_or(f64::NAN);
                Probe { x, from_lo: x - ulo, to_hi: uhi - x }
            }
        }
    }

    /// Inverse change of variable by safeguarded Newton iteration (u′ = √m).
    pub fn q_of_u(&self, u: f64) -> Option<f64> {
        let (ulo, uhi) = self.u_range;
        if !(u > ulo && u < uhi) {
            return None;
        }
        match &self.kind {
            Kind::Const => return Some(u),
            Kind::AlgebraicPole => return Some(u.sin()),
            Kind::Sech2 { a } => return Some((a * u).tan().asinh() / a),
            Kind::ExpDecay { b } => return Some(-(2.0 / b) * (-b * u / 2.0).ln()),
            _ => {}
        }
        // Bracket, then Newton with bisection fallback.
        let (mut lo, mut hi) = (self.domain.0, self.domain.1);
        let mut x = 0.0f64
            .clamp(if lo.is_finite() { lo + 1e-9 } else { -1e300 }, if hi.is_finite() { hi - 1e-9 } else { 1e300 });
        for _ in 0..400 {
            let fx = self.u(x).ok()? - u;
            if fx.abs() < 1e-15 * (1.0 + u.abs()) {
                return Some(x);
            }
            if fx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let step = fx / self.m(x).sqrt();
            let mut nx = x - step;
            if !(nx > lo && nx < hi) || !nx.is_finite() {
                nx = match (lo.is_finite(), hi.is_finite()) {
                    (true, true) => 0.5 * (lo + hi),
                    (true, false) => lo + 2.0 * (x - lo).abs().max(1.0),
                    (false, true) => hi - 2.0 * (hi - x).abs().max(1.0),
                    (false, false) => x - step.signum(),
                };
            }
            if (nx - x).abs() <= 1e-16 * (1.0 + x.abs()) {
                return Some(nx);
            }
            x = nx;
        }
        Some(x)
    }
}

/// ln cosh x without overflow.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: &str, v: f64) -> BTreeMap<String, f64> {
        [(k.to_string(), v)].into_iter().collect()
    }

    #[test]
    fn catalog_examples() {
        let e = MassProfile::from_id("expdecay", &params("b", 2.0)).unwrap();
        assert!((e.u(0.0).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(MassProfile::constant().u(3.25).unwrap(), 3.25);
        let s = MassProfile::from_id("sech2", &BTreeMap::new()).unwrap();
        assert!((s.u(1.0).unwrap() - 0.865_769_483_239_659_1).abs() < 1e-12);
        let ids: Vec<String> = builtin_profiles().into_iter().map(|p| p.id).collect();
        assert_eq!(ids, BUILTIN_IDS);
        let ap = MassProfile::from_id("algebraic_pole", &BTreeMap::new()).unwrap();
        assert_eq!(ap.domain, (-1.0, 1.0));
        assert!((ap.u(0.5).unwrap() - 0.5f64.asin()).abs() < 1e-15);
    }

    #[test]
    fn errors_are_specific() {
        assert!(matches!(MassProfile::from_id("nope", &BTreeMap::new()), Err(MassError::UnknownId(_))));
        assert!(matches!(MassProfile::from_id("sech2", &params("b", 1.0)), Err(MassError::UnknownParam { .. })));
        assert!(matches!(MassProfile::from_id("expdecay", &params("b", -1.0)), Err(MassError::BadParam(_))));
        let ap = MassProfile::from_id("algebraic_pole", &BTreeMap::new()).unwrap();
        assert!(matches!(ap.u(1.5), Err(MassError::OutOfDomain { .. })));
    }

    #[test]
    fn gaps_are_accurate_near_ends() {
        let s = MassProfile::from_id("sech2", &BTreeMap::new()).unwrap();
        let p = s.u_probe(Probe::at(40.0, f64::NEG_INFINITY, f64::INFINITY));
        // π/2 − gd(40) ≈ 2e^{−40}
        assert!((p.to_hi / (2.0 * (-40f64).exp()) - 1.0).abs() < 1e-10);
        let ap = MassProfile::from_id("algebraic_pole", &BTreeMap::new()).unwrap();
        let p = ap.u_probe(Probe::near_hi(-1.0, 1.0, 1e-20));
        assert!((p.to_hi / (2e-20f64).sqrt() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn numeric_profile_matches_closed_form() {
        let n = MassProfile::numeric(
            "sech2_numeric",
            (f64::NEG_INFINITY, f64::INFINITY),
            |q| 1.0 / q.cosh().powi(2),
            |q| -2.0 * q.tanh() / q.cosh().powi(2),
            |q| {
                let t = q.tanh();
                (4.0 * t * t - 2.0 * (1.0 - t * t)) / q.cosh().powi(2)
            },
        )
        .unwrap();
        let c = MassProfile::from_id("sech2", &BTreeMap::new()).unwrap();
        for q in [-3.0, -0.5, 0.7, 2.5] {
            assert!((n.u(q).unwrap() - c.u(q).unwrap()).abs() < 1e-10);
        }
        assert!((n.u_range().1 - FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn inverse_round_trips() {
        for p in builtin_profiles() {
            for q in [-0.9, -0.3, 0.2, 0.8] {
                let u = p.u(q).unwrap();
                let back = p.q_of_u(u).unwrap();
                assert!((back - q).abs() < 1e-10, "{} q={q} back={back}", p.id);
            }
        }
    }
}
