//! L² membership of sector functions and the resulting breaking classification.
//!
//! Each endpoint is judged twice. The exponent method reads the tail slope of
//! h = ln(|ψ|² · dq/dx) in a logarithmic variable x, so a power law |ψ|² ~ t^p
//! becomes a straight line whose sign decides integrability. The quadrature
//! method integrates |ψ|² over growing windows. A verdict is indeterminate only
//! when neither method is decisive.

use crate::gauged::Side;
use crate::mass::MassProfile;
use crate::models::{ModelError, ModelId, ModelInstance, PdmModelInstance, Sectors};
use crate::probe::Probe;
use crate::quadrature::integrate_with_error;
use crate::rational::{parse_rational, to_f64, Q};
use serde::{Deserialize, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Slope magnitude below which a tail counts as marginal.
const SLOPE_TOL: f64 = 1e-3;
const SLOPE_WINDOW: usize = 6;
const SAMPLE_LEVELS: i32 = 40;
const QUAD_STEPS: usize = 6;
const QUAD_L0: f64 = 16.0;
const QUAD_SHRINK: f64 = 1.0 / 16.0;
const QUAD_REL: f64 = 1e-8;
const GROWTH: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exponent,
    Quadrature,
    Both,
}

/// Outcome of one test at one endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EndSignal {
    Integrable,
    Divergent,
    /// Exponent exactly at the boundary case; not square integrable.
    Marginal,
    Indecisive,
}

#[derive(Clone, Debug, Serialize)]
pub struct EndDiagnostics {
    pub exponent: EndSignal,
    /// Last tail slope of h; negative means integrable.
    pub slope: Option<f64>,
    pub quadrature: Option<EndSignal>,
    /// ∫|ψ|² from the anchor to the last window, normalized by the largest
    /// |ψ|² among a few points near the anchor.
    pub partial_integral: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FunctionVerdict {
    pub index: usize,
    /// `None` when indeterminate.
    #[serde(rename = "is_L2")]
    pub is_l2: Option<bool>,
    pub method: Option<Method>,
    pub integral_estimate: Option<f64>,
    /// The two methods reached opposite decisive verdicts.
    pub disagreement: bool,
    pub ends: [EndDiagnostics; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct NormVerdict {
    pub per_function: Vec<FunctionVerdict>,
    #[serde(rename = "sector_in_L2")]
    pub sector_in_l2: bool,
    pub max_normalizable_prefix: usize,
    pub indeterminate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    Unbroken,
    Broken,
    PartiallyBroken(usize),
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Unbroken => f.write_str("unbroken"),
            Classification::Broken => f.write_str("broken"),
            Classification::PartiallyBroken(k) => write!(f, "partially_broken({k})"),
        }
    }
}

impl Serialize for Classification {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Classified,
    Indeterminate,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdicts {
    pub minus: NormVerdict,
    pub plus: NormVerdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationCheck {
    pub truncation: usize,
    pub extended: usize,
    pub extended_classification: Option<Classification>,
    pub stable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BreakingReport {
    pub model: ModelId,
    pub mass: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub params: BTreeMap<String, String>,
    pub verdicts: Verdicts,
    /// `None` when `status` is indeterminate.
    pub classification: Option<Classification>,
    pub status: Status,
    pub truncation_check: Option<TruncationCheck>,
    pub paper_expected: Option<Classification>,
    #[serde(rename = "match")]
    pub matches: Option<bool>,
}

impl BreakingReport {
    pub fn verdict_minus(&self) -> &NormVerdict {
        &self.verdicts.minus
    }

    pub fn verdict_plus(&self) -> &NormVerdict {
        &self.verdicts.plus
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ClassifyOptions {
    /// Confirm exponent verdicts by windowed quadrature.
    pub quadrature: bool,
    /// Re-classify type-B models with two more flag entries.
    pub truncation_check: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { quadrature: true, truncation_check: true }
    }
}

impl ClassifyOptions {
    /// Exponent method only; for dense parameter sweeps.
    pub fn fast() -> Self {
        Self { quadrature: false, truncation_check: false }
    }
}

/// Interior reference point of a domain.
fn anchor((lo, hi): (f64, f64)) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + 1.0,
        (false, true) => hi - 1.0,
        (false, false) => 0.0,
    }
}

/// Largest of ln|ψ| over a few points near the anchor. The anchor itself may
/// be a node of ψ, so it cannot serve as the normalization point alone.
fn reference_level(ln_psi: &dyn Fn(Probe) -> f64, domain: (f64, f64), c: f64) -> f64 {
    let reach = [domain.0, domain.1].iter().map(|e| (e - c).abs()).fold(2.0f64, f64::min) * 0.5;
    [0.0, 0.37, -0.29, 0.61, -0.53]
        .iter()
        .map(|s| ln_psi(Probe::at(c + s * reach, domain.0, domain.1)))
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Probe at distance `d` from the anchor towards one end: `d` is the gap to a
/// finite end, or the offset from the anchor for an infinite one.
fn toward(domain: (f64, f64), c: f64, hi: bool, d: f64) -> Probe {
    let (lo, up) = domain;
    match (hi, if hi { up } else { lo }.is_finite()) {
        (true, true) => Probe::near_hi(lo, up, d),
        (false, true) => Probe::near_lo(lo, up, d),
        (true, false) => Probe::at(c + d, lo, up),
        (false, false) => Probe::at(c - d, lo, up),
    }
}

fn exponent_test(ln_psi: &dyn Fn(Probe) -> f64, domain: (f64, f64), c: f64, hi: bool) -> (EndSignal, Option<f64>) {
    let finite = if hi { domain.1 } else { domain.0 }.is_finite();
    let span = if hi { domain.1 - c } else { c - domain.0 };
    // (x, h) pairs along the tail.
    let samples: Vec<(f64, f64)> = if finite {
        (1..=SAMPLE_LEVELS)
            .map(|k| {
                let t = span * 2f64.powi(-k);
                (-t.ln(), 2.0 * ln_psi(toward(domain, c, hi, t)) + t.ln())
            })
            .collect()
    } else {
        (0..=SAMPLE_LEVELS)
            .map(|k| {
                let d = 2f64.powi(k);
                (d.ln(), 2.0 * ln_psi(toward(domain, c, hi, d)) + d.ln())
            })
            .collect()
    };
    // ln|ψ| is finite wherever ψ is representable in log form; infinities
    // only appear once the coordinate map itself underflows, so those samples
    // carry no information.
    let finite: Vec<(f64, f64)> = samples.into_iter().filter(|s| s.1.is_finite()).collect();
    let slopes: Vec<f64> = finite.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    let tail = &slopes[slopes.len().saturating_sub(SLOPE_WINDOW)..];
    let last = tail.last().copied();
    if tail.len() < 3 {
        return (EndSignal::Indecisive, last);
    }
    let signal = if tail.iter().all(|&s| s < -SLOPE_TOL) {
        EndSignal::Integrable
    } else if tail.iter().all(|&s| s > SLOPE_TOL) {
        EndSignal::Divergent
    } else if tail.iter().all(|&s| s.abs() <= SLOPE_TOL) {
        EndSignal::Marginal
    } else {
        EndSignal::Indecisive
    };
    (signal, last)
}

fn quadrature_test(ln_psi: &dyn Fn(Probe) -> f64, domain: (f64, f64), c: f64, hi: bool) -> (EndSignal, f64) {
    let finite = if hi { domain.1 } else { domain.0 }.is_finite();
    let l_ref = reference_level(ln_psi, domain, c);
    let density = |d: f64| {
        let l = ln_psi(toward(domain, c, hi, d));
        if l.is_finite() {
            (2.0 * (l - l_ref)).exp()
        } else {
            0.0
        }
    };
    // Window boundaries in the distance parameter d, moving outward.
    let marks: Vec<f64> = if finite {
        let span = if hi { domain.1 - c } else { c - domain.0 };
        (0..=QUAD_STEPS as i32 + 1).map(|k| if k == 0 { span } else { span * QUAD_SHRINK.powi(k) }).collect()
    } else {
        std::iter::once(0.0).chain((0..=QUAD_STEPS as i32).map(|k| QUAD_L0 * 2f64.powi(k))).collect()
    };
    let mut total = 0.0f64;
    let mut values = Vec::new();
    for w in marks.windows(2) {
        // A one-panel estimate sets the scale for a relative tolerance.
        let rough = integrate_with_error(density, w[0], w[1], f64::INFINITY).map_or(0.0, |r| r.0.abs());
        if !rough.is_finite() || density(w[1]) == f64::INFINITY {
            // |ψ|² overflows inside the window: relative growth beyond e^700.
            return (EndSignal::Divergent, f64::INFINITY);
        }
        let tol = 1e-11 * (total + rough).max(1e-30);
        let piece = match integrate_with_error(density, w[0], w[1], tol) {
            Ok((v, _)) => v.abs(),
            Err(_) => f64::INFINITY,
        };
        total += piece;
        values.push(total);
        if !total.is_finite() {
            return (EndSignal::Divergent, total);
        }
    }
    // Growth must persist through the last three windows; mass concentrated
    // near an integrable endpoint produces early growth that then stops.
    let growing = values.windows(2).rev().take(3).filter(|w| w[1] > GROWTH * w[0]).count();
    let n = values.len();
    if growing == 3 {
        (EndSignal::Divergent, total)
    } else if (values[n - 1] - values[n - 2]).abs() < QUAD_REL * values[n - 1] {
        (EndSignal::Integrable, total)
    } else {
        (EndSignal::Indecisive, total)
    }
}

/// Combines two endpoint signals into a decision for the whole function.
fn decide(a: EndSignal, b: EndSignal) -> Option<bool> {
    use EndSignal::*;
    match (a, b) {
        (Divergent | Marginal, _) | (_, Divergent | Marginal) => Some(false),
        (Integrable, Integrable) => Some(true),
        _ => None,
    }
}

/// L² verdict for one function given through its log-modulus on `domain`.
pub fn classify_function(
    index: usize,
    ln_psi: &dyn Fn(Probe) -> f64,
    domain: (f64, f64),
    opts: ClassifyOptions,
) -> FunctionVerdict {
    let c = anchor(domain);
    let mut ends: Vec<EndDiagnostics> = Vec::with_capacity(2);
    for hi in [false, true] {
        let (exponent, slope) = exponent_test(ln_psi, domain, c, hi);
        let (quadrature, partial_integral) = if opts.quadrature {
            let (s, v) = quadrature_test(ln_psi, domain, c, hi);
            (Some(s), Some(v))
        } else {
            (None, None)
        };
        ends.push(EndDiagnostics { exponent, slope, quadrature, partial_integral });
    }
    let by_exp = decide(ends[0].exponent, ends[1].exponent);
    let by_quad = match (ends[0].quadrature, ends[1].quadrature) {
        (Some(a), Some(b)) => decide(a, b),
        _ => None,
    };
    let (is_l2, method, disagreement) = match (by_exp, by_quad) {
        (Some(e), Some(q)) => (Some(e), Some(Method::Both), e != q),
        (Some(e), None) => (Some(e), Some(Method::Exponent), false),
        (None, Some(q)) => (Some(q), Some(Method::Quadrature), false),
        (None, None) => (None, None, false),
    };
    let integral_estimate =
        if by_quad == Some(true) { Some(ends.iter().filter_map(|e| e.partial_integral).sum()) } else { None };
    let [lo, hi]: [EndDiagnostics; 2] = ends.try_into().expect("two ends");
    FunctionVerdict { index, is_l2, method, integral_estimate, disagreement, ends: [lo, hi] }
}

/// Verdicts for every materialized function of one sector.
pub fn classify_sector(src: &dyn Sectors, side: Side, opts: ClassifyOptions) -> NormVerdict {
    let domain = src.domain();
    let per_function: Vec<FunctionVerdict> = (0..src.sector_len(side))
        .map(|j| classify_function(j, &|p| src.ln_entry(side, j, p).0, domain, opts))
        .collect();
    let sector_in_l2 = per_function.iter().all(|v| v.is_l2 == Some(true));
    let max_normalizable_prefix = per_function.iter().take_while(|v| v.is_l2 == Some(true)).count();
    let indeterminate = per_function.iter().any(|v| v.is_l2.is_none());
    NormVerdict { per_function, sector_in_l2, max_normalizable_prefix, indeterminate }
}

fn classification_of(src: &dyn Sectors, minus: &NormVerdict, plus: &NormVerdict) -> Option<Classification> {
    if minus.indeterminate || plus.indeterminate {
        return None;
    }
    Some(if minus.sector_in_l2 || plus.sector_in_l2 {
        Classification::Unbroken
    } else if src.has_flags() && minus.max_normalizable_prefix.max(plus.max_normalizable_prefix) >= 1 {
        Classification::PartiallyBroken(minus.max_normalizable_prefix.max(plus.max_normalizable_prefix))
    } else {
        Classification::Broken
    })
}

/// Classifies a constant-mass or PDM model from both sector verdicts.
pub fn classify_model(src: &dyn Sectors, opts: ClassifyOptions) -> BreakingReport {
    let minus = classify_sector(src, Side::Minus, opts);
    let plus = classify_sector(src, Side::Plus, opts);
    let classification = classification_of(src, &minus, &plus);
    let base = src.base();
    let truncation_check = (opts.truncation_check && base.id.is_type_b()).then(|| {
        let t = base.truncation;
        let ext = src.retruncated(t + 2);
        let inner = ClassifyOptions { truncation_check: false, ..opts };
        let (m2, p2) = (classify_sector(&*ext, Side::Minus, inner), classify_sector(&*ext, Side::Plus, inner));
        let extended_classification = classification_of(&*ext, &m2, &p2);
        TruncationCheck {
            truncation: t,
            extended: t + 2,
            extended_classification,
            stable: extended_classification == classification,
        }
    });
    let paper_expected = paper_expected(base, src.mass_id());
    let matches = paper_expected.map(|e| Some(e) == classification);
    BreakingReport {
        model: base.id,
        mass: src.mass_id().to_string(),
        n: base.n,
        params: base.params_text(),
        verdicts: Verdicts { minus, plus },
        classification,
        status: if classification.is_some() { Status::Classified } else { Status::Indeterminate },
        truncation_check,
        paper_expected,
        matches,
    }
}

/// The reference classification for a model and mass, where one is known.
pub fn paper_expected(model: &ModelInstance, mass_id: &str) -> Option<Classification> {
    use Classification::*;
    let p = |k: &str| model.param(k).map(to_f64).unwrap_or(0.0);
    let n = model.n as f64;
    let mass = if mass_id.starts_with("gauss2") { "gauss2" } else { mass_id };
    match (model.id, mass) {
        (ModelId::BRational, _) => {
            let (k, z0, b1) = (p("k"), p("z0"), p("b1"));
            Some(if 0.0 < b1 && b1 < k / z0 { Unbroken } else { Broken })
        }
        (ModelId::BTrig, "const") => {
            let (a, z0, b1) = (p("a"), p("z0"), p("b1"));
            let s = n * a * a / 2.0;
            let broken = b1 <= s * (z0 - 1.0) / (z0 + 1.0) || b1 >= s * (z0 + 1.0) / (z0 - 1.0);
            Some(if broken { Broken } else { Unbroken })
        }
        (ModelId::BTrig, "gauss2") => Some(Unbroken),
        (ModelId::BExp, "const") => {
            let b1 = p("b1");
            let k = (1..=model.n).rev().find(|&k| -n / 2.0 < b1 && b1 < (n + 1.0 - 2.0 * k as f64) / 2.0);
            Some(k.map_or(Broken, PartiallyBroken))
        }
        (ModelId::BExp, "algebraic_pole") => Some(Broken),
        (ModelId::BExp, "gauss2") => Some(Unbroken),
        (ModelId::X2Rational, _) => Some(Unbroken),
        (ModelId::X2Hyper, "const") => Some(Broken),
        (ModelId::X2Hyper, "sech2" | "gauss2") => Some(Unbroken),
        (ModelId::X2Exp, "const") => Some(if model.zeta() > 0.0 { Unbroken } else { Broken }),
        (ModelId::X2Exp, "algebraic_pole") => Some(Broken),
        (ModelId::X2Exp, "gauss2") => Some(Unbroken),
        _ => None,
    }
}

/// One row of the default Table 1 grid.
#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct Table1Row {
    pub model: ModelId,
    #[serde(rename = "N")]
    pub n: usize,
    pub params: BTreeMap<String, String>,
    pub masses: Vec<String>,
}

#[derive(Deserialize)]
struct Table1File {
    rows: Vec<Table1Row>,
}

pub fn table1_defaults() -> Vec<Table1Row> {
    let f: Table1File =
        serde_json::from_str(include_str!("../data/table1_defaults.json")).expect("bundled Table 1 defaults parse");
    f.rows
}

impl Table1Row {
    pub fn model(&self) -> Result<ModelInstance, ModelError> {
        let mut params = BTreeMap::new();
        for (k, v) in &self.params {
            let q: Q = parse_rational(v).map_err(|e| ModelError::Constraint(format!("parameter {k}: {e}")))?;
            params.insert(k.clone(), q);
        }
        ModelInstance::new(self.model, self.n, &params)
    }
}

/// Builds the model of one (row, mass) cell.
pub fn cell_system(row: &Table1Row, mass_id: &str) -> Result<Box<dyn Sectors>, ModelError> {
    let base = row.model()?;
    if mass_id == "const" {
        return Ok(Box::new(base));
    }
    let mass = MassProfile::from_id(mass_id, &BTreeMap::new())?;
    Ok(Box::new(PdmModelInstance::new(base, mass)?))
}

/// Classifies every cell of `rows` on up to `threads` worker threads, in row order.
pub fn table1(rows: &[Table1Row], threads: usize, opts: ClassifyOptions) -> Result<Vec<BreakingReport>, ModelError> {
    let jobs: Vec<(&Table1Row, &str)> =
        rows.iter().flat_map(|r| r.masses.iter().map(move |m| (r, m.as_str()))).collect();
    let results: Mutex<Vec<Option<Result<BreakingReport, ModelError>>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(row, mass)) = jobs.get(i) else { break };
                let r = cell_system(row, mass).map(|sys| classify_model(&*sys, opts));
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results.into_inner().unwrap().into_iter().map(|r| r.expect("every job ran")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_times_polynomial_is_l2() {
        // Log form throughout, as the model code supplies it.
        let f = |p: Probe| -p.x * p.x / 4.0 + (1.0 + p.x + p.x.powi(5)).abs().ln();
        let v = classify_function(0, &f, (f64::NEG_INFINITY, f64::INFINITY), ClassifyOptions::default());
        assert_eq!(v.is_l2, Some(true));
        assert_eq!(v.method, Some(Method::Both));
        let g = |p: Probe| -p.x * p.x / 4.0;
        let v = classify_function(0, &g, (f64::NEG_INFINITY, f64::INFINITY), ClassifyOptions::default());
        let exact = (2.0 * std::f64::consts::PI).sqrt();
        assert!((v.integral_estimate.unwrap() / exact - 1.0).abs() < 1e-8);
    }

    #[test]
    fn finite_end_powers() {
        let dom = (0.0, 1.0);
        let at = |p: f64| {
            let f = move |pr: Probe| p * pr.from_lo.ln();
            classify_function(0, &f, dom, ClassifyOptions::default())
        };
        assert_eq!(at(-0.4).is_l2, Some(true));
        assert_eq!(at(-0.6).is_l2, Some(false));
        assert_eq!(at(-0.5).is_l2, Some(false));
        assert_eq!(at(-0.5).ends[0].exponent, EndSignal::Marginal);
    }

    #[test]
    fn growing_exponential_diverges_by_both_methods() {
        let f = |p: Probe| 0.3 * p.x;
        let v = classify_function(0, &f, (f64::NEG_INFINITY, f64::INFINITY), ClassifyOptions::default());
        assert_eq!(v.is_l2, Some(false));
        assert_eq!(v.ends[1].quadrature, Some(EndSignal::Divergent));
        assert!(!v.disagreement);
    }

    #[test]
    fn classification_text() {
        assert_eq!(Classification::PartiallyBroken(2).to_string(), "partially_broken(2)");
        assert_eq!(serde_json::to_string(&Classification::Unbroken).unwrap(), "\"unbroken\"");
    }

    #[test]
    fn defaults_parse() {
        let rows = table1_defaults();
        assert_eq!(rows.len(), 7);
        for r in &rows {
            r.model().unwrap();
        }
    }
}
