//! Finite-difference spectra, eigenvalue membership of solvable sectors and
//! physical-space intertwining residuals.
//!
//! Two discretizations are provided. A generic PDM Hamiltonian
//! H = −½ d/dq (1/m) d/dq + U is symmetric in L²(dq) as written, so the
//! conservative three-point stencil gives a symmetric matrix directly.
//! Model sectors are solved in the constant-mass coordinate u instead,
//! where the pullback is unitary. Singular ends are handled by factoring
//! out the sector's Frobenius power, φ = t^s χ, which turns the problem
//! into a weighted Sturm–Liouville form with a zero-flux end.

use crate::gauged::{closure_certificate, GaugedError, Side};
use crate::mass::MassProfile;
use crate::models::{EndKind, ModelError, ModelInstance, PdmModelInstance, Sectors};
use crate::normalizability::{classify_sector, ClassifyOptions};
use crate::poly::{RationalFunction, RationalPoly};
use crate::probe::Probe;
use crate::rational::q;
use nalgebra::DMatrix;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Number of eigenvalues reported by default.
pub const DEFAULT_COUNT: usize = 20;
/// Relative edge amplitude below which a tracked eigenfunction counts as contained in the box.
pub const BOX_DECAY: f64 = 1e-12;
const BOX_L0: f64 = 8.0;
const BOX_DOUBLINGS: usize = 6;
const STENCIL_H: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("matrix is not symmetric: defect {0:e}")]
    NotSymmetric(f64),
    #[error("eigen iteration failed: {0}")]
    Eigen(String),
    #[error("bad grid: {0}")]
    Grid(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Gauged(#[from] GaugedError),
    #[error(
        "restricted eigenvalue {value} of a normalizable sector has no FD partner (nearest mismatch {mismatch:e})"
    )]
    MissingEigenvalue { value: f64, mismatch: f64, report: Box<MembershipReport> },
}

impl SpectralError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Self::NotSymmetric(_) => "E_NOT_SYMMETRIC",
            Self::Eigen(_) => "E_EIGEN",
            Self::Grid(_) => "E_GRID",
            Self::Unsupported(_) => "E_UNSUPPORTED",
            Self::Model(_) => "E_MODEL",
            Self::Gauged(_) => "E_GAUGED",
            Self::MissingEigenvalue { .. } => "E_MISSING_EIGENVALUE",
        }
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Clone, Debug)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    /// Builds from separately assembled upper and lower bands, rejecting any asymmetry.
    pub fn from_bands(diag: Vec<f64>, upper: Vec<f64>, lower: Vec<f64>) -> Result<Self, SpectralError> {
        if upper.len() + 1 != diag.len() || lower.len() != upper.len() {
            return Err(SpectralError::Grid("band lengths do not match".into()));
        }
        let defect = upper.iter().zip(&lower).map(|(u, l)| (u - l).abs()).fold(0.0, f64::max);
        if defect > 0.0 {
            return Err(SpectralError::NotSymmetric(defect));
        }
        if diag.iter().chain(&upper).any(|v| !v.is_finite()) {
            return Err(SpectralError::Grid("non-finite matrix entry".into()));
        }
        Ok(Self { diag, off: upper })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.diag.len() {
            let e2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            q = self.diag[i] - x - if i == 0 { 0.0 } else { e2 / q };
            if q == 0.0 {
                q = -f64::EPSILON * (self.diag[i].abs() + x.abs() + 1.0);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The lowest `k` eigenvalues, ascending, by bisection.
    pub fn lowest(&self, k: usize) -> Vec<f64> {
        let k = k.min(self.len());
        let (glo, ghi) = self.gershgorin();
        let mut out = Vec::with_capacity(k);
        let mut floor = glo;
        for j in 0..k {
            let (mut a, mut b) = (floor, ghi);
            while b - a > 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0) {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if self.count_below(mid) > j {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            let lam = 0.5 * (a + b);
            out.push(lam);
            floor = a;
        }
        out
    }

    /// Unit eigenvector for an eigenvalue estimate, by inverse iteration.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.len();
        let shift = lambda + 1e-10 * lambda.abs().max(1.0);
        let mut x = vec![1.0; n];
        for _ in 0..3 {
            x = self.solve_shifted(shift, &x);
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                break;
            }
            x.iter_mut().for_each(|v| *v /= norm);
        }
        x
    }

    fn solve_shifted(&self, s: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let tiny = f64::EPSILON * (s.abs() + 1.0);
        let mut den = self.diag[0] - s;
        if den.abs() < tiny {
            den = tiny;
        }
        c[0] = if n > 1 { self.off[0] / den } else { 0.0 };
        d[0] = rhs[0] / den;
        for i in 1..n {
            let mut den = self.diag[i] - s - self.off[i - 1] * c[i - 1];
            if den.abs() < tiny {
                den = tiny;
            }
            c[i] = if i + 1 < n { self.off[i] / den } else { 0.0 };
            d[i] = (rhs[i] - self.off[i - 1] * d[i - 1]) / den;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d
    }
}

/// Something that can be discretized at a given resolution.
pub trait FdProblem {
    /// Matrix and step for `n` unknowns.
    fn assemble(&self, n: usize) -> Result<(Tridiagonal, f64), SpectralError>;
    /// Number of unknowns whose step is closest to `h`.
    fn points_for_step(&self, h: f64) -> usize;
    fn extent(&self) -> (f64, f64);
}

/// Extent and resolution of a discretization.
#[derive(Clone, Debug, Serialize)]
pub struct GridInfo {
    #[serde(rename = "L")]
    pub l: (f64, f64),
    pub n: usize,
    pub h: f64,
    pub scheme: &'static str,
    pub box_converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumResult {
    pub grid: GridInfo,
    pub eigenvalues: Vec<f64>,
    pub richardson: Vec<f64>,
    pub certified_error: Vec<f64>,
}

/// Solves at `n` and at half the step, extrapolating the O(h²) error away.
pub fn richardson_spectrum(p: &dyn FdProblem, n: usize, count: usize) -> Result<SpectrumResult, SpectralError> {
    let (m1, h1) = p.assemble(n)?;
    let n2 = p.points_for_step(0.5 * h1);
    let (m2, h2) = p.assemble(n2)?;
    let l1 = m1.lowest(count);
    let l2 = m2.lowest(count);
    let (a, b) = (h1 * h1, h2 * h2);
    let richardson: Vec<f64> = l1.iter().zip(&l2).map(|(x, y)| (a * y - b * x) / (a - b)).collect();
    let certified_error = l1.iter().zip(&l2).map(|(x, y)| (y - x).abs() * b / (a - b)).collect();
    Ok(SpectrumResult {
        grid: GridInfo { l: p.extent(), n, h: h1, scheme: "second-order central", box_converged: true },
        eigenvalues: l1,
        richardson,
        certified_error,
    })
}

/// Measured convergence exponent of each eigenvalue from three successively halved grids.
pub fn convergence_order(p: &dyn FdProblem, n: usize, count: usize) -> Result<Vec<f64>, SpectralError> {
    let (m1, h1) = p.assemble(n)?;
    let (m2, h2) = p.assemble(p.points_for_step(0.5 * h1))?;
    let (m3, h3) = p.assemble(p.points_for_step(0.25 * h1))?;
    let (l1, l2, l3) = (m1.lowest(count), m2.lowest(count), m3.lowest(count));
    Ok((0..l1.len().min(l2.len()).min(l3.len()))
        .map(|i| solve_order((l1[i] - l2[i]) / (l2[i] - l3[i]), h1, h2, h3))
        .collect())
}

/// Exponent p with (h1^p − h2^p)/(h2^p − h3^p) = ratio.
fn solve_order(ratio: f64, h1: f64, h2: f64, h3: f64) -> f64 {
    if !ratio.is_finite() || ratio <= 1.0 {
        return f64::NAN;
    }
    let g = |p: f64| (h1.powf(p) - h2.powf(p)) / (h2.powf(p) - h3.powf(p)) - ratio;
    let (mut a, mut b) = (0.05, 12.0);
    if g(a) * g(b) > 0.0 {
        return f64::NAN;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(a) * g(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

/// A PDM Hamiltonian −½ d/dq (1/m) d/dq + U on a Dirichlet box.
#[derive(Clone)]
pub struct PdmHamiltonian {
    pub mass: MassProfile,
    pub potential: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub domain: (f64, f64),
}

impl fmt::Debug for PdmHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PdmHamiltonian").field("mass", &self.mass.id).field("domain", &self.domain).finish()
    }
}

impl PdmHamiltonian {
    pub fn new(mass: MassProfile, potential: impl Fn(f64) -> f64 + Send + Sync + 'static, domain: (f64, f64)) -> Self {
        Self { mass, potential: Arc::new(potential), domain }
    }

    /// The partner Hamiltonian of one side of a pulled-back model.
    pub fn from_model(pdm: &PdmModelInstance, side: Side) -> Self {
        let p = pdm.clone();
        Self::new(pdm.mass.clone(), move |q| p.u_potential(side, q), pdm.domain)
    }

    /// Restriction to the box `[lo, hi]` with Dirichlet walls.
    pub fn on_box(&self, lo: f64, hi: f64) -> Result<BoxedPdm<'_>, SpectralError> {
        if !(lo < hi && lo >= self.domain.0 && hi <= self.domain.1 && lo.is_finite() && hi.is_finite()) {
            return Err(SpectralError::Grid(format!("box [{lo}, {hi}] is not inside {:?}", self.domain)));
        }
        Ok(BoxedPdm { h: self, lo, hi })
    }
}

pub struct BoxedPdm<'a> {
    h: &'a PdmHamiltonian,
    lo: f64,
    hi: f64,
}

impl FdProblem for BoxedPdm<'_> {
    fn assemble(&self, n: usize) -> Result<(Tridiagonal, f64), SpectralError> {
        if n < 3 {
            return Err(SpectralError::Grid("need at least 3 points".into()));
        }
        let h = (self.hi - self.lo) / (n + 1) as f64;
        let x = |i: f64| self.lo + i * h;
        let inv_m = |i: f64| 1.0 / self.h.mass.m(x(i));
        let mut diag = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n - 1);
        let mut lower = Vec::with_capacity(n - 1);
        let h2 = h * h;
        for i in 1..=n {
            let fi = i as f64;
            diag.push(0.5 * (inv_m(fi - 0.5) + inv_m(fi + 0.5)) / h2 + (self.h.potential)(x(fi)));
            if i < n {
                upper.push(-0.5 * inv_m(fi + 0.5) / h2);
            }
            if i > 1 {
                lower.push(-0.5 * inv_m(fi - 0.5) / h2);
            }
        }
        Ok((Tridiagonal::from_bands(diag, upper, lower)?, h))
    }

    fn points_for_step(&self, h: f64) -> usize {
        (((self.hi - self.lo) / h).round() as usize).saturating_sub(1).max(3)
    }

    fn extent(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

/// Lowest `count` eigenvalues of a PDM Hamiltonian in a Dirichlet box, with Richardson extrapolation.
pub fn fd_spectrum(
    h: &PdmHamiltonian,
    lo: f64,
    hi: f64,
    n: usize,
    count: usize,
) -> Result<SpectrumResult, SpectralError> {
    richardson_spectrum(&h.on_box(lo, hi)?, n, count)
}

/// Boundary treatment of one end of the u-interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EndTreatment {
    /// Node-centred wall where φ = 0.
    Dirichlet,
    /// φ ~ t^s; the weighted flux vanishes at the end.
    Frobenius { s: f64 },
}

/// One side of a model, discretized in the constant-mass coordinate.
#[derive(Clone, Debug)]
pub struct SectorProblem {
    pub base: ModelInstance,
    pub side: Side,
    /// Discretized interval (infinite ends replaced by a box wall).
    pub lo: f64,
    pub hi: f64,
    pub ends: [EndTreatment; 2],
    pub kinds: [EndKind; 2],
}

/// Leading power of |φ| at a finite end of the constant-mass domain.
fn frobenius_power(base: &ModelInstance, side: Side, coeffs: &[f64], hi: bool) -> f64 {
    let (a, b) = base.domain0;
    let l = |t: f64| {
        let p = if hi { Probe::near_hi(a, b, t) } else { Probe::near_lo(a, b, t) };
        base.ln_with_poly(side, coeffs, p).0
    };
    let (t1, t2) = (1e-20f64, 1e-40f64);
    (l(t1) - l(t2)) / (t1.ln() - t2.ln())
}

impl SectorProblem {
    /// Sets up the side of `src`. At singular ends the lead function of
    /// `coeffs` fixes the Frobenius branch when `sector_branch` is set and it
    /// is square integrable there; otherwise the principal branch is used.
    pub fn new(src: &dyn Sectors, side: Side, coeffs: &[f64], sector_branch: bool) -> Self {
        let base = src.base().clone();
        let ((ulo, uhi), kinds) = src.u_interval();
        let treat = |k: EndKind, hi: bool| match k {
            EndKind::Singular => {
                let s = frobenius_power(&base, side, coeffs, hi);
                let s = if sector_branch && s > -0.5 { s } else { s.max(1.0 - s) };
                EndTreatment::Frobenius { s }
            }
            _ => EndTreatment::Dirichlet,
        };
        let ends = [treat(kinds[0], false), treat(kinds[1], true)];
        let (lo, hi) = match (ulo.is_finite(), uhi.is_finite()) {
            (true, true) => (ulo, uhi),
            (true, false) => (ulo, ulo + BOX_L0),
            (false, true) => (uhi - BOX_L0, uhi),
            (false, false) => (-BOX_L0, BOX_L0),
        };
        Self { base, side, lo, hi, ends, kinds }
    }

    fn offsets(&self) -> [f64; 2] {
        self.ends.map(|e| match e {
            EndTreatment::Dirichlet => 1.0,
            EndTreatment::Frobenius { .. } => 0.5,
        })
    }

    fn step(&self, n: usize) -> f64 {
        let [a, b] = self.offsets();
        (self.hi - self.lo) / (a + b + n as f64 - 1.0)
    }

    /// Node positions for `n` unknowns.
    pub fn nodes(&self, n: usize) -> Vec<f64> {
        let h = self.step(n);
        let a = self.offsets()[0];
        (0..n).map(|i| self.lo + (a + i as f64) * h).collect()
    }

    /// Doubles each infinite-end box wall until every bound eigenfunction
    /// among the lowest `track` has decayed below `BOX_DECAY` near the wall.
    pub fn fit_box(&mut self, n: usize, track: usize) -> Result<bool, SpectralError> {
        let h = self.step(n);
        let (ulo, uhi) = (self.kinds[0] == EndKind::Infinite, self.kinds[1] == EndKind::Infinite);
        if !ulo && !uhi {
            return Ok(true);
        }
        let centre = match (ulo, uhi) {
            (false, true) => self.lo,
            (true, false) => self.hi,
            _ => 0.0,
        };
        for _ in 0..=BOX_DOUBLINGS {
            let n_now = self.points_for_step(h);
            let (m, _) = self.assemble(n_now)?;
            let lams = m.lowest(track);
            let mut grow = [false, false];
            for &lam in &lams {
                let y = m.eigenvector(lam);
                let peak = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let band = (n_now / 16).max(2);
                for (end, infinite) in [(0usize, ulo), (1, uhi)] {
                    if !infinite {
                        continue;
                    }
                    let wall = if end == 0 { m.diag[0] } else { m.diag[n_now - 1] } - 1.0 / (h * h);
                    if lam >= wall {
                        continue;
                    }
                    let edge = if end == 0 { &y[..band] } else { &y[n_now - band..] };
                    let amp = edge.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    if amp > BOX_DECAY * peak {
                        grow[end] = true;
                    }
                }
            }
            if !grow[0] && !grow[1] {
                return Ok(true);
            }
            if grow[0] {
                self.lo = centre - 2.0 * (centre - self.lo);
            }
            if grow[1] {
                self.hi = centre + 2.0 * (self.hi - centre);
            }
        }
        Ok(false)
    }
}

impl FdProblem for SectorProblem {
    fn assemble(&self, n: usize) -> Result<(Tridiagonal, f64), SpectralError> {
        if n < 3 {
            return Err(SpectralError::Grid("need at least 3 points".into()));
        }
        let h = self.step(n);
        let [o_lo, o_hi] = self.offsets();
        let frob = |e: EndTreatment| match e {
            EndTreatment::Frobenius { s } => Some(s),
            EndTreatment::Dirichlet => None,
        };
        let (s_lo, s_hi) = (frob(self.ends[0]), frob(self.ends[1]));
        let last = n as f64 - 1.0;
        // Position index p runs over nodes (integers) and faces (half-integers).
        let gaps = |p: f64| ((o_lo + p) * h, (o_hi + last - p) * h);
        let ln_r = |p: f64| {
            let (ta, tb) = gaps(p);
            2.0 * (s_lo.map_or(0.0, |s| s * ta.ln()) + s_hi.map_or(0.0, |s| s * tb.ln()))
        };
        let potential = |p: f64| {
            let (ta, tb) = gaps(p);
            let x = if ta <= tb { self.lo + ta } else { self.hi - tb };
            let mut w = self.base.v0(self.side, x);
            let mut drift = 0.0;
            if let Some(s) = s_lo {
                w += 0.5 * s / (ta * ta);
                drift += s / ta;
            }
            if let Some(s) = s_hi {
                w += 0.5 * s / (tb * tb);
                drift -= s / tb;
            }
            w - 0.5 * drift * drift
        };
        let h2 = h * h;
        let mut diag = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n - 1);
        let mut lower = Vec::with_capacity(n - 1);
        for i in 0..n {
            let p = i as f64;
            let lr = ln_r(p);
            let face_lo = i > 0 || s_lo.is_none();
            let face_hi = i + 1 < n || s_hi.is_none();
            let mut d = 0.0;
            if face_lo {
                d += (ln_r(p - 0.5) - lr).exp();
            }
            if face_hi {
                d += (ln_r(p + 0.5) - lr).exp();
            }
            diag.push(0.5 * d / h2 + potential(p));
            if i + 1 < n {
                upper.push(-0.5 * (ln_r(p + 0.5) - 0.5 * (lr + ln_r(p + 1.0))).exp() / h2);
            }
            if i > 0 {
                lower.push(-0.5 * (ln_r(p - 0.5) - 0.5 * (ln_r(p - 1.0) + lr)).exp() / h2);
            }
        }
        Ok((Tridiagonal::from_bands(diag, upper, lower)?, h))
    }

    fn points_for_step(&self, h: f64) -> usize {
        let [a, b] = self.offsets();
        (((self.hi - self.lo) / h - a - b + 1.0).round() as usize).max(3)
    }

    fn extent(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

/// Settings for model spectra.
#[derive(Clone, Copy, Debug)]
pub struct SpectralOptions {
    /// Unknowns on the initial box; box growth keeps the step fixed.
    pub n: usize,
    pub count: usize,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { n: 4000, count: DEFAULT_COUNT }
    }
}

/// The tested space of one side: the full sector when it is square
/// integrable, else its largest normalizable flag prefix, else the full
/// (non-normalizable) sector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SpaceChoice {
    pub prefix: Option<usize>,
    pub normalizable: bool,
}

pub fn space_choice(src: &dyn Sectors, side: Side) -> SpaceChoice {
    let base = src.base();
    let verdict = classify_sector(src, side, ClassifyOptions::default());
    let full_len = if base.id.is_type_b() && side == Side::Minus { base.n + 1 } else { base.n };
    let k = verdict.max_normalizable_prefix;
    if verdict.indeterminate {
        SpaceChoice { prefix: None, normalizable: false }
    } else if k >= full_len {
        SpaceChoice { prefix: None, normalizable: true }
    } else if src.has_flags() && k >= 1 {
        SpaceChoice { prefix: Some(k.min(base.n)), normalizable: true }
    } else {
        SpaceChoice { prefix: None, normalizable: false }
    }
}

/// The discretized side, with the Frobenius branch of its sector when that sector is normalizable.
pub fn side_problem(src: &dyn Sectors, side: Side) -> (SectorProblem, SpaceChoice) {
    let choice = space_choice(src, side);
    let lead = src.base().gauged_space(side, choice.prefix).basis[0].to_f64_coeffs();
    (SectorProblem::new(src, side, &lead, choice.normalizable), choice)
}

/// Richardson-extrapolated spectrum of one side of a model, with an adapted box.
pub fn model_spectrum(src: &dyn Sectors, side: Side, opts: SpectralOptions) -> Result<SpectrumResult, SpectralError> {
    let (mut p, _) = side_problem(src, side);
    spectrum_of(&mut p, opts)
}

fn spectrum_of(p: &mut SectorProblem, opts: SpectralOptions) -> Result<SpectrumResult, SpectralError> {
    let h0 = p.step(opts.n);
    let converged = p.fit_box(opts.n, opts.count.min(8))?;
    let n = p.points_for_step(h0);
    let mut r = richardson_spectrum(p, n, opts.count)?;
    r.grid.box_converged = converged;
    Ok(r)
}

/// A restricted-matrix eigenvalue and its closest FD partner.
#[derive(Clone, Debug, Serialize)]
pub struct EigenMatch {
    pub restricted: f64,
    pub imaginary: f64,
    /// Shifted value compared against the spectrum.
    pub shifted: f64,
    pub fd: Option<f64>,
    pub mismatch: f64,
    pub present: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MembershipReport {
    pub model: String,
    pub mass: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub params: BTreeMap<String, String>,
    pub side: Side,
    /// Size of the flag prefix used, when a proper prefix was tested.
    pub prefix: Option<usize>,
    pub space_dim: usize,
    /// Whether the tested space is square integrable.
    pub normalizable: bool,
    pub offset: f64,
    pub tolerance: f64,
    pub matches: Vec<EigenMatch>,
    pub all_present: bool,
    pub spectrum: SpectrumResult,
}

/// Eigenvalues of a small real matrix, sorted by real part.
pub fn matrix_eigenvalues(m: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let n = m.len();
    if n == 0 {
        return Vec::new();
    }
    let a = DMatrix::from_fn(n, n, |i, j| m[i][j]);
    let mut ev: Vec<(f64, f64)> = a.complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect();
    ev.sort_by(|x, y| x.0.total_cmp(&y.0));
    ev
}

/// Chooses the constant c minimizing the worst distance of `targets + c` to `spectrum`,
/// trying each spectrum value as the partner of the lowest target.
pub fn fit_offset(targets: &[f64], spectrum: &[f64]) -> (f64, f64) {
    let worst = |c: f64| {
        targets
            .iter()
            .map(|t| spectrum.iter().map(|e| (e - t - c).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    let Some(&t0) = targets.first() else { return (0.0, 0.0) };
    spectrum.iter().map(|e| (e - t0, worst(e - t0))).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap_or((0.0, f64::INFINITY))
}

/// Checks that the restricted-matrix eigenvalues of a sector, or of its
/// largest normalizable prefix, appear in the FD spectrum of the same side.
/// A normalizable space with a missing eigenvalue is an error; otherwise
/// presence or absence is only recorded.
pub fn verify_eigen_membership(
    src: &dyn Sectors,
    side: Side,
    tol: f64,
    opts: SpectralOptions,
) -> Result<MembershipReport, SpectralError> {
    let base = src.base();
    let (mut problem, SpaceChoice { prefix, normalizable }) = side_problem(src, side);
    let op = base
        .gauged_operator(side)
        .ok_or_else(|| SpectralError::Unsupported("restricted matrix needs rational parameters".into()))?;
    let space = base.gauged_space(side, prefix);
    let mat = closure_certificate(&op, &space)?.to_f64();
    let eig = matrix_eigenvalues(&mat);
    let count = opts.count.max(space.dim() + 4);
    let spectrum = spectrum_of(&mut problem, SpectralOptions { count, ..opts })?;
    let real: Vec<f64> = eig.iter().filter(|e| e.1.abs() <= 1e-9 * (1.0 + e.0.abs())).map(|e| e.0).collect();
    let (offset, _) = fit_offset(&real, &spectrum.richardson);
    let matches: Vec<EigenMatch> = eig
        .iter()
        .map(|&(re, im)| {
            let shifted = re + offset;
            let best =
                spectrum.richardson.iter().copied().min_by(|a, b| (a - shifted).abs().total_cmp(&(b - shifted).abs()));
            let mismatch = best.map_or(f64::INFINITY, |e| (e - shifted).abs()) + im.abs();
            EigenMatch { restricted: re, imaginary: im, shifted, fd: best, mismatch, present: mismatch < tol }
        })
        .collect();
    let all_present = matches.iter().all(|m| m.present);
    let report = MembershipReport {
        model: base.id.to_string(),
        mass: src.mass_id().to_string(),
        n: base.n,
        params: base.params_text(),
        side,
        prefix,
        space_dim: space.dim(),
        normalizable,
        offset,
        tolerance: tol,
        matches,
        all_present,
        spectrum,
    };
    if normalizable && !all_present {
        let worst = report.matches.iter().max_by(|a, b| a.mismatch.total_cmp(&b.mismatch)).unwrap();
        return Err(SpectralError::MissingEigenvalue {
            value: worst.restricted,
            mismatch: worst.mismatch,
            report: Box::new(report),
        });
    }
    Ok(report)
}

/// Pairing of the spectra of H⁻ and H⁺ once the kernel-sector levels are removed.
#[derive(Clone, Debug, Serialize)]
pub struct PairingReport {
    pub removed: Vec<f64>,
    pub minus: Vec<f64>,
    pub plus: Vec<f64>,
    /// |E⁻ − E⁺| minus the combined certified error, per pair.
    pub excess: Vec<f64>,
    pub paired: bool,
}

/// Compares the non-sector levels of both partners for a model whose
/// solvable sector on `side` is normalizable.
pub fn isospectral_pairing(
    src: &dyn Sectors,
    side: Side,
    pairs: usize,
    slack: f64,
    opts: SpectralOptions,
) -> Result<PairingReport, SpectralError> {
    let own = verify_eigen_membership(src, side, 1e-3, opts)?;
    let other = model_spectrum(src, side.other(), opts)?;
    let removed: Vec<f64> = own.matches.iter().filter_map(|m| m.fd).collect();
    let keep = |s: &SpectrumResult, skip: &[f64]| -> Vec<(f64, f64)> {
        s.richardson
            .iter()
            .zip(&s.certified_error)
            .filter(|(e, _)| !skip.iter().any(|r| (*r - **e).abs() < 1e-9 * (1.0 + r.abs())))
            .map(|(e, c)| (*e, *c))
            .take(pairs)
            .collect()
    };
    let a = keep(&own.spectrum, &removed);
    let b = keep(&other, &[]);
    let excess: Vec<f64> = a.iter().zip(&b).map(|(x, y)| ((x.0 - y.0).abs() - x.1 - y.1).max(0.0)).collect();
    let paired = excess.len() == pairs && excess.iter().all(|e| *e <= slack);
    let (minus, plus) = match side {
        Side::Minus => (a, b),
        Side::Plus => (b, a),
    };
    Ok(PairingReport {
        removed,
        minus: minus.into_iter().map(|x| x.0).collect(),
        plus: plus.into_iter().map(|x| x.0).collect(),
        excess,
        paired,
    })
}

/// Finite-difference realization of the physical charge P_N (N ≤ 2) and of
/// both partner Hamiltonians on a uniform grid.
pub struct PhysicalCharge<'a> {
    src: &'a dyn Sectors,
    kernel: Vec<Vec<f64>>,
    exact: Option<GaugeData>,
}

/// Rational data of the minus gauge: z_u² = 2A(z) and d ln G/du = R(z)/z_u.
struct GaugeData {
    a: RationalPoly,
    ap: RationalPoly,
    r: RationalFunction,
    rp: RationalFunction,
    /// Kernel polynomials with their first two z-derivatives.
    polys: Vec<[RationalPoly; 3]>,
}

const D1: [f64; 9] =
    [1.0 / 280.0, -4.0 / 105.0, 1.0 / 5.0, -4.0 / 5.0, 0.0, 4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
const D2: [f64; 9] =
    [-1.0 / 560.0, 8.0 / 315.0, -1.0 / 5.0, 8.0 / 5.0, -205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];

impl<'a> PhysicalCharge<'a> {
    pub fn new(src: &'a dyn Sectors) -> Result<Self, SpectralError> {
        let n = src.n();
        if !(1..=2).contains(&n) {
            return Err(SpectralError::Unsupported(format!("physical charge for N = {n}; only N ≤ 2")));
        }
        let space = src.base().gauged_space(Side::Minus, None);
        let exact = src.base().gauged_operator(Side::Minus).map(|op| {
            let [_, first, _] = op.coefficients();
            let ap = op.a.derivative();
            let r = -(first + RationalFunction::from(ap.clone()).scale(&q(1, 2)));
            let polys = space.basis.iter().map(|b| [b.clone(), b.derivative(), b.derivative().derivative()]).collect();
            GaugeData { a: op.a.clone(), ap, rp: r.derivative(), r, polys }
        });
        Ok(Self { src, kernel: space.basis.iter().map(|b| b.to_f64_coeffs()).collect(), exact })
    }

    /// Kernel functions divided by m^{1/4}G with their first two q-derivatives,
    /// from the rational gauge data.
    fn exact_scaled_kernel(&self, g: &GaugeData, q: f64) -> Vec<[f64; 3]> {
        let (lo, hi) = self.src.domain();
        let base = self.src.base();
        let u_of = |x: f64| self.src.to_u(Probe::at(x, lo, hi));
        let z = base.z_at(u_of(q)).val;
        // Orientation of z along q, from a nearby pair of points.
        let d = 1e-6 * (1.0 + q.abs());
        let dir = (base.z_at(u_of((q + d).min(0.5 * (q + hi)))).val - base.z_at(u_of((q - d).max(0.5 * (q + lo)))).val)
            .signum();
        let (mu1, mu2) = self.src.mass_log_derivs(q);
        let m = self.src.ln_mass(q).exp();
        let (av, apv) = (g.a.eval_f64(z), g.ap.eval_f64(z));
        let zu = dir * (2.0 * av).sqrt();
        let (rv, rpv) = (g.r.eval_f64(z), g.rp.eval_f64(z));
        let lu = rv / zu;
        let luu = rpv - rv * apv / (2.0 * av);
        // q-derivatives: u′ = √m, u″ = √m μ₁/2.
        let (u1, u2) = (m.sqrt(), m.sqrt() * mu1 / 2.0);
        let lq = lu * u1 + 0.25 * mu1;
        let lqq = luu * u1 * u1 + lu * u2 + 0.25 * (mu2 - mu1 * mu1);
        let zq = zu * u1;
        let zqq = apv * m + zu * u2;
        g.polys
            .iter()
            .map(|[p0, p1, p2]| {
                let (p, pz, pzz) = (p0.eval_f64(z), p1.eval_f64(z), p2.eval_f64(z));
                let (pq, pqq) = (pz * zq, pzz * zq * zq + pz * zqq);
                [p, pq + lq * p, pqq + 2.0 * lq * pq + (lqq + lq * lq) * p]
            })
            .collect()
    }

    /// ln|ψ_j| of kernel function `j`.
    pub fn ln_kernel(&self, j: usize, q: f64) -> f64 {
        let (lo, hi) = self.src.domain();
        self.src.ln_combination(Side::Minus, &self.kernel[j], Probe::at(q, lo, hi)).0
    }

    pub fn kernel_value(&self, j: usize, q: f64) -> f64 {
        let (lo, hi) = self.src.domain();
        let (l, s) = self.src.ln_combination(Side::Minus, &self.kernel[j], Probe::at(q, lo, hi));
        s * l.exp()
    }

    /// Eighth-order first and second derivatives of `f` at `q`, with the stencil kept inside the domain.
    fn derivs(&self, f: &dyn Fn(f64) -> f64, q: f64) -> (f64, f64, f64) {
        let (lo, hi) = self.src.domain();
        let h = STENCIL_H.min(0.1 * (q - lo)).min(0.1 * (hi - q));
        let vals: Vec<f64> = (0..9).map(|i| f(q + (i as f64 - 4.0) * h)).collect();
        let d1 = vals.iter().zip(D1).map(|(v, c)| v * c).sum::<f64>() / h;
        let d2 = vals.iter().zip(D2).map(|(v, c)| v * c).sum::<f64>() / (h * h);
        (vals[4], d1, d2)
    }

    /// Kernel functions and their first two derivatives at `q`, all divided
    /// by the common gauge factor e^L so that nodes and extreme magnitudes are harmless.
    fn scaled_kernel(&self, q: f64) -> Vec<[f64; 3]> {
        let (lo, hi) = self.src.domain();
        let ln_gauge = |x: f64| self.src.ln_combination(Side::Minus, &[1.0], Probe::at(x, lo, hi)).0;
        let (_, l1, l2) = self.derivs(&ln_gauge, q);
        let g0 = ln_gauge(q);
        self.kernel
            .iter()
            .map(|c| {
                let poly = |x: f64| {
                    let (l, s) = self.src.ln_combination(Side::Minus, c, Probe::at(x, lo, hi));
                    s * (l - ln_gauge(x) + g0 - ln_gauge(q)).exp()
                };
                let (p, p1, p2) = self.derivs(&poly, q);
                [p, p1 + l1 * p, p2 + 2.0 * l1 * p1 + (l2 + l1 * l1) * p]
            })
            .collect()
    }

    /// Coefficients (a₀, a₁) with P g = m^{−N/2}(g″ + a₁ g′ + a₀ g) for N = 2,
    /// and P g = m^{−1/2}(g′ + a₀ g) for N = 1.
    pub fn coefficients(&self, q: f64) -> (f64, f64) {
        let k = match &self.exact {
            Some(g) => self.exact_scaled_kernel(g, q),
            None => self.scaled_kernel(q),
        };
        if k.len() == 1 {
            return (-k[0][1] / k[0][0], 0.0);
        }
        let [p, p1, p2] = k[0];
        let [r, r1, r2] = k[1];
        let w = p * r1 - r * p1;
        ((p1 * r2 - r1 * p2) / w, -(p * r2 - r * p2) / w)
    }

    /// Applies P to grid values `g` at nodes `x`; the first and last node are left at zero.
    pub fn apply(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        let h = x[1] - x[0];
        let mut out = vec![0.0; g.len()];
        for i in 1..g.len() - 1 {
            let (a0, a1) = self.coefficients(x[i]);
            let d1 = (g[i + 1] - g[i - 1]) / (2.0 * h);
            let m = self.src.ln_mass(x[i]).exp();
            out[i] = if self.kernel.len() == 1 {
                (d1 + a0 * g[i]) / m.sqrt()
            } else {
                let d2 = (g[i + 1] - 2.0 * g[i] + g[i - 1]) / (h * h);
                (d2 + a1 * d1 + a0 * g[i]) / m
            };
        }
        out
    }

    /// Applies H = −½ (g′/m)′ + U g of one side; end nodes left at zero.
    pub fn hamiltonian(&self, side: Side, x: &[f64], g: &[f64]) -> Vec<f64> {
        let h = x[1] - x[0];
        let inv_m = |q: f64| (-self.src.ln_mass(q)).exp();
        let mut out = vec![0.0; g.len()];
        for i in 1..g.len() - 1 {
            let flux_hi = (g[i + 1] - g[i]) * inv_m(x[i] + 0.5 * h);
            let flux_lo = (g[i] - g[i - 1]) * inv_m(x[i] - 0.5 * h);
            out[i] = -0.5 * (flux_hi - flux_lo) / (h * h) + self.src.potential(side, x[i]) * g[i];
        }
        out
    }
}

fn central_d1(g: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    for i in 1..g.len() - 1 {
        out[i] = (g[i + 1] - g[i - 1]) / (2.0 * h);
    }
    out
}

fn central_d2(g: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    for i in 1..g.len() - 1 {
        out[i] = (g[i + 1] - 2.0 * g[i] + g[i - 1]) / (h * h);
    }
    out
}

impl PhysicalCharge<'_> {
    /// (P H⁻ − H⁺ P) f at unit mass with the common principal part
    /// (D₂D₂ for N = 2, D₁D₂ for N = 1) removed before evaluation. The grid
    /// operators agree on it exactly, so only its rounding noise is lost.
    fn unit_mass_residual(&self, x: &[f64], f: &[f64]) -> Vec<f64> {
        let h = x[1] - x[0];
        let um: Vec<f64> = x.iter().map(|&q| self.src.potential(Side::Minus, q)).collect();
        let up: Vec<f64> = x.iter().map(|&q| self.src.potential(Side::Plus, q)).collect();
        let coef: Vec<(f64, f64)> = x.iter().map(|&q| self.coefficients(q)).collect();
        let n_fold = self.kernel.len();
        // Lower-order part A of P: P = D_N + A.
        let lower = |g: &[f64]| -> Vec<f64> {
            let d1 = central_d1(g, h);
            (0..g.len())
                .map(|i| if n_fold == 2 { coef[i].1 * d1[i] + coef[i].0 * g[i] } else { coef[i].0 * g[i] })
                .collect()
        };
        let leading = |g: &[f64]| if n_fold == 2 { central_d2(g, h) } else { central_d1(g, h) };
        let uf: Vec<f64> = (0..f.len()).map(|i| um[i] * f[i]).collect();
        let d2f = central_d2(f, h);
        let af = lower(f);
        let half_d2f: Vec<f64> = d2f.iter().map(|v| -0.5 * v).collect();
        let t1 = leading(&uf);
        let t2 = lower(&half_d2f);
        let t3 = lower(&uf);
        let t4 = central_d2(&af, h);
        let dnf = leading(f);
        (0..f.len()).map(|i| t1[i] + t2[i] + t3[i] + 0.5 * t4[i] - up[i] * dnf[i] - up[i] * af[i]).collect()
    }
}

/// Uniform grid of `n` interior nodes strictly inside `(a, b)`.
pub fn uniform_nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / (n + 1) as f64;
    (1..=n).map(|i| a + i as f64 * h).collect()
}

fn l2_norm(v: &[f64], h: f64) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() * h).sqrt()
}

/// ‖(P H⁻ − H⁺ P) f‖ / ‖f‖ on `n` nodes of `(a, b)`, evaluated away from the two outermost nodes.
pub fn intertwine_residual_physical(
    src: &dyn Sectors,
    f: &dyn Fn(f64) -> f64,
    range: (f64, f64),
    n: usize,
) -> Result<f64, SpectralError> {
    let (lo, hi) = src.domain();
    if !(range.0 >= lo && range.1 <= hi && range.0 < range.1) || n < 16 {
        return Err(SpectralError::Grid(format!("range {range:?} with {n} nodes does not fit {:?}", (lo, hi))));
    }
    let p = PhysicalCharge::new(src)?;
    let x = uniform_nodes(range.0, range.1, n);
    let h = x[1] - x[0];
    let fv: Vec<f64> = x.iter().map(|&q| f(q)).collect();
    let r: Vec<f64> = if src.mass_id() == "const" {
        let full = p.unit_mass_residual(&x, &fv);
        full[2..n - 2].to_vec()
    } else {
        let left = p.apply(&x, &p.hamiltonian(Side::Minus, &x, &fv));
        let right = p.hamiltonian(Side::Plus, &x, &p.apply(&x, &fv));
        (2..n - 2).map(|i| left[i] - right[i]).collect()
    };
    Ok(l2_norm(&r, h) / l2_norm(&fv, h))
}

/// Residuals on successively halved grids.
#[derive(Clone, Debug, Serialize)]
pub struct RefinementReport {
    pub n: Vec<usize>,
    pub residual: Vec<f64>,
    /// Ratio of consecutive residuals.
    pub reduction: Vec<f64>,
    /// Every halving reduced the residual at least 3.5-fold, consistent with O(h²).
    pub second_order: bool,
}

impl RefinementReport {
    pub fn finest(&self) -> f64 {
        *self.residual.last().unwrap_or(&f64::NAN)
    }
}

/// Intertwining residual on `levels` grids, starting at `n` nodes and halving the step each time.
pub fn intertwine_refinement(
    src: &dyn Sectors,
    f: &dyn Fn(f64) -> f64,
    range: (f64, f64),
    n: usize,
    levels: usize,
) -> Result<RefinementReport, SpectralError> {
    let mut ns = vec![n];
    for _ in 1..levels.max(2) {
        ns.push(2 * ns.last().unwrap() + 1);
    }
    let residual = ns.iter().map(|&k| intertwine_residual_physical(src, f, range, k)).collect::<Result<Vec<_>, _>>()?;
    let reduction: Vec<f64> = residual.windows(2).map(|w| w[0] / w[1]).collect();
    let second_order = reduction.iter().all(|r| *r >= 3.5);
    Ok(RefinementReport { n: ns, residual, reduction, second_order })
}

/// ‖P ψ_j‖ / ‖ψ_j′‖ for kernel function `j` on `n` nodes of `range`.
pub fn kernel_residual(src: &dyn Sectors, j: usize, range: (f64, f64), n: usize) -> Result<f64, SpectralError> {
    let p = PhysicalCharge::new(src)?;
    if j >= p.kernel.len() {
        return Err(SpectralError::Grid(format!("kernel has {} functions", p.kernel.len())));
    }
    let x = uniform_nodes(range.0, range.1, n);
    let h = x[1] - x[0];
    let psi: Vec<f64> = x.iter().map(|&q| p.kernel_value(j, q)).collect();
    let out = p.apply(&x, &psi);
    let dpsi: Vec<f64> = (1..n - 1).map(|i| (psi[i + 1] - psi[i - 1]) / (2.0 * h)).collect();
    Ok(l2_norm(&out[1..n - 1], h) / l2_norm(&dpsi, h).max(l2_norm(&psi, h)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sturm_count_on_a_diagonal_matrix() {
        let t = Tridiagonal::from_bands(vec![3.0, 1.0, 2.0], vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(t.count_below(1.5), 1);
        assert_eq!(t.count_below(10.0), 3);
        let l = t.lowest(3);
        assert!((l[0] - 1.0).abs() < 1e-14 && (l[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn asymmetric_bands_are_rejected() {
        let r = Tridiagonal::from_bands(vec![1.0, 1.0], vec![0.5], vec![0.5 + 1e-9]);
        assert!(matches!(r, Err(SpectralError::NotSymmetric(_))));
    }

    #[test]
    fn discrete_laplacian_levels() {
        // −½ d²/dx² on (0, π) with Dirichlet walls: E = k²/2.
        let h = PdmHamiltonian::new(MassProfile::constant(), |_| 0.0, (f64::NEG_INFINITY, f64::INFINITY));
        let r = fd_spectrum(&h, 0.0, std::f64::consts::PI, 400, 3).unwrap();
        for (k, e) in r.richardson.iter().enumerate() {
            let want = 0.5 * ((k + 1) * (k + 1)) as f64;
            assert!((e - want).abs() < 1e-7, "{e} vs {want}");
        }
    }

    #[test]
    fn inverse_iteration_returns_an_eigenvector() {
        let t = Tridiagonal::from_bands(vec![2.0; 50], vec![-1.0; 49], vec![-1.0; 49]).unwrap();
        let lam = t.lowest(1)[0];
        let v = t.eigenvector(lam);
        let mut worst = 0.0f64;
        for i in 0..50 {
            let mut av = t.diag[i] * v[i];
            if i > 0 {
                av += t.off[i - 1] * v[i - 1];
            }
            if i + 1 < 50 {
                av += t.off[i] * v[i + 1];
            }
            worst = worst.max((av - lam * v[i]).abs());
        }
        assert!(worst < 1e-10);
    }

    #[test]
    fn offset_fit_uses_all_targets() {
        let (c, w) = fit_offset(&[0.0, 1.0], &[5.0, 5.5, 6.0]);
        assert!((c - 5.0).abs() < 1e-15 && w < 1e-15);
    }
}
