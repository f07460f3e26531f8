//! Gauged z-space: polynomial subspaces, second-order gauged Hamiltonians,
//! closure certificates, restricted matrices and gauged supercharges.
//!
//! Everything here is exact. A closure certificate either carries the
//! restricted matrix with a provably zero residual or the offending residual.

use crate::linalg::{self, det, rank, QMatrix};
use crate::poly::{RationalFunction, RationalPoly};
use crate::rational::{fmt_q, q, qi, Q};
use num_traits::{One, Zero};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum GaugedError {
    #[error("closure violated on basis element {index}: residual {residual}")]
    ClosureViolation { index: usize, residual: String },
    #[error("intertwining fails at monomial degree {degree}: residual {residual}")]
    IntertwiningFailure { degree: usize, residual: String },
    #[error("invalid gauged parameters: {0}")]
    Parameter(String),
    #[error("basis of {kind:?} is linearly dependent (rank {rank} < {dim})")]
    DependentBasis { kind: SubspaceKind, rank: usize, dim: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    fn sign(self) -> i64 {
        match self {
            Side::Minus => -1,
            Side::Plus => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Minus => "minus",
            Side::Plus => "plus",
        }
    }

    pub fn other(self) -> Self {
        match self {
            Side::Minus => Side::Plus,
            Side::Plus => Side::Minus,
        }
    }
}

/// f(z;α) = z² + 2(α−1)z + (α−1)α.
pub fn f_poly(alpha: &Q) -> RationalPoly {
    let am1 = alpha - Q::one();
    RationalPoly::from_coeffs(vec![&am1 * alpha, &am1 * qi(2), Q::one()])
}

/// φₙ(z;α) = (α+n−2)z^{n+1} + 2(α+n−1)(α−1)zⁿ + (α+n)(α−1)α z^{n−1}.
pub fn phi_poly(n: usize, alpha: &Q) -> RationalPoly {
    assert!(n >= 1);
    let nn = qi(n as i64);
    let am1 = alpha - Q::one();
    RationalPoly::monomial(alpha + &nn - qi(2), n + 1)
        + RationalPoly::monomial(qi(2) * (alpha + &nn - Q::one()) * &am1, n)
        + RationalPoly::monomial((alpha + &nn) * &am1 * alpha, n - 1)
}

/// χ̄ₙ(z;α) = (α−n)(α−n+1)z^{n+1} + 2(α−n−1)(α−n+1)(α−1)zⁿ + (α−n−1)(α−n)(α−1)α z^{n−1}.
pub fn chibar_poly(n: usize, alpha: &Q) -> RationalPoly {
    assert!(n >= 1);
    let nn = qi(n as i64);
    let am1 = alpha - Q::one();
    let amn = alpha - &nn;
    RationalPoly::monomial(&amn * (&amn + Q::one()), n + 1)
        + RationalPoly::monomial(qi(2) * (&amn - Q::one()) * (&amn + Q::one()) * &am1, n)
        + RationalPoly::monomial((&amn - Q::one()) * &amn * &am1 * alpha, n - 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SubspaceKind {
    /// ⟨1, z, …, z^{N−2}, z^N⟩
    TypeB,
    /// ⟨1, z, …, z^{k−1}⟩
    TypeA,
    /// z^{−1}⟨1, z², …, z^k⟩
    TypeBPlus,
    /// ⟨φ₁(z;α), …, φ_k(z;α)⟩
    X2Minus,
    /// ⟨χ̄₁(z;α+N), …, χ̄_k(z;α+N)⟩ f(z;α)^{−1} f(z;α+N)^{−1}
    X2Plus,
}

/// Finite ordered polynomial basis times a fixed rational prefactor.
#[derive(Clone, Debug)]
pub struct PolySubspace {
    pub kind: SubspaceKind,
    /// N of the operator family the space belongs to.
    pub n_fold: usize,
    pub alpha: Option<Q>,
    pub basis: Vec<RationalPoly>,
    pub prefactor: RationalFunction,
}

impl PolySubspace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Ṽ_N^{(B)} = ⟨1, …, z^{N−2}, z^N⟩.
    pub fn type_b(n: usize) -> Self {
        assert!(n >= 1);
        let mut basis: Vec<RationalPoly> =
            (0..n.saturating_sub(1)).map(|k| RationalPoly::monomial(Q::one(), k)).collect();
        basis.push(RationalPoly::monomial(Q::one(), n));
        Self { kind: SubspaceKind::TypeB, n_fold: n, alpha: None, basis, prefactor: RationalFunction::one() }
    }

    /// Ṽ_k^{(A)} = ⟨1, …, z^{k−1}⟩, a flag member for the type-B minus operator of order `n_fold`.
    pub fn type_a(k: usize, n_fold: usize) -> Self {
        let basis = (0..k).map(|j| RationalPoly::monomial(Q::one(), j)).collect();
        Self { kind: SubspaceKind::TypeA, n_fold, alpha: None, basis, prefactor: RationalFunction::one() }
    }

    /// V̄_k^+ = z^{−1}⟨1, z², …, z^k⟩; `k = N` gives the partner space of Ṽ_N^{(B)}.
    pub fn type_b_plus(k: usize, n_fold: usize) -> Self {
        let basis = std::iter::once(RationalPoly::one())
            .chain((2..=k).map(|j| RationalPoly::monomial(Q::one(), j)))
            .take(k)
            .collect();
        Self {
            kind: SubspaceKind::TypeBPlus,
            n_fold,
            alpha: None,
            basis,
            prefactor: RationalFunction::recip_poly(&RationalPoly::z()),
        }
    }

    pub fn x2_minus(k: usize, n_fold: usize, alpha: &Q) -> Self {
        let basis = (1..=k).map(|n| phi_poly(n, alpha)).collect();
        Self {
            kind: SubspaceKind::X2Minus,
            n_fold,
            alpha: Some(alpha.clone()),
            basis,
            prefactor: RationalFunction::one(),
        }
    }

    pub fn x2_plus(k: usize, n_fold: usize, alpha: &Q) -> Self {
        let an = alpha + qi(n_fold as i64);
        let basis = (1..=k).map(|n| chibar_poly(n, &an)).collect();
        let den = &f_poly(alpha) * &f_poly(&an);
        Self {
            kind: SubspaceKind::X2Plus,
            n_fold,
            alpha: Some(alpha.clone()),
            basis,
            prefactor: RationalFunction::recip_poly(&den),
        }
    }

    /// Basis elements including the prefactor.
    pub fn elements(&self) -> Vec<RationalFunction> {
        self.basis.iter().map(|b| self.prefactor.mul_poly(b)).collect()
    }

    /// Linear independence via the rank of the coefficient matrix.
    pub fn check_independent(&self) -> Result<(), GaugedError> {
        let rows = self.basis.iter().filter_map(|b| b.degree()).max().map_or(0, |d| d + 1);
        let m: Vec<Vec<Q>> = (0..rows).map(|r| self.basis.iter().map(|b| b.coeff(r)).collect()).collect();
        let rk = rank(&m);
        if rk == self.dim() {
            Ok(())
        } else {
            Err(GaugedError::DependentBasis { kind: self.kind, rank: rk, dim: self.dim() })
        }
    }
}

/// Parameters of the type-B family: A = Σ aᵢzⁱ, 2Q = −N a₃z² + 2b₁z − N a₁,
/// C = N(N−3)a₄z² + N(N−2)a₃z + c₀.
#[derive(Clone, Debug)]
pub struct TypeBParams {
    pub a: [Q; 5],
    pub b1: Q,
    pub c0: Q,
}

/// Parameters of the type-X₂ family with a₃ = a₄ = 0.
#[derive(Clone, Debug)]
pub struct X2Params {
    pub alpha: Q,
    pub a1: Q,
    pub a2: Q,
    pub c0: Q,
}

#[derive(Clone, Debug)]
pub enum Family {
    TypeB(TypeBParams),
    X2(X2Params),
}

/// H̄ = −A∂² + [((N−2)/2)A′ ± Q]∂ − C − (1±1)[((N−1)/2)Q′ − ½A′w̃ − Aw̃′].
#[derive(Clone, Debug)]
pub struct GaugedOperator {
    pub family: Family,
    pub n: usize,
    pub a: RationalPoly,
    pub q: RationalFunction,
    pub c: RationalFunction,
    pub wshift: RationalFunction,
    pub side: Side,
    first: RationalFunction,
    zeroth: RationalFunction,
}

impl GaugedOperator {
    fn assemble(
        family: Family,
        n: usize,
        a: RationalPoly,
        qf: RationalFunction,
        c: RationalFunction,
        wshift: RationalFunction,
        side: Side,
    ) -> Self {
        let s = side.sign();
        let ap: RationalFunction = a.derivative().into();
        let ar: RationalFunction = a.clone().into();
        let nm2 = q_half(n as i64 - 2);
        let first = ap.scale(&nm2) + qf.scale(&qi(s));
        let mut zeroth = -&c;
        if s > 0 {
            let extra = qf.derivative().scale(&q_half(n as i64 - 1))
                - (&ap * &wshift).scale(&q(1, 2))
                - &ar * &wshift.derivative();
            zeroth = zeroth - extra.scale(&qi(2));
        }
        Self { family, n, a, q: qf, c, wshift, side, first, zeroth }
    }

    pub fn type_b(n: usize, p: &TypeBParams, side: Side) -> Self {
        assert!(n >= 1);
        let nn = qi(n as i64);
        let a = RationalPoly::from_coeffs(p.a.to_vec());
        let qz = RationalPoly::from_coeffs(vec![-&nn * &p.a[1] / qi(2), p.b1.clone(), -&nn * &p.a[3] / qi(2)]);
        let c =
            RationalPoly::from_coeffs(vec![p.c0.clone(), &nn * (&nn - qi(2)) * &p.a[3], &nn * (&nn - qi(3)) * &p.a[4]]);
        let w = RationalFunction::new(RationalPoly::from_ints(&[-1]), RationalPoly::z());
        Self::assemble(Family::TypeB(p.clone()), n, a, qz.into(), c.into(), w, side)
    }

    /// Type X₂ with the linear coefficient of C fixed by exact closure: (N+1)a₂.
    pub fn type_x2(n: usize, p: &X2Params, side: Side) -> Result<Self, GaugedError> {
        assert!(n >= 1);
        let al = &p.alpha;
        if al <= &Q::one() {
            return Err(GaugedError::Parameter(format!("alpha = {} must exceed 1", fmt_q(al))));
        }
        let nn = qi(n as i64);
        let one = Q::one();
        let am1 = al - &one;
        let a = RationalPoly::from_coeffs(vec![&am1 * (al + &nn - &one) * &p.a2, p.a1.clone(), p.a2.clone()]);
        let d = RationalPoly::from_coeffs(vec![
            -(&am1) * (qi(2) * al + &nn - &one) * &p.a2 + al * &p.a1,
            -((qi(2) * al + &nn - qi(3)) * &p.a2 - &p.a1),
        ]);
        let f = f_poly(al);
        let d_over_f = RationalFunction::new(d.scale(&(qi(4) * &am1)), f.clone());
        let qpoly = RationalPoly::from_coeffs(vec![
            -(&am1) * (qi(3) * al + qi(3) * &nn - qi(7)) * &p.a2 + (qi(2) * al + &nn - qi(8)) * &p.a1 / qi(2),
            -(qi(3) * &p.a2 + &p.a1),
            -p.a2.clone(),
        ]);
        let qz = RationalFunction::from(qpoly) + d_over_f.clone();
        let cpoly = RationalPoly::from_coeffs(vec![p.c0.clone(), (&nn + &one) * &p.a2]);
        let c = RationalFunction::from(cpoly) - d_over_f;
        let fan = f_poly(&(al + &nn));
        let w = -(RationalFunction::new(f.derivative(), f.clone()).scale(&(&nn - &one)))
            - RationalFunction::new(fan.derivative(), fan);
        Ok(Self::assemble(Family::X2(p.clone()), n, a, qz, c, w, side))
    }

    pub fn with_side(&self, side: Side) -> Self {
        Self::assemble(
            self.family.clone(),
            self.n,
            self.a.clone(),
            self.q.clone(),
            self.c.clone(),
            self.wshift.clone(),
            side,
        )
    }

    /// Coefficients (of ∂², ∂, 1) as rational functions.
    pub fn coefficients(&self) -> [RationalFunction; 3] {
        [-RationalFunction::from(self.a.clone()), self.first.clone(), self.zeroth.clone()]
    }

    pub fn apply(&self, p: &RationalFunction) -> RationalFunction {
        let d1 = p.derivative();
        let d2 = d1.derivative();
        -(&RationalFunction::from(self.a.clone()) * &d2) + &self.first * &d1 + &self.zeroth * p
    }

    pub fn apply_poly(&self, p: &RationalPoly) -> RationalFunction {
        self.apply(&p.clone().into())
    }

    /// Logarithmic derivative G′/G = Q/A + N A′/(2A) of the conjugation that
    /// turns H̄⁺ into the operator intertwined with H̄⁻ by the monic charge.
    pub fn conjugation_log_derivative(&self) -> RationalFunction {
        let a: RationalFunction = self.a.clone().into();
        let ap: RationalFunction = self.a.derivative().into();
        let inv_a = a.recip();
        &self.q * &inv_a + (&ap * &inv_a).scale(&q(self.n as i64, 2))
    }

    /// e^{−h}∘H̄∘e^{h} for a given h′, applied to `g`.
    pub fn apply_conjugated(&self, hp: &RationalFunction, g: &RationalFunction) -> RationalFunction {
        let g1 = g.derivative();
        let g2 = g1.derivative();
        let a: RationalFunction = self.a.clone().into();
        let hh = hp.derivative() + hp * hp;
        let second = &g2 + &(&(hp * &g1).scale(&qi(2)) + &(&hh * g));
        let first = &g1 + &(hp * g);
        -(&a * &second) + &self.first * &first + &self.zeroth * g
    }
}

fn q_half(n: i64) -> Q {
    q(n, 2)
}

/// Restricted matrix: H̄·basisⱼ = Σᵢ entries[i][j]·basisᵢ exactly.
#[derive(Clone, Debug)]
pub struct RestrictedMatrix {
    pub entries: QMatrix,
    pub basis_ref: PolySubspace,
}

impl RestrictedMatrix {
    pub fn char_poly(&self) -> RationalPoly {
        linalg::char_poly(&self.entries)
    }

    /// P_N(M) = 0 check.
    pub fn cayley_hamilton_holds(&self) -> bool {
        let p = self.char_poly();
        linalg::poly_at_matrix(&p, &self.entries).iter().flatten().all(|x| x.is_zero())
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|r| r.iter().map(crate::rational::to_f64).collect()).collect()
    }
}

/// Certifies that `op` maps `space` into itself, returning the restricted matrix.
pub fn closure_certificate(op: &GaugedOperator, space: &PolySubspace) -> Result<RestrictedMatrix, GaugedError> {
    let inv_pref = space.prefactor.recip();
    let mut cols = Vec::with_capacity(space.dim());
    for (j, el) in space.elements().iter().enumerate() {
        let image = &op.apply(el) * &inv_pref;
        let Some(poly) = image.as_poly() else {
            // Not polynomial after stripping the prefactor: report the remainder.
            let (_, r) = image.num().div_rem(image.den());
            return Err(GaugedError::ClosureViolation {
                index: j,
                residual: RationalFunction::new(r, image.den().clone()).to_string(),
            });
        };
        let (coef, res) = linalg::solve_in_span(&space.basis, &poly);
        if !res.is_zero() {
            return Err(GaugedError::ClosureViolation { index: j, residual: res.to_string() });
        }
        cols.push(coef);
    }
    let n = space.dim();
    let entries = (0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect();
    Ok(RestrictedMatrix { entries, basis_ref: space.clone() })
}

/// Linear differential operator Σₖ cₖ(z) ∂ᵏ with rational coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugedCharge {
    pub coeffs: Vec<RationalFunction>,
}

/// First-order factor g ↦ r(z)·(g′ + s(z) g).
#[derive(Clone, Debug)]
pub struct FirstOrder {
    pub mult: RationalFunction,
    pub shift: RationalFunction,
}

impl GaugedCharge {
    pub fn identity() -> Self {
        Self { coeffs: vec![RationalFunction::one()] }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Left-composes with a first-order factor: F ∘ self.
    pub fn then(&self, f: &FirstOrder) -> Self {
        let n = self.coeffs.len();
        let mut out = vec![RationalFunction::zero(); n + 1];
        for (k, c) in self.coeffs.iter().enumerate() {
            // (∂ + s)(c ∂ᵏ) = c′∂ᵏ + c∂ᵏ⁺¹ + s c ∂ᵏ
            out[k] = &out[k] + &(c.derivative() + &f.shift * c);
            out[k + 1] = &out[k + 1] + c;
        }
        Self { coeffs: out.into_iter().map(|c| &f.mult * &c).collect() }
    }

    pub fn times(&self, r: &RationalFunction) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| r * c).collect() }
    }

    /// Product of factors; `factors[0]` acts first.
    pub fn from_factors(factors: &[FirstOrder]) -> Self {
        factors.iter().fold(Self::identity(), |acc, f| acc.then(f))
    }

    /// Monic operator whose kernel is spanned by `kernel`: Wr(b₁…b_N, g)/Wr(b₁…b_N).
    pub fn from_kernel(kernel: &[RationalFunction]) -> Self {
        let n = kernel.len();
        // derivs[i][r] = r-th derivative of kernel[i]
        let derivs: Vec<Vec<RationalFunction>> = kernel
            .iter()
            .map(|b| {
                let mut v = vec![b.clone()];
                for _ in 0..n {
                    let d = v.last().unwrap().derivative();
                    v.push(d);
                }
                v
            })
            .collect();
        let minor = |skip: usize| -> RationalFunction {
            let m: Vec<Vec<RationalFunction>> =
                (0..=n).filter(|&r| r != skip).map(|r| (0..n).map(|i| derivs[i][r].clone()).collect()).collect();
            det(&m)
        };
        let w = minor(n);
        let winv = w.recip();
        let coeffs = (0..=n)
            .map(|r| {
                let c = &minor(r) * &winv;
                if (r + n) % 2 == 1 {
                    -c
                } else {
                    c
                }
            })
            .collect();
        Self { coeffs }
    }

    /// Factorized type-B charge: (∂ − 1/z)∂^{N−1}.
    pub fn type_b_factorized(n: usize) -> Self {
        let d = FirstOrder { mult: RationalFunction::one(), shift: RationalFunction::zero() };
        let last = FirstOrder {
            mult: RationalFunction::one(),
            shift: RationalFunction::new(RationalPoly::from_ints(&[-1]), RationalPoly::z()),
        };
        let mut f = vec![d; n - 1];
        f.push(last);
        Self::from_factors(&f)
    }

    /// Factorized X₂ charge: f(α)/f(α+N) ∏ₖ [f(α+k+1)/f(α+k)](∂ − f′(α+k+1)/f(α+k+1)).
    pub fn x2_factorized(n: usize, alpha: &Q) -> Self {
        let fs: Vec<RationalPoly> = (0..=n).map(|k| f_poly(&(alpha + qi(k as i64)))).collect();
        let factors: Vec<FirstOrder> = (0..n)
            .map(|k| FirstOrder {
                mult: RationalFunction::new(fs[k + 1].clone(), fs[k].clone()),
                shift: -RationalFunction::new(fs[k + 1].derivative(), fs[k + 1].clone()),
            })
            .collect();
        Self::from_factors(&factors).times(&RationalFunction::new(fs[0].clone(), fs[n].clone()))
    }

    pub fn apply(&self, g: &RationalFunction) -> RationalFunction {
        let mut acc = RationalFunction::zero();
        let mut d = g.clone();
        for (k, c) in self.coeffs.iter().enumerate() {
            if k > 0 {
                d = d.derivative();
            }
            if !c.is_zero() {
                acc = &acc + &(c * &d);
            }
        }
        acc
    }
}

/// Outcome of the gauged intertwining check.
#[derive(Clone, Debug, Serialize)]
pub struct IntertwiningReport {
    pub degrees_checked: usize,
    /// Largest absolute numerator coefficient over all residuals, as `n/d`.
    pub max_residual: String,
    pub exact: bool,
}

/// Checks P H̄⁻ zᵏ = (G⁻¹ H̄⁺ G) P zᵏ for k = 0..=maxdeg exactly.
pub fn intertwining_check_gauged(
    op_minus: &GaugedOperator,
    op_plus: &GaugedOperator,
    charge: &GaugedCharge,
    maxdeg: usize,
) -> Result<IntertwiningReport, GaugedError> {
    let hp = op_plus.conjugation_log_derivative();
    let mut max = Q::zero();
    for k in 0..=maxdeg {
        let zk: RationalFunction = RationalPoly::monomial(Q::one(), k).into();
        let lhs = charge.apply(&op_minus.apply(&zk));
        let rhs = op_plus.apply_conjugated(&hp, &charge.apply(&zk));
        let res = &lhs - &rhs;
        if !res.is_zero() {
            return Err(GaugedError::IntertwiningFailure { degree: k, residual: res.to_string() });
        }
        let m = res.num().max_abs_coeff();
        if m > max {
            max = m;
        }
    }
    Ok(IntertwiningReport { degrees_checked: maxdeg + 1, max_residual: fmt_q(&max), exact: max.is_zero() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tb(a: [i64; 5], b1: Q, c0: Q) -> TypeBParams {
        TypeBParams { a: a.map(qi), b1, c0 }
    }

    #[test]
    fn apply_to_constant_gives_minus_c() {
        // N=2, A = z, Q = b1 z − 1 (a1 = 1); minus side on 1 is −C.
        let p = tb([0, 1, 0, 0, 0], q(1, 3), q(2, 5));
        let op = GaugedOperator::type_b(2, &p, Side::Minus);
        let out = op.apply_poly(&RationalPoly::one());
        assert_eq!(out, RationalFunction::constant(-q(2, 5)));
    }

    #[test]
    fn type_b_n1_closure_is_1x1() {
        let p = tb([1, 2, 3, 0, 0], q(1, 2), qi(1));
        let op = GaugedOperator::type_b(1, &p, Side::Minus);
        let m = closure_certificate(&op, &PolySubspace::type_b(1)).unwrap();
        assert_eq!(m.entries.len(), 1);
    }

    #[test]
    fn wrong_space_is_rejected() {
        let p = tb([1, 2, 3, 0, 0], q(1, 2), qi(1));
        let op = GaugedOperator::type_b(3, &p, Side::Minus);
        // ⟨1, z, z²⟩ with a mismatched N is not preserved when a4 ≠ 0.
        let p4 = tb([1, 2, 3, 1, 2], q(1, 2), qi(1));
        let op4 = GaugedOperator::type_b(3, &p4, Side::Minus);
        assert!(closure_certificate(&op, &PolySubspace::type_a(3, 3)).is_ok());
        assert!(matches!(
            closure_certificate(&op4, &PolySubspace::type_a(3, 3)),
            Err(GaugedError::ClosureViolation { .. })
        ));
    }

    #[test]
    fn kernel_charge_matches_type_b_factorization() {
        for n in 1..=4 {
            let sp = PolySubspace::type_b(n);
            let k = GaugedCharge::from_kernel(&sp.elements());
            assert_eq!(k, GaugedCharge::type_b_factorized(n), "N = {n}");
        }
    }

    #[test]
    fn kernel_charge_matches_x2_factorization() {
        let al = q(7, 3);
        for n in 1..=3 {
            let sp = PolySubspace::x2_minus(n, n, &al);
            let k = GaugedCharge::from_kernel(&sp.elements());
            assert_eq!(k, GaugedCharge::x2_factorized(n, &al), "N = {n}");
        }
    }

    #[test]
    fn x2_basis_degrees() {
        let al = qi(2);
        assert_eq!(phi_poly(3, &al).degree(), Some(4));
        assert_eq!(chibar_poly(2, &qi(5)).degree(), Some(3));
        PolySubspace::x2_plus(3, 3, &q(5, 2)).check_independent().unwrap();
    }
}
