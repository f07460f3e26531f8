//! Exact dense linear algebra over Q and over Q(z).

use crate::poly::{RationalFunction, RationalPoly};
use crate::rational::{qi, Q};
use num_traits::{One, Zero};

/// Minimal field interface shared by exact scalars and rational functions.
pub trait Field: Clone {
    fn f_zero() -> Self;
    fn f_one() -> Self;
    fn f_is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
}

impl Field for Q {
    fn f_zero() -> Self {
        Zero::zero()
    }
    fn f_one() -> Self {
        One::one()
    }
    fn f_is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
}

impl Field for RationalFunction {
    fn f_zero() -> Self {
        RationalFunction::zero()
    }
    fn f_one() -> Self {
        RationalFunction::one()
    }
    fn f_is_zero(&self) -> bool {
        RationalFunction::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self * &o.recip()
    }
    fn neg(&self) -> Self {
        -self
    }
}

/// Determinant by Gaussian elimination with first-nonzero pivoting.
pub fn det<F: Field>(m: &[Vec<F>]) -> F {
    let n = m.len();
    let mut a: Vec<Vec<F>> = m.to_vec();
    let mut d = F::f_one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !a[r][col].f_is_zero()) else {
            return F::f_zero();
        };
        if p != col {
            a.swap(p, col);
            d = d.neg();
        }
        let piv = a[col][col].clone();
        d = d.mul(&piv);
        for r in col + 1..n {
            if a[r][col].f_is_zero() {
                continue;
            }
            let f = a[r][col].div(&piv);
            for c in col..n {
                let t = f.mul(&a[col][c]);
                a[r][c] = a[r][c].sub(&t);
            }
        }
    }
    d
}

/// Rank over the field.
pub fn rank<F: Field>(m: &[Vec<F>]) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut a: Vec<Vec<F>> = m.to_vec();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !a[i][c].f_is_zero()) else {
            continue;
        };
        a.swap(p, r);
        let piv = a[r][c].clone();
        for i in r + 1..rows {
            if a[i][c].f_is_zero() {
                continue;
            }
            let f = a[i][c].div(&piv);
            for j in c..cols {
                let t = f.mul(&a[r][j]);
                a[i][j] = a[i][j].sub(&t);
            }
        }
        r += 1;
        if r == rows {
            break;
        }
    }
    r
}

/// Square exact matrix.
pub type QMatrix = Vec<Vec<Q>>;

pub fn identity(n: usize) -> QMatrix {
    (0..n).map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect()).collect()
}

pub fn matmul(a: &QMatrix, b: &QMatrix) -> QMatrix {
    let n = a.len();
    let m = b.first().map_or(0, |r| r.len());
    let k = b.len();
    (0..n).map(|i| (0..m).map(|j| (0..k).fold(Q::zero(), |acc, t| acc + &a[i][t] * &b[t][j])).collect()).collect()
}

/// Monic characteristic polynomial det(xI − M) by the Faddeev–LeVerrier recursion.
pub fn char_poly(m: &QMatrix) -> RationalPoly {
    let n = m.len();
    let mut c = vec![Q::zero(); n + 1];
    c[n] = Q::one();
    let mut mk: QMatrix = vec![vec![Q::zero(); n]; n];
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = matmul(m, &mk);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += &c[n - k + 1];
        }
        let am = matmul(m, &next);
        let tr = (0..n).fold(Q::zero(), |acc, i| acc + &am[i][i]);
        c[n - k] = -tr / qi(k as i64);
        mk = next;
    }
    RationalPoly::from_coeffs(c)
}

/// Evaluates a polynomial at a square matrix (Horner).
pub fn poly_at_matrix(p: &RationalPoly, m: &QMatrix) -> QMatrix {
    let n = m.len();
    let mut acc: QMatrix = vec![vec![Q::zero(); n]; n];
    for c in p.coeffs().iter().rev() {
        acc = matmul(&acc, m);
        for (i, row) in acc.iter_mut().enumerate() {
            row[i] += c;
        }
    }
    acc
}

/// Expresses `target` in the span of `basis`.
///
/// Returns the coefficients of a particular solution together with the exact
/// residual `target − Σ cᵢ basisᵢ`, which is zero iff `target` lies in the span.
pub fn solve_in_span(basis: &[RationalPoly], target: &RationalPoly) -> (Vec<Q>, RationalPoly) {
    let nb = basis.len();
    let rows = basis.iter().filter_map(|b| b.degree()).chain(target.degree()).max().map_or(0, |d| d + 1);
    // Augmented system: rows are degrees, columns are basis elements then target.
    let mut a: Vec<Vec<Q>> = (0..rows)
        .map(|r| {
            let mut row: Vec<Q> = basis.iter().map(|b| b.coeff(r)).collect();
            row.push(target.coeff(r));
            row
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..nb {
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(p, r);
        let piv = a[r][c].clone();
        for j in c..=nb {
            a[r][j] = &a[r][j] / &piv;
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in c..=nb {
                    let t = &f * &a[r][j];
                    a[i][j] -= t;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let mut x = vec![Q::zero(); nb];
    for (row, &c) in pivots.iter().enumerate() {
        x[c] = a[row][nb].clone();
    }
    let mut res = target.clone();
    for (b, c) in basis.iter().zip(&x) {
        res = res - b.scale(c);
    }
    (x, res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn m(rows: &[&[i64]]) -> QMatrix {
        rows.iter().map(|r| r.iter().map(|&x| qi(x)).collect()).collect()
    }

    #[test]
    fn char_poly_of_2x2_matches_trace_det() {
        let a = m(&[&[1, 2], &[3, 4]]);
        let p = char_poly(&a);
        assert_eq!(p, RationalPoly::from_ints(&[-2, -5, 1]));
        assert_eq!(det(&a), qi(-2));
    }

    #[test]
    fn char_poly_1x1() {
        let a = vec![vec![q(5, 2)]];
        assert_eq!(char_poly(&a), RationalPoly::from_coeffs(vec![q(-5, 2), qi(1)]));
    }

    #[test]
    fn cayley_hamilton_on_3x3() {
        let a = m(&[&[2, -1, 0], &[1, 3, 5], &[0, 7, -2]]);
        let p = char_poly(&a);
        assert!(poly_at_matrix(&p, &a).iter().flatten().all(|x| x.is_zero()));
        assert_eq!(p.coeff(0), -det(&a));
    }

    #[test]
    fn span_solver_reports_residual() {
        let basis = vec![RationalPoly::from_ints(&[1]), RationalPoly::from_ints(&[0, 0, 1])];
        let (x, r) = solve_in_span(&basis, &RationalPoly::from_ints(&[3, 0, -2]));
        assert_eq!(x, vec![qi(3), qi(-2)]);
        assert!(r.is_zero());
        let (_, r) = solve_in_span(&basis, &RationalPoly::from_ints(&[0, 1]));
        assert_eq!(r, RationalPoly::from_ints(&[0, 1]));
    }
}
