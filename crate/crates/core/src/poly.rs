//! Dense univariate polynomials and rational functions over Q.

use crate::rational::{fmt_q, qi, to_f64, Q};
use num_traits::{One, Signed, Zero};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Polynomial with exact rational coefficients, indexed by degree.
///
/// The coefficient vector never carries trailing zeros, so structural
/// equality is mathematical equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct RationalPoly {
    coeffs: Vec<Q>,
}

impl RationalPoly {
    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(Q::one())
    }

    /// The variable `z`.
    pub fn z() -> Self {
        Self::monomial(Q::one(), 1)
    }

    pub fn constant(c: Q) -> Self {
        Self::from_coeffs(vec![c])
    }

    pub fn monomial(c: Q, k: usize) -> Self {
        let mut v = vec![Q::zero(); k + 1];
        v[k] = c;
        Self::from_coeffs(v)
    }

    pub fn from_coeffs(mut coeffs: Vec<Q>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_ints(c: &[i64]) -> Self {
        Self::from_coeffs(c.iter().map(|&x| qi(x)).collect())
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Q {
        self.coeffs.get(k).cloned().unwrap_or_else(Q::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Q {
        self.coeffs.last().cloned().unwrap_or_else(Q::zero)
    }

    pub fn derivative(&self) -> Self {
        Self::from_coeffs(self.coeffs.iter().enumerate().skip(1).map(|(k, c)| c * qi(k as i64)).collect())
    }

    pub fn nth_derivative(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |p, _| p.derivative())
    }

    pub fn scale(&self, c: &Q) -> Self {
        Self::from_coeffs(self.coeffs.iter().map(|x| x * c).collect())
    }

    /// Multiplies by `z^k`.
    pub fn shift(&self, k: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut v = vec![Q::zero(); k];
        v.extend(self.coeffs.iter().cloned());
        Self { coeffs: v }
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::one(), |acc, _| &acc * self)
    }

    pub fn eval(&self, x: &Q) -> Q {
        self.coeffs.iter().rev().fold(Q::zero(), |acc, c| acc * x + c)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + to_f64(c))
    }

    pub fn to_f64_coeffs(&self) -> Vec<f64> {
        self.coeffs.iter().map(to_f64).collect()
    }

    /// Euclidean division: `self = q * d + r` with `deg r < deg d`.
    pub fn div_rem(&self, d: &Self) -> (Self, Self) {
        assert!(!d.is_zero(), "polynomial division by zero");
        let dd = d.degree().unwrap();
        let lead = d.leading();
        let mut r = self.coeffs.clone();
        let Some(sd) = self.degree() else {
            return (Self::zero(), Self::zero());
        };
        if sd < dd {
            return (Self::zero(), self.clone());
        }
        let mut quot = vec![Q::zero(); sd - dd + 1];
        for k in (0..=sd - dd).rev() {
            let c = &r[k + dd] / &lead;
            if c.is_zero() {
                continue;
            }
            for (j, dc) in d.coeffs.iter().enumerate() {
                r[k + j] -= &c * dc;
            }
            quot[k] = c;
        }
        r.truncate(dd);
        (Self::from_coeffs(quot), Self::from_coeffs(r))
    }

    /// Exact quotient when `d` divides `self`.
    pub fn div_exact(&self, d: &Self) -> Option<Self> {
        let (q, r) = self.div_rem(d);
        r.is_zero().then_some(q)
    }

    /// Monic greatest common divisor (zero if both are zero).
    pub fn gcd(&self, other: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.div_rem(&b).1;
            a = b;
            b = r;
        }
        a.monic()
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let l = self.leading();
        self.scale(&(Q::one() / l))
    }

    /// Largest absolute coefficient (zero for the zero polynomial).
    pub fn max_abs_coeff(&self) -> Q {
        self.coeffs.iter().map(|c| c.abs()).max().unwrap_or_else(Q::zero)
    }
}

impl fmt::Display for RationalPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let (sign, mag) = if c.is_negative() { ("-", -c) } else { ("+", c.clone()) };
            if first {
                if sign == "-" {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let show_coeff = k == 0 || !mag.is_one();
            if show_coeff {
                write!(f, "{}", fmt_q(&mag))?;
            }
            match k {
                0 => {}
                1 => write!(f, "{}z", if show_coeff { "*" } else { "" })?,
                _ => write!(f, "{}z^{k}", if show_coeff { "*" } else { "" })?,
            }
        }
        Ok(())
    }
}

macro_rules! poly_binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&RationalPoly> for &RationalPoly {
            type Output = RationalPoly;
            fn $m(self, rhs: &RationalPoly) -> RationalPoly {
                let f: fn(&RationalPoly, &RationalPoly) -> RationalPoly = $body;
                f(self, rhs)
            }
        }
        impl $tr<RationalPoly> for RationalPoly {
            type Output = RationalPoly;
            fn $m(self, rhs: RationalPoly) -> RationalPoly {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&RationalPoly> for RationalPoly {
            type Output = RationalPoly;
            fn $m(self, rhs: &RationalPoly) -> RationalPoly {
                (&self).$m(rhs)
            }
        }
        impl $tr<RationalPoly> for &RationalPoly {
            type Output = RationalPoly;
            fn $m(self, rhs: RationalPoly) -> RationalPoly {
                self.$m(&rhs)
            }
        }
    };
}

poly_binop!(Add, add, |a, b| {
    let n = a.coeffs.len().max(b.coeffs.len());
    RationalPoly::from_coeffs((0..n).map(|k| a.coeff(k) + b.coeff(k)).collect())
});
poly_binop!(Sub, sub, |a, b| {
    let n = a.coeffs.len().max(b.coeffs.len());
    RationalPoly::from_coeffs((0..n).map(|k| a.coeff(k) - b.coeff(k)).collect())
});
poly_binop!(Mul, mul, |a, b| {
    if a.is_zero() || b.is_zero() {
        return RationalPoly::zero();
    }
    let mut v = vec![Q::zero(); a.coeffs.len() + b.coeffs.len() - 1];
    for (i, x) in a.coeffs.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.coeffs.iter().enumerate() {
            v[i + j] += x * y;
        }
    }
    RationalPoly::from_coeffs(v)
});

impl Neg for RationalPoly {
    type Output = RationalPoly;
    fn neg(self) -> RationalPoly {
        RationalPoly::from_coeffs(self.coeffs.into_iter().map(|c| -c).collect())
    }
}

impl Neg for &RationalPoly {
    type Output = RationalPoly;
    fn neg(self) -> RationalPoly {
        -(self.clone())
    }
}

/// Quotient of two polynomials kept in lowest terms with a monic denominator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalFunction {
    num: RationalPoly,
    den: RationalPoly,
}

impl RationalFunction {
    pub fn new(num: RationalPoly, den: RationalPoly) -> Self {
        assert!(!den.is_zero(), "rational function with zero denominator");
        if num.is_zero() {
            return Self::zero();
        }
        let g = num.gcd(&den);
        let (mut n, mut d) = (num.div_exact(&g).unwrap(), den.div_exact(&g).unwrap());
        let l = d.leading();
        if !l.is_one() {
            let inv = Q::one() / l;
            n = n.scale(&inv);
            d = d.scale(&inv);
        }
        Self { num: n, den: d }
    }

    pub fn zero() -> Self {
        Self { num: RationalPoly::zero(), den: RationalPoly::one() }
    }

    pub fn one() -> Self {
        Self::from_poly(RationalPoly::one())
    }

    pub fn constant(c: Q) -> Self {
        Self::from_poly(RationalPoly::constant(c))
    }

    pub fn from_poly(p: RationalPoly) -> Self {
        Self { num: p, den: RationalPoly::one() }
    }

    /// `1/p`.
    pub fn recip_poly(p: &RationalPoly) -> Self {
        Self::new(RationalPoly::one(), p.clone())
    }

    pub fn num(&self) -> &RationalPoly {
        &self.num
    }

    pub fn den(&self) -> &RationalPoly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// The polynomial this function equals, if the denominator is constant.
    pub fn as_poly(&self) -> Option<RationalPoly> {
        (self.den.degree() == Some(0)).then(|| self.num.scale(&(Q::one() / self.den.leading())))
    }

    pub fn derivative(&self) -> Self {
        let n = &self.num.derivative() * &self.den - &self.num * &self.den.derivative();
        Self::new(n, &self.den * &self.den)
    }

    pub fn scale(&self, c: &Q) -> Self {
        Self::new(self.num.scale(c), self.den.clone())
    }

    pub fn mul_poly(&self, p: &RationalPoly) -> Self {
        Self::new(&self.num * p, self.den.clone())
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero rational function");
        Self::new(self.den.clone(), self.num.clone())
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.num.eval_f64(x) / self.den.eval_f64(x)
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.degree() == Some(0) {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({}) / ({})", self.num, self.den)
        }
    }
}

macro_rules! rf_binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&RationalFunction> for &RationalFunction {
            type Output = RationalFunction;
            fn $m(self, rhs: &RationalFunction) -> RationalFunction {
                let f: fn(&RationalFunction, &RationalFunction) -> RationalFunction = $body;
                f(self, rhs)
            }
        }
        impl $tr<RationalFunction> for RationalFunction {
            type Output = RationalFunction;
            fn $m(self, rhs: RationalFunction) -> RationalFunction {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&RationalFunction> for RationalFunction {
            type Output = RationalFunction;
            fn $m(self, rhs: &RationalFunction) -> RationalFunction {
                (&self).$m(rhs)
            }
        }
        impl $tr<RationalFunction> for &RationalFunction {
            type Output = RationalFunction;
            fn $m(self, rhs: RationalFunction) -> RationalFunction {
                self.$m(&rhs)
            }
        }
    };
}

fn rf_addsub(a: &RationalFunction, b: &RationalFunction, sign: i64) -> RationalFunction {
    if a.den == b.den {
        let n = if sign > 0 { &a.num + &b.num } else { &a.num - &b.num };
        return RationalFunction::new(n, a.den.clone());
    }
    let g = a.den.gcd(&b.den);
    let ca = b.den.div_exact(&g).unwrap();
    let cb = a.den.div_exact(&g).unwrap();
    let n1 = &a.num * &ca;
    let n2 = &b.num * &cb;
    let n = if sign > 0 { n1 + n2 } else { n1 - n2 };
    RationalFunction::new(n, &a.den * &ca)
}

rf_binop!(Add, add, |a, b| rf_addsub(a, b, 1));
rf_binop!(Sub, sub, |a, b| rf_addsub(a, b, -1));
rf_binop!(Mul, mul, |a, b| {
    if a.is_zero() || b.is_zero() {
        return RationalFunction::zero();
    }
    RationalFunction::new(&a.num * &b.num, &a.den * &b.den)
});

impl Neg for RationalFunction {
    type Output = RationalFunction;
    fn neg(self) -> RationalFunction {
        RationalFunction { num: -self.num, den: self.den }
    }
}

impl Neg for &RationalFunction {
    type Output = RationalFunction;
    fn neg(self) -> RationalFunction {
        -(self.clone())
    }
}

impl From<RationalPoly> for RationalFunction {
    fn from(p: RationalPoly) -> Self {
        Self::from_poly(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn p(c: &[i64]) -> RationalPoly {
        RationalPoly::from_ints(c)
    }

    #[test]
    fn division_round_trips() {
        let a = p(&[1, -3, 0, 2, 5]);
        let d = p(&[2, 1, 3]);
        let (qq, r) = a.div_rem(&d);
        assert_eq!(&(&qq * &d) + &r, a);
        assert!(r.degree().unwrap() < 2);
    }

    #[test]
    fn gcd_is_monic_common_factor() {
        let f = p(&[1, 1]); // z + 1
        let a = &f * &p(&[-2, 0, 1]);
        let b = &f * &p(&[3, 7]);
        assert_eq!(a.gcd(&b), f);
    }

    #[test]
    fn rational_function_normal_form() {
        let r = RationalFunction::new(p(&[2, 2]), p(&[4, 4]));
        assert_eq!(r, RationalFunction::constant(q(1, 2)));
        let s = RationalFunction::new(p(&[1]), p(&[0, 1])); // 1/z
        let d = s.derivative();
        assert_eq!(d, RationalFunction::new(p(&[-1]), p(&[0, 0, 1])));
        let sum = &s + &(-&s);
        assert!(sum.is_zero());
    }

    #[test]
    fn display_is_readable() {
        assert_eq!(p(&[1, -1, 0, 2]).to_string(), "2*z^3 - z + 1");
        assert_eq!(RationalPoly::zero().to_string(), "0");
    }
}
