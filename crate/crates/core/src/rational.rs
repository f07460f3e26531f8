//! Exact rational scalars and parsing helpers.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::str::FromStr;

/// Exact rational scalar used throughout the gauged algebra.
pub type Q = BigRational;

/// `n/d` as an exact rational. Panics if `d == 0`.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Integer as an exact rational.
pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn to_f64(x: &Q) -> f64 {
    match (x.numer().to_f64(), x.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // Huge numerator or denominator: scale both down before dividing.
            let nb = x.numer().bits() as i64;
            let db = x.denom().bits() as i64;
            let shift = (nb.max(db) - 1000).max(0) as usize;
            let n = (x.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let d = (x.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            n / d
        }
    }
}

/// Error produced by [`parse_rational`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse `{0}` as an exact rational")]
pub struct ParseRationalError(pub String);

/// Parses `"3"`, `"-3/4"`, `"0.125"` or `"1.5e-2"` into an exact rational.
///
/// Decimal input is read digit by digit, so `"0.1"` is exactly 1/10.
pub fn parse_rational(s: &str) -> Result<Q, ParseRationalError> {
    let err = || ParseRationalError(s.to_string());
    let t = s.trim();
    if t.is_empty() {
        return Err(err());
    }
    if let Some((a, b)) = t.split_once('/') {
        let n = BigInt::from_str(a.trim()).map_err(|_| err())?;
        let d = BigInt::from_str(b.trim()).map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Q::new(n, d));
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], i32::from_str(&t[i + 1..]).map_err(|_| err())?),
        None => (t, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{int_part}{frac_part}");
    let n = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| err())?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut v = Q::from_integer(n);
    if scale >= 0 {
        v *= Q::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        v /= Q::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -v } else { v })
}

/// Exact rational square root, if one exists.
pub fn sqrt_exact(x: &Q) -> Option<Q> {
    if x.is_negative() {
        return None;
    }
    let n = x.numer().sqrt();
    let d = x.denom().sqrt();
    if &(&n * &n) == x.numer() && &(&d * &d) == x.denom() {
        Some(Q::new(n, d))
    } else {
        None
    }
}

/// Compact display: integers print bare, others as `n/d`.
pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_rational("0.1").unwrap(), q(1, 10));
        assert_eq!(parse_rational("-2.5e-1").unwrap(), q(-1, 4));
        assert_eq!(parse_rational(" 3/6 ").unwrap(), q(1, 2));
        assert_eq!(parse_rational("7").unwrap(), qi(7));
        assert_eq!(parse_rational(".5").unwrap(), q(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn exact_square_roots() {
        assert_eq!(sqrt_exact(&q(9, 16)), Some(q(3, 4)));
        assert_eq!(sqrt_exact(&qi(3)), None);
        assert_eq!(sqrt_exact(&qi(-4)), None);
    }

    #[test]
    fn float_conversion_survives_huge_terms() {
        let big = Q::new(num_traits::pow(BigInt::from(10), 400), num_traits::pow(BigInt::from(10), 399));
        assert!((to_f64(&big) - 10.0).abs() < 1e-12);
    }
}
