//! Exact rational arithmetic helpers. All analysis arithmetic is exact;
//! floats appear only in the entropy report.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exact rational used throughout: annotations, costs, LP coefficients.
pub type Q = BigRational;

pub fn qint(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qzero() -> Q {
    Q::zero()
}

pub fn qone() -> Q {
    Q::one()
}

/// Render as `num/den` (the JSON wire form), e.g. `5/1`, `-3/2`.
pub fn q_wire(q: &Q) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Render compactly for human output: integers bare, otherwise `num/den`.
pub fn q_pretty(q: &Q) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parse a decimal or fractional literal: `5`, `5.0`, `2.5`, `-1.25`, `3/4`.
pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Q::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        let int_part: BigInt = if int == "-" || int.is_empty() {
            BigInt::zero()
        } else {
            int.parse().ok()?
        };
        if frac.is_empty() {
            return Some(Q::from_integer(int_part));
        }
        if !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let num: BigInt = frac.parse().ok()?;
        let den = BigInt::from(10u32).pow(frac.len() as u32);
        let frac_q = Q::new(num, den);
        let int_q = Q::from_integer(int_part.abs());
        let mag = int_q + frac_q;
        return Some(if neg { -mag } else { mag });
    }
    let n: BigInt = s.parse().ok()?;
    Some(Q::from_integer(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(parse_q("5.0").unwrap(), qint(5));
        assert_eq!(parse_q("2.5").unwrap(), Q::new(BigInt::from(5), BigInt::from(2)));
        assert_eq!(parse_q("-1.25").unwrap(), Q::new(BigInt::from(-5), BigInt::from(4)));
        assert_eq!(parse_q("3/4").unwrap(), Q::new(BigInt::from(3), BigInt::from(4)));
        assert_eq!(parse_q("-2").unwrap(), qint(-2));
        assert!(parse_q("1/0").is_none());
    }

    #[test]
    fn wire_format() {
        assert_eq!(q_wire(&qint(16)), "16/1");
        assert_eq!(q_pretty(&qint(16)), "16");
        assert_eq!(q_pretty(&parse_q("2.5").unwrap()), "5/2");
    }
}
