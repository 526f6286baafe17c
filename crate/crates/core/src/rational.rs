//! Exact rational helpers shared by every module.
//!
//! All thresholds, measures and ratios are [`Rational`] values; hot loops use
//! the small [`Frac`] pair and cross-multiplication instead.

use std::cmp::Ordering;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational number in lowest terms with a positive denominator.
pub type Rational = BigRational;

/// Builds `num/den`; panics on a zero denominator.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: u64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `"p/q"`, `"p"` or a plain decimal such as `"0.25"`.
pub fn parse_rational(text: &str) -> std::result::Result<Rational, String> {
    let t = text.trim();
    if let Some((n, d)) = t.split_once('/') {
        let num: BigInt = n
            .trim()
            .parse()
            .map_err(|_| format!("bad numerator in {t:?}"))?;
        let den: BigInt = d
            .trim()
            .parse()
            .map_err(|_| format!("bad denominator in {t:?}"))?;
        if den.is_zero() {
            return Err(format!("zero denominator in {t:?}"));
        }
        return Ok(Rational::new(num, den));
    }
    if let Some((whole, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("bad decimal {t:?}"));
        }
        let negative = whole.starts_with('-');
        let digits = format!("{}{}", whole.trim_start_matches(['-', '+']), frac);
        let mut num: BigInt = digits.parse().map_err(|_| format!("bad decimal {t:?}"))?;
        if negative {
            num = -num;
        }
        let den = num_traits::pow(BigInt::from(10), frac.len());
        return Ok(Rational::new(num, den));
    }
    let num: BigInt = t.parse().map_err(|_| format!("bad rational {t:?}"))?;
    Ok(Rational::from_integer(num))
}

/// Canonical `p/q` text (integers print without a denominator only when q = 1).
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Decimal rendering rounded half-to-even at `places` fractional digits.
pub fn to_decimal(r: &Rational, places: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), places);
    let scaled = r.abs() * Rational::from_integer(scale);
    let floor = scaled.floor();
    let rem = &scaled - &floor;
    let half = rat(1, 2);
    let mut q = floor.to_integer();
    match rem.cmp(&half) {
        Ordering::Greater => q += 1,
        Ordering::Equal if q.is_odd() => q += 1,
        _ => {}
    }
    let digits = q.to_string();
    let digits = if digits.len() <= places {
        format!("{}{}", "0".repeat(places + 1 - digits.len()), digits)
    } else {
        digits
    };
    let (int_part, frac_part) = digits.split_at(digits.len() - places);
    let sign = if r.is_negative() && !q.is_zero() {
        "-"
    } else {
        ""
    };
    if places == 0 {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    }
}

/// Splits a nonnegative rational into `u64` numerator/denominator.
pub fn to_u64_pair(r: &Rational, field: &str) -> Result<(u64, u64)> {
    if r.numer().sign() == Sign::Minus {
        return Err(Error::invalid(field, "must be nonnegative"));
    }
    match (r.numer().to_u64(), r.denom().to_u64()) {
        (Some(n), Some(d)) => Ok((n, d)),
        _ => Err(Error::invalid(
            field,
            "numerator/denominator exceed 64 bits",
        )),
    }
}

/// Ratio of two cell counts as an exact rational.
pub fn count_ratio(num: u64, den: u64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Least `m >= 0` with `base^m >= target`, decided by exact powers.
///
/// Requires `base > 1`; that is, the certified value of `ceil(log_base target)`
/// clamped below at zero.
pub fn ceil_log(base: &Rational, target: &Rational) -> u64 {
    assert!(base > &Rational::one(), "ceil_log needs base > 1");
    let mut m = 0u64;
    let mut power = Rational::one();
    while &power < target {
        power *= base;
        m += 1;
    }
    m
}

/// Small nonnegative fraction of cell counts compared by cross-multiplication.
///
/// A zero denominator marks "no value" (a cell no element reaches) and
/// orders below every real value.
#[derive(Debug, Clone, Copy, Default)]
pub struct Frac {
    pub num: u32,
    pub den: u32,
}

impl Frac {
    pub const NONE: Frac = Frac { num: 0, den: 0 };

    pub fn new(num: u32, den: u32) -> Self {
        debug_assert!(den > 0 && num <= den);
        Frac { num, den }
    }

    pub fn is_none(self) -> bool {
        self.den == 0
    }

    /// Lowest-terms form; `NONE` stays `NONE`.
    pub fn reduced(self) -> Self {
        if self.den == 0 {
            return self;
        }
        let g = self.num.gcd(&self.den);
        Frac {
            num: self.num / g,
            den: self.den / g,
        }
    }

    /// Exact value, with `NONE` read as zero.
    pub fn to_rational(self) -> Rational {
        if self.den == 0 {
            Rational::zero()
        } else {
            count_ratio(self.num as u64, self.den as u64)
        }
    }
}

impl PartialEq for Frac {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Frac {}

impl PartialOrd for Frac {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frac {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.den == 0, other.den == 0) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            _ => (self.num as u64 * other.den as u64).cmp(&(other.num as u64 * self.den as u64)),
        }
    }
}

/// Exact comparison threshold `num/den` with strict or non-strict semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Threshold {
    num: u64,
    den: u64,
    strict: bool,
}

impl Threshold {
    pub fn new(theta: &Rational, strict: bool) -> Result<Self> {
        if theta.is_negative() || theta > &Rational::one() {
            return Err(Error::invalid("theta", "threshold must lie in [0, 1]"));
        }
        let (num, den) = to_u64_pair(theta, "theta")?;
        Ok(Threshold { num, den, strict })
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// Whether `hits/size` passes the threshold.
    #[inline]
    pub fn passes(&self, hits: u64, size: u64) -> bool {
        let lhs = hits as u128 * self.den as u128;
        let rhs = self.num as u128 * size as u128;
        if self.strict {
            lhs > rhs
        } else {
            lhs >= rhs
        }
    }

    #[inline]
    pub fn passes_frac(&self, f: Frac) -> bool {
        if f.is_none() {
            // unreached cells hold the value zero
            return self.passes(0, 1);
        }
        self.passes(f.num as u64, f.den as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_rounds_half_even() {
        assert_eq!(to_decimal(&rat(4, 3), 12), "1.333333333333");
        assert_eq!(to_decimal(&rat(2, 3), 12), "0.666666666667");
        assert_eq!(to_decimal(&rat(1, 8), 2), "0.12");
        assert_eq!(to_decimal(&rat(3, 8), 2), "0.38");
        assert_eq!(to_decimal(&rat(5, 2), 0), "2");
        assert_eq!(to_decimal(&rat(-1, 4), 1), "-0.2");
        assert_eq!(to_decimal(&rat(0, 1), 3), "0.000");
    }

    #[test]
    fn parses_fraction_integer_and_decimal() {
        assert_eq!(parse_rational("101/100").unwrap(), rat(101, 100));
        assert_eq!(parse_rational("4/8").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("3").unwrap(), rat(3, 1));
        assert_eq!(parse_rational("0.25").unwrap(), rat(1, 4));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn ceil_log_by_powers() {
        assert_eq!(ceil_log(&rat(2, 1), &rat(5, 1)), 3);
        assert_eq!(ceil_log(&rat(2, 1), &rat(4, 1)), 2);
        assert_eq!(ceil_log(&rat(2, 1), &rat(1, 2)), 0);
        assert_eq!(ceil_log(&rat(2, 1), &rat(1, 1)), 0);
    }

    #[test]
    fn frac_ordering_is_exact() {
        assert_eq!(Frac::new(1, 2), Frac::new(2, 4));
        assert!(Frac::new(1, 3) < Frac::new(1, 2));
        assert!(Frac::NONE < Frac::new(0, 5));
        assert_eq!(Frac::new(6, 8).reduced().num, 3);
    }

    #[test]
    fn threshold_strictness() {
        let half = Threshold::new(&rat(1, 2), true).unwrap();
        assert!(!half.passes(2, 4));
        assert!(half.passes(3, 5));
        let half_ns = Threshold::new(&rat(1, 2), false).unwrap();
        assert!(half_ns.passes(2, 4));
        assert!(Threshold::new(&rat(3, 2), false).is_err());
    }
}

/// Serde adapter writing rationals as `"p/q"` strings and reading strings or integers.
pub mod serde_q {
    use super::*;
    use serde::{de, Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Int(i) => Ok(rat(i, 1)),
            Raw::Text(t) => parse_rational(&t).map_err(de::Error::custom),
        }
    }

    pub mod opt {
        use super::*;
        use serde::Serialize;

        pub fn serialize<S: Serializer>(
            r: &Option<Rational>,
            s: S,
        ) -> std::result::Result<S::Ok, S::Error> {
            r.as_ref().map(format_rational).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> std::result::Result<Option<Rational>, D::Error> {
            match Option::<Raw>::deserialize(d)? {
                None => Ok(None),
                Some(Raw::Int(i)) => Ok(Some(rat(i, 1))),
                Some(Raw::Text(t)) => parse_rational(&t).map(Some).map_err(de::Error::custom),
            }
        }
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(
            v: &[Rational],
            s: S,
        ) -> std::result::Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for r in v {
                seq.serialize_element(&format_rational(r))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> std::result::Result<Vec<Rational>, D::Error> {
            Vec::<Raw>::deserialize(d)?
                .into_iter()
                .map(|raw| match raw {
                    Raw::Int(i) => Ok(rat(i, 1)),
                    Raw::Text(t) => parse_rational(&t).map_err(de::Error::custom),
                })
                .collect()
        }
    }
}
