//! Exact rational score values.
//!
//! Every scoring quantity (acceptance rate, challenge score, efficiency
//! score, dynamic points) is carried as an arbitrary-precision rational so
//! that the incremental and from-scratch ranking paths agree bit for bit.
//! Decimal rendering happens only at the wire boundary.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Score(BigRational);

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid score literal {0:?}")]
pub struct ParseScoreError(pub String);

impl Score {
    pub fn zero() -> Self {
        Score(BigRational::zero())
    }

    pub fn one() -> Self {
        Score(BigRational::one())
    }

    pub fn from_integer(n: i64) -> Self {
        Score(BigRational::from_integer(BigInt::from(n)))
    }

    /// `num / den`. Panics on a zero denominator.
    pub fn ratio(num: u64, den: u64) -> Self {
        assert!(den != 0, "zero denominator");
        Score(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_rational(r: BigRational) -> Self {
        Score(r)
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// Parses a plain decimal literal (`"5"`, `"2.75"`, `"-0.5"`, `"1e3"`)
    /// exactly, without passing through binary floating point.
    pub fn from_decimal_str(s: &str) -> Result<Self, ParseScoreError> {
        let err = || ParseScoreError(s.to_owned());
        let t = s.trim();
        let (mantissa, exp) = match t.find(['e', 'E']) {
            Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| err())?),
            None => (t, 0),
        };
        let (neg, digits) = match mantissa.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
        };
        let (int_part, frac_part) = match digits.split_once('.') {
            Some((i, f)) => (i, f),
            None => (digits, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let all: String = format!("{int_part}{frac_part}");
        let mut num: BigInt = if all.is_empty() {
            BigInt::zero()
        } else {
            all.parse().map_err(|_| err())?
        };
        if neg {
            num = -num;
        }
        let scale = exp - frac_part.len() as i32;
        let ten = BigInt::from(10);
        let r = if scale >= 0 {
            BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
        } else {
            BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
        };
        Ok(Score(r))
    }

    /// Converts an `f64` by way of its shortest round-trip decimal form, so
    /// `0.1` becomes exactly `1/10`.
    pub fn from_f64_decimal(x: f64) -> Result<Self, ParseScoreError> {
        if !x.is_finite() {
            return Err(ParseScoreError(x.to_string()));
        }
        Self::from_decimal_str(&format!("{x:?}"))
    }

    /// Rounds half away from zero to `places` decimal digits and renders
    /// with exactly that many digits after the point.
    pub fn to_decimal_string(&self, places: u32) -> String {
        let scale = num_traits::pow(BigInt::from(10), places as usize);
        let scaled = &self.0 * BigRational::from_integer(scale.clone());
        let neg = scaled.is_negative();
        let abs = scaled.abs();
        let (q, r) = abs.numer().div_rem(abs.denom());
        let twice_r: BigInt = r * 2;
        let rounded = if &twice_r >= abs.denom() { q + 1 } else { q };
        let (int_part, frac_part) = rounded.div_rem(&scale);
        let sign = if neg && !rounded_is_zero(&int_part, &frac_part) { "-" } else { "" };
        if places == 0 {
            format!("{sign}{int_part}")
        } else {
            format!(
                "{sign}{int_part}.{frac:0>width$}",
                frac = frac_part.to_string(),
                width = places as usize
            )
        }
    }

    /// Lossy conversion for display and plotting only.
    pub fn to_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

fn rounded_is_zero(a: &BigInt, b: &BigInt) -> bool {
    a.is_zero() && b.is_zero()
}

impl fmt::Debug for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Score({})", self)
    }
}

/// Exact form: `n` for integers, `n/d` otherwise.
impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for Score {
    type Err = ParseScoreError;

    /// Accepts the exact `n/d` form as well as decimal literals.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| ParseScoreError(s.to_owned()))?;
            let d: BigInt = d.trim().parse().map_err(|_| ParseScoreError(s.to_owned()))?;
            if d.is_zero() {
                return Err(ParseScoreError(s.to_owned()));
            }
            return Ok(Score(BigRational::new(n, d)));
        }
        Score::from_decimal_str(s)
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

impl Add for Score {
    type Output = Score;
    fn add(self, rhs: Score) -> Score {
        Score(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Score> for &'a Score {
    type Output = Score;
    fn add(self, rhs: &'a Score) -> Score {
        Score(&self.0 + &rhs.0)
    }
}

impl Sub for Score {
    type Output = Score;
    fn sub(self, rhs: Score) -> Score {
        Score(self.0 - rhs.0)
    }
}

impl<'a> Sub<&'a Score> for &'a Score {
    type Output = Score;
    fn sub(self, rhs: &'a Score) -> Score {
        Score(&self.0 - &rhs.0)
    }
}

impl Mul for Score {
    type Output = Score;
    fn mul(self, rhs: Score) -> Score {
        Score(self.0 * rhs.0)
    }
}

impl<'a> Mul<&'a Score> for &'a Score {
    type Output = Score;
    fn mul(self, rhs: &'a Score) -> Score {
        Score(&self.0 * &rhs.0)
    }
}

impl AddAssign<&Score> for Score {
    fn add_assign(&mut self, rhs: &Score) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&Score> for Score {
    fn sub_assign(&mut self, rhs: &Score) {
        self.0 -= &rhs.0;
    }
}

impl Sum for Score {
    fn sum<I: Iterator<Item = Score>>(iter: I) -> Score {
        iter.fold(Score::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Score> for Score {
    fn sum<I: Iterator<Item = &'a Score>>(iter: I) -> Score {
        iter.fold(Score::zero(), |mut acc, x| {
            acc += x;
            acc
        })
    }
}
