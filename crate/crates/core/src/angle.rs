//! Measurement angles as exact rational multiples of π.

use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

/// An angle `num/den · π`, reduced and normalized into `(-π, π]`.
///
/// Equality is exact, so two settings are the same proposition iff their
/// reduced fractions agree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(into = "alloc::string::String", try_from = "alloc::string::String"))]
pub struct Angle {
    num: i64,
    den: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AngleError {
    #[error("angle denominator must be nonzero")]
    ZeroDenominator,
    #[error("cannot parse angle {0:?}; expected forms like 0, pi, -pi/4, 3pi/4")]
    Parse(alloc::string::String),
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

impl Angle {
    pub const ZERO: Angle = Angle { num: 0, den: 1 };
    pub const PI: Angle = Angle { num: 1, den: 1 };

    /// `num/den · π`.
    pub fn new(num: i64, den: u32) -> Result<Self, AngleError> {
        if den == 0 {
            return Err(AngleError::ZeroDenominator);
        }
        let g = gcd(num.unsigned_abs(), u64::from(den)).max(1);
        let den = (u64::from(den) / g) as i64;
        let mut num = num / g as i64;
        // wrap into (-den, den]
        let period = 2 * den;
        num = num.rem_euclid(period);
        if num > den {
            num -= period;
        }
        Ok(Angle { num, den: den as u32 })
    }

    /// Shorthand for `π / den`.
    pub fn pi_over(den: u32) -> Self {
        Self::new(1, den).expect("nonzero denominator")
    }

    pub fn numerator(self) -> i64 {
        self.num
    }

    pub fn denominator(self) -> u32 {
        self.den
    }

    pub fn radians(self) -> f64 {
        core::f64::consts::PI * self.num as f64 / f64::from(self.den)
    }

    /// Cosine, exact at multiples of π/3 and π/2.
    pub fn cos(self) -> f64 {
        match (self.num, self.den) {
            (0, _) => 1.0,
            (1, 1) => -1.0,
            (_, 2) => 0.0,
            (1 | -1, 3) => 0.5,
            (2 | -2, 3) => -0.5,
            _ => libm::cos(self.radians()),
        }
    }
}

/// Exact difference, normalized.
impl core::ops::Sub for Angle {
    type Output = Angle;

    fn sub(self, other: Angle) -> Angle {
        let num = self.num * i64::from(other.den) - other.num * i64::from(self.den);
        let den = u64::from(self.den) * u64::from(other.den);
        let den = u32::try_from(den).expect("angle grid denominators too large");
        Angle::new(num, den).expect("nonzero denominator")
    }
}

impl core::ops::Neg for Angle {
    type Output = Angle;

    fn neg(self) -> Angle {
        Angle::new(-self.num, self.den).expect("nonzero denominator")
    }
}

impl Ord for Angle {
    fn cmp(&self, other: &Self) -> Ordering {
        (i128::from(self.num) * i128::from(other.den)).cmp(&(i128::from(other.num) * i128::from(self.den)))
    }
}

impl PartialOrd for Angle {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.num, self.den) {
            (0, _) => f.write_str("0"),
            (n, 1) => match n {
                1 => f.write_str("π"),
                _ => write!(f, "{n}π"),
            },
            (1, d) => write!(f, "π/{d}"),
            (-1, d) => write!(f, "-π/{d}"),
            (n, d) => write!(f, "{n}π/{d}"),
        }
    }
}

impl FromStr for Angle {
    type Err = AngleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || AngleError::Parse(s.into());
        let t = s.trim();
        let (neg, t) = match t.strip_prefix('-') {
            Some(rest) => (true, rest.trim_start()),
            None => (false, t),
        };
        let (head, den) = match t.split_once('/') {
            Some((h, d)) => (h.trim(), d.trim().parse::<u32>().map_err(|_| err())?),
            None => (t, 1),
        };
        let num: i64 = if let Some(coef) = head.strip_suffix("pi").or_else(|| head.strip_suffix('π')) {
            let coef = coef.trim().trim_end_matches('*').trim();
            if coef.is_empty() {
                1
            } else {
                coef.parse().map_err(|_| err())?
            }
        } else {
            // a bare integer is only meaningful as zero
            match head.parse::<i64>() {
                Ok(0) => 0,
                _ => return Err(err()),
            }
        };
        Angle::new(if neg { -num } else { num }, den)
    }
}

impl From<Angle> for alloc::string::String {
    fn from(a: Angle) -> Self {
        alloc::format!("{a}")
    }
}

impl TryFrom<alloc::string::String> for Angle {
    type Error = AngleError;

    fn try_from(s: alloc::string::String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
