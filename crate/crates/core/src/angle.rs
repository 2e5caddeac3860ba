//! External angles as exact fractions of a turn.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DynError;

/// An angle `num/den` turns, reduced, with `0 <= num < den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ExternalAngle {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

impl ExternalAngle {
    pub const ZERO: ExternalAngle = ExternalAngle { num: 0, den: 1 };

    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "zero denominator");
        let num = num % den;
        let g = gcd(num, den).max(1);
        ExternalAngle { num: num / g, den: den / g }
    }

    /// Best rational approximation of `turns mod 1` with denominator at most `max_den`.
    pub fn approximate(turns: f64, max_den: u64) -> Self {
        let x = turns.rem_euclid(1.0);
        if !x.is_finite() {
            return Self::ZERO;
        }
        // continued fraction convergents and semiconvergents
        let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
        let mut r = x;
        let mut best = (0u64, 1u64);
        for _ in 0..64 {
            let a = r.floor();
            if a > 1e18 {
                break;
            }
            let a = a as u64;
            let q2 = a.saturating_mul(q1).saturating_add(q0);
            if q2 > max_den {
                let k = (max_den - q0) / q1.max(1);
                if q1 > 0 && k > 0 {
                    let (ps, qs) = (k * p1 + p0, k * q1 + q0);
                    let es = (ps as f64 / qs as f64 - x).abs();
                    let e1 = (p1 as f64 / q1 as f64 - x).abs();
                    if es < e1 {
                        best = (ps, qs);
                    }
                }
                break;
            }
            let p2 = a * p1 + p0;
            best = (p2, q2);
            p0 = p1;
            q0 = q1;
            p1 = p2;
            q1 = q2;
            let frac = r - r.floor();
            if frac < 1e-15 || (p2 as f64 / q2 as f64 - x).abs() < 1e-16 {
                break;
            }
            r = 1.0 / frac;
        }
        Self::new(best.0, best.1)
    }

    /// Float turns with denominators up to one million.
    pub fn from_turns(turns: f64) -> Self {
        Self::approximate(turns, 1_000_000)
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn turns(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `d * self mod 1`.
    pub fn times(&self, d: u64) -> Self {
        let n = (self.num as u128 * d as u128) % self.den as u128;
        Self::new(n as u64, self.den)
    }

    /// Push forward through a run of degrees.
    pub fn pushforward<I: IntoIterator<Item = u64>>(&self, degrees: I) -> Self {
        let den = self.den as u128;
        let mut n = self.num as u128;
        for d in degrees {
            n = (n * d as u128) % den;
        }
        Self::new(n as u64, self.den)
    }

    /// Circular distance in turns.
    pub fn distance(&self, other: &Self) -> f64 {
        let d = (self.turns() - other.turns()).rem_euclid(1.0);
        d.min(1.0 - d)
    }
}

impl fmt::Display for ExternalAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for ExternalAngle {
    type Err = DynError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || DynError::InvalidInput(format!("bad angle '{s}'"));
        if let Some((a, b)) = s.split_once('/') {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            if b == 0 {
                return Err(bad());
            }
            Ok(Self::new(a, b))
        } else {
            let x: f64 = s.parse().map_err(|_| bad())?;
            if !x.is_finite() {
                return Err(bad());
            }
            Ok(Self::from_turns(x))
        }
    }
}

impl TryFrom<String> for ExternalAngle {
    type Error = DynError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ExternalAngle> for String {
    fn from(a: ExternalAngle) -> String {
        a.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_and_wraps() {
        assert_eq!(ExternalAngle::new(9, 63), ExternalAngle::new(1, 7));
        assert_eq!(ExternalAngle::new(8, 7), ExternalAngle::new(1, 7));
        assert_eq!(ExternalAngle::new(0, 5), ExternalAngle::ZERO);
    }

    #[test]
    fn approximations() {
        assert_eq!(ExternalAngle::from_turns(0.49), ExternalAngle::new(49, 100));
        assert_eq!(ExternalAngle::from_turns(1.0 / 7.0), ExternalAngle::new(1, 7));
        assert_eq!(ExternalAngle::from_turns(0.1), ExternalAngle::new(1, 10));
        assert_eq!(ExternalAngle::from_turns(-0.25), ExternalAngle::new(3, 4));
        let a = ExternalAngle::approximate(std::f64::consts::PI - 3.0, 1000);
        assert_eq!(a, ExternalAngle::new(16, 113));
    }

    #[test]
    fn doubling_orbit() {
        let a = ExternalAngle::new(1, 7);
        assert_eq!(a.times(2), ExternalAngle::new(2, 7));
        assert_eq!(a.pushforward([2, 2, 2]), a);
        assert_eq!(ExternalAngle::new(1, 10).pushforward([2, 3]), ExternalAngle::new(3, 5));
    }

    #[test]
    fn deep_pushforward_stays_exact() {
        let a = ExternalAngle::new(1, 7);
        let b = a.pushforward(std::iter::repeat(2).take(300));
        assert_eq!(b, ExternalAngle::new(1, 7));
    }

    #[test]
    fn parse_round_trip() {
        let a: ExternalAngle = "4/7".parse().unwrap();
        assert_eq!(a.to_string(), "4/7");
        let b: ExternalAngle = "0.5".parse().unwrap();
        assert_eq!(b, ExternalAngle::new(1, 2));
        assert!("1/0".parse::<ExternalAngle>().is_err());
        assert!("x".parse::<ExternalAngle>().is_err());
    }
}
