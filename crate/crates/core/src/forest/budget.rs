use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A privacy budget ε, held as an exact rational so that splitting it across
/// trees and multiplying back is lossless. `Infinite` disables noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PrivacyBudget {
    Finite(Ratio<u64>),
    Infinite,
}

impl PrivacyBudget {
    pub fn is_infinite(&self) -> bool {
        matches!(self, PrivacyBudget::Infinite)
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            PrivacyBudget::Finite(r) => *r.numer() as f64 / *r.denom() as f64,
            PrivacyBudget::Infinite => f64::INFINITY,
        }
    }

    /// `None` for the infinite budget.
    pub fn finite_f64(&self) -> Option<f64> {
        match self {
            PrivacyBudget::Finite(_) => Some(self.as_f64()),
            PrivacyBudget::Infinite => None,
        }
    }

    /// Budget of each of `parts` sequentially composed mechanisms.
    pub fn split(&self, parts: usize) -> Result<PrivacyBudget> {
        if parts == 0 {
            return Err(Error::param("cannot split a budget into zero parts"));
        }
        Ok(match self {
            PrivacyBudget::Finite(r) => PrivacyBudget::Finite(r / parts as u64),
            PrivacyBudget::Infinite => PrivacyBudget::Infinite,
        })
    }

    pub fn times(&self, k: usize) -> PrivacyBudget {
        match self {
            PrivacyBudget::Finite(r) => PrivacyBudget::Finite(r * k as u64),
            PrivacyBudget::Infinite => PrivacyBudget::Infinite,
        }
    }

    /// Converts a float through its shortest decimal representation, so
    /// `0.1` becomes exactly 1/10.
    pub fn from_f64(x: f64) -> Result<Self> {
        if x.is_infinite() && x > 0.0 {
            return Ok(PrivacyBudget::Infinite);
        }
        format!("{x}").parse()
    }
}

impl FromStr for PrivacyBudget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::param(format!("`{s}` is not a positive privacy budget"));
        if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity" | "∞") {
            return Ok(PrivacyBudget::Infinite);
        }
        let r = if let Some((n, d)) = t.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| bad())?;
            let d: u64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ratio::new(n, d)
        } else {
            let (int, frac) = t.split_once('.').unwrap_or((t, ""));
            if (int.is_empty() && frac.is_empty()) || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            let frac = frac.trim_end_matches('0');
            if frac.len() > 18 {
                return Err(bad());
            }
            let denom = 10u64.pow(frac.len() as u32);
            let whole: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
            let part: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
            let numer = whole
                .checked_mul(denom)
                .and_then(|w| w.checked_add(part))
                .ok_or_else(bad)?;
            Ratio::new(numer, denom)
        };
        if *r.numer() == 0 {
            return Err(bad());
        }
        Ok(PrivacyBudget::Finite(r))
    }
}

impl fmt::Display for PrivacyBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrivacyBudget::Infinite => f.write_str("inf"),
            PrivacyBudget::Finite(r) if r.is_integer() => write!(f, "{}", r.numer()),
            PrivacyBudget::Finite(_) => write!(f, "{}", self.as_f64()),
        }
    }
}

impl Serialize for PrivacyBudget {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PrivacyBudget::Infinite => s.serialize_str("inf"),
            PrivacyBudget::Finite(_) => s.serialize_f64(self.as_f64()),
        }
    }
}

impl<'de> Deserialize<'de> for PrivacyBudget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = PrivacyBudget;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<PrivacyBudget, E> {
                PrivacyBudget::from_f64(v).map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<PrivacyBudget, E> {
                v.to_string().parse().map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<PrivacyBudget, E> {
                v.to_string().parse().map_err(E::custom)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<PrivacyBudget, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}
