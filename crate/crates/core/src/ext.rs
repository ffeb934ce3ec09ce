//! Extended reals: a finite value or one of the two infinities.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// Lossless mapping onto `f64`, infinities included.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(x) => x,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    /// Rejects NaN.
    pub fn from_f64(x: f64) -> Result<Self> {
        if x.is_nan() {
            Err(Error::Domain("NaN is not an extended real".into()))
        } else if x == f64::INFINITY {
            Ok(ExtReal::PosInf)
        } else if x == f64::NEG_INFINITY {
            Ok(ExtReal::NegInf)
        } else {
            Ok(ExtReal::Finite(x))
        }
    }

    /// `self - other`. The indeterminate forms `inf - inf` and `-inf - (-inf)` are errors.
    pub fn checked_sub(self, other: ExtReal) -> Result<ExtReal> {
        use ExtReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Ok(Finite(a - b)),
            (PosInf, PosInf) | (NegInf, NegInf) => {
                Err(Error::Domain("indeterminate difference of equal infinities".into()))
            }
            (PosInf, _) | (_, NegInf) => Ok(PosInf),
            (NegInf, _) | (_, PosInf) => Ok(NegInf),
        }
    }

    pub fn le(self, other: ExtReal) -> bool {
        self.to_f64() <= other.to_f64()
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        ExtReal::from_f64(x).expect("NaN passed as extended real")
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => write!(f, "-inf"),
            ExtReal::PosInf => write!(f, "inf"),
            // `{:?}` prints the shortest representation that round-trips.
            ExtReal::Finite(x) => write!(f, "{x:?}"),
        }
    }
}

impl FromStr for ExtReal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(ExtReal::PosInf),
            "-inf" | "-infinity" => Ok(ExtReal::NegInf),
            t => t
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("'{t}': {e}")))
                .and_then(ExtReal::from_f64),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(x) => s.serialize_f64(*x),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => ExtReal::from_f64(x).map_err(serde::de::Error::custom),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subtraction_with_infinities() {
        use ExtReal::*;
        assert_eq!(Finite(1.0).checked_sub(PosInf).unwrap(), NegInf);
        assert_eq!(NegInf.checked_sub(Finite(3.0)).unwrap(), NegInf);
        assert_eq!(NegInf.checked_sub(PosInf).unwrap(), NegInf);
        assert_eq!(Finite(0.0).checked_sub(NegInf).unwrap(), PosInf);
        assert!(PosInf.checked_sub(PosInf).is_err());
    }

    #[test]
    fn text_round_trip() {
        for v in [ExtReal::NegInf, ExtReal::PosInf, ExtReal::Finite(-0.125), ExtReal::Finite(0.1)] {
            let back: ExtReal = v.to_string().parse().unwrap();
            assert_eq!(back, v);
        }
        assert!("nan".parse::<ExtReal>().is_err());
    }
}
