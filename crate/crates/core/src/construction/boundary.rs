use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

/// `a + b * sqrt(2)` with `b != 0`; never rational.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Boundary {
    a: BigRational,
    b: BigRational,
}

/// Sign of `x + y * sqrt(2)` for integers.
fn sign_sqrt2(x: &BigInt, y: &BigInt) -> Ordering {
    let sx = x.sign().cmp(&Sign::NoSign);
    let sy = y.sign().cmp(&Sign::NoSign);
    if sx == sy || sy == Ordering::Equal {
        return sx;
    }
    if sx == Ordering::Equal {
        return sy;
    }
    let x2 = x * x;
    let y2 = (y * y) << 1u32;
    match x2.cmp(&y2) {
        Ordering::Greater => sx,
        _ => sy,
    }
}

/// Sign of `(p - q) + (r - s) * sqrt(2)`, cleared of the positive denominators.
fn sign_diff(p: &BigRational, q: &BigRational, r: &BigRational, s: Option<&BigRational>) -> Ordering {
    let x = p.numer() * q.denom() - q.numer() * p.denom();
    let (y, yd) = match s {
        Some(s) => (r.numer() * s.denom() - s.numer() * r.denom(), r.denom() * s.denom()),
        None => (r.numer().clone(), r.denom().clone()),
    };
    sign_sqrt2(&(x * yd), &(y * p.denom() * q.denom()))
}

pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

impl Boundary {
    pub fn new(a: BigRational, b: BigRational) -> Option<Self> {
        (!b.is_zero()).then_some(Boundary { a, b })
    }

    pub fn sqrt2_times(k: i64) -> Self {
        Boundary { a: BigRational::zero(), b: rat(k) }
    }

    pub fn rational_part(&self) -> &BigRational {
        &self.a
    }

    pub fn sqrt2_part(&self) -> &BigRational {
        &self.b
    }

    /// `self` compared with the rational `q`; never equal.
    pub fn cmp_rational(&self, q: &BigRational) -> Ordering {
        sign_diff(&self.a, q, &self.b, None)
    }

    pub fn lt_rational(&self, q: &BigRational) -> bool {
        self.cmp_rational(q) == Ordering::Less
    }

    /// `2q - self`, the reflection through `q`.
    pub fn mirror(&self, q: &BigRational) -> Self {
        Boundary { a: q * rat(2) - &self.a, b: -&self.b }
    }

    /// An irrational strictly between the distinct rationals `lo` and `hi`, close to
    /// their midpoint.
    pub fn between(lo: &BigRational, hi: &BigRational) -> Self {
        let (lo, hi) = if lo < hi { (lo, hi) } else { (hi, lo) };
        assert!(lo != hi, "between needs distinct rationals");
        let mid = (lo + hi) / rat(2);
        let half = (hi - lo) / rat(2);
        // 3/2 > sqrt(2), so eps * 3/2 <= half keeps the nudge inside
        let mut eps = BigRational::one();
        while &eps * BigRational::new(3.into(), 2.into()) > half {
            eps /= rat(2);
        }
        Boundary { a: mid, b: eps }
    }

    /// An integer strictly greater than the value.
    pub fn integer_above(&self) -> BigInt {
        let bound = self.a.abs().ceil() + (self.b.abs() * rat(2)).ceil() + BigRational::one();
        let mut n = bound.to_integer();
        while self.cmp_rational(&BigRational::from_integer(n.clone() - 1)) == Ordering::Less {
            n -= 1;
        }
        n
    }

    pub fn to_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        self.a.to_f64().unwrap_or(f64::NAN) + self.b.to_f64().unwrap_or(f64::NAN) * std::f64::consts::SQRT_2
    }
}

impl Ord for Boundary {
    fn cmp(&self, other: &Self) -> Ordering {
        sign_diff(&self.a, &other.a, &self.b, Some(&other.b))
    }
}

impl PartialOrd for Boundary {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}*sqrt2", self.a, self.b)
    }
}

#[derive(Serialize, Deserialize)]
struct BoundaryRepr {
    a: String,
    b: String,
}

impl Serialize for Boundary {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        BoundaryRepr { a: self.a.to_string(), b: self.b.to_string() }.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Boundary {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let r = BoundaryRepr::deserialize(de)?;
        let a: BigRational = r.a.parse().map_err(D::Error::custom)?;
        let b: BigRational = r.b.parse().map_err(D::Error::custom)?;
        Boundary::new(a, b).ok_or_else(|| D::Error::custom("boundary with zero sqrt2 part"))
    }
}

/// Serde adapter for exact rationals as `"p/q"` strings.
pub mod rational_serde {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &BigRational, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&q.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BigRational, D::Error> {
        String::deserialize(de)?.parse().map_err(serde::de::Error::custom)
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(qs: &[BigRational], ser: S) -> Result<S::Ok, S::Error> {
            let mut seq = ser.serialize_seq(Some(qs.len()))?;
            for q in qs {
                seq.serialize_element(&q.to_string())?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<BigRational>, D::Error> {
            Vec::<String>::deserialize(de)?
                .iter()
                .map(|s| s.parse().map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

/// The fixed enumeration of the rationals: 0, then the Calkin-Wilf sequence
/// interleaved with its negation.
pub fn enumerated_rational(i: usize) -> BigRational {
    if i == 0 {
        return BigRational::zero();
    }
    let n = (i + 1) / 2;
    let mut q = BigRational::one();
    for _ in 1..n {
        q = BigRational::one() / (q.floor() * rat(2) - &q + BigRational::one());
    }
    if i % 2 == 1 {
        q
    } else {
        -q
    }
}
