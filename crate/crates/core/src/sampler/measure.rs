use std::fmt;
use std::str::FromStr;

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_bigint::{BigInt, BigUint, Sign as IntSign};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::construction::Boundary;

use super::SamplerError;

const RM: RoundingMode = RoundingMode::ToEven;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureFamily {
    Cauchy,
    Logistic,
}

/// A continuous probability measure on the reals with full support.
///
/// Samples are quantile images of uniform draws, rounded to multiples of `2^-bits`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub family: MeasureFamily,
    pub location: f64,
    pub scale: f64,
    pub bits: u32,
}

impl Default for MeasureSpec {
    fn default() -> Self {
        MeasureSpec::cauchy(0.0, 1.0)
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.family {
            MeasureFamily::Cauchy => "cauchy",
            MeasureFamily::Logistic => "logistic",
        };
        write!(f, "{name}({}, {})", self.location, self.scale)
    }
}

impl FromStr for MeasureSpec {
    type Err = SamplerError;

    /// `cauchy`, `logistic`, or either with `(location, scale)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SamplerError::BadMeasure(s.to_string());
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(i) => {
                let inner = s[i + 1..].strip_suffix(')').ok_or_else(bad)?;
                let args: Vec<f64> =
                    inner.split(',').map(|a| a.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
                if args.len() != 2 {
                    return Err(bad());
                }
                (&s[..i], Some((args[0], args[1])))
            }
            None => (s, None),
        };
        let (location, scale) = args.unwrap_or((0.0, 1.0));
        let m = match name.trim() {
            "cauchy" => MeasureSpec::cauchy(location, scale),
            "logistic" => MeasureSpec::logistic(location, scale),
            _ => return Err(bad()),
        };
        m.validate()?;
        Ok(m)
    }
}

fn float_of_rational(q: &BigRational, p: usize) -> BigFloat {
    let f = |n: &BigInt| {
        let (sign, words) = n.to_u64_digits();
        if words.is_empty() {
            return BigFloat::from_word(0, p);
        }
        let s = if sign == IntSign::Minus { Sign::Neg } else { Sign::Pos };
        BigFloat::from_words(&words, s, 64 * words.len() as i32)
    };
    f(q.numer()).div(&f(q.denom()), p, RM)
}

/// The exact dyadic value of a finite float.
fn dyadic(x: &BigFloat) -> Option<(BigInt, i64)> {
    if x.is_zero() {
        return Some((BigInt::zero(), 0));
    }
    let (words, _, sign, e, _) = x.as_raw_parts()?;
    let digits: Vec<u32> = words.iter().flat_map(|w| [*w as u32, (*w >> 32) as u32]).collect();
    let m = BigInt::from_biguint(if sign == Sign::Neg { IntSign::Minus } else { IntSign::Plus }, BigUint::new(digits));
    Some((m, e as i64 - 64 * words.len() as i64))
}

fn round_to_bits(x: &BigFloat, bits: u32) -> Option<BigRational> {
    let (m, s) = dyadic(x)?;
    let shift = s + bits as i64;
    let denom = BigInt::one() << bits as usize;
    let numer = if shift >= 0 {
        m << shift as usize
    } else {
        let t = (-shift) as usize;
        (m + (BigInt::one() << (t - 1))) >> t
    };
    Some(BigRational::new(numer, denom))
}

fn to_f64(x: &BigFloat) -> f64 {
    match dyadic(x) {
        Some((m, s)) => {
            let bits = m.bits() as i64;
            let keep = bits.min(60);
            let top: i64 = (&m >> (bits - keep) as usize).try_into().expect("fits in 64 bits");
            top as f64 * 2f64.powi((s + bits - keep) as i32)
        }
        None => f64::NAN,
    }
}

impl MeasureSpec {
    pub fn cauchy(location: f64, scale: f64) -> Self {
        MeasureSpec { family: MeasureFamily::Cauchy, location, scale, bits: 96 }
    }

    pub fn logistic(location: f64, scale: f64) -> Self {
        MeasureSpec { family: MeasureFamily::Logistic, location, scale, bits: 96 }
    }

    pub fn with_bits(self, bits: u32) -> Self {
        MeasureSpec { bits, ..self }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let ok = self.location.is_finite() && self.scale.is_finite() && self.scale > 0.0 && (16..=1024).contains(&self.bits);
        if ok {
            Ok(())
        } else {
            Err(SamplerError::BadMeasure(self.to_string()))
        }
    }

    /// Width of the uniform draw: `bits` rounded up to whole 64-bit words.
    pub fn draw_bits(&self) -> u32 {
        self.bits.div_ceil(64) * 64
    }

    /// Working precision: Cauchy tails reach `2^draw_bits`, so absolute accuracy
    /// `2^-bits` there needs `draw_bits + bits` significant bits plus guard bits.
    fn precision(&self) -> usize {
        let guard = 64;
        match self.family {
            MeasureFamily::Cauchy => (self.draw_bits() + self.bits) as usize + guard,
            MeasureFamily::Logistic => self.bits as usize + guard,
        }
    }

    /// Quantile of `u = (2k + 1) / 2^(d + 1)`, `d` the draw width and `k` given as
    /// little-endian words, rounded to a multiple of `2^-bits`.
    pub fn quantile_of_draw(&self, words: &[u64], cc: &mut Consts) -> BigRational {
        let d = self.draw_bits() as i32;
        let odd: Vec<u64> = {
            let mut k = BigUint::zero();
            for (i, w) in words.iter().enumerate() {
                k |= BigUint::from(*w) << (64 * i);
            }
            ((k << 1u32) + 1u32).to_u64_digits()
        };
        let exact = 64 * (odd.len() + 1);
        let u = BigFloat::from_words(&odd, Sign::Pos, 64 * odd.len() as i32 - d - 1);
        let v = BigFloat::from_word(1, exact).sub(&u, exact, RM);
        let lower = u.cmp(&v).is_some_and(|c| c < 0);
        let small = if lower { &u } else { &v };
        // |z| < 2^(1 - e) for Cauchy, with e the exponent of min(u, 1 - u).
        let tail = match self.family {
            MeasureFamily::Cauchy => (1 - small.exponent().unwrap_or(0)).max(0) as usize,
            MeasureFamily::Logistic => 0,
        };
        let magnitude = (self.scale.abs().max(1.0).log2().ceil() + self.location.abs().max(1.0).log2().ceil()) as usize;
        let p = (self.bits as usize + 64 + tail + magnitude).div_ceil(64) * 64;
        let one = BigFloat::from_word(1, p);
        let z = match self.family {
            MeasureFamily::Cauchy => {
                // tan(pi (u - 1/2)) as -1/tan(pi u) or 1/tan(pi (1 - u)), keeping the
                // relative error small in both tails.
                let pi = cc.pi(p, RM);
                let t = small.mul(&pi, p, RM).tan(p, RM, cc);
                let c = one.div(&t, p, RM);
                if lower {
                    c.neg()
                } else {
                    c
                }
            }
            MeasureFamily::Logistic => u.div(&v, p, RM).ln(p, RM, cc),
        };
        let x = BigFloat::from_f64(self.location, p).add(&z.mul(&BigFloat::from_f64(self.scale, p), p, RM), p, RM);
        round_to_bits(&x, self.bits).expect("quantile of an interior draw is finite")
    }

    pub fn sample(&self, rng: &mut impl RngCore, cc: &mut Consts) -> BigRational {
        let words: Vec<u64> = (0..self.draw_bits() / 64).map(|_| rng.next_u64()).collect();
        self.quantile_of_draw(&words, cc)
    }

    fn cdf_float(&self, x: &BigFloat, cc: &mut Consts) -> BigFloat {
        let p = self.precision();
        let z = x.sub(&BigFloat::from_f64(self.location, p), p, RM).div(&BigFloat::from_f64(self.scale, p), p, RM);
        let one = BigFloat::from_word(1, p);
        match self.family {
            MeasureFamily::Cauchy => {
                let pi = cc.pi(p, RM);
                let half = BigFloat::from_f64(0.5, p);
                half.add(&z.atan(p, RM, cc).div(&pi, p, RM), p, RM)
            }
            MeasureFamily::Logistic => one.div(&one.add(&z.neg().exp(p, RM, cc), p, RM), p, RM),
        }
    }

    fn boundary_float(&self, b: &Boundary) -> BigFloat {
        let p = self.precision();
        let sqrt2 = BigFloat::from_word(2, p).sqrt(p, RM);
        float_of_rational(b.rational_part(), p).add(&float_of_rational(b.sqrt2_part(), p).mul(&sqrt2, p, RM), p, RM)
    }

    pub fn cdf_rational(&self, q: &BigRational) -> f64 {
        let mut cc = Consts::new().expect("constants cache");
        to_f64(&self.cdf_float(&float_of_rational(q, self.precision()), &mut cc))
    }

    pub fn cdf_boundary(&self, b: &Boundary) -> f64 {
        let mut cc = Consts::new().expect("constants cache");
        to_f64(&self.cdf_float(&self.boundary_float(b), &mut cc))
    }

    /// Masses of `(-inf, b_0]`, each `(b_j, b_{j+1}]`, and `(b_last, inf)`, differenced
    /// at working precision before rounding.
    pub fn partition_masses(&self, boundaries: &[Boundary]) -> Vec<f64> {
        let p = self.precision();
        let mut cc = Consts::new().expect("constants cache");
        let mut cdfs = vec![BigFloat::from_word(0, p)];
        cdfs.extend(boundaries.iter().map(|b| self.cdf_float(&self.boundary_float(b), &mut cc)));
        cdfs.push(BigFloat::from_word(1, p));
        cdfs.windows(2).map(|w| to_f64(&w[1].sub(&w[0], p, RM)).max(0.0)).collect()
    }
}

#[cfg(test)]
mod tests {
    use num_traits::Signed;

    use super::*;
    use crate::construction::rat;

    #[test]
    fn quantiles_of_known_draws() {
        let mut cc = Consts::new().unwrap();
        let m = MeasureSpec::cauchy(0.0, 1.0);
        // k = 2^127 - 1 gives u just below 1/2; the median draw rounds to 0.
        let mid = m.quantile_of_draw(&[u64::MAX, u64::MAX >> 1], &mut cc);
        assert!(mid <= BigRational::zero() && mid > BigRational::new((-1).into(), 1_000_000.into()));
        // u = 3/4 + 2^-129 gives tan(pi/4) = 1 up to rounding.
        let q = m.quantile_of_draw(&[0, 3 << 62], &mut cc);
        assert!((&q - rat(1)).abs() < BigRational::new(1.into(), BigInt::one() << 80usize));
        let l = MeasureSpec::logistic(2.0, 1.0).quantile_of_draw(&[u64::MAX, u64::MAX >> 1], &mut cc);
        assert!((l - rat(2)).abs() < BigRational::new(1.into(), 1_000_000.into()));
        // Extreme draws stay finite and ordered.
        let lo = m.quantile_of_draw(&[0, 0], &mut cc);
        let hi = m.quantile_of_draw(&[u64::MAX, u64::MAX], &mut cc);
        assert!(lo < rat(-1_000_000_000) && hi > rat(1_000_000_000));
        assert_eq!(lo, -hi);
        let scaled = &lo * BigRational::from_integer(BigInt::one() << 96usize);
        assert!(scaled.is_integer());
    }

    #[test]
    fn cdfs_and_masses() {
        let c = MeasureSpec::cauchy(0.0, 1.0);
        assert!((c.cdf_rational(&rat(1)) - 0.75).abs() < 1e-15);
        assert!((c.cdf_rational(&rat(0)) - 0.5).abs() < 1e-15);
        let l = MeasureSpec::logistic(0.0, 1.0);
        assert!((l.cdf_rational(&rat(1)) - 1.0 / (1.0 + (-1f64).exp())).abs() < 1e-15);
        let s2 = Boundary::sqrt2_times(1);
        let expected = 0.5 + (2f64.sqrt()).atan() / std::f64::consts::PI;
        assert!((c.cdf_boundary(&s2) - expected).abs() < 1e-15);
        let masses = c.partition_masses(&[Boundary::sqrt2_times(-1), s2]);
        assert_eq!(masses.len(), 3);
        assert!((masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((masses[0] - masses[2]).abs() < 1e-15);
    }

    #[test]
    fn parsing_measures() {
        assert_eq!("cauchy".parse::<MeasureSpec>().unwrap(), MeasureSpec::cauchy(0.0, 1.0));
        assert_eq!("logistic(1, 2)".parse::<MeasureSpec>().unwrap(), MeasureSpec::logistic(1.0, 2.0));
        assert!("cauchy(0, -1)".parse::<MeasureSpec>().is_err());
        assert!("gauss".parse::<MeasureSpec>().is_err());
        assert!(MeasureSpec::cauchy(0.0, 1.0).with_bits(8).validate().is_err());
    }
}
