//! Scalar type used for rate arithmetic, so the same rate code can run in
//! floating point for simulation and in exact rationals for verification.

use std::fmt::Debug;
use std::ops::{Add, Mul, Sub};

use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, Zero};

pub trait Rate:
    Clone + Debug + PartialEq + PartialOrd + Zero + One + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self>
{
    /// Exact conversion from a finite float.
    fn from_f64(x: f64) -> Self;
    fn from_count(n: u32) -> Self;
    fn is_negative_rate(&self) -> bool {
        *self < Self::zero()
    }
    fn to_f64(&self) -> f64;
}

impl Rate for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_count(n: u32) -> Self {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Rate for BigRational {
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("rates are finite")
    }
    fn from_count(n: u32) -> Self {
        BigRational::from_u32(n).expect("u32 fits")
    }
    fn is_negative_rate(&self) -> bool {
        self.is_negative()
    }
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
}

/// The shortest decimal that round-trips to `x`, as an exact rational:
/// `0.8` becomes `4/5` rather than the binary value of the float.
pub fn decimal_rational(x: f64) -> BigRational {
    let text = format!("{x:e}");
    let (mantissa, exp) = text.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: num_bigint::BigInt = format!("{int}{frac}").parse().expect("decimal digits");
    let scale = exp - frac.len() as i32;
    let ten = num_bigint::BigInt::from(10);
    if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    }
}

/// Nearest float to an exact rational (ties to even).
pub fn rational_to_f64(q: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    if q.is_zero() {
        return 0.0;
    }
    let sign = if q.is_negative() { -1.0 } else { 1.0 };
    let n = q.numer().abs();
    let d = q.denom().abs();
    // scale so the integer quotient carries at least 66 significant bits;
    // a non-zero remainder is folded into the lowest bit as a sticky bit
    let shift = 66 + d.bits() as i64 - n.bits() as i64;
    let (num, den) = if shift >= 0 { (n << shift as usize, d) } else { (n, d << (-shift) as usize) };
    let (mut quot, rem) = (&num / &den, &num % &den);
    if !rem.is_zero() {
        quot |= num_bigint::BigInt::one();
    }
    let mant = quot.to_f64().unwrap_or(f64::INFINITY);
    let scaled = if shift.abs() < 1000 {
        mant * 2f64.powi(-shift as i32)
    } else {
        // split the power to stay out of overflow in the factor
        mant * 2f64.powi((-shift / 2) as i32) * 2f64.powi((-shift - (-shift / 2)) as i32)
    };
    sign * scaled
}
