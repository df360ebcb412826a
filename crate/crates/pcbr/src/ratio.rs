//! Helpers for exact rational values.
//!
//! All rates and bounds in this crate are `BigRational`s; nothing on the
//! reporting path ever converts a rate to floating point.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Zero};
use serde_json::{json, Value};

pub use num::rational::BigRational as Rational;

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: u64) -> BigInt {
    BigInt::from(n)
}

/// 1 + N + ... + N^(x-1), evaluated as an explicit sum.
pub fn geometric_sum(n: u64, x: usize) -> BigInt {
    let base = int(n);
    let mut term = BigInt::one();
    let mut acc = BigInt::zero();
    for _ in 0..x {
        acc += &term;
        term *= &base;
    }
    acc
}

pub fn pow(n: u64, e: usize) -> BigInt {
    int(n).pow(e as u32)
}

/// "num/den", always with an explicit denominator.
pub fn format_ratio(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// `{"num": .., "den": ..}` with JSON integers where they fit, decimal
/// strings beyond that.
pub fn ratio_to_json(r: &BigRational) -> Value {
    json!({
        "num": bigint_to_json(r.numer()),
        "den": bigint_to_json(r.denom()),
    })
}

pub fn bigint_to_json(v: &BigInt) -> Value {
    use num::ToPrimitive;
    if let Some(i) = v.to_i64() {
        json!(i)
    } else if let Some(u) = v.to_u64() {
        json!(u)
    } else {
        json!(v.to_string())
    }
}
