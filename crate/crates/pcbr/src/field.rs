//! Arithmetic over small prime fields and storage of message subpackets.
//!
//! The retrieval scheme only ever forms {0,1}-linear combinations, so the
//! query/answer path needs nothing beyond addition and subtraction mod q.
//! Multiplication and inversion are provided for the linear-algebra
//! decodability oracle, which row-reduces over the same field.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Primes the CLI accepts for `q`.
pub const SUPPORTED_PRIMES: [u64; 5] = [2, 3, 5, 7, 11];

/// Trial-division primality check; inputs here are always small.
pub fn is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// An element of the prime field F_q, carrying its modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldElement {
    pub value: u64,
    pub modulus: u64,
}

impl FieldElement {
    /// Creates an element, reducing `value` mod `q`. Errors unless `q` is prime.
    pub fn new(value: u64, q: u64) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        Ok(FieldElement {
            value: value % q,
            modulus: q,
        })
    }

    pub fn zero(q: u64) -> Result<Self> {
        Self::new(0, q)
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    fn check_same_field(&self, other: &FieldElement) -> Result<()> {
        if self.modulus != other.modulus {
            return Err(Error::ModulusMismatch(self.modulus, other.modulus));
        }
        Ok(())
    }

    /// (a + b) mod q.
    pub fn add(&self, other: &FieldElement) -> Result<FieldElement> {
        self.check_same_field(other)?;
        Ok(FieldElement {
            value: (self.value + other.value) % self.modulus,
            modulus: self.modulus,
        })
    }

    /// (a - b) mod q.
    pub fn sub(&self, other: &FieldElement) -> Result<FieldElement> {
        self.check_same_field(other)?;
        Ok(FieldElement {
            value: (self.modulus + self.value - other.value) % self.modulus,
            modulus: self.modulus,
        })
    }

    /// (a * b) mod q. Used only by the elimination oracle.
    pub fn mul(&self, other: &FieldElement) -> Result<FieldElement> {
        self.check_same_field(other)?;
        Ok(FieldElement {
            value: mul_mod(self.value, other.value, self.modulus),
            modulus: self.modulus,
        })
    }

    /// Multiplicative inverse of a nonzero element.
    pub fn inv(&self) -> Result<FieldElement> {
        if self.is_zero() {
            return Err(Error::Decode("cannot invert zero".into()));
        }
        Ok(FieldElement {
            value: inv_mod(self.value, self.modulus),
            modulus: self.modulus,
        })
    }
}

pub(crate) fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

/// Inverse by Fermat's little theorem: a^(q-2) mod q.
pub(crate) fn inv_mod(a: u64, q: u64) -> u64 {
    debug_assert!(!a.is_multiple_of(q));
    let mut base = a % q;
    let mut e = q - 2;
    let mut acc = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, base, q);
        }
        base = mul_mod(base, base, q);
        e >>= 1;
    }
    acc
}

/// K messages of L subpackets each, all symbols in F_q.
///
/// Serializes as `{"q": .., "K": .., "L": .., "data": [[..], ..]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageStore {
    pub q: u64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L")]
    pub l: usize,
    /// K rows of L raw values, each already reduced mod q.
    pub data: Vec<Vec<u64>>,
}

impl MessageStore {
    /// Draws a K x L store of uniform F_q symbols from a seeded ChaCha8 stream.
    /// Deterministic for a fixed `(seed, q, K, L)`.
    pub fn generate(seed: u64, q: u64, k: usize, l: usize) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        if k == 0 || l == 0 {
            return Err(Error::InvalidParams(
                "store dimensions K and L must be >= 1".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..k)
            .map(|_| (0..l).map(|_| rng.random_range(0..q)).collect())
            .collect();
        Ok(MessageStore { q, k, l, data })
    }

    pub fn zeros(q: u64, k: usize, l: usize) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        Ok(MessageStore {
            q,
            k,
            l,
            data: vec![vec![0; l]; k],
        })
    }

    /// Subpacket `index` of message `message`; both 1-based.
    pub fn get(&self, message: usize, index: usize) -> Result<FieldElement> {
        if message == 0 || message > self.k || index == 0 || index > self.l {
            return Err(Error::IndexOutOfRange {
                message,
                index,
                l: self.l,
            });
        }
        Ok(FieldElement {
            value: self.data[message - 1][index - 1],
            modulus: self.q,
        })
    }

    /// Row of message `message` (1-based) as field elements.
    pub fn row(&self, message: usize) -> Result<Vec<FieldElement>> {
        if message == 0 || message > self.k {
            return Err(Error::IndexOutOfRange {
                message,
                index: 1,
                l: self.l,
            });
        }
        Ok(self.data[message - 1]
            .iter()
            .map(|&v| FieldElement {
                value: v,
                modulus: self.q,
            })
            .collect())
    }

    /// Elementwise sum of two stores with identical shape and modulus.
    pub fn add(&self, other: &MessageStore) -> Result<MessageStore> {
        if self.q != other.q {
            return Err(Error::ModulusMismatch(self.q, other.q));
        }
        if self.k != other.k || self.l != other.l {
            return Err(Error::StoreMismatch(format!(
                "{}x{} vs {}x{}",
                self.k, self.l, other.k, other.l
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x + y) % self.q).collect())
            .collect();
        Ok(MessageStore {
            q: self.q,
            k: self.k,
            l: self.l,
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fe(v: u64, q: u64) -> FieldElement {
        FieldElement::new(v, q).unwrap()
    }

    #[test]
    fn add_examples() {
        assert_eq!(fe(1, 2).add(&fe(1, 2)).unwrap(), fe(0, 2));
        assert_eq!(fe(2, 5).add(&fe(4, 5)).unwrap(), fe(1, 5));
        for q in [2, 3, 5, 7, 11] {
            for x in 0..q {
                assert_eq!(fe(0, q).add(&fe(x, q)).unwrap(), fe(x, q));
            }
        }
    }

    #[test]
    fn sub_examples() {
        for q in [2, 5, 7] {
            for x in 0..q {
                assert_eq!(fe(x, q).sub(&fe(x, q)).unwrap(), fe(0, q));
            }
        }
        assert_eq!(fe(1, 2).sub(&fe(1, 2)).unwrap(), fe(0, 2));
        assert_eq!(fe(1, 5).sub(&fe(3, 5)).unwrap(), fe(3, 5));
    }

    #[test]
    fn modulus_mismatch_rejected() {
        let e = fe(1, 2).add(&fe(1, 3)).unwrap_err();
        assert_eq!(e, Error::ModulusMismatch(2, 3));
        assert!(fe(1, 2).sub(&fe(1, 3)).is_err());
    }

    #[test]
    fn add_sub_form_a_group() {
        // Exhaustive: add(sub(a, b), b) == a for every pair over each small field.
        for q in [2, 3, 5, 7] {
            for a in 0..q {
                for b in 0..q {
                    let got = fe(a, q).sub(&fe(b, q)).unwrap().add(&fe(b, q)).unwrap();
                    assert_eq!(got, fe(a, q));
                    assert!(got.value < q);
                }
            }
        }
    }

    #[test]
    fn mul_inv_roundtrip() {
        for q in [2, 3, 5, 7, 11] {
            for a in 1..q {
                let x = fe(a, q);
                assert_eq!(x.mul(&x.inv().unwrap()).unwrap(), fe(1, q));
            }
        }
    }

    #[test]
    fn nonprime_modulus_rejected() {
        assert_eq!(FieldElement::new(1, 4).unwrap_err(), Error::NotPrime(4));
        assert!(MessageStore::generate(0, 6, 2, 2).is_err());
        assert!(MessageStore::generate(0, 1, 2, 2).is_err());
    }

    #[test]
    fn store_generation_is_deterministic() {
        let a = MessageStore::generate(42, 5, 4, 6).unwrap();
        let b = MessageStore::generate(42, 5, 4, 6).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn adjacent_seeds_differ() {
        let mut differing = 0;
        for seed in 0..100u64 {
            let a = MessageStore::generate(seed, 2, 5, 8).unwrap();
            let b = MessageStore::generate(seed + 1, 2, 5, 8).unwrap();
            if a != b {
                differing += 1;
            }
        }
        // 40 fair bits per store; a collision is essentially impossible.
        assert_eq!(differing, 100);
    }

    #[test]
    fn store_dimensions() {
        let s = MessageStore::generate(7, 2, 5, 8).unwrap();
        assert_eq!(s.data.len(), 5);
        assert!(s.data.iter().all(|row| row.len() == 8));
        assert!(s.data.iter().flatten().all(|&v| v < 2));
    }

    #[test]
    fn store_json_roundtrip() {
        let s = MessageStore::generate(3, 3, 2, 4).unwrap();
        let js = serde_json::to_string(&s).unwrap();
        assert!(js.contains("\"q\":3") && js.contains("\"K\":2") && js.contains("\"L\":4"));
        let back: MessageStore = serde_json::from_str(&js).unwrap();
        assert_eq!(back, s);
    }
}
