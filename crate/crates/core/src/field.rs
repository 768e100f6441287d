//! Prime field arithmetic on `u64` residues.
//!
//! A [`FieldSpec`] is a validated prime modulus. It does arithmetic directly
//! on reduced residues, which is what the matrix and polynomial layers use.
//! [`FieldElem`] bundles a residue with its spec for call sites that want the
//! operator sugar; mixing elements of different fields is a programming error
//! and panics.

use thiserror::Error;

/// Largest modulus accepted. Keeps every product of two residues inside u64.
pub const MAX_MODULUS: u64 = (1 << 31) - 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    /// The requested modulus is not a prime number.
    #[error("{0} is not prime")]
    NotPrime(u64),
    /// The requested modulus exceeds the supported range.
    #[error("modulus {0} exceeds the maximum {MAX_MODULUS}")]
    ModulusTooLarge(u64),
    /// Multiplicative inverse of zero.
    #[error("division by zero in F_{0}")]
    DivisionByZero(u64),
}

/// A prime field `F_p`, identified by its modulus.
///
/// Construction validates primality, so holding a `FieldSpec` is proof that
/// `p` is a prime in `[2, 2^31 - 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldSpec {
    p: u64,
}

impl FieldSpec {
    /// Validates `p` and wraps it. Fails with [`FieldError::NotPrime`] or
    /// [`FieldError::ModulusTooLarge`].
    pub fn new(p: u64) -> Result<Self, FieldError> {
        if p > MAX_MODULUS {
            return Err(FieldError::ModulusTooLarge(p));
        }
        if !is_prime_u64(p) {
            return Err(FieldError::NotPrime(p));
        }
        Ok(FieldSpec { p })
    }

    pub fn modulus(self) -> u64 {
        self.p
    }

    /// Reduces an arbitrary integer into `[0, p)`.
    pub fn reduce(self, v: u64) -> u64 {
        v % self.p
    }

    pub fn add(self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.p && b < self.p);
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    pub fn sub(self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.p && b < self.p);
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    pub fn neg(self, a: u64) -> u64 {
        debug_assert!(a < self.p);
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    pub fn mul(self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.p && b < self.p);
        a * b % self.p
    }

    /// Square-and-multiply exponentiation. `pow(0, 0) = 1`.
    pub fn pow(self, mut base: u64, mut e: u64) -> u64 {
        debug_assert!(base < self.p);
        let mut acc = 1 % self.p;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by Fermat's little theorem.
    pub fn inv(self, a: u64) -> Result<u64, FieldError> {
        if a == 0 {
            return Err(FieldError::DivisionByZero(self.p));
        }
        Ok(self.pow(a, self.p - 2))
    }

    /// Wraps a (possibly unreduced) value as an element of this field.
    pub fn elem(self, v: u64) -> FieldElem {
        FieldElem {
            value: self.reduce(v),
            spec: self,
        }
    }
}

/// A single residue tagged with its field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElem {
    value: u64,
    spec: FieldSpec,
}

impl FieldElem {
    pub fn value(self) -> u64 {
        self.value
    }

    pub fn spec(self) -> FieldSpec {
        self.spec
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    pub fn pow(self, e: u64) -> FieldElem {
        FieldElem {
            value: self.spec.pow(self.value, e),
            spec: self.spec,
        }
    }

    pub fn inv(self) -> Result<FieldElem, FieldError> {
        Ok(FieldElem {
            value: self.spec.inv(self.value)?,
            spec: self.spec,
        })
    }

    fn assert_same_field(self, other: FieldElem) {
        assert_eq!(
            self.spec, other.spec,
            "arithmetic between elements of different fields"
        );
    }
}

impl std::ops::Add for FieldElem {
    type Output = FieldElem;
    fn add(self, rhs: FieldElem) -> FieldElem {
        self.assert_same_field(rhs);
        FieldElem {
            value: self.spec.add(self.value, rhs.value),
            spec: self.spec,
        }
    }
}

impl std::ops::Sub for FieldElem {
    type Output = FieldElem;
    fn sub(self, rhs: FieldElem) -> FieldElem {
        self.assert_same_field(rhs);
        FieldElem {
            value: self.spec.sub(self.value, rhs.value),
            spec: self.spec,
        }
    }
}

impl std::ops::Mul for FieldElem {
    type Output = FieldElem;
    fn mul(self, rhs: FieldElem) -> FieldElem {
        self.assert_same_field(rhs);
        FieldElem {
            value: self.spec.mul(self.value, rhs.value),
            spec: self.spec,
        }
    }
}

impl std::ops::Neg for FieldElem {
    type Output = FieldElem;
    fn neg(self) -> FieldElem {
        FieldElem {
            value: self.spec.neg(self.value),
            spec: self.spec,
        }
    }
}

impl std::fmt::Display for FieldElem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.value)
    }
}

fn mulmod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn powmod_u64(mut base: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod_u64(acc, base, m);
        }
        base = mulmod_u64(base, base, m);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin primality test, exact for all `u64`.
///
/// The witness set {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37} is known to
/// be sufficient below 2^64.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &q in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == q {
            return true;
        }
        if n % q == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d & 1 == 0 {
        d >>= 1;
        s += 1;
    }
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_composite_and_oversized_moduli() {
        assert_eq!(FieldSpec::new(1), Err(FieldError::NotPrime(1)));
        assert_eq!(FieldSpec::new(4), Err(FieldError::NotPrime(4)));
        assert_eq!(FieldSpec::new(561), Err(FieldError::NotPrime(561)));
        assert_eq!(
            FieldSpec::new(1 << 32),
            Err(FieldError::ModulusTooLarge(1 << 32))
        );
        assert!(FieldSpec::new(2).is_ok());
        assert!(FieldSpec::new(3).is_ok());
        assert!(FieldSpec::new(2147483647).is_ok());
    }

    #[test]
    fn primality_matches_trial_division_below_10000() {
        let trial = |n: u64| n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0);
        for n in 0..10_000u64 {
            assert_eq!(is_prime_u64(n), trial(n), "disagreement at {n}");
        }
    }

    #[test]
    fn known_carmichael_numbers_are_composite() {
        for n in [561u64, 1105, 1729, 2465, 2821, 6601, 8911, 825265] {
            assert!(!is_prime_u64(n), "{n} is a Carmichael number");
        }
    }

    #[test]
    fn pow_with_zero_exponent_is_one() {
        let f = FieldSpec::new(5).unwrap();
        assert_eq!(f.pow(0, 0), 1, "0^0 = 1 by convention");
        assert_eq!(f.pow(3, 0), 1);
    }

    #[test]
    fn inverse_of_zero_fails() {
        let f = FieldSpec::new(7).unwrap();
        assert_eq!(f.inv(0), Err(FieldError::DivisionByZero(7)));
    }

    #[test]
    fn inverse_example_over_f7() {
        let f = FieldSpec::new(7).unwrap();
        assert_eq!(f.inv(3).unwrap(), 5, "3 * 5 = 15 = 1 mod 7");
    }

    #[test]
    #[should_panic(expected = "different fields")]
    fn mixing_fields_panics() {
        let a = FieldSpec::new(3).unwrap().elem(1);
        let b = FieldSpec::new(5).unwrap().elem(1);
        let _ = a + b;
    }

    proptest! {
        #[test]
        fn field_axioms_hold(p in prop::sample::select(vec![2u64, 3, 5, 31, 65537]),
                             a in 0u64..1 << 20,
                             b in 0u64..1 << 20,
                             c in 0u64..1 << 20) {
            let f = FieldSpec::new(p).unwrap();
            let (a, b, c) = (f.reduce(a), f.reduce(b), f.reduce(c));
            prop_assert_eq!(f.add(a, b), f.add(b, a));
            prop_assert_eq!(f.mul(a, b), f.mul(b, a));
            prop_assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
            prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
            prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
            prop_assert_eq!(f.add(a, f.neg(a)), 0);
        }

        #[test]
        fn fermat_inverse_roundtrips(p in prop::sample::select(vec![3u64, 5, 31, 65537]),
                                     a in 1u64..1 << 20) {
            let f = FieldSpec::new(p).unwrap();
            let a = f.reduce(a);
            prop_assume!(a != 0);
            let inv = f.inv(a).unwrap();
            prop_assert_eq!(f.mul(a, inv), 1);
        }

        #[test]
        fn frobenius_fixes_every_residue(p in prop::sample::select(vec![2u64, 3, 5, 31]),
                                         a in 0u64..1 << 20) {
            let f = FieldSpec::new(p).unwrap();
            let a = f.reduce(a);
            prop_assert_eq!(f.pow(a, p), a, "x^p = x over F_p");
        }
    }
}
