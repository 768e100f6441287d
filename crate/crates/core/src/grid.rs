//! State enumeration helpers for `F_p^n`.
//!
//! States are encoded as mixed-radix indices with `x1` as the least
//! significant digit, so index 0 is the origin and enumeration order is
//! deterministic everywhere (oracle tables, coset enumeration, reports).

use crate::field::FieldSpec;

/// Number of states `p^n`, or `None` if it does not fit a `usize`.
pub fn state_count(spec: FieldSpec, n: usize) -> Option<usize> {
    let p = spec.modulus() as usize;
    let mut acc: usize = 1;
    for _ in 0..n {
        acc = acc.checked_mul(p)?;
    }
    Some(acc)
}

/// Decodes an index into the state `(x1, ..., xn)`.
pub fn index_to_state(spec: FieldSpec, n: usize, mut idx: usize) -> Vec<u64> {
    let p = spec.modulus() as usize;
    let mut x = Vec::with_capacity(n);
    for _ in 0..n {
        x.push((idx % p) as u64);
        idx /= p;
    }
    x
}

/// Encodes a state as its enumeration index. Values must be reduced.
pub fn state_to_index(spec: FieldSpec, x: &[u64]) -> usize {
    let p = spec.modulus() as usize;
    let mut idx: usize = 0;
    for &v in x.iter().rev() {
        debug_assert!(v < spec.modulus());
        idx = idx * p + v as usize;
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip_is_exhaustive_and_ordered() {
        let f = FieldSpec::new(3).unwrap();
        let mut seen = Vec::new();
        for idx in 0..state_count(f, 2).unwrap() {
            let x = index_to_state(f, 2, idx);
            assert_eq!(state_to_index(f, &x), idx);
            seen.push(x);
        }
        assert_eq!(seen.len(), 9);
        assert_eq!(seen[0], vec![0, 0]);
        assert_eq!(seen[1], vec![1, 0], "x1 is the least significant digit");
        assert_eq!(seen[3], vec![0, 1]);
    }

    #[test]
    fn state_count_overflow_is_none() {
        let f = FieldSpec::new(5).unwrap();
        assert_eq!(state_count(f, 200), None);
    }
}
