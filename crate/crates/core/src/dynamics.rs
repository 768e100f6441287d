//! Solution structure of a finite state system read off its reduced linear
//! model: fixed points, candidate orbit lengths, and transient bounds.
//!
//! The reduced transition matrix `K1` satisfies `psi_hat(F(x)) = K1 *
//! psi_hat(x)` with `psi_hat` injective on states, so cycles and chains of
//! the nonlinear map embed into the linear dynamics of `K1`. Its elementary
//! divisors then bound the behavior:
//!
//! - every orbit length divides a length predicted from the divisor orders;
//! - transient chain lengths are at most the nilpotency index (the largest
//!   exponent of a divisor with base `x`);
//! - states fixed by `F` correspond exactly to vectors in the kernel of
//!   `K1 - I` that are consistent, meaning `y = psi_hat(C y)`.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::intfactor::factor_u64;
use crate::koopman::KoopmanReduction;
use crate::matrix::MatrixFp;
use crate::sysdef::FssSystem;
use crate::unipoly::{self, LinalgError, UniPoly};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DynamicsError {
    /// A candidate set is larger than the enumeration cap.
    #[error("enumeration of {needed} candidates exceeds cap of {cap}")]
    EnumerationCapExceeded { needed: u128, cap: u64 },
    /// A predicted orbit length does not fit in 128 bits.
    #[error("predicted orbit length exceeds 128 bits")]
    PeriodOverflow,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Structure of the system as certified by its reduced linear model.
#[derive(Debug, Clone)]
pub struct StructureReport {
    /// Dimension `N` of the reduced model.
    pub dim: usize,
    pub min_poly: UniPoly,
    /// Multiset of elementary divisors of `K1` as (base, exponent) pairs.
    pub elementary_divisors: Vec<(UniPoly, u32)>,
    /// Every orbit length of the system lies in this set.
    pub predicted_orbit_lengths: BTreeSet<u128>,
    /// Upper bound on transient chain lengths.
    pub nilpotency_index: u32,
    /// All fixed points of the update map, sorted.
    pub fixed_points: Vec<Vec<u64>>,
}

/// Candidate orbit lengths implied by the elementary divisors: each divisor
/// `f^m` with `f != x` contributes `ord(f) * p^ceil(log_p k)` for
/// `k = 1..=m` (plus 1), and the system can realize any least common
/// multiple of one choice per divisor.
pub fn predicted_orbit_lengths(
    divisors: &[(UniPoly, u32)],
    p: u64,
) -> Result<BTreeSet<u128>, DynamicsError> {
    let mut overall: BTreeSet<u128> = BTreeSet::new();
    overall.insert(1);
    for (base, mult) in divisors {
        if base.coeffs() == [0, 1] {
            continue;
        }
        let ord = unipoly::poly_order(base)?;
        let mut contribution: BTreeSet<u128> = BTreeSet::new();
        contribution.insert(1);
        for k in 1..=*mult {
            let mut pk: u128 = 1;
            while pk < k as u128 {
                pk = pk.checked_mul(p as u128).ok_or(DynamicsError::PeriodOverflow)?;
            }
            let len = ord.checked_mul(pk).ok_or(DynamicsError::PeriodOverflow)?;
            contribution.insert(len);
        }
        let mut combined = BTreeSet::new();
        for &a in &overall {
            for &b in &contribution {
                combined.insert(lcm_u128(a, b).ok_or(DynamicsError::PeriodOverflow)?);
            }
        }
        overall = combined;
    }
    Ok(overall)
}

pub(crate) fn lcm_u128(a: u128, b: u128) -> Option<u128> {
    let mut x = a;
    let mut y = b;
    while y != 0 {
        let r = x % y;
        x = y;
        y = r;
    }
    (a / x).checked_mul(b)
}

/// Largest exponent among elementary divisors with base `x`; zero when the
/// transition matrix is invertible.
pub fn nilpotency_index(divisors: &[(UniPoly, u32)]) -> u32 {
    divisors
        .iter()
        .filter(|(base, _)| base.coeffs() == [0, 1])
        .map(|&(_, m)| m)
        .max()
        .unwrap_or(0)
}

/// Enumerates all vectors of a subspace given its basis, visiting
/// coefficient tuples in mixed-radix order.
fn enumerate_span(
    spec: crate::field::FieldSpec,
    basis: &[Vec<u64>],
    dim: usize,
    cap: u64,
) -> Result<Vec<Vec<u64>>, DynamicsError> {
    let p = spec.modulus();
    let mut total: u128 = 1;
    for _ in 0..basis.len() {
        total = total.saturating_mul(p as u128);
    }
    if total > cap as u128 {
        return Err(DynamicsError::EnumerationCapExceeded { needed: total, cap });
    }
    let mut out = Vec::with_capacity(total as usize);
    let mut coeffs = vec![0u64; basis.len()];
    loop {
        let mut v = vec![0u64; dim];
        for (c, b) in coeffs.iter().zip(basis) {
            if *c == 0 {
                continue;
            }
            for (slot, &e) in v.iter_mut().zip(b) {
                *slot = spec.add(*slot, spec.mul(*c, e));
            }
        }
        out.push(v);
        let mut i = 0;
        while i < coeffs.len() {
            coeffs[i] += 1;
            if coeffs[i] < p {
                break;
            }
            coeffs[i] = 0;
            i += 1;
        }
        if i == coeffs.len() {
            break;
        }
    }
    Ok(out)
}

/// Filters kernel vectors down to those realized by actual states: `y` is
/// kept iff `y = psi_hat(C y)`, and the state it certifies is `C y`.
fn consistent_states(red: &KoopmanReduction, candidates: &[Vec<u64>]) -> Vec<Vec<u64>> {
    let mut states: Vec<Vec<u64>> = candidates
        .iter()
        .filter_map(|y| {
            let x = red.c().mul_vec(y);
            (red.psi_hat(&x) == *y).then_some(x)
        })
        .collect();
    states.sort();
    states.dedup();
    states
}

/// All fixed points of the update map, found as consistent kernel vectors
/// of `K1 - I` and returned sorted.
pub fn fixed_points(
    red: &KoopmanReduction,
    enum_cap: u64,
) -> Result<Vec<Vec<u64>>, DynamicsError> {
    periodic_points_raw(red, 1, enum_cap)
}

/// States of period dividing `length` (consistent kernel of `K1^length -
/// I`), paired with their exact least periods, sorted by state.
pub fn periodic_points(
    red: &KoopmanReduction,
    length: u64,
    enum_cap: u64,
) -> Result<Vec<(Vec<u64>, u64)>, DynamicsError> {
    assert!(length >= 1, "period must be positive");
    let states = periodic_points_raw(red, length, enum_cap)?;
    let sys = red.system();
    Ok(states
        .into_iter()
        .map(|x| {
            let exact = exact_period(sys, &x, length);
            (x, exact)
        })
        .collect())
}

fn periodic_points_raw(
    red: &KoopmanReduction,
    length: u64,
    enum_cap: u64,
) -> Result<Vec<Vec<u64>>, DynamicsError> {
    let k1 = red.k1();
    let spec = k1.spec();
    let shifted = k1.pow(length).sub(&MatrixFp::identity(spec, k1.rows()));
    let kernel = shifted.kernel_basis();
    let candidates = enumerate_span(spec, &kernel, k1.rows(), enum_cap)?;
    let states = consistent_states(red, &candidates);
    debug_assert!(
        length > 10_000
            || states.iter().all(|x| iterate(red.system(), x, length) == *x)
    );
    Ok(states)
}

/// Least period of a state known to satisfy `F^bound(x) = x`, by dividing
/// prime factors out of the bound.
fn exact_period(sys: &FssSystem, x: &[u64], bound: u64) -> u64 {
    let mut e = bound;
    for (&q, _) in factor_u64(bound).iter() {
        while e % q == 0 && iterate(sys, x, e / q) == x {
            e /= q;
        }
    }
    e
}

fn iterate(sys: &FssSystem, x: &[u64], steps: u64) -> Vec<u64> {
    let mut cur = x.to_vec();
    for _ in 0..steps {
        cur = sys.step(&cur);
    }
    cur
}

/// Transient length and orbit length of one state, by direct iteration
/// with a visited map.
pub fn classify_state(sys: &FssSystem, x0: &[u64]) -> (u64, u64) {
    let mut seen: std::collections::HashMap<Vec<u64>, u64> = std::collections::HashMap::new();
    let mut cur: Vec<u64> = x0.iter().map(|&v| sys.spec().reduce(v)).collect();
    let mut step = 0u64;
    loop {
        if let Some(&first) = seen.get(&cur) {
            return (first, step - first);
        }
        seen.insert(cur.clone(), step);
        cur = sys.step(&cur);
        step += 1;
    }
}

/// Full structure analysis of a reduction: minimal polynomial, elementary
/// divisors, predicted orbit lengths, the transient bound, and all fixed
/// points. The seed feeds factorization fallback randomness only.
pub fn analyze_structure(
    red: &KoopmanReduction,
    seed: u64,
    enum_cap: u64,
) -> Result<StructureReport, DynamicsError> {
    let k1 = red.k1();
    let min_poly = k1.minimal_polynomial()?;
    let elementary_divisors = k1.elementary_divisors(seed)?;
    let predicted =
        predicted_orbit_lengths(&elementary_divisors, k1.spec().modulus())?;
    let nilpotency = nilpotency_index(&elementary_divisors);
    let fixed = fixed_points(red, enum_cap)?;
    Ok(StructureReport {
        dim: red.dim(),
        min_poly,
        elementary_divisors,
        predicted_orbit_lengths: predicted,
        nilpotency_index: nilpotency,
        fixed_points: fixed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;
    use crate::koopman::build_reduction;
    use crate::sysdef::parse_system;

    fn f3() -> FieldSpec {
        FieldSpec::new(3).unwrap()
    }

    fn obs3() -> KoopmanReduction {
        let sys = parse_system(
            "field 3\nvars x1 x2\nupdate x1 = 2*x1 + x2\nupdate x2 = x1 + x2\noutput z1 = x1^2 + x2\n",
        )
        .unwrap();
        build_reduction(&sys, true, 100).unwrap()
    }

    fn d1() -> KoopmanReduction {
        let sys =
            parse_system("field 2\nvars x1 x2\nupdate x1 = x2\nupdate x2 = x1*x2\n").unwrap();
        build_reduction(&sys, false, 100).unwrap()
    }

    #[test]
    fn structure_of_the_three_state_example() {
        let report = analyze_structure(&obs3(), 0, 1 << 16).unwrap();
        assert_eq!(report.dim, 4);
        assert_eq!(
            report.min_poly,
            UniPoly::from_coeffs(f3(), vec![2, 0, 0, 0, 1])
        );
        assert_eq!(
            report.predicted_orbit_lengths,
            BTreeSet::from([1, 2, 4])
        );
        assert_eq!(report.nilpotency_index, 0);
        assert_eq!(report.fixed_points, vec![vec![0, 0]]);
    }

    #[test]
    fn structure_of_the_product_system() {
        let report = analyze_structure(&d1(), 0, 1 << 16).unwrap();
        assert_eq!(report.dim, 3);
        assert_eq!(
            report.min_poly,
            UniPoly::from_coeffs(FieldSpec::new(2).unwrap(), vec![0, 0, 1, 1])
        );
        assert_eq!(report.predicted_orbit_lengths, BTreeSet::from([1]));
        assert_eq!(report.nilpotency_index, 2);
        assert_eq!(report.fixed_points, vec![vec![0, 0], vec![1, 1]]);
    }

    #[test]
    fn periodic_points_at_the_full_period() {
        let points = periodic_points(&obs3(), 4, 1 << 16).unwrap();
        assert_eq!(points.len(), 9);
        let fixed: Vec<_> = points.iter().filter(|(_, p)| *p == 1).collect();
        assert_eq!(fixed, vec![&(vec![0, 0], 1)]);
        assert_eq!(points.iter().filter(|(_, p)| *p == 4).count(), 8);
        // Spot-check the known cycle through (2, 0).
        assert!(points.contains(&(vec![2, 0], 4)));
        assert!(points.contains(&(vec![1, 2], 4)));
    }

    #[test]
    fn period_two_points_of_the_three_state_example() {
        // K1^2 - I has kernel, but only the fixed point is consistent: the
        // real system has no 2-cycles (orbit lengths are 1 and 4).
        let points = periodic_points(&obs3(), 2, 1 << 16).unwrap();
        assert_eq!(points, vec![(vec![0, 0], 1)]);
    }

    #[test]
    fn enumeration_cap_is_typed() {
        let err = periodic_points(&obs3(), 4, 10).unwrap_err();
        assert_eq!(
            err,
            DynamicsError::EnumerationCapExceeded { needed: 81, cap: 10 }
        );
    }

    #[test]
    fn classify_walks_transients_and_cycles() {
        let obs = obs3();
        assert_eq!(classify_state(obs.system(), &[2, 0]), (0, 4));
        assert_eq!(classify_state(obs.system(), &[0, 0]), (0, 1));
        let d = d1();
        assert_eq!(classify_state(d.system(), &[0, 1]), (2, 1));
        assert_eq!(classify_state(d.system(), &[1, 1]), (0, 1));
    }

    #[test]
    fn predicted_lengths_combine_divisors_by_lcm() {
        let f2 = FieldSpec::new(2).unwrap();
        // (x^4+x^3+x^2+x+1) has order 5; (x+1)^2 contributes {1, 2}; their
        // joint predictions multiply out to {1, 2, 5, 10}.
        let divisors = vec![
            (UniPoly::from_coeffs(f2, vec![1, 1, 1, 1, 1]), 2),
            (UniPoly::from_coeffs(f2, vec![1, 1]), 2),
            (UniPoly::from_coeffs(f2, vec![0, 1]), 4),
        ];
        let got = predicted_orbit_lengths(&divisors, 2).unwrap();
        assert_eq!(got, BTreeSet::from([1, 2, 5, 10]));
        assert_eq!(nilpotency_index(&divisors), 4);
    }
}
