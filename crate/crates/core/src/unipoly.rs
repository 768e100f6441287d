//! Univariate polynomials over `F_p`: arithmetic, factorization, and
//! multiplicative order.
//!
//! These are the polynomials of the *analysis* layer (minimal polynomials,
//! invariant factors, elementary divisors), as opposed to the multivariate
//! state functions in [`crate::poly`]. Coefficients are stored low to high
//! with no trailing zeros; the zero polynomial has an empty coefficient
//! vector.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::field::FieldSpec;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    /// Operation requires a square matrix.
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    /// Multiplicative order is undefined when x divides the polynomial.
    #[error("polynomial has zero constant term, order undefined")]
    ConstantTermZero,
    /// `p^degree - 1` does not fit in 128 bits, so the order cannot be
    /// computed by factoring it.
    #[error("p^{degree} - 1 exceeds 128 bits")]
    OrderTooLarge { degree: usize },
}

/// A univariate polynomial over a prime field, trimmed and low-to-high.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UniPoly {
    spec: FieldSpec,
    coeffs: Vec<u64>,
}

impl UniPoly {
    pub fn zero(spec: FieldSpec) -> Self {
        UniPoly {
            spec,
            coeffs: Vec::new(),
        }
    }

    pub fn one(spec: FieldSpec) -> Self {
        Self::constant(spec, 1)
    }

    pub fn constant(spec: FieldSpec, c: u64) -> Self {
        Self::from_coeffs(spec, vec![c])
    }

    /// The polynomial `x`.
    pub fn x(spec: FieldSpec) -> Self {
        Self::from_coeffs(spec, vec![0, 1])
    }

    /// `c * x^k`.
    pub fn monomial(spec: FieldSpec, k: usize, c: u64) -> Self {
        let mut coeffs = vec![0; k + 1];
        coeffs[k] = c;
        Self::from_coeffs(spec, coeffs)
    }

    /// Builds from raw coefficients (low to high), reducing and trimming.
    pub fn from_coeffs(spec: FieldSpec, mut coeffs: Vec<u64>) -> Self {
        for c in coeffs.iter_mut() {
            *c = spec.reduce(*c);
        }
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        UniPoly { spec, coeffs }
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs == [1]
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading_coeff(&self) -> u64 {
        *self.coeffs.last().unwrap_or(&0)
    }

    pub fn coeff(&self, k: usize) -> u64 {
        self.coeffs.get(k).copied().unwrap_or(0)
    }

    pub fn is_monic(&self) -> bool {
        self.leading_coeff() == 1
    }

    fn assert_same_field(&self, other: &UniPoly) {
        assert_eq!(self.spec, other.spec, "polynomials over different fields");
    }

    pub fn add(&self, other: &UniPoly) -> UniPoly {
        self.assert_same_field(other);
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0; len];
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self.spec.add(self.coeff(k), other.coeff(k));
        }
        UniPoly::from_coeffs(self.spec, out)
    }

    pub fn sub(&self, other: &UniPoly) -> UniPoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> UniPoly {
        let coeffs = self.coeffs.iter().map(|&c| self.spec.neg(c)).collect();
        UniPoly {
            spec: self.spec,
            coeffs,
        }
    }

    pub fn scale(&self, c: u64) -> UniPoly {
        let c = self.spec.reduce(c);
        let coeffs = self.coeffs.iter().map(|&a| self.spec.mul(a, c)).collect();
        UniPoly::from_coeffs(self.spec, coeffs)
    }

    pub fn mul(&self, other: &UniPoly) -> UniPoly {
        self.assert_same_field(other);
        if self.is_zero() || other.is_zero() {
            return UniPoly::zero(self.spec);
        }
        let mut out = vec![0u64; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] = self.spec.add(out[i + j], self.spec.mul(a, b));
            }
        }
        UniPoly::from_coeffs(self.spec, out)
    }

    /// Division with remainder. Panics on a zero divisor.
    pub fn divrem(&self, divisor: &UniPoly) -> (UniPoly, UniPoly) {
        self.assert_same_field(divisor);
        assert!(!divisor.is_zero(), "division by the zero polynomial");
        let dd = divisor.degree().unwrap();
        if self.degree().map_or(true, |d| d < dd) {
            return (UniPoly::zero(self.spec), self.clone());
        }
        let spec = self.spec;
        let lead_inv = spec.inv(divisor.leading_coeff()).expect("nonzero lead");
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0u64; rem.len() - dd];
        for k in (dd..rem.len()).rev() {
            let c = spec.mul(rem[k], lead_inv);
            if c == 0 {
                continue;
            }
            quot[k - dd] = c;
            for (j, &b) in divisor.coeffs.iter().enumerate() {
                rem[k - dd + j] = spec.sub(rem[k - dd + j], spec.mul(c, b));
            }
        }
        (
            UniPoly::from_coeffs(spec, quot),
            UniPoly::from_coeffs(spec, rem),
        )
    }

    pub fn rem(&self, modulus: &UniPoly) -> UniPoly {
        self.divrem(modulus).1
    }

    /// Exact division; panics if the division leaves a remainder.
    pub fn div_exact(&self, divisor: &UniPoly) -> UniPoly {
        let (q, r) = self.divrem(divisor);
        assert!(r.is_zero(), "inexact polynomial division");
        q
    }

    pub fn divides(&self, other: &UniPoly) -> bool {
        if self.is_zero() {
            return other.is_zero();
        }
        other.divrem(self).1.is_zero()
    }

    /// Monic normalization. The zero polynomial stays zero.
    pub fn monic(&self) -> UniPoly {
        if self.is_zero() || self.is_monic() {
            return self.clone();
        }
        let inv = self.spec.inv(self.leading_coeff()).expect("nonzero lead");
        self.scale(inv)
    }

    /// Monic greatest common divisor.
    pub fn gcd(&self, other: &UniPoly) -> UniPoly {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    /// Monic least common multiple.
    pub fn lcm(&self, other: &UniPoly) -> UniPoly {
        if self.is_zero() || other.is_zero() {
            return UniPoly::zero(self.spec);
        }
        let g = self.gcd(other);
        self.mul(other).div_exact(&g).monic()
    }

    pub fn derivative(&self) -> UniPoly {
        if self.coeffs.len() <= 1 {
            return UniPoly::zero(self.spec);
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| self.spec.mul(self.spec.reduce(k as u64), c))
            .collect();
        UniPoly::from_coeffs(self.spec, coeffs)
    }

    pub fn eval(&self, at: u64) -> u64 {
        let spec = self.spec;
        let at = spec.reduce(at);
        let mut acc = 0u64;
        for &c in self.coeffs.iter().rev() {
            acc = spec.add(spec.mul(acc, at), c);
        }
        acc
    }

    /// `self^e mod modulus` with a 128-bit exponent.
    pub fn pow_mod(&self, mut e: u128, modulus: &UniPoly) -> UniPoly {
        let mut acc = UniPoly::one(self.spec).rem(modulus);
        let mut base = self.rem(modulus);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base).rem(modulus);
            }
            base = base.mul(&base).rem(modulus);
            e >>= 1;
        }
        acc
    }

    /// Compact text without spaces, used inside factored products.
    pub fn render_compact(&self) -> String {
        self.render(false)
    }

    fn render(&self, spaced: bool) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let sep = if spaced { " + " } else { "+" };
        let mut parts = Vec::new();
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            let part = match k {
                0 => c.to_string(),
                1 if c == 1 => "x".to_string(),
                1 => format!("{c}*x"),
                _ if c == 1 => format!("x^{k}"),
                _ => format!("{c}*x^{k}"),
            };
            parts.push(part);
        }
        parts.join(sep)
    }
}

impl std::fmt::Display for UniPoly {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.render(true))
    }
}

/// Renders a factored product like `x^4 (x+1)^2 (x^4+x^3+x^2+x+1)^2`:
/// factors separated by spaces, compact bases, parentheses except for the
/// bare monomial `x`.
pub fn render_factored(factors: &[(UniPoly, u32)]) -> String {
    if factors.is_empty() {
        return "1".to_string();
    }
    let mut parts = Vec::with_capacity(factors.len());
    for (base, mult) in factors {
        let bare_x = base.coeffs() == [0, 1];
        let rendered = if bare_x {
            "x".to_string()
        } else {
            format!("({})", base.render_compact())
        };
        if *mult == 1 {
            parts.push(rendered);
        } else {
            parts.push(format!("{rendered}^{mult}"));
        }
    }
    parts.join(" ")
}

/// `p`-th root of a polynomial whose derivative vanishes: over `F_p` such a
/// polynomial is `g(x^p)` and `g` has the same coefficients.
fn pth_root(f: &UniPoly) -> UniPoly {
    let p = f.spec.modulus() as usize;
    let coeffs: Vec<u64> = f.coeffs.iter().step_by(p).copied().collect();
    debug_assert!(f
        .coeffs
        .iter()
        .enumerate()
        .all(|(k, &c)| k % p == 0 || c == 0));
    UniPoly::from_coeffs(f.spec, coeffs)
}

/// Squarefree decomposition of a monic polynomial: pairwise coprime monic
/// squarefree parts with their multiplicities, in increasing multiplicity
/// order within each recursion level.
pub fn squarefree_decomposition(f: &UniPoly) -> Vec<(UniPoly, u32)> {
    let mut out = Vec::new();
    decompose_into(&f.monic(), 1, &mut out);
    out.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| cmp_poly(&a.0, &b.0)));
    out
}

fn decompose_into(f: &UniPoly, scale: u32, out: &mut Vec<(UniPoly, u32)>) {
    if f.degree().unwrap_or(0) == 0 {
        return;
    }
    let p = f.spec.modulus() as u32;
    let d = f.derivative();
    if d.is_zero() {
        decompose_into(&pth_root(f), scale * p, out);
        return;
    }
    let mut c = f.gcd(&d);
    let mut w = f.div_exact(&c);
    let mut i = 1u32;
    while w.degree().unwrap_or(0) > 0 {
        let y = w.gcd(&c);
        let z = w.div_exact(&y);
        if z.degree().unwrap_or(0) > 0 {
            out.push((z.monic(), i * scale));
        }
        c = c.div_exact(&y);
        w = y;
        i += 1;
    }
    if c.degree().unwrap_or(0) > 0 {
        decompose_into(&pth_root(&c), scale * p, out);
    }
}

fn cmp_poly(a: &UniPoly, b: &UniPoly) -> std::cmp::Ordering {
    a.coeffs
        .len()
        .cmp(&b.coeffs.len())
        .then_with(|| a.coeffs.cmp(&b.coeffs))
}

/// Distinct-degree factorization of a monic squarefree polynomial: returns
/// `(product of irreducible factors of degree d, d)` pairs, ascending in `d`.
fn distinct_degree(f: &UniPoly) -> Vec<(UniPoly, usize)> {
    let spec = f.spec;
    let p = spec.modulus();
    let mut out = Vec::new();
    let mut fstar = f.clone();
    let mut h = UniPoly::x(spec).rem(&fstar);
    let mut d = 0usize;
    while fstar.degree().unwrap_or(0) >= 1 {
        d += 1;
        if 2 * d > fstar.degree().unwrap() {
            let deg = fstar.degree().unwrap();
            out.push((fstar, deg));
            break;
        }
        h = h.pow_mod(p as u128, &fstar);
        let probe = h.sub(&UniPoly::x(spec));
        let g = probe.gcd(&fstar);
        if g.degree().unwrap_or(0) > 0 {
            fstar = fstar.div_exact(&g);
            h = h.rem(&fstar);
            out.push((g, d));
        }
    }
    out
}

/// Splits a monic squarefree product of degree-`d` irreducibles into its
/// factors. Tries a deterministic sweep of small candidate polynomials
/// first (exhaustive for tiny fields), then falls back to seeded random
/// candidates, so results are reproducible for a fixed seed.
fn equal_degree(g: &UniPoly, d: usize, seed: u64, out: &mut Vec<UniPoly>) {
    let deg = g.degree().unwrap();
    if deg == d {
        out.push(g.monic());
        return;
    }
    let splitter = find_splitter(g, d, seed);
    let rest = g.div_exact(&splitter);
    equal_degree(&splitter, d, seed.wrapping_add(1), out);
    equal_degree(&rest, d, seed.wrapping_add(1), out);
}

fn find_splitter(g: &UniPoly, d: usize, seed: u64) -> UniPoly {
    let spec = g.spec;
    let p = spec.modulus();
    let deg = g.degree().unwrap();
    // Deterministic sweep: candidate k encodes base-p digits of a
    // polynomial, starting at the first nonconstant one.
    let mut candidate_index: u64 = p;
    let mut tried = 0u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let h = if tried < 64 {
            let mut digits = Vec::new();
            let mut k = candidate_index;
            while k > 0 {
                digits.push(k % p);
                k /= p;
            }
            candidate_index += 1;
            UniPoly::from_coeffs(spec, digits)
        } else {
            let coeffs: Vec<u64> = (0..deg).map(|_| rng.gen_range(0..p)).collect();
            UniPoly::from_coeffs(spec, coeffs)
        };
        tried += 1;
        if h.degree().unwrap_or(0) == 0 {
            continue;
        }
        // gcd(h, g) itself may already split g.
        let direct = h.gcd(g);
        let dd = direct.degree().unwrap_or(0);
        if dd > 0 && dd < deg {
            return direct;
        }
        let t = if p == 2 {
            // Trace map over F_{2^d}: h + h^2 + h^4 + ...
            let mut acc = h.rem(g);
            let mut term = h.rem(g);
            for _ in 1..d {
                term = term.mul(&term).rem(g);
                acc = acc.add(&term);
            }
            acc
        } else {
            // h^((p^d - 1)/2) - 1 via the norm chain, which avoids huge
            // integer exponents: h^((p^d-1)/(p-1)) first, then ^((p-1)/2).
            let mut u = h.rem(g);
            for _ in 1..d {
                u = u.pow_mod(p as u128, g).mul(&h).rem(g);
            }
            let w = u.pow_mod(((p - 1) / 2) as u128, g);
            w.sub(&UniPoly::one(spec))
        };
        let s = t.gcd(g);
        let sd = s.degree().unwrap_or(0);
        if sd > 0 && sd < deg {
            return s;
        }
    }
}

/// Full factorization into monic irreducible powers, sorted by degree then
/// coefficients. The seed only affects the random phase of equal-degree
/// splitting; results for a given seed are deterministic.
pub fn factor(f: &UniPoly, seed: u64) -> Vec<(UniPoly, u32)> {
    assert!(
        f.degree().unwrap_or(0) >= 1,
        "factorization needs degree >= 1"
    );
    let mut out: BTreeMap<(usize, Vec<u64>), u32> = BTreeMap::new();
    for (part, mult) in squarefree_decomposition(f) {
        for (prod, d) in distinct_degree(&part) {
            let mut irreducibles = Vec::new();
            equal_degree(&prod, d, seed, &mut irreducibles);
            for q in irreducibles {
                let key = (q.degree().unwrap(), q.coeffs().to_vec());
                *out.entry(key).or_insert(0) += mult;
            }
        }
    }
    let factors: Vec<(UniPoly, u32)> = out
        .into_iter()
        .map(|((_, coeffs), mult)| (UniPoly::from_coeffs(f.spec, coeffs), mult))
        .collect();
    debug_assert_eq!(
        factors
            .iter()
            .fold(UniPoly::one(f.spec), |acc, (q, m)| {
                let mut acc = acc;
                for _ in 0..*m {
                    acc = acc.mul(q);
                }
                acc
            }),
        f.monic(),
        "factors must multiply back to the input"
    );
    factors
}

/// Multiplicative order of a monic irreducible polynomial `f` with nonzero
/// constant term: the least `e >= 1` with `f | x^e - 1`. Computed as the
/// order of `x` in the field `F_p[x]/(f)` by factoring `p^deg - 1` and
/// descending prime exponents.
pub fn poly_order(f: &UniPoly) -> Result<u128, LinalgError> {
    let d = match f.degree() {
        Some(d) if d >= 1 => d,
        _ => return Err(LinalgError::ConstantTermZero),
    };
    if f.coeff(0) == 0 {
        return Err(LinalgError::ConstantTermZero);
    }
    let p = f.spec.modulus() as u128;
    let mut group_order: u128 = 1;
    for _ in 0..d {
        group_order = group_order
            .checked_mul(p)
            .ok_or(LinalgError::OrderTooLarge { degree: d })?;
    }
    group_order -= 1;
    let x = UniPoly::x(f.spec);
    let one = UniPoly::one(f.spec);
    let mut e = group_order;
    for (&q, _) in crate::intfactor::factor_u128(group_order).iter() {
        while e % q == 0 && x.pow_mod(e / q, f) == one {
            e /= q;
        }
    }
    debug_assert_eq!(x.pow_mod(e, f), one);
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> FieldSpec {
        FieldSpec::new(2).unwrap()
    }

    fn f3() -> FieldSpec {
        FieldSpec::new(3).unwrap()
    }

    fn poly(spec: FieldSpec, coeffs: &[u64]) -> UniPoly {
        UniPoly::from_coeffs(spec, coeffs.to_vec())
    }

    #[test]
    fn divrem_reconstructs() {
        let a = poly(f3(), &[2, 0, 1, 1]);
        let b = poly(f3(), &[1, 1]);
        let (q, r) = a.divrem(&b);
        assert_eq!(q.mul(&b).add(&r), a);
        assert!(r.degree().unwrap_or(0) < b.degree().unwrap());
    }

    #[test]
    fn gcd_of_coprime_is_one() {
        let a = poly(f3(), &[1, 1]);
        let b = poly(f3(), &[2, 1]);
        assert!(a.gcd(&b).is_one());
    }

    #[test]
    fn factors_quartic_plus_two_over_f3() {
        // x^4 + 2 = (x^2 + 1)(x^2 + 2) over F_3, and x^2 + 2 = (x+1)(x+2).
        let f = poly(f3(), &[2, 0, 0, 0, 1]);
        let factors = factor(&f, 0);
        let expected = vec![
            (poly(f3(), &[1, 1]), 1),
            (poly(f3(), &[2, 1]), 1),
            (poly(f3(), &[1, 0, 1]), 1),
        ];
        assert_eq!(factors, expected);
        assert_eq!(render_factored(&factors), "(x+1) (x+2) (x^2+1)");
    }

    #[test]
    fn factors_with_multiplicities_over_f2() {
        // x^4 (x+1)^2 (x^4+x^3+x^2+x+1)^2 expanded, then refactored.
        let x = UniPoly::x(f2());
        let xp1 = poly(f2(), &[1, 1]);
        let quintic_cyclo = poly(f2(), &[1, 1, 1, 1, 1]);
        let mut f = UniPoly::one(f2());
        for _ in 0..4 {
            f = f.mul(&x);
        }
        for _ in 0..2 {
            f = f.mul(&xp1);
            f = f.mul(&quintic_cyclo);
        }
        let factors = factor(&f, 0);
        assert_eq!(factors.len(), 3);
        assert_eq!(factors[0], (x, 4));
        assert_eq!(factors[1], (xp1, 2));
        assert_eq!(factors[2], (quintic_cyclo, 2));
        assert_eq!(
            render_factored(&factors),
            "x^4 (x+1)^2 (x^4+x^3+x^2+x+1)^2"
        );
    }

    #[test]
    fn squarefree_decomposition_handles_pth_powers() {
        // (x+1)^2 over F_2 has zero derivative; the p-th root path must fire.
        let xp1 = poly(f2(), &[1, 1]);
        let f = xp1.mul(&xp1);
        assert_eq!(squarefree_decomposition(&f), vec![(xp1, 2)]);
    }

    #[test]
    fn order_of_quintic_cyclotomic_over_f2_is_5() {
        let f = poly(f2(), &[1, 1, 1, 1, 1]);
        assert_eq!(poly_order(&f).unwrap(), 5);
    }

    #[test]
    fn order_of_x_squared_plus_one_over_f3_is_4() {
        let f = poly(f3(), &[1, 0, 1]);
        assert_eq!(poly_order(&f).unwrap(), 4);
    }

    #[test]
    fn order_of_linear_factors() {
        // x + 1 over F_2: x = 1 in the quotient, order 1.
        assert_eq!(poly_order(&poly(f2(), &[1, 1])).unwrap(), 1);
        // x + 1 over F_3: x = 2, order 2. x + 2: x = 1, order 1.
        assert_eq!(poly_order(&poly(f3(), &[1, 1])).unwrap(), 2);
        assert_eq!(poly_order(&poly(f3(), &[2, 1])).unwrap(), 1);
    }

    #[test]
    fn order_rejects_zero_constant_term() {
        assert_eq!(
            poly_order(&poly(f3(), &[0, 1])),
            Err(LinalgError::ConstantTermZero)
        );
    }

    #[test]
    fn display_uses_descending_powers() {
        let f = poly(f2(), &[1, 1, 0, 0, 1]);
        assert_eq!(f.to_string(), "x^4 + x + 1");
        assert_eq!(f.render_compact(), "x^4+x+1");
        assert_eq!(UniPoly::zero(f2()).to_string(), "0");
    }

    #[test]
    fn factoring_a_random_product_recovers_the_parts() {
        let f5 = FieldSpec::new(5).unwrap();
        // (x^2 + 2) is irreducible over F_5 (no root: squares are 0,1,4).
        let a = poly(f5, &[2, 0, 1]);
        let b = poly(f5, &[1, 1]);
        let f = a.mul(&b).mul(&b).mul(&a).mul(&a);
        let factors = factor(&f, 7);
        assert_eq!(factors, vec![(b, 2), (a, 3)]);
    }
}
