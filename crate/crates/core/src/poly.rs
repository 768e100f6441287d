//! Multivariate polynomial functions `F_p^n -> F_p` in canonical reduced form.
//!
//! Over `F_p` the monomial functions with every exponent below `p` form a
//! basis of the full function space, because `x^p = x` pointwise. Keeping
//! every polynomial reduced (exponents in `[0, p-1]`, coefficients in
//! `[1, p-1]`, terms merged) makes the representation *canonical*: two
//! polynomials are equal as functions exactly when they are structurally
//! equal. All arithmetic here preserves that form.
//!
//! Monomials are ordered graded-lexicographically: lower total degree first,
//! ties broken by comparing exponent tuples `(e1, ..., en)` left to right.
//! Printing lists terms in descending order, so `x1^2 + x1*x2 + 2` is already
//! canonical text.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::field::{FieldElem, FieldSpec};
use crate::grid;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    /// Operand variable counts disagree.
    #[error("dimension mismatch: expected {expected} variables, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// Operands live over different fields.
    #[error("operands belong to different fields")]
    FieldMismatch,
    /// Variable index outside `1..=n`.
    #[error("variable index {index} out of range 1..={bound}")]
    IndexOutOfRange { index: usize, bound: usize },
}

/// Exponent tuple with the graded-lex ordering.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    exps: Vec<u64>,
}

impl Monomial {
    /// Builds from exponents that are already reduced for the target field.
    pub fn new(exps: Vec<u64>) -> Self {
        Monomial { exps }
    }

    pub fn exponents(&self) -> &[u64] {
        &self.exps
    }

    pub fn degree(&self) -> u64 {
        self.exps.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        debug_assert_eq!(self.exps.len(), other.exps.len());
        (self.degree(), &self.exps).cmp(&(other.degree(), &other.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Reduces one exponent using `x^p = x`: the result is `0` for `e = 0` and
/// otherwise the unique representative in `[1, p-1]` congruent to `e`
/// modulo `p - 1`.
fn reduce_exponent(p: u64, e: u64) -> u64 {
    if e == 0 {
        0
    } else {
        (e - 1) % (p - 1) + 1
    }
}

/// A polynomial function in canonical reduced form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyFunc {
    spec: FieldSpec,
    vars: usize,
    terms: BTreeMap<Monomial, u64>,
}

impl PolyFunc {
    pub fn zero(spec: FieldSpec, vars: usize) -> Self {
        PolyFunc {
            spec,
            vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(spec: FieldSpec, vars: usize, c: u64) -> Self {
        let mut out = Self::zero(spec, vars);
        let c = spec.reduce(c);
        if c != 0 {
            out.terms.insert(
                Monomial {
                    exps: vec![0; vars],
                },
                c,
            );
        }
        out
    }

    pub fn one(spec: FieldSpec, vars: usize) -> Self {
        Self::constant(spec, vars, 1)
    }

    /// The coordinate function `x_i` (1-based, matching `x1 ... xn`).
    pub fn coordinate(spec: FieldSpec, vars: usize, i: usize) -> Result<Self, PolyError> {
        if i == 0 || i > vars {
            return Err(PolyError::IndexOutOfRange {
                index: i,
                bound: vars,
            });
        }
        let mut exps = vec![0; vars];
        exps[i - 1] = 1;
        let mut out = Self::zero(spec, vars);
        out.terms.insert(Monomial { exps }, 1);
        Ok(out)
    }

    /// Builds a polynomial from raw terms, reducing exponents by `x^p = x`,
    /// coefficients modulo `p`, and merging duplicate monomials. This is the
    /// only entry point for unreduced data.
    pub fn from_terms<I>(spec: FieldSpec, vars: usize, raw: I) -> Self
    where
        I: IntoIterator<Item = (Vec<u64>, u64)>,
    {
        let p = spec.modulus();
        let mut terms: BTreeMap<Monomial, u64> = BTreeMap::new();
        for (mut exps, c) in raw {
            assert_eq!(exps.len(), vars, "term arity must match variable count");
            for e in exps.iter_mut() {
                *e = reduce_exponent(p, *e);
            }
            let c = spec.reduce(c);
            if c == 0 {
                continue;
            }
            let m = Monomial { exps };
            let entry = terms.entry(m).or_insert(0);
            *entry = spec.add(*entry, c);
        }
        terms.retain(|_, c| *c != 0);
        PolyFunc { spec, vars, terms }
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, u64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    /// The largest monomial with a nonzero coefficient.
    pub fn leading_monomial(&self) -> Option<&Monomial> {
        self.terms.keys().next_back()
    }

    pub fn coefficient(&self, m: &Monomial) -> u64 {
        self.terms.get(m).copied().unwrap_or(0)
    }

    fn check_compatible(&self, other: &PolyFunc) -> Result<(), PolyError> {
        if self.spec != other.spec {
            return Err(PolyError::FieldMismatch);
        }
        if self.vars != other.vars {
            return Err(PolyError::DimensionMismatch {
                expected: self.vars,
                got: other.vars,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &PolyFunc) -> Result<PolyFunc, PolyError> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            let entry = out.terms.entry(m.clone()).or_insert(0);
            *entry = self.spec.add(*entry, c);
        }
        out.terms.retain(|_, c| *c != 0);
        Ok(out)
    }

    pub fn sub(&self, other: &PolyFunc) -> Result<PolyFunc, PolyError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> PolyFunc {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = self.spec.neg(*c);
        }
        out
    }

    pub fn scale(&self, c: u64) -> PolyFunc {
        let c = self.spec.reduce(c);
        if c == 0 {
            return PolyFunc::zero(self.spec, self.vars);
        }
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = self.spec.mul(*v, c);
        }
        out
    }

    pub fn mul(&self, other: &PolyFunc) -> Result<PolyFunc, PolyError> {
        self.check_compatible(other)?;
        let p = self.spec.modulus();
        let mut terms: BTreeMap<Monomial, u64> = BTreeMap::new();
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &other.terms {
                let exps: Vec<u64> = ma
                    .exps
                    .iter()
                    .zip(&mb.exps)
                    .map(|(&ea, &eb)| {
                        // Both inputs are reduced, so the sum is at most
                        // 2p - 2 and a single wrap restores the range.
                        let e = ea + eb;
                        if e > p - 1 {
                            e - (p - 1)
                        } else {
                            e
                        }
                    })
                    .collect();
                let c = self.spec.mul(ca, cb);
                let entry = terms.entry(Monomial { exps }).or_insert(0);
                *entry = self.spec.add(*entry, c);
            }
        }
        terms.retain(|_, c| *c != 0);
        Ok(PolyFunc {
            spec: self.spec,
            vars: self.vars,
            terms,
        })
    }

    /// Small-exponent power by repeated squaring.
    pub fn pow(&self, mut e: u64) -> PolyFunc {
        let mut acc = PolyFunc::one(self.spec, self.vars);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base).expect("same ring");
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base).expect("same ring");
            }
        }
        acc
    }

    /// Evaluates at a point. Values are reduced modulo `p` on entry.
    pub fn eval(&self, point: &[u64]) -> Result<FieldElem, PolyError> {
        if point.len() != self.vars {
            return Err(PolyError::DimensionMismatch {
                expected: self.vars,
                got: point.len(),
            });
        }
        let spec = self.spec;
        let point: Vec<u64> = point.iter().map(|&v| spec.reduce(v)).collect();
        let mut acc = 0u64;
        for (m, &c) in &self.terms {
            let mut t = c;
            for (&v, &e) in point.iter().zip(&m.exps) {
                if e > 0 {
                    t = spec.mul(t, spec.pow(v, e));
                }
            }
            acc = spec.add(acc, t);
        }
        Ok(spec.elem(acc))
    }

    /// Evaluates over the whole state grid in one pass, returning values
    /// indexed by state enumeration order. Works axis by axis through the
    /// `p x p` power table, which is much faster than `p^n` pointwise
    /// evaluations for dense polynomials.
    pub fn eval_grid(&self) -> Vec<u64> {
        let spec = self.spec;
        let p = spec.modulus() as usize;
        let pn = grid::state_count(spec, self.vars).expect("state space exceeds address space");
        let mut g = vec![0u64; pn];
        for (m, &c) in &self.terms {
            g[grid::state_to_index(spec, &m.exps)] = c;
        }
        let powers: Vec<Vec<u64>> = (0..p)
            .map(|a| (0..p).map(|e| spec.pow(a as u64, e as u64)).collect())
            .collect();
        let mut line = vec![0u64; p];
        let mut stride = 1usize;
        for _ in 0..self.vars {
            let mut base = 0usize;
            while base < pn {
                for off in 0..stride {
                    let idx0 = base + off;
                    for (e, slot) in line.iter_mut().enumerate() {
                        *slot = g[idx0 + e * stride];
                    }
                    for (a, row) in powers.iter().enumerate() {
                        let mut s = 0u64;
                        for (e, &v) in line.iter().enumerate() {
                            if v != 0 {
                                s = spec.add(s, spec.mul(row[e], v));
                            }
                        }
                        g[idx0 + a * stride] = s;
                    }
                }
                base += stride * p;
            }
            stride *= p;
        }
        g
    }

    /// Substitutes the update polynomials for the variables: the result is
    /// the reduced form of `self(F1, ..., Fn)`, i.e. the composition
    /// `self . F` as a function. This is the Koopman lift of `self`.
    pub fn koopman_apply(&self, updates: &[PolyFunc]) -> Result<PolyFunc, PolyError> {
        if updates.len() != self.vars {
            return Err(PolyError::DimensionMismatch {
                expected: self.vars,
                got: updates.len(),
            });
        }
        for u in updates {
            self.check_compatible(u)?;
        }
        // Cache per-variable powers of the updates up to the largest
        // exponent actually used.
        let mut max_exp = vec![0u64; self.vars];
        for m in self.terms.keys() {
            for (slot, &e) in max_exp.iter_mut().zip(&m.exps) {
                *slot = (*slot).max(e);
            }
        }
        let mut powers: Vec<Vec<PolyFunc>> = Vec::with_capacity(self.vars);
        for (i, u) in updates.iter().enumerate() {
            let mut row = vec![PolyFunc::one(self.spec, self.vars)];
            for _ in 0..max_exp[i] {
                row.push(row.last().unwrap().mul(u)?);
            }
            powers.push(row);
        }
        let mut acc = PolyFunc::zero(self.spec, self.vars);
        for (m, &c) in &self.terms {
            let mut t = PolyFunc::constant(self.spec, self.vars, c);
            for (i, &e) in m.exps.iter().enumerate() {
                if e > 0 {
                    t = t.mul(&powers[i][e as usize])?;
                }
            }
            acc = acc.add(&t)?;
        }
        Ok(acc)
    }

    /// Canonical text with the given variable names: terms in descending
    /// graded-lex order, reduced coefficients, `*` between factors.
    pub fn render(&self, names: &[String]) -> String {
        assert_eq!(names.len(), self.vars, "one name per variable");
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut parts = Vec::with_capacity(self.terms.len());
        for (m, &c) in self.terms.iter().rev() {
            let mut factors = Vec::new();
            if c != 1 || m.is_constant() {
                factors.push(c.to_string());
            }
            for (i, &e) in m.exps.iter().enumerate() {
                if e == 1 {
                    factors.push(names[i].clone());
                } else if e > 1 {
                    factors.push(format!("{}^{}", names[i], e));
                }
            }
            parts.push(factors.join("*"));
        }
        parts.join(" + ")
    }
}

impl std::fmt::Display for PolyFunc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<String> = (1..=self.vars).map(|i| format!("x{i}")).collect();
        write!(f, "{}", self.render(&names))
    }
}
