//! Dense matrices over `F_p`: elimination, solving, inversion, minimal
//! polynomials, and the elementary divisor structure that drives orbit
//! prediction.
//!
//! Elementary divisors are computed from nullity sequences of `f(A)^k` for
//! each irreducible factor `f` of the minimal polynomial, which needs only
//! scalar elimination. When the minimal polynomial already has full degree
//! the factorization itself is the answer and no ranks are computed.

use crate::field::FieldSpec;
use crate::unipoly::{self, LinalgError, UniPoly};

/// Row-major matrix over a prime field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixFp {
    spec: FieldSpec,
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

/// Result of solving `A x = b`: the rank of `A`, one solution if any
/// exists, and a basis of the kernel of `A` (so the full solution set is
/// `particular + span(kernel)`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOutcome {
    pub rank: usize,
    pub particular: Option<Vec<u64>>,
    pub kernel: Vec<Vec<u64>>,
}

impl MatrixFp {
    pub fn zeros(spec: FieldSpec, rows: usize, cols: usize) -> Self {
        MatrixFp {
            spec,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(spec: FieldSpec, n: usize) -> Self {
        let mut m = Self::zeros(spec, n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(spec: FieldSpec, rows: Vec<Vec<u64>>) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in &rows {
            assert_eq!(row.len(), ncols, "ragged rows");
            data.extend(row.iter().map(|&v| spec.reduce(v)));
        }
        MatrixFp {
            spec,
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    pub fn from_cols(spec: FieldSpec, cols: Vec<Vec<u64>>) -> Self {
        let ncols = cols.len();
        let nrows = cols.first().map_or(0, |c| c.len());
        let mut m = Self::zeros(spec, nrows, ncols);
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), nrows, "ragged columns");
            for (i, &v) in col.iter().enumerate() {
                m.set(i, j, spec.reduce(v));
            }
        }
        m
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        self.data[i * self.cols + j] = self.spec.reduce(v);
    }

    pub fn row(&self, i: usize) -> &[u64] {
        assert!(i < self.rows, "row out of bounds");
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<u64> {
        assert!(j < self.cols, "column out of bounds");
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn row_vecs(&self) -> Vec<Vec<u64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> MatrixFp {
        let mut m = Self::zeros(self.spec, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(j, i, self.get(i, j));
            }
        }
        m
    }

    /// Copies rows `r0..r1` and columns `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> MatrixFp {
        assert!(r0 <= r1 && r1 <= self.rows && c0 <= c1 && c1 <= self.cols);
        let mut m = Self::zeros(self.spec, r1 - r0, c1 - c0);
        for i in r0..r1 {
            for j in c0..c1 {
                m.set(i - r0, j - c0, self.get(i, j));
            }
        }
        m
    }

    pub fn vstack(&self, below: &MatrixFp) -> MatrixFp {
        assert_eq!(self.cols, below.cols, "column counts differ");
        assert_eq!(self.spec, below.spec, "matrices over different fields");
        let mut data = self.data.clone();
        data.extend_from_slice(&below.data);
        MatrixFp {
            spec: self.spec,
            rows: self.rows + below.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn hstack(&self, right: &MatrixFp) -> MatrixFp {
        assert_eq!(self.rows, right.rows, "row counts differ");
        assert_eq!(self.spec, right.spec, "matrices over different fields");
        let mut m = Self::zeros(self.spec, self.rows, self.cols + right.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(i, j, self.get(i, j));
            }
            for j in 0..right.cols {
                m.set(i, self.cols + j, right.get(i, j));
            }
        }
        m
    }

    pub fn add(&self, other: &MatrixFp) -> MatrixFp {
        self.zip_with(other, |s, a, b| s.add(a, b))
    }

    pub fn sub(&self, other: &MatrixFp) -> MatrixFp {
        self.zip_with(other, |s, a, b| s.sub(a, b))
    }

    fn zip_with(&self, other: &MatrixFp, f: impl Fn(FieldSpec, u64, u64) -> u64) -> MatrixFp {
        assert_eq!(self.spec, other.spec, "matrices over different fields");
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(self.spec, a, b))
            .collect();
        MatrixFp {
            spec: self.spec,
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, c: u64) -> MatrixFp {
        let c = self.spec.reduce(c);
        let data = self.data.iter().map(|&a| self.spec.mul(a, c)).collect();
        MatrixFp {
            spec: self.spec,
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn mul(&self, other: &MatrixFp) -> MatrixFp {
        assert_eq!(self.spec, other.spec, "matrices over different fields");
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let spec = self.spec;
        let mut out = Self::zeros(spec, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                let out_row = i * other.cols;
                let oth_row = k * other.cols;
                for j in 0..other.cols {
                    let prod = spec.mul(a, other.data[oth_row + j]);
                    out.data[out_row + j] = spec.add(out.data[out_row + j], prod);
                }
            }
        }
        out
    }

    /// `A v` for a column vector `v`.
    pub fn mul_vec(&self, v: &[u64]) -> Vec<u64> {
        assert_eq!(v.len(), self.cols, "vector length mismatch");
        let spec = self.spec;
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                let mut acc = 0u64;
                for (&a, &x) in row.iter().zip(v) {
                    acc = spec.add(acc, spec.mul(a, x));
                }
                acc
            })
            .collect()
    }

    /// `v A` for a row vector `v`.
    pub fn vec_mul(&self, v: &[u64]) -> Vec<u64> {
        assert_eq!(v.len(), self.rows, "vector length mismatch");
        let spec = self.spec;
        let mut out = vec![0u64; self.cols];
        for (i, &c) in v.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for (slot, &a) in out.iter_mut().zip(self.row(i)) {
                *slot = spec.add(*slot, spec.mul(c, a));
            }
        }
        out
    }

    /// `A^e` by repeated squaring; `A^0` is the identity.
    pub fn pow(&self, mut e: u64) -> MatrixFp {
        assert_eq!(self.rows, self.cols, "power of a nonsquare matrix");
        let mut acc = Self::identity(self.spec, self.rows);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// Evaluates a univariate polynomial at this matrix by Horner's rule.
    pub fn apply_poly(&self, f: &UniPoly) -> MatrixFp {
        assert_eq!(self.rows, self.cols, "polynomial of a nonsquare matrix");
        assert_eq!(self.spec, f.spec(), "field mismatch");
        let n = self.rows;
        let mut acc = Self::zeros(self.spec, n, n);
        for &c in f.coeffs().iter().rev() {
            acc = acc.mul(self);
            for i in 0..n {
                acc.set(i, i, self.spec.add(acc.get(i, i), c));
            }
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Reduced row echelon form and the pivot column indices, using the
    /// first nonzero entry in column order as each pivot so the result is
    /// deterministic.
    pub fn rref(&self) -> (MatrixFp, Vec<usize>) {
        let spec = self.spec;
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0usize;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(pr) = (r..m.rows).find(|&i| m.get(i, c) != 0) else {
                continue;
            };
            if pr != r {
                for j in 0..m.cols {
                    let (a, b) = (m.get(r, j), m.get(pr, j));
                    m.set(r, j, b);
                    m.set(pr, j, a);
                }
            }
            let inv = spec.inv(m.get(r, c)).expect("nonzero pivot");
            for j in 0..m.cols {
                m.set(r, j, spec.mul(m.get(r, j), inv));
            }
            for i in 0..m.rows {
                if i == r {
                    continue;
                }
                let factor = m.get(i, c);
                if factor == 0 {
                    continue;
                }
                for j in 0..m.cols {
                    let v = spec.sub(m.get(i, j), spec.mul(factor, m.get(r, j)));
                    m.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Kernel basis, one vector per free column, in free-column order.
    pub fn kernel_basis(&self) -> Vec<Vec<u64>> {
        let spec = self.spec;
        let (r, pivots) = self.rref();
        let mut basis = Vec::new();
        let mut pivot_iter = pivots.iter().copied().peekable();
        let mut free_cols = Vec::new();
        for c in 0..self.cols {
            if pivot_iter.peek() == Some(&c) {
                pivot_iter.next();
            } else {
                free_cols.push(c);
            }
        }
        for &fc in &free_cols {
            let mut v = vec![0u64; self.cols];
            v[fc] = 1;
            for (row_idx, &pc) in pivots.iter().enumerate() {
                v[pc] = spec.neg(r.get(row_idx, fc));
            }
            basis.push(v);
        }
        basis
    }

    /// Solves `A x = b`, reporting rank, one solution if consistent, and
    /// the kernel of `A`.
    pub fn solve(&self, b: &[u64]) -> SolveOutcome {
        assert_eq!(b.len(), self.rows, "right-hand side length mismatch");
        let spec = self.spec;
        let rhs = MatrixFp::from_cols(spec, vec![b.to_vec()]);
        let aug = self.hstack(&rhs);
        let (r, pivots) = aug.rref();
        let rank_a = pivots.iter().filter(|&&c| c < self.cols).count();
        let consistent = pivots.iter().all(|&c| c < self.cols);
        let particular = consistent.then(|| {
            let mut x = vec![0u64; self.cols];
            for (row_idx, &pc) in pivots.iter().enumerate() {
                x[pc] = r.get(row_idx, self.cols);
            }
            x
        });
        SolveOutcome {
            rank: rank_a,
            particular,
            kernel: self.kernel_basis(),
        }
    }

    /// Inverse of a square matrix, or `None` if singular.
    pub fn inverse(&self) -> Option<MatrixFp> {
        assert_eq!(self.rows, self.cols, "inverse of a nonsquare matrix");
        let n = self.rows;
        let aug = self.hstack(&Self::identity(self.spec, n));
        let (r, pivots) = aug.rref();
        if pivots.len() != n || pivots.iter().any(|&c| c >= n) {
            return None;
        }
        Some(r.block(0, n, n, 2 * n))
    }

    /// Minimal polynomial of the matrix as a linear operator: the monic
    /// polynomial of least degree annihilating it. Works one standard basis
    /// vector at a time, skipping vectors already inside the span of the
    /// Krylov subspaces handled so far (those are annihilated by the lcm
    /// accumulated for them).
    pub fn minimal_polynomial(&self) -> Result<UniPoly, LinalgError> {
        if self.rows != self.cols {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let spec = self.spec;
        let mut result = UniPoly::one(spec);
        let mut global = Echelon::new(spec, n);
        for j in 0..n {
            if result.degree() == Some(n) {
                break;
            }
            let mut e = vec![0u64; n];
            e[j] = 1;
            if global.contains(&e) {
                continue;
            }
            let local_poly = self.krylov_dependence(&e, &mut global);
            result = result.lcm(&local_poly);
        }
        Ok(result)
    }

    /// Iterates `v, Av, A^2 v, ...` until the first linear dependence and
    /// returns its monic coefficient polynomial; every Krylov vector seen is
    /// also added to `global`.
    fn krylov_dependence(&self, start: &[u64], global: &mut Echelon) -> UniPoly {
        let spec = self.spec;
        let n = self.rows;
        // Local echelon rows carry the combination expressing them in the
        // Krylov vectors inserted so far.
        let mut local: Vec<(Vec<u64>, usize, Vec<u64>)> = Vec::new();
        let mut v = start.to_vec();
        let mut k = 0usize;
        loop {
            let mut w = v.clone();
            let mut combo = vec![0u64; k + 1];
            combo[k] = 1;
            for (row, piv, row_combo) in &local {
                let c = w[*piv];
                if c == 0 {
                    continue;
                }
                for (wi, &ri) in w.iter_mut().zip(row) {
                    *wi = spec.sub(*wi, spec.mul(c, ri));
                }
                for (ci, &rc) in combo.iter_mut().zip(row_combo) {
                    *ci = spec.sub(*ci, spec.mul(c, rc));
                }
            }
            if let Some(piv) = w.iter().position(|&x| x != 0) {
                let inv = spec.inv(w[piv]).expect("nonzero pivot");
                for x in w.iter_mut() {
                    *x = spec.mul(*x, inv);
                }
                for x in combo.iter_mut() {
                    *x = spec.mul(*x, inv);
                }
                global.insert(&w);
                local.push((w, piv, combo));
                debug_assert!(local.len() <= n, "Krylov chain exceeded dimension");
                v = self.mul_vec(&v);
                k += 1;
            } else {
                return UniPoly::from_coeffs(spec, combo);
            }
        }
    }

    /// Elementary divisors as a sorted multiset of `(irreducible base,
    /// exponent)` pairs; repeated divisors appear repeatedly. The seed only
    /// feeds the factorization fallback randomness.
    pub fn elementary_divisors(&self, seed: u64) -> Result<Vec<(UniPoly, u32)>, LinalgError> {
        let min_poly = self.minimal_polynomial()?;
        let n = self.rows;
        if n == 0 {
            return Ok(Vec::new());
        }
        let factored = unipoly::factor(&min_poly, seed);
        let mut out: Vec<(UniPoly, u32)> = Vec::new();
        if min_poly.degree() == Some(n) {
            // Nonderogatory: one divisor per irreducible power.
            out = factored;
        } else {
            for (f, max_mult) in factored {
                let d = f.degree().expect("irreducible has positive degree");
                // nullity(f(A)^k) grows by d * (count of divisors with
                // exponent >= k) at each step, which pins the multiset.
                let base = self.apply_poly(&f);
                let mut power = base.clone();
                let mut prev_nullity = 0usize;
                let mut counts = Vec::with_capacity(max_mult as usize);
                for _ in 1..=max_mult {
                    let nullity = n - power.rank();
                    counts.push((nullity - prev_nullity) / d);
                    prev_nullity = nullity;
                    power = power.mul(&base);
                }
                for k in 1..=max_mult as usize {
                    let at_least_k = counts[k - 1];
                    let at_least_next = counts.get(k).copied().unwrap_or(0);
                    for _ in 0..(at_least_k - at_least_next) {
                        out.push((f.clone(), k as u32));
                    }
                }
            }
        }
        out.sort_by(|a, b| {
            a.0.degree()
                .cmp(&b.0.degree())
                .then_with(|| a.0.coeffs().cmp(b.0.coeffs()))
                .then_with(|| a.1.cmp(&b.1))
        });
        debug_assert_eq!(
            out.iter()
                .map(|(f, m)| f.degree().unwrap() * *m as usize)
                .sum::<usize>(),
            n,
            "elementary divisor degrees must sum to the dimension"
        );
        Ok(out)
    }

    /// Invariant factors in ascending divisibility order (each divides the
    /// next; the last is the minimal polynomial).
    pub fn invariant_factors(&self, seed: u64) -> Result<Vec<UniPoly>, LinalgError> {
        let divisors = self.elementary_divisors(seed)?;
        // Group exponents per irreducible, largest first; invariant factor
        // number k from the top takes each irreducible's k-th largest power.
        let mut grouped: Vec<(UniPoly, Vec<u32>)> = Vec::new();
        for (f, m) in divisors {
            match grouped.iter_mut().find(|(g, _)| *g == f) {
                Some((_, exps)) => exps.push(m),
                None => grouped.push((f, vec![m])),
            }
        }
        for (_, exps) in grouped.iter_mut() {
            exps.sort_unstable_by(|a, b| b.cmp(a));
        }
        let levels = grouped.iter().map(|(_, e)| e.len()).max().unwrap_or(0);
        let mut factors = Vec::with_capacity(levels);
        for level in 0..levels {
            let mut acc = UniPoly::one(self.spec);
            for (f, exps) in &grouped {
                if let Some(&e) = exps.get(level) {
                    for _ in 0..e {
                        acc = acc.mul(f);
                    }
                }
            }
            factors.push(acc);
        }
        factors.reverse();
        Ok(factors)
    }
}

impl std::fmt::Display for MatrixFp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(f, "[{}]", row.join(" "))?;
        }
        Ok(())
    }
}

/// Plain row echelon accumulator for membership tests over `F_p`.
pub(crate) struct Echelon {
    spec: FieldSpec,
    width: usize,
    rows: Vec<(Vec<u64>, usize)>,
}

impl Echelon {
    pub(crate) fn new(spec: FieldSpec, width: usize) -> Self {
        Echelon {
            spec,
            width,
            rows: Vec::new(),
        }
    }

    fn reduce(&self, v: &[u64]) -> Vec<u64> {
        let spec = self.spec;
        let mut w = v.to_vec();
        for (row, piv) in &self.rows {
            let c = w[*piv];
            if c == 0 {
                continue;
            }
            for (wi, &ri) in w.iter_mut().zip(row) {
                *wi = spec.sub(*wi, spec.mul(c, ri));
            }
        }
        w
    }

    pub(crate) fn contains(&self, v: &[u64]) -> bool {
        self.reduce(v).iter().all(|&x| x == 0)
    }

    pub(crate) fn insert(&mut self, v: &[u64]) -> bool {
        assert_eq!(v.len(), self.width);
        let mut w = self.reduce(v);
        let Some(piv) = w.iter().position(|&x| x != 0) else {
            return false;
        };
        let inv = self.spec.inv(w[piv]).expect("nonzero pivot");
        for x in w.iter_mut() {
            *x = self.spec.mul(*x, inv);
        }
        self.rows.push((w, piv));
        true
    }
}
