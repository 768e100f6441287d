//! Linearization of a polynomial state map on function space.
//!
//! Composing a function with the update map is a *linear* operator on the
//! space of functions `F_p^n -> F_p`. [`build_reduction`] constructs the
//! smallest subspace of that function space which contains the coordinate
//! functions (optionally the output functions too) and is closed under the
//! operator, by chasing composition chains until they close. The result is
//! a finite matrix model of the nonlinear system:
//!
//! - `K1` (`N x N`): `psi_hat(F(x)) = K1 * psi_hat(x)` for every state `x`,
//!   where `psi_hat` stacks the `N` basis functions;
//! - `C` (`n x N`): `x = C * psi_hat(x)`, recovering the state;
//! - `Gamma` (`m x N`): `g(x) = Gamma * psi_hat(x)`, when outputs are
//!   included.
//!
//! Row `i` of `K1` holds the coordinates of `basis[i]` composed with the
//! update map, so function coordinate rows transform by right
//! multiplication and evaluation vectors by left multiplication.
//!
//! [`full_koopman_matrix`] builds the same operator on the *entire*
//! function space (dimension `p^n`), which the oracle uses for
//! cross-checks on small systems.

use thiserror::Error;

use crate::field::FieldSpec;
use crate::grid::state_count;
use crate::matrix::MatrixFp;
use crate::poly::{Monomial, PolyFunc};
use crate::sysdef::FssSystem;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KoopmanError {
    /// The invariant subspace exceeded the configured basis cap.
    #[error("function basis exceeded cap of {cap} elements")]
    ReductionTooLarge { cap: usize },
    /// The full function space has more than the configured number of
    /// dimensions (states).
    #[error("state space exceeds cap of {cap} states")]
    StateSpaceTooLarge { cap: usize },
}

/// The reduced linear model of a finite state system on the smallest
/// invariant function subspace containing its coordinates (and outputs).
#[derive(Debug, Clone)]
pub struct KoopmanReduction {
    sys: FssSystem,
    basis: Vec<PolyFunc>,
    k1: MatrixFp,
    c: MatrixFp,
    gamma: Option<MatrixFp>,
}

impl KoopmanReduction {
    pub fn system(&self) -> &FssSystem {
        &self.sys
    }

    /// Dimension `N` of the invariant subspace.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[PolyFunc] {
        &self.basis
    }

    pub fn k1(&self) -> &MatrixFp {
        &self.k1
    }

    pub fn c(&self) -> &MatrixFp {
        &self.c
    }

    pub fn gamma(&self) -> Option<&MatrixFp> {
        self.gamma.as_ref()
    }

    /// Evaluates the basis functions at a state.
    pub fn psi_hat(&self, x: &[u64]) -> Vec<u64> {
        self.basis
            .iter()
            .map(|f| f.eval(x).expect("basis arity matches state").value())
            .collect()
    }
}

/// Row echelon over the monomial coefficient space, tracking for each
/// stored row its expression in the basis functions inserted so far.
struct FnEchelon {
    spec: FieldSpec,
    rows: Vec<EchelonRow>,
}

struct EchelonRow {
    poly: PolyFunc,
    pivot: Monomial,
    expr: Vec<u64>,
}

impl FnEchelon {
    fn new(spec: FieldSpec) -> Self {
        FnEchelon {
            spec,
            rows: Vec::new(),
        }
    }

    /// Reduces `f` against the stored rows. Returns the residual and the
    /// expression of the reduced part in basis coordinates (padded to
    /// `basis_len`), so `f = expr . basis + residual`.
    fn reduce(&self, f: &PolyFunc, basis_len: usize) -> (PolyFunc, Vec<u64>) {
        let spec = self.spec;
        let mut residual = f.clone();
        let mut expr = vec![0u64; basis_len];
        for row in &self.rows {
            let c = residual.coefficient(&row.pivot);
            if c == 0 {
                continue;
            }
            residual = residual
                .sub(&row.poly.scale(c))
                .expect("echelon rows share the ring");
            for (slot, &e) in expr.iter_mut().zip(&row.expr) {
                *slot = spec.add(*slot, spec.mul(c, e));
            }
        }
        (residual, expr)
    }

    /// Coordinates of `f` in the basis if it lies in the span.
    fn coords(&self, f: &PolyFunc, basis_len: usize) -> Option<Vec<u64>> {
        let (residual, expr) = self.reduce(f, basis_len);
        residual.is_zero().then_some(expr)
    }

    /// Registers `f` as basis element number `index`. `f` must not be in
    /// the current span.
    fn insert_basis_element(&mut self, f: &PolyFunc, index: usize) {
        let spec = self.spec;
        let (residual, expr) = self.reduce(f, index + 1);
        let pivot = residual
            .leading_monomial()
            .expect("new basis element outside current span")
            .clone();
        let lc_inv = spec
            .inv(residual.coefficient(&pivot))
            .expect("leading coefficient nonzero");
        // residual = f - expr . basis, so the normalized row is expressed
        // by (e_index - expr) / lc.
        let mut row_expr = vec![0u64; index + 1];
        row_expr[index] = 1;
        for (slot, &e) in row_expr.iter_mut().zip(&expr) {
            *slot = spec.sub(*slot, e);
        }
        for e in row_expr.iter_mut() {
            *e = spec.mul(*e, lc_inv);
        }
        self.rows.push(EchelonRow {
            poly: residual.scale(lc_inv),
            pivot,
            expr: row_expr,
        });
    }
}

/// Builds the reduced linear model. Generators are the coordinate
/// functions in declaration order, followed by the output functions when
/// `include_outputs` is set. Each generator outside the accumulated span
/// starts a chain of composition iterates that runs until an iterate
/// falls back into the span.
pub fn build_reduction(
    sys: &FssSystem,
    include_outputs: bool,
    basis_cap: usize,
) -> Result<KoopmanReduction, KoopmanError> {
    let spec = sys.spec();
    let n = sys.n();
    let mut generators: Vec<PolyFunc> = (1..=n)
        .map(|i| PolyFunc::coordinate(spec, n, i).expect("coordinate index in range"))
        .collect();
    if include_outputs {
        generators.extend(sys.outputs().iter().cloned());
    }

    let mut basis: Vec<PolyFunc> = Vec::new();
    let mut k1_rows: Vec<Vec<u64>> = Vec::new();
    let mut echelon = FnEchelon::new(spec);

    for gen in &generators {
        if echelon.coords(gen, basis.len()).is_some() {
            continue;
        }
        let mut current = gen.clone();
        loop {
            if basis.len() == basis_cap {
                return Err(KoopmanError::ReductionTooLarge { cap: basis_cap });
            }
            let index = basis.len();
            echelon.insert_basis_element(&current, index);
            basis.push(current.clone());
            let next = current
                .koopman_apply(sys.updates())
                .expect("update arity matches");
            if let Some(coords) = echelon.coords(&next, index + 1) {
                k1_rows.push(coords);
                break;
            }
            // The next iterate extends the chain; its K1 row is the unit
            // vector pointing at the element about to be inserted.
            let mut unit = vec![0u64; index + 2];
            unit[index + 1] = 1;
            k1_rows.push(unit);
            current = next;
        }
    }

    let dim = basis.len();
    for row in k1_rows.iter_mut() {
        row.resize(dim, 0);
    }
    let k1 = MatrixFp::from_rows(spec, k1_rows);

    let mut c_rows = Vec::with_capacity(n);
    for coord in generators.iter().take(n) {
        let coords = echelon
            .coords(coord, dim)
            .expect("coordinate generators lie in the span");
        c_rows.push(coords);
    }
    let c = MatrixFp::from_rows(spec, c_rows);

    let gamma = (include_outputs && sys.m() > 0).then(|| {
        let mut rows = Vec::with_capacity(sys.m());
        for out in sys.outputs() {
            let coords = echelon
                .coords(out, dim)
                .expect("output generators lie in the span");
            rows.push(coords);
        }
        MatrixFp::from_rows(spec, rows)
    });

    Ok(KoopmanReduction {
        sys: sys.clone(),
        basis,
        k1,
        c,
        gamma,
    })
}

/// The composition operator on the full function space, in the monomial
/// basis sorted ascending by (degree, exponents). Row `i` holds the
/// coordinates of monomial `i` composed with the update map. Errors when
/// the state space exceeds `state_cap` dimensions.
pub fn full_koopman_matrix(
    sys: &FssSystem,
    state_cap: usize,
) -> Result<(Vec<Monomial>, MatrixFp), KoopmanError> {
    let spec = sys.spec();
    let n = sys.n();
    let total = state_count(spec, n)
        .filter(|&t| t <= state_cap)
        .ok_or(KoopmanError::StateSpaceTooLarge { cap: state_cap })?;

    let p = spec.modulus();
    let mut monomials: Vec<Monomial> = Vec::with_capacity(total);
    let mut exps = vec![0u64; n];
    loop {
        monomials.push(Monomial::new(exps.clone()));
        let mut i = 0;
        while i < n {
            exps[i] += 1;
            if exps[i] < p {
                break;
            }
            exps[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    monomials.sort();
    let index_of: std::collections::BTreeMap<Monomial, usize> = monomials
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, m)| (m, i))
        .collect();

    let mut matrix = MatrixFp::zeros(spec, total, total);
    // Composed monomials are built degree layer by degree layer: stripping
    // one variable from a monomial lands in the previous layer, so each
    // composition is one polynomial multiply on a memoized result.
    let mut prev_layer: std::collections::BTreeMap<Monomial, PolyFunc> =
        std::collections::BTreeMap::new();
    let mut layer_start = 0usize;
    while layer_start < total {
        let degree = monomials[layer_start].degree();
        let layer_end = (layer_start..total)
            .find(|&i| monomials[i].degree() != degree)
            .unwrap_or(total);
        let mut layer: std::collections::BTreeMap<Monomial, PolyFunc> =
            std::collections::BTreeMap::new();
        for idx in layer_start..layer_end {
            let mono = &monomials[idx];
            let composed = if degree == 0 {
                PolyFunc::one(spec, n)
            } else {
                let var = mono
                    .exponents()
                    .iter()
                    .position(|&e| e > 0)
                    .expect("positive degree has a positive exponent");
                let mut parent_exps = mono.exponents().to_vec();
                parent_exps[var] -= 1;
                let parent = prev_layer
                    .get(&Monomial::new(parent_exps))
                    .expect("previous layer is complete");
                sys.updates()[var]
                    .mul(parent)
                    .expect("updates share the ring")
            };
            for (m, coeff) in composed.terms() {
                let col = index_of[m];
                matrix.set(idx, col, coeff);
            }
            layer.insert(mono.clone(), composed);
        }
        prev_layer = layer;
        layer_start = layer_end;
    }

    Ok((monomials, matrix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysdef::parse_system;

    fn d1() -> FssSystem {
        parse_system("field 2\nvars x1 x2\nupdate x1 = x2\nupdate x2 = x1*x2\n").unwrap()
    }

    fn obs3() -> FssSystem {
        parse_system(
            "field 3\nvars x1 x2\nupdate x1 = 2*x1 + x2\nupdate x2 = x1 + x2\noutput z1 = x1^2 + x2\n",
        )
        .unwrap()
    }

    fn rows(m: &MatrixFp) -> Vec<Vec<u64>> {
        m.row_vecs()
    }

    #[test]
    fn product_chain_closes_in_three_elements() {
        let red = build_reduction(&d1(), false, 100).unwrap();
        assert_eq!(red.dim(), 3);
        let names: Vec<String> = red.basis().iter().map(|b| b.to_string()).collect();
        assert_eq!(names, vec!["x1", "x2", "x1*x2"]);
        assert_eq!(
            rows(red.k1()),
            vec![vec![0, 1, 0], vec![0, 0, 1], vec![0, 0, 1]]
        );
        assert_eq!(rows(red.c()), vec![vec![1, 0, 0], vec![0, 1, 0]]);
        assert!(red.gamma().is_none());
    }

    #[test]
    fn output_generator_extends_the_basis() {
        let red = build_reduction(&obs3(), true, 100).unwrap();
        assert_eq!(red.dim(), 4);
        let names: Vec<String> = red.basis().iter().map(|b| b.to_string()).collect();
        assert_eq!(
            names,
            vec![
                "x1",
                "2*x1 + x2",
                "x1^2 + x2",
                "x1^2 + x1*x2 + x2^2 + x1 + x2",
            ]
        );
        assert_eq!(
            rows(red.k1()),
            vec![
                vec![0, 1, 0, 0],
                vec![2, 0, 0, 0],
                vec![0, 0, 0, 1],
                vec![1, 1, 1, 0],
            ]
        );
        assert_eq!(rows(red.c()), vec![vec![1, 0, 0, 0], vec![1, 1, 0, 0]]);
        assert_eq!(rows(red.gamma().unwrap()), vec![vec![0, 0, 1, 0]]);
    }

    #[test]
    fn reduction_identities_hold_on_every_state() {
        for (sys, include_outputs) in [(d1(), false), (obs3(), true)] {
            let red = build_reduction(&sys, include_outputs, 100).unwrap();
            let spec = sys.spec();
            let total = state_count(spec, sys.n()).unwrap();
            for idx in 0..total {
                let x = crate::grid::index_to_state(spec, sys.n(), idx);
                let psi = red.psi_hat(&x);
                assert_eq!(red.k1().mul_vec(&psi), red.psi_hat(&sys.step(&x)));
                assert_eq!(red.c().mul_vec(&psi), x);
                if let Some(gamma) = red.gamma() {
                    assert_eq!(gamma.mul_vec(&psi), sys.output(&x));
                }
            }
        }
    }

    #[test]
    fn linear_system_without_outputs_stays_two_dimensional() {
        let red = build_reduction(&obs3(), false, 100).unwrap();
        assert_eq!(red.dim(), 2);
        let names: Vec<String> = red.basis().iter().map(|b| b.to_string()).collect();
        assert_eq!(names, vec!["x1", "2*x1 + x2"]);
    }

    #[test]
    fn basis_cap_is_enforced() {
        assert!(matches!(
            build_reduction(&obs3(), true, 2),
            Err(KoopmanError::ReductionTooLarge { cap: 2 })
        ));
    }

    #[test]
    fn full_matrix_on_product_system() {
        let (monomials, m) = full_koopman_matrix(&d1(), 10).unwrap();
        let names: Vec<String> = monomials
            .iter()
            .map(|mono| {
                PolyFunc::from_terms(
                    FieldSpec::new(2).unwrap(),
                    2,
                    [(mono.exponents().to_vec(), 1)],
                )
                .to_string()
            })
            .collect();
        assert_eq!(names, vec!["1", "x2", "x1", "x1*x2"]);
        assert_eq!(
            rows(&m),
            vec![
                vec![1, 0, 0, 0],
                vec![0, 0, 0, 1],
                vec![0, 1, 0, 0],
                vec![0, 0, 0, 1],
            ]
        );
        assert_eq!(m.rank(), 3);
    }

    #[test]
    fn full_matrix_rows_match_direct_composition() {
        for sys in [d1(), obs3()] {
            let spec = sys.spec();
            let n = sys.n();
            let (monomials, m) = full_koopman_matrix(&sys, 50).unwrap();
            for (i, mono) in monomials.iter().enumerate() {
                let poly =
                    PolyFunc::from_terms(spec, n, [(mono.exponents().to_vec(), 1)]);
                let composed = poly.koopman_apply(sys.updates()).unwrap();
                let mut expected = vec![0u64; monomials.len()];
                for (term, coeff) in composed.terms() {
                    let col = monomials.iter().position(|q| q == term).unwrap();
                    expected[col] = coeff;
                }
                assert_eq!(m.row(i), expected.as_slice(), "row {i}");
            }
        }
    }

    #[test]
    fn state_cap_is_enforced() {
        assert!(matches!(
            full_koopman_matrix(&d1(), 3),
            Err(KoopmanError::StateSpaceTooLarge { cap: 3 })
        ));
    }
}
