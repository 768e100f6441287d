//! Observability, initial-state recovery, and deadbeat observer synthesis
//! on the reduced linear model.
//!
//! Output trajectories are linear in the lifted initial condition:
//! `z(k) = Gamma * K1^k * psi_hat(x(0))`. Stacking those rows gives the
//! observability matrix; full rank means output sequences of length `N`
//! pin down `psi_hat(x(0))`, hence `x(0)`. Recovery solves the stacked
//! system and filters algebraic solutions through the consistency check
//! `y = psi_hat(C y)` plus resimulation, so reported states are exactly
//! the ones that reproduce the observations.
//!
//! A deadbeat observer is a gain `L` making `K1 - L Gamma` nilpotent; the
//! estimate then matches the true lifted state after at most the
//! nilpotency index steps. Single-output gains come from Ackermann's
//! formula with target polynomial `x^N`; several outputs are folded into
//! one by searching for a combination row that keeps the pair observable.
//! When only the unobservable part is nilpotent (a detectable system), the
//! gain is synthesized on the observable block and lifted back.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::koopman::KoopmanReduction;
use crate::matrix::{Echelon, MatrixFp};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EstimationError {
    /// The system declares no outputs, so nothing can be observed.
    #[error("system has no outputs")]
    NoOutputs,
    /// A candidate set is larger than the enumeration cap.
    #[error("enumeration of {needed} candidates exceeds cap of {cap}")]
    EnumerationCapExceeded { needed: u128, cap: u64 },
    /// No initial state reproduces the observed output sequence.
    #[error("no trajectory produces these outputs")]
    InconsistentOutputs,
    /// The unobservable subsystem is not nilpotent, so no deadbeat
    /// observer exists.
    #[error("system is not detectable: the unobservable part is not nilpotent")]
    NotDetectable,
    /// No scalar combination of the outputs kept the pair observable
    /// within the search budget.
    #[error("no output combination yielded an observable scalar pair within budget")]
    GainSearchExhausted,
    /// An invariant that the theory guarantees failed to hold.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

/// Observability matrix of a matrix pair: `Gamma` stacked over
/// `Gamma K1`, ..., `Gamma K1^(N-1)`.
pub fn observability_matrix_of(k1: &MatrixFp, gamma: &MatrixFp) -> MatrixFp {
    assert_eq!(k1.rows(), k1.cols(), "transition matrix must be square");
    assert_eq!(gamma.cols(), k1.rows(), "output matrix width mismatch");
    let mut stacked = gamma.clone();
    let mut block = gamma.clone();
    for _ in 1..k1.rows() {
        block = block.mul(k1);
        stacked = stacked.vstack(&block);
    }
    stacked
}

#[derive(Debug, Clone)]
pub struct ObservabilityReport {
    pub matrix: MatrixFp,
    pub rank: usize,
    pub observable: bool,
}

/// Observability of the reduction. Errors when the system has no outputs.
pub fn observability(red: &KoopmanReduction) -> Result<ObservabilityReport, EstimationError> {
    let gamma = red.gamma().ok_or(EstimationError::NoOutputs)?;
    let matrix = observability_matrix_of(red.k1(), gamma);
    let rank = matrix.rank();
    Ok(ObservabilityReport {
        observable: rank == red.dim(),
        rank,
        matrix,
    })
}

/// All initial states whose first `T` outputs equal the given sequence,
/// sorted. Solves the stacked linear system for the lifted initial
/// condition, enumerates the solution coset (subject to `enum_cap`), and
/// keeps candidates that are consistent lifts and resimulate to the
/// observations. An empty survivor set is the typed error
/// [`EstimationError::InconsistentOutputs`].
pub fn recover_initial(
    red: &KoopmanReduction,
    outputs: &[Vec<u64>],
    enum_cap: u64,
) -> Result<Vec<Vec<u64>>, EstimationError> {
    let gamma = red.gamma().ok_or(EstimationError::NoOutputs)?;
    assert!(!outputs.is_empty(), "need at least one observed output");
    let sys = red.system();
    let spec = sys.spec();
    let m = sys.m();
    for z in outputs {
        assert_eq!(z.len(), m, "output vector arity mismatch");
    }

    let mut stacked = gamma.clone();
    let mut block = gamma.clone();
    for _ in 1..outputs.len() {
        block = block.mul(red.k1());
        stacked = stacked.vstack(&block);
    }
    let rhs: Vec<u64> = outputs
        .iter()
        .flat_map(|z| z.iter().map(|&v| spec.reduce(v)))
        .collect();

    let solved = stacked.solve(&rhs);
    let Some(particular) = solved.particular else {
        return Err(EstimationError::InconsistentOutputs);
    };

    let p = spec.modulus();
    let mut count: u128 = 1;
    for _ in 0..solved.kernel.len() {
        count = count.saturating_mul(p as u128);
    }
    if count > enum_cap as u128 {
        return Err(EstimationError::EnumerationCapExceeded {
            needed: count,
            cap: enum_cap,
        });
    }

    let steps = outputs.len() - 1;
    let mut survivors: Vec<Vec<u64>> = Vec::new();
    let mut coeffs = vec![0u64; solved.kernel.len()];
    loop {
        let mut y = particular.clone();
        for (c, basis_vec) in coeffs.iter().zip(&solved.kernel) {
            if *c == 0 {
                continue;
            }
            for (slot, &e) in y.iter_mut().zip(basis_vec) {
                *slot = spec.add(*slot, spec.mul(*c, e));
            }
        }
        let x = red.c().mul_vec(&y);
        if red.psi_hat(&x) == y {
            let (_, sim_outputs) = sys.simulate(&x, steps);
            let replayed: Vec<u64> = sim_outputs.iter().flatten().copied().collect();
            if replayed == rhs {
                survivors.push(x);
            }
        }
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
    survivors.sort();
    survivors.dedup();
    if survivors.is_empty() {
        return Err(EstimationError::InconsistentOutputs);
    }
    Ok(survivors)
}

/// Change of basis separating the observable part: in the new coordinates
/// the transition matrix is block lower triangular with the observable
/// block `A11` on top, and the output matrix only sees the first block.
#[derive(Debug, Clone)]
pub struct ObservabilityDecomposition {
    /// Invertible `N x N` basis matrix; its first `rank` columns span a
    /// complement of the unobservable subspace, the rest span it.
    pub transform: MatrixFp,
    pub transform_inv: MatrixFp,
    /// `A11`, `rank x rank`: the observable block.
    pub observable_block: MatrixFp,
    /// `A21`: coupling from the observable block into the rest.
    pub coupling_block: MatrixFp,
    /// `A22`: dynamics on the unobservable subspace.
    pub unobservable_block: MatrixFp,
    /// Output matrix restricted to the observable block.
    pub gamma_observable: MatrixFp,
    pub rank: usize,
    /// Whether the unobservable block is nilpotent.
    pub detectable: bool,
}

/// Splits the reduction along the kernel of its observability matrix. The
/// kernel is invariant under `K1`, so the transformed transition matrix
/// has an exact zero upper-right block; the pair `(A11, Gamma1)` is
/// observable by construction.
pub fn decompose_observable(
    red: &KoopmanReduction,
) -> Result<ObservabilityDecomposition, EstimationError> {
    let gamma = red.gamma().ok_or(EstimationError::NoOutputs)?;
    let k1 = red.k1();
    let spec = k1.spec();
    let n = red.dim();
    let obs = observability_matrix_of(k1, gamma);
    let kernel = obs.kernel_basis();
    let rank = n - kernel.len();

    let mut echelon = Echelon::new(spec, n);
    for v in &kernel {
        echelon.insert(v);
    }
    let mut columns: Vec<Vec<u64>> = Vec::with_capacity(n);
    for j in 0..n {
        if columns.len() == rank {
            break;
        }
        let mut e = vec![0u64; n];
        e[j] = 1;
        if echelon.insert(&e) {
            columns.push(e);
        }
    }
    columns.extend(kernel.iter().cloned());
    let transform = MatrixFp::from_cols(spec, columns);
    let transform_inv = transform
        .inverse()
        .ok_or_else(|| EstimationError::Internal("basis change is singular".into()))?;

    let kbar = transform_inv.mul(k1).mul(&transform);
    let gbar = gamma.mul(&transform);
    if !kbar.block(0, rank, rank, n).is_zero() {
        return Err(EstimationError::Internal(
            "unobservable subspace is not invariant".into(),
        ));
    }
    if !gbar.block(0, gbar.rows(), rank, n).is_zero() {
        return Err(EstimationError::Internal(
            "outputs see the unobservable subspace".into(),
        ));
    }

    let unobservable_block = kbar.block(rank, n, rank, n);
    let detectable = unobservable_block
        .pow(unobservable_block.rows() as u64)
        .is_zero();
    Ok(ObservabilityDecomposition {
        observable_block: kbar.block(0, rank, 0, rank),
        coupling_block: kbar.block(rank, n, 0, rank),
        unobservable_block,
        gamma_observable: gbar.block(0, gbar.rows(), 0, rank),
        rank,
        detectable,
        transform,
        transform_inv,
    })
}

/// Deadbeat gain for an observable pair: returns `L` with `K1 - L Gamma`
/// nilpotent. Single-output pairs use Ackermann's formula with target
/// `x^N` directly; multi-output pairs search for a combination row `w`
/// such that `(K1, w Gamma)` stays observable, sweeping low-weight rows
/// deterministically before seeded random rows.
pub fn deadbeat_gain_for(
    k1: &MatrixFp,
    gamma: &MatrixFp,
    seed: u64,
) -> Result<MatrixFp, EstimationError> {
    let n = k1.rows();
    let m = gamma.rows();
    if observability_matrix_of(k1, gamma).rank() != n {
        return Err(EstimationError::Internal(
            "deadbeat gain requested for an unobservable pair".into(),
        ));
    }
    if n == 0 {
        return Ok(MatrixFp::zeros(k1.spec(), 0, m));
    }
    if m == 1 {
        let row = gamma.row(0).to_vec();
        let col = ackermann_column(k1, &row)?;
        return Ok(MatrixFp::from_cols(k1.spec(), vec![col]));
    }

    let spec = k1.spec();
    let p = spec.modulus();
    let mut candidates: Vec<Vec<u64>> = Vec::new();
    for i in 0..m {
        let mut w = vec![0u64; m];
        w[i] = 1;
        candidates.push(w);
    }
    for i in 0..m {
        for j in (i + 1)..m {
            for c in 1..p.min(9) {
                let mut w = vec![0u64; m];
                w[i] = 1;
                w[j] = c;
                candidates.push(w);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..2048 {
        candidates.push((0..m).map(|_| rng.gen_range(0..p)).collect());
    }

    for w in &candidates {
        let virtual_row = gamma.vec_mul(w);
        if !scalar_pair_observable(k1, &virtual_row) {
            continue;
        }
        let col = ackermann_column(k1, &virtual_row)?;
        let mut l = MatrixFp::zeros(spec, n, m);
        for (i, &ci) in col.iter().enumerate() {
            for (j, &wj) in w.iter().enumerate() {
                l.set(i, j, spec.mul(ci, wj));
            }
        }
        return Ok(l);
    }
    Err(EstimationError::GainSearchExhausted)
}

fn scalar_pair_observable(k1: &MatrixFp, row: &[u64]) -> bool {
    let n = k1.rows();
    let spec = k1.spec();
    let mut echelon = Echelon::new(spec, n);
    let mut cur = row.to_vec();
    let mut rank = 0usize;
    for _ in 0..n {
        if echelon.insert(&cur) {
            rank += 1;
        }
        cur = k1.vec_mul(&cur);
    }
    rank == n
}

/// Ackermann's formula for one output row with target polynomial `x^N`:
/// `L = K1^N * O^{-1} * e_N`.
fn ackermann_column(k1: &MatrixFp, row: &[u64]) -> Result<Vec<u64>, EstimationError> {
    let n = k1.rows();
    let spec = k1.spec();
    let mut obs_rows = Vec::with_capacity(n);
    let mut cur = row.to_vec();
    for _ in 0..n {
        obs_rows.push(cur.clone());
        cur = k1.vec_mul(&cur);
    }
    let obs = MatrixFp::from_rows(spec, obs_rows);
    let mut e_last = vec![0u64; n];
    e_last[n - 1] = 1;
    let v = obs
        .solve(&e_last)
        .particular
        .ok_or_else(|| EstimationError::Internal("scalar observability matrix is singular".into()))?;
    Ok(k1.pow(n as u64).mul_vec(&v))
}

/// A synthesized observer gain with its verified closed-loop data.
#[derive(Debug, Clone)]
pub struct ObserverGain {
    /// `N x m` correction gain.
    pub l: MatrixFp,
    /// `K1 - L Gamma`, nilpotent by construction.
    pub closed_loop: MatrixFp,
    /// Least `k` with `(K1 - L Gamma)^k = 0`; estimates are exact from
    /// this step on.
    pub nilpotency_index: u32,
}

/// Synthesizes a deadbeat observer gain for the reduction: observable
/// systems directly, detectable systems through the observability
/// decomposition (the unobservable error dies out on its own). The result
/// is verified nilpotent; failure of that check is an internal error.
pub fn synthesize_deadbeat_gain(
    red: &KoopmanReduction,
    seed: u64,
) -> Result<ObserverGain, EstimationError> {
    let gamma = red.gamma().ok_or(EstimationError::NoOutputs)?;
    let k1 = red.k1();
    let n = red.dim();
    let m = gamma.rows();
    let decomposition = decompose_observable(red)?;
    let l = if decomposition.rank == n {
        deadbeat_gain_for(k1, gamma, seed)?
    } else {
        if !decomposition.detectable {
            return Err(EstimationError::NotDetectable);
        }
        let top = deadbeat_gain_for(
            &decomposition.observable_block,
            &decomposition.gamma_observable,
            seed,
        )?;
        let padded = top.vstack(&MatrixFp::zeros(k1.spec(), n - decomposition.rank, m));
        decomposition.transform.mul(&padded)
    };

    let closed_loop = k1.sub(&l.mul(gamma));
    let mut power = closed_loop.clone();
    let mut nilpotency_index = 1u32;
    while !power.is_zero() {
        if nilpotency_index as usize > n {
            return Err(EstimationError::Internal(
                "closed loop failed to be nilpotent".into(),
            ));
        }
        power = power.mul(&closed_loop);
        nilpotency_index += 1;
    }
    Ok(ObserverGain {
        l,
        closed_loop,
        nilpotency_index,
    })
}

/// One row of an observer run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObserverStep {
    pub k: usize,
    /// Measured output at step `k`.
    pub z: Vec<u64>,
    /// True state, when the run simulates the plant alongside.
    pub x_true: Option<Vec<u64>>,
    /// State estimate `C y_hat(k)` before applying the step's correction.
    pub x_est: Vec<u64>,
    /// With truth available: the lifted estimate matches the lifted true
    /// state. Without truth: `k` reached the nilpotency index.
    pub converged: bool,
}

/// Runs the observer against a simulated plant from `x0` for `steps`
/// rows. The observer never reads the plant state, only its outputs.
pub fn run_observer_with_truth(
    red: &KoopmanReduction,
    gain: &ObserverGain,
    x0: &[u64],
    yhat0: &[u64],
    steps: usize,
) -> Result<Vec<ObserverStep>, EstimationError> {
    let gamma = red.gamma().ok_or(EstimationError::NoOutputs)?;
    let sys = red.system();
    let spec = sys.spec();
    let mut x: Vec<u64> = x0.iter().map(|&v| spec.reduce(v)).collect();
    let mut yhat = reduce_estimate(red, yhat0);
    let mut rows = Vec::with_capacity(steps);
    for k in 0..steps {
        let z = sys.output(&x);
        rows.push(ObserverStep {
            k,
            z: z.clone(),
            x_true: Some(x.clone()),
            x_est: red.c().mul_vec(&yhat),
            converged: yhat == red.psi_hat(&x),
        });
        yhat = observer_update(red, gamma, gain, &yhat, &z);
        x = sys.step(&x);
    }
    Ok(rows)
}

/// Runs the observer on a recorded output sequence, one row per output.
/// Convergence is reported from the nilpotency guarantee since there is
/// no truth to compare against.
pub fn run_observer_on_outputs(
    red: &KoopmanReduction,
    gain: &ObserverGain,
    outputs: &[Vec<u64>],
    yhat0: &[u64],
) -> Result<Vec<ObserverStep>, EstimationError> {
    let gamma = red.gamma().ok_or(EstimationError::NoOutputs)?;
    let spec = red.system().spec();
    let m = red.system().m();
    let mut yhat = reduce_estimate(red, yhat0);
    let mut rows = Vec::with_capacity(outputs.len());
    for (k, z_raw) in outputs.iter().enumerate() {
        assert_eq!(z_raw.len(), m, "output vector arity mismatch");
        let z: Vec<u64> = z_raw.iter().map(|&v| spec.reduce(v)).collect();
        rows.push(ObserverStep {
            k,
            z: z.clone(),
            x_true: None,
            x_est: red.c().mul_vec(&yhat),
            converged: k as u32 >= gain.nilpotency_index,
        });
        yhat = observer_update(red, gamma, gain, &yhat, &z);
    }
    Ok(rows)
}

fn reduce_estimate(red: &KoopmanReduction, yhat0: &[u64]) -> Vec<u64> {
    assert_eq!(yhat0.len(), red.dim(), "estimate dimension mismatch");
    let spec = red.system().spec();
    yhat0.iter().map(|&v| spec.reduce(v)).collect()
}

/// `y' = K1 y + L (z - Gamma y)`.
fn observer_update(
    red: &KoopmanReduction,
    gamma: &MatrixFp,
    gain: &ObserverGain,
    yhat: &[u64],
    z: &[u64],
) -> Vec<u64> {
    let spec = red.system().spec();
    let predicted = red.k1().mul_vec(yhat);
    let expected_z = gamma.mul_vec(yhat);
    let innovation: Vec<u64> = z
        .iter()
        .zip(&expected_z)
        .map(|(&zi, &ei)| spec.sub(zi, ei))
        .collect();
    let correction = gain.l.mul_vec(&innovation);
    predicted
        .iter()
        .zip(&correction)
        .map(|(&a, &b)| spec.add(a, b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;
    use crate::koopman::build_reduction;
    use crate::sysdef::parse_system;
    use crate::unipoly::UniPoly;

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

    fn reference_pair() -> (MatrixFp, MatrixFp) {
        // The same three-state system in the reference function basis
        // (x1, x2, x1^2, x1^2 + x2^2 + x1 x2).
        let k1 = MatrixFp::from_rows(
            f3(),
            vec![
                vec![2, 1, 0, 0],
                vec![1, 1, 0, 0],
                vec![0, 0, 0, 1],
                vec![0, 0, 1, 0],
            ],
        );
        let gamma = MatrixFp::from_rows(f3(), vec![vec![0, 1, 1, 0]]);
        (k1, gamma)
    }

    #[test]
    fn observability_matrix_in_the_reference_basis() {
        let (k1, gamma) = reference_pair();
        let obs = observability_matrix_of(&k1, &gamma);
        assert_eq!(
            obs.row_vecs(),
            vec![
                vec![0, 1, 1, 0],
                vec![1, 1, 0, 1],
                vec![0, 2, 1, 0],
                vec![2, 2, 0, 1],
            ]
        );
        assert_eq!(obs.rank(), 4);
        // The observed sequence (1, 0, 1, 2) pins down the lifted state.
        assert_eq!(
            obs.solve(&[1, 0, 1, 2]).particular,
            Some(vec![2, 0, 1, 1])
        );
    }

    #[test]
    fn ackermann_gain_in_the_reference_basis() {
        let (k1, gamma) = reference_pair();
        let l = deadbeat_gain_for(&k1, &gamma, 0).unwrap();
        assert_eq!(l.row_vecs(), vec![vec![1], vec![0], vec![0], vec![2]]);
        let closed = k1.sub(&l.mul(&gamma));
        assert_eq!(
            closed.row_vecs(),
            vec![
                vec![2, 0, 2, 0],
                vec![1, 1, 0, 0],
                vec![0, 0, 0, 1],
                vec![0, 1, 2, 0],
            ]
        );
        assert!(!closed.pow(3).is_zero());
        assert!(closed.pow(4).is_zero());
    }

    #[test]
    fn three_state_example_is_observable() {
        let report = observability(&obs3()).unwrap();
        assert!(report.observable);
        assert_eq!(report.rank, 4);
        assert_eq!(report.matrix.rows(), 4);
    }

    #[test]
    fn recovery_from_a_full_window_is_unique() {
        let red = obs3();
        let got = recover_initial(&red, &[vec![1], vec![0], vec![1], vec![2]], 1 << 16).unwrap();
        assert_eq!(got, vec![vec![2, 0]]);
        // Two outputs already single out the same state here.
        let got = recover_initial(&red, &[vec![1], vec![0]], 1 << 16).unwrap();
        assert_eq!(got, vec![vec![2, 0]]);
    }

    #[test]
    fn recovery_from_one_output_lists_the_level_set() {
        let got = recover_initial(&obs3(), &[vec![1]], 1 << 16).unwrap();
        assert_eq!(got, vec![vec![0, 1], vec![1, 0], vec![2, 0]]);
    }

    #[test]
    fn impossible_outputs_are_a_typed_error() {
        let err = recover_initial(&obs3(), &[vec![1], vec![1]], 1 << 16).unwrap_err();
        assert_eq!(err, EstimationError::InconsistentOutputs);
    }

    #[test]
    fn recovery_respects_the_enumeration_cap() {
        let err = recover_initial(&obs3(), &[vec![1]], 10).unwrap_err();
        assert_eq!(
            err,
            EstimationError::EnumerationCapExceeded { needed: 27, cap: 10 }
        );
    }

    #[test]
    fn missing_outputs_are_rejected_everywhere() {
        let sys =
            parse_system("field 2\nvars x1 x2\nupdate x1 = x2\nupdate x2 = x1*x2\n").unwrap();
        let red = build_reduction(&sys, false, 100).unwrap();
        assert_eq!(observability(&red).unwrap_err(), EstimationError::NoOutputs);
        assert_eq!(
            recover_initial(&red, &[vec![]], 100).unwrap_err(),
            EstimationError::NoOutputs
        );
        assert_eq!(
            synthesize_deadbeat_gain(&red, 0).unwrap_err(),
            EstimationError::NoOutputs
        );
    }

    #[test]
    fn deadbeat_observer_on_the_three_state_example() {
        let red = obs3();
        let gain = synthesize_deadbeat_gain(&red, 0).unwrap();
        assert_eq!(gain.nilpotency_index, 4);
        assert!(gain.closed_loop.pow(4).is_zero());
        let rows =
            run_observer_with_truth(&red, &gain, &[2, 0], &vec![0; 4], 10).unwrap();
        assert_eq!(rows.len(), 10);
        let cycle = [
            vec![2, 0],
            vec![1, 2],
            vec![1, 0],
            vec![2, 1],
        ];
        let z_cycle = [1u64, 0, 1, 2];
        for row in &rows {
            assert_eq!(row.x_true.as_ref().unwrap(), &cycle[row.k % 4]);
            assert_eq!(row.z, vec![z_cycle[row.k % 4]]);
            if row.k >= 4 {
                assert!(row.converged, "step {}", row.k);
                assert_eq!(row.x_est, cycle[row.k % 4], "step {}", row.k);
            }
        }
        // The run driven by recorded outputs alone produces the same
        // estimates.
        let zs: Vec<Vec<u64>> = rows.iter().map(|r| r.z.clone()).collect();
        let blind = run_observer_on_outputs(&red, &gain, &zs, &vec![0; 4]).unwrap();
        for (a, b) in rows.iter().zip(&blind) {
            assert_eq!(a.x_est, b.x_est);
            assert!(b.x_true.is_none());
        }
    }

    #[test]
    fn decomposition_splits_an_unobservable_shift() {
        // Updates (0, x1) with output x1: the lifted pair is
        // K1 = [[0,0],[1,0]], Gamma = [1,0]; only the first coordinate is
        // observable, the unobservable block is nilpotent.
        let sys = parse_system(
            "field 2\nvars x1 x2\nupdate x1 = 0\nupdate x2 = x1\noutput z1 = x1\n",
        )
        .unwrap();
        let red = build_reduction(&sys, true, 100).unwrap();
        assert_eq!(red.k1().row_vecs(), vec![vec![0, 0], vec![1, 0]]);
        let dec = decompose_observable(&red).unwrap();
        assert_eq!(dec.rank, 1);
        assert!(dec.detectable);
        assert_eq!(dec.observable_block.row_vecs(), vec![vec![0]]);
        assert_eq!(dec.unobservable_block.row_vecs(), vec![vec![0]]);
        assert_eq!(dec.gamma_observable.row_vecs(), vec![vec![1]]);
        // The block characteristic polynomials multiply to the full one
        // even though the block divisors (x, x) differ from the full
        // matrix's single divisor x^2.
        let full_char = product_of_invariant_factors(red.k1());
        let block_char = product_of_invariant_factors(&dec.observable_block)
            .mul(&product_of_invariant_factors(&dec.unobservable_block));
        assert_eq!(full_char, block_char);
        assert_eq!(
            red.k1().invariant_factors(0).unwrap(),
            vec![UniPoly::from_coeffs(red.k1().spec(), vec![0, 0, 1])]
        );
        // Detectable synthesis: zero gain already suffices here.
        let gain = synthesize_deadbeat_gain(&red, 0).unwrap();
        assert_eq!(gain.nilpotency_index, 2);
        assert!(gain.closed_loop.pow(2).is_zero());
    }

    fn product_of_invariant_factors(m: &MatrixFp) -> UniPoly {
        m.invariant_factors(0)
            .unwrap()
            .into_iter()
            .fold(UniPoly::one(m.spec()), |acc, f| acc.mul(&f))
    }

    #[test]
    fn undetectable_system_is_a_typed_error() {
        // x1' = x1 + 1 swaps two states forever, and the output is blind.
        let sys =
            parse_system("field 2\nvars x1\nupdate x1 = x1 + 1\noutput z1 = 0\n").unwrap();
        let red = build_reduction(&sys, true, 100).unwrap();
        let dec = decompose_observable(&red).unwrap();
        assert_eq!(dec.rank, 0);
        assert!(!dec.detectable);
        assert_eq!(
            synthesize_deadbeat_gain(&red, 0).unwrap_err(),
            EstimationError::NotDetectable
        );
    }

    #[test]
    fn multi_output_gain_through_a_combination_row() {
        let sys = parse_system(
            "field 3\nvars x1 x2\nupdate x1 = x2\nupdate x2 = 2*x1\noutput z1 = x1\noutput z2 = x2\n",
        )
        .unwrap();
        let red = build_reduction(&sys, true, 100).unwrap();
        assert_eq!(red.dim(), 2);
        let gain = synthesize_deadbeat_gain(&red, 0).unwrap();
        assert_eq!(gain.l.cols(), 2);
        assert!(gain.closed_loop.pow(2).is_zero());
        let rows = run_observer_with_truth(&red, &gain, &[1, 2], &vec![0; 2], 5).unwrap();
        for row in rows.iter().filter(|r| r.k >= gain.nilpotency_index as usize) {
            assert_eq!(Some(&row.x_est), row.x_true.as_ref());
        }
    }

    #[test]
    fn combination_search_can_exhaust_honestly() {
        // The identity map with both coordinates observed is observable,
        // but no single row combination keeps it so: every scalar pair
        // with K1 = I has rank 1. The typed error reports that limit.
        let sys = parse_system(
            "field 2\nvars x1 x2\nupdate x1 = x1\nupdate x2 = x2\noutput z1 = x1\noutput z2 = x2\n",
        )
        .unwrap();
        let red = build_reduction(&sys, true, 100).unwrap();
        assert!(observability(&red).unwrap().observable);
        assert_eq!(
            synthesize_deadbeat_gain(&red, 0).unwrap_err(),
            EstimationError::GainSearchExhausted
        );
    }

    #[test]
    fn output_trajectories_factor_through_the_reduction() {
        let red = obs3();
        let sys = red.system();
        let gamma = red.gamma().unwrap();
        let spec = sys.spec();
        let total = crate::grid::state_count(spec, sys.n()).unwrap();
        for idx in 0..total {
            let x0 = crate::grid::index_to_state(spec, sys.n(), idx);
            let mut x = x0.clone();
            let mut psi = red.psi_hat(&x0);
            for _ in 0..(2 * red.dim()) {
                assert_eq!(gamma.mul_vec(&psi), sys.output(&x));
                psi = red.k1().mul_vec(&psi);
                x = sys.step(&x);
            }
        }
    }
}
