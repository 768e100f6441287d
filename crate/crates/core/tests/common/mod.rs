//! Shared machinery for the integration suites: a seeded generator of
//! random sparse systems and the randomized cross-check and transfer-check
//! runners used by both the property tests and the acceptance gate.

// Each test target compiles this module separately and none uses all of it.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fsslab::dynamics::{analyze_structure, DynamicsError};
use fsslab::estimation::{observability, recover_initial, EstimationError};
use fsslab::koopman::{build_reduction, KoopmanError};
use fsslab::oracle::{brute_force_observability, brute_force_structure, lemma_suite, LemmaReport};
use fsslab::sysdef::parse_system;
use fsslab::FssSystem;

pub const BIOCHEM_PATH: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/../../systems/biochem.fss"
);
pub const OBS3_PATH: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../systems/obs3.fss");

pub fn load_system(path: &str) -> FssSystem {
    let text = std::fs::read_to_string(path).expect("fixture file readable");
    parse_system(&text).expect("fixture file parses")
}

fn render_term(rng: &mut ChaCha8Rng, p: u64, n: usize) -> String {
    let coeff = rng.gen_range(1..p);
    let var_count = if rng.gen_bool(0.35) { 2.min(n) } else { 1 };
    let mut factors = Vec::new();
    if coeff > 1 || rng.gen_bool(0.1) {
        factors.push(coeff.to_string());
    }
    let mut used = Vec::new();
    for _ in 0..var_count {
        let mut v = rng.gen_range(1..=n);
        while used.contains(&v) {
            v = rng.gen_range(1..=n);
        }
        used.push(v);
        let max_exp = (p - 1).min(2).max(1);
        let e = rng.gen_range(1..=max_exp);
        if e == 1 {
            factors.push(format!("x{}", v));
        } else {
            factors.push(format!("x{}^{}", v, e));
        }
    }
    if factors.is_empty() {
        factors.push("1".to_string());
    }
    factors.join("*")
}

fn render_poly(rng: &mut ChaCha8Rng, p: u64, n: usize, max_terms: usize) -> String {
    let terms = rng.gen_range(1..=max_terms);
    let mut parts: Vec<String> = (0..terms).map(|_| render_term(rng, p, n)).collect();
    if rng.gen_bool(0.3) {
        parts.push(rng.gen_range(0..p).to_string());
    }
    parts.join(" + ")
}

fn system_text(p: u64, n: usize, updates: &[String], outputs: &[String]) -> String {
    let mut text = format!("field {}\nvars", p);
    for i in 1..=n {
        text.push_str(&format!(" x{}", i));
    }
    text.push('\n');
    for (i, u) in updates.iter().enumerate() {
        text.push_str(&format!("update x{} = {}\n", i + 1, u));
    }
    for (j, g) in outputs.iter().enumerate() {
        text.push_str(&format!("output z{} = {}\n", j + 1, g));
    }
    text
}

/// A wild sparse system on a small grid (p^n <= 243).
pub fn small_system(rng: &mut ChaCha8Rng) -> FssSystem {
    let (p, max_n): (u64, usize) = match rng.gen_range(0..3) {
        0 => (2, 7),
        1 => (3, 5),
        _ => (5, 3),
    };
    let n = rng.gen_range(1..=max_n);
    let updates: Vec<String> = (0..n).map(|_| render_poly(rng, p, n, 3)).collect();
    let m = if rng.gen_bool(0.25) {
        0
    } else {
        rng.gen_range(1..=2)
    };
    let outputs: Vec<String> = (0..m).map(|_| render_poly(rng, p, n, 2)).collect();
    parse_system(&system_text(p, n, &updates, &outputs)).expect("generated text parses")
}

/// A mostly-linear system on a larger grid (256 <= p^n <= 4096), with a
/// couple of nonlinear terms so the lift stays modest while the state
/// space is big.
pub fn lean_large_system(rng: &mut ChaCha8Rng) -> FssSystem {
    let (p, n): (u64, usize) = match rng.gen_range(0..3) {
        0 => (2, rng.gen_range(9..=12)),
        1 => (3, rng.gen_range(6..=7)),
        _ => (5, rng.gen_range(4..=5)),
    };
    let mut updates: Vec<String> = (0..n)
        .map(|_| {
            let c = rng.gen_range(1..p);
            let v = rng.gen_range(1..=n);
            let mut s = if c == 1 {
                format!("x{}", v)
            } else {
                format!("{}*x{}", c, v)
            };
            if rng.gen_bool(0.3) {
                s.push_str(&format!(" + {}", rng.gen_range(1..p)));
            }
            s
        })
        .collect();
    for _ in 0..rng.gen_range(1..=2) {
        let i = rng.gen_range(0..n);
        let a = rng.gen_range(1..=n);
        let b = rng.gen_range(1..=n);
        updates[i].push_str(&format!(" + x{}*x{}", a, b));
    }
    let m = if rng.gen_bool(0.25) {
        0
    } else {
        rng.gen_range(1..=2)
    };
    let outputs: Vec<String> = (0..m)
        .map(|_| {
            let v = rng.gen_range(1..=n);
            let w = rng.gen_range(1..=n);
            if rng.gen_bool(0.5) {
                format!("x{}", v)
            } else {
                format!("x{}*x{}", v, w)
            }
        })
        .collect();
    parse_system(&system_text(p, n, &updates, &outputs)).expect("generated text parses")
}

pub struct SuiteStats {
    pub analyzed: usize,
    pub skipped: usize,
    pub observable_systems: usize,
    pub recoveries: usize,
}

/// Runs the randomized cross-check suite until `target` systems have been
/// fully analyzed. Systems that hit a size cap are skipped through their
/// typed errors and replaced; any property violation panics.
pub fn run_randomized_cross_checks(target: usize, seed: u64) -> SuiteStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = SuiteStats {
        analyzed: 0,
        skipped: 0,
        observable_systems: 0,
        recoveries: 0,
    };
    let mut attempts = 0usize;
    while stats.analyzed < target {
        attempts += 1;
        assert!(
            attempts < target * 20,
            "generator keeps producing systems that exceed the caps"
        );
        let sys = if attempts % 5 == 0 {
            lean_large_system(&mut rng)
        } else {
            small_system(&mut rng)
        };
        if check_one_system(&sys, &mut stats, &mut rng) {
            stats.analyzed += 1;
        } else {
            stats.skipped += 1;
        }
    }
    stats
}

/// Cross-checks one system; returns false when a size cap was hit (the
/// only tolerated reason not to finish).
fn check_one_system(sys: &FssSystem, stats: &mut SuiteStats, rng: &mut ChaCha8Rng) -> bool {
    let label = || format!("system:\n{}", fsslab::sysdef::render_system(sys));
    let spec = sys.spec();
    let total = fsslab::grid::state_count(spec, sys.n()).expect("state count fits");

    // Big grids get a tighter lift budget so the exhaustive checks below
    // stay inside the suite's time box.
    let basis_cap = if total > 1024 { 300 } else { 800 };
    let red = match build_reduction(sys, sys.m() > 0, basis_cap) {
        Ok(red) => red,
        Err(KoopmanError::ReductionTooLarge { .. }) => return false,
        Err(e) => panic!("unexpected reduction error {e:?} on {}", label()),
    };
    let structure = match analyze_structure(&red, 0, 1 << 14) {
        Ok(s) => s,
        Err(DynamicsError::EnumerationCapExceeded { .. })
        | Err(DynamicsError::PeriodOverflow) => return false,
        Err(e) => panic!("unexpected structure error {e:?} on {}", label()),
    };
    let report = brute_force_structure(sys, 1 << 20).expect("state space fits the oracle cap");

    // Exact fixed-point agreement.
    assert_eq!(
        structure.fixed_points,
        report.fixed_points,
        "fixed points disagree on {}",
        label()
    );

    // Every realized orbit length was predicted.
    for &l in &report.orbit_lengths {
        assert!(
            structure.predicted_orbit_lengths.contains(&(l as u128)),
            "orbit length {} not predicted on {}",
            l,
            label()
        );
    }

    // The longest chain respects the nilpotency bound.
    assert!(
        report.max_chain <= structure.nilpotency_index as u64,
        "chain {} exceeds nilpotency {} on {}",
        report.max_chain,
        structure.nilpotency_index,
        label()
    );

    // Oracle internal cardinality: cycle states and transients tile the grid.
    let cyclic: u64 = report.orbit_lengths.iter().sum();
    let transients = report
        .chain_length_per_state
        .iter()
        .filter(|&&d| d > 0)
        .count() as u64;
    assert_eq!(cyclic + transients, report.state_count, "{}", label());

    // Representation invariants, exhaustively over the state space. Basis
    // functions are tabulated once so each state costs one matrix-vector
    // product instead of N polynomial evaluations.
    let basis_grids: Vec<Vec<u64>> = red.basis().iter().map(|f| f.eval_grid()).collect();
    let output_grids: Vec<Vec<u64>> = sys.outputs().iter().map(|g| g.eval_grid()).collect();
    for idx in 0..total {
        let x = fsslab::grid::index_to_state(spec, sys.n(), idx);
        let psi: Vec<u64> = basis_grids.iter().map(|g| g[idx]).collect();
        let next = report.successor[idx];
        assert_eq!(
            next,
            fsslab::grid::state_to_index(spec, &sys.step(&x)),
            "tabulated successor disagrees with stepping on {}",
            label()
        );
        let psi_next: Vec<u64> = basis_grids.iter().map(|g| g[next]).collect();
        assert_eq!(
            red.k1().mul_vec(&psi),
            psi_next,
            "lift does not commute at {:?} on {}",
            x,
            label()
        );
        assert_eq!(red.c().mul_vec(&psi), x, "C row mismatch on {}", label());
        if let Some(gamma) = red.gamma() {
            let z: Vec<u64> = output_grids.iter().map(|g| g[idx]).collect();
            assert_eq!(gamma.mul_vec(&psi), z, "output row mismatch on {}", label());
        }
    }

    if sys.m() > 0 {
        let obs = observability(&red).expect("outputs present");
        if obs.observable {
            stats.observable_systems += 1;
            let (injective, pair) = brute_force_observability(sys, red.dim().max(1), 1 << 20)
                .expect("state space fits the oracle cap");
            assert!(
                injective,
                "linear verdict says observable but {:?} collide on {}",
                pair,
                label()
            );
        }

        // Recovery round-trip from a random trajectory.
        let x0 = fsslab::grid::index_to_state(spec, sys.n(), rng.gen_range(0..total));
        let window = red.dim().clamp(1, 6);
        let (_, outs) = sys.simulate(&x0, window - 1);
        match recover_initial(&red, &outs, 4096) {
            Ok(candidates) => {
                assert!(
                    candidates.contains(&x0),
                    "true initial state {:?} missing from recovery on {}",
                    x0,
                    label()
                );
                for cand in &candidates {
                    let (_, replay) = sys.simulate(cand, window - 1);
                    assert_eq!(replay, outs, "non-reproducing recovery on {}", label());
                }
                stats.recoveries += 1;
            }
            Err(EstimationError::EnumerationCapExceeded { .. }) => {}
            Err(e) => panic!("unexpected recovery error {e:?} on {}", label()),
        }
    }
    true
}

/// The fixed roster for the transfer-check suite: named small systems
/// plus seeded random ones, all within 512 states.
pub fn lemma_roster() -> Vec<(String, FssSystem)> {
    let mut roster: Vec<(String, FssSystem)> = vec![
        (
            "identity".into(),
            parse_system("field 2\nvars x1 x2\nupdate x1 = x1\nupdate x2 = x2\n").unwrap(),
        ),
        (
            "two-state-contraction".into(),
            parse_system("field 2\nvars x1 x2\nupdate x1 = x2\nupdate x2 = x1*x2\n").unwrap(),
        ),
        (
            "rotation-f3".into(),
            parse_system("field 3\nvars x1 x2\nupdate x1 = 2*x1 + x2\nupdate x2 = x1 + x2\n")
                .unwrap(),
        ),
        (
            "six-species-network".into(),
            load_system(BIOCHEM_PATH),
        ),
        (
            "affine-swap-f3".into(),
            parse_system("field 3\nvars x1 x2\nupdate x1 = x2 + 1\nupdate x2 = x1\n").unwrap(),
        ),
        (
            "projection-f5".into(),
            parse_system("field 5\nvars x1 x2\nupdate x1 = x1*x2\nupdate x2 = 2\n").unwrap(),
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut added = 0;
    while added < 10 {
        let sys = small_system(&mut rng);
        let states = fsslab::grid::state_count(sys.spec(), sys.n()).unwrap();
        if states <= 128 {
            roster.push((format!("random-{}", added), sys));
            added += 1;
        }
    }
    // One system at the 512-state ceiling.
    loop {
        let sys = lean_large_system(&mut rng);
        if fsslab::grid::state_count(sys.spec(), sys.n()) == Some(512) {
            roster.push(("lean-512".into(), sys));
            break;
        }
    }
    roster
}

pub fn run_lemma_roster() -> Vec<(String, LemmaReport)> {
    lemma_roster()
        .into_iter()
        .map(|(name, sys)| {
            let report = lemma_suite(&sys, 512).expect("roster systems fit the cap");
            (name, report)
        })
        .collect()
}
