//! Command-line front end: parse a `.fss` system file, analyze it, and
//! print human-readable tables plus an optional JSON report.
//!
//! Exit codes: 0 success, 2 parse or usage error, 3 a configured cap was
//! exceeded or no observer exists within the search budget, 4 violated
//! internal invariant.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use fsslab::dynamics::{analyze_structure, periodic_points, DynamicsError, StructureReport};
use fsslab::estimation::{
    observability, recover_initial, run_observer_with_truth, synthesize_deadbeat_gain,
    EstimationError, ObservabilityReport, ObserverGain,
};
use fsslab::koopman::{build_reduction, KoopmanError, KoopmanReduction};
use fsslab::oracle::{
    brute_force_observability, brute_force_structure, lemma_suite, OracleError, OracleReport,
};
use fsslab::sysdef::{parse_system, ParseError};
use fsslab::unipoly::{factor, render_factored};
use fsslab::{FssSystem, MatrixFp};

#[derive(Parser)]
#[command(
    name = "fsslab",
    version,
    about = "Analyze nonlinear finite state systems over prime fields"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the reduced linear model and report solution structure.
    Analyze {
        /// System description file.
        file: PathBuf,
        /// Cross-check against brute-force enumeration.
        #[arg(long)]
        oracle: bool,
        /// List the fixed points instead of only counting them.
        #[arg(long = "fixed-points")]
        fixed_points: bool,
        /// List all states whose orbit length divides L.
        #[arg(long, value_name = "L")]
        orbits: Option<u64>,
        /// Write the JSON report to this path.
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
        #[command(flatten)]
        caps: CapArgs,
    },
    /// Recover the initial state from an observed output sequence.
    Recover {
        file: PathBuf,
        /// Comma-separated outputs, one value per output per step.
        #[arg(long, value_name = "CSV")]
        outputs: String,
        #[arg(long = "enum-cap", default_value_t = 65536)]
        enum_cap: u64,
        #[arg(long = "basis-cap", default_value_t = 20000)]
        basis_cap: usize,
    },
    /// Synthesize a deadbeat observer gain, optionally simulating it.
    Observer {
        file: PathBuf,
        /// Simulate the plant from this initial state and run the
        /// observer against its outputs.
        #[arg(long, value_name = "CSV", requires = "steps")]
        simulate: Option<String>,
        /// Number of table rows to print when simulating.
        #[arg(long, value_name = "K")]
        steps: Option<usize>,
        /// Initial lifted estimate (defaults to all zeros).
        #[arg(long, value_name = "CSV")]
        yhat0: Option<String>,
        /// Write the JSON report to this path.
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
        #[arg(long = "basis-cap", default_value_t = 20000)]
        basis_cap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Iterate the system and print states and outputs.
    Simulate {
        file: PathBuf,
        /// Comma-separated initial state.
        #[arg(long, value_name = "CSV")]
        x0: String,
        /// Number of steps; prints K+1 rows.
        #[arg(long, value_name = "K")]
        steps: usize,
    },
}

#[derive(Args)]
struct CapArgs {
    /// Cap on enumerated solution sets (fixed points, recovery cosets).
    #[arg(long = "enum-cap", default_value_t = 65536)]
    enum_cap: u64,
    /// Cap on brute-force state enumeration.
    #[arg(long = "oracle-cap", default_value_t = 1048576)]
    oracle_cap: u64,
    /// Cap on the full function-space matrix used by transfer checks.
    #[arg(long = "koopman-cap", default_value_t = 1024)]
    koopman_cap: u64,
    /// Cap on the dimension of the reduced linear model.
    #[arg(long = "basis-cap", default_value_t = 20000)]
    basis_cap: usize,
    /// Seed for randomized factoring and gain search.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output window for the brute-force observability check
    /// (defaults to the reduction dimension).
    #[arg(long)]
    horizon: Option<usize>,
}

enum CliError {
    Usage(String),
    Cap(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Cap(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<KoopmanError> for CliError {
    fn from(e: KoopmanError) -> Self {
        CliError::Cap(e.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::EnumerationCapExceeded { .. } | DynamicsError::PeriodOverflow => {
                CliError::Cap(e.to_string())
            }
            DynamicsError::Linalg(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<EstimationError> for CliError {
    fn from(e: EstimationError) -> Self {
        match e {
            EstimationError::NoOutputs => CliError::Usage(e.to_string()),
            EstimationError::EnumerationCapExceeded { .. }
            | EstimationError::NotDetectable
            | EstimationError::GainSearchExhausted => CliError::Cap(e.to_string()),
            EstimationError::InconsistentOutputs | EstimationError::Internal(_) => {
                CliError::Internal(e.to_string())
            }
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::StateSpaceTooLarge { .. } => CliError::Cap(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Analyze {
            file,
            oracle,
            fixed_points,
            orbits,
            json,
            caps,
        } => cmd_analyze(&file, oracle, fixed_points, orbits, json.as_deref(), &caps),
        Cmd::Recover {
            file,
            outputs,
            enum_cap,
            basis_cap,
        } => cmd_recover(&file, &outputs, enum_cap, basis_cap),
        Cmd::Observer {
            file,
            simulate,
            steps,
            yhat0,
            json,
            basis_cap,
            seed,
        } => cmd_observer(
            &file,
            simulate.as_deref(),
            steps,
            yhat0.as_deref(),
            json.as_deref(),
            basis_cap,
            seed,
        ),
        Cmd::Simulate { file, x0, steps } => cmd_simulate(&file, &x0, steps),
    }
}

fn load_system(path: &Path) -> Result<FssSystem, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_system(&text)?)
}

fn parse_csv(raw: &str, what: &str) -> Result<Vec<u64>, CliError> {
    raw.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<u64>()
                .map_err(|_| CliError::Usage(format!("malformed {what}: {raw:?}")))
        })
        .collect()
}

fn parse_state(raw: &str, sys: &FssSystem) -> Result<Vec<u64>, CliError> {
    let values = parse_csv(raw, "state")?;
    if values.len() != sys.n() {
        return Err(CliError::Usage(format!(
            "state needs {} coordinates, got {}",
            sys.n(),
            values.len()
        )));
    }
    Ok(values.iter().map(|&v| sys.spec().reduce(v)).collect())
}

fn fmt_state(x: &[u64]) -> String {
    let inner: Vec<String> = x.iter().map(|v| v.to_string()).collect();
    format!("({})", inner.join(", "))
}

fn state_count_u128(sys: &FssSystem) -> u128 {
    let mut total: u128 = 1;
    for _ in 0..sys.n() {
        total = total.saturating_mul(sys.spec().modulus() as u128);
    }
    total
}

fn divisor_string(divisors: &[(fsslab::UniPoly, u32)]) -> String {
    divisors
        .iter()
        .map(|pair| render_factored(std::slice::from_ref(pair)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn json_u128(v: u128) -> Value {
    u64::try_from(v)
        .map(Value::from)
        .unwrap_or_else(|_| Value::String(v.to_string()))
}

fn matrix_json(m: &MatrixFp) -> Value {
    Value::Array(
        m.row_vecs()
            .into_iter()
            .map(|row| Value::Array(row.into_iter().map(Value::from).collect()))
            .collect(),
    )
}

fn states_json(states: &[Vec<u64>]) -> Value {
    Value::Array(
        states
            .iter()
            .map(|x| Value::Array(x.iter().copied().map(Value::from).collect()))
            .collect(),
    )
}

fn system_json(sys: &FssSystem, path: &Path) -> Value {
    let names = sys.var_names();
    json!({
        "path": path.display().to_string(),
        "field": sys.spec().modulus(),
        "vars": names,
        "outputs": sys.output_names(),
        "updates": sys
            .updates()
            .iter()
            .map(|f| f.render(names))
            .collect::<Vec<_>>(),
        "output_maps": sys
            .outputs()
            .iter()
            .map(|g| g.render(names))
            .collect::<Vec<_>>(),
    })
}

fn reduction_json(red: &KoopmanReduction) -> Value {
    let names = red.system().var_names();
    json!({
        "N": red.dim(),
        "basis": red
            .basis()
            .iter()
            .map(|f| f.render(names))
            .collect::<Vec<_>>(),
        "K1": matrix_json(red.k1()),
        "C": matrix_json(red.c()),
        "Gamma": red.gamma().map(matrix_json).unwrap_or(Value::Null),
    })
}

fn structure_json(structure: &StructureReport) -> Value {
    json!({
        "min_poly": structure.min_poly.to_string(),
        "min_poly_factored": render_factored(&factor(&structure.min_poly, 0)),
        "elementary_divisors": structure
            .elementary_divisors
            .iter()
            .map(|(base, exp)| json!({"base": base.to_string(), "exponent": exp}))
            .collect::<Vec<_>>(),
        "predicted_orbit_lengths": structure
            .predicted_orbit_lengths
            .iter()
            .map(|&l| json_u128(l))
            .collect::<Vec<_>>(),
        "nilpotency_index": structure.nilpotency_index,
        "fixed_points": states_json(&structure.fixed_points),
    })
}

fn oracle_json(report: &OracleReport) -> Value {
    json!({
        "state_count": report.state_count,
        "orbit_lengths": report.orbit_lengths,
        "max_chain": report.max_chain,
        "fixed_points": states_json(&report.fixed_points),
        "root_count": report.roots.len(),
        "nonsingular": report.nonsingular,
        "fss_period": report.fss_period.map(json_u128).unwrap_or(Value::Null),
    })
}

fn write_json(path: &Path, doc: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(doc)
        .map_err(|e| CliError::Internal(format!("JSON serialization failed: {e}")))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze(
    file: &Path,
    oracle: bool,
    list_fixed: bool,
    orbits: Option<u64>,
    json_path: Option<&Path>,
    caps: &CapArgs,
) -> Result<(), CliError> {
    let sys = load_system(file)?;
    let red = build_reduction(&sys, true, caps.basis_cap)?;
    let structure = analyze_structure(&red, caps.seed, caps.enum_cap)?;

    println!("system: {}", file.display());
    println!(
        "field: p = {}, n = {} ({} states), outputs: {}",
        sys.spec().modulus(),
        sys.n(),
        state_count_u128(&sys),
        sys.m()
    );
    println!("N = {}", red.dim());
    let names = sys.var_names();
    let basis: Vec<String> = red.basis().iter().map(|f| f.render(names)).collect();
    println!("basis: {}", basis.join(", "));
    println!("minimal polynomial: {}", structure.min_poly);
    println!(
        "minimal polynomial factored: {}",
        render_factored(&factor(&structure.min_poly, caps.seed))
    );
    println!(
        "elementary divisors: {}",
        divisor_string(&structure.elementary_divisors)
    );
    let lengths: Vec<String> = structure
        .predicted_orbit_lengths
        .iter()
        .map(|l| l.to_string())
        .collect();
    println!("predicted orbit lengths: {{{}}}", lengths.join(", "));
    println!("nilpotency index: {}", structure.nilpotency_index);
    println!("fixed points: {}", structure.fixed_points.len());
    if list_fixed {
        for x in &structure.fixed_points {
            println!("  {}", fmt_state(x));
        }
    }

    let mut orbit_states: Option<Vec<(Vec<u64>, u64)>> = None;
    if let Some(length) = orbits {
        let states = periodic_points(&red, length, caps.enum_cap)?;
        println!("orbits dividing {}: {} states", length, states.len());
        for (x, period) in &states {
            println!("  {} period {}", fmt_state(x), period);
        }
        orbit_states = Some(states);
    }

    let obs = if sys.m() > 0 {
        let report = observability(&red)?;
        println!(
            "observability: {} (rank {} of {})",
            if report.observable {
                "observable"
            } else {
                "not observable"
            },
            report.rank,
            red.dim()
        );
        Some(report)
    } else {
        None
    };

    let mut oracle_section: Option<Value> = None;
    if oracle {
        oracle_section = Some(run_oracle_cross_check(&sys, &red, &structure, &obs, caps)?);
    }

    if let Some(path) = json_path {
        let mut doc = json!({
            "system": system_json(&sys, file),
            "reduction": reduction_json(&red),
            "structure": structure_json(&structure),
            "config": json!({
                "subcommand": "analyze",
                "enum_cap": caps.enum_cap,
                "oracle_cap": caps.oracle_cap,
                "koopman_cap": caps.koopman_cap,
                "basis_cap": caps.basis_cap,
                "seed": caps.seed,
                "horizon": caps.horizon,
                "oracle": oracle,
                "fixed_points": list_fixed,
                "orbits": orbits,
            }),
        });
        if let Some(states) = &orbit_states {
            doc["structure"]["orbits_dividing"] = json!({
                "length": orbits,
                "states": states
                    .iter()
                    .map(|(x, period)| json!({
                        "state": x,
                        "period": period,
                    }))
                    .collect::<Vec<_>>(),
            });
        }
        if let Some(report) = &obs {
            doc["observability"] = json!({
                "rank": report.rank,
                "observable": report.observable,
            });
        }
        if let Some(section) = oracle_section {
            doc["oracle"] = section;
        }
        write_json(path, &doc)?;
        println!("JSON report written to {}", path.display());
    }
    Ok(())
}

/// Brute-force agreement lines for `analyze --oracle`. Disagreement with
/// the linear model is an internal invariant violation.
fn run_oracle_cross_check(
    sys: &FssSystem,
    red: &KoopmanReduction,
    structure: &StructureReport,
    obs: &Option<ObservabilityReport>,
    caps: &CapArgs,
) -> Result<Value, CliError> {
    let report = brute_force_structure(sys, caps.oracle_cap)?;
    let cycles = report.orbit_lengths.len();
    println!(
        "oracle: {} states, {} cycles, orbit lengths {:?}, max chain {}, roots {}, {}",
        report.state_count,
        cycles,
        report.orbit_lengths,
        report.max_chain,
        report.roots.len(),
        if report.nonsingular {
            "bijective"
        } else {
            "not bijective"
        }
    );

    if structure.fixed_points != report.fixed_points {
        return Err(CliError::Internal(
            "fixed points from the linear model disagree with enumeration".into(),
        ));
    }
    println!("oracle agreement: fixed points match");

    for &l in &report.orbit_lengths {
        if !structure.predicted_orbit_lengths.contains(&(l as u128)) {
            return Err(CliError::Internal(format!(
                "realized orbit length {l} was not predicted"
            )));
        }
    }
    println!("oracle agreement: orbit lengths within predicted set");

    if report.max_chain > structure.nilpotency_index as u64 {
        return Err(CliError::Internal(format!(
            "chain of length {} exceeds nilpotency index {}",
            report.max_chain, structure.nilpotency_index
        )));
    }
    println!("oracle agreement: max chain within nilpotency bound");

    let mut observability_agrees = Value::Null;
    if let Some(obs_report) = obs {
        let horizon = caps.horizon.unwrap_or(red.dim()).max(1);
        let (injective, _) = brute_force_observability(sys, horizon, caps.oracle_cap)?;
        if injective != obs_report.observable {
            return Err(CliError::Internal(
                "observability verdicts disagree between rank test and enumeration".into(),
            ));
        }
        println!(
            "oracle agreement: observability verdict matches (both {})",
            if injective {
                "observable"
            } else {
                "not observable"
            }
        );
        observability_agrees = Value::Bool(true);
    }

    let mut transfer_json = Value::Null;
    if state_count_u128(sys) <= caps.koopman_cap as u128 {
        let lemma = lemma_suite(sys, caps.koopman_cap)?;
        let mut rows = Vec::new();
        for check in &lemma.checks {
            println!(
                "transfer check {}: {} — {}",
                check.name,
                if check.passed { "pass" } else { "FAIL" },
                check.detail
            );
            rows.push(json!({
                "name": check.name,
                "passed": check.passed,
                "detail": check.detail,
            }));
        }
        if !lemma.all_passed() {
            return Err(CliError::Internal(
                "a transfer check between the map and the full operator failed".into(),
            ));
        }
        transfer_json = Value::Array(rows);
    } else {
        println!(
            "transfer checks skipped: {} states exceed the full-operator cap {}",
            state_count_u128(sys),
            caps.koopman_cap
        );
    }

    let mut section = oracle_json(&report);
    section["agreement"] = json!({
        "fixed_points_match": true,
        "orbit_lengths_predicted": true,
        "max_chain_within_bound": true,
        "observability_match": observability_agrees,
    });
    section["transfer_checks"] = transfer_json;
    Ok(section)
}

fn cmd_recover(
    file: &Path,
    outputs_raw: &str,
    enum_cap: u64,
    basis_cap: usize,
) -> Result<(), CliError> {
    let sys = load_system(file)?;
    if sys.m() == 0 {
        return Err(CliError::Usage(
            "system has no outputs; nothing to recover from".into(),
        ));
    }
    let flat = parse_csv(outputs_raw, "outputs")?;
    if flat.is_empty() || flat.len() % sys.m() != 0 {
        return Err(CliError::Usage(format!(
            "output count {} is not a positive multiple of the {} outputs per step",
            flat.len(),
            sys.m()
        )));
    }
    let spec = sys.spec();
    let outputs: Vec<Vec<u64>> = flat
        .chunks(sys.m())
        .map(|chunk| chunk.iter().map(|&v| spec.reduce(v)).collect())
        .collect();

    let red = build_reduction(&sys, true, basis_cap)?;
    match recover_initial(&red, &outputs, enum_cap) {
        Ok(states) if states.len() == 1 => {
            println!("x(0) = {}", fmt_state(&states[0]));
            Ok(())
        }
        Ok(states) => {
            let rendered: Vec<String> = states.iter().map(|x| fmt_state(x)).collect();
            println!("x(0) in {{{}}}", rendered.join(", "));
            Ok(())
        }
        Err(EstimationError::InconsistentOutputs) => {
            println!("no trajectory produces these outputs");
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_observer(
    file: &Path,
    simulate: Option<&str>,
    steps: Option<usize>,
    yhat0: Option<&str>,
    json_path: Option<&Path>,
    basis_cap: usize,
    seed: u64,
) -> Result<(), CliError> {
    let sys = load_system(file)?;
    if sys.m() == 0 {
        return Err(CliError::Usage(
            "system has no outputs; an observer needs measurements".into(),
        ));
    }
    let red = build_reduction(&sys, true, basis_cap)?;
    let gain = match synthesize_deadbeat_gain(&red, seed) {
        Err(EstimationError::NotDetectable) => {
            return Err(CliError::Cap(
                "not detectable: the unobservable part is not nilpotent, no deadbeat observer exists"
                    .into(),
            ))
        }
        other => other?,
    };

    println!("N = {}", red.dim());
    println!("L = {:?}", gain.l.row_vecs());
    println!("nilpotency index: {}", gain.nilpotency_index);

    let mut trace: Option<Vec<fsslab::estimation::ObserverStep>> = None;
    if let Some(x0_raw) = simulate {
        let x0 = parse_state(x0_raw, &sys)?;
        let steps = steps.expect("clap enforces --steps with --simulate");
        let yhat = match yhat0 {
            Some(raw) => {
                let v = parse_csv(raw, "yhat0")?;
                if v.len() != red.dim() {
                    return Err(CliError::Usage(format!(
                        "yhat0 needs {} entries, got {}",
                        red.dim(),
                        v.len()
                    )));
                }
                v
            }
            None => vec![0; red.dim()],
        };
        let rows = run_observer_with_truth(&red, &gain, &x0, &yhat, steps)?;
        for row in &rows {
            println!(
                "k={} z={} x={} x_obs={}",
                row.k,
                fmt_state(&row.z),
                fmt_state(row.x_true.as_ref().expect("simulated runs carry truth")),
                fmt_state(&row.x_est)
            );
        }
        trace = Some(rows);
    }

    if let Some(path) = json_path {
        let obs = observability(&red)?;
        let mut doc = json!({
            "system": system_json(&sys, file),
            "reduction": reduction_json(&red),
            "observability": {
                "rank": obs.rank,
                "observable": obs.observable,
            },
            "observer": observer_json(&gain),
            "config": json!({
                "subcommand": "observer",
                "basis_cap": basis_cap,
                "seed": seed,
                "steps": steps,
            }),
        });
        if let Some(rows) = &trace {
            doc["observer"]["trace"] = Value::Array(
                rows.iter()
                    .map(|row| {
                        json!({
                            "k": row.k,
                            "z": row.z,
                            "x": row.x_true,
                            "x_obs": row.x_est,
                            "converged": row.converged,
                        })
                    })
                    .collect(),
            );
        }
        write_json(path, &doc)?;
        println!("JSON report written to {}", path.display());
    }
    Ok(())
}

fn observer_json(gain: &ObserverGain) -> Value {
    json!({
        "L": matrix_json(&gain.l),
        "nilpotency_index": gain.nilpotency_index,
    })
}

fn cmd_simulate(file: &Path, x0_raw: &str, steps: usize) -> Result<(), CliError> {
    let sys = load_system(file)?;
    let x0 = parse_state(x0_raw, &sys)?;
    let (states, outputs) = sys.simulate(&x0, steps);
    for (k, x) in states.iter().enumerate() {
        if sys.m() > 0 {
            println!("k={} x={} z={}", k, fmt_state(x), fmt_state(&outputs[k]));
        } else {
            println!("k={} x={}", k, fmt_state(x));
        }
    }
    Ok(())
}
