//! `bellkit`: command-line front end for the Bell-test analysis library.
//!
//! Every subcommand is a thin adapter over `bellkit-core`: arguments are
//! parsed, handed to the library, and the library's own report types are
//! emitted as JSON (or CSV for tabulated curves and flat simulation rows).
//!
//! Exit codes: `0` on success, `2` on usage errors, `1` on domain errors;
//! domain errors print a `{"error": {"kind": ..., "message": ...}}` payload
//! so callers can branch on the machine-readable kind. Seeded subcommands
//! default to the fixed seed `0xBE11B0A7`, so bare invocations are
//! reproducible; the `BELLKIT_THREADS` environment variable caps simulation
//! workers without changing any output.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use bellkit_core::{
    chained_quantum_settings, chained_value, chsh_self_test_probe, correlator_polytope_vertices,
    detection_cheat, facet_enumeration, horodecki_max_chsh, is_trivial_facet, leaked_settings_run,
    leggett_marginal_bound, local_fraction_bound, lv_membership, majority_vote_coarse_grain,
    mayers_yao_residuals, memory_lv_run, ml_feasibility, pure_state_max_chsh,
    q1_behavior_feasibility, randomness_bound, simulate_single_qubit_lv, simulate_toner_bacon,
    simulate_werner_half, singlet_behavior, swap_isometry, two_qubit_decompose,
    Behavior, ChainedForm, ChainedSpec, CheatPairStats, DensityMatrix, Error as CoreError,
    GreedyAvoidLastLoss, MajorityHistory, PairStats, RoundRobin, RunConfig, Scenario,
    SelfTestInstance, Vec3, DEFAULT_FEASIBILITY_TOL,
};

/// Fixed default seed; documented so bare invocations are reproducible.
const DEFAULT_SEED: u64 = 0xBE11_B0A7;

// ---------------------------------------------------------------------------
// Argument grammar
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "bellkit",
    version,
    about = "Bell-test analysis toolbox: polytopes, quantum bounds, \
             local-variable simulations, and no-signaling boxes",
    propagate_version = true
)]
struct Cli {
    /// Write the payload to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the facets of a correlator polytope.
    Facets(FacetsArgs),
    /// Decide whether a behavior is a mixture of local strategies.
    LvCheck(LvCheckArgs),
    /// Maximal CHSH value of a two-qubit state, with optimal settings.
    ChshMax(ChshMaxArgs),
    /// Tabulate an analytic curve as CSV.
    Curve(CurveArgs),
    /// Run a seeded local-variable simulation model.
    Simulate(SimulateArgs),
    /// First-level quantum-set feasibility of a behavior.
    Q1(Q1Args),
    /// Certified-randomness bound from an observed CHSH value.
    Randomness(RandomnessArgs),
    /// Macroscopic-locality feasibility of a behavior.
    MacroLocality(MacroLocalityArgs),
    /// Self-testing diagnostics for a state-and-measurements instance.
    Selftest(SelftestArgs),
    /// Chained correlation sums and their bounds.
    Chained(ChainedArgs),
    /// Random-access-code game values.
    Rac(RacArgs),
    /// Majority-vote coarse-graining of a behavior.
    MacroVote(MacroVoteArgs),
}

#[derive(Args)]
struct FacetsArgs {
    /// Scenario as `a_inputs,a_outputs,b_inputs,b_outputs`, e.g. `2,2,2,2`.
    #[arg(long, default_value = "2,2,2,2")]
    scenario: String,
}

#[derive(Args)]
struct LvCheckArgs {
    /// Behavior JSON file.
    #[arg(long)]
    behavior: PathBuf,
    /// Entrywise tolerance for the membership certificate.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args)]
struct ChshMaxArgs {
    /// Density-matrix JSON file (4x4 two-qubit state).
    #[arg(long)]
    state: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum CurveOp {
    /// Max CHSH of the partly entangled pure state, vs its angle.
    PureChsh,
    /// Certified-randomness bound P*(S), vs the CHSH value S.
    Randomness,
    /// Chained quantum value M(1 + cos(pi/2M)), vs the chain length M.
    ChainedQuantum,
    /// Local-fraction bound M(1 - cos(pi/2M)), vs the chain length M.
    LocalFractionChained,
}

#[derive(Args)]
struct CurveArgs {
    /// Which analytic curve to tabulate.
    #[arg(long, value_enum)]
    op: CurveOp,
    /// Grid as `start:end:count`; accepts `pi`, `pi/2`, `pi/4`, `pi/8`,
    /// `sqrt2`, and `2sqrt2` as endpoints. Defaults per op.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<Grid>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimModel {
    /// Single-qubit spin along fixed directions from a hidden unit vector.
    SingleQubit,
    /// Local model reproducing the half-strength singlet correlations.
    WernerHalf,
    /// Singlet correlations from shared randomness plus one bit.
    TonerBacon,
    /// Selective no-reply strategy faking a maximal CHSH violation.
    DetectionCheat,
    /// Adaptive round-by-round local strategy with memory.
    Memory,
}

#[derive(Clone, Copy, ValueEnum)]
enum MemoryStrategyArg {
    /// Flip the losing side's last assignment after each lost round.
    GreedyAvoidLastLoss,
    /// Play the deterministic strategy that best fits the history.
    MajorityHistory,
    /// Cycle through all sixteen deterministic strategies.
    RoundRobin,
    /// Negative control: the strategy illegitimately sees both settings.
    LeakedSettings,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: SimModel,
    /// Shots (or rounds) per task.
    #[arg(long, default_value_t = 100_000)]
    shots: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Settings JSON file; shape depends on the model (see help).
    ///
    /// single-qubit: {"m": [x,y,z], "directions": [[x,y,z], ...]}.
    /// werner-half / toner-bacon: {"alice": [[x,y,z], ...], "bob": [...]}
    /// (defaults to the CHSH-optimal singlet settings when omitted).
    #[arg(long)]
    settings: Option<PathBuf>,
    /// Adaptive strategy (memory model only).
    #[arg(long, value_enum)]
    strategy: Option<MemoryStrategyArg>,
    /// Emit flat per-setting CSV rows instead of the JSON report.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct Q1Args {
    /// Behavior JSON file.
    #[arg(long)]
    behavior: PathBuf,
    /// Feasibility tolerance on the minimum eigenvalue.
    #[arg(long, default_value_t = DEFAULT_FEASIBILITY_TOL)]
    tol: f64,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true)))]
struct RandomnessArgs {
    /// Observed CHSH value.
    #[arg(long, group = "source")]
    s: Option<f64>,
    /// Tabulate the whole P*(S) curve as CSV instead.
    #[arg(long, group = "source")]
    curve: bool,
    /// Grid for --curve, as `start:end:count`.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<Grid>,
}

#[derive(Args)]
struct MacroLocalityArgs {
    /// Behavior JSON file.
    #[arg(long)]
    behavior: PathBuf,
}

#[derive(Args)]
struct SelftestArgs {
    /// Self-test instance JSON file (state plus dichotomic observables).
    #[arg(long)]
    instance: PathBuf,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true)))]
struct ChainedArgs {
    /// Chain length (settings per side).
    #[arg(long)]
    m: usize,
    /// Evaluate the singlet at the prescribed fanned settings.
    #[arg(long, group = "source")]
    quantum: bool,
    /// Behavior JSON file to evaluate instead.
    #[arg(long, group = "source")]
    behavior: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RacStrategyArg {
    /// One shared PR box plus one classical bit: wins always.
    Pr,
    /// Best deterministic classical code (send the first bit): wins 3/4.
    ClassicalBest,
    /// Exhaustive scan of all 16x16 deterministic one-bit codes.
    Bruteforce,
}

#[derive(Args)]
struct RacArgs {
    #[arg(long, value_enum)]
    strategy: RacStrategyArg,
}

#[derive(Args)]
struct MacroVoteArgs {
    /// Behavior JSON file (binary outcomes).
    #[arg(long)]
    behavior: PathBuf,
    /// Microscopic pairs per macroscopic run (odd avoids ties).
    #[arg(long, default_value_t = 101)]
    n: u64,
    /// Macroscopic runs per setting pair.
    #[arg(long, default_value_t = 10_000)]
    runs: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

// ---------------------------------------------------------------------------
// Error plumbing
// ---------------------------------------------------------------------------

enum CliError {
    /// Bad invocation detected after clap parsing; exits 2.
    Usage(String),
    /// Library or input error; exits 1 with a machine-readable payload.
    Domain { kind: String, message: String },
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Domain {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &PathBuf) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Domain {
        kind: "io".into(),
        message: format!("{}: {e}", path.display()),
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Domain {
        kind: "parse".into(),
        message: format!("{}: {e}", path.display()),
    })
}

fn to_pretty(value: &serde_json::Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON payload");
    text.push('\n');
    text
}

fn serialize_pretty<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON payload");
    text.push('\n');
    text
}

/// CSV float format: 17 significant digits, '.' decimal, no locale.
fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

// ---------------------------------------------------------------------------
// Grid specification
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
struct Grid {
    start: f64,
    end: f64,
    count: usize,
}

impl Grid {
    fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        (0..self.count)
            .map(|i| {
                self.start + (self.end - self.start) * (i as f64 / (self.count - 1) as f64)
            })
            .collect()
    }
}

fn parse_endpoint(token: &str) -> Result<f64, String> {
    let t = token.trim();
    let named = match t {
        "pi" => Some(std::f64::consts::PI),
        "pi/2" => Some(std::f64::consts::FRAC_PI_2),
        "pi/4" => Some(std::f64::consts::FRAC_PI_4),
        "pi/8" => Some(std::f64::consts::FRAC_PI_8),
        "sqrt2" => Some(std::f64::consts::SQRT_2),
        "2sqrt2" => Some(2.0 * std::f64::consts::SQRT_2),
        _ => None,
    };
    match named {
        Some(v) => Ok(v),
        None => t
            .parse::<f64>()
            .map_err(|_| format!("bad grid endpoint {t:?}")),
    }
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err("grid must be start:end:count".into());
    }
    let start = parse_endpoint(parts[0])?;
    let end = parse_endpoint(parts[1])?;
    let count: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| format!("bad grid count {:?}", parts[2]))?;
    if count == 0 {
        return Err("grid count must be positive".into());
    }
    if !(start.is_finite() && end.is_finite()) {
        return Err("grid endpoints must be finite".into());
    }
    Ok(Grid { start, end, count })
}

/// Rounds grid points to integers for chain-length grids.
fn integer_points(grid: &Grid) -> Result<Vec<usize>, CliError> {
    grid.points()
        .into_iter()
        .map(|v| {
            let m = v.round();
            if (v - m).abs() > 1e-6 || m < 0.0 {
                Err(CliError::Usage(format!(
                    "chain-length grids need integer points, got {v}"
                )))
            } else {
                Ok(m as usize)
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Subcommand handlers
// ---------------------------------------------------------------------------

fn run_facets(args: &FacetsArgs) -> Result<String, CliError> {
    let fields: Vec<usize> = args
        .scenario
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            CliError::Usage(format!(
                "--scenario must be four integers, got {:?}",
                args.scenario
            ))
        })?;
    if fields.len() != 4 {
        return Err(CliError::Usage(
            "--scenario must be a_inputs,a_outputs,b_inputs,b_outputs".into(),
        ));
    }
    let scenario = Scenario::new(fields[0], fields[1], fields[2], fields[3])?;
    let vertices = correlator_polytope_vertices(&scenario)?;
    let facets = facet_enumeration(&vertices)?;
    let rows: Vec<serde_json::Value> = facets
        .iter()
        .map(|f| {
            json!({
                "normal": f.coefficients,
                "bound": f.local_bound,
                "trivial": is_trivial_facet(f),
            })
        })
        .collect();
    Ok(to_pretty(&serde_json::Value::Array(rows)))
}

fn run_lv_check(args: &LvCheckArgs) -> Result<String, CliError> {
    let behavior: Behavior = read_json(&args.behavior)?;
    let verdict = lv_membership(&behavior, args.tol)?;
    Ok(serialize_pretty(&verdict))
}

fn run_chsh_max(args: &ChshMaxArgs) -> Result<String, CliError> {
    let rho: DensityMatrix = read_json(&args.state)?;
    let state = two_qubit_decompose(&rho)?;
    let max = horodecki_max_chsh(&state)?;
    Ok(serialize_pretty(&max))
}

fn run_curve(args: &CurveArgs) -> Result<String, CliError> {
    let mut csv = String::new();
    match args.op {
        CurveOp::PureChsh => {
            let grid = args.grid.unwrap_or(Grid {
                start: 0.0,
                end: std::f64::consts::FRAC_PI_4,
                count: 50,
            });
            csv.push_str("theta,s\n");
            for theta in grid.points() {
                let _ = writeln!(csv, "{},{}", sig17(theta), sig17(pure_state_max_chsh(theta)));
            }
        }
        CurveOp::Randomness => {
            let grid = args.grid.unwrap_or(Grid {
                start: 2.0,
                end: 2.0 * std::f64::consts::SQRT_2,
                count: 50,
            });
            csv.push_str("s,p_star\n");
            for s in grid.points() {
                let _ = writeln!(csv, "{},{}", sig17(s), sig17(randomness_bound(s)?));
            }
        }
        CurveOp::ChainedQuantum => {
            let grid = args.grid.unwrap_or(Grid {
                start: 2.0,
                end: 8.0,
                count: 7,
            });
            csv.push_str("m,c\n");
            for m in integer_points(&grid)? {
                let spec = ChainedSpec::new(m)?;
                let _ = writeln!(csv, "{m},{}", sig17(spec.quantum_value()));
            }
        }
        CurveOp::LocalFractionChained => {
            let grid = args.grid.unwrap_or(Grid {
                start: 2.0,
                end: 32.0,
                count: 31,
            });
            csv.push_str("m,p_local_max\n");
            for m in integer_points(&grid)? {
                let spec = ChainedSpec::new(m)?;
                let p = local_fraction_bound(
                    spec.quantum_value(),
                    spec.local_bound(),
                    spec.no_signaling_bound(),
                )?;
                let _ = writeln!(csv, "{m},{}", sig17(p));
            }
        }
    }
    Ok(csv)
}

#[derive(Deserialize)]
struct PairSettings {
    alice: Vec<Vec3>,
    bob: Vec<Vec3>,
}

#[derive(Deserialize)]
struct SingleQubitSettings {
    m: Vec3,
    directions: Vec<Vec3>,
}

/// CHSH-optimal settings for the singlet (`E = -a.b`): Alice measures z
/// and x, Bob the negated diagonal pair.
fn default_singlet_settings() -> PairSettings {
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    PairSettings {
        alice: vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0)],
        bob: vec![Vec3::new(-inv, 0.0, -inv), Vec3::new(inv, 0.0, -inv)],
    }
}

fn pair_rows(pairs: &[PairStats]) -> String {
    let mut csv = String::from("x,y,shots,n00,n01,n10,n11,correlator,correlator_se\n");
    for p in pairs {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            p.x,
            p.y,
            p.shots,
            p.counts[0],
            p.counts[1],
            p.counts[2],
            p.counts[3],
            sig17(p.correlator),
            sig17(p.correlator_se),
        );
    }
    csv
}

fn cheat_rows(cells: &[CheatPairStats]) -> String {
    let mut csv = String::from(
        "x,y,attempted,alice_no_reply,bob_no_reply,post_shots,post_correlator,\
         post_correlator_se,full_correlator,full_correlator_se\n",
    );
    for c in cells {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            c.x,
            c.y,
            c.attempted,
            c.alice_no_reply,
            c.bob_no_reply,
            c.post_selected.shots,
            sig17(c.post_selected.correlator),
            sig17(c.post_selected.correlator_se),
            sig17(c.full_sample.correlator),
            sig17(c.full_sample.correlator_se),
        );
    }
    csv
}

fn run_simulate(args: &SimulateArgs) -> Result<String, CliError> {
    let cfg = RunConfig::new(args.shots, args.seed)?;
    if args.strategy.is_some() && !matches!(args.model, SimModel::Memory) {
        return Err(CliError::Usage(
            "--strategy only applies to the memory model".into(),
        ));
    }
    match args.model {
        SimModel::SingleQubit => {
            let Some(path) = &args.settings else {
                return Err(CliError::Usage(
                    "single-qubit needs --settings with {\"m\": ..., \"directions\": ...}".into(),
                ));
            };
            let s: SingleQubitSettings = read_json(path)?;
            let report = simulate_single_qubit_lv(&s.m, &s.directions, &cfg)?;
            if args.csv {
                let mut csv = String::from("dx,dy,dz,shots,plus,minus,mean,mean_se\n");
                for d in &report.directions {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{},{},{}",
                        sig17(d.direction.0[0]),
                        sig17(d.direction.0[1]),
                        sig17(d.direction.0[2]),
                        d.shots,
                        d.plus,
                        d.minus,
                        sig17(d.mean),
                        sig17(d.mean_se),
                    );
                }
                Ok(csv)
            } else {
                Ok(serialize_pretty(&report))
            }
        }
        SimModel::WernerHalf | SimModel::TonerBacon => {
            let s = match &args.settings {
                Some(path) => read_json::<PairSettings>(path)?,
                None => default_singlet_settings(),
            };
            let report = match args.model {
                SimModel::WernerHalf => simulate_werner_half(&s.alice, &s.bob, &cfg)?,
                _ => simulate_toner_bacon(&s.alice, &s.bob, &cfg)?,
            };
            if args.csv {
                Ok(pair_rows(&report.pairs))
            } else {
                Ok(serialize_pretty(&report))
            }
        }
        SimModel::DetectionCheat => {
            if args.settings.is_some() {
                return Err(CliError::Usage(
                    "detection-cheat takes no --settings".into(),
                ));
            }
            let report = detection_cheat(&cfg)?;
            if args.csv {
                Ok(cheat_rows(&report.cells))
            } else {
                Ok(serialize_pretty(&report))
            }
        }
        SimModel::Memory => {
            if args.settings.is_some() {
                return Err(CliError::Usage(
                    "memory takes --strategy, not --settings".into(),
                ));
            }
            let strategy = args.strategy.unwrap_or(MemoryStrategyArg::GreedyAvoidLastLoss);
            let report = match strategy {
                MemoryStrategyArg::GreedyAvoidLastLoss => {
                    memory_lv_run(&mut GreedyAvoidLastLoss::default(), &cfg)?
                }
                MemoryStrategyArg::MajorityHistory => {
                    memory_lv_run(&mut MajorityHistory::default(), &cfg)?
                }
                MemoryStrategyArg::RoundRobin => memory_lv_run(&mut RoundRobin::default(), &cfg)?,
                MemoryStrategyArg::LeakedSettings => leaked_settings_run(&cfg)?,
            };
            if args.csv {
                Ok(pair_rows(&report.pairs))
            } else {
                Ok(serialize_pretty(&report))
            }
        }
    }
}

fn run_q1(args: &Q1Args) -> Result<String, CliError> {
    let behavior: Behavior = read_json(&args.behavior)?;
    let result = q1_behavior_feasibility(&behavior, args.tol)?;
    Ok(serialize_pretty(&result))
}

fn run_randomness(args: &RandomnessArgs) -> Result<String, CliError> {
    if let Some(s) = args.s {
        let p = randomness_bound(s)?;
        return Ok(to_pretty(&json!({ "s": s, "p_star": p })));
    }
    let grid = args.grid.unwrap_or(Grid {
        start: 2.0,
        end: 2.0 * std::f64::consts::SQRT_2,
        count: 50,
    });
    let mut csv = String::from("s,p_star\n");
    for s in grid.points() {
        let _ = writeln!(csv, "{},{}", sig17(s), sig17(randomness_bound(s)?));
    }
    Ok(csv)
}

fn run_macro_locality(args: &MacroLocalityArgs) -> Result<String, CliError> {
    let behavior: Behavior = read_json(&args.behavior)?;
    let result = ml_feasibility(&behavior)?;
    Ok(serialize_pretty(&result))
}

fn run_selftest(args: &SelftestArgs) -> Result<String, CliError> {
    let instance: SelfTestInstance = read_json(&args.instance)?;
    let swap = swap_isometry(&instance, None)?;
    let probe = chsh_self_test_probe(&instance)?;
    let residuals = if instance.db().is_some() {
        Some(mayers_yao_residuals(&instance)?)
    } else {
        None
    };
    Ok(to_pretty(&json!({
        "mayers_yao": residuals,
        "swap": swap,
        "chsh_probe": probe,
    })))
}

fn run_chained(args: &ChainedArgs) -> Result<String, CliError> {
    let spec = ChainedSpec::new(args.m)?;
    let (behavior, settings) = if args.quantum {
        let (alice, bob) = chained_quantum_settings(&spec);
        let b = singlet_behavior(&alice, &bob)?;
        (b, Some((alice, bob)))
    } else {
        let path = args.behavior.as_ref().expect("clap group enforces source");
        (read_json::<Behavior>(path)?, None)
    };
    let c = chained_value(&behavior, &spec, ChainedForm::C)?;
    let c_prime = chained_value(&behavior, &spec, ChainedForm::CPrime)?;
    let c_double_prime = chained_value(&behavior, &spec, ChainedForm::CDoublePrime)?;
    // The marginal-bias bound applies only to no-signaling inputs; report
    // it when it applies and null it out for signaling behaviors.
    let leggett = match leggett_marginal_bound(&behavior, &spec) {
        Ok(report) => Some(report),
        Err(CoreError::SignalingInput(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let mut payload = json!({
        "m": spec.m(),
        "c": c,
        "c_prime": c_prime,
        "c_double_prime": c_double_prime,
        "local_bound": spec.local_bound(),
        "quantum_value": spec.quantum_value(),
        "no_signaling_bound": spec.no_signaling_bound(),
        "leggett": leggett,
    });
    if let Some((alice, bob)) = settings {
        payload["settings"] = json!({ "alice": alice, "bob": bob });
    }
    Ok(to_pretty(&payload))
}

fn run_rac(args: &RacArgs) -> Result<String, CliError> {
    use bellkit_core::{rac_brute_force_best, rac_play, RacStrategy};
    let payload = match args.strategy {
        RacStrategyArg::Pr => {
            let success = rac_play(&RacStrategy::PrAssisted)?;
            json!({ "strategy": "pr", "success": success })
        }
        RacStrategyArg::ClassicalBest => {
            let success = rac_play(&RacStrategy::SendFirstBit)?;
            json!({ "strategy": "classical-best", "success": success,
                    "code": RacStrategy::SendFirstBit })
        }
        RacStrategyArg::Bruteforce => {
            let (best, code) = rac_brute_force_best();
            json!({ "strategy": "bruteforce", "scanned": 256,
                    "best_success": best, "best_code": code })
        }
    };
    Ok(to_pretty(&payload))
}

fn run_macro_vote(args: &MacroVoteArgs) -> Result<String, CliError> {
    let behavior: Behavior = read_json(&args.behavior)?;
    let cfg = RunConfig::new(args.runs, args.seed)?;
    let report = majority_vote_coarse_grain(&behavior, args.n, &cfg)?;
    Ok(serialize_pretty(&report))
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

fn dispatch(command: &Command) -> Result<String, CliError> {
    match command {
        Command::Facets(a) => run_facets(a),
        Command::LvCheck(a) => run_lv_check(a),
        Command::ChshMax(a) => run_chsh_max(a),
        Command::Curve(a) => run_curve(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Q1(a) => run_q1(a),
        Command::Randomness(a) => run_randomness(a),
        Command::MacroLocality(a) => run_macro_locality(a),
        Command::Selftest(a) => run_selftest(a),
        Command::Chained(a) => run_chained(a),
        Command::Rac(a) => run_rac(a),
        Command::MacroVote(a) => run_macro_vote(a),
    }
}

fn main() {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(payload) => {
            if let Some(path) = &cli.output {
                if let Err(e) = fs::write(path, &payload) {
                    eprintln!("cannot write {}: {e}", path.display());
                    std::process::exit(1);
                }
            } else {
                print!("{payload}");
            }
        }
        Err(CliError::Usage(message)) => {
            eprintln!("usage error: {message}");
            std::process::exit(2);
        }
        Err(CliError::Domain { kind, message }) => {
            let payload = json!({ "error": { "kind": kind, "message": message } });
            print!("{}", to_pretty(&payload));
            std::process::exit(1);
        }
    }
}
