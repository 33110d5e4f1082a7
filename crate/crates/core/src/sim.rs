//! Seeded Monte-Carlo simulators for local-variable models.
//!
//! Every sampling run is split into fixed-size blocks; each (task, block)
//! pair gets its own counter-derived RNG stream, and blocks produce integer
//! tallies merged by summation. Reports are therefore bit-identical for a
//! given seed regardless of how many worker threads execute the blocks.
//!
//! The protocols: a single-qubit local-variable model, the exact four-point
//! mixture reproducing perfect anticorrelation on two bases, the local model
//! for the Werner state at visibility 1/2, the one-bit-of-communication
//! singlet simulation, a detection-loophole cheat, and a plug-in harness for
//! memory (adaptive) local strategies.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::polytope::DeterministicStrategy;
use crate::stats::{outcome_sign, Behavior, Scenario};
use crate::vec3::Vec3;

/// Shots processed per RNG stream; merging is summation of integer tallies.
const BLOCK_SHOTS: u64 = 1 << 16;
/// Bins of the communication model's direction-cosine histogram.
pub const HISTOGRAM_BINS: usize = 100;

/// Shot budget and seed for a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub shots: u64,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(shots: u64, seed: u64) -> Result<Self> {
        if shots == 0 {
            return Err(Error::BadBounds("shot count must be at least 1".into()));
        }
        Ok(RunConfig { shots, seed })
    }
}

/// Sampling statistics for one (Alice setting, Bob setting) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub x: usize,
    pub y: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alice_direction: Option<Vec3>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bob_direction: Option<Vec3>,
    pub shots: u64,
    /// Joint outcome counts indexed `a*2 + b` with outcome 0 meaning +1.
    pub counts: [u64; 4],
    pub correlator: f64,
    pub correlator_se: f64,
    pub alice_mean: f64,
    pub alice_mean_se: f64,
    pub bob_mean: f64,
    pub bob_mean_se: f64,
    /// Histogram of the chosen hidden direction's cosine against Alice's
    /// setting (communication model only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cos_histogram: Option<Vec<u64>>,
}

/// Mean and standard error of a +-1 variable from its outcome counts; the
/// error is the (n-1)-denominator sample standard deviation over sqrt(n).
fn mean_se(plus: u64, minus: u64) -> (f64, f64) {
    let n = plus + minus;
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = (plus as f64 - minus as f64) / n as f64;
    let var = if n > 1 {
        ((1.0 - mean * mean) * n as f64 / (n - 1) as f64).max(0.0)
    } else {
        0.0
    };
    (mean, (var / n as f64).sqrt())
}

impl PairStats {
    pub(crate) fn from_counts(x: usize, y: usize, counts: [u64; 4]) -> Self {
        let shots = counts.iter().sum();
        let (correlator, correlator_se) = mean_se(counts[0] + counts[3], counts[1] + counts[2]);
        let (alice_mean, alice_mean_se) = mean_se(counts[0] + counts[1], counts[2] + counts[3]);
        let (bob_mean, bob_mean_se) = mean_se(counts[0] + counts[2], counts[1] + counts[3]);
        PairStats {
            x,
            y,
            alice_direction: None,
            bob_direction: None,
            shots,
            counts,
            correlator,
            correlator_se,
            alice_mean,
            alice_mean_se,
            bob_mean,
            bob_mean_se,
            cos_histogram: None,
        }
    }
}

/// Per-cell sampling statistics over a full settings grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub alice_settings: usize,
    pub bob_settings: usize,
    /// Cells in row-major order: `pairs[x * bob_settings + y]`.
    pub pairs: Vec<PairStats>,
}

impl SimulationReport {
    /// Estimated behavior: per-cell relative frequencies.
    pub fn estimated_behavior(&self) -> Result<Behavior> {
        let scenario = Scenario::new(self.alice_settings, 2, self.bob_settings, 2)?;
        let mut raw = vec![0.0; scenario.table_len()];
        let mut idx = 0;
        for p in &self.pairs {
            if p.shots == 0 {
                return Err(Error::ShapeMismatch(format!(
                    "cell ({}, {}) has no samples",
                    p.x, p.y
                )));
            }
            for c in p.counts {
                raw[idx] = c as f64 / p.shots as f64;
                idx += 1;
            }
        }
        Behavior::normalized(scenario, &raw)
    }

    /// CHSH estimate `E00 + E01 + E10 - E11` with its propagated standard
    /// error; requires a 2x2 grid.
    pub fn chsh_estimate(&self) -> Result<(f64, f64)> {
        if self.alice_settings != 2 || self.bob_settings != 2 {
            return Err(Error::WrongScenario(
                "CHSH needs two settings per side".into(),
            ));
        }
        let sign = [1.0, 1.0, 1.0, -1.0];
        let mut s = 0.0;
        let mut var = 0.0;
        for (p, sg) in self.pairs.iter().zip(sign) {
            s += sg * p.correlator;
            var += p.correlator_se * p.correlator_se;
        }
        Ok((s, var.sqrt()))
    }
}

// ---------------------------------------------------------------------------
// Block runner
// ---------------------------------------------------------------------------

/// Worker threads to use: `BELLKIT_THREADS` if set, else the machine's
/// parallelism, capped at 16.
pub fn worker_count() -> usize {
    if let Ok(v) = std::env::var("BELLKIT_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            return n.clamp(1, 64);
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .clamp(1, 16)
}

/// Runs `shots` samples for each of `tasks` independent tallies. Each task
/// is cut into [`BLOCK_SHOTS`]-sized blocks; block `b` of task `t` draws
/// from stream `t << 32 | b` of the seed. Tallies are `u64` accumulators
/// merged by addition, so the result does not depend on the worker count.
pub(crate) fn run_tally<const K: usize>(
    tasks: usize,
    shots: u64,
    seed: u64,
    body: impl Fn(usize, &mut ChaCha8Rng, u64, &mut [u64; K]) + Sync,
) -> Vec<[u64; K]> {
    let mut blocks: Vec<(usize, u64, u64)> = Vec::new();
    for t in 0..tasks {
        let mut done = 0;
        let mut index = 0;
        while done < shots {
            let n = BLOCK_SHOTS.min(shots - done);
            blocks.push((t, index, n));
            done += n;
            index += 1;
        }
    }
    let run_block = |local: &mut Vec<[u64; K]>, (t, index, n): (usize, u64, u64)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((t as u64) << 32) | index);
        body(t, &mut rng, n, &mut local[t]);
    };
    let workers = worker_count().min(blocks.len().max(1));
    if workers <= 1 {
        let mut out = vec![[0u64; K]; tasks];
        for &blk in &blocks {
            run_block(&mut out, blk);
        }
        return out;
    }
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut local = vec![[0u64; K]; tasks];
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(&blk) = blocks.get(i) else { break };
                        run_block(&mut local, blk);
                    }
                    local
                })
            })
            .collect();
        let mut out = vec![[0u64; K]; tasks];
        for handle in handles {
            for (acc, part) in out.iter_mut().zip(handle.join().expect("worker panicked")) {
                for (a, p) in acc.iter_mut().zip(part) {
                    *a += p;
                }
            }
        }
        out
    })
}

/// Uniform point on the unit sphere (`cos(theta) ~ U[-1,1]`, `phi ~
/// U[0,2pi)`).
fn sample_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    let cos_t: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t)
}

/// Sign with the measure-zero tie resolved to +1.
fn sign_pm(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn outcome_of(sign: f64) -> usize {
    usize::from(sign < 0.0)
}

fn check_unit(v: &Vec3) -> Result<()> {
    if (v.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::BadVector(format!(
            "direction norm {} differs from 1",
            v.norm()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Single-qubit local-variable model
// ---------------------------------------------------------------------------

/// Sampling statistics of one measurement direction on a single system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionStats {
    pub direction: Vec3,
    pub shots: u64,
    pub plus: u64,
    pub minus: u64,
    pub mean: f64,
    pub mean_se: f64,
}

/// Report of the single-qubit local-variable run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleQubitReport {
    pub seed: u64,
    pub directions: Vec<DirectionStats>,
}

/// Local-variable model for a single spin with Bloch vector `m`: the hidden
/// variable is a uniform unit vector and the outcome along direction `a` is
/// `sign((m - lambda) . a)`, whose average converges to `m . a`.
pub fn simulate_single_qubit_lv(
    m: &Vec3,
    directions: &[Vec3],
    cfg: &RunConfig,
) -> Result<SingleQubitReport> {
    if m.norm() > 1.0 + 1e-12 {
        return Err(Error::BadVector(format!(
            "Bloch vector norm {} exceeds 1",
            m.norm()
        )));
    }
    if directions.is_empty() {
        return Err(Error::ShapeMismatch("no measurement directions".into()));
    }
    for d in directions {
        check_unit(d)?;
    }
    let tallies = run_tally::<2>(directions.len(), cfg.shots, cfg.seed, |t, rng, n, tally| {
        let d = directions[t];
        for _ in 0..n {
            let lambda = sample_unit(rng);
            let a = sign_pm(m.sub(&lambda).dot(&d));
            tally[outcome_of(a)] += 1;
        }
    });
    let directions = directions
        .iter()
        .zip(tallies)
        .map(|(d, [plus, minus])| {
            let (mean, mean_se) = mean_se(plus, minus);
            DirectionStats {
                direction: *d,
                shots: plus + minus,
                plus,
                minus,
                mean,
                mean_se,
            }
        })
        .collect();
    Ok(SingleQubitReport {
        seed: cfg.seed,
        directions,
    })
}

// ---------------------------------------------------------------------------
// Exact anticorrelation model
// ---------------------------------------------------------------------------

/// Exact local model reproducing singlet statistics on two shared bases `u`
/// and `v`: both sides measure along `u` or `v`, equal settings
/// anticorrelate perfectly, and the cross correlator is `-u.v`.
///
/// The model mixes the four strategies in which Bob always outputs the
/// opposite of Alice, with weights `q(++) = q(--) = (1 + u.v)/4` and
/// `q(+-) = q(-+) = (1 - u.v)/4` on Alice's two-setting assignment.
pub fn simulate_anticorrelation_lv(u: &Vec3, v: &Vec3) -> Result<Behavior> {
    check_unit(u)?;
    check_unit(v)?;
    let dot = u.dot(v);
    let q_same = 0.25 * (1.0 + dot);
    let q_diff = 0.25 * (1.0 - dot);
    if q_same < -1e-12 || q_diff < -1e-12 {
        return Err(Error::NegativeWeight(format!(
            "mixture weights ({q_same}, {q_diff}) out of range"
        )));
    }
    let scenario = Scenario::new(2, 2, 2, 2)?;
    let mut parts = Vec::new();
    for a_u in 0..2usize {
        for a_v in 0..2usize {
            let strat = DeterministicStrategy {
                a_assign: vec![a_u, a_v],
                b_assign: vec![1 - a_u, 1 - a_v],
            };
            let weight = if a_u == a_v { q_same } else { q_diff };
            parts.push((weight.max(0.0), strat.behavior(&scenario)?));
        }
    }
    let refs: Vec<(f64, &Behavior)> = parts.iter().map(|(w, b)| (*w, b)).collect();
    Behavior::mix(&refs)
}

// ---------------------------------------------------------------------------
// Werner state at visibility 1/2
// ---------------------------------------------------------------------------

/// Local model reproducing the Werner state at visibility 1/2: the hidden
/// variable is a uniform unit vector; Alice replies +1 with probability
/// `(1 + a.lambda)/2`, Bob outputs `-sign(b.lambda)`. Estimates converge to
/// `P(a,b) = (1 - (1/2) sign(a) sign(b) a.b)/4`.
pub fn simulate_werner_half(
    alice: &[Vec3],
    bob: &[Vec3],
    cfg: &RunConfig,
) -> Result<SimulationReport> {
    for d in alice.iter().chain(bob) {
        check_unit(d)?;
    }
    if alice.is_empty() || bob.is_empty() {
        return Err(Error::ShapeMismatch("both sides need settings".into()));
    }
    let nb = bob.len();
    let tallies = run_tally::<4>(alice.len() * nb, cfg.shots, cfg.seed, |t, rng, n, tally| {
        let a_dir = alice[t / nb];
        let b_dir = bob[t % nb];
        for _ in 0..n {
            let lambda = sample_unit(rng);
            let p_plus = 0.5 * (1.0 + a_dir.dot(&lambda));
            let roll: f64 = rng.gen_range(0.0..1.0);
            let a = if roll < p_plus { 1.0 } else { -1.0 };
            let b = -sign_pm(b_dir.dot(&lambda));
            tally[outcome_of(a) * 2 + outcome_of(b)] += 1;
        }
    });
    let pairs = tallies
        .into_iter()
        .enumerate()
        .map(|(t, counts)| {
            let (x, y) = (t / nb, t % nb);
            let mut p = PairStats::from_counts(x, y, counts);
            p.alice_direction = Some(alice[x]);
            p.bob_direction = Some(bob[y]);
            p
        })
        .collect();
    Ok(SimulationReport {
        seed: cfg.seed,
        alice_settings: alice.len(),
        bob_settings: nb,
        pairs,
    })
}

// ---------------------------------------------------------------------------
// Singlet from one bit of communication
// ---------------------------------------------------------------------------

/// Singlet simulation with one bit of communication: two uniform hidden
/// directions are shared, Alice keeps the one with the larger `|a.lambda|`
/// (communicating her choice), outputs `sign(a.lambda)`, and Bob outputs
/// `-sign(b.lambda)` on the chosen direction. Correlators converge to
/// `-a.b`; the chosen direction has density `|a.lambda| / 2pi`, exposed per
/// cell as a 100-bin histogram of `a.lambda`.
pub fn simulate_toner_bacon(
    alice: &[Vec3],
    bob: &[Vec3],
    cfg: &RunConfig,
) -> Result<SimulationReport> {
    for d in alice.iter().chain(bob) {
        check_unit(d)?;
    }
    if alice.is_empty() || bob.is_empty() {
        return Err(Error::ShapeMismatch("both sides need settings".into()));
    }
    let nb = bob.len();
    const K: usize = 4 + HISTOGRAM_BINS;
    let tallies = run_tally::<K>(alice.len() * nb, cfg.shots, cfg.seed, |t, rng, n, tally| {
        let a_dir = alice[t / nb];
        let b_dir = bob[t % nb];
        for _ in 0..n {
            let l1 = sample_unit(rng);
            let l2 = sample_unit(rng);
            let lambda = if a_dir.dot(&l1).abs() >= a_dir.dot(&l2).abs() {
                l1
            } else {
                l2
            };
            let cos = a_dir.dot(&lambda);
            let a = sign_pm(cos);
            let b = -sign_pm(b_dir.dot(&lambda));
            tally[outcome_of(a) * 2 + outcome_of(b)] += 1;
            let bin = (((cos + 1.0) / 2.0) * HISTOGRAM_BINS as f64) as usize;
            tally[4 + bin.min(HISTOGRAM_BINS - 1)] += 1;
        }
    });
    let pairs = tallies
        .into_iter()
        .enumerate()
        .map(|(t, tally)| {
            let (x, y) = (t / nb, t % nb);
            let mut p = PairStats::from_counts(x, y, [tally[0], tally[1], tally[2], tally[3]]);
            p.alice_direction = Some(alice[x]);
            p.bob_direction = Some(bob[y]);
            p.cos_histogram = Some(tally[4..].to_vec());
            p
        })
        .collect();
    Ok(SimulationReport {
        seed: cfg.seed,
        alice_settings: alice.len(),
        bob_settings: nb,
        pairs,
    })
}

/// p-value of a chi-squared goodness-of-fit test of observed counts against
/// expected counts (expected values must be positive).
pub fn chi_squared_p_value(observed: &[u64], expected: &[f64]) -> Result<f64> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(Error::ShapeMismatch(
            "histogram and expectation lengths must match (>= 2 bins)".into(),
        ));
    }
    if expected.iter().any(|&e| e <= 0.0) {
        return Err(Error::BadBounds(
            "expected bin counts must be positive".into(),
        ));
    }
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64)
        .map_err(|e| Error::BadBounds(format!("chi-squared setup: {e}")))?;
    Ok(1.0 - dist.cdf(stat))
}

/// Expected counts per cosine-histogram bin under the density
/// `p(cos) = |cos|` on `[-1, 1]`, for `shots` samples.
pub fn toner_bacon_expected_histogram(shots: u64) -> Vec<f64> {
    let bins = HISTOGRAM_BINS;
    (0..bins)
        .map(|i| {
            let lo = -1.0 + 2.0 * i as f64 / bins as f64;
            let hi = -1.0 + 2.0 * (i + 1) as f64 / bins as f64;
            // integral of |u|/... the density integrates |u| du / 1.
            let integral = |u: f64| 0.5 * u * u.abs();
            shots as f64 * (integral(hi) - integral(lo)).abs()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Detection-loophole cheat
// ---------------------------------------------------------------------------

/// Per-cell statistics for the detection cheat: coincidence (post-selected)
/// counts beside full-sample counts in which a missing reply is booked as
/// outcome +1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheatPairStats {
    pub x: usize,
    pub y: usize,
    pub attempted: u64,
    pub alice_no_reply: u64,
    pub bob_no_reply: u64,
    pub post_selected: PairStats,
    pub full_sample: PairStats,
}

/// Outcome of the detection-loophole demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionCheatReport {
    pub seed: u64,
    pub attempted: u64,
    pub cells: Vec<CheatPairStats>,
    /// CHSH on coincidences only; the strategy reaches the algebraic
    /// maximum 4.
    pub post_selected_s: f64,
    pub post_selected_se: f64,
    /// CHSH with no-reply booked as +1; a local bound holds.
    pub full_sample_s: f64,
    pub full_sample_se: f64,
    pub alice_reply_rate: f64,
    pub bob_reply_rate: f64,
}

/// Local strategy that fakes a maximal CHSH violation by refusing to answer
/// on one setting per hidden-variable value.
///
/// The hidden variable is uniform over four branches; settings are drawn
/// uniformly each round. Replies are arranged so every coincidence
/// contributes its CHSH term with full weight (post-selected S = 4), while
/// booking silence as +1 drags the full-sample S back to 2 in expectation.
/// Each side replies with probability 3/4 on each of its settings.
pub fn detection_cheat(cfg: &RunConfig) -> Result<DetectionCheatReport> {
    // alice_replies[lambda][x], bob_replies[lambda][y]: Some(outcome index)
    // or None for a refusal. Outcome index 0 encodes +1.
    const ALICE: [[Option<usize>; 2]; 4] = [
        [Some(0), None],
        [Some(0), Some(1)],
        [Some(0), Some(0)],
        [None, Some(0)],
    ];
    const BOB: [[Option<usize>; 2]; 4] = [
        [Some(0), Some(0)],
        [None, Some(0)],
        [Some(0), None],
        [Some(0), Some(1)],
    ];
    // Tally layout per (x,y) cell: 4 coincidence counts, 4 full-sample
    // counts, attempted, alice refusals, bob refusals.
    const CELL: usize = 11;
    const K: usize = 4 * CELL;
    let tallies = run_tally::<K>(1, cfg.shots, cfg.seed, |_, rng, n, tally| {
        for _ in 0..n {
            let x = rng.gen_range(0..2usize);
            let y = rng.gen_range(0..2usize);
            let lambda = rng.gen_range(0..4usize);
            let base = (x * 2 + y) * CELL;
            tally[base + 8] += 1;
            let a = ALICE[lambda][x];
            let b = BOB[lambda][y];
            if a.is_none() {
                tally[base + 9] += 1;
            }
            if b.is_none() {
                tally[base + 10] += 1;
            }
            if let (Some(a), Some(b)) = (a, b) {
                tally[base + a * 2 + b] += 1;
            }
            let (fa, fb) = (a.unwrap_or(0), b.unwrap_or(0));
            tally[base + 4 + fa * 2 + fb] += 1;
        }
    });
    let tally = &tallies[0];
    let mut cells = Vec::with_capacity(4);
    let mut post_s = 0.0;
    let mut post_var = 0.0;
    let mut full_s = 0.0;
    let mut full_var = 0.0;
    let mut alice_refused = 0;
    let mut bob_refused = 0;
    for x in 0..2 {
        for y in 0..2 {
            let base = (x * 2 + y) * CELL;
            let post: [u64; 4] = tally[base..base + 4].try_into().unwrap();
            let full: [u64; 4] = tally[base + 4..base + 8].try_into().unwrap();
            let cell = CheatPairStats {
                x,
                y,
                attempted: tally[base + 8],
                alice_no_reply: tally[base + 9],
                bob_no_reply: tally[base + 10],
                post_selected: PairStats::from_counts(x, y, post),
                full_sample: PairStats::from_counts(x, y, full),
            };
            let sign = if x == 1 && y == 1 { -1.0 } else { 1.0 };
            post_s += sign * cell.post_selected.correlator;
            post_var += cell.post_selected.correlator_se.powi(2);
            full_s += sign * cell.full_sample.correlator;
            full_var += cell.full_sample.correlator_se.powi(2);
            alice_refused += cell.alice_no_reply;
            bob_refused += cell.bob_no_reply;
            cells.push(cell);
        }
    }
    Ok(DetectionCheatReport {
        seed: cfg.seed,
        attempted: cfg.shots,
        cells,
        post_selected_s: post_s,
        post_selected_se: post_var.sqrt(),
        full_sample_s: full_s,
        full_sample_se: full_var.sqrt(),
        alice_reply_rate: 1.0 - alice_refused as f64 / cfg.shots as f64,
        bob_reply_rate: 1.0 - bob_refused as f64 / cfg.shots as f64,
    })
}

// ---------------------------------------------------------------------------
// Memory (adaptive) local strategies
// ---------------------------------------------------------------------------

/// A local strategy that may adapt to the history of past rounds but must
/// commit to a deterministic assignment before the settings of the current
/// round are drawn.
pub trait AdaptiveStrategy {
    fn name(&self) -> &'static str;
    /// Assignment for the upcoming round, chosen from history alone.
    fn propose(&mut self) -> DeterministicStrategy;
    /// Feedback after the round: the drawn settings and both outcomes.
    fn observe(&mut self, x: usize, y: usize, a: usize, b: usize);
}

/// CHSH sign of a cell: +1 except for the (1,1) cell.
fn chsh_sign(x: usize, y: usize) -> f64 {
    if x == 1 && y == 1 {
        -1.0
    } else {
        1.0
    }
}

/// CHSH contribution of a deterministic assignment on one cell.
fn contribution(s: &DeterministicStrategy, x: usize, y: usize) -> f64 {
    chsh_sign(x, y) * outcome_sign(s.a_assign[x]) * outcome_sign(s.b_assign[y])
}

/// Flips the output that lost the previous round, alternating between
/// Alice's and Bob's table.
pub struct GreedyAvoidLastLoss {
    current: DeterministicStrategy,
    last: Option<(usize, usize, usize, usize)>,
    flip_bob: bool,
}

impl Default for GreedyAvoidLastLoss {
    fn default() -> Self {
        GreedyAvoidLastLoss {
            current: DeterministicStrategy {
                a_assign: vec![0, 0],
                b_assign: vec![0, 0],
            },
            last: None,
            flip_bob: false,
        }
    }
}

impl AdaptiveStrategy for GreedyAvoidLastLoss {
    fn name(&self) -> &'static str {
        "greedy-avoid-last-loss"
    }

    fn propose(&mut self) -> DeterministicStrategy {
        if let Some((x, y, a, b)) = self.last.take() {
            let lost = chsh_sign(x, y) * outcome_sign(a) * outcome_sign(b) < 0.0;
            if lost {
                if self.flip_bob {
                    self.current.b_assign[y] = 1 - self.current.b_assign[y];
                } else {
                    self.current.a_assign[x] = 1 - self.current.a_assign[x];
                }
                self.flip_bob = !self.flip_bob;
            }
        }
        self.current.clone()
    }

    fn observe(&mut self, x: usize, y: usize, a: usize, b: usize) {
        self.last = Some((x, y, a, b));
    }
}

/// Plays the assignment that would have scored best against the empirical
/// distribution of past settings.
pub struct MajorityHistory {
    counts: [[u64; 2]; 2],
    all: Vec<DeterministicStrategy>,
}

impl Default for MajorityHistory {
    fn default() -> Self {
        let scenario = Scenario::new(2, 2, 2, 2).expect("CHSH scenario");
        let all = (0..16)
            .map(|i| DeterministicStrategy::from_index(&scenario, i).expect("strategy index"))
            .collect();
        MajorityHistory {
            counts: [[0; 2]; 2],
            all,
        }
    }
}

impl AdaptiveStrategy for MajorityHistory {
    fn name(&self) -> &'static str {
        "majority-history"
    }

    fn propose(&mut self) -> DeterministicStrategy {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, s) in self.all.iter().enumerate() {
            let mut score = 0.0;
            for x in 0..2 {
                for y in 0..2 {
                    score += self.counts[x][y] as f64 * contribution(s, x, y);
                }
            }
            if score > best_score + 1e-12 {
                best_score = score;
                best = i;
            }
        }
        self.all[best].clone()
    }

    fn observe(&mut self, x: usize, y: usize, _a: usize, _b: usize) {
        self.counts[x][y] += 1;
    }
}

/// Cycles through all sixteen deterministic assignments in index order.
pub struct RoundRobin {
    scenario: Scenario,
    next: u64,
}

impl Default for RoundRobin {
    fn default() -> Self {
        RoundRobin {
            scenario: Scenario::new(2, 2, 2, 2).expect("CHSH scenario"),
            next: 0,
        }
    }
}

impl AdaptiveStrategy for RoundRobin {
    fn name(&self) -> &'static str {
        "round-robin"
    }

    fn propose(&mut self) -> DeterministicStrategy {
        let s = DeterministicStrategy::from_index(&self.scenario, self.next % 16)
            .expect("strategy index");
        self.next += 1;
        s
    }

    fn observe(&mut self, _x: usize, _y: usize, _a: usize, _b: usize) {}
}

/// The three built-in adversarial memory strategies.
pub fn builtin_strategies() -> Vec<Box<dyn AdaptiveStrategy>> {
    vec![
        Box::<GreedyAvoidLastLoss>::default(),
        Box::<MajorityHistory>::default(),
        Box::<RoundRobin>::default(),
    ]
}

/// Conditional CHSH statistics of an adaptive local strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub seed: u64,
    pub rounds: u64,
    pub strategy: String,
    pub pairs: Vec<PairStats>,
    pub s_value: f64,
    pub s_se: f64,
}

fn memory_report_from_counts(
    name: &str,
    cfg: &RunConfig,
    counts: [[u64; 4]; 4],
) -> MemoryReport {
    let mut pairs = Vec::with_capacity(4);
    let mut s = 0.0;
    let mut var = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            let p = PairStats::from_counts(x, y, counts[x * 2 + y]);
            s += chsh_sign(x, y) * p.correlator;
            var += p.correlator_se * p.correlator_se;
            pairs.push(p);
        }
    }
    MemoryReport {
        seed: cfg.seed,
        rounds: cfg.shots,
        strategy: name.to_string(),
        pairs,
        s_value: s,
        s_se: var.sqrt(),
    }
}

/// Runs an adaptive strategy for `cfg.shots` rounds with fresh uniform
/// settings each round; history is sequential, so this is single-threaded
/// by construction. Reports the conditional per-cell statistics, whose CHSH
/// cannot exceed the local bound beyond sampling noise.
pub fn memory_lv_run(
    strategy: &mut dyn AdaptiveStrategy,
    cfg: &RunConfig,
) -> Result<MemoryReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counts = [[0u64; 4]; 4];
    for _ in 0..cfg.shots {
        let assignment = strategy.propose();
        if assignment.a_assign.len() != 2
            || assignment.b_assign.len() != 2
            || assignment.a_assign.iter().chain(&assignment.b_assign).any(|&o| o > 1)
        {
            return Err(Error::ShapeMismatch(
                "adaptive strategy must produce a two-setting binary assignment".into(),
            ));
        }
        let x = rng.gen_range(0..2usize);
        let y = rng.gen_range(0..2usize);
        let a = assignment.a_assign[x];
        let b = assignment.b_assign[y];
        counts[x * 2 + y][a * 2 + b] += 1;
        strategy.observe(x, y, a, b);
    }
    Ok(memory_report_from_counts(strategy.name(), cfg, counts))
}

/// Negative control: the "strategy" sees the current settings before
/// answering (measurement independence is deliberately broken), and wins
/// every CHSH round, reaching S = 4.
pub fn leaked_settings_run(cfg: &RunConfig) -> Result<MemoryReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counts = [[0u64; 4]; 4];
    for _ in 0..cfg.shots {
        let x = rng.gen_range(0..2usize);
        let y = rng.gen_range(0..2usize);
        let a = 0usize;
        let b = usize::from(x == 1 && y == 1);
        counts[x * 2 + y][a * 2 + b] += 1;
    }
    Ok(memory_report_from_counts("leaked-settings", cfg, counts))
}

/// Behavior built from per-cell outcome counts of a 2x2 run (conditional
/// relative frequencies).
pub fn behavior_from_cell_counts(counts: &[[u64; 4]]) -> Result<Behavior> {
    if counts.len() != 4 {
        return Err(Error::ShapeMismatch("expected four cells".into()));
    }
    let scenario = Scenario::new(2, 2, 2, 2)?;
    let mut raw = vec![0.0; scenario.table_len()];
    for (cell, cc) in counts.iter().enumerate() {
        let total: u64 = cc.iter().sum();
        if total == 0 {
            return Err(Error::ShapeMismatch(format!("cell {cell} has no samples")));
        }
        for (k, &c) in cc.iter().enumerate() {
            raw[cell * 4 + k] = c as f64 / total as f64;
        }
    }
    Behavior::normalized(scenario, &raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::lv_membership;
    use approx::assert_relative_eq;

    const SEED: u64 = 0xBE11_B0A7;

    /// CHSH-optimal settings for singlet correlators `E = -a.b`.
    fn chsh_grid() -> (Vec<Vec3>, Vec<Vec3>) {
        let inv = 1.0 / 2.0_f64.sqrt();
        (
            vec![Vec3::z_hat(), Vec3::x_hat()],
            vec![Vec3::new(-inv, 0.0, -inv), Vec3::new(inv, 0.0, -inv)],
        )
    }

    #[test]
    fn single_qubit_pole_is_deterministic() {
        let cfg = RunConfig::new(20_000, SEED).unwrap();
        let rep = simulate_single_qubit_lv(&Vec3::z_hat(), &[Vec3::z_hat()], &cfg).unwrap();
        assert_eq!(rep.directions[0].minus, 0);
        assert_relative_eq!(rep.directions[0].mean, 1.0);
    }

    #[test]
    fn single_qubit_tilted_direction() {
        let cfg = RunConfig::new(200_000, SEED).unwrap();
        let tilted = Vec3::new(3.0_f64.sqrt() / 2.0, 0.0, 0.5);
        let rep = simulate_single_qubit_lv(&Vec3::z_hat(), &[tilted], &cfg).unwrap();
        let d = &rep.directions[0];
        assert!(
            (d.mean - 0.5).abs() <= 3.0 * d.mean_se,
            "mean {} se {}",
            d.mean,
            d.mean_se
        );
    }

    #[test]
    fn single_qubit_zero_bloch_vector() {
        let cfg = RunConfig::new(200_000, SEED).unwrap();
        let dirs = [Vec3::x_hat(), Vec3::new(0.0, 0.6, 0.8)];
        let rep =
            simulate_single_qubit_lv(&Vec3::new(0.0, 0.0, 0.0), &dirs, &cfg).unwrap();
        for d in &rep.directions {
            assert!(d.mean.abs() <= 3.5 * d.mean_se, "mean {}", d.mean);
        }
        assert_eq!(
            simulate_single_qubit_lv(&Vec3::new(0.0, 0.0, 1.5), &dirs, &cfg)
                .unwrap_err()
                .kind(),
            "bad_vector"
        );
    }

    #[test]
    fn anticorrelation_exact_tables() {
        let z = Vec3::z_hat();
        let b = simulate_anticorrelation_lv(&z, &z).unwrap();
        let corr = b.correlators().unwrap();
        for x in 0..2 {
            for y in 0..2 {
                assert_relative_eq!(corr.value(x, y), -1.0, epsilon = 1e-12);
            }
        }

        let x_dir = Vec3::x_hat();
        let b = simulate_anticorrelation_lv(&z, &x_dir).unwrap();
        let corr = b.correlators().unwrap();
        assert_relative_eq!(corr.value(0, 0), -1.0, epsilon = 1e-12);
        assert_relative_eq!(corr.value(1, 1), -1.0, epsilon = 1e-12);
        assert_relative_eq!(corr.value(0, 1), 0.0, epsilon = 1e-12);
        assert_relative_eq!(corr.value(1, 0), 0.0, epsilon = 1e-12);

        let tilted = Vec3::new(1.0, 0.0, 1.0).normalized().unwrap();
        let b = simulate_anticorrelation_lv(&z, &tilted).unwrap();
        let corr = b.correlators().unwrap();
        assert_relative_eq!(corr.value(0, 1), -1.0 / 2.0_f64.sqrt(), epsilon = 1e-12);
        // Flat marginals and locality.
        for x in 0..2 {
            assert_relative_eq!(b.marginal_a(x, 0, 0), 0.5, epsilon = 1e-12);
        }
        let verdict = lv_membership(&b, 1e-9).unwrap();
        assert!(verdict.inside);
    }

    #[test]
    fn werner_half_matches_analytic_table() {
        let (alice, bob) = chsh_grid();
        let cfg = RunConfig::new(150_000, SEED).unwrap();
        let rep = simulate_werner_half(&alice, &bob, &cfg).unwrap();
        assert_eq!(rep.pairs.len(), 4);
        for p in &rep.pairs {
            let dot = alice[p.x].dot(&bob[p.y]);
            for a in 0..2usize {
                for b in 0..2usize {
                    let expected =
                        0.25 * (1.0 - 0.5 * outcome_sign(a) * outcome_sign(b) * dot);
                    let observed = p.counts[a * 2 + b] as f64 / p.shots as f64;
                    let se = (expected * (1.0 - expected) / p.shots as f64).sqrt();
                    assert!(
                        (observed - expected).abs() <= 4.0 * se,
                        "cell ({},{}) outcome ({a},{b}): {observed} vs {expected}",
                        p.x,
                        p.y
                    );
                }
            }
        }
        // Statistics are local: membership at five standard errors.
        let behavior = rep.estimated_behavior().unwrap();
        let tol = rep
            .pairs
            .iter()
            .map(|p| (0.25 / p.shots as f64).sqrt())
            .fold(0.0f64, f64::max)
            * 5.0;
        assert!(lv_membership(&behavior, tol).unwrap().inside);
    }

    #[test]
    fn werner_half_exact_corner() {
        // Parallel settings: P(+,+) = (1 - 1/2)/4 = 1/8.
        let z = [Vec3::z_hat()];
        let cfg = RunConfig::new(200_000, SEED).unwrap();
        let rep = simulate_werner_half(&z, &z, &cfg).unwrap();
        let p = &rep.pairs[0];
        let observed = p.counts[0] as f64 / p.shots as f64;
        let se = (0.125 * 0.875 / p.shots as f64).sqrt();
        assert!((observed - 0.125).abs() <= 4.0 * se);
    }

    #[test]
    fn toner_bacon_reproduces_singlet() {
        let (alice, bob) = chsh_grid();
        let cfg = RunConfig::new(120_000, SEED).unwrap();
        let rep = simulate_toner_bacon(&alice, &bob, &cfg).unwrap();
        for p in &rep.pairs {
            let expected = -alice[p.x].dot(&bob[p.y]);
            assert!(
                (p.correlator - expected).abs() <= 4.0 * p.correlator_se.max(1e-9),
                "cell ({},{}): {} vs {expected}",
                p.x,
                p.y,
                p.correlator
            );
            assert!(p.alice_mean.abs() <= 4.0 * p.alice_mean_se);
            assert!(p.bob_mean.abs() <= 4.0 * p.bob_mean_se);
        }
        let (s, se) = rep.chsh_estimate().unwrap();
        let target = 2.0 * 2.0_f64.sqrt();
        assert!((s - target).abs() <= 4.0 * se, "S = {s} +- {se}");

        // Perfect anticorrelation on equal settings is exact.
        let z = [Vec3::z_hat()];
        let rep = simulate_toner_bacon(&z, &z, &cfg).unwrap();
        assert_relative_eq!(rep.pairs[0].correlator, -1.0);
    }

    #[test]
    fn toner_bacon_lambda_density() {
        let z = [Vec3::z_hat()];
        let cfg = RunConfig::new(200_000, SEED).unwrap();
        let rep = simulate_toner_bacon(&z, &z, &cfg).unwrap();
        let hist = rep.pairs[0].cos_histogram.as_ref().unwrap();
        let expected = toner_bacon_expected_histogram(rep.pairs[0].shots);
        let p = chi_squared_p_value(hist, &expected).unwrap();
        assert!(p > 0.001, "chi-squared p-value {p}");
    }

    #[test]
    fn detection_cheat_statistics() {
        let cfg = RunConfig::new(400_000, SEED).unwrap();
        let rep = detection_cheat(&cfg).unwrap();
        // Coincidence products are deterministic: exactly 4.
        assert_relative_eq!(rep.post_selected_s, 4.0, epsilon = 1e-12);
        assert!(rep.post_selected_se < 1e-12);
        // Full sample obeys the local bound.
        assert!(
            rep.full_sample_s <= 2.0 + 4.0 * rep.full_sample_se,
            "S = {} +- {}",
            rep.full_sample_s,
            rep.full_sample_se
        );
        // Reply rate 3/4 per side.
        let se = (0.75 * 0.25 / cfg.shots as f64).sqrt();
        assert!((rep.alice_reply_rate - 0.75).abs() <= 4.0 * se);
        assert!((rep.bob_reply_rate - 0.75).abs() <= 4.0 * se);
        // Bookkeeping: attempted counts add up, coincidences match.
        let total: u64 = rep.cells.iter().map(|c| c.attempted).sum();
        assert_eq!(total, cfg.shots);
        for c in &rep.cells {
            assert_eq!(c.full_sample.shots, c.attempted);
            assert!(c.post_selected.shots <= c.attempted);
        }
        // Full-sample statistics are local at five standard errors.
        let counts: Vec<[u64; 4]> = rep.cells.iter().map(|c| c.full_sample.counts).collect();
        let behavior = behavior_from_cell_counts(&counts).unwrap();
        let tol = 5.0 * (0.25 / (cfg.shots as f64 / 4.0)).sqrt();
        assert!(lv_membership(&behavior, tol).unwrap().inside);
    }

    #[test]
    fn memory_strategies_obey_local_bound() {
        let cfg = RunConfig::new(150_000, SEED).unwrap();
        for mut strategy in builtin_strategies() {
            let rep = memory_lv_run(strategy.as_mut(), &cfg).unwrap();
            assert!(
                rep.s_value <= 2.0 + 4.0 * rep.s_se,
                "{}: S = {} +- {}",
                rep.strategy,
                rep.s_value,
                rep.s_se
            );
            let total: u64 = rep.pairs.iter().map(|p| p.shots).sum();
            assert_eq!(total, cfg.shots);
        }
    }

    #[test]
    fn memory_constant_strategy_hits_two() {
        struct Constant;
        impl AdaptiveStrategy for Constant {
            fn name(&self) -> &'static str {
                "constant"
            }
            fn propose(&mut self) -> DeterministicStrategy {
                DeterministicStrategy {
                    a_assign: vec![0, 0],
                    b_assign: vec![0, 0],
                }
            }
            fn observe(&mut self, _: usize, _: usize, _: usize, _: usize) {}
        }
        let cfg = RunConfig::new(50_000, SEED).unwrap();
        let rep = memory_lv_run(&mut Constant, &cfg).unwrap();
        // All outputs +1: every correlator is exactly +1, so S = 2.
        assert_relative_eq!(rep.s_value, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn leaked_settings_beat_the_bound() {
        let cfg = RunConfig::new(50_000, SEED).unwrap();
        let rep = leaked_settings_run(&cfg).unwrap();
        assert_relative_eq!(rep.s_value, 4.0, epsilon = 1e-12);
        assert!(rep.s_value > 2.0);
    }

    #[test]
    fn reports_are_reproducible() {
        let (alice, bob) = chsh_grid();
        // More than one block so merging order matters.
        let cfg = RunConfig::new(100_000, 7).unwrap();
        let r1 = simulate_toner_bacon(&alice, &bob, &cfg).unwrap();
        let r2 = simulate_toner_bacon(&alice, &bob, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&r1).unwrap(),
            serde_json::to_string(&r2).unwrap()
        );
        let w1 = simulate_werner_half(&alice, &bob, &cfg).unwrap();
        let w2 = simulate_werner_half(&alice, &bob, &cfg).unwrap();
        assert_eq!(w1, w2);
        let d1 = detection_cheat(&cfg).unwrap();
        let d2 = detection_cheat(&cfg).unwrap();
        assert_eq!(d1, d2);
        // Different seed, different numbers.
        let cfg2 = RunConfig::new(100_000, 8).unwrap();
        let r3 = simulate_toner_bacon(&alice, &bob, &cfg2).unwrap();
        assert_ne!(r1.pairs[0].counts, r3.pairs[0].counts);
    }

    #[test]
    fn standard_errors_match_sample_std() {
        let (alice, bob) = chsh_grid();
        let cfg = RunConfig::new(80_000, SEED).unwrap();
        let rep = simulate_werner_half(&alice, &bob, &cfg).unwrap();
        for p in &rep.pairs {
            // Recompute the sample standard deviation of the +-1 products.
            let n = p.shots as f64;
            let mean = p.correlator;
            let sample_var = (n / (n - 1.0)) * (1.0 - mean * mean);
            let se = (sample_var / n).sqrt();
            assert!(
                (p.correlator_se - se).abs() <= 0.01 * se.max(1e-12),
                "se {} vs {se}",
                p.correlator_se
            );
        }
    }

    #[test]
    fn run_config_validation() {
        assert_eq!(RunConfig::new(0, 1).unwrap_err().kind(), "bad_bounds");
    }
}
