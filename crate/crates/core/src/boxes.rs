//! No-signaling boxes and their consequences.
//!
//! This module collects the post-quantum side of the toolbox: the PR box
//! that saturates the algebraic CHSH bound, its decomposition into four
//! signaling deterministic points (and the proof that no-signaling pins the
//! mixture down to the PR behavior), chained correlation inequalities with
//! their local, quantum, and no-signaling values, the marginal-bias bound
//! they impose on no-signaling behaviors, a random-access-code game powered
//! by one PR-box use, exact sampling of random no-signaling behaviors, and
//! majority-vote coarse-graining of many independent pairs into one
//! macroscopic behavior.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{run_tally, PairStats, RunConfig};
use crate::stats::{Behavior, Scenario};
use crate::vec3::Vec3;

// ---------------------------------------------------------------------------
// PR box and the uniqueness of its no-signaling decomposition
// ---------------------------------------------------------------------------

/// The PR box: `P(a,b|x,y) = 1/2` when `a XOR b = x AND y`, else `0`.
///
/// No-signaling with uniform marginals, CHSH value 4 (the algebraic maximum).
pub fn pr_box() -> Behavior {
    let scenario = Scenario::new(2, 2, 2, 2).expect("2x2 scenario");
    Behavior::from_fn(scenario, |x, y, a, b| {
        if (a + b) % 2 == x * y {
            0.5
        } else {
            0.0
        }
    })
    .expect("PR table is normalized")
}

/// The four deterministic points whose mixtures can reproduce the PR box.
///
/// Point `k` answers with a fixed outcome pair on the setting cells
/// `(0,0)`, `(0,1)`, `(1,0)` and with a different fixed pair on `(1,1)`,
/// so that `a XOR b = x AND y` holds on every cell. Each point signals
/// (its marginals depend on the remote setting); only mixing removes that.
pub fn pr_deterministic_points() -> [Behavior; 4] {
    let scenario = Scenario::new(2, 2, 2, 2).expect("2x2 scenario");
    let base = [0usize, 0, 1, 1];
    let corner = [(0usize, 1usize), (1, 0), (0, 1), (1, 0)];
    core::array::from_fn(|k| {
        Behavior::from_fn(scenario, |x, y, a, b| {
            let hit = if x == 1 && y == 1 {
                (a, b) == corner[k]
            } else {
                a == base[k] && b == base[k]
            };
            if hit {
                1.0
            } else {
                0.0
            }
        })
        .expect("deterministic table is normalized")
    })
}

/// Outcome of [`pr_uniqueness_check`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrUniquenessReport {
    /// No-signaling residual of each deterministic point (all `1`: each
    /// point signals maximally through the `(1,1)` cell).
    pub deterministic_residuals: [f64; 4],
    /// Residual of the equal-weight mixture (exactly `0`).
    pub equal_mixture_residual: f64,
    /// Whether the equal-weight mixture reproduces the PR box entrywise.
    pub equal_mixture_is_pr: bool,
    /// Dimension of the affine set of weight vectors whose mixture is
    /// no-signaling. The weights are *not* unique — the solution set is a
    /// line through the equal-weight point — but every solution produces
    /// the same behavior.
    pub ns_weight_family_dim: usize,
    /// Whether every weight vector in the no-signaling family (sampled
    /// along the whole feasible segment) reproduces the PR box exactly.
    pub family_behavior_unique: bool,
    /// Simplex grid points scanned.
    pub grid_points_checked: usize,
    /// Grid points whose mixture is no-signaling.
    pub grid_ns_points: usize,
    /// Whether every no-signaling grid point reproduces the PR box.
    pub grid_ns_points_all_pr: bool,
}

/// Entrywise table distance between two behaviors of the same scenario.
fn table_distance(p: &Behavior, q: &Behavior) -> f64 {
    p.table()
        .iter()
        .zip(q.table())
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max)
}

/// Reduced row echelon form of an augmented system; returns the pivot
/// column of each eliminated row.
fn rref(rows: &mut [Vec<f64>], cols: usize, tol: f64) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(best) = (r..rows.len()).max_by(|&i, &j| {
            rows[i][c].abs().partial_cmp(&rows[j][c].abs()).expect("finite entries")
        }) else {
            break;
        };
        if rows[best][c].abs() <= tol {
            continue;
        }
        rows.swap(r, best);
        let inv = 1.0 / rows[r][c];
        for v in rows[r].iter_mut() {
            *v *= inv;
        }
        for i in 0..rows.len() {
            if i != r && rows[i][c].abs() > 0.0 {
                let f = rows[i][c];
                for j in 0..rows[i].len() {
                    let head = rows[r][j];
                    rows[i][j] -= f * head;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    pivots
}

/// Solves the no-signaling conditions on mixtures of the four deterministic
/// points exactly and verifies that, although the solution *weights* form a
/// one-parameter family, the resulting behavior is always the PR box.
pub fn pr_uniqueness_check() -> Result<PrUniquenessReport> {
    let points = pr_deterministic_points();
    let pr = pr_box();
    let deterministic_residuals = core::array::from_fn(|k| points[k].no_signaling_residual());

    let mix_of = |w: &[f64; 4]| -> Result<Behavior> {
        Behavior::mix(&[
            (w[0], &points[0]),
            (w[1], &points[1]),
            (w[2], &points[2]),
            (w[3], &points[3]),
        ])
    };

    // Linear system: marginal consistency of the mixture in every setting
    // and outcome, plus normalization of the weights.
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for x in 0..2 {
        for a in 0..2 {
            let mut row: Vec<f64> = (0..4)
                .map(|k| points[k].marginal_a(x, a, 0) - points[k].marginal_a(x, a, 1))
                .collect();
            row.push(0.0);
            rows.push(row);
        }
    }
    for y in 0..2 {
        for b in 0..2 {
            let mut row: Vec<f64> = (0..4)
                .map(|k| points[k].marginal_b(y, b, 0) - points[k].marginal_b(y, b, 1))
                .collect();
            row.push(0.0);
            rows.push(row);
        }
    }
    rows.push(vec![1.0, 1.0, 1.0, 1.0, 1.0]);
    let pivots = rref(&mut rows, 4, 1e-9);
    let rank = pivots.len();
    let ns_weight_family_dim = 4 - rank;

    // Particular solution (free variables zero) and null-space basis.
    let mut particular = [0.0f64; 4];
    for (r, &c) in pivots.iter().enumerate() {
        particular[c] = rows[r][4];
    }
    let free: Vec<usize> = (0..4).filter(|c| !pivots.contains(c)).collect();
    let mut null_basis: Vec<[f64; 4]> = Vec::new();
    for &f in &free {
        let mut v = [0.0f64; 4];
        v[f] = 1.0;
        for (r, &c) in pivots.iter().enumerate() {
            v[c] = -rows[r][f];
        }
        null_basis.push(v);
    }

    // Walk the feasible segment of the solution family (weights in [0,1])
    // and check that every member reproduces the PR behavior exactly.
    let mut family_behavior_unique = ns_weight_family_dim == 1;
    if let Some(dir) = null_basis.first() {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for k in 0..4 {
            if dir[k].abs() > 1e-12 {
                let to_zero = -particular[k] / dir[k];
                let to_one = (1.0 - particular[k]) / dir[k];
                lo = lo.max(to_zero.min(to_one));
                hi = hi.min(to_zero.max(to_one));
            }
        }
        for i in 0..=20 {
            let t = lo + (hi - lo) * (i as f64 / 20.0);
            let w = core::array::from_fn(|k| particular[k] + t * dir[k]);
            let b = mix_of(&w)?;
            if b.no_signaling_residual() > 1e-12 || table_distance(&b, &pr) > 1e-12 {
                family_behavior_unique = false;
            }
        }
    }

    let equal = mix_of(&[0.25; 4])?;
    let equal_mixture_residual = equal.no_signaling_residual();
    let equal_mixture_is_pr = table_distance(&equal, &pr) <= 1e-15;

    // Independent confirmation: scan the whole weight simplex on a grid.
    let steps = 20usize;
    let mut grid_points_checked = 0usize;
    let mut grid_ns_points = 0usize;
    let mut grid_ns_points_all_pr = true;
    for i in 0..=steps {
        for j in 0..=steps - i {
            for k in 0..=steps - i - j {
                let w = [
                    i as f64 / steps as f64,
                    j as f64 / steps as f64,
                    k as f64 / steps as f64,
                    (steps - i - j - k) as f64 / steps as f64,
                ];
                grid_points_checked += 1;
                let b = mix_of(&w)?;
                if b.no_signaling_residual() <= 1e-12 {
                    grid_ns_points += 1;
                    if table_distance(&b, &pr) > 1e-12 {
                        grid_ns_points_all_pr = false;
                    }
                }
            }
        }
    }

    Ok(PrUniquenessReport {
        deterministic_residuals,
        equal_mixture_residual,
        equal_mixture_is_pr,
        ns_weight_family_dim,
        family_behavior_unique,
        grid_points_checked,
        grid_ns_points,
        grid_ns_points_all_pr,
    })
}

// ---------------------------------------------------------------------------
// Random access code: two bits into one with a PR box
// ---------------------------------------------------------------------------

/// Strategy for the 2-to-1 random access code: Alice holds bits
/// `(x0, x1)`, may send Bob a single classical bit, and Bob must output
/// `x_y` for a uniformly chosen `y`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RacStrategy {
    /// One shared PR box: Alice inputs `x0 XOR x1` and sends `a XOR x0`;
    /// Bob inputs `y` and outputs `message XOR b`. Wins always.
    PrAssisted,
    /// Alice sends `x0`; Bob answers it whatever `y` is. Wins 3/4.
    SendFirstBit,
    /// Arbitrary deterministic classical code: `encode[x0 * 2 + x1]` is the
    /// message bit and `guess[message][y]` is Bob's answer.
    Classical {
        encode: [u8; 4],
        guess: [[u8; 2]; 2],
    },
}

fn classical_rac_success(encode: &[u8; 4], guess: &[[u8; 2]; 2]) -> f64 {
    let mut wins = 0u32;
    for x0 in 0..2usize {
        for x1 in 0..2usize {
            let m = encode[x0 * 2 + x1] as usize;
            for y in 0..2usize {
                let target = if y == 0 { x0 } else { x1 };
                if guess[m][y] as usize == target {
                    wins += 1;
                }
            }
        }
    }
    f64::from(wins) / 8.0
}

/// Exact success probability of a random-access-code strategy, averaged
/// over uniform inputs (and over the PR box's internal coin where used).
pub fn rac_play(strategy: &RacStrategy) -> Result<f64> {
    match strategy {
        RacStrategy::PrAssisted => {
            let mut wins = 0u32;
            for x0 in 0..2usize {
                for x1 in 0..2usize {
                    for y in 0..2usize {
                        // The PR box outputs a uniform `a` and `b = a XOR (x AND y)`.
                        for a in 0..2usize {
                            let b = a ^ ((x0 ^ x1) & y);
                            let answer = (a ^ x0) ^ b;
                            let target = if y == 0 { x0 } else { x1 };
                            if answer == target {
                                wins += 1;
                            }
                        }
                    }
                }
            }
            Ok(f64::from(wins) / 16.0)
        }
        RacStrategy::SendFirstBit => {
            let encode = [0, 0, 1, 1];
            let guess = [[0, 0], [1, 1]];
            Ok(classical_rac_success(&encode, &guess))
        }
        RacStrategy::Classical { encode, guess } => {
            let bits_ok = encode.iter().all(|&v| v <= 1)
                && guess.iter().all(|row| row.iter().all(|&v| v <= 1));
            if !bits_ok {
                return Err(Error::BadBounds(
                    "classical code tables must contain bits".into(),
                ));
            }
            Ok(classical_rac_success(encode, guess))
        }
    }
}

/// Exhaustive search over all `16 x 16` deterministic one-bit classical
/// codes; returns the best success probability (`3/4`) and one maximizer.
pub fn rac_brute_force_best() -> (f64, RacStrategy) {
    let mut best = -1.0;
    let mut best_strategy = RacStrategy::SendFirstBit;
    for e in 0..16u8 {
        let encode = core::array::from_fn(|i| (e >> i) & 1);
        for g in 0..16u8 {
            let guess = [[g & 1, (g >> 1) & 1], [(g >> 2) & 1, (g >> 3) & 1]];
            let p = classical_rac_success(&encode, &guess);
            if p > best {
                best = p;
                best_strategy = RacStrategy::Classical { encode, guess };
            }
        }
    }
    (best, best_strategy)
}

// ---------------------------------------------------------------------------
// Chained correlation inequalities
// ---------------------------------------------------------------------------

/// Number of settings per side in a chained Bell scenario (at least 2).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainedSpec {
    m: usize,
}

/// Upper limit on the chain length; keeps table sizes sane.
pub const MAX_CHAIN: usize = 4096;

impl ChainedSpec {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::BadBounds(format!("chain length {m} < 2")));
        }
        if m > MAX_CHAIN {
            return Err(Error::TooLarge(format!("chain length {m} > {MAX_CHAIN}")));
        }
        Ok(ChainedSpec { m })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Largest value of the chained sum `C` over local behaviors: `2m - 1`.
    pub fn local_bound(&self) -> f64 {
        (2 * self.m - 1) as f64
    }

    /// Largest value of `C` over no-signaling behaviors: `2m` (every term 1).
    pub fn no_signaling_bound(&self) -> f64 {
        (2 * self.m) as f64
    }

    /// Largest value of `C` over quantum behaviors: `m (1 + cos(pi / 2m))`,
    /// reached by the singlet with evenly fanned measurement directions.
    pub fn quantum_value(&self) -> f64 {
        let m = self.m as f64;
        m * (1.0 + (std::f64::consts::PI / (2.0 * m)).cos())
    }
}

/// The three equivalent normalizations of the chained sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainedForm {
    /// `C`: sum of 2m agreement probabilities (the last term disagreement).
    C,
    /// `C' = 2(C - m)`: the correlator form; equals CHSH at `m = 2`.
    CPrime,
    /// `C'' = 2m - C`: the "failure weight"; local bound 1, no-signaling 0.
    CDoublePrime,
}

/// Evaluates a chained correlation sum on an `(m,2;m,2)` behavior.
///
/// With settings indexed from 0, the chain walks
/// `a_0, b_0, a_1, b_1, ..., a_{m-1}, b_{m-1}` through the agreement
/// probabilities `P(a = b | x=k, y=k)` and `P(a = b | x=k+1, y=k)` and
/// closes with the disagreement `P(a != b | x=0, y=m-1)`. Each form is
/// computed directly from its own definition, so the algebraic identities
/// between them are testable rather than built in.
pub fn chained_value(b: &Behavior, spec: &ChainedSpec, form: ChainedForm) -> Result<f64> {
    let s = b.scenario();
    let want = Scenario::new(spec.m, 2, spec.m, 2)?;
    if s != want {
        return Err(Error::WrongScenario(format!(
            "chained sum of length {} needs an ({},2;{},2) behavior",
            spec.m, spec.m, spec.m
        )));
    }
    let agree = |x: usize, y: usize| b.p(x, y, 0, 0) + b.p(x, y, 1, 1);
    let m = spec.m;
    let mut links: Vec<(usize, usize)> = Vec::with_capacity(2 * m - 1);
    for k in 0..m {
        links.push((k, k));
        if k + 1 < m {
            links.push((k + 1, k));
        }
    }
    Ok(match form {
        ChainedForm::C => {
            let body: f64 = links.iter().map(|&(x, y)| agree(x, y)).sum();
            body + (1.0 - agree(0, m - 1))
        }
        ChainedForm::CPrime => {
            let body: f64 = links.iter().map(|&(x, y)| 2.0 * agree(x, y) - 1.0).sum();
            body - (2.0 * agree(0, m - 1) - 1.0)
        }
        ChainedForm::CDoublePrime => {
            let body: f64 = links.iter().map(|&(x, y)| 1.0 - agree(x, y)).sum();
            body + agree(0, m - 1)
        }
    })
}

/// Measurement directions that let the singlet reach the chained quantum
/// value: both parties fan out in the x-z plane with step `pi / 2m`, Alice
/// on the even half-steps and Bob diametrically opposite the odd ones (the
/// singlet anticorrelates, so Bob's directions are negated).
pub fn chained_quantum_settings(spec: &ChainedSpec) -> (Vec<Vec3>, Vec<Vec3>) {
    let h = std::f64::consts::PI / (2.0 * spec.m as f64);
    let dir = |phi: f64| Vec3::new(phi.sin(), 0.0, phi.cos());
    let alice = (0..spec.m).map(|k| dir(2.0 * k as f64 * h)).collect();
    let bob = (0..spec.m)
        .map(|k| dir(std::f64::consts::PI + (2 * k + 1) as f64 * h))
        .collect();
    (alice, bob)
}

/// Upper bound on the local fraction from an observed inequality value:
/// any convex split `P = p L + (1-p) NS` with `L` local forces
/// `p <= (i_alg - i_obs) / (i_alg - i_local)` (clamped to `[0, 1]`).
pub fn local_fraction_bound(i_obs: f64, i_local: f64, i_alg: f64) -> Result<f64> {
    if !(i_alg > i_local) {
        return Err(Error::BadBounds(format!(
            "algebraic bound {i_alg} must exceed the local bound {i_local}"
        )));
    }
    if i_obs > i_alg + 1e-9 {
        return Err(Error::BadBounds(format!(
            "observed value {i_obs} exceeds the algebraic bound {i_alg}"
        )));
    }
    Ok(((i_alg - i_obs) / (i_alg - i_local)).clamp(0.0, 1.0))
}

/// Outcome of [`leggett_marginal_bound`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeggettReport {
    /// Chained failure weight `C''` of the behavior.
    pub c_double_prime: f64,
    /// Total variation of Alice's second-setting marginal from uniform:
    /// `|P(0|x=1) - 1/2| + |P(1|x=1) - 1/2|`.
    pub marginal_bias: f64,
    /// Whether `marginal_bias <= C''` (up to `1e-9`).
    pub holds: bool,
}

/// Marginal-bias bound for no-signaling behaviors: walking the chain of
/// agreement terms around the loop shows that any setting's marginal bias
/// is at most the chained failure weight `C''`. Models whose components
/// carry biased marginals are therefore squeezed out as `C''` drops.
///
/// The input must be no-signaling (residual above `1e-9` is rejected),
/// since the chain argument moves between marginals of different cells.
pub fn leggett_marginal_bound(b: &Behavior, spec: &ChainedSpec) -> Result<LeggettReport> {
    let residual = b.no_signaling_residual();
    if residual > 1e-9 {
        return Err(Error::SignalingInput(format!(
            "no-signaling residual {residual:.3e} exceeds 1e-9"
        )));
    }
    let c_double_prime = chained_value(b, spec, ChainedForm::CDoublePrime)?;
    let marginal_bias =
        (b.marginal_a(1, 0, 0) - 0.5).abs() + (b.marginal_a(1, 1, 0) - 0.5).abs();
    Ok(LeggettReport {
        c_double_prime,
        marginal_bias,
        holds: marginal_bias <= c_double_prime + 1e-9,
    })
}

// ---------------------------------------------------------------------------
// Random no-signaling behaviors
// ---------------------------------------------------------------------------

/// Samples a uniform-ish random no-signaling behavior with binary outcomes.
///
/// Marginals `P(a=0|x)` and `P(b=0|y)` are drawn uniformly; each cell's
/// joint `P(0,0|x,y)` is then drawn uniformly inside its Frechet interval
/// `[max(0, pa + pb - 1), min(pa, pb)]`, which parameterizes exactly the
/// no-signaling tables, so no rejection is needed.
pub fn random_ns_behavior(scenario: Scenario, rng: &mut impl Rng) -> Result<Behavior> {
    if !scenario.is_binary() {
        return Err(Error::NonBinaryOutcomes(
            "no-signaling sampler needs binary outcomes".into(),
        ));
    }
    let pa: Vec<f64> = (0..scenario.a_inputs).map(|_| rng.gen::<f64>()).collect();
    let pb: Vec<f64> = (0..scenario.b_inputs).map(|_| rng.gen::<f64>()).collect();
    let mut joint = vec![0.0; scenario.a_inputs * scenario.b_inputs];
    for x in 0..scenario.a_inputs {
        for y in 0..scenario.b_inputs {
            let lo = (pa[x] + pb[y] - 1.0).max(0.0);
            let hi = pa[x].min(pb[y]);
            joint[x * scenario.b_inputs + y] = lo + (hi - lo) * rng.gen::<f64>();
        }
    }
    Behavior::from_fn(scenario, |x, y, a, b| {
        let t = joint[x * scenario.b_inputs + y];
        match (a, b) {
            (0, 0) => t,
            (0, 1) => pa[x] - t,
            (1, 0) => pb[y] - t,
            _ => 1.0 - pa[x] - pb[y] + t,
        }
    })
}

// ---------------------------------------------------------------------------
// Majority-vote coarse-graining
// ---------------------------------------------------------------------------

/// Per-setting-pair tallies of a coarse-grained run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoarseCell {
    /// Coarse outcome statistics (outcome 0 = majority of 0s).
    pub stats: PairStats,
    /// Runs in which Alice's votes tied (even splits count as outcome 0).
    pub alice_ties: u64,
    /// Runs in which Bob's votes tied.
    pub bob_ties: u64,
}

/// Outcome of [`majority_vote_coarse_grain`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoarseGrainReport {
    pub seed: u64,
    /// Macroscopic runs per setting pair.
    pub runs: u64,
    /// Microscopic pairs sampled per run.
    pub n_per_run: u64,
    pub cells: Vec<CoarseCell>,
    /// Estimated coarse behavior.
    pub behavior: Behavior,
}

impl CoarseGrainReport {
    /// CHSH estimate of the coarse behavior with its standard error
    /// (defined for 2x2 scenarios).
    pub fn chsh_estimate(&self) -> Result<(f64, f64)> {
        if self.behavior.scenario() != Scenario::new(2, 2, 2, 2)? {
            return Err(Error::WrongScenario(
                "CHSH needs two settings per side".into(),
            ));
        }
        let mut s = 0.0;
        let mut var = 0.0;
        for cell in &self.cells {
            let sign = if cell.stats.x == 1 && cell.stats.y == 1 {
                -1.0
            } else {
                1.0
            };
            s += sign * cell.stats.correlator;
            var += cell.stats.correlator_se * cell.stats.correlator_se;
        }
        Ok((s, var.sqrt()))
    }
}

/// Coarse-grains a microscopic behavior by majority vote: for each setting
/// pair, every macroscopic run samples `n_per_run` i.i.d. outcome pairs
/// from the behavior and each party reports the majority of its votes
/// (ties count as outcome 0 and are tallied separately; use an odd
/// `n_per_run` to avoid them). `cfg.shots` is the number of runs per
/// setting pair. The report is reproducible bit for bit for a fixed seed,
/// independent of the worker count.
pub fn majority_vote_coarse_grain(
    b: &Behavior,
    n_per_run: u64,
    cfg: &RunConfig,
) -> Result<CoarseGrainReport> {
    let scenario = b.scenario();
    if !scenario.is_binary() {
        return Err(Error::NonBinaryOutcomes(
            "majority vote needs binary outcomes".into(),
        ));
    }
    if n_per_run == 0 {
        return Err(Error::BadBounds("need at least one pair per run".into()));
    }
    let tasks = scenario.a_inputs * scenario.b_inputs;
    let mut cums: Vec<[f64; 4]> = Vec::with_capacity(tasks);
    for x in 0..scenario.a_inputs {
        for y in 0..scenario.b_inputs {
            let p = [
                b.p(x, y, 0, 0),
                b.p(x, y, 0, 1),
                b.p(x, y, 1, 0),
                b.p(x, y, 1, 1),
            ];
            cums.push([p[0], p[0] + p[1], p[0] + p[1] + p[2], 1.0]);
        }
    }

    // Tally layout: coarse outcome counts (alpha * 2 + beta), then ties.
    let tallies = run_tally::<6>(tasks, cfg.shots, cfg.seed, |t, rng, n, tally| {
        let cum = &cums[t];
        for _ in 0..n {
            let mut a_zeros = 0u64;
            let mut b_zeros = 0u64;
            for _ in 0..n_per_run {
                let u: f64 = rng.gen();
                let j = cum.iter().position(|&c| u < c).unwrap_or(3);
                a_zeros += u64::from(j < 2);
                b_zeros += u64::from(j % 2 == 0);
            }
            let vote = |zeros: u64, tie_slot: &mut u64| -> usize {
                match (2 * zeros).cmp(&n_per_run) {
                    std::cmp::Ordering::Greater => 0,
                    std::cmp::Ordering::Equal => {
                        *tie_slot += 1;
                        0
                    }
                    std::cmp::Ordering::Less => 1,
                }
            };
            let (mut a_tie, mut b_tie) = (0u64, 0u64);
            let alpha = vote(a_zeros, &mut a_tie);
            let beta = vote(b_zeros, &mut b_tie);
            tally[alpha * 2 + beta] += 1;
            tally[4] += a_tie;
            tally[5] += b_tie;
        }
    });

    let mut cells = Vec::with_capacity(tasks);
    let mut raw = vec![0.0; scenario.table_len()];
    for (t, tally) in tallies.iter().enumerate() {
        let (x, y) = (t / scenario.b_inputs, t % scenario.b_inputs);
        let counts = [tally[0], tally[1], tally[2], tally[3]];
        for a in 0..2 {
            for bi in 0..2 {
                raw[scenario.index(x, y, a, bi)] = counts[a * 2 + bi] as f64 / cfg.shots as f64;
            }
        }
        cells.push(CoarseCell {
            stats: PairStats::from_counts(x, y, counts),
            alice_ties: tally[4],
            bob_ties: tally[5],
        });
    }
    Ok(CoarseGrainReport {
        seed: cfg.seed,
        runs: cfg.shots,
        n_per_run,
        cells,
        behavior: Behavior::normalized(scenario, &raw)?,
    })
}

/// Convenience: seeded RNG for callers that sample no-signaling behaviors.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
