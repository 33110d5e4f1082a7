//! Quantum-set membership tests and what they certify.
//!
//! The first moment-matrix relaxation of the quantum set asks whether the
//! observed statistics can be completed — by choosing the unobservable
//! same-party cross-setting moments — into a positive semidefinite Gram
//! matrix. With a handful of free entries and a concave minimum eigenvalue,
//! feasibility reduces to a small box-constrained concave maximization,
//! solved here by multi-start coordinate ascent with golden-section line
//! searches.
//!
//! On top of that sit the closed-form arcsine criterion for two-setting
//! correlators, the device-independent randomness bound certified by a CHSH
//! value, a numerical re-derivation of that bound from constrained state
//! optimization, and the macroscopic-locality test on coarse-grained
//! covariance matrices.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::bell::{chsh_behavior, horodecki_max_chsh, schmidt_pair_state};
use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, two_qubit_decompose, DensityMatrix};
use crate::stats::{Behavior, CorrelatorVector};

/// Convergence tolerance of the eigenvalue ascent.
const ASCENT_TOL: f64 = 1e-10;
/// Coordinate-sweep cap before the ascent reports failure.
const MAX_SWEEPS: usize = 10_000;
/// Starting points for the ascent (run in parallel, reduced in index order).
const STARTS: usize = 8;
/// Default feasibility tolerance on the optimal minimum eigenvalue.
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-9;

const TSIRELSON: f64 = 2.0 * std::f64::consts::SQRT_2;

/// One scalar degree of freedom of a [`MomentMatrix`], together with the
/// matrix cells it drives. Cell `(i, j)` (upper triangle) receives
/// `coefficient * value` on top of the base entry, mirrored to `(j, i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeSlot {
    pub lo: f64,
    pub hi: f64,
    /// Driven cells as `(row, col, coefficient)` with `row <= col`.
    pub cells: Vec<(usize, usize, f64)>,
}

/// Symmetric matrix whose entries are either fixed by observed statistics
/// or affine in a small set of bounded unknowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentMatrix {
    pub size: usize,
    /// Fixed part; cells driven by free slots hold their affine offsets.
    pub base: Vec<Vec<f64>>,
    pub free: Vec<FreeSlot>,
}

impl MomentMatrix {
    /// The matrix at a given assignment of the free entries.
    pub fn assemble(&self, values: &[f64]) -> Result<Vec<Vec<f64>>> {
        if values.len() != self.free.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} free values, got {}",
                self.free.len(),
                values.len()
            )));
        }
        let mut m = self.base.clone();
        for (slot, &v) in self.free.iter().zip(values) {
            for &(i, j, coeff) in &slot.cells {
                m[i][j] += coeff * v;
                if i != j {
                    m[j][i] += coeff * v;
                }
            }
        }
        Ok(m)
    }

    /// Minimum eigenvalue at a given assignment (concave in the assignment).
    pub fn min_eigenvalue(&self, values: &[f64]) -> Result<f64> {
        let m = self.assemble(values)?;
        let eig = sym_eigen(&m)?;
        Ok(eig[0].0)
    }
}

/// Outcome of a feasibility search over a moment matrix's free entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityResult {
    pub feasible: bool,
    /// Largest achievable minimum eigenvalue over the free-entry box.
    pub best_min_eigenvalue: f64,
    /// Free-entry assignment attaining it.
    pub witness_assignment: Vec<f64>,
}

/// Golden-section maximization of a concave function on `[lo, hi]`;
/// returns the best of all evaluated points (endpoints included).
fn golden_max(
    lo: f64,
    hi: f64,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = lo;
    let mut b = hi;
    let mut best = (lo, f(lo)?);
    let fb_end = f(hi)?;
    if fb_end > best.1 {
        best = (hi, fb_end);
    }
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > 1e-12 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
        let (x, fx) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
        if fx > best.1 {
            best = (x, fx);
        }
    }
    Ok(best)
}

/// Coordinate ascent from one start; returns the best point found.
fn ascend(mm: &MomentMatrix, mut u: Vec<f64>) -> Result<(f64, Vec<f64>)> {
    let mut best = mm.min_eigenvalue(&u)?;
    for _ in 0..MAX_SWEEPS {
        let before = best;
        for i in 0..u.len() {
            let slot = &mm.free[i];
            let mut probe = u.clone();
            let (xi, fi) = golden_max(slot.lo, slot.hi, |t| {
                probe[i] = t;
                mm.min_eigenvalue(&probe)
            })?;
            if fi > best {
                best = fi;
                u[i] = xi;
            }
        }
        if best - before <= ASCENT_TOL {
            return Ok((best, u));
        }
    }
    Err(Error::NoConvergence(format!(
        "eigenvalue ascent still improving after {MAX_SWEEPS} sweeps"
    )))
}

/// Deterministic start points: box center plus a fixed low-discrepancy
/// pattern inside the box.
fn start_points(mm: &MomentMatrix) -> Vec<Vec<f64>> {
    let mut starts = Vec::with_capacity(STARTS);
    // Center.
    starts.push(mm.free.iter().map(|s| 0.5 * (s.lo + s.hi)).collect());
    // Additive-recurrence (Kronecker) sequence on the unit cube.
    let alpha = 0.618_033_988_749_894_9_f64;
    for n in 1..STARTS {
        let point = mm
            .free
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let frac = ((n as f64) * alpha * (i as f64 + 1.0)).fract();
                s.lo + frac * (s.hi - s.lo)
            })
            .collect();
        starts.push(point);
    }
    starts
}

/// Decides whether the free entries of `mm` can be chosen to make it
/// positive semidefinite (up to `tol`), by maximizing the minimum
/// eigenvalue — a concave function of the free entries — with multi-start
/// coordinate ascent. Starts run in parallel; the reduction is
/// order-independent, so results are deterministic.
pub fn q1_feasibility(mm: &MomentMatrix, tol: f64) -> Result<FeasibilityResult> {
    if mm.base.len() != mm.size || mm.base.iter().any(|r| r.len() != mm.size) {
        return Err(Error::ShapeMismatch(format!(
            "base matrix is not {0}x{0}",
            mm.size
        )));
    }
    if mm.free.is_empty() {
        let lam = mm.min_eigenvalue(&[])?;
        return Ok(FeasibilityResult {
            feasible: lam >= -tol,
            best_min_eigenvalue: lam,
            witness_assignment: Vec::new(),
        });
    }
    let starts = start_points(mm);
    let results: Vec<Result<(f64, Vec<f64>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = starts
            .into_iter()
            .map(|u| scope.spawn(move || ascend(mm, u)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("ascent worker panicked"))
            .collect()
    });
    let mut best: Option<(f64, Vec<f64>)> = None;
    for r in results {
        let (lam, u) = r?;
        if best.as_ref().map_or(true, |(b, _)| lam > *b) {
            best = Some((lam, u));
        }
    }
    let (lam, u) = best.expect("at least one start");
    Ok(FeasibilityResult {
        feasible: lam >= -tol,
        best_min_eigenvalue: lam,
        witness_assignment: u,
    })
}

/// Moment matrix of the four dichotomic operators `A0, A1, B0, B1` given
/// their cross-party correlators. The diagonal is 1, the party-crossing
/// block is fixed to the observed correlators, and the two same-party
/// moments are free in `[-1, 1]`.
pub fn correlator_moment_matrix(c: &CorrelatorVector) -> Result<MomentMatrix> {
    if c.a_inputs != 2 || c.b_inputs != 2 {
        return Err(Error::WrongScenario(format!(
            "moment matrix needs 2x2 settings, got {}x{}",
            c.a_inputs, c.b_inputs
        )));
    }
    let mut base = vec![vec![0.0; 4]; 4];
    for (i, row) in base.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for x in 0..2 {
        for y in 0..2 {
            base[x][2 + y] = c.value(x, y);
            base[2 + y][x] = c.value(x, y);
        }
    }
    let free = vec![
        FreeSlot {
            lo: -1.0,
            hi: 1.0,
            cells: vec![(0, 1, 1.0)],
        },
        FreeSlot {
            lo: -1.0,
            hi: 1.0,
            cells: vec![(2, 3, 1.0)],
        },
    ];
    Ok(MomentMatrix {
        size: 4,
        base,
        free,
    })
}

/// Result of the arcsine correlator criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcsinCriterion {
    /// `|asin E00 + asin E01 + asin E10 - asin E11|`.
    pub lhs: f64,
    /// Whether `lhs <= pi` (up to 1e-12), a necessary condition for the
    /// correlators to be quantum.
    pub satisfied: bool,
}

/// Nonlinear correlator criterion for the quantum set: quantum correlators
/// obey `|asin E00 + asin E01 + asin E10 - asin E11| <= pi`, with equality
/// reached by the maximally entangled state's optimal statistics.
pub fn arcsin_criterion(c: &CorrelatorVector) -> Result<ArcsinCriterion> {
    if c.a_inputs != 2 || c.b_inputs != 2 {
        return Err(Error::WrongScenario(format!(
            "arcsine criterion needs 2x2 settings, got {}x{}",
            c.a_inputs, c.b_inputs
        )));
    }
    let a = |x: usize, y: usize| c.value(x, y).clamp(-1.0, 1.0).asin();
    let lhs = (a(0, 0) + a(0, 1) + a(1, 0) - a(1, 1)).abs();
    Ok(ArcsinCriterion {
        lhs,
        satisfied: lhs <= PI + 1e-12,
    })
}

/// The quantum-set membership test for correlators: the arcsine inequality
/// must hold for every placement of the minus sign (each placement is the
/// image of the displayed one under a local outcome relabeling).
pub fn arcsin_criterion_all_signs(c: &CorrelatorVector) -> Result<ArcsinCriterion> {
    if c.a_inputs != 2 || c.b_inputs != 2 {
        return Err(Error::WrongScenario(format!(
            "arcsine criterion needs 2x2 settings, got {}x{}",
            c.a_inputs, c.b_inputs
        )));
    }
    let asins: Vec<f64> = (0..4)
        .map(|k| c.values()[k].clamp(-1.0, 1.0).asin())
        .collect();
    let total: f64 = asins.iter().sum();
    let lhs = asins
        .iter()
        .map(|&a| (total - 2.0 * a).abs())
        .fold(0.0, f64::max);
    Ok(ArcsinCriterion {
        lhs,
        satisfied: lhs <= PI + 1e-12,
    })
}

/// Maximum guessing probability of either of Alice's outcomes compatible
/// with an observed CHSH value: `P* = (1 + sqrt(2 - (s/2)^2)) / 2`. Values
/// below the local bound certify nothing (`P* = 1`); values beyond the
/// quantum maximum are rejected.
pub fn randomness_bound(s_obs: f64) -> Result<f64> {
    if !s_obs.is_finite() || s_obs > TSIRELSON + 1e-9 {
        return Err(Error::SuperQuantumS(format!(
            "CHSH value {s_obs} exceeds the quantum maximum {TSIRELSON}"
        )));
    }
    if s_obs <= 2.0 {
        return Ok(1.0);
    }
    let inner = (2.0 - (s_obs / 2.0).powi(2)).max(0.0);
    Ok(0.5 * (1.0 + inner.sqrt()))
}

/// A point of the predictability-versus-CHSH trade-off realized by a
/// partially entangled pure state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub s: f64,
    pub p_marginal: f64,
    /// Whether the realized marginal sits on the certified bound
    /// within 1e-9.
    pub on_curve: bool,
}

/// Realizes the randomness bound: for the two-qubit pure state with Schmidt
/// angle `theta` measured at its own optimal settings, the CHSH value is
/// `2 sqrt(1 + sin^2 2theta)` and the largest setting-0 marginal equals the
/// bound exactly. Meaningful for `theta` in `(0, pi/4]`.
pub fn randomness_curve_achievability(theta: f64) -> Result<CurvePoint> {
    let rho = DensityMatrix::pure(&schmidt_pair_state(theta))?;
    let max = horodecki_max_chsh(&two_qubit_decompose(&rho)?)?;
    let behavior = chsh_behavior(&rho, &max.settings)?;
    let p0 = behavior.marginal_a(0, 0, 0);
    let p_marginal = p0.max(1.0 - p0);
    let bound = randomness_bound(max.s_max)?;
    Ok(CurvePoint {
        s: max.s_max,
        p_marginal,
        on_curve: (p_marginal - bound).abs() <= 1e-9,
    })
}

/// CHSH reach of one party's two settings against optimal opposite-party
/// settings, for the two-qubit pure state with Schmidt angle `theta` and
/// x-z-plane settings at angles `alpha0`, `alpha1` from the z axis. Alice's
/// effective vectors are `(cos a, sin 2theta sin a)`; Bob's optimal response
/// gives `|u0 + u1| + |u0 - u1|`.
fn chsh_reach(theta: f64, alpha0: f64, alpha1: f64) -> f64 {
    let s2 = (2.0 * theta).sin();
    let u0 = (alpha0.cos(), s2 * alpha0.sin());
    let u1 = (alpha1.cos(), s2 * alpha1.sin());
    let plus = ((u0.0 + u1.0).powi(2) + (u0.1 + u1.1).powi(2)).sqrt();
    let minus = ((u0.0 - u1.0).powi(2) + (u0.1 - u1.1).powi(2)).sqrt();
    plus + minus
}

/// Largest CHSH reachable once `theta` and Alice's first setting are fixed.
fn best_reach(theta: f64, alpha0: f64) -> f64 {
    let mut best = (0.0, f64::NEG_INFINITY);
    const GRID: usize = 64;
    for i in 0..=GRID {
        let a1 = PI * i as f64 / GRID as f64;
        let s = chsh_reach(theta, alpha0, a1);
        if s > best.1 {
            best = (a1, s);
        }
    }
    let half = PI / GRID as f64;
    let (_, s) = golden_max((best.0 - half).max(0.0), (best.0 + half).min(PI), |a1| {
        Ok(chsh_reach(theta, alpha0, a1))
    })
    .expect("closed-form objective cannot fail");
    s.max(best.1)
}

/// Independently re-derives the randomness bound by direct search: maximize
/// the largest setting-0 marginal `(1 + cos 2theta cos alpha0)/2` over pure
/// states and projective settings still able to reach `s_target`. Agrees
/// with [`randomness_bound`] to about 1e-4 on `[2, 2 sqrt 2]`.
pub fn block_optimize_marginal(s_target: f64) -> Result<f64> {
    if !s_target.is_finite() || s_target > TSIRELSON + 1e-9 {
        return Err(Error::SuperQuantumS(format!(
            "CHSH target {s_target} exceeds the quantum maximum {TSIRELSON}"
        )));
    }
    let s_target = s_target.clamp(2.0, TSIRELSON);
    let marginal = |theta: f64, alpha0: f64| 0.5 * (1.0 + (2.0 * theta).cos() * alpha0.cos());
    let feasible = |theta: f64, alpha0: f64| best_reach(theta, alpha0) >= s_target - 1e-12;
    // Coarse feasible grid over (theta, alpha0).
    const GRID: usize = 96;
    let mut best = (0.0, 0.0, f64::NEG_INFINITY);
    for i in 0..=GRID {
        let theta = FRAC_PI_4 * i as f64 / GRID as f64;
        for j in 0..=GRID {
            let alpha0 = FRAC_PI_2 * j as f64 / GRID as f64;
            if marginal(theta, alpha0) > best.2 && feasible(theta, alpha0) {
                best = (theta, alpha0, marginal(theta, alpha0));
            }
        }
    }
    // Pattern refinement along the active constraint.
    let (mut theta, mut alpha0, mut p) = best;
    let mut step = FRAC_PI_4 / GRID as f64;
    while step > 1e-9 {
        let mut improved = false;
        for (dt, da) in [
            (1.0, 0.0),
            (-1.0, 0.0),
            (0.0, 1.0),
            (0.0, -1.0),
            (1.0, 1.0),
            (1.0, -1.0),
            (-1.0, 1.0),
            (-1.0, -1.0),
        ] {
            let t = (theta + dt * step).clamp(0.0, FRAC_PI_4);
            let a = (alpha0 + da * step).clamp(0.0, FRAC_PI_2);
            if marginal(t, a) > p && feasible(t, a) {
                theta = t;
                alpha0 = a;
                p = marginal(t, a);
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(p)
}

/// Index of the covariance row of outcome `o` of setting `s` for a party
/// with `outs` outcomes per setting, shifted by `offset`.
fn cov_row(offset: usize, s: usize, o: usize, outs: usize) -> usize {
    offset + s * outs + o
}

/// Adds the free cross-setting covariance block between settings `s` and
/// `s2` of one party (rows at `offset`), with outcome-sum linkage and
/// Cauchy-Schwarz boxes against the fixed variances.
fn push_cov_block(
    mm: &mut MomentMatrix,
    offset: usize,
    s: usize,
    s2: usize,
    outs: usize,
) {
    let last = outs - 1;
    for a in 0..last {
        for b in 0..last {
            let cells = vec![
                (cov_row(offset, s, a, outs), cov_row(offset, s2, b, outs), 1.0),
                (
                    cov_row(offset, s, last, outs),
                    cov_row(offset, s2, b, outs),
                    -1.0,
                ),
                (
                    cov_row(offset, s, a, outs),
                    cov_row(offset, s2, last, outs),
                    -1.0,
                ),
                (
                    cov_row(offset, s, last, outs),
                    cov_row(offset, s2, last, outs),
                    1.0,
                ),
            ];
            // |Cov(u, v)| <= sqrt(Var u * Var v) for every driven cell.
            let mut bound = f64::INFINITY;
            for &(i, j, _) in &cells {
                bound = bound.min((mm.base[i][i] * mm.base[j][j]).max(0.0).sqrt());
            }
            mm.free.push(FreeSlot {
                lo: -bound,
                hi: bound,
                cells,
            });
        }
    }
}

/// Covariance matrix of the per-outcome intensity fluctuations in the
/// many-pair (macroscopic) limit. Party-crossing entries and same-setting
/// blocks are fixed by the behavior; same-party cross-setting covariances
/// are unobservable and enter as free slots (zero-sum linked across
/// outcomes, boxed by Cauchy-Schwarz). Marginals are taken against the
/// opposite party's first setting, so the input should be non-signaling.
pub fn macroscopic_covariance(b: &Behavior) -> Result<MomentMatrix> {
    let sc = b.scenario();
    let (ma, oa) = (sc.a_inputs, sc.a_outputs);
    let (mb, ob) = (sc.b_inputs, sc.b_outputs);
    let size = ma * oa + mb * ob;
    let b_off = ma * oa;
    let pa: Vec<Vec<f64>> = (0..ma)
        .map(|x| (0..oa).map(|a| b.marginal_a(x, a, 0)).collect())
        .collect();
    let pb: Vec<Vec<f64>> = (0..mb)
        .map(|y| (0..ob).map(|bb| b.marginal_b(y, bb, 0)).collect())
        .collect();
    let mut base = vec![vec![0.0; size]; size];
    // Same-party, same-setting: Cov = delta * p - p p'.
    for x in 0..ma {
        for a in 0..oa {
            for a2 in 0..oa {
                let delta = if a == a2 { pa[x][a] } else { 0.0 };
                base[cov_row(0, x, a, oa)][cov_row(0, x, a2, oa)] =
                    delta - pa[x][a] * pa[x][a2];
            }
        }
    }
    for y in 0..mb {
        for bb in 0..ob {
            for b2 in 0..ob {
                let delta = if bb == b2 { pb[y][bb] } else { 0.0 };
                base[cov_row(b_off, y, bb, ob)][cov_row(b_off, y, b2, ob)] =
                    delta - pb[y][bb] * pb[y][b2];
            }
        }
    }
    // Party-crossing: Cov = P(a,b|x,y) - P(a|x) P(b|y).
    for x in 0..ma {
        for a in 0..oa {
            for y in 0..mb {
                for bb in 0..ob {
                    let cov = b.p(x, y, a, bb) - pa[x][a] * pb[y][bb];
                    base[cov_row(0, x, a, oa)][cov_row(b_off, y, bb, ob)] = cov;
                    base[cov_row(b_off, y, bb, ob)][cov_row(0, x, a, oa)] = cov;
                }
            }
        }
    }
    let mut mm = MomentMatrix {
        size,
        base,
        free: Vec::new(),
    };
    for x in 0..ma {
        for x2 in x + 1..ma {
            push_cov_block(&mut mm, 0, x, x2, oa);
        }
    }
    for y in 0..mb {
        for y2 in y + 1..mb {
            push_cov_block(&mut mm, b_off, y, y2, ob);
        }
    }
    Ok(mm)
}

/// Macroscopic-locality test: whether the coarse-grained covariance matrix
/// admits a positive semidefinite completion. All quantum behaviors pass;
/// stronger-than-quantum boxes fail.
pub fn ml_feasibility(b: &Behavior) -> Result<FeasibilityResult> {
    q1_feasibility(&macroscopic_covariance(b)?, DEFAULT_FEASIBILITY_TOL)
}

/// Full first-level moment matrix of a two-setting binary behavior, with
/// rows for the identity and all eight outcome projectors. Fixed entries
/// come from the behavior (marginals against the opposite party's first
/// setting); the same-party cross-setting products are free within their
/// Frechet interval and linked so projectors of a setting sum to identity.
pub fn projector_moment_matrix(b: &Behavior) -> Result<MomentMatrix> {
    let sc = b.scenario();
    if (sc.a_inputs, sc.a_outputs, sc.b_inputs, sc.b_outputs) != (2, 2, 2, 2) {
        return Err(Error::WrongScenario(
            "projector moment matrix is built for two binary settings per side".into(),
        ));
    }
    let size = 9;
    // Row order: identity, A(x=0,a=0), A(0,1), A(1,0), A(1,1), B(0,0), ...
    let arow = |x: usize, a: usize| 1 + x * 2 + a;
    let brow = |y: usize, bb: usize| 5 + y * 2 + bb;
    let pa: Vec<Vec<f64>> = (0..2)
        .map(|x| (0..2).map(|a| b.marginal_a(x, a, 0)).collect())
        .collect();
    let pb: Vec<Vec<f64>> = (0..2)
        .map(|y| (0..2).map(|bb| b.marginal_b(y, bb, 0)).collect())
        .collect();
    let mut base = vec![vec![0.0; size]; size];
    base[0][0] = 1.0;
    let set = |base: &mut Vec<Vec<f64>>, i: usize, j: usize, v: f64| {
        base[i][j] = v;
        base[j][i] = v;
    };
    for x in 0..2 {
        for a in 0..2 {
            set(&mut base, 0, arow(x, a), pa[x][a]);
            // Projectors of one setting are orthogonal.
            for a2 in 0..2 {
                let v = if a == a2 { pa[x][a] } else { 0.0 };
                set(&mut base, arow(x, a), arow(x, a2), v);
            }
        }
    }
    for y in 0..2 {
        for bb in 0..2 {
            set(&mut base, 0, brow(y, bb), pb[y][bb]);
            for b2 in 0..2 {
                let v = if bb == b2 { pb[y][bb] } else { 0.0 };
                set(&mut base, brow(y, bb), brow(y, b2), v);
            }
        }
    }
    for x in 0..2 {
        for a in 0..2 {
            for y in 0..2 {
                for bb in 0..2 {
                    set(&mut base, arow(x, a), brow(y, bb), b.p(x, y, a, bb));
                }
            }
        }
    }
    // Cross-setting products: one free parameter per party,
    // t = <P(x=0, a=0) P(x=1, a=0)>, the rest fixed by completeness.
    let mut free = Vec::new();
    for (row, marg) in [(arow as fn(usize, usize) -> usize, &pa), (brow, &pb)] {
        let (p0, q0) = (marg[0][0], marg[1][0]);
        base[row(0, 1)][row(1, 0)] = q0;
        base[row(1, 0)][row(0, 1)] = q0;
        base[row(0, 0)][row(1, 1)] = p0;
        base[row(1, 1)][row(0, 0)] = p0;
        base[row(0, 1)][row(1, 1)] = 1.0 - p0 - q0;
        base[row(1, 1)][row(0, 1)] = 1.0 - p0 - q0;
        free.push(FreeSlot {
            lo: (p0 + q0 - 1.0).max(0.0),
            hi: p0.min(q0),
            cells: vec![
                (row(0, 0), row(1, 0), 1.0),
                (row(0, 0), row(1, 1), -1.0),
                (row(0, 1), row(1, 0), -1.0),
                (row(0, 1), row(1, 1), 1.0),
            ],
        });
    }
    Ok(MomentMatrix { size, base, free })
}

/// First-level quantum-set feasibility of a behavior: the projector moment
/// matrix for two-setting binary scenarios, the covariance form otherwise.
pub fn q1_behavior_feasibility(b: &Behavior, tol: f64) -> Result<FeasibilityResult> {
    let sc = b.scenario();
    let mm = if (sc.a_inputs, sc.a_outputs, sc.b_inputs, sc.b_outputs) == (2, 2, 2, 2) {
        projector_moment_matrix(b)?
    } else {
        macroscopic_covariance(b)?
    };
    q1_feasibility(&mm, tol)
}
