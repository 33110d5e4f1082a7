//! Local-polytope geometry: deterministic strategies, exact membership via
//! linear programming, and facet enumeration for small correlation polytopes.
//!
//! The local set of a scenario is the convex hull of its deterministic
//! strategies. Membership is decided by a Chebyshev-projection LP: minimize
//! the worst entrywise deviation between the input behavior and a mixture of
//! strategies. When the optimum exceeds the tolerance, the LP dual is a
//! Farkas certificate, which normalizes into a separating Bell inequality
//! whose local bound is then recomputed exactly by enumeration.
//!
//! Facet enumeration works on vertex lists with small integer coordinates
//! (the +-1 correlator polytopes) in exact integer arithmetic, falling back
//! to tolerance-based floating point for general vertices. Dimensions are
//! capped at 8; enumerating hyperplanes from vertex subsets is quadratic in
//! nothing but patience beyond that.

pub mod simplex;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{outcome_sign, Behavior, BellInequality, InequalityForm, Scenario};

/// Default cap on enumerated deterministic strategies.
pub const ENUM_CAP: u64 = 10_000_000;
/// Strategy-count cap for the membership LP (columns of the tableau).
pub const MEMBERSHIP_CAP: u64 = 65_536;
/// Facet enumeration handles at most this many dimensions.
pub const FACET_DIM_CAP: usize = 8;

/// Assignment of one outcome to every setting on each side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    pub a_assign: Vec<usize>,
    pub b_assign: Vec<usize>,
}

impl DeterministicStrategy {
    /// Strategy at `index` in lexicographic order: Alice's assignment is the
    /// base-`a_outputs` expansion of the high part (first setting most
    /// significant), Bob's likewise from the low part.
    pub fn from_index(scenario: &Scenario, index: u64) -> Result<Self> {
        let total = scenario.deterministic_count()?;
        if index >= total {
            return Err(Error::ShapeMismatch(format!(
                "strategy index {index} out of range {total}"
            )));
        }
        let nb = (scenario.b_outputs as u64).pow(scenario.b_inputs as u32);
        let (ia, ib) = (index / nb, index % nb);
        let digits = |mut v: u64, base: usize, len: usize| -> Vec<usize> {
            let mut out = vec![0; len];
            for slot in out.iter_mut().rev() {
                *slot = (v % base as u64) as usize;
                v /= base as u64;
            }
            out
        };
        Ok(DeterministicStrategy {
            a_assign: digits(ia, scenario.a_outputs, scenario.a_inputs),
            b_assign: digits(ib, scenario.b_outputs, scenario.b_inputs),
        })
    }

    /// Inverse of [`DeterministicStrategy::from_index`].
    pub fn index(&self, scenario: &Scenario) -> u64 {
        let mut ia: u64 = 0;
        for &a in &self.a_assign {
            ia = ia * scenario.a_outputs as u64 + a as u64;
        }
        let mut ib: u64 = 0;
        for &b in &self.b_assign {
            ib = ib * scenario.b_outputs as u64 + b as u64;
        }
        ia * (scenario.b_outputs as u64).pow(scenario.b_inputs as u32) + ib
    }

    /// The deterministic behavior table of this strategy.
    pub fn behavior(&self, scenario: &Scenario) -> Result<Behavior> {
        if self.a_assign.len() != scenario.a_inputs
            || self.b_assign.len() != scenario.b_inputs
            || self.a_assign.iter().any(|&a| a >= scenario.a_outputs)
            || self.b_assign.iter().any(|&b| b >= scenario.b_outputs)
        {
            return Err(Error::ShapeMismatch(
                "strategy assignment does not fit the scenario".into(),
            ));
        }
        Behavior::from_fn(*scenario, |x, y, a, b| {
            if self.a_assign[x] == a && self.b_assign[y] == b {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Behavior table of a deterministic strategy.
pub fn strategy_behavior(d: &DeterministicStrategy, scenario: &Scenario) -> Result<Behavior> {
    d.behavior(scenario)
}

/// All deterministic strategies in lexicographic order, up to [`ENUM_CAP`].
pub fn enumerate_deterministic(scenario: &Scenario) -> Result<Vec<DeterministicStrategy>> {
    enumerate_deterministic_capped(scenario, ENUM_CAP)
}

/// All deterministic strategies in lexicographic order, with an explicit cap.
pub fn enumerate_deterministic_capped(
    scenario: &Scenario,
    cap: u64,
) -> Result<Vec<DeterministicStrategy>> {
    let total = scenario.deterministic_count()?;
    if total > cap {
        return Err(Error::TooLarge(format!(
            "{total} deterministic strategies exceed the cap of {cap}"
        )));
    }
    (0..total)
        .map(|i| DeterministicStrategy::from_index(scenario, i))
        .collect()
}

/// Distinct correlator-space vertices `(sign(a_x) * sign(b_y))_{x,y}` of the
/// local polytope; requires binary outcomes. Row-major in `x`, first-seen
/// order over the lexicographic strategy enumeration.
pub fn correlator_polytope_vertices(scenario: &Scenario) -> Result<Vec<Vec<f64>>> {
    if !scenario.is_binary() {
        return Err(Error::NonBinaryOutcomes(
            "correlator vertices need two-outcome settings".into(),
        ));
    }
    let strategies = enumerate_deterministic(scenario)?;
    let mut seen = HashSet::new();
    let mut vertices = Vec::new();
    for d in &strategies {
        let mut key = Vec::with_capacity(scenario.a_inputs * scenario.b_inputs);
        for &a in &d.a_assign {
            for &b in &d.b_assign {
                let s = outcome_sign(a) * outcome_sign(b);
                key.push(s as i8);
            }
        }
        if seen.insert(key.clone()) {
            vertices.push(key.into_iter().map(f64::from).collect());
        }
    }
    Ok(vertices)
}

/// Sparse convex decomposition over lexicographically indexed strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LvDecomposition {
    /// `(strategy_index, weight)` pairs with strictly positive weights.
    pub weights: Vec<(u64, f64)>,
}

/// Answer of [`lv_membership`]: exactly one certificate is present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub inside: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<LvDecomposition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separating: Option<BellInequality>,
}

/// Decides whether `b` is a mixture of deterministic strategies, up to an
/// entrywise tolerance `tol`.
///
/// Inside: returns a decomposition whose reconstruction matches `b` within
/// `tol` in every entry. Outside: returns a separating inequality, scaled so
/// its largest coefficient magnitude is one, whose value on `b` exceeds the
/// exact deterministic bound by more than `tol`.
pub fn lv_membership(b: &Behavior, tol: f64) -> Result<MembershipVerdict> {
    if !(tol >= 0.0) {
        return Err(Error::BadBounds(format!("membership tolerance {tol}")));
    }
    let scenario = b.scenario();
    let strategies = enumerate_deterministic_capped(&scenario, MEMBERSHIP_CAP)?;
    let n = strategies.len();
    let k = scenario.table_len();

    // Column tables of each strategy.
    let columns: Vec<Vec<f64>> = strategies
        .iter()
        .map(|d| d.behavior(&scenario).map(|bh| bh.table().to_vec()))
        .collect::<Result<_>>()?;

    // Chebyshev projection: min eps s.t. |sum_j w_j B_j - b|_inf <= eps,
    // sum w = 1, w >= 0. Variables: w (n), p (k), q (k), eps.
    let vars = n + 2 * k + 1;
    let eps_col = vars - 1;
    let mut a = Vec::with_capacity(2 * k + 1);
    let mut rhs = Vec::with_capacity(2 * k + 1);
    for row in 0..k {
        let mut r = vec![0.0; vars];
        for (j, col) in columns.iter().enumerate() {
            r[j] = col[row];
        }
        r[n + row] = 1.0;
        r[eps_col] = -1.0;
        a.push(r);
        rhs.push(b.table()[row]);
    }
    for row in 0..k {
        let mut r = vec![0.0; vars];
        for (j, col) in columns.iter().enumerate() {
            r[j] = -col[row];
        }
        r[n + k + row] = 1.0;
        r[eps_col] = -1.0;
        a.push(r);
        rhs.push(-b.table()[row]);
    }
    let mut norm_row = vec![0.0; vars];
    norm_row[..n].iter_mut().for_each(|v| *v = 1.0);
    a.push(norm_row);
    rhs.push(1.0);

    let mut cost = vec![0.0; vars];
    cost[eps_col] = 1.0;

    let solution = simplex::solve(&a, &rhs, &cost, 500_000)?;
    let (x, eps, dual) = match solution {
        simplex::LpSolution::Optimal {
            x,
            objective,
            dual,
        } => (x, objective, dual),
        // The projection LP is feasible and bounded by construction.
        _ => {
            return Err(Error::LpNumericalFailure(
                "membership projection LP failed to reach an optimum".into(),
            ))
        }
    };

    if eps <= tol {
        let mut weights: Vec<(u64, f64)> = x[..n]
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 1e-12)
            .map(|(j, &w)| (j as u64, w))
            .collect();
        // Defensive renormalization; the LP already pins the sum near one.
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-7 {
            return Err(Error::LpNumericalFailure(format!(
                "decomposition weights sum to {total}"
            )));
        }
        for (_, w) in weights.iter_mut() {
            *w /= total;
        }
        // Reconstruction must really sit within tol of the input.
        let mut worst: f64 = 0.0;
        for row in 0..k {
            let recon: f64 = weights
                .iter()
                .map(|&(j, w)| w * columns[j as usize][row])
                .sum();
            worst = worst.max((recon - b.table()[row]).abs());
        }
        if worst > tol + 1e-9 {
            return Err(Error::LpNumericalFailure(format!(
                "reconstruction residual {worst} exceeds tolerance {tol}"
            )));
        }
        return Ok(MembershipVerdict {
            inside: true,
            decomposition: Some(LvDecomposition { weights }),
            separating: None,
        });
    }

    // Outside: the dual of the projection LP separates. With rows ordered
    // as above, the certificate over table entries is alpha - beta.
    let mut normal: Vec<f64> = (0..k).map(|row| dual[row] - dual[k + row]).collect();
    let scale = normal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale < 1e-12 {
        return Err(Error::LpNumericalFailure(
            "separating dual vanished".into(),
        ));
    }
    for v in normal.iter_mut() {
        *v /= scale;
    }
    // Exact deterministic bound of the certificate.
    let local_bound = columns
        .iter()
        .map(|col| col.iter().zip(&normal).map(|(c, nv)| c * nv).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    // Algebraic bound: pick the best entry in each setting-pair block.
    let block = scenario.a_outputs * scenario.b_outputs;
    let algebraic_bound: f64 = normal
        .chunks(block)
        .map(|c| c.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)))
        .sum();
    let value: f64 = normal
        .iter()
        .zip(b.table().iter())
        .map(|(nv, p)| nv * p)
        .sum();
    if value - local_bound <= tol {
        return Err(Error::LpNumericalFailure(format!(
            "separating margin {} did not clear tolerance {tol}",
            value - local_bound
        )));
    }
    Ok(MembershipVerdict {
        inside: false,
        decomposition: None,
        separating: Some(BellInequality {
            form: InequalityForm::Probability,
            coefficients: normal,
            local_bound,
            algebraic_bound,
        }),
    })
}

fn is_integer_vertices(vertices: &[Vec<f64>]) -> bool {
    vertices
        .iter()
        .flatten()
        .all(|&v| (v - v.round()).abs() <= 1e-9 && v.abs() < 1e6)
}

fn int_det(mut m: Vec<Vec<i128>>) -> i128 {
    // Bareiss fraction-free elimination; all divisions are exact.
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut sign = 1i128;
    let mut prev = 1i128;
    for kdx in 0..n - 1 {
        if m[kdx][kdx] == 0 {
            match (kdx + 1..n).find(|&r| m[r][kdx] != 0) {
                Some(r) => {
                    m.swap(kdx, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in kdx + 1..n {
            for j in kdx + 1..n {
                m[i][j] = (m[i][j] * m[kdx][kdx] - m[i][kdx] * m[kdx][j]) / prev;
            }
            m[i][kdx] = 0;
        }
        prev = m[kdx][kdx];
    }
    sign * m[n - 1][n - 1]
}

fn float_det(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    if n == 0 {
        return 1.0;
    }
    let mut det = 1.0;
    for kdx in 0..n {
        let pivot = (kdx..n)
            .max_by(|&a, &b| m[a][kdx].abs().partial_cmp(&m[b][kdx].abs()).unwrap())
            .unwrap();
        if m[pivot][kdx].abs() < 1e-12 {
            return 0.0;
        }
        if pivot != kdx {
            m.swap(kdx, pivot);
            det = -det;
        }
        det *= m[kdx][kdx];
        for i in kdx + 1..n {
            let f = m[i][kdx] / m[kdx][kdx];
            for j in kdx..n {
                m[i][j] -= f * m[kdx][j];
            }
        }
    }
    det
}

fn affine_rank(vertices: &[Vec<f64>]) -> usize {
    let dim = vertices[0].len();
    let mut rows: Vec<Vec<f64>> = vertices[1..]
        .iter()
        .map(|v| v.iter().zip(&vertices[0]).map(|(a, b)| a - b).collect())
        .collect();
    let mut rank = 0;
    for col in 0..dim {
        let Some(p) = (rank..rows.len()).max_by(|&a, &b| {
            rows[a][col].abs().partial_cmp(&rows[b][col].abs()).unwrap()
        }) else {
            break;
        };
        if rows[p][col].abs() < 1e-9 {
            continue;
        }
        rows.swap(rank, p);
        for i in 0..rows.len() {
            if i != rank {
                let f = rows[i][col] / rows[rank][col];
                for j in 0..dim {
                    rows[i][j] -= f * rows[rank][j];
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Iterates over k-subsets of `0..n` in lexicographic order.
struct Combinations {
    idx: Vec<usize>,
    n: usize,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations {
            idx: (0..k).collect(),
            n,
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        // Advance like an odometer with strictly increasing digits.
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - (k - i) {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Enumerates the facets of the convex hull of `vertices`.
///
/// The polytope must be full-dimensional with the origin strictly in its
/// interior. Integer vertex lists (the usual +-1 correlator polytopes) are
/// processed in exact arithmetic; anything else falls back to floating point
/// with a 1e-10 side tolerance. Facets come back as correlator-form
/// inequalities with integer-reduced (or max-coefficient-one) normals,
/// sorted lexicographically by coefficients.
pub fn facet_enumeration(vertices: &[Vec<f64>]) -> Result<Vec<BellInequality>> {
    let Some(first) = vertices.first() else {
        return Err(Error::DegenerateVertexSet("no vertices given".into()));
    };
    let dim = first.len();
    if dim == 0 || vertices.iter().any(|v| v.len() != dim) {
        return Err(Error::ShapeMismatch(
            "vertices must share a positive dimension".into(),
        ));
    }
    if dim > FACET_DIM_CAP {
        return Err(Error::DimensionTooLarge(format!(
            "facet enumeration supports dimension <= {FACET_DIM_CAP}, got {dim}"
        )));
    }
    if vertices.len() < dim + 1 {
        return Err(Error::DegenerateVertexSet(
            "need at least dim + 1 vertices".into(),
        ));
    }
    if affine_rank(vertices) < dim {
        return Err(Error::DegenerateVertexSet(
            "vertices do not span the full dimension".into(),
        ));
    }

    let exact = is_integer_vertices(vertices);
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut facets = Vec::new();

    for subset in Combinations::new(vertices.len(), dim) {
        // Normal of the affine span via generalized cross product.
        let base = &vertices[subset[0]];
        let diffs: Vec<Vec<f64>> = subset[1..]
            .iter()
            .map(|&i| {
                vertices[i]
                    .iter()
                    .zip(base)
                    .map(|(a, b)| a - b)
                    .collect::<Vec<f64>>()
            })
            .collect();

        let normal: Vec<f64> = if exact {
            (0..dim)
                .map(|kdx| {
                    let minor: Vec<Vec<i128>> = diffs
                        .iter()
                        .map(|row| {
                            row.iter()
                                .enumerate()
                                .filter(|&(j, _)| j != kdx)
                                .map(|(_, &v)| v.round() as i128)
                                .collect()
                        })
                        .collect();
                    let sign = if kdx % 2 == 0 { 1.0 } else { -1.0 };
                    sign * int_det(minor) as f64
                })
                .collect()
        } else {
            (0..dim)
                .map(|kdx| {
                    let minor: Vec<Vec<f64>> = diffs
                        .iter()
                        .map(|row| {
                            row.iter()
                                .enumerate()
                                .filter(|&(j, _)| j != kdx)
                                .map(|(_, &v)| v)
                                .collect()
                        })
                        .collect();
                    let sign = if kdx % 2 == 0 { 1.0 } else { -1.0 };
                    sign * float_det(minor)
                })
                .collect()
        };
        let norm_max = normal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm_max < 1e-9 {
            continue;
        }

        let mut bound: f64 = base.iter().zip(&normal).map(|(v, nv)| v * nv).sum();
        let mut normal = normal;
        let side_tol = if exact { 0.5 } else { 1e-10 * norm_max };
        let values: Vec<f64> = vertices
            .iter()
            .map(|v| v.iter().zip(&normal).map(|(vi, ni)| vi * ni).sum())
            .collect();
        let above = values.iter().any(|&v| v > bound + side_tol);
        let below = values.iter().any(|&v| v < bound - side_tol);
        if above && below {
            continue;
        }
        if above {
            for v in normal.iter_mut() {
                *v = -*v;
            }
            bound = -bound;
        }
        if bound <= side_tol {
            return Err(Error::DegenerateVertexSet(
                "origin is not strictly interior".into(),
            ));
        }

        // Canonical form for dedup.
        let key: Vec<i64>;
        if exact {
            let mut ints: Vec<i128> = normal.iter().map(|&v| v.round() as i128).collect();
            let mut b_int = bound.round() as i128;
            let mut g = b_int.unsigned_abs();
            for &v in &ints {
                g = gcd(g, v.unsigned_abs());
            }
            if g > 1 {
                for v in ints.iter_mut() {
                    *v /= g as i128;
                }
                b_int /= g as i128;
            }
            normal = ints.iter().map(|&v| v as f64).collect();
            bound = b_int as f64;
            key = ints
                .iter()
                .map(|&v| v as i64)
                .chain(std::iter::once(b_int as i64))
                .collect();
        } else {
            let s = normal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for v in normal.iter_mut() {
                *v /= s;
            }
            bound /= s;
            key = normal
                .iter()
                .map(|&v| (v * 1e8).round() as i64)
                .chain(std::iter::once((bound * 1e8).round() as i64))
                .collect();
        }
        if !seen.insert(key) {
            continue;
        }

        // Box bound over the coordinate ranges of the vertex set.
        let algebraic_bound: f64 = (0..dim)
            .map(|j| {
                let lo = vertices.iter().map(|v| v[j]).fold(f64::INFINITY, f64::min);
                let hi = vertices
                    .iter()
                    .map(|v| v[j])
                    .fold(f64::NEG_INFINITY, f64::max);
                (normal[j] * lo).max(normal[j] * hi)
            })
            .sum();

        facets.push(BellInequality {
            form: InequalityForm::Correlator,
            coefficients: normal,
            local_bound: bound,
            algebraic_bound,
        });
    }

    facets.sort_by(|p, q| {
        p.coefficients
            .partial_cmp(&q.coefficients)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(facets)
}

/// `true` when the inequality touches a single coordinate (a +-E <= 1 style bound).
pub fn is_trivial_facet(ineq: &BellInequality) -> bool {
    ineq.coefficients.iter().filter(|c| c.abs() > 1e-9).count() == 1
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{bell_value, chsh_value, CorrelatorVector};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pr_box_table() -> Behavior {
        Behavior::from_fn(Scenario::chsh(), |x, y, a, b| {
            let parity = (a + b) % 2;
            let want = x * y;
            if parity == want {
                0.5
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn strategy_count_and_order() {
        let s = Scenario::chsh();
        let all = enumerate_deterministic(&s).unwrap();
        assert_eq!(all.len(), 16);
        assert_eq!(all[0].a_assign, vec![0, 0]);
        assert_eq!(all[0].b_assign, vec![0, 0]);
        assert_eq!(all[1].b_assign, vec![0, 1]);
        assert_eq!(all[15].a_assign, vec![1, 1]);
        for (i, d) in all.iter().enumerate() {
            assert_eq!(d.index(&s), i as u64);
        }
    }

    #[test]
    fn enumeration_cap_enforced() {
        let s = Scenario::new(10, 10, 2, 2).unwrap();
        assert_eq!(
            enumerate_deterministic(&s).unwrap_err().kind(),
            "too_large"
        );
    }

    #[test]
    fn deterministic_behaviors_are_valid_and_sign_balanced() {
        let s = Scenario::chsh();
        for d in enumerate_deterministic(&s).unwrap() {
            let b = d.behavior(&s).unwrap();
            assert_eq!(b.no_signaling_residual(), 0.0);
            let c = b.correlators().unwrap();
            // Product of the four correlators of a deterministic point is +1.
            let prod: f64 = c.values().iter().product();
            assert_relative_eq!(prod, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn strategy_with_mixed_outcomes_has_expected_correlators() {
        let s = Scenario::chsh();
        let d = DeterministicStrategy {
            a_assign: vec![0, 1],
            b_assign: vec![0, 1],
        };
        let c = d.behavior(&s).unwrap().correlators().unwrap();
        assert_eq!(c.values(), &[1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn chsh_correlator_vertices() {
        let verts = correlator_polytope_vertices(&Scenario::chsh()).unwrap();
        assert_eq!(verts.len(), 8);
        // The four sign classes and their negatives are all present.
        for v in [
            vec![1.0, 1.0, 1.0, 1.0],
            vec![1.0, 1.0, -1.0, -1.0],
            vec![1.0, -1.0, 1.0, -1.0],
            vec![1.0, -1.0, -1.0, 1.0],
        ] {
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            assert!(verts.contains(&v));
            assert!(verts.contains(&neg));
        }
    }

    #[test]
    fn three_setting_vertices() {
        let s = Scenario::new(3, 2, 3, 2).unwrap();
        let verts = correlator_polytope_vertices(&s).unwrap();
        assert_eq!(verts.len(), 32);
        assert_eq!(
            facet_enumeration(&verts).unwrap_err().kind(),
            "dimension_too_large"
        );
    }

    #[test]
    fn square_and_cube_facets() {
        let square: Vec<Vec<f64>> = vec![
            vec![1.0, 1.0],
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
            vec![-1.0, -1.0],
        ];
        assert_eq!(facet_enumeration(&square).unwrap().len(), 4);

        let mut cube = Vec::new();
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    cube.push(vec![sx, sy, sz]);
                }
            }
        }
        let facets = facet_enumeration(&cube).unwrap();
        assert_eq!(facets.len(), 6);
        for f in &facets {
            assert!(is_trivial_facet(f));
            assert_relative_eq!(f.local_bound, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn scaled_square_uses_float_path() {
        let square: Vec<Vec<f64>> = vec![
            vec![0.5, 0.5],
            vec![0.5, -0.5],
            vec![-0.5, 0.5],
            vec![-0.5, -0.5],
        ];
        let facets = facet_enumeration(&square).unwrap();
        assert_eq!(facets.len(), 4);
        for f in &facets {
            assert_relative_eq!(f.local_bound, 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn chsh_facets_complete() {
        let verts = correlator_polytope_vertices(&Scenario::chsh()).unwrap();
        let facets = facet_enumeration(&verts).unwrap();
        assert_eq!(facets.len(), 16);
        let trivial: Vec<_> = facets.iter().filter(|f| is_trivial_facet(f)).collect();
        assert_eq!(trivial.len(), 8);
        for f in &trivial {
            assert_relative_eq!(f.local_bound, 1.0, epsilon = 1e-12);
            assert_relative_eq!(f.algebraic_bound, 1.0, epsilon = 1e-12);
        }
        for f in facets.iter().filter(|f| !is_trivial_facet(f)) {
            // CHSH-type: four unit coefficients with an odd number of minus signs.
            assert_relative_eq!(f.local_bound, 2.0, epsilon = 1e-12);
            assert_relative_eq!(f.algebraic_bound, 4.0, epsilon = 1e-12);
            let prod: f64 = f.coefficients.iter().product();
            assert_relative_eq!(prod, -1.0, epsilon = 1e-12);
            assert!(f.coefficients.iter().all(|c| (c.abs() - 1.0).abs() < 1e-12));
            // Tight on at least dim vertices.
            let tight = verts
                .iter()
                .filter(|v| {
                    let val: f64 = v.iter().zip(&f.coefficients).map(|(a, b)| a * b).sum();
                    (val - f.local_bound).abs() < 1e-9
                })
                .count();
            assert!(tight >= 4);
        }
        // The canonical CHSH facet is present.
        assert!(facets.iter().any(|f| f.coefficients == [1.0, 1.0, 1.0, -1.0]
            && (f.local_bound - 2.0).abs() < 1e-12));
    }

    #[test]
    fn degenerate_inputs_rejected() {
        // Collinear points in the plane.
        let line: Vec<Vec<f64>> = vec![
            vec![-1.0, 0.0],
            vec![0.0, 0.0],
            vec![1.0, 0.0],
        ];
        assert_eq!(
            facet_enumeration(&line).unwrap_err().kind(),
            "degenerate_vertex_set"
        );
        // Full-dimensional but origin on the boundary.
        let shifted: Vec<Vec<f64>> = vec![
            vec![0.0, -1.0],
            vec![0.0, 1.0],
            vec![2.0, -1.0],
            vec![2.0, 1.0],
        ];
        assert_eq!(
            facet_enumeration(&shifted).unwrap_err().kind(),
            "degenerate_vertex_set"
        );
    }

    #[test]
    fn uniform_behavior_is_inside() {
        let s = Scenario::chsh();
        let b = Behavior::from_fn(s, |_, _, _, _| 0.25).unwrap();
        let v = lv_membership(&b, 1e-9).unwrap();
        assert!(v.inside);
        let d = v.decomposition.unwrap();
        let total: f64 = d.weights.iter().map(|(_, w)| w).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn deterministic_point_recovers_unit_weight() {
        let s = Scenario::chsh();
        let d = DeterministicStrategy {
            a_assign: vec![0, 1],
            b_assign: vec![1, 0],
        };
        let idx = d.index(&s);
        let v = lv_membership(&d.behavior(&s).unwrap(), 1e-9).unwrap();
        assert!(v.inside);
        let dec = v.decomposition.unwrap();
        assert_eq!(dec.weights.len(), 1);
        assert_eq!(dec.weights[0].0, idx);
        assert_relative_eq!(dec.weights[0].1, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn random_mixtures_are_inside_up_to_three_settings() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in [
            Scenario::chsh(),
            Scenario::new(3, 2, 3, 2).unwrap(),
            Scenario::new(2, 3, 2, 2).unwrap(),
        ] {
            let strategies = enumerate_deterministic(&s).unwrap();
            for _ in 0..5 {
                let mut parts = Vec::new();
                let mut weights = [0.0; 4];
                let mut total = 0.0;
                for w in weights.iter_mut() {
                    *w = rng.gen_range(0.01..1.0);
                    total += *w;
                }
                let picks: Vec<usize> =
                    (0..4).map(|_| rng.gen_range(0..strategies.len())).collect();
                let behaviors: Vec<Behavior> = picks
                    .iter()
                    .map(|&i| strategies[i].behavior(&s).unwrap())
                    .collect();
                for (w, b) in weights.iter().zip(&behaviors) {
                    parts.push((*w / total, b));
                }
                let mixed = Behavior::mix(&parts).unwrap();
                let v = lv_membership(&mixed, 1e-8).unwrap();
                assert!(v.inside, "mixture misclassified in {s:?}");
            }
        }
    }

    #[test]
    fn pr_box_is_outside_with_valid_certificate() {
        let b = pr_box_table();
        let v = lv_membership(&b, 1e-6).unwrap();
        assert!(!v.inside);
        let ineq = v.separating.unwrap();
        let val = bell_value(&ineq, &b).unwrap();
        assert!(val > ineq.local_bound + 1e-6);
        assert!(ineq.algebraic_bound >= ineq.local_bound - 1e-12);
        // Certificate must not cut off any deterministic point.
        let s = Scenario::chsh();
        for d in enumerate_deterministic(&s).unwrap() {
            let dv = bell_value(&ineq, &d.behavior(&s).unwrap()).unwrap();
            assert!(dv <= ineq.local_bound + 1e-9);
        }
    }

    #[test]
    fn singlet_statistics_are_outside() {
        let inv = 1.0 / 2.0_f64.sqrt();
        let c = CorrelatorVector::new(2, 2, vec![inv, inv, inv, -inv]).unwrap();
        let b = Behavior::from_correlators(&c).unwrap();
        assert_relative_eq!(chsh_value(&b).unwrap(), 2.0 * 2.0_f64.sqrt(), epsilon = 1e-12);
        let v = lv_membership(&b, 1e-8).unwrap();
        assert!(!v.inside);
    }

    #[test]
    fn verdict_flips_once_along_noise_line() {
        // w * PR + (1 - w) * uniform crosses the boundary at w = 1/2.
        let pr = pr_box_table();
        let noise = Behavior::from_fn(Scenario::chsh(), |_, _, _, _| 0.25).unwrap();
        let inside_at = |w: f64| {
            let b = Behavior::mix(&[(w, &pr), (1.0 - w, &noise)]).unwrap();
            lv_membership(&b, 1e-9).unwrap().inside
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        assert!(inside_at(lo));
        assert!(!inside_at(hi));
        for _ in 0..20 {
            let mid = 0.5 * (lo + hi);
            if inside_at(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((0.5 * (lo + hi) - 0.5).abs() < 1e-4);
    }
}
