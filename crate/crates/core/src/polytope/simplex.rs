//! Dense two-phase simplex for small equality-form linear programs.
//!
//! Solves `min c.x  s.t.  A x = b, x >= 0` on a dense tableau. Pivoting uses
//! Bland's rule throughout, so the method cannot cycle; a generous iteration
//! cap guards against numerical stalls instead. Problem sizes in this crate
//! stay in the low hundreds of rows and columns, where a dense tableau is
//! both fast enough and easy to audit.
//!
//! On infeasible inputs the phase-1 dual is returned as a Farkas certificate
//! `y` with `y.A <= 0` and `y.b > 0`; membership tests turn that vector into
//! a separating Bell inequality.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const REDUCED_COST_TOL: f64 = 1e-9;
/// Phase-1 objective below this counts as feasible.
const FEAS_TOL: f64 = 1e-8;

/// Outcome of [`solve`].
#[derive(Debug, Clone)]
pub enum LpSolution {
    Optimal {
        x: Vec<f64>,
        objective: f64,
        /// Dual vector of the equality constraints, original row order.
        dual: Vec<f64>,
    },
    Infeasible {
        /// Farkas certificate: `farkas . A <= 0` componentwise, `farkas . b > 0`.
        farkas: Vec<f64>,
    },
    Unbounded,
}

struct Tableau {
    /// `m` rows by `n + m + 1` columns: structural, artificial, rhs.
    rows: Vec<Vec<f64>>,
    /// Column index of the basic variable in each row.
    basis: Vec<usize>,
    /// Sign applied to each original row to make the rhs nonnegative.
    row_sign: Vec<f64>,
    n: usize,
    m: usize,
    iterations_left: usize,
}

impl Tableau {
    fn new(a: &[Vec<f64>], b: &[f64], max_iterations: usize) -> Result<Self> {
        let m = a.len();
        let n = if m == 0 { 0 } else { a[0].len() };
        if b.len() != m || a.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(
                "lp matrix and rhs shapes disagree".into(),
            ));
        }
        let mut rows = Vec::with_capacity(m);
        let mut row_sign = Vec::with_capacity(m);
        for i in 0..m {
            let s = if b[i] < 0.0 { -1.0 } else { 1.0 };
            row_sign.push(s);
            let mut row = vec![0.0; n + m + 1];
            for j in 0..n {
                row[j] = s * a[i][j];
            }
            row[n + i] = 1.0;
            row[n + m] = s * b[i];
            rows.push(row);
        }
        let basis = (0..m).map(|i| n + i).collect();
        Ok(Tableau {
            rows,
            basis,
            row_sign,
            n,
            m,
            iterations_left: max_iterations,
        })
    }

    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.n + self.m]
    }

    /// Reduced costs `c_j - y.A_j` for the given cost vector (length n+m).
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let width = self.n + self.m;
        let mut r = cost.to_vec();
        for (i, &bi) in self.basis.iter().enumerate() {
            let cb = cost[bi];
            if cb != 0.0 {
                let row = &self.rows[i];
                for (j, rj) in r.iter_mut().enumerate().take(width) {
                    *rj -= cb * row[j];
                }
            }
        }
        r
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, &bi)| cost[bi] * self.rhs(i))
            .sum()
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.n + self.m + 1;
        let p = self.rows[row][col];
        for j in 0..width {
            self.rows[row][j] /= p;
        }
        for i in 0..self.m {
            if i != row {
                let f = self.rows[i][col];
                if f != 0.0 {
                    for j in 0..width {
                        self.rows[i][j] -= f * self.rows[row][j];
                    }
                }
            }
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations for `cost` until optimal or unbounded.
    ///
    /// `allowed` limits which columns may enter the basis.
    fn optimize(&mut self, cost: &[f64], allowed: impl Fn(usize) -> bool) -> Result<bool> {
        loop {
            if self.iterations_left == 0 {
                return Err(Error::LpNumericalFailure(
                    "simplex iteration cap exceeded".into(),
                ));
            }
            self.iterations_left -= 1;

            let reduced = self.reduced_costs(cost);
            // Bland: smallest improving column index.
            let mut entering = None;
            for (j, &rj) in reduced.iter().enumerate() {
                if allowed(j) && !self.basis.contains(&j) && rj < -REDUCED_COST_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                return Ok(true);
            };

            // Ratio test; Bland tie-break on smallest basic variable index.
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let aij = self.rows[i][col];
                if aij > PIVOT_TOL {
                    let ratio = self.rhs(i) / aij;
                    let better = match leaving {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - 1e-12
                                || (ratio < lr + 1e-12 && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leaving = Some((i, ratio));
                    }
                }
            }
            let Some((row, _)) = leaving else {
                return Ok(false);
            };
            self.pivot(row, col);
        }
    }

    /// Dual vector for `cost`, mapped back to the original row orientation.
    fn dual(&self, cost: &[f64]) -> Vec<f64> {
        // The artificial block of the tableau carries the basis inverse, so
        // y = c_B * B^-1 falls out of a single pass.
        let mut y = vec![0.0; self.m];
        for (i, &bi) in self.basis.iter().enumerate() {
            let cb = cost[bi];
            if cb != 0.0 {
                for k in 0..self.m {
                    y[k] += cb * self.rows[i][self.n + k];
                }
            }
        }
        for (k, yk) in y.iter_mut().enumerate() {
            *yk *= self.row_sign[k];
        }
        y
    }

    fn solution(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (i, &bi) in self.basis.iter().enumerate() {
            if bi < self.n {
                x[bi] = self.rhs(i);
            }
        }
        x
    }
}

/// Solves `min c.x  s.t.  A x = b, x >= 0`.
pub fn solve(a: &[Vec<f64>], b: &[f64], c: &[f64], max_iterations: usize) -> Result<LpSolution> {
    let mut t = Tableau::new(a, b, max_iterations)?;
    if c.len() != t.n {
        return Err(Error::DimensionMismatch(
            "lp cost vector has wrong length".into(),
        ));
    }

    // Phase 1: minimize the sum of artificials.
    let mut phase1 = vec![0.0; t.n + t.m];
    for j in t.n..t.n + t.m {
        phase1[j] = 1.0;
    }
    let n = t.n;
    t.optimize(&phase1, |_| true)?;
    let infeas = t.objective(&phase1);
    if infeas > FEAS_TOL {
        let farkas = t.dual(&phase1);
        return Ok(LpSolution::Infeasible { farkas });
    }

    // Drive surviving artificials out of the basis; rows that cannot be
    // pivoted are redundant and harmless because their artificial sits at
    // level zero and is barred from re-entering below.
    for i in 0..t.m {
        if t.basis[i] >= n {
            let col = (0..n).find(|&j| t.rows[i][j].abs() > PIVOT_TOL);
            if let Some(j) = col {
                t.pivot(i, j);
            }
        }
    }

    // Phase 2 on the real objective; artificials may not come back.
    let mut phase2 = vec![0.0; t.n + t.m];
    phase2[..t.n].copy_from_slice(c);
    let bounded = t.optimize(&phase2, |j| j < n)?;
    if !bounded {
        return Ok(LpSolution::Unbounded);
    }

    // A basic artificial pushed above zero means feasibility decayed during
    // phase 2; at our scales this indicates a genuine numerical failure.
    for (i, &bi) in t.basis.iter().enumerate() {
        if bi >= n && t.rhs(i) > FEAS_TOL {
            return Err(Error::LpNumericalFailure(
                "artificial variable re-grew during phase 2".into(),
            ));
        }
    }

    Ok(LpSolution::Optimal {
        x: t.solution(),
        objective: t.objective(&phase2),
        dual: t.dual(&phase2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_farkas(a: &[Vec<f64>], b: &[f64], y: &[f64]) {
        let n = a[0].len();
        for j in 0..n {
            let yaj: f64 = (0..a.len()).map(|i| y[i] * a[i][j]).sum();
            assert!(yaj <= 1e-7, "farkas violated on column {j}: {yaj}");
        }
        let yb: f64 = (0..a.len()).map(|i| y[i] * b[i]).sum();
        assert!(yb > 1e-9, "farkas rhs not positive: {yb}");
    }

    #[test]
    fn simple_optimum_with_dual() {
        // min x0 s.t. x0 + x1 = 1.
        let a = vec![vec![1.0, 1.0]];
        let b = vec![1.0];
        let c = vec![1.0, 0.0];
        match solve(&a, &b, &c, 1000).unwrap() {
            LpSolution::Optimal { x, objective, dual } => {
                assert!((x[0] - 0.0).abs() < 1e-12);
                assert!((x[1] - 1.0).abs() < 1e-12);
                assert!(objective.abs() < 1e-12);
                // Dual of the single row equals the optimal value slope: 0.
                assert!(dual[0].abs() < 1e-12);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn negative_rhs_handled_by_row_flip() {
        // x0 - x1 = -2 with x >= 0: optimal x = (0, 2) for min x0 + x1.
        let a = vec![vec![1.0, -1.0]];
        let b = vec![-2.0];
        let c = vec![1.0, 1.0];
        match solve(&a, &b, &c, 1000).unwrap() {
            LpSolution::Optimal { x, objective, .. } => {
                assert!((x[1] - 2.0).abs() < 1e-12);
                assert!((objective - 2.0).abs() < 1e-12);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn inconsistent_rows_yield_farkas() {
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let b = vec![1.0, 2.0];
        match solve(&a, &b, &[0.0, 0.0], 1000).unwrap() {
            LpSolution::Infeasible { farkas } => assert_farkas(&a, &b, &farkas),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn nonnegativity_infeasibility_certified() {
        // x0 + x1 = -1 is hopeless for x >= 0.
        let a = vec![vec![1.0, 1.0]];
        let b = vec![-1.0];
        match solve(&a, &b, &[0.0, 0.0], 1000).unwrap() {
            LpSolution::Infeasible { farkas } => assert_farkas(&a, &b, &farkas),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn unbounded_detected() {
        // min -x0 with x0 - x1 = 0 lets both grow without bound.
        let a = vec![vec![1.0, -1.0]];
        let b = vec![0.0];
        let c = vec![-1.0, 0.0];
        assert!(matches!(
            solve(&a, &b, &c, 1000).unwrap(),
            LpSolution::Unbounded
        ));
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let a = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![1.0, 0.0]];
        let b = vec![1.0, 2.0, 0.25];
        let c = vec![0.0, 1.0];
        match solve(&a, &b, &c, 1000).unwrap() {
            LpSolution::Optimal { x, .. } => {
                assert!((x[0] - 0.25).abs() < 1e-10);
                assert!((x[1] - 0.75).abs() < 1e-10);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn random_feasible_systems_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let m = rng.gen_range(2..6);
            let n = rng.gen_range(m..m + 6);
            let a: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let xstar: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let b: Vec<f64> = (0..m)
                .map(|i| (0..n).map(|j| a[i][j] * xstar[j]).sum())
                .collect();
            match solve(&a, &b, &vec![0.0; n], 10_000).unwrap() {
                LpSolution::Optimal { x, .. } => {
                    for i in 0..m {
                        let lhs: f64 = (0..n).map(|j| a[i][j] * x[j]).sum();
                        assert!((lhs - b[i]).abs() < 1e-7, "residual too large");
                    }
                }
                other => panic!("random feasible system misclassified: {other:?}"),
            }
        }
    }

    #[test]
    fn random_infeasible_systems_certified() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(2..8);
            // Row of ones equal to 1, and the same row equal to 2: never satisfiable.
            let mut a = vec![vec![1.0; n], vec![1.0; n]];
            let mut b = vec![1.0, 2.0];
            for _ in 0..rng.gen_range(0..4) {
                a.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
                let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                let last = a.last().unwrap();
                b.push((0..n).map(|j| last[j] * xs[j]).sum());
            }
            match solve(&a, &b, &vec![0.0; n], 10_000).unwrap() {
                LpSolution::Infeasible { farkas } => assert_farkas(&a, &b, &farkas),
                other => panic!("infeasible system misclassified: {other:?}"),
            }
        }
    }
}
