//! Bell-scenario bookkeeping: behaviors, correlators, and linear functionals.
//!
//! A *behavior* is the conditional distribution table `P(a,b|x,y)` of a
//! bipartite box: Alice chooses setting `x` and reads outcome `a`, Bob
//! chooses `y` and reads `b`. Everything downstream (polytope membership,
//! quantum maximization, simulation reports) speaks this vocabulary.
//!
//! Outcomes are stored as indices `0..outputs-1`. For two-outcome settings
//! the sign convention is fixed once and for all: index 0 maps to +1 and
//! index 1 maps to -1, so the correlator of a setting pair is
//! `E(x,y) = P(a=b|x,y) - P(a!=b|x,y)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack accepted on probability sums before a table is rejected.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Entries may undershoot zero or overshoot one by at most this much.
pub const ENTRY_BAND: f64 = 1e-12;

/// Sign of a two-outcome index: 0 -> +1, 1 -> -1.
#[inline]
pub fn outcome_sign(a: usize) -> f64 {
    if a == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Numbers of settings and outcomes on each side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    /// Alice's setting count.
    pub a_inputs: usize,
    /// Alice's outcome count per setting.
    pub a_outputs: usize,
    /// Bob's setting count.
    pub b_inputs: usize,
    /// Bob's outcome count per setting.
    pub b_outputs: usize,
}

impl Scenario {
    pub fn new(a_inputs: usize, a_outputs: usize, b_inputs: usize, b_outputs: usize) -> Result<Self> {
        if a_inputs == 0 || a_outputs == 0 || b_inputs == 0 || b_outputs == 0 {
            return Err(Error::ShapeMismatch(
                "scenario requires at least one setting and one outcome per side".into(),
            ));
        }
        let s = Scenario {
            a_inputs,
            a_outputs,
            b_inputs,
            b_outputs,
        };
        // The probability table must stay allocatable. Polytope routines
        // impose their own (much tighter) deterministic-count limits.
        a_inputs
            .checked_mul(b_inputs)
            .and_then(|v| v.checked_mul(a_outputs))
            .and_then(|v| v.checked_mul(b_outputs))
            .filter(|&v| v <= 1 << 24)
            .ok_or_else(|| Error::TooLarge("probability table too large".into()))?;
        Ok(s)
    }

    /// The standard two-setting, two-outcome scenario on both sides.
    pub fn chsh() -> Self {
        Scenario {
            a_inputs: 2,
            a_outputs: 2,
            b_inputs: 2,
            b_outputs: 2,
        }
    }

    /// `true` when both sides have exactly two outcomes.
    pub fn is_binary(&self) -> bool {
        self.a_outputs == 2 && self.b_outputs == 2
    }

    /// Number of table entries `P(a,b|x,y)`.
    pub fn table_len(&self) -> usize {
        self.a_inputs * self.b_inputs * self.a_outputs * self.b_outputs
    }

    /// Number of local deterministic strategies, `a_outputs^a_inputs * b_outputs^b_inputs`.
    pub fn deterministic_count(&self) -> Result<u64> {
        let pow = |base: usize, exp: usize| -> Option<u64> {
            let mut acc: u64 = 1;
            for _ in 0..exp {
                acc = acc.checked_mul(base as u64)?;
            }
            Some(acc)
        };
        let a = pow(self.a_outputs, self.a_inputs);
        let b = pow(self.b_outputs, self.b_inputs);
        match (a, b) {
            (Some(a), Some(b)) => a.checked_mul(b).ok_or_else(|| {
                Error::TooLarge("deterministic strategy count overflows u64".into())
            }),
            _ => Err(Error::TooLarge(
                "deterministic strategy count overflows u64".into(),
            )),
        }
    }

    /// Affine dimension of the no-signaling polytope:
    /// `Ma*Mb*(ma-1)*(mb-1) + Ma*(ma-1) + Mb*(mb-1)`.
    pub fn ns_dimension(&self) -> usize {
        let (ma, oa) = (self.a_inputs, self.a_outputs - 1);
        let (mb, ob) = (self.b_inputs, self.b_outputs - 1);
        ma * mb * oa * ob + ma * oa + mb * ob
    }

    #[inline]
    pub(crate) fn index(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        ((x * self.b_inputs + y) * self.a_outputs + a) * self.b_outputs + b
    }
}

/// Result of building a behavior from a raw table.
#[derive(Debug, Clone)]
pub struct TableBuild {
    pub behavior: Behavior,
    /// Largest deviation of any per-setting-pair sum from one, before renormalization.
    pub normalization_residual: f64,
}

/// Conditional distribution table `P(a,b|x,y)` over a [`Scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BehaviorRepr", into = "BehaviorRepr")]
pub struct Behavior {
    scenario: Scenario,
    table: Vec<f64>,
}

/// JSON shape: scenario plus nested `table[x][y][a][b]`.
#[derive(Serialize, Deserialize)]
struct BehaviorRepr {
    scenario: Scenario,
    table: Vec<Vec<Vec<Vec<f64>>>>,
}

impl From<Behavior> for BehaviorRepr {
    fn from(b: Behavior) -> Self {
        let s = b.scenario;
        let mut table = Vec::with_capacity(s.a_inputs);
        for x in 0..s.a_inputs {
            let mut per_y = Vec::with_capacity(s.b_inputs);
            for y in 0..s.b_inputs {
                let mut per_a = Vec::with_capacity(s.a_outputs);
                for a in 0..s.a_outputs {
                    let mut per_b = Vec::with_capacity(s.b_outputs);
                    for bb in 0..s.b_outputs {
                        per_b.push(b.p(x, y, a, bb));
                    }
                    per_a.push(per_b);
                }
                per_y.push(per_a);
            }
            table.push(per_y);
        }
        BehaviorRepr { scenario: s, table }
    }
}

impl TryFrom<BehaviorRepr> for Behavior {
    type Error = Error;

    fn try_from(r: BehaviorRepr) -> Result<Self> {
        let s = r.scenario;
        let mut flat = Vec::with_capacity(s.table_len());
        if r.table.len() != s.a_inputs {
            return Err(Error::ShapeMismatch("table has wrong x extent".into()));
        }
        for per_y in &r.table {
            if per_y.len() != s.b_inputs {
                return Err(Error::ShapeMismatch("table has wrong y extent".into()));
            }
            for per_a in per_y {
                if per_a.len() != s.a_outputs {
                    return Err(Error::ShapeMismatch("table has wrong a extent".into()));
                }
                for per_b in per_a {
                    if per_b.len() != s.b_outputs {
                        return Err(Error::ShapeMismatch("table has wrong b extent".into()));
                    }
                    flat.extend_from_slice(per_b);
                }
            }
        }
        Ok(Behavior::from_table(s, &flat)?.behavior)
    }
}

impl Behavior {
    /// Validates, clamps, and renormalizes a raw table.
    ///
    /// Entries must lie in `[-1e-12, 1 + 1e-12]` and each setting pair must
    /// sum to one within `1e-9`; tiny violations are clamped away and each
    /// pair is divided by its sum. The worst pre-normalization deviation is
    /// reported alongside the behavior.
    pub fn from_table(scenario: Scenario, raw: &[f64]) -> Result<TableBuild> {
        if raw.len() != scenario.table_len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries, got {}",
                scenario.table_len(),
                raw.len()
            )));
        }
        for (k, &v) in raw.iter().enumerate() {
            if !v.is_finite() || !(-ENTRY_BAND..=1.0 + ENTRY_BAND).contains(&v) {
                return Err(Error::NormalizationError(format!(
                    "entry {k} = {v} outside [0, 1] beyond tolerance"
                )));
            }
        }
        let mut table = raw.to_vec();
        for v in table.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        let mut residual: f64 = 0.0;
        let block = scenario.a_outputs * scenario.b_outputs;
        for chunk in table.chunks_mut(block) {
            let sum: f64 = chunk.iter().sum();
            residual = residual.max((sum - 1.0).abs());
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::NormalizationError(format!(
                    "setting-pair sum {sum} deviates from 1 beyond tolerance"
                )));
            }
            // Leave already-normalized blocks untouched so that
            // serialize/deserialize round-trips are bit-stable.
            if (sum - 1.0).abs() > 16.0 * f64::EPSILON {
                for v in chunk.iter_mut() {
                    *v /= sum;
                }
            }
        }
        Ok(TableBuild {
            behavior: Behavior { scenario, table },
            normalization_residual: residual,
        })
    }

    /// [`Behavior::from_table`] without the residual report.
    pub fn normalized(scenario: Scenario, raw: &[f64]) -> Result<Behavior> {
        Ok(Self::from_table(scenario, raw)?.behavior)
    }

    /// Builds the table entrywise from a closure `(x, y, a, b) -> P`.
    pub fn from_fn(
        scenario: Scenario,
        f: impl Fn(usize, usize, usize, usize) -> f64,
    ) -> Result<Behavior> {
        let mut raw = vec![0.0; scenario.table_len()];
        for x in 0..scenario.a_inputs {
            for y in 0..scenario.b_inputs {
                for a in 0..scenario.a_outputs {
                    for b in 0..scenario.b_outputs {
                        raw[scenario.index(x, y, a, b)] = f(x, y, a, b);
                    }
                }
            }
        }
        Self::normalized(scenario, &raw)
    }

    /// Unbiased-marginal behavior with prescribed two-outcome correlators:
    /// `P(a,b|x,y) = (1 + sign(a) sign(b) E(x,y)) / 4`.
    pub fn from_correlators(c: &CorrelatorVector) -> Result<Behavior> {
        let scenario = Scenario::new(c.a_inputs, 2, c.b_inputs, 2)?;
        Self::from_fn(scenario, |x, y, a, b| {
            0.25 * (1.0 + outcome_sign(a) * outcome_sign(b) * c.value(x, y))
        })
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    /// `P(a,b|x,y)`.
    #[inline]
    pub fn p(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.table[self.scenario.index(x, y, a, b)]
    }

    /// Flat table in `(x, y, a, b)` row-major order.
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Alice's marginal `P(a|x)` computed from the `y`-th column.
    pub fn marginal_a(&self, x: usize, a: usize, y: usize) -> f64 {
        (0..self.scenario.b_outputs).map(|b| self.p(x, y, a, b)).sum()
    }

    /// Bob's marginal `P(b|y)` computed from the `x`-th row.
    pub fn marginal_b(&self, y: usize, b: usize, x: usize) -> f64 {
        (0..self.scenario.a_outputs).map(|a| self.p(x, y, a, b)).sum()
    }

    /// Largest marginal discrepancy across the other side's settings.
    ///
    /// Zero (up to noise) exactly when the behavior is no-signaling: neither
    /// party's marginal distribution may depend on the remote setting.
    pub fn no_signaling_residual(&self) -> f64 {
        let s = self.scenario;
        let mut worst: f64 = 0.0;
        for x in 0..s.a_inputs {
            for a in 0..s.a_outputs {
                for y1 in 0..s.b_inputs {
                    for y2 in (y1 + 1)..s.b_inputs {
                        let d = (self.marginal_a(x, a, y1) - self.marginal_a(x, a, y2)).abs();
                        worst = worst.max(d);
                    }
                }
            }
        }
        for y in 0..s.b_inputs {
            for b in 0..s.b_outputs {
                for x1 in 0..s.a_inputs {
                    for x2 in (x1 + 1)..s.a_inputs {
                        let d = (self.marginal_b(y, b, x1) - self.marginal_b(y, b, x2)).abs();
                        worst = worst.max(d);
                    }
                }
            }
        }
        worst
    }

    /// Correlators for every setting pair; requires binary outcomes.
    pub fn correlators(&self) -> Result<CorrelatorVector> {
        let s = self.scenario;
        if !s.is_binary() {
            return Err(Error::NonBinaryOutcomes(
                "correlators are defined for two-outcome settings only".into(),
            ));
        }
        let mut values = Vec::with_capacity(s.a_inputs * s.b_inputs);
        for x in 0..s.a_inputs {
            for y in 0..s.b_inputs {
                values.push(self.p(x, y, 0, 0) + self.p(x, y, 1, 1) - self.p(x, y, 0, 1) - self.p(x, y, 1, 0));
            }
        }
        CorrelatorVector::new(s.a_inputs, s.b_inputs, values)
    }

    /// Convex mixture of behaviors over a common scenario.
    ///
    /// Weights must be nonnegative and sum to one within 1e-9.
    pub fn mix(parts: &[(f64, &Behavior)]) -> Result<Behavior> {
        let Some(((_, first), rest)) = parts.split_first() else {
            return Err(Error::ShapeMismatch("mixture of zero behaviors".into()));
        };
        let s = first.scenario;
        let mut total = 0.0;
        let mut table = vec![0.0; s.table_len()];
        for &(w, b) in parts {
            if b.scenario != s {
                return Err(Error::ShapeMismatch(
                    "mixture components live on different scenarios".into(),
                ));
            }
            if w < -1e-12 {
                return Err(Error::NegativeWeight(format!("mixture weight {w}")));
            }
            total += w;
            for (t, v) in table.iter_mut().zip(b.table.iter()) {
                *t += w * v;
            }
        }
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NormalizationError(format!(
                "mixture weights sum to {total}"
            )));
        }
        let _ = rest;
        Behavior::normalized(s, &table)
    }
}

/// Two-outcome correlators `E(x,y)`, stored row-major in `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorVector {
    pub a_inputs: usize,
    pub b_inputs: usize,
    values: Vec<f64>,
}

impl CorrelatorVector {
    pub fn new(a_inputs: usize, b_inputs: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != a_inputs * b_inputs {
            return Err(Error::ShapeMismatch(format!(
                "expected {} correlators, got {}",
                a_inputs * b_inputs,
                values.len()
            )));
        }
        for &v in &values {
            if !v.is_finite() || v.abs() > 1.0 + ENTRY_BAND {
                return Err(Error::ShapeMismatch(format!(
                    "correlator {v} outside [-1, 1]"
                )));
            }
        }
        Ok(CorrelatorVector {
            a_inputs,
            b_inputs,
            values,
        })
    }

    #[inline]
    pub fn value(&self, x: usize, y: usize) -> f64 {
        self.values[x * self.b_inputs + y]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// CHSH combination `E(0,0) + E(0,1) + E(1,0) - E(1,1)`; requires 2x2 settings.
    pub fn chsh(&self) -> Result<f64> {
        if self.a_inputs != 2 || self.b_inputs != 2 {
            return Err(Error::WrongScenario(format!(
                "CHSH needs 2x2 settings, got {}x{}",
                self.a_inputs, self.b_inputs
            )));
        }
        Ok(self.value(0, 0) + self.value(0, 1) + self.value(1, 0) - self.value(1, 1))
    }
}

/// CHSH value of a binary behavior.
pub fn chsh_value(b: &Behavior) -> Result<f64> {
    b.correlators()?.chsh()
}

/// Which space a Bell functional's coefficients act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityForm {
    /// Coefficients over the full probability table, row-major `(x,y,a,b)`.
    Probability,
    /// Coefficients over the correlator vector, row-major `(x,y)`.
    Correlator,
}

/// Linear functional with a local (deterministic) bound and an algebraic bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellInequality {
    pub form: InequalityForm,
    pub coefficients: Vec<f64>,
    /// Maximum over local deterministic strategies.
    pub local_bound: f64,
    /// Maximum over all tables of the right shape, ignoring any physics.
    pub algebraic_bound: f64,
}

/// Evaluates `ineq` on `b`, checking that shapes line up.
pub fn bell_value(ineq: &BellInequality, b: &Behavior) -> Result<f64> {
    match ineq.form {
        InequalityForm::Probability => {
            if ineq.coefficients.len() != b.scenario().table_len() {
                return Err(Error::ShapeMismatch(format!(
                    "inequality has {} coefficients, behavior table has {} entries",
                    ineq.coefficients.len(),
                    b.scenario().table_len()
                )));
            }
            Ok(ineq
                .coefficients
                .iter()
                .zip(b.table().iter())
                .map(|(c, p)| c * p)
                .sum())
        }
        InequalityForm::Correlator => {
            let c = b.correlators()?;
            if ineq.coefficients.len() != c.values().len() {
                return Err(Error::ShapeMismatch(format!(
                    "inequality has {} coefficients, behavior has {} correlators",
                    ineq.coefficients.len(),
                    c.values().len()
                )));
            }
            Ok(ineq
                .coefficients
                .iter()
                .zip(c.values().iter())
                .map(|(c, e)| c * e)
                .sum())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn uniform(s: Scenario) -> Behavior {
        let p = 1.0 / (s.a_outputs * s.b_outputs) as f64;
        Behavior::from_fn(s, |_, _, _, _| p).unwrap()
    }

    /// Singlet-statistics table at two settings per side.
    fn singlet_like(alice: [[f64; 3]; 2], bob: [[f64; 3]; 2]) -> Behavior {
        Behavior::from_fn(Scenario::chsh(), |x, y, a, b| {
            let dot: f64 = (0..3).map(|k| alice[x][k] * bob[y][k]).sum();
            0.25 * (1.0 - outcome_sign(a) * outcome_sign(b) * dot)
        })
        .unwrap()
    }

    #[test]
    fn uniform_table_is_valid_and_uncorrelated() {
        let b = uniform(Scenario::chsh());
        assert_eq!(b.no_signaling_residual(), 0.0);
        for e in b.correlators().unwrap().values() {
            assert_relative_eq!(*e, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn under_normalized_table_rejected() {
        let s = Scenario::chsh();
        let raw = vec![0.9 / 4.0; s.table_len()];
        let err = Behavior::from_table(s, &raw).unwrap_err();
        assert_eq!(err.kind(), "normalization_error");
    }

    #[test]
    fn near_normalized_table_accepted_with_residual() {
        let s = Scenario::new(1, 2, 1, 2).unwrap();
        let raw = vec![0.25 + 2e-10, 0.25, 0.25, 0.25];
        let build = Behavior::from_table(s, &raw).unwrap();
        assert!(build.normalization_residual > 1e-10);
        let sum: f64 = build.behavior.table().iter().sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn negative_entry_rejected() {
        let s = Scenario::new(1, 2, 1, 2).unwrap();
        let raw = vec![-0.01, 0.51, 0.25, 0.25];
        assert!(Behavior::from_table(s, &raw).is_err());
    }

    #[test]
    fn singlet_table_is_no_signaling_with_expected_correlators() {
        let inv = 1.0 / 2.0_f64.sqrt();
        let alice = [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        let bob = [[-inv, 0.0, -inv], [inv, 0.0, -inv]];
        let b = singlet_like(alice, bob);
        assert!(b.no_signaling_residual() < 1e-15);
        let c = b.correlators().unwrap();
        assert_relative_eq!(c.value(0, 0), inv, epsilon = 1e-12);
        assert_relative_eq!(c.value(1, 1), -inv, epsilon = 1e-12);
        assert_relative_eq!(c.chsh().unwrap(), 2.0 * 2.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn one_sided_deterministic_signaling_detected() {
        // Bob's outcome tracks Alice's setting: maximal signaling.
        let s = Scenario::chsh();
        let b = Behavior::from_fn(s, |x, _y, a, bb| {
            let want_b = x;
            if a == 0 && bb == want_b {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        assert_relative_eq!(b.no_signaling_residual(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn chsh_of_prescribed_correlators() {
        let c = CorrelatorVector::new(2, 2, vec![1.0, 1.0, 1.0, -1.0]).unwrap();
        assert_relative_eq!(c.chsh().unwrap(), 4.0, epsilon = 1e-15);
        let c = CorrelatorVector::new(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(c.chsh().unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn chsh_requires_two_by_two() {
        let c = CorrelatorVector::new(3, 2, vec![0.0; 6]).unwrap();
        assert_eq!(c.chsh().unwrap_err().kind(), "wrong_scenario");
    }

    #[test]
    fn correlators_require_binary_outcomes() {
        let s = Scenario::new(2, 3, 2, 2).unwrap();
        let b = uniform(s);
        assert_eq!(b.correlators().unwrap_err().kind(), "non_binary_outcomes");
    }

    #[test]
    fn ns_dimension_examples() {
        assert_eq!(Scenario::chsh().ns_dimension(), 8);
        assert_eq!(Scenario::new(1, 2, 1, 2).unwrap().ns_dimension(), 3);
        assert_eq!(Scenario::new(3, 2, 3, 2).unwrap().ns_dimension(), 15);
    }

    #[test]
    fn correlator_round_trip_is_identity() {
        let c = CorrelatorVector::new(2, 2, vec![0.3, -0.7, 0.12, 0.99]).unwrap();
        let b = Behavior::from_correlators(&c).unwrap();
        let back = b.correlators().unwrap();
        for (u, v) in c.values().iter().zip(back.values()) {
            assert_relative_eq!(u, v, epsilon = 1e-12);
        }
        // Marginals are unbiased by construction.
        assert_relative_eq!(b.marginal_a(0, 0, 0), 0.5, epsilon = 1e-12);
        assert_relative_eq!(b.marginal_b(1, 1, 1), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn bell_value_probability_form_matches_correlator_form() {
        let inv = 1.0 / 2.0_f64.sqrt();
        let alice = [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        let bob = [[-inv, 0.0, -inv], [inv, 0.0, -inv]];
        let b = singlet_like(alice, bob);
        let corr = BellInequality {
            form: InequalityForm::Correlator,
            coefficients: vec![1.0, 1.0, 1.0, -1.0],
            local_bound: 2.0,
            algebraic_bound: 4.0,
        };
        // Same functional written over probabilities.
        let signs = [1.0, 1.0, 1.0, -1.0];
        let s = Scenario::chsh();
        let mut coeff = vec![0.0; s.table_len()];
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for bb in 0..2 {
                        coeff[s.index(x, y, a, bb)] =
                            signs[x * 2 + y] * outcome_sign(a) * outcome_sign(bb);
                    }
                }
            }
        }
        let prob = BellInequality {
            form: InequalityForm::Probability,
            coefficients: coeff,
            local_bound: 2.0,
            algebraic_bound: 4.0,
        };
        let v1 = bell_value(&corr, &b).unwrap();
        let v2 = bell_value(&prob, &b).unwrap();
        assert_relative_eq!(v1, v2, epsilon = 1e-12);
        assert_relative_eq!(v1, 2.0 * 2.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn bell_value_shape_mismatch() {
        let b = uniform(Scenario::chsh());
        let ineq = BellInequality {
            form: InequalityForm::Probability,
            coefficients: vec![1.0; 3],
            local_bound: 1.0,
            algebraic_bound: 1.0,
        };
        assert_eq!(bell_value(&ineq, &b).unwrap_err().kind(), "shape_mismatch");
    }

    proptest! {
        /// CHSH is linear: the value of a mixture is the mixture of values.
        #[test]
        fn chsh_linear_under_mixing(
            e1 in proptest::collection::vec(-1.0..1.0f64, 4),
            e2 in proptest::collection::vec(-1.0..1.0f64, 4),
            w in 0.0..1.0f64,
        ) {
            let c1 = CorrelatorVector::new(2, 2, e1).unwrap();
            let c2 = CorrelatorVector::new(2, 2, e2).unwrap();
            let b1 = Behavior::from_correlators(&c1).unwrap();
            let b2 = Behavior::from_correlators(&c2).unwrap();
            let mixed = Behavior::mix(&[(w, &b1), (1.0 - w, &b2)]).unwrap();
            let lhs = chsh_value(&mixed).unwrap();
            let rhs = w * chsh_value(&b1).unwrap() + (1.0 - w) * chsh_value(&b2).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        /// Serialization round-trips bit-for-bit.
        #[test]
        fn serde_round_trip(raw in proptest::collection::vec(0.01..1.0f64, 16)) {
            let s = Scenario::chsh();
            // Normalize each block so the table is valid.
            let mut t = raw;
            for chunk in t.chunks_mut(4) {
                let sum: f64 = chunk.iter().sum();
                for v in chunk.iter_mut() { *v /= sum; }
            }
            let b = Behavior::normalized(s, &t).unwrap();
            let json = serde_json::to_string(&b).unwrap();
            let back: Behavior = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(b.table(), back.table());
        }
    }
}
