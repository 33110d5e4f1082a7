//! Device-independent certification of states and measurements.
//!
//! Given a bipartite state and two dichotomic observables per side whose
//! correlations look maximally entangled, a local isometry — built from the
//! uncharacterized observables themselves — extracts a maximally entangled
//! qubit pair onto fresh ancillas, up to local "junk" degrees of freedom.
//! This module checks the defining correlation conditions, runs the
//! extraction circuit, and constructs the reference direct-sum-of-singlets
//! instances the exact theory predicts.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityMatrix, DichotomicObservable};

/// Largest per-side dimension accepted by the extraction circuit.
pub const MAX_SIDE_DIM: usize = 8;

/// A self-testing scenario: a shared pure state and two (optionally three)
/// binary observables per side, all uncharacterized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRepr", into = "InstanceRepr")]
pub struct SelfTestInstance {
    psi: Vec<Complex64>,
    dim_a: usize,
    dim_b: usize,
    za: DichotomicObservable,
    xa: DichotomicObservable,
    zb: DichotomicObservable,
    xb: DichotomicObservable,
    db: Option<DichotomicObservable>,
}

#[derive(Serialize, Deserialize)]
struct InstanceRepr {
    psi: Vec<[f64; 2]>,
    dim_a: usize,
    dim_b: usize,
    za: DichotomicObservable,
    xa: DichotomicObservable,
    zb: DichotomicObservable,
    xb: DichotomicObservable,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    db: Option<DichotomicObservable>,
}

impl From<SelfTestInstance> for InstanceRepr {
    fn from(inst: SelfTestInstance) -> Self {
        InstanceRepr {
            psi: inst.psi.iter().map(|z| [z.re, z.im]).collect(),
            dim_a: inst.dim_a,
            dim_b: inst.dim_b,
            za: inst.za,
            xa: inst.xa,
            zb: inst.zb,
            xb: inst.xb,
            db: inst.db,
        }
    }
}

impl TryFrom<InstanceRepr> for SelfTestInstance {
    type Error = Error;

    fn try_from(r: InstanceRepr) -> Result<Self> {
        let psi = r.psi.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        SelfTestInstance::new(psi, r.dim_a, r.dim_b, r.za, r.xa, r.zb, r.xb, r.db)
    }
}

impl SelfTestInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        psi: Vec<Complex64>,
        dim_a: usize,
        dim_b: usize,
        za: DichotomicObservable,
        xa: DichotomicObservable,
        zb: DichotomicObservable,
        xb: DichotomicObservable,
        db: Option<DichotomicObservable>,
    ) -> Result<Self> {
        if dim_a < 2 || dim_b < 2 || dim_a > MAX_SIDE_DIM || dim_b > MAX_SIDE_DIM {
            return Err(Error::TooLarge(format!(
                "side dimensions {dim_a}x{dim_b} outside 2..={MAX_SIDE_DIM}"
            )));
        }
        if psi.len() != dim_a * dim_b {
            return Err(Error::DimensionMismatch(format!(
                "state has {} amplitudes for a {}x{} system",
                psi.len(),
                dim_a,
                dim_b
            )));
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::BadNormalization(format!(
                "state norm {norm} differs from 1"
            )));
        }
        for (name, op, want) in [
            ("za", &za, dim_a),
            ("xa", &xa, dim_a),
            ("zb", &zb, dim_b),
            ("xb", &xb, dim_b),
        ] {
            if op.dim() != want {
                return Err(Error::DimensionMismatch(format!(
                    "{name} acts on dimension {} but the side has {want}",
                    op.dim()
                )));
            }
        }
        if let Some(d) = &db {
            if d.dim() != dim_b {
                return Err(Error::DimensionMismatch(format!(
                    "db acts on dimension {} but the side has {dim_b}",
                    d.dim()
                )));
            }
        }
        Ok(SelfTestInstance {
            psi,
            dim_a,
            dim_b,
            za,
            xa,
            zb,
            xb,
            db,
        })
    }

    pub fn psi(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dim_a, self.dim_b)
    }

    pub fn za(&self) -> &DichotomicObservable {
        &self.za
    }

    pub fn xa(&self) -> &DichotomicObservable {
        &self.xa
    }

    pub fn zb(&self) -> &DichotomicObservable {
        &self.zb
    }

    pub fn xb(&self) -> &DichotomicObservable {
        &self.xb
    }

    pub fn db(&self) -> Option<&DichotomicObservable> {
        self.db.as_ref()
    }

    /// `(M tensor N) psi` for per-side operators (identity when `None`).
    fn apply_pair(
        &self,
        ma: Option<&ComplexMatrix>,
        nb: Option<&ComplexMatrix>,
    ) -> Vec<Complex64> {
        let (da, db) = (self.dim_a, self.dim_b);
        let mut out = self.psi.clone();
        if let Some(m) = ma {
            let prev = out.clone();
            for ib in 0..db {
                for ia in 0..da {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for ja in 0..da {
                        acc += m.get(ia, ja) * prev[ja * db + ib];
                    }
                    out[ia * db + ib] = acc;
                }
            }
        }
        if let Some(n) = nb {
            let prev = out.clone();
            for ia in 0..da {
                for ib in 0..db {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for jb in 0..db {
                        acc += n.get(ib, jb) * prev[ia * db + jb];
                    }
                    out[ia * db + ib] = acc;
                }
            }
        }
        out
    }

    /// `<psi| (M tensor N) |psi>`.
    fn pair_expectation(&self, ma: &ComplexMatrix, nb: &ComplexMatrix) -> Complex64 {
        let applied = self.apply_pair(Some(ma), Some(nb));
        self.psi
            .iter()
            .zip(&applied)
            .map(|(p, q)| p.conj() * q)
            .sum()
    }
}

/// Deviations of an instance's correlations from the maximally entangled
/// reference values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MayersYaoResiduals {
    /// How far `<Za Zb>` and `<Xa Xb>` are from 1.
    pub r1: f64,
    /// How large the cross terms `<Xa Zb>`, `<Za Xb>` are.
    pub r2: f64,
    /// How far `<Za Db>` and `<Xa Db>` are from `1/sqrt 2`.
    pub r3: f64,
}

/// Correlation conditions that certify a maximally entangled pair: parallel
/// observables fully correlated, crossed ones uncorrelated, and the
/// diagonal third observable halfway between. All three residuals vanishing
/// forces the extraction below to succeed perfectly.
pub fn mayers_yao_residuals(inst: &SelfTestInstance) -> Result<MayersYaoResiduals> {
    let db = inst
        .db()
        .ok_or_else(|| Error::MissingDb("the diagonal observable db is required".into()))?;
    let e = |m: &DichotomicObservable, n: &DichotomicObservable| {
        inst.pair_expectation(m.matrix(), n.matrix()).re
    };
    let r1 = (e(inst.za(), inst.zb()) - 1.0)
        .abs()
        .max((e(inst.xa(), inst.xb()) - 1.0).abs());
    let r2 = e(inst.xa(), inst.zb())
        .abs()
        .max(e(inst.za(), inst.xb()).abs());
    let r3 = (e(inst.za(), db) - FRAC_1_SQRT_2)
        .abs()
        .max((e(inst.xa(), db) - FRAC_1_SQRT_2).abs());
    Ok(MayersYaoResiduals { r1, r2, r3 })
}

/// Which certified operator to apply before extraction, per side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeOperator {
    Identity,
    /// The side's `z`-type observable, expected to extract as `sigma_z`.
    Z,
    /// The side's `x`-type observable, expected to extract as `sigma_x`.
    X,
}

/// What the extraction circuit produced on the ancilla pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    /// Reduced two-qubit state of the output ancillas.
    pub reduced: DensityMatrix,
    /// Overlap with the expected maximally entangled target (rotated by
    /// reference Paulis when probe operators were applied).
    pub fidelity_phi_plus: f64,
    /// Norm of the source-side state conditioned on the target; equals
    /// `sqrt(fidelity)` and measures how much weight the junk state carries.
    pub junk_norm: f64,
}

/// 2x2 reference Pauli for a probe choice.
fn reference_pauli(p: ProbeOperator) -> [[Complex64; 2]; 2] {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    match p {
        ProbeOperator::Identity => [[one, zero], [zero, one]],
        ProbeOperator::Z => [[one, zero], [zero, -one]],
        ProbeOperator::X => [[zero, one], [one, zero]],
    }
}

/// Joint index into the circuit space, ordered ancilla-A, system-A,
/// system-B, ancilla-B.
fn joint(ap: usize, ia: usize, ib: usize, bp: usize, da: usize, db: usize) -> usize {
    ((ap * da + ia) * db + ib) * 2 + bp
}

/// Hadamard on one ancilla (0 = Alice's, 1 = Bob's).
fn hadamard(state: &mut [Complex64], ancilla: usize, da: usize, db: usize) {
    let h = FRAC_1_SQRT_2;
    for ia in 0..da {
        for ib in 0..db {
            for other in 0..2 {
                let (i0, i1) = if ancilla == 0 {
                    (joint(0, ia, ib, other, da, db), joint(1, ia, ib, other, da, db))
                } else {
                    (joint(other, ia, ib, 0, da, db), joint(other, ia, ib, 1, da, db))
                };
                let (v0, v1) = (state[i0], state[i1]);
                state[i0] = (v0 + v1) * h;
                state[i1] = (v0 - v1) * h;
            }
        }
    }
}

/// Applies `m` to one side's system register on the amplitudes whose
/// controlling ancilla is `|1>`.
fn controlled_apply(
    state: &mut [Complex64],
    side_a: bool,
    m: &ComplexMatrix,
    da: usize,
    db: usize,
) {
    if side_a {
        let mut column = vec![Complex64::new(0.0, 0.0); da];
        for ib in 0..db {
            for bp in 0..2 {
                for (ja, slot) in column.iter_mut().enumerate() {
                    *slot = state[joint(1, ja, ib, bp, da, db)];
                }
                for ia in 0..da {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (ja, &v) in column.iter().enumerate() {
                        acc += m.get(ia, ja) * v;
                    }
                    state[joint(1, ia, ib, bp, da, db)] = acc;
                }
            }
        }
    } else {
        let mut column = vec![Complex64::new(0.0, 0.0); db];
        for ia in 0..da {
            for ap in 0..2 {
                for (jb, slot) in column.iter_mut().enumerate() {
                    *slot = state[joint(ap, ia, jb, 1, da, db)];
                }
                for ib in 0..db {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (jb, &v) in column.iter().enumerate() {
                        acc += m.get(ib, jb) * v;
                    }
                    state[joint(ap, ia, ib, 1, da, db)] = acc;
                }
            }
        }
    }
}

/// Runs the local extraction circuit: each side adjoins a `|0>` ancilla and
/// applies Hadamard, controlled-Z-observable, Hadamard, then
/// controlled-X-observable (the controlled gates act on the system when the
/// ancilla is `|1>`). With probe operators, the corresponding certified
/// observables hit the state first and the fidelity target is rotated by
/// the matching reference Paulis — a perfect instance therefore reports
/// fidelity 1 for all probe combinations.
pub fn swap_isometry(
    inst: &SelfTestInstance,
    probe: Option<(ProbeOperator, ProbeOperator)>,
) -> Result<ExtractionResult> {
    let (da, db) = inst.dims();
    let (pa, pb) = probe.unwrap_or((ProbeOperator::Identity, ProbeOperator::Identity));
    let side = |p: ProbeOperator, z: &DichotomicObservable, x: &DichotomicObservable| match p {
        ProbeOperator::Identity => None,
        ProbeOperator::Z => Some(z.matrix().clone()),
        ProbeOperator::X => Some(x.matrix().clone()),
    };
    let ma = side(pa, inst.za(), inst.xa());
    let nb = side(pb, inst.zb(), inst.xb());
    let probed = inst.apply_pair(ma.as_ref(), nb.as_ref());

    // |0>_{A'} psi |0>_{B'}.
    let mut state = vec![Complex64::new(0.0, 0.0); 4 * da * db];
    for ia in 0..da {
        for ib in 0..db {
            state[joint(0, ia, ib, 0, da, db)] = probed[ia * db + ib];
        }
    }
    for (side_a, z, x) in [(true, inst.za(), inst.xa()), (false, inst.zb(), inst.xb())] {
        let ancilla = usize::from(!side_a);
        hadamard(&mut state, ancilla, da, db);
        controlled_apply(&mut state, side_a, z.matrix(), da, db);
        hadamard(&mut state, ancilla, da, db);
        controlled_apply(&mut state, side_a, x.matrix(), da, db);
    }

    // Target on the ancillas: (sigma_pa tensor sigma_pb) |Phi+>.
    let ra = reference_pauli(pa);
    let rb = reference_pauli(pb);
    let mut target = [Complex64::new(0.0, 0.0); 4];
    for ap in 0..2 {
        for bp in 0..2 {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..2 {
                acc += ra[ap][k] * rb[bp][k] * FRAC_1_SQRT_2;
            }
            target[ap * 2 + bp] = acc;
        }
    }

    // Reduced ancilla state and the conditioned source-side vector.
    let mut reduced = ComplexMatrix::zeros(4, 4);
    let mut junk_sq = 0.0;
    for ia in 0..da {
        for ib in 0..db {
            let mut amp = [Complex64::new(0.0, 0.0); 4];
            for ap in 0..2 {
                for bp in 0..2 {
                    amp[ap * 2 + bp] = state[joint(ap, ia, ib, bp, da, db)];
                }
            }
            for r in 0..4 {
                for c in 0..4 {
                    let add = amp[r] * amp[c].conj();
                    reduced.set(r, c, reduced.get(r, c) + add);
                }
            }
            let proj: Complex64 = target
                .iter()
                .zip(&amp)
                .map(|(t, a)| t.conj() * a)
                .sum();
            junk_sq += proj.norm_sqr();
        }
    }
    let mut fidelity = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            fidelity += (target[r].conj() * reduced.get(r, c) * target[c]).re;
        }
    }
    Ok(ExtractionResult {
        reduced: DensityMatrix::from_matrix_tol(reduced, 1e-9)?,
        fidelity_phi_plus: fidelity.clamp(0.0, 1.0),
        junk_norm: junk_sq.max(0.0).sqrt(),
    })
}

/// Reference instance: a direct sum of maximally entangled pairs,
/// `sum_k c_k (|2k,2k> + |2k+1,2k+1>)/sqrt 2`, with block-Pauli observables
/// (`Z` diagonal, `X` the in-block swap, `D = (Z+X)/sqrt 2`). This is the
/// exact form every state passing the correlation conditions must take, up
/// to local unitaries.
pub fn direct_sum_singlet_state(c: &[f64]) -> Result<SelfTestInstance> {
    if c.is_empty() || c.len() > MAX_SIDE_DIM / 2 {
        return Err(Error::TooLarge(format!(
            "need 1..={} block amplitudes, got {}",
            MAX_SIDE_DIM / 2,
            c.len()
        )));
    }
    let sum_sq: f64 = c.iter().map(|v| v * v).sum();
    if (sum_sq - 1.0).abs() > 1e-10 {
        return Err(Error::BadNormalization(format!(
            "block amplitudes have squared sum {sum_sq}"
        )));
    }
    let dim = 2 * c.len();
    let mut psi = vec![Complex64::new(0.0, 0.0); dim * dim];
    for (k, &ck) in c.iter().enumerate() {
        let amp = Complex64::new(ck * FRAC_1_SQRT_2, 0.0);
        psi[(2 * k) * dim + 2 * k] = amp;
        psi[(2 * k + 1) * dim + (2 * k + 1)] = amp;
    }
    let z = ComplexMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let x = ComplexMatrix::from_fn(dim, dim, |i, j| {
        if i / 2 == j / 2 && i != j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let d = z
        .add(&x)
        .scale(Complex64::new(FRAC_1_SQRT_2, 0.0));
    let za = DichotomicObservable::from_matrix(z.clone())?;
    let xa = DichotomicObservable::from_matrix(x.clone())?;
    let zb = DichotomicObservable::from_matrix(z)?;
    let xb = DichotomicObservable::from_matrix(x)?;
    let db = DichotomicObservable::from_matrix(d)?;
    SelfTestInstance::new(psi, dim, dim, za, xa, zb, xb, Some(db))
}

/// A CHSH score next to the extraction fidelity it certifies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshProbe {
    pub s_value: f64,
    pub fidelity: f64,
}

/// Evaluates the instance's CHSH value — Alice measuring `za`, `xa`, Bob
/// the diagonal combinations `(zb +- xb)/sqrt 2` — next to the extraction
/// fidelity. Reported as data: a maximal score certifies fidelity 1, and
/// the pair lets noisy instances be studied empirically.
pub fn chsh_self_test_probe(inst: &SelfTestInstance) -> Result<ChshProbe> {
    let e = |m: &DichotomicObservable, n: &DichotomicObservable| {
        inst.pair_expectation(m.matrix(), n.matrix()).re
    };
    // With B0,1 = (zb +- xb)/sqrt 2 the four-term combination collapses.
    let s = std::f64::consts::SQRT_2 * (e(inst.za(), inst.zb()) + e(inst.xa(), inst.xb()));
    let extraction = swap_isometry(inst, None)?;
    Ok(ChshProbe {
        s_value: s,
        fidelity: extraction.fidelity_phi_plus,
    })
}
