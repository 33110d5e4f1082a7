//! Dense complex linear algebra for small quantum systems.
//!
//! Everything here is sized for Bell-test computations: matrices are capped
//! at dimension 64 (the largest operator the crate ever builds is an 8x8
//! tensor 8x8 CHSH operator). Eigenproblems are solved by cyclic Jacobi
//! sweeps on a real-symmetric form; Hermitian matrices go through the
//! standard 2n x 2n real embedding, and unitaries are diagonalized by
//! splitting into commuting Hermitian and anti-Hermitian parts.
//!
//! The module also carries the quantum objects built on top: density
//! matrices, +-1-valued (dichotomic) observables, Born-rule behavior tables,
//! two-qubit Bloch/correlation decompositions, partial trace and transpose,
//! and the decomposition of two dichotomic observables into simultaneous
//! blocks of dimension at most two.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{Behavior, Scenario};
use crate::vec3::{Mat3, Vec3};

/// Hard cap on matrix dimension; everything in this crate is tiny.
pub const MAX_DIM: usize = 64;
/// Hermiticity slack for density matrices.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Observables must square to the identity within this entrywise bound.
pub const DICHOTOMIC_TOL: f64 = 1e-9;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Dense complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrixRepr", into = "ComplexMatrixRepr")]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

/// JSON shape: nested rows of `[re, im]` pairs.
#[derive(Serialize, Deserialize)]
struct ComplexMatrixRepr {
    entries: Vec<Vec<[f64; 2]>>,
}

impl From<ComplexMatrix> for ComplexMatrixRepr {
    fn from(m: ComplexMatrix) -> Self {
        let entries = (0..m.rows)
            .map(|i| (0..m.cols).map(|j| [m.get(i, j).re, m.get(i, j).im]).collect())
            .collect();
        ComplexMatrixRepr { entries }
    }
}

impl TryFrom<ComplexMatrixRepr> for ComplexMatrix {
    type Error = Error;

    fn try_from(r: ComplexMatrixRepr) -> Result<Self> {
        let rows = r.entries.len();
        let cols = r.entries.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 || rows > MAX_DIM || cols > MAX_DIM {
            return Err(Error::ShapeMismatch(format!(
                "matrix shape {rows}x{cols} outside 1..={MAX_DIM}"
            )));
        }
        if r.entries.iter().any(|row| row.len() != cols) {
            return Err(Error::ShapeMismatch("ragged matrix rows".into()));
        }
        let data = r
            .entries
            .iter()
            .flatten()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        Ok(ComplexMatrix { rows, cols, data })
    }
}

impl ComplexMatrix {
    /// All-zero matrix. Panics beyond [`MAX_DIM`]; public operations validate
    /// their dimensions before constructing anything this large.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(
            rows >= 1 && cols >= 1 && rows <= MAX_DIM && cols <= MAX_DIM,
            "matrix shape {rows}x{cols} outside 1..={MAX_DIM}"
        );
        ComplexMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, ONE);
        }
        m
    }

    /// Builds entrywise from a closure over `(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn add(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        ComplexMatrix { data, ..*self }
    }

    pub fn sub(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        ComplexMatrix { data, ..*self }
    }

    pub fn scale(&self, s: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            data: self.data.iter().map(|a| a * s).collect(),
            ..*self
        }
    }

    pub fn mul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik != ZERO {
                    for j in 0..other.cols {
                        let v = out.get(i, j) + aik * other.get(k, j);
                        out.set(i, j, v);
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "matrix-vector shapes must agree");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn trace(&self) -> Complex64 {
        assert_eq!(self.rows, self.cols, "trace needs a square matrix");
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    /// Kronecker (tensor) product; the result must stay within [`MAX_DIM`].
    pub fn kron(&self, other: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a == ZERO {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.set(i * other.rows + k, j * other.cols + l, a * other.get(k, l));
                    }
                }
            }
        }
        out
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.rows == self.cols && self.sub(&self.dagger()).max_abs() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.rows == self.cols
            && self
                .dagger()
                .mul(self)
                .sub(&ComplexMatrix::identity(self.rows))
                .max_abs()
                <= tol
    }

    /// Positive semidefinite within `tol` (checked on the Hermitian part).
    pub fn is_psd(&self, tol: f64) -> bool {
        self.rows == self.cols
            && self.is_hermitian(tol.max(1e-9))
            && herm_eigen(self)
                .map(|pairs| pairs.first().map_or(true, |(lo, _)| *lo >= -tol))
                .unwrap_or(false)
    }
}

/// The Pauli matrices (x, y, z).
pub fn pauli() -> [ComplexMatrix; 3] {
    let i = Complex64::new(0.0, 1.0);
    let mut sx = ComplexMatrix::zeros(2, 2);
    sx.set(0, 1, ONE);
    sx.set(1, 0, ONE);
    let mut sy = ComplexMatrix::zeros(2, 2);
    sy.set(0, 1, -i);
    sy.set(1, 0, i);
    let mut sz = ComplexMatrix::zeros(2, 2);
    sz.set(0, 0, ONE);
    sz.set(1, 1, -ONE);
    [sx, sy, sz]
}

// ---------------------------------------------------------------------------
// Eigensolvers
// ---------------------------------------------------------------------------

/// Cyclic Jacobi on a flat row-major symmetric matrix; `v` accumulates the
/// rotations and must start as the identity.
fn jacobi_sweeps(a: &mut [f64], v: &mut [f64], n: usize) -> Result<()> {
    if n <= 1 {
        return Ok(());
    }
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let tol = 1e-12 * scale;
    for _ in 0..100 {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[p * n + q].abs());
            }
        }
        if off <= tol {
            return Ok(());
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::NoConvergence(
        "jacobi eigensolver exceeded its sweep budget".into(),
    ))
}

/// Eigen-decomposition of a real symmetric matrix.
///
/// Returns `(eigenvalue, eigenvector)` pairs sorted by ascending eigenvalue;
/// the vectors are orthonormal. The input is symmetrized, so tiny asymmetries
/// are tolerated.
pub fn sym_eigen(m: &[Vec<f64>]) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = m.len();
    if n == 0 || m.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(
            "symmetric eigensolver needs a square matrix".into(),
        ));
    }
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (m[i][j] + m[j][i]);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    jacobi_sweeps(&mut a, &mut v, n)?;
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|k| (a[k * n + k], (0..n).map(|i| v[i * n + k]).collect()))
        .collect();
    pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    Ok(pairs)
}

/// Eigen-decomposition of a (near-)Hermitian matrix via the real embedding
/// `[[Re H, -Im H], [Im H, Re H]]`.
///
/// The matrix is implicitly replaced by its Hermitian part. Returns pairs
/// sorted by ascending eigenvalue with orthonormal complex eigenvectors.
pub fn herm_eigen(h: &ComplexMatrix) -> Result<Vec<(f64, Vec<Complex64>)>> {
    if h.rows() != h.cols() {
        return Err(Error::DimensionMismatch(
            "hermitian eigensolver needs a square matrix".into(),
        ));
    }
    let n = h.rows();
    let herm = h.add(&h.dagger()).scale(Complex64::new(0.5, 0.0));
    let m2 = 2 * n;
    let mut a = vec![0.0; m2 * m2];
    for i in 0..n {
        for j in 0..n {
            let e = herm.get(i, j);
            a[i * m2 + j] = e.re;
            a[i * m2 + (n + j)] = -e.im;
            a[(n + i) * m2 + j] = e.im;
            a[(n + i) * m2 + (n + j)] = e.re;
        }
    }
    let mut v = vec![0.0; m2 * m2];
    for i in 0..m2 {
        v[i * m2 + i] = 1.0;
    }
    jacobi_sweeps(&mut a, &mut v, m2)?;

    let mut real_pairs: Vec<(f64, Vec<f64>)> = (0..m2)
        .map(|k| (a[k * m2 + k], (0..m2).map(|i| v[i * m2 + k]).collect()))
        .collect();
    real_pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());

    // Each eigenvalue of the embedding is doubled; group nearby values and
    // extract half as many complex eigenvectors per group.
    let scale = real_pairs
        .iter()
        .fold(0.0f64, |m, (l, _)| m.max(l.abs()))
        .max(1.0);
    let cluster_tol = 1e-9 * scale;
    let mut out: Vec<(f64, Vec<Complex64>)> = Vec::with_capacity(n);
    let mut start = 0;
    while start < m2 {
        let mut end = start + 1;
        while end < m2 && (real_pairs[end].0 - real_pairs[end - 1].0).abs() <= cluster_tol {
            end += 1;
        }
        let size = end - start;
        if size % 2 != 0 {
            return Err(Error::NoConvergence(
                "hermitian embedding produced an unpaired eigenvalue".into(),
            ));
        }
        let want = size / 2;
        let candidates: Vec<Vec<Complex64>> = real_pairs[start..end]
            .iter()
            .map(|(_, w)| (0..n).map(|i| Complex64::new(w[i], w[n + i])).collect())
            .collect();
        let picked = complex_span_basis(&candidates, want)?;
        for vec in picked {
            let lambda = rayleigh(&herm, &vec).re;
            out.push((lambda, vec));
        }
        start = end;
    }
    out.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    Ok(out)
}

fn inner(u: &[Complex64], w: &[Complex64]) -> Complex64 {
    u.iter().zip(w).map(|(a, b)| a.conj() * b).sum()
}

fn vec_norm(u: &[Complex64]) -> f64 {
    inner(u, u).re.sqrt()
}

fn rayleigh(m: &ComplexMatrix, v: &[Complex64]) -> Complex64 {
    let mv = m.mul_vec(v);
    inner(v, &mv) / inner(v, v)
}

/// Picks `want` orthonormal vectors spanning the same space as `candidates`
/// by repeatedly taking the candidate with the largest orthogonal residual.
fn complex_span_basis(candidates: &[Vec<Complex64>], want: usize) -> Result<Vec<Vec<Complex64>>> {
    let mut residuals: Vec<Vec<Complex64>> = candidates.to_vec();
    let mut picked = Vec::with_capacity(want);
    while picked.len() < want {
        let (best, norm) = residuals
            .iter()
            .enumerate()
            .map(|(i, r)| (i, vec_norm(r)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("candidate list cannot be empty");
        if norm < 0.05 {
            return Err(Error::NoConvergence(
                "eigenvector cluster candidates failed to span".into(),
            ));
        }
        let mut next = residuals[best].clone();
        for x in next.iter_mut() {
            *x /= norm;
        }
        for r in residuals.iter_mut() {
            let c = inner(&next, r);
            for (ri, ni) in r.iter_mut().zip(&next) {
                *ri -= c * ni;
            }
        }
        picked.push(next);
    }
    Ok(picked)
}

/// Eigen-decomposition of a unitary matrix: eigenvalues on the unit circle
/// with orthonormal eigenvectors.
///
/// The Hermitian part is diagonalized first; the anti-Hermitian part, which
/// commutes with it, is then diagonalized inside each eigenvalue cluster.
pub fn unitary_eigen(u: &ComplexMatrix) -> Result<Vec<(Complex64, Vec<Complex64>)>> {
    if !u.is_unitary(1e-8) {
        return Err(Error::DimensionMismatch(
            "eigensolver input is not unitary".into(),
        ));
    }
    let n = u.rows();
    let h1 = u.add(&u.dagger()).scale(Complex64::new(0.5, 0.0));
    let h2 = u.sub(&u.dagger()).scale(Complex64::new(0.0, -0.5));
    let pairs = herm_eigen(&h1)?;

    let mut out: Vec<(Complex64, Vec<Complex64>)> = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (pairs[end].0 - pairs[end - 1].0).abs() <= 1e-8 {
            end += 1;
        }
        let cluster = &pairs[start..end];
        if cluster.len() == 1 {
            let v = cluster[0].1.clone();
            let mu = rayleigh(u, &v);
            out.push((mu, v));
        } else {
            // Diagonalize the anti-Hermitian part restricted to the cluster.
            let k = cluster.len();
            let mut small = ComplexMatrix::zeros(k, k);
            let images: Vec<Vec<Complex64>> =
                cluster.iter().map(|(_, v)| h2.mul_vec(v)).collect();
            for i in 0..k {
                for j in 0..k {
                    small.set(i, j, inner(&cluster[i].1, &images[j]));
                }
            }
            for (_, y) in herm_eigen(&small)? {
                let mut v = vec![ZERO; n];
                for (c, (_, basis_vec)) in y.iter().zip(cluster) {
                    for (vi, bi) in v.iter_mut().zip(basis_vec) {
                        *vi += c * bi;
                    }
                }
                let mu = rayleigh(u, &v);
                out.push((mu, v));
            }
        }
        start = end;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// States and observables
// ---------------------------------------------------------------------------

/// Unit-trace positive semidefinite Hermitian matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityMatrixRepr", into = "DensityMatrixRepr")]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixRepr {
    dim: usize,
    matrix: ComplexMatrix,
}

impl From<DensityMatrix> for DensityMatrixRepr {
    fn from(d: DensityMatrix) -> Self {
        DensityMatrixRepr {
            dim: d.matrix.rows(),
            matrix: d.matrix,
        }
    }
}

impl TryFrom<DensityMatrixRepr> for DensityMatrix {
    type Error = Error;

    fn try_from(r: DensityMatrixRepr) -> Result<Self> {
        if r.dim != r.matrix.rows() {
            return Err(Error::ShapeMismatch(
                "declared dimension disagrees with the matrix".into(),
            ));
        }
        DensityMatrix::from_matrix(r.matrix)
    }
}

impl DensityMatrix {
    /// Validates Hermiticity (1e-10), unit trace (1e-10), and positivity
    /// (eigenvalues >= -1e-10).
    pub fn from_matrix(m: ComplexMatrix) -> Result<Self> {
        Self::from_matrix_tol(m, HERMITICITY_TOL)
    }

    /// [`DensityMatrix::from_matrix`] with a caller-chosen positivity slack.
    pub fn from_matrix_tol(m: ComplexMatrix, psd_tol: f64) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::InvalidState("density matrix must be square".into()));
        }
        if !m.is_hermitian(HERMITICITY_TOL) {
            return Err(Error::InvalidState(
                "density matrix is not hermitian".into(),
            ));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > HERMITICITY_TOL || tr.im.abs() > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix trace {tr} differs from 1"
            )));
        }
        let lowest = herm_eigen(&m)?.first().map(|(l, _)| *l).unwrap_or(0.0);
        if lowest < -psd_tol {
            return Err(Error::InvalidState(format!(
                "density matrix has negative eigenvalue {lowest:.3e}"
            )));
        }
        Ok(DensityMatrix { matrix: m })
    }

    /// Rank-one projector onto a normalized state vector.
    pub fn pure(state: &[Complex64]) -> Result<Self> {
        let norm = vec_norm(state);
        if (norm - 1.0).abs() > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!(
                "state vector norm {norm} differs from 1"
            )));
        }
        let n = state.len();
        let m = ComplexMatrix::from_fn(n, n, |i, j| state[i] * state[j].conj());
        Ok(DensityMatrix { matrix: m })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let m = ComplexMatrix::identity(dim).scale(Complex64::new(1.0 / dim as f64, 0.0));
        DensityMatrix { matrix: m }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// `Tr(rho M)`.
    pub fn expectation(&self, op: &ComplexMatrix) -> Complex64 {
        assert_eq!(op.rows(), self.dim(), "operator dimension mismatch");
        let mut acc = ZERO;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += self.matrix.get(i, j) * op.get(j, i);
            }
        }
        acc
    }
}

/// Hermitian operator squaring to the identity (eigenvalues +-1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObservableRepr", into = "ObservableRepr")]
pub struct DichotomicObservable {
    matrix: ComplexMatrix,
}

#[derive(Serialize, Deserialize)]
struct ObservableRepr {
    matrix: ComplexMatrix,
}

impl From<DichotomicObservable> for ObservableRepr {
    fn from(o: DichotomicObservable) -> Self {
        ObservableRepr { matrix: o.matrix }
    }
}

impl TryFrom<ObservableRepr> for DichotomicObservable {
    type Error = Error;

    fn try_from(r: ObservableRepr) -> Result<Self> {
        DichotomicObservable::from_matrix(r.matrix)
    }
}

impl DichotomicObservable {
    pub fn from_matrix(m: ComplexMatrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::NotDichotomic("observable must be square".into()));
        }
        if !m.is_hermitian(DICHOTOMIC_TOL) {
            return Err(Error::NotDichotomic("observable is not hermitian".into()));
        }
        let sq = m.mul(&m).sub(&ComplexMatrix::identity(m.rows()));
        if sq.max_abs() > DICHOTOMIC_TOL {
            return Err(Error::NotDichotomic(format!(
                "observable squared differs from identity by {:.3e}",
                sq.max_abs()
            )));
        }
        Ok(DichotomicObservable { matrix: m })
    }

    /// Qubit observable `v . sigma` for a unit Bloch vector.
    pub fn from_bloch(v: &Vec3) -> Result<Self> {
        if (v.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::BadVector(format!(
                "bloch direction norm {} differs from 1",
                v.norm()
            )));
        }
        let [sx, sy, sz] = pauli();
        let m = sx
            .scale(Complex64::new(v.0[0], 0.0))
            .add(&sy.scale(Complex64::new(v.0[1], 0.0)))
            .add(&sz.scale(Complex64::new(v.0[2], 0.0)));
        Ok(DichotomicObservable { matrix: m })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// The two-element projective measurement `{(1+M)/2, (1-M)/2}`, ordered
    /// so outcome index 0 carries the +1 eigenspace.
    pub fn projectors(&self) -> Vec<ComplexMatrix> {
        let id = ComplexMatrix::identity(self.dim());
        let half = Complex64::new(0.5, 0.0);
        vec![
            id.add(&self.matrix).scale(half),
            id.sub(&self.matrix).scale(half),
        ]
    }
}

// ---------------------------------------------------------------------------
// Born rule
// ---------------------------------------------------------------------------

fn validate_povm(povm: &[ComplexMatrix], dim: usize) -> Result<()> {
    if povm.is_empty() {
        return Err(Error::InvalidPovm("measurement with no outcomes".into()));
    }
    let mut sum = ComplexMatrix::zeros(dim, dim);
    for e in povm {
        if e.rows() != dim || e.cols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "povm element is {}x{}, expected {dim}x{dim}",
                e.rows(),
                e.cols()
            )));
        }
        if !e.is_psd(1e-9) {
            return Err(Error::InvalidPovm(
                "povm element is not positive semidefinite".into(),
            ));
        }
        sum = sum.add(e);
    }
    let defect = sum.sub(&ComplexMatrix::identity(dim)).max_abs();
    if defect > 1e-9 {
        return Err(Error::InvalidPovm(format!(
            "povm elements sum to identity only within {defect:.3e}"
        )));
    }
    Ok(())
}

/// Behavior table `P(a,b|x,y) = Tr(rho E_a^x (x) F_b^y)` of a bipartite state
/// under per-setting POVMs.
///
/// The state must live on the tensor product of the two measurement spaces;
/// every setting on a side must have the same number of outcomes.
pub fn born_behavior(
    rho: &DensityMatrix,
    alice_povms: &[Vec<ComplexMatrix>],
    bob_povms: &[Vec<ComplexMatrix>],
) -> Result<Behavior> {
    let (Some(first_a), Some(first_b)) = (alice_povms.first(), bob_povms.first()) else {
        return Err(Error::InvalidPovm("each side needs a measurement".into()));
    };
    let da = first_a.first().map_or(0, ComplexMatrix::rows);
    let db = first_b.first().map_or(0, ComplexMatrix::rows);
    if da == 0 || db == 0 || da * db != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} does not factor as {da} x {db}",
            rho.dim()
        )));
    }
    let oa = first_a.len();
    let ob = first_b.len();
    if alice_povms.iter().any(|p| p.len() != oa) || bob_povms.iter().any(|p| p.len() != ob) {
        return Err(Error::InvalidPovm(
            "settings on one side have mixed outcome counts".into(),
        ));
    }
    for p in alice_povms {
        validate_povm(p, da)?;
    }
    for p in bob_povms {
        validate_povm(p, db)?;
    }
    let scenario = Scenario::new(alice_povms.len(), oa, bob_povms.len(), ob)?;
    let mut raw = vec![0.0; scenario.table_len()];
    let mut idx = 0;
    for ax in alice_povms {
        for by in bob_povms {
            for e in ax {
                for f in by {
                    raw[idx] = rho.expectation(&e.kron(f)).re;
                    idx += 1;
                }
            }
        }
    }
    Behavior::normalized(scenario, &raw)
}

// ---------------------------------------------------------------------------
// Two-qubit decomposition
// ---------------------------------------------------------------------------

/// Bloch-vector and correlation-matrix parameterization of a two-qubit state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitState {
    /// Alice's Bloch vector `Tr(rho sigma_i (x) 1)`.
    pub r: Vec3,
    /// Bob's Bloch vector `Tr(rho 1 (x) sigma_j)`.
    pub s: Vec3,
    /// Correlation matrix `T_ij = Tr(rho sigma_i (x) sigma_j)`.
    pub t: Mat3,
}

/// Extracts `(r, s, T)` from a two-qubit density matrix.
pub fn two_qubit_decompose(rho: &DensityMatrix) -> Result<TwoQubitState> {
    if rho.dim() != 4 {
        return Err(Error::InvalidState(format!(
            "two-qubit decomposition needs dimension 4, got {}",
            rho.dim()
        )));
    }
    let sigma = pauli();
    let id = ComplexMatrix::identity(2);
    let mut r = [0.0; 3];
    let mut s = [0.0; 3];
    let mut t = Mat3::zeros();
    for i in 0..3 {
        r[i] = rho.expectation(&sigma[i].kron(&id)).re;
        s[i] = rho.expectation(&id.kron(&sigma[i])).re;
        for j in 0..3 {
            t.0[i][j] = rho.expectation(&sigma[i].kron(&sigma[j])).re;
        }
    }
    Ok(TwoQubitState {
        r: Vec3(r),
        s: Vec3(s),
        t,
    })
}

/// Rebuilds the density matrix `(1 + r.sigma (x) 1 + 1 (x) s.sigma +
/// sum T_ij sigma_i (x) sigma_j) / 4`; fails if the result is not a state.
pub fn two_qubit_compose(st: &TwoQubitState) -> Result<DensityMatrix> {
    let sigma = pauli();
    let id = ComplexMatrix::identity(2);
    let mut m = id.kron(&id);
    for i in 0..3 {
        m = m.add(&sigma[i].kron(&id).scale(Complex64::new(st.r.0[i], 0.0)));
        m = m.add(&id.kron(&sigma[i]).scale(Complex64::new(st.s.0[i], 0.0)));
        for j in 0..3 {
            m = m.add(&sigma[i].kron(&sigma[j]).scale(Complex64::new(st.t.0[i][j], 0.0)));
        }
    }
    DensityMatrix::from_matrix_tol(m.scale(Complex64::new(0.25, 0.0)), 1e-9)
}

// ---------------------------------------------------------------------------
// Partial trace and transpose
// ---------------------------------------------------------------------------

fn decode(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; dims.len()];
    for (slot, &d) in digits.iter_mut().zip(dims).rev() {
        *slot = index % d;
        index /= d;
    }
    digits
}

fn encode(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&x, &d)| acc * d + x)
}

/// Traces out every factor not listed in `keep` (indices into `dims`,
/// strictly increasing).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize], dims: &[usize]) -> Result<DensityMatrix> {
    let total: usize = dims.iter().product();
    if total != rho.dim() || dims.is_empty() {
        return Err(Error::BadFactorization(format!(
            "dims {dims:?} do not factor dimension {}",
            rho.dim()
        )));
    }
    if keep.is_empty()
        || keep.windows(2).any(|w| w[0] >= w[1])
        || keep.iter().any(|&k| k >= dims.len())
    {
        return Err(Error::BadFactorization(format!(
            "keep list {keep:?} is not an increasing subset of the factors"
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let keep_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let m: usize = keep_dims.iter().product();
    let t: usize = traced_dims.iter().product::<usize>().max(1);

    let mut out = ComplexMatrix::zeros(m, m);
    let mut full_i = vec![0; dims.len()];
    let mut full_j = vec![0; dims.len()];
    for i in 0..m {
        let di = decode(i, &keep_dims);
        for j in 0..m {
            let dj = decode(j, &keep_dims);
            let mut acc = ZERO;
            for tt in 0..t {
                let dt = decode(tt, &traced_dims);
                for (slot, &k) in keep.iter().enumerate() {
                    full_i[k] = di[slot];
                    full_j[k] = dj[slot];
                }
                for (slot, &k) in traced.iter().enumerate() {
                    full_i[k] = dt[slot];
                    full_j[k] = dt[slot];
                }
                acc += rho
                    .matrix()
                    .get(encode(&full_i, dims), encode(&full_j, dims));
            }
            out.set(i, j, acc);
        }
    }
    DensityMatrix::from_matrix_tol(out, 1e-9)
}

/// Transposes one factor of a bipartite state; the result need not be a
/// state, so a bare matrix is returned.
pub fn partial_transpose(
    rho: &DensityMatrix,
    dims: (usize, usize),
    subsystem: usize,
) -> Result<ComplexMatrix> {
    let (da, db) = dims;
    if da * db != rho.dim() {
        return Err(Error::BadFactorization(format!(
            "dimension {} does not factor as {da} x {db}",
            rho.dim()
        )));
    }
    if subsystem > 1 {
        return Err(Error::BadFactorization(
            "bipartite subsystem index must be 0 or 1".into(),
        ));
    }
    let mut out = ComplexMatrix::zeros(rho.dim(), rho.dim());
    for a in 0..da {
        for b in 0..db {
            for ap in 0..da {
                for bp in 0..db {
                    let v = rho.matrix().get(a * db + b, ap * db + bp);
                    let (i, j) = if subsystem == 0 {
                        (ap * db + b, a * db + bp)
                    } else {
                        (a * db + bp, ap * db + b)
                    };
                    out.set(i, j, v);
                }
            }
        }
    }
    Ok(out)
}

/// Positivity of the partial transpose: `true` iff every eigenvalue of the
/// partially transposed state is at least -1e-10.
pub fn is_ppt(rho: &DensityMatrix, dims: (usize, usize)) -> Result<bool> {
    let pt = partial_transpose(rho, dims, 1)?;
    let pairs = herm_eigen(&pt)?;
    Ok(pairs.first().map_or(true, |(lo, _)| *lo >= -1e-10))
}

// ---------------------------------------------------------------------------
// Joint block decomposition of two dichotomic observables
// ---------------------------------------------------------------------------

/// One simultaneous block of a pair of dichotomic observables: either a 1x1
/// block (both observables scalar +-1) or a 2x2 block on which the first
/// observable acts as `sigma_x` and the second as
/// `Re(omega) sigma_x - Im(omega) sigma_y`.
#[derive(Debug, Clone)]
pub struct JordanBlock {
    pub dim: usize,
    /// Unit-modulus phase characterizing the pair on this block. For 1x1
    /// blocks this is the product of the two scalar outcomes.
    pub omega: Complex64,
    pub a0_block: ComplexMatrix,
    pub a1_block: ComplexMatrix,
}

/// Joint block structure of two dichotomic observables.
#[derive(Debug, Clone)]
pub struct JordanDecomposition {
    /// Unitary whose columns are the adapted basis, block by block.
    pub basis: ComplexMatrix,
    pub blocks: Vec<JordanBlock>,
}

impl JordanDecomposition {
    /// Reassembles both observables from the blocks: `B diag(blocks) B^dag`.
    pub fn reconstruct(&self) -> (ComplexMatrix, ComplexMatrix) {
        let n = self.basis.rows();
        let mut d0 = ComplexMatrix::zeros(n, n);
        let mut d1 = ComplexMatrix::zeros(n, n);
        let mut offset = 0;
        for b in &self.blocks {
            for i in 0..b.dim {
                for j in 0..b.dim {
                    d0.set(offset + i, offset + j, b.a0_block.get(i, j));
                    d1.set(offset + i, offset + j, b.a1_block.get(i, j));
                }
            }
            offset += b.dim;
        }
        let bd = self.basis.dagger();
        (
            self.basis.mul(&d0).mul(&bd),
            self.basis.mul(&d1).mul(&bd),
        )
    }
}

/// Decomposes a pair of dichotomic observables into simultaneous blocks of
/// dimension at most two.
///
/// The product `A0 A1` is unitary; its non-real eigenvectors pair up under
/// conjugation by `A0` into 2x2 blocks, while real eigenvalue clusters split
/// into common 1x1 eigenvectors. Within each 2x2 block `A0` acts as
/// `sigma_x` and `A1` as `Re(omega) sigma_x - Im(omega) sigma_y` where
/// `omega` is the conjugate of the product's eigenvalue on the block,
/// oriented so `Im(omega) >= 0`.
pub fn jordan_blocks(
    a0: &DichotomicObservable,
    a1: &DichotomicObservable,
) -> Result<JordanDecomposition> {
    if a0.dim() != a1.dim() {
        return Err(Error::DimensionMismatch(format!(
            "observable dimensions {} and {} differ",
            a0.dim(),
            a1.dim()
        )));
    }
    let n = a0.dim();
    let m0 = a0.matrix();
    let m1 = a1.matrix();
    let u = m0.mul(m1);
    let eig = unitary_eigen(&u)?;

    // Cluster the unit-circle eigenvalues.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        (eig[i].0.re, eig[i].0.im)
            .partial_cmp(&(eig[j].0.re, eig[j].0.im))
            .unwrap()
    });
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &idx in &order {
        match clusters.last_mut() {
            Some(c) if (eig[c[0]].0 - eig[idx].0).norm() <= 1e-8 => c.push(idx),
            _ => clusters.push(vec![idx]),
        }
    }

    let mut blocks: Vec<(Vec<Vec<Complex64>>, JordanBlock)> = Vec::new();
    for cluster in &clusters {
        let mu = eig[cluster[0]].0;
        if mu.im > 1e-8 {
            // Handled through the conjugate cluster.
            continue;
        }
        if mu.im < -1e-8 {
            for &idx in cluster {
                let uvec = eig[idx].1.clone();
                // Partner vector: the image under A0 lives in the conjugate
                // eigenspace and is orthogonal to uvec.
                let mut vvec = m0.mul_vec(&uvec);
                let c = inner(&uvec, &vvec);
                for (vi, ui) in vvec.iter_mut().zip(&uvec) {
                    *vi -= c * ui;
                }
                let norm = vec_norm(&vvec);
                if norm < 0.5 {
                    return Err(Error::NoConvergence(
                        "block pairing degenerated; observables are not dichotomic enough".into(),
                    ));
                }
                for vi in vvec.iter_mut() {
                    *vi /= norm;
                }
                let mu_exact = rayleigh(&u, &uvec);
                let omega = mu_exact.conj();
                let mut a0b = ComplexMatrix::zeros(2, 2);
                a0b.set(0, 1, ONE);
                a0b.set(1, 0, ONE);
                let mut a1b = ComplexMatrix::zeros(2, 2);
                a1b.set(0, 1, omega);
                a1b.set(1, 0, omega.conj());
                blocks.push((
                    vec![uvec, vvec],
                    JordanBlock {
                        dim: 2,
                        omega,
                        a0_block: a0b,
                        a1_block: a1b,
                    },
                ));
            }
        } else {
            // Real eigenvalue: A0 preserves the cluster; split it into
            // common eigenvectors.
            let k = cluster.len();
            let mut small = ComplexMatrix::zeros(k, k);
            let images: Vec<Vec<Complex64>> = cluster
                .iter()
                .map(|&idx| m0.mul_vec(&eig[idx].1))
                .collect();
            for i in 0..k {
                for j in 0..k {
                    small.set(i, j, inner(&eig[cluster[i]].1, &images[j]));
                }
            }
            for (eps, y) in herm_eigen(&small)? {
                let mut w = vec![ZERO; n];
                for (c, &idx) in y.iter().zip(cluster) {
                    for (wi, bi) in w.iter_mut().zip(&eig[idx].1) {
                        *wi += c * bi;
                    }
                }
                let a0_val = eps.round();
                let a1_val = rayleigh(m1, &w).re.round();
                let mut a0b = ComplexMatrix::zeros(1, 1);
                a0b.set(0, 0, Complex64::new(a0_val, 0.0));
                let mut a1b = ComplexMatrix::zeros(1, 1);
                a1b.set(0, 0, Complex64::new(a1_val, 0.0));
                blocks.push((
                    vec![w],
                    JordanBlock {
                        dim: 1,
                        omega: Complex64::new(a0_val * a1_val, 0.0),
                        a0_block: a0b,
                        a1_block: a1b,
                    },
                ));
            }
        }
    }

    // Deterministic block order: 2x2 first by phase, then 1x1 by outcomes.
    blocks.sort_by(|p, q| {
        let key = |b: &JordanBlock| {
            (
                usize::MAX - b.dim,
                b.omega.re,
                b.omega.im,
                b.a0_block.get(0, 0).re,
            )
        };
        key(&p.1).partial_cmp(&key(&q.1)).unwrap()
    });

    let total: usize = blocks.iter().map(|(_, b)| b.dim).sum();
    if total != n {
        return Err(Error::NoConvergence(format!(
            "block dimensions sum to {total}, expected {n}"
        )));
    }
    let mut basis = ComplexMatrix::zeros(n, n);
    let mut col = 0;
    for (vecs, _) in &blocks {
        for v in vecs {
            for (i, &vi) in v.iter().enumerate() {
                basis.set(i, col, vi);
            }
            col += 1;
        }
    }
    Ok(JordanDecomposition {
        basis,
        blocks: blocks.into_iter().map(|(_, b)| b).collect(),
    })
}

/// Ascending eigenvalues and eigenvectors of a symmetric 3x3 matrix.
pub fn sym3_eigen(m: &Mat3) -> Vec<(f64, Vec3)> {
    let rows: Vec<Vec<f64>> = m.0.iter().map(|r| r.to_vec()).collect();
    sym_eigen(&rows)
        .expect("3x3 jacobi cannot fail")
        .into_iter()
        .map(|(l, v)| (l, Vec3([v[0], v[1], v[2]])))
        .collect()
}
