//! Dense operator algebra on *n*-qubit Hilbert spaces.
//!
//! Qubit ordering: site 0 is the most significant tensor factor, so the
//! computational basis index of `|q0 q1 ... q(n-1)⟩` is `q0·2^(n-1) + ... +
//! q(n-1)`. The ket `|01⟩` therefore has qubit 0 in `|0⟩` and qubit 1 in `|1⟩`.
//!
//! Operators are stored densely. Operators produced by embedding few-qubit
//! terms are very sparse, so each [`DenseOperator`] also keeps a compressed
//! row view when the fill fraction is small; matrix-vector products use it.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerance used when tagging operators as Hermitian or anti-Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on state normalization.
pub const NORM_TOL: f64 = 1e-12;
/// Largest Hilbert dimension accepted by [`diagonalize`].
pub const MAX_ED_DIM: usize = 1 << 12;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("site {site} out of range for {n_qubits} qubits")]
    SiteOutOfRange { site: usize, n_qubits: usize },
    #[error("support contains repeated site {0}")]
    RepeatedSite(usize),
    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("operator is not anti-Hermitian (max deviation {0:.3e})")]
    NotAntiHermitian(f64),
    #[error("vector is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("zero vector cannot be normalized")]
    ZeroVector,
    #[error("not a density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("expectation value has imaginary part {0:.3e}")]
    NotReal(f64),
    #[error("dimension {0} exceeds the dense diagonalization limit")]
    TooLarge(usize),
    #[error("edge ({0}, {1}) is invalid")]
    InvalidEdge(usize, usize),
}

pub type Result<T, E = OperatorError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum HermitianTag {
    Hermitian,
    AntiHermitian,
    General,
}

/// Compressed sparse row view of an operator.
#[derive(Clone, Debug)]
struct SparseRows {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl SparseRows {
    fn from_dense(m: &CMatrix) -> Option<Self> {
        let d = m.nrows();
        // Only worth it when at most a quarter of the entries are nonzero.
        let budget = (d * d) / 4;
        let mut indptr = Vec::with_capacity(d + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..d {
            for j in 0..d {
                let v = m[(i, j)];
                if v != ZERO {
                    if indices.len() >= budget {
                        return None;
                    }
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Some(Self { indptr, indices, values })
    }

    fn apply(&self, v: &CVector) -> CVector {
        let d = self.indptr.len() - 1;
        CVector::from_fn(d, |i, _| {
            let mut acc = ZERO;
            for p in self.indptr[i]..self.indptr[i + 1] {
                acc += self.values[p] * v[self.indices[p]];
            }
            acc
        })
    }

    fn apply_adjoint(&self, v: &CVector) -> CVector {
        let d = self.indptr.len() - 1;
        let mut out = CVector::zeros(d);
        for i in 0..d {
            let vi = v[i];
            if vi == ZERO {
                continue;
            }
            for p in self.indptr[i]..self.indptr[i + 1] {
                out[self.indices[p]] += self.values[p].conj() * vi;
            }
        }
        out
    }
}

/// A square complex matrix acting on a finite-dimensional Hilbert space,
/// tagged by its Hermiticity.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    matrix: CMatrix,
    tag: HermitianTag,
    sparse: OnceLock<Option<SparseRows>>,
}

fn max_deviation(m: &CMatrix, sign: f64) -> f64 {
    let d = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            let diff = m[(i, j)] - m[(j, i)].conj() * sign;
            dev = dev.max(diff.norm());
        }
    }
    dev
}

impl DenseOperator {
    /// Wrap a square matrix, detecting its Hermiticity tag.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(OperatorError::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        let tag = if max_deviation(&matrix, 1.0) < HERMITIAN_TOL {
            HermitianTag::Hermitian
        } else if max_deviation(&matrix, -1.0) < HERMITIAN_TOL {
            HermitianTag::AntiHermitian
        } else {
            HermitianTag::General
        };
        Ok(Self::with_tag_unchecked(matrix, tag))
    }

    /// Wrap a matrix that must be Hermitian.
    pub fn hermitian(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(OperatorError::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        let dev = max_deviation(&matrix, 1.0);
        if dev >= HERMITIAN_TOL {
            return Err(OperatorError::NotHermitian(dev));
        }
        Ok(Self::with_tag_unchecked(matrix, HermitianTag::Hermitian))
    }

    /// Wrap a matrix that must be anti-Hermitian.
    pub fn anti_hermitian(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(OperatorError::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        let dev = max_deviation(&matrix, -1.0);
        if dev >= HERMITIAN_TOL {
            return Err(OperatorError::NotAntiHermitian(dev));
        }
        Ok(Self::with_tag_unchecked(matrix, HermitianTag::AntiHermitian))
    }

    /// Real symmetric matrix as a Hermitian operator.
    pub fn from_real(matrix: &DMatrix<f64>) -> Result<Self> {
        Self::new(matrix.map(|x| C64::new(x, 0.0)))
    }

    pub(crate) fn with_tag_unchecked(matrix: CMatrix, tag: HermitianTag) -> Self {
        Self { matrix, tag, sparse: OnceLock::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::with_tag_unchecked(CMatrix::identity(dim, dim), HermitianTag::Hermitian)
    }

    pub fn zeros(dim: usize) -> Self {
        Self::with_tag_unchecked(CMatrix::zeros(dim, dim), HermitianTag::Hermitian)
    }

    pub fn pauli(p: Pauli) -> Self {
        Self::with_tag_unchecked(p.matrix(), HermitianTag::Hermitian)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn tag(&self) -> HermitianTag {
        self.tag
    }

    pub fn is_hermitian(&self) -> bool {
        self.tag == HermitianTag::Hermitian
    }

    pub fn is_anti_hermitian(&self) -> bool {
        self.tag == HermitianTag::AntiHermitian
    }

    /// Largest |entry − entry†|.
    pub fn hermiticity_defect(&self) -> f64 {
        max_deviation(&self.matrix, 1.0)
    }

    /// True when every entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im == 0.0)
    }

    pub fn adjoint(&self) -> Self {
        let tag = self.tag;
        Self::with_tag_unchecked(self.matrix.adjoint(), tag)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::with_tag_unchecked(self.matrix.map(|z| z * s), self.tag)
    }

    /// Multiply by `i`, exchanging Hermitian and anti-Hermitian tags.
    pub fn times_i(&self) -> Self {
        let tag = match self.tag {
            HermitianTag::Hermitian => HermitianTag::AntiHermitian,
            HermitianTag::AntiHermitian => HermitianTag::Hermitian,
            HermitianTag::General => HermitianTag::General,
        };
        Self::with_tag_unchecked(self.matrix.map(|z| z * I), tag)
    }

    pub fn kron(&self, other: &Self) -> Self {
        let tag = if self.tag == other.tag && self.tag == HermitianTag::Hermitian {
            HermitianTag::Hermitian
        } else {
            HermitianTag::General
        };
        Self::with_tag_unchecked(self.matrix.kronecker(&other.matrix), tag)
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Frobenius distance to another operator of the same dimension.
    pub fn distance(&self, other: &Self) -> f64 {
        (&self.matrix - &other.matrix).norm()
    }

    /// Largest entrywise modulus difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Operator (spectral) norm.
    pub fn norm_inf(&self) -> f64 {
        match self.tag {
            HermitianTag::Hermitian => {
                let ev = self.matrix.clone().symmetric_eigenvalues();
                ev.iter().map(|x| x.abs()).fold(0.0, f64::max)
            }
            HermitianTag::AntiHermitian => {
                let ev = self.times_i().matrix.symmetric_eigenvalues();
                ev.iter().map(|x| x.abs()).fold(0.0, f64::max)
            }
            HermitianTag::General => {
                let sv = self.matrix.clone().singular_values();
                sv.iter().cloned().fold(0.0, f64::max)
            }
        }
    }

    fn sparse(&self) -> Option<&SparseRows> {
        self.sparse.get_or_init(|| SparseRows::from_dense(&self.matrix)).as_ref()
    }

    /// `self · v`.
    pub fn apply(&self, v: &CVector) -> CVector {
        match self.sparse() {
            Some(s) => s.apply(v),
            None => &self.matrix * v,
        }
    }

    /// `self† · v`.
    pub fn apply_adjoint(&self, v: &CVector) -> CVector {
        match self.sparse() {
            Some(s) => s.apply_adjoint(v),
            None => self.matrix.ad_mul(v),
        }
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(OperatorError::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

impl PartialEq for DenseOperator {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

fn sum_tag(a: HermitianTag, b: HermitianTag) -> HermitianTag {
    if a == b {
        a
    } else {
        HermitianTag::General
    }
}

impl Add for &DenseOperator {
    type Output = DenseOperator;
    fn add(self, rhs: &DenseOperator) -> DenseOperator {
        DenseOperator::with_tag_unchecked(&self.matrix + &rhs.matrix, sum_tag(self.tag, rhs.tag))
    }
}

impl Sub for &DenseOperator {
    type Output = DenseOperator;
    fn sub(self, rhs: &DenseOperator) -> DenseOperator {
        DenseOperator::with_tag_unchecked(&self.matrix - &rhs.matrix, sum_tag(self.tag, rhs.tag))
    }
}

impl Mul for &DenseOperator {
    type Output = DenseOperator;
    fn mul(self, rhs: &DenseOperator) -> DenseOperator {
        let m = &self.matrix * &rhs.matrix;
        DenseOperator::new(m).expect("product of square matrices is square")
    }
}

impl Neg for &DenseOperator {
    type Output = DenseOperator;
    fn neg(self) -> DenseOperator {
        self.scale(-1.0)
    }
}

/// Single-qubit Pauli letters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> CMatrix {
        match self {
            Pauli::X => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
            Pauli::Y => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
            Pauli::Z => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        }
    }
}

/// A real multiple of a Pauli string.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub letters: BTreeMap<usize, Pauli>,
}

impl PauliTerm {
    pub fn new(coefficient: f64, letters: impl IntoIterator<Item = (usize, Pauli)>) -> Self {
        Self { coefficient, letters: letters.into_iter().collect() }
    }

    pub fn identity(coefficient: f64) -> Self {
        Self { coefficient, letters: BTreeMap::new() }
    }

    pub fn to_operator(&self, n_qubits: usize) -> Result<DenseOperator> {
        let mut local = DenseOperator::identity(1);
        let mut support = Vec::with_capacity(self.letters.len());
        for (&site, &p) in &self.letters {
            if site >= n_qubits {
                return Err(OperatorError::SiteOutOfRange { site, n_qubits });
            }
            local = local.kron(&DenseOperator::pauli(p));
            support.push(site);
        }
        Ok(embed(&local, &support, n_qubits)?.scale(self.coefficient))
    }
}

/// Sum of Pauli terms as a dense operator.
pub fn pauli_sum(terms: &[PauliTerm], n_qubits: usize) -> Result<DenseOperator> {
    let mut acc = DenseOperator::zeros(1 << n_qubits);
    for t in terms {
        acc = &acc + &t.to_operator(n_qubits)?;
    }
    Ok(acc)
}

/// Bit layout for a support set inside an `n`-qubit register.
struct SupportLayout {
    masks: Vec<usize>,
    support_mask: usize,
}

impl SupportLayout {
    fn new(support: &[usize], n_qubits: usize) -> Result<Self> {
        let mut support_mask = 0usize;
        let mut masks = Vec::with_capacity(support.len());
        for &s in support {
            if s >= n_qubits {
                return Err(OperatorError::SiteOutOfRange { site: s, n_qubits });
            }
            let m = 1usize << (n_qubits - 1 - s);
            if support_mask & m != 0 {
                return Err(OperatorError::RepeatedSite(s));
            }
            support_mask |= m;
            masks.push(m);
        }
        Ok(Self { masks, support_mask })
    }

    /// Local index of the support bits of a global basis index.
    fn local(&self, i: usize) -> usize {
        let k = self.masks.len();
        let mut a = 0;
        for (p, &m) in self.masks.iter().enumerate() {
            if i & m != 0 {
                a |= 1 << (k - 1 - p);
            }
        }
        a
    }

    /// Global bits corresponding to a local index.
    fn spread(&self, a: usize) -> usize {
        let k = self.masks.len();
        let mut i = 0;
        for (p, &m) in self.masks.iter().enumerate() {
            if a & (1 << (k - 1 - p)) != 0 {
                i |= m;
            }
        }
        i
    }
}

/// Embed `local_op` acting on the ordered `support` into an `n_qubits`
/// register, acting as the identity elsewhere. `support[0]` is the most
/// significant factor of `local_op`.
pub fn embed(local_op: &DenseOperator, support: &[usize], n_qubits: usize) -> Result<DenseOperator> {
    let k = support.len();
    if local_op.dim() != 1 << k {
        return Err(OperatorError::DimensionMismatch { expected: 1 << k, found: local_op.dim() });
    }
    let layout = SupportLayout::new(support, n_qubits)?;
    let d = 1usize << n_qubits;
    let local_dim = 1usize << k;
    let spread: Vec<usize> = (0..local_dim).map(|b| layout.spread(b)).collect();
    let mut out = CMatrix::zeros(d, d);
    for i in 0..d {
        let a = layout.local(i);
        let rest = i & !layout.support_mask;
        for b in 0..local_dim {
            let v = local_op.matrix[(a, b)];
            if v != ZERO {
                out[(i, rest | spread[b])] = v;
            }
        }
    }
    Ok(DenseOperator::with_tag_unchecked(out, local_op.tag))
}

/// Normalized partial trace onto `support`: `Tr_rest(op) / 2^(n-k)`.
pub fn reduce_to_support(op: &DenseOperator, support: &[usize], n_qubits: usize) -> Result<DenseOperator> {
    let d = 1usize << n_qubits;
    if op.dim() != d {
        return Err(OperatorError::DimensionMismatch { expected: d, found: op.dim() });
    }
    let layout = SupportLayout::new(support, n_qubits)?;
    let k = support.len();
    let local_dim = 1usize << k;
    let spread: Vec<usize> = (0..local_dim).map(|b| layout.spread(b)).collect();
    let mut red = CMatrix::zeros(local_dim, local_dim);
    let mut count = 0usize;
    for rest in (0..d).filter(|i| i & layout.support_mask == 0) {
        count += 1;
        for a in 0..local_dim {
            for b in 0..local_dim {
                red[(a, b)] += op.matrix[(rest | spread[a], rest | spread[b])];
            }
        }
    }
    red /= C64::new(count as f64, 0.0);
    Ok(DenseOperator::with_tag_unchecked(red, op.tag))
}

/// Returns the local factor of `op` when it acts trivially outside `support`.
pub fn local_factor(op: &DenseOperator, support: &[usize], n_qubits: usize, tol: f64) -> Result<Option<DenseOperator>> {
    let red = reduce_to_support(op, support, n_qubits)?;
    let back = embed(&red, support, n_qubits)?;
    if back.max_abs_diff(op) < tol {
        Ok(Some(red))
    } else {
        Ok(None)
    }
}

/// `ab − ba`.
pub fn commutator(a: &DenseOperator, b: &DenseOperator) -> Result<DenseOperator> {
    a.check_same_dim(b)?;
    let m = &a.matrix * &b.matrix - &b.matrix * &a.matrix;
    use HermitianTag::*;
    let tag = match (a.tag, b.tag) {
        (Hermitian, Hermitian) | (AntiHermitian, AntiHermitian) => AntiHermitian,
        (Hermitian, AntiHermitian) | (AntiHermitian, Hermitian) => Hermitian,
        _ => return DenseOperator::new(m),
    };
    Ok(DenseOperator::with_tag_unchecked(m, tag))
}

/// `ab + ba`.
pub fn anticommutator(a: &DenseOperator, b: &DenseOperator) -> Result<DenseOperator> {
    a.check_same_dim(b)?;
    DenseOperator::new(&a.matrix * &b.matrix + &b.matrix * &a.matrix)
}

/// A normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
}

impl StateVector {
    /// Requires `‖amplitudes‖ = 1` to within [`NORM_TOL`].
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let n = amplitudes.norm();
        if (n - 1.0).abs() >= NORM_TOL {
            return Err(OperatorError::NotNormalized(n));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes the given amplitudes.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let n = amplitudes.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(OperatorError::ZeroVector);
        }
        Ok(Self { amplitudes: amplitudes.unscale(n) })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::normalized(CVector::from_iterator(amplitudes.len(), amplitudes.iter().map(|&x| C64::new(x, 0.0))))
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = CVector::zeros(dim);
        v[index] = ONE;
        Self { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amplitudes
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// Apply an operator and renormalize. Intended for unitaries.
    pub fn evolve(&self, u: &DenseOperator) -> Result<StateVector> {
        if u.dim() != self.dim() {
            return Err(OperatorError::DimensionMismatch { expected: self.dim(), found: u.dim() });
        }
        StateVector::normalized(u.apply(&self.amplitudes))
    }

    pub fn tensor(&self, other: &StateVector) -> StateVector {
        StateVector { amplitudes: self.amplitudes.kronecker(&other.amplitudes) }
    }
}

/// A density matrix, optionally carrying its spectral decomposition.
///
/// When built from a spectral form the full matrix is materialized lazily.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    dim: usize,
    entries: OnceLock<CMatrix>,
    spectral: Option<(Vec<f64>, CMatrix)>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(OperatorError::NotSquare { rows: entries.nrows(), cols: entries.ncols() });
        }
        let dev = max_deviation(&entries, 1.0);
        if dev >= HERMITIAN_TOL {
            return Err(OperatorError::InvalidDensityMatrix(format!("not Hermitian ({dev:.3e})")));
        }
        let tr = entries.trace();
        if (tr.re - 1.0).abs() >= 1e-12 || tr.im.abs() >= 1e-12 {
            return Err(OperatorError::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let min_ev = entries.clone().symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        if min_ev < -1e-10 {
            return Err(OperatorError::InvalidDensityMatrix(format!("negative eigenvalue {min_ev:.3e}")));
        }
        let dim = entries.nrows();
        Ok(Self { dim, entries: OnceLock::from(entries), spectral: None })
    }

    /// `Σ_n w_n |v_n⟩⟨v_n|` with orthonormal columns `vectors`.
    pub fn from_spectral(weights: Vec<f64>, vectors: CMatrix) -> Result<Self> {
        if weights.len() != vectors.ncols() {
            return Err(OperatorError::DimensionMismatch { expected: vectors.ncols(), found: weights.len() });
        }
        if let Some(w) = weights.iter().find(|w| **w < -1e-10) {
            return Err(OperatorError::InvalidDensityMatrix(format!("negative weight {w:.3e}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() >= 1e-12 {
            return Err(OperatorError::InvalidDensityMatrix(format!("weights sum to {total}")));
        }
        Ok(Self { dim: vectors.nrows(), entries: OnceLock::new(), spectral: Some((weights, vectors)) })
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let v = CMatrix::from_column_slice(psi.dim(), 1, psi.amplitudes.as_slice());
        Self { dim: psi.dim(), entries: OnceLock::new(), spectral: Some((vec![1.0], v)) }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let w = vec![1.0 / dim as f64; dim];
        Self { dim, entries: OnceLock::new(), spectral: Some((w, CMatrix::identity(dim, dim))) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &CMatrix {
        self.entries.get_or_init(|| {
            let (w, v) = self.spectral.as_ref().expect("density matrix has entries or spectral form");
            let mut scaled = v.clone();
            for (j, wj) in w.iter().enumerate() {
                scaled.column_mut(j).scale_mut(*wj);
            }
            scaled * v.adjoint()
        })
    }

    pub fn spectral(&self) -> Option<(&[f64], &CMatrix)> {
        self.spectral.as_ref().map(|(w, v)| (w.as_slice(), v))
    }
}

/// Anything with expectation values: pure states and density matrices.
pub trait QuantumState {
    fn dim(&self) -> usize;
    /// `⟨op⟩`.
    fn expect(&self, op: &DenseOperator) -> C64;
    /// `⟨a b⟩`.
    fn expect2(&self, a: &DenseOperator, b: &DenseOperator) -> C64;
    /// `⟨a b c⟩`.
    fn expect3(&self, a: &DenseOperator, b: &DenseOperator, c: &DenseOperator) -> C64;
}

fn pure_expect(psi: &CVector, op: &DenseOperator) -> C64 {
    psi.dotc(&op.apply(psi))
}

fn pure_expect2(psi: &CVector, a: &DenseOperator, b: &DenseOperator) -> C64 {
    a.apply_adjoint(psi).dotc(&b.apply(psi))
}

fn pure_expect3(psi: &CVector, a: &DenseOperator, b: &DenseOperator, c: &DenseOperator) -> C64 {
    a.apply_adjoint(psi).dotc(&b.apply(&c.apply(psi)))
}

impl QuantumState for StateVector {
    fn dim(&self) -> usize {
        self.amplitudes.len()
    }
    fn expect(&self, op: &DenseOperator) -> C64 {
        pure_expect(&self.amplitudes, op)
    }
    fn expect2(&self, a: &DenseOperator, b: &DenseOperator) -> C64 {
        pure_expect2(&self.amplitudes, a, b)
    }
    fn expect3(&self, a: &DenseOperator, b: &DenseOperator, c: &DenseOperator) -> C64 {
        pure_expect3(&self.amplitudes, a, b, c)
    }
}

fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let d = a.nrows();
    let mut acc = ZERO;
    for i in 0..d {
        for j in 0..d {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

impl DensityMatrix {
    fn spectral_sum(&self, f: impl Fn(&CVector) -> C64) -> Option<C64> {
        let (w, v) = self.spectral.as_ref()?;
        let mut acc = ZERO;
        for (j, wj) in w.iter().enumerate() {
            if *wj == 0.0 {
                continue;
            }
            let col: CVector = v.column(j).into_owned();
            acc += f(&col) * *wj;
        }
        Some(acc)
    }
}

impl QuantumState for DensityMatrix {
    fn dim(&self) -> usize {
        self.dim
    }
    fn expect(&self, op: &DenseOperator) -> C64 {
        self.spectral_sum(|v| pure_expect(v, op))
            .unwrap_or_else(|| trace_product(self.entries(), &op.matrix))
    }
    fn expect2(&self, a: &DenseOperator, b: &DenseOperator) -> C64 {
        self.spectral_sum(|v| pure_expect2(v, a, b))
            .unwrap_or_else(|| trace_product(&(self.entries() * &a.matrix), &b.matrix))
    }
    fn expect3(&self, a: &DenseOperator, b: &DenseOperator, c: &DenseOperator) -> C64 {
        self.spectral_sum(|v| pure_expect3(v, a, b, c))
            .unwrap_or_else(|| trace_product(&(self.entries() * &a.matrix), &(&b.matrix * &c.matrix)))
    }
}

/// `⟨ψ|op|ψ⟩` or `Tr(ρ op)`.
pub fn expectation<S: QuantumState + ?Sized>(state: &S, op: &DenseOperator) -> Result<C64> {
    if state.dim() != op.dim() {
        return Err(OperatorError::DimensionMismatch { expected: state.dim(), found: op.dim() });
    }
    Ok(state.expect(op))
}

/// Real expectation of a Hermitian operator; rejects a non-negligible
/// imaginary part.
pub fn expectation_real<S: QuantumState + ?Sized>(state: &S, op: &DenseOperator) -> Result<f64> {
    let z = expectation(state, op)?;
    if z.im.abs() >= 1e-12 * z.re.abs().max(1.0) {
        return Err(OperatorError::NotReal(z.im));
    }
    Ok(z.re)
}

/// Undirected interaction graph with two-site edge terms and on-site terms.
#[derive(Clone, Debug)]
pub struct InteractionGraph {
    n_sites: usize,
    edges: Vec<(usize, usize, DenseOperator)>,
    onsite: BTreeMap<usize, DenseOperator>,
}

impl InteractionGraph {
    pub fn new(n_sites: usize) -> Self {
        Self { n_sites, edges: Vec::new(), onsite: BTreeMap::new() }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Adds the 4×4 Hermitian term `op` on the ordered pair `(i, j)`.
    pub fn add_edge(&mut self, i: usize, j: usize, op: DenseOperator) -> Result<()> {
        if i == j || i >= self.n_sites || j >= self.n_sites {
            return Err(OperatorError::InvalidEdge(i, j));
        }
        if op.dim() != 4 {
            return Err(OperatorError::DimensionMismatch { expected: 4, found: op.dim() });
        }
        if !op.is_hermitian() {
            return Err(OperatorError::NotHermitian(op.hermiticity_defect()));
        }
        self.edges.push((i, j, op));
        Ok(())
    }

    /// Adds (accumulates) the 2×2 Hermitian term `op` on `site`.
    pub fn add_onsite(&mut self, site: usize, op: DenseOperator) -> Result<()> {
        if site >= self.n_sites {
            return Err(OperatorError::SiteOutOfRange { site, n_qubits: self.n_sites });
        }
        if op.dim() != 2 {
            return Err(OperatorError::DimensionMismatch { expected: 2, found: op.dim() });
        }
        if !op.is_hermitian() {
            return Err(OperatorError::NotHermitian(op.hermiticity_defect()));
        }
        let entry = self.onsite.entry(site).or_insert_with(|| DenseOperator::zeros(2));
        *entry = &*entry + &op;
        Ok(())
    }

    pub fn edges(&self) -> &[(usize, usize, DenseOperator)] {
        &self.edges
    }

    pub fn onsite(&self) -> &BTreeMap<usize, DenseOperator> {
        &self.onsite
    }

    /// Total Hamiltonian: all edge terms plus all on-site terms.
    pub fn hamiltonian(&self) -> Result<DenseOperator> {
        let n = self.n_sites;
        let mut h = DenseOperator::zeros(1 << n);
        for (i, j, op) in &self.edges {
            h = &h + &embed(op, &[*i, *j], n)?;
        }
        for (s, op) in &self.onsite {
            h = &h + &embed(op, &[*s], n)?;
        }
        Ok(h)
    }

    /// Two-local part only.
    pub fn edge_hamiltonian(&self) -> Result<DenseOperator> {
        let n = self.n_sites;
        let mut h = DenseOperator::zeros(1 << n);
        for (i, j, op) in &self.edges {
            h = &h + &embed(op, &[*i, *j], n)?;
        }
        Ok(h)
    }
}

/// Star Hamiltonians `ĥ_i = ½ Σ_{j} ĥ_ij + w·ŝ_i`.
///
/// With `onsite_weight = 1` they sum to the full Hamiltonian; with `0.5` they
/// sum to the two-local part plus half of the one-local part.
pub fn star_hamiltonians(graph: &InteractionGraph, onsite_weight: f64) -> Result<Vec<DenseOperator>> {
    let n = graph.n_sites;
    let d = 1usize << n;
    let mut stars: Vec<DenseOperator> = (0..n).map(|_| DenseOperator::zeros(d)).collect();
    for (i, j, op) in &graph.edges {
        let half = embed(op, &[*i, *j], n)?.scale(0.5);
        stars[*i] = &stars[*i] + &half;
        stars[*j] = &stars[*j] + &half;
    }
    for (s, op) in &graph.onsite {
        let term = embed(op, &[*s], n)?.scale(onsite_weight);
        stars[*s] = &stars[*s] + &term;
    }
    Ok(stars)
}

/// Eigendecomposition of a Hermitian operator, eigenvalues ascending.
///
/// Within a degenerate eigenspace the choice of vectors is arbitrary; only
/// the spectral projectors are stable.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: CMatrix,
}

impl Eigensystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn state(&self, index: usize) -> StateVector {
        StateVector { amplitudes: self.vectors.column(index).into_owned() }
    }

    pub fn states(&self) -> Vec<StateVector> {
        (0..self.len()).map(|i| self.state(i)).collect()
    }

    pub fn ground_state(&self) -> StateVector {
        self.state(0)
    }
}

/// Dense exact diagonalization of a Hermitian operator.
pub fn diagonalize(op: &DenseOperator) -> Result<Eigensystem> {
    if !op.is_hermitian() {
        return Err(OperatorError::NotHermitian(op.hermiticity_defect()));
    }
    let d = op.dim();
    if d > MAX_ED_DIM {
        return Err(OperatorError::TooLarge(d));
    }
    let scale = op.matrix.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let real = op.matrix.iter().all(|z| z.im.abs() <= 1e-15 * scale);
    let (values, vectors): (Vec<f64>, CMatrix) = if real {
        let m = op.matrix.map(|z| z.re);
        let m = (&m + m.transpose()) * 0.5;
        let eig = m.symmetric_eigen();
        (eig.eigenvalues.iter().cloned().collect(), eig.eigenvectors.map(|x| C64::new(x, 0.0)))
    } else {
        let m = (&op.matrix + op.matrix.adjoint()) * C64::new(0.5, 0.0);
        let eig = m.symmetric_eigen();
        (eig.eigenvalues.iter().cloned().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted_values = order.iter().map(|&i| values[i]).collect();
    let sorted_vectors = CMatrix::from_fn(d, d, |r, c| vectors[(r, order[c])]);
    Ok(Eigensystem { values: sorted_values, vectors: sorted_vectors })
}

/// Deterministic generator for a 64-bit seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Random Hermitian matrix with `E|H_ij|² = 1` for every entry.
///
/// Diagonal entries are standard normal. Off-diagonal entries are standard
/// normal (real symmetric case) or complex normal with independent real and
/// imaginary parts of variance ½.
pub fn random_hermitian(d: usize, seed: u64, real_symmetric: bool) -> DenseOperator {
    let mut rng = seeded_rng(seed);
    random_hermitian_with(d, &mut rng, real_symmetric)
}

pub fn random_hermitian_with(d: usize, rng: &mut ChaCha8Rng, real_symmetric: bool) -> DenseOperator {
    let mut m = CMatrix::zeros(d, d);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        m[(i, i)] = C64::new(gaussian(rng), 0.0);
        for j in (i + 1)..d {
            let z = if real_symmetric {
                C64::new(gaussian(rng), 0.0)
            } else {
                C64::new(gaussian(rng) * half, gaussian(rng) * half)
            };
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    DenseOperator::with_tag_unchecked(m, HermitianTag::Hermitian)
}

/// Haar-random pure state (normalized complex Gaussian vector).
pub fn random_state(d: usize, seed: u64) -> StateVector {
    let mut rng = seeded_rng(seed);
    random_state_with(d, &mut rng)
}

pub fn random_state_with(d: usize, rng: &mut ChaCha8Rng) -> StateVector {
    loop {
        let v = CVector::from_fn(d, |_, _| C64::new(gaussian(rng), gaussian(rng)));
        if let Ok(s) = StateVector::normalized(v) {
            return s;
        }
    }
}

/// Haar-random unitary via QR of a complex Ginibre matrix with phase fixing.
pub fn random_unitary(d: usize, seed: u64) -> DenseOperator {
    let mut rng = seeded_rng(seed);
    random_unitary_with(d, &mut rng)
}

pub fn random_unitary_with(d: usize, rng: &mut ChaCha8Rng) -> DenseOperator {
    let g = CMatrix::from_fn(d, d, |_, _| C64::new(gaussian(rng), gaussian(rng)));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { ONE };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    DenseOperator::with_tag_unchecked(q, HermitianTag::General)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn x() -> DenseOperator {
        DenseOperator::pauli(Pauli::X)
    }
    fn y() -> DenseOperator {
        DenseOperator::pauli(Pauli::Y)
    }
    fn z() -> DenseOperator {
        DenseOperator::pauli(Pauli::Z)
    }

    #[test]
    fn embed_identity_case() {
        let e = embed(&z(), &[0], 1).unwrap();
        assert_eq!(e, z());
    }

    #[test]
    fn embed_second_site_is_least_significant() {
        let e = embed(&z(), &[1], 2).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| e.matrix()[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, 1.0, -1.0]);
        assert!(e.is_hermitian());
    }

    #[test]
    fn embed_two_site_matches_product() {
        let zz = z().kron(&z());
        let lhs = embed(&zz, &[0, 1], 3).unwrap();
        let rhs = &embed(&z(), &[0], 3).unwrap() * &embed(&z(), &[1], 3).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-14);
    }

    #[test]
    fn embed_respects_support_order() {
        // X on site 2 (most significant factor of the local op), Z on site 0.
        let xz = x().kron(&z());
        let lhs = embed(&xz, &[2, 0], 3).unwrap();
        let rhs = &embed(&x(), &[2], 3).unwrap() * &embed(&z(), &[0], 3).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-14);
    }

    #[test]
    fn embed_errors() {
        assert!(matches!(embed(&z(), &[0, 1], 2), Err(OperatorError::DimensionMismatch { .. })));
        assert!(matches!(embed(&z(), &[3], 2), Err(OperatorError::SiteOutOfRange { .. })));
        let zz = z().kron(&z());
        assert!(matches!(embed(&zz, &[1, 1], 2), Err(OperatorError::RepeatedSite(1))));
    }

    #[test]
    fn reduce_recovers_local_factor() {
        let h = random_hermitian(4, 3, false);
        let e = embed(&h, &[3, 1], 4).unwrap();
        let f = local_factor(&e, &[3, 1], 4, 1e-12).unwrap().unwrap();
        assert!(f.max_abs_diff(&h) < 1e-13);
        assert!(local_factor(&e, &[3], 4, 1e-12).unwrap().is_none());
    }

    #[test]
    fn commutator_of_paulis() {
        let c = commutator(&x(), &x()).unwrap();
        assert!(c.matrix().iter().all(|v| v.norm() == 0.0));
        assert_eq!(c.tag(), HermitianTag::AntiHermitian);
        let c = commutator(&x(), &y()).unwrap();
        let expected = z().times_i().scale(2.0);
        assert!(c.max_abs_diff(&expected) < 1e-15);
        assert!(commutator(&x(), &DenseOperator::identity(4)).is_err());
    }

    #[test]
    fn commutator_matches_elementwise_oracle() {
        let h = random_hermitian(4, 11, false);
        let a = random_hermitian(4, 12, false);
        let c = commutator(&h, &a).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..4 {
                    acc += h.matrix()[(i, k)] * a.matrix()[(k, j)] - a.matrix()[(i, k)] * h.matrix()[(k, j)];
                }
                assert!((acc - c.matrix()[(i, j)]).norm() < 1e-13);
            }
        }
        assert!(c.is_anti_hermitian());
    }

    #[test]
    fn expectation_examples() {
        let zero = StateVector::basis(2, 0);
        assert_eq!(expectation(&zero, &z()).unwrap(), C64::new(1.0, 0.0));
        let rho = DensityMatrix::maximally_mixed(4);
        let op = embed(&x(), &[1], 2).unwrap();
        assert_abs_diff_eq!(expectation(&rho, &op).unwrap().norm(), 0.0, epsilon = 1e-15);
        assert!(expectation(&zero, &op).is_err());
    }

    #[test]
    fn expectation_matches_quadratic_form() {
        let psi = random_state(8, 5);
        let h = random_hermitian(8, 6, false);
        let v = psi.amplitudes();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..8 {
            for j in 0..8 {
                acc += v[i].conj() * h.matrix()[(i, j)] * v[j];
            }
        }
        let e = expectation_real(&psi, &h).unwrap();
        assert!((acc.re - e).abs() < 1e-12 && acc.im.abs() < 1e-12);
        // density-matrix route agrees
        let rho = DensityMatrix::new(DensityMatrix::from_pure(&psi).entries().clone()).unwrap();
        assert!((expectation(&rho, &h).unwrap().re - e).abs() < 1e-12);
    }

    #[test]
    fn star_single_edge() {
        let mut g = InteractionGraph::new(2);
        let hxx = x().kron(&x());
        g.add_edge(0, 1, hxx.clone()).unwrap();
        let stars = star_hamiltonians(&g, 1.0).unwrap();
        let half = embed(&hxx, &[0, 1], 2).unwrap().scale(0.5);
        assert!(stars[0].max_abs_diff(&half) < 1e-15);
        assert!(stars[1].max_abs_diff(&half) < 1e-15);
    }

    #[test]
    fn star_tfim_ring_matches_closed_form() {
        let n = 4;
        let gfield = 0.7;
        let mut graph = InteractionGraph::new(n);
        for i in 0..n {
            graph.add_edge(i, (i + 1) % n, z().kron(&z()).scale(-1.0)).unwrap();
            graph.add_onsite(i, x().scale(-gfield)).unwrap();
        }
        let stars = star_hamiltonians(&graph, 1.0).unwrap();
        for i in 0..n {
            let zi = embed(&z(), &[i], n).unwrap();
            let zl = embed(&z(), &[(i + n - 1) % n], n).unwrap();
            let zr = embed(&z(), &[(i + 1) % n], n).unwrap();
            let xi = embed(&x(), &[i], n).unwrap();
            let expected = &(&zi * &(&zl + &zr)).scale(-0.5) - &xi.scale(gfield);
            assert!(stars[i].max_abs_diff(&expected) < 1e-14);
        }
    }

    #[test]
    fn star_weights_reconstruct() {
        let n = 4;
        let mut graph = InteractionGraph::new(n);
        let mut seed = 100;
        for i in 0..n {
            for j in (i + 1)..n {
                graph.add_edge(i, j, random_hermitian(4, seed, false)).unwrap();
                seed += 1;
            }
            graph.add_onsite(i, random_hermitian(2, seed, false)).unwrap();
            seed += 1;
        }
        let full = graph.hamiltonian().unwrap();
        let two_local = graph.edge_hamiltonian().unwrap();
        let one_local = &full - &two_local;
        let sum = |w: f64| {
            star_hamiltonians(&graph, w)
                .unwrap()
                .iter()
                .fold(DenseOperator::zeros(1 << n), |acc, h| &acc + h)
        };
        assert!(sum(1.0).max_abs_diff(&full) < 1e-12);
        let expected_half = &two_local + &one_local.scale(0.5);
        assert!(sum(0.5).max_abs_diff(&expected_half) < 1e-12);
    }

    #[test]
    fn diagonalize_paulis() {
        let e = diagonalize(&z()).unwrap();
        assert_eq!(e.values, vec![-1.0, 1.0]);
        assert!((e.state(0).inner(&StateVector::basis(2, 1))).norm() > 1.0 - 1e-14);
        assert!((e.state(1).inner(&StateVector::basis(2, 0))).norm() > 1.0 - 1e-14);
        let e = diagonalize(&x()).unwrap();
        assert_abs_diff_eq!(e.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
        assert!(diagonalize(&z().times_i()).is_err());
    }

    #[test]
    fn diagonalize_residual_and_orthonormality() {
        let h = random_hermitian(16, 9, false);
        let e = diagonalize(&h).unwrap();
        let norm = h.norm_inf();
        for i in 0..16 {
            let v = e.vectors.column(i).into_owned();
            let r = h.matrix() * &v - &v * C64::new(e.values[i], 0.0);
            assert!(r.norm() < 1e-9 * norm);
        }
        let gram = e.vectors.adjoint() * &e.vectors;
        assert!((gram - CMatrix::identity(16, 16)).norm() < 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn random_hermitian_is_deterministic_and_symmetric() {
        let a = random_hermitian(5, 42, true);
        assert_eq!(a, random_hermitian(5, 42, true));
        assert_eq!(a.matrix(), &a.matrix().transpose());
        assert!(a.is_real());
        let b = random_hermitian(5, 42, false);
        assert!(b.is_hermitian());
        assert_eq!(b, random_hermitian(5, 42, false));
    }

    #[test]
    fn random_state_is_normalized_and_deterministic() {
        let s = random_state(16, 7);
        assert!((s.amplitudes().norm() - 1.0).abs() < 1e-12);
        assert_eq!(s, random_state(16, 7));
        assert_ne!(s, random_state(16, 8));
    }

    #[test]
    fn random_unitary_is_unitary() {
        let u = random_unitary(8, 1);
        let p = u.matrix().adjoint() * u.matrix();
        assert!((p - CMatrix::identity(8, 8)).norm() < 1e-12);
    }

    #[test]
    fn pauli_term_operator() {
        let t = PauliTerm::new(2.0, [(0, Pauli::Z), (2, Pauli::X)]);
        let op = t.to_operator(3).unwrap();
        let expected = (&embed(&z(), &[0], 3).unwrap() * &embed(&x(), &[2], 3).unwrap()).scale(2.0);
        assert!(op.max_abs_diff(&expected) < 1e-15);
        assert!(PauliTerm::new(1.0, [(3, Pauli::X)]).to_operator(3).is_err());
        let id = PauliTerm::identity(1.5).to_operator(2).unwrap();
        assert!(id.max_abs_diff(&DenseOperator::identity(4).scale(1.5)) < 1e-15);
    }

    #[test]
    fn density_matrix_validation() {
        let mut m = CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        assert!(DensityMatrix::new(m.clone()).is_ok());
        m[(0, 0)] = C64::new(1.5, 0.0);
        m[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        assert!(DensityMatrix::from_spectral(vec![0.5, 0.6], CMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn sparse_and_dense_products_agree() {
        let op = embed(&random_hermitian(4, 1, false), &[1, 3], 5).unwrap();
        let v = random_state(32, 2);
        let dense = op.matrix() * v.amplitudes();
        assert!((op.apply(v.amplitudes()) - dense).norm() < 1e-13);
        let dense_adj = op.matrix().adjoint() * v.amplitudes();
        assert!((op.apply_adjoint(v.amplitudes()) - dense_adj).norm() < 1e-13);
    }
}
