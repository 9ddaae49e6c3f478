//! Real quadric systems cut out by Nash conditions, and numerical tools to
//! sample, measure and trace their solution sets.
//!
//! A state `ψ = x + iy` on `d` amplitudes is a point `v = (x, y) ∈ ℝ^{2d}`.
//! Each Nash condition `⟨ψ|C|ψ⟩ = 0` with Hermitian `C = C_r + iC_i` becomes
//! the homogeneous quadric `vᵀQv = 0`, `Q = [[C_r, −C_i], [C_i, C_r]]`.
//! Solutions are sought on the unit sphere; the remaining gauge freedom is a
//! global phase (complex systems) or a sign (real charts).
//!
//! Solving uses random-start Gauss–Newton. It samples the variety but does not
//! certify that every component was found.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::nash::{NashError, NashInstance};
use crate::operator::{commutator, embed, seeded_rng, DenseOperator, OperatorError, Pauli, StateVector, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NewtonFailure {
    #[error("start vector is zero")]
    ZeroStart,
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("Jacobian rank collapse at iteration {iteration}")]
    RankCollapse { iteration: usize },
    #[error("line search failed at iteration {iteration} (residual {residual:.3e})")]
    LineSearch { iteration: usize, residual: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VarietyError {
    #[error(transparent)]
    Nash(#[from] NashError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Newton(#[from] NewtonFailure),
    #[error("observables are not real symmetric")]
    NotRealSymmetric,
    #[error("real-symmetric systems need single-qubit blocks with (iX, iY, iZ) generators")]
    UnsupportedInstance,
    #[error("form {index} is invalid: {reason}")]
    InvalidForm { index: usize, reason: String },
    #[error("point residual {0:.3e} is too large")]
    ResidualTooLarge(f64),
    #[error("expected a one-dimensional tangent space, found {0}")]
    TangentDimension(usize),
    #[error("operation needs a real-symmetric two-qubit system")]
    WrongSystemKind,
    #[error("point lies on the projection pole")]
    Pole,
    #[error("vector has length {found}, expected {expected}")]
    Length { expected: usize, found: usize },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T, E = VarietyError> = std::result::Result<T, E>;

/// Symmetry acting on solutions besides scaling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Gauge {
    /// `(x, y) ↦ (x cos θ − y sin θ, x sin θ + y cos θ)`.
    Phase,
    /// `v ↦ −v`.
    Sign,
    None,
}

impl Gauge {
    pub fn dim(self) -> usize {
        match self {
            Gauge::Phase => 1,
            Gauge::Sign | Gauge::None => 0,
        }
    }
}

/// The structure matrices of a real-symmetric instance with single-qubit
/// blocks: `B_X = [ĥ, X̂]`, `B_Z = [ĥ, Ẑ]` (real antisymmetric) and
/// `B_Y = i[ĥ, Ŷ]` (real symmetric), one triple per block.
#[derive(Clone, Debug)]
pub struct RealStructure {
    pub b_x: Vec<DMatrix<f64>>,
    pub b_y: Vec<DMatrix<f64>>,
    pub b_z: Vec<DMatrix<f64>>,
}

#[derive(Clone, Debug)]
pub struct QuadricSystem {
    ambient_dim: usize,
    forms: Vec<DMatrix<f64>>,
    gauge: Gauge,
    real: Option<RealStructure>,
}

fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).abs().max()
}

impl QuadricSystem {
    /// Forms must be square, of size `ambient_dim` and symmetric to `1e-12`.
    pub fn new(ambient_dim: usize, forms: Vec<DMatrix<f64>>, gauge: Gauge) -> Result<Self> {
        for (index, f) in forms.iter().enumerate() {
            if f.nrows() != ambient_dim || f.ncols() != ambient_dim {
                return Err(VarietyError::InvalidForm { index, reason: format!("shape {}x{}", f.nrows(), f.ncols()) });
            }
            let dev = symmetry_defect(f);
            if dev > 1e-12 {
                return Err(VarietyError::InvalidForm { index, reason: format!("asymmetry {dev:.3e}") });
            }
        }
        if gauge == Gauge::Phase && !ambient_dim.is_multiple_of(2) {
            return Err(VarietyError::InvalidForm { index: 0, reason: "phase gauge needs even dimension".into() });
        }
        Ok(Self { ambient_dim, forms, gauge, real: None })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn forms(&self) -> &[DMatrix<f64>] {
        &self.forms
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    pub fn real_structure(&self) -> Option<&RealStructure> {
        self.real.as_ref()
    }

    pub fn with_gauge(mut self, gauge: Gauge) -> Self {
        self.gauge = gauge;
        self
    }

    /// `vᵀQ_c v` for every form.
    pub fn evaluate(&self, v: &DVector<f64>) -> Vec<f64> {
        self.forms.iter().map(|q| v.dot(&(q * v))).collect()
    }

    /// `max_c |v̂ᵀQ_c v̂|` at the normalized point `v̂ = v/‖v‖`.
    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        let n2 = v.norm_squared();
        if n2 == 0.0 {
            return f64::INFINITY;
        }
        self.evaluate(v).iter().map(|x| x.abs() / n2).fold(0.0, f64::max)
    }

    /// Pull the forms back along the orthonormal columns of `basis`.
    pub fn restricted(&self, basis: &DMatrix<f64>) -> Result<Self> {
        if basis.nrows() != self.ambient_dim {
            return Err(VarietyError::Length { expected: self.ambient_dim, found: basis.nrows() });
        }
        let gram = basis.transpose() * basis;
        if (gram - DMatrix::identity(basis.ncols(), basis.ncols())).abs().max() > 1e-12 {
            return Err(VarietyError::Invariant("restriction basis is not orthonormal".into()));
        }
        let forms = self
            .forms
            .iter()
            .map(|q| {
                let m = basis.transpose() * q * basis;
                (&m + m.transpose()) * 0.5
            })
            .collect();
        QuadricSystem::new(basis.ncols(), forms, Gauge::None)
    }

    /// Append further forms.
    pub fn with_forms(&self, extra: Vec<DMatrix<f64>>) -> Result<Self> {
        let mut forms = self.forms.clone();
        forms.extend(extra);
        QuadricSystem::new(self.ambient_dim, forms, self.gauge)
    }

    /// The two-quadric system `xᵀB_iY x = 0` on `ℝ^d` for a real-symmetric
    /// system.
    pub fn tilde_v_system(&self) -> Result<Self> {
        let real = self.real.as_ref().ok_or(VarietyError::WrongSystemKind)?;
        QuadricSystem::new(real.b_y[0].nrows(), real.b_y.clone(), Gauge::Sign)
    }

    fn gauge_directions(&self, v: &DVector<f64>) -> Vec<DVector<f64>> {
        match self.gauge {
            Gauge::Phase => {
                let d = self.ambient_dim / 2;
                let mut w = DVector::zeros(self.ambient_dim);
                for k in 0..d {
                    w[k] = -v[d + k];
                    w[d + k] = v[k];
                }
                let n = w.norm();
                if n > 0.0 {
                    vec![w / n]
                } else {
                    vec![]
                }
            }
            Gauge::Sign | Gauge::None => vec![],
        }
    }

    /// Jacobian of the forms plus the sphere constraint `vᵀv`.
    fn jacobian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let m = self.forms.len() + 1;
        let mut j = DMatrix::zeros(m, self.ambient_dim);
        for (c, q) in self.forms.iter().enumerate() {
            let g = q * v * 2.0;
            j.row_mut(c).copy_from(&g.transpose());
        }
        j.row_mut(m - 1).copy_from(&(v * 2.0).transpose());
        j
    }

    fn residual_vector(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut r: Vec<f64> = self.evaluate(v);
        r.push(v.norm_squared() - 1.0);
        DVector::from_vec(r)
    }

    /// Bring a point to a canonical gauge representative.
    pub fn canonical(&self, v: &DVector<f64>) -> DVector<f64> {
        match self.gauge {
            Gauge::Phase => {
                let d = self.ambient_dim / 2;
                let amp: Vec<C64> = (0..d).map(|k| C64::new(v[k], v[d + k])).collect();
                let (idx, _) = amp
                    .iter()
                    .enumerate()
                    .fold((0, -1.0), |best, (k, z)| if z.norm() > best.1 + 1e-9 { (k, z.norm()) } else { best });
                let phase = amp[idx].conj() / amp[idx].norm();
                let mut out = DVector::zeros(self.ambient_dim);
                for k in 0..d {
                    let z = amp[k] * phase;
                    out[k] = z.re;
                    out[d + k] = z.im;
                }
                out
            }
            Gauge::Sign => {
                let first = v.iter().find(|x| x.abs() > 1e-9).copied().unwrap_or(1.0);
                if first < 0.0 {
                    -v
                } else {
                    v.clone()
                }
            }
            Gauge::None => v.clone(),
        }
    }

    /// Angle between two unit points after aligning the gauge.
    pub fn gauge_distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let overlap = match self.gauge {
            Gauge::Phase => {
                let d = self.ambient_dim / 2;
                let mut z = C64::new(0.0, 0.0);
                for k in 0..d {
                    z += C64::new(a[k], -a[d + k]) * C64::new(b[k], b[d + k]);
                }
                z.norm()
            }
            Gauge::Sign => a.dot(b).abs(),
            Gauge::None => a.dot(b),
        };
        overlap.clamp(-1.0, 1.0).acos()
    }
}

/// Convert a normalized state to real coordinates `(Re ψ, Im ψ)`.
pub fn state_to_real(psi: &StateVector) -> DVector<f64> {
    let a = psi.amplitudes();
    let d = a.len();
    DVector::from_fn(2 * d, |k, _| if k < d { a[k].re } else { a[k - d].im })
}

/// Inverse of [`state_to_real`], normalizing the result.
pub fn real_to_state(v: &DVector<f64>) -> Result<StateVector> {
    let d = v.len() / 2;
    let amps = crate::operator::CVector::from_fn(d, |k, _| C64::new(v[k], v[d + k]));
    Ok(StateVector::normalized(amps)?)
}

/// Real quadric of `ψ ↦ ⟨ψ|C|ψ⟩` for Hermitian `C`.
pub fn hermitian_form(c: &DenseOperator) -> DMatrix<f64> {
    let d = c.dim();
    let m = c.matrix();
    let mut q = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let cr = 0.5 * (m[(i, j)].re + m[(j, i)].re);
            let ci = 0.5 * (m[(i, j)].im - m[(j, i)].im);
            q[(i, j)] = cr;
            q[(d + i, d + j)] = cr;
            q[(i, d + j)] = -ci;
            q[(d + i, j)] = ci;
        }
    }
    q
}

/// One form per (block, generator) from `⟨ψ|[ĥ_i, Â_iα]|ψ⟩`.
///
/// With `real_symmetric`, the observables must be real and the blocks single
/// qubits with generators `(iX̂, iŶ, iẐ)`; the structure matrices are then
/// checked and kept.
pub fn build_system(inst: &NashInstance, real_symmetric: bool) -> Result<QuadricSystem> {
    let d = inst.dim();
    let mut forms = Vec::new();
    for (h, gens) in inst.observables().iter().zip(inst.generators()) {
        for a in gens {
            let c = commutator(h, a)?;
            forms.push(hermitian_form(&c));
        }
    }
    let mut sys = QuadricSystem::new(2 * d, forms, Gauge::Phase)?;
    if real_symmetric {
        sys.real = Some(real_structure(inst)?);
    }
    Ok(sys)
}

fn real_structure(inst: &NashInstance) -> Result<RealStructure> {
    let n = inst.n_qubits();
    if inst.observables().iter().any(|h| !h.is_real()) {
        return Err(VarietyError::NotRealSymmetric);
    }
    let mut out = RealStructure { b_x: vec![], b_y: vec![], b_z: vec![] };
    for ((h, block), gens) in inst.observables().iter().zip(inst.blocks()).zip(inst.generators()) {
        if block.len() != 1 || gens.len() != 3 {
            return Err(VarietyError::UnsupportedInstance);
        }
        let q = block[0];
        let paulis: Vec<DenseOperator> =
            Pauli::ALL.iter().map(|&p| embed(&DenseOperator::pauli(p), &[q], n)).collect::<Result<_, _>>()?;
        for (g, p) in gens.iter().zip(&paulis) {
            if g.max_abs_diff(&p.times_i()) > 1e-14 {
                return Err(VarietyError::UnsupportedInstance);
            }
        }
        let bx = commutator(h, &paulis[0])?;
        let by = commutator(h, &paulis[1])?.times_i();
        let bz = commutator(h, &paulis[2])?;
        let mut mats = Vec::new();
        for (op, symmetric) in [(&bx, false), (&by, true), (&bz, false)] {
            if op.matrix().iter().any(|z| z.im.abs() > 1e-12) {
                return Err(VarietyError::Invariant("structure matrix is not real".into()));
            }
            let m = op.matrix().map(|z| z.re);
            let defect = if symmetric { symmetry_defect(&m) } else { (&m + m.transpose()).abs().max() };
            if defect > 1e-12 {
                return Err(VarietyError::Invariant("structure matrix has the wrong symmetry".into()));
            }
            mats.push(m);
        }
        out.b_x.push(mats[0].clone());
        out.b_y.push(mats[1].clone());
        out.b_z.push(mats[2].clone());
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ChartTag {
    Sphere,
    Stereographic,
}

/// A unit-norm point with its residual recorded at creation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarietyPoint {
    pub coords: Vec<f64>,
    pub residual: f64,
    pub chart: ChartTag,
}

impl VarietyPoint {
    /// Normalizes `coords` and records the residual in `sys`.
    pub fn new(sys: &QuadricSystem, coords: &DVector<f64>) -> Result<Self> {
        if coords.len() != sys.ambient_dim {
            return Err(VarietyError::Length { expected: sys.ambient_dim, found: coords.len() });
        }
        let n = coords.norm();
        if n == 0.0 {
            return Err(NewtonFailure::ZeroStart.into());
        }
        let v = coords / n;
        Ok(Self { residual: sys.residual(&v), coords: v.iter().cloned().collect(), chart: ChartTag::Sphere })
    }

    pub fn vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coords)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Step shrink factor when the residual norm does not decrease.
    pub armijo: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100, armijo: 0.5 }
    }
}

/// Gauss–Newton with minimum-norm steps on the forms and the unit-norm
/// constraint. Success means residual `< tol` at the renormalized point.
pub fn newton_solve(sys: &QuadricSystem, start: &DVector<f64>, tol: f64, max_iter: usize) -> Result<VarietyPoint, NewtonFailure> {
    newton_solve_with(sys, start, &NewtonOptions { tol, max_iter, ..NewtonOptions::default() })
}

pub fn newton_solve_with(sys: &QuadricSystem, start: &DVector<f64>, opts: &NewtonOptions) -> Result<VarietyPoint, NewtonFailure> {
    let n0 = start.norm();
    if n0 == 0.0 || !n0.is_finite() {
        return Err(NewtonFailure::ZeroStart);
    }
    // A start that is already unit length is kept bit-for-bit.
    let mut v = if (n0 - 1.0).abs() < 1e-14 { start.clone() } else { start / n0 };
    let mut residual = sys.residual(&v);
    for iteration in 0..opts.max_iter {
        if residual < opts.tol {
            break;
        }
        let j = sys.jacobian(&v);
        let r = sys.residual_vector(&v);
        let svd = j.svd(true, true);
        let smax = svd.singular_values.max();
        if !(smax > 1e-300) || !smax.is_finite() {
            return Err(NewtonFailure::RankCollapse { iteration });
        }
        let step = match svd.solve(&r, smax * 1e-13) {
            Ok(s) => -s,
            Err(_) => return Err(NewtonFailure::RankCollapse { iteration }),
        };
        if step.iter().any(|x| !x.is_finite()) {
            return Err(NewtonFailure::RankCollapse { iteration });
        }
        let r0 = r.norm();
        let mut alpha = 1.0;
        loop {
            let cand = &v + &step * alpha;
            if sys.residual_vector(&cand).norm() < r0 {
                v = cand;
                break;
            }
            alpha *= opts.armijo;
            if alpha < 1e-10 {
                return Err(NewtonFailure::LineSearch { iteration, residual });
            }
        }
        v /= v.norm();
        residual = sys.residual(&v);
    }
    if residual < opts.tol {
        Ok(VarietyPoint { coords: v.iter().cloned().collect(), residual, chart: ChartTag::Sphere })
    } else {
        Err(NewtonFailure::NoConvergence { iterations: opts.max_iter, residual })
    }
}

/// Uniform point on the unit sphere in `ℝ^n`.
pub fn random_sphere_point(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let nrm = v.norm();
        if nrm > 1e-12 {
            return v / nrm;
        }
    }
}

/// Angular threshold for merging gauge-equivalent solutions.
pub const DEDUP_ANGLE: f64 = 1e-6;

/// Newton from `n_starts` uniform sphere points, deduplicated under the gauge
/// and sorted by canonical coordinates. Start `k` draws from stream `k` of the
/// seeded generator, so the output does not depend on scheduling.
pub fn random_start_search(sys: &QuadricSystem, n_starts: usize, seed: u64, tol: f64) -> Vec<VarietyPoint> {
    let found: Vec<Option<VarietyPoint>> = (0..n_starts)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeded_rng(seed);
            rng.set_stream(k as u64);
            let start = random_sphere_point(sys.ambient_dim, &mut rng);
            newton_solve(sys, &start, tol, NewtonOptions::default().max_iter).ok()
        })
        .collect();
    dedup_points(sys, found.into_iter().flatten())
}

/// Merge points closer than [`DEDUP_ANGLE`] after gauge alignment; replace
/// each survivor by its canonical representative and sort.
pub fn dedup_points(sys: &QuadricSystem, points: impl IntoIterator<Item = VarietyPoint>) -> Vec<VarietyPoint> {
    let mut kept: Vec<VarietyPoint> = Vec::new();
    for p in points {
        let v = p.vector();
        if kept.iter().all(|q| sys.gauge_distance(&q.vector(), &v) > DEDUP_ANGLE) {
            let c = sys.canonical(&v);
            kept.push(VarietyPoint { residual: sys.residual(&c), coords: c.iter().cloned().collect(), chart: p.chart });
        }
    }
    kept.sort_by(|a, b| {
        a.coords
            .iter()
            .zip(&b.coords)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    kept
}

/// Tangent space estimate at a variety point.
#[derive(Clone, Debug, Serialize)]
pub struct TangentFrame {
    pub base: VarietyPoint,
    /// Orthonormal tangent directions, orthogonal to the base and the gauge.
    pub basis: Vec<Vec<f64>>,
    pub est_dim: usize,
}

/// Null space of the constraint Jacobian (forms plus sphere) at `p`, with
/// singular values below `rank_tol · σ_max` counted as zero, minus the gauge
/// directions.
pub fn estimate_local_dimension(sys: &QuadricSystem, p: &VarietyPoint, rank_tol: f64) -> Result<TangentFrame> {
    if p.residual >= 1e-8 {
        return Err(VarietyError::ResidualTooLarge(p.residual));
    }
    let v = p.vector();
    let n = sys.ambient_dim;
    let j = sys.jacobian(&v);
    // Pad to square so the SVD yields a full right basis.
    let rows = j.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (j.nrows(), n)).copy_from(&j);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.max();
    let null: Vec<DVector<f64>> = (0..n)
        .filter(|&k| svd.singular_values[k] < rank_tol * smax)
        .map(|k| v_t.row(k).transpose())
        .collect();
    let gauge = sys.gauge_directions(&v);
    let projected: Vec<DVector<f64>> = null
        .iter()
        .map(|w| gauge.iter().fold(w.clone(), |acc, g| &acc - g * g.dot(&acc)))
        .collect();
    let est_dim = null.len().saturating_sub(sys.gauge.dim());
    let basis = orthonormal_span(&projected, est_dim);
    Ok(TangentFrame { base: p.clone(), basis: basis.iter().map(|b| b.iter().cloned().collect()).collect(), est_dim })
}

fn orthonormal_span(vectors: &[DVector<f64>], rank: usize) -> Vec<DVector<f64>> {
    if vectors.is_empty() || rank == 0 {
        return vec![];
    }
    let n = vectors[0].len();
    let m = DMatrix::from_columns(vectors);
    let svd = m.svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    order.iter().take(rank.min(n)).map(|&k| u.column(k).into_owned()).collect()
}

/// Result of tracing a one-dimensional component.
#[derive(Clone, Debug, Serialize)]
pub struct Trace {
    pub points: Vec<VarietyPoint>,
    pub closed: bool,
    pub steps: usize,
    /// Set when the corrector failed; `points` then holds the partial trace.
    pub failure: Option<String>,
}

fn segment_distance(p: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let ab = b - a;
    let denom = ab.norm_squared();
    let t = if denom > 0.0 { ((p - a).dot(&ab) / denom).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

/// Predictor-corrector continuation along a one-dimensional component.
///
/// Closure is declared once the path passes within `step/2` of the start
/// while moving in a direction with cosine above 0.9 to the initial one.
pub fn trace_component(sys: &QuadricSystem, p: &VarietyPoint, step: f64, max_steps: usize) -> Result<Trace> {
    const RANK_TOL: f64 = 1e-7;
    let frame = estimate_local_dimension(sys, p, RANK_TOL)?;
    if frame.est_dim != 1 {
        return Err(VarietyError::TangentDimension(frame.est_dim));
    }
    let start = p.vector();
    let t0 = DVector::from_column_slice(&frame.basis[0]);
    let mut dir = t0.clone();
    let mut current = start.clone();
    let mut points = vec![p.clone()];
    let opts = NewtonOptions::default();
    let min_steps_before_closure = 3;
    for step_index in 1..=max_steps {
        let predicted = &current + &dir * step;
        let next = match newton_solve_with(sys, &predicted, &NewtonOptions { tol: opts.tol.min(1e-11), ..opts }) {
            Ok(q) => q,
            Err(e) => {
                return Ok(Trace { points, closed: false, steps: step_index - 1, failure: Some(e.to_string()) });
            }
        };
        let frame = match estimate_local_dimension(sys, &next, RANK_TOL) {
            Ok(f) if f.est_dim == 1 => f,
            Ok(f) => {
                let msg = format!("tangent dimension {} at step {step_index}", f.est_dim);
                return Ok(Trace { points, closed: false, steps: step_index - 1, failure: Some(msg) });
            }
            Err(e) => return Ok(Trace { points, closed: false, steps: step_index - 1, failure: Some(e.to_string()) }),
        };
        let mut t = DVector::from_column_slice(&frame.basis[0]);
        if t.dot(&dir) < 0.0 {
            t = -t;
        }
        let next_v = next.vector();
        if step_index >= min_steps_before_closure
            && segment_distance(&start, &current, &next_v) < step / 2.0
            && t.dot(&t0) > 0.9
        {
            return Ok(Trace { points, closed: true, steps: step_index, failure: None });
        }
        points.push(next);
        current = next_v;
        dir = t;
    }
    Ok(Trace { points, closed: false, steps: max_steps, failure: None })
}

/// Symmetric Hausdorff distance between two point sets.
pub fn hausdorff_distance(a: &[VarietyPoint], b: &[VarietyPoint]) -> f64 {
    let directed = |a: &[VarietyPoint], b: &[VarietyPoint]| {
        a.iter()
            .map(|p| {
                let pv = p.vector();
                b.iter().map(|q| (&pv - q.vector()).norm()).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

/// Checks `x ∈ W̃′` for a real-symmetric system: `xᵀB_iY x = 0` for every
/// block. For members, the point `(x, λx)` is verified against every form of
/// the full system, which must vanish independently of `λ`.
pub fn tilde_v_membership(x: &DVector<f64>, lambda: f64, sys: &QuadricSystem, tol: f64) -> Result<bool> {
    let real = sys.real.as_ref().ok_or(VarietyError::WrongSystemKind)?;
    let d = real.b_y[0].nrows();
    if x.len() != d {
        return Err(VarietyError::Length { expected: d, found: x.len() });
    }
    let n2 = x.norm_squared();
    let member = real.b_y.iter().all(|b| (x.dot(&(b * x)) / n2).abs() < tol);
    if member {
        let mut v = DVector::zeros(2 * d);
        v.rows_mut(0, d).copy_from(x);
        v.rows_mut(d, d).copy_from(&(x * lambda));
        let full = sys.residual(&v);
        if full >= tol {
            return Err(VarietyError::Invariant(format!("W̃′ member has full residual {full:.3e}")));
        }
    }
    Ok(member)
}

/// Chart used by [`stereographic`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Chart {
    /// Projection from `(−1, 0, 0, 0)`.
    Standard,
    /// Projection from `(1, 0, 0, 0)`.
    Antipodal,
}

/// `x_i = X_i / (1 + X₀)` for a unit 4-vector (`1 − X₀` in the antipodal
/// chart).
pub fn stereographic(p: &[f64; 4], chart: Chart) -> Result<[f64; 3]> {
    let denom = match chart {
        Chart::Standard => 1.0 + p[0],
        Chart::Antipodal => 1.0 - p[0],
    };
    if denom.abs() < 1e-12 {
        return Err(VarietyError::Pole);
    }
    Ok([p[1] / denom, p[2] / denom, p[3] / denom])
}

/// `X_i = 2x_i/(1 + r²)`, `X₀ = ±(1 − r²)/(1 + r²)`.
pub fn inverse_stereographic(x: &[f64; 3], chart: Chart) -> [f64; 4] {
    let r2 = x.iter().map(|c| c * c).sum::<f64>();
    let s = 1.0 + r2;
    let x0 = (1.0 - r2) / s;
    let x0 = match chart {
        Chart::Standard => x0,
        Chart::Antipodal => -x0,
    };
    [x0, 2.0 * x[0] / s, 2.0 * x[1] / s, 2.0 * x[2] / s]
}
