//! Quantum Prisoner's Dilemma as a two-observable game on two qubits.
//!
//! Player 1 controls qubit 0 and player 2 qubit 1; basis state `|ab⟩` means
//! player 1 plays `a` and player 2 plays `b` (0 = cooperate, 1 = defect).
//! Nash states that are real up to local `Ẑ` phases ("rebits") form a real
//! variety in `ℝ⁴`, and entanglement orbits are level sets of
//! `χ = X₀X₃ − X₁X₂`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::nash::{
    self, classify_local, global_su2_check, nash_residual, LocalKind, NashError, NashInstance, NashResidual,
    OptimizationMode, Su2Optimum,
};
use crate::operator::{local_factor, seeded_rng, CMatrix, CVector, DenseOperator, OperatorError, StateVector, C64};
use crate::variety::{
    self, inverse_stereographic, newton_solve, random_sphere_point, random_start_search, stereographic, Chart, Gauge,
    QuadricSystem, VarietyError,
};

/// Membership tolerance for the rebit variety.
pub const VARIETY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpdError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Nash(#[from] NashError),
    #[error(transparent)]
    Variety(#[from] VarietyError),
    #[error("state is not torus-equivalent to a rebit (phase invariant {delta:.6})")]
    NotRebit { delta: f64 },
    #[error("state must have dimension 4, got {0}")]
    NotTwoQubit(usize),
    #[error("point is off the Nash variety (residual {0:.3e})")]
    OffVariety(f64),
    #[error("invalid entanglement parameter {0}")]
    InvalidChi(f64),
    #[error("strategy {0} acts outside its block")]
    StrategyOutsideBlock(usize),
    #[error("expected {expected} strategies, got {found}")]
    StrategyCount { expected: usize, found: usize },
    #[error("strategies do not commute (order dependence {0:.3e})")]
    OrderDependent(f64),
}

pub type Result<T, E = QpdError> = std::result::Result<T, E>;

fn diag(entries: [f64; 4]) -> DenseOperator {
    DenseOperator::from_real(&DMatrix::from_diagonal(&DVector::from_row_slice(&entries))).expect("square")
}

/// Payoff operators `(ĥ₁, ĥ₂)`, diagonal in the computational basis.
pub fn qpd_payoff_operators() -> (DenseOperator, DenseOperator) {
    (diag([3.0, 0.0, 5.0, 1.0]), diag([3.0, 5.0, 0.0, 1.0]))
}

/// Real amplitudes `(X₀, X₁, X₂, X₃)` on `(|00⟩, |01⟩, |10⟩, |11⟩)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RebitState {
    pub x: [f64; 4],
}

impl RebitState {
    pub fn new(x: [f64; 4]) -> Self {
        Self { x }
    }

    pub fn normalized(x: [f64; 4]) -> Result<Self> {
        let n = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(OperatorError::ZeroVector.into());
        }
        Ok(Self { x: x.map(|c| c / n) })
    }

    pub fn norm(&self) -> f64 {
        self.x.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn to_state(&self) -> Result<StateVector> {
        Ok(StateVector::from_real(&self.x)?)
    }

    /// Exchange the players: `X₁ ↔ X₂`.
    pub fn swapped(&self) -> Self {
        Self { x: [self.x[0], self.x[2], self.x[1], self.x[3]] }
    }

    pub fn project(&self, chart: Chart) -> Result<ProjectedPoint> {
        let p = stereographic(&self.x, chart)?;
        Ok(ProjectedPoint { x: p[0], y: p[1], z: p[2] })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProjectedPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ProjectedPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_rebit(&self) -> RebitState {
        RebitState { x: inverse_stereographic(&[self.x, self.y, self.z], Chart::Standard) }
    }
}

/// Observables with block-local strategy groups and an initial state.
#[derive(Clone, Debug)]
pub struct GameInstance {
    pub instance: NashInstance,
    pub initial_state: StateVector,
}

impl GameInstance {
    pub fn new(instance: NashInstance, initial_state: StateVector) -> Result<Self> {
        if instance.dim() != initial_state.dim() {
            return Err(OperatorError::DimensionMismatch { expected: instance.dim(), found: initial_state.dim() }.into());
        }
        Ok(Self { instance, initial_state })
    }

    /// The Quantum Prisoner's Dilemma with `SU(2)` strategies per player.
    pub fn qpd(initial_state: StateVector) -> Result<Self> {
        let (h1, h2) = qpd_payoff_operators();
        Self::new(NashInstance::single_qubit_blocks(2, vec![h1, h2])?, initial_state)
    }
}

/// `u_i = ⟨ψ|(∏Û_j)† ĥ_i (∏Û_j)|ψ⟩` for block-local strategies `Û_j`.
pub fn payoffs(state: &StateVector, game: &GameInstance, strategies: &[DenseOperator]) -> Result<Vec<f64>> {
    let inst = &game.instance;
    if strategies.len() != inst.n_blocks() {
        return Err(QpdError::StrategyCount { expected: inst.n_blocks(), found: strategies.len() });
    }
    if state.dim() != inst.dim() {
        return Err(OperatorError::DimensionMismatch { expected: inst.dim(), found: state.dim() }.into());
    }
    for (j, (u, block)) in strategies.iter().zip(inst.blocks()).enumerate() {
        if u.dim() != inst.dim() || local_factor(u, block, inst.n_qubits(), 1e-12)?.is_none() {
            return Err(QpdError::StrategyOutsideBlock(j));
        }
    }
    let forward = strategies.iter().fold(state.amplitudes().clone(), |v, u| u.apply(&v));
    let backward = strategies.iter().rev().fold(state.amplitudes().clone(), |v, u| u.apply(&v));
    let gap = (&forward - &backward).norm();
    if gap > 1e-12 {
        return Err(QpdError::OrderDependent(gap));
    }
    let moved = StateVector::normalized(forward)?;
    Ok(inst
        .observables()
        .iter()
        .map(|h| moved.amplitudes().dotc(&h.apply(moved.amplitudes())).re)
        .collect())
}

/// Player `i` wins when `u_i ≥ u_j` for every `j`.
pub fn winners(payoffs: &[f64]) -> Vec<bool> {
    let best = payoffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    payoffs.iter().map(|&u| u >= best).collect()
}

/// Result of removing the local phases `e^{i(α₀ + α₁Ẑ₁ + α₂Ẑ₂)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Canonicalized {
    pub rebit: RebitState,
    /// `(α₀, α₁, α₂)`.
    pub phases: [f64; 3],
}

/// Phase pattern of `α₀ + α₁z₁ + α₂z₂` on `|ab⟩`, with `z = +1` for bit 0.
const TORUS_ROWS: [[f64; 3]; 4] = [[1.0, 1.0, 1.0], [1.0, 1.0, -1.0], [1.0, -1.0, 1.0], [1.0, -1.0, -1.0]];

/// Apply `e^{i(α₀ + α₁Ẑ₁ + α₂Ẑ₂)}` (Ẑ₁ on qubit 0).
pub fn torus_action(psi: &StateVector, phases: [f64; 3]) -> Result<StateVector> {
    if psi.dim() != 4 {
        return Err(QpdError::NotTwoQubit(psi.dim()));
    }
    let v = CVector::from_fn(4, |k, _| {
        let a: f64 = (0..3).map(|j| TORUS_ROWS[k][j] * phases[j]).sum();
        psi.amplitudes()[k] * C64::from_polar(1.0, a)
    });
    Ok(StateVector::normalized(v)?)
}

/// Find torus phases making every amplitude real.
///
/// With at most three nonzero amplitudes the phases are solved exactly. With
/// four, `δ = φ₀ + φ₃ − φ₁ − φ₂` is torus invariant and must vanish mod π;
/// otherwise the failure carries `δ`.
pub fn rebit_canonicalize(psi: &StateVector) -> Result<Canonicalized> {
    if psi.dim() != 4 {
        return Err(QpdError::NotTwoQubit(psi.dim()));
    }
    let amps = psi.amplitudes();
    let support: Vec<usize> = (0..4).filter(|&k| amps[k].norm() > 1e-12).collect();
    let phi: Vec<f64> = (0..4).map(|k| amps[k].arg()).collect();
    if support.len() == 4 {
        let delta = phi[0] + phi[3] - phi[1] - phi[2];
        let reduced = delta - std::f64::consts::PI * (delta / std::f64::consts::PI).round();
        if reduced.abs() > 1e-9 {
            return Err(QpdError::NotRebit { delta: reduced });
        }
    }
    let rows: Vec<usize> = support.iter().take(3).cloned().collect();
    let r = DMatrix::from_fn(rows.len(), 3, |i, j| TORUS_ROWS[rows[i]][j]);
    let rhs = DVector::from_iterator(rows.len(), rows.iter().map(|&k| -phi[k]));
    let alpha = r.svd(true, true).solve(&rhs, 1e-12).expect("torus rows are independent");
    let phases = [alpha[0], alpha[1], alpha[2]];
    let moved = torus_action(psi, phases)?;
    let m = moved.amplitudes();
    let imag = m.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imag > 1e-9 {
        return Err(QpdError::NotRebit { delta: imag });
    }
    let rebit = RebitState::normalized([m[0].re, m[1].re, m[2].re, m[3].re])?;
    Ok(Canonicalized { rebit, phases })
}

/// `(r₁, r₂) = (2X₀X₂ + X₁X₃, 2X₀X₁ + X₂X₃)`.
pub fn qpd_variety_residual(x: &RebitState) -> (f64, f64) {
    let [x0, x1, x2, x3] = x.x;
    (2.0 * x0 * x2 + x1 * x3, 2.0 * x0 * x1 + x2 * x3)
}

/// The two inequality values; both `≤ 0` at a Nash maximum.
pub fn nash_max_values(x: &RebitState) -> (f64, f64) {
    let [x0, x1, x2, x3] = x.x.map(|c| c * c);
    (2.0 * (x0 - x2) + (x1 - x3), 2.0 * (x0 - x1) + (x2 - x3))
}

/// Nash-maximum test for a rebit on the variety. Off-variety points are
/// rejected because the inequalities assume the Nash conditions.
pub fn qpd_nash_max_check(x: &RebitState, tol: f64) -> Result<bool> {
    let (r1, r2) = qpd_variety_residual(x);
    let n2 = x.norm().powi(2);
    let res = r1.abs().max(r2.abs()) / n2;
    if res > VARIETY_TOL.max(tol) {
        return Err(QpdError::OffVariety(res));
    }
    let (a, b) = nash_max_values(x);
    Ok(a / n2 <= tol && b / n2 <= tol)
}

/// `χ² = (X₀X₃ − X₁X₂)²`.
pub fn entanglement_parameter(x: &RebitState) -> f64 {
    chi(x).powi(2)
}

/// Signed `χ = X₀X₃ − X₁X₂`.
pub fn chi(x: &RebitState) -> f64 {
    x.x[0] * x.x[3] - x.x[1] * x.x[2]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OrbitFamily {
    Separable,
    /// `x = −y` on the sphere `(z + 1)² + x² + y² = 2`.
    MaxEntangledA,
    /// `x = y` on the sphere `(z − 1)² + x² + y² = 2`.
    MaxEntangledB,
    /// `X₀X₃ − X₁X₂ = −χ`.
    GenericPlus,
    /// `X₀X₃ − X₁X₂ = +χ`.
    GenericMinus,
}

/// Residual of the orbit equation at a projected point.
///
/// The separable and generic families use the normalized form
/// `2((1 − r²)z − 2xy)/(1 + r²)² = X₀X₃ − X₁X₂`, so the residual is measured
/// in units of `χ`.
pub fn orbit_residual(p: &ProjectedPoint, chi_value: f64, family: OrbitFamily) -> Result<f64> {
    if !chi_value.is_finite() || chi_value.abs() > 0.5 + 1e-12 {
        return Err(QpdError::InvalidChi(chi_value));
    }
    let (x, y, z) = (p.x, p.y, p.z);
    let r2 = x * x + y * y + z * z;
    let s = 2.0 * ((1.0 - r2) * z - 2.0 * x * y) / (1.0 + r2).powi(2);
    Ok(match family {
        OrbitFamily::Separable => s.abs(),
        OrbitFamily::GenericPlus => (s + chi_value).abs(),
        OrbitFamily::GenericMinus => (s - chi_value).abs(),
        OrbitFamily::MaxEntangledA => (x + y).abs().max(((z + 1.0).powi(2) + x * x + y * y - 2.0).abs()),
        OrbitFamily::MaxEntangledB => (x - y).abs().max(((z - 1.0).powi(2) + x * x + y * y - 2.0).abs()),
    })
}

/// The rebit variety as a quadric system on `ℝ⁴` (no gauge: `X` and `−X` are
/// kept apart).
pub fn qpd_system() -> QuadricSystem {
    let mut q1 = DMatrix::zeros(4, 4);
    q1[(0, 2)] = 1.0;
    q1[(2, 0)] = 1.0;
    q1[(1, 3)] = 0.5;
    q1[(3, 1)] = 0.5;
    let mut q2 = DMatrix::zeros(4, 4);
    q2[(0, 1)] = 1.0;
    q2[(1, 0)] = 1.0;
    q2[(2, 3)] = 0.5;
    q2[(3, 2)] = 0.5;
    QuadricSystem::new(4, vec![q1, q2], Gauge::None).expect("symmetric forms")
}

/// `vᵀFv = X₀X₃ − X₁X₂ − c‖v‖²`.
fn orbit_form(c: f64) -> DMatrix<f64> {
    let mut f = DMatrix::identity(4, 4) * (-c);
    f[(0, 3)] = 0.5;
    f[(3, 0)] = 0.5;
    f[(1, 2)] = -0.5;
    f[(2, 1)] = -0.5;
    f
}

/// A Nash state on an entanglement orbit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Intersection {
    pub rebit: RebitState,
    /// `None` when the point is the projection pole `(−1, 0, 0, 0)`.
    pub projected: Option<ProjectedPoint>,
    pub chi: f64,
    pub variety_residual: f64,
    pub orbit_residual: f64,
    pub nash_max: bool,
    pub payoffs: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntersectionOptions {
    pub tol: f64,
    pub n_starts: usize,
    pub seed: u64,
    /// Identify `X` with `−X`.
    pub quotient_antipodal: bool,
}

impl Default for IntersectionOptions {
    fn default() -> Self {
        Self { tol: 1e-12, n_starts: 64, seed: 0, quotient_antipodal: false }
    }
}

fn make_intersection(x: [f64; 4]) -> Result<Intersection> {
    let rebit = RebitState::normalized(x)?;
    let (r1, r2) = qpd_variety_residual(&rebit);
    let c = chi(&rebit);
    let (h1, h2) = qpd_payoff_operators();
    let psi = rebit.to_state()?;
    let u = |h: &DenseOperator| psi.amplitudes().dotc(&h.apply(psi.amplitudes())).re;
    Ok(Intersection {
        rebit,
        projected: rebit.project(Chart::Standard).ok(),
        chi: c,
        variety_residual: r1.abs().max(r2.abs()),
        orbit_residual: 0.0,
        nash_max: qpd_nash_max_check(&rebit, 1e-9)?,
        payoffs: [u(&h1), u(&h2)],
    })
}

/// Nash states on the orbit `χ² = chi²`, with Nash-maximum flags.
///
/// Each sign of `χ` gives one quadric added to the variety system. At
/// `χ² = 1/4` that quadric is semidefinite, so the orbit is replaced by the
/// two planes it spans and the variety is solved inside each.
pub fn orbit_variety_intersections(chi_value: f64, opts: &IntersectionOptions) -> Result<Vec<Intersection>> {
    if !chi_value.is_finite() || chi_value.abs() > 0.5 + 1e-12 {
        return Err(QpdError::InvalidChi(chi_value));
    }
    let c = chi_value.abs();
    let base = qpd_system();
    let mut raw: Vec<DVector<f64>> = Vec::new();
    if (c - 0.5).abs() < 1e-12 {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let planes = [
            [[h, 0.0, 0.0, h], [0.0, h, -h, 0.0]],
            [[h, 0.0, 0.0, -h], [0.0, h, h, 0.0]],
        ];
        for (i, plane) in planes.iter().enumerate() {
            let basis = DMatrix::from_fn(4, 2, |r, k| plane[k][r]);
            let sub = base.restricted(&basis)?;
            for p in random_start_search(&sub, opts.n_starts, opts.seed.wrapping_add(i as u64), opts.tol) {
                raw.push(&basis * p.vector());
            }
        }
    } else {
        let signs: &[f64] = if c == 0.0 { &[1.0] } else { &[1.0, -1.0] };
        for (i, s) in signs.iter().enumerate() {
            let sys = base.with_forms(vec![orbit_form(s * c)])?;
            for p in random_start_search(&sys, opts.n_starts, opts.seed.wrapping_add(i as u64), opts.tol) {
                raw.push(p.vector());
            }
        }
    }
    let mut out: Vec<Intersection> = Vec::new();
    for v in raw {
        let mut x = [v[0], v[1], v[2], v[3]];
        if opts.quotient_antipodal {
            let first = x.iter().find(|c| c.abs() > 1e-9).copied().unwrap_or(1.0);
            if first < 0.0 {
                x = x.map(|c| -c);
            }
        }
        let mut item = make_intersection(x)?;
        item.orbit_residual = (entanglement_parameter(&item.rebit) - c * c).abs();
        let duplicate = out.iter().any(|o| {
            o.rebit.x.iter().zip(&item.rebit.x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() < variety::DEDUP_ANGLE
        });
        if !duplicate {
            out.push(item);
        }
    }
    out.sort_by(|a, b| {
        a.rebit
            .x
            .iter()
            .zip(&b.rebit.x)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(out)
}

/// A sampled point of the rebit variety.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarietySample {
    pub rebit: RebitState,
    pub projected: Option<ProjectedPoint>,
    pub residual: f64,
    pub nash_max: bool,
}

/// Points of the rebit variety from Newton projections of random starts.
pub fn sample_qpd_variety(n_points: usize, seed: u64, tol: f64) -> Result<Vec<VarietySample>> {
    let sys = qpd_system();
    let mut rng = seeded_rng(seed);
    let mut out = Vec::with_capacity(n_points);
    let mut attempts = 0;
    while out.len() < n_points && attempts < 10 * n_points.max(1) {
        attempts += 1;
        let start = random_sphere_point(4, &mut rng);
        if let Ok(p) = newton_solve(&sys, &start, tol, 100) {
            let rebit = RebitState::new([p.coords[0], p.coords[1], p.coords[2], p.coords[3]]);
            out.push(VarietySample {
                projected: rebit.project(Chart::Standard).ok(),
                residual: p.residual,
                nash_max: qpd_nash_max_check(&rebit, 1e-9)?,
                rebit,
            });
        }
    }
    Ok(out)
}

/// Residuals and per-block optima backing an equilibrium verdict.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub is_equilibrium: bool,
    pub residual: NashResidual,
    /// Per-block `SU(2)` maxima; empty when some block is larger than a qubit.
    pub optima: Vec<Su2Optimum>,
    /// True when maximality was checked globally rather than to second order.
    pub global: bool,
}

/// Whether "do nothing" is a Nash equilibrium of the game: the initial state
/// must be a Nash state whose payoffs are maximal over each player's group.
///
/// Single-qubit blocks are checked globally; otherwise only the local
/// second-order condition is available.
pub fn nash_equilibrium_certificate(game: &GameInstance) -> Result<Certificate> {
    let inst = &game.instance;
    let psi = &game.initial_state;
    let residual = nash_residual(psi, inst)?;
    let is_nash = residual.max < nash::NASH_TOL;
    if inst.blocks().iter().all(|b| b.len() == 1) {
        let optima: Vec<Su2Optimum> = inst
            .observables()
            .iter()
            .zip(inst.blocks())
            .map(|(h, b)| global_su2_check(psi, h, b[0], OptimizationMode::Max))
            .collect::<Result<_, _>>()?;
        let all_max = optima.iter().all(|o| o.is_global);
        Ok(Certificate { is_equilibrium: is_nash && all_max, residual, optima, global: true })
    } else {
        let local = if is_nash {
            matches!(
                classify_local(psi, inst, nash::CLASSIFY_TOL)?.kind,
                LocalKind::LocalMax | LocalKind::Degenerate
            )
        } else {
            false
        };
        Ok(Certificate { is_equilibrium: is_nash && local, residual, optima: vec![], global: false })
    }
}

/// Complex two-qubit state from a rebit after local phases.
pub fn dressed_state(x: &RebitState, phases: [f64; 3]) -> Result<StateVector> {
    torus_action(&x.to_state()?, phases)
}

/// `Û = a₀ + i(a₁X̂ + a₂Ŷ + a₃Ẑ)` for a unit quaternion.
pub fn su2_from_quaternion(a: [f64; 4]) -> DenseOperator {
    let i = C64::new(0.0, 1.0);
    let m = CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(a[0], 0.0) + i * a[3],
            i * a[1] + C64::new(a[2], 0.0),
            i * a[1] - C64::new(a[2], 0.0),
            C64::new(a[0], 0.0) - i * a[3],
        ],
    );
    DenseOperator::with_tag_unchecked(m, crate::operator::HermitianTag::General)
}
