//! Nash conditions for a set of observables.
//!
//! A [`NashInstance`] pairs observables `ĥ_i` with disjoint qubit blocks and a
//! basis of anti-Hermitian generators `Â_iα` for the unitary group acting on
//! each block. A state is a Nash state when every `⟨[ĥ_i, Â_iα]⟩` vanishes.
//! Second-order behaviour is read off the bilinear forms
//! `B_ab = ⟨½{ĥ,{Â_a,Â_b}} − Â_a ĥ Â_b − Â_b ĥ Â_a⟩`, which equal the Hessian
//! of `t ↦ ⟨e^{−tÂ} ĥ e^{tÂ}⟩` for `Â = Σ t_a Â_a`.

use nalgebra::{DMatrix, Matrix4, SymmetricEigen};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::operator::{
    self, embed, local_factor, random_hermitian_with, C64, DenseOperator, OperatorError,
    Pauli, QuantumState, StateVector,
};

/// Residual threshold for exact Nash membership.
pub const NASH_TOL: f64 = 1e-9;
/// Eigenvalue threshold for sign classification of the bilinear forms.
pub const CLASSIFY_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NashError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("block index {index} out of range ({count} blocks)")]
    BlockIndex { index: usize, count: usize },
    #[error("qubit {qubit} out of range for {n_qubits} qubits")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("not a Nash state (residual {0:.3e})")]
    NotNash(f64),
    #[error("invalid dimension-count input: {0}")]
    InvalidCounts(String),
}

pub type Result<T, E = NashError> = std::result::Result<T, E>;

/// Observables, disjoint blocks and per-block generator bases.
#[derive(Clone, Debug)]
pub struct NashInstance {
    n_qubits: usize,
    observables: Vec<DenseOperator>,
    blocks: Vec<Vec<usize>>,
    generators: Vec<Vec<DenseOperator>>,
}

/// `i` times every non-identity Pauli string on `q` qubits, in lexicographic
/// order over (X, Y, Z) per qubit with identity allowed.
pub fn pauli_string_generators(q: usize) -> Vec<DenseOperator> {
    let letters = [None, Some(Pauli::X), Some(Pauli::Y), Some(Pauli::Z)];
    let total = 1usize << (2 * q);
    (1..total)
        .map(|code| {
            let mut op = DenseOperator::identity(1);
            for pos in 0..q {
                let digit = (code >> (2 * (q - 1 - pos))) & 3;
                let factor = match letters[digit] {
                    Some(p) => DenseOperator::pauli(p),
                    None => DenseOperator::identity(2),
                };
                op = op.kron(&factor);
            }
            DenseOperator::with_tag_unchecked(op.times_i().into_matrix(), operator::HermitianTag::AntiHermitian)
        })
        .collect()
}

impl NashInstance {
    /// Validates blocks and generators.
    ///
    /// Blocks must be disjoint, and each generator must be anti-Hermitian, act
    /// only on its block and have unit operator norm.
    pub fn new(
        n_qubits: usize,
        observables: Vec<DenseOperator>,
        blocks: Vec<Vec<usize>>,
        generators: Vec<Vec<DenseOperator>>,
    ) -> Result<Self> {
        let d = 1usize << n_qubits;
        let m = observables.len();
        if blocks.len() != m || generators.len() != m {
            return Err(NashError::InvalidInstance(format!(
                "{} observables, {} blocks, {} generator sets",
                m,
                blocks.len(),
                generators.len()
            )));
        }
        let mut used = vec![false; n_qubits];
        for block in &blocks {
            if block.is_empty() {
                return Err(NashError::InvalidInstance("empty block".into()));
            }
            for &q in block {
                if q >= n_qubits {
                    return Err(NashError::QubitOutOfRange { qubit: q, n_qubits });
                }
                if used[q] {
                    return Err(NashError::InvalidInstance(format!("qubit {q} appears in two blocks")));
                }
                used[q] = true;
            }
        }
        for (i, h) in observables.iter().enumerate() {
            if h.dim() != d {
                return Err(OperatorError::DimensionMismatch { expected: d, found: h.dim() }.into());
            }
            if !h.is_hermitian() {
                return Err(NashError::InvalidInstance(format!("observable {i} is not Hermitian")));
            }
        }
        for (i, gens) in generators.iter().enumerate() {
            if gens.is_empty() {
                return Err(NashError::InvalidInstance(format!("block {i} has no generators")));
            }
            for (a, g) in gens.iter().enumerate() {
                if g.dim() != d {
                    return Err(OperatorError::DimensionMismatch { expected: d, found: g.dim() }.into());
                }
                if !DenseOperator::new(g.matrix().clone())?.is_anti_hermitian() {
                    return Err(NashError::InvalidInstance(format!("generator {a} of block {i} is not anti-Hermitian")));
                }
                let local = local_factor(g, &blocks[i], n_qubits, 1e-12)?.ok_or_else(|| {
                    NashError::InvalidInstance(format!("generator {a} of block {i} acts outside its block"))
                })?;
                let norm = local.norm_inf();
                if (norm - 1.0).abs() > 1e-10 {
                    return Err(NashError::InvalidInstance(format!(
                        "generator {a} of block {i} has operator norm {norm}"
                    )));
                }
            }
        }
        Ok(Self { n_qubits, observables, blocks, generators })
    }

    /// One observable per qubit, each block a single qubit with generators
    /// `(iX̂, iŶ, iẐ)`.
    pub fn single_qubit_blocks(n_qubits: usize, observables: Vec<DenseOperator>) -> Result<Self> {
        let blocks = (0..n_qubits).map(|q| vec![q]).collect();
        Self::local_blocks(n_qubits, observables, blocks)
    }

    /// Blocks with the full `su(2^q)` generator basis of `i`·Pauli strings.
    pub fn local_blocks(n_qubits: usize, observables: Vec<DenseOperator>, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut generators = Vec::with_capacity(blocks.len());
        for block in &blocks {
            let local = pauli_string_generators(block.len());
            let mut gens = Vec::with_capacity(local.len());
            for g in &local {
                gens.push(embed(g, block, n_qubits)?);
            }
            generators.push(gens);
        }
        Self::new(n_qubits, observables, blocks, generators)
    }

    /// Conjugate every observable and generator by the unitary `u`.
    ///
    /// The result no longer has block-local generators, so it bypasses
    /// validation; it is meant for covariance checks.
    pub fn conjugated(&self, u: &DenseOperator) -> Self {
        let ud = u.adjoint();
        let conj = |op: &DenseOperator, tag| {
            DenseOperator::with_tag_unchecked((u * &(op * &ud)).into_matrix(), tag)
        };
        Self {
            n_qubits: self.n_qubits,
            observables: self.observables.iter().map(|h| conj(h, operator::HermitianTag::Hermitian)).collect(),
            blocks: self.blocks.clone(),
            generators: self
                .generators
                .iter()
                .map(|gs| gs.iter().map(|g| conj(g, operator::HermitianTag::AntiHermitian)).collect())
                .collect(),
        }
    }

    /// Same blocks and generators with every observable negated.
    pub fn negated(&self) -> Self {
        Self {
            observables: self.observables.iter().map(|h| -h).collect(),
            ..self.clone()
        }
    }

    /// Observable `i` scaled by `s`.
    pub fn with_scaled_observable(&self, i: usize, s: f64) -> Result<Self> {
        if i >= self.observables.len() {
            return Err(NashError::BlockIndex { index: i, count: self.observables.len() });
        }
        let mut out = self.clone();
        out.observables[i] = out.observables[i].scale(s);
        Ok(out)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn n_blocks(&self) -> usize {
        self.observables.len()
    }

    pub fn observables(&self) -> &[DenseOperator] {
        &self.observables
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn generators(&self) -> &[Vec<DenseOperator>] {
        &self.generators
    }

    fn check_state<S: QuantumState + ?Sized>(&self, state: &S) -> Result<()> {
        if state.dim() != self.dim() {
            return Err(OperatorError::DimensionMismatch { expected: self.dim(), found: state.dim() }.into());
        }
        Ok(())
    }
}

/// Per-block maxima of `|⟨[ĥ_i, Â_iα]⟩|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NashResidual {
    pub per_block: Vec<f64>,
    pub max: f64,
}

/// `⟨[h, a]⟩` without forming the commutator.
pub fn commutator_expectation<S: QuantumState + ?Sized>(state: &S, h: &DenseOperator, a: &DenseOperator) -> C64 {
    state.expect2(h, a) - state.expect2(a, h)
}

pub fn nash_residual<S: QuantumState + Sync + ?Sized>(state: &S, inst: &NashInstance) -> Result<NashResidual> {
    inst.check_state(state)?;
    let per_block: Vec<f64> = inst
        .observables
        .par_iter()
        .zip(inst.generators.par_iter())
        .map(|(h, gens)| {
            gens.iter()
                .map(|a| commutator_expectation(state, h, a).norm())
                .fold(0.0, f64::max)
        })
        .collect();
    let max = per_block.iter().cloned().fold(0.0, f64::max);
    Ok(NashResidual { per_block, max })
}

/// True iff the residual is at most `epsilon`.
///
/// With unit-norm generators this is the same as bounding
/// `|⟨[ĥ_i, v·Â_i]⟩| ≤ ε‖v‖₁` for all real `v`: the bound is linear in `v` and
/// is saturated on basis directions.
pub fn is_epsilon_nash<S: QuantumState + Sync + ?Sized>(state: &S, inst: &NashInstance, epsilon: f64) -> Result<bool> {
    if epsilon <= 0.0 || epsilon.is_nan() {
        return Err(NashError::NonPositiveEpsilon(epsilon));
    }
    Ok(nash_residual(state, inst)?.max <= epsilon)
}

/// `B_ab = ⟨½{h,{a,b}} − a h b − b h a⟩` for anti-Hermitian `a`, `b`.
pub fn bilinear_entry<S: QuantumState + ?Sized>(state: &S, h: &DenseOperator, a: &DenseOperator, b: &DenseOperator) -> f64 {
    let anti = state.expect3(h, a, b) + state.expect3(h, b, a) + state.expect3(a, b, h) + state.expect3(b, a, h);
    let cross = state.expect3(a, h, b) + state.expect3(b, h, a);
    (anti * 0.5 - cross).re
}

/// The bilinear form of block `block_index` in its generator basis.
pub fn bilinear_form_matrix<S: QuantumState + ?Sized>(
    state: &S,
    inst: &NashInstance,
    block_index: usize,
) -> Result<DMatrix<f64>> {
    inst.check_state(state)?;
    if block_index >= inst.n_blocks() {
        return Err(NashError::BlockIndex { index: block_index, count: inst.n_blocks() });
    }
    let h = &inst.observables[block_index];
    let gens = &inst.generators[block_index];
    let k = gens.len();
    let mut b = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = bilinear_entry(state, h, &gens[i], &gens[j]);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    Ok(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LocalKind {
    LocalMin,
    LocalMax,
    Saddle,
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalClass {
    pub kind: LocalKind,
    /// Ascending eigenvalues of each block's bilinear form.
    pub eigenvalues: Vec<Vec<f64>>,
}

fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Sign classification of the bilinear forms at a Nash state.
///
/// Eigenvalues inside `(−tol, tol)` count as zero; when every eigenvalue is
/// zero the state is degenerate.
pub fn classify_local<S: QuantumState + Sync + ?Sized>(state: &S, inst: &NashInstance, tol: f64) -> Result<LocalClass> {
    let res = nash_residual(state, inst)?;
    if res.max >= tol {
        return Err(NashError::NotNash(res.max));
    }
    let eigenvalues: Vec<Vec<f64>> = (0..inst.n_blocks())
        .map(|i| bilinear_form_matrix(state, inst, i).map(sorted_eigenvalues))
        .collect::<Result<_>>()?;
    Ok(LocalClass { kind: classify_eigenvalues(&eigenvalues, tol), eigenvalues })
}

pub fn classify_eigenvalues(eigenvalues: &[Vec<f64>], tol: f64) -> LocalKind {
    let all = || eigenvalues.iter().flatten();
    if all().all(|l| l.abs() < tol) {
        LocalKind::Degenerate
    } else if all().all(|&l| l > -tol) {
        LocalKind::LocalMin
    } else if all().all(|&l| l < tol) {
        LocalKind::LocalMax
    } else {
        LocalKind::Saddle
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OptimizationMode {
    Min,
    Max,
}

/// Outcome of optimizing `⟨Û†ĥÛ⟩` over single-qubit unitaries.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Su2Optimum {
    pub optimal_value: f64,
    pub current_value: f64,
    pub is_global: bool,
    /// Optimal unit quaternion `(a₀, a₁, a₂, a₃)`, `Û = a₀ + i(a₁X̂ + a₂Ŷ + a₃Ẑ)`.
    pub optimizer: [f64; 4],
}

/// The real symmetric `Q` with `⟨Û†ĥÛ⟩ = aᵀQa` for
/// `Û = a₀ + i(a₁X̂ + a₂Ŷ + a₃Ẑ)` on `qubit`.
pub fn su2_quadratic_form<S: QuantumState + ?Sized>(state: &S, h: &DenseOperator, qubit: usize) -> Result<Matrix4<f64>> {
    let d = state.dim();
    if h.dim() != d {
        return Err(OperatorError::DimensionMismatch { expected: d, found: h.dim() }.into());
    }
    let n_qubits = d.trailing_zeros() as usize;
    if qubit >= n_qubits {
        return Err(NashError::QubitOutOfRange { qubit, n_qubits });
    }
    let mut basis = vec![DenseOperator::identity(d)];
    for p in Pauli::ALL {
        basis.push(embed(&DenseOperator::pauli(p).times_i(), &[qubit], n_qubits)?);
    }
    let mut q = Matrix4::zeros();
    for mu in 0..4 {
        for nu in mu..4 {
            // ⟨σ̃_μ† h σ̃_ν⟩, symmetrized.
            let m = state.expect3(&basis[mu].adjoint(), h, &basis[nu]);
            q[(mu, nu)] = m.re;
            q[(nu, mu)] = m.re;
        }
    }
    Ok(q)
}

/// Global optimality of `⟨ĥ⟩` under single-qubit unitaries on `qubit`.
///
/// `is_global` compares the optimum with the current value at a tolerance of
/// `1e-9` relative to the scale of the form.
pub fn global_su2_check<S: QuantumState + ?Sized>(
    state: &S,
    h: &DenseOperator,
    qubit: usize,
    mode: OptimizationMode,
) -> Result<Su2Optimum> {
    let q = su2_quadratic_form(state, h, qubit)?;
    let eig = SymmetricEigen::new(q);
    let pick = (0..4)
        .min_by(|&a, &b| {
            let (x, y) = (eig.eigenvalues[a], eig.eigenvalues[b]);
            match mode {
                OptimizationMode::Min => x.total_cmp(&y),
                OptimizationMode::Max => y.total_cmp(&x),
            }
        })
        .expect("four eigenvalues");
    let optimal_value = eig.eigenvalues[pick];
    let current_value = q[(0, 0)];
    let v = eig.eigenvectors.column(pick);
    let scale = q.iter().map(|x| x.abs()).fold(1.0, f64::max);
    Ok(Su2Optimum {
        optimal_value,
        current_value,
        is_global: (optimal_value - current_value).abs() < NASH_TOL * scale,
        optimizer: [v[0], v[1], v[2], v[3]],
    })
}

/// True iff `ĥ_i|ψ⟩ = ε_i|ψ⟩` with `ε_i` the smallest eigenvalue of `ĥ_i`,
/// for every term, to `1e-9`.
pub fn frustration_free_check(terms: &[DenseOperator], state: &StateVector) -> Result<bool> {
    for h in terms {
        if h.dim() != state.dim() {
            return Err(OperatorError::DimensionMismatch { expected: state.dim(), found: h.dim() }.into());
        }
        let e_min = operator::diagonalize(h)?.values[0];
        let hpsi = h.apply(state.amplitudes());
        let r = (hpsi - state.amplitudes() * C64::new(e_min, 0.0)).norm();
        if r >= 1e-9 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DimensionCounts {
    pub dim_d: i64,
    pub dim_v: i64,
    pub dim_v_prime: i64,
}

/// Dimension counts for the mixed-state set `D`, the Nash variety `V` and its
/// projectivization `V′`.
///
/// With `local_case = Some((N, q))`, `d = 2^N` and the `N/q` blocks each carry
/// `su(2^q)`, overriding `d` and `group_dims`.
pub fn dimension_counts(d: usize, group_dims: &[usize], local_case: Option<(usize, usize)>) -> Result<DimensionCounts> {
    let (d, total_g) = match local_case {
        Some((n, q)) => {
            if q == 0 || n % q != 0 {
                return Err(NashError::InvalidCounts(format!("block size {q} does not divide {n}")));
            }
            let per_block = (1i64 << (2 * q)) - 1;
            (1i64 << n, (n / q) as i64 * per_block)
        }
        None => {
            if group_dims.contains(&0) {
                return Err(NashError::InvalidCounts("group dimensions must be positive".into()));
            }
            (d as i64, group_dims.iter().map(|&g| g as i64).sum())
        }
    };
    let dim_d = d * d - 1 - total_g;
    let dim_v = 2 * d - total_g;
    Ok(DimensionCounts { dim_d, dim_v, dim_v_prime: dim_v - 2 })
}

/// Random strictly two-local Hamiltonian on the complete graph of `n` sites,
/// each edge term a random Hermitian 4×4 matrix.
pub fn random_two_local_graph(n: usize, rng: &mut ChaCha8Rng) -> Result<operator::InteractionGraph> {
    let mut graph = operator::InteractionGraph::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            graph.add_edge(i, j, random_hermitian_with(4, rng, false))?;
        }
    }
    Ok(graph)
}

/// Star-Hamiltonian instance of a graph with single-qubit blocks.
pub fn star_instance(graph: &operator::InteractionGraph, onsite_weight: f64) -> Result<NashInstance> {
    let stars = operator::star_hamiltonians(graph, onsite_weight)?;
    NashInstance::single_qubit_blocks(graph.n_sites(), stars)
}

/// Ring of `n` random two-qubit observables `ĥ_i` on `(i, i+1 mod n)`, each
/// scaled to unit operator norm, with single-qubit blocks.
pub fn random_ring_instance(n: usize, rng: &mut ChaCha8Rng) -> Result<NashInstance> {
    let mut obs = Vec::with_capacity(n);
    for i in 0..n {
        let h = random_hermitian_with(4, rng, false);
        let h = h.scale(1.0 / h.norm_inf());
        obs.push(embed(&h, &[i, (i + 1) % n], n)?);
    }
    NashInstance::single_qubit_blocks(n, obs)
}

/// Product state minimizing `⟨Ĥ⟩` by per-site alternating minimization.
#[derive(Clone, Debug)]
pub struct ProductOptimum {
    pub sites: Vec<[C64; 2]>,
    pub state: StateVector,
    pub energy: f64,
    pub sweeps: usize,
    pub converged: bool,
}

fn product_vector(sites: &[[C64; 2]]) -> operator::CVector {
    let mut v = operator::CVector::from_element(1, C64::new(1.0, 0.0));
    for s in sites {
        v = v.kronecker(&operator::CVector::from_column_slice(s));
    }
    v
}

/// Alternately replaces each site by the ground state of its effective 2×2
/// Hamiltonian until the energy changes by less than `tol` over a sweep.
pub fn optimize_product_state(h: &DenseOperator, start: Vec<[C64; 2]>, tol: f64, max_sweeps: usize) -> Result<ProductOptimum> {
    let n = start.len();
    if h.dim() != 1 << n {
        return Err(OperatorError::DimensionMismatch { expected: 1 << n, found: h.dim() }.into());
    }
    let normalize = |s: [C64; 2]| {
        let nrm = (s[0].norm_sqr() + s[1].norm_sqr()).sqrt();
        [s[0] / nrm, s[1] / nrm]
    };
    let mut sites: Vec<[C64; 2]> = start.into_iter().map(normalize).collect();
    let energy_of = |sites: &[[C64; 2]]| {
        let v = product_vector(sites);
        v.dotc(&h.apply(&v)).re
    };
    let mut energy = energy_of(&sites);
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        for i in 0..n {
            let mut basis_vecs = Vec::with_capacity(2);
            for a in 0..2 {
                let mut s = sites.clone();
                s[i] = if a == 0 { [C64::new(1.0, 0.0), C64::new(0.0, 0.0)] } else { [C64::new(0.0, 0.0), C64::new(1.0, 0.0)] };
                basis_vecs.push(product_vector(&s));
            }
            let hb: Vec<_> = basis_vecs.iter().map(|v| h.apply(v)).collect();
            let mut heff = operator::CMatrix::zeros(2, 2);
            for a in 0..2 {
                for b in 0..2 {
                    heff[(a, b)] = basis_vecs[a].dotc(&hb[b]);
                }
            }
            let heff = DenseOperator::hermitian((&heff + heff.adjoint()) * C64::new(0.5, 0.0))?;
            let gs = operator::diagonalize(&heff)?.vectors;
            sites[i] = normalize([gs[(0, 0)], gs[(1, 0)]]);
        }
        let e = energy_of(&sites);
        let delta = energy - e;
        energy = e;
        if delta.abs() < tol {
            converged = true;
            break;
        }
    }
    let state = StateVector::normalized(product_vector(&sites))?;
    Ok(ProductOptimum { sites, state, energy, sweeps, converged })
}
