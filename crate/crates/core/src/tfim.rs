//! Periodic transverse-field Ising chain `Ĥ = −Σ ẐᵢẐᵢ₊₁ − g Σ X̂ᵢ`.
//!
//! After Jordan–Wigner the chain splits into two fermion-parity sectors with
//! momentum sets `K₊` (antiperiodic) and `K₋` (periodic). Each sector is a
//! free Bogoliubov Hamiltonian `Σ_k ε_k (2n_k − 1)` restricted to one parity,
//! which is what the signs `η_σ` encode. All thermal sums are accumulated in
//! the log domain so that large `βN` neither overflows nor cancels.
//!
//! Exact diagonalization helpers at the bottom are the cross-check.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use serde::Serialize;
use thiserror::Error;

use crate::nash::{self, NashError, NashInstance};
use crate::operator::{
    self, commutator, embed, DenseOperator, DensityMatrix, Eigensystem, InteractionGraph, OperatorError, Pauli,
};

/// Largest chain handled by the free-fermion routines.
pub const MAX_FREE_FERMION_SITES: usize = 24;
/// Largest chain handled with dense operators.
pub const MAX_DENSE_SITES: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TfimError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Nash(#[from] NashError),
    #[error("invalid chain: {0}")]
    InvalidSpec(String),
    #[error("{0} sites exceed the dense limit")]
    TooLarge(usize),
    #[error("site {site} out of range for {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("commutator for {0} differs from its closed form by {1:.3e}")]
    ClosedFormMismatch(&'static str, f64),
}

pub type Result<T, E = TfimError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TfimSpec {
    pub n_sites: usize,
    pub g: f64,
    pub beta: f64,
}

impl TfimSpec {
    pub fn new(n_sites: usize, g: f64, beta: f64) -> Result<Self> {
        if !(2..=MAX_FREE_FERMION_SITES).contains(&n_sites) {
            return Err(TfimError::InvalidSpec(format!("N = {n_sites} outside 2..={MAX_FREE_FERMION_SITES}")));
        }
        if !(g > 0.0) || !g.is_finite() {
            return Err(TfimError::InvalidSpec(format!("g = {g} must be positive")));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(TfimError::InvalidSpec(format!("beta = {beta} must be non-negative")));
        }
        Ok(Self { n_sites, g, beta })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sector {
    Plus,
    Minus,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentumSectors {
    /// Ascending momenta in `(−π, π]`.
    pub k_plus: Vec<f64>,
    pub k_minus: Vec<f64>,
    pub eta_plus: f64,
    pub eta_minus: f64,
}

fn wrap(k: f64) -> f64 {
    if k > PI + 1e-12 {
        k - 2.0 * PI
    } else {
        k
    }
}

/// `K₊ = {(2m+1)π/N}`, `K₋ = {2mπ/N}`, folded into `(−π, π]`.
///
/// `η₊ = 1`; `η₋ = 1` for `g < 1` and `−1` for `g ≥ 1`.
pub fn momentum_sectors(spec: &TfimSpec) -> MomentumSectors {
    let n = spec.n_sites;
    let mut k_plus: Vec<f64> = (0..n).map(|m| wrap(PI * (2 * m + 1) as f64 / n as f64)).collect();
    let mut k_minus: Vec<f64> = (0..n).map(|m| wrap(2.0 * PI * m as f64 / n as f64)).collect();
    k_plus.sort_by(f64::total_cmp);
    k_minus.sort_by(f64::total_cmp);
    let eta_minus = if spec.g < 1.0 { 1.0 } else { -1.0 };
    MomentumSectors { k_plus, k_minus, eta_plus: 1.0, eta_minus }
}

pub fn mode_energy(k: f64, g: f64) -> f64 {
    (1.0 + g * g - 2.0 * g * k.cos()).max(0.0).sqrt()
}

/// Bogoliubov angle with `sin θ = sin k/ε`, `cos θ = (g − cos k)/ε`.
///
/// At `ε = 0` (only `k = 0`, `g = 1`) the angle is taken as 0.
pub fn bogoliubov_angle(k: f64, g: f64) -> f64 {
    let eps = mode_energy(k, g);
    if eps == 0.0 {
        return 0.0;
    }
    let s = k.sin() / eps;
    let c = (g - k.cos()) / eps;
    s.atan2(c)
}

/// `ln(e^a + e^b)`.
fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln tanh(x)` for `x ≥ 0`.
fn ln_tanh(x: f64) -> f64 {
    let e = (-2.0 * x).exp();
    (-e).ln_1p() - e.ln_1p()
}

/// `ln(A + ηB)` where `ln A = l` and `ln(B/A) = t ≤ 0`.
fn ln_signed_sum(l: f64, t: f64, eta: f64) -> f64 {
    if eta > 0.0 {
        l + t.exp().ln_1p()
    } else {
        l + (-t.exp_m1()).ln()
    }
}

/// Log-domain sector data: energies, `ln Π(1 + e^{−2βε})` and
/// `ln Π tanh(βε)`, optionally skipping one mode.
struct SectorSums {
    energies: Vec<f64>,
    ks: Vec<f64>,
    eta: f64,
    beta: f64,
}

impl SectorSums {
    fn sums(&self, skip: Option<usize>) -> (f64, f64) {
        let mut l = 0.0;
        let mut t = 0.0;
        for (q, &e) in self.energies.iter().enumerate() {
            if Some(q) == skip {
                continue;
            }
            l += (-2.0 * self.beta * e).exp().ln_1p();
            t += ln_tanh(self.beta * e);
        }
        (l, t)
    }

    /// `ln Z_σ − ln ½`.
    fn ln_weight(&self) -> f64 {
        let (l, t) = self.sums(None);
        self.beta * self.energies.iter().sum::<f64>() + ln_signed_sum(l, t, self.eta)
    }
}

fn sectors(spec: &TfimSpec) -> [(Sector, SectorSums); 2] {
    let ms = momentum_sectors(spec);
    let build = |ks: Vec<f64>, eta| SectorSums {
        energies: ks.iter().map(|&k| mode_energy(k, spec.g)).collect(),
        ks,
        eta,
        beta: spec.beta,
    };
    [(Sector::Plus, build(ms.k_plus, ms.eta_plus)), (Sector::Minus, build(ms.k_minus, ms.eta_minus))]
}

/// `ln Z(β)` from the two-sector formula.
pub fn ln_partition_function(spec: &TfimSpec) -> f64 {
    let [(_, plus), (_, minus)] = sectors(spec);
    (0.5f64).ln() + log_add(plus.ln_weight(), minus.ln_weight())
}

/// `Z(β)`; overflows to infinity for very large `βN`, where
/// [`ln_partition_function`] should be used instead.
pub fn partition_function(spec: &TfimSpec) -> f64 {
    ln_partition_function(spec).exp()
}

/// Ground energy `−Σ_{k∈K₊} ε_k`.
pub fn ground_energy(spec: &TfimSpec) -> f64 {
    -momentum_sectors(spec).k_plus.iter().map(|&k| mode_energy(k, spec.g)).sum::<f64>()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeData {
    pub sector: Sector,
    pub k: f64,
    pub epsilon: f64,
    pub theta: f64,
    /// `⟨γ†_k γ_k⟩` within the sector.
    pub occ: f64,
    /// `⟨γ_k γ†_k⟩` within the sector.
    pub vac: f64,
    /// Thermal probability `Z_σ/Z` of the sector.
    pub sector_weight: f64,
}

/// Occupations of every mode in both sectors, conditional on the sector.
///
/// The unconditional thermal averages are `sector_weight · occ` and
/// `sector_weight · vac`.
pub fn mode_occupations(spec: &TfimSpec) -> Vec<ModeData> {
    let secs = sectors(spec);
    let ln_w: Vec<f64> = secs.iter().map(|(_, s)| s.ln_weight()).collect();
    let ln_total = log_add(ln_w[0], ln_w[1]);
    let mut out = Vec::with_capacity(2 * spec.n_sites);
    for ((sector, s), lw) in secs.iter().zip(&ln_w) {
        let weight = (lw - ln_total).exp();
        let (l, t) = s.sums(None);
        let ln_den = ln_signed_sum(l, t, s.eta);
        for (q, (&k, &eps)) in s.ks.iter().zip(&s.energies).enumerate() {
            let theta = if eps == 0.0 && spec.g >= 1.0 { 0.0 } else { bogoliubov_angle(k, spec.g) };
            let (lk, tk) = s.sums(Some(q));
            let occ = (-2.0 * s.beta * eps + ln_signed_sum(lk, tk, -s.eta) - ln_den).exp();
            let vac = (ln_signed_sum(lk, tk, s.eta) - ln_den).exp();
            out.push(ModeData { sector: *sector, k, epsilon: eps, theta, occ, vac, sector_weight: weight });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Correlators {
    pub x_avg: f64,
    pub zz_avg: f64,
}

/// Thermal `⟨X̂ᵢ⟩` and `⟨ẐᵢẐᵢ₊₁⟩`.
pub fn correlators(spec: &TfimSpec) -> Correlators {
    let n = spec.n_sites as f64;
    let mut x = 0.0;
    let mut zz = 0.0;
    for m in mode_occupations(spec) {
        let c2 = (m.theta / 2.0).cos().powi(2);
        let s2 = (m.theta / 2.0).sin().powi(2);
        let w = m.sector_weight;
        x += w * (c2 * m.vac + s2 * m.occ);
        zz += w * (2.0 * m.k.cos() * (c2 * m.vac + s2 * m.occ) - m.k.sin() * m.theta.sin() * (m.vac - m.occ));
    }
    Correlators { x_avg: -1.0 + 2.0 * x / n, zz_avg: -zz / n }
}

/// `diag(4⟨zz⟩, 4⟨zz⟩ + 4g⟨x⟩, 4g⟨x⟩)`: the bilinear form of a star term at
/// the Gibbs state in the basis `(iX̂, iŶ, iẐ)`.
pub fn thermal_hessian(spec: &TfimSpec) -> Matrix3<f64> {
    let c = correlators(spec);
    let g = spec.g;
    Matrix3::from_diagonal(&nalgebra::Vector3::new(4.0 * c.zz_avg, 4.0 * c.zz_avg + 4.0 * g * c.x_avg, 4.0 * g * c.x_avg))
}

fn check_dense(n: usize) -> Result<()> {
    if n > MAX_DENSE_SITES {
        return Err(TfimError::TooLarge(n));
    }
    if n < 2 {
        return Err(TfimError::InvalidSpec(format!("N = {n} < 2")));
    }
    Ok(())
}

/// Ring graph with bonds `−ẐẐ` and on-site `−gX̂`.
pub fn tfim_graph(n: usize, g: f64) -> Result<InteractionGraph> {
    check_dense(n)?;
    let z = DenseOperator::pauli(Pauli::Z);
    let x = DenseOperator::pauli(Pauli::X);
    let mut graph = InteractionGraph::new(n);
    let bond = z.kron(&z).scale(-1.0);
    if n == 2 {
        // both ring bonds join the same pair
        graph.add_edge(0, 1, bond.scale(2.0))?;
    } else {
        for i in 0..n {
            graph.add_edge(i, (i + 1) % n, bond.clone())?;
        }
    }
    for i in 0..n {
        graph.add_onsite(i, x.scale(-g))?;
    }
    Ok(graph)
}

pub fn tfim_hamiltonian(n: usize, g: f64) -> Result<DenseOperator> {
    Ok(tfim_graph(n, g)?.hamiltonian()?)
}

/// Star decomposition `ĥᵢ = −½Ẑᵢ(Ẑᵢ₋₁ + Ẑᵢ₊₁) − gX̂ᵢ` with single-qubit blocks.
pub fn star_instance(spec: &TfimSpec) -> Result<NashInstance> {
    star_instance_weighted(spec, 1.0)
}

/// Star decomposition with the on-site field weighted by `onsite_weight`.
pub fn star_instance_weighted(spec: &TfimSpec, onsite_weight: f64) -> Result<NashInstance> {
    let graph = tfim_graph(spec.n_sites, spec.g)?;
    Ok(nash::star_instance(&graph, onsite_weight)?)
}

/// `[ĥᵢ, X̂ᵢ]`, `[ĥᵢ, Ŷᵢ]`, `[ĥᵢ, Ẑᵢ]` for the star term at `site`, checked
/// against their closed forms.
pub fn commutator_table(spec: &TfimSpec, site: usize) -> Result<[DenseOperator; 3]> {
    let n = spec.n_sites;
    check_dense(n)?;
    if site >= n {
        return Err(TfimError::SiteOutOfRange { site, n_sites: n });
    }
    let inst = star_instance(spec)?;
    let h = &inst.observables()[site];
    let p = |q: Pauli, s: usize| embed(&DenseOperator::pauli(q), &[s], n);
    let (x, y, z) = (p(Pauli::X, site)?, p(Pauli::Y, site)?, p(Pauli::Z, site)?);
    let neighbours = &p(Pauli::Z, (site + n - 1) % n)? + &p(Pauli::Z, (site + 1) % n)?;
    let cx = commutator(h, &x)?;
    let cy = commutator(h, &y)?;
    let cz = commutator(h, &z)?;
    let g = spec.g;
    let expect_x = (&y * &neighbours).times_i().scale(-1.0);
    let expect_y = &z.times_i().scale(-2.0 * g) + &(&x * &neighbours).times_i();
    let expect_z = y.times_i().scale(2.0 * g);
    for (name, got, want) in [("X", &cx, &expect_x), ("Y", &cy, &expect_y), ("Z", &cz, &expect_z)] {
        let diff = got.max_abs_diff(want);
        if diff > 1e-12 {
            return Err(TfimError::ClosedFormMismatch(name, diff));
        }
    }
    Ok([cx, cy, cz])
}

/// Full spectrum of the dense chain Hamiltonian.
pub fn ed_spectrum(n: usize, g: f64) -> Result<Eigensystem> {
    Ok(operator::diagonalize(&tfim_hamiltonian(n, g)?)?)
}

/// Thermal averages from a full spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EdThermal {
    pub ln_z: f64,
    pub x_avg: f64,
    pub zz_avg: f64,
}

/// Diagonal expectations `⟨n|Ô|n⟩` of a Hermitian operator over all
/// eigenvectors.
pub fn eigen_expectations(eig: &Eigensystem, op: &DenseOperator) -> Vec<f64> {
    (0..eig.len())
        .map(|j| {
            let v = eig.vectors.column(j).into_owned();
            v.dotc(&op.apply(&v)).re
        })
        .collect()
}

/// Boltzmann weights `e^{−β(E_n − E_0)}/Z′` and `ln Z`.
pub fn boltzmann_weights(eig: &Eigensystem, beta: f64) -> (Vec<f64>, f64) {
    let e0 = eig.values[0];
    let raw: Vec<f64> = eig.values.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let total: f64 = raw.iter().sum();
    (raw.iter().map(|w| w / total).collect(), -beta * e0 + total.ln())
}

/// Site-averaged `⟨X̂⟩` and `⟨ẐẐ⟩` operators.
pub fn averaged_observables(n: usize) -> Result<(DenseOperator, DenseOperator)> {
    check_dense(n)?;
    let d = 1 << n;
    let mut x = DenseOperator::zeros(d);
    let mut zz = DenseOperator::zeros(d);
    let zz_local = DenseOperator::pauli(Pauli::Z).kron(&DenseOperator::pauli(Pauli::Z));
    for i in 0..n {
        x = &x + &embed(&DenseOperator::pauli(Pauli::X), &[i], n)?;
        zz = &zz + &embed(&zz_local, &[i, (i + 1) % n], n)?;
    }
    Ok((x.scale(1.0 / n as f64), zz.scale(1.0 / n as f64)))
}

/// Thermal averages at each `β` from one spectrum.
pub fn ed_thermal(n: usize, g: f64, betas: &[f64]) -> Result<Vec<EdThermal>> {
    let eig = ed_spectrum(n, g)?;
    let (x, zz) = averaged_observables(n)?;
    let xs = eigen_expectations(&eig, &x);
    let zzs = eigen_expectations(&eig, &zz);
    Ok(betas
        .iter()
        .map(|&beta| {
            let (w, ln_z) = boltzmann_weights(&eig, beta);
            let avg = |vals: &[f64]| w.iter().zip(vals).map(|(a, b)| a * b).sum::<f64>();
            EdThermal { ln_z, x_avg: avg(&xs), zz_avg: avg(&zzs) }
        })
        .collect())
}

/// Gibbs state `e^{−βĤ}/Z` in spectral form.
pub fn gibbs_state(eig: &Eigensystem, beta: f64) -> Result<DensityMatrix> {
    let (w, _) = boltzmann_weights(eig, beta);
    Ok(DensityMatrix::from_spectral(w, eig.vectors.clone())?)
}
