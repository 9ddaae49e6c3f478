//! One function per subcommand. Each returns the run configuration together
//! with a finished artifact; nothing is written until the run has succeeded.

use nalgebra::DVector;
use nash_core::nash::{
    self, classify_local, global_su2_check, nash_residual, random_ring_instance, random_two_local_graph,
    star_instance, NashInstance, OptimizationMode,
};
use nash_core::operator::{
    diagonalize, random_hermitian, random_state_with, seeded_rng, CMatrix, DenseOperator, StateVector, C64,
};
use nash_core::qpd::{self, IntersectionOptions, RebitState};
use nash_core::tfim::{self, TfimSpec};
use nash_core::variety::{
    build_system, estimate_local_dimension, random_start_search, stereographic, trace_component, Chart, QuadricSystem,
    Trace, VarietyPoint,
};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::output::{Cell, RunConfig, Table};

pub enum Artifact {
    Csv(Table),
    Json(Value),
}

pub type Outcome = Result<(RunConfig, Artifact), CliError>;

/// Per-index seed derived from the run seed.
pub fn mix(seed: u64, index: u64) -> u64 {
    seed ^ (index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// The `index`-th random instance of a `variety` run: one random observable
/// per qubit, single-qubit blocks.
pub fn variety_instance(seed: u64, index: usize, qubits: usize, real: bool) -> Result<NashInstance, CliError> {
    let base = mix(seed, index as u64);
    let obs = (0..qubits).map(|q| random_hermitian(1 << qubits, mix(base, q as u64), real)).collect();
    Ok(NashInstance::single_qubit_blocks(qubits, obs)?)
}

/// The system a `variety` run solves: the full Nash variety for complex
/// instances, `W̃′` for real ones.
pub fn variety_target(inst: &NashInstance, real: bool) -> Result<QuadricSystem, CliError> {
    let sys = build_system(inst, real)?;
    Ok(if real { sys.tilde_v_system()? } else { sys })
}

fn projection(coords: &[f64]) -> ([f64; 3], &'static str) {
    let p = [coords[0], coords[1], coords[2], coords[3]];
    match stereographic(&p, Chart::Standard) {
        Ok(x) => (x, "standard"),
        Err(_) => (stereographic(&p, Chart::Antipodal).expect("antipodal chart away from its pole"), "antipodal"),
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), CliError> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(CliError::config(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

pub struct VarietySample {
    pub qubits: usize,
    pub real: bool,
    pub instances: usize,
    pub n_starts: usize,
    pub tol: f64,
    pub rank_tol: f64,
}

pub fn variety_sample(seed: u64, a: &VarietySample) -> Outcome {
    if !(2..=4).contains(&a.qubits) {
        return Err(CliError::config("qubits must be 2, 3 or 4"));
    }
    check_positive("tol", a.tol)?;
    check_positive("rank-tol", a.rank_tol)?;
    let config = RunConfig::new("variety sample", seed)
        .param("qubits", a.qubits)
        .param("real", a.real)
        .param("instances", a.instances)
        .param("n_starts", a.n_starts)
        .param("tol", a.tol)
        .param("rank_tol", a.rank_tol);
    let ambient = if a.real { 1 << a.qubits } else { 2 << a.qubits };
    let mut columns = vec!["instance".to_string(), "point".into(), "residual".into(), "est_dim".into()];
    columns.extend((0..ambient).map(|k| format!("c{k}")));
    if ambient == 4 {
        columns.extend(["x", "y", "z", "chart"].map(String::from));
    }
    let mut table = Table::new(&columns.iter().map(String::as_str).collect::<Vec<_>>());
    let mut dims = std::collections::BTreeMap::<String, usize>::new();
    for i in 0..a.instances {
        let sys = variety_target(&variety_instance(seed, i, a.qubits, a.real)?, a.real)?;
        let points = random_start_search(&sys, a.n_starts, mix(seed, 1_000 + i as u64), a.tol);
        if points.is_empty() {
            return Err(CliError::NonConvergence(format!("no variety point found for instance {i}")));
        }
        for (k, p) in points.iter().enumerate() {
            let est = estimate_local_dimension(&sys, p, a.rank_tol)?.est_dim;
            *dims.entry(est.to_string()).or_default() += 1;
            let mut row: Vec<Cell> = vec![i.into(), k.into(), p.residual.into(), est.into()];
            row.extend(p.coords.iter().map(|&c| Cell::F(c)));
            if ambient == 4 {
                let (x, chart) = projection(&p.coords);
                row.extend([x[0].into(), x[1].into(), x[2].into(), chart.into()]);
            }
            table.push(row);
        }
    }
    table.summarize("est_dim_counts", &dims);
    Ok((config, Artifact::Csv(table)))
}

pub struct VarietyTrace {
    pub instances: usize,
    pub n_starts: usize,
    pub step: f64,
    pub max_steps: usize,
    pub max_components: usize,
}

fn on_trace(p: &VarietyPoint, traces: &[Trace], radius: f64) -> bool {
    let v = p.vector();
    traces.iter().flat_map(|t| &t.points).any(|q| {
        let w = q.vector();
        (&v - &w).norm().min((&v + &w).norm()) < radius
    })
}

/// Trace every `W̃′` component reachable from the multistart points of each
/// random real two-qubit instance.
pub fn trace_instance(seed: u64, index: usize, a: &VarietyTrace) -> Result<Vec<Trace>, CliError> {
    let sys = variety_target(&variety_instance(seed, index, 2, true)?, true)?;
    let points = random_start_search(&sys, a.n_starts, mix(seed, 1_000 + index as u64), 1e-12);
    if points.is_empty() {
        return Err(CliError::NonConvergence(format!("no W̃′ point found for instance {index}")));
    }
    let mut traces: Vec<Trace> = Vec::new();
    for p in &points {
        if traces.len() >= a.max_components || on_trace(p, &traces, 3.0 * a.step) {
            continue;
        }
        let t = trace_component(&sys, p, a.step, a.max_steps)?;
        if let Some(f) = &t.failure {
            return Err(CliError::NonConvergence(format!("trace of instance {index} failed: {f}")));
        }
        traces.push(t);
    }
    Ok(traces)
}

pub fn variety_trace(seed: u64, a: &VarietyTrace) -> Outcome {
    check_positive("step", a.step)?;
    let config = RunConfig::new("variety trace", seed)
        .param("instances", a.instances)
        .param("n_starts", a.n_starts)
        .param("step", a.step)
        .param("max_steps", a.max_steps)
        .param("max_components", a.max_components);
    let mut table =
        Table::new(&["instance", "component", "index", "closed", "residual", "c0", "c1", "c2", "c3", "x", "y", "z", "chart"]);
    let mut closed_instances = 0;
    let mut components = Vec::new();
    for i in 0..a.instances {
        let traces = trace_instance(seed, i, a)?;
        if traces.iter().all(|t| t.closed) {
            closed_instances += 1;
        }
        components.push(traces.len());
        for (c, t) in traces.iter().enumerate() {
            for (k, p) in t.points.iter().enumerate() {
                let (x, chart) = projection(&p.coords);
                let mut row: Vec<Cell> = vec![i.into(), c.into(), k.into(), t.closed.into(), p.residual.into()];
                row.extend(p.coords.iter().map(|&v| Cell::F(v)));
                row.extend([x[0].into(), x[1].into(), x[2].into(), chart.into()]);
                table.push(row);
            }
        }
    }
    table.summarize("closed_instances", closed_instances);
    table.summarize("components", &components);
    Ok((config, Artifact::Csv(table)))
}

pub struct TfimCorrelators {
    pub n: usize,
    pub g: Vec<f64>,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub ed: bool,
    pub tol: f64,
}

pub fn temperature_grid(t_min: f64, t_max: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![t_min];
    }
    (0..points).map(|i| t_min + (t_max - t_min) * i as f64 / (points - 1) as f64).collect()
}

pub fn tfim_correlators(a: &TfimCorrelators) -> Outcome {
    check_positive("t-min", a.t_min)?;
    check_positive("t-max", a.t_max)?;
    if a.t_max < a.t_min || a.points == 0 || a.g.is_empty() {
        return Err(CliError::config("need t-min <= t-max, at least one point and one g"));
    }
    if a.ed && a.n > tfim::MAX_DENSE_SITES {
        return Err(CliError::config(format!("ED cross-check limited to N <= {}", tfim::MAX_DENSE_SITES)));
    }
    let config = RunConfig::new("tfim correlators", 0)
        .param("n", a.n)
        .param("g", &a.g)
        .param("t_min", a.t_min)
        .param("t_max", a.t_max)
        .param("points", a.points)
        .param("ed", a.ed)
        .param("tol", a.tol);
    let temps = temperature_grid(a.t_min, a.t_max, a.points);
    let betas: Vec<f64> = temps.iter().map(|t| 1.0 / t).collect();
    let mut cols = vec!["g", "temperature", "beta", "x_avg", "zz_avg"];
    if a.ed {
        cols.extend(["x_ed", "zz_ed", "residual"]);
    }
    let mut table = Table::new(&cols);
    let mut worst: f64 = 0.0;
    for &g in &a.g {
        let ed = if a.ed { Some(tfim::ed_thermal(a.n, g, &betas)?) } else { None };
        for (j, (&t, &beta)) in temps.iter().zip(&betas).enumerate() {
            let c = tfim::correlators(&TfimSpec::new(a.n, g, beta)?);
            let mut row: Vec<Cell> = vec![g.into(), t.into(), beta.into(), c.x_avg.into(), c.zz_avg.into()];
            if let Some(ed) = &ed {
                let e = ed[j];
                let r = (c.x_avg - e.x_avg).abs().max((c.zz_avg - e.zz_avg).abs());
                worst = worst.max(r);
                row.extend([e.x_avg.into(), e.zz_avg.into(), r.into()]);
            }
            table.push(row);
        }
    }
    if a.ed {
        table.summarize("max_ed_residual", worst);
        if worst > a.tol {
            return Err(CliError::invariant(format!("free-fermion correlators differ from ED by {worst:.3e}")));
        }
    }
    Ok((config, Artifact::Csv(table)))
}

pub struct TfimHessian {
    pub n: usize,
    pub g: Vec<f64>,
    pub beta: Vec<f64>,
    pub ed: bool,
    pub tol: f64,
}

pub fn tfim_hessian(a: &TfimHessian) -> Outcome {
    if a.ed && a.n > tfim::MAX_DENSE_SITES {
        return Err(CliError::config(format!("ED cross-check limited to N <= {}", tfim::MAX_DENSE_SITES)));
    }
    let config = RunConfig::new("tfim hessian", 0)
        .param("n", a.n)
        .param("g", &a.g)
        .param("beta", &a.beta)
        .param("ed", a.ed)
        .param("tol", a.tol);
    let mut entries = Vec::new();
    let mut min_entry = f64::INFINITY;
    let mut max_ed: f64 = 0.0;
    for &g in &a.g {
        let eig = if a.ed { Some(tfim::ed_spectrum(a.n, g)?) } else { None };
        for &beta in &a.beta {
            let spec = TfimSpec::new(a.n, g, beta)?;
            let h = tfim::thermal_hessian(&spec);
            let diag = [h[(0, 0)], h[(1, 1)], h[(2, 2)]];
            min_entry = diag.iter().cloned().fold(min_entry, f64::min);
            let mut entry = json!({ "g": g, "beta": beta, "diag": diag });
            if let Some(eig) = &eig {
                let rho = tfim::gibbs_state(eig, beta)?;
                let b = nash::bilinear_form_matrix(&rho, &tfim::star_instance(&spec)?, 0)?;
                let diff = (0..3)
                    .flat_map(|i| (0..3).map(move |j| (i, j)))
                    .map(|(i, j)| (b[(i, j)] - h[(i, j)]).abs())
                    .fold(0.0, f64::max);
                max_ed = max_ed.max(diff);
                entry["ed_difference"] = json!(diff);
            }
            entries.push(entry);
        }
    }
    let positive = min_entry >= -1e-10;
    let result = json!({
        "entries": entries,
        "min_entry": min_entry,
        "positive_semidefinite": positive,
        "max_ed_difference": if a.ed { json!(max_ed) } else { Value::Null },
    });
    if !positive {
        return Err(CliError::invariant(format!("thermal Hessian entry {min_entry:.3e} is negative")));
    }
    if max_ed > a.tol {
        return Err(CliError::invariant(format!("Hessian differs from the Gibbs bilinear form by {max_ed:.3e}")));
    }
    Ok((config, Artifact::Json(result)))
}

pub struct QpdVariety {
    pub points: usize,
    pub tol: f64,
}

pub fn qpd_variety(seed: u64, a: &QpdVariety) -> Outcome {
    check_positive("tol", a.tol)?;
    let config = RunConfig::new("qpd variety", seed).param("points", a.points).param("tol", a.tol);
    let samples = qpd::sample_qpd_variety(a.points, seed, a.tol)?;
    if samples.len() < a.points {
        return Err(CliError::NonConvergence(format!("only {} of {} points converged", samples.len(), a.points)));
    }
    let mut table = Table::new(&["x", "y", "z", "on_max_set", "residual", "X0", "X1", "X2", "X3", "chart"]);
    for s in samples {
        let (p, chart) = projection(&s.rebit.x);
        let mut row: Vec<Cell> = vec![p[0].into(), p[1].into(), p[2].into(), s.nash_max.into(), s.residual.into()];
        row.extend(s.rebit.x.iter().map(|&c| Cell::F(c)));
        row.push(chart.into());
        table.push(row);
    }
    Ok((config, Artifact::Csv(table)))
}

pub struct QpdOrbits {
    pub chi: f64,
    pub quotient: bool,
    pub n_starts: usize,
    pub tol: f64,
}

/// `+0.70710678|01⟩ +0.70710678|10⟩` style label.
pub fn ket_label(x: &RebitState) -> String {
    const KETS: [&str; 4] = ["00", "01", "10", "11"];
    let terms: Vec<String> = x
        .x
        .iter()
        .zip(KETS)
        .filter(|(c, _)| c.abs() > 1e-9)
        .map(|(c, k)| format!("{c:+.8}|{k}>"))
        .collect();
    terms.join(" ")
}

pub fn qpd_orbits(seed: u64, a: &QpdOrbits) -> Outcome {
    if !a.chi.is_finite() || a.chi.abs() > 0.5 {
        return Err(CliError::config(format!("chi must lie in [-1/2, 1/2], got {}", a.chi)));
    }
    let config = RunConfig::new("qpd orbits", seed)
        .param("chi", a.chi)
        .param("quotient_antipodal", a.quotient)
        .param("n_starts", a.n_starts)
        .param("tol", a.tol);
    let opts = IntersectionOptions { tol: a.tol, n_starts: a.n_starts, seed, quotient_antipodal: a.quotient };
    let points = qpd::orbit_variety_intersections(a.chi, &opts)?;
    if points.is_empty() {
        return Err(CliError::NonConvergence("no Nash state found on the orbit".into()));
    }
    let listed: Vec<Value> = points
        .iter()
        .map(|p| {
            json!({
                "rebit": p.rebit.x,
                "state": ket_label(&p.rebit),
                "projected": p.projected.map(|q| [q.x, q.y, q.z]),
                "chi": p.chi,
                "payoffs": p.payoffs,
                "nash_max": p.nash_max,
                "variety_residual": p.variety_residual,
                "orbit_residual": p.orbit_residual,
            })
        })
        .collect();
    let result = json!({
        "chi": a.chi,
        "chi_squared": a.chi * a.chi,
        "method": "multistart Gauss-Newton sampling; completeness not certified",
        "nash_max_count": points.iter().filter(|p| p.nash_max).count(),
        "points": listed,
    });
    Ok((config, Artifact::Json(result)))
}

fn parse_complex(v: &Value) -> Result<C64, CliError> {
    match v {
        Value::Number(n) => Ok(C64::new(n.as_f64().unwrap_or(f64::NAN), 0.0)),
        Value::Array(p) if p.len() == 2 => {
            let re = p[0].as_f64().ok_or_else(|| CliError::config("complex entry must be numeric"))?;
            let im = p[1].as_f64().ok_or_else(|| CliError::config("complex entry must be numeric"))?;
            Ok(C64::new(re, im))
        }
        _ => Err(CliError::config("entries must be numbers or [re, im] pairs")),
    }
}

fn parse_matrix(v: &Value, d: usize) -> Result<DenseOperator, CliError> {
    let rows = v.as_array().filter(|r| r.len() == d).ok_or_else(|| CliError::config(format!("matrix needs {d} rows")))?;
    let mut m = CMatrix::zeros(d, d);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().filter(|r| r.len() == d).ok_or_else(|| CliError::config(format!("row needs {d} entries")))?;
        for (j, e) in row.iter().enumerate() {
            m[(i, j)] = parse_complex(e)?;
        }
    }
    Ok(DenseOperator::hermitian(m)?)
}

/// Input for `nash check`.
pub struct CheckInput {
    pub instance: NashInstance,
    pub state: StateVector,
}

pub fn parse_check_input(text: &str) -> Result<CheckInput, CliError> {
    let v: Value = serde_json::from_str(text).map_err(CliError::config)?;
    let n = v["n_qubits"].as_u64().ok_or_else(|| CliError::config("missing n_qubits"))? as usize;
    if n == 0 || n > 12 {
        return Err(CliError::config("n_qubits must be in 1..=12"));
    }
    let d = 1 << n;
    let obs = v["observables"]
        .as_array()
        .ok_or_else(|| CliError::config("missing observables"))?
        .iter()
        .map(|m| parse_matrix(m, d))
        .collect::<Result<Vec<_>, _>>()?;
    let blocks: Vec<Vec<usize>> = match &v["blocks"] {
        Value::Null => (0..obs.len()).map(|q| vec![q]).collect(),
        b => serde_json::from_value(b.clone()).map_err(CliError::config)?,
    };
    let amps = v["state"].as_array().ok_or_else(|| CliError::config("missing state"))?;
    if amps.len() != d {
        return Err(CliError::config(format!("state needs {d} amplitudes")));
    }
    let amps: Vec<C64> = amps.iter().map(parse_complex).collect::<Result<_, _>>()?;
    let state = StateVector::new(DVector::from_vec(amps))?;
    Ok(CheckInput { instance: NashInstance::local_blocks(n, obs, blocks)?, state })
}

pub fn nash_check(text: &str, input_name: &str, tol: f64) -> Outcome {
    check_positive("tol", tol)?;
    let input = parse_check_input(text)?;
    let config = RunConfig::new("nash check", 0).param("input", input_name).param("tol", tol);
    let inst = &input.instance;
    let res = nash_residual(&input.state, inst)?;
    let is_nash = res.max <= tol;
    let mut result = json!({
        "residual": res.max,
        "per_block_residual": res.per_block,
        "is_nash": is_nash,
    });
    if is_nash {
        let class = classify_local(&input.state, inst, nash::CLASSIFY_TOL)?;
        result["classification"] = json!(format!("{:?}", class.kind));
        result["bilinear_eigenvalues"] = json!(class.eigenvalues);
    }
    if inst.blocks().iter().all(|b| b.len() == 1) {
        let mut checks = Vec::new();
        for (h, b) in inst.observables().iter().zip(inst.blocks()) {
            let lo = global_su2_check(&input.state, h, b[0], OptimizationMode::Min)?;
            let hi = global_su2_check(&input.state, h, b[0], OptimizationMode::Max)?;
            checks.push(json!({
                "qubit": b[0],
                "value": lo.current_value,
                "minimum": lo.optimal_value,
                "maximum": hi.optimal_value,
                "is_global_min": lo.is_global,
                "is_global_max": hi.is_global,
            }));
        }
        result["su2_checks"] = json!(checks);
    }
    Ok((config, Artifact::Json(result)))
}

pub struct HaarUbiquity {
    pub n: usize,
    pub samples: usize,
    pub epsilon: Option<f64>,
}

pub fn haar_epsilon(n: usize, epsilon: Option<f64>) -> f64 {
    epsilon.unwrap_or_else(|| 2f64.powf(-(n as f64) / 4.0))
}

/// Residuals of Haar-random states for the ring instance drawn from `seed`.
pub fn haar_residuals(seed: u64, n: usize, samples: usize) -> Result<Vec<f64>, CliError> {
    let inst = random_ring_instance(n, &mut seeded_rng(seed))?;
    let mut rng = seeded_rng(mix(seed, 1));
    (0..samples)
        .map(|_| Ok(nash_residual(&random_state_with(inst.dim(), &mut rng), &inst)?.max))
        .collect()
}

pub fn haar_ubiquity(seed: u64, a: &HaarUbiquity) -> Outcome {
    if !(3..=12).contains(&a.n) || a.samples == 0 {
        return Err(CliError::config("need 3 <= n <= 12 and at least one sample"));
    }
    let eps = haar_epsilon(a.n, a.epsilon);
    check_positive("epsilon", eps)?;
    let config = RunConfig::new("haar ubiquity", seed)
        .param("n", a.n)
        .param("samples", a.samples)
        .param("epsilon", eps);
    let residuals = haar_residuals(seed, a.n, a.samples)?;
    let mut table = Table::new(&["sample", "residual", "approx_nash"]);
    let mut hits = 0;
    for (k, r) in residuals.iter().enumerate() {
        hits += usize::from(*r <= eps);
        table.push(vec![k.into(), (*r).into(), (*r <= eps).into()]);
    }
    table.summarize("approx_nash_count", hits);
    table.summarize("fraction", hits as f64 / a.samples as f64);
    Ok((config, Artifact::Csv(table)))
}

pub struct Theorem1Audit {
    pub instances: usize,
    pub sizes: Vec<usize>,
    pub tol: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct Theorem1Row {
    pub index: usize,
    pub n: usize,
    pub max_eigenstate_residual: f64,
    pub ground_energy: f64,
    pub ground_global_min: bool,
}

pub fn theorem1_instance(seed: u64, index: usize, n: usize) -> Result<Theorem1Row, CliError> {
    let graph = random_two_local_graph(n, &mut seeded_rng(mix(seed, index as u64)))?;
    let inst = star_instance(&graph, 1.0)?;
    let eig = diagonalize(&graph.hamiltonian()?)?;
    let mut worst: f64 = 0.0;
    for psi in eig.states() {
        worst = worst.max(nash_residual(&psi, &inst)?.max);
    }
    let ground = eig.ground_state();
    let mut global = true;
    for (site, h) in inst.observables().iter().enumerate() {
        global &= global_su2_check(&ground, h, site, OptimizationMode::Min)?.is_global;
    }
    Ok(Theorem1Row { index, n, max_eigenstate_residual: worst, ground_energy: eig.values[0], ground_global_min: global })
}

pub fn theorem1_audit(seed: u64, a: &Theorem1Audit) -> Outcome {
    if a.sizes.is_empty() || a.sizes.iter().any(|&n| !(2..=8).contains(&n)) {
        return Err(CliError::config("sizes must lie in 2..=8"));
    }
    check_positive("tol", a.tol)?;
    let config = RunConfig::new("theorem1 audit", seed)
        .param("instances", a.instances)
        .param("sizes", &a.sizes)
        .param("tol", a.tol);
    let rows: Vec<Theorem1Row> = (0..a.instances)
        .map(|k| theorem1_instance(seed, k, a.sizes[k % a.sizes.len()]))
        .collect::<Result<_, _>>()?;
    let pass = rows.iter().all(|r| r.max_eigenstate_residual < a.tol && r.ground_global_min);
    let worst = rows.iter().map(|r| r.max_eigenstate_residual).fold(0.0, f64::max);
    let result = json!({ "instances": rows, "max_residual": worst, "all_pass": pass });
    if !pass {
        return Err(CliError::invariant(format!("eigenstate audit failed (max residual {worst:.3e})")));
    }
    Ok((config, Artifact::Json(result)))
}
