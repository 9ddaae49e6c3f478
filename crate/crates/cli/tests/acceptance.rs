//! End-to-end acceptance criteria. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use nash_core::nash::{
    bilinear_form_matrix, global_su2_check, nash_residual, optimize_product_state, NashInstance,
    OptimizationMode,
};
use nash_core::operator::{diagonalize, random_hermitian, random_state_with, seeded_rng, CMatrix, StateVector, C64};
use nash_core::qpd::{payoffs, qpd_payoff_operators, GameInstance};
use nash_core::tfim::{self, TfimSpec};
use nash_core::variety::{
    build_system, estimate_local_dimension, random_start_search, tilde_v_membership, trace_component,
};
use rand::Rng;
use serde_json::Value;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Duration);

fn cli(args: &[&str]) -> Result<Value, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_nash-states"))
        .args(args)
        .output()
        .map_err(|e| format!("cannot run binary: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "`{}` exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    if text.trim_start().starts_with('{') {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        Ok(Value::String(text))
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn payoff_table() -> Check {
    let (h1, h2) = qpd_payoff_operators();
    let table = [(0, 3.0, 3.0), (1, 0.0, 5.0), (2, 5.0, 0.0), (3, 1.0, 1.0)];
    for (k, u1, u2) in table {
        let b = StateVector::basis(4, k);
        let got1 = b.amplitudes().dotc(&h1.apply(b.amplitudes())).re;
        let got2 = b.amplitudes().dotc(&h2.apply(b.amplitudes())).re;
        ensure((got1 - u1).abs() < 1e-12 && (got2 - u2).abs() < 1e-12, || format!("basis {k}: ({got1}, {got2})"))?;
    }
    let bell = StateVector::from_real(&[0.0, 1.0, 1.0, 0.0]).map_err(|e| e.to_string())?;
    let game = GameInstance::qpd(bell.clone()).map_err(|e| e.to_string())?;
    let id = nash_core::operator::DenseOperator::identity(4);
    let u = payoffs(&bell, &game, &[id.clone(), id]).map_err(|e| e.to_string())?;
    ensure((u[0] - 2.5).abs() < 1e-12 && (u[1] - 2.5).abs() < 1e-12, || format!("Bell payoffs {u:?}"))?;
    Ok("table reproduced; Bell payoffs (5/2, 5/2)".into())
}

fn nash_max_points(report: &Value) -> Vec<&Value> {
    report["result"]["points"].as_array().into_iter().flatten().filter(|p| p["nash_max"] == Value::Bool(true)).collect()
}

fn coords(v: &Value) -> Vec<f64> {
    v.as_array().into_iter().flatten().filter_map(Value::as_f64).collect()
}

fn separable_intersection() -> Check {
    let report = cli(&["qpd", "orbits", "--chi", "0"])?;
    let maxima = nash_max_points(&report);
    ensure(maxima.len() == 2, || format!("{} Nash-max points", maxima.len()))?;
    let mut zs = Vec::new();
    for p in &maxima {
        let x = coords(&p["projected"]);
        ensure(x.len() == 3 && x[0].abs() < 1e-6 && x[1].abs() < 1e-6 && (x[2].abs() - 1.0).abs() < 1e-6, || {
            format!("projected {x:?}")
        })?;
        let r = coords(&p["rebit"]);
        ensure((r[3].abs() - 1.0).abs() < 1e-9, || format!("rebit {r:?} is not ±|11⟩"))?;
        zs.push(x[2].signum());
    }
    ensure(zs[0] != zs[1], || "both points at the same pole".into())?;
    Ok("two Nash maxima at (0,0,±1), both ±|11⟩".into())
}

fn maximal_intersection() -> Check {
    let report = cli(&["qpd", "orbits", "--chi", "0.5"])?;
    let maxima = nash_max_points(&report);
    ensure(maxima.len() == 4, || format!("{} Nash-max points", maxima.len()))?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for p in &maxima {
        let r = coords(&p["rebit"]);
        ensure(r[0].abs() < 1e-9 && r[3].abs() < 1e-9 && (r[1].abs() - h).abs() < 1e-9 && (r[2].abs() - h).abs() < 1e-9, || {
            format!("rebit {r:?} is not (|01⟩ ± |10⟩)/√2")
        })?;
        let u = coords(&p["payoffs"]);
        ensure((u[0] - 2.5).abs() < 1e-9 && (u[1] - 2.5).abs() < 1e-9, || format!("payoffs {u:?}"))?;
        let x = coords(&p["projected"]);
        ensure((x[0].abs() - h).abs() < 1e-9 && (x[1].abs() - h).abs() < 1e-9 && x[2].abs() < 1e-9, || {
            format!("projected {x:?}")
        })?;
    }
    Ok("four Bell-state maxima at (±1/√2, ±1/√2, 0) with payoffs (5/2, 5/2)".into())
}

const TFIM_SIZES: [usize; 4] = [4, 6, 8, 10];
const TFIM_G: [f64; 3] = [0.5, 1.0, 1.5];
const TFIM_BETA: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn tfim_oracle() -> Check {
    let mut worst: f64 = 0.0;
    for n in TFIM_SIZES {
        for g in TFIM_G {
            let ed = tfim::ed_thermal(n, g, &TFIM_BETA).map_err(|e| e.to_string())?;
            for (beta, e) in TFIM_BETA.iter().zip(ed) {
                let spec = TfimSpec::new(n, g, *beta).map_err(|e| e.to_string())?;
                let z = (tfim::ln_partition_function(&spec) - e.ln_z).exp_m1().abs();
                let c = tfim::correlators(&spec);
                let err = z.max(rel(c.x_avg, e.x_avg)).max(rel(c.zz_avg, e.zz_avg));
                worst = worst.max(err);
                ensure(err < 1e-8, || format!("N={n} g={g} beta={beta}: relative error {err:.3e}"))?;
            }
        }
    }
    Ok(format!("60 grid points, max relative error {worst:.2e}"))
}

fn tfim_hessian() -> Check {
    let mut min_entry = f64::INFINITY;
    let mut worst: f64 = 0.0;
    for n in TFIM_SIZES {
        for g in TFIM_G {
            let eig = tfim::ed_spectrum(n, g).map_err(|e| e.to_string())?;
            for beta in TFIM_BETA {
                let spec = TfimSpec::new(n, g, beta).map_err(|e| e.to_string())?;
                let h = tfim::thermal_hessian(&spec);
                min_entry = min_entry.min(h.min());
                let rho = tfim::gibbs_state(&eig, beta).map_err(|e| e.to_string())?;
                let inst = tfim::star_instance(&spec).map_err(|e| e.to_string())?;
                let b = bilinear_form_matrix(&rho, &inst, 0).map_err(|e| e.to_string())?;
                for i in 0..3 {
                    for j in 0..3 {
                        worst = worst.max((b[(i, j)] - h[(i, j)]).abs());
                    }
                }
            }
        }
    }
    ensure(min_entry >= -1e-10, || format!("entry {min_entry:.3e} below -1e-10"))?;
    ensure(worst < 1e-8, || format!("Gibbs bilinear form differs by {worst:.3e}"))?;
    Ok(format!("min entry {min_entry:.2e}, max deviation from ED Gibbs form {worst:.2e}"))
}

fn theorem1_audit() -> Check {
    let report = cli(&["theorem1", "audit", "--instances", "20", "--sizes", "3,4,5", "--tol", "1e-8", "--seed", "11"])?;
    let rows = report["result"]["instances"].as_array().cloned().unwrap_or_default();
    ensure(rows.len() == 20, || format!("{} instances audited", rows.len()))?;
    for r in &rows {
        let res = r["max_eigenstate_residual"].as_f64().unwrap_or(f64::NAN);
        ensure(res < 1e-8, || format!("instance {}: residual {res:.3e}", r["index"]))?;
        ensure(r["ground_global_min"] == Value::Bool(true), || format!("instance {}: ground not global", r["index"]))?;
    }
    let worst = report["result"]["max_residual"].as_f64().unwrap_or(f64::NAN);
    Ok(format!("20 instances, max eigenstate residual {worst:.2e}, all ground states global minima"))
}

fn est_dims(csv: &str) -> Result<Vec<usize>, String> {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().ok_or("empty output")?.split(',').collect();
    let col = header.iter().position(|h| *h == "est_dim").ok_or("no est_dim column")?;
    lines.map(|l| l.split(',').nth(col).and_then(|s| s.parse().ok()).ok_or_else(|| "bad est_dim".to_string())).collect()
}

fn dimension_counting() -> Check {
    let two = cli(&["variety", "sample", "--qubits", "2", "--instances", "10", "--n-starts", "20", "--seed", "7"])?;
    let two = est_dims(two.as_str().unwrap_or_default())?;
    ensure(!two.is_empty() && two.iter().all(|&d| d == 0), || format!("N=2 dimensions {two:?}"))?;
    let three = cli(&["variety", "sample", "--qubits", "3", "--instances", "10", "--n-starts", "4", "--seed", "7"])?;
    let three = est_dims(three.as_str().unwrap_or_default())?;
    ensure(!three.is_empty() && three.iter().all(|&d| d == 5), || format!("N=3 dimensions {three:?}"))?;
    Ok(format!("N=2: {} points all est_dim 0; N=3: {} points all est_dim 5", two.len(), three.len()))
}

fn rebit_tracing() -> Check {
    let mut closed = 0;
    let mut members = 0;
    for k in 0..10u64 {
        let obs = (0..2).map(|i| random_hermitian(4, 9_000 + 10 * k + i, true)).collect();
        let inst = NashInstance::single_qubit_blocks(2, obs).map_err(|e| e.to_string())?;
        let sys = build_system(&inst, true).map_err(|e| e.to_string())?;
        let w = sys.tilde_v_system().map_err(|e| e.to_string())?;
        let points = random_start_search(&w, 20, k, 1e-12);
        let p = points.first().ok_or_else(|| format!("instance {k}: no W̃′ point"))?;
        for q in &points {
            let d = estimate_local_dimension(&w, q, 1e-7).map_err(|e| e.to_string())?.est_dim;
            ensure(d == 1, || format!("instance {k}: est_dim {d}"))?;
        }
        let trace = trace_component(&w, p, 0.02, 10_000).map_err(|e| e.to_string())?;
        for q in trace.points.iter().chain(&points) {
            for lambda in [0.0, 0.7, -1.9] {
                let ok = tilde_v_membership(&q.vector(), lambda, &sys, 1e-9).map_err(|e| e.to_string())?;
                ensure(ok, || format!("instance {k}: point off W̃′"))?;
                members += 1;
            }
        }
        closed += usize::from(trace.closed);
    }
    ensure(closed >= 8, || format!("only {closed}/10 traces closed"))?;
    Ok(format!("{closed}/10 traces closed; {members} memberships verified against all six quadrics"))
}

fn orbit_value(psi: &StateVector, h: &CMatrix, x: &CMatrix, t: f64) -> f64 {
    let v = (x * C64::new(t, 0.0)).exp() * psi.amplitudes();
    v.dotc(&(h * &v)).re
}

fn hessian_finite_differences() -> Check {
    let mut rng = seeded_rng(4242);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let n = 1 + k % 3;
        let d = 1 << n;
        let obs = (0..n).map(|i| random_hermitian(d, 500 * k as u64 + i as u64, false)).collect();
        let inst = NashInstance::single_qubit_blocks(n, obs).map_err(|e| e.to_string())?;
        let psi = random_state_with(d, &mut rng);
        let block = k % n;
        let b = bilinear_form_matrix(&psi, &inst, block).map_err(|e| e.to_string())?;
        let dir = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let x = inst.generators()[block]
            .iter()
            .zip(dir.iter())
            .fold(CMatrix::zeros(d, d), |acc, (g, c)| acc + g.matrix() * C64::new(*c, 0.0));
        let h = inst.observables()[block].matrix();
        let f0 = orbit_value(&psi, h, &x, 0.0);
        let second = |t: f64| (orbit_value(&psi, h, &x, t) - 2.0 * f0 + orbit_value(&psi, h, &x, -t)) / (t * t);
        let fd = (4.0 * second(5e-3) - second(1e-2)) / 3.0;
        let q = (dir.transpose() * &b * &dir)[(0, 0)];
        let err = rel(fd, q);
        worst = worst.max(err);
        ensure(err < 1e-5, || format!("triple {k}: relative error {err:.3e}"))?;
    }
    Ok(format!("100 triples, max relative error {worst:.2e}"))
}

fn haar_ubiquity() -> Check {
    let out = cli(&["haar", "ubiquity", "--n", "8", "--samples", "200", "--seed", "3"])?;
    let text = out.as_str().unwrap_or_default();
    let mut hits = 0;
    let mut total = 0;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    lines.next();
    for l in lines {
        total += 1;
        hits += usize::from(l.ends_with("true"));
    }
    ensure(total == 200, || format!("{total} samples"))?;
    let frac = hits as f64 / total as f64;
    ensure(frac >= 0.99, || format!("only {hits}/200 within 2^(-N/4)"))?;
    Ok(format!("{hits}/200 Haar states are 2^(-2)-approximate Nash states"))
}

fn product_state_check() -> Check {
    let spec = TfimSpec::new(6, 1.5, 1.0).map_err(|e| e.to_string())?;
    let h = tfim::tfim_hamiltonian(6, 1.5).map_err(|e| e.to_string())?;
    let mut rng = seeded_rng(6);
    let start: Vec<[C64; 2]> = (0..6)
        .map(|_| [C64::new(rng.random_range(0.5..1.0), 0.1), C64::new(rng.random_range(0.0..0.5), -0.2)])
        .collect();
    let opt = optimize_product_state(&h, start, 1e-15, 100_000).map_err(|e| e.to_string())?;
    ensure(opt.converged, || format!("not converged after {} sweeps", opt.sweeps))?;
    let inst = tfim::star_instance_weighted(&spec, 0.5).map_err(|e| e.to_string())?;
    let res = nash_residual(&opt.state, &inst).map_err(|e| e.to_string())?.max;
    ensure(res < 1e-8, || format!("product optimum residual {res:.3e}"))?;
    for (site, hi) in inst.observables().iter().enumerate() {
        let o = global_su2_check(&opt.state, hi, site, OptimizationMode::Min).map_err(|e| e.to_string())?;
        ensure(o.is_global, || format!("site {site}: {} vs optimum {}", o.current_value, o.optimal_value))?;
    }
    let e0 = diagonalize(&h).map_err(|e| e.to_string())?.values[0];
    ensure(opt.energy > e0 + 1e-9, || format!("product energy {} not above ground {e0}", opt.energy))?;
    Ok(format!("residual {res:.2e}, energy {:.6} > ED ground {e0:.6}", opt.energy))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("1 QPD payoff table", payoff_table, Duration::from_secs(1)),
        ("2 QPD separable intersection", separable_intersection, Duration::from_secs(10)),
        ("3 QPD maximal-entanglement intersection", maximal_intersection, Duration::from_secs(10)),
        ("4 TFIM oracle equivalence", tfim_oracle, Duration::from_secs(120)),
        ("5 TFIM Hessian positivity", tfim_hessian, Duration::from_secs(120)),
        ("6 Two-local eigenstate audit", theorem1_audit, Duration::from_secs(300)),
        ("7 Dimension counting", dimension_counting, Duration::from_secs(600)),
        ("8 Two-rebit tracing", rebit_tracing, Duration::from_secs(600)),
        ("9 Hessian vs finite differences", hessian_finite_differences, Duration::from_secs(60)),
        ("10 Haar ubiquity", haar_ubiquity, Duration::from_secs(120)),
        ("11 TFIM product-state optimum", product_state_check, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > limit => Err(format!("{msg}; took {elapsed:.1?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS  criterion {name}: {msg} [{elapsed:.2?}]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  criterion {name}: {msg} [{elapsed:.2?}]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
