//! Re-verification of emitted artifacts. Wherever the inputs can be rebuilt
//! from the recorded seed and parameters, residuals are recomputed rather
//! than read back.

use std::collections::BTreeMap;

use nalgebra::DVector;
use nash_core::qpd::{self, RebitState};
use nash_core::tfim::{self, TfimSpec};
use serde_json::Value;

use crate::error::CliError;
use crate::experiments;
use crate::output::RunConfig;

#[derive(Debug, Default)]
pub struct AuditReport {
    pub command: String,
    pub checks: usize,
    pub max_residual: f64,
    pub failures: Vec<String>,
}

impl AuditReport {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn residual(&mut self, r: f64, tol: f64, at: impl FnOnce() -> String) {
        self.max_residual = self.max_residual.max(r);
        self.check(r < tol, || format!("{}: residual {r:.3e} >= {tol:.1e}", at()));
    }
}

fn parse_meta_value(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|_| Value::from(s))
}

struct Meta {
    fields: BTreeMap<String, Value>,
}

impl Meta {
    fn get(&self, key: &str) -> Result<&Value, CliError> {
        self.fields.get(key).ok_or_else(|| CliError::invariant(format!("metadata lacks {key}")))
    }

    fn f64(&self, key: &str) -> Result<f64, CliError> {
        self.get(key)?.as_f64().ok_or_else(|| CliError::invariant(format!("{key} is not numeric")))
    }

    fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.get(key)?.as_u64().map(|v| v as usize).ok_or_else(|| CliError::invariant(format!("{key} is not an integer")))
    }

    fn bool(&self, key: &str) -> Result<bool, CliError> {
        self.get(key)?.as_bool().ok_or_else(|| CliError::invariant(format!("{key} is not a bool")))
    }

    fn command(&self) -> Result<String, CliError> {
        Ok(self.get("command")?.as_str().unwrap_or_default().to_string())
    }

    fn seed(&self) -> Result<u64, CliError> {
        self.get("seed")?.as_u64().ok_or_else(|| CliError::invariant("seed is not an integer"))
    }

    /// Recompute the configuration hash from the echoed parameters.
    fn verify_hash(&self, report: &mut AuditReport) -> Result<(), CliError> {
        let mut config = RunConfig::new(&self.command()?, self.seed()?);
        for (k, v) in &self.fields {
            if let Some(p) = k.strip_prefix("param.") {
                config.params.insert(p.to_string(), v.clone());
            }
        }
        let recorded = self.get("config_hash")?.as_str().unwrap_or_default().to_string();
        let recomputed = config.hash();
        report.check(recorded == recomputed, || "config_hash does not match the recorded parameters".into());
        Ok(())
    }
}

struct CsvData {
    meta: Meta,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvData {
    fn col(&self, name: &str) -> Result<usize, CliError> {
        self.header.iter().position(|h| h == name).ok_or_else(|| CliError::invariant(format!("missing column {name}")))
    }

    fn f64(&self, row: &[String], name: &str) -> Result<f64, CliError> {
        let s = &row[self.col(name)?];
        s.parse().map_err(|_| CliError::invariant(format!("column {name}: {s} is not a number")))
    }

    fn usize(&self, row: &[String], name: &str) -> Result<usize, CliError> {
        let s = &row[self.col(name)?];
        s.parse().map_err(|_| CliError::invariant(format!("column {name}: {s} is not an integer")))
    }

    fn bool(&self, row: &[String], name: &str) -> Result<bool, CliError> {
        let s = &row[self.col(name)?];
        s.parse().map_err(|_| CliError::invariant(format!("column {name}: {s} is not a bool")))
    }
}

fn parse_csv(text: &str) -> Result<CsvData, CliError> {
    let mut fields = BTreeMap::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some((k, v)) = line.trim_start_matches('#').trim().split_once(": ") {
            fields.insert(k.to_string(), parse_meta_value(v));
        }
    }
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = reader.headers().map_err(CliError::invariant)?.iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()
        .map_err(CliError::invariant)?;
    Ok(CsvData { meta: Meta { fields }, header, rows })
}

fn coords(data: &CsvData, row: &[String], prefix: &str, n: usize) -> Result<Vec<f64>, CliError> {
    (0..n).map(|k| data.f64(row, &format!("{prefix}{k}"))).collect()
}

fn audit_projection(data: &CsvData, row: &[String], x: &[f64], report: &mut AuditReport) -> Result<(), CliError> {
    let chart = match row[data.col("chart")?].as_str() {
        "antipodal" => nash_core::variety::Chart::Antipodal,
        _ => nash_core::variety::Chart::Standard,
    };
    let p = nash_core::variety::stereographic(&[x[0], x[1], x[2], x[3]], chart)?;
    let got = [data.f64(row, "x")?, data.f64(row, "y")?, data.f64(row, "z")?];
    let gap = p.iter().zip(&got).map(|(a, b)| (a - b).abs() / (1.0 + a.abs())).fold(0.0, f64::max);
    report.check(gap < 1e-12, || format!("projected coordinates disagree by {gap:.3e}"));
    Ok(())
}

fn audit_csv(text: &str) -> Result<AuditReport, CliError> {
    let data = parse_csv(text)?;
    let meta = &data.meta;
    let mut report = AuditReport { command: meta.command()?, ..Default::default() };
    meta.verify_hash(&mut report)?;
    let seed = meta.seed()?;
    match report.command.as_str() {
        "qpd variety" => {
            let tol = meta.f64("param.tol")?.max(1e-9);
            for row in &data.rows {
                let x = [data.f64(row, "X0")?, data.f64(row, "X1")?, data.f64(row, "X2")?, data.f64(row, "X3")?];
                let rebit = RebitState::new(x);
                let (r1, r2) = qpd::qpd_variety_residual(&rebit);
                let n2 = rebit.norm().powi(2);
                report.residual(r1.abs().max(r2.abs()) / n2, tol, || format!("rebit {x:?}"));
                let flag = qpd::qpd_nash_max_check(&rebit, 1e-9)?;
                report.check(flag == data.bool(row, "on_max_set")?, || format!("max-set flag wrong at {x:?}"));
                audit_projection(&data, row, &x, &mut report)?;
            }
        }
        "tfim correlators" => {
            let n = meta.usize("param.n")?;
            let tol = meta.f64("param.tol")?;
            let has_ed = meta.bool("param.ed")?;
            for row in &data.rows {
                let (g, beta) = (data.f64(row, "g")?, data.f64(row, "beta")?);
                let c = tfim::correlators(&TfimSpec::new(n, g, beta)?);
                let gap = (c.x_avg - data.f64(row, "x_avg")?).abs().max((c.zz_avg - data.f64(row, "zz_avg")?).abs());
                report.check(gap < 1e-12, || format!("g={g} beta={beta}: correlators changed by {gap:.3e}"));
                if has_ed {
                    let r = data.f64(row, "residual")?;
                    report.residual(r, tol, || format!("g={g} beta={beta}"));
                }
            }
        }
        "variety sample" => {
            let qubits = meta.usize("param.qubits")?;
            let real = meta.bool("param.real")?;
            let tol = meta.f64("param.tol")?;
            let ambient = if real { 1 << qubits } else { 2 << qubits };
            let mut cache: BTreeMap<usize, nash_core::variety::QuadricSystem> = BTreeMap::new();
            for row in &data.rows {
                let i = data.usize(row, "instance")?;
                if let std::collections::btree_map::Entry::Vacant(e) = cache.entry(i) {
                    let inst = experiments::variety_instance(seed, i, qubits, real)?;
                    e.insert(experiments::variety_target(&inst, real)?);
                }
                let v = DVector::from_vec(coords(&data, row, "c", ambient)?);
                report.residual(cache[&i].residual(&v), tol, || format!("instance {i}"));
            }
        }
        "variety trace" => {
            let mut cache: BTreeMap<usize, nash_core::variety::QuadricSystem> = BTreeMap::new();
            for row in &data.rows {
                let i = data.usize(row, "instance")?;
                if let std::collections::btree_map::Entry::Vacant(e) = cache.entry(i) {
                    let inst = experiments::variety_instance(seed, i, 2, true)?;
                    e.insert(experiments::variety_target(&inst, true)?);
                }
                let x = coords(&data, row, "c", 4)?;
                report.residual(cache[&i].residual(&DVector::from_vec(x.clone())), 1e-9, || format!("instance {i}"));
                audit_projection(&data, row, &x, &mut report)?;
            }
        }
        "haar ubiquity" => {
            let n = meta.usize("param.n")?;
            let samples = meta.usize("param.samples")?;
            let eps = meta.f64("param.epsilon")?;
            let fresh = experiments::haar_residuals(seed, n, samples)?;
            report.check(fresh.len() == data.rows.len(), || "sample count differs".into());
            for (row, r) in data.rows.iter().zip(&fresh) {
                let stored = data.f64(row, "residual")?;
                report.check((stored - r).abs() < 1e-12, || format!("residual {stored} recomputes to {r}"));
                report.check(data.bool(row, "approx_nash")? == (*r <= eps), || "approx_nash flag wrong".into());
                report.max_residual = report.max_residual.max(*r);
            }
        }
        other => return Err(CliError::invariant(format!("no audit rule for CSV from {other:?}"))),
    }
    Ok(report)
}

/// Every numeric field whose key mentions a residual or difference must be
/// below `tol`.
fn walk_residuals(v: &Value, path: &str, tol: f64, report: &mut AuditReport) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let p = format!("{path}.{k}");
                if let Some(r) = x.as_f64() {
                    if k.contains("residual") || k.contains("difference") {
                        report.residual(r, tol, || p.clone());
                    }
                } else {
                    walk_residuals(x, &p, tol, report);
                }
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                walk_residuals(x, &format!("{path}[{i}]"), tol, report);
            }
        }
        _ => {}
    }
}

fn audit_json(text: &str) -> Result<AuditReport, CliError> {
    let v: Value = serde_json::from_str(text).map_err(CliError::invariant)?;
    let fields: BTreeMap<String, Value> =
        serde_json::from_value(v["metadata"].clone()).map_err(|_| CliError::invariant("missing metadata"))?;
    let meta = Meta { fields };
    let mut report = AuditReport { command: meta.command()?, ..Default::default() };
    meta.verify_hash(&mut report)?;
    let result = &v["result"];
    match report.command.as_str() {
        "qpd orbits" => {
            let chi = meta.f64("param.chi")?;
            let (h1, h2) = qpd::qpd_payoff_operators();
            for p in result["points"].as_array().into_iter().flatten() {
                let x: [f64; 4] = serde_json::from_value(p["rebit"].clone()).map_err(CliError::invariant)?;
                let rebit = RebitState::new(x);
                let (r1, r2) = qpd::qpd_variety_residual(&rebit);
                report.residual(r1.abs().max(r2.abs()), 1e-9, || format!("rebit {x:?} variety"));
                report.residual((qpd::entanglement_parameter(&rebit) - chi * chi).abs(), 1e-9, || format!("rebit {x:?} orbit"));
                let psi = rebit.to_state()?;
                let u = |h: &nash_core::operator::DenseOperator| psi.amplitudes().dotc(&h.apply(psi.amplitudes())).re;
                let pay: [f64; 2] = serde_json::from_value(p["payoffs"].clone()).map_err(CliError::invariant)?;
                report.check((u(&h1) - pay[0]).abs() < 1e-12 && (u(&h2) - pay[1]).abs() < 1e-12, || {
                    format!("payoffs of {x:?} do not recompute")
                });
                let flag = qpd::qpd_nash_max_check(&rebit, 1e-9)?;
                report.check(Some(flag) == p["nash_max"].as_bool(), || format!("nash_max flag wrong at {x:?}"));
            }
        }
        "theorem1 audit" => {
            let tol = meta.f64("param.tol")?;
            let seed = meta.seed()?;
            for row in result["instances"].as_array().into_iter().flatten() {
                let index = row["index"].as_u64().unwrap_or_default() as usize;
                let n = row["n"].as_u64().unwrap_or_default() as usize;
                let fresh = experiments::theorem1_instance(seed, index, n)?;
                report.residual(fresh.max_eigenstate_residual, tol, || format!("instance {index}"));
                report.check(fresh.ground_global_min, || format!("instance {index}: ground state not a global minimum"));
            }
        }
        _ => {
            let tol = meta.fields.get("param.tol").and_then(Value::as_f64).unwrap_or(1e-8);
            walk_residuals(result, "result", tol, &mut report);
            for key in ["all_pass", "positive_semidefinite"] {
                if let Some(b) = result.get(key).and_then(Value::as_bool) {
                    report.check(b, || format!("{key} is false"));
                }
            }
        }
    }
    Ok(report)
}

pub fn audit_text(text: &str) -> Result<AuditReport, CliError> {
    if text.trim_start().starts_with('{') {
        audit_json(text)
    } else {
        audit_csv(text)
    }
}
