use nash_core::operator::diagonalize;
use nash_core::tfim::{
    averaged_observables, correlators, ed_spectrum, ed_thermal, eigen_expectations, ground_energy,
    ln_partition_function, thermal_hessian, tfim_hamiltonian, TfimSpec,
};

fn spec(n: usize, g: f64, beta: f64) -> TfimSpec {
    TfimSpec::new(n, g, beta).unwrap()
}

#[test]
fn ground_energy_matches_ed_up_to_ten_sites() {
    for n in [2, 5, 8, 10] {
        for g in [0.5, 1.5] {
            let ed = diagonalize(&tfim_hamiltonian(n, g).unwrap()).unwrap().values[0];
            let ff = ground_energy(&spec(n, g, 1.0));
            assert!((ff - ed).abs() < 1e-9, "n={n} g={g}: {ff} vs {ed}");
        }
    }
}

#[test]
fn partition_function_matches_ed_trace() {
    let betas = [0.1, 1.0, 10.0];
    for n in 2..=8 {
        for g in [0.5, 1.0, 1.5] {
            for (beta, ed) in betas.iter().zip(ed_thermal(n, g, &betas).unwrap()) {
                let rel = (ln_partition_function(&spec(n, g, *beta)) - ed.ln_z).exp_m1().abs();
                assert!(rel < 1e-9, "n={n} g={g} beta={beta}: {rel}");
            }
        }
    }
}

/// The correlator along the dominant coupling (`⟨zz⟩` for `g < 1`, `⟨x⟩` for
/// `g > 1`) grows monotonically as the temperature drops. The other one has a
/// maximum at intermediate temperature, which ED reproduces.
#[test]
fn correlator_temperature_dependence() {
    let betas: Vec<f64> = (0..=60).map(|i| 0.1 * (100f64).powf(i as f64 / 60.0)).collect();
    for g in [0.5, 1.5] {
        let values: Vec<_> = betas.iter().map(|&b| correlators(&spec(16, g, b))).collect();
        let dominant = |c: &nash_core::tfim::Correlators| if g < 1.0 { c.zz_avg } else { c.x_avg };
        for w in values.windows(2) {
            assert!(dominant(&w[1]) >= dominant(&w[0]) - 1e-12, "g={g}");
        }
    }
    let probe = [0.5, 1.5, 10.0];
    for (g, pick) in [(0.5, 0usize), (1.5, 1)] {
        let ed = ed_thermal(10, g, &probe).unwrap();
        let other = |x: f64, zz: f64| if pick == 0 { x } else { zz };
        let ff: Vec<f64> = probe.iter().map(|&b| {
            let c = correlators(&spec(10, g, b));
            other(c.x_avg, c.zz_avg)
        }).collect();
        for (f, e) in ff.iter().zip(&ed) {
            assert!((f - other(e.x_avg, e.zz_avg)).abs() < 1e-9);
        }
        assert!(ff[1] > ff[0] && ff[1] > ff[2], "g={g}: {ff:?}");
    }
}

#[test]
fn hessian_is_nonnegative_on_grid() {
    for g in [0.25, 0.5, 1.0, 1.5, 2.0] {
        for beta in [0.0, 0.5, 1.0, 5.0, 50.0] {
            for n in [4, 8, 12] {
                let h = thermal_hessian(&spec(n, g, beta));
                for i in 0..3 {
                    assert!(h[(i, i)] >= -1e-12, "n={n} g={g} beta={beta}: {h}");
                }
            }
        }
    }
}

/// At `β = 100` the chain is in its ground state once the gap is resolved,
/// which holds for `g ≥ 1`. For `g < 1` the finite-size splitting of the
/// symmetric and antisymmetric ordered states is below `1/β`, so the check is
/// against the full ED Gibbs average instead.
#[test]
fn low_temperature_limit_matches_ed() {
    for n in [4, 6, 8] {
        for g in [0.5, 1.0, 1.5] {
            let c = correlators(&spec(n, g, 100.0));
            let (x_ref, zz_ref) = if g >= 1.0 {
                let eig = ed_spectrum(n, g).unwrap();
                let (x, zz) = averaged_observables(n).unwrap();
                (eigen_expectations(&eig, &x)[0], eigen_expectations(&eig, &zz)[0])
            } else {
                let ed = ed_thermal(n, g, &[100.0]).unwrap()[0];
                (ed.x_avg, ed.zz_avg)
            };
            assert!((c.x_avg - x_ref).abs() < 1e-6, "n={n} g={g}: x {} vs {}", c.x_avg, x_ref);
            assert!((c.zz_avg - zz_ref).abs() < 1e-6, "n={n} g={g}: zz {} vs {}", c.zz_avg, zz_ref);
        }
    }
}
