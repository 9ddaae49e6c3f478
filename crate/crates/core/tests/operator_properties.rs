use nalgebra::DMatrix;
use nash_core::operator::{
    commutator, diagonalize, embed, expectation, random_hermitian, random_hermitian_with, random_state,
    random_state_with, random_unitary, seeded_rng, star_hamiltonians, InteractionGraph, C64, DenseOperator,
};
use proptest::prelude::*;

fn random_general(d: usize, seed: u64) -> DenseOperator {
    &random_hermitian(d, seed, false) * &random_unitary(d, seed ^ 0x5eed)
}

fn support_strategy() -> impl Strategy<Value = (usize, Vec<usize>)> {
    (2usize..=4).prop_flat_map(|n| {
        prop_oneof![
            (0..n).prop_map(|s| vec![s]),
            (0..n, 0..n).prop_filter("distinct", |(a, b)| a != b).prop_map(|(a, b)| vec![a, b]),
        ]
        .prop_map(move |s| (n, s))
    })
}

/// Coefficients of `det(λ − M)` by Faddeev–LeVerrier, leading coefficient first.
fn char_poly(m: &DMatrix<C64>) -> Vec<C64> {
    let d = m.nrows();
    let mut coeffs = vec![C64::new(1.0, 0.0)];
    let mut mk = DMatrix::<C64>::zeros(d, d);
    let id = DMatrix::<C64>::identity(d, d);
    for k in 1..=d {
        mk = m * (&mk + &id * coeffs[k - 1]);
        let c = -mk.trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

/// Durand–Kerner root finding for a monic polynomial.
fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    let deg = coeffs.len() - 1;
    let eval = |z: C64| coeffs.iter().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c);
    let seed = C64::new(0.4, 0.9);
    let mut roots: Vec<C64> = (0..deg).map(|k| seed.powu(k as u32) * 3.0).collect();
    for _ in 0..2000 {
        let prev = roots.clone();
        for i in 0..deg {
            let mut den = C64::new(1.0, 0.0);
            for j in 0..deg {
                if i != j {
                    den *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / den;
            roots[i] -= step;
        }
        let moved = roots.iter().zip(&prev).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if moved < 1e-15 {
            break;
        }
    }
    roots
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn embed_is_multiplicative((n, support) in support_strategy(), seed in any::<u64>()) {
        let d = 1 << support.len();
        let a = random_general(d, seed);
        let b = random_general(d, seed.wrapping_add(1));
        let lhs = embed(&(&a * &b), &support, n).unwrap();
        let rhs = &embed(&a, &support, n).unwrap() * &embed(&b, &support, n).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn commutator_expectation_phase(n in 1usize..=3, seed in any::<u64>()) {
        let d = 1 << n;
        let h = random_hermitian(d, seed, false);
        let a = random_hermitian(d, seed.wrapping_add(7), false);
        let psi = random_state(d, seed.wrapping_add(13));
        let z = expectation(&psi, &commutator(&h, &a).unwrap()).unwrap();
        prop_assert!(z.re.abs() < 1e-12);
        let z = expectation(&psi, &commutator(&h, &a.times_i()).unwrap()).unwrap();
        prop_assert!(z.im.abs() < 1e-12);
    }

    #[test]
    fn star_weights_reconstruct(n in 2usize..=4, seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let mut graph = InteractionGraph::new(n);
        let mut onsite_total = DenseOperator::zeros(1 << n);
        for i in 0..n {
            graph.add_edge(i, (i + 1) % n, random_hermitian_with(4, &mut rng, false)).ok();
            let s = random_hermitian_with(2, &mut rng, false);
            onsite_total = &onsite_total + &embed(&s, &[i], n).unwrap();
            graph.add_onsite(i, s).unwrap();
        }
        let sum = |w: f64| {
            star_hamiltonians(&graph, w).unwrap().iter().fold(DenseOperator::zeros(1 << n), |acc, h| &acc + h)
        };
        prop_assert!(sum(1.0).max_abs_diff(&graph.hamiltonian().unwrap()) < 1e-12);
        let half = &graph.edge_hamiltonian().unwrap() + &onsite_total.scale(0.5);
        prop_assert!(sum(0.5).max_abs_diff(&half) < 1e-12);
    }

    #[test]
    fn diagonalize_matches_characteristic_roots(d in 1usize..=4, seed in any::<u64>(), real in any::<bool>()) {
        let h = random_hermitian(d, seed, real);
        let eig = diagonalize(&h).unwrap();
        let mut roots: Vec<f64> = poly_roots(&char_poly(h.matrix())).iter().map(|z| z.re).collect();
        roots.sort_by(f64::total_cmp);
        for (a, b) in eig.values.iter().zip(&roots) {
            prop_assert!((a - b).abs() < 1e-9, "{:?} vs {:?}", eig.values, roots);
        }
    }
}

#[test]
fn random_hermitian_entry_variance() {
    let mut rng = seeded_rng(2024);
    let samples = 10_000;
    let mut acc = [0.0f64; 3];
    for _ in 0..samples {
        let h = random_hermitian_with(2, &mut rng, false);
        let m = h.matrix();
        acc[0] += m[(0, 0)].norm_sqr();
        acc[1] += m[(1, 1)].norm_sqr();
        acc[2] += m[(0, 1)].norm_sqr();
    }
    for a in acc {
        let var = a / samples as f64;
        assert!((var - 1.0).abs() < 0.05, "entry variance {var}");
    }
}

#[test]
fn haar_first_moment() {
    let mut rng = seeded_rng(77);
    let samples = 10_000;
    let mean = (0..samples).map(|_| random_state_with(4, &mut rng).amplitudes()[0].norm_sqr()).sum::<f64>()
        / samples as f64;
    assert!((mean - 0.25).abs() < 0.01, "mean {mean}");
}
