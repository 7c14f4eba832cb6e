use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use super::*;
use crate::advsdp::library;
use crate::graphrefl::{AdversaryGraph, DEFAULT_KAPPA, KERNEL_THRESHOLD};
use crate::spectral::{input_spectrum, jordan_decompose};

fn bits(s: &str) -> Bits {
    s.parse().unwrap()
}

fn point(phase: f64) -> PhaseDistribution {
    PhaseDistribution::new(vec![PhaseWeight { phase, weight: 1.0 }]).unwrap()
}

/// `E_T |<0|U^T|0>|^2` by repeated multiplication.
fn brute_force_random_power(u: &DMatrix<f64>, zero: usize, tau: u64) -> f64 {
    let mut v = DVector::zeros(u.nrows());
    v[zero] = 1.0;
    let mut acc = 0.0;
    for _ in 0..tau {
        v = u * v;
        acc += v[zero] * v[zero];
    }
    acc / tau as f64
}

fn brute_force_hadamard(u: &DMatrix<f64>, zero: usize, tau: u64) -> f64 {
    let mut v = DVector::zeros(u.nrows());
    v[zero] = 1.0;
    let mut acc = 0.0;
    for _ in 0..tau {
        v = u * v;
        acc += 0.5 + 0.5 * v[zero];
    }
    acc / tau as f64
}

#[test]
fn mean_cos_matches_direct_sum() {
    for &phi in &[0.0, 1e-9, 0.3, -2.0, PI, 3.0 * PI, 2.0 * PI - 1e-7, 6.0] {
        for tau in [1u64, 2, 7, 100, 1000] {
            let direct: f64 = (1..=tau).map(|t| (phi * t as f64).cos()).sum::<f64>() / tau as f64;
            assert!(
                (mean_cos(phi, tau) - direct).abs() < 1e-9,
                "phi {phi} tau {tau}"
            );
        }
    }
}

#[test]
fn hadamard_matches_geometric_kernel() {
    // (1/4) sum_beta w [2 + (1/tau)((e^{i theta (tau+1)} - e^{-i theta tau}) / (e^{i theta} - 1) - 1)]
    let dist = PhaseDistribution::new(vec![
        PhaseWeight {
            phase: 0.7,
            weight: 0.2,
        },
        PhaseWeight {
            phase: -0.7,
            weight: 0.2,
        },
        PhaseWeight {
            phase: 2.1,
            weight: 0.6,
        },
    ])
    .unwrap();
    let tau = 142u64;
    let t = tau as f64;
    let kernel = |theta: f64| {
        let one = Complex::new(1.0, 0.0);
        let num =
            Complex::from_polar(1.0, theta * (t + 1.0)) - Complex::from_polar(1.0, -theta * t);
        let den = Complex::from_polar(1.0, theta) - one;
        2.0 + ((num / den - one) / t).re
    };
    let expected: f64 = dist
        .entries()
        .iter()
        .map(|e| 0.25 * e.weight * kernel(e.phase))
        .sum();
    assert!((hadamard_probability(&dist, tau) - expected).abs() < 1e-13);
}

#[test]
fn fixed_point_always_accepts() {
    let x = bits("1");
    for alg in Algorithm::ALL {
        let out = run(alg, &x, true, &point(0.0), 1.0);
        assert!((out.p_one - 1.0).abs() < 1e-15, "{alg}: {}", out.p_one);
    }
    let one = run(Algorithm::PhaseEstimation, &x, true, &point(0.0), 1.0);
    assert!((one.lower.unwrap() - 0.9).abs() < 1e-15);
    assert_eq!(one.upper, Some(1.0));
}

#[test]
fn phase_estimator_meets_its_contract() {
    let est = PhaseEstimator::new(0.01, 0.1);
    assert_eq!((est.precision, est.extra), (10, 3));
    assert_eq!(est.query_count(), 8191);
    assert!((est.accept(0.0) - 1.0).abs() < 1e-15);
    for k in 0..200 {
        let theta = 0.01 + k as f64 * 0.0157;
        assert!(
            est.accept(theta) <= 0.1,
            "theta {theta}: {}",
            est.accept(theta)
        );
        assert!(est.accept(-theta) <= 0.1);
    }
}

#[test]
fn query_counts() {
    let two = AlgorithmParams::for_algorithm(Algorithm::HadamardTest, 1.0);
    assert_eq!(query_count(Algorithm::HadamardTest, &two), 100);
    let three = AlgorithmParams::for_algorithm(Algorithm::RandomPower, 1.0 + 1e-11);
    assert_eq!(query_count(Algorithm::RandomPower, &three), 100_000);
    assert_eq!(
        AlgorithmParams::for_algorithm(Algorithm::HadamardTest, 2f64.sqrt()).tau,
        Some(142)
    );
    let one = AlgorithmParams::for_algorithm(Algorithm::PhaseEstimation, 1.0);
    assert_eq!(one.phase_qubits, Some(13));
    assert_eq!(query_count(Algorithm::PhaseEstimation, &one), 8191);
}

#[test]
fn algorithm_numbers_round_trip() {
    for alg in Algorithm::ALL {
        assert_eq!(Algorithm::try_from(alg.number()).unwrap(), alg);
        let text = serde_json::to_string(&alg).unwrap();
        assert_eq!(serde_json::from_str::<Algorithm>(&text).unwrap(), alg);
    }
    assert!(Algorithm::try_from(4).is_err());
    assert!(serde_json::from_str::<Algorithm>("0").is_err());
}

#[test]
fn analytic_averages_match_matrix_powers() {
    for cert in [
        library::or(1),
        library::or(2),
        library::majority3(),
        library::parity(2),
    ] {
        let g = AdversaryGraph::build(&cert.function, &cert.dual, DEFAULT_KAPPA, KERNEL_THRESHOLD)
            .unwrap();
        for x in cert.function.domain() {
            let ops = g.input_operators(x).unwrap();
            let dist = PhaseDistribution::from_spectrum(&input_spectrum(&g, &ops).unwrap());
            for tau in [1u64, 10, 100, 1000] {
                let brute = brute_force_random_power(&ops.unitary, g.index.zero(), tau);
                assert!(
                    (random_power_probability(&dist, tau) - brute).abs() < 1e-9,
                    "{} x={x} tau={tau}",
                    cert.name
                );
                let brute = brute_force_hadamard(&ops.unitary, g.index.zero(), tau);
                assert!((hadamard_probability(&dist, tau) - brute).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn identity_outcomes() {
    let cert = library::or(1);
    let g =
        AdversaryGraph::build(&cert.function, &cert.dual, DEFAULT_KAPPA, KERNEL_THRESHOLD).unwrap();
    for (x, v) in cert.function.entries() {
        let ops = g.input_operators(x).unwrap();
        let s = input_spectrum(&g, &ops).unwrap();
        let (a1, a2, a3) = (
            run_alg1(&ops, &s, g.w),
            run_alg2(&ops, &s, g.w),
            run_alg3(&ops, &s, g.w),
        );
        if v {
            assert!(a1.lower.unwrap() >= 0.8);
            assert!(a2.p_one >= 0.9);
            assert!(a3.p_one >= 0.64);
        } else {
            assert!(a1.upper.unwrap() < 0.4);
            assert!(a2.p_one <= 0.88);
            assert!(a3.p_one <= 0.61);
        }
        assert_eq!(a3.query_count, 100_000);
    }
}

#[test]
fn sampling_extremes_and_concentration() {
    let x = bits("1");
    for alg in Algorithm::ALL {
        let out = sample(alg, &x, true, &point(0.0), 1.0, 1000, 7).unwrap();
        assert_eq!(out.sampled.unwrap().successes, 1000);
    }
    let never = sample(
        Algorithm::PhaseEstimation,
        &x,
        false,
        &point(PI),
        1.0,
        1000,
        7,
    )
    .unwrap();
    assert_eq!(never.sampled.unwrap().successes, 0);
    assert!(sample(Algorithm::RandomPower, &x, true, &point(0.0), 1.0, 0, 7).is_err());

    let cert = library::or(1);
    let g =
        AdversaryGraph::build(&cert.function, &cert.dual, DEFAULT_KAPPA, KERNEL_THRESHOLD).unwrap();
    let ops = g.input_operators(&x).unwrap();
    let dist = PhaseDistribution::from_spectrum(&input_spectrum(&g, &ops).unwrap());
    let trials = 100_000;
    let out = sample(Algorithm::RandomPower, &x, true, &dist, g.w, trials, 2024).unwrap();
    let rate = out.sampled.unwrap().successes as f64 / trials as f64;
    let sigma = (out.p_one * (1.0 - out.p_one) / trials as f64).sqrt();
    assert!(
        (rate - out.p_one).abs() <= 4.0 * sigma,
        "rate {rate} exact {}",
        out.p_one
    );
    let again = sample(Algorithm::RandomPower, &x, true, &dist, g.w, trials, 2024).unwrap();
    assert_eq!(again, out);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn outcomes_ignore_vertex_order(seed in 0u64..1000, which in 0usize..3, xi in 0usize..4) {
        let certs = [library::or(2), library::and(2), library::parity(2)];
        let cert = &certs[which];
        let g = AdversaryGraph::build(&cert.function, &cert.dual, DEFAULT_KAPPA, KERNEL_THRESHOLD).unwrap();
        let x = &cert.function.domain()[xi];
        let ops = g.input_operators(x).unwrap();
        let base = PhaseDistribution::from_spectrum(&input_spectrum(&g, &ops).unwrap());

        let size = g.dimension();
        let mut order: Vec<usize> = (0..size).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..size).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let p = DMatrix::from_fn(size, size, |r, c| if order[r] == c { 1.0 } else { 0.0 });
        let pi = &p * ops.pi_matrix() * p.transpose();
        let delta = &p * &g.delta * p.transpose();
        let zero = &p * g.zero_vector();
        let moved = PhaseDistribution::from_spectrum(&jordan_decompose(&pi, &delta, &zero).unwrap());
        for tau in [100u64, 100_000] {
            prop_assert!((random_power_probability(&base, tau) - random_power_probability(&moved, tau)).abs() < 1e-9);
            prop_assert!((hadamard_probability(&base, tau) - hadamard_probability(&moved, tau)).abs() < 1e-9);
        }
    }
}
