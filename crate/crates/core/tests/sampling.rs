mod common;

use common::LognormalOracle;
use convexdp::normal;
use convexdp::sampling::{
    extreme_point_sampling, local_average_sampling, monte_carlo_antithetic, monte_carlo_stream,
    truncate, truncated_breakpoints, truncated_mean,
};
use convexdp::{LognormalSpec, SamplingKind};

fn reference() -> (LognormalSpec, LognormalOracle) {
    (
        LognormalSpec::new(0.06, 0.2, 0.02).unwrap(),
        LognormalOracle::new(0.06, 0.2, 0.02),
    )
}

const MASS: f64 = 0.999_999_999;

#[test]
fn local_average_points_are_quadrature_conditional_means() {
    let (spec, oracle) = reference();
    for n in [1, 2, 4, 100] {
        let s = local_average_sampling(&spec, n).unwrap();
        for (k, &w) in s.points().iter().enumerate() {
            let lo = if k == 0 {
                0.0
            } else {
                spec.at_score(normal::quantile(k as f64 / n as f64))
            };
            let hi = if k + 1 == n {
                f64::INFINITY
            } else {
                spec.at_score(normal::quantile((k + 1) as f64 / n as f64))
            };
            let mass = oracle.integrate(|_| 1.0, lo, hi);
            let first = oracle.integrate(|w| w, lo, hi);
            assert!(
                (mass - 1.0 / n as f64).abs() < 1e-8,
                "n={n} k={k} mass {mass}"
            );
            assert!(
                (w - first / mass).abs() < 1e-8,
                "n={n} k={k}: {w} vs {}",
                first / mass
            );
        }
    }
}

#[test]
fn extreme_point_weights_match_quadrature_of_interpolation_weights() {
    let (spec, oracle) = reference();
    let support = truncate(&spec, MASS).unwrap();
    for n in [1, 2, 4, 100] {
        let s = extreme_point_sampling(&spec, &support, n).unwrap();
        let e = s.points();
        assert_eq!(e, truncated_breakpoints(&spec, &support, n).as_slice());
        let mut want = vec![0.0; n + 1];
        for j in 0..n {
            let (a, b) = (e[j], e[j + 1]);
            let cell = support.normalizer * oracle.integrate(|_| 1.0, a, b);
            assert!(
                (cell - 1.0 / n as f64).abs() < 1e-8,
                "n={n} cell {j}: {cell}"
            );
            want[j] += support.normalizer * oracle.integrate(|w| (b - w) / (b - a), a, b);
            want[j + 1] += support.normalizer * oracle.integrate(|w| (w - a) / (b - a), a, b);
        }
        for (k, (&got, &want)) in s.weights().iter().zip(&want).enumerate() {
            assert!((got - want).abs() < 1e-8, "n={n} k={k}: {got} vs {want}");
        }
    }
}

#[test]
fn weights_normalized_and_means_preserved() {
    let (spec, oracle) = reference();
    let support = truncate(&spec, MASS).unwrap();
    let full_mean = (oracle.mu + 0.5 * oracle.s * oracle.s).exp();
    let trunc_mean = support.normalizer * oracle.integrate(|w| w, support.lo, support.hi);
    assert!((truncated_mean(&spec, &support) - trunc_mean).abs() < 1e-10);
    for n in [1, 2, 4, 10, 100, 1000] {
        let la = local_average_sampling(&spec, n).unwrap();
        let ep = extreme_point_sampling(&spec, &support, n).unwrap();
        for s in [&la, &ep] {
            assert!((s.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(s.weights().iter().all(|&r| r >= 0.0));
            assert!(s.points().iter().all(|&w| w.is_finite() && w > 0.0));
        }
        assert!((la.mean() - full_mean).abs() < 1e-10, "n={n}");
        assert!((ep.mean() - trunc_mean).abs() < 1e-10, "n={n}");
    }
}

type Named = (&'static str, fn(f64) -> f64);

fn test_functions() -> [Named; 4] {
    [
        ("square", |w| w * w),
        ("put at 1", |w| (1.0 - w).max(0.0)),
        ("put at 0.95", |w| (0.95 - w).max(0.0)),
        ("call at 1.04", |w| (w - 1.04).max(0.0)),
    ]
}

#[test]
fn jensen_directions() {
    let (spec, oracle) = reference();
    let support = truncate(&spec, MASS).unwrap();
    for n in [1, 2, 4, 100] {
        let la = local_average_sampling(&spec, n).unwrap();
        let ep = extreme_point_sampling(&spec, &support, n).unwrap();
        for (name, g) in test_functions() {
            let full = oracle.integrate(g, 0.0, f64::INFINITY);
            let trunc = support.normalizer * oracle.integrate(g, support.lo, support.hi);
            assert!(la.expect(g) <= full + 1e-8, "{name}, n={n}");
            assert!(ep.expect(g) >= trunc - 1e-8, "{name}, n={n}");
        }
    }
}

#[test]
fn doubling_local_averages_never_decreases_convex_expectations() {
    let (spec, _) = reference();
    for (name, g) in test_functions() {
        let mut previous = f64::NEG_INFINITY;
        for n in (0..11).map(|k| 1usize << k) {
            let e = local_average_sampling(&spec, n).unwrap().expect(g);
            assert!(e >= previous - 1e-14, "{name}: n={n} {e} < {previous}");
            previous = e;
        }
    }
}

#[test]
fn doubling_extreme_points_never_increases_convex_expectations() {
    let (spec, _) = reference();
    let support = truncate(&spec, MASS).unwrap();
    for (name, g) in test_functions() {
        let mut previous = f64::INFINITY;
        for n in (0..11).map(|k| 1usize << k) {
            let e = extreme_point_sampling(&spec, &support, n)
                .unwrap()
                .expect(g);
            assert!(e <= previous + 1e-14, "{name}: n={n} {e} > {previous}");
            previous = e;
        }
    }
}

#[test]
fn truncated_support_of_reference_spec() {
    let (spec, _) = reference();
    let s = truncate(&spec, MASS).unwrap();
    assert!((s.lo - 0.841979).abs() < 1e-5, "{}", s.lo);
    assert!((s.hi - 1.18958).abs() < 1e-5, "{}", s.hi);
    assert_eq!(s.mass * s.normalizer, 1.0);
    assert!(truncate(&spec, 1.0).is_err());
    assert!(truncate(&spec, 0.0).is_err());
}

#[test]
fn one_cell_extreme_points_average_the_support() {
    let (spec, oracle) = reference();
    let support = truncate(&spec, MASS).unwrap();
    let s = extreme_point_sampling(&spec, &support, 1).unwrap();
    let (e1, e2) = (s.points()[0], s.points()[1]);
    let lambda = support.normalizer * oracle.integrate(|w| w, e1, e2);
    assert!((s.weights()[0] - (e2 - lambda) / (e2 - e1)).abs() < 1e-10);
    assert!((s.weights()[0] * e1 + s.weights()[1] * e2 - lambda).abs() < 1e-10);
}

#[test]
fn monte_carlo_mean_within_three_standard_errors() {
    let (spec, oracle) = reference();
    let mean = (oracle.mu + 0.5 * oracle.s * oracle.s).exp();
    let sd = mean * (oracle.s * oracle.s).exp_m1().sqrt();
    let n = 10_000;
    for seed in 0..20 {
        let s = monte_carlo_antithetic(&spec, n, seed).unwrap();
        assert_eq!(s.kind(), SamplingKind::MonteCarlo);
        assert!(
            (s.mean() - mean).abs() < 3.0 * sd / (n as f64).sqrt(),
            "seed {seed}"
        );
    }
}

#[test]
fn monte_carlo_pairs_are_antithetic_and_deterministic() {
    let (spec, oracle) = reference();
    let s = monte_carlo_antithetic(&spec, 2, 7).unwrap();
    assert_eq!(s.weights(), &[0.5, 0.5]);
    let product = s.points()[0] * s.points()[1];
    assert!((product - (2.0 * oracle.mu).exp()).abs() < 1e-14);
    assert!(monte_carlo_antithetic(&spec, 3, 7).is_err());

    let a = monte_carlo_stream(&spec, 1000, 42, 3).unwrap();
    let b = monte_carlo_stream(&spec, 1000, 42, 3).unwrap();
    let c = monte_carlo_stream(&spec, 1000, 42, 4).unwrap();
    assert_eq!(a.points(), b.points());
    assert_ne!(a.points(), c.points());
}

#[test]
fn constructors_reject_empty_samplings() {
    let (spec, _) = reference();
    let support = truncate(&spec, MASS).unwrap();
    assert!(local_average_sampling(&spec, 0).is_err());
    assert!(extreme_point_sampling(&spec, &support, 0).is_err());
}
