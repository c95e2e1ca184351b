//! Standard normal distribution helpers with tail-accurate evaluation.
//!
//! `erfc` comes from `libm`; the inverse starts from `statrs`' `erfc_inv`
//! and is polished with one Halley step. Everything here is arranged so
//! that no result is formed as the difference of two numbers close to 1.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::sync::LazyLock;

use libm::erfc;
use statrs::function::erf::erfc_inv;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Intervals narrower than this are integrated directly.
const NARROW: f64 = 0.5;

pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `P(N > x)`.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// `x` with `cdf(x) = p`.
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else if p > 0.5 {
        upper_quantile(1.0 - p)
    } else {
        lower_tail_quantile(p)
    }
}

/// `p <= 0.5`: refine on the lower tail, where `cdf` is relatively exact.
fn lower_tail_quantile(p: f64) -> f64 {
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    let density = pdf(x);
    if density == 0.0 {
        return x;
    }
    let u = (cdf(x) - p) / density;
    x - u / (1.0 + 0.5 * x * u)
}

/// `x` with `sf(x) = q`.
pub fn upper_quantile(q: f64) -> f64 {
    if q <= 0.0 {
        f64::INFINITY
    } else if q >= 1.0 {
        f64::NEG_INFINITY
    } else if q > 0.5 {
        -lower_tail_quantile(1.0 - q)
    } else {
        -lower_tail_quantile(q)
    }
}

/// `x` with `cdf(x) = lower`, where `upper = 1 - lower` is supplied exactly
/// by the caller so that upper-tail levels keep full precision.
pub fn quantile_split(lower: f64, upper: f64) -> f64 {
    if lower <= 0.5 {
        quantile(lower)
    } else {
        upper_quantile(upper)
    }
}

/// `P(a < N < b)`, accurate to a few ulps relative to the result.
pub fn interval_mass(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if b - a <= NARROW {
        return integrate(a, b, pdf);
    }
    if a >= 0.0 {
        sf(a) - sf(b)
    } else if b <= 0.0 {
        sf(-b) - sf(-a)
    } else {
        1.0 - sf(-a) - sf(b)
    }
}

/// 16-point Gauss–Legendre rule on `[a, b]`.
pub fn integrate(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = &*GAUSS_LEGENDRE_16;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

static GAUSS_LEGENDRE_16: LazyLock<(Vec<f64>, Vec<f64>)> = LazyLock::new(|| gauss_legendre(16));

/// Nodes and weights on `[-1, 1]` by Newton iteration on the Legendre
/// polynomial.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
