//! Test-only oracles. Nothing here calls into the engine's numerics.

#![allow(dead_code)]

use convexdp::ConvexFn;
use rand::Rng;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Lognormal return `W = exp(mu + s X)` integrated in normal-score space.
#[derive(Clone, Copy, Debug)]
pub struct LognormalOracle {
    pub mu: f64,
    pub s: f64,
}

impl LognormalOracle {
    pub fn new(rate: f64, vol: f64, dt: f64) -> Self {
        Self {
            mu: (rate - 0.5 * vol * vol) * dt,
            s: vol * dt.sqrt(),
        }
    }

    pub fn score(&self, w: f64) -> f64 {
        if w <= 0.0 {
            f64::NEG_INFINITY
        } else {
            (w.ln() - self.mu) / self.s
        }
    }

    /// `E[g(W) 1(lo < W < hi)]`; infinite ends are cut at 12 standard
    /// deviations.
    pub fn integrate(&self, g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let a = self.score(lo).max(-12.0);
        let b = self.score(hi).min(12.0);
        let f = |x: f64| g((self.mu + self.s * x).exp()) * normal_pdf(x);
        simpson(&f, a, b, 1e-14)
    }
}

/// Convex piecewise-quadratic function: its derivative is piecewise linear
/// and nondecreasing, with nonnegative jumps at the breaks. The leftmost and
/// rightmost pieces are affine.
#[derive(Clone, Debug)]
pub struct PiecewiseQuadratic {
    starts: Vec<f64>,
    /// Per piece: value, slope and curvature at the piece's left end.
    pieces: Vec<(f64, f64, f64)>,
    /// Linear term added everywhere.
    tilt: f64,
}

impl PiecewiseQuadratic {
    /// Breaks fall in `(lo, hi)`. With `non_increasing` the final slope is
    /// tilted to zero, so the function never rises.
    pub fn random(rng: &mut impl Rng, lo: f64, hi: f64, non_increasing: bool) -> Self {
        let k = rng.random_range(1..6);
        let mut breaks: Vec<f64> = (0..k).map(|_| rng.random_range(lo..hi)).collect();
        breaks.sort_by(f64::total_cmp);
        let mut starts = vec![f64::NEG_INFINITY];
        starts.extend(breaks);
        let mut pieces = vec![(
            rng.random_range(-5.0..5.0),
            rng.random_range(-3.0..0.0),
            0.0,
        )];
        for j in 1..starts.len() {
            let (v0, s0, c0) = pieces[j - 1];
            // the first piece is affine, so anchor it at the first break
            let h = if j == 1 {
                0.0
            } else {
                starts[j] - starts[j - 1]
            };
            let value = v0 + s0 * h + 0.5 * c0 * h * h;
            let slope = s0 + c0 * h + rng.random_range(0.0..0.5);
            let curvature = if j + 1 == starts.len() {
                0.0
            } else {
                rng.random_range(0.0..0.3)
            };
            pieces.push((value, slope, curvature));
        }
        // piece 0 is stored relative to the first break
        starts[0] = starts[1];
        let tilt = if non_increasing {
            -pieces.last().unwrap().1
        } else {
            0.0
        };
        Self {
            starts,
            pieces,
            tilt,
        }
    }

    fn piece(&self, z: f64, right: bool) -> usize {
        if right {
            self.starts[1..].partition_point(|&b| b <= z)
        } else {
            self.starts[1..].partition_point(|&b| b < z)
        }
    }

    fn local(&self, j: usize, z: f64) -> (f64, f64) {
        let (v, s, c) = self.pieces[j];
        let h = z - self.starts[j];
        (
            v + s * h + 0.5 * c * h * h + self.tilt * z,
            s + c * h + self.tilt,
        )
    }

    /// Smallest slope, attained on the leftmost (affine) piece.
    pub fn tail_slope(&self) -> f64 {
        self.pieces[0].1 + self.tilt
    }
}

impl ConvexFn for PiecewiseQuadratic {
    fn value(&self, z: f64) -> f64 {
        self.local(self.piece(z, true), z).0
    }

    fn right_derivative(&self, z: f64) -> f64 {
        self.local(self.piece(z, true), z).1
    }

    fn left_derivative(&self, z: f64) -> f64 {
        self.local(self.piece(z, false), z).1
    }
}

/// `true` when `a <= b` up to `tol` relative to the magnitudes.
pub fn le(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol * (1.0 + a.abs().max(b.abs()))
}
