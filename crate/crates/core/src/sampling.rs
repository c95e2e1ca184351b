//! Weighted point-mass approximations of a one-step disturbance.
//!
//! The disturbance is a multiplicative lognormal return
//! `W = exp(mu + s N)` with `mu = (rate - vol^2 / 2) dt` and
//! `s = vol sqrt(dt)`. Three constructions are provided:
//!
//! * [`local_average_sampling`]: conditional means over an equiprobable
//!   partition. By Jensen's inequality these under-price convex functions,
//!   and refining the partition can only raise the estimate.
//! * [`extreme_point_sampling`]: each partition cell of a truncated
//!   distribution pushes its mass onto its two endpoints, preserving the
//!   cell mean. This over-prices convex functions.
//! * [`monte_carlo_antithetic`]: seeded antithetic normal draws.

use std::io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::normal;
use crate::pwl::fmt_full;
use crate::{Error, Result};

/// Cells narrower than this (in normal units) integrate the within-cell
/// excess directly instead of differencing two partial expectations.
const NARROW_CELL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplingKind {
    MonteCarlo,
    LocalAverage,
    ExtremePoint,
    /// A single point with probability one; compatible with both bounds.
    Deterministic,
}

impl SamplingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplingKind::MonteCarlo => "monte_carlo",
            SamplingKind::LocalAverage => "local_average",
            SamplingKind::ExtremePoint => "extreme_point",
            SamplingKind::Deterministic => "deterministic",
        }
    }
}

/// Points `W(k)` with probabilities `rho(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSampling {
    points: Vec<f64>,
    weights: Vec<f64>,
    kind: SamplingKind,
}

impl DisturbanceSampling {
    /// Checks positivity, finiteness and normalization (within 1e-12).
    pub fn new(points: Vec<f64>, weights: Vec<f64>, kind: SamplingKind) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::invalid(
                "sampling",
                format!("{} points with {} weights", points.len(), weights.len()),
            ));
        }
        if let Some(&w) = points.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invalid(
                "sampling",
                format!("point {w} is not positive"),
            ));
        }
        if let Some(&r) = weights.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::invalid(
                "sampling",
                format!("weight {r} is negative"),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "sampling",
                format!("weights sum to {total}"),
            ));
        }
        Ok(Self {
            points,
            weights,
            kind,
        })
    }

    /// A single point with probability one.
    pub fn deterministic(w: f64) -> Result<Self> {
        Self::new(vec![w], vec![1.0], SamplingKind::Deterministic)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> SamplingKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|w| w)
    }

    /// `sum_k rho(k) g(W(k))`.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&w, &r)| r * g(w))
            .sum()
    }

    /// Rows `k,w,rho`.
    pub fn write_csv(&self, out: &mut dyn io::Write) -> io::Result<()> {
        writeln!(out, "k,w,rho")?;
        for (k, (&w, &r)) in self.points.iter().zip(&self.weights).enumerate() {
            writeln!(out, "{},{},{}", k + 1, fmt_full(w), fmt_full(r))?;
        }
        Ok(())
    }
}

/// One-step lognormal return of geometric Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalSpec {
    pub rate: f64,
    pub vol: f64,
    pub dt: f64,
}

impl LognormalSpec {
    pub fn new(rate: f64, vol: f64, dt: f64) -> Result<Self> {
        if !rate.is_finite() {
            return Err(Error::invalid("rate", "must be finite"));
        }
        if !(vol.is_finite() && vol > 0.0) {
            return Err(Error::invalid(
                "vol",
                format!("must be positive, got {vol}"),
            ));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        Ok(Self { rate, vol, dt })
    }

    /// Mean of `ln W`.
    pub fn log_mean(&self) -> f64 {
        (self.rate - 0.5 * self.vol * self.vol) * self.dt
    }

    /// Standard deviation of `ln W`.
    pub fn log_sd(&self) -> f64 {
        self.vol * self.dt.sqrt()
    }

    pub fn mean(&self) -> f64 {
        let s = self.log_sd();
        (self.log_mean() + 0.5 * s * s).exp()
    }

    /// `W` at normal score `x`.
    pub fn at_score(&self, x: f64) -> f64 {
        (self.log_mean() + self.log_sd() * x).exp()
    }

    /// Normal score of `w`.
    pub fn score(&self, w: f64) -> f64 {
        (w.ln() - self.log_mean()) / self.log_sd()
    }

    pub fn pdf(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        normal::pdf(self.score(w)) / (w * self.log_sd())
    }

    pub fn cdf(&self, w: f64) -> f64 {
        if w <= 0.0 {
            0.0
        } else {
            normal::cdf(self.score(w))
        }
    }

    /// `E[W 1(score(W) in (a, b))]` in normal-score coordinates.
    pub fn partial_expectation_scores(&self, a: f64, b: f64) -> f64 {
        let s = self.log_sd();
        self.mean() * normal::interval_mass(a - s, b - s)
    }

    /// `E[W 1(lo < W < hi)]`.
    pub fn partial_expectation(&self, lo: f64, hi: f64) -> f64 {
        let a = if lo <= 0.0 {
            f64::NEG_INFINITY
        } else {
            self.score(lo)
        };
        self.partial_expectation_scores(a, self.score(hi))
    }

    /// `E[(W - at_score(a)) 1(score(W) in (a, b))]`, accurate for narrow
    /// cells where the two terms nearly cancel.
    fn cell_excess(&self, a: f64, b: f64) -> f64 {
        let base = self.at_score(a);
        if b - a <= NARROW_CELL {
            let s = self.log_sd();
            base * normal::integrate(a, b, |x| (s * (x - a)).exp_m1() * normal::pdf(x))
        } else {
            self.partial_expectation_scores(a, b) - base * normal::interval_mass(a, b)
        }
    }
}

/// Compact support retaining `mass` of the lognormal probability,
/// symmetric in probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedSupport {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
    /// `1 / mass`.
    pub normalizer: f64,
}

/// `[q((1 - mass) / 2), q(1 - (1 - mass) / 2)]`.
pub fn truncate(spec: &LognormalSpec, mass: f64) -> Result<TruncatedSupport> {
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::invalid(
            "mass",
            format!("must lie in (0, 1), got {mass}"),
        ));
    }
    let tail = 0.5 * (1.0 - mass);
    Ok(TruncatedSupport {
        lo: spec.at_score(normal::quantile(tail)),
        hi: spec.at_score(normal::upper_quantile(tail)),
        mass,
        normalizer: 1.0 / mass,
    })
}

/// `n` draws made of `n / 2` antithetic pairs `exp(mu +- s N)`, all with
/// weight `1 / n`. Points are returned in ascending order.
pub fn monte_carlo_antithetic(
    spec: &LognormalSpec,
    n: usize,
    seed: u64,
) -> Result<DisturbanceSampling> {
    monte_carlo_stream(spec, n, seed, 0)
}

/// As [`monte_carlo_antithetic`], drawing from ChaCha stream `stream` of
/// `seed`, so each time step can take independent draws under one seed.
pub fn monte_carlo_stream(
    spec: &LognormalSpec,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<DisturbanceSampling> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::invalid(
            "n",
            format!("must be even and at least 2, got {n}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n / 2 {
        let x: f64 = StandardNormal.sample(&mut rng);
        points.push(spec.at_score(x));
        points.push(spec.at_score(-x));
    }
    points.sort_by(f64::total_cmp);
    let weights = vec![1.0 / n as f64; n];
    DisturbanceSampling::new(points, weights, SamplingKind::MonteCarlo)
}

/// Conditional means of `W` over the `n` cells between consecutive
/// quantiles `q(k / n)`, each with weight `1 / n`.
///
/// Partitions for `n` and any multiple of `n` are nested, and the shared
/// breakpoints are bit-identical.
pub fn local_average_sampling(spec: &LognormalSpec, n: usize) -> Result<DisturbanceSampling> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let scores: Vec<f64> = (0..=n)
        .map(|k| normal::quantile_split(k as f64 / n as f64, (n - k) as f64 / n as f64))
        .collect();
    let points = scores
        .windows(2)
        .map(|c| n as f64 * spec.partial_expectation_scores(c[0], c[1]))
        .collect();
    DisturbanceSampling::new(points, vec![1.0 / n as f64; n], SamplingKind::LocalAverage)
}

/// Breakpoints `e(1) < ... < e(n+1)` splitting the truncated distribution
/// into `n` cells of truncated mass `1 / n`.
pub fn truncated_breakpoints(
    spec: &LognormalSpec,
    support: &TruncatedSupport,
    n: usize,
) -> Vec<f64> {
    truncated_scores(support, n)
        .into_iter()
        .map(|x| spec.at_score(x))
        .collect()
}

fn truncated_scores(support: &TruncatedSupport, n: usize) -> Vec<f64> {
    let tail = 0.5 * (1.0 - support.mass);
    (0..=n)
        .map(|j| {
            let lower = tail + support.mass * j as f64 / n as f64;
            let upper = tail + support.mass * (n - j) as f64 / n as f64;
            normal::quantile_split(lower, upper)
        })
        .collect()
}

/// Pushes the mass of every truncated cell `[e(j), e(j+1)]` onto its two
/// endpoints with the mean-preserving weights
/// `(e(j+1) / n - L(j)) / (e(j+1) - e(j))` and `(L(j) - e(j) / n) / (e(j+1) - e(j))`,
/// where `L(j)` is the truncated partial expectation of the cell.
pub fn extreme_point_sampling(
    spec: &LognormalSpec,
    support: &TruncatedSupport,
    n: usize,
) -> Result<DisturbanceSampling> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if !(support.lo > 0.0 && support.lo < support.hi && support.mass > 0.0 && support.mass <= 1.0) {
        return Err(Error::invalid(
            "support",
            format!("degenerate support [{}, {}]", support.lo, support.hi),
        ));
    }
    let scores = truncated_scores(support, n);
    let e: Vec<f64> = scores.iter().map(|&x| spec.at_score(x)).collect();
    if let Some(j) = e.windows(2).position(|w| w[0] >= w[1]) {
        return Err(Error::invalid(
            "n",
            format!("cell {j} collapses; partition of size {n} is too fine"),
        ));
    }
    let cell_mass = 1.0 / n as f64;
    let mut weights = vec![0.0; n + 1];
    for j in 0..n {
        // L(j) - e(j) / n under the truncated measure
        let excess = support.normalizer * spec.cell_excess(scores[j], scores[j + 1]);
        let upper_share = excess / (e[j + 1] - e[j]);
        weights[j] += cell_mass - upper_share;
        weights[j + 1] += upper_share;
    }
    DisturbanceSampling::new(e, weights, SamplingKind::ExtremePoint)
}

/// Mean of `W` under the truncated measure.
pub fn truncated_mean(spec: &LognormalSpec, support: &TruncatedSupport) -> f64 {
    let tail = 0.5 * (1.0 - support.mass);
    let a = normal::quantile(tail);
    let b = normal::upper_quantile(tail);
    support.normalizer * spec.partial_expectation_scores(a, b)
}
