//! Bermudan put on a geometric Brownian motion asset, posed as a two-mode
//! decision process, with an independent binomial-tree price oracle.
//!
//! Modes are `unexercised` and `exercised`; actions are `hold` and
//! `exercise`. Exercising pays the discounted intrinsic value
//! `exp(-rate dt t) (K - z)^+` and moves to the absorbing `exercised` mode,
//! whose value is identically zero.

use std::io;
use std::time::Instant;

use rayon::prelude::*;

use crate::mdp::{
    backward_induction, extract_policy, BoundKind, Interp, MdpModel, SamplingPlan, StepOptions,
    Tangent, ValueTable,
};
use crate::pwl::{fmt_full, Affine, ConvexFn, Grid, InterpConvex, MaxAffine};
use crate::sampling::{
    extreme_point_sampling, local_average_sampling, monte_carlo_stream, truncate, LognormalSpec,
};
use crate::{Error, Result};

pub const UNEXERCISED: usize = 0;
pub const EXERCISED: usize = 1;
pub const HOLD: usize = 0;
pub const EXERCISE: usize = 1;

/// Smallest tree size used by [`binomial_oracle`].
pub const ORACLE_MIN_STEPS: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct PutSpec {
    pub strike: f64,
    pub rate: f64,
    pub vol: f64,
    /// Years.
    pub expiry: f64,
    /// Exercise dates including `t = 0` and expiry.
    pub exercise_dates: usize,
    pub spots: Vec<f64>,
}

impl PutSpec {
    /// One-year put with 51 exercise dates, strike 40, rate 6%, vol 20%.
    pub fn reference() -> Self {
        Self {
            strike: 40.0,
            rate: 0.06,
            vol: 0.2,
            expiry: 1.0,
            exercise_dates: 51,
            spots: vec![32.0, 34.0, 36.0, 38.0, 40.0, 42.0, 44.0, 46.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err(Error::invalid(
                "strike",
                format!("must be positive, got {}", self.strike),
            ));
        }
        if !self.rate.is_finite() {
            return Err(Error::invalid("rate", "must be finite"));
        }
        if !(self.vol.is_finite() && self.vol > 0.0) {
            return Err(Error::invalid(
                "vol",
                format!("must be positive, got {}", self.vol),
            ));
        }
        if !(self.expiry.is_finite() && self.expiry > 0.0) {
            return Err(Error::invalid(
                "expiry",
                format!("must be positive, got {}", self.expiry),
            ));
        }
        if self.exercise_dates < 2 {
            return Err(Error::invalid(
                "exercise_dates",
                format!("need at least 2, got {}", self.exercise_dates),
            ));
        }
        if let Some(s) = self.spots.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::invalid("spots", format!("spot {s} is not positive")));
        }
        Ok(())
    }

    /// Number of decision steps `T`.
    pub fn horizon(&self) -> usize {
        self.exercise_dates - 1
    }

    /// Years between exercise dates.
    pub fn dt(&self) -> f64 {
        self.expiry / self.horizon() as f64
    }

    pub fn disturbance(&self) -> Result<LognormalSpec> {
        LognormalSpec::new(self.rate, self.vol, self.dt())
    }
}

/// `scale * (strike - z)^+`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PutPayoff {
    pub scale: f64,
    pub strike: f64,
}

impl ConvexFn for PutPayoff {
    fn value(&self, z: f64) -> f64 {
        self.scale * (self.strike - z).max(0.0)
    }

    fn right_derivative(&self, z: f64) -> f64 {
        if z < self.strike {
            -self.scale
        } else {
            0.0
        }
    }

    fn left_derivative(&self, z: f64) -> f64 {
        if z <= self.strike {
            -self.scale
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct PutModel {
    spec: PutSpec,
    dt: f64,
}

/// The put as a decision process with `z' = w z`.
pub fn build_put_mdp(spec: &PutSpec) -> Result<PutModel> {
    spec.validate()?;
    Ok(PutModel {
        spec: spec.clone(),
        dt: spec.dt(),
    })
}

impl PutModel {
    pub fn spec(&self) -> &PutSpec {
        &self.spec
    }

    pub fn discount(&self, t: usize) -> f64 {
        (-self.spec.rate * self.dt * t as f64).exp()
    }

    fn payoff(&self, t: usize) -> PutPayoff {
        PutPayoff {
            scale: self.discount(t),
            strike: self.spec.strike,
        }
    }
}

impl MdpModel for PutModel {
    fn horizon(&self) -> usize {
        self.spec.horizon()
    }

    fn modes(&self) -> usize {
        2
    }

    fn actions(&self) -> usize {
        2
    }

    fn mode_transition(&self, _t: usize, action: usize, from: usize, to: usize) -> f64 {
        let next = if from == EXERCISED || action == EXERCISE {
            EXERCISED
        } else {
            UNEXERCISED
        };
        if to == next {
            1.0
        } else {
            0.0
        }
    }

    fn reward(&self, t: usize, mode: usize, action: usize) -> Box<dyn ConvexFn + '_> {
        if mode == UNEXERCISED && action == EXERCISE {
            Box::new(self.payoff(t))
        } else {
            Box::new(Affine::ZERO)
        }
    }

    fn scrap(&self, mode: usize) -> Box<dyn ConvexFn + '_> {
        if mode == UNEXERCISED {
            Box::new(self.payoff(self.horizon()))
        } else {
            Box::new(Affine::ZERO)
        }
    }

    #[inline]
    fn transition(&self, _t: usize, w: f64, z: f64) -> f64 {
        w * z
    }

    #[inline]
    fn transition_slope(&self, _t: usize, w: f64, _z: f64) -> f64 {
        w
    }

    fn is_zero_mode(&self, mode: usize) -> bool {
        mode == EXERCISED
    }
}

/// Disturbance sampling behind the lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowerSampling {
    /// Conditional averages, shared by every step.
    LocalAverage,
    /// Fresh antithetic draws at every step; step `t` uses stream `t`.
    MonteCarlo { seed: u64 },
}

pub fn lower_plan(spec: &PutSpec, n: usize, sampling: LowerSampling) -> Result<SamplingPlan> {
    let dist = spec.disturbance()?;
    Ok(match sampling {
        LowerSampling::LocalAverage => {
            SamplingPlan::shared(local_average_sampling(&dist, n)?, spec.horizon(), 2)
        }
        LowerSampling::MonteCarlo { seed } => {
            let per_step = (0..spec.horizon())
                .map(|t| monte_carlo_stream(&dist, n, seed, t as u64))
                .collect::<Result<Vec<_>>>()?;
            SamplingPlan::per_step(per_step, 2)
        }
    })
}

pub fn upper_plan(spec: &PutSpec, n: usize, mass: f64) -> Result<SamplingPlan> {
    let dist = spec.disturbance()?;
    let support = truncate(&dist, mass)?;
    Ok(SamplingPlan::shared(
        extreme_point_sampling(&dist, &support, n)?,
        spec.horizon(),
        2,
    ))
}

/// Tangent-scheme induction.
pub fn lower_table(
    spec: &PutSpec,
    grid: &Grid,
    n: usize,
    sampling: LowerSampling,
) -> Result<(ValueTable<MaxAffine>, SamplingPlan)> {
    lower_table_with(spec, grid, n, sampling, StepOptions::default())
}

pub fn lower_table_with(
    spec: &PutSpec,
    grid: &Grid,
    n: usize,
    sampling: LowerSampling,
    options: StepOptions,
) -> Result<(ValueTable<MaxAffine>, SamplingPlan)> {
    let model = build_put_mdp(spec)?;
    let plan = lower_plan(spec, n, sampling)?;
    let table = backward_induction::<Tangent, _>(&model, grid, &plan, options)?;
    Ok((table, plan))
}

/// Interpolation-scheme induction on the truncated support.
pub fn upper_table(
    spec: &PutSpec,
    grid: &Grid,
    n: usize,
    mass: f64,
) -> Result<(ValueTable<InterpConvex>, SamplingPlan)> {
    upper_table_with(spec, grid, n, mass, StepOptions::default())
}

pub fn upper_table_with(
    spec: &PutSpec,
    grid: &Grid,
    n: usize,
    mass: f64,
    options: StepOptions,
) -> Result<(ValueTable<InterpConvex>, SamplingPlan)> {
    let model = build_put_mdp(spec)?;
    let plan = upper_plan(spec, n, mass)?;
    let table = backward_induction::<Interp, _>(&model, grid, &plan, options)?;
    Ok((table, plan))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketRow {
    pub spot: f64,
    pub lower: f64,
    pub upper: f64,
    /// `upper - lower`.
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct BracketConfig {
    pub grid: Grid,
    pub n: usize,
    pub mass: f64,
    pub lower_sampling: LowerSampling,
    pub options: StepOptions,
}

#[derive(Debug, Clone)]
pub struct BracketRun {
    pub rows: Vec<BracketRow>,
    pub lower: ValueTable<MaxAffine>,
    pub upper: ValueTable<InterpConvex>,
    pub lower_plan: SamplingPlan,
    pub upper_plan: SamplingPlan,
    pub lower_seconds: f64,
    pub upper_seconds: f64,
}

/// Lower and upper inductions evaluated at every spot of `spec`.
pub fn bracket_run(spec: &PutSpec, config: &BracketConfig) -> Result<BracketRun> {
    spec.validate()?;
    let (lower, upper) = rayon::join(
        || {
            let start = Instant::now();
            lower_table_with(
                spec,
                &config.grid,
                config.n,
                config.lower_sampling,
                config.options,
            )
            .map(|r| (r, start.elapsed().as_secs_f64()))
        },
        || {
            let start = Instant::now();
            upper_table_with(spec, &config.grid, config.n, config.mass, config.options)
                .map(|r| (r, start.elapsed().as_secs_f64()))
        },
    );
    let ((lower, lower_plan), lower_seconds) = lower?;
    let ((upper, upper_plan), upper_seconds) = upper?;
    let rows = spec
        .spots
        .iter()
        .map(|&spot| {
            let lo = lower.value(0, UNEXERCISED, spot);
            let hi = upper.value(0, UNEXERCISED, spot);
            BracketRow {
                spot,
                lower: lo,
                upper: hi,
                gap: hi - lo,
            }
        })
        .collect();
    Ok(BracketRun {
        rows,
        lower,
        upper,
        lower_plan,
        upper_plan,
        lower_seconds,
        upper_seconds,
    })
}

/// Lower bound from conditional averages, upper bound from extreme points
/// on the support retaining `mass`.
pub fn price_bracket(spec: &PutSpec, grid: &Grid, n: usize, mass: f64) -> Result<Vec<BracketRow>> {
    let config = BracketConfig {
        grid: grid.clone(),
        n,
        mass,
        lower_sampling: LowerSampling::LocalAverage,
        options: StepOptions::default(),
    };
    bracket_run(spec, &config).map(|run| run.rows)
}

/// Rows `z0,lower,upper,gap`.
pub fn write_bracket_csv(rows: &[BracketRow], out: &mut dyn io::Write) -> io::Result<()> {
    writeln!(out, "z0,lower,upper,gap")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_full(r.spot),
            fmt_full(r.lower),
            fmt_full(r.upper),
            fmt_full(r.gap)
        )?;
    }
    Ok(())
}

/// Largest grid price at which exercising is optimal, for `t = 0..=T`.
/// At expiry the boundary is the strike.
pub fn exercise_boundary<R>(
    spec: &PutSpec,
    table: &ValueTable<R>,
    plan: &SamplingPlan,
) -> Result<Vec<Option<f64>>>
where
    R: crate::pwl::ConvexRepr,
{
    let model = build_put_mdp(spec)?;
    let policy = extract_policy(table, &model, plan)?;
    let mut out: Vec<Option<f64>> = (0..policy.horizon())
        .map(|t| policy.boundary(t, UNEXERCISED, EXERCISE))
        .collect();
    out.push(Some(spec.strike));
    Ok(out)
}

/// Rows `t,boundary_z`; an empty field means exercise is never optimal on
/// the grid.
pub fn write_boundary_csv(boundary: &[Option<f64>], out: &mut dyn io::Write) -> io::Result<()> {
    writeln!(out, "t,boundary_z")?;
    for (t, b) in boundary.iter().enumerate() {
        match b {
            Some(z) => writeln!(out, "{t},{}", fmt_full(*z))?,
            None => writeln!(out, "{t},")?,
        }
    }
    Ok(())
}

/// Bermudan put value per spot from a binomial tree in which the up and
/// down factors carry the risk-free drift, so the branch probability stays
/// in `(0, 1)` for any volatility. The tree has a multiple of `T` steps and
/// at least [`ORACLE_MIN_STEPS`]; exercise is allowed on the layers that
/// fall on exercise dates.
pub fn binomial_oracle(spec: &PutSpec) -> Result<Vec<f64>> {
    binomial_oracle_with_steps(spec, ORACLE_MIN_STEPS)
}

pub fn binomial_oracle_with_steps(spec: &PutSpec, min_steps: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    let horizon = spec.horizon();
    let stride = min_steps.div_ceil(horizon).max(1);
    let steps = stride * horizon;
    let dt = spec.expiry / steps as f64;
    let x = spec.vol * dt.sqrt();
    let drift = spec.rate * dt;
    let p_up = -(-x).exp_m1() / (2.0 * x.sinh());
    let p_down = 1.0 - p_up;
    let disc = (-drift).exp();
    let k = spec.strike;

    let price = |spot: f64| -> f64 {
        let node =
            |i: usize, j: usize| spot * (i as f64 * drift + (2.0 * j as f64 - i as f64) * x).exp();
        let mut values: Vec<f64> = (0..=steps).map(|j| (k - node(steps, j)).max(0.0)).collect();
        for i in (0..steps).rev() {
            let exercisable = i % stride == 0;
            for j in 0..=i {
                let cont = disc * (p_up * values[j + 1] + p_down * values[j]);
                values[j] = if exercisable {
                    cont.max(k - node(i, j))
                } else {
                    cont
                };
            }
        }
        values[0]
    };
    Ok(spec.spots.par_iter().map(|&s| price(s)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Disturbance sampling size.
    N,
    /// Grid points on a fixed interval.
    M,
}

#[derive(Debug, Clone)]
pub struct SweepRequest {
    pub axis: SweepAxis,
    pub values: Vec<usize>,
    pub bound: BoundKind,
    pub grid_lo: f64,
    pub grid_hi: f64,
    /// Grid size when sweeping `n`.
    pub m: usize,
    /// Sampling size when sweeping `m`.
    pub n: usize,
    pub mass: f64,
    pub spot: f64,
    /// Skip the nesting check. Monotonicity is then not guaranteed.
    pub allow_unnested: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub value: usize,
    pub estimate: f64,
}

/// Price estimate at `spot` for each value along the axis.
///
/// Unless `allow_unnested` is set, consecutive values must refine each
/// other: sampling sizes must divide their successors, and grid interval
/// counts `m - 1` likewise.
pub fn convergence_sweep(spec: &PutSpec, request: &SweepRequest) -> Result<Vec<SweepPoint>> {
    spec.validate()?;
    let values = &request.values;
    if values.is_empty() {
        return Err(Error::invalid("values", "sweep needs at least one value"));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("values", "must be strictly increasing"));
    }
    if !request.allow_unnested {
        for w in values.windows(2) {
            let nested = match request.axis {
                SweepAxis::N => w[0] > 0 && w[1] % w[0] == 0,
                SweepAxis::M => w[0] > 1 && (w[1] - 1) % (w[0] - 1) == 0,
            };
            if !nested {
                return Err(Error::NotNested(format!(
                    "{} does not refine {}",
                    w[1], w[0]
                )));
            }
        }
    }
    values
        .par_iter()
        .map(|&v| {
            let (m, n) = match request.axis {
                SweepAxis::N => (request.m, v),
                SweepAxis::M => (v, request.n),
            };
            let grid = Grid::uniform(request.grid_lo, request.grid_hi, m)?;
            let estimate = match request.bound {
                BoundKind::Lower => lower_table(spec, &grid, n, LowerSampling::LocalAverage)?
                    .0
                    .value(0, UNEXERCISED, request.spot),
                BoundKind::Upper => {
                    upper_table(spec, &grid, n, request.mass)?
                        .0
                        .value(0, UNEXERCISED, request.spot)
                }
            };
            Ok(SweepPoint { value: v, estimate })
        })
        .collect()
}

/// Rows `value,estimate`.
pub fn write_sweep_csv(points: &[SweepPoint], out: &mut dyn io::Write) -> io::Result<()> {
    writeln!(out, "value,estimate")?;
    for p in points {
        writeln!(out, "{},{}", p.value, fmt_full(p.estimate))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::DisturbanceSampling;

    #[test]
    fn rewards_and_scrap() {
        let model = build_put_mdp(&PutSpec::reference()).unwrap();
        assert_eq!(model.reward(0, UNEXERCISED, EXERCISE).value(36.0), 4.0);
        assert_eq!(model.reward(0, UNEXERCISED, HOLD).value(36.0), 0.0);
        for t in [0, 7, 49] {
            for a in [HOLD, EXERCISE] {
                assert_eq!(model.reward(t, EXERCISED, a).value(20.0), 0.0);
            }
        }
        let expected = (-0.06f64).exp() * 6.0;
        assert!((model.scrap(UNEXERCISED).value(34.0) - expected).abs() < 1e-14);
        assert_eq!(model.scrap(EXERCISED).value(34.0), 0.0);
        crate::mdp::validate_model(&model, 1.0, 100.0).unwrap();
    }

    #[test]
    fn mode_transitions_are_deterministic() {
        let model = build_put_mdp(&PutSpec::reference()).unwrap();
        assert_eq!(
            model.mode_transition(3, HOLD, UNEXERCISED, UNEXERCISED),
            1.0
        );
        assert_eq!(
            model.mode_transition(3, EXERCISE, UNEXERCISED, EXERCISED),
            1.0
        );
        assert_eq!(model.mode_transition(3, HOLD, EXERCISED, EXERCISED), 1.0);
        assert_eq!(model.mode_transition(3, HOLD, EXERCISED, UNEXERCISED), 0.0);
    }

    #[test]
    fn spec_validation() {
        let mut spec = PutSpec::reference();
        spec.vol = 0.0;
        assert!(build_put_mdp(&spec).is_err());
        let mut spec = PutSpec::reference();
        spec.exercise_dates = 1;
        assert!(spec.validate().is_err());
        let mut spec = PutSpec::reference();
        spec.strike = -1.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn one_step_deterministic_put_is_intrinsic() {
        let spec = PutSpec {
            strike: 40.0,
            rate: 0.0,
            vol: 0.2,
            expiry: 1.0,
            exercise_dates: 2,
            spots: vec![36.0],
        };
        let model = build_put_mdp(&spec).unwrap();
        let grid = Grid::uniform(30.0, 50.0, 21).unwrap();
        let plan = SamplingPlan::shared(DisturbanceSampling::deterministic(1.0).unwrap(), 1, 2);
        let lower =
            backward_induction::<Tangent, _>(&model, &grid, &plan, StepOptions::default()).unwrap();
        let upper =
            backward_induction::<Interp, _>(&model, &grid, &plan, StepOptions::default()).unwrap();
        for z in [25.0f64, 30.0, 33.3, 40.0, 47.0, 60.0] {
            let intrinsic = (40.0 - z).max(0.0);
            assert_eq!(lower.value(0, UNEXERCISED, z), intrinsic);
            assert_eq!(lower.value(0, EXERCISED, z), 0.0);
            if z >= 30.0 {
                assert!((upper.value(0, UNEXERCISED, z) - intrinsic).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn oracle_far_out_of_the_money() {
        let mut spec = PutSpec::reference();
        spec.spots = vec![200.0];
        let v = binomial_oracle_with_steps(&spec, 500).unwrap();
        assert!(v[0] < 1e-4);
    }

    #[test]
    fn sweep_rejects_unnested_ladders() {
        let request = SweepRequest {
            axis: SweepAxis::N,
            values: vec![100, 150],
            bound: BoundKind::Lower,
            grid_lo: 30.0,
            grid_hi: 60.0,
            m: 31,
            n: 100,
            mass: 0.999_999_999,
            spot: 36.0,
            allow_unnested: false,
        };
        let spec = PutSpec::reference();
        assert!(matches!(
            convergence_sweep(&spec, &request),
            Err(Error::NotNested(_))
        ));
        let mut m_request = request.clone();
        m_request.axis = SweepAxis::M;
        m_request.values = vec![31, 41];
        assert!(matches!(
            convergence_sweep(&spec, &m_request),
            Err(Error::NotNested(_))
        ));
        m_request.values = vec![41, 31];
        assert!(convergence_sweep(&spec, &m_request).is_err());
    }
}
