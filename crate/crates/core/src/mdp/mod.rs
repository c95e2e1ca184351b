//! Modified Bellman recursion over grid-projected convex value functions.
//!
//! For a model with finitely many modes `p`, actions `a` and a scalar
//! continuous state `z`, each step computes
//!
//! ```text
//! v_t(p, .) = max_a ( S r_t(p, ., a) + S K_t^a v_{t+1}(p, .) )
//! K_t^a v(p, z) = sum_p' alpha_t(a, p, p') sum_k rho(k) v(p', f_t(W(k), z))
//! ```
//!
//! where `S` is a grid projection ([`Scheme`]) and `(W(k), rho(k))` is a
//! disturbance sampling. With the tangent scheme and conditional-average
//! samplings the result is a lower bound on the true value functions; with
//! the interpolation scheme and extreme-point samplings it is an upper
//! bound.

mod induction;
mod kernel;
mod policy;

pub use induction::{backward_induction, bellman_step, StepOptions, StepOutput};
pub use kernel::{modified_kernel, KernelValues};
pub use policy::{extract_policy, ActionInterval, PolicyTable};

use std::io;

use crate::pwl::{fmt_full, interp_project, Affine, ConvexFn, ConvexRepr, Grid};
use crate::pwl::{InterpConvex, MaxAffine};
use crate::sampling::{DisturbanceSampling, SamplingKind};
use crate::{Error, Result};

/// A finite-horizon decision process with convex rewards in `z`.
///
/// The state transition `f_t(w, z)` must be affine and nondecreasing in `z`
/// for every disturbance `w`, so that `v(p, f_t(w, .))` stays convex.
pub trait MdpModel: Sync {
    /// Number of decision steps `T`; scrap is paid at `t = T`.
    fn horizon(&self) -> usize;

    fn modes(&self) -> usize;

    fn actions(&self) -> usize;

    /// `alpha_t(a, p, p')`.
    fn mode_transition(&self, t: usize, action: usize, from: usize, to: usize) -> f64;

    fn reward(&self, t: usize, mode: usize, action: usize) -> Box<dyn ConvexFn + '_>;

    fn scrap(&self, mode: usize) -> Box<dyn ConvexFn + '_>;

    /// `f_t(w, z)`.
    fn transition(&self, t: usize, w: f64, z: f64) -> f64;

    /// `d f_t(w, z) / dz`.
    fn transition_slope(&self, t: usize, w: f64, z: f64) -> f64;

    /// Modes whose value is identically zero at every step (absorbing with
    /// zero rewards). Their values are never recomputed.
    fn is_zero_mode(&self, _mode: usize) -> bool {
        false
    }
}

/// Checks mode-transition rows and spot-checks convexity of rewards and
/// scrap by midpoint tests on `[lo, hi]`.
pub fn validate_model(model: &dyn MdpModel, lo: f64, hi: f64) -> Result<()> {
    if model.horizon() == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    for t in 0..model.horizon() {
        for a in 0..model.actions() {
            for p in 0..model.modes() {
                let mut total = 0.0;
                for q in 0..model.modes() {
                    let alpha = model.mode_transition(t, a, p, q);
                    if alpha.is_nan() || alpha < 0.0 {
                        return Err(Error::invalid(
                            "mode_transition",
                            format!("alpha({t}, {a}, {p}, {q}) = {alpha}"),
                        ));
                    }
                    total += alpha;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::invalid(
                        "mode_transition",
                        format!("row (t={t}, a={a}, p={p}) sums to {total}"),
                    ));
                }
            }
        }
    }
    let probes = 64;
    let check = |h: &dyn ConvexFn, what: String| -> Result<()> {
        for i in 0..probes {
            for j in (i + 2..=probes).step_by(3) {
                let x = lo + (hi - lo) * i as f64 / probes as f64;
                let y = lo + (hi - lo) * j as f64 / probes as f64;
                let mid = h.value(0.5 * (x + y));
                let chord = 0.5 * (h.value(x) + h.value(y));
                if mid > chord + 1e-9 * (1.0 + chord.abs()) {
                    return Err(Error::invalid(
                        "model",
                        format!("{what} is not convex between {x} and {y}"),
                    ));
                }
            }
        }
        Ok(())
    };
    for p in 0..model.modes() {
        check(&*model.scrap(p), format!("scrap(p={p})"))?;
        for t in 0..model.horizon() {
            for a in 0..model.actions() {
                check(
                    &*model.reward(t, p, a),
                    format!("reward(t={t}, p={p}, a={a})"),
                )?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Lower,
    Upper,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::Lower => "lower",
            BoundKind::Upper => "upper",
        }
    }
}

/// A grid projection together with the representation it produces.
pub trait Scheme {
    type Repr: ConvexRepr;

    const NAME: &'static str;
    const BOUND: BoundKind;

    fn project(h: &dyn ConvexFn, grid: &Grid) -> Result<Self::Repr>;

    /// Builds the projection from values, right derivatives and the left
    /// tail slope.
    fn from_grid_data(grid: &Grid, data: &KernelValues) -> Result<Self::Repr>;

    /// Whether the scheme yields its bound under `kind` samplings.
    fn accepts(kind: SamplingKind) -> bool;

    /// Diagnostic hook run after each action-wise maximum.
    fn max_diagnostic(_result: &Self::Repr, _operands: &[Self::Repr]) -> bool {
        false
    }
}

/// Maximum of tangents at grid points. Lower bounds.
#[derive(Debug, Clone, Copy)]
pub struct Tangent;

impl Scheme for Tangent {
    type Repr = MaxAffine;

    const NAME: &'static str = "tangent";
    const BOUND: BoundKind = BoundKind::Lower;

    fn project(h: &dyn ConvexFn, grid: &Grid) -> Result<MaxAffine> {
        crate::pwl::tangent_project(h, grid)
    }

    fn from_grid_data(grid: &Grid, data: &KernelValues) -> Result<MaxAffine> {
        MaxAffine::from_tangents(grid, &data.values, &data.slopes)
    }

    fn accepts(kind: SamplingKind) -> bool {
        !matches!(kind, SamplingKind::ExtremePoint)
    }
}

/// Chord interpolation with affine left and constant right tails. Upper
/// bounds for non-increasing value functions.
#[derive(Debug, Clone, Copy)]
pub struct Interp;

impl Scheme for Interp {
    type Repr = InterpConvex;

    const NAME: &'static str = "interp";
    const BOUND: BoundKind = BoundKind::Upper;

    fn project(h: &dyn ConvexFn, grid: &Grid) -> Result<InterpConvex> {
        interp_project(h, grid, h.left_tangent(grid.first()))
    }

    fn from_grid_data(grid: &Grid, data: &KernelValues) -> Result<InterpConvex> {
        let left = Affine::through(grid.first(), data.values[0], data.left_slope);
        InterpConvex::new(grid.clone(), data.values.clone(), left)
    }

    fn accepts(kind: SamplingKind) -> bool {
        matches!(
            kind,
            SamplingKind::ExtremePoint | SamplingKind::Deterministic
        )
    }

    fn max_diagnostic(_result: &InterpConvex, operands: &[InterpConvex]) -> bool {
        InterpConvex::left_extension_conflict(operands)
    }
}

/// Disturbance samplings indexed by step and action.
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    samplings: Vec<DisturbanceSampling>,
    /// `index[t][a]` into `samplings`.
    index: Vec<Vec<usize>>,
}

impl SamplingPlan {
    pub fn new(samplings: Vec<DisturbanceSampling>, index: Vec<Vec<usize>>) -> Result<Self> {
        if let Some(bad) = index.iter().flatten().find(|&&i| i >= samplings.len()) {
            return Err(Error::invalid(
                "sampling plan",
                format!("index {bad} out of range"),
            ));
        }
        Ok(Self { samplings, index })
    }

    /// One sampling reused at every step and for every action.
    pub fn shared(sampling: DisturbanceSampling, horizon: usize, actions: usize) -> Self {
        Self {
            samplings: vec![sampling],
            index: vec![vec![0; actions]; horizon],
        }
    }

    /// One sampling per step, shared by all actions.
    pub fn per_step(samplings: Vec<DisturbanceSampling>, actions: usize) -> Self {
        let index = (0..samplings.len()).map(|t| vec![t; actions]).collect();
        Self { samplings, index }
    }

    pub fn horizon(&self) -> usize {
        self.index.len()
    }

    pub fn id(&self, t: usize, action: usize) -> usize {
        self.index[t][action]
    }

    pub fn get(&self, t: usize, action: usize) -> &DisturbanceSampling {
        &self.samplings[self.id(t, action)]
    }

    pub fn samplings(&self) -> &[DisturbanceSampling] {
        &self.samplings
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableMeta {
    pub scheme: &'static str,
    pub grid_points: usize,
    pub sampling: String,
    pub sampling_size: usize,
    pub single_projection: bool,
    /// Steps at which the action-wise maximum was not affine left of the
    /// first grid point (interpolation scheme only).
    pub left_extension_conflicts: Vec<usize>,
}

/// Value functions for `t = 0..=T` and every mode, produced by backward
/// induction. Entry `T` is the projected scrap.
#[derive(Debug, Clone)]
pub struct ValueTable<R> {
    grid: Grid,
    bound: BoundKind,
    entries: Vec<Vec<R>>,
    meta: TableMeta,
}

impl<R: ConvexRepr> ValueTable<R> {
    pub(crate) fn new(grid: Grid, bound: BoundKind, entries: Vec<Vec<R>>, meta: TableMeta) -> Self {
        Self {
            grid,
            bound,
            entries,
            meta,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn bound(&self) -> BoundKind {
        self.bound
    }

    pub fn meta(&self) -> &TableMeta {
        &self.meta
    }

    pub fn horizon(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn entry(&self, t: usize, mode: usize) -> &R {
        &self.entries[t][mode]
    }

    pub fn slice(&self, t: usize) -> &[R] {
        &self.entries[t]
    }

    pub fn value(&self, t: usize, mode: usize, z: f64) -> f64 {
        self.entries[t][mode].value(z)
    }

    /// Values at every grid point.
    pub fn grid_values(&self, t: usize, mode: usize) -> Vec<f64> {
        let f = &self.entries[t][mode];
        self.grid.points().iter().map(|&z| f.value(z)).collect()
    }

    /// `(t, mode, index)` for every entry failing its convexity check.
    pub fn convexity_violations(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (t, slice) in self.entries.iter().enumerate() {
            for (p, f) in slice.iter().enumerate() {
                if let Some(i) = f.convexity_violation() {
                    out.push((t, p, i));
                }
            }
        }
        out
    }

    /// Rows `t,p,z,value` at every grid point.
    pub fn write_csv(&self, out: &mut dyn io::Write) -> io::Result<()> {
        writeln!(out, "t,p,z,value")?;
        for t in 0..self.entries.len() {
            for p in 0..self.entries[t].len() {
                for (&z, v) in self.grid.points().iter().zip(self.grid_values(t, p)) {
                    writeln!(out, "{t},{p},{},{}", fmt_full(z), fmt_full(v))?;
                }
            }
        }
        Ok(())
    }
}
