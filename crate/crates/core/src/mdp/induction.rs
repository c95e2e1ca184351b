use std::collections::hash_map::Entry;
use std::collections::HashMap;

use super::kernel::{expectation, KernelValues};
use super::{MdpModel, SamplingPlan, Scheme, TableMeta, ValueTable};
use crate::pwl::{ConvexFn, ConvexRepr, Grid};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepOptions {
    /// Project `reward + kernel` once instead of projecting each term and
    /// adding the projections.
    pub single_projection: bool,
}

#[derive(Debug, Clone)]
pub struct StepOutput<R> {
    /// One function per mode.
    pub values: Vec<R>,
    pub left_extension_conflict: bool,
}

fn grid_data(h: &dyn ConvexFn, grid: &Grid) -> KernelValues {
    let g = grid.points();
    KernelValues {
        values: g.iter().map(|&z| h.value(z)).collect(),
        slopes: g.iter().map(|&z| h.right_derivative(z)).collect(),
        left_slope: h.left_tangent(grid.first()).slope,
    }
}

/// One application of the modified Bellman operator: per mode, project the
/// reward and the kernel separately, add them, and take the action-wise
/// maximum (earlier actions win ties).
pub fn bellman_step<S, M>(
    v_next: &[S::Repr],
    model: &M,
    plan: &SamplingPlan,
    t: usize,
    grid: &Grid,
    options: StepOptions,
) -> Result<StepOutput<S::Repr>>
where
    S: Scheme,
    M: MdpModel + ?Sized,
{
    let modes = model.modes();
    if v_next.len() != modes {
        return Err(Error::invalid(
            "v_next",
            format!("{} functions for {modes} modes", v_next.len()),
        ));
    }
    let mut cache: HashMap<(usize, usize), KernelValues> = HashMap::new();
    let mut values = Vec::with_capacity(modes);
    let mut conflict = false;

    for p in 0..modes {
        if model.is_zero_mode(p) {
            values.push(S::Repr::zero(grid));
            continue;
        }
        let mut terms = Vec::with_capacity(model.actions());
        for a in 0..model.actions() {
            let id = plan.id(t, a);
            let mut kernel = KernelValues::zeros(grid.len());
            for (q, next) in v_next.iter().enumerate() {
                let alpha = model.mode_transition(t, a, p, q);
                if alpha == 0.0 || model.is_zero_mode(q) {
                    continue;
                }
                let e = match cache.entry((id, q)) {
                    Entry::Occupied(e) => e.into_mut(),
                    Entry::Vacant(e) => {
                        e.insert(expectation(next, model, t, plan.get(t, a), grid)?)
                    }
                };
                kernel.add_scaled(alpha, e);
            }
            let reward = model.reward(t, p, a);
            let term = if options.single_projection {
                let mut total = grid_data(&*reward, grid);
                total.add_scaled(1.0, &kernel);
                S::from_grid_data(grid, &total)?
            } else {
                S::project(&*reward, grid)?.add(&S::from_grid_data(grid, &kernel)?)?
            };
            terms.push(term);
        }
        let best = S::Repr::pointwise_max(&terms)?;
        conflict |= S::max_diagnostic(&best, &terms);
        values.push(best);
    }
    Ok(StepOutput {
        values,
        left_extension_conflict: conflict,
    })
}

/// Seeds with the projected scrap at `t = T` and applies [`bellman_step`]
/// for `t = T-1, ..., 0`.
pub fn backward_induction<S, M>(
    model: &M,
    grid: &Grid,
    plan: &SamplingPlan,
    options: StepOptions,
) -> Result<ValueTable<S::Repr>>
where
    S: Scheme,
    M: MdpModel + ?Sized,
{
    let horizon = model.horizon();
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    if plan.horizon() != horizon {
        return Err(Error::invalid(
            "sampling plan",
            format!("covers {} steps, model has {horizon}", plan.horizon()),
        ));
    }
    if let Some(s) = plan.samplings().iter().find(|s| !S::accepts(s.kind())) {
        return Err(Error::SchemeMismatch {
            scheme: S::NAME,
            bound: match s.kind() {
                crate::SamplingKind::ExtremePoint => "lower",
                _ => "upper",
            },
        });
    }

    let mut terminal = Vec::with_capacity(model.modes());
    for p in 0..model.modes() {
        let f = if model.is_zero_mode(p) {
            S::Repr::zero(grid)
        } else {
            S::project(&*model.scrap(p), grid).map_err(|e| e.at_step(horizon))?
        };
        terminal.push(f);
    }

    let mut entries: Vec<Vec<S::Repr>> = vec![Vec::new(); horizon + 1];
    entries[horizon] = terminal;
    let mut conflicts = Vec::new();
    for t in (0..horizon).rev() {
        let out = bellman_step::<S, M>(&entries[t + 1], model, plan, t, grid, options)
            .map_err(|e| e.at_step(t))?;
        if out.left_extension_conflict {
            conflicts.push(t);
        }
        entries[t] = out.values;
    }
    conflicts.reverse();

    let first = &plan.samplings()[0];
    let meta = TableMeta {
        scheme: S::NAME,
        grid_points: grid.len(),
        sampling: first.kind().as_str().to_string(),
        sampling_size: first.len(),
        single_projection: options.single_projection,
        left_extension_conflicts: conflicts,
    };
    Ok(ValueTable::new(grid.clone(), S::BOUND, entries, meta))
}
