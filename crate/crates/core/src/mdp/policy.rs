use std::io;

use super::kernel::modified_kernel;
use super::{MdpModel, SamplingPlan, ValueTable};
use crate::pwl::{fmt_full, ConvexRepr, Grid};
use crate::Result;

/// Grid points `lo..=hi` (inclusive, in state units) on which `action` is
/// chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionInterval {
    pub lo: f64,
    pub hi: f64,
    pub action: usize,
}

/// Greedy decisions per step and mode, stored as runs of grid points that
/// share an action.
#[derive(Debug, Clone)]
pub struct PolicyTable {
    grid: Grid,
    /// `actions[t][p][i]` for grid point `i`.
    actions: Vec<Vec<Vec<usize>>>,
}

impl PolicyTable {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn action(&self, t: usize, mode: usize, index: usize) -> usize {
        self.actions[t][mode][index]
    }

    pub fn intervals(&self, t: usize, mode: usize) -> Vec<ActionInterval> {
        let g = self.grid.points();
        let acts = &self.actions[t][mode];
        let mut out: Vec<ActionInterval> = Vec::new();
        for (i, &a) in acts.iter().enumerate() {
            match out.last_mut() {
                Some(last) if last.action == a => last.hi = g[i],
                _ => out.push(ActionInterval {
                    lo: g[i],
                    hi: g[i],
                    action: a,
                }),
            }
        }
        out
    }

    /// Largest grid point at which `action` is chosen.
    pub fn boundary(&self, t: usize, mode: usize, action: usize) -> Option<f64> {
        let g = self.grid.points();
        self.actions[t][mode]
            .iter()
            .rposition(|&a| a == action)
            .map(|i| g[i])
    }

    /// Rows `t,p,lo,hi,action`.
    pub fn write_csv(&self, out: &mut dyn io::Write) -> io::Result<()> {
        writeln!(out, "t,p,lo,hi,action")?;
        for t in 0..self.actions.len() {
            for p in 0..self.actions[t].len() {
                for iv in self.intervals(t, p) {
                    writeln!(
                        out,
                        "{t},{p},{},{},{}",
                        fmt_full(iv.lo),
                        fmt_full(iv.hi),
                        iv.action
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Per step, mode and grid point, the action maximizing
/// `r_t(p, z, a) + K_t^a v_{t+1}(p, z)`, with the lowest action index
/// winning ties.
pub fn extract_policy<M, R>(
    table: &ValueTable<R>,
    model: &M,
    plan: &SamplingPlan,
) -> Result<PolicyTable>
where
    M: MdpModel + ?Sized,
    R: ConvexRepr,
{
    let grid = table.grid().clone();
    let g = grid.points();
    let mut actions = Vec::with_capacity(table.horizon());
    for t in 0..table.horizon() {
        let mut q_values: Vec<Vec<Vec<f64>>> = Vec::with_capacity(model.actions());
        for a in 0..model.actions() {
            let kernels = modified_kernel(table.slice(t + 1), model, plan.get(t, a), t, a, &grid)?;
            let per_mode = kernels
                .into_iter()
                .enumerate()
                .map(|(p, k)| {
                    let reward = model.reward(t, p, a);
                    g.iter()
                        .zip(&k.values)
                        .map(|(&z, kv)| reward.value(z) + kv)
                        .collect()
                })
                .collect();
            q_values.push(per_mode);
        }
        let step = (0..model.modes())
            .map(|p| {
                (0..g.len())
                    .map(|i| {
                        // strict comparison: the lowest action wins ties
                        (1..model.actions()).fold(0, |best, a| {
                            if q_values[a][p][i] > q_values[best][p][i] {
                                a
                            } else {
                                best
                            }
                        })
                    })
                    .collect()
            })
            .collect();
        actions.push(step);
    }
    Ok(PolicyTable { grid, actions })
}
