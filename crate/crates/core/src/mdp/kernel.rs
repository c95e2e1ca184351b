use rayon::prelude::*;

use super::MdpModel;
use crate::pwl::{ConvexRepr, Cursor, Grid};
use crate::sampling::DisturbanceSampling;
use crate::{Error, Result};

const CHUNK: usize = 16;

/// A function known through its values and right derivatives at the grid
/// points, plus a left tail slope: the line through the first value with
/// this slope lies on or above the function to the left of the first grid
/// point.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelValues {
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
    pub left_slope: f64,
}

impl KernelValues {
    pub fn zeros(m: usize) -> Self {
        Self {
            values: vec![0.0; m],
            slopes: vec![0.0; m],
            left_slope: 0.0,
        }
    }

    /// `self += scale * other`.
    pub(crate) fn add_scaled(&mut self, scale: f64, other: &KernelValues) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
        for (a, b) in self.slopes.iter_mut().zip(&other.slopes) {
            *a += scale * b;
        }
        self.left_slope += scale * other.left_slope;
    }
}

/// `z -> sum_k rho(k) v(f_t(W(k), z))` at every grid point.
///
/// Grid points are processed in parallel; each point sums its samples in a
/// fixed order, so results do not depend on the thread count.
pub(crate) fn expectation<M, R>(
    v: &R,
    model: &M,
    t: usize,
    sampling: &DisturbanceSampling,
    grid: &Grid,
) -> Result<KernelValues>
where
    M: MdpModel + ?Sized,
    R: ConvexRepr,
{
    let points = sampling.points();
    let weights = sampling.weights();
    let per_point: Vec<(f64, f64)> = grid
        .points()
        .par_chunks(CHUNK)
        .flat_map_iter(|chunk| {
            let mut cur = v.cursor();
            chunk
                .iter()
                .map(|&z| {
                    let mut value = 0.0;
                    let mut slope = 0.0;
                    for (&w, &rho) in points.iter().zip(weights) {
                        let (fv, fs) = cur.eval(model.transition(t, w, z));
                        value += rho * fv;
                        slope += rho * fs * model.transition_slope(t, w, z);
                    }
                    (value, slope)
                })
                .collect::<Vec<_>>()
        })
        .collect();

    // v has slope >= its tail slope everywhere, so the composed tail slope
    // bounds every slope of the expectation from below.
    let first = grid.first();
    let tail = v.tail_slope();
    let left_slope: f64 = points
        .iter()
        .zip(weights)
        .map(|(&w, &rho)| rho * tail * model.transition_slope(t, w, first))
        .sum();

    let (values, slopes): (Vec<f64>, Vec<f64>) = per_point.into_iter().unzip();
    for (i, (&value, &slope)) in values.iter().zip(&slopes).enumerate() {
        if !(value.is_finite() && slope.is_finite()) {
            return Err(Error::NonFinite {
                z: grid.points()[i],
                value,
            });
        }
    }
    if !left_slope.is_finite() {
        return Err(Error::NonFinite {
            z: first,
            value: left_slope,
        });
    }
    Ok(KernelValues {
        values,
        slopes,
        left_slope,
    })
}

/// The modified transition operator applied to `v_next` (one function per
/// mode) for action `action` at step `t`. Returns one [`KernelValues`] per
/// current mode.
pub fn modified_kernel<M, R>(
    v_next: &[R],
    model: &M,
    sampling: &DisturbanceSampling,
    t: usize,
    action: usize,
    grid: &Grid,
) -> Result<Vec<KernelValues>>
where
    M: MdpModel + ?Sized,
    R: ConvexRepr,
{
    let modes = model.modes();
    if v_next.len() != modes {
        return Err(Error::invalid(
            "v_next",
            format!("{} functions for {modes} modes", v_next.len()),
        ));
    }
    let mut cache: Vec<Option<KernelValues>> = vec![None; modes];
    let mut out = Vec::with_capacity(modes);
    for p in 0..modes {
        let mut acc = KernelValues::zeros(grid.len());
        for q in 0..modes {
            let alpha = model.mode_transition(t, action, p, q);
            if alpha == 0.0 || model.is_zero_mode(q) {
                continue;
            }
            if cache[q].is_none() {
                cache[q] = Some(expectation(&v_next[q], model, t, sampling, grid)?);
            }
            acc.add_scaled(alpha, cache[q].as_ref().expect("filled above"));
        }
        out.push(acc);
    }
    Ok(out)
}
