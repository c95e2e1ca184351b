//! Convex piecewise-linear functions of one variable and the grid
//! projections that produce them.
//!
//! Two representations are provided:
//!
//! * [`MaxAffine`]: the maximum of a set of affine pieces, stored as its
//!   upper envelope. Produced by [`tangent_project`], which never exceeds
//!   the projected function.
//! * [`InterpConvex`]: chord interpolation through knot values, with an
//!   affine extension to the left of the first knot and a constant
//!   extension to the right of the last. Produced by [`interp_project`],
//!   which never falls below a convex non-increasing function on the knot
//!   range and beyond.

mod grid;
mod interp;
mod max_affine;

pub use grid::Grid;
pub use interp::{interp_project, InterpConvex, InterpCursor};
pub use max_affine::{tangent_project, MaxAffine, MaxAffineCursor};

use std::io;

/// `slope * z + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub slope: f64,
    pub intercept: f64,
}

impl Affine {
    pub const ZERO: Affine = Affine {
        slope: 0.0,
        intercept: 0.0,
    };

    pub fn new(slope: f64, intercept: f64) -> Self {
        Self { slope, intercept }
    }

    /// The line with the given slope passing through `(z, value)`.
    pub fn through(z: f64, value: f64, slope: f64) -> Self {
        Self {
            slope,
            intercept: value - slope * z,
        }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        self.slope * z + self.intercept
    }
}

impl std::ops::Add for Affine {
    type Output = Affine;

    fn add(self, rhs: Affine) -> Affine {
        Affine {
            slope: self.slope + rhs.slope,
            intercept: self.intercept + rhs.intercept,
        }
    }
}

/// A convex function of one real variable with one-sided derivatives.
pub trait ConvexFn {
    fn value(&self, z: f64) -> f64;

    /// Right derivative. Used as the subgradient at kinks.
    fn right_derivative(&self, z: f64) -> f64;

    fn left_derivative(&self, z: f64) -> f64 {
        self.right_derivative(z)
    }

    /// The line through `(z, value(z))` with the left derivative as slope.
    ///
    /// Coincides with the function on `(-inf, z]` whenever the function is
    /// affine there.
    fn left_tangent(&self, z: f64) -> Affine {
        Affine::through(z, self.value(z), self.left_derivative(z))
    }
}

impl<F: ConvexFn + ?Sized> ConvexFn for &F {
    fn value(&self, z: f64) -> f64 {
        (**self).value(z)
    }
    fn right_derivative(&self, z: f64) -> f64 {
        (**self).right_derivative(z)
    }
    fn left_derivative(&self, z: f64) -> f64 {
        (**self).left_derivative(z)
    }
}

impl<F: ConvexFn + ?Sized> ConvexFn for Box<F> {
    fn value(&self, z: f64) -> f64 {
        (**self).value(z)
    }
    fn right_derivative(&self, z: f64) -> f64 {
        (**self).right_derivative(z)
    }
    fn left_derivative(&self, z: f64) -> f64 {
        (**self).left_derivative(z)
    }
}

impl ConvexFn for Affine {
    fn value(&self, z: f64) -> f64 {
        self.eval(z)
    }
    fn right_derivative(&self, _z: f64) -> f64 {
        self.slope
    }
}

/// Adapts a pair of closures (value, right derivative) into a [`ConvexFn`].
///
/// Convexity is the caller's promise.
pub struct FnConvex<V, D> {
    value: V,
    derivative: D,
}

impl<V, D> FnConvex<V, D>
where
    V: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    pub fn new(value: V, derivative: D) -> Self {
        Self { value, derivative }
    }
}

impl<V, D> ConvexFn for FnConvex<V, D>
where
    V: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    fn value(&self, z: f64) -> f64 {
        (self.value)(z)
    }
    fn right_derivative(&self, z: f64) -> f64 {
        (self.derivative)(z)
    }
}

/// Evaluates a representation at a stream of points, reusing the segment
/// found for the previous point. Streams that move monotonically cost
/// amortized O(1) per point.
pub trait Cursor {
    /// Value and right derivative at `z`.
    fn eval(&mut self, z: f64) -> (f64, f64);
}

/// Operations shared by both representations.
pub trait ConvexRepr: ConvexFn + Clone + Send + Sync + std::fmt::Debug {
    type Cursor<'a>: Cursor
    where
        Self: 'a;

    fn cursor(&self) -> Self::Cursor<'_>;

    /// The constant-zero function on `grid`.
    fn zero(grid: &Grid) -> Self;

    fn add(&self, other: &Self) -> crate::Result<Self>;

    fn pointwise_max(fs: &[Self]) -> crate::Result<Self>;

    /// Slope of the leftmost affine piece, the smallest slope the function
    /// attains.
    fn tail_slope(&self) -> f64;

    /// Index of the first place where convexity fails, if any.
    fn convexity_violation(&self) -> Option<usize>;

    fn write_csv(&self, out: &mut dyn io::Write) -> io::Result<()>;
}

/// Number of entries of `breaks` that are `<= z`, searched outward from the
/// previous answer `hint`.
#[inline]
pub(crate) fn gallop(breaks: &[f64], z: f64, hint: usize) -> usize {
    let len = breaks.len();
    let hint = hint.min(len);
    if hint < len && breaks[hint] <= z {
        // everything before `lo` is <= z
        let mut lo = hint + 1;
        let mut step = 1;
        let hi = loop {
            let probe = lo + step - 1;
            if probe >= len {
                break len;
            }
            if breaks[probe] > z {
                break probe;
            }
            lo = probe + 1;
            step *= 2;
        };
        lo + breaks[lo..hi].partition_point(|&b| b <= z)
    } else if hint > 0 && breaks[hint - 1] > z {
        // breaks[hi] > z
        let mut hi = hint - 1;
        let mut step = 1;
        let lo = loop {
            let probe = hi.saturating_sub(step);
            if probe == 0 || breaks[probe] <= z {
                break probe;
            }
            hi = probe;
            step *= 2;
        };
        lo + breaks[lo..hi].partition_point(|&b| b <= z)
    } else {
        hint
    }
}

/// Formats a float with 17 significant digits.
pub(crate) fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}
