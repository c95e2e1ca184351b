use std::io;

use super::{fmt_full, gallop, Affine, ConvexFn, ConvexRepr, Cursor, Grid};
use crate::{Error, Result};

/// Absolute slack used when checking chord slopes for convexity.
const SLOPE_TOL: f64 = 1e-9;

/// Chord interpolation through knot values.
///
/// * `z <= g(1)`: the affine left extension,
/// * `g(i) < z <= g(i+1)`: the chord between neighbouring knots,
/// * `z > g(m)`: the constant `h(g(m))`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpConvex {
    knots: Grid,
    values: Vec<f64>,
    left: Affine,
}

impl InterpConvex {
    pub fn new(knots: Grid, values: Vec<f64>, left: Affine) -> Result<Self> {
        if values.len() != knots.len() {
            return Err(Error::invalid(
                "values",
                format!("{} values for {} knots", values.len(), knots.len()),
            ));
        }
        for (&z, &v) in knots.points().iter().zip(&values) {
            if !v.is_finite() {
                return Err(Error::NonFinite { z, value: v });
            }
        }
        if !(left.slope.is_finite() && left.intercept.is_finite()) {
            return Err(Error::NonFinite {
                z: knots.first(),
                value: left.eval(knots.first()),
            });
        }
        let at_first = left.eval(knots.first());
        if (at_first - values[0]).abs() > 1e-9 * (1.0 + values[0].abs()) {
            return Err(Error::LeftExtensionMismatch {
                extension: at_first,
                value: values[0],
            });
        }
        Ok(Self {
            knots,
            values,
            left,
        })
    }

    pub fn knots(&self) -> &Grid {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left_extension(&self) -> Affine {
        self.left
    }

    /// `d(i)` for each pair of neighbouring knots.
    pub fn chord_slopes(&self) -> Vec<f64> {
        (0..self.values.len() - 1)
            .map(|i| self.chord_slope(i))
            .collect()
    }

    #[inline]
    fn chord_slope(&self, i: usize) -> f64 {
        let g = self.knots.points();
        (self.values[i + 1] - self.values[i]) / (g[i + 1] - g[i])
    }

    /// Segment 0 is the left extension, segment `m` the constant tail, and
    /// segment `i` in between is the chord from knot `i - 1` to knot `i`.
    /// Knots belong to the segment on their right, matching the right
    /// derivative convention.
    #[inline]
    fn segment_eval(&self, seg: usize, z: f64) -> (f64, f64) {
        let m = self.values.len();
        if seg == 0 {
            (self.left.eval(z), self.left.slope)
        } else if seg >= m {
            (self.values[m - 1], 0.0)
        } else {
            let i = seg - 1;
            let d = self.chord_slope(i);
            (d * (z - self.knots.points()[i]) + self.values[i], d)
        }
    }

    /// Whether the operand that is largest at the first knot has a flatter
    /// left extension than some other operand, i.e. the maximum is not
    /// affine to the left of the first knot and [`ConvexRepr::pointwise_max`]
    /// had to overestimate it there.
    pub fn left_extension_conflict(fs: &[Self]) -> bool {
        let Some(first) = fs.first() else {
            return false;
        };
        let mut winner = first;
        for f in &fs[1..] {
            if f.values[0] > winner.values[0] {
                winner = f;
            }
        }
        fs.iter()
            .any(|f| f.left.slope < winner.left.slope - SLOPE_TOL * (1.0 + winner.left.slope.abs()))
    }
}

impl ConvexFn for InterpConvex {
    fn value(&self, z: f64) -> f64 {
        let seg = self.knots.points().partition_point(|&g| g <= z);
        self.segment_eval(seg, z).0
    }

    fn right_derivative(&self, z: f64) -> f64 {
        let seg = self.knots.points().partition_point(|&g| g <= z);
        self.segment_eval(seg, z).1
    }

    fn left_derivative(&self, z: f64) -> f64 {
        let seg = self.knots.points().partition_point(|&g| g < z);
        self.segment_eval(seg, z).1
    }
}

pub struct InterpCursor<'a> {
    f: &'a InterpConvex,
    pos: usize,
}

impl Cursor for InterpCursor<'_> {
    #[inline]
    fn eval(&mut self, z: f64) -> (f64, f64) {
        self.pos = gallop(self.f.knots.points(), z, self.pos);
        self.f.segment_eval(self.pos, z)
    }
}

impl ConvexRepr for InterpConvex {
    type Cursor<'a> = InterpCursor<'a>;

    fn cursor(&self) -> InterpCursor<'_> {
        InterpCursor { f: self, pos: 0 }
    }

    fn zero(grid: &Grid) -> Self {
        Self {
            knots: grid.clone(),
            values: vec![0.0; grid.len()],
            left: Affine::ZERO,
        }
    }

    fn add(&self, other: &Self) -> Result<Self> {
        if !self.knots.same_knots(&other.knots) {
            return Err(Error::KnotMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            knots: self.knots.clone(),
            values,
            left: self.left + other.left,
        })
    }

    /// Knotwise maximum re-interpolated on the shared knots.
    ///
    /// The left extension passes through the maximum at the first knot with
    /// the smallest operand left slope. It coincides with the largest
    /// operand's extension when that one is also the steepest, and lies
    /// above every operand's extension otherwise.
    fn pointwise_max(fs: &[Self]) -> Result<Self> {
        let (first, rest) = fs.split_first().ok_or(Error::Empty)?;
        if rest.iter().any(|f| !f.knots.same_knots(&first.knots)) {
            return Err(Error::KnotMismatch);
        }
        let mut values = first.values.clone();
        let mut slope = first.left.slope;
        let mut winner_left = first.left;
        for f in rest {
            if f.values[0] > values[0] {
                winner_left = f.left;
            }
            slope = slope.min(f.left.slope);
            for (v, &w) in values.iter_mut().zip(&f.values) {
                if w > *v {
                    *v = w;
                }
            }
        }
        let left = if slope == winner_left.slope {
            winner_left
        } else {
            Affine::through(first.knots.first(), values[0], slope)
        };
        Ok(Self {
            knots: first.knots.clone(),
            values,
            left,
        })
    }

    fn tail_slope(&self) -> f64 {
        self.left.slope
    }

    /// Checks `left slope <= d(1) <= ... <= d(m-1) <= 0`. The final bound
    /// comes from the constant right extension.
    fn convexity_violation(&self) -> Option<usize> {
        let mut prev = self.left.slope;
        let m = self.values.len();
        for i in 0..m - 1 {
            let d = self.chord_slope(i);
            if d < prev - SLOPE_TOL * (1.0 + prev.abs()) {
                return Some(i);
            }
            prev = d;
        }
        if prev > SLOPE_TOL {
            return Some(m - 1);
        }
        None
    }

    /// One row per knot: `index,z,value,slope`, where `slope` is the slope
    /// of the segment ending at that knot (the left extension for knot 0).
    fn write_csv(&self, out: &mut dyn io::Write) -> io::Result<()> {
        writeln!(out, "index,z,value,slope")?;
        let g = self.knots.points();
        for (k, (&z, &v)) in g.iter().zip(&self.values).enumerate() {
            let slope = if k == 0 {
                self.left.slope
            } else {
                self.chord_slope(k - 1)
            };
            writeln!(
                out,
                "{k},{},{},{}",
                fmt_full(z),
                fmt_full(v),
                fmt_full(slope)
            )?;
        }
        Ok(())
    }
}

/// Samples `h` at the knots and interpolates, extending by `left` below the
/// first knot and by the last value above the last knot.
///
/// `left` must meet `h` at the first knot; it should be the affine function
/// `h` coincides with to the left of it.
pub fn interp_project<F: ConvexFn + ?Sized>(
    h: &F,
    grid: &Grid,
    left: Affine,
) -> Result<InterpConvex> {
    let values = grid.points().iter().map(|&z| h.value(z)).collect();
    InterpConvex::new(grid.clone(), values, left)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwl::FnConvex;

    fn put_interp() -> InterpConvex {
        let knots = Grid::new(vec![30.0, 40.0, 50.0]).unwrap();
        InterpConvex::new(knots, vec![10.0, 0.0, 0.0], Affine::new(-1.0, 40.0)).unwrap()
    }

    #[test]
    fn three_branch_evaluation() {
        let f = put_interp();
        assert_eq!(f.value(20.0), 20.0);
        assert_eq!(f.value(36.0), 4.0);
        assert_eq!(f.value(55.0), 0.0);
        assert_eq!(f.right_derivative(30.0), -1.0);
        assert_eq!(f.left_derivative(40.0), -1.0);
        assert_eq!(f.right_derivative(40.0), 0.0);
        assert_eq!(f.convexity_violation(), None);
    }

    #[test]
    fn chord_overestimates_square() {
        let h = FnConvex::new(|z: f64| z * z, |z: f64| 2.0 * z);
        let knots = Grid::new(vec![0.0, 2.0]).unwrap();
        let f = interp_project(&h, &knots, Affine::new(0.0, 0.0)).unwrap();
        assert_eq!(f.value(1.0), 2.0);
        // increasing function: the constant right tail breaks convexity
        assert_eq!(f.convexity_violation(), Some(1));
    }

    #[test]
    fn put_payoff_is_reproduced() {
        let h = FnConvex::new(
            |z: f64| (40.0 - z).max(0.0),
            |z: f64| if z < 40.0 { -1.0 } else { 0.0 },
        );
        let knots = Grid::new(vec![30.0, 40.0, 50.0]).unwrap();
        let f = interp_project(&h, &knots, Affine::new(-1.0, 40.0)).unwrap();
        assert_eq!(f, put_interp());
        for z in [0.0, 31.0, 39.5, 40.0, 45.0, 90.0] {
            assert_eq!(f.value(z), (40.0 - z).max(0.0));
        }
    }

    #[test]
    fn rejects_inconsistent_left_extension() {
        let knots = Grid::new(vec![30.0, 40.0]).unwrap();
        let err = InterpConvex::new(knots, vec![10.0, 0.0], Affine::new(-1.0, 41.0));
        assert!(matches!(err, Err(Error::LeftExtensionMismatch { .. })));
    }

    #[test]
    fn add_requires_shared_knots() {
        let a = put_interp();
        let b = InterpConvex::zero(&Grid::new(vec![30.0, 45.0, 50.0]).unwrap());
        assert_eq!(a.add(&b), Err(Error::KnotMismatch));
        let z = InterpConvex::zero(a.knots());
        assert_eq!(a.add(&z).unwrap(), a);
    }

    #[test]
    fn knotwise_max_takes_left_extension_of_winner() {
        let a = put_interp();
        let knots = a.knots().clone();
        let b = InterpConvex::new(knots, vec![9.0, 1.0, 0.5], Affine::new(-0.8, 33.0)).unwrap();
        let m = InterpConvex::pointwise_max(&[b.clone(), a.clone()]).unwrap();
        assert_eq!(m.values(), &[10.0, 1.0, 0.5]);
        assert_eq!(m.left_extension(), a.left_extension());
        assert!(!InterpConvex::left_extension_conflict(&[
            b.clone(),
            a.clone()
        ]));
        let flipped = InterpConvex::pointwise_max(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(flipped, a);
        assert_eq!(InterpConvex::pointwise_max(&[]), Err(Error::Empty));
    }

    #[test]
    fn knotwise_max_left_extension_dominates_flatter_winner() {
        let a = put_interp();
        let knots = a.knots().clone();
        // larger at the first knot but flatter to the left
        let b = InterpConvex::new(knots, vec![11.0, 1.0, 0.5], Affine::new(-0.5, 26.0)).unwrap();
        let ops = [a.clone(), b.clone()];
        let m = InterpConvex::pointwise_max(&ops).unwrap();
        assert!(InterpConvex::left_extension_conflict(&ops));
        assert_eq!(m.left_extension(), Affine::through(30.0, 11.0, -1.0));
        for z in [0.0, 10.0, 29.0] {
            assert!(m.value(z) >= a.value(z).max(b.value(z)));
        }
        assert_eq!(m.convexity_violation(), None);
    }

    #[test]
    fn cursor_agrees_with_value() {
        let f = put_interp();
        let mut cur = f.cursor();
        for k in 0..400 {
            let z = 20.0 + 0.1 * k as f64;
            assert_eq!(cur.eval(z), (f.value(z), f.right_derivative(z)));
        }
        assert_eq!(cur.eval(10.0).0, 30.0);
    }
}
