use std::io;

use super::{fmt_full, gallop, Affine, ConvexFn, ConvexRepr, Cursor, Grid};
use crate::{Error, Result};

/// Maximum of affine pieces, kept as its upper envelope.
///
/// `pieces` have strictly increasing slopes and every piece attains the
/// maximum on a non-degenerate interval. `breaks[j]` is where piece `j + 1`
/// takes over from piece `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxAffine {
    pieces: Vec<Affine>,
    breaks: Vec<f64>,
}

impl MaxAffine {
    /// Builds the envelope of `pieces`, discarding dominated ones.
    pub fn new(pieces: Vec<Affine>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(p) = pieces
            .iter()
            .find(|p| !(p.slope.is_finite() && p.intercept.is_finite()))
        {
            return Err(Error::NonFinite {
                z: p.slope,
                value: p.intercept,
            });
        }
        Ok(Self::envelope(pieces))
    }

    pub fn constant(c: f64) -> Self {
        Self {
            pieces: vec![Affine::new(0.0, c)],
            breaks: Vec::new(),
        }
    }

    /// Tangent lines from function values and right derivatives at grid points.
    pub fn from_tangents(grid: &Grid, values: &[f64], slopes: &[f64]) -> Result<Self> {
        debug_assert_eq!(values.len(), grid.len());
        debug_assert_eq!(slopes.len(), grid.len());
        let mut pieces = Vec::with_capacity(grid.len());
        for ((&z, &v), &s) in grid.points().iter().zip(values).zip(slopes) {
            if !(v.is_finite() && s.is_finite()) {
                return Err(Error::NonFinite {
                    z,
                    value: if v.is_finite() { s } else { v },
                });
            }
            pieces.push(Affine::through(z, v, s));
        }
        Ok(Self::envelope(pieces))
    }

    pub fn pieces(&self) -> &[Affine] {
        &self.pieces
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Upper envelope sweep: sort by slope (stable, so earlier pieces win
    /// exact ties), keep the highest intercept per slope, then drop every
    /// piece that never strictly exceeds its neighbours.
    fn envelope(mut pieces: Vec<Affine>) -> Self {
        pieces.sort_by(|a, b| a.slope.total_cmp(&b.slope));
        let mut hull: Vec<Affine> = Vec::with_capacity(pieces.len());
        for p in pieces {
            if let Some(last) = hull.last() {
                if last.slope == p.slope {
                    if p.intercept > last.intercept {
                        hull.pop();
                    } else {
                        continue;
                    }
                }
            }
            while hull.len() >= 2 {
                let l1 = hull[hull.len() - 2];
                let l2 = hull[hull.len() - 1];
                // l2 is useless when l3 overtakes l1 no later than l2 does.
                let lhs = (l1.intercept - p.intercept) * (l2.slope - l1.slope);
                let rhs = (l1.intercept - l2.intercept) * (p.slope - l1.slope);
                if lhs <= rhs {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        let mut breaks: Vec<f64> = hull
            .windows(2)
            .map(|w| (w[0].intercept - w[1].intercept) / (w[1].slope - w[0].slope))
            .collect();
        for j in 1..breaks.len() {
            if breaks[j] < breaks[j - 1] {
                breaks[j] = breaks[j - 1];
            }
        }
        Self {
            pieces: hull,
            breaks,
        }
    }

    #[inline]
    fn piece_index(&self, z: f64) -> usize {
        self.breaks.partition_point(|&b| b <= z)
    }
}

impl ConvexFn for MaxAffine {
    fn value(&self, z: f64) -> f64 {
        self.pieces[self.piece_index(z)].eval(z)
    }

    fn right_derivative(&self, z: f64) -> f64 {
        self.pieces[self.piece_index(z)].slope
    }

    fn left_derivative(&self, z: f64) -> f64 {
        self.pieces[self.breaks.partition_point(|&b| b < z)].slope
    }
}

pub struct MaxAffineCursor<'a> {
    f: &'a MaxAffine,
    pos: usize,
}

impl Cursor for MaxAffineCursor<'_> {
    #[inline]
    fn eval(&mut self, z: f64) -> (f64, f64) {
        self.pos = gallop(&self.f.breaks, z, self.pos);
        let p = self.f.pieces[self.pos];
        (p.eval(z), p.slope)
    }
}

impl ConvexRepr for MaxAffine {
    type Cursor<'a> = MaxAffineCursor<'a>;

    fn cursor(&self) -> MaxAffineCursor<'_> {
        MaxAffineCursor { f: self, pos: 0 }
    }

    fn zero(_grid: &Grid) -> Self {
        Self::constant(0.0)
    }

    /// Pointwise sum, formed by merging the two breakpoint sequences.
    fn add(&self, other: &Self) -> Result<Self> {
        let (a, b) = (self, other);
        let mut pieces = Vec::with_capacity(a.pieces.len() + b.pieces.len());
        let (mut i, mut j) = (0, 0);
        pieces.push(a.pieces[0] + b.pieces[0]);
        while i < a.breaks.len() || j < b.breaks.len() {
            let next_a = a.breaks.get(i).copied().unwrap_or(f64::INFINITY);
            let next_b = b.breaks.get(j).copied().unwrap_or(f64::INFINITY);
            if next_a <= next_b {
                i += 1;
            }
            if next_b <= next_a {
                j += 1;
            }
            pieces.push(a.pieces[i] + b.pieces[j]);
        }
        Ok(Self::envelope(pieces))
    }

    fn pointwise_max(fs: &[Self]) -> Result<Self> {
        match fs {
            [] => Err(Error::Empty),
            [f] => Ok(f.clone()),
            _ => Ok(Self::envelope(
                fs.iter().flat_map(|f| f.pieces.iter().copied()).collect(),
            )),
        }
    }

    fn tail_slope(&self) -> f64 {
        self.pieces[0].slope
    }

    fn convexity_violation(&self) -> Option<usize> {
        None
    }

    /// One row per envelope piece: `index,slope,intercept`.
    fn write_csv(&self, out: &mut dyn io::Write) -> io::Result<()> {
        writeln!(out, "index,slope,intercept")?;
        for (k, p) in self.pieces.iter().enumerate() {
            writeln!(out, "{k},{},{}", fmt_full(p.slope), fmt_full(p.intercept))?;
        }
        Ok(())
    }
}

/// Maximum of the tangents of `h` taken at every grid point, with the right
/// derivative as the subgradient at kinks.
///
/// Never exceeds `h` and touches it at every grid point.
pub fn tangent_project<F: ConvexFn + ?Sized>(h: &F, grid: &Grid) -> Result<MaxAffine> {
    let values: Vec<f64> = grid.points().iter().map(|&z| h.value(z)).collect();
    let slopes: Vec<f64> = grid
        .points()
        .iter()
        .map(|&z| h.right_derivative(z))
        .collect();
    MaxAffine::from_tangents(grid, &values, &slopes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwl::FnConvex;
    use proptest::prelude::*;

    fn put_payoff(strike: f64) -> impl ConvexFn {
        FnConvex::new(
            move |z: f64| (strike - z).max(0.0),
            move |z: f64| if z < strike { -1.0 } else { 0.0 },
        )
    }

    fn square() -> impl ConvexFn {
        FnConvex::new(|z: f64| z * z, |z: f64| 2.0 * z)
    }

    #[test]
    fn tangents_of_put_payoff_prune_to_two_pieces() {
        let grid = Grid::new(vec![30.0, 40.0, 50.0]).unwrap();
        let f = tangent_project(&put_payoff(40.0), &grid).unwrap();
        assert_eq!(
            f.pieces(),
            &[Affine::new(-1.0, 40.0), Affine::new(0.0, 0.0)]
        );
        for z in [0.0, 25.0, 36.0, 40.0, 44.5, 100.0] {
            assert_eq!(f.value(z), (40.0 - z).max(0.0));
        }
    }

    #[test]
    fn tangents_of_square_underestimate() {
        let grid = Grid::new(vec![-1.0, 0.0, 1.0]).unwrap();
        let f = tangent_project(&square(), &grid).unwrap();
        assert_eq!(f.pieces().len(), 3);
        assert_eq!(f.value(0.5), 0.0);
        assert_eq!(f.value(-2.0), 3.0);
        assert_eq!(f.value(1.0), 1.0);
    }

    #[test]
    fn eval_and_derivatives() {
        let f = MaxAffine::new(vec![Affine::new(-1.0, 40.0), Affine::new(0.0, 0.0)]).unwrap();
        assert_eq!(f.value(36.0), 4.0);
        assert_eq!(f.right_derivative(40.0), 0.0);
        assert_eq!(f.left_derivative(40.0), -1.0);
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert_eq!(MaxAffine::new(vec![]), Err(Error::Empty));
        assert!(MaxAffine::new(vec![Affine::new(f64::NAN, 0.0)]).is_err());
        assert_eq!(MaxAffine::pointwise_max(&[]), Err(Error::Empty));
        let h = FnConvex::new(|_z: f64| f64::INFINITY, |_z: f64| 0.0);
        let grid = Grid::new(vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            tangent_project(&h, &grid),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn add_through_grid_reprojection() {
        let a = MaxAffine::new(vec![Affine::new(1.0, 0.0)]).unwrap();
        let b = MaxAffine::new(vec![Affine::new(-1.0, 0.0)]).unwrap();
        let grid = Grid::new(vec![-5.0, 0.0, 5.0]).unwrap();
        let sum = tangent_project(&a, &grid)
            .unwrap()
            .add(&tangent_project(&b, &grid).unwrap())
            .unwrap();
        assert_eq!(sum.value(3.0), 0.0);
        let zero = MaxAffine::zero(&grid);
        assert_eq!(a.add(&zero).unwrap(), a);
    }

    #[test]
    fn max_is_idempotent() {
        let f = MaxAffine::new(vec![
            Affine::new(-2.0, 1.0),
            Affine::new(0.5, -1.0),
            Affine::new(3.0, -8.0),
        ])
        .unwrap();
        assert_eq!(
            MaxAffine::pointwise_max(&[f.clone(), f.clone()]).unwrap(),
            f
        );
    }

    #[test]
    fn cursor_agrees_with_value() {
        let grid = Grid::uniform(-3.0, 3.0, 13).unwrap();
        let f = tangent_project(&square(), &grid).unwrap();
        let mut cur = f.cursor();
        for k in 0..200 {
            let z = -5.0 + 0.05 * k as f64;
            let (v, s) = cur.eval(z);
            assert_eq!(v, f.value(z));
            assert_eq!(s, f.right_derivative(z));
        }
        for z in [4.0, -4.0, 0.1, 2.2, -1.7] {
            assert_eq!(cur.eval(z).0, f.value(z));
        }
    }

    fn arb_max_affine(k: usize) -> impl Strategy<Value = MaxAffine> {
        prop::collection::vec((-5.0f64..5.0, -10.0f64..10.0), 1..=k).prop_map(|v| {
            MaxAffine::new(v.into_iter().map(|(s, c)| Affine::new(s, c)).collect()).unwrap()
        })
    }

    fn brute(pieces: &[Affine], z: f64) -> f64 {
        pieces
            .iter()
            .map(|p| p.eval(z))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    proptest! {
        #[test]
        fn envelope_matches_brute_force(
            raw in prop::collection::vec((-5.0f64..5.0, -10.0f64..10.0), 1..12),
            z in -20.0f64..20.0,
        ) {
            let pieces: Vec<Affine> = raw.iter().map(|&(s, c)| Affine::new(s, c)).collect();
            let f = MaxAffine::new(pieces.clone()).unwrap();
            let expected = brute(&pieces, z);
            prop_assert!((f.value(z) - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
            prop_assert!(f.pieces().windows(2).all(|w| w[0].slope < w[1].slope));
        }

        #[test]
        fn sum_matches_dense_oracle(a in arb_max_affine(5), b in arb_max_affine(5)) {
            let s = a.add(&b).unwrap();
            for k in 0..1000 {
                let z = -25.0 + 0.05 * k as f64;
                let expected = brute(a.pieces(), z) + brute(b.pieces(), z);
                prop_assert!((s.value(z) - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
            }
        }

        #[test]
        fn max_matches_dense_oracle(
            a in arb_max_affine(5), b in arb_max_affine(5), c in arb_max_affine(5),
        ) {
            let m = MaxAffine::pointwise_max(&[a.clone(), b.clone(), c.clone()]).unwrap();
            for k in 0..1000 {
                let z = -25.0 + 0.05 * k as f64;
                let expected = a.value(z).max(b.value(z)).max(c.value(z));
                prop_assert!((m.value(z) - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
            }
        }
    }
}
