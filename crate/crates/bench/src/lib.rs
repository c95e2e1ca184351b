//! Fixtures shared by the criterion benches.

use convexdp::bermudan::PutSpec;
use convexdp::Grid;

/// The one-year reference put on a uniform `[30, 60]` grid of `m` points.
pub fn reference_case(m: usize) -> (PutSpec, Grid) {
    let grid = Grid::uniform(30.0, 60.0, m).expect("valid grid");
    (PutSpec::reference(), grid)
}
