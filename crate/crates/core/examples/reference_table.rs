//! Prints the lower/upper price bracket for the reference put.
//!
//! cargo run --release -p convexdp --example reference_table -- [m lo hi n expiry dates vol]

use convexdp::bermudan::{binomial_oracle, price_bracket, PutSpec};
use convexdp::Grid;

fn main() -> convexdp::Result<()> {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("numeric argument"))
        .collect();
    let arg = |i: usize, default: f64| args.get(i).copied().unwrap_or(default);
    let mut spec = PutSpec::reference();
    spec.expiry = arg(4, 1.0);
    spec.exercise_dates = arg(5, 51.0) as usize;
    spec.vol = arg(6, 0.2);
    let grid = Grid::uniform(arg(1, 30.0), arg(2, 60.0), arg(0, 301.0) as usize)?;
    let start = std::time::Instant::now();
    let rows = price_bracket(&spec, &grid, arg(3, 1000.0) as usize, 0.999_999_999)?;
    let elapsed = start.elapsed();
    let oracle = binomial_oracle(&spec)?;
    println!(
        "{:>5} {:>9} {:>9} {:>9} {:>9}",
        "z0", "lower", "upper", "gap", "tree"
    );
    for (r, o) in rows.iter().zip(oracle) {
        println!(
            "{:>5} {:>9.5} {:>9.5} {:>9.5} {:>9.5}",
            r.spot, r.lower, r.upper, r.gap, o
        );
    }
    println!("bracket computed in {elapsed:.2?}");
    Ok(())
}
