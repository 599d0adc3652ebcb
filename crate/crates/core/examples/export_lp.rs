//! Writes the integer program of one column in LP format, ready for an
//! external MILP solver, and solves it with the built-in solver.
//!
//! ```text
//! cargo run --example export_lp [column]
//! ```

use std::error::Error;

use netforge::builder::{column_model, GeneratorSet};
use netforge::gfsolve::{export_lp, solve, DEFAULT_BUDGET};
use netforge::parse_profile;

const PROFILE: &str = "\
s=3
m=4
b=3
net 0 1
weak 1 net t1 0 1 2
";

fn main() -> Result<(), Box<dyn Error>> {
    let column: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(2);
    let profile = parse_profile(PROFILE)?;
    // earlier columns come from a random set; only column `column` is open
    let gens = GeneratorSet::random(profile.base, profile.dimensions, profile.size, 3);
    let (system, model) = column_model(&profile, &gens.matrices, column)?;
    println!(
        "\\ column {column}: {} hard and {} weak disequations over {} unknowns",
        system.hard.len(),
        system.weak.len(),
        model.vars.len()
    );
    print!("{}", export_lp(&model));
    match solve(&model, DEFAULT_BUDGET, 0).solution() {
        Some(sol) => println!("\\ built-in solver objective {}", sol.assignment.objective),
        None => println!("\\ no assignment satisfies the hard rows"),
    }
    Ok(())
}
