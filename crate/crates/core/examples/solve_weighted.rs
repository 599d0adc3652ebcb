//! Uses the finite-field solver directly: hard `!= 0` disequations must hold,
//! weighted ones are satisfied as far as possible.
//!
//! ```text
//! cargo run --example solve_weighted
//! ```

use netforge::gfsolve::{build_ilp, solve, SolveOutcome, DEFAULT_BUDGET};
use netforge::netcons::{DiseqStrength, Disequation, UnknownSlot};
use netforge::PrimeBase;
use num_rational::Rational64;

fn slot(row: usize) -> UnknownSlot {
    UnknownSlot { dim: 0, row, col: 1 }
}

fn main() {
    let base = PrimeBase::new(3).expect("3 is prime");
    let (x, y) = (slot(1), slot(2));
    let hard = vec![
        // x != 0
        Disequation::new(base, [(x, 1)], 0, DiseqStrength::Hard),
        // x + y != 0
        Disequation::new(base, [(x, 1), (y, 1)], 0, DiseqStrength::Hard),
    ];
    let weak = |terms: Vec<(UnknownSlot, i64)>, c: i64, w: Rational64, group| {
        (Disequation::new(base, terms, c, DiseqStrength::Weak { weight: w, group }), w)
    };
    let soft = vec![
        // y != 0 is worth 2, x - y != 0 is worth 3/2, y - 1 != 0 costs 1 when satisfied
        weak(vec![(y, 1)], 0, Rational64::from_integer(2), 0),
        weak(vec![(x, 1), (y, -1)], 0, Rational64::new(3, 2), 1),
        weak(vec![(y, 1)], -1, Rational64::from_integer(-1), 2),
    ];
    let model = build_ilp(base, &hard, &soft);
    match solve(&model, DEFAULT_BUDGET, 0) {
        SolveOutcome::Solved(sol) => {
            for (v, d) in model.vars.iter().zip(&sol.assignment.values) {
                println!("{v} = {d}");
            }
            println!("weak satisfied {:?}", sol.assignment.satisfied);
            println!("objective {} ({} nodes)", sol.assignment.objective, sol.nodes);
        }
        other => println!("{other:?}"),
    }
}
