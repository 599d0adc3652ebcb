//! Turns generator matrices into points: the identity gives the van der Corput
//! sequence, and a random set shows the digit expansion of each point.
//!
//! ```text
//! cargo run --example sample_points
//! ```

use std::error::Error;

use netforge::builder::GeneratorSet;
use netforge::sampler::{format_digits, format_points, generate};
use netforge::PrimeBase;

fn main() -> Result<(), Box<dyn Error>> {
    let b2 = PrimeBase::new(2)?;
    let vdc = generate(&GeneratorSet::identity(b2, 1, 3), 8)?;
    println!("van der Corput, base 2:");
    print!("{}", format_points(&vdc));

    let b3 = PrimeBase::new(3)?;
    let gens = GeneratorSet::random(b3, 2, 3, 7);
    let pts = generate(&gens, 9)?;
    println!("\nrandom matrices, base 3, first 9 points:");
    print!("{}", format_points(&pts));
    println!("\nsame points as digits (most significant first):");
    print!("{}", format_digits(&pts));

    // the leading b^k points of a progressive net are themselves a net
    let head = pts.prefix(3);
    println!("\nprefix of 3 points: {:?}", head.points().collect::<Vec<_>>());
    Ok(())
}
