//! At most `b` generator matrices in base `b` can be pairwise (0,2)-sequences.
//! This example builds `b` of them, then asks for one more and reports where
//! the construction breaks.
//!
//! ```text
//! cargo run --release --example pairwise_limit [base]
//! ```

use std::error::Error;

use netforge::builder::{build, BuildError, BuildOptions};
use netforge::{NetConstraint, PrimeBase, Profile};

fn pairwise(base: PrimeBase, s: usize, m: usize) -> Result<Profile, Box<dyn Error>> {
    let mut constraints = Vec::new();
    for i in 0..s {
        for j in i + 1..s {
            constraints.push(NetConstraint::net(0, &[i, j]));
        }
    }
    Ok(Profile::new(s, m, base, constraints)?)
}

fn main() -> Result<(), Box<dyn Error>> {
    let b: u32 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(2);
    let base = PrimeBase::new(b)?;
    let opts = BuildOptions { restarts: 2, ..BuildOptions::default() };

    for s in [b as usize, b as usize + 1] {
        let profile = pairwise(base, s, 4)?;
        match build(&profile, &opts) {
            Ok(_) => println!("s={s}: every pair is a (0,m,2)-net"),
            Err(BuildError::Infeasible(why)) => println!("s={s}: infeasible\n  {why}"),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}
