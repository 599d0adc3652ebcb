//! Checks the net property by counting points in elementary intervals, then
//! breaks one matrix entry and shows the witness interval.
//!
//! ```text
//! cargo run --release --example verify_net
//! ```

use std::error::Error;

use netforge::builder::{build, BuildOptions, GeneratorSet};
use netforge::sampler::generate;
use netforge::verify::{minimal_t, verify_profile};
use netforge::parse_profile;

const PROFILE: &str = "\
s=3
m=5
b=3
net 0 1
weak 1 net t1 0 1 2
";

fn main() -> Result<(), Box<dyn Error>> {
    let profile = parse_profile(PROFILE)?;
    let gens = build(&profile, &BuildOptions::default())?;
    let report = verify_profile(&gens, &profile, None)?;
    print!("{}", report.to_text());

    let pts = generate(&gens, 243)?;
    for dims in [[0, 1], [0, 2], [1, 2]] {
        println!("dims {dims:?}: minimal t = {}", minimal_t(&pts, &dims, 5)?);
    }

    // zeroing the first row of the first matrix destroys the net at every prefix
    let mut broken = gens.matrices.clone();
    for col in 0..broken[0].cols() {
        broken[0].set(0, col, 0);
    }
    let broken = GeneratorSet::from_matrices(broken)?;
    let report = verify_profile(&broken, &profile, None)?;
    println!("\nafter corrupting the first row:");
    print!("{}", report.to_text());
    Ok(())
}
