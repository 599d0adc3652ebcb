//! Builds generator matrices for a profile and prints them with per-column statistics.
//!
//! ```text
//! cargo run --release --example build_from_profile [profile.txt] [seed]
//! ```
//!
//! Without arguments a small built-in profile is used.

use std::error::Error;

use netforge::builder::{build, BuildOptions};
use netforge::parse_profile;

const DEFAULT_PROFILE: &str = "\
# two hard pairs, one weak request on all four dimensions
s=4
m=6
b=3
net 0 1
net 2 3
weak 1 net t1 0 1 2 3
";

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let text = match args.next() {
        Some(path) => std::fs::read_to_string(path)?,
        None => DEFAULT_PROFILE.to_string(),
    };
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let profile = parse_profile(&text)?;
    let opts = BuildOptions { seed, ..BuildOptions::default() };
    let gens = build(&profile, &opts)?;
    let prov = gens.provenance.as_ref().expect("built sets carry provenance");

    println!("profile sha256 {}", prov.profile_hash);
    println!("seed {} after {} attempt(s)", prov.seed, prov.attempts);
    for col in &prov.columns {
        println!(
            "column {:>2}: {} hard rows, weak {}/{}, objective {}{}",
            col.column,
            col.hard_rows,
            col.weak_satisfied,
            col.weak_total,
            col.objective,
            if col.suboptimal { " (budget exhausted)" } else { "" }
        );
    }
    println!();
    print!("{gens}");
    Ok(())
}
