//! Compares the generalized L2 discrepancy of a built net against uniform
//! random point sets, over growing prefixes and over all 2D projections.
//!
//! ```text
//! cargo run --release --example discrepancy_sweep
//! ```

use std::error::Error;

use netforge::builder::{build, BuildOptions};
use netforge::quality::{projection_sweep, sweep_csv, discrepancy_sweep, SweepOptions};
use netforge::sampler::generate;
use netforge::parse_profile;

const PROFILE: &str = "\
s=4
m=6
b=3
net 0 1
net 2 3
weak 1 net t2 0 1 2 3
";

fn main() -> Result<(), Box<dyn Error>> {
    let profile = parse_profile(PROFILE)?;
    let gens = build(&profile, &BuildOptions::default())?;
    let pts = generate(&gens, 729)?;
    let points: Vec<&[f64]> = pts.points().collect();

    let sizes: Vec<usize> = (1..=6).map(|k| 3usize.pow(k)).collect();
    let opts = SweepOptions { pairs: false, baselines: 32, seed: 1 };
    let rows = discrepancy_sweep(&points, &sizes, &opts)?;
    print!("{}", sweep_csv(&rows, &opts));

    let (_, summary) = projection_sweep(&points, &[81, 729], 32, 1)?;
    println!();
    for s in summary {
        println!("N={:>3}: 2D projections min {:.5} median {:.5} max {:.5}", s.n, s.min, s.median, s.max);
    }
    Ok(())
}
