//! Weak convergence of Cole-Hopf Burgers flows across crosswalk levels: the
//! energy pairings P(m, t, phi) against fixed test potentials decrease
//! strictly in m, and the positivity floor e^{-1/2} of the heat solutions is
//! respected at every level.
//!
//! ```text
//! cargo run --release --example burgers_convergence
//! ```

use colehopf::approx::burgers_convergence_experiment;
use colehopf::{ConvergenceOptions, Result};

fn main() -> Result<()> {
    let opts = ConvergenceOptions::default(); // levels 1..4 vs reference 6
    println!(
        "comparing levels {:?} against reference level {} at t = {:?}\n",
        opts.levels, opts.reference_level, opts.times
    );
    let report = burgers_convergence_experiment(&opts)?;
    println!("{report}");
    assert!(report.pass);
    Ok(())
}
