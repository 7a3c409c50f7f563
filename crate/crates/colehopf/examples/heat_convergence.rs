//! Heat semigroups on the crosswalk graphs converge to the gasket limit at
//! rate 1/5 per level: the distance D(m, t) between the level-m flow and a
//! reference-level flow decreases strictly, with fitted log-slope near
//! log(1/5).
//!
//! ```text
//! cargo run --release --example heat_convergence
//! ```

use colehopf::approx::heat_convergence_experiment;
use colehopf::{ConvergenceOptions, Result};

fn main() -> Result<()> {
    let opts = ConvergenceOptions::default(); // levels 1..4 vs reference 6
    println!(
        "comparing levels {:?} against reference level {} at t = {:?}\n",
        opts.levels, opts.reference_level, opts.times
    );
    let report = heat_convergence_experiment(&opts)?;
    println!("{report}");
    assert!(report.pass);
    Ok(())
}
