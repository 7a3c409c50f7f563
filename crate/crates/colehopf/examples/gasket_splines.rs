//! Sierpinski gasket toolbox: level counts, harmonic extension and the
//! energy invariance that pins the resistance factor 3/5, spline integrals,
//! self-similar measures, and the spectral decimation identity.
//!
//! ```text
//! cargo run --release --example gasket_splines
//! ```

use colehopf::gasket::{decimation_match, decimation_polynomial};
use colehopf::{Result, SelfSimilarMeasure, SierpinskiGasket};

fn main() -> Result<()> {
    let gasket = SierpinskiGasket::build(7);

    println!("level counts:");
    for m in 0..=4 {
        println!(
            "  m = {m}: {:>4} vertices, {:>4} edges, {:>3} cells",
            gasket.n_vertices(m),
            gasket.level(m).edges().len(),
            gasket.level(m).n_cells()
        );
    }

    // Energy of the corner indicator is 4 at every level of harmonic
    // extension — the invariance forcing r = 3/5.
    println!("\nenergy of the extended corner indicator (doubled convention):");
    let f0 = [1.0, 0.0, 0.0];
    for target in 0..=5 {
        let ft = gasket.harmonic_extend(0, target, &f0)?;
        println!("  E_{target} = {:.12}", gasket.graph_energy(target, &ft, &ft)?);
    }

    // Spline integrals under the uniform and a skewed measure.
    let uniform = SelfSimilarMeasure::uniform();
    let skewed = SelfSimilarMeasure::new([0.5, 0.3, 0.2])?;
    println!("\nlevel-0 spline integrals:");
    let iu = uniform.spline_integrals(&gasket, 0, 7)?;
    let is = skewed.spline_integrals(&gasket, 0, 7)?;
    for p in 0..3 {
        println!("  corner {p}: uniform {:.10}, skewed(0.5,0.3,0.2) {:.10}", iu[p], is[p]);
    }
    println!(
        "  sums: {:.12} and {:.12} (partition of unity)",
        iu.iter().sum::<f64>(),
        is.iter().sum::<f64>()
    );

    // L^2 pairing of two corner splines (cell-mean quadrature at depth 7).
    let overlap = uniform.l2_inner(&gasket, 0, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 7)?;
    println!("\n<psi_0, psi_1> under the uniform measure: {overlap:.10} (-> 4/45)");

    // Spectral decimation: fine Dirichlet eigenvalues descend through
    // lambda' (5 - lambda').
    println!("\nspectral decimation of the Dirichlet graph Laplacian:");
    for m in 1..=2 {
        let coarse = gasket.dirichlet_spectrum(m)?;
        let fine = gasket.dirichlet_spectrum(m + 1)?;
        let report = decimation_match(&coarse, &fine, 1e-8);
        println!(
            "  m = {m} -> {}: matched {} of {} coarse eigenvalues, worst gap {:.2e}",
            m + 1,
            report.matched.len(),
            coarse.len(),
            report.worst_gap
        );
        assert!(report.unmatched_coarse.is_empty());
    }
    let sample = gasket.dirichlet_spectrum(1)?;
    println!(
        "  level-1 spectrum {:?} maps through phi to {:?}",
        sample,
        sample.iter().map(|&l| decimation_polynomial(l)).collect::<Vec<_>>()
    );

    // CSV export of a harmonic function (first rows shown).
    let h = gasket.harmonic_extend(0, 2, &[1.0, 0.5, 0.25])?;
    let csv = gasket.to_csv(2, &h)?;
    println!("\ngasket CSV export (head):");
    for line in csv.lines().take(5) {
        println!("  {line}");
    }
    Ok(())
}
