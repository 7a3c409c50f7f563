//! Helmholtz structure of Burgers flows: on graphs with cycles the velocity
//! splits as gradient plus circulation (an element of ker d*), Cole-Hopf
//! solutions keep their circulation frozen, and trees carry none at all.
//!
//! ```text
//! cargo run --release --example helmholtz_structure
//! ```

use std::f64::consts::PI;

use colehopf::burgers::{cole_hopf_solve, structure_decompose, ColeHopfOptions};
use colehopf::{
    coderivative_dstar, kernel_dstar_basis, l2_norm, uniform_grid, GraphFunction, MetricGraph,
    Result,
};

fn main() -> Result<()> {
    let tri = MetricGraph::triangle();
    let grid = uniform_grid(&tri, 32);

    // The triangle has one independent cycle; its kernel basis field
    // satisfies the weighted vertex conditions of d* exactly.
    let basis = kernel_dstar_basis(&tri, &grid)?;
    println!("triangle: dim ker d* = {}", basis.len());
    for (k, eta) in basis.iter().enumerate() {
        let ds = coderivative_dstar(eta);
        println!(
            "  basis field {k}: ||eta|| = {:.6}, ||d* eta|| = {:.3e}, in domain: {}",
            l2_norm(eta),
            l2_norm(&ds.value),
            ds.in_domain
        );
    }

    // A gradient-type Burgers flow has zero circulation at every time.
    let h0 = GraphFunction::from_fn(&tri, &grid, |e, s| {
        0.4 * (PI * s).sin() * (1.0 + 0.3 * e as f64)
    })?;
    let times = [0.0, 0.1, 0.3];
    let sol = cole_hopf_solve(&h0, &times, &ColeHopfOptions::default())?;
    println!("\ngradient data on the triangle:");
    for i in 0..times.len() {
        let (grad, circ) = structure_decompose(&sol, i)?;
        println!(
            "  t = {:>4}: ||gradient part|| = {:.6}, ||circulation|| = {:.3e}",
            times[i],
            l2_norm(&grad),
            l2_norm(&circ)
        );
    }

    // With a frozen circulation added, the split recovers it unchanged.
    let eta = basis[0].scale(0.75);
    let opts = ColeHopfOptions { circulation: Some(eta.clone()), ..Default::default() };
    let sol = cole_hopf_solve(&h0, &times, &opts)?;
    println!("\nsame data plus frozen circulation (0.75 x basis):");
    for i in 0..times.len() {
        let (_, circ) = structure_decompose(&sol, i)?;
        let drift = circ.linear_combination(1.0, &eta, -1.0)?;
        println!(
            "  t = {:>4}: ||circulation|| = {:.6}, drift from eta = {:.3e}",
            times[i],
            l2_norm(&circ),
            l2_norm(&drift)
        );
    }

    // Trees: ker d* is trivial, every velocity is a pure gradient.
    let star = MetricGraph::star(4)?;
    let sgrid = uniform_grid(&star, 16);
    let sbasis = kernel_dstar_basis(&star, &sgrid)?;
    println!("\n4-star: dim ker d* = {} (trees carry no circulation)", sbasis.len());
    Ok(())
}
