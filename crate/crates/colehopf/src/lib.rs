//! Viscous Burgers flows on metric graphs via the Cole-Hopf transform, and
//! their approximation of diffusion on the Sierpinski gasket.
//!
//! The crate is organized around one analytical pipeline:
//!
//! * [`graph`] — metric graphs, the weighted energy form, the derivation `d`
//!   and coderivative `d*`, and the Helmholtz split `L² = im d ⊕ ker d*`;
//! * [`spectral`] — piecewise-linear finite elements, the generalized
//!   eigenproblem of the Kirchhoff Laplacian, and exact spectral heat flow;
//! * [`burgers`] — the Cole-Hopf solution `u(t) = -2 d log w(t)` of the
//!   vector Burgers equation, weak-form residuals, the scalar comparison
//!   solver and explicit a-priori estimates;
//! * [`gasket`] — level-`m` Sierpinski-gasket combinatorics, rescaled graph
//!   energies (ratio r = 3/5), harmonic extension, splines, self-similar
//!   measures and quadrature;
//! * [`approx`] — metric graphs Γ_m over the gasket, the identification
//!   operators J₀, J₀*, J₁, J̃₁ and Φ_m, quantitative comparison bounds, and
//!   the heat / Burgers convergence experiments;
//! * [`cli`] — a configuration-driven experiment runner emitting
//!   reproducible CSV tables with manifests.
//!
//! Most capabilities come with a runnable program in `examples/`.

pub mod approx;
pub mod burgers;
pub mod cli;
pub mod error;
pub mod gasket;
pub mod graph;
pub mod spectral;

pub use approx::{
    build_gamma_m, burgers_convergence_experiment, heat_convergence_experiment,
    quasi_unitary_suite, ApproxBundle, ConvergenceOptions,
};
pub use burgers::{
    apriori_check, cole_hopf_solve, kpz_residual, scalar_burgers_solve, structure_decompose,
    vector_residual, BurgersSolution, ColeHopfOptions, StepControl,
};
pub use error::{Error, Result};
pub use gasket::{decimation_match, CellWord, SelfSimilarMeasure, SierpinskiGasket};
pub use graph::{
    coderivative_dstar, energy_form, gradient_d, helmholtz_project, kernel_dstar_basis, l2_inner,
    l2_norm, uniform_grid, Edge, EdgeField, FieldKind, GraphFunction, MetricGraph,
};
pub use spectral::{eigensolve, AssembledOperator, MassKind, SpectralDecomposition};
