//! Numerical laboratory for the linearized dynamics of peakon perturbations
//! in the b-family of Camassa-Holm equations.
//!
//! The crate provides:
//!
//! - graded symmetric grids straddling the peak, with quadrature and upwind
//!   differentiation ([`grid`]);
//! - the peakon profile, O(n) exponential-kernel convolutions, and the
//!   compact operator Q in its equivalent forms ([`kernels`]);
//! - application of the linearized operator L, its advective truncation L0,
//!   and the adjoint L*, with their exact identities ([`operator`]);
//! - explicit eigenfunctions, a Frobenius-based construction for general b,
//!   dense discretization, eigenvalues, and pseudospectral scans of the
//!   spectral strip `|Re lambda| <= |5/2 - b|` ([`spectrum`]);
//! - exact characteristics for the truncated flow, fourth-order time
//!   stepping of the full linearized systems, the projection dynamics of the
//!   neutral pair, and growth-rate measurement ([`evolution`]);
//! - a scenario runner turning flat key-value configs into tables and
//!   figures, plus the built-in acceptance suite ([`config`], [`scenario`],
//!   [`suite`], [`export`]).

pub mod config;
mod convolve;
pub mod error;
pub mod evolution;
pub mod export;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod operator;
pub mod report;
pub mod scenario;
pub mod spectrum;
pub mod suite;

pub use error::{Error, Result};
pub use grid::{build_grid, derivative_upwind, inner_product, l2_norm, Grid, GridFunction};
pub use kernels::{
    antiderivative_from_zero, apply_q, conv_phi, conv_phi_prime, convolution_identity_residual,
    hs_norm_squared, stationary_residual, stationary_residual_scaled, ConvIdentity, HsKernel,
    PeakonProfile, QForm,
};
pub use operator::{
    adjoint_identity_residuals, adjoint_null_vector, adjointness_residual, apply_operator,
    OperatorKind,
};
pub use spectrum::{
    ch_exact_eigenfunction, discretize, eigen_backward_error, eigenvalues, indicial_roots,
    l0_adjoint_eigenfunction, l0_eigenfunction, m_profile, point_eigenfunction,
    pseudospectral_scan, IndicialRoots, LambdaRect, OperatorMatrix, ScanContext, ScanOptions,
    SpectralScan,
};
pub use evolution::{
    alpha_beta_exact, alpha_beta_ode, characteristic_map, decompose_secondary, evolve_coupled,
    evolve_full, fit_exponential_rate, growth_rate_fit, l0_unstable_mode, reformulate_tilde,
    truncated_norms, truncated_solution, AlphaBetaTrace, CouplingSeries, Decomposition,
    EvolutionSystem, EvolutionTrace, InitialData, IvpSpec, TraceQuantity, TraceSample,
};
