//! Optimal control of time-dependent Kohn-Sham systems.
//!
//! The library covers the full pipeline:
//!
//! - [`grid`]: periodic rectangular grids, spectral transforms, the exact
//!   kinetic propagator, and the truncated Coulomb kernel;
//! - [`potentials`]: density, Hartree, cutoff LDA exchange, correlation
//!   fit, and confinement/control presets;
//! - [`propagation`]: Strang-splitting forward and adjoint propagation and
//!   imaginary-time ground states;
//! - [`control`]: discrete H¹ calculus, the cost functional, the Riesz
//!   solve, and the reduced gradient ν·u + μ;
//! - [`optim`]: Hager-Zhang nonlinear conjugate gradient with a
//!   strong-Wolfe line search in the H¹ geometry;
//! - [`experiments`]: the tracking and double-well control experiments,
//!   the convergence study, and the gradient check.

pub mod config;
pub mod control;
pub mod error;
pub mod experiments;
pub mod field;
pub mod grid;
pub mod io;
pub mod optim;
pub mod potentials;
pub mod problem;
pub mod propagation;

pub use config::{ExperimentConfig, ExperimentKind};
pub use control::{ControlSignal, CostBreakdown, CostWeights, TargetSpec, H1};
pub use error::{Result, TdksError};
pub use field::ComplexField;
pub use grid::{
    build_hartree_kernel, build_hartree_kernel_sampled, kinetic_propagate, make_grid,
    HartreeKernel, SpatialGrid,
};
pub use optim::{minimize, Objective, OptStatus, OptimizerConfig};
pub use potentials::{
    density, exchange, hartree, ControlShape, CorrelationFit, Density, ExchangeParams, KohnSham,
    PotentialPreset,
};
pub use problem::TdksProblem;
pub use propagation::{
    ground_state, solve_adjoint, solve_forward, GroundStateParams, Orbitals, TimeGrid, Trajectory,
};
