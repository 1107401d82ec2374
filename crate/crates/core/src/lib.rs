//! Hamiltonian particle-mesh discretisation of Euler–Poincaré fluid models.
//!
//! Particles carry positions, momentum densities and constant mass weights.
//! A periodic grid hosts the Hamiltonian through bilinear finite-element
//! matrices, and particle data moves to and from the grid through a cubic
//! B-spline partition of unity. The particle system is canonical and is
//! advanced with symplectic Euler.
//!
//! ```no_run
//! use epmesh_core::{GridSpec, Model, ModelSpec, ParticleSet, StepConfig, run};
//! use nalgebra::Vector2;
//!
//! let grid = GridSpec::periodic_square(32)?;
//! let cfg = StepConfig::default();
//! let model = Model::new(ModelSpec::ep_diff(0.3133), grid, cfg.cg_options())?;
//! let particles = ParticleSet::new(
//!     &grid,
//!     vec![Vector2::new(1.0, 2.0)],
//!     vec![Vector2::new(0.1, 0.0)],
//!     vec![1.0],
//! )?;
//! let end = run(&model, particles, &cfg, 10, &mut [])?;
//! # Ok::<(), epmesh_core::Error>(())
//! ```

pub mod calculus;
pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod field;
pub mod grid;
pub mod integrator;
pub mod models;

pub use calculus::{Interpolation, MassSolver, OneFormScatter};
pub use diagnostics::{
    check_gradients, check_symplectic, check_grid_equations, record, DiagnosticsRecord, GradientCheck,
    Recorder, Scheme, GridEquationReport,
};
pub use error::{Error, Result};
pub use fem::{CgOptions, SolveReport, SparseOperator};
pub use field::{GridField, ParticleSet, ScalarField, VectorField};
pub use grid::{BasisKind, GridSpec};
pub use integrator::{
    explicit_euler_step, fixed_point_momentum, run, symplectic_euler_step, Observer, StepConfig,
    StepEvent, StepReport,
};
pub use models::{DepthForce, EulerianState, Model, ModelKind, ModelSpec};
