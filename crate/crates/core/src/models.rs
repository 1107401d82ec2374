//! Discrete Hamiltonians for EP-Diff and shallow-water-α and the right-hand
//! sides of their canonical particle equations.
//!
//! The Legendre relation reads `∂L̂/∂ũ = S ũ = M m̃ = μ`, where `S` is the
//! Helmholtz matrix `A` (EP-Diff) or the density-weighted `B(D̃)` (SW-α) and
//! `μ` is the raw momentum scatter. The velocity solve therefore consumes `μ`
//! directly:
//!
//! ```text
//! ũ = S⁻¹ μ,        Ĥ = ½ μ · ũ  (+ ½ g D̃ · M D̃ for SW-α)
//! Ẋ_β = [ũ]_β,      ṁ̄_β = −[∇ũ]ᵀ_β m̄_β + D̄_β [∇ M⁻¹ ∂L̂/∂D̃]_β
//! ```
//!
//! with conjugate variables `(X_β, m̄_β/ΔS)`.

use nalgebra::{Matrix2, Vector2};

use crate::calculus::{Interpolation, MassSolver, OneFormScatter};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_helmholtz, assemble_mass, solve_field, CgOptions, SolveReport, SparseOperator,
    WeightedHelmholtz,
};
use crate::field::{ParticleSet, ScalarField, VectorField};
use crate::grid::GridSpec;

/// Tolerance of the mass solves inside [`Model::grid_ep_rhs`].
const RESIDUAL_SOLVE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    EpDiff,
    SwAlpha,
}

/// How the SW-α pressure-like term `∂L̂/∂D̃` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DepthForce {
    /// `½ ũ · (∂B/∂D̃_k) ũ − g (M D̃)_k`, the exact derivative of the
    /// assembled Lagrangian. Makes the particle system exactly Hamiltonian.
    #[default]
    Exact,
    /// Nodewise `½ (m̃/D̃) · ũ − g D̃` with `m̃ = M⁻¹ μ`; cheaper, consistent
    /// only to discretisation order.
    Approximate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Smoothing length `α ≥ 0`.
    pub alpha: f64,
    /// Gravity, SW-α only.
    pub g: f64,
    pub depth_force: DepthForce,
}

impl ModelSpec {
    pub fn ep_diff(alpha: f64) -> Self {
        Self {
            kind: ModelKind::EpDiff,
            alpha,
            g: 0.0,
            depth_force: DepthForce::Exact,
        }
    }

    pub fn sw_alpha(alpha: f64, g: f64) -> Self {
        Self {
            kind: ModelKind::SwAlpha,
            alpha,
            g,
            depth_force: DepthForce::Exact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite and non-negative, got {}",
                self.alpha
            )));
        }
        if self.kind == ModelKind::SwAlpha && !(self.g.is_finite() && self.g > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gravity must be positive for SW-alpha, got {}",
                self.g
            )));
        }
        Ok(())
    }
}

/// Density quantities of an SW-α frame.
#[derive(Debug, Clone)]
pub struct DepthState {
    /// `ν_k = Σ_β (D̄_β/ΔS) ψ_k(X_β)`.
    pub scatter: OneFormScatter<f64>,
    /// `D̃ = M⁻¹ ν`.
    pub field: ScalarField,
    /// `B(D̃)`.
    pub operator: SparseOperator,
}

/// Everything that depends only on particle positions.
#[derive(Debug, Clone)]
pub struct Frame {
    pub interp: Interpolation,
    pub depth: Option<DepthState>,
    pub reports: Vec<SolveReport>,
}

/// Grid picture of a particle state: raw momentum scatter and velocity.
#[derive(Debug, Clone)]
pub struct EulerianState {
    pub frame: Frame,
    /// `μ = scatter(m̄)`.
    pub mu: OneFormScatter<Vector2<f64>>,
    /// `ũ = S⁻¹ μ`.
    pub velocity: VectorField,
    /// Reports of every solve that built this state, frame included.
    pub cg_reports: Vec<SolveReport>,
}

/// Momentum tendency split as `ṁ̄_β = −J_β m̄_β + f_β`.
#[derive(Debug, Clone)]
pub struct MomentumForce {
    /// `J_β = [∇ũ]_β`, rows indexed by gradient direction.
    pub jacobians: Vec<Matrix2<f64>>,
    /// Density-driven term `f_β = D̄_β [∇ M⁻¹ ∂L̂/∂D̃]_β`; zero for EP-Diff.
    pub explicit: Vec<Vector2<f64>>,
    pub reports: Vec<SolveReport>,
}

#[derive(Debug, Clone)]
pub struct Tendencies {
    pub position: Vec<Vector2<f64>>,
    pub momentum: Vec<Vector2<f64>>,
}

/// Grid-form residuals of the discrete Euler–Poincaré equations.
#[derive(Debug, Clone)]
pub struct GridResiduals {
    pub momentum: VectorField,
    pub continuity: ScalarField,
}

impl GridResiduals {
    pub fn momentum_max(&self) -> f64 {
        self.momentum.max_abs()
    }

    pub fn continuity_max(&self) -> f64 {
        self.continuity.max_abs()
    }
}

#[derive(Debug, Clone)]
enum Operators {
    EpDiff { helmholtz: SparseOperator },
    SwAlpha { weighted: WeightedHelmholtz },
}

/// A model bound to a grid, with its constant matrices assembled.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    grid: GridSpec,
    mass: SparseOperator,
    ops: Operators,
    cg: CgOptions,
}

impl Model {
    pub fn new(spec: ModelSpec, grid: GridSpec, cg: CgOptions) -> Result<Self> {
        spec.validate()?;
        let ops = match spec.kind {
            ModelKind::EpDiff => Operators::EpDiff {
                helmholtz: assemble_helmholtz(&grid, spec.alpha)?,
            },
            ModelKind::SwAlpha => Operators::SwAlpha {
                weighted: WeightedHelmholtz::new(&grid, spec.alpha)?,
            },
        };
        Ok(Self {
            spec,
            grid,
            mass: assemble_mass(&grid),
            ops,
            cg,
        })
    }

    /// Same model with different solver controls.
    pub fn with_cg(&self, cg: CgOptions) -> Self {
        Self { cg, ..self.clone() }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn mass(&self) -> &SparseOperator {
        &self.mass
    }

    pub fn cg(&self) -> &CgOptions {
        &self.cg
    }

    /// The constant Helmholtz matrix `A` (EP-Diff only).
    pub fn helmholtz(&self) -> Option<&SparseOperator> {
        match &self.ops {
            Operators::EpDiff { helmholtz } => Some(helmholtz),
            Operators::SwAlpha { .. } => None,
        }
    }

    pub fn weighted_helmholtz(&self) -> Option<&WeightedHelmholtz> {
        match &self.ops {
            Operators::SwAlpha { weighted } => Some(weighted),
            Operators::EpDiff { .. } => None,
        }
    }

    /// Builds the position-dependent part of the state: stencils, and for
    /// SW-α the depth `D̃ = ⟨D̄⟩` with its matrix `B(D̃)`.
    pub fn frame(&self, particles: &ParticleSet) -> Result<Frame> {
        let interp = Interpolation::new(&self.grid, particles.positions());
        let mut reports = Vec::new();
        let depth = match &self.ops {
            Operators::EpDiff { .. } => None,
            Operators::SwAlpha { weighted } => {
                let scatter = interp.scatter(particles.masses())?;
                let (field, rep) = solve_field(&self.mass, scatter.field(), None, &self.cg)?;
                reports.extend(rep);
                let operator = weighted.assemble(&field)?;
                Some(DepthState {
                    scatter,
                    field,
                    operator,
                })
            }
        };
        Ok(Frame {
            interp,
            depth,
            reports,
        })
    }

    fn velocity_operator<'a>(&'a self, frame: &'a Frame) -> &'a SparseOperator {
        match (&self.ops, &frame.depth) {
            (Operators::EpDiff { helmholtz }, _) => helmholtz,
            (Operators::SwAlpha { .. }, Some(depth)) => &depth.operator,
            (Operators::SwAlpha { .. }, None) => unreachable!("SW-alpha frame without depth"),
        }
    }

    /// Scatter of `momenta` and the velocity `ũ = S⁻¹ μ` in a fixed frame.
    pub fn solve_velocity(
        &self,
        frame: &Frame,
        momenta: &[Vector2<f64>],
        warm: Option<&VectorField>,
    ) -> Result<(OneFormScatter<Vector2<f64>>, VectorField, Vec<SolveReport>)> {
        let mu = frame.interp.scatter(momenta)?;
        let (velocity, reports) =
            solve_field(self.velocity_operator(frame), mu.field(), warm, &self.cg)?;
        Ok((mu, velocity, reports))
    }

    /// Completes a frame with the velocity of `momenta`.
    pub fn state_in(
        &self,
        frame: Frame,
        momenta: &[Vector2<f64>],
        warm: Option<&VectorField>,
    ) -> Result<EulerianState> {
        let (mu, velocity, reports) = self.solve_velocity(&frame, momenta, warm)?;
        let mut cg_reports = frame.reports.clone();
        cg_reports.extend(reports);
        Ok(EulerianState {
            frame,
            mu,
            velocity,
            cg_reports,
        })
    }

    /// Velocity solve: the Eulerian state of a particle configuration.
    pub fn velocity_solve(&self, particles: &ParticleSet) -> Result<EulerianState> {
        let frame = self.frame(particles)?;
        self.state_in(frame, particles.momenta(), None)
    }

    /// `Ĥ` of a consistent state.
    pub fn hamiltonian_of(&self, state: &EulerianState) -> f64 {
        let kinetic = 0.5 * state.mu.field().dot(&state.velocity);
        match &state.frame.depth {
            None => kinetic,
            Some(depth) => {
                let md = self.mass.apply(depth.field.values());
                let potential: f64 = depth
                    .field
                    .values()
                    .iter()
                    .zip(&md)
                    .map(|(d, m)| d * m)
                    .sum();
                kinetic + 0.5 * self.spec.g * potential
            }
        }
    }

    pub fn hamiltonian(&self, particles: &ParticleSet) -> Result<f64> {
        Ok(self.hamiltonian_of(&self.velocity_solve(particles)?))
    }

    /// `M⁻¹ ∂L̂/∂D̃` for SW-α, `None` for EP-Diff.
    pub fn depth_potential(
        &self,
        frame: &Frame,
        mu: &OneFormScatter<Vector2<f64>>,
        velocity: &VectorField,
    ) -> Result<Option<(ScalarField, Vec<SolveReport>)>> {
        let (Operators::SwAlpha { weighted }, Some(depth)) = (&self.ops, &frame.depth) else {
            return Ok(None);
        };
        let g = self.spec.g;
        match self.spec.depth_force {
            DepthForce::Exact => {
                let kinetic = weighted.quadratic_derivative(velocity);
                let (q, reports) = solve_field(&self.mass, &kinetic, None, &self.cg)?;
                let q = q.zip_with(&depth.field, |k, d| k - g * d);
                Ok(Some((q, reports)))
            }
            DepthForce::Approximate => {
                let (m_tilde, reports) = solve_field(&self.mass, mu.field(), None, &self.cg)?;
                let values = m_tilde
                    .values()
                    .iter()
                    .zip(velocity.values())
                    .zip(depth.field.values())
                    .map(|((m, u), d)| 0.5 * m.dot(u) / d - g * d)
                    .collect();
                Ok(Some((ScalarField::from_values(self.grid, values)?, reports)))
            }
        }
    }

    /// Splits the momentum tendency into its Jacobian and explicit parts for
    /// a velocity field in a fixed frame.
    pub fn momentum_force(
        &self,
        frame: &Frame,
        mu: &OneFormScatter<Vector2<f64>>,
        velocity: &VectorField,
        masses: &[f64],
    ) -> Result<MomentumForce> {
        let jacobians = frame.interp.gather_jacobian(velocity)?;
        let (explicit, reports) = match self.depth_potential(frame, mu, velocity)? {
            None => (vec![Vector2::zeros(); jacobians.len()], Vec::new()),
            Some((q, reports)) => {
                let grad = frame.interp.gather_grad(&q)?;
                let f = grad.iter().zip(masses).map(|(g, &d)| g * d).collect();
                (f, reports)
            }
        };
        Ok(MomentumForce {
            jacobians,
            explicit,
            reports,
        })
    }

    /// Canonical equations `(Ẋ_β, ṁ̄_β)` at a consistent state.
    pub fn particle_rhs(&self, particles: &ParticleSet, state: &EulerianState) -> Result<Tendencies> {
        if state.frame.interp.len() != particles.len() {
            return Err(Error::LengthMismatch {
                expected: particles.len(),
                found: state.frame.interp.len(),
            });
        }
        let position = state.frame.interp.gather(&state.velocity)?;
        let force = self.momentum_force(&state.frame, &state.mu, &state.velocity, particles.masses())?;
        let momentum = particles
            .momenta()
            .iter()
            .zip(&force.jacobians)
            .zip(&force.explicit)
            .map(|((m, j), f)| f - j * m)
            .collect();
        Ok(Tendencies { position, momentum })
    }

    /// Grid-form residuals of the discrete EP equations
    ///
    /// ```text
    /// d/dt⟨m̄⟩ + ⟨∇·([ũ] m̄)⟩ + ⟨[(∇ũ)ᵀ]·m̄⟩ − ⟨D̄ [∇ M⁻¹ ∂L̂/∂D̃]⟩
    /// d/dt⟨D̄⟩ + ⟨∇·(D̄ [ũ])⟩
    /// ```
    ///
    /// with the time derivatives expanded by the product rule over
    /// `ψ_k(X_β)` along the canonical flow. Each bracket is solved separately.
    pub fn grid_ep_rhs(&self, particles: &ParticleSet, state: &EulerianState) -> Result<GridResiduals> {
        let rhs = self.particle_rhs(particles, state)?;
        let interp = &state.frame.interp;
        let solver = MassSolver::new(
            &self.mass,
            CgOptions {
                tol: RESIDUAL_SOLVE_TOL,
                max_iter: 10 * self.grid.node_count().max(100),
            },
        );
        let momenta = particles.momenta();
        let masses = particles.masses();

        let gathered_u = interp.gather(&state.velocity)?;
        let force = self.momentum_force(&state.frame, &state.mu, &state.velocity, masses)?;
        let transport: Vec<Vector2<f64>> = force
            .jacobians
            .iter()
            .zip(momenta)
            .map(|(j, m)| j * m)
            .collect();

        let dm_dt = solver.solve(&interp.scatter_rate(momenta, &rhs.momentum, &rhs.position)?)?;
        let advect = solver.solve(&interp.scatter_flux(&gathered_u, momenta)?)?;
        let stretch = solver.solve(&interp.scatter(&transport)?)?;
        let source = solver.solve(&interp.scatter(&force.explicit)?)?;
        let momentum = dm_dt
            .zip_with(&advect, |a, b| a + b)
            .zip_with(&stretch, |a, b| a + b)
            .zip_with(&source, |a, b| a - b);

        let zero_rate = vec![0.0; particles.len()];
        let dd_dt = solver.solve(&interp.scatter_rate(masses, &zero_rate, &rhs.position)?)?;
        let d_flux = solver.solve(&interp.scatter_flux(&gathered_u, masses)?)?;
        let continuity = dd_dt.zip_with(&d_flux, |a, b| a + b);

        Ok(GridResiduals {
            momentum,
            continuity,
        })
    }
}
