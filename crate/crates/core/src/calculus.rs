//! Particle↔grid interpolation maps.
//!
//! Grid-to-particle maps evaluate the `ψ`-interpolant (or its gradient) at
//! particle positions. Particle-to-grid maps produce a raw one-form scatter
//! `μ_k = Σ_β (f̄_β/ΔS) ψ_k(X_β)`; dividing by the mass matrix turns it into
//! a grid function `⟨f̄⟩`. The divergence scatter is the adjoint of the
//! gradient gather.
//!
//! Scatters reduce over fixed-size particle chunks whose partial sums are
//! merged in chunk order, so results are bit-reproducible regardless of the
//! number of worker threads.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{solve_field, CgOptions, SparseOperator};
use crate::field::{FieldValue, GridField, ScalarField, VectorField};
use crate::grid::{BasisKind, GridSpec, Stencil};

const SCATTER_CHUNK: usize = 8192;

/// Raw particle-to-grid sum before the mass-matrix solve.
#[derive(Debug, Clone, PartialEq)]
pub struct OneFormScatter<T>(GridField<T>);

impl<T: FieldValue> OneFormScatter<T> {
    pub fn field(&self) -> &GridField<T> {
        &self.0
    }

    pub fn into_field(self) -> GridField<T> {
        self.0
    }

    pub fn values(&self) -> &[T] {
        self.0.values()
    }

    pub fn sum(&self) -> T {
        self.0.sum()
    }
}

/// Interpolation stencils for one particle configuration.
///
/// Built once per set of positions and reused by every map, so a time step
/// that freezes positions evaluates the basis only once.
#[derive(Debug, Clone)]
pub struct Interpolation {
    grid: GridSpec,
    stencils: Vec<Stencil>,
}

impl Interpolation {
    /// `positions` must be wrapped (as stored in a `ParticleSet`).
    pub fn new(grid: &GridSpec, positions: &[Vector2<f64>]) -> Self {
        let stencils = positions
            .par_iter()
            .map(|&p| Stencil::new(grid, p, BasisKind::Particle))
            .collect();
        Self {
            grid: *grid,
            stencils,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.stencils.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stencils.is_empty()
    }

    fn check_field<T: FieldValue>(&self, f: &GridField<T>) -> Result<()> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: len,
            });
        }
        Ok(())
    }

    fn gather_with<T: FieldValue, U: Copy + Send + Sync>(
        &self,
        f: &GridField<T>,
        zero: U,
        acc: impl Fn(&mut U, T, f64, Vector2<f64>) + Sync,
    ) -> Result<Vec<U>> {
        self.check_field(f)?;
        let nx = self.grid.nx();
        let vals = f.values();
        Ok(self
            .stencils
            .par_iter()
            .map(|s| {
                let mut out = zero;
                for b in 0..4 {
                    let row = s.iy[b] * nx;
                    for a in 0..4 {
                        let psi = s.wx[a] * s.wy[b];
                        let grad = Vector2::new(s.dwx[a] * s.wy[b], s.wx[a] * s.dwy[b]);
                        acc(&mut out, vals[row + s.ix[a]], psi, grad);
                    }
                }
                out
            })
            .collect())
    }

    /// `[f̃]_β = Σ_k f̃_k ψ_k(X_β)`.
    pub fn gather<T: FieldValue>(&self, f: &GridField<T>) -> Result<Vec<T>> {
        self.gather_with(f, T::zero(), |out, v, psi, _| *out += v * psi)
    }

    /// `[∇f̃]_β = Σ_k f̃_k ∇ψ_k(X_β)`.
    pub fn gather_grad(&self, f: &ScalarField) -> Result<Vec<Vector2<f64>>> {
        self.gather_with(f, Vector2::zeros(), |out, v, _, grad| *out += grad * v)
    }

    /// `[∇ũ]_β` with rows indexed by the gradient direction:
    /// `J[(a, b)] = Σ_k ∂_a ψ_k(X_β) ũ_k[b]`.
    pub fn gather_jacobian(&self, f: &VectorField) -> Result<Vec<Matrix2<f64>>> {
        self.gather_with(f, Matrix2::zeros(), |out, v, _, grad| {
            *out += grad * v.transpose()
        })
    }

    fn scatter_with<T: FieldValue>(
        &self,
        contrib: impl Fn(usize, f64, Vector2<f64>) -> T + Sync,
    ) -> GridField<T> {
        let nx = self.grid.nx();
        let m = self.grid.node_count();
        let partials: Vec<Vec<T>> = self
            .stencils
            .par_chunks(SCATTER_CHUNK)
            .enumerate()
            .map(|(chunk, stencils)| {
                let mut buf = vec![T::zero(); m];
                for (offset, s) in stencils.iter().enumerate() {
                    let beta = chunk * SCATTER_CHUNK + offset;
                    for b in 0..4 {
                        let row = s.iy[b] * nx;
                        for a in 0..4 {
                            let psi = s.wx[a] * s.wy[b];
                            let grad = Vector2::new(s.dwx[a] * s.wy[b], s.wx[a] * s.dwy[b]);
                            buf[row + s.ix[a]] += contrib(beta, psi, grad);
                        }
                    }
                }
                buf
            })
            .collect();
        let mut parts = partials.into_iter();
        let mut total = parts.next().unwrap_or_else(|| vec![T::zero(); m]);
        for part in parts {
            for (t, p) in total.iter_mut().zip(part) {
                *t += p;
            }
        }
        GridField::from_values(self.grid, total).expect("node count matches")
    }

    /// `μ_k = Σ_β (f̄_β/ΔS) ψ_k(X_β)`.
    pub fn scatter<T: FieldValue>(&self, fbar: &[T]) -> Result<OneFormScatter<T>> {
        self.check_len(fbar.len())?;
        let inv_area = 1.0 / self.grid.cell_area();
        Ok(OneFormScatter(self.scatter_with(|beta, psi, _| fbar[beta] * (psi * inv_area))))
    }

    /// Raw divergence scatter `−Σ_β (f̄_β/ΔS) · ∇ψ_k(X_β)` of a one-form density.
    pub fn scatter_div(&self, fbar: &[Vector2<f64>]) -> Result<OneFormScatter<f64>> {
        self.check_len(fbar.len())?;
        let inv_area = 1.0 / self.grid.cell_area();
        Ok(OneFormScatter(self.scatter_with(|beta, _, grad| {
            -fbar[beta].dot(&grad) * inv_area
        })))
    }

    /// Raw divergence scatter of the flux `f̄ [v]`:
    /// `−Σ_β (f̄_β/ΔS) (v_β · ∇ψ_k(X_β))`.
    ///
    /// With `v = [ũ]` and `f̄ = D̄` this is `M⟨∇·(D̄[ũ])⟩`; with `f̄ = m̄` it is
    /// `M⟨∇·([ũ] m̄)⟩`.
    pub fn scatter_flux<T: FieldValue>(
        &self,
        velocity: &[Vector2<f64>],
        density: &[T],
    ) -> Result<OneFormScatter<T>> {
        self.check_len(velocity.len())?;
        self.check_len(density.len())?;
        let inv_area = 1.0 / self.grid.cell_area();
        Ok(OneFormScatter(self.scatter_with(|beta, _, grad| {
            density[beta] * (-velocity[beta].dot(&grad) * inv_area)
        })))
    }

    /// Time derivative of the raw scatter of `f̄` along particle motion:
    /// `Σ_β (ḟ_β ψ_k(X_β) + f̄_β Ẋ_β · ∇ψ_k(X_β)) / ΔS`.
    pub fn scatter_rate<T: FieldValue>(
        &self,
        density: &[T],
        rate: &[T],
        velocity: &[Vector2<f64>],
    ) -> Result<OneFormScatter<T>> {
        self.check_len(density.len())?;
        self.check_len(rate.len())?;
        self.check_len(velocity.len())?;
        let inv_area = 1.0 / self.grid.cell_area();
        Ok(OneFormScatter(self.scatter_with(|beta, psi, grad| {
            (rate[beta] * psi + density[beta] * velocity[beta].dot(&grad)) * inv_area
        })))
    }
}

/// Mass-matrix solve `M ⟨·⟩ = μ` used to turn raw scatters into grid functions.
#[derive(Debug, Clone)]
pub struct MassSolver<'a> {
    pub mass: &'a SparseOperator,
    pub opts: CgOptions,
}

impl<'a> MassSolver<'a> {
    pub fn new(mass: &'a SparseOperator, opts: CgOptions) -> Self {
        Self { mass, opts }
    }

    pub fn solve<T: FieldValue>(&self, mu: &OneFormScatter<T>) -> Result<GridField<T>> {
        Ok(solve_field(self.mass, mu.field(), None, &self.opts)?.0)
    }
}

/// Particle-to-grid map `⟨f̄⟩`.
pub fn scatter_avg<T: FieldValue>(
    interp: &Interpolation,
    fbar: &[T],
    solver: &MassSolver<'_>,
) -> Result<GridField<T>> {
    solver.solve(&interp.scatter(fbar)?)
}

/// Interpolated product `⟨f̄ [g̃]⟩`.
pub fn scatter_product<T: FieldValue>(
    interp: &Interpolation,
    fbar: &[f64],
    g: &GridField<T>,
    solver: &MassSolver<'_>,
) -> Result<GridField<T>> {
    interp.check_len(fbar.len())?;
    let gathered = interp.gather(g)?;
    let weights: Vec<T> = gathered.iter().zip(fbar).map(|(&v, &f)| v * f).collect();
    scatter_avg(interp, &weights, solver)
}

/// Particle-to-grid divergence map `⟨∇·f̄⟩`.
pub fn scatter_div(
    interp: &Interpolation,
    fbar: &[Vector2<f64>],
    solver: &MassSolver<'_>,
) -> Result<ScalarField> {
    solver.solve(&interp.scatter_div(fbar)?)
}
