//! Node-ordered grid data and the particle container.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Sub};
use std::sync::Arc;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Scalar or vector quantity that can live on nodes and particles.
pub trait FieldValue:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + AddAssign
    + Mul<f64, Output = Self>
{
    const COMPONENTS: usize;

    fn zero() -> Self;
    fn component(&self, c: usize) -> f64;
    fn set_component(&mut self, c: usize, v: f64);
    fn dot(&self, other: &Self) -> f64;

    fn is_finite(&self) -> bool {
        (0..Self::COMPONENTS).all(|c| self.component(c).is_finite())
    }

    fn max_abs(&self) -> f64 {
        (0..Self::COMPONENTS)
            .map(|c| self.component(c).abs())
            .fold(0.0, f64::max)
    }
}

impl FieldValue for f64 {
    const COMPONENTS: usize = 1;

    fn zero() -> Self {
        0.0
    }

    fn component(&self, _c: usize) -> f64 {
        *self
    }

    fn set_component(&mut self, _c: usize, v: f64) {
        *self = v;
    }

    fn dot(&self, other: &Self) -> f64 {
        self * other
    }
}

impl FieldValue for Vector2<f64> {
    const COMPONENTS: usize = 2;

    fn zero() -> Self {
        Vector2::zeros()
    }

    fn component(&self, c: usize) -> f64 {
        self[c]
    }

    fn set_component(&mut self, c: usize, v: f64) {
        self[c] = v;
    }

    fn dot(&self, other: &Self) -> f64 {
        Vector2::dot(self, other)
    }
}

/// Values at grid nodes, indexed like [`GridSpec::node_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField<T> {
    grid: GridSpec,
    values: Vec<T>,
}

pub type ScalarField = GridField<f64>;
pub type VectorField = GridField<Vector2<f64>>;

impl<T: FieldValue> GridField<T> {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.node_count()],
        }
    }

    pub fn constant(grid: GridSpec, v: T) -> Self {
        Self {
            grid,
            values: vec![v; grid.node_count()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::LengthMismatch {
                expected: grid.node_count(),
                found: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid field at node {k}")));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node position.
    pub fn from_fn(grid: GridSpec, f: impl Fn(Vector2<f64>) -> T) -> Self {
        let values = (0..grid.node_count())
            .map(|k| f(grid.node_position(k)))
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// One component as a flat vector (for the scalar solvers).
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|v| v.component(c)).collect()
    }

    pub fn set_component(&mut self, c: usize, data: &[f64]) {
        for (v, &d) in self.values.iter_mut().zip(data) {
            v.set_component(c, d);
        }
    }

    /// Euclidean pairing `Σ_k a_k · b_k`.
    pub fn dot(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.dot(b))
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.max_abs()).fold(0.0, f64::max)
    }

    pub fn sum(&self) -> T {
        let mut acc = T::zero();
        for &v in &self.values {
            acc += v;
        }
        acc
    }

    pub fn map<U: FieldValue>(&self, f: impl Fn(T) -> U) -> GridField<U> {
        GridField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl VectorField {
    /// Pointwise Euclidean norm, e.g. the speed `|ũ|`.
    pub fn magnitude(&self) -> ScalarField {
        self.map(|v| v.norm())
    }
}

/// Lagrangian particle state.
///
/// Positions are always stored wrapped. Mass weights `D̄_β` are shared and
/// never written after construction, so the total mass is bit-identical
/// across a run.
#[derive(Debug, Clone)]
pub struct ParticleSet {
    positions: Vec<Vector2<f64>>,
    momenta: Vec<Vector2<f64>>,
    masses: Arc<[f64]>,
}

impl ParticleSet {
    pub fn new(
        grid: &GridSpec,
        positions: Vec<Vector2<f64>>,
        momenta: Vec<Vector2<f64>>,
        masses: Vec<f64>,
    ) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::InvalidParticles("need at least one particle".into()));
        }
        for len in [momenta.len(), masses.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        if let Some(b) = masses.iter().position(|&d| !(d.is_finite() && d > 0.0)) {
            return Err(Error::InvalidParticles(format!(
                "mass weight of particle {b} must be positive, got {}",
                masses[b]
            )));
        }
        if let Some(b) = momenta.iter().position(|m| !m.is_finite()) {
            return Err(Error::NonFinite(format!("momentum of particle {b}")));
        }
        let positions = positions
            .into_iter()
            .map(|p| grid.wrap(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            positions,
            momenta,
            masses: masses.into(),
        })
    }

    /// Same masses, new phase-space coordinates. Positions are wrapped.
    pub fn with_state(
        &self,
        grid: &GridSpec,
        positions: Vec<Vector2<f64>>,
        momenta: Vec<Vector2<f64>>,
    ) -> Result<Self> {
        let n = self.len();
        for len in [positions.len(), momenta.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        if let Some(b) = momenta.iter().position(|m| !m.is_finite()) {
            return Err(Error::NonFinite(format!("momentum of particle {b}")));
        }
        let positions = positions
            .into_iter()
            .map(|p| grid.wrap(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            positions,
            momenta,
            masses: Arc::clone(&self.masses),
        })
    }

    pub fn with_momenta(&self, momenta: Vec<Vector2<f64>>) -> Result<Self> {
        if momenta.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: momenta.len(),
            });
        }
        Ok(Self {
            positions: self.positions.clone(),
            momenta,
            masses: Arc::clone(&self.masses),
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vector2<f64>] {
        &self.positions
    }

    /// Momentum densities `m̄_β`.
    pub fn momenta(&self) -> &[Vector2<f64>] {
        &self.momenta
    }

    /// Mass weights `D̄_β`.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// `Σ_β m̄_β`, summed in particle order.
    pub fn total_momentum(&self) -> Vector2<f64> {
        self.momenta.iter().fold(Vector2::zeros(), |acc, m| acc + m)
    }

    /// `Σ_β D̄_β`, summed in particle order.
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }
}
