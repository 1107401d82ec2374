//! Symplectic-Euler time stepping.
//!
//! The momentum update is implicit and solved by fixed-point iteration with
//! every grid quantity frozen at `Xⁿ`; the position update is explicit:
//!
//! ```text
//! (I + Δt Jⁿ_β(m̄ʲ)) m̄ʲ⁺¹_β = m̄ⁿ_β + Δt fⁿ_β(m̄ʲ)
//! Xⁿ⁺¹_β = Xⁿ_β + Δt [ũ(m̄ⁿ⁺¹)]ⁿ_β
//! ```

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{CgOptions, SolveReport};
use crate::field::{ParticleSet, VectorField};
use crate::models::{EulerianState, Frame, Model};

/// Below this `|det(I + Δt J)|` a particle's momentum system is singular.
pub const DEGENERATE_DET: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    /// Max-norm bound on the final momentum increment.
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    /// Relative residual for the inner linear solves.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            dt: 0.0204,
            fp_tol: 1e-9,
            fp_max_iter: 50,
            cg_tol: 1e-9,
            cg_max_iter: 500,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt >= 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be non-negative, got {}", self.dt)));
        }
        if !(self.fp_tol.is_finite() && self.fp_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("fp_tol must be positive, got {}", self.fp_tol)));
        }
        if !(self.cg_tol.is_finite() && self.cg_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("cg_tol must be positive, got {}", self.cg_tol)));
        }
        if self.fp_max_iter == 0 || self.cg_max_iter == 0 {
            return Err(Error::InvalidParameter("iteration caps must be at least 1".into()));
        }
        Ok(())
    }

    /// Solver options a [`Model`] should be built with for this config.
    pub fn cg_options(&self) -> CgOptions {
        CgOptions {
            tol: self.cg_tol,
            max_iter: self.cg_max_iter,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct StepReport {
    pub fp_iterations: usize,
    /// `max_β |m̄ʲ⁺¹_β − m̄ʲ_β|` per sweep.
    pub increments: Vec<f64>,
    pub cg_reports: Vec<SolveReport>,
}

impl StepReport {
    pub fn cg_iterations(&self) -> usize {
        self.cg_reports.iter().map(|r| r.iterations).sum()
    }

    pub fn max_cg_iterations(&self) -> usize {
        self.cg_reports.iter().map(|r| r.iterations).max().unwrap_or(0)
    }

    pub fn final_increment(&self) -> f64 {
        self.increments.last().copied().unwrap_or(0.0)
    }
}

/// Result of the implicit momentum solve.
#[derive(Debug, Clone)]
pub struct MomentumUpdate {
    pub momenta: Vec<Vector2<f64>>,
    /// `ũ` of the converged momenta in the frozen frame.
    pub velocity: VectorField,
    pub report: StepReport,
}

fn solve_particle(j: &Matrix2<f64>, rhs: Vector2<f64>, dt: f64) -> std::result::Result<Vector2<f64>, f64> {
    let s = Matrix2::identity() + j * dt;
    let det = s.determinant();
    if !(det.abs() >= DEGENERATE_DET) {
        return Err(det);
    }
    let inv = Matrix2::new(s[(1, 1)], -s[(0, 1)], -s[(1, 0)], s[(0, 0)]) / det;
    Ok(inv * rhs)
}

/// Fixed-point solve for `m̄ⁿ⁺¹` in the frame of `Xⁿ`.
///
/// `velocity` must be `ũ(m̄ⁿ)` in `frame`; it seeds the first sweep and the
/// warm starts of the velocity solves.
pub fn fixed_point_momentum(
    model: &Model,
    frame: &Frame,
    momenta: &[Vector2<f64>],
    masses: &[f64],
    velocity: &VectorField,
    cfg: &StepConfig,
) -> Result<MomentumUpdate> {
    let dt = cfg.dt;
    let mut report = StepReport::default();
    let mut current = momenta.to_vec();
    let mut mu = frame.interp.scatter(&current)?;
    let mut velocity = velocity.clone();

    loop {
        let force = model.momentum_force(frame, &mu, &velocity, masses)?;
        report.cg_reports.extend(force.reports);
        let next = force
            .jacobians
            .par_iter()
            .zip(&force.explicit)
            .zip(momenta)
            .enumerate()
            .map(|(b, ((j, f), m))| {
                solve_particle(j, m + f * dt, dt).map_err(|det| Error::DegenerateStep { particle: b, det })
            })
            .collect::<Result<Vec<_>>>()?;
        let increment = next
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max);
        report.increments.push(increment);
        report.fp_iterations += 1;
        current = next;

        let (new_mu, new_velocity, reports) = model.solve_velocity(frame, &current, Some(&velocity))?;
        report.cg_reports.extend(reports);
        mu = new_mu;
        velocity = new_velocity;

        if increment <= cfg.fp_tol {
            break;
        }
        if !increment.is_finite() || report.fp_iterations >= cfg.fp_max_iter {
            return Err(Error::FixedPointDiverged(Box::new(report)));
        }
    }

    Ok(MomentumUpdate {
        momenta: current,
        velocity,
        report,
    })
}

/// One symplectic-Euler step.
///
/// `state` must be the Eulerian state of `particles`; the returned state is
/// that of the new particles and can be fed to the next step.
pub fn symplectic_euler_step(
    model: &Model,
    particles: &ParticleSet,
    state: &EulerianState,
    cfg: &StepConfig,
) -> Result<(ParticleSet, EulerianState, StepReport)> {
    let update = fixed_point_momentum(
        model,
        &state.frame,
        particles.momenta(),
        particles.masses(),
        &state.velocity,
        cfg,
    )?;
    let u = state.frame.interp.gather(&update.velocity)?;
    let positions = particles
        .positions()
        .iter()
        .zip(&u)
        .map(|(x, v)| x + v * cfg.dt)
        .collect();
    let next = particles.with_state(model.grid(), positions, update.momenta)?;
    let frame = model.frame(&next)?;
    let next_state = model.state_in(frame, next.momenta(), Some(&update.velocity))?;
    let mut report = update.report;
    report.cg_reports.extend(next_state.cg_reports.iter().cloned());
    Ok((next, next_state, report))
}

/// Forward Euler on the canonical equations. Not symplectic; kept as a
/// reference for the diagnostics.
pub fn explicit_euler_step(
    model: &Model,
    particles: &ParticleSet,
    state: &EulerianState,
    dt: f64,
) -> Result<(ParticleSet, EulerianState)> {
    let rhs = model.particle_rhs(particles, state)?;
    let positions = particles
        .positions()
        .iter()
        .zip(&rhs.position)
        .map(|(x, v)| x + v * dt)
        .collect();
    let momenta = particles
        .momenta()
        .iter()
        .zip(&rhs.momentum)
        .map(|(m, dm)| m + dm * dt)
        .collect();
    let next = particles.with_state(model.grid(), positions, momenta)?;
    let next_state = model.velocity_solve(&next)?;
    Ok((next, next_state))
}

/// What an observer sees: step 0 is the initial state, with no report.
pub struct StepEvent<'a> {
    pub step: usize,
    pub time: f64,
    pub model: &'a Model,
    pub particles: &'a ParticleSet,
    pub state: &'a EulerianState,
    pub report: Option<&'a StepReport>,
}

pub trait Observer {
    fn observe(&mut self, event: &StepEvent<'_>) -> std::result::Result<(), String>;
}

impl<F> Observer for F
where
    F: FnMut(&StepEvent<'_>) -> std::result::Result<(), String>,
{
    fn observe(&mut self, event: &StepEvent<'_>) -> std::result::Result<(), String> {
        self(event)
    }
}

/// Advances `n_steps` symplectic-Euler steps, calling every observer on the
/// initial state and after each step. Time is `step · dt`.
pub fn run(
    model: &Model,
    initial: ParticleSet,
    cfg: &StepConfig,
    n_steps: usize,
    observers: &mut [&mut dyn Observer],
) -> Result<ParticleSet> {
    cfg.validate()?;
    let mut particles = initial;
    let mut state = model.velocity_solve(&particles)?;
    notify(model, observers, 0, cfg.dt, &particles, &state, None)?;
    for step in 1..=n_steps {
        let (next, next_state, report) = symplectic_euler_step(model, &particles, &state, cfg)
            .map_err(|e| Error::StepFailed {
                step,
                source: Box::new(e),
            })?;
        particles = next;
        state = next_state;
        notify(model, observers, step, cfg.dt, &particles, &state, Some(&report))?;
    }
    Ok(particles)
}

fn notify(
    model: &Model,
    observers: &mut [&mut dyn Observer],
    step: usize,
    dt: f64,
    particles: &ParticleSet,
    state: &EulerianState,
    report: Option<&StepReport>,
) -> Result<()> {
    let event = StepEvent {
        step,
        time: step as f64 * dt,
        model,
        particles,
        state,
        report,
    };
    for obs in observers.iter_mut() {
        obs.observe(&event)
            .map_err(|message| Error::Observer { step, message })?;
    }
    Ok(())
}
