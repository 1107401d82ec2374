//! Conservation monitors and numerical oracles for the canonical structure.
//!
//! The oracles work in the conjugate variables `(X_β, p_β = m̄_β/ΔS)`, in
//! which the particle equations read `Ẋ = ∂Ĥ/∂p`, `ṗ = −∂Ĥ/∂X`.

use nalgebra::{DMatrix, Vector2};

use crate::error::Result;
use crate::fem::CgOptions;
use crate::field::ParticleSet;
use crate::integrator::{explicit_euler_step, symplectic_euler_step, Observer, StepConfig, StepEvent, StepReport};
use crate::models::{EulerianState, Model};

/// Solver controls used by the oracles so that solve error stays far below
/// finite-difference noise.
pub const ORACLE_CG: CgOptions = CgOptions {
    tol: 1e-14,
    max_iter: 5000,
};

/// Fixed-point tolerance used inside [`check_symplectic`].
pub const ORACLE_FP_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub hamiltonian: f64,
    pub total_momentum: Vector2<f64>,
    /// `Σ_β D̄_β`.
    pub total_mass: f64,
    /// `Σ_k ν_k` with `ν = scatter(D̄)`; equals `Σ_β D̄_β/ΔS`.
    pub grid_mass: f64,
    pub fp_iterations: usize,
    pub cg_iterations: usize,
}

impl DiagnosticsRecord {
    pub fn is_finite(&self) -> bool {
        self.time.is_finite()
            && self.hamiltonian.is_finite()
            && self.total_momentum.iter().all(|v| v.is_finite())
            && self.total_mass.is_finite()
            && self.grid_mass.is_finite()
    }
}

/// Snapshot of the monitored quantities. Without a step report (the initial
/// state) the CG count is that of the velocity solve.
pub fn record(
    model: &Model,
    particles: &ParticleSet,
    state: &EulerianState,
    time: f64,
    report: Option<&StepReport>,
) -> DiagnosticsRecord {
    let grid_mass = match &state.frame.depth {
        Some(depth) => depth.scatter.sum(),
        None => state
            .frame
            .interp
            .scatter(particles.masses())
            .map(|s| s.sum())
            .unwrap_or(f64::NAN),
    };
    let (fp_iterations, cg_iterations) = match report {
        Some(r) => (r.fp_iterations, r.cg_iterations()),
        None => (0, state.cg_reports.iter().map(|r| r.iterations).sum()),
    };
    DiagnosticsRecord {
        time,
        hamiltonian: model.hamiltonian_of(state),
        total_momentum: particles.total_momentum(),
        total_mass: particles.total_mass(),
        grid_mass,
        fp_iterations,
        cg_iterations,
    }
}

/// Observer collecting a [`DiagnosticsRecord`] per event.
#[derive(Debug, Clone, Default)]
pub struct Recorder {
    pub records: Vec<DiagnosticsRecord>,
    /// Largest per-step CG iteration count of any single solve.
    pub max_cg_per_solve: usize,
    pub max_fp_iterations: usize,
}

impl Recorder {
    pub fn new() -> Self {
        Self::default()
    }

    /// `max_t |Ĥ(t) − Ĥ(0)|`.
    pub fn energy_drift(&self) -> f64 {
        let Some(first) = self.records.first() else {
            return 0.0;
        };
        self.records
            .iter()
            .map(|r| (r.hamiltonian - first.hamiltonian).abs())
            .fold(0.0, f64::max)
    }

    /// Largest single-step change of `Σ_β m̄_β`, in max norm.
    pub fn max_momentum_step(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| (w[1].total_momentum - w[0].total_momentum).amax())
            .fold(0.0, f64::max)
    }
}

impl Observer for Recorder {
    fn observe(&mut self, event: &StepEvent<'_>) -> std::result::Result<(), String> {
        let rec = record(event.model, event.particles, event.state, event.time, event.report);
        if !rec.is_finite() {
            return Err(format!("non-finite diagnostics at t = {}", rec.time));
        }
        if let Some(r) = event.report {
            self.max_cg_per_solve = self.max_cg_per_solve.max(r.max_cg_iterations());
            self.max_fp_iterations = self.max_fp_iterations.max(r.fp_iterations);
        }
        self.records.push(rec);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridEquationReport {
    pub momentum_residual: f64,
    pub continuity_residual: f64,
}

impl GridEquationReport {
    pub const TOLERANCE: f64 = 1e-9;

    pub fn max(&self) -> f64 {
        self.momentum_residual.max(self.continuity_residual)
    }

    pub fn passes(&self) -> bool {
        self.max() < Self::TOLERANCE
    }
}

/// Max-norm residuals of the grid-form EP equations at `particles`.
pub fn check_grid_equations(model: &Model, particles: &ParticleSet) -> Result<GridEquationReport> {
    let model = model.with_cg(ORACLE_CG);
    let state = model.velocity_solve(particles)?;
    let res = model.grid_ep_rhs(particles, &state)?;
    Ok(GridEquationReport {
        momentum_residual: res.momentum_max(),
        continuity_residual: res.continuity_max(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    /// `Ẋ` against `∂Ĥ/∂p`.
    pub position_error: f64,
    /// `ṗ` against `−∂Ĥ/∂X`.
    pub momentum_error: f64,
}

impl GradientCheck {
    pub fn max(&self) -> f64 {
        self.position_error.max(self.momentum_error)
    }
}

fn relative_max_error(analytic: &[f64], fd: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(fd)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = fd.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Compares `particle_rhs` with central differences of `Ĥ` in all `4n`
/// phase-space directions. Errors are relative to the max norm of each
/// finite-difference block.
pub fn check_gradients(model: &Model, particles: &ParticleSet, h: f64) -> Result<GradientCheck> {
    let model = model.with_cg(ORACLE_CG);
    let grid = *model.grid();
    let area = grid.cell_area();
    let state = model.velocity_solve(particles)?;
    let rhs = model.particle_rhs(particles, &state)?;

    let n = particles.len();
    let mut fd_x = Vec::with_capacity(2 * n);
    let mut fd_m = Vec::with_capacity(2 * n);
    let mut an_x = Vec::with_capacity(2 * n);
    let mut an_m = Vec::with_capacity(2 * n);
    for b in 0..n {
        for d in 0..2 {
            let energy_at = |dx: f64, dp: f64| -> Result<f64> {
                let mut xs = particles.positions().to_vec();
                let mut ms = particles.momenta().to_vec();
                xs[b][d] += dx;
                ms[b][d] += dp * area;
                model.hamiltonian(&particles.with_state(&grid, xs, ms)?)
            };
            let dh_dp = (energy_at(0.0, h)? - energy_at(0.0, -h)?) / (2.0 * h);
            let dh_dx = (energy_at(h, 0.0)? - energy_at(-h, 0.0)?) / (2.0 * h);
            fd_x.push(dh_dp);
            an_x.push(rhs.position[b][d]);
            fd_m.push(-dh_dx);
            an_m.push(rhs.momentum[b][d] / area);
        }
    }
    Ok(GradientCheck {
        position_error: relative_max_error(&an_x, &fd_x),
        momentum_error: relative_max_error(&an_m, &fd_m),
    })
}

/// One-step map whose symplecticity is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    SymplecticEuler,
    /// Forward Euler reference, not symplectic.
    ExplicitEuler,
}

fn step_map(model: &Model, p: &ParticleSet, cfg: &StepConfig, scheme: Scheme) -> Result<ParticleSet> {
    let state = model.velocity_solve(p)?;
    Ok(match scheme {
        Scheme::SymplecticEuler => symplectic_euler_step(model, p, &state, cfg)?.0,
        Scheme::ExplicitEuler => explicit_euler_step(model, p, &state, cfg.dt)?.0,
    })
}

/// `‖SᵀΩS − Ω‖_max` for the central-difference Jacobian `S` of one step in
/// the conjugate variables `(X, m̄/ΔS)`.
pub fn check_symplectic(
    model: &Model,
    particles: &ParticleSet,
    cfg: &StepConfig,
    h: f64,
    scheme: Scheme,
) -> Result<f64> {
    let model = model.with_cg(ORACLE_CG);
    let cfg = StepConfig {
        fp_tol: cfg.fp_tol.min(ORACLE_FP_TOL),
        fp_max_iter: cfg.fp_max_iter.max(200),
        ..*cfg
    };
    let grid = *model.grid();
    let area = grid.cell_area();
    let n = particles.len();
    let dim = 4 * n;

    let perturbed = |j: usize, s: f64| -> Result<ParticleSet> {
        let mut xs = particles.positions().to_vec();
        let mut ms = particles.momenta().to_vec();
        let (b, d) = ((j % (2 * n)) / 2, j % 2);
        if j < 2 * n {
            xs[b][d] += s;
        } else {
            ms[b][d] += s * area;
        }
        particles.with_state(&grid, xs, ms)
    };

    let mut jac = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let plus = step_map(&model, &perturbed(j, h)?, &cfg, scheme)?;
        let minus = step_map(&model, &perturbed(j, -h)?, &cfg, scheme)?;
        for b in 0..n {
            let dx = grid.min_image(plus.positions()[b], minus.positions()[b]);
            let dm = (plus.momenta()[b] - minus.momenta()[b]) / area;
            for d in 0..2 {
                jac[(2 * b + d, j)] = dx[d] / (2.0 * h);
                jac[(2 * n + 2 * b + d, j)] = dm[d] / (2.0 * h);
            }
        }
    }

    let mut omega = DMatrix::zeros(dim, dim);
    for i in 0..2 * n {
        omega[(i, 2 * n + i)] = 1.0;
        omega[(2 * n + i, i)] = -1.0;
    }
    let defect = jac.transpose() * &omega * &jac - &omega;
    Ok(defect.amax())
}
