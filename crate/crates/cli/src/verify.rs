//! Oracle suite behind `epmesh verify`.

use std::fmt;

use epmesh_core::calculus::Interpolation;
use epmesh_core::grid::BasisKind;
use epmesh_core::{
    check_gradients, check_symplectic, check_grid_equations, run, CgOptions, GridField, GridSpec, Model,
    ModelSpec, ParticleSet, Scheme, StepConfig,
};
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::init::{init_particles_uniform, init_uniform_flow, jitter};

pub const ALPHA: f64 = 0.3133;
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Size {
    Tiny,
    Small,
}

impl Size {
    fn nodes(self) -> usize {
        match self {
            Size::Tiny => 8,
            Size::Small => 16,
        }
    }

    fn trials(self) -> usize {
        match self {
            Size::Tiny => 1000,
            Size::Small => 5000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub observed: f64,
    pub tolerance: f64,
    /// Informational checks are printed but never fail the suite.
    pub informational: bool,
}

impl Check {
    fn new(name: &'static str, observed: f64, tolerance: f64) -> Self {
        Self {
            name,
            observed,
            tolerance,
            informational: false,
        }
    }

    pub fn passed(&self) -> bool {
        self.observed < self.tolerance
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match (self.informational, self.passed()) {
            (true, _) => "info",
            (false, true) => "ok",
            (false, false) => "FAIL",
        };
        write!(f, "[{tag:>4}] {:<44} observed {:.3e}  tolerance {:.1e}", self.name, self.observed, self.tolerance)
    }
}

fn random_particles(grid: &GridSpec, n: usize, rng: &mut ChaCha8Rng) -> ParticleSet {
    let xs = (0..n)
        .map(|_| Vector2::new(rng.random_range(0.0..grid.lx()), rng.random_range(0.0..grid.ly())))
        .collect();
    let ms = (0..n)
        .map(|_| Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    ParticleSet::new(grid, xs, ms, vec![1.0; n]).expect("valid random particles")
}

/// Jittered lattice with random momenta; keeps `D̃ > 0` for SW-α.
fn sw_particles(grid: &GridSpec, rng: &mut ChaCha8Rng) -> ParticleSet {
    let lattice = init_particles_uniform(grid, 1, 1.0).expect("lattice");
    let lattice = jitter(&lattice, grid, 1, 0.3, rng.random()).expect("jitter");
    let scale = grid.cell_area();
    let ms = (0..lattice.len())
        .map(|_| Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale)
        .collect();
    lattice.with_momenta(ms).expect("momenta")
}

pub fn models(grid: GridSpec) -> epmesh_core::Result<(Model, Model)> {
    let cg = CgOptions::default();
    Ok((
        Model::new(ModelSpec::ep_diff(ALPHA), grid, cg)?,
        Model::new(ModelSpec::sw_alpha(ALPHA, GRAVITY), grid, cg)?,
    ))
}

fn calculus_checks(grid: &GridSpec, trials: usize, rng: &mut ChaCha8Rng) -> Vec<Check> {
    let mut pou: f64 = 0.0;
    let mut grad: f64 = 0.0;
    for _ in 0..trials {
        let p = Vector2::new(rng.random_range(0.0..grid.lx()), rng.random_range(0.0..grid.ly()));
        let mut s = 0.0;
        let mut g = Vector2::zeros();
        for k in grid.support_nodes(p, BasisKind::Particle) {
            s += grid.psi_eval(k, p).expect("node");
            g += grid.psi_grad(k, p).expect("node");
        }
        pou = pou.max((s - 1.0).abs());
        grad = grad.max(g.amax());
    }

    let mut adjoint: f64 = 0.0;
    for _ in 0..trials / 10 {
        let p = random_particles(grid, 5, rng);
        let interp = Interpolation::new(grid, p.positions());
        let g = GridField::from_values(*grid, (0..grid.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .expect("field");
        let lhs: f64 = interp.scatter_div(p.momenta()).expect("scatter").field().dot(&g);
        let rhs: f64 = -interp
            .gather_grad(&g)
            .expect("gather")
            .iter()
            .zip(p.momenta())
            .map(|(a, b)| a.dot(b) / grid.cell_area())
            .sum::<f64>();
        let scale = 1.0 + rhs.abs();
        adjoint = adjoint.max((lhs - rhs).abs() / scale);
    }
    vec![
        Check::new("partition of unity |sum psi - 1|", pou, 1e-12),
        Check::new("gradient sum |sum grad psi|", grad, 1e-12),
        Check::new("divergence/gradient adjointness", adjoint, 1e-12),
    ]
}

fn rigid_translation_spread(grid: GridSpec, steps: usize) -> epmesh_core::Result<f64> {
    let (model, _) = models(grid)?;
    let lattice = init_particles_uniform(&grid, 4, 1.0)?;
    let p0 = init_uniform_flow(&grid, &lattice, 4, Vector2::new(0.7, -0.4))?;
    let end = run(&model, p0.clone(), &StepConfig::default(), steps, &mut [])?;
    let disp: Vec<Vector2<f64>> = end
        .positions()
        .iter()
        .zip(p0.positions())
        .map(|(a, b)| grid.min_image(*a, *b))
        .collect();
    let first = disp[0];
    Ok(disp.iter().map(|d| (d - first).amax()).fold(0.0, f64::max))
}

/// Runs the oracle suite. Solver failures abort with an error.
pub fn verify(size: Size, seed: u64) -> epmesh_core::Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = GridSpec::periodic_square(size.nodes())?;
    let (ep, sw) = models(grid)?;
    let mut checks = calculus_checks(&grid, size.trials(), &mut rng);

    let p_ep = random_particles(&grid, 10, &mut rng);
    let p_sw = sw_particles(&grid, &mut rng);
    checks.push(Check::new("EP-Diff FD gradient (rel)", check_gradients(&ep, &p_ep, 1e-6)?.max(), 1e-6));
    checks.push(Check::new("SW-alpha FD gradient (rel)", check_gradients(&sw, &p_sw, 1e-6)?.max(), 1e-5));
    checks.push(Check::new("EP-Diff grid EP residual", check_grid_equations(&ep, &p_ep)?.max(), 1e-9));
    checks.push(Check::new("SW-alpha grid EP residual", check_grid_equations(&sw, &p_sw)?.max(), 1e-9));

    let cfg = StepConfig {
        dt: 0.02,
        ..StepConfig::default()
    };
    let tiny = random_particles(&GridSpec::periodic_square(8)?, 4, &mut rng);
    let (ep8, _) = models(GridSpec::periodic_square(8)?)?;
    let sympl = check_symplectic(&ep8, &tiny, &cfg, 1e-5, Scheme::SymplecticEuler)?;
    let explicit = check_symplectic(&ep8, &tiny, &cfg, 1e-5, Scheme::ExplicitEuler)?;
    checks.push(Check::new("symplectic Euler |S'JS - J|", sympl, 1e-5));
    checks.push(Check {
        informational: true,
        ..Check::new("explicit Euler |S'JS - J| (reference)", explicit, 1e-5)
    });
    checks.push(Check::new("rigid translation spread, 20 steps", rigid_translation_spread(grid, 20)?, 1e-10));

    let state = ep.velocity_solve(&p_ep)?;
    let rhs = ep.particle_rhs(&p_ep, &state)?;
    let total: Vector2<f64> = rhs.momentum.iter().sum();
    let scale: f64 = p_ep.momenta().iter().map(|m| m.norm()).sum();
    checks.push(Check {
        informational: true,
        ..Check::new("momentum rate |sum dm/dt| / sum|m|", total.norm() / scale, 1e-10)
    });
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_suite_passes() {
        let checks = verify(Size::Tiny, 1).unwrap();
        for c in &checks {
            assert!(c.informational || c.passed(), "{c}");
        }
        let explicit = checks.iter().find(|c| c.name.starts_with("explicit")).unwrap();
        let sympl = checks.iter().find(|c| c.name.starts_with("symplectic")).unwrap();
        assert!(explicit.observed > 10.0 * sympl.observed);
    }
}
