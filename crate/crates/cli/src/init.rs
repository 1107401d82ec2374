//! Initial particle configurations.

use epmesh_core::{GridSpec, ParticleSet, Result};
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{IcSpec, SimConfig};

/// Gaussian profiles are cut to exactly zero beyond this many widths.
const PROFILE_CUTOFF: f64 = 4.0;

fn side(per_cell: usize) -> usize {
    let p = (per_cell as f64).sqrt().round() as usize;
    assert_eq!(p * p, per_cell, "particles per cell must be a perfect square");
    p
}

/// Momentum weight that turns a velocity sample into `m̄_β` on the lattice:
/// `ΔS²/p²`.
pub fn lattice_weight(grid: &GridSpec, per_cell: usize) -> f64 {
    grid.cell_area() * grid.cell_area() / per_cell as f64
}

/// `p × p` particles per cell at offsets `((a+½)/p, (b+½)/p)`, at rest, with
/// `D̄_β = density · ΔS²/p²` so that `⟨D̄⟩ = density`.
pub fn init_particles_uniform(grid: &GridSpec, per_cell: usize, density: f64) -> Result<ParticleSet> {
    let p = side(per_cell);
    let mut positions = Vec::with_capacity(grid.node_count() * per_cell);
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            for b in 0..p {
                for a in 0..p {
                    positions.push(Vector2::new(
                        (i as f64 + (a as f64 + 0.5) / p as f64) * grid.dx(),
                        (j as f64 + (b as f64 + 0.5) / p as f64) * grid.dy(),
                    ));
                }
            }
        }
    }
    let n = positions.len();
    let mass = density * lattice_weight(grid, per_cell);
    ParticleSet::new(grid, positions, vec![Vector2::zeros(); n], vec![mass; n])
}

/// Displaces every particle uniformly by up to `fraction` of the sub-lattice
/// spacing per direction.
pub fn jitter(particles: &ParticleSet, grid: &GridSpec, per_cell: usize, fraction: f64, seed: u64) -> Result<ParticleSet> {
    if fraction == 0.0 {
        return Ok(particles.clone());
    }
    let p = side(per_cell) as f64;
    let (hx, hy) = (fraction * grid.dx() / p, fraction * grid.dy() / p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = particles
        .positions()
        .iter()
        .map(|x| x + Vector2::new(hx * rng.random_range(-1.0..1.0), hy * rng.random_range(-1.0..1.0)))
        .collect();
    particles.with_state(grid, positions, particles.momenta().to_vec())
}

/// Parameters of the colliding-strips velocity field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLines {
    pub amplitude: f64,
    pub width: f64,
    pub separation: f64,
    pub length: Option<f64>,
    pub offset: f64,
}

impl Default for TwoLines {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            width: 0.2,
            separation: std::f64::consts::PI / 2.0,
            length: None,
            offset: 0.0,
        }
    }
}

/// `(value, second derivative)` of `exp(−(s/w)²)`, cut off at
/// [`PROFILE_CUTOFF`] widths.
fn gaussian(s: f64, w: f64) -> (f64, f64) {
    if s.abs() > PROFILE_CUTOFF * w {
        return (0.0, 0.0);
    }
    let g = (-(s / w).powi(2)).exp();
    (g, (4.0 * s * s / w.powi(4) - 2.0 / (w * w)) * g)
}

impl TwoLines {
    fn along(&self, d: f64) -> (f64, f64) {
        match self.length {
            None => (1.0, 0.0),
            Some(l) => {
                let e = d.abs() - 0.5 * l;
                if e <= 0.0 {
                    (1.0, 0.0)
                } else {
                    gaussian(e, self.width)
                }
            }
        }
    }

    /// Strips `(x_center, y_center, sign)`; the left one moves in `+x`.
    fn strips(&self, grid: &GridSpec) -> [(f64, f64, f64); 2] {
        let (cx, cy) = (0.5 * grid.lx(), 0.5 * grid.ly());
        [
            (cx - 0.5 * self.separation, cy, 1.0),
            (cx + 0.5 * self.separation, cy + self.offset, -1.0),
        ]
    }

    /// Target velocity `u*` and `(1 − α²Δ) u*`, both exact.
    pub fn evaluate(&self, grid: &GridSpec, x: Vector2<f64>, alpha: f64) -> (Vector2<f64>, Vector2<f64>) {
        let mut u = 0.0;
        let mut w = 0.0;
        for (sx, sy, sign) in self.strips(grid) {
            let d = grid.min_image(x, Vector2::new(sx, sy));
            let (g, g2) = gaussian(d.x, self.width);
            let (t, t2) = self.along(d.y);
            let a = sign * self.amplitude;
            u += a * g * t;
            w += a * (g * t - alpha * alpha * (g2 * t + g * t2));
        }
        (Vector2::new(u, 0.0), Vector2::new(w, 0.0))
    }

    pub fn velocity(&self, grid: &GridSpec, x: Vector2<f64>) -> Vector2<f64> {
        self.evaluate(grid, x, 0.0).0
    }
}

/// Assigns `m̄_β = (ΔS²/p²) (1 − α²Δ)u*(X_β)`, so that the velocity solve
/// returns approximately `u*`.
pub fn init_two_lines(
    grid: &GridSpec,
    particles: &ParticleSet,
    per_cell: usize,
    alpha: f64,
    lines: &TwoLines,
) -> Result<ParticleSet> {
    let weight = lattice_weight(grid, per_cell);
    let momenta = particles
        .positions()
        .iter()
        .map(|&x| lines.evaluate(grid, x, alpha).1 * weight)
        .collect();
    particles.with_momenta(momenta)
}

/// Constant velocity: `m̄_β = (ΔS²/p²) u`.
pub fn init_uniform_flow(grid: &GridSpec, particles: &ParticleSet, per_cell: usize, u: Vector2<f64>) -> Result<ParticleSet> {
    let m = u * lattice_weight(grid, per_cell);
    particles.with_momenta(vec![m; particles.len()])
}

/// Reflection `x → Lx − x`, with the x-momentum reversed.
pub fn mirror_x(grid: &GridSpec, particles: &ParticleSet) -> Result<ParticleSet> {
    let positions = particles
        .positions()
        .iter()
        .map(|x| Vector2::new(grid.lx() - x.x, x.y))
        .collect();
    let momenta = particles
        .momenta()
        .iter()
        .map(|m| Vector2::new(-m.x, m.y))
        .collect();
    particles.with_state(grid, positions, momenta)
}

/// Builds the initial particle set described by `cfg`.
pub fn initial_particles(cfg: &SimConfig) -> Result<ParticleSet> {
    let grid = cfg.grid_spec();
    let per_cell = cfg.particles.per_cell;
    let lattice = init_particles_uniform(&grid, per_cell, cfg.particles.density)?;
    let lattice = jitter(&lattice, &grid, per_cell, cfg.particles.jitter, cfg.particles.seed)?;
    match &cfg.ic {
        IcSpec::Rest => Ok(lattice),
        IcSpec::UniformFlow { ux, uy } => init_uniform_flow(&grid, &lattice, per_cell, Vector2::new(*ux, *uy)),
        IcSpec::TwoLines {
            amplitude,
            width,
            separation,
            length,
            offset,
        } => {
            let lines = TwoLines {
                amplitude: *amplitude,
                width: *width,
                separation: *separation,
                length: *length,
                offset: *offset,
            };
            init_two_lines(&grid, &lattice, per_cell, cfg.model.alpha, &lines)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_counts_and_centres() {
        let g = GridSpec::periodic_square(8).unwrap();
        let p = init_particles_uniform(&g, 1, 1.0).unwrap();
        assert_eq!(p.len(), 64);
        assert!((p.positions()[0] - Vector2::new(0.5 * g.dx(), 0.5 * g.dy())).norm() < 1e-15);
        let p = init_particles_uniform(&g, 16, 1.0).unwrap();
        assert_eq!(p.len(), 64 * 16);
        assert!(p.momenta().iter().all(|m| *m == Vector2::zeros()));
    }

    #[test]
    fn profile_second_derivative_matches_fd() {
        let (w, h) = (0.3, 1e-4);
        for s in [-0.5, -0.1, 0.0, 0.2, 0.7] {
            let fd = (gaussian(s + h, w).0 - 2.0 * gaussian(s, w).0 + gaussian(s - h, w).0) / (h * h);
            assert!((fd - gaussian(s, w).1).abs() < 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn helmholtz_target_matches_fd_laplacian() {
        let g = GridSpec::periodic_square(32).unwrap();
        let lines = TwoLines {
            length: Some(2.0),
            offset: 0.4,
            ..TwoLines::default()
        };
        let alpha = 0.3133;
        let h = 1e-4;
        for x in [Vector2::new(2.3, 3.0), Vector2::new(3.9, 4.35), Vector2::new(2.4, 2.05)] {
            let u = |p: Vector2<f64>| lines.velocity(&g, p).x;
            let lap = (u(x + Vector2::new(h, 0.0)) + u(x - Vector2::new(h, 0.0)) + u(x + Vector2::new(0.0, h))
                + u(x - Vector2::new(0.0, h))
                - 4.0 * u(x))
                / (h * h);
            let w = lines.evaluate(&g, x, alpha).1.x;
            assert!((w - (u(x) - alpha * alpha * lap)).abs() < 1e-5, "{x}");
        }
    }

    #[test]
    fn zero_amplitude_gives_rest() {
        let g = GridSpec::periodic_square(8).unwrap();
        let p = init_particles_uniform(&g, 4, 1.0).unwrap();
        let lines = TwoLines {
            amplitude: 0.0,
            ..TwoLines::default()
        };
        let q = init_two_lines(&g, &p, 4, 0.3, &lines).unwrap();
        assert!(q.momenta().iter().all(|m| *m == Vector2::zeros()));
    }

    #[test]
    fn strips_approach_each_other() {
        let g = GridSpec::periodic_square(32).unwrap();
        let lines = TwoLines::default();
        let c = 0.5 * g.lx();
        let y = 0.5 * g.ly();
        assert!(lines.velocity(&g, Vector2::new(c - 0.5 * lines.separation, y)).x > 0.99);
        assert!(lines.velocity(&g, Vector2::new(c + 0.5 * lines.separation, y)).x < -0.99);
        assert_eq!(lines.velocity(&g, Vector2::new(0.1, y)).x, 0.0);
    }

    #[test]
    fn jitter_is_bounded_and_seeded() {
        let g = GridSpec::periodic_square(8).unwrap();
        let p = init_particles_uniform(&g, 4, 1.0).unwrap();
        let a = jitter(&p, &g, 4, 0.2, 7).unwrap();
        let b = jitter(&p, &g, 4, 0.2, 7).unwrap();
        assert_eq!(a.positions(), b.positions());
        for (x, y) in a.positions().iter().zip(p.positions()) {
            let d = g.min_image(*x, *y);
            assert!(d.x.abs() <= 0.2 * g.dx() / 2.0 + 1e-15);
            assert!(d.y.abs() <= 0.2 * g.dy() / 2.0 + 1e-15);
        }
    }

    #[test]
    fn mirror_maps_lattice_to_itself() {
        let g = GridSpec::periodic_square(8).unwrap();
        let p = init_particles_uniform(&g, 4, 1.0).unwrap();
        let q = mirror_x(&g, &p).unwrap();
        for x in q.positions() {
            assert!(p.positions().iter().any(|y| g.min_image(*x, *y).norm() < 1e-12));
        }
    }
}
