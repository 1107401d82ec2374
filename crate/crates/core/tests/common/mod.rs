#![allow(dead_code)]

use epmesh_core::{GridSpec, ParticleSet};
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ALPHA: f64 = 0.3133;

pub fn random_particles(g: &GridSpec, n: usize, seed: u64, scale: f64) -> ParticleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = (0..n)
        .map(|_| Vector2::new(rng.random_range(0.0..g.lx()), rng.random_range(0.0..g.ly())))
        .collect();
    let ms = (0..n)
        .map(|_| Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale)
        .collect();
    ParticleSet::new(g, xs, ms, vec![1.0; n]).unwrap()
}

/// One particle per cell, jittered by up to 0.3 cells, unit depth.
pub fn jittered_lattice(g: &GridSpec, seed: u64, scale: f64) -> ParticleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::new();
    let mut ms = Vec::new();
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let jx = rng.random_range(-0.3..0.3);
            let jy = rng.random_range(-0.3..0.3);
            xs.push(Vector2::new((i as f64 + 0.5 + jx) * g.dx(), (j as f64 + 0.5 + jy) * g.dy()));
            ms.push(Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale);
        }
    }
    let n = xs.len();
    ParticleSet::new(g, xs, ms, vec![g.cell_area(); n]).unwrap()
}
