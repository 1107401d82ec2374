use epmesh::init::{init_particles_uniform, init_two_lines, init_uniform_flow, mirror_x, TwoLines};
use epmesh_core::calculus::{scatter_avg, MassSolver};
use epmesh_core::{CgOptions, GridSpec, Model, ModelSpec};
use nalgebra::Vector2;

const ALPHA: f64 = 0.3133;

#[test]
fn uniform_lattice_has_unit_density() {
    let g = GridSpec::periodic_square(16).unwrap();
    let p = init_particles_uniform(&g, 16, 1.0).unwrap();
    let model = Model::new(ModelSpec::ep_diff(ALPHA), g, CgOptions::default()).unwrap();
    let interp = epmesh_core::Interpolation::new(&g, p.positions());
    let d = scatter_avg(&interp, p.masses(), &MassSolver::new(model.mass(), CgOptions::with_tol(1e-12))).unwrap();
    for v in d.values() {
        assert!((v - 1.0).abs() < 1e-6);
    }
}

#[test]
fn two_lines_velocity_reproduces_target() {
    let g = GridSpec::periodic_square(64).unwrap();
    let lattice = init_particles_uniform(&g, 16, 1.0).unwrap();
    let lines = TwoLines::default();
    let p = init_two_lines(&g, &lattice, 16, ALPHA, &lines).unwrap();
    let model = Model::new(ModelSpec::ep_diff(ALPHA), g, CgOptions::default()).unwrap();
    let u = model.velocity_solve(&p).unwrap().velocity;
    let mut err = 0.0;
    let mut norm = 0.0;
    for (k, v) in u.values().iter().enumerate() {
        let target = lines.velocity(&g, g.node_position(k));
        err += (v - target).norm_squared();
        norm += target.norm_squared();
    }
    let rel = (err / norm).sqrt();
    assert!(rel < 0.05, "relative L2 error {rel}");
}

#[test]
fn two_lines_momentum_vanishes_away_from_strips() {
    let g = GridSpec::periodic_square(32).unwrap();
    let lattice = init_particles_uniform(&g, 4, 1.0).unwrap();
    let lines = TwoLines::default();
    let p = init_two_lines(&g, &lattice, 4, ALPHA, &lines).unwrap();
    let c = 0.5 * g.lx();
    for (x, m) in p.positions().iter().zip(p.momenta()) {
        let near = [c - 0.5 * lines.separation, c + 0.5 * lines.separation]
            .iter()
            .any(|s| (x.x - s).abs() <= 4.0 * lines.width);
        if !near {
            assert_eq!(*m, Vector2::zeros());
        }
        assert_eq!(m.y, 0.0);
    }
}

#[test]
fn mirror_image_has_same_energy() {
    let g = GridSpec::periodic_square(32).unwrap();
    let lattice = init_particles_uniform(&g, 16, 1.0).unwrap();
    let lines = TwoLines {
        length: Some(2.5),
        ..TwoLines::default()
    };
    let p = init_two_lines(&g, &lattice, 16, ALPHA, &lines).unwrap();
    let model = Model::new(ModelSpec::ep_diff(ALPHA), g, CgOptions::with_tol(1e-12)).unwrap();
    let h = model.hamiltonian(&p).unwrap();
    let h_mirror = model.hamiltonian(&mirror_x(&g, &p).unwrap()).unwrap();
    assert!(h > 0.0);
    assert!((h - h_mirror).abs() < 1e-10 * h.max(1.0), "{h} vs {h_mirror}");
}

#[test]
fn uniform_flow_velocity_is_exact() {
    let g = GridSpec::periodic_square(16).unwrap();
    let lattice = init_particles_uniform(&g, 9, 1.0).unwrap();
    let p = init_uniform_flow(&g, &lattice, 9, Vector2::new(0.25, -1.5)).unwrap();
    let model = Model::new(ModelSpec::ep_diff(ALPHA), g, CgOptions::default()).unwrap();
    let u = model.velocity_solve(&p).unwrap().velocity;
    for v in u.values() {
        assert!((v - Vector2::new(0.25, -1.5)).norm() < 1e-8);
    }
}
