mod common;

use common::{jittered_lattice, random_particles, ALPHA};
use epmesh_core::diagnostics::{ORACLE_CG, ORACLE_FP_TOL};
use epmesh_core::{
    check_gradients, check_symplectic, check_grid_equations, run, symplectic_euler_step, GridSpec, Model, ModelSpec,
    ParticleSet, Scheme, StepConfig,
};
use nalgebra::Vector2;

fn ep_model(n: usize) -> Model {
    Model::new(ModelSpec::ep_diff(ALPHA), GridSpec::periodic_square(n).unwrap(), ORACLE_CG).unwrap()
}

fn oracle_cfg(dt: f64) -> StepConfig {
    StepConfig {
        dt,
        fp_tol: ORACLE_FP_TOL,
        fp_max_iter: 200,
        cg_tol: ORACLE_CG.tol,
        cg_max_iter: ORACLE_CG.max_iter,
    }
}

fn phase_distance(g: &GridSpec, a: &ParticleSet, b: &ParticleSet) -> f64 {
    let area = g.cell_area();
    let mut d: f64 = 0.0;
    for k in 0..a.len() {
        d = d.max(g.min_image(a.positions()[k], b.positions()[k]).amax());
        d = d.max(((a.momenta()[k] - b.momenta()[k]) / area).amax());
    }
    d
}

/// Classical RK4 on the particle equations, `sub` substeps over `dt`.
fn rk4(model: &Model, p: &ParticleSet, dt: f64, sub: usize) -> ParticleSet {
    let g = *model.grid();
    let h = dt / sub as f64;
    let rhs = |q: &ParticleSet| {
        let s = model.velocity_solve(q).unwrap();
        model.particle_rhs(q, &s).unwrap()
    };
    let shift = |q: &ParticleSet, k: &epmesh_core::models::Tendencies, c: f64| {
        let xs = q.positions().iter().zip(&k.position).map(|(x, v)| x + v * c).collect();
        let ms = q.momenta().iter().zip(&k.momentum).map(|(m, f)| m + f * c).collect();
        q.with_state(&g, xs, ms).unwrap()
    };
    let mut q = p.clone();
    for _ in 0..sub {
        let k1 = rhs(&q);
        let k2 = rhs(&shift(&q, &k1, 0.5 * h));
        let k3 = rhs(&shift(&q, &k2, 0.5 * h));
        let k4 = rhs(&shift(&q, &k3, h));
        let xs = (0..q.len())
            .map(|b| q.positions()[b] + (k1.position[b] + 2.0 * k2.position[b] + 2.0 * k3.position[b] + k4.position[b]) * (h / 6.0))
            .collect();
        let ms = (0..q.len())
            .map(|b| q.momenta()[b] + (k1.momentum[b] + 2.0 * k2.momentum[b] + 2.0 * k3.momentum[b] + k4.momentum[b]) * (h / 6.0))
            .collect();
        q = q.with_state(&g, xs, ms).unwrap();
    }
    q
}

fn one_step(model: &Model, p: &ParticleSet, dt: f64) -> ParticleSet {
    let state = model.velocity_solve(p).unwrap();
    symplectic_euler_step(model, p, &state, &oracle_cfg(dt)).unwrap().0
}

#[test]
fn local_error_is_second_order() {
    let model = ep_model(8);
    let p = random_particles(model.grid(), 6, 3, 0.5);
    let err = |dt: f64| phase_distance(model.grid(), &one_step(&model, &p, dt), &rk4(&model, &p, dt, 64));
    let (e1, e2) = (err(0.04), err(0.02));
    let ratio = e1 / e2;
    assert!((3.4..=4.6).contains(&ratio), "e(dt)={e1:e} e(dt/2)={e2:e} ratio {ratio}");
}

#[test]
fn rk4_reference_is_converged() {
    let model = ep_model(8);
    let p = random_particles(model.grid(), 6, 3, 0.5);
    let a = rk4(&model, &p, 0.04, 64);
    let b = rk4(&model, &p, 0.04, 128);
    assert!(phase_distance(model.grid(), &a, &b) < 1e-10);
}

#[test]
fn zero_momentum_is_a_fixed_point() {
    let model = ep_model(8);
    let p = random_particles(model.grid(), 12, 5, 0.0);
    let mut energies = Vec::new();
    let mut obs = |e: &epmesh_core::StepEvent<'_>| -> Result<(), String> {
        energies.push(e.model.hamiltonian_of(e.state));
        Ok(())
    };
    let end = run(&model, p.clone(), &StepConfig::default(), 100, &mut [&mut obs]).unwrap();
    assert_eq!(end.positions(), p.positions());
    assert_eq!(end.momenta(), p.momenta());
    assert_eq!(energies.len(), 101);
    assert!(energies.iter().all(|&h| h == 0.0));
}

#[test]
fn zero_step_is_identity() {
    let model = ep_model(8);
    let p = random_particles(model.grid(), 6, 9, 1.0);
    let q = one_step(&model, &p, 0.0);
    assert_eq!(q.positions(), p.positions());
    assert_eq!(q.momenta(), p.momenta());
}

#[test]
fn fixed_point_contracts_at_rate_proportional_to_dt() {
    let model = ep_model(8);
    let p = random_particles(model.grid(), 10, 4, 1.0);
    let rate = |dt: f64| {
        let state = model.velocity_solve(&p).unwrap();
        let (_, _, report) = symplectic_euler_step(&model, &p, &state, &oracle_cfg(dt)).unwrap();
        let inc = &report.increments;
        assert!(inc.len() >= 3, "{inc:?}");
        inc[2] / inc[1]
    };
    let (r1, r2) = (rate(0.04), rate(0.02));
    assert!(r1 < 0.5 && r2 < r1, "{r1} {r2}");
    let ratio = r1 / r2;
    assert!((1.4..=2.8).contains(&ratio), "contraction ratio {ratio}");
}

#[test]
fn symplectic_defect_small_and_explicit_grows() {
    let model = ep_model(8);
    let p = random_particles(model.grid(), 4, 17, 1.0);
    let cfg = oracle_cfg(0.02);
    let sympl = check_symplectic(&model, &p, &cfg, 1e-5, Scheme::SymplecticEuler).unwrap();
    assert!(sympl < 1e-5, "{sympl}");
    let e1 = check_symplectic(&model, &p, &cfg, 1e-5, Scheme::ExplicitEuler).unwrap();
    let e2 = check_symplectic(&model, &p, &oracle_cfg(0.04), 1e-5, Scheme::ExplicitEuler).unwrap();
    assert!(e1 > 100.0 * sympl, "{e1} vs {sympl}");
    assert!(e2 > 2.0 * e1, "{e2} vs {e1}");
    let still = check_symplectic(&model, &p, &oracle_cfg(0.0), 1e-5, Scheme::SymplecticEuler).unwrap();
    assert!(still < 1e-9, "{still}");
}

#[test]
fn sw_alpha_gradients_and_grid_equations() {
    let g = GridSpec::periodic_square(8).unwrap();
    let model = Model::new(ModelSpec::sw_alpha(ALPHA, 9.81), g, ORACLE_CG).unwrap();
    let p = jittered_lattice(&g, 21, g.cell_area());
    let grad = check_gradients(&model, &p, 1e-6).unwrap();
    assert!(grad.max() < 1e-5, "{grad:?}");
    assert!(check_grid_equations(&model, &p).unwrap().passes());
}

#[test]
fn ep_diff_grid_equations_hold() {
    let model = ep_model(8);
    for seed in 0..3 {
        let p = random_particles(model.grid(), 10, seed, 1.0);
        let r = check_grid_equations(&model, &p).unwrap();
        assert!(r.passes(), "{r:?}");
    }
}

/// The total momentum rate equals `-ΔS d/dc H(X + c)`, the derivative of the
/// energy under a rigid shift. It is not zero: the basis is attached to the
/// grid, so only lattice shifts are symmetries.
#[test]
fn momentum_rate_matches_shift_derivative() {
    let model = ep_model(8);
    let g = *model.grid();
    let p = random_particles(&g, 10, 2, 1.0);
    let state = model.velocity_solve(&p).unwrap();
    let total: Vector2<f64> = model.particle_rhs(&p, &state).unwrap().momentum.iter().sum();
    let h = 1e-6;
    for d in 0..2 {
        let shifted = |s: f64| {
            let xs = p.positions().iter().map(|x| {
                let mut y = *x;
                y[d] += s;
                y
            });
            model.hamiltonian(&p.with_state(&g, xs.collect(), p.momenta().to_vec()).unwrap()).unwrap()
        };
        let dh = (shifted(h) - shifted(-h)) / (2.0 * h);
        let expected = -g.cell_area() * dh;
        assert!((total[d] - expected).abs() < 1e-6 * (1.0 + expected.abs()), "{} vs {expected}", total[d]);
    }
    assert!(total.norm() > 1e-6);
}
