//! Bilinear finite-element matrices on the periodic grid and a
//! Jacobi-preconditioned conjugate-gradient solver.
//!
//! All element integrals use 2×2 Gauss quadrature. Per direction the
//! integrands are at most cubic (weight × product of two hats), so the
//! quadrature is exact for the mass, Helmholtz and density-weighted Helmholtz
//! matrices alike.

use std::fmt;

use nalgebra::{DMatrix, Vector2};

use crate::error::{Error, Result};
use crate::field::{FieldValue, GridField, ScalarField, VectorField};
use crate::grid::GridSpec;

/// Row-compressed symmetric sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(columns, values)` of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// Applies the operator componentwise to a grid field.
    pub fn apply_field<T: FieldValue>(&self, f: &GridField<T>) -> GridField<T> {
        let mut out = GridField::zeros(*f.grid());
        for c in 0..T::COMPONENTS {
            out.set_component(c, &self.apply(&f.component(c)));
        }
        out
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|S_ij - S_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] = v;
            }
        }
        d
    }

    fn position(&self, i: usize, j: usize) -> usize {
        let (cols, _) = self.row(i);
        self.row_ptr[i]
            + cols
                .binary_search(&j)
                .expect("entry outside the nine-point pattern")
    }

    fn scaled_sum(&self, a: f64, other: &SparseOperator, b: f64) -> SparseOperator {
        debug_assert_eq!(self.col_idx, other.col_idx);
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v = a * *v + b * w;
        }
        out
    }
}

/// Nine-point periodic sparsity pattern shared by every bilinear matrix.
fn nine_point_pattern(grid: &GridSpec) -> SparseOperator {
    let (nx, ny) = (grid.nx() as i64, grid.ny() as i64);
    let n = grid.node_count();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(9 * n);
    row_ptr.push(0);
    for k in 0..n {
        let (i, j) = grid.node_coords(k);
        let mut cols: Vec<usize> = (-1..=1)
            .flat_map(|dj| {
                (-1..=1).map(move |di| {
                    let ii = (i as i64 + di).rem_euclid(nx) as usize;
                    let jj = (j as i64 + dj).rem_euclid(ny) as usize;
                    (ii, jj)
                })
            })
            .map(|(ii, jj)| grid.node_index(ii, jj))
            .collect();
        cols.sort_unstable();
        col_idx.extend(cols);
        row_ptr.push(col_idx.len());
    }
    let nnz = col_idx.len();
    SparseOperator {
        n,
        row_ptr,
        col_idx,
        values: vec![0.0; nnz],
    }
}

/// Local corner `c` of cell `(i, j)`: 0 = (i, j), 1 = (i+1, j), 2 = (i, j+1), 3 = (i+1, j+1).
fn element_nodes(grid: &GridSpec, i: usize, j: usize) -> [usize; 4] {
    let i1 = (i + 1) % grid.nx();
    let j1 = (j + 1) % grid.ny();
    [
        grid.node_index(i, j),
        grid.node_index(i1, j),
        grid.node_index(i, j1),
        grid.node_index(i1, j1),
    ]
}

type ElementMatrix = [[f64; 4]; 4];

struct GaussPoint {
    weight: f64,
    value: [f64; 4],
    grad: [Vector2<f64>; 4],
}

fn gauss_points(grid: &GridSpec) -> Vec<GaussPoint> {
    let g = 0.5 / 3f64.sqrt();
    let abscissae = [0.5 - g, 0.5 + g];
    let (dx, dy) = (grid.dx(), grid.dy());
    let mut out = Vec::with_capacity(4);
    for &eta in &abscissae {
        for &xi in &abscissae {
            let hx = [1.0 - xi, xi];
            let hy = [1.0 - eta, eta];
            let dhx = [-1.0 / dx, 1.0 / dx];
            let dhy = [-1.0 / dy, 1.0 / dy];
            let mut value = [0.0; 4];
            let mut grad = [Vector2::zeros(); 4];
            for c in 0..4 {
                let (a, b) = (c % 2, c / 2);
                value[c] = hx[a] * hy[b];
                grad[c] = Vector2::new(dhx[a] * hy[b], hx[a] * dhy[b]);
            }
            out.push(GaussPoint {
                weight: 0.25 * grid.cell_area(),
                value,
                grad,
            });
        }
    }
    out
}

fn element_matrix(grid: &GridSpec, f: impl Fn(&GaussPoint, usize, usize) -> f64) -> ElementMatrix {
    let mut e = [[0.0; 4]; 4];
    for q in gauss_points(grid) {
        for (a, row) in e.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v += q.weight * f(&q, a, b);
            }
        }
    }
    e
}

fn assemble_uniform(grid: &GridSpec, local: &ElementMatrix) -> SparseOperator {
    let mut op = nine_point_pattern(grid);
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let nodes = element_nodes(grid, i, j);
            for a in 0..4 {
                for b in 0..4 {
                    let p = op.position(nodes[a], nodes[b]);
                    op.values[p] += local[a][b];
                }
            }
        }
    }
    op
}

/// Mass matrix `M_ij = ∫ N_i N_j`.
pub fn assemble_mass(grid: &GridSpec) -> SparseOperator {
    let local = element_matrix(grid, |q, a, b| q.value[a] * q.value[b]);
    assemble_uniform(grid, &local)
}

/// Stiffness matrix `K_ij = ∫ ∇N_i · ∇N_j`.
pub fn assemble_stiffness(grid: &GridSpec) -> SparseOperator {
    let local = element_matrix(grid, |q, a, b| q.grad[a].dot(&q.grad[b]));
    assemble_uniform(grid, &local)
}

/// Modified Helmholtz matrix `A = M + α² K`.
pub fn assemble_helmholtz(grid: &GridSpec, alpha: f64) -> Result<SparseOperator> {
    check_alpha(alpha)?;
    let m = assemble_mass(grid);
    let k = assemble_stiffness(grid);
    Ok(m.scaled_sum(1.0, &k, alpha * alpha))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be finite and non-negative, got {alpha}"
        )));
    }
    Ok(())
}

/// Assembler for the density-weighted Helmholtz matrix
/// `B_ij = ∫ (Σ_k D̃_k N_k)(N_i N_j + α² ∇N_i · ∇N_j)`.
///
/// `B` is linear in `D̃`, so `∂B/∂D̃_k` is the same element tensor for every
/// state; it is precomputed once per grid.
#[derive(Debug, Clone)]
pub struct WeightedHelmholtz {
    grid: GridSpec,
    alpha: f64,
    pattern: SparseOperator,
    /// `tensor[c][a][b] = ∫ N_c (N_a N_b + α² ∇N_a · ∇N_b)` over one cell.
    tensor: [ElementMatrix; 4],
}

impl WeightedHelmholtz {
    pub fn new(grid: &GridSpec, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let a2 = alpha * alpha;
        let mut tensor = [[[0.0; 4]; 4]; 4];
        for (c, t) in tensor.iter_mut().enumerate() {
            *t = element_matrix(grid, |q, a, b| {
                q.value[c] * (q.value[a] * q.value[b] + a2 * q.grad[a].dot(&q.grad[b]))
            });
        }
        Ok(Self {
            grid: *grid,
            alpha,
            pattern: nine_point_pattern(grid),
            tensor,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Assembles `B(D̃)`; every node weight must be strictly positive.
    pub fn assemble(&self, depth: &ScalarField) -> Result<SparseOperator> {
        if depth.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let bad: Vec<usize> = depth
            .values()
            .iter()
            .enumerate()
            .filter(|(_, &d)| !(d > 0.0))
            .map(|(k, _)| k)
            .collect();
        if !bad.is_empty() {
            return Err(Error::NonPositiveWeight { nodes: bad });
        }
        Ok(self.assemble_unchecked(depth.values()))
    }

    /// `∂B/∂D̃_k`, i.e. `B` assembled with the unit weight on node `k`.
    pub fn derivative(&self, k: usize) -> SparseOperator {
        let mut w = vec![0.0; self.grid.node_count()];
        w[k] = 1.0;
        self.assemble_unchecked(&w)
    }

    fn assemble_unchecked(&self, weight: &[f64]) -> SparseOperator {
        let grid = &self.grid;
        let mut op = self.pattern.clone();
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let nodes = element_nodes(grid, i, j);
                let w = nodes.map(|k| weight[k]);
                for a in 0..4 {
                    for b in 0..4 {
                        let v: f64 = (0..4).map(|c| w[c] * self.tensor[c][a][b]).sum();
                        let p = op.position(nodes[a], nodes[b]);
                        op.values[p] += v;
                    }
                }
            }
        }
        op
    }

    /// `g_k = ½ ũ · (∂B/∂D̃_k) ũ` for every node `k`, summed over both
    /// velocity components.
    pub fn quadratic_derivative(&self, u: &VectorField) -> ScalarField {
        let grid = &self.grid;
        let mut out = vec![0.0; grid.node_count()];
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let nodes = element_nodes(grid, i, j);
                let uv = nodes.map(|k| u.values()[k]);
                for c in 0..4 {
                    let mut s = 0.0;
                    for a in 0..4 {
                        for b in 0..4 {
                            s += self.tensor[c][a][b] * uv[a].dot(&uv[b]);
                        }
                    }
                    out[nodes[c]] += 0.5 * s;
                }
            }
        }
        GridField::from_values(*grid, out).expect("node count matches")
    }
}

/// Conjugate-gradient controls. Tolerance is on `‖S x − b‖ / ‖b‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 500,
        }
    }
}

impl CgOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final true relative residual `‖S x − b‖ / ‖b‖`.
    pub residual: f64,
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} iterations, relative residual {:.3e}",
            self.iterations, self.residual
        )
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(op: &SparseOperator, b: &[f64], x: &[f64], r: &mut [f64]) {
    op.matvec(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

/// Solves `S x = b` by Jacobi-preconditioned CG. `x` holds the initial guess
/// on entry (warm start) and the solution on exit.
pub fn cg_solve(op: &SparseOperator, b: &[f64], x: &mut [f64], opts: &CgOptions) -> Result<SolveReport> {
    let n = op.dim();
    if b.len() != n || x.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: if b.len() != n { b.len() } else { x.len() },
        });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "CG tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let bnorm = norm(b);
    if !bnorm.is_finite() {
        return Err(Error::NonFinite("CG right-hand side".into()));
    }
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(SolveReport {
            iterations: 0,
            residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = op.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];

    residual(op, b, x, &mut r);
    let mut rel = norm(&r) / bnorm;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if rel <= opts.tol {
            break;
        }
        // (re)start from the current true residual
        for i in 0..n {
            z[i] = inv_diag[i] * r[i];
            p[i] = z[i];
        }
        let mut rz = dot(&r, &z);
        while iterations < opts.max_iter {
            op.matvec(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                break;
            }
            let step = rz / pq;
            for i in 0..n {
                x[i] += step * p[i];
                r[i] -= step * q[i];
            }
            iterations += 1;
            if norm(&r) / bnorm <= opts.tol {
                break;
            }
            for i in 0..n {
                z[i] = inv_diag[i] * r[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let prev = rel;
        residual(op, b, x, &mut r);
        rel = norm(&r) / bnorm;
        if !rel.is_finite() {
            return Err(Error::NonFinite("CG iterate".into()));
        }
        if rel > opts.tol && rel >= prev {
            // no progress from a fresh restart: at the rounding floor
            break;
        }
    }
    let report = SolveReport {
        iterations,
        residual: rel,
    };
    if rel <= opts.tol {
        Ok(report)
    } else {
        Err(Error::NotConverged(report))
    }
}

/// Componentwise solve `S f = rhs`, optionally warm-started from `guess`.
pub fn solve_field<T: FieldValue>(
    op: &SparseOperator,
    rhs: &GridField<T>,
    guess: Option<&GridField<T>>,
    opts: &CgOptions,
) -> Result<(GridField<T>, Vec<SolveReport>)> {
    let mut out = GridField::zeros(*rhs.grid());
    let mut reports = Vec::with_capacity(T::COMPONENTS);
    for c in 0..T::COMPONENTS {
        let b = rhs.component(c);
        let mut x = match guess {
            Some(g) => g.component(c),
            None => vec![0.0; b.len()],
        };
        reports.push(cg_solve(op, &b, &mut x, opts)?);
        out.set_component(c, &x);
    }
    Ok((out, reports))
}
