//! Periodic rectangular grid and the two basis families living on it.
//!
//! Particles talk to the grid through `ψ_k`, the tensor product of cubic
//! B-splines centred on node `k` (support 4×4 cells). Finite-element matrices
//! are assembled over `N_k`, the bilinear hat on quadrilaterals (support 2×2
//! cells). Every evaluation uses the minimal-image difference between the
//! evaluation point and the node, so positions are always kept wrapped.

use nalgebra::Vector2;

use crate::error::{Error, Result};

/// Smallest admissible node count per direction. Below this the cubic
/// B-spline support wraps onto itself around the torus.
pub const MIN_NODES: usize = 8;

/// Which basis family a stencil or support query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// Tensor cubic B-spline `ψ_k`, 16 nodes per point.
    Particle,
    /// Bilinear finite-element hat `N_k`, 4 nodes per point.
    Fe,
}

impl BasisKind {
    pub fn width(self) -> usize {
        match self {
            BasisKind::Particle => 4,
            BasisKind::Fe => 2,
        }
    }
}

/// Uniform periodic grid on `[0, lx) × [0, ly)`.
///
/// Node `k = j * nx + i` sits at `(i * dx, j * dy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
}

impl GridSpec {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "domain lengths must be positive and finite, got {lx} x {ly}"
            )));
        }
        if nx < MIN_NODES || ny < MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_NODES} nodes per direction, got {nx} x {ny}"
            )));
        }
        Ok(Self { lx, ly, nx, ny })
    }

    /// Square `2π × 2π` grid with `n × n` nodes.
    pub fn periodic_square(n: usize) -> Result<Self> {
        let l = 2.0 * std::f64::consts::PI;
        Self::new(l, l, n, n)
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// Cell measure `ΔS = dx · dy`.
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    /// Total number of nodes `m`.
    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node_coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn node_position(&self, k: usize) -> Vector2<f64> {
        let (i, j) = self.node_coords(k);
        Vector2::new(i as f64 * self.dx(), j as f64 * self.dy())
    }

    /// Canonical representative of `p` on the torus.
    pub fn wrap(&self, p: Vector2<f64>) -> Result<Vector2<f64>> {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::NonFinite(format!("position ({}, {})", p.x, p.y)));
        }
        Ok(Vector2::new(wrap_coord(p.x, self.lx), wrap_coord(p.y, self.ly)))
    }

    /// Minimal-image difference `a - b`, each component in `[-L/2, L/2]`.
    pub fn min_image(&self, a: Vector2<f64>, b: Vector2<f64>) -> Vector2<f64> {
        let mut d = a - b;
        d.x -= self.lx * (d.x / self.lx).round();
        d.y -= self.ly * (d.y / self.ly).round();
        d
    }

    fn check_node(&self, k: usize) -> Result<()> {
        if k >= self.node_count() {
            return Err(Error::NodeOutOfRange {
                index: k,
                count: self.node_count(),
            });
        }
        Ok(())
    }

    /// `ψ_k(p)`, the tensor cubic B-spline centred on node `k`.
    pub fn psi_eval(&self, k: usize, p: Vector2<f64>) -> Result<f64> {
        self.check_node(k)?;
        let d = self.min_image(p, self.node_position(k));
        Ok(bspline3(d.x / self.dx()) * bspline3(d.y / self.dy()))
    }

    /// Gradient of `ψ_k` with respect to the evaluation point `p`.
    pub fn psi_grad(&self, k: usize, p: Vector2<f64>) -> Result<Vector2<f64>> {
        self.check_node(k)?;
        let d = self.min_image(p, self.node_position(k));
        let (tx, ty) = (d.x / self.dx(), d.y / self.dy());
        Ok(Vector2::new(
            bspline3_deriv(tx) * bspline3(ty) / self.dx(),
            bspline3(tx) * bspline3_deriv(ty) / self.dy(),
        ))
    }

    /// `N_k(p)`, the bilinear hat on node `k`.
    pub fn fe_eval(&self, k: usize, p: Vector2<f64>) -> Result<f64> {
        self.check_node(k)?;
        let d = self.min_image(p, self.node_position(k));
        Ok(hat(d.x / self.dx()) * hat(d.y / self.dy()))
    }

    /// Nodes whose basis function may be nonzero at `p`, row-major
    /// (y outer, x inner), wrapped periodically.
    pub fn support_nodes(&self, p: Vector2<f64>, kind: BasisKind) -> Vec<usize> {
        let s = Stencil::new(self, p, kind);
        let w = kind.width();
        let mut out = Vec::with_capacity(w * w);
        for b in 0..w {
            for a in 0..w {
                out.push(self.node_index(s.ix[a], s.iy[b]));
            }
        }
        out
    }
}

fn wrap_coord(x: f64, l: f64) -> f64 {
    let r = x.rem_euclid(l);
    // rem_euclid can round up to exactly l for tiny negative inputs
    if r >= l {
        0.0
    } else {
        r
    }
}

/// Uniform cubic B-spline with unit knot spacing, support `(-2, 2)`.
#[inline]
pub fn bspline3(t: f64) -> f64 {
    let a = t.abs();
    if a < 1.0 {
        2.0 / 3.0 - a * a + 0.5 * a * a * a
    } else if a < 2.0 {
        let r = 2.0 - a;
        r * r * r / 6.0
    } else {
        0.0
    }
}

#[inline]
pub fn bspline3_deriv(t: f64) -> f64 {
    let a = t.abs();
    let d = if a < 1.0 {
        -2.0 * a + 1.5 * a * a
    } else if a < 2.0 {
        let r = 2.0 - a;
        -0.5 * r * r
    } else {
        0.0
    };
    d * t.signum()
}

/// Linear hat with unit spacing, support `(-1, 1)`.
#[inline]
pub fn hat(t: f64) -> f64 {
    (1.0 - t.abs()).max(0.0)
}

/// Per-point interpolation stencil: the wrapped node columns/rows touched by
/// a point, plus the 1D weights and their derivatives (already divided by the
/// spacing). Unused trailing slots are zero for the bilinear kind.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub ix: [usize; 4],
    pub iy: [usize; 4],
    pub wx: [f64; 4],
    pub wy: [f64; 4],
    pub dwx: [f64; 4],
    pub dwy: [f64; 4],
}

impl Stencil {
    /// `p` must already be wrapped.
    pub fn new(grid: &GridSpec, p: Vector2<f64>, kind: BasisKind) -> Self {
        let (ix, wx, dwx) = axis_weights(p.x / grid.dx(), grid.nx(), grid.dx(), kind);
        let (iy, wy, dwy) = axis_weights(p.y / grid.dy(), grid.ny(), grid.dy(), kind);
        Self {
            ix,
            iy,
            wx,
            wy,
            dwx,
            dwy,
        }
    }
}

fn axis_weights(u: f64, n: usize, h: f64, kind: BasisKind) -> ([usize; 4], [f64; 4], [f64; 4]) {
    let base = u.floor();
    let s = u - base;
    let base = base as i64;
    let n_i = n as i64;
    let mut idx = [0usize; 4];
    let mut w = [0.0; 4];
    let mut dw = [0.0; 4];
    match kind {
        BasisKind::Particle => {
            for a in 0..4 {
                // node offset relative to the cell's left node: -1, 0, 1, 2
                let off = a as i64 - 1;
                idx[a] = (base + off).rem_euclid(n_i) as usize;
                let t = s - off as f64;
                w[a] = bspline3(t);
                dw[a] = bspline3_deriv(t) / h;
            }
        }
        BasisKind::Fe => {
            idx[0] = base.rem_euclid(n_i) as usize;
            idx[1] = (base + 1).rem_euclid(n_i) as usize;
            w[0] = 1.0 - s;
            w[1] = s;
            dw[0] = -1.0 / h;
            dw[1] = 1.0 / h;
        }
    }
    (idx, w, dw)
}
