//! Unit square, MAC layout and boundary parametrisation.
//!
//! Arrays are `DMatrix` indexed `(j, i)`: row `j` runs along `y`, column `i`
//! along `x`. Face velocities:
//!
//! * `u` (x-component) at `(i h, (j + 1/2) h)`, shape `n x (n + 1)`;
//! * `v` (y-component) at `((i + 1/2) h, j h)`, shape `(n + 1) x n`.
//!
//! Stream functions live on nodes `(i h, j h)`, pressures on cell centres.
//! The boundary is parametrised counter-clockwise by arclength from the
//! origin; node `k` sits at `s = k h` and segment `k` joins nodes `k` and
//! `k + 1`.

use std::f64::consts::PI;
use std::sync::Arc;

use ctrlmix_core::{Error, Result};
use nalgebra::DMatrix;

/// Diagonalisation of a 1-D second-difference operator.
#[derive(Debug, Clone)]
struct Transform {
    fwd: DMatrix<f64>,
    inv: DMatrix<f64>,
    eig: Vec<f64>,
}

impl Transform {
    fn build(m: usize, h: f64, phase: impl Fn(usize, usize) -> f64, wave: impl Fn(usize) -> f64) -> Self {
        let fwd = DMatrix::from_fn(m, m, phase);
        let inv = fwd
            .clone()
            .try_inverse()
            .expect("trigonometric transform is invertible");
        let eig = (0..m)
            .map(|k| {
                let s = (wave(k)).sin();
                -4.0 / (h * h) * s * s
            })
            .collect();
        Self { fwd, inv, eig }
    }

    /// Dirichlet at both ends of a node row with `n` cells (`n - 1` unknowns).
    fn dst_nodes(n: usize, h: f64) -> Self {
        let nf = n as f64;
        Self::build(
            n - 1,
            h,
            |k, i| (PI * (k + 1) as f64 * (i + 1) as f64 / nf).sin(),
            |k| PI * (k + 1) as f64 / (2.0 * nf),
        )
    }

    /// Dirichlet half a cell beyond both ends of a row of `n` centres.
    fn dst_centres(n: usize, h: f64) -> Self {
        let nf = n as f64;
        Self::build(
            n,
            h,
            |k, i| (PI * (k + 1) as f64 * (i as f64 + 0.5) / nf).sin(),
            |k| PI * (k + 1) as f64 / (2.0 * nf),
        )
    }

    /// Homogeneous Neumann on a row of `n` centres.
    fn dct_centres(n: usize, h: f64) -> Self {
        let nf = n as f64;
        Self::build(
            n,
            h,
            |k, i| (PI * k as f64 * (i as f64 + 0.5) / nf).cos(),
            |k| PI * k as f64 / (2.0 * nf),
        )
    }
}

/// Solver for `(a + b (D_yy + D_xx)) X = F` on a tensor grid.
#[derive(Debug, Clone)]
struct Separable {
    y: Transform,
    x: Transform,
}

impl Separable {
    fn solve(&self, f: &DMatrix<f64>, a: f64, b: f64) -> DMatrix<f64> {
        let mut hat = &self.y.fwd * f * self.x.fwd.transpose();
        for i in 0..hat.ncols() {
            for j in 0..hat.nrows() {
                let d = a + b * (self.y.eig[j] + self.x.eig[i]);
                hat[(j, i)] = if d.abs() < 1e-300 { 0.0 } else { hat[(j, i)] / d };
            }
        }
        &self.y.inv * hat * self.x.inv.transpose()
    }
}

#[derive(Debug)]
struct Ops {
    nodes: Separable,
    cells: Separable,
    u_faces: Separable,
    v_faces: Separable,
}

/// The four sides, counter-clockwise from the bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }

    pub fn tangent(self) -> [f64; 2] {
        let n = self.normal();
        [-n[1], n[0]]
    }
}

#[derive(Debug, Clone)]
pub struct SquareDomain {
    pub n: usize,
    pub h: f64,
    ops: Arc<Ops>,
}

impl SquareDomain {
    pub fn new(n: usize) -> Result<Self> {
        if n < 16 {
            return Err(Error::Config(format!("grid needs n >= 16 cells per side, got {n}")));
        }
        let h = 1.0 / n as f64;
        let ops = Ops {
            nodes: Separable {
                y: Transform::dst_nodes(n, h),
                x: Transform::dst_nodes(n, h),
            },
            cells: Separable {
                y: Transform::dct_centres(n, h),
                x: Transform::dct_centres(n, h),
            },
            u_faces: Separable {
                y: Transform::dst_centres(n, h),
                x: Transform::dst_nodes(n, h),
            },
            v_faces: Separable {
                y: Transform::dst_nodes(n, h),
                x: Transform::dst_centres(n, h),
            },
        };
        Ok(Self {
            n,
            h,
            ops: Arc::new(ops),
        })
    }

    pub fn perimeter(&self) -> f64 {
        4.0
    }

    /// Number of boundary nodes (and segments).
    pub fn boundary_len(&self) -> usize {
        4 * self.n
    }

    pub fn side_of_segment(&self, k: usize) -> Side {
        [Side::Bottom, Side::Right, Side::Top, Side::Left][(k / self.n) % 4]
    }

    pub fn is_corner(&self, k: usize) -> bool {
        k.is_multiple_of(self.n)
    }

    /// Grid indices `(i, j)` of boundary node `k`.
    pub fn boundary_node(&self, k: usize) -> (usize, usize) {
        let n = self.n;
        let k = k % (4 * n);
        match k / n {
            0 => (k, 0),
            1 => (n, k - n),
            2 => (3 * n - k, n),
            _ => (0, 4 * n - k),
        }
    }

    /// Interior neighbour of a non-corner boundary node, `depth` cells in.
    pub fn inward(&self, k: usize, depth: usize) -> (usize, usize) {
        let (i, j) = self.boundary_node(k);
        match self.side_of_segment(k) {
            Side::Bottom => (i, depth),
            Side::Right => (self.n - depth, j),
            Side::Top => (i, self.n - depth),
            Side::Left => (depth, j),
        }
    }

    /// Arclength of boundary node `k`.
    pub fn node_s(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    /// Point on the boundary at arclength `s` (taken mod 4).
    pub fn boundary_point(&self, s: f64) -> [f64; 2] {
        let s = s.rem_euclid(4.0);
        match s as usize {
            0 => [s, 0.0],
            1 => [1.0, s - 1.0],
            2 => [3.0 - s, 1.0],
            _ => [0.0, 4.0 - s],
        }
    }

    /// Distance of `(x, y)` to the boundary.
    pub fn dist(x: f64, y: f64) -> f64 {
        x.min(1.0 - x).min(y).min(1.0 - y)
    }

    /// Solves the 5-point Dirichlet Poisson problem `D_h X = F` on interior
    /// nodes (`(n-1) x (n-1)`, zero boundary).
    pub fn poisson_nodes(&self, f: &DMatrix<f64>) -> DMatrix<f64> {
        self.ops.nodes.solve(f, 0.0, 1.0)
    }

    /// Neumann Poisson on cell centres; the mean of `f` is discarded and
    /// the solution has zero mean.
    pub fn poisson_cells(&self, f: &DMatrix<f64>) -> DMatrix<f64> {
        self.ops.cells.solve(f, 0.0, 1.0)
    }

    /// `(I - c D_h) X = F` on interior `u` faces (`n x (n-1)`), zero wall data.
    pub fn helmholtz_u(&self, f: &DMatrix<f64>, c: f64) -> DMatrix<f64> {
        self.ops.u_faces.solve(f, 1.0, -c)
    }

    /// `(I - c D_h) X = F` on interior `v` faces (`(n-1) x n`).
    pub fn helmholtz_v(&self, f: &DMatrix<f64>, c: f64) -> DMatrix<f64> {
        self.ops.v_faces.solve(f, 1.0, -c)
    }
}

/// Tangential wall values used by ghost cells, one per node along each side
/// (index = the running grid coordinate, `0..=n`).
#[derive(Debug, Clone, PartialEq)]
pub struct WallValues {
    /// `u` on `y = 0` and `y = 1`.
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
    /// `v` on `x = 0` and `x = 1`.
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl WallValues {
    pub fn zero(n: usize) -> Self {
        Self {
            bottom: vec![0.0; n + 1],
            top: vec![0.0; n + 1],
            left: vec![0.0; n + 1],
            right: vec![0.0; n + 1],
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let s = |v: &Vec<f64>| v.iter().map(|x| c * x).collect();
        Self {
            bottom: s(&self.bottom),
            top: s(&self.top),
            left: s(&self.left),
            right: s(&self.right),
        }
    }

    pub fn add_scaled(&mut self, c: f64, other: &WallValues) {
        for (a, b) in [
            (&mut self.bottom, &other.bottom),
            (&mut self.top, &other.top),
            (&mut self.left, &other.left),
            (&mut self.right, &other.right),
        ] {
            for (x, y) in a.iter_mut().zip(b) {
                *x += c * y;
            }
        }
    }
}

/// Staggered velocity field.
#[derive(Debug, Clone, PartialEq)]
pub struct MacField {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl MacField {
    pub fn zeros(n: usize) -> Self {
        Self {
            u: DMatrix::zeros(n, n + 1),
            v: DMatrix::zeros(n + 1, n),
        }
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    /// `curl^perp psi = (-psi_y, psi_x)` from node values; divergence-free by
    /// construction.
    pub fn from_stream(psi: &DMatrix<f64>, h: f64) -> Self {
        let n = psi.nrows() - 1;
        let u = DMatrix::from_fn(n, n + 1, |j, i| -(psi[(j + 1, i)] - psi[(j, i)]) / h);
        let v = DMatrix::from_fn(n + 1, n, |j, i| (psi[(j, i + 1)] - psi[(j, i)]) / h);
        Self { u, v }
    }

    pub fn divergence(&self, h: f64) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |j, i| {
            (self.u[(j, i + 1)] - self.u[(j, i)] + self.v[(j + 1, i)] - self.v[(j, i)]) / h
        })
    }

    pub fn max_divergence(&self, h: f64) -> f64 {
        self.divergence(h).amax()
    }

    /// Net outward flux through the boundary faces.
    pub fn boundary_flux(&self, h: f64) -> f64 {
        let n = self.n();
        let mut f = 0.0;
        for j in 0..n {
            f += self.u[(j, n)] - self.u[(j, 0)];
        }
        for i in 0..n {
            f += self.v[(n, i)] - self.v[(0, i)];
        }
        f * h
    }

    pub fn axpy(&mut self, c: f64, other: &MacField) {
        self.u += &other.u * c;
        self.v += &other.v * c;
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            u: &self.u * c,
            v: &self.v * c,
        }
    }

    /// The field rotated a quarter turn about the centre of the square.
    pub fn quarter_turn(&self) -> Self {
        let n = self.n();
        Self {
            u: DMatrix::from_fn(n, n + 1, |j, i| -self.v[(i, n - 1 - j)]),
            v: DMatrix::from_fn(n + 1, n, |j, i| self.u[(n - 1 - i, j)]),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.u.amax().max(self.v.amax())
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }

    /// Interior faces, `u` then `v`, row by row; the state layout.
    pub fn interior(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(2 * n * (n - 1));
        for j in 0..n {
            for i in 1..n {
                out.push(self.u[(j, i)]);
            }
        }
        for j in 1..n {
            for i in 0..n {
                out.push(self.v[(j, i)]);
            }
        }
        out
    }

    /// Inverse of [`interior`](Self::interior); boundary faces are zero.
    pub fn from_interior(n: usize, x: &[f64]) -> Result<Self> {
        if x.len() != 2 * n * (n - 1) {
            return Err(Error::InvalidInput(format!(
                "state of length {} does not fit a {n}x{n} MAC grid",
                x.len()
            )));
        }
        let mut f = Self::zeros(n);
        let mut it = x.iter();
        for j in 0..n {
            for i in 1..n {
                f.u[(j, i)] = *it.next().unwrap();
            }
        }
        for j in 1..n {
            for i in 0..n {
                f.v[(j, i)] = *it.next().unwrap();
            }
        }
        Ok(f)
    }

    /// Discrete inner product over interior faces, cell area `h^2`.
    pub fn dot(&self, other: &MacField, h: f64) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for j in 0..n {
            for i in 1..n {
                s += self.u[(j, i)] * other.u[(j, i)];
            }
        }
        for j in 1..n {
            for i in 0..n {
                s += self.v[(j, i)] * other.v[(j, i)];
            }
        }
        s * h * h
    }

    pub fn l2_sq(&self, h: f64) -> f64 {
        self.dot(self, h)
    }

    /// 5-point Laplacian on interior faces; tangential wall values enter
    /// through ghost faces, boundary-normal faces are read from the field.
    pub fn laplacian(&self, h: f64, wall: &WallValues) -> MacField {
        let n = self.n();
        let h2 = h * h;
        let mut out = MacField::zeros(n);
        for j in 0..n {
            for i in 1..n {
                let c = self.u[(j, i)];
                let below = if j == 0 {
                    2.0 * wall.bottom[i] - c
                } else {
                    self.u[(j - 1, i)]
                };
                let above = if j == n - 1 {
                    2.0 * wall.top[i] - c
                } else {
                    self.u[(j + 1, i)]
                };
                out.u[(j, i)] = (self.u[(j, i - 1)] + self.u[(j, i + 1)] + below + above - 4.0 * c) / h2;
            }
        }
        for j in 1..n {
            for i in 0..n {
                let c = self.v[(j, i)];
                let left = if i == 0 {
                    2.0 * wall.left[j] - c
                } else {
                    self.v[(j, i - 1)]
                };
                let right = if i == n - 1 {
                    2.0 * wall.right[j] - c
                } else {
                    self.v[(j, i + 1)]
                };
                out.v[(j, i)] = (self.v[(j - 1, i)] + self.v[(j + 1, i)] + left + right - 4.0 * c) / h2;
            }
        }
        out
    }

    /// `|grad v|^2 = -(D_h v, v)` for fields vanishing on the wall.
    pub fn h1_sq(&self, h: f64) -> f64 {
        let lap = self.laplacian(h, &WallValues::zero(self.n()));
        -lap.dot(self, h)
    }

    /// Advective term `(U . grad) U` on interior faces: second-order upwind
    /// where the stencil stays on real faces, first order next to walls.
    pub fn advection(&self, h: f64, wall: &WallValues) -> MacField {
        let n = self.n();
        let mut out = MacField::zeros(n);
        let u = &self.u;
        let v = &self.v;
        for j in 0..n {
            for i in 1..n {
                let a = u[(j, i)];
                let b = 0.25 * (v[(j, i - 1)] + v[(j, i)] + v[(j + 1, i - 1)] + v[(j + 1, i)]);
                let dx = if a >= 0.0 {
                    if i >= 2 {
                        (3.0 * a - 4.0 * u[(j, i - 1)] + u[(j, i - 2)]) / (2.0 * h)
                    } else {
                        (a - u[(j, i - 1)]) / h
                    }
                } else if i + 2 <= n {
                    (-3.0 * a + 4.0 * u[(j, i + 1)] - u[(j, i + 2)]) / (2.0 * h)
                } else {
                    (u[(j, i + 1)] - a) / h
                };
                let col = |jj: isize| -> f64 {
                    if jj < 0 {
                        2.0 * wall.bottom[i] - u[(0, i)]
                    } else if jj >= n as isize {
                        2.0 * wall.top[i] - u[(n - 1, i)]
                    } else {
                        u[(jj as usize, i)]
                    }
                };
                let jj = j as isize;
                let dy = if b >= 0.0 {
                    if j >= 2 {
                        (3.0 * a - 4.0 * col(jj - 1) + col(jj - 2)) / (2.0 * h)
                    } else {
                        (a - col(jj - 1)) / h
                    }
                } else if j + 2 < n {
                    (-3.0 * a + 4.0 * col(jj + 1) - col(jj + 2)) / (2.0 * h)
                } else {
                    (col(jj + 1) - a) / h
                };
                out.u[(j, i)] = a * dx + b * dy;
            }
        }
        for j in 1..n {
            for i in 0..n {
                let b = v[(j, i)];
                let a = 0.25 * (u[(j - 1, i)] + u[(j - 1, i + 1)] + u[(j, i)] + u[(j, i + 1)]);
                let dy = if b >= 0.0 {
                    if j >= 2 {
                        (3.0 * b - 4.0 * v[(j - 1, i)] + v[(j - 2, i)]) / (2.0 * h)
                    } else {
                        (b - v[(j - 1, i)]) / h
                    }
                } else if j + 2 <= n {
                    (-3.0 * b + 4.0 * v[(j + 1, i)] - v[(j + 2, i)]) / (2.0 * h)
                } else {
                    (v[(j + 1, i)] - b) / h
                };
                let row = |ii: isize| -> f64 {
                    if ii < 0 {
                        2.0 * wall.left[j] - v[(j, 0)]
                    } else if ii >= n as isize {
                        2.0 * wall.right[j] - v[(j, n - 1)]
                    } else {
                        v[(j, ii as usize)]
                    }
                };
                let ii = i as isize;
                let dx = if a >= 0.0 {
                    if i >= 2 {
                        (3.0 * b - 4.0 * row(ii - 1) + row(ii - 2)) / (2.0 * h)
                    } else {
                        (b - row(ii - 1)) / h
                    }
                } else if i + 2 < n {
                    (-3.0 * b + 4.0 * row(ii + 1) - row(ii + 2)) / (2.0 * h)
                } else {
                    (row(ii + 1) - b) / h
                };
                out.v[(j, i)] = a * dx + b * dy;
            }
        }
        out
    }

    /// Collocated velocity at node `(i, j)` by averaging adjacent faces
    /// (interior nodes only; boundary nodes use the wall values).
    pub fn node_velocity(&self, i: usize, j: usize, wall: &WallValues) -> [f64; 2] {
        let n = self.n();
        let ux = if j == 0 {
            wall.bottom[i]
        } else if j == n {
            wall.top[i]
        } else {
            0.5 * (self.u[(j - 1, i)] + self.u[(j, i)])
        };
        let vy = if i == 0 {
            wall.left[j]
        } else if i == n {
            wall.right[j]
        } else {
            0.5 * (self.v[(j, i - 1)] + self.v[(j, i)])
        };
        [ux, vy]
    }
}

/// Node values of a function on the closed square.
pub fn node_grid(n: usize, f: impl Fn(f64, f64) -> f64) -> DMatrix<f64> {
    let h = 1.0 / n as f64;
    DMatrix::from_fn(n + 1, n + 1, |j, i| f(i as f64 * h, j as f64 * h))
}
